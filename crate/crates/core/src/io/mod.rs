//! NIfTI-1 volumes and CSV tables.

pub mod nifti;
pub mod tables;

pub use nifti::{
    field_paths, read_field, read_labels, read_nifti, read_scalar, write_field, write_labels, write_nifti,
    write_scalar, NiftiVolume,
};
pub use tables::{
    format_sig6, read_cohort_csv, read_scores_csv, write_cohort_csv, write_scores_csv, write_table, write_text,
    CohortRow, CohortTable, Group, RegionScoreRow, ScoreKind, CDR_LEVELS, COHORT_COLUMNS, SCORE_COLUMNS,
};
