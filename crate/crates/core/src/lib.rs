//! Deformation-based morphometry on 3D volumes.
//!
//! Stationary velocity field registration, age-conditioned templates, and
//! the decomposition of a subject's deformation into a normal-aging part
//! (aging score, AS) and a residual (AD-specific score, ADS).

pub mod error;
pub mod filter;
pub mod io;
pub mod phantom;
pub mod register;
pub mod scores;
pub mod stats;
pub mod svf;
pub mod template;
pub mod volume;

pub use error::{Error, Result};
pub use register::{lncc, register, register_masked, regularizer, RegistrationConfig, RegistrationResult};
pub use scores::{one_year_field, quantile_threshold, regional_score, voxel_scores, AgingField, RegionSpec, VoxelScores};
pub use svf::{exp, inverse_deformation, jacobian_determinant, Svf};
pub use template::{build_template, efc, ventricle_edge_map, TemplateModel};
pub use volume::{compose, warp, FieldKind, Grid3, LabelVolume, ScalarVolume, Vec3, VectorField3};
