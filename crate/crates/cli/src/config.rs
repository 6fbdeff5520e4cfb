//! Pipeline configuration: one JSON document, every field optional.
//!
//! Precedence, highest first: command-line flags, the `--config` file, the
//! built-in defaults.

use std::path::{Path, PathBuf};

use morphoscope::phantom::PhantomSpec;
use morphoscope::register::RegistrationConfig;
use morphoscope::template::TemplateConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    pub quantiles: Vec<f64>,
    pub regions: Vec<String>,
    /// Age of the reference template subjects are registered to.
    pub reference_age: u32,
    /// Age of the older template the aging field is estimated against.
    pub old_age: u32,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            quantiles: (0..10).map(|i| i as f64 / 10.0).collect(),
            regions: REGION_NAMES.iter().map(|s| s.to_string()).collect(),
            reference_age: 60,
            old_age: 90,
        }
    }
}

pub const REGION_NAMES: [&str; 4] = ["ventricles", "hippocampi_amygdala", "whole_brain", "ventricle_edges"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BonferroniPolicy {
    /// m = pairwise tests performed for one region and score kind.
    PerRegionScore,
    /// m = every pairwise test of the run.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub reference_group: String,
    pub bonferroni: BonferroniPolicy,
    pub welch: bool,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self { reference_group: "CN".into(), bonferroni: BonferroniPolicy::PerRegionScore, welch: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub n_cn: usize,
    pub n_ad_per_stage: usize,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self { n_cn: 20, n_ad_per_stage: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    /// Directory every stage reads from and writes to.
    pub work_dir: PathBuf,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self { work_dir: PathBuf::from(".") }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub registration: RegistrationConfig,
    pub template: TemplateConfig,
    pub scoring: ScoringConfig,
    pub stats: StatsConfig,
    pub phantom: PhantomSpec,
    pub cohort: CohortConfig,
    pub io: IoConfig,
}

impl PipelineConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("{}: {e}", origin.display())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.registration.validate()?;
        self.template.validate()?;
        let s = &self.scoring;
        if s.quantiles.is_empty() {
            return Err(CliError::Validation("scoring.quantiles must not be empty".into()));
        }
        for &q in &s.quantiles {
            let tenths = q * 10.0;
            if !(0.0..=9.0).contains(&tenths.round()) || (tenths - tenths.round()).abs() > 1e-9 {
                return Err(CliError::Validation(format!("quantile {q} not on the 0.0..0.9 grid of step 0.1")));
            }
        }
        for r in &s.regions {
            if !REGION_NAMES.contains(&r.as_str()) {
                return Err(CliError::Validation(format!("unknown region {r:?}, expected one of {REGION_NAMES:?}")));
            }
        }
        if s.old_age <= s.reference_age {
            return Err(CliError::Validation(format!(
                "scoring.old_age {} must exceed reference_age {}",
                s.old_age, s.reference_age
            )));
        }
        if self.stats.reference_group.trim().is_empty() {
            return Err(CliError::Validation("stats.reference_group must not be empty".into()));
        }
        if self.phantom.dims.iter().any(|&n| n < 8) {
            return Err(CliError::Validation(format!("phantom dims {:?} must be >= 8", self.phantom.dims)));
        }
        if !(self.phantom.noise_sigma >= 0.0) {
            return Err(CliError::Validation("phantom.noise_sigma must be >= 0".into()));
        }
        if self.cohort.n_cn + self.cohort.n_ad_per_stage == 0 {
            return Err(CliError::Validation("cohort must have at least one subject".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form; every field takes part.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex_digest(json.as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
