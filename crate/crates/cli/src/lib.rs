//! Command-line front end: argument parsing, configuration precedence and the
//! pipeline stages.

pub mod config;
pub mod error;
pub mod manifest;
pub mod stages;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{BonferroniPolicy, PipelineConfig};
use crate::error::CliError;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  usage error
  2  missing input or I/O failure
  3  validation failure
  4  numerical failure";

#[derive(Debug, Parser)]
#[command(name = "morphoscope", version, about = "Deformation-based morphometry pipeline", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON configuration; flags override it, it overrides the defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Work directory (default: the configured io.work_dir).
    #[arg(long, short = 'd', global = true)]
    pub dir: Option<PathBuf>,
    /// Worker threads (default: $MORPHOSCOPE_JOBS, else all cores).
    #[arg(long, short = 'j', global = true, env = "MORPHOSCOPE_JOBS")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic cohort with reference segmentations.
    PhantomGen {
        #[arg(long)]
        seed: Option<u64>,
        /// Cube side length in voxels.
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        n_cn: Option<usize>,
        #[arg(long)]
        n_ad_per_stage: Option<usize>,
    },
    /// Build the age-conditioned template `T<age>_img.nii` from healthy subjects.
    TemplateBuild {
        #[arg(long)]
        age: u32,
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Register a moving image to a fixed image; writes `<out>_x/_y/_z.nii`.
    Register {
        #[arg(long)]
        fixed: PathBuf,
        #[arg(long)]
        moving: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Label file whose nonzero voxels restrict the similarity.
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// One-year aging field from a young and an old template.
    AgingField {
        #[arg(long)]
        young: Option<PathBuf>,
        #[arg(long)]
        old: Option<PathBuf>,
        #[arg(long)]
        young_age: Option<u32>,
        #[arg(long)]
        old_age: Option<u32>,
        /// Output prefix (default: `<dir>/v0`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Register every subject to the reference template and write `scores.csv`.
    Score,
    /// Fit healthy aging scores against age and select a quantile per region.
    StatsFit,
    /// Age-adjusted group comparisons.
    StatsCompare {
        /// Unequal-variance t-test.
        #[arg(long)]
        welch: bool,
        /// Bonferroni over every test of the run instead of per region and score.
        #[arg(long)]
        global_bonferroni: bool,
    },
    /// Entropy focus criterion of an image.
    Efc {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Every stage in order on a fresh phantom cohort.
    Pipeline,
}

/// Config after applying file and flag overrides; validated.
pub fn resolve_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &cli.global.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(d) = &cli.global.dir {
        cfg.io.work_dir = d.clone();
    }
    match &cli.command {
        Command::PhantomGen { seed, size, n_cn, n_ad_per_stage } => {
            if let Some(s) = seed {
                cfg.phantom.seed = *s;
            }
            if let Some(n) = size {
                cfg.phantom.dims = [*n; 3];
            }
            if let Some(n) = n_cn {
                cfg.cohort.n_cn = *n;
            }
            if let Some(n) = n_ad_per_stage {
                cfg.cohort.n_ad_per_stage = *n;
            }
        }
        Command::TemplateBuild { bandwidth, iters, .. } => {
            if let Some(b) = bandwidth {
                cfg.template.bandwidth = *b;
            }
            if let Some(i) = iters {
                cfg.template.outer_iters = *i;
            }
        }
        Command::AgingField { young_age, old_age, .. } => {
            if let Some(a) = young_age {
                cfg.scoring.reference_age = *a;
            }
            if let Some(a) = old_age {
                cfg.scoring.old_age = *a;
            }
        }
        Command::StatsCompare { welch, global_bonferroni } => {
            cfg.stats.welch |= *welch;
            if *global_bonferroni {
                cfg.stats.bonferroni = BonferroniPolicy::Global;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one parsed command inside a pool of the requested size.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.global.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&cli.command, &cfg))
}

fn dispatch(command: &Command, cfg: &PipelineConfig) -> Result<(), CliError> {
    let dir: &Path = &cfg.io.work_dir;
    let layout = stages::Layout::new(dir);
    match command {
        Command::PhantomGen { .. } => stages::phantom_gen(cfg, dir).map(drop),
        Command::TemplateBuild { age, .. } => stages::template_build(cfg, dir, *age).map(drop),
        Command::Register { fixed, moving, out, mask } => {
            stages::register_pair(cfg, fixed, moving, out, mask.as_deref()).map(drop)
        }
        Command::AgingField { young, old, out, mask, .. } => {
            let (ya, oa) = (cfg.scoring.reference_age, cfg.scoring.old_age);
            let young = young.clone().unwrap_or_else(|| layout.template(ya));
            let old = old.clone().unwrap_or_else(|| layout.template(oa));
            let out = out.clone().unwrap_or_else(|| layout.v0());
            let mask = mask.clone().or_else(|| Some(layout.template_seg(ya)).filter(|p| p.exists()));
            stages::aging_field(cfg, &young, &old, f64::from(ya), f64::from(oa), &out, mask.as_deref()).map(drop)
        }
        Command::Score => stages::score(cfg, dir).map(drop),
        Command::StatsFit => stages::stats_fit(cfg, dir).map(drop),
        Command::StatsCompare { .. } => stages::stats_compare(cfg, dir).map(drop),
        Command::Efc { image, mask } => {
            let value = stages::efc_of(image, mask.as_deref())?;
            println!("{}", morphoscope::io::format_sig6(value));
            Ok(())
        }
        Command::Pipeline => stages::pipeline(cfg, dir),
    }
}
