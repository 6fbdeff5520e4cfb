//! Pipeline stages. Each reads its inputs from the work directory, writes its
//! artifacts next to them and leaves a manifest under `manifests/`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use morphoscope::io::{
    format_sig6, read_cohort_csv, read_field, read_labels, read_scalar, read_scores_csv, write_cohort_csv, write_field,
    write_labels, write_scalar, write_scores_csv, write_table, CohortTable, Group, RegionScoreRow, ScoreKind,
};
use morphoscope::phantom::PhantomGenerator;
use morphoscope::register::register_masked;
use morphoscope::scores::{
    aging_from_svf, regional_score, voxel_scores, AgingField, RegionSpec, VENTRICLE_LABELS,
};
use morphoscope::stats::{
    ancova_adjust, compare_groups, fit_linear, select_quantile, stars, FitResult, GroupComparison, MIN_TEST_GROUP,
};
use morphoscope::svf::Svf;
use morphoscope::template::{build_template_logged, efc, ventricle_edge_map, CohortImage};
use morphoscope::volume::{FieldKind, LabelVolume, ScalarVolume};
use rayon::prelude::*;

use crate::config::{BonferroniPolicy, PipelineConfig};
use crate::error::CliError;
use crate::manifest::Manifest;

pub const FIT_COLUMNS: [&str; 6] = ["region", "q", "slope", "intercept", "r2", "p"];
pub const SELECTION_COLUMNS: [&str; 5] = ["region", "q", "r2", "slope", "n"];
pub const COMPARE_COLUMNS: [&str; 9] = ["region", "score_kind", "pair", "t", "p_raw", "p_bonf", "stars", "d", "band"];
pub const GROUP_COLUMNS: [&str; 6] = ["region", "score_kind", "group", "n", "mean", "sd"];
pub const BUILD_LOG_COLUMNS: [&str; 3] = ["iteration", "mean_u", "efc"];

/// Strata in reporting order.
const STRATA: [&str; 5] = ["CN", "CDR0", "CDR0.5", "CDR1", "CDR2"];

/// File names inside the work directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub dir: PathBuf,
}

impl Layout {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn cohort(&self) -> PathBuf {
        self.dir.join("cohort.csv")
    }

    pub fn template(&self, age: u32) -> PathBuf {
        self.dir.join(format!("T{age}_img.nii"))
    }

    pub fn template_seg(&self, age: u32) -> PathBuf {
        self.dir.join(format!("T{age}_seg.nii"))
    }

    pub fn build_log(&self, age: u32) -> PathBuf {
        self.dir.join(format!("T{age}_build_log.csv"))
    }

    pub fn v0(&self) -> PathBuf {
        self.dir.join("v0")
    }

    pub fn scores(&self) -> PathBuf {
        self.dir.join("scores.csv")
    }

    pub fn fit(&self) -> PathBuf {
        self.dir.join("fit.csv")
    }

    pub fn selection(&self) -> PathBuf {
        self.dir.join("quantile_selection.csv")
    }

    pub fn compare(&self) -> PathBuf {
        self.dir.join("compare.csv")
    }

    pub fn groups(&self) -> PathBuf {
        self.dir.join("groups.csv")
    }

    /// The CSV artifacts a full run produces.
    pub fn csv_outputs(&self, cfg: &PipelineConfig) -> Vec<PathBuf> {
        let mut out = vec![self.cohort()];
        out.extend(cfg.template.ages.iter().map(|&a| self.build_log(a)));
        out.extend([self.scores(), self.fit(), self.selection(), self.compare(), self.groups()]);
        out
    }
}

fn require(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingInput(path.display().to_string()))
    }
}

fn require_field(prefix: &Path) -> Result<(), CliError> {
    for p in morphoscope::io::field_paths(prefix) {
        require(&p)?;
    }
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn log(msg: impl AsRef<str>) {
    eprintln!("[morphoscope] {}", msg.as_ref());
}

/// Seeded phantom cohort: images, labels, `cohort.csv` and reference
/// segmentations `T<age>_seg.nii` for every template age.
pub fn phantom_gen(cfg: &PipelineConfig, dir: &Path) -> Result<Manifest, CliError> {
    ensure_dir(&dir.join("images"))?;
    let layout = Layout::new(dir);
    let gen = PhantomGenerator::new(cfg.phantom.clone());
    let cohort = gen.cohort(cfg.cohort.n_cn, cfg.cohort.n_ad_per_stage)?;
    let mut m = Manifest::new("phantom-gen", cfg);
    let mut table = cohort.table.clone();
    for (row, subject) in table.rows.iter_mut().zip(&cohort.subjects) {
        row.path = format!("images/{}_img.nii", row.scan_id);
        write_scalar(&subject.image, dir.join(&row.path))?;
        write_labels(&subject.labels, dir.join(format!("images/{}_seg.nii", row.scan_id)))?;
    }
    write_cohort_csv(&table, layout.cohort())?;
    m.output(&layout.cohort());
    let truth: Vec<Vec<String>> = table
        .rows
        .iter()
        .zip(&cohort.severities)
        .map(|(r, s)| vec![r.scan_id.clone(), format_sig6(r.age), format_sig6(*s)])
        .collect();
    let truth_path = dir.join("phantom_truth.csv");
    write_table(&truth_path, &["scan_id", "age", "severity"], &truth)?;
    m.output(&truth_path);
    let mut ages: Vec<u32> = cfg.template.ages.clone();
    ages.extend([cfg.scoring.reference_age, cfg.scoring.old_age]);
    ages.sort_unstable();
    ages.dedup();
    for age in ages {
        let reference = gen.reference(f64::from(age))?;
        write_labels(&reference.labels, layout.template_seg(age))?;
        m.output(&layout.template_seg(age));
    }
    m.param("subjects", table.rows.len());
    m.param("phantom", &cfg.phantom);
    m.write(dir, "phantom-gen")?;
    log(format!("phantom-gen: {} subjects in {}", table.rows.len(), dir.display()));
    Ok(m)
}

fn load_cohort(layout: &Layout) -> Result<CohortTable, CliError> {
    require(&layout.cohort())?;
    Ok(read_cohort_csv(layout.cohort())?)
}

fn load_mask(path: &Path) -> Result<Option<LabelVolume>, CliError> {
    if path.exists() {
        Ok(Some(read_labels(path)?))
    } else {
        Ok(None)
    }
}

/// Age-conditioned template from the healthy subjects of the cohort.
pub fn template_build(cfg: &PipelineConfig, dir: &Path, age: u32) -> Result<Manifest, CliError> {
    let layout = Layout::new(dir);
    let table = load_cohort(&layout)?;
    let mut m = Manifest::new("template-build", cfg);
    m.input(&layout.cohort())?;
    let rows: Vec<_> = table.rows.iter().filter(|r| r.group == Group::CN).collect();
    let cohort = rows
        .par_iter()
        .map(|r| {
            let path = dir.join(&r.path);
            require(&path)?;
            Ok(CohortImage { id: r.scan_id.clone(), image: read_scalar(&path)?, age: r.age })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let seg = load_mask(&layout.template_seg(age))?;
    if seg.is_some() {
        m.input(&layout.template_seg(age))?;
    }
    let mask = seg.as_ref().map(LabelVolume::foreground);
    let build = build_template_logged(
        &cohort,
        f64::from(age),
        cfg.template.bandwidth,
        &cfg.registration,
        cfg.template.outer_iters,
        mask.as_deref(),
    )?;
    write_scalar(&build.template, layout.template(age))?;
    let log_rows: Vec<Vec<String>> = build
        .log
        .iter()
        .map(|e| vec![e.iteration.to_string(), format_sig6(e.mean_u), format_sig6(e.efc)])
        .collect();
    write_table(layout.build_log(age), &BUILD_LOG_COLUMNS, &log_rows)?;
    m.output(&layout.template(age));
    m.output(&layout.build_log(age));
    m.param("age", age);
    m.param("weights", &build.weights);
    m.param("final_mean_u", build.log.last().map(|e| e.mean_u));
    m.write(dir, &format!("template-build-T{age}"))?;
    log(format!("template-build: T{age} from {} subjects", build.weights.len()));
    Ok(m)
}

/// Pairwise registration; the field is written as `<out>_x/_y/_z.nii`.
pub fn register_pair(
    cfg: &PipelineConfig,
    fixed: &Path,
    moving: &Path,
    out: &Path,
    mask: Option<&Path>,
) -> Result<Manifest, CliError> {
    require(fixed)?;
    require(moving)?;
    let f = read_scalar(fixed)?;
    let mv = read_scalar(moving)?;
    let mut m = Manifest::new("register", cfg);
    m.input(fixed)?;
    m.input(moving)?;
    let mask = match mask {
        Some(p) => {
            require(p)?;
            m.input(p)?;
            Some(read_labels(p)?.foreground())
        }
        None => None,
    };
    let res = register_masked(&f, &mv, mask.as_deref(), &cfg.registration)?;
    write_field(&res.svf.field, out)?;
    for p in morphoscope::io::field_paths(out) {
        m.output(&p);
    }
    m.param("final_energy", res.final_energy);
    m.param("final_lncc", res.final_lncc);
    m.param("min_jacobian", res.min_jacobian);
    m.param("energy_trace", &res.energy_trace);
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let stem = out.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "field".into());
    m.write(dir, &format!("register-{stem}"))?;
    log(format!("register: lncc {:.4}, min jacobian {:.4}", res.final_lncc, res.min_jacobian));
    Ok(m)
}

/// One-year aging field `v0 = register(young, old) / (old_age - young_age)`.
pub fn aging_field(
    cfg: &PipelineConfig,
    young: &Path,
    old: &Path,
    young_age: f64,
    old_age: f64,
    out: &Path,
    mask: Option<&Path>,
) -> Result<Manifest, CliError> {
    if !(old_age > young_age) {
        return Err(CliError::Validation(format!("old age {old_age} must exceed young age {young_age}")));
    }
    require(young)?;
    require(old)?;
    let ty = read_scalar(young)?;
    let to = read_scalar(old)?;
    let mut m = Manifest::new("aging-field", cfg);
    m.input(young)?;
    m.input(old)?;
    let mask = match mask {
        Some(p) => {
            require(p)?;
            m.input(p)?;
            Some(read_labels(p)?.foreground())
        }
        None => None,
    };
    let res = register_masked(&ty, &to, mask.as_deref(), &cfg.registration)?;
    let aging = aging_from_svf(res.svf, young_age, old_age)?;
    write_field(&aging.v0.field, out)?;
    for p in morphoscope::io::field_paths(out) {
        m.output(&p);
    }
    m.param("young_age", young_age);
    m.param("old_age", old_age);
    m.param("gap_years", aging.gap_years);
    m.param("scale", 1.0 / aging.gap_years);
    m.param("final_lncc", res.final_lncc);
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    m.write(dir, "aging-field")?;
    log(format!("aging-field: scale 1/{}", format_sig6(aging.gap_years)));
    Ok(m)
}

/// Resolves configured region names against the reference segmentation.
pub fn regions(cfg: &PipelineConfig, layout: &Layout, seg: &LabelVolume) -> Result<Vec<RegionSpec>, CliError> {
    cfg.scoring
        .regions
        .iter()
        .map(|name| match name.as_str() {
            "ventricles" => Ok(RegionSpec::ventricles()),
            "hippocampi_amygdala" => Ok(RegionSpec::hippocampi_amygdala()),
            "whole_brain" => Ok(RegionSpec::whole_brain()),
            "ventricle_edges" => {
                let old = layout.template_seg(cfg.scoring.old_age);
                require(&old)?;
                let edges = ventricle_edge_map(seg, &read_labels(&old)?, &VENTRICLE_LABELS)?;
                Ok(RegionSpec::ventricle_edges(&edges))
            }
            other => Err(CliError::Validation(format!("unknown region {other:?}"))),
        })
        .collect()
}

/// Regional scores of one subject field at every configured quantile.
pub fn subject_rows(
    v: &Svf,
    aging: &AgingField,
    regions: &[RegionSpec],
    labels: &LabelVolume,
    quantiles: &[f64],
    scan_id: &str,
) -> Result<Vec<RegionScoreRow>, CliError> {
    let vs = voxel_scores(v, aging)?;
    let mut rows = Vec::with_capacity(2 * regions.len() * quantiles.len());
    for region in regions {
        for &q in quantiles {
            let (a, d) = regional_score(&vs, region, labels, q, scan_id)?;
            rows.push(a);
            rows.push(d);
        }
    }
    Ok(rows)
}

/// Registers every subject to the reference template and writes `scores.csv`.
pub fn score(cfg: &PipelineConfig, dir: &Path) -> Result<Manifest, CliError> {
    let layout = Layout::new(dir);
    let table = load_cohort(&layout)?;
    let ref_age = cfg.scoring.reference_age;
    let (tpath, spath, v0) = (layout.template(ref_age), layout.template_seg(ref_age), layout.v0());
    require(&tpath)?;
    require(&spath)?;
    require_field(&v0)?;
    let mut m = Manifest::new("score", cfg);
    m.input(&layout.cohort())?;
    m.input(&tpath)?;
    m.input(&spath)?;
    for p in morphoscope::io::field_paths(&v0) {
        m.input(&p)?;
    }
    let template = read_scalar(&tpath)?;
    let seg = read_labels(&spath)?;
    let v0_field = Svf::new(read_field(&v0, FieldKind::Velocity)?)?;
    let aging = AgingField { v0: v0_field, gap_years: f64::from(cfg.scoring.old_age - ref_age), source: (f64::from(ref_age), f64::from(cfg.scoring.old_age)) };
    let regions = regions(cfg, &layout, &seg)?;
    let mask = seg.foreground();
    let mut quantiles = cfg.scoring.quantiles.clone();
    quantiles.sort_by(f64::total_cmp);
    quantiles.dedup();
    let per_subject = table
        .rows
        .par_iter()
        .map(|r| {
            let path = dir.join(&r.path);
            require(&path)?;
            let image = read_scalar(&path)?;
            let res = register_masked(&template, &image, Some(&mask), &cfg.registration)?;
            subject_rows(&res.svf, &aging, &regions, &seg, &quantiles, &r.scan_id)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let rows: Vec<RegionScoreRow> = per_subject.into_iter().flatten().collect();
    write_scores_csv(&rows, layout.scores())?;
    m.output(&layout.scores());
    m.param("subjects", table.rows.len());
    m.param("regions", &cfg.scoring.regions);
    m.param("quantiles", &quantiles);
    m.write(dir, "score")?;
    log(format!("score: {} rows", rows.len()));
    Ok(m)
}

/// Scores of one region, kind and quantile keyed by scan id.
fn score_map(rows: &[RegionScoreRow], region: &str, kind: ScoreKind, q: f64) -> BTreeMap<String, f64> {
    rows.iter()
        .filter(|r| r.region_name == region && r.score_kind == kind && (r.quantile - q).abs() < 1e-9)
        .map(|r| (r.scan_id.clone(), r.value))
        .collect()
}

fn region_order(rows: &[RegionScoreRow]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in rows {
        if !out.contains(&r.region_name) {
            out.push(r.region_name.clone());
        }
    }
    out
}

fn quantile_keys(rows: &[RegionScoreRow], region: &str) -> Vec<u8> {
    let mut qs: Vec<u8> = rows.iter().filter(|r| r.region_name == region).map(|r| (r.quantile * 10.0).round() as u8).collect();
    qs.sort_unstable();
    qs.dedup();
    qs
}

/// Healthy subjects' AS against age, per region and quantile, plus the
/// quantile with the best R² for each region.
pub fn stats_fit(cfg: &PipelineConfig, dir: &Path) -> Result<Manifest, CliError> {
    let layout = Layout::new(dir);
    let table = load_cohort(&layout)?;
    require(&layout.scores())?;
    let rows = read_scores_csv(layout.scores())?;
    let mut m = Manifest::new("stats-fit", cfg);
    m.input(&layout.cohort())?;
    m.input(&layout.scores())?;
    let cn: BTreeMap<&str, f64> =
        table.rows.iter().filter(|r| r.group == Group::CN).map(|r| (r.scan_id.as_str(), r.age)).collect();
    let mut fit_rows = Vec::new();
    let mut selection_rows = Vec::new();
    for region in region_order(&rows) {
        let mut per_q: BTreeMap<u8, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for k in quantile_keys(&rows, &region) {
            let scores = score_map(&rows, &region, ScoreKind::AS, f64::from(k) / 10.0);
            let (ages, values): (Vec<f64>, Vec<f64>) =
                scores.iter().filter_map(|(id, v)| cn.get(id.as_str()).map(|a| (*a, *v))).unzip();
            let fit = fit_linear(&ages, &values)?;
            fit_rows.push(fit_row(&region, f64::from(k) / 10.0, &fit));
            per_q.insert(k, (ages, values));
        }
        let (q, best) = select_quantile(&per_q)?;
        selection_rows.push(vec![
            region.clone(),
            format_sig6(q),
            format_sig6(best.r_squared),
            format_sig6(best.slope),
            best.n.to_string(),
        ]);
    }
    write_table(layout.fit(), &FIT_COLUMNS, &fit_rows)?;
    write_table(layout.selection(), &SELECTION_COLUMNS, &selection_rows)?;
    m.output(&layout.fit());
    m.output(&layout.selection());
    m.param("healthy_subjects", cn.len());
    m.write(dir, "stats-fit")?;
    log(format!("stats-fit: {} fits", fit_rows.len()));
    Ok(m)
}

fn fit_row(region: &str, q: f64, f: &FitResult) -> Vec<String> {
    vec![
        region.to_string(),
        format_sig6(q),
        format_sig6(f.slope),
        format_sig6(f.intercept),
        format_sig6(f.r_squared),
        format_sig6(f.p_value),
    ]
}

/// Selected quantile per region from `quantile_selection.csv`.
pub fn read_selection(path: &Path) -> Result<BTreeMap<String, f64>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let q: f64 = rec
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CliError::Validation(format!("{}: bad quantile in {rec:?}", path.display())))?;
        out.insert(rec.get(0).unwrap_or("").to_string(), q);
    }
    Ok(out)
}

/// One region and score kind: age-adjusted values grouped by stratum.
#[derive(Debug, Clone)]
pub struct StratifiedScores {
    pub region: String,
    pub kind: ScoreKind,
    pub quantile: f64,
    pub groups: Vec<(String, Vec<f64>)>,
}

/// ANCOVA-adjusted scores per stratum for every region and score kind.
pub fn stratify(
    rows: &[RegionScoreRow],
    table: &CohortTable,
    selection: &BTreeMap<String, f64>,
    reference_group: &str,
) -> Result<Vec<StratifiedScores>, CliError> {
    let mut out = Vec::new();
    for region in region_order(rows) {
        let q = selection.get(&region).copied().unwrap_or(0.0);
        for kind in [ScoreKind::AS, ScoreKind::ADS] {
            let scores = score_map(rows, &region, kind, q);
            let mut values = Vec::new();
            let mut ages = Vec::new();
            let mut strata = Vec::new();
            for r in &table.rows {
                if let Some(v) = scores.get(&r.scan_id) {
                    values.push(*v);
                    ages.push(r.age);
                    strata.push(r.stratum());
                }
            }
            if values.is_empty() {
                return Err(CliError::Validation(format!("no scores for region {region} at q = {q}")));
            }
            let labels: Vec<&str> = strata.iter().map(String::as_str).collect();
            let adjusted = ancova_adjust(&values, &ages, &labels, reference_group)?;
            let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
            let mut names: Vec<String> = STRATA.iter().map(|s| s.to_string()).collect();
            for s in &strata {
                if !names.contains(s) {
                    names.push(s.clone());
                }
            }
            for name in names {
                let g: Vec<f64> = adjusted.iter().zip(&strata).filter(|(_, s)| **s == name).map(|(v, _)| *v).collect();
                if !g.is_empty() {
                    groups.push((name, g));
                }
            }
            out.push(StratifiedScores { region: region.clone(), kind, quantile: q, groups });
        }
    }
    Ok(out)
}

/// Pairwise tests between every two testable strata of one block.
pub fn pairwise(block: &StratifiedScores, m: Option<usize>, welch: bool) -> Result<Vec<GroupComparison>, CliError> {
    let testable: Vec<&(String, Vec<f64>)> = block.groups.iter().filter(|(_, v)| v.len() >= MIN_TEST_GROUP).collect();
    let pairs = testable.len() * testable.len().saturating_sub(1) / 2;
    let m = m.unwrap_or(pairs);
    let mut out = Vec::with_capacity(pairs);
    for i in 0..testable.len() {
        for j in i + 1..testable.len() {
            let (a, b) = (testable[i], testable[j]);
            out.push(compare_groups(&a.0, &a.1, &b.0, &b.1, m, welch)?);
        }
    }
    Ok(out)
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { f64::NAN };
    (mean, sd)
}

/// Group comparisons of the age-adjusted scores at each region's selected quantile.
pub fn stats_compare(cfg: &PipelineConfig, dir: &Path) -> Result<Manifest, CliError> {
    let layout = Layout::new(dir);
    let table = load_cohort(&layout)?;
    require(&layout.scores())?;
    let rows = read_scores_csv(layout.scores())?;
    let mut m = Manifest::new("stats-compare", cfg);
    m.input(&layout.cohort())?;
    m.input(&layout.scores())?;
    let selection = if layout.selection().exists() {
        m.input(&layout.selection())?;
        read_selection(&layout.selection())?
    } else {
        BTreeMap::new()
    };
    let blocks = stratify(&rows, &table, &selection, &cfg.stats.reference_group)?;
    let global_m = match cfg.stats.bonferroni {
        BonferroniPolicy::Global => Some(
            blocks
                .iter()
                .map(|b| {
                    let k = b.groups.iter().filter(|(_, v)| v.len() >= MIN_TEST_GROUP).count();
                    k * k.saturating_sub(1) / 2
                })
                .sum(),
        ),
        BonferroniPolicy::PerRegionScore => None,
    };
    let mut compare_rows = Vec::new();
    let mut group_rows = Vec::new();
    for block in &blocks {
        for (name, v) in &block.groups {
            let (mean, sd) = mean_sd(v);
            group_rows.push(vec![
                block.region.clone(),
                block.kind.to_string(),
                name.clone(),
                v.len().to_string(),
                format_sig6(mean),
                format_sig6(sd),
            ]);
        }
        for c in pairwise(block, global_m, cfg.stats.welch)? {
            compare_rows.push(vec![
                block.region.clone(),
                block.kind.to_string(),
                format!("{} vs {}", c.pair.0, c.pair.1),
                format_sig6(c.t_stat),
                format_sig6(c.p_raw),
                format_sig6(c.p_bonferroni),
                stars(c.p_bonferroni).to_string(),
                format_sig6(c.cohens_d),
                c.band.to_string(),
            ]);
        }
    }
    write_table(layout.compare(), &COMPARE_COLUMNS, &compare_rows)?;
    write_table(layout.groups(), &GROUP_COLUMNS, &group_rows)?;
    m.output(&layout.compare());
    m.output(&layout.groups());
    m.param("quantiles", &selection);
    m.param("welch", cfg.stats.welch);
    m.write(dir, "stats-compare")?;
    log(format!("stats-compare: {} comparisons", compare_rows.len()));
    Ok(m)
}

/// EFC of an image, optionally within the nonzero voxels of a label file.
pub fn efc_of(image: &Path, mask: Option<&Path>) -> Result<f64, CliError> {
    require(image)?;
    let vol: ScalarVolume = read_scalar(image)?;
    let mask = match mask {
        Some(p) => {
            require(p)?;
            Some(read_labels(p)?)
        }
        None => None,
    };
    Ok(efc(&vol, mask.as_ref())?)
}

/// Every stage in order on a fresh phantom cohort.
pub fn pipeline(cfg: &PipelineConfig, dir: &Path) -> Result<(), CliError> {
    let layout = Layout::new(dir);
    phantom_gen(cfg, dir)?;
    for &age in &cfg.template.ages {
        template_build(cfg, dir, age)?;
    }
    let (young, old) = (cfg.scoring.reference_age, cfg.scoring.old_age);
    for age in [young, old] {
        if !layout.template(age).exists() {
            template_build(cfg, dir, age)?;
        }
    }
    aging_field(
        cfg,
        &layout.template(young),
        &layout.template(old),
        f64::from(young),
        f64::from(old),
        &layout.v0(),
        Some(&layout.template_seg(young)),
    )?;
    score(cfg, dir)?;
    stats_fit(cfg, dir)?;
    stats_compare(cfg, dir)?;
    Ok(())
}
