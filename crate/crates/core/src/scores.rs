//! Aging score (AS) and AD-specific score (ADS) by voxel-wise projection onto
//! the one-year aging field `v0`:
//!
//! ```text
//! AS(p)  = <v(p), v0(p)> / |v0(p)|^2
//! ADS(p) = |v(p) - AS(p) v0(p)|
//! ```

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{RegionScoreRow, ScoreKind};
use crate::register::{register_masked, RegistrationConfig};
use crate::svf::{self, Svf};
use crate::volume::{dot, norm, LabelVolume, ScalarVolume};

/// One-year normal-aging velocity field on the young template's grid.
#[derive(Debug, Clone)]
pub struct AgingField {
    pub v0: Svf,
    pub gap_years: f64,
    pub source: (f64, f64),
}

pub fn one_year_field(
    t_young: &ScalarVolume,
    t_old: &ScalarVolume,
    young_age: f64,
    old_age: f64,
    cfg: &RegistrationConfig,
) -> Result<AgingField> {
    one_year_field_masked(t_young, t_old, young_age, old_age, None, cfg)
}

pub fn one_year_field_masked(
    t_young: &ScalarVolume,
    t_old: &ScalarVolume,
    young_age: f64,
    old_age: f64,
    mask: Option<&[bool]>,
    cfg: &RegistrationConfig,
) -> Result<AgingField> {
    let gap = old_age - young_age;
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(Error::InvalidArgument(format!("age gap {young_age} -> {old_age} must be positive")));
    }
    let reg = register_masked(t_young, t_old, mask, cfg)?;
    aging_from_svf(reg.svf, young_age, old_age)
}

/// Wraps a young-to-old template field as a per-year aging field.
pub fn aging_from_svf(v: Svf, young_age: f64, old_age: f64) -> Result<AgingField> {
    let gap = old_age - young_age;
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(Error::InvalidArgument(format!("age gap {young_age} -> {old_age} must be positive")));
    }
    let v0 = svf::scale(&v, 1.0 / gap).with_provenance(format!("aging {young_age}->{old_age} / {gap}"));
    Ok(AgingField { v0, gap_years: gap, source: (young_age, old_age) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionSelector {
    Labels(BTreeSet<u32>),
    /// Every voxel with a nonzero label.
    AllNonzero,
    /// Explicit voxel mask on the label grid.
    #[serde(skip)]
    Mask(Vec<bool>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub name: String,
    pub selector: RegionSelector,
}

pub const VENTRICLE_LABELS: [u32; 4] = [4, 14, 15, 43];
pub const HIPPOCAMPUS_AMYGDALA_LABELS: [u32; 4] = [17, 53, 18, 54];

impl RegionSpec {
    pub fn labels(name: impl Into<String>, labels: impl IntoIterator<Item = u32>) -> Self {
        Self { name: name.into(), selector: RegionSelector::Labels(labels.into_iter().collect()) }
    }

    pub fn ventricles() -> Self {
        Self::labels("ventricles", VENTRICLE_LABELS)
    }

    pub fn hippocampi_amygdala() -> Self {
        Self::labels("hippocampi_amygdala", HIPPOCAMPUS_AMYGDALA_LABELS)
    }

    pub fn whole_brain() -> Self {
        Self { name: "whole_brain".into(), selector: RegionSelector::AllNonzero }
    }

    pub fn from_mask(name: impl Into<String>, mask: Vec<bool>) -> Self {
        Self { name: name.into(), selector: RegionSelector::Mask(mask) }
    }

    /// Ventricle edge region from a binary edge map.
    pub fn ventricle_edges(edge_map: &LabelVolume) -> Self {
        Self::from_mask("ventricle_edges", edge_map.foreground())
    }

    /// The three label-defined defaults.
    pub fn defaults() -> Vec<Self> {
        vec![Self::ventricles(), Self::hippocampi_amygdala(), Self::whole_brain()]
    }

    pub fn resolve(&self, labels: &LabelVolume) -> Result<Vec<bool>> {
        let mask = match &self.selector {
            RegionSelector::Labels(set) => {
                if set.is_empty() {
                    return Err(Error::InvalidArgument(format!("region {} has no labels", self.name)));
                }
                let set: Vec<u32> = set.iter().copied().collect();
                labels.mask_of(&set)
            }
            RegionSelector::AllNonzero => labels.foreground(),
            RegionSelector::Mask(m) => {
                if m.len() != labels.grid.len() {
                    return Err(Error::GridMismatch(format!(
                        "region {} mask has {} voxels, label grid {}",
                        self.name,
                        m.len(),
                        labels.grid.len()
                    )));
                }
                m.clone()
            }
        };
        Ok(mask)
    }
}

#[derive(Debug, Clone)]
pub struct VoxelScores {
    pub as_map: ScalarVolume,
    pub ads_map: ScalarVolume,
    /// Voxels where `v0` is nonzero and the scores are defined.
    pub retained: Vec<bool>,
    pub v0_norm: ScalarVolume,
}

pub fn voxel_scores(v_subject: &Svf, aging: &AgingField) -> Result<VoxelScores> {
    let grid = aging.v0.grid();
    grid.check_compatible(v_subject.grid())?;
    let n = grid.len();
    let mut as_values = vec![0.0; n];
    let mut ads_values = vec![0.0; n];
    let mut retained = vec![false; n];
    let mut norms = vec![0.0; n];
    for (i, (&v, &v0)) in v_subject.vectors().iter().zip(aging.v0.vectors()).enumerate() {
        let nn = dot(v0, v0);
        norms[i] = nn.sqrt();
        if nn == 0.0 {
            continue;
        }
        let a = dot(v, v0) / nn;
        as_values[i] = a;
        ads_values[i] = norm([v[0] - a * v0[0], v[1] - a * v0[1], v[2] - a * v0[2]]);
        retained[i] = true;
    }
    Ok(VoxelScores {
        as_map: ScalarVolume { grid: grid.clone(), values: as_values },
        ads_map: ScalarVolume { grid: grid.clone(), values: ads_values },
        retained,
        v0_norm: ScalarVolume { grid: grid.clone(), values: norms },
    })
}

/// Linear-interpolation quantile of an unsorted sample.
pub fn quantile(sample: &[f64], q: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Empty("quantile of an empty sample".into()));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    Ok(s[lo] + (h - lo as f64) * (s[hi] - s[lo]))
}

fn check_q(q: f64) -> Result<()> {
    if !(-1e-12..=0.9 + 1e-12).contains(&q) {
        return Err(Error::InvalidArgument(format!("quantile {q} outside [0, 0.9]")));
    }
    Ok(())
}

/// Region voxels whose `|v0|` lies strictly above the region's `q`-quantile.
/// `q = 0` keeps every region voxel with a nonzero norm.
pub fn quantile_threshold(norm_map: &ScalarVolume, region_mask: &[bool], q: f64) -> Result<Vec<bool>> {
    check_q(q)?;
    if region_mask.len() != norm_map.values.len() {
        return Err(Error::GridMismatch(format!(
            "region mask of {} voxels for a map of {}",
            region_mask.len(),
            norm_map.values.len()
        )));
    }
    let sample: Vec<f64> = norm_map.values.iter().zip(region_mask).filter(|(_, &m)| m).map(|(&v, _)| v).collect();
    if sample.is_empty() {
        return Err(Error::Empty("region has no voxels".into()));
    }
    let t = if q <= 0.0 { 0.0 } else { quantile(&sample, q)? };
    Ok(norm_map.values.iter().zip(region_mask).map(|(&v, &m)| m && v > t && v > 0.0).collect())
}

/// Regional mean AS and ADS over the thresholded voxels of `region`.
pub fn regional_score(
    vs: &VoxelScores,
    region: &RegionSpec,
    labels: &LabelVolume,
    q: f64,
    scan_id: &str,
) -> Result<(RegionScoreRow, RegionScoreRow)> {
    vs.as_map.grid.check_compatible(&labels.grid)?;
    let mask = region.resolve(labels)?;
    let keep = quantile_threshold(&vs.v0_norm, &mask, q)?;
    let mut n = 0usize;
    let (mut s_as, mut s_ads) = (0.0, 0.0);
    for i in 0..keep.len() {
        if keep[i] && vs.retained[i] {
            n += 1;
            s_as += vs.as_map.values[i];
            s_ads += vs.ads_map.values[i];
        }
    }
    if n == 0 {
        return Err(Error::Empty(format!("region {} retains no voxels at q = {q}", region.name)));
    }
    let row = |kind, value| RegionScoreRow {
        scan_id: scan_id.to_string(),
        region_name: region.name.clone(),
        score_kind: kind,
        value,
        n_voxels: n,
        quantile: q,
    };
    Ok((row(ScoreKind::AS, s_as / n as f64), row(ScoreKind::ADS, s_ads / n as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{FieldKind, Grid3, Vec3, VectorField3};

    fn aging_const(grid: &Grid3, v0: Vec3) -> AgingField {
        let f = VectorField3::from_fn(grid.clone(), FieldKind::Velocity, |_| v0);
        AgingField { v0: Svf::new(f).unwrap(), gap_years: 30.0, source: (60.0, 90.0) }
    }

    fn svf_const(grid: &Grid3, v: Vec3) -> Svf {
        Svf::new(VectorField3::from_fn(grid.clone(), FieldKind::Velocity, |_| v)).unwrap()
    }

    #[test]
    fn projection_cases() {
        let g = Grid3::cube(3);
        let aging = aging_const(&g, [1.0, 0.0, 0.0]);
        for (v, a, d) in [([1.0, 0.0, 0.0], 1.0, 0.0), ([0.0, 3.0, 0.0], 0.0, 3.0), ([1.0, 1.0, 0.0], 1.0, 1.0)] {
            let s = voxel_scores(&svf_const(&g, v), &aging).unwrap();
            assert_eq!(s.as_map.values[0], a);
            assert_eq!(s.ads_map.values[0], d);
            assert!(s.retained.iter().all(|&r| r));
        }
    }

    #[test]
    fn zero_v0_not_retained() {
        let g = Grid3::cube(3);
        let s = voxel_scores(&svf_const(&g, [1.0, 2.0, 3.0]), &aging_const(&g, [0.0; 3])).unwrap();
        assert!(s.retained.iter().all(|&r| !r));
        assert!(voxel_scores(&svf_const(&Grid3::cube(4), [0.0; 3]), &aging_const(&g, [1.0, 0.0, 0.0])).is_err());
    }

    /// Norms 1..=10 inside the region plus two voxels outside it.
    fn ten_norms() -> (ScalarVolume, Vec<bool>) {
        let grid = Grid3::new([2, 2, 3], [1.0; 3], [0.0; 3]).unwrap();
        let mut values: Vec<f64> = (1..=10).map(f64::from).collect();
        values.extend([100.0, 0.5]);
        let mask = (0..12).map(|i| i < 10).collect();
        (ScalarVolume::new(grid, values).unwrap(), mask)
    }

    fn count(m: &[bool]) -> usize {
        m.iter().filter(|&&b| b).count()
    }

    #[test]
    fn quantile_examples() {
        let (norms, region) = ten_norms();
        assert_eq!(quantile(&norms.values[..10], 0.5).unwrap(), 5.5);
        let half = quantile_threshold(&norms, &region, 0.5).unwrap();
        assert_eq!(half[..10], [false, false, false, false, false, true, true, true, true, true]);
        assert!(!half[10] && !half[11]);
        assert_eq!(count(&quantile_threshold(&norms, &region, 0.0).unwrap()), 10);
        assert!((quantile(&norms.values[..10], 0.9).unwrap() - 9.1).abs() < 1e-12);
        let top = quantile_threshold(&norms, &region, 0.9).unwrap();
        assert_eq!(count(&top), 1);
        assert!(top[9]);
        let mut prev = usize::MAX;
        for k in 0..10 {
            let c = count(&quantile_threshold(&norms, &region, k as f64 / 10.0).unwrap());
            assert!(c <= prev);
            prev = c;
        }
    }

    #[test]
    fn quantile_errors() {
        let (norms, region) = ten_norms();
        assert!(quantile_threshold(&norms, &region, 0.95).is_err());
        assert!(quantile_threshold(&norms, &region, -0.1).is_err());
        assert!(matches!(quantile_threshold(&norms, &[false; 12], 0.2), Err(Error::Empty(_))));
        assert!(quantile_threshold(&norms, &[true; 10], 0.2).is_err());
    }

    #[test]
    fn zero_norm_voxels_always_dropped() {
        let grid = Grid3::cube(2);
        let norms = ScalarVolume::new(grid, vec![0.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let kept = quantile_threshold(&norms, &[true; 8], 0.0).unwrap();
        assert_eq!(kept, [false, false, true, true, false, false, false, false]);
    }

    #[test]
    fn regional_scale_identity() {
        let g = Grid3::cube(6);
        let v0 = VectorField3::from_fn(g.clone(), FieldKind::Velocity, |[x, y, z]| {
            [0.1 + x as f64 * 0.05, -(y as f64) * 0.02, 0.03 * z as f64]
        });
        let aging = AgingField { v0: Svf::new(v0).unwrap(), gap_years: 30.0, source: (60.0, 90.0) };
        let subject = svf::scale(&aging.v0, 17.0);
        let vs = voxel_scores(&subject, &aging).unwrap();
        let labels = LabelVolume::new(g.clone(), g.voxels().map(|[x, _, _]| if x < 3 { 4 } else { 17 }).collect()).unwrap();
        for region in RegionSpec::defaults() {
            for k in 0..10 {
                let q = k as f64 / 10.0;
                let (a, d) = regional_score(&vs, &region, &labels, q, "s").unwrap();
                assert!((a.value - 17.0).abs() < 1e-9);
                assert!(d.value.abs() < 1e-9);
                assert_eq!(a.n_voxels, d.n_voxels);
            }
        }
    }

    #[test]
    fn missing_region_is_an_error() {
        let g = Grid3::cube(3);
        let aging = aging_const(&g, [1.0, 0.0, 0.0]);
        let vs = voxel_scores(&svf_const(&g, [1.0, 0.0, 0.0]), &aging).unwrap();
        let labels = LabelVolume::new(g.clone(), vec![2; g.len()]).unwrap();
        assert!(regional_score(&vs, &RegionSpec::ventricles(), &labels, 0.0, "s").is_err());
        assert!(regional_score(&vs, &RegionSpec::whole_brain(), &labels, 0.0, "s").is_ok());
    }

    #[test]
    fn age_gap_checked() {
        let g = Grid3::cube(3);
        assert!(aging_from_svf(Svf::zeros(g.clone()), 90.0, 60.0).is_err());
        let a = aging_from_svf(svf_const(&g, [30.0, 0.0, 0.0]), 60.0, 90.0).unwrap();
        assert_eq!(a.v0.vectors()[0], [1.0, 0.0, 0.0]);
        assert_eq!(a.gap_years, 30.0);
    }
}
