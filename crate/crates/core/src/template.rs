//! Age-conditioned templates by kernel-weighted iterative averaging, and EFC.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::register::{register_masked, RegistrationConfig};
use crate::svf::{exp, exp_displacement, Svf};
use crate::volume::{warp, warp_by_displacement, LabelVolume, ScalarVolume};

/// Subjects whose kernel weight falls below this are left out.
pub const MIN_WEIGHT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemplateConfig {
    pub ages: Vec<u32>,
    /// Width of the Gaussian age kernel in years.
    pub bandwidth: f64,
    pub outer_iters: usize,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        Self { ages: vec![60, 90], bandwidth: 2.5, outer_iters: 3 }
    }
}

impl TemplateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ages.is_empty() {
            return Err(Error::InvalidArgument("template ages must not be empty".into()));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!("bandwidth {} must be positive", self.bandwidth)));
        }
        if self.outer_iters == 0 {
            return Err(Error::InvalidArgument("outer_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// One cohort image entering template construction.
#[derive(Debug, Clone)]
pub struct CohortImage {
    pub id: String,
    pub image: ScalarVolume,
    pub age: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildLogEntry {
    pub iteration: usize,
    /// Voxel mean of the norm of the weighted mean velocity field.
    pub mean_u: f64,
    pub efc: f64,
}

#[derive(Debug, Clone)]
pub struct TemplateBuild {
    pub template: ScalarVolume,
    pub log: Vec<BuildLogEntry>,
    /// Ids and normalized weights of the subjects that contributed.
    pub weights: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct TemplateModel {
    pub ages: Vec<u32>,
    pub templates: BTreeMap<u32, ScalarVolume>,
    pub masks: BTreeMap<u32, LabelVolume>,
    pub build_log: BTreeMap<u32, Vec<BuildLogEntry>>,
}

impl TemplateModel {
    /// Checks that every template and mask lives on one grid.
    pub fn validate(&self) -> Result<()> {
        let mut grids = self.templates.values().map(|t| &t.grid).chain(self.masks.values().map(|m| &m.grid));
        if let Some(first) = grids.next() {
            for g in grids {
                first.check_compatible(g)?;
            }
        }
        Ok(())
    }
}

pub fn age_weight(age: f64, target_age: f64, bandwidth: f64) -> f64 {
    let d = age - target_age;
    (-(d * d) / (2.0 * bandwidth * bandwidth)).exp()
}

fn weighted_mean(images: &[&ScalarVolume], weights: &[f64]) -> ScalarVolume {
    let grid = images[0].grid.clone();
    let mut values = vec![0.0; grid.len()];
    for (img, &w) in images.iter().zip(weights) {
        for (acc, v) in values.iter_mut().zip(&img.values) {
            *acc += w * v;
        }
    }
    ScalarVolume { grid, values }
}

pub fn build_template(
    cohort: &[CohortImage],
    target_age: f64,
    bandwidth: f64,
    cfg: &RegistrationConfig,
    outer_iters: usize,
) -> Result<ScalarVolume> {
    Ok(build_template_logged(cohort, target_age, bandwidth, cfg, outer_iters, None)?.template)
}

/// Template construction with its per-iteration log.
///
/// Each outer iteration registers the current template (fixed) to every
/// subject (moving), brings the subjects into template space, averages them,
/// and re-centres the average by `exp(-u_bar)`, `u_bar` being the weighted
/// mean velocity field.
pub fn build_template_logged(
    cohort: &[CohortImage],
    target_age: f64,
    bandwidth: f64,
    cfg: &RegistrationConfig,
    outer_iters: usize,
    mask: Option<&[bool]>,
) -> Result<TemplateBuild> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidArgument(format!("bandwidth {bandwidth} must be positive")));
    }
    let mut members: Vec<(&CohortImage, f64)> = cohort
        .iter()
        .map(|c| (c, age_weight(c.age, target_age, bandwidth)))
        .filter(|&(_, w)| w > MIN_WEIGHT)
        .collect();
    if members.is_empty() {
        return Err(Error::Empty(format!("no subject within the age kernel of {target_age}")));
    }
    members.sort_by(|a, b| a.0.id.cmp(&b.0.id));
    let grid = members[0].0.image.grid.clone();
    for (m, _) in &members {
        grid.check_compatible(&m.image.grid)?;
    }
    let total: f64 = members.iter().map(|m| m.1).sum();
    let weights: Vec<f64> = members.iter().map(|m| m.1 / total).collect();
    let images: Vec<&ScalarVolume> = members.iter().map(|m| &m.0.image).collect();

    let mut template = weighted_mean(&images, &weights);
    let mut log = Vec::with_capacity(outer_iters);
    for iteration in 1..=outer_iters {
        let fields = images
            .par_iter()
            .map(|img| register_masked(&template, img, mask, cfg).map(|r| r.svf))
            .collect::<Result<Vec<Svf>>>()?;
        let warped = images
            .par_iter()
            .zip(&fields)
            .map(|(img, v)| warp(img, &exp(v)?))
            .collect::<Result<Vec<_>>>()?;
        let mut u_bar = vec![[0.0; 3]; grid.len()];
        for (v, &w) in fields.iter().zip(&weights) {
            for (acc, a) in u_bar.iter_mut().zip(v.vectors()) {
                for k in 0..3 {
                    acc[k] += w * a[k];
                }
            }
        }
        let mean_u = u_bar.iter().map(|&a| crate::volume::norm(a)).sum::<f64>() / grid.len() as f64;
        let warped_refs: Vec<&ScalarVolume> = warped.iter().collect();
        let average = weighted_mean(&warped_refs, &weights);
        let neg: Vec<_> = u_bar.iter().map(|a| [-a[0], -a[1], -a[2]]).collect();
        let pull = exp_displacement(&grid, &neg);
        template = warp_by_displacement(&average, &pull);
        log.push(BuildLogEntry { iteration, mean_u, efc: efc(&template, None)? });
    }
    let weights = members.iter().zip(&weights).map(|(m, &w)| (m.0.id.clone(), w)).collect();
    Ok(TemplateBuild { template, log, weights })
}

/// Normalized entropy focus criterion in [0, 1]; lower is sharper.
///
/// `E = -sum (B_i / B_max) ln(B_i / B_max)` with `B_max = sqrt(sum B_i^2)`,
/// divided by its uniform-image value `sqrt(N) ln sqrt(N)`.
pub fn efc(vol: &ScalarVolume, mask: Option<&LabelVolume>) -> Result<f64> {
    let selected: Vec<f64> = match mask {
        Some(m) => {
            vol.grid.check_compatible(&m.grid)?;
            vol.values.iter().zip(&m.labels).filter(|(_, &l)| l != 0).map(|(v, _)| v.abs()).collect()
        }
        None => vol.values.iter().map(|v| v.abs()).collect(),
    };
    if selected.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("efc input"));
    }
    let b_max = selected.iter().map(|b| b * b).sum::<f64>().sqrt();
    if b_max == 0.0 {
        return Err(Error::Degenerate("efc of an all-zero volume".into()));
    }
    let n = selected.len() as f64;
    if n < 2.0 {
        return Ok(0.0);
    }
    let e: f64 = selected
        .iter()
        .filter(|&&b| b > 0.0)
        .map(|&b| {
            let r = b / b_max;
            -r * r.ln()
        })
        .sum();
    let e_max = n.sqrt() * n.sqrt().ln();
    // + 0.0 turns a -0.0 into 0.0
    Ok((e / e_max).clamp(0.0, 1.0) + 0.0)
}

/// Binary mask (1/0) of voxels that are ventricle in `seg_old` but not in `seg_young`.
pub fn ventricle_edge_map(seg_young: &LabelVolume, seg_old: &LabelVolume, ventricle_labels: &[u32]) -> Result<LabelVolume> {
    seg_young.grid.check_compatible(&seg_old.grid)?;
    let young = seg_young.mask_of(ventricle_labels);
    let old = seg_old.mask_of(ventricle_labels);
    let labels = old.iter().zip(&young).map(|(&o, &y)| u32::from(o && !y)).collect();
    Ok(LabelVolume { grid: seg_old.grid.clone(), labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::gaussian_smooth;
    use crate::volume::Grid3;

    fn spike(n: usize) -> ScalarVolume {
        let mut v = ScalarVolume::filled(Grid3::cube(n), 0.0);
        v.values[5] = 1.0;
        v
    }

    #[test]
    fn efc_endpoints() {
        assert_eq!(efc(&spike(6), None).unwrap(), 0.0);
        let uniform = ScalarVolume::filled(Grid3::cube(6), 0.4);
        assert!((efc(&uniform, None).unwrap() - 1.0).abs() < 1e-12);
        assert!(efc(&ScalarVolume::filled(Grid3::cube(3), 0.0), None).is_err());
    }

    #[test]
    fn efc_four_voxel_case() {
        let grid = Grid3::cube(2);
        let v = ScalarVolume::new(grid.clone(), vec![1.0, 1.0, 0.0, 0.0, 7.0, 7.0, 7.0, 7.0]).unwrap();
        let m = LabelVolume::new(grid, vec![1, 1, 1, 1, 0, 0, 0, 0]).unwrap();
        let s2 = 2f64.sqrt();
        let expect = (s2 * s2.ln()) / (2.0 * 2f64.ln());
        assert!((efc(&v, Some(&m)).unwrap() - expect).abs() < 1e-12);
        assert!((expect - s2 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn efc_respects_mask() {
        let grid = Grid3::cube(4);
        let mut v = ScalarVolume::filled(grid.clone(), 0.0);
        let mut m = LabelVolume::new(grid.clone(), vec![0; grid.len()]).unwrap();
        for i in 0..8 {
            v.values[i] = 0.5;
            m.labels[i] = 1;
        }
        v.values[40] = 9.0;
        assert!((efc(&v, Some(&m)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn efc_rises_with_blur() {
        let grid = Grid3::cube(24);
        let c = grid.center();
        let img = ScalarVolume::from_fn(grid, |[x, y, z]| {
            let r = ((x as f64 - c[0]).powi(2) + (y as f64 - c[1]).powi(2) + (z as f64 - c[2]).powi(2)).sqrt();
            if r < 6.0 {
                1.0
            } else if r < 9.0 {
                0.4
            } else {
                0.0
            }
        });
        let e0 = efc(&img, None).unwrap();
        let e1 = efc(&gaussian_smooth(&img, 1.0), None).unwrap();
        let e2 = efc(&gaussian_smooth(&img, 2.0), None).unwrap();
        assert!(e0 < e1 && e1 < e2, "{e0} {e1} {e2}");
    }

    fn sphere_labels(n: usize, r: f64) -> LabelVolume {
        let grid = Grid3::cube(n);
        let c = grid.center();
        let labels = grid
            .voxels()
            .map(|[x, y, z]| {
                let d = ((x as f64 - c[0]).powi(2) + (y as f64 - c[1]).powi(2) + (z as f64 - c[2]).powi(2)).sqrt();
                if d <= r {
                    4
                } else {
                    2
                }
            })
            .collect();
        LabelVolume::new(grid, labels).unwrap()
    }

    #[test]
    fn edge_map_cases() {
        let young = sphere_labels(16, 4.0);
        let empty = ventricle_edge_map(&young, &young, &[4]).unwrap();
        assert!(empty.labels.iter().all(|&l| l == 0));

        // dilate by one voxel (6-neighbourhood) and compare with the shell
        let grid = young.grid.clone();
        let inside = young.mask_of(&[4]);
        let mut dilated = young.clone();
        for [x, y, z] in grid.voxels() {
            let i = grid.index(x, y, z);
            let near = [(-1i64, 0i64, 0i64), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)].iter().any(|&(dx, dy, dz)| {
                let (nx, ny, nz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                nx >= 0 && ny >= 0 && nz >= 0 && nx < 16 && ny < 16 && nz < 16 && inside[grid.index(nx as usize, ny as usize, nz as usize)]
            });
            if near {
                dilated.labels[i] = 4;
            }
        }
        let shell = ventricle_edge_map(&young, &dilated, &[4]).unwrap();
        for i in 0..grid.len() {
            let expect = dilated.labels[i] == 4 && young.labels[i] != 4;
            assert_eq!(shell.labels[i] == 1, expect);
        }
        assert!(shell.labels.iter().any(|&l| l == 1));

        // the reverse difference is empty: young voxels missing from old are not included
        let reverse = ventricle_edge_map(&dilated, &young, &[4]).unwrap();
        assert!(reverse.labels.iter().all(|&l| l == 0));
        assert!(ventricle_edge_map(&young, &sphere_labels(8, 2.0), &[4]).is_err());
    }

    #[test]
    fn singleton_cohort_reproduces_image() {
        let grid = Grid3::cube(16);
        let img = crate::phantom::random_smooth_field(&grid, 2, 1.0, 2.0).component(0).normalized();
        let cohort = [CohortImage { id: "a".into(), image: img.clone(), age: 60.0 }];
        let cfg = RegistrationConfig { pyramid_levels: 1, ..Default::default() };
        let t = build_template(&cohort, 60.0, 2.5, &cfg, 2).unwrap();
        let err = t.values.iter().zip(&img.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn empty_kernel_is_an_error() {
        let img = ScalarVolume::filled(Grid3::cube(4), 0.5);
        let cohort = [CohortImage { id: "a".into(), image: img, age: 90.0 }];
        let r = build_template(&cohort, 60.0, 2.5, &RegistrationConfig::default(), 1);
        assert!(matches!(r, Err(Error::Empty(_))));
    }

    #[test]
    fn kernel_weights() {
        assert_eq!(age_weight(60.0, 60.0, 2.5), 1.0);
        assert!((age_weight(62.5, 60.0, 2.5) - (-0.5f64).exp()).abs() < 1e-15);
        assert!(age_weight(70.0, 60.0, 2.5) < MIN_WEIGHT);
    }
}
