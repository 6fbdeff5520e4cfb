//! Deterministic synthetic cohorts with known deformations.
//!
//! The base anatomy is a set of nested ellipsoids (cortex rim, white matter,
//! two lateral ventricles, two hippocampi) plus a fixed smooth texture.
//! A subject of a given age and disease severity is the base anatomy moved by
//! `exp(v_gt)` with
//!
//! ```text
//! v_gt = (age - 60 + acceleration_years * severity) * v_aging + severity * w
//! ```
//!
//! where `v_aging` is the per-year aging motion (ventricles expand, hippocampi
//! and the brain shrink) and `w` is a twist around each hippocampus made
//! orthogonal to `v_aging` voxel by voxel. `v_gt` is the forward motion of
//! anatomy, so registering the base (fixed) to the subject (moving) recovers
//! `v_gt`; the image is `base(exp(-v_gt)(p))`.
//!
//! Randomness comes from ChaCha8 seeded with `seed`; subject `i` of a cohort
//! draws its noise from stream `i`, cohort-level draws (ages) use stream
//! `u64::MAX`, the texture uses stream `u64::MAX - 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::gaussian_smooth;
use crate::io::{CohortRow, CohortTable, Group, CDR_LEVELS};
use crate::svf::{self, Svf};
use crate::volume::{dot, norm, warp, warp_labels, FieldKind, Grid3, LabelVolume, ScalarVolume, Vec3, VectorField3};

pub const LABEL_BRAIN: u32 = 2;
pub const LABEL_CORTEX: u32 = 3;
pub const LABEL_LEFT_VENTRICLE: u32 = 4;
pub const LABEL_RIGHT_VENTRICLE: u32 = 43;
pub const LABEL_LEFT_HIPPOCAMPUS: u32 = 17;
pub const LABEL_RIGHT_HIPPOCAMPUS: u32 = 53;

/// Disease severity planted for each CDR stage.
pub const STAGE_SEVERITIES: [(f64, f64); 4] = [(0.0, 0.25), (0.5, 0.5), (1.0, 1.0), (2.0, 1.5)];

const REFERENCE_AGE: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub seed: u64,
    /// Additive Gaussian intensity noise.
    pub noise_sigma: f64,
    /// Standard deviation of the smooth texture inside the brain.
    pub texture_amplitude: f64,
    /// Radial ventricle expansion per year.
    pub ventricle_rate: f64,
    /// Radial hippocampus shrinkage per year.
    pub hippocampus_rate: f64,
    /// Whole-brain shrinkage per year.
    pub brain_rate: f64,
    /// Hippocampal twist per unit severity.
    pub disease_amplitude: f64,
    /// Extra years of aging per unit severity.
    pub acceleration_years: f64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            dims: [64, 64, 64],
            seed: 0,
            noise_sigma: 0.01,
            texture_amplitude: 0.06,
            ventricle_rate: 0.023,
            hippocampus_rate: 0.0165,
            brain_rate: 0.0008,
            disease_amplitude: 0.5,
            acceleration_years: 6.0,
        }
    }
}

impl PhantomSpec {
    pub fn grid(&self) -> Grid3 {
        Grid3::new(self.dims, [1.0; 3], [0.0; 3]).expect("phantom dims must be >= 2")
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Geometry in reference units (a 64-voxel cube), mapped onto any grid.
struct Frame {
    center: Vec3,
    scale: Vec3,
}

impl Frame {
    fn new(grid: &Grid3) -> Self {
        Self { center: grid.center(), scale: grid.dims.map(|n| n as f64 / 64.0) }
    }

    fn to_ref(&self, p: Vec3) -> Vec3 {
        [
            (p[0] - self.center[0]) / self.scale[0],
            (p[1] - self.center[1]) / self.scale[1],
            (p[2] - self.center[2]) / self.scale[2],
        ]
    }

    fn from_ref_delta(&self, d: Vec3) -> Vec3 {
        [d[0] * self.scale[0], d[1] * self.scale[1], d[2] * self.scale[2]]
    }
}

struct Ellipsoid {
    center: Vec3,
    semi: Vec3,
}

impl Ellipsoid {
    /// Normalized radius: < 1 inside.
    fn rho(&self, r: Vec3) -> f64 {
        let mut s = 0.0;
        for k in 0..3 {
            let d = (r[k] - self.center[k]) / self.semi[k];
            s += d * d;
        }
        s.sqrt()
    }

    /// Soft membership with a logistic edge `edge` voxels wide.
    fn membership_with_edge(&self, r: Vec3, edge: f64) -> f64 {
        let mean_semi = (self.semi[0] + self.semi[1] + self.semi[2]) / 3.0;
        let t = (self.rho(r) - 1.0) * mean_semi / edge;
        1.0 / (1.0 + t.exp())
    }

    fn membership(&self, r: Vec3) -> f64 {
        self.membership_with_edge(r, 0.5)
    }
}

/// A centred ellipsoid of intensity 1 on a 0 background; `semi` and the
/// logistic `edge` width are in voxels.
pub fn ellipsoid_image(grid: &Grid3, semi: Vec3, edge: f64) -> ScalarVolume {
    let e = Ellipsoid { center: grid.center(), semi };
    ScalarVolume::from_fn(grid.clone(), |[x, y, z]| e.membership_with_edge([x as f64, y as f64, z as f64], edge))
}

const BRAIN: Ellipsoid = Ellipsoid { center: [0.0, 0.0, 0.0], semi: [26.0, 23.0, 21.0] };
const WHITE: Ellipsoid = Ellipsoid { center: [0.0, 0.0, 0.0], semi: [22.0, 19.5, 17.5] };
const VENTRICLES: [(u32, Ellipsoid); 2] = [
    (LABEL_LEFT_VENTRICLE, Ellipsoid { center: [-5.0, 4.0, 3.0], semi: [3.0, 9.0, 4.5] }),
    (LABEL_RIGHT_VENTRICLE, Ellipsoid { center: [5.0, 4.0, 3.0], semi: [3.0, 9.0, 4.5] }),
];
const HIPPOCAMPI: [(u32, Ellipsoid); 2] = [
    (LABEL_LEFT_HIPPOCAMPUS, Ellipsoid { center: [-14.0, -8.0, -7.0], semi: [6.0, 3.0, 2.5] }),
    (LABEL_RIGHT_HIPPOCAMPUS, Ellipsoid { center: [14.0, -8.0, -7.0], semi: [6.0, 3.0, 2.5] }),
];
const VENTRICLE_SIGMA: f64 = 6.0;
const HIPPOCAMPUS_SIGMA: f64 = 4.0;
const BRAIN_SIGMA: f64 = 20.0;
const TWIST_SIGMA: f64 = 4.0;
const TWIST_INNER: f64 = 8.0;
const TWIST_OUTER: f64 = 11.0;

/// Base (age 60, healthy) anatomy: noise-free image and labels.
#[derive(Debug, Clone)]
pub struct BaseAnatomy {
    pub image: ScalarVolume,
    pub labels: LabelVolume,
}

pub fn base_anatomy(spec: &PhantomSpec) -> BaseAnatomy {
    let grid = spec.grid();
    let frame = Frame::new(&grid);
    let texture = texture(spec, &grid);
    let mut values = Vec::with_capacity(grid.len());
    let mut labels = Vec::with_capacity(grid.len());
    for (i, [x, y, z]) in grid.voxels().enumerate() {
        let r = frame.to_ref([x as f64, y as f64, z as f64]);
        let m_brain = BRAIN.membership(r);
        let mut v = m_brain * (0.5 + 0.2 * WHITE.membership(r) + texture[i]);
        let mut label = if BRAIN.rho(r) < 1.0 {
            if WHITE.rho(r) < 1.0 {
                LABEL_BRAIN
            } else {
                LABEL_CORTEX
            }
        } else {
            0
        };
        for (l, e) in VENTRICLES.iter() {
            let m = e.membership(r);
            v = v * (1.0 - m) + 0.1 * m;
            if e.rho(r) < 1.0 {
                label = *l;
            }
        }
        for (l, e) in HIPPOCAMPI.iter() {
            let m = e.membership(r);
            v = v * (1.0 - m) + (0.45 + texture[i]) * m;
            if e.rho(r) < 1.0 {
                label = *l;
            }
        }
        values.push(v.clamp(0.0, 1.0));
        labels.push(label);
    }
    BaseAnatomy {
        image: ScalarVolume { grid: grid.clone(), values },
        labels: LabelVolume { grid, labels },
    }
}

fn texture(spec: &PhantomSpec, grid: &Grid3) -> Vec<f64> {
    if spec.texture_amplitude == 0.0 {
        return vec![0.0; grid.len()];
    }
    let mut rng = spec.rng(u64::MAX - 1);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let white = ScalarVolume { grid: grid.clone(), values: (0..grid.len()).map(|_| normal.sample(&mut rng)).collect() };
    let sigma = 1.5 * grid.dims.iter().copied().min().unwrap_or(64) as f64 / 64.0;
    let smooth = gaussian_smooth(&white, sigma.max(0.75));
    let n = smooth.values.len() as f64;
    let mean = smooth.values.iter().sum::<f64>() / n;
    let sd = (smooth.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    smooth.values.iter().map(|v| spec.texture_amplitude * (v - mean) / sd).collect()
}

fn radial(frame: &Frame, r: Vec3, center: Vec3, rate: f64, sigma: f64) -> Vec3 {
    let d = [r[0] - center[0], r[1] - center[1], r[2] - center[2]];
    let env = (-dot(d, d) / (2.0 * sigma * sigma)).exp();
    frame.from_ref_delta([rate * d[0] * env, rate * d[1] * env, rate * d[2] * env])
}

/// One-year aging motion, voxel units.
pub fn aging_field(spec: &PhantomSpec) -> Svf {
    let grid = spec.grid();
    let frame = Frame::new(&grid);
    let field = VectorField3::from_fn(grid, FieldKind::Velocity, |[x, y, z]| {
        let r = frame.to_ref([x as f64, y as f64, z as f64]);
        let mut v = radial(&frame, r, BRAIN.center, -spec.brain_rate, BRAIN_SIGMA);
        for (_, e) in VENTRICLES.iter() {
            let a = radial(&frame, r, e.center, spec.ventricle_rate, VENTRICLE_SIGMA);
            v = [v[0] + a[0], v[1] + a[1], v[2] + a[2]];
        }
        for (_, e) in HIPPOCAMPI.iter() {
            let a = radial(&frame, r, e.center, -spec.hippocampus_rate, HIPPOCAMPUS_SIGMA);
            v = [v[0] + a[0], v[1] + a[1], v[2] + a[2]];
        }
        v
    });
    Svf { field, provenance: Some("phantom aging field (per year)".into()) }
}

/// 1 inside `TWIST_INNER`, 0 beyond `TWIST_OUTER`, cosine taper between.
fn twist_cutoff(r: f64) -> f64 {
    if r <= TWIST_INNER {
        1.0
    } else if r >= TWIST_OUTER {
        0.0
    } else {
        let t = (r - TWIST_INNER) / (TWIST_OUTER - TWIST_INNER);
        0.5 * (1.0 + (std::f64::consts::PI * t).cos())
    }
}

/// Disease direction per unit severity, orthogonal to `aging` at every voxel.
pub fn disease_field(spec: &PhantomSpec, aging: &Svf) -> Svf {
    let grid = spec.grid();
    let frame = Frame::new(&grid);
    let vectors = grid
        .voxels()
        .zip(aging.vectors())
        .map(|([x, y, z], &a)| {
            let r = frame.to_ref([x as f64, y as f64, z as f64]);
            let mut w = [0.0; 3];
            for (k, (_, e)) in HIPPOCAMPI.iter().enumerate() {
                let d = [r[0] - e.center[0], r[1] - e.center[1], r[2] - e.center[2]];
                let env = spec.disease_amplitude * (-dot(d, d) / (2.0 * TWIST_SIGMA * TWIST_SIGMA)).exp() * twist_cutoff(dot(d, d).sqrt());
                let spin = if k == 0 { 1.0 } else { -1.0 };
                // rotation about z through the hippocampus centre
                let t = frame.from_ref_delta([-spin * d[1] * env, spin * d[0] * env, 0.0]);
                w = [w[0] + t[0], w[1] + t[1], w[2] + t[2]];
            }
            let aa = dot(a, a);
            if aa > 0.0 {
                let c = dot(w, a) / aa;
                w = [w[0] - c * a[0], w[1] - c * a[1], w[2] - c * a[2]];
            }
            w
        })
        .collect();
    Svf {
        field: VectorField3 { grid, vectors, kind: FieldKind::Velocity },
        provenance: Some("phantom disease field (per severity unit)".into()),
    }
}

/// Ground-truth SVF for a subject.
pub fn subject_field(spec: &PhantomSpec, aging: &Svf, disease: &Svf, age: f64, severity: f64) -> Svf {
    let t = age - REFERENCE_AGE + spec.acceleration_years * severity;
    let vectors = aging
        .vectors()
        .iter()
        .zip(disease.vectors())
        .map(|(a, w)| [t * a[0] + severity * w[0], t * a[1] + severity * w[1], t * a[2] + severity * w[2]])
        .collect();
    Svf {
        field: VectorField3 { grid: aging.grid().clone(), vectors, kind: FieldKind::Velocity },
        provenance: Some(format!("phantom ground truth age={age} severity={severity}")),
    }
}

#[derive(Debug, Clone)]
pub struct PhantomSubject {
    pub image: ScalarVolume,
    pub labels: LabelVolume,
    pub ground_truth: Svf,
}

/// Generator with the base anatomy and fields precomputed.
pub struct PhantomGenerator {
    pub spec: PhantomSpec,
    pub base: BaseAnatomy,
    pub aging: Svf,
    pub disease: Svf,
}

impl PhantomGenerator {
    pub fn new(spec: PhantomSpec) -> Self {
        let base = base_anatomy(&spec);
        let aging = aging_field(&spec);
        let disease = disease_field(&spec, &aging);
        Self { spec, base, aging, disease }
    }

    /// `noise_stream` selects the noise sequence; `None` gives a noise-free image.
    pub fn subject(&self, age: f64, severity: f64, noise_stream: Option<u64>) -> Result<PhantomSubject> {
        if !(55.0..=95.0).contains(&age) {
            return Err(Error::InvalidArgument(format!("phantom age {age} outside [55, 95]")));
        }
        if !(severity >= 0.0 && severity.is_finite()) {
            return Err(Error::InvalidArgument(format!("severity {severity} must be >= 0")));
        }
        let gt = subject_field(&self.spec, &self.aging, &self.disease, age, severity);
        let pull = svf::inverse_deformation(&gt)?;
        let mut image = warp(&self.base.image, &pull)?;
        let labels = warp_labels(&self.base.labels, &pull)?;
        if let (Some(stream), true) = (noise_stream, self.spec.noise_sigma > 0.0) {
            let mut rng = self.spec.rng(stream);
            let normal = Normal::new(0.0, self.spec.noise_sigma).expect("noise sigma");
            for v in image.values.iter_mut() {
                *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
            }
        }
        Ok(PhantomSubject { image, labels, ground_truth: gt })
    }

    /// Noise-free healthy anatomy at `age`, the stand-in for a population template.
    pub fn reference(&self, age: f64) -> Result<PhantomSubject> {
        self.subject(age, 0.0, None)
    }
}

pub fn generate_subject(spec: &PhantomSpec, age: f64, disease_severity: f64) -> Result<PhantomSubject> {
    PhantomGenerator::new(spec.clone()).subject(age, disease_severity, Some(0))
}

#[derive(Debug, Clone)]
pub struct PhantomCohort {
    pub subjects: Vec<PhantomSubject>,
    pub table: CohortTable,
    pub severities: Vec<f64>,
}

/// `n_cn` healthy subjects plus `n_ad_per_stage` per CDR stage, ages ~ U(60, 90).
pub fn generate_cohort(spec: &PhantomSpec, n_cn: usize, n_ad_per_stage: usize) -> Result<PhantomCohort> {
    if n_cn + 4 * n_ad_per_stage == 0 {
        return Err(Error::Empty("cohort with no subjects".into()));
    }
    let generator = PhantomGenerator::new(spec.clone());
    generator.cohort(n_cn, n_ad_per_stage)
}

impl PhantomGenerator {
    pub fn cohort(&self, n_cn: usize, n_ad_per_stage: usize) -> Result<PhantomCohort> {
        let mut rng = self.spec.rng(u64::MAX);
        // ages kept at the precision the cohort table stores
        let mut draw_age = || (rng.random_range(60.0..90.0_f64) * 100.0).round() / 100.0;
        let mut plan: Vec<(Group, f64, f64, f64)> = Vec::new();
        for _ in 0..n_cn {
            plan.push((Group::CN, 0.0, 0.0, draw_age()));
        }
        for &(cdr, severity) in STAGE_SEVERITIES.iter() {
            debug_assert!(CDR_LEVELS.contains(&cdr));
            for _ in 0..n_ad_per_stage {
                plan.push((Group::AD, cdr, severity, draw_age()));
            }
        }
        let subjects = plan
            .par_iter()
            .enumerate()
            .map(|(i, &(_, _, severity, age))| self.subject(age, severity, Some(i as u64)))
            .collect::<Result<Vec<_>>>()?;
        let rows = plan
            .iter()
            .enumerate()
            .map(|(i, &(group, cdr, _, age))| {
                let subject_id = format!("sub-{:03}", i + 1);
                let scan_id = format!("{subject_id}_ses-01");
                CohortRow {
                    path: format!("{scan_id}_img.nii"),
                    subject_id,
                    scan_id,
                    age,
                    group,
                    cdr,
                }
            })
            .collect();
        Ok(PhantomCohort {
            subjects,
            table: CohortTable { rows },
            severities: plan.iter().map(|p| p.2).collect(),
        })
    }
}

/// Random smooth field for tests and demos: a few Gaussian bumps with random
/// vector amplitudes, tapered to zero at the faces, scaled to `max_norm`.
pub fn random_smooth_field(grid: &Grid3, seed: u64, max_norm: f64, sigma: f64) -> VectorField3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(Vec3, Vec3)> = (0..6)
        .map(|_| {
            let c = [0, 1, 2].map(|k| rng.random_range(0.25..0.75) * (grid.dims[k] - 1) as f64);
            let a = [0, 1, 2].map(|_| rng.random_range(-1.0..1.0));
            (c, a)
        })
        .collect();
    let taper = |x: usize, n: usize| (std::f64::consts::PI * x as f64 / (n - 1) as f64).sin().powi(2);
    let mut field = VectorField3::from_fn(grid.clone(), FieldKind::Velocity, |[x, y, z]| {
        let p = [x as f64, y as f64, z as f64];
        let t = taper(x, grid.dims[0]) * taper(y, grid.dims[1]) * taper(z, grid.dims[2]);
        let mut v = [0.0; 3];
        for (c, a) in &bumps {
            let d = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
            let e = t * (-dot(d, d) / (2.0 * sigma * sigma)).exp();
            v = [v[0] + a[0] * e, v[1] + a[1] * e, v[2] + a[2] * e];
        }
        v
    });
    let max = field.vectors.iter().map(|&v| norm(v)).fold(0.0, f64::max);
    if max > 0.0 {
        let s = max_norm / max;
        for v in field.vectors.iter_mut() {
            *v = [v[0] * s, v[1] * s, v[2] * s];
        }
    }
    field
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PhantomSpec {
        PhantomSpec { dims: [32, 32, 32], seed: 5, ..Default::default() }
    }

    #[test]
    fn reference_age_without_noise_is_base() {
        let g = PhantomGenerator::new(small());
        let s = g.subject(60.0, 0.0, None).unwrap();
        assert_eq!(s.image.values, g.base.image.values);
        assert_eq!(s.labels, g.base.labels);
    }

    #[test]
    fn labels_match_compartments() {
        let g = PhantomGenerator::new(small());
        let labels = g.base.labels.distinct();
        for l in [0, LABEL_BRAIN, LABEL_CORTEX, LABEL_LEFT_VENTRICLE, LABEL_RIGHT_VENTRICLE, LABEL_LEFT_HIPPOCAMPUS, LABEL_RIGHT_HIPPOCAMPUS] {
            assert!(labels.contains(&l), "label {l} missing");
        }
        let mean_of = |label: u32| {
            let (s, n) = g.base.labels.labels.iter().zip(&g.base.image.values).filter(|(l, _)| **l == label).fold((0.0, 0), |(s, n), (_, v)| (s + v, n + 1));
            s / n as f64
        };
        assert!(mean_of(LABEL_LEFT_VENTRICLE) < mean_of(LABEL_LEFT_HIPPOCAMPUS));
        assert!(mean_of(LABEL_LEFT_HIPPOCAMPUS) < mean_of(LABEL_BRAIN));
        assert!(mean_of(0) < 0.05);
    }

    #[test]
    fn disease_is_orthogonal_to_aging() {
        let g = PhantomGenerator::new(small());
        for (a, w) in g.aging.vectors().iter().zip(g.disease.vectors()) {
            assert!(dot(*a, *w).abs() <= 1e-9 * (1.0 + norm(*a) * norm(*w)));
        }
        assert!(g.disease.max_norm() > 0.1);
        let s = g.subject(80.0, 1.0, Some(1)).unwrap();
        let t = 80.0 - 60.0 + g.spec.acceleration_years;
        for ((v, a), _) in s.ground_truth.vectors().iter().zip(g.aging.vectors()).zip(g.disease.vectors()) {
            let resid = [v[0] - t * a[0], v[1] - t * a[1], v[2] - t * a[2]];
            assert!(dot(resid, *a).abs() < 1e-9);
        }
    }

    #[test]
    fn disease_is_confined_to_the_hippocampi() {
        let g = PhantomGenerator::new(PhantomSpec { dims: [64; 3], ..small() });
        let ventricles = g.base.labels.mask_of(&[LABEL_LEFT_VENTRICLE, LABEL_RIGHT_VENTRICLE]);
        let hippocampi = g.base.labels.mask_of(&[LABEL_LEFT_HIPPOCAMPUS, LABEL_RIGHT_HIPPOCAMPUS]);
        let w = g.disease.vectors();
        assert!(ventricles.iter().zip(w).filter(|(m, _)| **m).all(|(_, v)| *v == [0.0; 3]));
        assert!(hippocampi.iter().zip(w).filter(|(m, _)| **m).any(|(_, v)| norm(*v) > 0.5));
    }

    #[test]
    fn older_subjects_have_larger_ventricles() {
        let g = PhantomGenerator::new(small());
        let young = g.subject(60.0, 0.0, None).unwrap();
        let old = g.subject(90.0, 0.0, None).unwrap();
        let vent = |l: &LabelVolume| l.count(LABEL_LEFT_VENTRICLE) + l.count(LABEL_RIGHT_VENTRICLE);
        assert!(vent(&old.labels) > vent(&young.labels));
        let hip = |l: &LabelVolume| l.count(LABEL_LEFT_HIPPOCAMPUS) + l.count(LABEL_RIGHT_HIPPOCAMPUS);
        assert!(hip(&old.labels) < hip(&young.labels));
    }

    #[test]
    fn generated_deformations_are_diffeomorphic() {
        let g = PhantomGenerator::new(small());
        let gt = g.subject(90.0, 1.5, None).unwrap().ground_truth;
        let det = svf::jacobian_determinant(&svf::exp(&gt).unwrap()).unwrap();
        assert!(det.values.iter().all(|&d| d > 0.0));
    }

    #[test]
    fn cohort_is_deterministic() {
        let spec = PhantomSpec { dims: [16, 16, 16], ..small() };
        let a = generate_cohort(&spec, 3, 1).unwrap();
        let b = generate_cohort(&spec, 3, 1).unwrap();
        assert_eq!(a.table, b.table);
        for (x, y) in a.subjects.iter().zip(&b.subjects) {
            assert_eq!(x.image.values, y.image.values);
        }
        assert_eq!(a.table.rows.len(), 7);
        assert_eq!(a.table.rows.iter().filter(|r| r.group == Group::CN).count(), 3);
        assert!(a.table.rows.iter().filter(|r| r.group == Group::CN).all(|r| r.cdr == 0.0));
        assert!(a.table.rows.iter().all(|r| (60.0..=90.0).contains(&r.age)));
        assert_eq!(a.severities[3..], [0.25, 0.5, 1.0, 1.5]);
        assert!(generate_cohort(&spec, 0, 0).is_err());
    }

    #[test]
    fn rejects_out_of_range_age() {
        let g = PhantomGenerator::new(PhantomSpec { dims: [8, 8, 8], ..small() });
        assert!(g.subject(40.0, 0.0, None).is_err());
        assert!(g.subject(70.0, -1.0, None).is_err());
    }
}
