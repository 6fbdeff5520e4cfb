//! Pairwise diffeomorphic registration with a stationary velocity field.
//!
//! The energy minimized is
//!
//! ```text
//! E(v) = (1 - lncc(fixed, moving o exp(v))) + lambda2 * mean |grad u|^2 + lambda3 * mean |u|^2
//! ```
//!
//! with `exp(v) = Id + u`. The returned field maps fixed-grid points to where
//! the same anatomy sits in the moving image: `moving o exp(v) ~ fixed`.
//!
//! Each iteration takes the gradient of the summed window correlations (a
//! locally normalized intensity residual times the warped-image gradient) as
//! the similarity force. Windows flat on one side only have no correlation
//! gradient, so there the force pushes the moving variance towards the fixed
//! window's flatness instead. The regularizer's descent direction is added,
//! the sum is smoothed and rescaled so that no voxel moves more than
//! `step_size`. A step is kept only if the energy decreases
//! and the Jacobian of `exp(v)` stays positive; otherwise it is halved.
//! Levels run coarse to fine on a 2x pyramid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{box_count, box_sum, downsample, downsample_mask, gaussian_smooth_vectors, upsample_field};
use crate::svf::{exp_displacement, min_jacobian_of_displacement, Svf};
use crate::volume::{spatial_gradient, warp_by_displacement, FieldKind, Grid3, ScalarVolume, Vec3, VectorField3};

/// Local variance below which a window is treated as flat.
pub const FLAT_VARIANCE: f64 = 1e-12;
/// Windows whose variance is below this fraction of the image variance carry
/// no force; their correlation is dominated by interpolation error.
const FORCE_VARIANCE_FLOOR: f64 = 1e-4;
const MAX_HALVINGS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistrationConfig {
    /// Side of the cubic LNCC window, odd, in voxels of each level.
    pub lncc_window: usize,
    pub lambda2: f64,
    pub lambda3: f64,
    pub pyramid_levels: usize,
    pub iters_per_level: usize,
    /// Largest per-voxel change of one update, in voxels of the current level.
    pub step_size: f64,
    pub smooth_update_sigma: f64,
    /// Gaussian smoothing applied to the velocity field after each update.
    pub smooth_field_sigma: f64,
    /// Stop a level when the relative energy decrease falls below this.
    pub convergence_tol: f64,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            lncc_window: 9,
            lambda2: 1.0,
            lambda3: 0.01,
            pyramid_levels: 3,
            iters_per_level: 100,
            step_size: 0.1,
            smooth_update_sigma: 1.0,
            smooth_field_sigma: 0.0,
            convergence_tol: 1e-4,
        }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.lncc_window < 3 || self.lncc_window % 2 == 0 {
            return bad(format!("lncc_window {} must be odd and >= 3", self.lncc_window));
        }
        if !(self.lambda2 >= 0.0 && self.lambda3 >= 0.0) {
            return bad("lambda2 and lambda3 must be non-negative".into());
        }
        if self.pyramid_levels < 1 {
            return bad("pyramid_levels must be >= 1".into());
        }
        if !(self.step_size > 0.0 && self.smooth_update_sigma > 0.0 && self.convergence_tol > 0.0) {
            return bad("step_size, smooth_update_sigma and convergence_tol must be positive".into());
        }
        if !(self.smooth_field_sigma >= 0.0) {
            return bad("smooth_field_sigma must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RegistrationResult {
    pub svf: Svf,
    pub final_energy: f64,
    /// Energy of every accepted iterate, one list per level, coarse to fine.
    pub energy_trace: Vec<Vec<f64>>,
    pub min_jacobian: f64,
    /// Similarity after registration, in [0, 1].
    pub final_lncc: f64,
}

/// Window sums of the fixed image; constant during a level.
struct FixedStats {
    values: Vec<f64>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    count: Vec<f64>,
}

impl FixedStats {
    fn new(dims: [usize; 3], values: &[f64], radius: usize) -> Self {
        let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
        Self {
            values: values.to_vec(),
            sum: box_sum(dims, values, radius),
            sum_sq: box_sum(dims, &sq, radius),
            count: box_count(dims, radius),
        }
    }
}

/// Window sums involving the warped moving image.
struct MovingStats {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    cross: Vec<f64>,
}

impl MovingStats {
    fn new(dims: [usize; 3], fixed: &[f64], warped: &[f64], radius: usize) -> Self {
        let sq: Vec<f64> = warped.iter().map(|v| v * v).collect();
        let fw: Vec<f64> = fixed.iter().zip(warped).map(|(a, b)| a * b).collect();
        Self {
            sum: box_sum(dims, warped, radius),
            sum_sq: box_sum(dims, &sq, radius),
            cross: box_sum(dims, &fw, radius),
        }
    }
}

/// Centred local moments `(A, B, C)` = (covariance, fixed variance, moving variance) sums.
#[inline]
fn moments(fs: &FixedStats, ms: &MovingStats, i: usize) -> (f64, f64, f64, f64) {
    let n = fs.count[i];
    let a = ms.cross[i] - fs.sum[i] * ms.sum[i] / n;
    let b = fs.sum_sq[i] - fs.sum[i] * fs.sum[i] / n;
    let c = ms.sum_sq[i] - ms.sum[i] * ms.sum[i] / n;
    (a, b.max(0.0), c.max(0.0), n)
}

/// Mean squared local correlation. Voxels where both windows are flat carry no
/// information and are skipped; where only one is flat they count as 0.
fn lncc_from_stats(fs: &FixedStats, ms: &MovingStats, mask: Option<&[bool]>) -> f64 {
    let mut total = 0.0;
    let mut counted = 0usize;
    for i in 0..fs.count.len() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        let (a, b, c, n) = moments(fs, ms, i);
        let flat_f = b / n < FLAT_VARIANCE;
        let flat_m = c / n < FLAT_VARIANCE;
        if flat_f && flat_m {
            continue;
        }
        counted += 1;
        if !flat_f && !flat_m {
            total += ((a * a) / (b * c)).min(1.0);
        }
    }
    if counted == 0 {
        1.0
    } else {
        total / counted as f64
    }
}

fn centred(values: &[f64]) -> Vec<f64> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| v - mean).collect()
}

/// Localized normalized cross-correlation similarity in [0, 1].
pub fn lncc(a: &ScalarVolume, b: &ScalarVolume, window: usize) -> Result<f64> {
    a.grid.check_compatible(&b.grid)?;
    if window % 2 == 0 || window == 0 {
        return Err(Error::InvalidArgument(format!("window {window} must be odd")));
    }
    let dims = a.grid.dims;
    let fa = centred(&a.values);
    let fb = centred(&b.values);
    let fs = FixedStats::new(dims, &fa, window / 2);
    let ms = MovingStats::new(dims, &fa, &fb, window / 2);
    Ok(lncc_from_stats(&fs, &ms, None))
}

fn regularizer_terms(grid: &Grid3, u: &[Vec3]) -> (f64, f64) {
    let n = grid.len() as f64;
    let mut grad = 0.0;
    let mut mag = 0.0;
    for (i, d) in u.iter().enumerate() {
        let j = crate::volume::vector_jacobian(grid, u, i);
        grad += j.iter().flatten().map(|x| x * x).sum::<f64>();
        mag += d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    }
    (grad / n, mag / n)
}

/// `lambda2 * mean |grad u|^2 + lambda3 * mean |u|^2` for a displacement field.
pub fn regularizer(u: &VectorField3, cfg: &RegistrationConfig) -> Result<f64> {
    u.expect_kind(FieldKind::Displacement)?;
    let (g, m) = regularizer_terms(&u.grid, &u.vectors);
    Ok(cfg.lambda2 * g + cfg.lambda3 * m)
}

struct Eval {
    energy: f64,
    similarity: f64,
    warped: ScalarVolume,
    stats: MovingStats,
    min_jacobian: f64,
}

struct Level<'a> {
    fixed_centred: Vec<f64>,
    moving: ScalarVolume,
    fixed_stats: FixedStats,
    mask: Option<Vec<bool>>,
    radius: usize,
    /// Per-image local variance below which a window exerts no force.
    floor_fixed: f64,
    floor_moving: f64,
    cfg: &'a RegistrationConfig,
}

fn mean_and_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (mean, values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
}

/// Discrete Laplacian with replicated borders.
fn laplacian(dims: [usize; 3], v: &[Vec3]) -> Vec<Vec3> {
    let strides = [1, dims[0], dims[0] * dims[1]];
    let grid_len = v.len();
    (0..grid_len)
        .map(|i| {
            let c = [i % dims[0], (i / dims[0]) % dims[1], i / (dims[0] * dims[1])];
            let mut out = [0.0; 3];
            for axis in 0..3 {
                let lo = if c[axis] == 0 { i } else { i - strides[axis] };
                let hi = if c[axis] + 1 == dims[axis] { i } else { i + strides[axis] };
                for k in 0..3 {
                    out[k] += v[lo][k] + v[hi][k] - 2.0 * v[i][k];
                }
            }
            out
        })
        .collect()
}

impl<'a> Level<'a> {
    fn new(fixed: &ScalarVolume, moving: &ScalarVolume, mask: Option<Vec<bool>>, cfg: &'a RegistrationConfig) -> Self {
        let (mean_f, var_f) = mean_and_var(&fixed.values);
        let (mean_m, var_m) = mean_and_var(&moving.values);
        let fixed_centred: Vec<f64> = fixed.values.iter().map(|v| v - mean_f).collect();
        let moving = ScalarVolume {
            grid: moving.grid.clone(),
            values: moving.values.iter().map(|v| v - mean_m).collect(),
        };
        let radius = cfg.lncc_window / 2;
        let fixed_stats = FixedStats::new(fixed.grid.dims, &fixed_centred, radius);
        Self {
            fixed_centred,
            moving,
            fixed_stats,
            mask,
            radius,
            floor_fixed: (FORCE_VARIANCE_FLOOR * var_f).max(FLAT_VARIANCE),
            floor_moving: (FORCE_VARIANCE_FLOOR * var_m).max(FLAT_VARIANCE),
            cfg,
        }
    }

    fn grid(&self) -> &Grid3 {
        &self.moving.grid
    }

    fn evaluate(&self, v: &[Vec3]) -> Eval {
        let grid = self.grid();
        let u = exp_displacement(grid, v);
        let warped = warp_by_displacement(&self.moving, &u);
        let stats = MovingStats::new(grid.dims, &self.fixed_centred, &warped.values, self.radius);
        let similarity = lncc_from_stats(&self.fixed_stats, &stats, self.mask.as_deref());
        let (g, m) = regularizer_terms(grid, &u);
        let energy = (1.0 - similarity) + self.cfg.lambda2 * g + self.cfg.lambda3 * m;
        let min_jacobian = min_jacobian_of_displacement(grid, &u);
        Eval { energy, similarity, warped, stats, min_jacobian }
    }

    /// Descent direction of the similarity term: the derivative of the summed
    /// window correlations with respect to each warped intensity, times the
    /// warped-image gradient.
    fn similarity_force(&self, eval: &Eval) -> Vec<Vec3> {
        let fs = &self.fixed_stats;
        let len = fs.count.len();
        let dims = self.grid().dims;
        // per-window coefficients: alpha = 2A/(BC), k = A/C and the window means
        let mut alpha = vec![0.0; len];
        let mut alpha_mf = vec![0.0; len];
        let mut alpha_k = vec![0.0; len];
        let mut alpha_k_mw = vec![0.0; len];
        let mut gamma = vec![0.0; len];
        let mut gamma_mw = vec![0.0; len];
        for i in 0..len {
            if self.mask.as_ref().is_some_and(|m| !m[i]) {
                continue;
            }
            let (a, b, c, n) = moments(fs, &eval.stats, i);
            let flat_f = b / n < FLAT_VARIANCE;
            let flat_m = c / n < FLAT_VARIANCE;
            if flat_f != flat_m {
                // one-sided flat windows score 0 with no correlation gradient;
                // steer the moving variance towards the fixed one's flatness
                if c > 0.0 {
                    let g = if flat_f { -2.0 / c } else { 2.0 / c };
                    gamma[i] = g;
                    gamma_mw[i] = g * eval.stats.sum[i] / n;
                }
                continue;
            }
            if b / n < self.floor_fixed || c / n < self.floor_moving {
                continue;
            }
            let al = 2.0 * a / (b * c);
            let k = a / c;
            alpha[i] = al;
            alpha_mf[i] = al * fs.sum[i] / n;
            alpha_k[i] = al * k;
            alpha_k_mw[i] = al * k * eval.stats.sum[i] / n;
        }
        let s_alpha = box_sum(dims, &alpha, self.radius);
        let s_alpha_mf = box_sum(dims, &alpha_mf, self.radius);
        let s_alpha_k = box_sum(dims, &alpha_k, self.radius);
        let s_alpha_k_mw = box_sum(dims, &alpha_k_mw, self.radius);
        let s_gamma = box_sum(dims, &gamma, self.radius);
        let s_gamma_mw = box_sum(dims, &gamma_mw, self.radius);
        let grad = spatial_gradient(&eval.warped);
        let scale = 1.0 / len as f64;
        (0..len)
            .map(|j| {
                let d = fs.values[j] * s_alpha[j] - s_alpha_mf[j] - eval.warped.values[j] * s_alpha_k[j] + s_alpha_k_mw[j]
                    + eval.warped.values[j] * s_gamma[j]
                    - s_gamma_mw[j];
                let s = scale * d;
                let gw = grad.vectors[j];
                [s * gw[0], s * gw[1], s * gw[2]]
            })
            .collect()
    }

    /// Descent direction of the full energy, Gaussian-smoothed and rescaled
    /// so its largest vector has length `step_size`.
    fn update(&self, v: &[Vec3], eval: &Eval) -> Option<Vec<Vec3>> {
        let cfg = self.cfg;
        let dims = self.grid().dims;
        let n = v.len() as f64;
        let mut d = self.similarity_force(eval);
        let lap = laplacian(dims, v);
        for ((di, li), vi) in d.iter_mut().zip(&lap).zip(v) {
            for k in 0..3 {
                di[k] += 2.0 * (cfg.lambda2 * li[k] - cfg.lambda3 * vi[k]) / n;
            }
        }
        let d = gaussian_smooth_vectors(dims, &d, cfg.smooth_update_sigma);
        let max = d.iter().map(|a| (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()).fold(0.0, f64::max);
        if !(max > 0.0 && max.is_finite()) {
            return None;
        }
        let s = cfg.step_size / max;
        Some(d.into_iter().map(|a| [a[0] * s, a[1] * s, a[2] * s]).collect())
    }

    /// Returns the optimized field and the accepted energies.
    fn optimize(&self, mut v: Vec<Vec3>) -> (Vec<Vec3>, Eval, Vec<f64>) {
        let cfg = self.cfg;
        let dims = self.grid().dims;
        let mut eval = self.evaluate(&v);
        while eval.min_jacobian <= 0.0 {
            v.iter_mut().for_each(|a| *a = [a[0] * 0.5, a[1] * 0.5, a[2] * 0.5]);
            eval = self.evaluate(&v);
        }
        let mut trace = vec![eval.energy];
        for _ in 0..cfg.iters_per_level {
            let Some(update) = self.update(&v, &eval) else { break };
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let moved: Vec<Vec3> = v
                    .iter()
                    .zip(&update)
                    .map(|(a, d)| [a[0] + alpha * d[0], a[1] + alpha * d[1], a[2] + alpha * d[2]])
                    .collect();
                let cand = gaussian_smooth_vectors(dims, &moved, cfg.smooth_field_sigma);
                let e = self.evaluate(&cand);
                if e.energy < eval.energy && e.min_jacobian > 0.0 {
                    accepted = Some((cand, e));
                    break;
                }
                alpha *= 0.5;
            }
            let Some((cand, e)) = accepted else { break };
            let decrease = (eval.energy - e.energy) / eval.energy.abs().max(1e-12);
            v = cand;
            eval = e;
            trace.push(eval.energy);
            if decrease < cfg.convergence_tol {
                break;
            }
        }
        (v, eval, trace)
    }
}

pub fn register(fixed: &ScalarVolume, moving: &ScalarVolume, cfg: &RegistrationConfig) -> Result<RegistrationResult> {
    register_masked(fixed, moving, None, cfg)
}

/// Registration with the similarity restricted to `mask` (fixed-grid voxels).
pub fn register_masked(
    fixed: &ScalarVolume,
    moving: &ScalarVolume,
    mask: Option<&[bool]>,
    cfg: &RegistrationConfig,
) -> Result<RegistrationResult> {
    cfg.validate()?;
    fixed.grid.check_compatible(&moving.grid)?;
    if let Some(m) = mask {
        if m.len() != fixed.grid.len() {
            return Err(Error::GridMismatch(format!("mask of {} voxels for a grid of {}", m.len(), fixed.grid.len())));
        }
    }

    // pyramid, finest first
    let mut fixed_levels = vec![fixed.clone()];
    let mut moving_levels = vec![moving.clone()];
    let mut mask_levels = vec![mask.map(|m| m.to_vec())];
    while fixed_levels.len() < cfg.pyramid_levels {
        let last = fixed_levels.last().unwrap();
        if last.grid.dims.iter().any(|&n| n < 8) {
            break;
        }
        let next_mask = mask_levels.last().unwrap().as_ref().map(|m| downsample_mask(&last.grid, m));
        fixed_levels.push(downsample(last));
        moving_levels.push(downsample(moving_levels.last().unwrap()));
        mask_levels.push(next_mask);
    }

    let mut traces = Vec::new();
    let mut field: Option<VectorField3> = None;
    let mut final_eval = None;
    for lvl in (0..fixed_levels.len()).rev() {
        let grid = fixed_levels[lvl].grid.clone();
        let level = Level::new(&fixed_levels[lvl], &moving_levels[lvl], mask_levels[lvl].take(), cfg);
        let init = match field.take() {
            Some(coarse) => upsample_field(&coarse, &grid).vectors,
            None => vec![[0.0; 3]; grid.len()],
        };
        let (v, eval, trace) = level.optimize(init);
        traces.push(trace);
        field = Some(VectorField3 { grid, vectors: v, kind: FieldKind::Velocity });
        final_eval = Some(eval);
    }
    let field = field.expect("at least one level");
    let eval = final_eval.expect("at least one level");
    Ok(RegistrationResult {
        svf: Svf { field, provenance: Some("registration".into()) },
        final_energy: eval.energy,
        energy_trace: traces,
        min_jacobian: eval.min_jacobian,
        final_lncc: eval.similarity,
    })
}
