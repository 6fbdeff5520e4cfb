//! Stationary velocity fields and their flows.
//!
//! `exp` integrates `d phi / dt = v(phi)` over unit time by scaling and
//! squaring. With `w = v / 2^K`, the first step is the second-order flow
//! `phi_0 = Id + w + (Dw) w / 2`, followed by `K` self-compositions. `K` is
//! the smallest integer with `max |v| / 2^K < 0.5` voxel, capped at
//! [`MAX_SQUARINGS`].

use crate::error::{Error, Result};
use crate::volume::{self, compose_displacements, norm, FieldKind, Grid3, ScalarVolume, Vec3, VectorField3};

pub const MAX_SQUARINGS: u32 = 10;

/// A velocity field together with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Svf {
    pub field: VectorField3,
    pub provenance: Option<String>,
}

impl Svf {
    pub fn new(field: VectorField3) -> Result<Self> {
        if field.vectors.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("velocity field"));
        }
        Ok(Self { field: VectorField3 { kind: FieldKind::Velocity, ..field }, provenance: None })
    }

    pub fn zeros(grid: Grid3) -> Self {
        Self { field: VectorField3::zeros(grid, FieldKind::Velocity), provenance: None }
    }

    pub fn from_vectors(grid: Grid3, vectors: Vec<Vec3>) -> Result<Self> {
        Self::new(VectorField3::new(grid, vectors, FieldKind::Velocity)?)
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = Some(provenance.into());
        self
    }

    pub fn grid(&self) -> &Grid3 {
        &self.field.grid
    }

    pub fn vectors(&self) -> &[Vec3] {
        &self.field.vectors
    }

    pub fn max_norm(&self) -> f64 {
        self.field.max_norm()
    }
}

/// Number of squarings used for a field with the given maximum norm.
pub fn squaring_steps(max_norm: f64) -> u32 {
    let mut k = 0;
    while k < MAX_SQUARINGS && max_norm / f64::powi(2.0, k as i32) >= 0.5 {
        k += 1;
    }
    k
}

/// Displacement `u` of `exp(v)` (so that `exp(v) = Id + u`).
pub(crate) fn exp_displacement(grid: &Grid3, v: &[Vec3]) -> Vec<Vec3> {
    let max = v.iter().map(|&a| norm(a)).fold(0.0, f64::max);
    if max == 0.0 {
        return vec![[0.0; 3]; v.len()];
    }
    let k = squaring_steps(max);
    let scale = 1.0 / f64::powi(2.0, k as i32);
    let w: Vec<Vec3> = v.iter().map(|a| [a[0] * scale, a[1] * scale, a[2] * scale]).collect();
    let mut u: Vec<Vec3> = (0..w.len())
        .map(|i| {
            let j = volume::vector_jacobian(grid, &w, i);
            let mut r = w[i];
            for (a, row) in j.iter().enumerate() {
                r[a] += 0.5 * (row[0] * w[i][0] + row[1] * w[i][1] + row[2] * w[i][2]);
            }
            r
        })
        .collect();
    for _ in 0..k {
        u = compose_displacements(grid, &u, &u);
    }
    u
}

/// Deformation `phi = exp(v)`. `exp(0)` is the identity, bit for bit.
pub fn exp(v: &Svf) -> Result<VectorField3> {
    if v.field.vectors.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("velocity field"));
    }
    let u = exp_displacement(v.grid(), v.vectors());
    let disp = VectorField3 { grid: v.grid().clone(), vectors: u, kind: FieldKind::Displacement };
    Ok(disp.to_deformation())
}

/// `exp(-v)`, the inverse of `exp(v)` for a stationary field.
pub fn inverse_deformation(v: &Svf) -> Result<VectorField3> {
    exp(&scale(v, -1.0))
}

fn det3(j: &[[f64; 3]; 3]) -> f64 {
    j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
        + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0])
}

/// Determinant of the finite-difference Jacobian of a deformation.
pub fn jacobian_determinant(phi: &VectorField3) -> Result<ScalarVolume> {
    phi.expect_kind(FieldKind::Deformation)?;
    let grid = &phi.grid;
    let values = (0..grid.len())
        .map(|i| det3(&volume::vector_jacobian(grid, &phi.vectors, i)))
        .collect();
    Ok(ScalarVolume { grid: grid.clone(), values })
}

/// Minimum Jacobian determinant of `Id + u`, without allocating the map.
pub(crate) fn min_jacobian_of_displacement(grid: &Grid3, u: &[Vec3]) -> f64 {
    let mut min = f64::INFINITY;
    for i in 0..grid.len() {
        let mut j = volume::vector_jacobian(grid, u, i);
        for (d, row) in j.iter_mut().enumerate() {
            row[d] += 1.0;
        }
        min = min.min(det3(&j));
    }
    min
}

pub fn scale(v: &Svf, s: f64) -> Svf {
    let vectors = v.vectors().iter().map(|a| [a[0] * s, a[1] * s, a[2] * s]).collect();
    Svf {
        field: VectorField3 { grid: v.grid().clone(), vectors, kind: FieldKind::Velocity },
        provenance: v.provenance.clone(),
    }
}

pub fn add(v: &Svf, w: &Svf) -> Result<Svf> {
    v.grid().check_compatible(w.grid())?;
    let vectors = v
        .vectors()
        .iter()
        .zip(w.vectors())
        .map(|(a, b)| [a[0] + b[0], a[1] + b[1], a[2] + b[2]])
        .collect();
    Ok(Svf {
        field: VectorField3 { grid: v.grid().clone(), vectors, kind: FieldKind::Velocity },
        provenance: None,
    })
}

/// Per-voxel Euclidean norm.
pub fn norm_map(v: &Svf) -> ScalarVolume {
    ScalarVolume { grid: v.grid().clone(), values: v.vectors().iter().map(|&a| norm(a)).collect() }
}
