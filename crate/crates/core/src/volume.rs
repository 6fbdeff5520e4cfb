//! Sampled 3D domains: grids, scalar images, label images and 3-vector fields.
//!
//! All voxel arrays use one linearization, x fastest then y then z:
//! `index = x + nx * (y + ny * z)`. Vectors are stored in voxel units.
//! Sampling outside the grid clamps to the boundary face.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid3 {
    pub dims: [usize; 3],
    /// Millimetres per voxel.
    pub spacing: [f64; 3],
    /// Millimetres.
    pub origin: [f64; 3],
}

impl Grid3 {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidGrid(format!("dims {dims:?}: every axis needs at least 2 voxels")));
        }
        if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidGrid(format!("spacing {spacing:?} must be positive")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid(format!("origin {origin:?} must be finite")));
        }
        Ok(Self { dims, spacing, origin })
    }

    /// Unit-spacing grid at the origin. Panics if any axis is shorter than 2.
    pub fn cube(n: usize) -> Self {
        Self::new([n, n, n], [1.0; 3], [0.0; 3]).expect("cube grid needs n >= 2")
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    /// Voxel centre of the volume in voxel coordinates.
    pub fn center(&self) -> Vec3 {
        [
            (self.dims[0] - 1) as f64 / 2.0,
            (self.dims[1] - 1) as f64 / 2.0,
            (self.dims[2] - 1) as f64 / 2.0,
        ]
    }

    pub fn is_compatible(&self, other: &Grid3) -> bool {
        self == other
    }

    pub fn check_compatible(&self, other: &Grid3) -> Result<()> {
        if self.is_compatible(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "dims {:?} spacing {:?} origin {:?} vs dims {:?} spacing {:?} origin {:?}",
                self.dims, self.spacing, self.origin, other.dims, other.spacing, other.origin
            )))
        }
    }

    /// Iterates over voxel coordinates in storage order.
    pub fn voxels(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let [nx, ny, nz] = self.dims;
        (0..nz).flat_map(move |z| (0..ny).flat_map(move |y| (0..nx).map(move |x| [x, y, z])))
    }
}

/// Precomputed trilinear stencil: 8 corner indices and weights.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stencil {
    pub idx: [usize; 8],
    pub w: [f64; 8],
}

#[inline]
fn axis_cell(x: f64, n: usize) -> (usize, f64) {
    let max = (n - 1) as f64;
    let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, max) };
    let i0 = (x.floor() as usize).min(n - 2);
    (i0, x - i0 as f64)
}

impl Stencil {
    #[inline]
    pub(crate) fn new(grid: &Grid3, p: Vec3) -> Self {
        let [nx, ny, nz] = grid.dims;
        let (x0, fx) = axis_cell(p[0], nx);
        let (y0, fy) = axis_cell(p[1], ny);
        let (z0, fz) = axis_cell(p[2], nz);
        let base = x0 + nx * (y0 + ny * z0);
        let sy = nx;
        let sz = nx * ny;
        let (gx, gy, gz) = (1.0 - fx, 1.0 - fy, 1.0 - fz);
        Stencil {
            idx: [
                base,
                base + 1,
                base + sy,
                base + sy + 1,
                base + sz,
                base + sz + 1,
                base + sz + sy,
                base + sz + sy + 1,
            ],
            w: [
                gx * gy * gz,
                fx * gy * gz,
                gx * fy * gz,
                fx * fy * gz,
                gx * gy * fz,
                fx * gy * fz,
                gx * fy * fz,
                fx * fy * fz,
            ],
        }
    }

    #[inline]
    pub(crate) fn scalar(&self, values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in 0..8 {
            acc += self.w[k] * values[self.idx[k]];
        }
        acc
    }

    #[inline]
    pub(crate) fn vector(&self, vectors: &[Vec3]) -> Vec3 {
        let mut acc = [0.0; 3];
        for k in 0..8 {
            let v = vectors[self.idx[k]];
            let w = self.w[k];
            acc[0] += w * v[0];
            acc[1] += w * v[1];
            acc[2] += w * v[2];
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    pub grid: Grid3,
    pub values: Vec<f64>,
}

impl ScalarVolume {
    pub fn new(grid: Grid3, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a grid of {} voxels",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scalar volume"));
        }
        Ok(Self { grid, values })
    }

    pub fn filled(grid: Grid3, value: f64) -> Self {
        let n = grid.len();
        Self { grid, values: vec![value; n] }
    }

    pub fn from_fn(grid: Grid3, mut f: impl FnMut([usize; 3]) -> f64) -> Self {
        let values = grid.voxels().map(&mut f).collect();
        Self { grid, values }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.grid.index(x, y, z)]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Linear rescale to [0, 1]. A constant volume maps to all zeros.
    pub fn normalized(&self) -> ScalarVolume {
        let (lo, hi) = self.min_max();
        let range = hi - lo;
        let values = if range > 0.0 {
            self.values.iter().map(|v| (v - lo) / range).collect()
        } else {
            vec![0.0; self.values.len()]
        };
        ScalarVolume { grid: self.grid.clone(), values }
    }
}

/// What the vectors of a [`VectorField3`] mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Velocity,
    /// `u` with `phi = Id + u`.
    Displacement,
    /// Absolute target coordinates `phi(p)`.
    Deformation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField3 {
    pub grid: Grid3,
    pub vectors: Vec<Vec3>,
    pub kind: FieldKind,
}

impl VectorField3 {
    pub fn new(grid: Grid3, vectors: Vec<Vec3>, kind: FieldKind) -> Result<Self> {
        if vectors.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} vectors for a grid of {} voxels",
                vectors.len(),
                grid.len()
            )));
        }
        if vectors.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("vector field"));
        }
        Ok(Self { grid, vectors, kind })
    }

    pub fn zeros(grid: Grid3, kind: FieldKind) -> Self {
        let n = grid.len();
        Self { grid, vectors: vec![[0.0; 3]; n], kind }
    }

    pub fn from_fn(grid: Grid3, kind: FieldKind, mut f: impl FnMut([usize; 3]) -> Vec3) -> Self {
        let vectors = grid.voxels().map(&mut f).collect();
        Self { grid, vectors, kind }
    }

    pub fn identity(grid: Grid3) -> Self {
        Self::from_fn(grid, FieldKind::Deformation, |[x, y, z]| [x as f64, y as f64, z as f64])
    }

    pub fn expect_kind(&self, expected: FieldKind) -> Result<()> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(Error::WrongFieldKind { expected, found: self.kind })
        }
    }

    /// Deformation `Id + u` for a displacement (or velocity used as one).
    pub fn to_deformation(&self) -> VectorField3 {
        match self.kind {
            FieldKind::Deformation => self.clone(),
            _ => {
                let vectors = self
                    .vectors
                    .iter()
                    .enumerate()
                    .map(|(i, u)| {
                        let [x, y, z] = self.grid.coords(i);
                        [x as f64 + u[0], y as f64 + u[1], z as f64 + u[2]]
                    })
                    .collect();
                VectorField3 { grid: self.grid.clone(), vectors, kind: FieldKind::Deformation }
            }
        }
    }

    /// Displacement `phi - Id` for a deformation; other kinds are relabelled.
    pub fn to_displacement(&self) -> VectorField3 {
        match self.kind {
            FieldKind::Deformation => {
                let vectors = self
                    .vectors
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        let [x, y, z] = self.grid.coords(i);
                        [p[0] - x as f64, p[1] - y as f64, p[2] - z as f64]
                    })
                    .collect();
                VectorField3 { grid: self.grid.clone(), vectors, kind: FieldKind::Displacement }
            }
            _ => VectorField3 { kind: FieldKind::Displacement, ..self.clone() },
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.vectors.iter().map(|v| norm(*v)).fold(0.0, f64::max)
    }

    /// Component-wise trilinear sample with boundary clamping.
    pub fn sample(&self, p: Vec3) -> Vec3 {
        Stencil::new(&self.grid, p).vector(&self.vectors)
    }

    /// One component as a scalar volume.
    pub fn component(&self, axis: usize) -> ScalarVolume {
        ScalarVolume {
            grid: self.grid.clone(),
            values: self.vectors.iter().map(|v| v[axis]).collect(),
        }
    }

    pub fn from_components(x: &ScalarVolume, y: &ScalarVolume, z: &ScalarVolume, kind: FieldKind) -> Result<Self> {
        x.grid.check_compatible(&y.grid)?;
        x.grid.check_compatible(&z.grid)?;
        let vectors = (0..x.values.len()).map(|i| [x.values[i], y.values[i], z.values[i]]).collect();
        VectorField3::new(x.grid.clone(), vectors, kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    pub grid: Grid3,
    pub labels: Vec<u32>,
}

impl LabelVolume {
    pub fn new(grid: Grid3, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for a grid of {} voxels",
                labels.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, labels })
    }

    pub fn count(&self, label: u32) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn mask_of(&self, set: &[u32]) -> Vec<bool> {
        self.labels.iter().map(|l| set.contains(l)).collect()
    }

    pub fn foreground(&self) -> Vec<bool> {
        self.labels.iter().map(|&l| l != 0).collect()
    }

    pub fn distinct(&self) -> std::collections::BTreeSet<u32> {
        self.labels.iter().copied().collect()
    }
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Trilinear interpolation at a point in voxel coordinates, clamped to the grid.
pub fn sample_trilinear(vol: &ScalarVolume, point: Vec3) -> f64 {
    Stencil::new(&vol.grid, point).scalar(&vol.values)
}

/// `output(p) = image(phi(p))`.
pub fn warp(image: &ScalarVolume, deformation: &VectorField3) -> Result<ScalarVolume> {
    deformation.expect_kind(FieldKind::Deformation)?;
    image.grid.check_compatible(&deformation.grid)?;
    let values = deformation
        .vectors
        .iter()
        .map(|&p| sample_trilinear(image, p))
        .collect();
    Ok(ScalarVolume { grid: image.grid.clone(), values })
}

/// Warp by a displacement field `u` (`phi = Id + u`) without materialising `phi`.
pub(crate) fn warp_by_displacement(image: &ScalarVolume, u: &[Vec3]) -> ScalarVolume {
    let grid = &image.grid;
    let values = u
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let [x, y, z] = grid.coords(i);
            let s = Stencil::new(grid, [x as f64 + d[0], y as f64 + d[1], z as f64 + d[2]]);
            s.scalar(&image.values)
        })
        .collect();
    ScalarVolume { grid: grid.clone(), values }
}

/// Nearest-neighbour label warp, `output(p) = labels(round(phi(p)))`.
pub fn warp_labels(labels: &LabelVolume, deformation: &VectorField3) -> Result<LabelVolume> {
    deformation.expect_kind(FieldKind::Deformation)?;
    labels.grid.check_compatible(&deformation.grid)?;
    let [nx, ny, nz] = labels.grid.dims;
    let pick = |c: f64, n: usize| -> usize { (c.round().max(0.0) as usize).min(n - 1) };
    let out = deformation
        .vectors
        .iter()
        .map(|p| labels.labels[labels.grid.index(pick(p[0], nx), pick(p[1], ny), pick(p[2], nz))])
        .collect();
    Ok(LabelVolume { grid: labels.grid.clone(), labels: out })
}

/// `result(p) = phi_a(phi_b(p))`.
///
/// `phi_a` is evaluated as `q + u_a(q)` with its displacement sampled under
/// boundary clamping, so translations compose exactly up to the border.
pub fn compose(phi_a: &VectorField3, phi_b: &VectorField3) -> Result<VectorField3> {
    phi_a.expect_kind(FieldKind::Deformation)?;
    phi_b.expect_kind(FieldKind::Deformation)?;
    phi_a.grid.check_compatible(&phi_b.grid)?;
    let u_a = phi_a.to_displacement();
    let vectors = phi_b
        .vectors
        .iter()
        .map(|&q| {
            let d = Stencil::new(&u_a.grid, q).vector(&u_a.vectors);
            [q[0] + d[0], q[1] + d[1], q[2] + d[2]]
        })
        .collect();
    Ok(VectorField3 { grid: phi_a.grid.clone(), vectors, kind: FieldKind::Deformation })
}

/// Displacement form of composition: `u(p) = u_b(p) + u_a(p + u_b(p))`.
pub(crate) fn compose_displacements(grid: &Grid3, u_a: &[Vec3], u_b: &[Vec3]) -> Vec<Vec3> {
    u_b.iter()
        .enumerate()
        .map(|(i, d)| {
            let [x, y, z] = grid.coords(i);
            let s = Stencil::new(grid, [x as f64 + d[0], y as f64 + d[1], z as f64 + d[2]]);
            let a = s.vector(u_a);
            [d[0] + a[0], d[1] + a[1], d[2] + a[2]]
        })
        .collect()
}

#[inline]
fn axis_diff(values: &[f64], i: usize, c: usize, n: usize, stride: usize) -> f64 {
    if c == 0 {
        values[i + stride] - values[i]
    } else if c == n - 1 {
        values[i] - values[i - stride]
    } else {
        (values[i + stride] - values[i - stride]) / 2.0
    }
}

/// Central differences inside, one-sided at the border; intensity per voxel.
pub fn spatial_gradient(vol: &ScalarVolume) -> VectorField3 {
    let grid = &vol.grid;
    let [nx, ny, nz] = grid.dims;
    let strides = [1, nx, nx * ny];
    let vectors = (0..grid.len())
        .map(|i| {
            let c = grid.coords(i);
            [
                axis_diff(&vol.values, i, c[0], nx, strides[0]),
                axis_diff(&vol.values, i, c[1], ny, strides[1]),
                axis_diff(&vol.values, i, c[2], nz, strides[2]),
            ]
        })
        .collect();
    VectorField3 { grid: grid.clone(), vectors, kind: FieldKind::Velocity }
}

/// 3x3 spatial Jacobian `J[r][c] = d phi_r / d x_c` of a vector array.
pub(crate) fn vector_jacobian(grid: &Grid3, vectors: &[Vec3], i: usize) -> [[f64; 3]; 3] {
    let c = grid.coords(i);
    let [nx, ny, nz] = grid.dims;
    let n = [nx, ny, nz];
    let strides = [1, nx, nx * ny];
    let mut j = [[0.0; 3]; 3];
    for axis in 0..3 {
        let (hi, lo, h) = if c[axis] == 0 {
            (i + strides[axis], i, 1.0)
        } else if c[axis] == n[axis] - 1 {
            (i, i - strides[axis], 1.0)
        } else {
            (i + strides[axis], i - strides[axis], 2.0)
        };
        for r in 0..3 {
            j[r][axis] = (vectors[hi][r] - vectors[lo][r]) / h;
        }
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> ScalarVolume {
        ScalarVolume::from_fn(Grid3::cube(n), |[x, _, _]| x as f64)
    }

    #[test]
    fn grid_rejects_short_axes_and_bad_spacing() {
        assert!(Grid3::new([1, 4, 4], [1.0; 3], [0.0; 3]).is_err());
        assert!(Grid3::new([4, 4, 4], [1.0, 0.0, 1.0], [0.0; 3]).is_err());
        assert!(Grid3::new([4, 4, 4], [1.0, -1.0, 1.0], [0.0; 3]).is_err());
    }

    #[test]
    fn linearization_is_x_fastest() {
        let g = Grid3::new([3, 4, 5], [1.0; 3], [0.0; 3]).unwrap();
        assert_eq!(g.index(1, 0, 0), 1);
        assert_eq!(g.index(0, 1, 0), 3);
        assert_eq!(g.index(0, 0, 1), 12);
        assert_eq!(g.coords(g.index(2, 3, 4)), [2, 3, 4]);
        let order: Vec<_> = g.voxels().take(4).collect();
        assert_eq!(order, vec![[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]]);
    }

    #[test]
    fn trilinear_constant_node_and_ramp() {
        let c = ScalarVolume::filled(Grid3::cube(6), 0.7);
        assert_eq!(sample_trilinear(&c, [3.2, 1.5, 0.0]), 0.7);

        let v = ScalarVolume::from_fn(Grid3::cube(6), |[x, y, z]| (x * 31 + y * 7 + z * 3) as f64 * 0.013);
        assert_eq!(sample_trilinear(&v, [2.0, 3.0, 4.0]), v.get(2, 3, 4));
        assert_eq!(sample_trilinear(&v, [5.0, 5.0, 5.0]), v.get(5, 5, 5));

        assert!((sample_trilinear(&ramp(6), [1.5, 0.0, 0.0]) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn trilinear_clamps_out_of_bounds() {
        let r = ramp(5);
        assert_eq!(sample_trilinear(&r, [-3.0, 1.0, 1.0]), 0.0);
        assert_eq!(sample_trilinear(&r, [9.5, 1.0, 1.0]), 4.0);
        assert_eq!(sample_trilinear(&r, [f64::NAN, 1.0, 1.0]), 0.0);
    }

    #[test]
    fn warp_identity_is_bitwise() {
        let v = ScalarVolume::from_fn(Grid3::cube(7), |[x, y, z]| ((x * y + z) as f64).sin());
        let out = warp(&v, &VectorField3::identity(v.grid.clone())).unwrap();
        assert_eq!(out.values, v.values);
    }

    #[test]
    fn warp_shift_on_ramp_clamps() {
        let r = ramp(6);
        let shift = VectorField3::from_fn(r.grid.clone(), FieldKind::Deformation, |[x, y, z]| {
            [x as f64 + 1.0, y as f64, z as f64]
        });
        let out = warp(&r, &shift).unwrap();
        for [x, y, z] in r.grid.voxels() {
            assert_eq!(out.get(x, y, z), ((x + 1).min(5)) as f64);
        }
    }

    #[test]
    fn warp_constant_is_invariant() {
        let c = ScalarVolume::filled(Grid3::cube(5), 0.3);
        let phi = VectorField3::from_fn(c.grid.clone(), FieldKind::Deformation, |[x, y, z]| {
            [x as f64 * 0.7 + 1.3, (y as f64).sqrt(), z as f64 - 2.0]
        });
        let out = warp(&c, &phi).unwrap();
        assert!(out.values.iter().all(|&v| (v - 0.3).abs() < 1e-15));
    }

    #[test]
    fn warp_rejects_mismatch_and_wrong_kind() {
        let v = ScalarVolume::filled(Grid3::cube(4), 1.0);
        let other = VectorField3::identity(Grid3::cube(5));
        assert!(matches!(warp(&v, &other), Err(Error::GridMismatch(_))));
        let vel = VectorField3::zeros(Grid3::cube(4), FieldKind::Velocity);
        assert!(matches!(warp(&v, &vel), Err(Error::WrongFieldKind { .. })));
    }

    #[test]
    fn compose_identity_and_translations() {
        let g = Grid3::cube(8);
        let phi = VectorField3::from_fn(g.clone(), FieldKind::Deformation, |[x, y, z]| {
            [x as f64 + 0.3 * (y as f64 / 3.0).sin(), y as f64, z as f64 - 0.2]
        });
        let out = compose(&VectorField3::identity(g.clone()), &phi).unwrap();
        for (a, b) in out.vectors.iter().zip(&phi.vectors) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-12);
            }
        }

        let t = |s: f64| {
            VectorField3::from_fn(g.clone(), FieldKind::Deformation, move |[x, y, z]| [x as f64 + s, y as f64, z as f64])
        };
        let out = compose(&t(1.0), &t(2.0)).unwrap();
        for [x, y, z] in g.voxels() {
            let p = out.vectors[g.index(x, y, z)];
            assert!((p[0] - (x as f64 + 3.0)).abs() < 1e-12);
            assert_eq!(p[1], y as f64);
        }
    }

    #[test]
    fn gradient_constant_linear_quadratic() {
        let c = ScalarVolume::filled(Grid3::cube(5), 2.5);
        assert!(spatial_gradient(&c).vectors.iter().all(|v| *v == [0.0; 3]));

        let lin = ScalarVolume::from_fn(Grid3::cube(6), |[x, _, _]| 2.0 * x as f64);
        let g = spatial_gradient(&lin);
        for [x, y, z] in lin.grid.voxels() {
            assert_eq!(g.vectors[lin.grid.index(x, y, z)], [2.0, 0.0, 0.0]);
        }

        let sq = ScalarVolume::from_fn(Grid3::cube(6), |[x, _, _]| (x * x) as f64);
        let g = spatial_gradient(&sq);
        assert_eq!(g.vectors[sq.grid.index(3, 2, 2)], [6.0, 0.0, 0.0]);
        // one-sided at the faces
        assert_eq!(g.vectors[sq.grid.index(0, 2, 2)], [1.0, 0.0, 0.0]);
        assert_eq!(g.vectors[sq.grid.index(5, 2, 2)], [9.0, 0.0, 0.0]);
    }

    #[test]
    fn nearest_label_warp() {
        let g = Grid3::cube(4);
        let labels = LabelVolume::new(g.clone(), (0..64).map(|i| (i % 4) as u32).collect()).unwrap();
        let shift = VectorField3::from_fn(g.clone(), FieldKind::Deformation, |[x, y, z]| {
            [x as f64 + 0.6, y as f64, z as f64]
        });
        let out = warp_labels(&labels, &shift).unwrap();
        assert_eq!(&out.labels[..4], &[1, 2, 3, 3]);
    }
}
