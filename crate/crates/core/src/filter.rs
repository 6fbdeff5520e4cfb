//! Separable filters and pyramid resampling shared by registration and QC.

use crate::volume::{Grid3, ScalarVolume, Stencil, Vec3, VectorField3};

/// Normalized Gaussian taps, radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// 1D convolution of every line along `axis`, clamped border.
fn convolve_axis<T: Copy + Default>(
    dims: [usize; 3],
    data: &[T],
    axis: usize,
    kernel: &[f64],
    madd: impl Fn(T, f64, T) -> T,
) -> Vec<T> {
    let n = dims[axis];
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let radius = (kernel.len() / 2) as isize;
    let mut out = vec![T::default(); data.len()];
    let mut line = vec![T::default(); n];
    let lines_outer = data.len() / n;
    for l in 0..lines_outer {
        // first element of the l-th line along `axis`
        let start = match axis {
            0 => l * n,
            1 => (l / dims[0]) * dims[0] * dims[1] + l % dims[0],
            _ => l,
        };
        for (c, slot) in line.iter_mut().enumerate() {
            *slot = data[start + c * stride];
        }
        for c in 0..n {
            let mut acc = T::default();
            for (k, &w) in kernel.iter().enumerate() {
                let src = (c as isize + k as isize - radius).clamp(0, n as isize - 1) as usize;
                acc = madd(acc, w, line[src]);
            }
            out[start + c * stride] = acc;
        }
    }
    out
}

pub fn gaussian_smooth(vol: &ScalarVolume, sigma: f64) -> ScalarVolume {
    if sigma <= 0.0 {
        return vol.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let madd = |acc: f64, w: f64, v: f64| acc + w * v;
    let mut data = vol.values.clone();
    for axis in 0..3 {
        data = convolve_axis(vol.grid.dims, &data, axis, &kernel, madd);
    }
    ScalarVolume { grid: vol.grid.clone(), values: data }
}

pub(crate) fn gaussian_smooth_vectors(dims: [usize; 3], vectors: &[Vec3], sigma: f64) -> Vec<Vec3> {
    if sigma <= 0.0 {
        return vectors.to_vec();
    }
    let kernel = gaussian_kernel(sigma);
    let madd = |acc: Vec3, w: f64, v: Vec3| [acc[0] + w * v[0], acc[1] + w * v[1], acc[2] + w * v[2]];
    let mut data = vectors.to_vec();
    for axis in 0..3 {
        data = convolve_axis(dims, &data, axis, &kernel, madd);
    }
    data
}

pub fn gaussian_smooth_field(field: &VectorField3, sigma: f64) -> VectorField3 {
    VectorField3 {
        grid: field.grid.clone(),
        vectors: gaussian_smooth_vectors(field.grid.dims, &field.vectors, sigma),
        kind: field.kind,
    }
}

/// Sum over a cubic window of side `2 * radius + 1`, truncated at the border.
/// Computed with running prefix sums along each axis.
pub(crate) fn box_sum(dims: [usize; 3], data: &[f64], radius: usize) -> Vec<f64> {
    let mut cur = data.to_vec();
    let mut prefix = Vec::new();
    for axis in 0..3 {
        let n = dims[axis];
        let stride = match axis {
            0 => 1,
            1 => dims[0],
            _ => dims[0] * dims[1],
        };
        let mut out = vec![0.0; cur.len()];
        let lines = cur.len() / n;
        for l in 0..lines {
            let start = match axis {
                0 => l * n,
                1 => (l / dims[0]) * dims[0] * dims[1] + l % dims[0],
                _ => l,
            };
            prefix.clear();
            prefix.push(0.0);
            let mut acc = 0.0;
            for c in 0..n {
                acc += cur[start + c * stride];
                prefix.push(acc);
            }
            for c in 0..n {
                let lo = c.saturating_sub(radius);
                let hi = (c + radius + 1).min(n);
                out[start + c * stride] = prefix[hi] - prefix[lo];
            }
        }
        cur = out;
    }
    cur
}

/// Number of voxels in each truncated window used by [`box_sum`].
pub(crate) fn box_count(dims: [usize; 3], radius: usize) -> Vec<f64> {
    let per_axis: Vec<Vec<f64>> = dims
        .iter()
        .map(|&n| {
            (0..n)
                .map(|c| ((c + radius + 1).min(n) - c.saturating_sub(radius)) as f64)
                .collect()
        })
        .collect();
    let grid_len = dims[0] * dims[1] * dims[2];
    (0..grid_len)
        .map(|i| {
            let x = i % dims[0];
            let y = (i / dims[0]) % dims[1];
            let z = i / (dims[0] * dims[1]);
            per_axis[0][x] * per_axis[1][y] * per_axis[2][z]
        })
        .collect()
}

/// Coarse grid for one pyramid level: `ceil(n / 2)` voxels per axis, doubled spacing.
pub fn coarser_grid(grid: &Grid3) -> Grid3 {
    let dims = grid.dims.map(|n| n.div_ceil(2).max(2));
    Grid3 {
        dims,
        spacing: [grid.spacing[0] * 2.0, grid.spacing[1] * 2.0, grid.spacing[2] * 2.0],
        origin: grid.origin,
    }
}

/// Anti-aliased 2x decimation.
pub fn downsample(vol: &ScalarVolume) -> ScalarVolume {
    let smoothed = gaussian_smooth(vol, 1.0);
    let coarse = coarser_grid(&vol.grid);
    let values = coarse
        .voxels()
        .map(|[x, y, z]| {
            let s = Stencil::new(&vol.grid, [2.0 * x as f64, 2.0 * y as f64, 2.0 * z as f64]);
            s.scalar(&smoothed.values)
        })
        .collect();
    ScalarVolume { grid: coarse, values }
}

/// Nearest-corner 2x decimation for binary masks: a coarse voxel is set when any
/// fine voxel of its 2x2x2 block is set.
pub fn downsample_mask(grid: &Grid3, mask: &[bool]) -> Vec<bool> {
    let coarse = coarser_grid(grid);
    let [nx, ny, nz] = grid.dims;
    coarse
        .voxels()
        .map(|[x, y, z]| {
            let mut any = false;
            for dz in 0..2 {
                for dy in 0..2 {
                    for dx in 0..2 {
                        let (fx, fy, fz) = (2 * x + dx, 2 * y + dy, 2 * z + dz);
                        if fx < nx && fy < ny && fz < nz {
                            any |= mask[grid.index(fx, fy, fz)];
                        }
                    }
                }
            }
            any
        })
        .collect()
}

/// Resample a coarse-level field onto `fine`, scaling vectors by 2 (voxel units).
pub fn upsample_field(coarse: &VectorField3, fine: &Grid3) -> VectorField3 {
    let vectors = fine
        .voxels()
        .map(|[x, y, z]| {
            let v = coarse.sample([x as f64 / 2.0, y as f64 / 2.0, z as f64 / 2.0]);
            [2.0 * v[0], 2.0 * v[1], 2.0 * v[2]]
        })
        .collect();
    VectorField3 { grid: fine.clone(), vectors, kind: coarse.kind }
}
