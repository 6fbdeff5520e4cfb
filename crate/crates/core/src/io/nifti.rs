//! Uncompressed, little-endian, single-frame 3D NIfTI-1.
//!
//! Readers accept `n+1` (single file) and `ni1` (`.hdr` + `.img` pair) with
//! datatypes uint8, int16, int32, float32 and float64. Writers always emit a
//! single `n+1` file with data at byte 352.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::volume::{FieldKind, Grid3, LabelVolume, ScalarVolume, VectorField3};

pub const HEADER_SIZE: usize = 348;
pub const DATA_OFFSET: usize = 352;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i16)]
pub enum Datatype {
    Uint8 = 2,
    Int16 = 4,
    Int32 = 8,
    Float32 = 16,
    Float64 = 64,
}

impl Datatype {
    fn from_code(code: i16) -> Option<Self> {
        Some(match code {
            2 => Self::Uint8,
            4 => Self::Int16,
            8 => Self::Int32,
            16 => Self::Float32,
            64 => Self::Float64,
            _ => return None,
        })
    }

    fn bytes(self) -> usize {
        match self {
            Self::Uint8 => 1,
            Self::Int16 => 2,
            Self::Int32 | Self::Float32 => 4,
            Self::Float64 => 8,
        }
    }

    fn is_integer(self) -> bool {
        matches!(self, Self::Uint8 | Self::Int16 | Self::Int32)
    }
}

/// Header fields this crate reads.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    pub dim: [i16; 8],
    pub datatype: Datatype,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub qform_code: i16,
    pub sform_code: i16,
    pub qoffset: [f32; 3],
    pub srow: [[f32; 4]; 3],
    pub magic: [u8; 4],
}

impl NiftiHeader {
    /// Scaling applies only when the slope is non-zero.
    pub fn scaling(&self) -> Option<(f64, f64)> {
        (self.scl_slope != 0.0 && self.scl_slope.is_finite())
            .then_some((self.scl_slope as f64, self.scl_inter as f64))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NiftiVolume {
    Scalar(ScalarVolume),
    Label(LabelVolume),
}

impl NiftiVolume {
    pub fn grid(&self) -> &Grid3 {
        match self {
            Self::Scalar(v) => &v.grid,
            Self::Label(l) => &l.grid,
        }
    }
}

fn i16_at(b: &[u8], off: usize) -> i16 {
    i16::from_le_bytes([b[off], b[off + 1]])
}

fn i32_at(b: &[u8], off: usize) -> i32 {
    i32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn f32_at(b: &[u8], off: usize) -> f32 {
    f32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

pub fn parse_header(bytes: &[u8], path: &Path) -> Result<NiftiHeader> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            detail: format!("{} bytes, header needs {HEADER_SIZE}", bytes.len()),
        });
    }
    let mut magic = [0u8; 4];
    magic.copy_from_slice(&bytes[344..348]);
    if &magic[..3] != b"n+1" && &magic[..3] != b"ni1" || magic[3] != 0 {
        return Err(Error::BadMagic { path: path.to_path_buf(), magic });
    }
    let sizeof_hdr = i32_at(bytes, 0);
    if sizeof_hdr != HEADER_SIZE as i32 {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            detail: format!("sizeof_hdr = {sizeof_hdr} (big-endian files are not supported)"),
        });
    }
    let mut dim = [0i16; 8];
    for (k, d) in dim.iter_mut().enumerate() {
        *d = i16_at(bytes, 40 + 2 * k);
    }
    if dim[0] != 3 {
        return Err(Error::NotThreeDimensional { path: path.to_path_buf(), ndim: dim[0] });
    }
    let code = i16_at(bytes, 70);
    let datatype =
        Datatype::from_code(code).ok_or(Error::UnsupportedDatatype { path: path.to_path_buf(), code })?;
    let mut pixdim = [0f32; 8];
    for (k, p) in pixdim.iter_mut().enumerate() {
        *p = f32_at(bytes, 76 + 4 * k);
    }
    let mut srow = [[0f32; 4]; 3];
    for (r, row) in srow.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = f32_at(bytes, 280 + 16 * r + 4 * c);
        }
    }
    Ok(NiftiHeader {
        dim,
        datatype,
        pixdim,
        vox_offset: f32_at(bytes, 108),
        scl_slope: f32_at(bytes, 112),
        scl_inter: f32_at(bytes, 116),
        qform_code: i16_at(bytes, 252),
        sform_code: i16_at(bytes, 254),
        qoffset: [f32_at(bytes, 268), f32_at(bytes, 272), f32_at(bytes, 276)],
        srow,
        magic,
    })
}

fn grid_from_header(h: &NiftiHeader, path: &Path) -> Result<Grid3> {
    let malformed = |detail: String| Error::MalformedHeader { path: path.to_path_buf(), detail };
    let mut dims = [0usize; 3];
    for k in 0..3 {
        let d = h.dim[k + 1];
        if d < 2 {
            return Err(malformed(format!("dim[{}] = {d}, need at least 2", k + 1)));
        }
        dims[k] = d as usize;
    }
    let mut spacing = [0f64; 3];
    for k in 0..3 {
        let p = h.pixdim[k + 1];
        if !(p.is_finite() && p > 0.0) {
            return Err(malformed(format!("pixdim[{}] = {p}", k + 1)));
        }
        spacing[k] = p as f64;
    }
    let origin = if h.qform_code > 0 {
        h.qoffset.map(|o| o as f64)
    } else if h.sform_code > 0 {
        [h.srow[0][3] as f64, h.srow[1][3] as f64, h.srow[2][3] as f64]
    } else {
        [0.0; 3]
    };
    Grid3::new(dims, spacing, origin).map_err(|e| malformed(e.to_string()))
}

fn decode(bytes: &[u8], datatype: Datatype, n: usize) -> Vec<f64> {
    let w = datatype.bytes();
    (0..n)
        .map(|i| {
            let b = &bytes[i * w..(i + 1) * w];
            match datatype {
                Datatype::Uint8 => b[0] as f64,
                Datatype::Int16 => i16::from_le_bytes([b[0], b[1]]) as f64,
                Datatype::Int32 => i32::from_le_bytes(b.try_into().unwrap()) as f64,
                Datatype::Float32 => f32::from_le_bytes(b.try_into().unwrap()) as f64,
                Datatype::Float64 => f64::from_le_bytes(b.try_into().unwrap()),
            }
        })
        .collect()
}

/// Reads a volume. Unscaled non-negative integer data comes back as labels,
/// everything else as a scalar volume with `slope * raw + inter` applied.
pub fn read_nifti(path: impl AsRef<Path>) -> Result<NiftiVolume> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let header = parse_header(&bytes, path)?;
    let grid = grid_from_header(&header, path)?;

    let (data, data_path): (Vec<u8>, PathBuf) = if &header.magic[..3] == b"ni1" {
        let img = path.with_extension("img");
        (fs::read(&img)?, img)
    } else {
        (bytes, path.to_path_buf())
    };
    let offset = header.vox_offset;
    if !(offset.is_finite() && offset >= 0.0) {
        return Err(Error::MalformedHeader { path: path.to_path_buf(), detail: format!("vox_offset = {offset}") });
    }
    let offset = offset as usize;
    if &header.magic[..3] == b"n+1" && offset < DATA_OFFSET {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            detail: format!("vox_offset = {offset}, single-file data starts at {DATA_OFFSET} or later"),
        });
    }
    let n = grid.len();
    let need = offset + n * header.datatype.bytes();
    if data.len() < need {
        return Err(Error::Truncated {
            path: data_path,
            detail: format!("{} bytes, data needs {need}", data.len()),
        });
    }
    let raw = decode(&data[offset..need], header.datatype, n);

    match header.scaling() {
        Some((slope, inter)) if !(slope == 1.0 && inter == 0.0) => {
            let values = raw.iter().map(|v| slope * v + inter).collect();
            Ok(NiftiVolume::Scalar(ScalarVolume::new(grid, values)?))
        }
        _ if header.datatype.is_integer() && raw.iter().all(|&v| v >= 0.0) => {
            let labels = raw.iter().map(|&v| v as u32).collect();
            Ok(NiftiVolume::Label(LabelVolume::new(grid, labels)?))
        }
        _ => {
            if raw.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("NIfTI voxel data"));
            }
            Ok(NiftiVolume::Scalar(ScalarVolume::new(grid, raw)?))
        }
    }
}

/// Reads any supported file as real values.
pub fn read_scalar(path: impl AsRef<Path>) -> Result<ScalarVolume> {
    Ok(match read_nifti(path)? {
        NiftiVolume::Scalar(v) => v,
        NiftiVolume::Label(l) => ScalarVolume { values: l.labels.iter().map(|&v| v as f64).collect(), grid: l.grid },
    })
}

/// Reads an integer label file.
pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelVolume> {
    let path = path.as_ref();
    match read_nifti(path)? {
        NiftiVolume::Label(l) => Ok(l),
        NiftiVolume::Scalar(_) => Err(Error::InvalidArgument(format!(
            "{}: expected unscaled non-negative integer labels",
            path.display()
        ))),
    }
}

fn header_bytes(grid: &Grid3, datatype: Datatype) -> Vec<u8> {
    let mut h = vec![0u8; DATA_OFFSET];
    let put_i16 = |h: &mut Vec<u8>, off: usize, v: i16| h[off..off + 2].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |h: &mut Vec<u8>, off: usize, v: f32| h[off..off + 4].copy_from_slice(&v.to_le_bytes());
    h[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    h[38] = b'r';
    put_i16(&mut h, 40, 3);
    for k in 0..3 {
        put_i16(&mut h, 42 + 2 * k, grid.dims[k] as i16);
    }
    for k in 4..8 {
        put_i16(&mut h, 40 + 2 * k, 1);
    }
    put_i16(&mut h, 70, datatype as i16);
    put_i16(&mut h, 72, (datatype.bytes() * 8) as i16);
    put_f32(&mut h, 76, 1.0);
    for k in 0..3 {
        put_f32(&mut h, 80 + 4 * k, grid.spacing[k] as f32);
    }
    put_f32(&mut h, 108, DATA_OFFSET as f32);
    put_f32(&mut h, 112, 1.0);
    put_f32(&mut h, 116, 0.0);
    h[123] = 2; // mm
    put_i16(&mut h, 252, 1);
    put_i16(&mut h, 254, 1);
    for k in 0..3 {
        put_f32(&mut h, 268 + 4 * k, grid.origin[k] as f32);
    }
    for r in 0..3 {
        put_f32(&mut h, 280 + 16 * r + 4 * r, grid.spacing[r] as f32);
        put_f32(&mut h, 280 + 16 * r + 12, grid.origin[r] as f32);
    }
    h[344..348].copy_from_slice(b"n+1\0");
    h
}

/// float32 payload, slope 1, intercept 0, data at byte 352.
pub fn write_scalar(vol: &ScalarVolume, path: impl AsRef<Path>) -> Result<()> {
    let mut bytes = header_bytes(&vol.grid, Datatype::Float32);
    bytes.reserve(vol.values.len() * 4);
    for &v in &vol.values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// int32 payload.
pub fn write_labels(labels: &LabelVolume, path: impl AsRef<Path>) -> Result<()> {
    let mut bytes = header_bytes(&labels.grid, Datatype::Int32);
    bytes.reserve(labels.labels.len() * 4);
    for &l in &labels.labels {
        let v = i32::try_from(l).map_err(|_| Error::InvalidArgument(format!("label {l} exceeds int32")))?;
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn write_nifti(vol: &NiftiVolume, path: impl AsRef<Path>) -> Result<()> {
    match vol {
        NiftiVolume::Scalar(v) => write_scalar(v, path),
        NiftiVolume::Label(l) => write_labels(l, path),
    }
}

/// `{prefix}_x.nii`, `{prefix}_y.nii`, `{prefix}_z.nii`.
pub fn field_paths(prefix: impl AsRef<Path>) -> [PathBuf; 3] {
    let prefix = prefix.as_ref().to_string_lossy().into_owned();
    ["x", "y", "z"].map(|s| PathBuf::from(format!("{prefix}_{s}.nii")))
}

pub fn write_field(field: &VectorField3, prefix: impl AsRef<Path>) -> Result<()> {
    for (axis, path) in field_paths(prefix).iter().enumerate() {
        write_scalar(&field.component(axis), path)?;
    }
    Ok(())
}

pub fn read_field(prefix: impl AsRef<Path>, kind: FieldKind) -> Result<VectorField3> {
    let [px, py, pz] = field_paths(prefix);
    VectorField3::from_components(&read_scalar(px)?, &read_scalar(py)?, &read_scalar(pz)?, kind)
}
