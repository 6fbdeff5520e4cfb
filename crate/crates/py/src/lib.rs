//! Python bindings. Volumes cross the boundary as flat x-fastest lists plus
//! their dimensions.

use morphoscope::phantom::{PhantomGenerator, PhantomSpec};
use morphoscope::register::RegistrationConfig;
use morphoscope::scores::RegionSpec;
use morphoscope::volume::{FieldKind, Grid3};
use morphoscope::Error;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_)
        | Error::Csv(_)
        | Error::BadMagic { .. }
        | Error::UnsupportedDatatype { .. }
        | Error::NotThreeDimensional { .. }
        | Error::Truncated { .. }
        | Error::MalformedHeader { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn grid(dims: [usize; 3], spacing: Option<[f64; 3]>) -> PyResult<Grid3> {
    Grid3::new(dims, spacing.unwrap_or([1.0; 3]), [0.0; 3]).map_err(py_err)
}

fn config(json: Option<&str>) -> PyResult<RegistrationConfig> {
    match json {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string())),
        None => Ok(RegistrationConfig::default()),
    }
}

#[pyclass(name = "ScalarVolume", from_py_object)]
#[derive(Clone)]
pub struct PyScalarVolume {
    inner: morphoscope::ScalarVolume,
}

#[pymethods]
impl PyScalarVolume {
    #[new]
    #[pyo3(signature = (dims, values, spacing = None))]
    fn new(dims: [usize; 3], values: Vec<f64>, spacing: Option<[f64; 3]>) -> PyResult<Self> {
        let inner = morphoscope::ScalarVolume::new(grid(dims, spacing)?, values).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(Self { inner: morphoscope::io::read_scalar(path).map_err(py_err)? })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        morphoscope::io::write_scalar(&self.inner, path).map_err(py_err)
    }

    #[getter]
    fn dims(&self) -> [usize; 3] {
        self.inner.grid.dims
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.values.len()
    }
}

#[pyclass(name = "LabelVolume", from_py_object)]
#[derive(Clone)]
pub struct PyLabelVolume {
    inner: morphoscope::LabelVolume,
}

#[pymethods]
impl PyLabelVolume {
    #[new]
    #[pyo3(signature = (dims, labels, spacing = None))]
    fn new(dims: [usize; 3], labels: Vec<u32>, spacing: Option<[f64; 3]>) -> PyResult<Self> {
        let inner = morphoscope::LabelVolume::new(grid(dims, spacing)?, labels).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(Self { inner: morphoscope::io::read_labels(path).map_err(py_err)? })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        morphoscope::io::write_labels(&self.inner, path).map_err(py_err)
    }

    #[getter]
    fn dims(&self) -> [usize; 3] {
        self.inner.grid.dims
    }

    #[getter]
    fn labels(&self) -> Vec<u32> {
        self.inner.labels.clone()
    }

    fn count(&self, label: u32) -> usize {
        self.inner.count(label)
    }
}

/// Stationary velocity field in voxel units.
#[pyclass(name = "Svf", from_py_object)]
#[derive(Clone)]
pub struct PySvf {
    inner: morphoscope::Svf,
}

#[pymethods]
impl PySvf {
    #[new]
    #[pyo3(signature = (dims, vectors, spacing = None))]
    fn new(dims: [usize; 3], vectors: Vec<[f64; 3]>, spacing: Option<[f64; 3]>) -> PyResult<Self> {
        Ok(Self { inner: morphoscope::Svf::from_vectors(grid(dims, spacing)?, vectors).map_err(py_err)? })
    }

    #[staticmethod]
    fn read(prefix: &str) -> PyResult<Self> {
        let field = morphoscope::io::read_field(prefix, FieldKind::Velocity).map_err(py_err)?;
        Ok(Self { inner: morphoscope::Svf::new(field).map_err(py_err)? })
    }

    fn write(&self, prefix: &str) -> PyResult<()> {
        morphoscope::io::write_field(&self.inner.field, prefix).map_err(py_err)
    }

    #[getter]
    fn vectors(&self) -> Vec<[f64; 3]> {
        self.inner.vectors().to_vec()
    }

    fn max_norm(&self) -> f64 {
        self.inner.max_norm()
    }

    fn scaled(&self, factor: f64) -> Self {
        Self { inner: morphoscope::svf::scale(&self.inner, factor) }
    }

    /// Deformation `exp(v)` as absolute voxel positions.
    fn exp(&self) -> PyResult<Vec<[f64; 3]>> {
        Ok(morphoscope::exp(&self.inner).map_err(py_err)?.vectors)
    }

    fn min_jacobian(&self) -> PyResult<f64> {
        let phi = morphoscope::exp(&self.inner).map_err(py_err)?;
        let det = morphoscope::jacobian_determinant(&phi).map_err(py_err)?;
        Ok(det.values.iter().copied().fold(f64::INFINITY, f64::min))
    }
}

#[pyclass(name = "RegistrationResult", get_all)]
pub struct PyRegistrationResult {
    svf: PySvf,
    final_energy: f64,
    final_lncc: f64,
    min_jacobian: f64,
}

/// Finds `v` with `moving ∘ exp(v) ≈ fixed`. `config` is a JSON object of
/// registration settings; omitted keys keep their defaults.
#[pyfunction]
#[pyo3(signature = (fixed, moving, mask = None, config = None))]
fn register(
    py: Python<'_>,
    fixed: &PyScalarVolume,
    moving: &PyScalarVolume,
    mask: Option<&PyLabelVolume>,
    config: Option<&str>,
) -> PyResult<PyRegistrationResult> {
    let cfg = self::config(config)?;
    let mask = mask.map(|m| m.inner.foreground());
    let (f, m) = (fixed.inner.clone(), moving.inner.clone());
    let res = py
        .detach(|| morphoscope::register_masked(&f, &m, mask.as_deref(), &cfg))
        .map_err(py_err)?;
    Ok(PyRegistrationResult {
        svf: PySvf { inner: res.svf },
        final_energy: res.final_energy,
        final_lncc: res.final_lncc,
        min_jacobian: res.min_jacobian,
    })
}

#[pyfunction]
#[pyo3(signature = (a, b, window = 9))]
fn lncc(a: &PyScalarVolume, b: &PyScalarVolume, window: usize) -> PyResult<f64> {
    morphoscope::lncc(&a.inner, &b.inner, window).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (volume, mask = None))]
fn efc(volume: &PyScalarVolume, mask: Option<&PyLabelVolume>) -> PyResult<f64> {
    morphoscope::efc(&volume.inner, mask.map(|m| &m.inner)).map_err(py_err)
}

#[pyclass(name = "AgingField")]
pub struct PyAgingField {
    inner: morphoscope::AgingField,
}

#[pymethods]
impl PyAgingField {
    #[getter]
    fn v0(&self) -> PySvf {
        PySvf { inner: self.inner.v0.clone() }
    }

    #[getter]
    fn gap_years(&self) -> f64 {
        self.inner.gap_years
    }
}

/// One-year aging field from a young and an old template.
#[pyfunction]
#[pyo3(signature = (young, old, young_age, old_age, mask = None, config = None))]
fn aging_field(
    py: Python<'_>,
    young: &PyScalarVolume,
    old: &PyScalarVolume,
    young_age: f64,
    old_age: f64,
    mask: Option<&PyLabelVolume>,
    config: Option<&str>,
) -> PyResult<PyAgingField> {
    let cfg = self::config(config)?;
    let mask = mask.map(|m| m.inner.foreground());
    let (y, o) = (young.inner.clone(), old.inner.clone());
    let inner = py
        .detach(|| morphoscope::scores::one_year_field_masked(&y, &o, young_age, old_age, mask.as_deref(), &cfg))
        .map_err(py_err)?;
    Ok(PyAgingField { inner })
}

/// Wraps an existing young-to-old field as a per-year aging field.
#[pyfunction]
fn aging_from_svf(v: &PySvf, young_age: f64, old_age: f64) -> PyResult<PyAgingField> {
    Ok(PyAgingField { inner: morphoscope::scores::aging_from_svf(v.inner.clone(), young_age, old_age).map_err(py_err)? })
}

fn region(name: &str) -> PyResult<RegionSpec> {
    match name {
        "ventricles" => Ok(RegionSpec::ventricles()),
        "hippocampi_amygdala" => Ok(RegionSpec::hippocampi_amygdala()),
        "whole_brain" => Ok(RegionSpec::whole_brain()),
        other => Err(PyValueError::new_err(format!("unknown region {other:?}"))),
    }
}

/// Regional `(AS, ADS)` of a subject field at quantile `q`.
#[pyfunction]
#[pyo3(signature = (v, aging, labels, region_name, q = 0.0))]
fn regional_scores(
    v: &PySvf,
    aging: &PyAgingField,
    labels: &PyLabelVolume,
    region_name: &str,
    q: f64,
) -> PyResult<(f64, f64)> {
    let vs = morphoscope::voxel_scores(&v.inner, &aging.inner).map_err(py_err)?;
    let (a, d) = morphoscope::regional_score(&vs, &region(region_name)?, &labels.inner, q, "").map_err(py_err)?;
    Ok((a.value, d.value))
}

#[pyclass(name = "PhantomGenerator")]
pub struct PyPhantomGenerator {
    inner: PhantomGenerator,
}

#[pymethods]
impl PyPhantomGenerator {
    #[new]
    #[pyo3(signature = (size = 64, seed = 0))]
    fn new(size: usize, seed: u64) -> Self {
        Self { inner: PhantomGenerator::new(PhantomSpec { dims: [size; 3], seed, ..Default::default() }) }
    }

    /// `(image, labels, ground_truth_svf)` of one subject; `noise_stream=None`
    /// gives a noise-free image.
    #[pyo3(signature = (age, severity = 0.0, noise_stream = Some(0)))]
    fn subject(
        &self,
        age: f64,
        severity: f64,
        noise_stream: Option<u64>,
    ) -> PyResult<(PyScalarVolume, PyLabelVolume, PySvf)> {
        let s = self.inner.subject(age, severity, noise_stream).map_err(py_err)?;
        Ok((PyScalarVolume { inner: s.image }, PyLabelVolume { inner: s.labels }, PySvf { inner: s.ground_truth }))
    }

    /// Noise-free anatomy at `age`.
    fn reference(&self, age: f64) -> PyResult<(PyScalarVolume, PyLabelVolume)> {
        let s = self.inner.reference(age).map_err(py_err)?;
        Ok((PyScalarVolume { inner: s.image }, PyLabelVolume { inner: s.labels }))
    }
}

#[pyfunction]
fn t_test(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    morphoscope::stats::t_test_ind(&a, &b).map_err(py_err)
}

/// `(d, band)` with band one of none, medium, large, very_large.
#[pyfunction]
fn cohens_d(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, String)> {
    let (d, band) = morphoscope::stats::cohens_d(&a, &b).map_err(py_err)?;
    Ok((d, band.to_string()))
}

/// `(slope, intercept, r_squared, p_value)`.
#[pyfunction]
fn fit_linear(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64, f64, f64)> {
    let f = morphoscope::stats::fit_linear(&x, &y).map_err(py_err)?;
    Ok((f.slope, f.intercept, f.r_squared, f.p_value))
}

#[pymodule]
#[pyo3(name = "morphoscope")]
fn morphoscope_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScalarVolume>()?;
    m.add_class::<PyLabelVolume>()?;
    m.add_class::<PySvf>()?;
    m.add_class::<PyRegistrationResult>()?;
    m.add_class::<PyAgingField>()?;
    m.add_class::<PyPhantomGenerator>()?;
    m.add_function(wrap_pyfunction!(register, m)?)?;
    m.add_function(wrap_pyfunction!(lncc, m)?)?;
    m.add_function(wrap_pyfunction!(efc, m)?)?;
    m.add_function(wrap_pyfunction!(aging_field, m)?)?;
    m.add_function(wrap_pyfunction!(aging_from_svf, m)?)?;
    m.add_function(wrap_pyfunction!(regional_scores, m)?)?;
    m.add_function(wrap_pyfunction!(t_test, m)?)?;
    m.add_function(wrap_pyfunction!(cohens_d, m)?)?;
    m.add_function(wrap_pyfunction!(fit_linear, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
