//! Python bindings for the statistics matching library.
//!
//! Images cross the boundary as raw `bytes` in `height x width x channels`
//! order, feature matrices as lists of rows.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use sm::pipeline::{self, ConcreteMethod, DatasetRef, ExecuteOptions, Method};
use sm::stats::DEFAULT_EPSILON;

fn to_py(err: sm::Error) -> PyErr {
    match err {
        sm::Error::Io(_) | sm::Error::ItemLoad { .. } | sm::Error::OutputWrite { .. } => {
            PyIOError::new_err(err.to_string())
        }
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<sm::FeatureMatrix> {
    sm::FeatureMatrix::from_rows(&rows).map_err(to_py)
}

fn rows_of(f: &sm::FeatureMatrix) -> Vec<Vec<f64>> {
    f.as_matrix().to_rows()
}

fn parse_method(name: &str, p: f64) -> PyResult<Method> {
    match name {
        "fdm" => Ok(Method::Fdm),
        "hm" => Ok(Method::Hm),
        "fdm-or-hm" => Ok(Method::FdmOrHm(p)),
        "fdm-then-hm" => Ok(Method::FdmThenHm),
        _ => Err(PyValueError::new_err(format!("unknown method: {name}"))),
    }
}

/// 8-bit raster image.
#[pyclass(name = "Image", module = "statmatch", from_py_object)]
#[derive(Clone)]
struct PyImage {
    inner: sm::Image,
}

#[pymethods]
impl PyImage {
    #[new]
    fn new(height: usize, width: usize, channels: usize, data: &[u8]) -> PyResult<Self> {
        let inner = sm::Image::new(height, width, channels, data.to_vec()).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Load a PNG or JPEG file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: sm::Image::load(path).map_err(to_py)?,
        })
    }

    fn save_png(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save_png(path).map_err(to_py)
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn channels(&self) -> usize {
        self.inner.channels()
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.inner.pixels())
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Image(height={}, width={}, channels={})",
            self.inner.height(),
            self.inner.width(),
            self.inner.channels()
        )
    }
}

/// Row-major float32 tensor whose last dimension is the channel axis.
#[pyclass(name = "FeatureTensor", module = "statmatch", from_py_object)]
#[derive(Clone)]
struct PyFeatureTensor {
    inner: sm::FeatureTensor,
}

#[pymethods]
impl PyFeatureTensor {
    #[new]
    fn new(shape: Vec<usize>, data: Vec<f32>) -> PyResult<Self> {
        Ok(Self {
            inner: sm::FeatureTensor::new(shape, data).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn read_fmt1(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: sm::FeatureTensor::read_fmt1(path).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_fmt1(data: &[u8]) -> PyResult<Self> {
        Ok(Self {
            inner: sm::FeatureTensor::from_fmt1(data).map_err(to_py)?,
        })
    }

    fn write_fmt1(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_fmt1(path).map_err(to_py)
    }

    fn to_fmt1<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let bytes = self.inner.to_fmt1().map_err(to_py)?;
        Ok(PyBytes::new(py, &bytes))
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.inner.shape().to_vec()
    }

    #[getter]
    fn data(&self) -> Vec<f32> {
        self.inner.data().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("FeatureTensor(shape={:?})", self.inner.shape())
    }
}

/// Mean, covariance and clamped eigendecomposition of a sample matrix.
#[pyfunction]
#[pyo3(signature = (rows, epsilon=DEFAULT_EPSILON))]
fn compute_stats<'py>(
    py: Python<'py>,
    rows: Vec<Vec<f64>>,
    epsilon: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let stats = sm::compute_stats(&matrix(rows)?, epsilon).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("mean", stats.mean)?;
    d.set_item("covariance", stats.covariance.to_rows())?;
    d.set_item("eigenvalues", stats.eigen.eigenvalues)?;
    d.set_item("raw_eigenvalues", stats.eigen.raw_eigenvalues)?;
    d.set_item("eigenvectors", stats.eigen.eigenvectors.to_rows())?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (source, target, epsilon=DEFAULT_EPSILON))]
fn fdm_features(
    source: Vec<Vec<f64>>,
    target: Vec<Vec<f64>>,
    epsilon: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let out = sm::fdm_features(&matrix(source)?, &matrix(target)?, epsilon).map_err(to_py)?;
    Ok(rows_of(&out))
}

/// Returns the quantized image and the float samples it came from.
#[pyfunction]
#[pyo3(signature = (source, target, epsilon=DEFAULT_EPSILON, clamp=true))]
fn fdm_image(
    source: &PyImage,
    target: &PyImage,
    epsilon: f64,
    clamp: bool,
) -> PyResult<(PyImage, Vec<Vec<f64>>)> {
    let (img, float) = sm::fdm_image(&source.inner, &target.inner, epsilon, clamp).map_err(to_py)?;
    Ok((PyImage { inner: img }, rows_of(&float)))
}

#[pyfunction]
#[pyo3(signature = (source, target, epsilon=DEFAULT_EPSILON))]
fn fdm_tensor(
    source: &PyFeatureTensor,
    target: &PyFeatureTensor,
    epsilon: f64,
) -> PyResult<PyFeatureTensor> {
    let out = sm::fdm_tensor(&source.inner, &target.inner, epsilon).map_err(to_py)?;
    Ok(PyFeatureTensor { inner: out })
}

#[pyfunction]
fn hm_image(source: &PyImage, target: &PyImage) -> PyResult<PyImage> {
    Ok(PyImage {
        inner: sm::hm_image(&source.inner, &target.inner).map_err(to_py)?,
    })
}

/// Histogram and CDF of integer values in `[0, bins)`.
#[pyfunction]
#[pyo3(signature = (values, bins=256))]
fn compute_cdf(values: Vec<u64>, bins: usize) -> PyResult<(Vec<u64>, Vec<f64>)> {
    let c = sm::compute_cdf(values, bins).map_err(to_py)?;
    Ok((c.histogram().to_vec(), c.cdf().to_vec()))
}

/// Lookup table sending source values onto the target distribution.
#[pyfunction]
#[pyo3(signature = (source_values, target_values, bins=256))]
fn build_mapping(
    source_values: Vec<u64>,
    target_values: Vec<u64>,
    bins: usize,
) -> PyResult<Vec<usize>> {
    let s = sm::compute_cdf(source_values, bins).map_err(to_py)?;
    let t = sm::compute_cdf(target_values, bins).map_err(to_py)?;
    Ok(sm::build_mapping(&s, &t).map_err(to_py)?.mapping().to_vec())
}

#[pyfunction]
#[pyo3(signature = (source, target, method, epsilon=DEFAULT_EPSILON, clamp=true))]
fn transform_pair(
    source: &PyImage,
    target: &PyImage,
    method: &str,
    epsilon: f64,
    clamp: bool,
) -> PyResult<PyImage> {
    let method: ConcreteMethod = method.parse().map_err(PyValueError::new_err)?;
    let out = pipeline::transform_pair(&source.inner, &target.inner, method, epsilon, clamp)
        .map_err(to_py)?;
    Ok(PyImage { inner: out })
}

/// Seeded `(source, target, method)` assignments, one per source item.
#[pyfunction]
#[pyo3(signature = (source, target, method, seed=0, p=0.5))]
fn build_plan(
    source: Vec<PathBuf>,
    target: Vec<PathBuf>,
    method: &str,
    seed: u64,
    p: f64,
) -> PyResult<Vec<(PathBuf, PathBuf, String)>> {
    let s = DatasetRef::new(source).map_err(to_py)?;
    let t = DatasetRef::new(target).map_err(to_py)?;
    let plan = pipeline::build_plan(&s, &t, parse_method(method, p)?, seed).map_err(to_py)?;
    Ok(plan
        .assignments
        .into_iter()
        .map(|a| (a.source, a.target, a.method.to_string()))
        .collect())
}

/// Pairs and adapts whole directories, writing PNGs into `out_dir`.
#[pyfunction]
#[pyo3(signature = (source, target, out_dir, method, seed=0, p=0.5, epsilon=DEFAULT_EPSILON, clamp=true, jobs=1))]
#[allow(clippy::too_many_arguments)]
fn transform_dataset<'py>(
    py: Python<'py>,
    source: PathBuf,
    target: PathBuf,
    out_dir: PathBuf,
    method: &str,
    seed: u64,
    p: f64,
    epsilon: f64,
    clamp: bool,
    jobs: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let method = parse_method(method, p)?;
    let report = py
        .detach(|| {
            let s = DatasetRef::discover(&source)?;
            let t = DatasetRef::discover(&target)?;
            let plan = pipeline::build_plan(&s, &t, method, seed)?;
            let options = ExecuteOptions {
                epsilon,
                clamp,
                jobs,
            };
            pipeline::execute_plan(&plan, options, &out_dir)
        })
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("items", report.items.len())?;
    d.set_item("succeeded", report.success_count())?;
    d.set_item("failed", report.failure_count())?;
    for m in ConcreteMethod::ALL {
        d.set_item(m.name(), report.method_counts.get(&m).copied().unwrap_or(0))?;
    }
    d.set_item("wall_time", report.wall_time.as_secs_f64())?;
    Ok(d)
}

#[pymodule]
fn statmatch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyFeatureTensor>()?;
    m.add_function(wrap_pyfunction!(compute_stats, m)?)?;
    m.add_function(wrap_pyfunction!(fdm_features, m)?)?;
    m.add_function(wrap_pyfunction!(fdm_image, m)?)?;
    m.add_function(wrap_pyfunction!(fdm_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(hm_image, m)?)?;
    m.add_function(wrap_pyfunction!(compute_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(build_mapping, m)?)?;
    m.add_function(wrap_pyfunction!(transform_pair, m)?)?;
    m.add_function(wrap_pyfunction!(build_plan, m)?)?;
    m.add_function(wrap_pyfunction!(transform_dataset, m)?)?;
    m.add("GENERATOR_NAME", pipeline::GENERATOR_NAME)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
