//! Python module `treeclust`: sampling, kernel estimates and cluster trees.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use treeclust::cli::{dendrogram_json, validate};
use treeclust::cluster_tree::{extract_splits, significant_splits, SplitRecord};
use treeclust::dbscan::{self, ClusterHierarchy};
use treeclust::geometry::Dataset;
use treeclust::kde::{build_valid_kernel, DensityEstimate, Kernel};
use treeclust::kde as density_estimation;
use treeclust::levelset::{devroye_wise, gap_inputs, LevelSetEstimate};
use treeclust::synthetic::registry;
use treeclust::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_) | Error::DimensionMismatch { .. } | Error::Parse { .. } | Error::Unsupported(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn dataset(points: Vec<Vec<f64>>) -> PyResult<Dataset> {
    Dataset::from_rows(&points).map_err(py_err)
}

fn rows(ds: &Dataset) -> Vec<Vec<f64>> {
    ds.points().map(|p| p.to_vec()).collect()
}

fn kernel(order: Option<usize>, d: usize) -> PyResult<Kernel> {
    match order {
        None => Ok(Kernel::Spherical),
        Some(o) => build_valid_kernel(o, d).map_err(py_err),
    }
}

/// A split of the estimated tree.
#[pyclass(name = "Split", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PySplit {
    level: f64,
    /// Smallest member index of each child.
    children: Vec<usize>,
    /// Peak sample of each child surviving the pruning threshold.
    witnesses: Vec<usize>,
}

impl From<&SplitRecord> for PySplit {
    fn from(s: &SplitRecord) -> Self {
        PySplit { level: s.level, children: s.children.iter().map(|c| c.id).collect(), witnesses: s.witnesses.clone() }
    }
}

#[pymethods]
impl PySplit {
    fn __repr__(&self) -> String {
        format!("Split(level={}, children={:?})", self.level, self.children)
    }
}

/// Estimated cluster tree over the sample indices.
#[pyclass(name = "ClusterHierarchy", frozen)]
struct PyHierarchy {
    inner: ClusterHierarchy,
}

#[pymethods]
impl PyHierarchy {
    #[getter]
    fn algorithm(&self) -> &'static str {
        match self.inner.algorithm {
            dbscan::Algorithm::Dbscan => "dbscan",
            dbscan::Algorithm::Mdbscan => "mdbscan",
            dbscan::Algorithm::Gridlevel => "gridlevel",
        }
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    /// Estimated density at each sample.
    #[getter]
    fn scores(&self) -> Vec<f64> {
        self.inner.scores.clone()
    }

    #[getter]
    fn levels(&self) -> Vec<f64> {
        self.inner.levels().to_vec()
    }

    fn clusters_at(&self, level: f64) -> Vec<Vec<usize>> {
        self.inner.clusters_at(level)
    }

    /// Cluster id (smallest member) per sample, `None` when inactive.
    fn labels_at(&self, level: f64) -> Vec<Option<usize>> {
        self.inner.labels_at(level)
    }

    fn merge_height(&self, i: usize, j: usize) -> PyResult<Option<f64>> {
        if i >= self.inner.n || j >= self.inner.n {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.inner.merge_height(i, j))
    }

    /// `(level, cluster id)` of the smallest cluster holding all indices.
    fn smallest_containing_cluster(&self, indices: Vec<usize>) -> PyResult<(f64, usize)> {
        let c = self.inner.smallest_containing_cluster(&indices).map_err(py_err)?;
        Ok((c.level, c.id))
    }

    #[pyo3(signature = (delta=None))]
    fn splits(&self, delta: Option<f64>) -> Vec<PySplit> {
        let records = match delta {
            Some(d) => significant_splits(&self.inner, d),
            None => extract_splits(&self.inner),
        };
        records.iter().map(PySplit::from).collect()
    }

    fn nesting_violations(&self) -> usize {
        self.inner.check_nesting()
    }

    /// Dendrogram document as written by the command-line tool.
    #[pyo3(signature = (delta=None))]
    fn to_json(&self, delta: Option<f64>) -> PyResult<String> {
        let d = dendrogram_json(&self.inner, delta);
        validate(&d).map_err(py_err)?;
        serde_json::to_string(&d).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn __len__(&self) -> usize {
        self.inner.num_levels()
    }

    fn __repr__(&self) -> String {
        format!("ClusterHierarchy(algorithm='{}', n={}, h={}, levels={})", self.algorithm(), self.inner.n, self.inner.h, self.inner.num_levels())
    }
}

/// Union of radius-h balls around the retained samples.
#[pyclass(name = "LevelSet", frozen)]
struct PyLevelSet {
    inner: LevelSetEstimate,
    k: usize,
    level: f64,
}

#[pymethods]
impl PyLevelSet {
    #[getter]
    fn centers(&self) -> Vec<usize> {
        self.inner.centers.clone()
    }

    #[getter]
    fn k(&self) -> usize {
        self.k
    }

    #[getter]
    fn level(&self) -> f64 {
        self.level
    }

    fn contains(&self, x: Vec<f64>) -> PyResult<bool> {
        use treeclust::levelset::Region;
        if x.len() != self.inner.dim {
            return Err(PyValueError::new_err(format!("expected a point of dimension {}", self.inner.dim)));
        }
        Ok(self.inner.contains(&x))
    }
}

/// Names of the built-in synthetic densities.
#[pyfunction]
fn densities() -> Vec<&'static str> {
    registry::names().to_vec()
}

/// `n` seeded draws from a named density.
#[pyfunction]
fn sample(name: &str, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let spec = registry::lookup(name).map_err(py_err)?;
    Ok(rows(&spec.sample(n, seed).map_err(py_err)?))
}

/// Density of a named synthetic distribution at each point.
#[pyfunction]
fn density(name: &str, points: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let spec = registry::lookup(name).map_err(py_err)?;
    Ok(points.iter().map(|x| spec.pdf(x)).collect())
}

/// Kernel estimate at `at`; spherical kernel unless `kernel_order` is given.
#[pyfunction]
#[pyo3(signature = (points, at, h, kernel_order=None))]
fn kde(points: Vec<Vec<f64>>, at: Vec<Vec<f64>>, h: f64, kernel_order: Option<usize>) -> PyResult<Vec<f64>> {
    let ds = dataset(points)?;
    let k = kernel(kernel_order, ds.dim())?;
    DensityEstimate::eval_many(&ds, &k, h, &at).map_err(py_err)
}

#[pyfunction]
fn optimal_bandwidth(n: usize, d: usize, alpha: f64, c: f64) -> f64 {
    density_estimation::optimal_bandwidth(n, d, alpha, c)
}

#[pyfunction]
fn lambda_of_k(k: usize, n: usize, h: f64, d: usize) -> f64 {
    dbscan::lambda_of_k(k, n, h, d)
}

/// `a_n = C1 (γ + log 1/h)/sqrt(n h^d) + C2 h^α`, with γ = log n by default.
#[pyfunction]
#[pyo3(signature = (n, h, d, alpha, c1, c2, gamma=None))]
fn error_budget(n: usize, h: f64, d: usize, alpha: f64, c1: f64, c2: f64, gamma: Option<f64>) -> PyResult<f64> {
    let gamma = gamma.unwrap_or((n as f64).ln());
    Ok(density_estimation::error_budget(n, h, d, alpha, 0.0, gamma, c1, c2).map_err(py_err)?.a_n())
}

/// DBSCAN swept over the count threshold.
#[pyfunction]
fn dbscan_hierarchy(points: Vec<Vec<f64>>, h: f64) -> PyResult<PyHierarchy> {
    let ds = dataset(points)?;
    Ok(PyHierarchy { inner: dbscan::dbscan_hierarchy(&ds, h).map_err(py_err)? })
}

/// Modified DBSCAN with a valid kernel of the given order.
#[pyfunction]
fn modified_dbscan_hierarchy(points: Vec<Vec<f64>>, h: f64, kernel_order: usize) -> PyResult<PyHierarchy> {
    let ds = dataset(points)?;
    let k = kernel(Some(kernel_order), ds.dim())?;
    Ok(PyHierarchy { inner: dbscan::modified_dbscan_hierarchy(&ds, &k, h).map_err(py_err)? })
}

/// Level-set estimate at a known gap `(lambda_star, lambda_star + epsilon)`.
#[pyfunction]
#[pyo3(signature = (points, h, lambda_star, epsilon, c1, gamma=None))]
fn gap_level_set(
    points: Vec<Vec<f64>>,
    h: f64,
    lambda_star: f64,
    epsilon: f64,
    c1: f64,
    gamma: Option<f64>,
) -> PyResult<PyLevelSet> {
    let ds = dataset(points)?;
    let (n, d) = (ds.len(), ds.dim());
    let gamma = gamma.unwrap_or((n as f64).ln());
    let budget = density_estimation::error_budget(n, h, d, 1.0, 0.0, gamma, c1, 0.0).map_err(py_err)?;
    let inputs = gap_inputs(n, d, h, lambda_star, lambda_star + epsilon, &budget, 1.0).map_err(py_err)?;
    let inner = devroye_wise(&ds, h, inputs.k).map_err(py_err)?;
    Ok(PyLevelSet { inner, k: inputs.k, level: inputs.lambda })
}

#[pymodule]
#[pyo3(name = "treeclust")]
fn treeclust_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHierarchy>()?;
    m.add_class::<PySplit>()?;
    m.add_class::<PyLevelSet>()?;
    m.add_function(wrap_pyfunction!(densities, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(density, m)?)?;
    m.add_function(wrap_pyfunction!(kde, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_bandwidth, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_of_k, m)?)?;
    m.add_function(wrap_pyfunction!(error_budget, m)?)?;
    m.add_function(wrap_pyfunction!(dbscan_hierarchy, m)?)?;
    m.add_function(wrap_pyfunction!(modified_dbscan_hierarchy, m)?)?;
    m.add_function(wrap_pyfunction!(gap_level_set, m)?)?;
    Ok(())
}
