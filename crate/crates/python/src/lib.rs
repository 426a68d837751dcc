//! Python bindings: models, bounds, calibration and simulation.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use ordsel::calibration::{CalibrationConfig, KGrid};
use ordsel::estimation::{PluginConfig, PluginEstimate};
use ordsel::fdrbounds::{BoundInput, PrTable};
use ordsel::linmodel::DEFAULT_RANK_TOL;
use ordsel::simulation::{Scenario, ScenarioSpec};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(ordsel_py, OrdselError, PyException, "Model-level failure.");
create_exception!(ordsel_py, CalibrationFailed, OrdselError, "No K on the grid satisfies the FDR threshold.");

fn to_py(e: ordsel::Error) -> PyErr {
    use ordsel::Error as E;
    match e {
        E::Config(_) | E::Domain(_) | E::DimensionMismatch(_) => PyValueError::new_err(e.to_string()),
        E::CalibrationFailed { .. } => CalibrationFailed::new_err(e.to_string()),
        _ => OrdselError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("design rows have different lengths"));
    }
    Array2::from_shape_vec((n, p), rows.into_iter().flatten().collect()).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Result of selecting one model of the nested collection.
#[pyclass(name = "Selection", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PySelection {
    k: Option<f64>,
    dim: usize,
    rss: f64,
    beta_hat: Vec<f64>,
}

impl From<ordsel::SelectionResult> for PySelection {
    fn from(s: ordsel::SelectionResult) -> Self {
        Self { k: s.k, dim: s.dim, rss: s.rss, beta_hat: s.beta_hat.to_vec() }
    }
}

#[pymethods]
impl PySelection {
    fn __repr__(&self) -> String {
        format!("Selection(k={:?}, dim={}, rss={})", self.k, self.dim, self.rss)
    }
}

/// Design `x` (rows) and response `y`, orthonormalized over the first `min(n, p)` columns.
#[pyclass(name = "OrthoModel", frozen)]
struct PyOrthoModel {
    inner: ordsel::OrthoModel,
    data: ordsel::Dataset,
}

#[pymethods]
impl PyOrthoModel {
    #[new]
    fn new(y: Vec<f64>, x: Vec<Vec<f64>>) -> PyResult<Self> {
        let data = ordsel::Dataset::new(Array1::from(y), matrix(x)?).map_err(to_py)?;
        let inner = ordsel::orthonormalize(&data, DEFAULT_RANK_TOL).map_err(to_py)?;
        Ok(Self { inner, data })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn q(&self) -> usize {
        self.inner.q()
    }

    #[getter]
    fn y_coef(&self) -> Vec<f64> {
        self.inner.y_coef().to_vec()
    }

    fn rss_profile(&self) -> Vec<f64> {
        self.inner.rss_profile()
    }

    fn select(&self, k: f64, sigma2: f64) -> PyResult<PySelection> {
        self.inner.select_model(k, sigma2).map(Into::into).map_err(to_py)
    }

    #[pyo3(signature = (window_fraction = 0.5))]
    fn slope_sigma2(&self, window_fraction: f64) -> PyResult<f64> {
        ordsel::slope_sigma2(&self.inner, window_fraction).map_err(to_py)
    }

    fn diff_pr(&self, sigma2_hat: f64, k: f64) -> f64 {
        ordsel::diff_pr(&self.inner, sigma2_hat, k)
    }

    #[pyo3(signature = (plugin_k = 4.0))]
    fn plugin_estimate<'py>(&self, py: Python<'py>, plugin_k: f64) -> PyResult<Bound<'py, PyDict>> {
        let est = plugin(&self.inner, plugin_k)?;
        let d = PyDict::new(py);
        d.set_item("sigma2_hat", est.sigma2_hat)?;
        d.set_item("d_hat", est.d_hat)?;
        d.set_item("beta_hat", est.beta_hat.to_vec())?;
        Ok(d)
    }

    /// Runs the calibration of K and returns its summary as a dict.
    #[pyo3(signature = (alpha = 0.05, gamma = 0.1, k_grid = None, mc_samples = 5000, seed = 0, plugin_k = 4.0))]
    #[allow(clippy::too_many_arguments)]
    fn calibrate<'py>(
        &self,
        py: Python<'py>,
        alpha: f64,
        gamma: f64,
        k_grid: Option<Vec<f64>>,
        mc_samples: usize,
        seed: u64,
        plugin_k: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let est = plugin(&self.inner, plugin_k)?;
        let cfg = CalibrationConfig { alpha, gamma, k_grid: k_grid.map_or_else(KGrid::default, KGrid::List), mc_samples, seed };
        let res = py.detach(|| ordsel::calibrate(&self.inner, &est, &cfg)).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("k_star", res.k_star)?;
        d.set_item("fallback_used", res.fallback_used)?;
        d.set_item("bound_at_k", res.bound_at_k)?;
        d.set_item("diff_pr_at_k", res.diff_pr_at_k)?;
        d.set_item("i1", res.i1.iter().map(|&i| res.curve.k_grid[i]).collect::<Vec<_>>())?;
        d.set_item("i2", res.i2.iter().map(|&i| res.curve.k_grid[i]).collect::<Vec<_>>())?;
        d.set_item("sigma2_hat", res.sigma2_hat)?;
        d.set_item("d_hat", res.d_hat)?;
        d.set_item("upper", res.curve.upper.clone())?;
        Ok(d)
    }

    /// V-fold cross-validated choice of dimension.
    #[pyo3(signature = (folds, seed = 0))]
    fn cv_select(&self, folds: usize, seed: u64) -> PyResult<PySelection> {
        ordsel::vfold_cv_select(&self.data, folds, seed).map(|cv| cv.selection.into()).map_err(to_py)
    }
}

fn plugin(model: &ordsel::OrthoModel, plugin_k: f64) -> PyResult<PluginEstimate> {
    ordsel::plugin_estimate(model, &PluginConfig { plugin_k, ..Default::default() }).map_err(to_py)
}

/// Lower bound `b`, upper bound `B` and floor of the FDR, as a dict of lists.
#[pyfunction]
#[pyo3(signature = (signal_coef, sigma2, q, k_grid, mc_samples = 5000, seed = 0))]
fn bound_curve<'py>(
    py: Python<'py>,
    signal_coef: Vec<f64>,
    sigma2: f64,
    q: usize,
    k_grid: Vec<f64>,
    mc_samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let input = BoundInput::new(signal_coef, sigma2, q).map_err(to_py)?;
    let curve = py
        .detach(|| {
            let table = PrTable::estimate(q, &k_grid, mc_samples, seed)?;
            ordsel::bound_curve(&input, &k_grid, &table)
        })
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("k", curve.k_grid)?;
    d.set_item("lower", curve.lower)?;
    d.set_item("upper", curve.upper)?;
    d.set_item("floor", curve.floor)?;
    Ok(d)
}

#[pyfunction]
fn chi2_cdf(k: u32, x: f64) -> PyResult<f64> {
    ordsel::chi2_cdf(k, x).map(f64::from).map_err(to_py)
}

#[pyfunction]
fn gaussian_cdf(x: f64) -> PyResult<f64> {
    ordsel::gaussian_cdf(x).map(f64::from).map_err(to_py)
}

/// Seeded scenario with a fixed truth; replicates redraw the noise.
#[pyclass(name = "Scenario", frozen)]
struct PyScenario {
    inner: Arc<Scenario>,
}

impl PyScenario {
    fn wrap(spec: PyResult<ScenarioSpec>) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(Scenario::new(spec?).map_err(to_py)?) })
    }
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    #[pyo3(signature = (seed = 0))]
    fn toy(seed: u64) -> PyResult<Self> {
        Self::wrap(Ok(ScenarioSpec::toy(seed)))
    }

    #[staticmethod]
    #[pyo3(signature = (d_star, seed = 0))]
    fn sparsity(d_star: usize, seed: u64) -> PyResult<Self> {
        Self::wrap(Ok(ScenarioSpec::sparsity(d_star, seed)))
    }

    #[staticmethod]
    #[pyo3(signature = (config, seed = 0))]
    fn complexity(config: u8, seed: u64) -> PyResult<Self> {
        Self::wrap(ScenarioSpec::complexity(config, seed).map_err(to_py))
    }

    #[staticmethod]
    #[pyo3(signature = (n, seed = 0))]
    fn high_dimension(n: usize, seed: u64) -> PyResult<Self> {
        Self::wrap(Ok(ScenarioSpec::high_dimension(n, seed)))
    }

    #[staticmethod]
    #[pyo3(signature = (sigma2, seed = 0))]
    fn noise(sigma2: f64, seed: u64) -> PyResult<Self> {
        Self::wrap(Ok(ScenarioSpec::noise(sigma2, seed)))
    }

    #[getter]
    fn beta_star(&self) -> Vec<f64> {
        self.inner.truth().beta_star().to_vec()
    }

    #[getter]
    fn d_star(&self) -> usize {
        self.inner.truth().d_star()
    }

    /// `(y, x)` of one replicate, `x` given as a list of rows.
    fn dataset(&self, replicate: u64) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let data = self.inner.dataset(replicate).map_err(to_py)?;
        Ok((data.y().to_vec(), data.x().rows().into_iter().map(|r| r.to_vec()).collect()))
    }

    fn model(&self, replicate: u64) -> PyResult<PyOrthoModel> {
        let data = self.inner.dataset(replicate).map_err(to_py)?;
        let inner = self.inner.model(replicate).map_err(to_py)?;
        Ok(PyOrthoModel { inner, data })
    }

    fn empirical_curves<'py>(&self, py: Python<'py>, k_grid: Vec<f64>, replicates: usize) -> PyResult<Bound<'py, PyDict>> {
        let sc = Arc::clone(&self.inner);
        let c = py.detach(move || sc.empirical_curves(&k_grid, replicates)).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("k", c.k_grid)?;
        d.set_item("fdr", c.fdr)?;
        d.set_item("fdr_ci", c.fdr_ci)?;
        d.set_item("pr", c.pr)?;
        d.set_item("pr_ci", c.pr_ci)?;
        d.set_item("mean_dim", c.mean_dim)?;
        Ok(d)
    }
}

#[pymodule]
fn ordsel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyOrthoModel>()?;
    m.add_class::<PySelection>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(bound_curve, m)?)?;
    m.add_function(wrap_pyfunction!(chi2_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_cdf, m)?)?;
    m.add("OrdselError", m.py().get_type::<OrdselError>())?;
    m.add("CalibrationFailed", m.py().get_type::<CalibrationFailed>())?;
    Ok(())
}
