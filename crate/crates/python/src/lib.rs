//! Python module `eflab`: families, networks, training, the constructive
//! approximant, dimension estimates and rate sweeps.

use eflab_core::approx::{self, CompileOptions, CompiledNet};
use eflab_core::dimension::{self, CoverKind};
use eflab_core::harness::{self, SweepConfig};
use eflab_core::net::{architect, FinalActivation, Predictor, SizingRule};
use eflab_core::rng::seeded;
use eflab_core::synth::{self, HolderTarget, LambdaSpec};
use eflab_core::train::{self, Dataset, TrainConfig};
use eflab_core::{Error, ExpFamily, FamilyKind};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_) | Error::Sizing(_) | Error::Capability(_) | Error::Parse(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn to_json(v: &impl serde::Serialize) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

fn flatten(rows: &[Vec<f64>], d: usize) -> PyResult<Vec<f64>> {
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(PyValueError::new_err(format!("row of length {} in input of dimension {d}", r.len())));
    }
    Ok(rows.concat())
}

fn predict_rows(p: &dyn Predictor, xs: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    xs.iter().map(|x| p.predict(x).map_err(err)).collect()
}

/// A one-parameter exponential family with its Bregman-divergence loss.
#[pyclass(name = "ExpFamily", module = "eflab", frozen)]
struct PyExpFamily(ExpFamily);

#[pymethods]
impl PyExpFamily {
    /// `name` is "gaussian", "bernoulli" or "poisson".
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        Ok(Self(ExpFamily::from_name(name).map_err(err)?))
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.0.name()
    }

    #[getter]
    fn tau1(&self) -> f64 {
        self.0.tau1()
    }

    #[getter]
    fn tau2(&self) -> f64 {
        self.0.tau2()
    }

    fn psi(&self, theta: f64) -> f64 {
        self.0.psi(theta)
    }

    fn mean(&self, theta: f64) -> f64 {
        self.0.mean(theta)
    }

    fn bregman(&self, x: f64, y: f64) -> PyResult<f64> {
        self.0.bregman(x, y).map_err(err)
    }

    /// Loss of observation `y` at natural parameter `eta`.
    fn loss(&self, y: f64, eta: f64) -> PyResult<f64> {
        self.0.loss_natural(y, eta).map_err(err)
    }

    fn kl(&self, theta: f64, theta2: f64) -> PyResult<f64> {
        self.0.kl(theta, theta2).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("ExpFamily('{}')", self.0.name())
    }
}

#[pyclass(name = "Dataset", module = "eflab", frozen)]
struct PyDataset(Dataset);

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (xs, ys, family = "gaussian"))]
    fn new(xs: Vec<Vec<f64>>, ys: Vec<f64>, family: &str) -> PyResult<Self> {
        let d = xs.first().map_or(0, Vec::len);
        let kind = ExpFamily::from_name(family).map_err(err)?.kind;
        Ok(Self(Dataset::new(d, flatten(&xs, d)?, ys, kind).map_err(err)?))
    }

    #[staticmethod]
    #[pyo3(signature = (text, family = "gaussian"))]
    fn from_csv(text: &str, family: &str) -> PyResult<Self> {
        let kind = ExpFamily::from_name(family).map_err(err)?.kind;
        Ok(Self(synth::dataset_from_csv(text, kind).map_err(err)?))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.0.family.name()
    }

    #[getter]
    fn xs(&self) -> Vec<Vec<f64>> {
        self.0.xs.chunks(self.0.dim).map(<[f64]>::to_vec).collect()
    }

    #[getter]
    fn ys(&self) -> Vec<f64> {
        self.0.ys.clone()
    }

    fn to_csv(&self) -> String {
        synth::dataset_to_csv(&self.0)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "ReluNet", module = "eflab", frozen)]
struct PyReluNet(eflab_core::ReluNet);

#[pymethods]
impl PyReluNet {
    /// Dense network of the given depth whose parameter count stays within
    /// `weights`, optionally clamped to `[-clamp, clamp]`.
    #[staticmethod]
    #[pyo3(signature = (depth, weights, input_dim, seed = 0, clamp = None))]
    fn architect(depth: usize, weights: usize, input_dim: usize, seed: u64, clamp: Option<f64>) -> PyResult<Self> {
        let net = architect(depth, weights, input_dim, &mut seeded(seed)).map_err(err)?;
        let act = clamp.map_or(FinalActivation::Identity, |r| FinalActivation::Clamp { r });
        Ok(Self(net.with_final_activation(act).map_err(err)?))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self(eflab_core::ReluNet::from_json(text).map_err(err)?))
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.0.input_dim()
    }

    #[getter]
    fn depth(&self) -> usize {
        self.0.depth()
    }

    #[getter]
    fn weight_count(&self) -> usize {
        self.0.weight_count()
    }

    #[getter]
    fn hidden_widths(&self) -> Vec<usize> {
        self.0.hidden_widths()
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<f64> {
        self.0.predict(&x).map_err(err)
    }

    fn predict_batch(&self, xs: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        predict_rows(&self.0, xs)
    }

    fn __repr__(&self) -> String {
        format!("ReluNet(depth={}, weights={})", self.0.depth(), self.0.weight_count())
    }
}

#[pyclass(name = "FitResult", module = "eflab", frozen, get_all)]
struct PyFitResult {
    net: Py<PyReluNet>,
    trace: Vec<f64>,
    initial_risk: f64,
    best_risk: f64,
    best_epoch: usize,
}

/// Constructive approximant with its certificate.
#[pyclass(name = "Approximant", module = "eflab", frozen)]
struct PyApproximant {
    net: CompiledNet,
    cert: String,
}

#[pymethods]
impl PyApproximant {
    /// Certificate as a dict (depth, weights, measured error, bounds, ...).
    #[getter]
    fn cert<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.cert)
    }

    #[getter]
    fn depth(&self) -> usize {
        self.net.depth()
    }

    #[getter]
    fn weight_count(&self) -> usize {
        self.net.weight_count()
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<f64> {
        self.net.predict(&x).map_err(err)
    }

    fn predict_batch(&self, xs: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        predict_rows(&self.net, xs)
    }

    /// Materializes the flat network (only sensible for small instances).
    fn to_relu_net(&self) -> PyResult<PyReluNet> {
        Ok(PyReluNet(self.net.to_relu_net().map_err(err)?))
    }
}

fn lambda_spec(name: &str, d: usize, cantor_levels: u32) -> PyResult<LambdaSpec> {
    LambdaSpec::from_name(name, d, cantor_levels).map_err(err)
}

/// Draws `n` samples `x ~ lambda`, `y ~ family(target(x))`.
#[pyfunction]
#[pyo3(signature = (n, d = 2, family = "gaussian", lam = "uniform", target = "bump", beta = 1.0, holder_c = 1.0, seed = 0, cantor_levels = 10))]
#[allow(clippy::too_many_arguments)]
fn make_dataset(
    n: usize,
    d: usize,
    family: &str,
    lam: &str,
    target: &str,
    beta: f64,
    holder_c: f64,
    seed: u64,
    cantor_levels: u32,
) -> PyResult<PyDataset> {
    let fam = ExpFamily::from_name(family).map_err(err)?;
    let lambda = lambda_spec(lam, d, cantor_levels)?;
    let t = HolderTarget::parse(target, lambda.dim(), beta, holder_c).map_err(err)?;
    Ok(PyDataset(synth::make_dataset(&lambda, &t, &fam, n, &mut seeded(seed)).map_err(err)?))
}

/// Samples from an explanatory distribution as rows.
#[pyfunction]
#[pyo3(signature = (lam, n, d = 2, seed = 0, cantor_levels = 10))]
fn sample_lambda(lam: &str, n: usize, d: usize, seed: u64, cantor_levels: u32) -> PyResult<Vec<Vec<f64>>> {
    let spec = lambda_spec(lam, d, cantor_levels)?;
    let xs = synth::sample_lambda(&spec, n, &mut seeded(seed)).map_err(err)?;
    Ok(xs.chunks(spec.dim()).map(<[f64]>::to_vec).collect())
}

/// Value of a target function (same syntax as the CLI `--target`).
#[pyfunction]
#[pyo3(signature = (target, x, beta = 1.0, holder_c = 1.0))]
fn eval_target(target: &str, x: Vec<f64>, beta: f64, holder_c: f64) -> PyResult<f64> {
    Ok(HolderTarget::parse(target, x.len(), beta, holder_c).map_err(err)?.eval(&x))
}

/// `(depth, weights)` chosen for `n` samples.
#[pyfunction]
#[pyo3(signature = (beta, d_effective, n, input_dim, c_depth = 1.0, c_width = 1.0))]
fn size_for(beta: f64, d_effective: f64, n: usize, input_dim: usize, c_depth: f64, c_width: f64) -> PyResult<(usize, usize)> {
    SizingRule::new(beta, d_effective, n, input_dim).with_constants(c_depth, c_width).size_for().map_err(err)
}

#[pyfunction]
fn empirical_risk(net: &PyReluNet, data: &PyDataset) -> PyResult<f64> {
    train::empirical_risk(&net.0, &data.0).map_err(err)
}

/// Trains `net` on `data`; returns the best iterate and the risk trace.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (net, data, epochs = 200, learning_rate = 1e-3, batch_size = None, optimizer = "adam", seed = 0))]
fn fit(
    py: Python<'_>,
    net: &PyReluNet,
    data: &PyDataset,
    epochs: usize,
    learning_rate: f64,
    batch_size: Option<usize>,
    optimizer: &str,
    seed: u64,
) -> PyResult<PyFitResult> {
    let cfg = TrainConfig { epochs, batch_size, learning_rate, optimizer: optimizer.parse().map_err(err)?, seed };
    let res = py.detach(|| train::fit(&net.0, &data.0, &cfg)).map_err(err)?;
    Ok(PyFitResult {
        net: Py::new(py, PyReluNet(res.net))?,
        trace: res.trace,
        initial_risk: res.initial_risk,
        best_risk: res.best_risk,
        best_epoch: res.best_epoch,
    })
}

/// Builds the constructive approximant of `target` to accuracy `eta`.
#[pyfunction]
#[pyo3(signature = (target, beta, d, eta, p = 2.0, holder_c = 1.0, mc_points = approx::DEFAULT_MC_POINTS, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn compile(
    py: Python<'_>,
    target: &str,
    beta: f64,
    d: usize,
    eta: f64,
    p: f64,
    holder_c: f64,
    mc_points: usize,
    seed: u64,
) -> PyResult<PyApproximant> {
    let t = HolderTarget::parse(target, d, beta, holder_c).map_err(err)?;
    let opts = CompileOptions { p, mc_points, seed, ..CompileOptions::default() };
    let (net, cert) = py.detach(|| approx::compile(&t, beta, d, eta, &opts)).map_err(err)?;
    Ok(PyApproximant { net, cert: to_json(&cert)? })
}

/// Dyadic-cover dimension estimate of a sample given as rows in `[0, 1]^d`.
#[pyfunction]
#[pyo3(signature = (samples, kind = "support", alpha = None, window = None, scales = 12))]
fn estimate_dimension<'py>(
    py: Python<'py>,
    samples: Vec<Vec<f64>>,
    kind: &str,
    alpha: Option<f64>,
    window: Option<(u32, u32)>,
    scales: u32,
) -> PyResult<Bound<'py, PyAny>> {
    let d = samples.first().map_or(0, Vec::len);
    let xs = flatten(&samples, d)?;
    let kind = match kind {
        "support" => CoverKind::SupportCover,
        "mass" => CoverKind::MassCover { alpha: alpha.unwrap_or(2.0) },
        _ => return Err(PyValueError::new_err(format!("unknown cover '{kind}' (expected support or mass)"))),
    };
    let (profile, est) = dimension::estimate_dimension(&xs, d, kind, window, scales).map_err(err)?;
    let text = to_json(&serde_json::json!({
        "slope": est.slope,
        "intercept": est.intercept,
        "r2": est.r2,
        "scale_range": est.scale_range,
        "scales": profile.scales,
        "counts": profile.counts,
    }))?;
    json_to_py(py, &text)
}

/// Error-versus-n sweep; returns the summary dict with a `cells` list.
#[pyfunction]
#[pyo3(signature = (
    n_grid, seeds_per_n = 3, beta = 1.0, lam = "uniform", d = 2, family = "gaussian", target = "bump",
    holder_c = 1.0, d_effective = None, mc_points = 2000, seed = 0, c_depth = 1.0, c_width = 1.0,
    epochs = 200, batch_size = None, learning_rate = 1e-3, dim_scales = 0, jobs = None
))]
#[allow(clippy::too_many_arguments)]
fn run_sweep<'py>(
    py: Python<'py>,
    n_grid: Vec<usize>,
    seeds_per_n: usize,
    beta: f64,
    lam: &str,
    d: usize,
    family: &str,
    target: &str,
    holder_c: f64,
    d_effective: Option<f64>,
    mc_points: usize,
    seed: u64,
    c_depth: f64,
    c_width: f64,
    epochs: usize,
    batch_size: Option<usize>,
    learning_rate: f64,
    dim_scales: u32,
    jobs: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let lambda = lambda_spec(lam, d, 10)?;
    let cfg = SweepConfig {
        n_grid,
        seeds_per_n,
        beta,
        lambda,
        family: ExpFamily::from_name(family).map_err(err)?.kind,
        target: HolderTarget::parse(target, lambda.dim(), beta, holder_c).map_err(err)?,
        d_effective: d_effective.unwrap_or(lambda.dim() as f64),
        mc_test_points: mc_points,
        master_seed: seed,
        c_depth,
        c_width,
        train: TrainConfig { epochs, batch_size, learning_rate, ..TrainConfig::default() },
        dim_scales,
    };
    let report = py
        .detach(|| match jobs {
            Some(j) => harness::run_sweep_with_jobs(&cfg, j),
            None => harness::run_sweep(&cfg),
        })
        .map_err(err)?;
    let summary = json_to_py(py, &report.summary_json().map_err(err)?)?;
    summary.set_item("cells", json_to_py(py, &to_json(&report.cells)?)?)?;
    Ok(summary)
}

#[pymodule]
fn eflab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExpFamily>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyReluNet>()?;
    m.add_class::<PyFitResult>()?;
    m.add_class::<PyApproximant>()?;
    m.add_function(wrap_pyfunction!(make_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(sample_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(eval_target, m)?)?;
    m.add_function(wrap_pyfunction!(size_for, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_risk, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(compile, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add("FAMILIES", FamilyKind::ALL.iter().map(|k| k.name()).collect::<Vec<_>>())?;
    Ok(())
}
