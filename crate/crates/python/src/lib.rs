//! Python bindings. Results come back as plain dicts and lists.

use ldpcl::construction::{capacity_sequence, construct_joint, tornado_pair, TornadoFamily, DEFAULT_TRUNCATION_TOL};
use ldpcl::density_evolution::{local_threshold, run_2d_de, DeOptions, DEFAULT_HALT_TOL, DEFAULT_MAX_ITERS};
use ldpcl::ensembles::{LdpclEnsemble, LocalEnsemble};
use ldpcl::finite_length::{ldpc_union_bound, ml_union_bound, MlParams};
use ldpcl::scheduler::{n_ji_ideal, run_schedule, SchedulePolicy};
use ldpcl::simulator::{monte_carlo, GraphSource, McConfig, McMode, DEFAULT_DECODE_ITERS};
use ldpcl::threshold::{find_fixed_points, global_threshold, threshold_by_bisection};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

fn err(e: ldpcl::Error) -> PyErr {
    use ldpcl::Error as E;
    match e {
        E::Infeasible(_) | E::Numerical(_) | E::Degenerate(_) | E::ResourceGuard(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, value: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match value {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, to_py(py, v)?)?;
            }
            dict.into_any()
        }
    })
}

fn serialize<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &v)
}

/// A two-sided ensemble with `M` sub-blocks of length `n`.
#[pyclass(name = "Ensemble", frozen)]
struct PyEnsemble(LdpclEnsemble);

#[pymethods]
impl PyEnsemble {
    #[staticmethod]
    #[pyo3(signature = (l_l, r_l, l_j, r_j, m_blocks = 1, n_sub = 1))]
    fn regular(l_l: u32, r_l: u32, l_j: u32, r_j: u32, m_blocks: usize, n_sub: usize) -> PyResult<Self> {
        LdpclEnsemble::regular(m_blocks, n_sub, l_l, r_l, l_j, r_j).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        LdpclEnsemble::from_json(text).map(Self).map_err(err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn design_rate(&self) -> f64 {
        self.0.design_rate()
    }

    #[getter]
    fn p0(&self) -> f64 {
        self.0.p0()
    }

    #[getter]
    fn m_blocks(&self) -> usize {
        self.0.m_blocks
    }

    #[getter]
    fn n_sub(&self) -> usize {
        self.0.n_sub
    }

    fn f(&self, eps: f64, x: f64, y: f64) -> PyResult<f64> {
        ldpcl::density_evolution::f_map(&self.0, eps, x, y).map_err(err)
    }

    fn g(&self, eps: f64, x: f64, y: f64) -> PyResult<f64> {
        ldpcl::density_evolution::g_map(&self.0, eps, x, y).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Ensemble(rate={:.6}, M={}, n={})", self.0.design_rate(), self.0.m_blocks, self.0.n_sub)
    }
}

/// `{"eps_local", "eps_global", "branch", ...}`.
#[pyfunction]
fn thresholds<'py>(py: Python<'py>, e: &PyEnsemble) -> PyResult<Bound<'py, PyAny>> {
    let report = py.detach(|| global_threshold(&e.0));
    let dict = serialize(py, &report)?;
    dict.set_item("eps_local", local_threshold(&e.0.local))?;
    dict.set_item("eps_global", report.eps_star)?;
    Ok(dict)
}

#[pyfunction]
#[pyo3(signature = (e, tol = 1e-6))]
fn threshold_bisection(py: Python<'_>, e: &PyEnsemble, tol: f64) -> f64 {
    py.detach(|| threshold_by_bisection(&e.0, tol))
}

/// Nontrivial and trivial fixed points at `eps` as dicts with `x`, `y`, `kind`.
#[pyfunction]
#[pyo3(signature = (e, eps, grid = 1000))]
fn fixed_points<'py>(py: Python<'py>, e: &PyEnsemble, eps: f64, grid: usize) -> PyResult<Bound<'py, PyAny>> {
    serialize(py, &find_fixed_points(&e.0, eps, grid))
}

/// Returns `(points, status)` with `points` a list of `(x, y)` starting at `(1, 1)`.
#[pyfunction]
#[pyo3(signature = (e, eps, max_iters = DEFAULT_MAX_ITERS, halt_tol = DEFAULT_HALT_TOL))]
fn de_trace(e: &PyEnsemble, eps: f64, max_iters: u64, halt_tol: f64) -> PyResult<(Vec<(f64, f64)>, String)> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(PyValueError::new_err("eps must lie in [0, 1]"));
    }
    let trace = run_2d_de(&e.0, eps, DeOptions { max_iters, halt_tol });
    let status = serde_json::to_value(trace.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    Ok((trace.points.iter().map(|p| (p.x, p.y)).collect(), status))
}

/// Tornado local code of parameter `d_l` at `eps_l` with a Tornado joint code
/// of parameter `d_j`, placing the global threshold at `eps_g`.
#[pyfunction]
#[pyo3(signature = (eps_l, eps_g, d_l = 5, d_j = 100, capacity = false))]
fn construct<'py>(py: Python<'py>, eps_l: f64, eps_g: f64, d_l: u32, d_j: u32, capacity: bool) -> PyResult<(PyEnsemble, Bound<'py, PyAny>)> {
    if !(0.0 < eps_l && eps_l < eps_g && eps_g < 1.0) {
        return Err(PyValueError::new_err("need 0 < eps_l < eps_g < 1"));
    }
    let result = py
        .detach(|| {
            if capacity {
                capacity_sequence(eps_l, eps_g, &[(d_l, d_j)]).map(|mut v| v.remove(0))
            } else {
                let (lambda, rho) = tornado_pair(d_l, eps_l, DEFAULT_TRUNCATION_TOL)?;
                construct_joint(&LocalEnsemble::new(lambda, rho)?, eps_g, &TornadoFamily::new(d_j))
            }
        })
        .map_err(err)?;
    let report = to_py(py, &result.report_json())?;
    Ok((PyEnsemble(result.ensemble), report))
}

/// Union bound on the ML block erasure probability of a regular two-sided code.
#[pyfunction]
fn ml_bound(py: Python<'_>, m_blocks: usize, n: usize, degrees: (u32, u32, u32, u32), eps: Vec<f64>) -> PyResult<Vec<f64>> {
    let (l_l, r_l, l_j, r_j) = degrees;
    let params = MlParams { m_blocks, n, l_l, r_l, l_j, r_j };
    py.detach(|| ml_union_bound(&params, &eps)).map(|c| c.bounds()).map_err(err)
}

/// The same bound for a single `(l, r)`-regular code of length `n`.
#[pyfunction]
fn ldpc_bound(py: Python<'_>, l: u32, r: u32, n: usize, eps: Vec<f64>) -> PyResult<Vec<f64>> {
    py.detach(|| ldpc_union_bound(l, r, n, &eps)).map(|c| c.bounds()).map_err(err)
}

/// Joint-iteration count at `eps`. `policy` is `"ideal"` or any policy string
/// accepted by the CLI (`flooding`, `never`, `period:k`, `eta:x`, `eta-latest:x`, `fixed:i,j`).
#[pyfunction]
#[pyo3(signature = (e, eps, policy = "ideal"))]
fn schedule<'py>(py: Python<'py>, e: &PyEnsemble, eps: f64, policy: &str) -> PyResult<Bound<'py, PyAny>> {
    let result = if policy == "ideal" {
        py.detach(|| n_ji_ideal(&e.0, eps))
    } else {
        let p: SchedulePolicy = policy.parse().map_err(err)?;
        py.detach(|| run_schedule(&e.0, eps, &p, DeOptions::default()))
    }
    .map_err(err)?;
    serialize(py, &result)
}

/// Monte Carlo peeling. `source` is an `Ensemble` or a degree tuple
/// `(lL, rL, lJ, rJ)`, in which case `m_blocks` and `n_sub` are required.
#[pyfunction]
#[pyo3(signature = (source, eps, trials = 200, seed = ldpcl::reproduce::DEFAULT_SEED, policy = "flooding", mode = "both", m_blocks = None, n_sub = None))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    source: &Bound<'py, PyAny>,
    eps: Vec<f64>,
    trials: usize,
    seed: u64,
    policy: &str,
    mode: &str,
    m_blocks: Option<usize>,
    n_sub: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let source = if let Ok(e) = source.cast::<PyEnsemble>() {
        let mut e = e.get().0.clone();
        e.m_blocks = m_blocks.unwrap_or(e.m_blocks);
        e.n_sub = n_sub.unwrap_or(e.n_sub);
        GraphSource::Ensemble(e)
    } else {
        let (a, b, c, d): (u32, u32, u32, u32) = source.extract()?;
        match (m_blocks, n_sub) {
            (Some(m_blocks), Some(n_sub)) => GraphSource::Regular { m_blocks, n_sub, degrees: [a, b, c, d] },
            _ => return Err(PyValueError::new_err("regular degrees need m_blocks and n_sub")),
        }
    };
    let mode = match mode {
        "local" => McMode::Local,
        "global" => McMode::Global,
        "both" => McMode::Both,
        other => return Err(PyValueError::new_err(format!("mode must be local, global or both, got {other:?}"))),
    };
    let cfg = McConfig {
        source,
        eps_grid: eps,
        trials,
        seed,
        policy: policy.parse().map_err(err)?,
        mode,
        max_iters: DEFAULT_DECODE_ITERS,
    };
    let rows = py.detach(|| monte_carlo(&cfg)).map_err(err)?;
    serialize(py, &rows)
}

#[pymodule]
fn ldpcl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEnsemble>()?;
    m.add_function(wrap_pyfunction!(thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_bisection, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_points, m)?)?;
    m.add_function(wrap_pyfunction!(de_trace, m)?)?;
    m.add_function(wrap_pyfunction!(construct, m)?)?;
    m.add_function(wrap_pyfunction!(ml_bound, m)?)?;
    m.add_function(wrap_pyfunction!(ldpc_bound, m)?)?;
    m.add_function(wrap_pyfunction!(schedule, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add("IRREGULAR_EXAMPLE_JSON", ldpcl::reproduce::IRREGULAR_EXAMPLE_JSON)?;
    Ok(())
}
