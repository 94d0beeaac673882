//! Python bindings for `predpack_core`.

use predpack_core::covering::{self, PointCloud, Sampling};
use predpack_core::dynamics::{self, EvolveOptions, NewtonOptions};
use predpack_core::stability::{self, TrivialState};
use predpack_core::sweep::{self, Perturbation, Protocol, Threshold};
use predpack_core::{model, seed, Error};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use pyo3::IntoPyObjectExt;

create_exception!(predpack, ConvergenceError, PyException, "A solver failed to converge.");
create_exception!(predpack, NonFiniteError, PyException, "The time integration produced NaN or Inf.");

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NoConvergence { .. } => ConvergenceError::new_err(e.to_string()),
        Error::NonFinite { .. } => NonFiniteError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Parameters of the N-pack model; defaults are the reference set.
#[pyclass(name = "ModelParams", module = "predpack", from_py_object)]
#[derive(Clone)]
struct PyModelParams {
    inner: model::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (d=0.5, D=1.0, omega=0.5, k=1.0, lam=1.0, mu=1.0, beta=1.0, N=2))]
    #[allow(non_snake_case, clippy::too_many_arguments)]
    fn new(d: f64, D: f64, omega: f64, k: f64, lam: f64, mu: f64, beta: f64, N: usize) -> PyResult<Self> {
        let inner = model::ModelParams {
            predator_diffusion: d,
            prey_diffusion: D,
            mortality: omega,
            predation: k,
            prey_growth: lam,
            prey_crowding: mu,
            competition: beta,
            packs: N,
        };
        inner.check().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn d(&self) -> f64 {
        self.inner.predator_diffusion
    }
    #[getter(D)]
    fn prey_diffusion(&self) -> f64 {
        self.inner.prey_diffusion
    }
    #[getter]
    fn omega(&self) -> f64 {
        self.inner.mortality
    }
    #[getter]
    fn k(&self) -> f64 {
        self.inner.predation
    }
    #[getter]
    fn lam(&self) -> f64 {
        self.inner.prey_growth
    }
    #[getter]
    fn mu(&self) -> f64 {
        self.inner.prey_crowding
    }
    #[getter]
    fn beta(&self) -> f64 {
        self.inner.competition
    }
    #[getter(N)]
    fn packs(&self) -> usize {
        self.inner.packs
    }

    /// Copy with a different competition strength and/or pack count.
    #[pyo3(signature = (beta=None, N=None))]
    #[allow(non_snake_case)]
    fn replace(&self, beta: Option<f64>, N: Option<usize>) -> PyResult<Self> {
        let mut inner = self.inner;
        if let Some(b) = beta {
            inner.competition = b;
        }
        if let Some(n) = N {
            inner.packs = n;
        }
        inner.check().map_err(to_py)?;
        Ok(Self { inner })
    }

    fn viability_margin(&self) -> f64 {
        self.inner.viability_margin()
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ModelParams(d={}, D={}, omega={}, k={}, lam={}, mu={}, beta={}, N={})",
            p.predator_diffusion,
            p.prey_diffusion,
            p.mortality,
            p.predation,
            p.prey_growth,
            p.prey_crowding,
            p.competition,
            p.packs
        )
    }
}

/// Uniform cell-centred grid on a box with Neumann boundaries.
#[pyclass(name = "Grid", module = "predpack", from_py_object)]
#[derive(Clone)]
struct PyGrid {
    inner: predpack_core::Grid,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(lengths: Vec<f64>, cells: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: predpack_core::Grid::new(&lengths, &cells).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn interval(length: f64, cells: usize) -> PyResult<Self> {
        Ok(Self {
            inner: predpack_core::Grid::interval(length, cells).map_err(to_py)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    #[getter]
    fn lengths(&self) -> Vec<f64> {
        self.inner.lengths().to_vec()
    }
    #[getter]
    fn cells(&self) -> Vec<usize> {
        self.inner.cells().to_vec()
    }
    #[getter]
    fn volume(&self) -> f64 {
        self.inner.volume()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn integrate(&self, values: Vec<f64>) -> PyResult<f64> {
        if values.len() != self.inner.len() {
            return Err(to_py(Error::SizeMismatch {
                expected: self.inner.len(),
                got: values.len(),
            }));
        }
        Ok(self.inner.integrate(&values))
    }

    fn __repr__(&self) -> String {
        format!("Grid(lengths={:?}, cells={:?})", self.inner.lengths(), self.inner.cells())
    }
}

fn field(g: &PyGrid, components: Vec<Vec<f64>>) -> PyResult<predpack_core::Field> {
    predpack_core::Field::new(g.inner.clone(), components).map_err(to_py)
}

fn perturbation(name: &str) -> PyResult<Perturbation> {
    match name {
        "eigen" => Ok(Perturbation::Eigen),
        "noise" => Ok(Perturbation::Noise),
        _ => Err(PyValueError::new_err(format!("unknown perturbation {name:?}"))),
    }
}

/// `(w, u)` of the positive constant coexistence state.
#[pyfunction]
fn constant_state(p: &PyModelParams) -> (f64, f64) {
    let c = model::constant_coexistence_state(&p.inner);
    (c.w, c.u)
}

/// Reaction right-hand side at `(w_1..w_N, u)`; the prey term is last.
#[pyfunction]
fn reaction_terms(p: &PyModelParams, w: Vec<f64>, u: f64) -> PyResult<Vec<f64>> {
    if w.len() != p.inner.packs {
        return Err(to_py(Error::SizeMismatch {
            expected: p.inner.packs,
            got: w.len(),
        }));
    }
    Ok(model::reaction_terms(&p.inner, &w, u))
}

/// Total predator population with N packs vs a single pack.
#[pyfunction]
#[pyo3(signature = (p, volume=1.0))]
fn total_population<'py>(py: Python<'py>, p: &PyModelParams, volume: f64) -> PyResult<Bound<'py, PyDict>> {
    let c = model::total_population(&p.inner, volume);
    let d = PyDict::new(py);
    d.set_item("with_packs", c.with_packs)?;
    d.set_item("single_pack", c.single_pack)?;
    d.set_item("ratio", c.ratio)?;
    Ok(d)
}

/// Constant states `[(H, u), ...]` of the reduced two-species system.
#[pyfunction]
fn mimura_states(p: &PyModelParams, beta_eff: f64) -> Vec<(f64, f64)> {
    model::mimura_states(&p.inner, beta_eff)
        .iter()
        .map(|s| (s.h, s.u))
        .collect()
}

/// Closed-form spectrum at the constant state as `(re, im, multiplicity)`.
#[pyfunction]
fn spectrum(p: &PyModelParams) -> Vec<(f64, f64, usize)> {
    stability::spectrum_closed_form(&p.inner)
        .entries
        .iter()
        .map(|(z, m)| (z.re, z.im, *m))
        .collect()
}

/// Eigenvalues of the dense linearization, computed numerically.
#[pyfunction]
fn spectrum_numeric(p: &PyModelParams) -> PyResult<Vec<(f64, f64)>> {
    let m = stability::linearized_matrix(&p.inner);
    let v = stability::spectrum_numeric(&m).map_err(to_py)?;
    Ok(v.iter().map(|z| (z.re, z.im)).collect())
}

/// Stability label of the constant state, or of `"extinction"` / `"prey_only"`.
#[pyfunction]
#[pyo3(signature = (p, state="coexistence"))]
fn classify_stability(p: &PyModelParams, state: &str) -> PyResult<Option<String>> {
    let verdict = match state {
        "coexistence" => Some(stability::classify_constant_stability(&p.inner)),
        "extinction" => stability::classify_trivial_state(&p.inner, TrivialState::Extinction),
        "prey_only" => stability::classify_trivial_state(&p.inner, TrivialState::PreyOnly),
        _ => return Err(PyValueError::new_err(format!("unknown state {state:?}"))),
    };
    Ok(verdict.map(|v| format!("{:?}", v.label)))
}

/// Initial field used by the sweep: constant state plus a relative perturbation.
#[pyfunction]
#[pyo3(signature = (p, grid, perturbation="eigen", amplitude=1e-3, seed=0))]
fn initial_state(
    p: &PyModelParams,
    grid: &PyGrid,
    perturbation: &str,
    amplitude: f64,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let kind = self::perturbation(perturbation)?;
    let mut rng = seed::stream(seed, "initial", &[]);
    Ok(sweep::initial_state(&p.inner, &grid.inner, kind, amplitude, &mut rng).components)
}

/// Integrates to `horizon` or until the residual falls below `steady_tol`.
#[pyfunction]
#[pyo3(signature = (p, grid, components, horizon=500.0, dt=0.1, steady_tol=1e-9, sample_every=10))]
#[allow(clippy::too_many_arguments)]
fn evolve<'py>(
    py: Python<'py>,
    p: &PyModelParams,
    grid: &PyGrid,
    components: Vec<Vec<f64>>,
    horizon: f64,
    dt: f64,
    steady_tol: f64,
    sample_every: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let s0 = field(grid, components)?;
    let opts = EvolveOptions {
        horizon,
        dt,
        steady_tol,
        sample_every,
        sum_cap: None,
    };
    let params = p.inner;
    let g = grid.inner.clone();
    let rep = py
        .detach(move || dynamics::evolve(&params, &g, &s0, &opts))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("converged", rep.converged)?;
    d.set_item("steps", rep.steps)?;
    d.set_item("time", rep.time)?;
    d.set_item("residual", rep.final_residual())?;
    d.set_item("max_u", rep.max_u)?;
    d.set_item("max_sum_w", rep.max_sum_w)?;
    d.set_item("bound_violations", rep.bound_violations.len())?;
    let history: Vec<(usize, f64, f64)> = rep
        .residual_history
        .iter()
        .map(|s| (s.step, s.time, s.residual))
        .collect();
    d.set_item("history", history)?;
    d.set_item("state", rep.final_state.components)?;
    Ok(d)
}

/// Damped Newton for a steady state starting from `components`.
#[pyfunction]
#[pyo3(signature = (p, grid, components, tol=1e-9, max_iters=50))]
fn newton<'py>(
    py: Python<'py>,
    p: &PyModelParams,
    grid: &PyGrid,
    components: Vec<Vec<f64>>,
    tol: f64,
    max_iters: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let guess = field(grid, components)?;
    let opts = NewtonOptions {
        tol,
        max_iters,
        ..NewtonOptions::default()
    };
    let params = p.inner;
    let g = grid.inner.clone();
    let rep = py
        .detach(move || dynamics::newton_steady(&params, &g, &guess, &opts))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("iterations", rep.iterations)?;
    d.set_item("residual", rep.residual)?;
    d.set_item("state", rep.state.components)?;
    Ok(d)
}

/// `(label, flatness)` of a field.
#[pyfunction]
#[pyo3(signature = (grid, components, flatness_tol=1e-5))]
fn classify(grid: &PyGrid, components: Vec<Vec<f64>>, flatness_tol: f64) -> PyResult<(String, f64)> {
    let c = dynamics::classify_solution(&field(grid, components)?, flatness_tol);
    Ok((c.label.as_str().to_string(), c.flatness))
}

/// Pairs `(i, j)` whose predator components are not ordered pointwise.
#[pyfunction]
#[pyo3(signature = (grid, components, delta=1e-6))]
fn ordering_violations(grid: &PyGrid, components: Vec<Vec<f64>>, delta: f64) -> PyResult<Vec<(usize, usize)>> {
    Ok(dynamics::ordering_rigidity_probe(&field(grid, components)?, delta))
}

/// Runs the (β, N) sweep; returns one dict per cell plus threshold estimates.
#[pyfunction]
#[pyo3(signature = (betas, packs, grid, p=None, runs=3, horizon=500.0, seed=0, parallel=true))]
#[allow(clippy::too_many_arguments)]
fn run_sweep<'py>(
    py: Python<'py>,
    betas: Vec<f64>,
    packs: Vec<usize>,
    grid: &PyGrid,
    p: Option<PyModelParams>,
    runs: usize,
    horizon: f64,
    seed: u64,
    parallel: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let base = p.map(|p| p.inner).unwrap_or_else(model::ModelParams::reference);
    let protocol = Protocol {
        runs,
        horizon,
        parallel,
        ..Protocol::default()
    };
    let g = grid.inner.clone();
    let r = py
        .detach(move || sweep::run_sweep(&base, &betas, &packs, &g, &protocol, seed))
        .map_err(to_py)?;
    let cells = r
        .cells
        .iter()
        .map(|c| {
            let d = PyDict::new(py);
            d.set_item("beta", c.beta)?;
            d.set_item("N", c.packs)?;
            d.set_item("label", c.classification.label.as_str())?;
            d.set_item("flatness", c.classification.flatness)?;
            d.set_item("seeds", c.seeds.clone())?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let (beta_bar, n_bar) = sweep::estimate_thresholds(&r);
    let out = PyDict::new(py);
    out.set_item("cells", cells)?;
    out.set_item("beta_bar", threshold(py, beta_bar)?)?;
    out.set_item("N_bar", threshold(py, n_bar)?)?;
    Ok(out)
}

fn threshold<'py, T>(py: Python<'py>, t: Threshold<T>) -> PyResult<Bound<'py, PyAny>>
where
    T: IntoPyObject<'py>,
{
    match t {
        Threshold::Value(v) => v.into_bound_py_any(py),
        Threshold::UnboundedInRange => "unbounded_in_range".into_bound_py_any(py),
        Threshold::BelowRange => "below_range".into_bound_py_any(py),
    }
}

/// Radius of the smallest ball containing any set of diameter `diam` in ℝⁿ.
#[pyfunction]
fn jung_radius(n: usize, diam: f64) -> PyResult<f64> {
    covering::jung_radius(n, diam).map_err(to_py)
}

#[pyfunction]
fn covering_lower_bound(count: usize, r: f64, diam: f64, n: usize) -> f64 {
    covering::covering_lower_bound(count, r, diam, n)
}

/// `(m, witness)`: largest number of radius-`r` balls around `points`
/// sharing a common point, and one such point.
#[pyfunction]
fn max_overlap(points: Vec<Vec<f64>>, r: f64) -> PyResult<(usize, Vec<f64>)> {
    let dim = points.first().map_or(0, Vec::len);
    let cloud = PointCloud::new(dim, points).map_err(to_py)?;
    let o = covering::max_overlap(&cloud, r, &Sampling::default()).map_err(to_py)?;
    Ok((o.m, o.witness))
}

/// Randomized covering trials as `(trial, m, bound, ok)` tuples.
#[pyfunction]
#[pyo3(signature = (n, count, radius, trials, seed=0))]
fn cover_trials(n: usize, count: usize, radius: f64, trials: usize, seed: u64) -> PyResult<Vec<(usize, usize, f64, bool)>> {
    Ok(covering::cover_trials(n, count, radius, trials, seed)
        .map_err(to_py)?
        .iter()
        .map(|t| (t.trial, t.m, t.bound, t.ok))
        .collect())
}

#[pymodule]
fn predpack(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("ConvergenceError", m.py().get_type::<ConvergenceError>())?;
    m.add("NonFiniteError", m.py().get_type::<NonFiniteError>())?;
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyGrid>()?;
    m.add_function(wrap_pyfunction!(constant_state, m)?)?;
    m.add_function(wrap_pyfunction!(reaction_terms, m)?)?;
    m.add_function(wrap_pyfunction!(total_population, m)?)?;
    m.add_function(wrap_pyfunction!(mimura_states, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum_numeric, m)?)?;
    m.add_function(wrap_pyfunction!(classify_stability, m)?)?;
    m.add_function(wrap_pyfunction!(initial_state, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(newton, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(ordering_violations, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(jung_radius, m)?)?;
    m.add_function(wrap_pyfunction!(covering_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(max_overlap, m)?)?;
    m.add_function(wrap_pyfunction!(cover_trials, m)?)?;
    Ok(())
}
