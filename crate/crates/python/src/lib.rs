//! Python bindings: model parameters, kernels, Monte-Carlo estimators,
//! spectral and classical reference solutions, and ground-state bounds.

use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

use fracwell::groundstate::{self as gs, Branch, ProfileBand as CoreBand, ProfileMeta};
use fracwell::levy::{self, ModelParams as CoreParams};
use fracwell::oracles;
use fracwell::potential::{RadialPotential, WellSpec as CoreWell};
use fracwell::sampler::{Process as CoreProcess, StepConfig};
use fracwell::specfun::QuadratureSpec;
use fracwell::stopping::{self, Estimate as CoreEstimate, McRun};

create_exception!(fracwell, DomainError, PyValueError);
create_exception!(fracwell, ConfigError, PyValueError);
create_exception!(fracwell, HypothesisError, PyValueError);
create_exception!(fracwell, NumericalError, PyArithmeticError);

fn py_err(e: fracwell::Error) -> PyErr {
    use fracwell::Error::*;
    match e {
        Domain(m) => DomainError::new_err(m),
        Config(m) => ConfigError::new_err(m),
        Hypothesis(m) => HypothesisError::new_err(m),
        Numerical(m) => NumericalError::new_err(m),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for fracwell::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Parameters `(d, alpha, m)` of the relativistic stable process.
#[pyclass(frozen, skip_from_py_object, module = "fracwell")]
#[derive(Clone, Copy)]
pub struct ModelParams {
    inner: CoreParams,
}

#[pymethods]
impl ModelParams {
    #[new]
    #[pyo3(signature = (d, alpha, m = 0.0))]
    fn new(d: u32, alpha: f64, m: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CoreParams::new(d, alpha, m).py()?,
        })
    }

    #[getter]
    fn d(&self) -> u32 {
        self.inner.d
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn m(&self) -> f64 {
        self.inner.m
    }

    fn characteristic_exponent(&self, u: f64) -> f64 {
        self.inner.characteristic_exponent(u)
    }

    fn jump_density(&self, r: f64) -> PyResult<f64> {
        levy::jump_density(&self.inner, r).py()
    }

    fn sigma_density(&self, r: f64) -> PyResult<f64> {
        levy::sigma_density(&self.inner, r, &QuadratureSpec::default()).py()
    }

    fn tail_mass(&self, r: f64) -> PyResult<f64> {
        levy::tail_mass(&self.inner, r, &QuadratureSpec::default()).py()
    }

    fn total_sigma_mass(&self) -> PyResult<f64> {
        levy::total_sigma_mass(&self.inner, &QuadratureSpec::default()).py()
    }

    fn __repr__(&self) -> String {
        format!("ModelParams(d={}, alpha={}, m={})", self.inner.d, self.inner.alpha, self.inner.m)
    }
}

/// Spherical well `-v` on the ball of radius `a`.
#[pyclass(frozen, skip_from_py_object, module = "fracwell")]
#[derive(Clone, Copy)]
pub struct WellSpec {
    inner: CoreWell,
}

#[pymethods]
impl WellSpec {
    #[new]
    fn new(a: f64, v: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CoreWell::new(a, v).py()?,
        })
    }

    #[getter]
    fn a(&self) -> f64 {
        self.inner.a
    }

    #[getter]
    fn v(&self) -> f64 {
        self.inner.v
    }

    fn __repr__(&self) -> String {
        format!("WellSpec(a={}, v={})", self.inner.a, self.inner.v)
    }
}

/// The jump process, or Brownian motion with generator `Δ/2`.
#[pyclass(frozen, skip_from_py_object, module = "fracwell")]
#[derive(Clone, Copy)]
pub struct Process {
    inner: CoreProcess,
}

#[pymethods]
impl Process {
    #[staticmethod]
    fn levy(params: &ModelParams) -> Self {
        Self {
            inner: CoreProcess::Levy(params.inner),
        }
    }

    #[staticmethod]
    fn brownian(d: u32) -> PyResult<Self> {
        if d == 0 {
            return Err(DomainError::new_err("dimension must be at least 1"));
        }
        Ok(Self {
            inner: CoreProcess::Brownian { d },
        })
    }

    fn __repr__(&self) -> String {
        match self.inner {
            CoreProcess::Levy(p) => format!("Process.levy(d={}, alpha={}, m={})", p.d, p.alpha, p.m),
            CoreProcess::Brownian { d } => format!("Process.brownian(d={d})"),
        }
    }
}

/// Monte-Carlo estimate with standard error.
#[pyclass(frozen, get_all, skip_from_py_object, module = "fracwell")]
#[derive(Clone)]
pub struct Estimate {
    value: f64,
    stderr: f64,
    n: usize,
    truncated_fraction: f64,
    tail_bound: f64,
    diverged: bool,
    heavy_tail: bool,
}

impl From<CoreEstimate> for Estimate {
    fn from(e: CoreEstimate) -> Self {
        Self {
            value: e.value,
            stderr: e.stderr,
            n: e.n,
            truncated_fraction: e.truncated_fraction,
            tail_bound: e.tail_bound,
            diverged: e.diverged,
            heavy_tail: e.heavy_tail,
        }
    }
}

#[pymethods]
impl Estimate {
    fn __repr__(&self) -> String {
        format!(
            "Estimate(value={}, stderr={}, n={}, diverged={})",
            self.value, self.stderr, self.n, self.diverged
        )
    }
}

/// Step size, horizon, seed and path count shared by the estimators.
struct McArgs {
    run: McRun,
    cfg: StepConfig,
}

fn mc(n: usize, h: f64, t_max: f64, seed: u64, streams: usize) -> PyResult<McArgs> {
    Ok(McArgs {
        run: McRun::new(n, seed, streams).py()?,
        cfg: StepConfig::new(h, t_max).py()?,
    })
}

/// `P^x(τ_R > t)`.
#[pyfunction]
#[pyo3(signature = (process, r, x, t, n = 10_000, h = 1e-3, t_max = 50.0, seed = 1, streams = 8))]
#[allow(clippy::too_many_arguments)]
fn estimate_survival(
    py: Python<'_>,
    process: &Process,
    r: f64,
    x: Vec<f64>,
    t: f64,
    n: usize,
    h: f64,
    t_max: f64,
    seed: u64,
    streams: usize,
) -> PyResult<Estimate> {
    let a = mc(n, h, t_max, seed, streams)?;
    let pr = process.inner;
    py.detach(|| stopping::estimate_survival(&pr, r, &x, t, &a.run, &a.cfg)).py().map(Into::into)
}

/// `E^x[e^{λτ_R}]`; `lambda_r_hat` is the Dirichlet eigenvalue of `B_R`.
#[pyfunction]
#[pyo3(signature = (process, r, x, lam, lambda_r_hat, n = 10_000, h = 1e-3, t_max = 50.0, seed = 1, streams = 8))]
#[allow(clippy::too_many_arguments)]
fn estimate_exit_mgf(
    py: Python<'_>,
    process: &Process,
    r: f64,
    x: Vec<f64>,
    lam: f64,
    lambda_r_hat: f64,
    n: usize,
    h: f64,
    t_max: f64,
    seed: u64,
    streams: usize,
) -> PyResult<Estimate> {
    let a = mc(n, h, t_max, seed, streams)?;
    let pr = process.inner;
    py.detach(|| stopping::estimate_exit_mgf(&pr, r, &x, lam, &a.run, &a.cfg, lambda_r_hat))
        .py()
        .map(Into::into)
}

/// `E^x[e^{−λT_R}]`.
#[pyfunction]
#[pyo3(signature = (process, r, x, lam, n = 10_000, h = 1e-3, t_max = 50.0, seed = 1, streams = 8))]
#[allow(clippy::too_many_arguments)]
fn estimate_hitting_laplace(
    py: Python<'_>,
    process: &Process,
    r: f64,
    x: Vec<f64>,
    lam: f64,
    n: usize,
    h: f64,
    t_max: f64,
    seed: u64,
    streams: usize,
) -> PyResult<Estimate> {
    let a = mc(n, h, t_max, seed, streams)?;
    let pr = process.inner;
    py.detach(|| stopping::estimate_hitting_laplace(&pr, r, &x, lam, &a.run, &a.cfg))
        .py()
        .map(Into::into)
}

/// `E^x[τ_R]`.
#[pyfunction]
#[pyo3(signature = (process, r, x, n = 10_000, h = 1e-3, t_max = 50.0, seed = 1, streams = 8))]
#[allow(clippy::too_many_arguments)]
fn estimate_mean_exit(
    py: Python<'_>,
    process: &Process,
    r: f64,
    x: Vec<f64>,
    n: usize,
    h: f64,
    t_max: f64,
    seed: u64,
    streams: usize,
) -> PyResult<Estimate> {
    let a = mc(n, h, t_max, seed, streams)?;
    let pr = process.inner;
    py.detach(|| stopping::estimate_mean_exit(&pr, r, &x, &a.run, &a.cfg)).py().map(Into::into)
}

/// Feynman-Kac ratio `φ₀(x)/φ₀(a)`; returns `(branch, estimate)`.
#[pyfunction]
#[pyo3(signature = (process, well, lambda0_abs, x, lambda_a_hat, n = 10_000, h = 1e-3, t_max = 50.0, seed = 1, streams = 8))]
#[allow(clippy::too_many_arguments)]
fn fk_ratio(
    py: Python<'_>,
    process: &Process,
    well: &WellSpec,
    lambda0_abs: f64,
    x: Vec<f64>,
    lambda_a_hat: f64,
    n: usize,
    h: f64,
    t_max: f64,
    seed: u64,
    streams: usize,
) -> PyResult<(String, Estimate)> {
    let a = mc(n, h, t_max, seed, streams)?;
    let (pr, w) = (process.inner, well.inner);
    let (b, e) = py
        .detach(|| gs::fk_ratio(&pr, &w, lambda0_abs, &x, &a.run, &a.cfg, lambda_a_hat))
        .py()?;
    Ok((b.name().to_string(), e.into()))
}

/// Ground state of the one-dimensional well problem on a finite grid.
#[pyclass(frozen, module = "fracwell")]
pub struct SpectralData {
    #[pyo3(get)]
    lambda0: f64,
    #[pyo3(get)]
    r: Vec<f64>,
    #[pyo3(get)]
    phi: Vec<f64>,
    #[pyo3(get)]
    half_width: f64,
    #[pyo3(get)]
    h: f64,
    #[pyo3(get)]
    nodes: usize,
    data: oracles::SpectralData,
}

#[pymethods]
impl SpectralData {
    fn phi_at(&self, r: f64) -> f64 {
        self.data.phi_at(r)
    }

    fn moment(&self, p: f64) -> f64 {
        self.data.moment(p)
    }

    fn lambda_r(&self, radius: f64) -> PyResult<f64> {
        self.data.lambda_r(radius).py()
    }
}

#[pyfunction]
#[pyo3(signature = (params, well, half_width = 16.0, n = 2048))]
fn spectral_solve_1d(
    py: Python<'_>,
    params: &ModelParams,
    well: &WellSpec,
    half_width: f64,
    n: usize,
) -> PyResult<SpectralData> {
    let (p, w) = (params.inner, well.inner);
    let data = py
        .detach(|| oracles::spectral_solve_1d(&p, &RadialPotential::from(w), half_width, n))
        .py()?;
    Ok(SpectralData {
        lambda0: data.lambda0,
        r: data.r.clone(),
        phi: data.phi.clone(),
        half_width: data.grid.half_width,
        h: data.grid.h,
        nodes: data.grid.n,
        data,
    })
}

/// Principal Dirichlet eigenvalue of the ball of radius `radius` (d = 1).
#[pyfunction]
#[pyo3(signature = (params, radius, h = None))]
fn dirichlet_eigenvalue(py: Python<'_>, params: &ModelParams, radius: f64, h: Option<f64>) -> PyResult<f64> {
    let p = params.inner;
    let h = h.unwrap_or(radius / 64.0);
    py.detach(|| oracles::dirichlet_eigenvalue(&p, radius, h, &QuadratureSpec::default()))
        .py()
}

/// Ground state of `−Δ/2 − v 1_{[−a,a]}`: `(lambda0, [φ₀(x) for x in xs])`.
#[pyfunction]
fn classical_groundstate_1d(a: f64, v: f64, xs: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
    let g = oracles::classical_groundstate_1d(a, v).py()?;
    Ok((g.lambda0, xs.iter().map(|&x| g.eval(x)).collect()))
}

#[pyfunction]
fn brownian_exit_mgf(a: f64, x: f64, u: f64) -> PyResult<f64> {
    oracles::brownian_exit_mgf(a, x, u).py()
}

#[pyfunction]
fn brownian_hit_laplace(b: f64, u: f64) -> PyResult<f64> {
    oracles::brownian_hit_laplace(b, u).py()
}

/// Two-sided envelope of `φ₀(r)/φ₀(a)`.
#[pyclass(frozen, module = "fracwell")]
pub struct ProfileBand {
    inner: CoreBand,
}

#[pymethods]
impl ProfileBand {
    #[new]
    #[pyo3(signature = (params, well, lambda0_abs, lambda_a, slack = 2.0))]
    fn new(params: &ModelParams, well: &WellSpec, lambda0_abs: f64, lambda_a: f64, slack: f64) -> PyResult<Self> {
        let meta = ProfileMeta::new(params.inner, well.inner, lambda0_abs, lambda_a).py()?;
        Ok(Self {
            inner: CoreBand::with_slack(meta, slack).py()?,
        })
    }

    /// Fit the constant on `(r, y)` samples and widen the band by `inflate`.
    #[staticmethod]
    #[pyo3(signature = (params, well, lambda0_abs, lambda_a, samples, inflate = 1.1))]
    fn fit(
        params: &ModelParams,
        well: &WellSpec,
        lambda0_abs: f64,
        lambda_a: f64,
        samples: Vec<(f64, f64)>,
        inflate: f64,
    ) -> PyResult<Self> {
        let meta = ProfileMeta::new(params.inner, well.inner, lambda0_abs, lambda_a).py()?;
        Ok(Self {
            inner: CoreBand::fit(meta, &samples, inflate).py()?,
        })
    }

    fn shape(&self, r: f64) -> PyResult<f64> {
        gs::profile_shape(&self.inner.meta, r).py()
    }

    fn lower(&self, r: f64) -> PyResult<f64> {
        self.inner.lower(r).py()
    }

    fn upper(&self, r: f64) -> PyResult<f64> {
        self.inner.upper(r).py()
    }

    fn contains(&self, r: f64, y: f64) -> PyResult<bool> {
        self.inner.contains(r, y).py()
    }

    fn branch(&self, r: f64) -> &'static str {
        Branch::of(r, self.inner.meta.well.a).name()
    }
}

/// Interval `(lo, hi)` for `φ₀(a)`.
#[pyfunction]
#[pyo3(signature = (params, well, lambda0_abs, lambda_a, slack = 1.0))]
fn phi_at_a(params: &ModelParams, well: &WellSpec, lambda0_abs: f64, lambda_a: f64, slack: f64) -> PyResult<(f64, f64)> {
    let i = gs::phi_at_a(&params.inner, &well.inner, lambda0_abs, lambda_a, slack, &QuadratureSpec::default()).py()?;
    Ok((i.lo, i.hi))
}

/// Bounds on `∫|x|^p φ₀²`: `(lower, upper, diverged)`.
#[pyfunction]
#[pyo3(signature = (params, well, lambda0_abs, lambda_a, p, delta, slack = 1.0))]
fn moment_bounds(
    params: &ModelParams,
    well: &WellSpec,
    lambda0_abs: f64,
    lambda_a: f64,
    p: f64,
    delta: f64,
    slack: f64,
) -> PyResult<(f64, f64, bool)> {
    let q = QuadratureSpec::default();
    let phi = gs::phi_at_a(&params.inner, &well.inner, lambda0_abs, lambda_a, 1.0, &q).py()?;
    let b = gs::moment_bounds(&params.inner, &well.inner, lambda0_abs, lambda_a, &phi, p, delta, slack, &q).py()?;
    Ok((b.lower, b.upper, b.diverged))
}

#[pyfunction]
fn gap_inequality_check(well: &WellSpec, lambda0_abs: f64, lambda_a: f64) -> bool {
    gs::gap_inequality_check(&well.inner, lambda0_abs, lambda_a)
}

#[pymodule]
#[pyo3(name = "fracwell")]
fn fracwell_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ModelParams>()?;
    m.add_class::<WellSpec>()?;
    m.add_class::<Process>()?;
    m.add_class::<Estimate>()?;
    m.add_class::<SpectralData>()?;
    m.add_class::<ProfileBand>()?;
    m.add_function(wrap_pyfunction!(estimate_survival, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_exit_mgf, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_hitting_laplace, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_mean_exit, m)?)?;
    m.add_function(wrap_pyfunction!(fk_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_solve_1d, m)?)?;
    m.add_function(wrap_pyfunction!(dirichlet_eigenvalue, m)?)?;
    m.add_function(wrap_pyfunction!(classical_groundstate_1d, m)?)?;
    m.add_function(wrap_pyfunction!(brownian_exit_mgf, m)?)?;
    m.add_function(wrap_pyfunction!(brownian_hit_laplace, m)?)?;
    m.add_function(wrap_pyfunction!(phi_at_a, m)?)?;
    m.add_function(wrap_pyfunction!(moment_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(gap_inequality_check, m)?)?;
    let py = m.py();
    m.add("DomainError", py.get_type::<DomainError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("HypothesisError", py.get_type::<HypothesisError>())?;
    m.add("NumericalError", py.get_type::<NumericalError>())?;
    Ok(())
}
