//! Python module `ampkit`: structured operators, denoisers, AMP, state
//! evolution and superposition codes.

use ampkit::denoise::{self, GbField};
use ampkit::se::{self, SeParams, SePrior, StateEvolution, ThresholdOptions};
use ampkit::signals::{self, SignalSpec};
use ampkit::sparc::{self, CodeParams};
use ampkit::{
    AmpConfig, Complex64, CouplingEnsemble, Denoiser, GaussBernoulliPrior, LinearOperator, StopReason,
    StructuredOperator, TransformKind,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::IntoPyObjectExt;
use pyo3::types::PyDict;

fn err(e: ampkit::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn kind_of(name: &str) -> PyResult<TransformKind> {
    match name {
        "hadamard" => Ok(TransformKind::Hadamard),
        "fourier" => Ok(TransformKind::Fourier),
        other => Err(PyValueError::new_err(format!(
            "unknown transform {other:?}, expected \"hadamard\" or \"fourier\""
        ))),
    }
}

fn to_py<'py, T: IntoPyObject<'py>>(py: Python<'py>, v: T) -> PyResult<Py<PyAny>> {
    v.into_py_any(py)
}

/// Randomized Hadamard (real) or Fourier (complex) operator, full or
/// spatially coupled.
#[pyclass(module = "ampkit", frozen)]
struct Operator {
    inner: StructuredOperator,
}

#[pymethods]
impl Operator {
    #[new]
    #[pyo3(signature = (n, alpha, kind = "hadamard", seed = 0, l_c = 1, l_r = 1, w = 0, sqrt_j = 1.0, beta_seed = 1.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n: usize,
        alpha: f64,
        kind: &str,
        seed: u64,
        l_c: usize,
        l_r: usize,
        w: usize,
        sqrt_j: f64,
        beta_seed: f64,
    ) -> PyResult<Self> {
        let ensemble = CouplingEnsemble {
            l_c,
            l_r,
            w,
            sqrt_j,
            alpha,
            beta_seed,
        };
        let inner = StructuredOperator::build(ensemble, kind_of(kind)?, n, seed).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn is_complex(&self) -> bool {
        self.inner.kind() == TransformKind::Fourier
    }

    #[getter]
    fn blocks(&self) -> usize {
        self.inner.ensemble().l_c
    }

    #[getter]
    fn global_scale(&self) -> f64 {
        self.inner.global_scale()
    }

    fn forward(&self, py: Python<'_>, x: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
        if self.is_complex() {
            let x: Vec<Complex64> = x.extract()?;
            to_py(py, LinearOperator::<Complex64>::forward(&self.inner, &x).map_err(err)?)
        } else {
            let x: Vec<f64> = x.extract()?;
            to_py(py, LinearOperator::<f64>::forward(&self.inner, &x).map_err(err)?)
        }
    }

    fn adjoint(&self, py: Python<'_>, f: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
        if self.is_complex() {
            let f: Vec<Complex64> = f.extract()?;
            to_py(py, LinearOperator::<Complex64>::adjoint(&self.inner, &f).map_err(err)?)
        } else {
            let f: Vec<f64> = f.extract()?;
            to_py(py, LinearOperator::<f64>::adjoint(&self.inner, &f).map_err(err)?)
        }
    }

    /// `|F|² v`.
    fn sq_forward(&self, v: Vec<f64>) -> PyResult<Vec<f64>> {
        LinearOperator::<f64>::sq_forward(&self.inner, &v).map_err(err)
    }

    /// `|F|²ᵀ u`.
    fn sq_adjoint(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        LinearOperator::<f64>::sq_adjoint(&self.inner, &u).map_err(err)
    }

    /// Dense rows of the operator.
    fn materialize(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        if self.is_complex() {
            let d = self.inner.materialize::<Complex64>().map_err(err)?;
            let rows: Vec<Vec<Complex64>> = (0..d.n_rows()).map(|i| d.row(i).to_vec()).collect();
            to_py(py, rows)
        } else {
            let d = self.inner.materialize::<f64>().map_err(err)?;
            let rows: Vec<Vec<f64>> = (0..d.n_rows()).map(|i| d.row(i).to_vec()).collect();
            to_py(py, rows)
        }
    }

    fn __repr__(&self) -> String {
        let e = self.inner.ensemble();
        format!(
            "Operator(n={}, m={}, kind={:?}, l_c={}, l_r={}, alpha={})",
            self.inner.n(),
            self.inner.m(),
            self.inner.kind(),
            e.l_c,
            e.l_r,
            e.alpha
        )
    }
}

/// Real Gauss-Bernoulli denoiser; returns `(a, v)`.
#[pyfunction]
#[pyo3(signature = (sigma2, r, rho, xbar = 0.0, var = 1.0))]
fn gb_real(sigma2: f64, r: f64, rho: f64, xbar: f64, var: f64) -> PyResult<(f64, f64)> {
    let out = denoise::gb_real(sigma2, r, &GaussBernoulliPrior::new(rho, xbar, var)).map_err(err)?;
    Ok((out.a, out.v))
}

/// Complex Gauss-Bernoulli denoiser; `v` is per real component.
#[pyfunction]
#[pyo3(signature = (sigma2, r, rho, xbar = 0.0, var = 1.0))]
fn gb_complex(sigma2: f64, r: Complex64, rho: f64, xbar: f64, var: f64) -> PyResult<(Complex64, f64)> {
    let out = denoise::gb_complex(sigma2, r, &GaussBernoulliPrior::new(rho, xbar, var)).map_err(err)?;
    Ok((out.a, out.v))
}

/// Posterior over one section of a superposition code.
#[pyfunction]
fn section_denoise(sigma2: Vec<f64>, r: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    denoise::section_denoise(&sigma2, &r).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (n, rho, seed, xbar = 0.0, var = 1.0, complex = false))]
fn generate_signal(py: Python<'_>, n: usize, rho: f64, seed: u64, xbar: f64, var: f64, complex: bool) -> PyResult<Py<PyAny>> {
    let spec = SignalSpec {
        n,
        prior: GaussBernoulliPrior::new(rho, xbar, var),
        seed,
    };
    if complex {
        to_py(py, signals::generate_gb::<Complex64>(&spec).map_err(err)?)
    } else {
        to_py(py, signals::generate_gb::<f64>(&spec).map_err(err)?)
    }
}

fn run_gb<'py, T>(
    py: Python<'py>,
    y: &Bound<'py, PyAny>,
    op: &StructuredOperator,
    prior: &GaussBernoulliPrior,
    config: &AmpConfig,
    x: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyDict>>
where
    T: GbField + for<'a> FromPyObjectOwned<'a> + IntoPyObject<'py> + Clone,
    StructuredOperator: LinearOperator<T>,
    GaussBernoulliPrior: Denoiser<T>,
{
    let y: Vec<T> = y.extract()?;
    let x: Option<Vec<T>> = x.map(|x| x.extract()).transpose()?;
    let out = ampkit::amp_run(&y, op, prior, config, x.as_deref()).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("estimate", out.estimate)?;
    d.set_item("variance", out.state.v)?;
    d.set_item("iterations", out.iterations)?;
    d.set_item("converged", out.stop == StopReason::Converged)?;
    d.set_item("final_mse", out.final_mse)?;
    d.set_item("mse", out.trace.records.iter().map(|r| r.mse).collect::<Vec<_>>())?;
    d.set_item("block_mse", out.trace.records.iter().map(|r| r.block_mse.clone()).collect::<Vec<_>>())?;
    d.set_item("delta_max", out.trace.records.iter().map(|r| r.delta_max).collect::<Vec<_>>())?;
    Ok(d)
}

/// Reconstructs a Gauss-Bernoulli signal from `y = F x (+ noise)`.
#[pyfunction]
#[pyo3(signature = (y, op, rho, xbar = 0.0, var = 1.0, x = None, delta = 0.0, epsilon = 1e-12, t_max = 1000, damping = 0.0))]
#[allow(clippy::too_many_arguments)]
fn amp_run<'py>(
    py: Python<'py>,
    y: &Bound<'py, PyAny>,
    op: &Operator,
    rho: f64,
    xbar: f64,
    var: f64,
    x: Option<&Bound<'py, PyAny>>,
    delta: f64,
    epsilon: f64,
    t_max: usize,
    damping: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let prior = GaussBernoulliPrior::new(rho, xbar, var);
    let config = AmpConfig {
        epsilon,
        t_max,
        delta,
        damping,
        ..AmpConfig::default()
    };
    if op.is_complex() {
        run_gb::<Complex64>(py, y, &op.inner, &prior, &config, x)
    } else {
        run_gb::<f64>(py, y, &op.inner, &prior, &config, x)
    }
}

fn se_for(rho: f64, xbar: f64, var: f64, complex: bool) -> StateEvolution {
    let p = GaussBernoulliPrior::new(rho, xbar, var);
    StateEvolution::new(if complex { SePrior::Complex(p) } else { SePrior::Real(p) })
}

/// Scalar state-evolution trajectory started from the prior's second moment.
#[pyfunction]
#[pyo3(signature = (rho, alpha, steps, delta = 0.0, xbar = 0.0, var = 1.0, complex = false))]
fn se_trajectory(rho: f64, alpha: f64, steps: usize, delta: f64, xbar: f64, var: f64, complex: bool) -> PyResult<Vec<f64>> {
    let se = se_for(rho, xbar, var, complex);
    let e0 = se.prior().initial_mse();
    se::se_trajectory(&se, &SeParams::new(delta, alpha), e0, steps).map_err(err)
}

/// Measurement rate above which state evolution reaches zero error.
#[pyfunction]
#[pyo3(signature = (rho, delta = 0.0, xbar = 0.0, var = 1.0, complex = false, lo = None, hi = 1.0))]
fn bp_threshold(rho: f64, delta: f64, xbar: f64, var: f64, complex: bool, lo: Option<f64>, hi: f64) -> PyResult<f64> {
    let se = se_for(rho, xbar, var, complex);
    let lo = lo.unwrap_or(rho.min(hi) * 0.5);
    se::find_bp_threshold(&se, delta, 1.0, (lo, hi), &ThresholdOptions::default()).map_err(err)
}

/// `½ log₂(1 + snr)`.
#[pyfunction]
fn capacity(snr: f64) -> f64 {
    sparc::capacity(snr)
}

/// Encodes a random message, sends it over the AWGN channel and decodes it.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (sections, section_size, rate, snr, seed, kind = "hadamard", coupling = None))]
fn code_instance<'py>(
    py: Python<'py>,
    sections: usize,
    section_size: usize,
    rate: f64,
    snr: f64,
    seed: u64,
    kind: &str,
    coupling: Option<(usize, usize, usize, f64, f64)>,
) -> PyResult<Bound<'py, PyDict>> {
    let params = CodeParams::new(sections, section_size, rate, snr);
    let shape = coupling.map(|(l_c, l_r, w, sqrt_j, beta_seed)| CouplingEnsemble {
        l_c,
        l_r,
        w,
        sqrt_j,
        alpha: params.alpha(),
        beta_seed,
    });
    let config = AmpConfig::for_codes(params.delta());
    let r = py
        .detach(|| sparc::run_instance(&params, shape.as_ref(), kind_of(kind)?, &config, seed).map_err(err))?;
    let d = PyDict::new(py);
    d.set_item("ser", r.ser)?;
    d.set_item("block_error", r.block_error)?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("converged", r.converged)?;
    d.set_item("actual_rate", params.actual_rate())?;
    Ok(d)
}

#[pymodule]
#[pyo3(name = "ampkit")]
fn ampkit_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Operator>()?;
    m.add_function(wrap_pyfunction!(gb_real, m)?)?;
    m.add_function(wrap_pyfunction!(gb_complex, m)?)?;
    m.add_function(wrap_pyfunction!(section_denoise, m)?)?;
    m.add_function(wrap_pyfunction!(generate_signal, m)?)?;
    m.add_function(wrap_pyfunction!(amp_run, m)?)?;
    m.add_function(wrap_pyfunction!(se_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(bp_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(capacity, m)?)?;
    m.add_function(wrap_pyfunction!(code_instance, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
