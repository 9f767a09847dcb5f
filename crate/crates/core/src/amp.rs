//! The AMP iteration written with operator primitives.
//!
//! One sweep, with `D = max(Δ, floor)`:
//!
//! ```text
//! Θ'  = |F|² v
//! w'  = F a − Θ' ⊙ (y − w) / (D + Θ)
//! Σ²  = 1 / (|F|²ᵀ (1 / (D + Θ')))
//! R   = a + Σ² ⊙ F* ((y − w') / (D + Θ'))
//! (a', v') = denoise(Σ², R)
//! ```
//!
//! `Σ²` is stored squared throughout.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::denoise::Denoiser;
use crate::error::{check_len, Error, Result};
use crate::field::Field;
use crate::operator::LinearOperator;
use crate::signals::{blockwise_mse, mse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopCriterion {
    /// `max_i |a_i^t − a_i^{t−1}|²`.
    MaxSquaredChange,
    /// `(1/N) Σ_i |a_i^t − a_i^{t−1}|`.
    MeanChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmpConfig {
    pub epsilon: f64,
    pub t_max: usize,
    pub delta: f64,
    pub variance_floor: f64,
    pub damping: f64,
    pub criterion: StopCriterion,
    pub trace: bool,
}

impl Default for AmpConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-12,
            t_max: 1000,
            delta: 0.0,
            variance_floor: 1e-17,
            damping: 0.0,
            criterion: StopCriterion::MaxSquaredChange,
            trace: true,
        }
    }
}

impl AmpConfig {
    /// Defaults for decoding superposition codes: mean-change criterion
    /// below `1e-8`.
    pub fn for_codes(delta: f64) -> Self {
        Self {
            epsilon: 1e-8,
            t_max: 3000,
            delta,
            criterion: StopCriterion::MeanChange,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Domain("epsilon must be positive".into()));
        }
        if self.t_max == 0 {
            return Err(Error::Domain("t_max must be at least 1".into()));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::Domain("channel variance must be nonnegative".into()));
        }
        if !(self.variance_floor > 0.0) {
            return Err(Error::Domain("variance floor must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::Domain("damping must lie in [0, 1)".into()));
        }
        Ok(())
    }

    fn effective_delta(&self) -> f64 {
        self.delta.max(self.variance_floor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpState<T> {
    /// Signal estimate.
    pub a: Vec<T>,
    /// Per-component variance of `a`.
    pub v: Vec<f64>,
    /// Onsager-corrected estimate of the noiseless measurements.
    pub w: Vec<T>,
    /// Per-measurement variance of `w`.
    pub theta: Vec<f64>,
    /// Pseudo-data fed to the denoiser.
    pub r: Vec<T>,
    /// Effective noise variance of `r`.
    pub sigma2: Vec<f64>,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub mse: Option<f64>,
    pub block_mse: Vec<f64>,
    pub delta_max: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn mse(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.mse).collect()
    }

    /// Trajectory of block `p`'s MSE.
    pub fn block_mse(&self, p: usize) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.block_mse.get(p).copied()).collect()
    }

    /// Whether two traces agree in everything except wall time.
    pub fn same_numbers(&self, other: &Trace) -> bool {
        self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.iteration == b.iteration
                    && a.mse.map(f64::to_bits) == b.mse.map(f64::to_bits)
                    && a.delta_max.to_bits() == b.delta_max.to_bits()
                    && a.block_mse.iter().map(|v| v.to_bits()).eq(b.block_mse.iter().map(|v| v.to_bits()))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct AmpOutcome<T> {
    pub estimate: Vec<T>,
    pub state: AmpState<T>,
    pub trace: Trace,
    pub stop: StopReason,
    pub iterations: usize,
    pub initial_mse: Option<f64>,
    pub final_mse: Option<f64>,
    pub seconds: f64,
}

pub fn amp_init<T, O, D>(y: &[T], op: &O, prior: &D) -> Result<AmpState<T>>
where
    T: Field,
    O: LinearOperator<T> + ?Sized,
    D: Denoiser<T> + ?Sized,
{
    check_len(op.rows(), y.len())?;
    let n = op.cols();
    let (a, v) = prior.initial(n)?;
    let theta = op.sq_forward(&v)?;
    Ok(AmpState {
        a,
        v,
        w: y.to_vec(),
        theta,
        r: vec![T::zero(); n],
        sigma2: vec![0.0; n],
        t: 0,
    })
}

fn all_finite<T: Field>(xs: &[T]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

/// One sweep of the recursion; returns the convergence measure selected by
/// `config.criterion`.
pub fn amp_iterate<T, O, D>(
    state: &mut AmpState<T>,
    y: &[T],
    op: &O,
    prior: &D,
    config: &AmpConfig,
) -> Result<f64>
where
    T: Field,
    O: LinearOperator<T> + ?Sized,
    D: Denoiser<T> + ?Sized,
{
    check_len(op.rows(), y.len())?;
    check_len(op.cols(), state.a.len())?;
    let dlt = config.effective_delta();
    let gamma = config.damping;
    let iteration = state.t + 1;
    let diverged = || Error::NumericDivergence { iteration };

    let (fa, theta) = op.forward_pair(&state.a, &state.v)?;
    let mut w = Vec::with_capacity(y.len());
    for i in 0..y.len() {
        let onsager = (y[i] - state.w[i]) * (theta[i] / (dlt + state.theta[i]));
        let fresh = fa[i] - onsager;
        w.push(if gamma > 0.0 {
            fresh * (1.0 - gamma) + state.w[i] * gamma
        } else {
            fresh
        });
    }

    let inv: Vec<f64> = theta.iter().map(|&t| 1.0 / (dlt + t)).collect();
    let resid: Vec<T> = y.iter().zip(&w).zip(&inv).map(|((&yi, &wi), &d)| (yi - wi) * d).collect();
    let (back, precision) = op.adjoint_pair(&resid, &inv)?;

    let n = state.a.len();
    let mut sigma2 = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    for i in 0..n {
        let s = (1.0 / precision[i]).max(config.variance_floor);
        if !s.is_finite() {
            return Err(diverged());
        }
        sigma2.push(s);
        r.push(state.a[i] + back[i] * s);
    }
    if !all_finite(&r) || !all_finite(&w) {
        return Err(diverged());
    }

    let mut a = vec![T::zero(); n];
    let mut v = vec![0.0; n];
    prior.apply(&sigma2, &r, &mut a, &mut v).map_err(|e| match e {
        Error::Domain(_) => diverged(),
        other => other,
    })?;
    if gamma > 0.0 {
        for (ai, &old) in a.iter_mut().zip(&state.a) {
            *ai = *ai * (1.0 - gamma) + old * gamma;
        }
    }
    v.iter_mut().for_each(|x| *x = x.max(0.0));
    if !all_finite(&a) || !all_finite(&v) {
        return Err(diverged());
    }

    let change = match config.criterion {
        StopCriterion::MaxSquaredChange => a
            .iter()
            .zip(&state.a)
            .map(|(&p, &q)| (p - q).norm_sqr())
            .fold(0.0, f64::max),
        StopCriterion::MeanChange => {
            a.iter().zip(&state.a).map(|(&p, &q)| (p - q).norm_sqr().sqrt()).sum::<f64>()
                / n.max(1) as f64
        }
    };

    *state = AmpState {
        a,
        v,
        w,
        theta,
        r,
        sigma2,
        t: iteration,
    };
    Ok(change)
}

/// Iterates until the change drops to `epsilon` or `t_max` sweeps ran.
/// With `true_x`, each trace record carries the MSE and per-block MSE.
pub fn amp_run<T, O, D>(
    y: &[T],
    op: &O,
    prior: &D,
    config: &AmpConfig,
    true_x: Option<&[T]>,
) -> Result<AmpOutcome<T>>
where
    T: Field,
    O: LinearOperator<T> + ?Sized,
    D: Denoiser<T> + ?Sized,
{
    config.validate()?;
    if let Some(x) = true_x {
        check_len(op.cols(), x.len())?;
    }
    let start = Instant::now();
    let mut state = amp_init(y, op, prior)?;
    let initial_mse = true_x.map(|x| mse(&state.a, x)).transpose()?;
    let blocks = op.column_blocks();
    let mut trace = Trace::default();
    let mut delta_max = config.epsilon + 1.0;
    while state.t < config.t_max && delta_max > config.epsilon {
        delta_max = amp_iterate(&mut state, y, op, prior, config)?;
        if config.trace {
            let (m, bm) = match true_x {
                Some(x) => (Some(mse(&state.a, x)?), blockwise_mse(&state.a, x, blocks)?),
                None => (None, Vec::new()),
            };
            trace.records.push(TraceRecord {
                iteration: state.t,
                mse: m,
                block_mse: bm,
                delta_max,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    let stop = if delta_max <= config.epsilon {
        StopReason::Converged
    } else {
        StopReason::MaxIterations
    };
    let final_mse = true_x.map(|x| mse(&state.a, x)).transpose()?;
    Ok(AmpOutcome {
        estimate: state.a.clone(),
        iterations: state.t,
        state,
        trace,
        stop,
        initial_mse,
        final_mse,
        seconds: start.elapsed().as_secs_f64(),
    })
}
