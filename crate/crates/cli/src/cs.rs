//! Compressed-sensing instances: signal, operator, measurements, AMP.

use ampkit::amp::{amp_run, AmpConfig, StopReason, Trace};
use ampkit::coupled::{CouplingEnsemble, StructuredOperator};
use ampkit::dense::GaussianOperator;
use ampkit::denoise::GbField;
use ampkit::rng::derive_seed;
use ampkit::signals::{add_noise, generate_gb, SignalSpec};
use ampkit::{Complex64, Error, GaussBernoulliPrior, LinearOperator, Result, TransformKind};
use serde::Serialize;

use crate::config::OperatorKind;

#[derive(Debug, Clone, Serialize)]
pub struct CsInstance {
    pub seed: u64,
    pub rows: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_mse: f64,
    #[serde(skip)]
    pub trace: Trace,
    #[serde(skip)]
    pub seconds: f64,
}

fn solve<T, O>(op: &O, prior: &GaussBernoulliPrior, amp: &AmpConfig, seed: u64) -> Result<CsInstance>
where
    T: GbField,
    O: LinearOperator<T>,
{
    let x: Vec<T> = generate_gb(&SignalSpec {
        n: op.cols(),
        prior: *prior,
        seed: derive_seed(seed, 1),
    })?;
    let mut y = op.forward(&x)?;
    add_noise(&mut y, amp.delta, derive_seed(seed, 2))?;
    let out = amp_run(&y, op, prior, amp, Some(&x))?;
    Ok(CsInstance {
        seed,
        rows: op.rows(),
        iterations: out.iterations,
        converged: out.stop == StopReason::Converged,
        final_mse: out.final_mse.unwrap_or(f64::NAN),
        trace: out.trace,
        seconds: out.seconds,
    })
}

/// Runs one instance. The operator is drawn from `derive_seed(seed, 0)`,
/// the signal from index 1 and the measurement noise from index 2.
pub fn cs_instance(
    kind: OperatorKind,
    ensemble: &CouplingEnsemble,
    n: usize,
    prior: &GaussBernoulliPrior,
    amp: &AmpConfig,
    seed: u64,
) -> Result<CsInstance> {
    let op_seed = derive_seed(seed, 0);
    match kind {
        OperatorKind::Hadamard => {
            let op = StructuredOperator::build(*ensemble, TransformKind::Hadamard, n, op_seed)?;
            solve::<f64, _>(&op, prior, amp, seed)
        }
        OperatorKind::Fourier => {
            let op = StructuredOperator::build(*ensemble, TransformKind::Fourier, n, op_seed)?;
            solve::<Complex64, _>(&op, prior, amp, seed)
        }
        OperatorKind::Gaussian => {
            if !ensemble.is_full() {
                return Err(Error::Construction("the Gaussian operator is not block-coupled".into()));
            }
            let m = ensemble.derive_rates(n)?.total_rows();
            let op = GaussianOperator::<f64>::auto(m, n, op_seed);
            solve::<f64, _>(&op, prior, amp, seed)
        }
    }
}

pub fn is_complex(kind: OperatorKind) -> bool {
    kind == OperatorKind::Fourier
}
