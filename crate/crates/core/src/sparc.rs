//! Sparse superposition codes over the AWGN channel.
//!
//! A message of `L` symbols from a `B`-ary alphabet is written as a signal of
//! `L` one-hot sections, multiplied by a (possibly coupled) structured
//! operator and sent through additive Gaussian noise of variance `1/snr`.
//! Decoding is AMP with the section denoiser followed by a hard decision per
//! section.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amp::{amp_run, AmpConfig, StopReason, Trace};
use crate::coupled::{CouplingEnsemble, StructuredOperator};
use crate::denoise::SectionPrior;
use crate::error::{check_len, Error, Result};
use crate::operator::LinearOperator;
use crate::rng::derive_seed;
use crate::xforms::TransformKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeParams {
    /// Number of sections.
    pub l: usize,
    /// Section size.
    pub b: usize,
    /// Target rate in bits per channel use.
    pub rate: f64,
    pub snr: f64,
}

impl CodeParams {
    pub fn new(l: usize, b: usize, rate: f64, snr: f64) -> Self {
        Self { l, b, rate, snr }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 {
            return Err(Error::Domain("a code needs at least one section".into()));
        }
        if self.b < 2 || !self.b.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(self.b));
        }
        if !(self.rate > 0.0) || !self.rate.is_finite() {
            return Err(Error::Domain(format!("rate {} must be positive", self.rate)));
        }
        if !(self.snr > 0.0) {
            return Err(Error::Domain(format!("snr {} must be positive", self.snr)));
        }
        Ok(())
    }

    pub fn bits_per_section(&self) -> u32 {
        self.b.trailing_zeros()
    }

    /// Channel noise variance `1/snr`.
    pub fn delta(&self) -> f64 {
        1.0 / self.snr
    }

    /// `α = log₂B / (R B)`.
    pub fn alpha(&self) -> f64 {
        self.bits_per_section() as f64 / (self.rate * self.b as f64)
    }

    /// Informative bits `K = L log₂B`.
    pub fn k(&self) -> usize {
        self.l * self.bits_per_section() as usize
    }

    /// Channel uses `M = ⌈K / R⌉`.
    pub fn m(&self) -> usize {
        (self.k() as f64 / self.rate - 1e-9).ceil() as usize
    }

    pub fn n(&self) -> usize {
        self.l * self.b
    }

    /// Rate after rounding `M` up: `K / M`.
    pub fn actual_rate(&self) -> f64 {
        self.k() as f64 / self.m() as f64
    }
}

/// Maximum rate of the AWGN channel, `½ log₂(1 + snr)`.
pub fn capacity(snr: f64) -> f64 {
    0.5 * (1.0 + snr).log2()
}

/// Rate of a code with section size `b` at measurement ratio `alpha`.
pub fn rate_of(b: usize, alpha: f64) -> f64 {
    (b as f64).log2() / (alpha * b as f64)
}

/// Sequence of 0-based symbols, each below `section_size`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub symbols: Vec<usize>,
    pub section_size: usize,
}

impl Message {
    pub fn new(symbols: Vec<usize>, section_size: usize) -> Result<Self> {
        if let Some(&bad) = symbols.iter().find(|&&s| s >= section_size) {
            return Err(Error::Domain(format!(
                "symbol {bad} is outside an alphabet of size {section_size}"
            )));
        }
        Ok(Self {
            symbols,
            section_size,
        })
    }

    pub fn random(sections: usize, section_size: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let symbols = (0..sections).map(|_| rng.random_range(0..section_size)).collect();
        Self {
            symbols,
            section_size,
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Packs a byte string into `sections` symbols of `log₂B` bits each,
    /// most significant bit first, zero-padding the tail.
    pub fn from_bytes(bytes: &[u8], sections: usize, section_size: usize) -> Result<Self> {
        if section_size < 2 || !section_size.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(section_size));
        }
        let width = section_size.trailing_zeros() as usize;
        let capacity = sections * width;
        if bytes.len() * 8 > capacity {
            return Err(Error::Domain(format!(
                "{} bytes do not fit into {sections} sections of {width} bits",
                bytes.len()
            )));
        }
        let bit = |i: usize| -> usize {
            bytes.get(i / 8).map_or(0, |b| ((b >> (7 - i % 8)) & 1) as usize)
        };
        let symbols = (0..sections)
            .map(|l| (0..width).fold(0, |acc, j| (acc << 1) | bit(l * width + j)))
            .collect();
        Ok(Self {
            symbols,
            section_size,
        })
    }

    /// Inverse of [`Message::from_bytes`], keeping the first `len` bytes.
    pub fn to_bytes(&self, len: usize) -> Result<Vec<u8>> {
        let width = self.section_size.trailing_zeros() as usize;
        if !self.section_size.is_power_of_two() || len * 8 > self.symbols.len() * width {
            return Err(Error::Domain("message too short for the requested bytes".into()));
        }
        let mut out = vec![0u8; len];
        for i in 0..len * 8 {
            let s = self.symbols[i / width];
            let b = (s >> (width - 1 - i % width)) & 1;
            out[i / 8] |= (b as u8) << (7 - i % 8);
        }
        Ok(out)
    }
}

/// One-hot sections: section `l` has its single 1 at `message.symbols[l]`.
pub fn section_encode(message: &Message) -> Vec<f64> {
    let b = message.section_size;
    let mut x = vec![0.0; message.len() * b];
    for (l, &s) in message.symbols.iter().enumerate() {
        x[l * b + s] = 1.0;
    }
    x
}

/// Hard decision per section; ties go to the lowest index.
pub fn section_decide(a: &[f64], section_size: usize) -> Result<Message> {
    if section_size == 0 || !a.len().is_multiple_of(section_size) {
        return Err(Error::Size {
            expected: a.len().next_multiple_of(section_size.max(1)),
            got: a.len(),
        });
    }
    let symbols = a
        .chunks_exact(section_size)
        .map(|sec| {
            let mut best = 0;
            for (i, &v) in sec.iter().enumerate() {
                if v > sec[best] {
                    best = i;
                }
            }
            best
        })
        .collect();
    Ok(Message {
        symbols,
        section_size,
    })
}

/// Fraction of sections decoded wrongly.
pub fn section_error_rate(decoded: &Message, sent: &Message) -> Result<f64> {
    check_len(sent.len(), decoded.len())?;
    if sent.is_empty() {
        return Ok(0.0);
    }
    let wrong = decoded.symbols.iter().zip(&sent.symbols).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / sent.len() as f64)
}

/// Builds the coding operator for `params` and rescales it so that a random
/// codeword has unit power per channel use.
///
/// `shape` supplies the coupling layout; its `alpha` is replaced by the
/// code's. `None` gives the full (uncoupled) operator.
pub fn build_code_operator(
    params: &CodeParams,
    shape: Option<&CouplingEnsemble>,
    kind: TransformKind,
    seed: u64,
) -> Result<StructuredOperator> {
    params.validate()?;
    let mut ensemble = shape.copied().unwrap_or(CouplingEnsemble::full(params.alpha()));
    ensemble.alpha = params.alpha();
    let mut op = StructuredOperator::build(ensemble, kind, params.n(), seed)?;
    if op.m() != params.m() {
        return Err(Error::Construction(format!(
            "operator has {} rows, the code needs {}",
            op.m(),
            params.m()
        )));
    }
    // Row μ of block row r carries power gs² (N_c / B) Σ_c J_rc per codeword.
    let weighted: f64 = op
        .rates()
        .row_counts
        .iter()
        .enumerate()
        .map(|(r, &rows)| rows as f64 * (0..ensemble.l_c).map(|c| ensemble.block_variance(r, c)).sum::<f64>())
        .sum();
    let gs2 = op.m() as f64 * ensemble.l_c as f64 / (params.l as f64 * weighted);
    op.set_global_scale(gs2.sqrt());
    Ok(op)
}

/// `κ = N · gs²`, the unit-block entry variance scaled by `N`, as used by
/// state evolution.
pub fn code_kappa(op: &StructuredOperator) -> f64 {
    op.n() as f64 * op.global_scale().powi(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codeword {
    pub y_clean: Vec<f64>,
    pub y_noisy: Vec<f64>,
    pub xi: Vec<f64>,
}

/// `y = F x + ξ` with `ξ` i.i.d. Gaussian of variance `delta`.
pub fn transmit<O>(x: &[f64], op: &O, delta: f64, seed: u64) -> Result<Codeword>
where
    O: LinearOperator<f64> + ?Sized,
{
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("noise variance {delta} is negative")));
    }
    let y_clean = op.forward(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = delta.sqrt();
    let xi: Vec<f64> = (0..y_clean.len())
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
        .collect();
    let y_noisy = y_clean.iter().zip(&xi).map(|(y, n)| y + n).collect();
    Ok(Codeword {
        y_clean,
        y_noisy,
        xi,
    })
}

#[derive(Debug, Clone)]
pub struct Decoded {
    pub message: Message,
    pub ser: f64,
    pub block_error: bool,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Trace,
}

/// AMP decoding with the section denoiser, scored against `sent`.
pub fn decode<O>(
    y: &[f64],
    op: &O,
    params: &CodeParams,
    config: &AmpConfig,
    sent: &Message,
) -> Result<Decoded>
where
    O: LinearOperator<f64> + ?Sized,
{
    check_len(params.n(), op.cols())?;
    let prior = SectionPrior {
        sections: params.l,
        section_size: params.b,
    };
    let x = section_encode(sent);
    let out = amp_run(y, op, &prior, config, config.trace.then_some(x.as_slice()))?;
    let message = section_decide(&out.estimate, params.b)?;
    let ser = section_error_rate(&message, sent)?;
    Ok(Decoded {
        message,
        ser,
        block_error: ser > 0.0,
        iterations: out.iterations,
        converged: out.stop == StopReason::Converged,
        trace: out.trace,
    })
}

/// Result of one encode/transmit/decode cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstanceResult {
    pub instance: usize,
    pub seed: u64,
    pub ser: f64,
    pub block_error: bool,
    pub iterations: usize,
    pub converged: bool,
}

/// One coded transmission with the seeds derived from `seed`: index 0 for
/// the operator, 1 for the message and 2 for the channel noise.
pub fn run_instance(
    params: &CodeParams,
    shape: Option<&CouplingEnsemble>,
    kind: TransformKind,
    config: &AmpConfig,
    seed: u64,
) -> Result<InstanceResult> {
    let op = build_code_operator(params, shape, kind, derive_seed(seed, 0))?;
    let message = Message::random(params.l, params.b, derive_seed(seed, 1));
    let cw = transmit(&section_encode(&message), &op, params.delta(), derive_seed(seed, 2))?;
    let config = AmpConfig {
        delta: params.delta(),
        trace: false,
        ..*config
    };
    let d = decode(&cw.y_noisy, &op, params, &config, &message)?;
    Ok(InstanceResult {
        instance: 0,
        seed,
        ser: d.ser,
        block_error: d.block_error,
        iterations: d.iterations,
        converged: d.converged,
    })
}

/// Aggregate over the instances at one rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePoint {
    pub rate: f64,
    pub actual_rate: f64,
    pub instances: usize,
    pub mean_ser: f64,
    pub ser_std: f64,
    pub block_error_rate: f64,
    pub mean_iterations: f64,
    pub results: Vec<InstanceResult>,
}

impl RatePoint {
    pub fn block_success_rate(&self) -> f64 {
        1.0 - self.block_error_rate
    }
}

/// Decodes `seeds.len()` instances at every rate of `grid`. Instance `i`
/// uses `seeds[i]` at every rate, so rates and operators are compared on
/// the same draws; results are collected in instance order.
pub fn sweep_rates(
    grid: &[CodeParams],
    shape: Option<&CouplingEnsemble>,
    kind: TransformKind,
    config: &AmpConfig,
    seeds: &[u64],
) -> Result<Vec<RatePoint>> {
    if grid.is_empty() || seeds.is_empty() {
        return Err(Error::Domain("rate sweep needs rates and seeds".into()));
    }
    grid.iter()
        .map(|params| {
            let results = seeds
                .par_iter()
                .enumerate()
                .map(|(i, &seed)| {
                    run_instance(params, shape, kind, config, seed).map(|r| InstanceResult { instance: i, ..r })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(aggregate(params, results))
        })
        .collect()
}

fn aggregate(params: &CodeParams, results: Vec<InstanceResult>) -> RatePoint {
    let n = results.len() as f64;
    let mean_ser = results.iter().map(|r| r.ser).sum::<f64>() / n;
    let var = results.iter().map(|r| (r.ser - mean_ser).powi(2)).sum::<f64>() / n;
    RatePoint {
        rate: params.rate,
        actual_rate: params.actual_rate(),
        instances: results.len(),
        mean_ser,
        ser_std: var.sqrt(),
        block_error_rate: results.iter().filter(|r| r.block_error).count() as f64 / n,
        mean_iterations: results.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
        results,
    }
}

/// Largest rate on the grid whose block success rate reaches `level`.
pub fn max_rate_with_success(points: &[RatePoint], level: f64) -> Option<f64> {
    points
        .iter()
        .filter(|p| p.block_success_rate() >= level)
        .map(|p| p.rate)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))))
}

/// Distance in dB between a rate and a reference rate, `10 log₁₀(reference / rate)`.
pub fn rate_gap_db(reference: f64, rate: f64) -> f64 {
    10.0 * (reference / rate).log10()
}
