//! Random sparse signals and reconstruction error metrics.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::denoise::{GaussBernoulliPrior, GbField};
use crate::error::{check_len, Error, Result};
use crate::field::Field;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub n: usize,
    pub prior: GaussBernoulliPrior,
    pub seed: u64,
}

/// Draws `spec.n` i.i.d. Gauss-Bernoulli components from ChaCha8 seeded with
/// `spec.seed`.
pub fn generate_gb<T: GbField>(spec: &SignalSpec) -> Result<Vec<T>> {
    if spec.n == 0 {
        return Err(Error::Domain("signal length must be at least 1".into()));
    }
    spec.prior.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..spec.n).map(|_| T::sample_gb(&spec.prior, &mut rng)).collect())
}

/// `(1/N) Σ |a_i − x_i|²`.
/// Adds i.i.d. Gaussian noise of variance `delta` per real component.
pub fn add_noise<T: GbField>(y: &mut [T], delta: f64, seed: u64) -> Result<()> {
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("noise variance {delta} is negative")));
    }
    if delta == 0.0 {
        return Ok(());
    }
    let noise = GaussBernoulliPrior::new(1.0, 0.0, delta);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in y.iter_mut() {
        *v += T::sample_gb(&noise, &mut rng);
    }
    Ok(())
}

pub fn mse<T: Field>(a: &[T], x: &[T]) -> Result<f64> {
    check_len(x.len(), a.len())?;
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(a.iter().zip(x).map(|(&p, &q)| (p - q).norm_sqr()).sum::<f64>() / a.len() as f64)
}

/// MSE of each of `blocks` equally wide blocks.
pub fn blockwise_mse<T: Field>(a: &[T], x: &[T], blocks: usize) -> Result<Vec<f64>> {
    check_len(x.len(), a.len())?;
    if blocks == 0 || !a.len().is_multiple_of(blocks) {
        return Err(Error::Domain(format!(
            "length {} is not divisible into {blocks} blocks",
            a.len()
        )));
    }
    let width = a.len() / blocks;
    a.chunks_exact(width)
        .zip(x.chunks_exact(width))
        .map(|(p, q)| mse(p, q))
        .collect()
}

/// JSON header stored next to a raw little-endian `f64` payload
/// (complex entries interleaved as re, im).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalHeader {
    pub format: String,
    pub n: usize,
    pub complex: bool,
    pub dtype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<SignalSpec>,
}

pub const SIGNAL_FORMAT: &str = "ampkit-signal/1";

/// Entry types with a flat `f64` encoding.
pub trait FlatField: Field {
    const WIDTH: usize;
    fn push_parts(self, out: &mut Vec<f64>);
    fn from_parts(parts: &[f64]) -> Self;
}

impl FlatField for f64 {
    const WIDTH: usize = 1;
    fn push_parts(self, out: &mut Vec<f64>) {
        out.push(self);
    }
    fn from_parts(parts: &[f64]) -> Self {
        parts[0]
    }
}

impl FlatField for Complex64 {
    const WIDTH: usize = 2;
    fn push_parts(self, out: &mut Vec<f64>) {
        out.push(self.re);
        out.push(self.im);
    }
    fn from_parts(parts: &[f64]) -> Self {
        Complex64::new(parts[0], parts[1])
    }
}

/// Writes `<stem>.json` and `<stem>.bin`.
pub fn write_signal<T: FlatField>(stem: &Path, x: &[T], spec: Option<&SignalSpec>) -> Result<()> {
    let header = SignalHeader {
        format: SIGNAL_FORMAT.into(),
        n: x.len(),
        complex: T::IS_COMPLEX,
        dtype: "f64le".into(),
        spec: spec.copied(),
    };
    let io = |e: std::io::Error| Error::Format(e.to_string());
    let json = serde_json::to_string_pretty(&header).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(stem.with_extension("json"), json).map_err(io)?;
    let mut flat = Vec::with_capacity(x.len() * T::WIDTH);
    x.iter().for_each(|v| v.push_parts(&mut flat));
    let bytes: Vec<u8> = flat.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(stem.with_extension("bin"), bytes).map_err(io)
}

pub fn read_signal<T: FlatField>(stem: &Path) -> Result<(SignalHeader, Vec<T>)> {
    let io = |e: std::io::Error| Error::Format(e.to_string());
    let text = fs::read_to_string(stem.with_extension("json")).map_err(io)?;
    let header: SignalHeader =
        serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
    if header.format != SIGNAL_FORMAT || header.dtype != "f64le" {
        return Err(Error::Format(format!("unsupported signal format {}", header.format)));
    }
    if header.complex != T::IS_COMPLEX {
        return Err(Error::FieldMismatch("stored signal has a different scalar field"));
    }
    let bytes = fs::read(stem.with_extension("bin")).map_err(io)?;
    check_len(header.n * T::WIDTH * 8, bytes.len())?;
    let flat: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let x = flat.chunks_exact(T::WIDTH).map(T::from_parts).collect();
    Ok((header, x))
}
