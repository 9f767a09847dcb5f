//! Fast orthonormal transforms and randomized mode subsampling.
//!
//! Every block of a structured operator is the dense-equivalent product
//! `S · FT · diag(signs) · P`: the input columns are permuted by `P`,
//! sign-flipped, transformed by the orthonormal Hadamard or unitary Fourier
//! matrix, and finally the rows listed in `modes` are kept in that order.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::field::Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    /// Real Walsh-Hadamard transform, entries ±1/√n.
    Hadamard,
    /// Complex unitary DFT, entries e^{-2πi jk/n}/√n.
    Fourier,
}

fn require_pow2(n: usize) -> Result<()> {
    if n.is_power_of_two() {
        Ok(())
    } else {
        Err(Error::NotPowerOfTwo(n))
    }
}

/// In-place orthonormal Walsh-Hadamard transform (natural ordering).
pub fn fwht_in_place(buf: &mut [f64]) -> Result<()> {
    let n = buf.len();
    require_pow2(n)?;
    let mut h = 1;
    while h < n {
        for chunk in buf.chunks_exact_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    let scale = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|x| *x *= scale);
    Ok(())
}

pub fn fwht(x: &[f64]) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

fn unitary_fft(buf: &mut [Complex64], inverse: bool) -> Result<()> {
    let n = buf.len();
    require_pow2(n)?;
    plan(n, inverse).process(buf);
    let scale = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|x| *x *= scale);
    Ok(())
}

pub fn dft_in_place(buf: &mut [Complex64]) -> Result<()> {
    unitary_fft(buf, false)
}

pub fn idft_in_place(buf: &mut [Complex64]) -> Result<()> {
    unitary_fft(buf, true)
}

pub fn dft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut out = x.to_vec();
    dft_in_place(&mut out)?;
    Ok(out)
}

pub fn idft(y: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut out = y.to_vec();
    idft_in_place(&mut out)?;
    Ok(out)
}

/// Random mode selection, sign flips and column permutation of one block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockRandomization {
    modes: Vec<usize>,
    signs: Vec<i8>,
    permutation: Vec<usize>,
}

impl BlockRandomization {
    /// Draws the randomization of one block from the ChaCha8 stream
    /// `stream` of `master_seed`.
    ///
    /// Draw order: `n_rows` steps of a partial Fisher-Yates shuffle of
    /// `0..n_cols` (the selected modes, in draw order), then one sign bit per
    /// column (top bit of a `u32`), then a full Fisher-Yates shuffle giving the
    /// column permutation.
    pub fn draw(n_cols: usize, n_rows: usize, master_seed: u64, stream: u64) -> Result<Self> {
        require_pow2(n_cols)?;
        if n_rows > n_cols {
            return Err(Error::Construction(format!(
                "{n_rows} modes requested from a block of {n_cols} columns"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream);

        let mut pool: Vec<usize> = (0..n_cols).collect();
        for i in 0..n_rows {
            let j = rng.random_range(i..n_cols);
            pool.swap(i, j);
        }
        pool.truncate(n_rows);
        let modes = pool;

        let signs = (0..n_cols)
            .map(|_| if rng.next_u32() >> 31 == 1 { -1 } else { 1 })
            .collect();

        let mut permutation: Vec<usize> = (0..n_cols).collect();
        for i in (1..n_cols).rev() {
            let j = rng.random_range(0..=i);
            permutation.swap(i, j);
        }

        Ok(Self {
            modes,
            signs,
            permutation,
        })
    }

    /// All modes in natural order, no sign flips, no permutation.
    pub fn identity(n_cols: usize) -> Result<Self> {
        require_pow2(n_cols)?;
        Ok(Self {
            modes: (0..n_cols).collect(),
            signs: vec![1; n_cols],
            permutation: (0..n_cols).collect(),
        })
    }

    pub fn from_parts(modes: Vec<usize>, signs: Vec<i8>, permutation: Vec<usize>) -> Result<Self> {
        let n = permutation.len();
        require_pow2(n)?;
        check_len(n, signs.len())?;
        if modes.len() > n {
            return Err(Error::Construction("more modes than columns".into()));
        }
        let mut seen = vec![false; n];
        for &p in &permutation {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Construction("permutation is not a bijection".into()));
            }
        }
        let mut seen = vec![false; n];
        for &m in &modes {
            if m >= n || std::mem::replace(&mut seen[m], true) {
                return Err(Error::Construction("modes must be distinct and in range".into()));
            }
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Construction("signs must be ±1".into()));
        }
        Ok(Self {
            modes,
            signs,
            permutation,
        })
    }

    pub fn n_cols(&self) -> usize {
        self.permutation.len()
    }

    pub fn n_rows(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// `out += scale * D e`, using `scratch` (length `n_cols`) as workspace.
    pub(crate) fn apply_accumulate<T: Field>(
        &self,
        kind: TransformKind,
        e: &[T],
        scale: f64,
        scratch: &mut [T],
        out: &mut [T],
    ) -> Result<()> {
        for ((s, &p), &sign) in scratch.iter_mut().zip(&self.permutation).zip(&self.signs) {
            *s = if sign < 0 { -e[p] } else { e[p] };
        }
        T::transform(kind, scratch, false)?;
        for (o, &m) in out.iter_mut().zip(&self.modes) {
            *o += scratch[m] * scale;
        }
        Ok(())
    }

    /// `out += scale * D* f`, using `scratch` (length `n_cols`) as workspace.
    pub(crate) fn adjoint_accumulate<T: Field>(
        &self,
        kind: TransformKind,
        f: &[T],
        scale: f64,
        scratch: &mut [T],
        out: &mut [T],
    ) -> Result<()> {
        scratch.iter_mut().for_each(|s| *s = T::zero());
        for (&m, &fv) in self.modes.iter().zip(f) {
            scratch[m] = fv;
        }
        T::transform(kind, scratch, true)?;
        for ((s, &p), &sign) in scratch.iter().zip(&self.permutation).zip(&self.signs) {
            let v = if sign < 0 { -*s } else { *s };
            out[p] += v * scale;
        }
        Ok(())
    }
}

/// Rows `modes` of the randomized block transform applied to `e`.
pub fn subsample_apply<T: Field>(
    rand: &BlockRandomization,
    kind: TransformKind,
    e: &[T],
) -> Result<Vec<T>> {
    check_len(rand.n_cols(), e.len())?;
    let mut scratch = vec![T::zero(); rand.n_cols()];
    let mut out = vec![T::zero(); rand.n_rows()];
    rand.apply_accumulate(kind, e, 1.0, &mut scratch, &mut out)?;
    Ok(out)
}

/// Conjugate transpose of [`subsample_apply`]: scatter into the selected
/// modes, inverse transform, undo the signs and the permutation.
pub fn subsample_adjoint<T: Field>(
    rand: &BlockRandomization,
    kind: TransformKind,
    f: &[T],
) -> Result<Vec<T>> {
    check_len(rand.n_rows(), f.len())?;
    let mut scratch = vec![T::zero(); rand.n_cols()];
    let mut out = vec![T::zero(); rand.n_cols()];
    rand.adjoint_accumulate(kind, f, 1.0, &mut scratch, &mut out)?;
    Ok(out)
}
