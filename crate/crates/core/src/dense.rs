//! i.i.d. Gaussian dense operators, used as the reference ensemble and as
//! the baseline path in timing comparisons.
//!
//! Row `μ` is drawn from ChaCha8 stream `μ` of the operator seed, so the
//! materialized and streaming storages hold identical entries.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};
use crate::field::Field;
use crate::operator::{DenseMatrix, LinearOperator};

/// Entry types that can be drawn as zero-mean Gaussians of total variance `var`.
pub trait GaussianEntry: Field {
    fn draw(rng: &mut ChaCha8Rng, var: f64) -> Self;
}

impl GaussianEntry for f64 {
    fn draw(rng: &mut ChaCha8Rng, var: f64) -> Self {
        let z: f64 = StandardNormal.sample(rng);
        z * var.sqrt()
    }
}

impl GaussianEntry for Complex64 {
    fn draw(rng: &mut ChaCha8Rng, var: f64) -> Self {
        let s = (var / 2.0).sqrt();
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re * s, im * s)
    }
}

#[derive(Debug, Clone)]
enum Storage<T> {
    Materialized(DenseMatrix<T>),
    Streaming,
}

/// M×N matrix with i.i.d. entries of variance `1/N`.
#[derive(Debug, Clone)]
pub struct GaussianOperator<T> {
    rows: usize,
    cols: usize,
    seed: u64,
    variance: f64,
    storage: Storage<T>,
}

impl<T: GaussianEntry> GaussianOperator<T> {
    fn fill_row(seed: u64, row: usize, variance: f64, buf: &mut [T]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(row as u64);
        buf.iter_mut().for_each(|x| *x = T::draw(&mut rng, variance));
    }

    /// Stores all entries in memory (`rows · cols` must stay within
    /// [`crate::coupled::MATERIALIZE_LIMIT`]).
    pub fn materialized(rows: usize, cols: usize, seed: u64) -> Result<Self> {
        let entries = rows.saturating_mul(cols);
        if entries > crate::coupled::MATERIALIZE_LIMIT {
            return Err(Error::SizeGuard {
                entries,
                limit: crate::coupled::MATERIALIZE_LIMIT,
            });
        }
        let variance = 1.0 / cols as f64;
        let mut data = vec![T::zero(); entries];
        for (i, row) in data.chunks_exact_mut(cols.max(1)).enumerate() {
            Self::fill_row(seed, i, variance, row);
        }
        Ok(Self {
            rows,
            cols,
            seed,
            variance,
            storage: Storage::Materialized(DenseMatrix::from_row_major(rows, cols, data)?),
        })
    }

    /// Regenerates every row on each application; memory stays O(N).
    pub fn streaming(rows: usize, cols: usize, seed: u64) -> Self {
        Self {
            rows,
            cols,
            seed,
            variance: 1.0 / cols as f64,
            storage: Storage::Streaming,
        }
    }

    /// Materialized when it fits under the guard, streaming otherwise.
    pub fn auto(rows: usize, cols: usize, seed: u64) -> Self {
        Self::materialized(rows, cols, seed).unwrap_or_else(|_| Self::streaming(rows, cols, seed))
    }

    pub fn is_streaming(&self) -> bool {
        matches!(self.storage, Storage::Streaming)
    }

    pub fn to_dense(&self) -> Result<DenseMatrix<T>> {
        match &self.storage {
            Storage::Materialized(d) => Ok(d.clone()),
            Storage::Streaming => Self::materialized(self.rows, self.cols, self.seed)?.to_dense(),
        }
    }

    fn for_each_row(&self, mut f: impl FnMut(usize, &[T])) {
        match &self.storage {
            Storage::Materialized(d) => (0..self.rows).for_each(|i| f(i, d.row(i))),
            Storage::Streaming => {
                let mut buf = vec![T::zero(); self.cols];
                for i in 0..self.rows {
                    Self::fill_row(self.seed, i, self.variance, &mut buf);
                    f(i, &buf);
                }
            }
        }
    }
}

impl<T: GaussianEntry> LinearOperator<T> for GaussianOperator<T> {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.forward_pair(x, &vec![0.0; self.cols])?.0)
    }

    fn adjoint(&self, f: &[T]) -> Result<Vec<T>> {
        Ok(self.adjoint_pair(f, &vec![0.0; self.rows])?.0)
    }

    fn sq_forward(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_pair(&vec![T::zero(); self.cols], v)?.1)
    }

    fn sq_adjoint(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.adjoint_pair(&vec![T::zero(); self.rows], u)?.1)
    }

    fn forward_pair(&self, x: &[T], v: &[f64]) -> Result<(Vec<T>, Vec<f64>)> {
        check_len(self.cols, x.len())?;
        check_len(self.cols, v.len())?;
        let mut fx = vec![T::zero(); self.rows];
        let mut fv = vec![0.0; self.rows];
        self.for_each_row(|i, row| {
            let mut acc = T::zero();
            let mut acc2 = 0.0;
            for ((&a, &xj), &vj) in row.iter().zip(x).zip(v) {
                acc += a * xj;
                acc2 += a.norm_sqr() * vj;
            }
            fx[i] = acc;
            fv[i] = acc2;
        });
        Ok((fx, fv))
    }

    fn adjoint_pair(&self, f: &[T], u: &[f64]) -> Result<(Vec<T>, Vec<f64>)> {
        check_len(self.rows, f.len())?;
        check_len(self.rows, u.len())?;
        let mut out = vec![T::zero(); self.cols];
        let mut out2 = vec![0.0; self.cols];
        self.for_each_row(|i, row| {
            let (fi, ui) = (f[i], u[i]);
            for ((o, o2), &a) in out.iter_mut().zip(out2.iter_mut()).zip(row) {
                *o += a.conj() * fi;
                *o2 += a.norm_sqr() * ui;
            }
        });
        Ok((out, out2))
    }
}
