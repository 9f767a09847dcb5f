//! The four linear primitives the AMP recursion needs, and an explicit
//! dense matrix implementing them.

use crate::error::{check_len, Result};
use crate::field::Field;

/// A linear map `F` (M×N) exposed through `F x`, `F* f`, `|F|² v` and `|F|²ᵀ u`.
pub trait LinearOperator<T: Field>: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;

    /// Number of equally wide column blocks the signal is partitioned into.
    fn column_blocks(&self) -> usize {
        1
    }

    fn forward(&self, x: &[T]) -> Result<Vec<T>>;
    fn adjoint(&self, f: &[T]) -> Result<Vec<T>>;
    fn sq_forward(&self, v: &[f64]) -> Result<Vec<f64>>;
    fn sq_adjoint(&self, u: &[f64]) -> Result<Vec<f64>>;

    /// `(F x, |F|² v)`; implementations streaming over rows override this to
    /// share one pass.
    fn forward_pair(&self, x: &[T], v: &[f64]) -> Result<(Vec<T>, Vec<f64>)> {
        Ok((self.forward(x)?, self.sq_forward(v)?))
    }

    /// `(F* f, |F|²ᵀ u)`.
    fn adjoint_pair(&self, f: &[T], u: &[f64]) -> Result<(Vec<T>, Vec<f64>)> {
        Ok((self.adjoint(f)?, self.sq_adjoint(u)?))
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Field> DenseMatrix<T> {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        check_len(rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x = *x * s);
    }
}

impl<T: Field> LinearOperator<T> for DenseMatrix<T> {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(self.cols, x.len())?;
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect())
    }

    fn adjoint(&self, f: &[T]) -> Result<Vec<T>> {
        check_len(self.rows, f.len())?;
        let mut out = vec![T::zero(); self.cols];
        for (i, &fi) in f.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * fi;
            }
        }
        Ok(out)
    }

    fn sq_forward(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols, v.len())?;
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .map(|(a, &b)| a.norm_sqr() * b)
                    .sum()
            })
            .collect())
    }

    fn sq_adjoint(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(self.rows, u.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, &ui) in u.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.norm_sqr() * ui;
            }
        }
        Ok(out)
    }

    fn forward_pair(&self, x: &[T], v: &[f64]) -> Result<(Vec<T>, Vec<f64>)> {
        check_len(self.cols, x.len())?;
        check_len(self.cols, v.len())?;
        let mut fx = Vec::with_capacity(self.rows);
        let mut fv = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let mut acc = T::zero();
            let mut acc2 = 0.0;
            for ((&a, &xj), &vj) in self.row(i).iter().zip(x).zip(v) {
                acc += a * xj;
                acc2 += a.norm_sqr() * vj;
            }
            fx.push(acc);
            fv.push(acc2);
        }
        Ok((fx, fv))
    }

    fn adjoint_pair(&self, f: &[T], u: &[f64]) -> Result<(Vec<T>, Vec<f64>)> {
        check_len(self.rows, f.len())?;
        check_len(self.rows, u.len())?;
        let mut out = vec![T::zero(); self.cols];
        let mut out2 = vec![0.0; self.cols];
        for i in 0..self.rows {
            let (fi, ui) = (f[i], u[i]);
            for ((o, o2), &a) in out.iter_mut().zip(out2.iter_mut()).zip(self.row(i)) {
                *o += a.conj() * fi;
                *o2 += a.norm_sqr() * ui;
            }
        }
        Ok((out, out2))
    }
}
