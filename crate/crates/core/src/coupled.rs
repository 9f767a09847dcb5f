//! Spatially coupled (and full) block operators built from randomized
//! Hadamard or Fourier blocks.
//!
//! The operator is an `L_r × L_c` grid of blocks over a signal split into
//! `L_c` column blocks of width `N_c = N / L_c`. Block `(r, c)` carries
//! variance `J_rc`: 1 on the diagonal and on the `w` blocks below it, `J` on
//! the single block above it, and is empty elsewhere. Block rows other than
//! the first (the seed) share the bulk rate.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::field::Field;
use crate::operator::{DenseMatrix, LinearOperator};
use crate::xforms::{BlockRandomization, TransformKind};

/// Upper bound on the number of entries [`StructuredOperator::materialize`]
/// will allocate.
pub const MATERIALIZE_LIMIT: usize = 1 << 26;

/// `(L_c, L_r, w, √J, α, β_seed)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingEnsemble {
    pub l_c: usize,
    pub l_r: usize,
    pub w: usize,
    /// Coupling strength √J of the upper-diagonal block.
    pub sqrt_j: f64,
    pub alpha: f64,
    pub beta_seed: f64,
}

/// Per-block-row rates and row counts derived from an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    pub alpha_seed: f64,
    pub alpha_rest: f64,
    pub row_counts: Vec<usize>,
}

impl Rates {
    pub fn total_rows(&self) -> usize {
        self.row_counts.iter().sum()
    }
}

fn ceil_tol(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

fn floor_tol(x: f64) -> usize {
    (x + 1e-9).floor().max(0.0) as usize
}

impl CouplingEnsemble {
    /// The uncoupled 1×1 ensemble at rate `alpha`.
    pub fn full(alpha: f64) -> Self {
        Self {
            l_c: 1,
            l_r: 1,
            w: 0,
            sqrt_j: 1.0,
            alpha,
            beta_seed: 1.0,
        }
    }

    pub fn is_full(&self) -> bool {
        self.l_c == 1 && self.l_r == 1
    }

    pub fn j(&self) -> f64 {
        self.sqrt_j * self.sqrt_j
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InfeasibleEnsemble(m));
        if self.l_c == 0 || self.l_r == 0 {
            return bad("L_c and L_r must be at least 1".into());
        }
        if !(self.sqrt_j > 0.0) || !self.sqrt_j.is_finite() {
            return bad(format!("coupling strength must be positive, got {}", self.sqrt_j));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(self.beta_seed >= 1.0) {
            return bad(format!("beta_seed must be >= 1, got {}", self.beta_seed));
        }
        if self.l_r == 1 && (self.l_c != 1 || self.beta_seed != 1.0) {
            return bad("a single block row requires L_c = 1 and beta_seed = 1".into());
        }
        Ok(())
    }

    /// Seed and bulk rates: `α_seed = α β_seed`, `α_rest = α (L_c − β_seed)/(L_r − 1)`.
    pub fn alpha_rates(&self) -> Result<(f64, f64)> {
        self.validate()?;
        let alpha_seed = self.alpha * self.beta_seed;
        if self.l_r == 1 {
            return Ok((alpha_seed, alpha_seed));
        }
        let alpha_rest = self.alpha * (self.l_c as f64 - self.beta_seed) / (self.l_r as f64 - 1.0);
        if !(alpha_rest > 0.0) {
            return Err(Error::InfeasibleEnsemble(format!(
                "bulk rate {alpha_rest} is not positive"
            )));
        }
        Ok((alpha_seed, alpha_rest))
    }

    /// Rates plus integer row counts for a signal of length `n`.
    ///
    /// `M = ⌈αN⌉`; the seed row gets `⌈α_seed N_c⌉` rows, bulk rows
    /// `⌊α_rest N_c⌋`, and the last bulk row absorbs the remainder.
    pub fn derive_rates(&self, n: usize) -> Result<Rates> {
        let (alpha_seed, alpha_rest) = self.alpha_rates()?;
        let n_c = n as f64 / self.l_c as f64;
        let m = ceil_tol(self.alpha * n as f64);
        let seed = ceil_tol(alpha_seed * n_c);
        let mut row_counts = vec![seed];
        if self.l_r > 1 {
            let bulk = floor_tol(alpha_rest * n_c);
            row_counts.extend(std::iter::repeat_n(bulk, self.l_r - 2));
            let used: usize = row_counts.iter().sum();
            if used > m {
                return Err(Error::InfeasibleEnsemble(format!(
                    "row budget {m} exhausted before the last block row"
                )));
            }
            row_counts.push(m - used);
        } else {
            row_counts[0] = m;
        }
        Ok(Rates {
            alpha_seed,
            alpha_rest,
            row_counts,
        })
    }

    /// Variance `J_rc` of block `(r, c)` (0-based); 0 for empty blocks.
    pub fn block_variance(&self, r: usize, c: usize) -> f64 {
        if r == c || (r > c && r - c <= self.w) {
            1.0
        } else if c == r + 1 {
            self.j()
        } else {
            0.0
        }
    }

    /// The full `L_r × L_c` variance pattern, row-major.
    pub fn variance_pattern(&self) -> Vec<Vec<f64>> {
        (0..self.l_r)
            .map(|r| (0..self.l_c).map(|c| self.block_variance(r, c)).collect())
            .collect()
    }
}

/// Serializable recipe from which an operator is rebuilt bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorRecipe {
    pub ensemble: CouplingEnsemble,
    pub kind: TransformKind,
    pub n: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone)]
struct Block {
    rand: BlockRandomization,
    variance: f64,
}

/// Block-structured operator with fast forward and adjoint.
///
/// Every dense-equivalent entry of block `(r, c)` has magnitude
/// `√J_rc · global_scale`; the default `global_scale` is `1/√N`.
#[derive(Debug, Clone)]
pub struct StructuredOperator {
    recipe: OperatorRecipe,
    rates: Rates,
    n_c: usize,
    row_offsets: Vec<usize>,
    blocks: Vec<Option<Block>>,
    global_scale: f64,
}

impl StructuredOperator {
    pub fn build(
        ensemble: CouplingEnsemble,
        kind: TransformKind,
        n: usize,
        master_seed: u64,
    ) -> Result<Self> {
        ensemble.validate()?;
        if n == 0 || !n.is_multiple_of(ensemble.l_c) {
            return Err(Error::Construction(format!(
                "signal length {n} is not divisible by L_c = {}",
                ensemble.l_c
            )));
        }
        let n_c = n / ensemble.l_c;
        if !n_c.is_power_of_two() {
            return Err(Error::Construction(format!(
                "block width {n_c} is not a power of two"
            )));
        }
        let rates = ensemble.derive_rates(n)?;
        if let Some(&too_many) = rates.row_counts.iter().find(|&&r| r > n_c) {
            return Err(Error::InfeasibleEnsemble(format!(
                "block row of {too_many} rows exceeds the block width {n_c}"
            )));
        }
        let mut row_offsets = vec![0];
        for &rc in &rates.row_counts {
            row_offsets.push(row_offsets.last().unwrap() + rc);
        }
        let mut blocks = Vec::with_capacity(ensemble.l_r * ensemble.l_c);
        for r in 0..ensemble.l_r {
            for c in 0..ensemble.l_c {
                let variance = ensemble.block_variance(r, c);
                if variance == 0.0 {
                    blocks.push(None);
                    continue;
                }
                let stream = (r * ensemble.l_c + c) as u64;
                let rand = BlockRandomization::draw(n_c, rates.row_counts[r], master_seed, stream)?;
                blocks.push(Some(Block { rand, variance }));
            }
        }
        Ok(Self {
            recipe: OperatorRecipe {
                ensemble,
                kind,
                n,
                master_seed,
            },
            rates,
            n_c,
            row_offsets,
            blocks,
            global_scale: 1.0 / (n as f64).sqrt(),
        })
    }

    pub fn from_recipe(recipe: &OperatorRecipe) -> Result<Self> {
        Self::build(recipe.ensemble, recipe.kind, recipe.n, recipe.master_seed)
    }

    pub fn recipe(&self) -> &OperatorRecipe {
        &self.recipe
    }

    pub fn ensemble(&self) -> &CouplingEnsemble {
        &self.recipe.ensemble
    }

    pub fn kind(&self) -> TransformKind {
        self.recipe.kind
    }

    pub fn rates(&self) -> &Rates {
        &self.rates
    }

    pub fn block_width(&self) -> usize {
        self.n_c
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn global_scale(&self) -> f64 {
        self.global_scale
    }

    pub fn set_global_scale(&mut self, s: f64) {
        self.global_scale = s;
    }

    pub fn block_randomization(&self, r: usize, c: usize) -> Option<&BlockRandomization> {
        self.block(r, c).map(|b| &b.rand)
    }

    pub fn nonzero_blocks(&self) -> usize {
        self.blocks.iter().filter(|b| b.is_some()).count()
    }

    fn block(&self, r: usize, c: usize) -> Option<&Block> {
        self.blocks[r * self.recipe.ensemble.l_c + c].as_ref()
    }

    fn block_scale(&self, b: &Block) -> f64 {
        b.variance.sqrt() * self.global_scale * (self.n_c as f64).sqrt()
    }

    /// Squared entry magnitude of block `(r, c)`.
    pub fn entry_variance(&self, r: usize, c: usize) -> f64 {
        self.recipe.ensemble.block_variance(r, c) * self.global_scale * self.global_scale
    }

    pub fn m(&self) -> usize {
        *self.row_offsets.last().unwrap()
    }

    pub fn n(&self) -> usize {
        self.recipe.n
    }

    /// Explicit matrix obtained by applying `forward` to unit vectors.
    pub fn materialize<T: Field>(&self) -> Result<DenseMatrix<T>> {
        let (m, n) = (self.m(), self.n());
        let entries = m.saturating_mul(n);
        if entries > MATERIALIZE_LIMIT {
            return Err(Error::SizeGuard {
                entries,
                limit: MATERIALIZE_LIMIT,
            });
        }
        let mut dense = DenseMatrix::zeros(m, n);
        let mut unit = vec![T::zero(); n];
        for j in 0..n {
            unit[j] = T::from_real(1.0);
            let col = self.forward(&unit)?;
            unit[j] = T::zero();
            for (i, v) in col.into_iter().enumerate() {
                dense.set(i, j, v);
            }
        }
        Ok(dense)
    }

    fn col_sums(&self, v: &[f64]) -> Vec<f64> {
        v.chunks_exact(self.n_c).map(|c| c.iter().sum()).collect()
    }

    fn row_sums(&self, u: &[f64]) -> Vec<f64> {
        self.row_offsets
            .windows(2)
            .map(|w| u[w[0]..w[1]].iter().sum())
            .collect()
    }
}

impl<T: Field> LinearOperator<T> for StructuredOperator {
    fn rows(&self) -> usize {
        self.m()
    }

    fn cols(&self) -> usize {
        self.n()
    }

    fn column_blocks(&self) -> usize {
        self.recipe.ensemble.l_c
    }

    fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(self.n(), x.len())?;
        let ens = &self.recipe.ensemble;
        let mut out = vec![T::zero(); self.m()];
        let mut scratch = vec![T::zero(); self.n_c];
        for r in 0..ens.l_r {
            let rows = &mut out[self.row_offsets[r]..self.row_offsets[r + 1]];
            for c in 0..ens.l_c {
                if let Some(b) = self.block(r, c) {
                    let e = &x[c * self.n_c..(c + 1) * self.n_c];
                    let s = self.block_scale(b);
                    b.rand.apply_accumulate(self.recipe.kind, e, s, &mut scratch, rows)?;
                }
            }
        }
        Ok(out)
    }

    fn adjoint(&self, f: &[T]) -> Result<Vec<T>> {
        check_len(self.m(), f.len())?;
        let ens = &self.recipe.ensemble;
        let mut out = vec![T::zero(); self.n()];
        let mut scratch = vec![T::zero(); self.n_c];
        for c in 0..ens.l_c {
            let cols = &mut out[c * self.n_c..(c + 1) * self.n_c];
            for r in 0..ens.l_r {
                if let Some(b) = self.block(r, c) {
                    let fr = &f[self.row_offsets[r]..self.row_offsets[r + 1]];
                    let s = self.block_scale(b);
                    b.rand.adjoint_accumulate(self.recipe.kind, fr, s, &mut scratch, cols)?;
                }
            }
        }
        Ok(out)
    }

    fn sq_forward(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), v.len())?;
        let ens = &self.recipe.ensemble;
        let sums = self.col_sums(v);
        let g2 = self.global_scale * self.global_scale;
        let mut out = vec![0.0; self.m()];
        for r in 0..ens.l_r {
            let val: f64 = (0..ens.l_c)
                .map(|c| ens.block_variance(r, c) * sums[c])
                .sum::<f64>()
                * g2;
            out[self.row_offsets[r]..self.row_offsets[r + 1]].fill(val);
        }
        Ok(out)
    }

    fn sq_adjoint(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(self.m(), u.len())?;
        let ens = &self.recipe.ensemble;
        let sums = self.row_sums(u);
        let g2 = self.global_scale * self.global_scale;
        let mut out = vec![0.0; self.n()];
        for c in 0..ens.l_c {
            let val: f64 = (0..ens.l_r)
                .map(|r| ens.block_variance(r, c) * sums[r])
                .sum::<f64>()
                * g2;
            out[c * self.n_c..(c + 1) * self.n_c].fill(val);
        }
        Ok(out)
    }
}
