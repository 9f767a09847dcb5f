//! State evolution: deterministic recursions for the per-component MSE of
//! AMP on i.i.d. ensembles, scalar and block-coupled, and location of the
//! algorithmic phase transition by bisection.
//!
//! Matrices are described by `κ = N · Var(F_μi)` on unit-variance blocks.
//! For compressed sensing `κ = 1`, so the uncoupled effective noise is
//! `Σ² = (Δ + E)/α`; in general `Σ² = (Δ + κE)/(κα)`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::coupled::CouplingEnsemble;
use crate::denoise::{gb_complex, gb_real, section_denoise_into, GaussBernoulliPrior};
use crate::error::{check_len, Error, Result};
use crate::quad::{integrate, GaussHermite};

/// Nodes per dimension of the Gauss-Hermite rule.
pub const DEFAULT_NODES: usize = 61;
pub const DEFAULT_SECTION_SAMPLES: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SePrior {
    Real(GaussBernoulliPrior),
    Complex(GaussBernoulliPrior),
    /// One-hot sections of size `section_size`; the expectation over the
    /// section is taken by Monte-Carlo with a fixed seed.
    Section {
        section_size: usize,
        samples: usize,
        seed: u64,
    },
}

impl SePrior {
    pub fn section(section_size: usize) -> Self {
        SePrior::Section {
            section_size,
            samples: DEFAULT_SECTION_SAMPLES,
            seed: 0,
        }
    }

    /// Per-component MSE of the all-prior-mean-free starting point used by
    /// the solver (`a = 0` for Gauss-Bernoulli, `a = 1/B` for sections).
    pub fn initial_mse(&self) -> f64 {
        match self {
            SePrior::Real(p) => p.second_moment(false),
            SePrior::Complex(p) => p.second_moment(true) / 2.0,
            SePrior::Section { section_size, .. } => {
                let b = *section_size as f64;
                (1.0 / b) * (1.0 - 1.0 / b)
            }
        }
    }
}

/// Integration rule for the Gaussian expectations of the Gauss-Bernoulli
/// MMSE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    /// Adaptive Gauss-Kronrod on `[-Z_MAX, Z_MAX]` per Gaussian dimension,
    /// radial for centred complex slabs.
    Adaptive,
    /// Fixed Gauss-Hermite rule with the given number of nodes per dimension.
    Hermite(usize),
}

const Z_MAX: f64 = 10.0;
const PANELS: usize = 16;
const REL_TOL: f64 = 1e-11;

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Evaluates `mmse(Σ²) = E[f_c(Σ², x + Σ z)]` for a fixed prior.
#[derive(Debug, Clone)]
pub struct StateEvolution {
    prior: SePrior,
    quadrature: Quadrature,
    rule: GaussHermite,
}

impl StateEvolution {
    pub fn new(prior: SePrior) -> Self {
        Self::with_quadrature(prior, Quadrature::Adaptive)
    }

    pub fn with_quadrature(prior: SePrior, quadrature: Quadrature) -> Self {
        let nodes = match quadrature {
            Quadrature::Hermite(n) => n,
            Quadrature::Adaptive => DEFAULT_NODES,
        };
        Self {
            prior,
            quadrature,
            rule: GaussHermite::new(nodes),
        }
    }

    pub fn prior(&self) -> &SePrior {
        &self.prior
    }

    /// `E[g(Z)]`, `Z ~ N(0, 1)`, under the selected rule; `tol` is absolute.
    fn expect(&self, g: impl Fn(f64) -> Result<f64>, tol: f64) -> Result<f64> {
        let mut err = None;
        let mut eval = |z: f64| match g(z) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        };
        let v = match self.quadrature {
            Quadrature::Hermite(_) => self.rule.expect(&mut eval),
            Quadrature::Adaptive => integrate(|z| [eval(z) * std_normal_pdf(z)], -Z_MAX, Z_MAX, PANELS, tol)[0],
        };
        err.map_or(Ok(v), Err)
    }

    /// `E[g(Z₁ + i Z₂)]` for independent standard normals.
    fn expect2(&self, g: impl Fn(Complex64) -> Result<f64>, tol: f64) -> Result<f64> {
        match self.quadrature {
            Quadrature::Hermite(_) => {
                let gh = &self.rule;
                let mut total = 0.0;
                for (&z1, &w1) in gh.nodes.iter().zip(&gh.weights) {
                    for (&z2, &w2) in gh.nodes.iter().zip(&gh.weights) {
                        total += w1 * w2 * g(Complex64::new(z1, z2))?;
                    }
                }
                Ok(total)
            }
            Quadrature::Adaptive => self.expect(|z1| self.expect(|z2| g(Complex64::new(z1, z2)), tol), tol),
        }
    }

    /// `E[g(|Z₁ + i Z₂|)]`; the modulus has density `r e^{−r²/2}`.
    fn expect_radial(&self, g: impl Fn(f64) -> Result<f64>, tol: f64) -> Result<f64> {
        let mut err = None;
        let v = integrate(
            |r| match g(r) {
                Ok(v) => [v * r * (-0.5 * r * r).exp()],
                Err(e) => {
                    err.get_or_insert(e);
                    [0.0]
                }
            },
            0.0,
            Z_MAX,
            PANELS,
            tol,
        )[0];
        err.map_or(Ok(v), Err)
    }

    /// Expected posterior variance per component at effective noise `Σ²`.
    pub fn mmse(&self, sigma2: f64) -> Result<f64> {
        if sigma2 == 0.0 {
            return Ok(0.0);
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::Domain(format!("effective noise {sigma2} is not usable")));
        }
        match &self.prior {
            SePrior::Real(p) => {
                let s = sigma2.sqrt();
                let slab_sd = (p.sigma2 + sigma2).sqrt();
                let tol = REL_TOL * sigma2.min(p.sigma2);
                let spike = self.expect(|z| Ok(gb_real(sigma2, s * z, p)?.v), tol)?;
                let slab = self.expect(|z| Ok(gb_real(sigma2, p.xbar.re + slab_sd * z, p)?.v), tol)?;
                Ok((1.0 - p.rho) * spike + p.rho * slab)
            }
            SePrior::Complex(p) => {
                let s = sigma2.sqrt();
                let slab_sd = (p.sigma2 + sigma2).sqrt();
                let tol = REL_TOL * sigma2.min(p.sigma2);
                let f = |r: Complex64| Ok(gb_complex(sigma2, r, p)?.v);
                let centred = p.xbar == Complex64::new(0.0, 0.0);
                let (spike, slab) = if centred && self.quadrature == Quadrature::Adaptive {
                    (
                        self.expect_radial(|r| f(Complex64::new(s * r, 0.0)), tol)?,
                        self.expect_radial(|r| f(Complex64::new(slab_sd * r, 0.0)), tol)?,
                    )
                } else {
                    (
                        self.expect2(|z| f(z * s), tol)?,
                        self.expect2(|z| f(p.xbar + z * slab_sd), tol)?,
                    )
                };
                Ok((1.0 - p.rho) * spike + p.rho * slab)
            }
            SePrior::Section {
                section_size,
                samples,
                seed,
            } => section_mmse(*section_size, sigma2, *samples, *seed),
        }
    }
}

/// Monte-Carlo section MMSE; the transmitted symbol is taken to be the first
/// by symmetry.
fn section_mmse(b: usize, sigma2: f64, samples: usize, seed: u64) -> Result<f64> {
    if b == 0 || samples == 0 {
        return Err(Error::Domain("section size and sample count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = sigma2.sqrt();
    let sig = vec![sigma2; b];
    let mut r = vec![0.0; b];
    let mut a = vec![0.0; b];
    let mut v = vec![0.0; b];
    let mut total = 0.0;
    for _ in 0..samples {
        for (i, ri) in r.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *ri = if i == 0 { 1.0 } else { 0.0 } + s * z;
        }
        section_denoise_into(&sig, &r, &mut a, &mut v)?;
        total += v.iter().sum::<f64>();
    }
    Ok(total / (samples * b) as f64)
}

/// Plain Monte-Carlo estimate of the Gauss-Bernoulli MMSE integral, with the
/// spike/slab mixture weights applied exactly. Independent of the
/// Gauss-Hermite path; used to cross-check it.
pub fn mmse_monte_carlo(prior: &SePrior, sigma2: f64, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    match prior {
        SePrior::Real(p) => {
            let (mut spike, mut slab) = (0.0, 0.0);
            for _ in 0..samples {
                spike += gb_real(sigma2, sigma2.sqrt() * normal(), p)?.v;
                let x = p.xbar.re + p.sigma2.sqrt() * normal();
                slab += gb_real(sigma2, x + sigma2.sqrt() * normal(), p)?.v;
            }
            Ok(((1.0 - p.rho) * spike + p.rho * slab) / samples as f64)
        }
        SePrior::Complex(p) => {
            let (mut spike, mut slab) = (0.0, 0.0);
            for _ in 0..samples {
                let noise = Complex64::new(normal(), normal()) * sigma2.sqrt();
                spike += gb_complex(sigma2, noise, p)?.v;
                let x = p.xbar + Complex64::new(normal(), normal()) * p.sigma2.sqrt();
                let noise = Complex64::new(normal(), normal()) * sigma2.sqrt();
                slab += gb_complex(sigma2, x + noise, p)?.v;
            }
            Ok(((1.0 - p.rho) * spike + p.rho * slab) / samples as f64)
        }
        SePrior::Section { section_size, .. } => section_mmse(*section_size, sigma2, samples, seed),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeParams {
    pub delta: f64,
    pub alpha: f64,
    /// `N · Var(F_μi)`; 1 for compressed sensing.
    pub kappa: f64,
}

impl SeParams {
    pub fn new(delta: f64, alpha: f64) -> Self {
        Self {
            delta,
            alpha,
            kappa: 1.0,
        }
    }

    pub fn effective_noise(&self, e: f64) -> f64 {
        (self.delta + self.kappa * e) / (self.kappa * self.alpha)
    }
}

/// Block-coupled SE parameters: column fractions `n_p`, block-row rates
/// `α_q` and the variance pattern `J_qp` (`L_r × L_c`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledSeParams {
    pub delta: f64,
    pub kappa: f64,
    pub n: Vec<f64>,
    pub alpha_q: Vec<f64>,
    pub j: Vec<Vec<f64>>,
}

impl CoupledSeParams {
    pub fn from_ensemble(ensemble: &CouplingEnsemble, delta: f64, kappa: f64) -> Result<Self> {
        let (seed, rest) = ensemble.alpha_rates()?;
        Ok(Self {
            delta,
            kappa,
            n: vec![1.0 / ensemble.l_c as f64; ensemble.l_c],
            alpha_q: (0..ensemble.l_r).map(|q| if q == 0 { seed } else { rest }).collect(),
            j: ensemble.variance_pattern(),
        })
    }

    /// Uncoupled parameters as a 1×1 grid.
    pub fn uncoupled(params: &SeParams) -> Self {
        Self {
            delta: params.delta,
            kappa: params.kappa,
            n: vec![1.0],
            alpha_q: vec![params.alpha],
            j: vec![vec![1.0]],
        }
    }

    pub fn blocks(&self) -> usize {
        self.n.len()
    }

    /// `Σ_p² = [κ n_p Σ_q α_q J_qp / (Δ + κ Σ_r n_r J_qr E_r)]⁻¹`.
    pub fn effective_noise(&self, e: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n.len(), e.len())?;
        let denom: Vec<f64> = self
            .j
            .iter()
            .map(|row| {
                self.delta
                    + self.kappa * row.iter().zip(&self.n).zip(e).map(|((j, n), e)| n * j * e).sum::<f64>()
            })
            .collect();
        Ok((0..self.n.len())
            .map(|p| {
                let prec: f64 = self
                    .j
                    .iter()
                    .zip(&self.alpha_q)
                    .zip(&denom)
                    .map(|((row, aq), d)| if row[p] == 0.0 { 0.0 } else { aq * row[p] / d })
                    .sum();
                1.0 / (self.kappa * self.n[p] * prec)
            })
            .collect())
    }
}

pub fn se_step_scalar(se: &StateEvolution, e: f64, params: &SeParams) -> Result<f64> {
    if !(e >= 0.0) {
        return Err(Error::Domain(format!("MSE must be nonnegative, got {e}")));
    }
    se.mmse(params.effective_noise(e))
}

pub fn se_step_coupled(se: &StateEvolution, e: &[f64], params: &CoupledSeParams) -> Result<Vec<f64>> {
    if e.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::Domain("block MSEs must be nonnegative".into()));
    }
    params
        .effective_noise(e)?
        .into_iter()
        .map(|s| if s.is_nan() { Ok(0.0) } else { se.mmse(s) })
        .collect()
}

/// `E^0, E^1, …, E^steps`.
pub fn se_trajectory(se: &StateEvolution, params: &SeParams, e0: f64, steps: usize) -> Result<Vec<f64>> {
    let mut out = vec![e0];
    for _ in 0..steps {
        let next = se_step_scalar(se, *out.last().unwrap(), params)?;
        out.push(next);
    }
    Ok(out)
}

pub fn se_trajectory_coupled(
    se: &StateEvolution,
    params: &CoupledSeParams,
    e0: &[f64],
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![e0.to_vec()];
    for _ in 0..steps {
        let next = se_step_coupled(se, out.last().unwrap(), params)?;
        out.push(next);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPoint<E> {
    pub e: E,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterates until `|E^{t+1} − E^t| < tol` or `max_iter` steps.
pub fn se_fixed_point(
    se: &StateEvolution,
    params: &SeParams,
    e0: f64,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPoint<f64>> {
    let mut e = e0;
    for it in 1..=max_iter {
        let next = se_step_scalar(se, e, params)?;
        let diff = (next - e).abs();
        e = next;
        if diff < tol {
            return Ok(FixedPoint {
                e,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(FixedPoint {
        e,
        iterations: max_iter,
        converged: false,
    })
}

pub fn se_fixed_point_coupled(
    se: &StateEvolution,
    params: &CoupledSeParams,
    e0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<FixedPoint<Vec<f64>>> {
    let mut e = e0.to_vec();
    for it in 1..=max_iter {
        let next = se_step_coupled(se, &e, params)?;
        let diff = next.iter().zip(&e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        e = next;
        if diff < tol {
            return Ok(FixedPoint {
                e,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(FixedPoint {
        e,
        iterations: max_iter,
        converged: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdOptions {
    /// Final bracket width.
    pub width: f64,
    /// A fixed point below this MSE counts as reconstruction.
    pub success_mse: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self {
            width: 1e-4,
            success_mse: 1e-7,
            tol: 1e-13,
            max_iter: 100_000,
        }
    }
}

/// Whether SE started from the prior reaches the low-error fixed point.
pub fn se_succeeds(se: &StateEvolution, params: &SeParams, opts: &ThresholdOptions) -> Result<bool> {
    let fp = se_fixed_point(se, params, se.prior().initial_mse(), opts.tol, opts.max_iter)?;
    Ok(fp.e < opts.success_mse)
}

/// Lowest measurement rate at which SE reaches the low-error fixed point,
/// by bisection on `α` inside `[lo, hi]`.
pub fn find_bp_threshold(
    se: &StateEvolution,
    delta: f64,
    kappa: f64,
    bracket: (f64, f64),
    opts: &ThresholdOptions,
) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    let ok = |alpha: f64| se_succeeds(se, &SeParams { delta, alpha, kappa }, opts);
    if !(lo < hi) || ok(lo)? || !ok(hi)? {
        return Err(Error::Bracket { lo, hi });
    }
    while hi - lo > opts.width {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
