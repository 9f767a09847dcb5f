//! Posterior mean (`f_a`) and variance (`f_c`) of one signal component given
//! pseudo-data `R = x + noise` of variance `Σ²` per real component.
//!
//! Gauss-Bernoulli mixture weights are evaluated in log space so small `Σ²`
//! never overflows; the section denoiser is a max-shifted softmax.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::field::Field;

/// `(1 − ρ) δ(x) + ρ N(x̄, σ²)`; in the complex case real and imaginary
/// parts share the support and each have variance `σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussBernoulliPrior {
    pub rho: f64,
    #[serde(default)]
    pub xbar: Complex64,
    pub sigma2: f64,
}

impl GaussBernoulliPrior {
    pub fn new(rho: f64, xbar: f64, sigma2: f64) -> Self {
        Self {
            rho,
            xbar: Complex64::new(xbar, 0.0),
            sigma2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Domain(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::Domain(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        Ok(())
    }

    /// Mean squared norm of a component, `ρ(σ²·d + |x̄|²)` with `d` real
    /// dimensions.
    pub fn second_moment(&self, complex: bool) -> f64 {
        let d = if complex { 2.0 } else { 1.0 };
        self.rho * (d * self.sigma2 + self.xbar.norm_sqr())
    }
}

/// One-hot sections: `sections` blocks of `section_size` entries, exactly
/// one of which equals 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionPrior {
    pub sections: usize,
    pub section_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiserOut<T> {
    pub a: T,
    pub v: f64,
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("Sigma2 must be positive and finite, got {sigma2}")))
    }
}

/// Posterior weight of the slab given the two log-weights.
fn slab_weight(log_spike: f64, log_slab: f64) -> f64 {
    if log_spike == f64::NEG_INFINITY {
        return 1.0;
    }
    if log_slab == f64::NEG_INFINITY {
        return 0.0;
    }
    let d = log_spike - log_slab;
    if d > 0.0 {
        let e = (-d).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + d.exp())
    }
}

/// Real Gauss-Bernoulli denoiser.
pub fn gb_real(sigma2: f64, r: f64, prior: &GaussBernoulliPrior) -> Result<DenoiserOut<f64>> {
    check_sigma2(sigma2)?;
    let (rho, xbar, s2) = (prior.rho, prior.xbar.re, prior.sigma2);
    let total = sigma2 + s2;
    let m = (s2 * r + sigma2 * xbar) / total;
    let chi2 = sigma2 * s2 / total;
    let log_spike = (1.0 - rho).ln() + 0.5 * s2.ln() - r * r / (2.0 * sigma2);
    let log_slab = rho.ln() + 0.5 * chi2.ln() - (r - xbar).powi(2) / (2.0 * total);
    let p = slab_weight(log_spike, log_slab);
    Ok(DenoiserOut {
        a: p * m,
        v: p * chi2 + p * (1.0 - p) * m * m,
    })
}

/// Complex Gauss-Bernoulli denoiser with jointly sparse real and imaginary
/// parts. The returned variance is per real component.
pub fn gb_complex(
    sigma2: f64,
    r: Complex64,
    prior: &GaussBernoulliPrior,
) -> Result<DenoiserOut<Complex64>> {
    check_sigma2(sigma2)?;
    let (rho, xbar, s2) = (prior.rho, prior.xbar, prior.sigma2);
    let total = sigma2 + s2;
    let m = (r * s2 + xbar * sigma2) / total;
    let chi2 = sigma2 * s2 / total;
    let log_spike = (1.0 - rho).ln() + s2.ln() - r.norm_sqr() / (2.0 * sigma2);
    let log_slab = rho.ln() + chi2.ln() - (r - xbar).norm_sqr() / (2.0 * total);
    let p = slab_weight(log_spike, log_slab);
    Ok(DenoiserOut {
        a: m * p,
        v: (2.0 * p * chi2 + p * (1.0 - p) * m.norm_sqr()) / 2.0,
    })
}

/// Section denoiser: `a_i ∝ exp(−(1 − 2R_i)/(2Σ_i²))` normalized over the
/// section, `v_i = a_i (1 − a_i)`. Writes into `a` and `v`.
pub fn section_denoise_into(sigma2: &[f64], r: &[f64], a: &mut [f64], v: &mut [f64]) -> Result<()> {
    check_len(sigma2.len(), r.len())?;
    check_len(r.len(), a.len())?;
    check_len(r.len(), v.len())?;
    let mut max = f64::NEG_INFINITY;
    for (ai, (&s, &ri)) in a.iter_mut().zip(sigma2.iter().zip(r)) {
        check_sigma2(s)?;
        *ai = (2.0 * ri - 1.0) / (2.0 * s);
        max = max.max(*ai);
    }
    let mut z = 0.0;
    for ai in a.iter_mut() {
        *ai = (*ai - max).exp();
        z += *ai;
    }
    for (ai, vi) in a.iter_mut().zip(v.iter_mut()) {
        *ai /= z;
        *vi = *ai * (1.0 - *ai);
    }
    Ok(())
}

pub fn section_denoise(sigma2: &[f64], r: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut a = vec![0.0; r.len()];
    let mut v = vec![0.0; r.len()];
    section_denoise_into(sigma2, r, &mut a, &mut v)?;
    Ok((a, v))
}

/// Scalar fields a Gauss-Bernoulli prior can be instantiated over.
pub trait GbField: Field {
    fn gb_denoise(sigma2: f64, r: Self, prior: &GaussBernoulliPrior) -> Result<DenoiserOut<Self>>;
    fn sample_gb(prior: &GaussBernoulliPrior, rng: &mut ChaCha8Rng) -> Self;
    /// Initial per-component variance when the estimate starts at zero.
    fn initial_variance(prior: &GaussBernoulliPrior) -> f64;
}

impl GbField for f64 {
    fn gb_denoise(sigma2: f64, r: f64, prior: &GaussBernoulliPrior) -> Result<DenoiserOut<f64>> {
        gb_real(sigma2, r, prior)
    }

    fn sample_gb(prior: &GaussBernoulliPrior, rng: &mut ChaCha8Rng) -> f64 {
        if rng.random::<f64>() < prior.rho {
            let z: f64 = StandardNormal.sample(rng);
            prior.xbar.re + prior.sigma2.sqrt() * z
        } else {
            0.0
        }
    }

    fn initial_variance(prior: &GaussBernoulliPrior) -> f64 {
        prior.second_moment(false)
    }
}

impl GbField for Complex64 {
    fn gb_denoise(
        sigma2: f64,
        r: Complex64,
        prior: &GaussBernoulliPrior,
    ) -> Result<DenoiserOut<Complex64>> {
        gb_complex(sigma2, r, prior)
    }

    fn sample_gb(prior: &GaussBernoulliPrior, rng: &mut ChaCha8Rng) -> Complex64 {
        if rng.random::<f64>() < prior.rho {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            prior.xbar + Complex64::new(re, im) * prior.sigma2.sqrt()
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    fn initial_variance(prior: &GaussBernoulliPrior) -> f64 {
        prior.second_moment(true) / 2.0
    }
}

/// Vector-level denoiser used by the AMP loop.
pub trait Denoiser<T: Field>: Sync {
    /// Initial estimate and variance for a signal of length `n`.
    fn initial(&self, n: usize) -> Result<(Vec<T>, Vec<f64>)>;
    fn apply(&self, sigma2: &[f64], r: &[T], a: &mut [T], v: &mut [f64]) -> Result<()>;
}

impl<T: GbField> Denoiser<T> for GaussBernoulliPrior {
    fn initial(&self, n: usize) -> Result<(Vec<T>, Vec<f64>)> {
        self.validate()?;
        Ok((vec![T::zero(); n], vec![T::initial_variance(self); n]))
    }

    fn apply(&self, sigma2: &[f64], r: &[T], a: &mut [T], v: &mut [f64]) -> Result<()> {
        for (((&s, &ri), ai), vi) in sigma2.iter().zip(r).zip(a.iter_mut()).zip(v.iter_mut()) {
            let out = T::gb_denoise(s, ri, self)?;
            *ai = out.a;
            *vi = out.v;
        }
        Ok(())
    }
}

impl Denoiser<f64> for SectionPrior {
    fn initial(&self, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len(self.sections * self.section_size, n)?;
        if self.section_size == 0 {
            return Err(Error::Domain("section size must be positive".into()));
        }
        let p = 1.0 / self.section_size as f64;
        Ok((vec![p; n], vec![p * (1.0 - p); n]))
    }

    fn apply(&self, sigma2: &[f64], r: &[f64], a: &mut [f64], v: &mut [f64]) -> Result<()> {
        let b = self.section_size;
        check_len(self.sections * b, r.len())?;
        for (((s, rr), aa), vv) in sigma2
            .chunks_exact(b)
            .zip(r.chunks_exact(b))
            .zip(a.chunks_exact_mut(b))
            .zip(v.chunks_exact_mut(b))
        {
            section_denoise_into(s, rr, aa, vv)?;
        }
        Ok(())
    }
}

/// Brute-force posteriors: numerical integration over the slab for
/// Gauss-Bernoulli priors, enumeration of candidates for sections.
pub mod oracle {
    use super::*;
    use crate::quad::integrate;

    fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
        -(x - mean).powi(2) / (2.0 * var) - 0.5 * (2.0 * std::f64::consts::PI * var).ln()
    }

    /// Posterior mean and variance under the real prior.
    pub fn posterior_real(
        prior: &GaussBernoulliPrior,
        sigma2: f64,
        r: f64,
    ) -> Result<DenoiserOut<f64>> {
        check_sigma2(sigma2)?;
        let (sd, s) = (prior.sigma2.sqrt(), sigma2.sqrt());
        let xbar = prior.xbar.re;
        let lo = (xbar - 14.0 * sd).min(r - 14.0 * s);
        let hi = (xbar + 14.0 * sd).max(r + 14.0 * s);
        let log_joint = |x: f64| log_normal(x, xbar, prior.sigma2) + log_normal(r, x, sigma2);
        let shift = (0..=4000)
            .map(|k| log_joint(lo + (hi - lo) * k as f64 / 4000.0))
            .fold(f64::NEG_INFINITY, f64::max);
        let [z1, m1, m2] = integrate(
            |x| {
                let p = (log_joint(x) - shift).exp();
                [p, x * p, x * x * p]
            },
            lo,
            hi,
            256,
            1e-14,
        );
        let spike = (1.0 - prior.rho) * (log_normal(r, 0.0, sigma2) - shift).exp();
        let z = spike + prior.rho * z1;
        let a = prior.rho * m1 / z;
        Ok(DenoiserOut {
            a,
            v: prior.rho * m2 / z - a * a,
        })
    }

    /// Posterior mean and per-component variance under the complex prior,
    /// by nested two-dimensional integration.
    pub fn posterior_complex(
        prior: &GaussBernoulliPrior,
        sigma2: f64,
        r: Complex64,
    ) -> Result<DenoiserOut<Complex64>> {
        check_sigma2(sigma2)?;
        let (sd, s) = (prior.sigma2.sqrt(), sigma2.sqrt());
        let xb = prior.xbar;
        let range = |c_prior: f64, c_obs: f64| {
            (
                (c_prior - 12.0 * sd).min(c_obs - 12.0 * s),
                (c_prior + 12.0 * sd).max(c_obs + 12.0 * s),
            )
        };
        let (lo1, hi1) = range(xb.re, r.re);
        let (lo2, hi2) = range(xb.im, r.im);
        let log_joint = |x1: f64, x2: f64| {
            log_normal(x1, xb.re, prior.sigma2)
                + log_normal(x2, xb.im, prior.sigma2)
                + log_normal(r.re, x1, sigma2)
                + log_normal(r.im, x2, sigma2)
        };
        let mut shift = f64::NEG_INFINITY;
        for i in 0..=300 {
            for j in 0..=300 {
                let x1 = lo1 + (hi1 - lo1) * i as f64 / 300.0;
                let x2 = lo2 + (hi2 - lo2) * j as f64 / 300.0;
                shift = shift.max(log_joint(x1, x2));
            }
        }
        let [z1, m_re, m_im, m2] = integrate(
            |x1| {
                integrate(
                    |x2| {
                        let p = (log_joint(x1, x2) - shift).exp();
                        [p, x1 * p, x2 * p, (x1 * x1 + x2 * x2) * p]
                    },
                    lo2,
                    hi2,
                    24,
                    1e-13,
                )
            },
            lo1,
            hi1,
            24,
            1e-13,
        );
        let spike = (1.0 - prior.rho)
            * (log_normal(r.re, 0.0, sigma2) + log_normal(r.im, 0.0, sigma2) - shift).exp();
        let z = spike + prior.rho * z1;
        let a = Complex64::new(m_re, m_im) * (prior.rho / z);
        Ok(DenoiserOut {
            a,
            v: (prior.rho * m2 / z - a.norm_sqr()) / 2.0,
        })
    }

    /// Exact posterior over the `B` one-hot candidates of a section.
    pub fn posterior_section(sigma2: &[f64], r: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len(sigma2.len(), r.len())?;
        for &s in sigma2 {
            check_sigma2(s)?;
        }
        let b = r.len();
        let log_w: Vec<f64> = (0..b)
            .map(|k| {
                (0..b)
                    .map(|i| {
                        let x = if i == k { 1.0 } else { 0.0 };
                        -(r[i] - x).powi(2) / (2.0 * sigma2[i])
                    })
                    .sum()
            })
            .collect();
        let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = w.iter().sum();
        let mut mean = vec![0.0; b];
        let mut second = vec![0.0; b];
        for (k, wk) in w.iter().enumerate() {
            mean[k] += wk / z;
            second[k] += wk / z;
        }
        let var = mean.iter().zip(&second).map(|(m, s)| s - m * m).collect();
        Ok((mean, var))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prior() -> GaussBernoulliPrior {
        GaussBernoulliPrior::new(0.1, 0.0, 1.0)
    }

    #[test]
    fn complex_dense_prior_is_gaussian_posterior() {
        let p = GaussBernoulliPrior::new(1.0, 0.0, 1.0);
        let out = gb_complex(1.0, Complex64::new(1.0, 0.0), &p).unwrap();
        assert!((out.a - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((out.v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn real_dense_prior_is_gaussian_posterior() {
        let p = GaussBernoulliPrior::new(1.0, 0.7, 2.0);
        let (s2, r) = (0.3, -1.1);
        let out = gb_real(s2, r, &p).unwrap();
        assert!((out.a - (2.0 * r + s2 * 0.7) / (s2 + 2.0)).abs() < 1e-15);
        assert!((out.v - s2 * 2.0 / (s2 + 2.0)).abs() < 1e-15);
    }

    #[test]
    fn symmetric_inputs_give_zero_mean() {
        assert_eq!(gb_real(0.4, 0.0, &prior()).unwrap().a, 0.0);
        assert_eq!(gb_complex(0.4, Complex64::new(0.0, 0.0), &prior()).unwrap().a.norm(), 0.0);
    }

    #[test]
    fn nonpositive_sigma_is_a_domain_error() {
        assert!(matches!(gb_real(0.0, 1.0, &prior()), Err(Error::Domain(_))));
        assert!(gb_complex(-1.0, Complex64::new(0.0, 0.0), &prior()).is_err());
        assert!(section_denoise(&[1.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn tiny_sigma_does_not_overflow() {
        for r in [-30.0, -1.0, 0.0, 1e-9, 2.0, 50.0] {
            let out = gb_real(1e-17, r, &prior()).unwrap();
            assert!(out.a.is_finite() && out.v.is_finite() && out.v >= 0.0);
            let out = gb_complex(1e-17, Complex64::new(r, -r), &prior()).unwrap();
            assert!(out.a.is_finite() && out.v.is_finite() && out.v >= 0.0);
        }
        let (a, _) = section_denoise(&[1e-12; 3], &[0.2, 0.9, 0.1]).unwrap();
        assert_eq!(a, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn section_symmetry_and_normalization() {
        let (a, v) = section_denoise(&[0.5, 0.5], &[0.3, 0.3]).unwrap();
        assert_eq!(a, vec![0.5, 0.5]);
        assert_eq!(v, vec![0.25, 0.25]);
        let (a, _) = section_denoise(&[1.0; 4], &[0.9, 0.1, 0.2, 0.3]).unwrap();
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn section_matches_enumeration_on_printed_case() {
        let s = [1.0; 4];
        let r = [0.9, 0.1, 0.2, 0.3];
        let (a, v) = section_denoise(&s, &r).unwrap();
        let (ea, ev) = oracle::posterior_section(&s, &r).unwrap();
        // softmax of (2R − 1)/2 evaluated by hand: exp(R_i) / sum_j exp(R_j)
        let z: f64 = r.iter().map(|x| x.exp()).sum();
        for i in 0..4 {
            assert!((a[i] - ea[i]).abs() < 1e-12);
            assert!((v[i] - ev[i]).abs() < 1e-12);
            assert!((a[i] - r[i].exp() / z).abs() < 1e-12);
        }
    }

    #[test]
    fn real_denoiser_matches_oracle_on_printed_case() {
        let out = gb_real(0.25, 0.8, &prior()).unwrap();
        let o = oracle::posterior_real(&prior(), 0.25, 0.8).unwrap();
        assert!((out.a - o.a).abs() < 1e-10, "{} vs {}", out.a, o.a);
        assert!((out.v - o.v).abs() < 1e-10);
    }

    #[test]
    fn complex_denoiser_matches_oracle_on_printed_case() {
        let r = Complex64::new(0.8, 0.3);
        let out = gb_complex(0.25, r, &prior()).unwrap();
        let o = oracle::posterior_complex(&prior(), 0.25, r).unwrap();
        assert!((out.a - o.a).norm() < 1e-8, "{} vs {}", out.a, o.a);
        assert!((out.v - o.v).abs() < 1e-8);
    }

    #[test]
    fn variance_is_sigma_times_mean_derivative() {
        let p = GaussBernoulliPrior::new(0.2, 0.3, 1.5);
        for &s2 in &[0.05, 0.3, 1.0, 4.0] {
            for k in -20..=20 {
                let r = k as f64 * 0.2;
                let h = 1e-5;
                let d = (gb_real(s2, r + h, &p).unwrap().a - gb_real(s2, r - h, &p).unwrap().a)
                    / (2.0 * h);
                let v = gb_real(s2, r, &p).unwrap().v;
                assert!((v - s2 * d).abs() < 1e-6, "s2={s2} r={r}: {v} vs {}", s2 * d);
            }
        }
    }

    #[test]
    fn section_prior_initial_state() {
        let sp = SectionPrior {
            sections: 3,
            section_size: 4,
        };
        let (a, v) = Denoiser::<f64>::initial(&sp, 12).unwrap();
        assert!(a.iter().all(|&x| x == 0.25));
        assert!(v.iter().all(|&x| x == 0.1875));
    }

    #[test]
    fn gb_initial_variance() {
        let (a, v) = Denoiser::<f64>::initial(&prior(), 5).unwrap();
        assert!(a.iter().all(|&x| x == 0.0));
        assert!(v.iter().all(|&x| (x - 0.1).abs() < 1e-15));
    }
}
