//! Upper bounds on the divergence an `N`-particle weight vector can carry,
//! and the necessary sample sizes they imply.
//!
//! With `N` particles the discrete divergence between the (unnormalized)
//! weights and the uniform vector is at most `U_f(N, ε)`. When the true
//! divergence exceeds `U_f(N, ε) + δ`, at least one of the two accuracy
//! conditions (mass ≤ 1 + ε, divergence estimate within δ) fails with
//! probability at least one half.

use serde::Serialize;

use crate::divergence::DivergenceValue;
use crate::error::{check_nonnegative, check_positive, Error, Result};
use crate::generator::{ConvexGenerator, DivergenceKind};

/// Probability level attached to every threshold.
pub const FAILURE_PROBABILITY: f64 = 0.5;

/// Largest sample size searched by [`generic_necessary_n`].
pub const MAX_SAMPLE_SIZE: u64 = 1 << 63;

/// Up to this size the monotonicity of `U_f(·, ε)` is checked at every integer.
const EXHAUSTIVE_MONOTONE_CHECK: u64 = 1 << 16;

/// Mass tolerance `ε` (condition i) and divergence tolerance `δ` (condition ii).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ToleranceBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl ToleranceBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        check_positive("epsilon", epsilon)?;
        check_positive("delta", delta)?;
        Ok(ToleranceBudget { epsilon, delta })
    }

    /// Budget whose divergence tolerance is relative: `δ = δ* · divergence`.
    pub fn relative(epsilon: f64, delta_star: f64, divergence: f64) -> Result<Self> {
        check_positive("delta_star", delta_star)?;
        check_positive("divergence", divergence)?;
        ToleranceBudget::new(epsilon, delta_star * divergence)
    }
}

impl Default for ToleranceBudget {
    fn default() -> Self {
        ToleranceBudget {
            epsilon: 0.1,
            delta: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleSizeReport {
    pub metric: DivergenceKind,
    pub divergence: DivergenceValue,
    /// Sizes strictly below this fail with probability ≥ `failure_probability`.
    pub threshold: f64,
    pub budget: ToleranceBudget,
    pub failure_probability: f64,
}

impl SampleSizeReport {
    /// `max(1, ⌈threshold⌉)`, or `None` when the threshold is infinite.
    pub fn necessary_n_integer(&self) -> Option<u64> {
        threshold_to_integer(self.threshold)
    }
}

pub fn threshold_to_integer(threshold: f64) -> Option<u64> {
    if threshold.is_infinite() {
        None
    } else {
        Some(threshold.ceil().max(1.0) as u64)
    }
}

fn check_size(n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "N",
            reason: "sample size must be at least 1".into(),
        });
    }
    Ok(n as f64)
}

/// `(f(N) + (N − 1) f(0)) / N`.
pub fn u_f(n: u64, f: &ConvexGenerator) -> Result<f64> {
    u_f_eps(n, 0.0, f)
}

/// `(f((1 + ε) N) + (N − 1) f(0)) / N`, the bound for weight vectors of mass `1 + ε`.
pub fn u_f_eps(n: u64, epsilon: f64, f: &ConvexGenerator) -> Result<f64> {
    let nf = check_size(n)?;
    check_nonnegative("epsilon", epsilon)?;
    Ok(u_f_eps_unchecked(nf, epsilon, f))
}

fn u_f_eps_unchecked(n: f64, epsilon: f64, f: &ConvexGenerator) -> f64 {
    (f.apply((1.0 + epsilon) * n) + (n - 1.0) * f.value_at_zero()) / n
}

/// The same bound from its simplified per-metric expression.
pub fn u_f_symbolic(kind: DivergenceKind, n: u64, epsilon: f64) -> Result<f64> {
    let n = check_size(n)?;
    let e = check_nonnegative("epsilon", epsilon)?;
    Ok(match kind {
        DivergenceKind::KullbackLeibler => (1.0 + e) * (n * (1.0 + e)).ln(),
        DivergenceKind::ChiSquared => n * (1.0 + e) * (1.0 + e) - (1.0 + 2.0 * e),
        DivergenceKind::TotalVariation => 1.0 - 1.0 / n + e / 2.0,
        DivergenceKind::SquaredHellinger => 2.0 * (1.0 - ((1.0 + e) / n).sqrt() + e / 2.0),
    })
}

/// Smallest `N` for which an MSE of at most `c` is possible, given the
/// divergence `d` of the target from the proposal.
pub fn mse_necessary_n(c: f64, d: f64, metric: DivergenceKind) -> Result<f64> {
    check_positive("C", c)?;
    if d.is_nan() || d < 0.0 {
        return Err(Error::NegativeOrNonFinite { what: "divergence", value: d });
    }
    Ok(match metric {
        DivergenceKind::ChiSquared => d / c,
        DivergenceKind::KullbackLeibler => d.exp_m1() / c,
        DivergenceKind::TotalVariation => 4.0 * d * d / c,
        DivergenceKind::SquaredHellinger => d / c,
    })
}

/// Whether `d_f ≤ U_f(N, ε) + δ`. An infinite divergence or `N = 0` never satisfies it.
pub fn sample_size_admissible(d_f: f64, n: u64, budget: &ToleranceBudget, f: &ConvexGenerator) -> bool {
    if n == 0 || d_f.is_nan() {
        return false;
    }
    d_f <= u_f_eps_unchecked(n as f64, budget.epsilon, f) + budget.delta
}

fn check_divergence(d: f64, metric: DivergenceKind) -> Result<f64> {
    if d.is_nan() || d < 0.0 {
        return Err(Error::NegativeOrNonFinite { what: "divergence", value: d });
    }
    if let Some(max) = metric.range_max() {
        if d > max {
            return Err(Error::OutOfRange {
                metric: metric.short_name(),
                value: d,
                max,
            });
        }
    }
    Ok(d)
}

/// Real threshold below which failure is guaranteed with probability ≥ 1/2.
/// Hellinger inputs are squared distances.
pub fn threshold(d: f64, metric: DivergenceKind, budget: &ToleranceBudget) -> Result<f64> {
    let d = check_divergence(d, metric)?;
    let (e, delta) = (budget.epsilon, budget.delta);
    if d.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(match metric {
        DivergenceKind::KullbackLeibler => ((d - delta) / (1.0 + e)).exp() / (1.0 + e),
        DivergenceKind::ChiSquared => (1.0 + 2.0 * e + d - delta) / ((1.0 + e) * (1.0 + e)),
        DivergenceKind::TotalVariation => 1.0 / (1.0 + e / 2.0 + delta - d),
        DivergenceKind::SquaredHellinger => {
            let gap = 2.0 + e + delta - d;
            4.0 * (1.0 + e) / (gap * gap)
        }
    })
}

pub fn necessary_n(d: &DivergenceValue, metric: DivergenceKind, budget: &ToleranceBudget) -> Result<SampleSizeReport> {
    Ok(SampleSizeReport {
        metric,
        divergence: *d,
        threshold: threshold(d.value, metric, budget)?,
        budget: *budget,
        failure_probability: FAILURE_PROBABILITY,
    })
}

/// Smallest `N` with `U_f(N, ε) + δ ≥ d_f`, for any generator.
///
/// Exponential search then bisection; `U_f(·, ε)` is checked to be
/// nondecreasing on `[1, 2·answer]` first, at every integer for small
/// answers and on a geometric grid beyond.
pub fn generic_necessary_n(d_f: f64, f: &ConvexGenerator, budget: &ToleranceBudget) -> Result<u64> {
    if d_f.is_nan() || d_f < 0.0 {
        return Err(Error::NegativeOrNonFinite { what: "divergence", value: d_f });
    }
    if d_f.is_infinite() {
        return Err(Error::NoSampleSize);
    }
    let holds = |n: u64| sample_size_admissible(d_f, n, budget, f);
    if holds(1) {
        return Ok(1);
    }
    let mut hi = 2u64;
    while !holds(hi) {
        if hi >= MAX_SAMPLE_SIZE {
            return Err(Error::NoSampleSize);
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    check_monotone(f, budget.epsilon, hi.saturating_mul(2))?;
    Ok(hi)
}

fn check_monotone(f: &ConvexGenerator, epsilon: f64, upto: u64) -> Result<()> {
    let value = |n: u64| u_f_eps_unchecked(n as f64, epsilon, f);
    let decreasing = |a: f64, b: f64| b < a - 1e-12 * a.abs().max(1.0);
    let mut prev_n = 1u64;
    let mut prev = value(1);
    let mut n = 2u64;
    while n <= upto {
        let cur = value(n);
        if decreasing(prev, cur) {
            return Err(Error::NonMonotoneBound(prev_n, n));
        }
        prev = cur;
        prev_n = n;
        n = if n < EXHAUSTIVE_MONOTONE_CHECK {
            n + 1
        } else {
            n.saturating_add((n / 64).max(1))
        };
    }
    Ok(())
}

/// Largest threshold a bounded metric can produce (its value at the range cap);
/// infinite for KL and `χ²`.
pub fn max_informative_n(metric: DivergenceKind, budget: &ToleranceBudget) -> f64 {
    let (e, delta) = (budget.epsilon, budget.delta);
    match metric {
        DivergenceKind::TotalVariation => 1.0 / (e / 2.0 + delta),
        DivergenceKind::SquaredHellinger => 4.0 * (1.0 + e) / ((e + delta) * (e + delta)),
        DivergenceKind::KullbackLeibler | DivergenceKind::ChiSquared => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget() -> ToleranceBudget {
        ToleranceBudget::default()
    }

    fn dv(v: f64) -> DivergenceValue {
        DivergenceValue::closed_form(v)
    }

    #[test]
    fn budget_validation() {
        assert!(ToleranceBudget::new(0.0, 0.1).is_err());
        assert!(ToleranceBudget::new(0.1, -1.0).is_err());
        assert!(ToleranceBudget::new(0.1, f64::NAN).is_err());
        let r = ToleranceBudget::relative(0.1, 0.05, 4.5).unwrap();
        assert!((r.delta - 0.225).abs() < 1e-15);
    }

    #[test]
    fn u_f_examples() {
        assert!((u_f(4, &ConvexGenerator::KL).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert_eq!(u_f(10, &ConvexGenerator::CHI2).unwrap(), 9.0);
        for kind in DivergenceKind::ALL {
            assert_eq!(u_f(1, &kind.into()).unwrap(), 0.0);
        }
        assert!(u_f(0, &ConvexGenerator::KL).is_err());
    }

    #[test]
    fn u_f_eps_examples() {
        let kl = u_f_eps(10, 0.1, &ConvexGenerator::KL).unwrap();
        assert!((kl - 1.1 * 11f64.ln()).abs() < 1e-14);
        assert!((kl - 2.637_685).abs() < 1e-6);
        assert!((u_f_eps(10, 0.1, &ConvexGenerator::CHI2).unwrap() - 10.9).abs() < 1e-12);
        assert!((u_f_eps(10, 0.1, &ConvexGenerator::TV).unwrap() - 0.95).abs() < 1e-15);
        assert!(u_f_eps(10, -0.1, &ConvexGenerator::KL).is_err());
        for kind in DivergenceKind::ALL {
            let f = kind.into();
            assert_eq!(u_f_eps(37, 0.0, &f).unwrap(), u_f(37, &f).unwrap());
        }
    }

    #[test]
    fn mse_examples() {
        let d = 4f64.exp_m1();
        assert!((mse_necessary_n(1.0, d, DivergenceKind::ChiSquared).unwrap() - d).abs() < 1e-12);
        assert_eq!(mse_necessary_n(1.0, 0.0, DivergenceKind::KullbackLeibler).unwrap(), 0.0);
        let tv = mse_necessary_n(0.01, 0.682_689, DivergenceKind::TotalVariation).unwrap();
        assert!((tv - 186.43).abs() < 0.01);
        assert!(mse_necessary_n(0.0, 1.0, DivergenceKind::ChiSquared).is_err());
        assert!(mse_necessary_n(1.0, f64::INFINITY, DivergenceKind::ChiSquared).unwrap().is_infinite());
    }

    #[test]
    fn admissibility_examples() {
        let b = budget();
        for kind in DivergenceKind::ALL {
            assert!(sample_size_admissible(0.0, 1, &b, &kind.into()));
            assert!(!sample_size_admissible(0.0, 0, &b, &kind.into()));
        }
        assert!(!sample_size_admissible(4.5, 49, &b, &ConvexGenerator::KL));
        assert!(sample_size_admissible(4.5, 50, &b, &ConvexGenerator::KL));
        assert!(!sample_size_admissible(f64::INFINITY, 1_000_000_000, &b, &ConvexGenerator::CHI2));
    }

    #[test]
    fn necessary_n_examples() {
        let b = budget();
        let r = necessary_n(&dv(2.0), DivergenceKind::KullbackLeibler, &b).unwrap();
        assert!((r.threshold - 5.11).abs() < 0.005);
        assert_eq!(r.necessary_n_integer(), Some(6));
        assert_eq!(r.failure_probability, 0.5);
        let h = necessary_n(&dv(1.350_703), DivergenceKind::SquaredHellinger, &b).unwrap();
        assert!((h.threshold - 6.10).abs() < 0.005);
        let c = necessary_n(&dv(f64::INFINITY), DivergenceKind::ChiSquared, &b).unwrap();
        assert!(c.threshold.is_infinite());
        assert_eq!(c.necessary_n_integer(), None);
        let k = necessary_n(&dv(9.861_589), DivergenceKind::KullbackLeibler, &b).unwrap();
        assert!((k.threshold / 6494.0 - 1.0).abs() < 1e-3, "{}", k.threshold);
    }

    #[test]
    fn necessary_n_rejects_out_of_range() {
        let b = budget();
        assert!(necessary_n(&dv(1.01), DivergenceKind::TotalVariation, &b).is_err());
        assert!(necessary_n(&dv(2.01), DivergenceKind::SquaredHellinger, &b).is_err());
        assert!(necessary_n(&dv(-0.1), DivergenceKind::KullbackLeibler, &b).is_err());
        assert!(necessary_n(&dv(f64::NAN), DivergenceKind::ChiSquared, &b).is_err());
    }

    #[test]
    fn generic_examples() {
        let b = budget();
        for kind in DivergenceKind::ALL {
            assert_eq!(generic_necessary_n(0.0, &kind.into(), &b).unwrap(), 1);
        }
        assert_eq!(generic_necessary_n(2.0, &ConvexGenerator::KL, &b).unwrap(), 6);
        let tight = ToleranceBudget::new(0.01, 0.01).unwrap();
        assert_eq!(generic_necessary_n(0.99, &ConvexGenerator::TV, &tight).unwrap(), 40);
        assert_eq!(generic_necessary_n(f64::INFINITY, &ConvexGenerator::KL, &b), Err(Error::NoSampleSize));
    }

    #[test]
    fn generic_reports_unreachable_divergence() {
        // TV can never exceed 1 - 1/N + ε/2 + δ → 1.015 at the cap.
        let tight = ToleranceBudget::new(0.01, 0.01).unwrap();
        assert_eq!(generic_necessary_n(1.2, &ConvexGenerator::TV, &tight), Err(Error::NoSampleSize));
    }

    #[test]
    fn relative_delta_identity() {
        let d = 4.5;
        let rel = ToleranceBudget::relative(0.1, 0.05, d).unwrap();
        let abs = ToleranceBudget::new(0.1, 0.05 * d).unwrap();
        let a = necessary_n(&dv(d), DivergenceKind::KullbackLeibler, &rel).unwrap();
        let b = necessary_n(&dv(d), DivergenceKind::KullbackLeibler, &abs).unwrap();
        assert_eq!(a.threshold, b.threshold);
    }

    #[test]
    fn max_informative_examples() {
        let b = budget();
        assert!((max_informative_n(DivergenceKind::TotalVariation, &b) - 1.0 / 0.15).abs() < 1e-12);
        assert!((max_informative_n(DivergenceKind::SquaredHellinger, &b) - 110.0).abs() < 1e-9);
        assert!(max_informative_n(DivergenceKind::KullbackLeibler, &b).is_infinite());
        assert!(max_informative_n(DivergenceKind::ChiSquared, &b).is_infinite());
        // Same as the threshold at the range cap.
        let tv = threshold(1.0, DivergenceKind::TotalVariation, &b).unwrap();
        assert!((tv - max_informative_n(DivergenceKind::TotalVariation, &b)).abs() < 1e-12);
        let h = threshold(2.0, DivergenceKind::SquaredHellinger, &b).unwrap();
        assert!((h - max_informative_n(DivergenceKind::SquaredHellinger, &b)).abs() < 1e-9);
    }
}
