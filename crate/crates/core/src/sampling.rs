//! Plain (not autonormalized) importance sampling: particles, weights
//! `wⁿ = g(vⁿ)/N`, estimates, effective sample sizes and the two-condition
//! breakdown experiment.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::ToleranceBudget;
use crate::divergence::{neumaier_sum, ProbabilityVector};
use crate::error::{Error, Result};
use crate::gaussian::DensityRatioModel;
use crate::generator::ConvexGenerator;
use crate::quadrature::{integrate_line, LineIntegral, QuadratureSpec};
use crate::rng::{derive_seed, stream_rng};

/// Particles drawn from the proposal with their importance weights.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightedEmpiricalMeasure {
    particles: Vec<f64>,
    weights: Vec<f64>,
    seed: u64,
}

impl WeightedEmpiricalMeasure {
    pub fn particles(&self) -> &[f64] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// `π^N(1) = Σ wⁿ`.
    pub fn total_mass(&self) -> f64 {
        neumaier_sum(self.weights.iter().copied())
    }

    /// Recomputes every weight from `model` and compares (relative 1e-12).
    pub fn verify_weights<M: DensityRatioModel + ?Sized>(&self, model: &M) -> bool {
        let n = self.len();
        self.particles.iter().zip(&self.weights).all(|(&v, &w)| match weight(model.log_ratio(v), n) {
            Some(expected) => (expected - w).abs() <= 1e-12 * expected.abs(),
            None => false,
        })
    }
}

/// `exp(log_ratio) / n`, or `None` when it overflows.
fn weight(log_ratio: f64, n: usize) -> Option<f64> {
    let g = log_ratio.exp();
    let w = if g.is_finite() {
        g / n as f64
    } else {
        (log_ratio - (n as f64).ln()).exp()
    };
    w.is_finite().then_some(w)
}

#[derive(Clone)]
pub struct TestFunction {
    label: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl TestFunction {
    pub fn new<F>(label: impl Into<String>, eval: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        TestFunction {
            label: label.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn constant(c: f64) -> Self {
        TestFunction::new(format!("const({c})"), move |_| c)
    }

    pub fn identity() -> Self {
        TestFunction::new("x", |x| x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction").field("label", &self.label).finish()
    }
}

fn check_particle_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "N",
            reason: "need at least one particle".into(),
        });
    }
    Ok(())
}

/// Draws `(particle, log g)` pairs; stream 0 of `seed`.
fn draw<M: DensityRatioModel + ?Sized>(model: &M, n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = stream_rng(seed, 0);
    (0..n)
        .map(|_| {
            let v = model.sample_proposal(&mut rng);
            (v, model.log_ratio(v))
        })
        .collect()
}

pub fn sample_particles<M: DensityRatioModel + ?Sized>(
    model: &M,
    n: usize,
    seed: u64,
) -> Result<WeightedEmpiricalMeasure> {
    check_particle_count(n)?;
    let mut particles = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (index, (v, lr)) in draw(model, n, seed).into_iter().enumerate() {
        let w = weight(lr, n).ok_or(Error::WeightOverflow {
            index,
            particle: v,
            log_ratio: lr,
        })?;
        particles.push(v);
        weights.push(w);
    }
    Ok(WeightedEmpiricalMeasure { particles, weights, seed })
}

/// `π^N(φ) = Σ wⁿ φ(vⁿ)`.
pub fn estimate(measure: &WeightedEmpiricalMeasure, phi: &TestFunction) -> Result<f64> {
    let mut terms = Vec::with_capacity(measure.len());
    for (index, (&v, &w)) in measure.particles.iter().zip(&measure.weights).enumerate() {
        let y = phi.eval(v);
        if !y.is_finite() {
            return Err(Error::NonFiniteSample { index, particle: v, value: y });
        }
        terms.push(w * y);
    }
    Ok(neumaier_sum(terms))
}

/// `Var_Q(g φ) / N` by quadrature; infinite when `Q((g φ)²)` diverges.
pub fn exact_mse<M: DensityRatioModel + ?Sized>(
    model: &M,
    phi: &TestFunction,
    n: usize,
    spec: &QuadratureSpec,
) -> Result<f64> {
    check_particle_count(n)?;
    let hints = model.location_hints();
    let second = |x: f64| {
        let y = phi.eval(x);
        if y == 0.0 {
            return 0.0;
        }
        let lp = model.target_log_density(x);
        (2.0 * lp - model.proposal_log_density(x)).exp() * y * y
    };
    let first = |x: f64| {
        let y = phi.eval(x);
        if y == 0.0 {
            0.0
        } else {
            model.target_log_density(x).exp() * y
        }
    };
    let second = match integrate_line(&second, &hints, spec)? {
        LineIntegral::Finite(i) => i.value,
        LineIntegral::Divergent => return Ok(f64::INFINITY),
    };
    let first = match integrate_line(&first, &hints, spec)? {
        LineIntegral::Finite(i) => i.value,
        LineIntegral::Divergent => return Ok(f64::INFINITY),
    };
    Ok((second - first * first).max(0.0) / n as f64)
}

pub fn normalized_weights(measure: &WeightedEmpiricalMeasure) -> Result<ProbabilityVector> {
    ProbabilityVector::normalize(&measure.weights)
}

/// `1 / Σ ŵ²`, in `[1, N]`.
pub fn ess_chi2(w_hat: &ProbabilityVector) -> f64 {
    let n = w_hat.len() as f64;
    let sum_sq = neumaier_sum(w_hat.entries().iter().map(|w| w * w));
    (1.0 / sum_sq).clamp(1.0, n)
}

/// `N / exp(Σ ŵ log(N ŵ))`, in `[1, N]`; zero weights contribute nothing.
pub fn ess_kl(w_hat: &ProbabilityVector) -> f64 {
    let n = w_hat.len() as f64;
    let d = neumaier_sum(
        w_hat
            .entries()
            .iter()
            .filter(|&&w| w > 0.0)
            .map(|&w| w * (n * w).ln()),
    );
    (n / d.exp()).clamp(1.0, n)
}

/// Outcome of one particle set against the two accuracy conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrialOutcome {
    /// `π^N(1) − 1 ≤ ε`.
    pub i_ok: bool,
    /// `|Q(f∘g) − (1/N) Σ f(g(vⁿ))| ≤ δ`.
    pub ii_ok: bool,
    /// A weight overflowed; counted as a mass violation.
    pub overflow: bool,
    pub total_mass: f64,
    pub divergence_estimate: f64,
}

impl TrialOutcome {
    pub fn failed(&self) -> bool {
        !(self.i_ok && self.ii_ok)
    }
}

fn check_exact(exact_d_f: f64) -> Result<()> {
    if exact_d_f.is_infinite() {
        return Err(Error::InfiniteDivergence("the breakdown experiment needs a finite divergence"));
    }
    if exact_d_f.is_nan() {
        return Err(Error::NegativeOrNonFinite { what: "divergence", value: exact_d_f });
    }
    Ok(())
}

/// One draw of `N` particles (same stream as [`sample_particles`]).
pub fn breakdown_trial<M: DensityRatioModel + ?Sized>(
    model: &M,
    f: &ConvexGenerator,
    exact_d_f: f64,
    n: usize,
    budget: &ToleranceBudget,
    seed: u64,
) -> Result<TrialOutcome> {
    check_particle_count(n)?;
    check_exact(exact_d_f)?;
    let ln_n = (n as f64).ln();
    let draws = draw(model, n, seed);
    let mut overflow = false;
    let mut weights = Vec::with_capacity(n);
    let mut terms = Vec::with_capacity(n);
    for &(_, lr) in &draws {
        match weight(lr, n) {
            Some(w) => weights.push(w),
            None => overflow = true,
        }
        terms.push(f.weighted_apply_ln(-ln_n, lr));
    }
    let total_mass = if overflow {
        f64::INFINITY
    } else {
        neumaier_sum(weights)
    };
    let divergence_estimate = neumaier_sum(terms);
    Ok(TrialOutcome {
        i_ok: !overflow && total_mass - 1.0 <= budget.epsilon,
        ii_ok: (exact_d_f - divergence_estimate).abs() <= budget.delta,
        overflow,
        total_mass,
        divergence_estimate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BreakdownReport {
    pub replicates: u64,
    pub n_particles: u64,
    pub budget: ToleranceBudget,
    pub failure_count: u64,
    pub failure_frequency: f64,
    pub condition_i_violations: u64,
    pub condition_ii_violations: u64,
    pub overflow_count: u64,
    pub seed: u64,
}

/// Runs `replicates` trials; replicate `r` uses seed `derive_seed(seed, r)`.
pub fn breakdown_probability<M: DensityRatioModel + ?Sized>(
    model: &M,
    f: &ConvexGenerator,
    exact_d_f: f64,
    n: usize,
    budget: &ToleranceBudget,
    replicates: u64,
    seed: u64,
) -> Result<BreakdownReport> {
    if replicates == 0 {
        return Err(Error::InvalidParameter {
            name: "replicates",
            reason: "need at least one replicate".into(),
        });
    }
    check_particle_count(n)?;
    check_exact(exact_d_f)?;
    let outcomes: Vec<TrialOutcome> = (0..replicates)
        .into_par_iter()
        .map(|r| breakdown_trial(model, f, exact_d_f, n, budget, derive_seed(seed, r)))
        .collect::<Result<_>>()?;
    let count = |pred: fn(&TrialOutcome) -> bool| outcomes.iter().filter(|o| pred(o)).count() as u64;
    let failure_count = count(TrialOutcome::failed);
    Ok(BreakdownReport {
        replicates,
        n_particles: n as u64,
        budget: *budget,
        failure_count,
        failure_frequency: failure_count as f64 / replicates as f64,
        condition_i_violations: count(|o| !o.i_ok),
        condition_ii_violations: count(|o| !o.ii_ok),
        overflow_count: count(|o| o.overflow),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{make_gaussian_model, Gaussian1D, GaussianModel};

    fn pair(m: f64, v: f64) -> GaussianModel {
        make_gaussian_model(Gaussian1D::new(m, v).unwrap(), Gaussian1D::standard())
    }

    #[test]
    fn identical_weights_are_exact() {
        let m = sample_particles(&pair(0.0, 1.0), 5, 1).unwrap();
        assert!(m.weights().iter().all(|&w| w == 0.2));
        assert_eq!(estimate(&m, &TestFunction::constant(1.0)).unwrap(), 1.0);
        assert_eq!(estimate(&m, &TestFunction::constant(0.0)).unwrap(), 0.0);
        assert!(m.verify_weights(&pair(0.0, 1.0)));
    }

    #[test]
    fn shifted_mass_is_plausible_and_deterministic() {
        let model = pair(2.0, 1.0);
        let a = sample_particles(&model, 1000, 17).unwrap();
        let b = sample_particles(&model, 1000, 17).unwrap();
        assert_eq!(a, b);
        let se = (4f64.exp_m1() / 1000.0).sqrt();
        assert!((a.total_mass() - 1.0).abs() < 5.0 * se);
        assert!(a.verify_weights(&model));
        assert!(!a.verify_weights(&pair(1.0, 1.0)));
    }

    #[test]
    fn rejects_empty_and_overflow() {
        assert!(sample_particles(&pair(0.0, 1.0), 0, 1).is_err());
        // Variance ratio 1e-300 puts ln g near +345 at the mode.
        let narrow = make_gaussian_model(Gaussian1D::new(0.0, 1e-300).unwrap(), Gaussian1D::new(0.0, 1.0).unwrap());
        match sample_particles(&narrow, 100, 3) {
            Err(Error::WeightOverflow { .. }) | Ok(_) => {}
            Err(e) => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn estimate_reports_non_finite() {
        let m = sample_particles(&pair(0.0, 1.0), 4, 1).unwrap();
        let bad = TestFunction::new("nan", |_| f64::NAN);
        assert!(matches!(estimate(&m, &bad), Err(Error::NonFiniteSample { index: 0, .. })));
    }

    #[test]
    fn exact_mse_examples() {
        let spec = QuadratureSpec::default();
        let one = TestFunction::constant(1.0);
        assert!(exact_mse(&pair(0.0, 1.0), &one, 7, &spec).unwrap() < 1e-9);
        let m = exact_mse(&pair(2.0, 1.0), &one, 100, &spec).unwrap();
        assert!((m - 4f64.exp_m1() / 100.0).abs() < 1e-9, "{m}");
        assert!(exact_mse(&pair(0.0, 4.0), &one, 100, &spec).unwrap().is_infinite());
    }

    #[test]
    fn normalization_examples() {
        let m = WeightedEmpiricalMeasure {
            particles: vec![0.0, 1.0],
            weights: vec![0.2, 0.6],
            seed: 0,
        };
        let w = normalized_weights(&m).unwrap();
        assert!((w.entries()[0] - 0.25).abs() < 1e-15 && (w.entries()[1] - 0.75).abs() < 1e-15);
        let z = WeightedEmpiricalMeasure {
            particles: vec![0.0, 1.0, 2.0],
            weights: vec![0.0, 0.3, 0.1],
            seed: 0,
        };
        let w = normalized_weights(&z).unwrap();
        assert_eq!(w.entries()[0], 0.0);
        let zero = WeightedEmpiricalMeasure {
            particles: vec![0.0],
            weights: vec![0.0],
            seed: 0,
        };
        assert!(normalized_weights(&zero).is_err());
    }

    #[test]
    fn ess_examples() {
        let u = ProbabilityVector::uniform(10).unwrap();
        let e = ProbabilityVector::vertex(10, 3).unwrap();
        let half = ProbabilityVector::new(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert!((ess_chi2(&u) - 10.0).abs() < 1e-9);
        assert!((ess_kl(&u) - 10.0).abs() < 1e-9);
        assert_eq!(ess_chi2(&e), 1.0);
        assert!((ess_kl(&e) - 1.0).abs() < 1e-12);
        assert!((ess_chi2(&half) - 2.0).abs() < 1e-12);
        assert!((ess_kl(&half) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn trial_on_identical_pair_succeeds() {
        let b = ToleranceBudget::default();
        for f in [ConvexGenerator::KL, ConvexGenerator::CHI2, ConvexGenerator::TV, ConvexGenerator::HELLINGER] {
            let t = breakdown_trial(&pair(0.0, 1.0), &f, 0.0, 50, &b, 9).unwrap();
            assert!(t.i_ok && t.ii_ok && !t.overflow);
            assert_eq!(t.divergence_estimate, 0.0);
        }
    }

    #[test]
    fn trial_estimate_is_mean_of_f_of_g() {
        let model = pair(1.0, 1.0);
        let b = ToleranceBudget::default();
        let t = breakdown_trial(&model, &ConvexGenerator::KL, 0.5, 200, &b, 4).unwrap();
        let m = sample_particles(&model, 200, 4).unwrap();
        assert_eq!(t.total_mass, m.total_mass());
        let direct = estimate(&m, &TestFunction::new("log g", move |x| model.log_ratio(x))).unwrap();
        assert!((t.divergence_estimate - direct).abs() < 1e-12);
    }

    #[test]
    fn breakdown_rejects_infinite_divergence() {
        let b = ToleranceBudget::default();
        let r = breakdown_probability(&pair(0.0, 4.0), &ConvexGenerator::CHI2, f64::INFINITY, 10, &b, 5, 1);
        assert!(matches!(r, Err(Error::InfiniteDivergence(_))));
        assert!(breakdown_probability(&pair(0.0, 1.0), &ConvexGenerator::KL, 0.0, 10, &b, 0, 1).is_err());
    }

    #[test]
    fn breakdown_identical_never_fails() {
        let b = ToleranceBudget::default();
        let r = breakdown_probability(&pair(0.0, 1.0), &ConvexGenerator::KL, 0.0, 30, &b, 100, 2).unwrap();
        assert_eq!(r.failure_count, 0);
        assert_eq!(r.failure_frequency, 0.0);
    }

    #[test]
    fn breakdown_light_tail_concentrates() {
        let b = ToleranceBudget::default();
        let r = breakdown_probability(&pair(1.0, 1.0), &ConvexGenerator::KL, 0.5, 10_000, &b, 200, 8).unwrap();
        assert!(r.failure_frequency < 0.05, "{r:?}");
    }
}
