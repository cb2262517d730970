//! One-dimensional Gaussian target/proposal pairs.
//!
//! Closed forms for the four built-in divergences, plus two independent
//! routes that work for any [`DensityRatioModel`]: adaptive quadrature of
//! `q · f(g)` and plain Monte Carlo over proposal draws.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use libm::{erf, erfc};

use crate::divergence::DivergenceValue;
use crate::error::{check_positive, Error, Result};
use crate::generator::{ConvexGenerator, DivergenceKind};
use crate::quadrature::{integrate_line, LineIntegral, QuadratureSpec};
use crate::rng::{stream_rng, SimRng};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Samples per Monte Carlo chunk; each chunk owns one RNG stream.
pub const MC_CHUNK: u64 = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Gaussian1D {
    mean: f64,
    variance: f64,
}

impl Gaussian1D {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::InvalidParameter {
                name: "mean",
                reason: format!("must be finite, got {mean}"),
            });
        }
        check_positive("variance", variance)?;
        Ok(Gaussian1D { mean, variance })
    }

    pub fn standard() -> Self {
        Gaussian1D {
            mean: 0.0,
            variance: 1.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn log_density(&self, x: f64) -> f64 {
        let z = x - self.mean;
        -LN_SQRT_2PI - 0.5 * self.variance.ln() - z * z / (2.0 * self.variance)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        0.5 * erfc(-(x - self.mean) / (self.sd() * std::f64::consts::SQRT_2))
    }

    /// `F(upper) − F(lower)` without cancellation in either tail.
    fn interval_mass(&self, lower: f64, upper: f64) -> f64 {
        let s = self.sd() * std::f64::consts::SQRT_2;
        let l = (lower - self.mean) / s;
        let u = (upper - self.mean) / s;
        if l >= 0.0 {
            0.5 * (erfc(l) - erfc(u))
        } else if u <= 0.0 {
            0.5 * (erfc(-u) - erfc(-l))
        } else {
            0.5 * (erf(u) - erf(l))
        }
    }
}

/// A target/proposal pair seen through log-densities and proposal draws.
pub trait DensityRatioModel: Send + Sync {
    fn target_log_density(&self, x: f64) -> f64;

    fn proposal_log_density(&self, x: f64) -> f64;

    /// `ln g(x) = ln p(x) − ln q(x)`.
    fn log_ratio(&self, x: f64) -> f64 {
        self.target_log_density(x) - self.proposal_log_density(x)
    }

    /// One draw from the proposal.
    fn sample_proposal(&self, rng: &mut SimRng) -> f64;

    /// `(location, scale)` pairs where the densities carry their mass; used
    /// to place quadrature windows.
    fn location_hints(&self) -> Vec<(f64, f64)>;
}

/// Gaussian target and proposal with the log-ratio in closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GaussianModel {
    pub target: Gaussian1D,
    pub proposal: Gaussian1D,
}

pub fn make_gaussian_model(target: Gaussian1D, proposal: Gaussian1D) -> GaussianModel {
    GaussianModel { target, proposal }
}

impl DensityRatioModel for GaussianModel {
    fn target_log_density(&self, x: f64) -> f64 {
        self.target.log_density(x)
    }

    fn proposal_log_density(&self, x: f64) -> f64 {
        self.proposal.log_density(x)
    }

    fn log_ratio(&self, x: f64) -> f64 {
        let (p, q) = (&self.target, &self.proposal);
        let zp = x - p.mean;
        let zq = x - q.mean;
        0.5 * (q.variance.ln() - p.variance.ln()) - zp * zp / (2.0 * p.variance)
            + zq * zq / (2.0 * q.variance)
    }

    fn sample_proposal(&self, rng: &mut SimRng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.proposal.mean + self.proposal.sd() * z
    }

    fn location_hints(&self) -> Vec<(f64, f64)> {
        vec![
            (self.target.mean, self.target.sd()),
            (self.proposal.mean, self.proposal.sd()),
        ]
    }
}

/// Target standardized against the proposal: `(mean shift, variance ratio)`.
fn standardized(target: &Gaussian1D, proposal: &Gaussian1D) -> (f64, f64) {
    (
        (target.mean - proposal.mean) / proposal.sd(),
        target.variance / proposal.variance,
    )
}

pub fn kl_gaussian(target: &Gaussian1D, proposal: &Gaussian1D) -> DivergenceValue {
    let (m, s2) = standardized(target, proposal);
    let d = s2 - 1.0;
    // ln_1p only helps near s2 = 1; towards s2 = 0 it is ill-conditioned.
    let ln_s2 = if d.abs() < 0.5 { d.ln_1p() } else { s2.ln() };
    DivergenceValue::closed_form(0.5 * (d - ln_s2 + m * m))
}

/// Squared Hellinger distance `2(1 − BC)` with BC the Bhattacharyya coefficient.
pub fn hellinger2_gaussian(target: &Gaussian1D, proposal: &Gaussian1D) -> DivergenceValue {
    let total = target.variance + proposal.variance;
    let sd_gap = target.sd() - proposal.sd();
    let dm = target.mean - proposal.mean;
    let ln_bc = 0.5 * (-(sd_gap * sd_gap) / total).ln_1p() - dm * dm / (4.0 * total);
    DivergenceValue::closed_form(-2.0 * ln_bc.exp_m1())
}

/// `χ²` divergence; infinite once the standardized target variance reaches 2.
pub fn chi2_gaussian(target: &Gaussian1D, proposal: &Gaussian1D) -> DivergenceValue {
    let (m, s2) = standardized(target, proposal);
    if s2 >= 2.0 {
        return DivergenceValue::closed_form(f64::INFINITY);
    }
    let gap = 1.0 - s2;
    let exponent = m * m / (2.0 - s2) - 0.5 * (-(gap * gap)).ln_1p();
    DivergenceValue::closed_form(exponent.exp_m1())
}

/// Total variation `sup_A |P(A) − Q(A)|` from the density crossing points.
pub fn tv_gaussian(target: &Gaussian1D, proposal: &Gaussian1D) -> DivergenceValue {
    let (p, q) = (target, proposal);
    if p.variance == q.variance {
        let z = (p.mean - q.mean).abs() / (2.0 * p.sd());
        return DivergenceValue::closed_form(erf(z / std::f64::consts::SQRT_2));
    }
    // ln p − ln q = a x² + b x + c
    let a = 0.5 / q.variance - 0.5 / p.variance;
    let b = p.mean / p.variance - q.mean / q.variance;
    let c = 0.5 * (q.mean * q.mean / q.variance - p.mean * p.mean / p.variance)
        + 0.5 * (q.variance.ln() - p.variance.ln());
    let disc = (b * b - 4.0 * a * c).max(0.0);
    let sign = if b >= 0.0 { 1.0 } else { -1.0 };
    let half_sum = -0.5 * (b + sign * disc.sqrt());
    let r1 = half_sum / a;
    let r2 = if half_sum != 0.0 { c / half_sum } else { r1 };
    let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    let tv = (p.interval_mass(lo, hi) - q.interval_mass(lo, hi)).abs();
    DivergenceValue::closed_form(tv.clamp(0.0, 1.0))
}

/// Closed form for a built-in divergence.
pub fn closed_form(kind: DivergenceKind, target: &Gaussian1D, proposal: &Gaussian1D) -> DivergenceValue {
    match kind {
        DivergenceKind::KullbackLeibler => kl_gaussian(target, proposal),
        DivergenceKind::ChiSquared => chi2_gaussian(target, proposal),
        DivergenceKind::TotalVariation => tv_gaussian(target, proposal),
        DivergenceKind::SquaredHellinger => hellinger2_gaussian(target, proposal),
    }
}

/// `∫ f(g(x)) q(x) dx` by adaptive quadrature; an infinite value means the
/// integral was diagnosed divergent.
pub fn quadrature_divergence<M: DensityRatioModel + ?Sized>(
    model: &M,
    f: &ConvexGenerator,
    spec: &QuadratureSpec,
) -> Result<DivergenceValue> {
    let integrand = |x: f64| f.weighted_apply_ln(model.proposal_log_density(x), model.log_ratio(x));
    let mut hints = model.location_hints();
    // Generators such as |x − 1|/2 have a corner at g = 1.
    let fine = hints.iter().map(|h| h.1).fold(f64::INFINITY, f64::min);
    hints.extend(ratio_crossings(model, &hints).into_iter().map(|x| (x, fine)));
    match integrate_line(&integrand, &hints, spec)? {
        LineIntegral::Finite(i) => Ok(DivergenceValue::quadrature(i.value)),
        LineIntegral::Divergent => Ok(DivergenceValue::quadrature(f64::INFINITY)),
    }
}

/// Points where `ln g` changes sign, found by scanning ±12 scales around
/// every hint and bisecting each bracket.
fn ratio_crossings<M: DensityRatioModel + ?Sized>(model: &M, hints: &[(f64, f64)]) -> Vec<f64> {
    const STEPS: usize = 4096;
    let lo = hints.iter().map(|&(c, s)| c - 12.0 * s).fold(f64::INFINITY, f64::min);
    let hi = hints.iter().map(|&(c, s)| c + 12.0 * s).fold(f64::NEG_INFINITY, f64::max);
    let step = (hi - lo) / STEPS as f64;
    let mut roots = Vec::new();
    let mut a = lo;
    let mut fa = model.log_ratio(a);
    for i in 1..=STEPS {
        let b = lo + i as f64 * step;
        let fb = model.log_ratio(b);
        if fa == 0.0 {
            roots.push(a);
        } else if fa.signum() != fb.signum() && fb != 0.0 {
            let (mut l, mut r, mut fl) = (a, b, fa);
            for _ in 0..200 {
                let mid = 0.5 * (l + r);
                if !(mid > l && mid < r) {
                    break;
                }
                let fm = model.log_ratio(mid);
                if fm.signum() == fl.signum() {
                    l = mid;
                    fl = fm;
                } else {
                    r = mid;
                }
            }
            roots.push(0.5 * (l + r));
        }
        a = b;
        fa = fb;
    }
    roots
}

#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, y: f64) {
        self.count += 1;
        let delta = y - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (y - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / count as f64;
        Moments {
            count,
            mean: self.mean + delta * w,
            m2: self.m2 + other.m2 + delta * delta * self.count as f64 * w,
        }
    }
}

/// Monte Carlo estimate `(1/M) Σ f(g(vⁱ))` over `M` proposal draws.
///
/// Draws are split into chunks of [`MC_CHUNK`]; chunk `k` uses stream `k`
/// of `seed` and chunk statistics are merged in chunk order, so the result
/// does not depend on the number of worker threads.
pub fn mc_divergence<M: DensityRatioModel + ?Sized>(
    model: &M,
    f: &ConvexGenerator,
    sample_count: u64,
    seed: u64,
) -> Result<DivergenceValue> {
    if sample_count < 2 {
        return Err(Error::InvalidParameter {
            name: "sample_count",
            reason: format!("need at least 2 samples, got {sample_count}"),
        });
    }
    let chunks = sample_count.div_ceil(MC_CHUNK);
    let partials: Vec<Result<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * MC_CHUNK;
            let len = MC_CHUNK.min(sample_count - start);
            let mut rng = stream_rng(seed, chunk);
            let mut acc = Moments::default();
            for i in 0..len {
                let v = model.sample_proposal(&mut rng);
                let y = f.weighted_apply_ln(0.0, model.log_ratio(v));
                if !y.is_finite() {
                    return Err(Error::NonFiniteSample {
                        index: (start + i) as usize,
                        particle: v,
                        value: y,
                    });
                }
                acc.push(y);
            }
            Ok(acc)
        })
        .collect();
    let mut total = Moments::default();
    for part in partials {
        total = total.merge(part?);
    }
    let variance = total.m2 / (total.count - 1) as f64;
    let std_error = (variance / total.count as f64).sqrt();
    Ok(DivergenceValue::monte_carlo(total.mean, std_error, total.count))
}

/// Whether `g = dP/dQ` has a finite `Q`-moment of order `alpha` for
/// `P = N(0, sigma2)` and `Q = N(0, 1)`.
///
/// `Q(g^α) = ∫ p^α q^{1−α}` converges iff `α ≤ 1` or `σ² < α/(α − 1)`;
/// at equality the integrand is constant in the tails.
pub fn moment_finiteness(alpha: f64, sigma2: f64) -> bool {
    debug_assert!(alpha > 0.0 && sigma2 > 0.0);
    alpha <= 1.0 || sigma2 < alpha / (alpha - 1.0)
}
