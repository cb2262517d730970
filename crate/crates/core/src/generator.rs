//! Convex generators `f` with `f(1) = 0` that define f-divergences.
//!
//! | Kind | f(x) | f(0⁺) |
//! |------|------|-------|
//! | Kullback-Leibler | x ln x | 0 |
//! | χ² | (x − 1)² | 1 |
//! | Total variation | \|x − 1\| / 2 | 1/2 |
//! | Squared Hellinger | (√x − 1)² | 1 |
//!
//! The value at zero is stored rather than evaluated so that `0 · ln 0`
//! never produces a NaN. All logarithms are natural.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four built-in divergences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    KullbackLeibler,
    ChiSquared,
    TotalVariation,
    SquaredHellinger,
}

impl DivergenceKind {
    pub const ALL: [DivergenceKind; 4] = [
        DivergenceKind::KullbackLeibler,
        DivergenceKind::ChiSquared,
        DivergenceKind::TotalVariation,
        DivergenceKind::SquaredHellinger,
    ];

    /// Short name used in reports and on the command line.
    pub fn short_name(self) -> &'static str {
        match self {
            DivergenceKind::KullbackLeibler => "kl",
            DivergenceKind::ChiSquared => "chi2",
            DivergenceKind::TotalVariation => "tv",
            DivergenceKind::SquaredHellinger => "hellinger",
        }
    }

    /// Upper end of the range of the divergence between probability
    /// measures, `None` when unbounded.
    pub fn range_max(self) -> Option<f64> {
        match self {
            DivergenceKind::TotalVariation => Some(1.0),
            DivergenceKind::SquaredHellinger => Some(2.0),
            _ => None,
        }
    }
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for DivergenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kl" | "kullback-leibler" | "kullback_leibler" => Ok(DivergenceKind::KullbackLeibler),
            "chi2" | "chi-squared" | "chi_squared" => Ok(DivergenceKind::ChiSquared),
            "tv" | "total-variation" | "total_variation" => Ok(DivergenceKind::TotalVariation),
            "hellinger" | "hell" | "squared-hellinger" | "squared_hellinger" => {
                Ok(DivergenceKind::SquaredHellinger)
            }
            other => Err(Error::InvalidParameter {
                name: "metric",
                reason: format!("unknown divergence `{other}`"),
            }),
        }
    }
}

type GeneratorFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied convex generator.
#[derive(Clone)]
pub struct CustomGenerator {
    label: String,
    f: GeneratorFn,
    value_at_zero: f64,
}

impl fmt::Debug for CustomGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomGenerator")
            .field("label", &self.label)
            .field("value_at_zero", &self.value_at_zero)
            .finish_non_exhaustive()
    }
}

/// Points used for the sampled midpoint-convexity check, log-spaced in (0, 1e3].
fn convexity_grid() -> Vec<f64> {
    (0..=48).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 48.0)).collect()
}

impl CustomGenerator {
    /// Builds a custom generator after checking `f(1) = 0`, that
    /// `value_at_zero` is a finite limit, and midpoint convexity on a grid.
    pub fn new<F>(label: impl Into<String>, f: F, value_at_zero: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let label = label.into();
        if !value_at_zero.is_finite() {
            return Err(Error::InvalidGenerator(format!(
                "{label}: value at zero must be finite, got {value_at_zero}"
            )));
        }
        let at_one = f(1.0);
        if !(at_one.abs() <= 1e-12) {
            return Err(Error::InvalidGenerator(format!("{label}: f(1) = {at_one}, expected 0")));
        }
        let near_zero = f(1e-12);
        if !((near_zero - value_at_zero).abs() <= 1e-3 * value_at_zero.abs().max(1.0)) {
            return Err(Error::InvalidGenerator(format!(
                "{label}: f(1e-12) = {near_zero} is far from the stated limit {value_at_zero}"
            )));
        }
        let grid = convexity_grid();
        for (i, &a) in grid.iter().enumerate() {
            for &b in &grid[i + 1..] {
                let lhs = f(0.5 * (a + b));
                let rhs = 0.5 * (f(a) + f(b));
                if !(lhs <= rhs + 1e-12 * rhs.abs().max(1.0)) {
                    return Err(Error::InvalidGenerator(format!(
                        "{label}: midpoint convexity fails between {a} and {b}"
                    )));
                }
            }
        }
        Ok(CustomGenerator {
            label,
            f: Arc::new(f),
            value_at_zero,
        })
    }
}

/// The function `f` that defines an f-divergence `D_f(P‖Q) = Q(f ∘ dP/dQ)`.
#[derive(Clone, Debug)]
pub enum ConvexGenerator {
    Builtin(DivergenceKind),
    Custom(CustomGenerator),
}

impl From<DivergenceKind> for ConvexGenerator {
    fn from(kind: DivergenceKind) -> Self {
        ConvexGenerator::Builtin(kind)
    }
}

impl ConvexGenerator {
    pub const KL: ConvexGenerator = ConvexGenerator::Builtin(DivergenceKind::KullbackLeibler);
    pub const CHI2: ConvexGenerator = ConvexGenerator::Builtin(DivergenceKind::ChiSquared);
    pub const TV: ConvexGenerator = ConvexGenerator::Builtin(DivergenceKind::TotalVariation);
    pub const HELLINGER: ConvexGenerator =
        ConvexGenerator::Builtin(DivergenceKind::SquaredHellinger);

    pub fn kind(&self) -> Option<DivergenceKind> {
        match self {
            ConvexGenerator::Builtin(kind) => Some(*kind),
            ConvexGenerator::Custom(_) => None,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            ConvexGenerator::Builtin(kind) => kind.short_name(),
            ConvexGenerator::Custom(c) => &c.label,
        }
    }

    /// The limit of `f` at `0⁺`.
    pub fn value_at_zero(&self) -> f64 {
        match self {
            ConvexGenerator::Builtin(DivergenceKind::KullbackLeibler) => 0.0,
            ConvexGenerator::Builtin(DivergenceKind::ChiSquared) => 1.0,
            ConvexGenerator::Builtin(DivergenceKind::TotalVariation) => 0.5,
            ConvexGenerator::Builtin(DivergenceKind::SquaredHellinger) => 1.0,
            ConvexGenerator::Custom(c) => c.value_at_zero,
        }
    }

    /// Evaluates `f(x)`, rejecting negative and non-finite arguments.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::NegativeOrNonFinite {
                what: "generator argument",
                value: x,
            });
        }
        Ok(self.apply(x))
    }

    /// Unchecked evaluation for hot loops. `x` must be nonnegative; `+∞`
    /// is passed through to the formula.
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        if x == 0.0 {
            return self.value_at_zero();
        }
        match self {
            ConvexGenerator::Builtin(DivergenceKind::KullbackLeibler) => x * x.ln(),
            ConvexGenerator::Builtin(DivergenceKind::ChiSquared) => (x - 1.0) * (x - 1.0),
            ConvexGenerator::Builtin(DivergenceKind::TotalVariation) => 0.5 * (x - 1.0).abs(),
            ConvexGenerator::Builtin(DivergenceKind::SquaredHellinger) => {
                let r = x.sqrt() - 1.0;
                r * r
            }
            ConvexGenerator::Custom(c) => (c.f)(x),
        }
    }

    /// Computes `w · f(x)` from `ln w` and `ln x` without forming `x`.
    ///
    /// Density ratios overflow long before `q · f(g)` does (for instance
    /// `(g − 1)² q = p²/q − 2p + q` stays small while `g` is `e^1000`), so the
    /// integrands of the continuous divergences are evaluated this way.
    #[inline]
    pub fn weighted_apply_ln(&self, ln_weight: f64, ln_x: f64) -> f64 {
        if ln_weight == f64::NEG_INFINITY {
            return 0.0;
        }
        if ln_x == f64::NEG_INFINITY {
            return ln_weight.exp() * self.value_at_zero();
        }
        match self {
            ConvexGenerator::Builtin(DivergenceKind::KullbackLeibler) => {
                (ln_weight + ln_x).exp() * ln_x
            }
            ConvexGenerator::Builtin(DivergenceKind::ChiSquared) => {
                (ln_weight + 2.0 * ln_abs_expm1(ln_x)).exp()
            }
            ConvexGenerator::Builtin(DivergenceKind::TotalVariation) => {
                0.5 * (ln_weight + ln_abs_expm1(ln_x)).exp()
            }
            ConvexGenerator::Builtin(DivergenceKind::SquaredHellinger) => {
                (ln_weight + 2.0 * ln_abs_expm1(0.5 * ln_x)).exp()
            }
            ConvexGenerator::Custom(c) => ln_weight.exp() * (c.f)(ln_x.exp()),
        }
    }
}

/// `ln |eᵗ − 1|`, accurate for small and large `t`.
#[inline]
pub(crate) fn ln_abs_expm1(t: f64) -> f64 {
    if t > std::f64::consts::LN_2 {
        t + (-(-t).exp()).ln_1p()
    } else {
        t.exp_m1().abs().ln()
    }
}
