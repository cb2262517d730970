//! Discrete f-divergences and the divergence value type shared by the
//! continuous routines.
//!
//! For vectors `p ≥ 0` and `q > 0` of equal length,
//! `D_f(p‖q) = Σ qᵢ f(pᵢ / qᵢ)`. `p` need not sum to one, in which case the
//! result can be negative.

use serde::{Deserialize, Serialize};

use crate::error::{check_nonnegative, Error, Result};
use crate::generator::ConvexGenerator;

/// Tolerance on `|Σ pᵢ − 1|` for a probability vector.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Compensated (Neumaier) summation.
pub(crate) fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

fn check_entries(entries: &[f64]) -> Result<()> {
    if entries.is_empty() {
        return Err(Error::Empty);
    }
    for (index, &value) in entries.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidEntry { index, value });
        }
    }
    Ok(())
}

/// Nonnegative entries summing to one.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbabilityVector {
    entries: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        check_entries(&entries)?;
        let total = neumaier_sum(entries.iter().copied());
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized(total));
        }
        Ok(ProbabilityVector { entries })
    }

    /// The uniform vector `u_N`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty);
        }
        Ok(ProbabilityVector {
            entries: vec![1.0 / n as f64; n],
        })
    }

    /// The vertex `e_i` of the simplex of dimension `n`.
    pub fn vertex(n: usize, i: usize) -> Result<Self> {
        if i >= n {
            return Err(Error::InvalidParameter {
                name: "vertex index",
                reason: format!("{i} is out of range for length {n}"),
            });
        }
        let mut entries = vec![0.0; n];
        entries[i] = 1.0;
        Ok(ProbabilityVector { entries })
    }

    /// Divides nonnegative masses by their total.
    pub fn normalize(masses: &[f64]) -> Result<Self> {
        check_entries(masses)?;
        let total = neumaier_sum(masses.iter().copied());
        if total <= 0.0 {
            return Err(Error::ZeroMass);
        }
        if !total.is_finite() {
            return Err(Error::NegativeOrNonFinite {
                what: "total mass",
                value: total,
            });
        }
        Ok(ProbabilityVector {
            entries: masses.iter().map(|w| w / total).collect(),
        })
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Nonnegative entries with arbitrary total mass.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MassVector {
    entries: Vec<f64>,
    total_mass: f64,
}

impl MassVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        check_entries(&entries)?;
        let total_mass = neumaier_sum(entries.iter().copied());
        Ok(MassVector { entries, total_mass })
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl From<ProbabilityVector> for MassVector {
    fn from(p: ProbabilityVector) -> Self {
        MassVector {
            entries: p.entries,
            total_mass: 1.0,
        }
    }
}

impl From<&ProbabilityVector> for MassVector {
    fn from(p: &ProbabilityVector) -> Self {
        MassVector {
            entries: p.entries.clone(),
            total_mass: 1.0,
        }
    }
}

/// How a divergence value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::Quadrature => "quadrature",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A divergence between measures: an extended nonnegative real plus
/// provenance. `std_error` and `sample_count` are set only for Monte Carlo
/// estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DivergenceValue {
    pub value: f64,
    pub method: Method,
    pub std_error: Option<f64>,
    pub sample_count: Option<u64>,
}

impl DivergenceValue {
    pub fn closed_form(value: f64) -> Self {
        DivergenceValue {
            value,
            method: Method::ClosedForm,
            std_error: None,
            sample_count: None,
        }
    }

    pub fn quadrature(value: f64) -> Self {
        DivergenceValue {
            value,
            method: Method::Quadrature,
            std_error: None,
            sample_count: None,
        }
    }

    pub fn monte_carlo(value: f64, std_error: f64, sample_count: u64) -> Self {
        DivergenceValue {
            value,
            method: Method::MonteCarlo,
            std_error: Some(std_error),
            sample_count: Some(sample_count),
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.value == f64::INFINITY
    }
}

/// `D_f(p‖q) = Σ qᵢ f(pᵢ/qᵢ)`.
pub fn discrete_divergence(p: &MassVector, q: &ProbabilityVector, f: &ConvexGenerator) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch(p.len(), q.len()));
    }
    if let Some((index, &value)) = q.entries().iter().enumerate().find(|(_, &qi)| qi <= 0.0) {
        return Err(Error::NonPositiveReference { index, value });
    }
    Ok(neumaier_sum(
        p.entries()
            .iter()
            .zip(q.entries())
            .map(|(&pi, &qi)| qi * f.apply(pi / qi)),
    ))
}

/// `D_f(p‖u_N)` with `u_N` uniform of the same length as `p`.
pub fn divergence_vs_uniform(p: &MassVector, f: &ConvexGenerator) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::Empty);
    }
    let n = p.len() as f64;
    Ok(neumaier_sum(p.entries().iter().map(|&pi| f.apply(n * pi))) / n)
}

/// Absolute slack used by [`divergence_inequality_report`].
pub const INEQUALITY_TOLERANCE: f64 = 1e-9;

/// Outcome of the three χ²-based comparison inequalities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct InequalityReport {
    /// `D_KL ≤ ln(1 + D_χ²)`
    pub kl_bounded: bool,
    /// `D_TV ≤ √D_χ² / 2`
    pub tv_bounded: bool,
    /// `D_Hell ≤ √D_χ²`, with the Hellinger input given squared.
    pub hellinger_bounded: bool,
}

impl InequalityReport {
    pub fn all(&self) -> bool {
        self.kl_bounded && self.tv_bounded && self.hellinger_bounded
    }
}

/// Checks the standard bounds of KL, TV and Hellinger by χ² for four
/// divergences of the same ordered pair. An infinite χ² makes every
/// inequality hold.
pub fn divergence_inequality_report(
    kl: &DivergenceValue,
    chi2: &DivergenceValue,
    tv: &DivergenceValue,
    hellinger2: &DivergenceValue,
) -> Result<InequalityReport> {
    check_nonnegative("KL divergence", kl.value)?;
    check_nonnegative("total variation", tv.value)?;
    check_nonnegative("squared Hellinger", hellinger2.value)?;
    if chi2.value.is_nan() || chi2.value < 0.0 {
        return Err(Error::NegativeOrNonFinite {
            what: "chi-squared divergence",
            value: chi2.value,
        });
    }
    if chi2.is_infinite() {
        return Ok(InequalityReport {
            kl_bounded: true,
            tv_bounded: true,
            hellinger_bounded: true,
        });
    }
    let root = chi2.value.sqrt();
    Ok(InequalityReport {
        kl_bounded: kl.value <= chi2.value.ln_1p() + INEQUALITY_TOLERANCE,
        tv_bounded: tv.value <= 0.5 * root + INEQUALITY_TOLERANCE,
        hellinger_bounded: hellinger2.value.sqrt() <= root + INEQUALITY_TOLERANCE,
    })
}
