#![allow(clippy::excessive_precision)]

//! Adaptive Gauss-Kronrod (7/15) quadrature on finite intervals and on the
//! real line.
//!
//! Real-line integrals start from a core window covering `window` scale
//! units around every location hint, then grow outward one window-width
//! chunk at a time until a chunk no longer contributes. The integral is
//! diagnosed infinite when it overflows, when it exceeds the overflow
//! threshold while the chunk contributions have stopped shrinking, or when
//! the expansion budget runs out.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Number of outward chunks tried on each side before the tail is deemed
/// non-integrable.
const MAX_EXPANSIONS: usize = 64;

/// Tolerances and budgets for [`integrate_line`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadratureSpec {
    pub absolute_tolerance: f64,
    pub relative_tolerance: f64,
    /// Half-width of the core window in units of each location hint's scale.
    pub window: f64,
    /// Subdivision budget of each adaptive pass.
    pub max_intervals: usize,
    /// Running-integral level above which non-decaying growth counts as divergence.
    pub overflow_threshold: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            absolute_tolerance: 1e-10,
            relative_tolerance: 1e-11,
            window: 40.0,
            max_intervals: 10_000,
            overflow_threshold: 1e12,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.absolute_tolerance > 0.0 && self.absolute_tolerance.is_finite()) {
            return bad("absolute_tolerance", "must be finite and > 0");
        }
        if !(self.relative_tolerance > 0.0 && self.relative_tolerance.is_finite()) {
            return bad("relative_tolerance", "must be finite and > 0");
        }
        if !(self.window >= 10.0 && self.window.is_finite()) {
            return bad("window", "must cover at least 10 standard deviations");
        }
        if self.max_intervals == 0 {
            return bad("max_intervals", "must be at least 1");
        }
        if !(self.overflow_threshold > 0.0) {
            return bad("overflow_threshold", "must be > 0");
        }
        Ok(())
    }

    fn tolerance_for(&self, value: f64) -> f64 {
        self.absolute_tolerance.max(self.relative_tolerance * value.abs())
    }
}

/// A converged integral with its error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub intervals: usize,
}

/// Result of a real-line integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LineIntegral {
    Finite(Integral),
    Divergent,
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Clone, Copy, Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn eval_checked<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64> {
    let y = f(x);
    if y.is_nan() {
        Err(Error::NanIntegrand(x))
    } else {
        Ok(y)
    }
}

/// One 15-point Kronrod evaluation with the QUADPACK error heuristic.
fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Segment> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let abs_half = half.abs();

    let fc = eval_checked(f, center)?;
    let mut res_gauss = fc * WG[3];
    let mut res_kronrod = fc * WGK[7];
    let mut res_abs = res_kronrod.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];

    for j in 0..3 {
        let jtw = 2 * j + 1;
        let abscissa = half * XGK[jtw];
        let f1 = eval_checked(f, center - abscissa)?;
        let f2 = eval_checked(f, center + abscissa)?;
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        let sum = f1 + f2;
        res_gauss += WG[j] * sum;
        res_kronrod += WGK[jtw] * sum;
        res_abs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    for j in 0..4 {
        let jtwm1 = 2 * j;
        let abscissa = half * XGK[jtwm1];
        let f1 = eval_checked(f, center - abscissa)?;
        let f2 = eval_checked(f, center + abscissa)?;
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        res_kronrod += WGK[jtwm1] * (f1 + f2);
        res_abs += WGK[jtwm1] * (f1.abs() + f2.abs());
    }

    let mean = 0.5 * res_kronrod;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = res_kronrod * half;
    res_abs *= abs_half;
    res_asc *= abs_half;
    let mut error = ((res_kronrod - res_gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Segment { a, b, value, error })
}

/// Globally adaptive integration over `[breakpoints[0], breakpoints[last]]`,
/// splitting first at every breakpoint and then bisecting the segment with
/// the largest error estimate.
///
/// An infinite integrand value is returned as an infinite integral without
/// further refinement.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: &F,
    breakpoints: &[f64],
    absolute_tolerance: f64,
    relative_tolerance: f64,
    max_intervals: usize,
) -> Result<Integral> {
    if breakpoints.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "breakpoints",
            reason: "need at least two".into(),
        });
    }
    let mut heap = BinaryHeap::with_capacity(max_intervals + 1);
    for w in breakpoints.windows(2) {
        if w[1] > w[0] {
            heap.push(kronrod15(f, w[0], w[1])?);
        }
    }
    let sum_of = |heap: &BinaryHeap<Segment>| {
        let mut v = 0.0;
        let mut e = 0.0;
        for s in heap.iter() {
            v += s.value;
            e += s.error;
        }
        (v, e)
    };
    let (mut value, mut error) = sum_of(&heap);
    if !value.is_finite() {
        return Ok(Integral {
            value,
            abs_error: f64::INFINITY,
            intervals: heap.len(),
        });
    }

    while error > absolute_tolerance.max(relative_tolerance * value.abs()) {
        if heap.len() >= max_intervals {
            let (v, e) = sum_of(&heap);
            return Err(Error::QuadratureNonConvergence {
                estimate: v,
                error: e,
                intervals: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap is never empty here");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Segment can no longer be bisected in floating point.
            heap.push(worst);
            let (v, e) = sum_of(&heap);
            return Err(Error::QuadratureNonConvergence {
                estimate: v,
                error: e,
                intervals: heap.len(),
            });
        }
        let left = kronrod15(f, worst.a, mid)?;
        let right = kronrod15(f, mid, worst.b)?;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if !value.is_finite() {
            return Ok(Integral {
                value,
                abs_error: f64::INFINITY,
                intervals: heap.len(),
            });
        }
        // Resynchronise the running sums now and then to shed drift.
        if heap.len() % 256 == 0 {
            (value, error) = sum_of(&heap);
        }
    }
    let mut segments = heap.into_vec();
    segments.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = crate::divergence::neumaier_sum(segments.iter().map(|s| s.value));
    let abs_error = segments.iter().map(|s| s.error).sum();
    Ok(Integral {
        value,
        abs_error,
        intervals: segments.len(),
    })
}

const HINT_OFFSETS: [f64; 17] = [
    -32.0, -16.0, -8.0, -4.0, -2.0, -1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0,
    32.0,
];

/// Integrates `f` over the real line. `hints` are `(location, scale)` pairs
/// marking where the integrand has structure; they seed the core window and
/// its breakpoints.
pub fn integrate_line<F: Fn(f64) -> f64>(
    f: &F,
    hints: &[(f64, f64)],
    spec: &QuadratureSpec,
) -> Result<LineIntegral> {
    spec.validate()?;
    if hints.is_empty() || hints.iter().any(|&(c, s)| !c.is_finite() || !(s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidParameter {
            name: "hints",
            reason: "need at least one finite (location, positive scale) pair".into(),
        });
    }
    let lo = hints
        .iter()
        .map(|&(c, s)| c - spec.window * s)
        .fold(f64::INFINITY, f64::min);
    let hi = hints
        .iter()
        .map(|&(c, s)| c + spec.window * s)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut breakpoints = vec![lo, hi];
    for &(c, s) in hints {
        for k in HINT_OFFSETS {
            let x = c + k * s;
            if x > lo && x < hi {
                breakpoints.push(x);
            }
        }
    }
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();

    let core = integrate_adaptive(
        f,
        &breakpoints,
        spec.absolute_tolerance,
        spec.relative_tolerance,
        spec.max_intervals,
    )?;
    if core.value == f64::INFINITY {
        return Ok(LineIntegral::Divergent);
    }
    if !core.value.is_finite() {
        return Err(Error::NanIntegrand(f64::NAN));
    }

    let step = spec.window * hints.iter().map(|&(_, s)| s).fold(0.0, f64::max);
    let mut total = core.value;
    let mut abs_error = core.abs_error;
    let mut intervals = core.intervals;
    for direction in [1.0f64, -1.0] {
        let mut edge = if direction > 0.0 { hi } else { lo };
        let mut previous = f64::INFINITY;
        let mut settled = false;
        for _ in 0..MAX_EXPANSIONS {
            let next = edge + direction * step;
            let (a, b) = if direction > 0.0 { (edge, next) } else { (next, edge) };
            let chunk = integrate_adaptive(
                f,
                &[a, b],
                spec.absolute_tolerance,
                spec.relative_tolerance,
                spec.max_intervals,
            )?;
            total += chunk.value;
            abs_error += chunk.abs_error;
            intervals += chunk.intervals;
            if total == f64::INFINITY {
                return Ok(LineIntegral::Divergent);
            }
            if !total.is_finite() {
                return Err(Error::NanIntegrand(f64::NAN));
            }
            let contribution = chunk.value.abs();
            if contribution <= spec.tolerance_for(total) {
                settled = true;
                break;
            }
            if total.abs() > spec.overflow_threshold && contribution >= previous {
                return Ok(LineIntegral::Divergent);
            }
            previous = contribution;
            edge = next;
        }
        if !settled {
            return Ok(LineIntegral::Divergent);
        }
    }
    Ok(LineIntegral::Finite(Integral {
        value: total,
        abs_error,
        intervals,
    }))
}
