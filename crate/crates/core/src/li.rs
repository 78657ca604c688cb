//! Least-information measure between discrete probability distributions.
//!
//! For a set of exhaustive, mutually exclusive inferences with prior
//! probabilities `x` and revised probabilities `y`, the least information
//! needed to explain the change is
//!
//! ```text
//! I(x -> y) = sum_i | g(y_i) - g(x_i) |,    g(p) = p (1 - ln p)
//! ```
//!
//! where `g` ("informative entropy") is the magnitude of the integral of the
//! microscopic entropy change `-ln p dp`. Unlike KL divergence the measure is
//! symmetric, additive along monotone paths, and bounded by the number of
//! inferences. All logarithms are natural.

use thiserror::Error;

/// Tolerance on the probability sum accepted by [`ProbDistribution::new`].
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum LiError {
    #[error("probability {0} is outside [0, 1]")]
    Domain(f64),
    #[error("distributions have different lengths ({left} vs {right})")]
    Dimension { left: usize, right: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// A finite discrete probability vector.
///
/// Inputs whose sum is off by more than [`SUM_TOLERANCE`] are rejected, never
/// renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbDistribution {
    probs: Vec<f64>,
}

impl ProbDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, LiError> {
        if probs.is_empty() {
            return Err(LiError::InvalidDistribution("no inferences".into()));
        }
        if let Some(&p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(LiError::Domain(p));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(LiError::InvalidDistribution(format!(
                "probabilities sum to {sum}"
            )));
        }
        Ok(Self { probs })
    }

    /// Uniform distribution over `n` inferences.
    pub fn uniform(n: usize) -> Result<Self, LiError> {
        if n == 0 {
            return Err(LiError::InvalidDistribution("no inferences".into()));
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    /// Two-inference distribution `(p, 1 - p)`.
    pub fn binary(p: f64) -> Result<Self, LiError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(LiError::Domain(p));
        }
        Self::new(vec![p, 1.0 - p])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Per-inference least information and its total, in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct LiBreakdown {
    pub per_inference: Vec<f64>,
    pub total: f64,
}

/// `g(p) = p (1 - ln p)` with the limit value `g(0) = 0`.
///
/// Callers must pass `p` in `[0, 1]`; this is the unchecked kernel used by
/// the scorers.
#[inline]
pub(crate) fn g(p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p), "probability {p} out of range");
    if p <= 0.0 {
        0.0
    } else {
        p * (1.0 - p.ln())
    }
}

/// Informative entropy `g(p) = p (1 - ln p)`, in nats.
pub fn informative_entropy(p: f64) -> Result<f64, LiError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(LiError::Domain(p));
    }
    Ok(g(p))
}

/// Shannon entropy `-sum p ln p` with `0 ln 0 = 0`.
pub fn entropy(d: &ProbDistribution) -> f64 {
    entropy_with_constant(d, 1.0)
}

/// Shannon entropy scaled by the constant `k`.
pub fn entropy_with_constant(d: &ProbDistribution, k: f64) -> f64 {
    let h: f64 = d
        .probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    // -0.0 for certainty
    k * h.max(0.0)
}

fn check_dims(x: &ProbDistribution, y: &ProbDistribution) -> Result<(), LiError> {
    if x.len() != y.len() {
        return Err(LiError::Dimension {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(())
}

/// `H(y) - H(x)`.
pub fn delta_entropy(x: &ProbDistribution, y: &ProbDistribution) -> Result<f64, LiError> {
    check_dims(x, y)?;
    Ok(entropy(y) - entropy(x))
}

/// Least information needed to explain the change from `x` to `y`.
pub fn least_information(
    x: &ProbDistribution,
    y: &ProbDistribution,
) -> Result<LiBreakdown, LiError> {
    check_dims(x, y)?;
    let per_inference: Vec<f64> = x
        .probs
        .iter()
        .zip(&y.probs)
        .map(|(&xi, &yi)| (g(yi) - g(xi)).abs())
        .collect();
    let total = per_inference.iter().sum();
    Ok(LiBreakdown {
        per_inference,
        total,
    })
}

/// One sample of the two-inference "reduce to certainty" curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    /// Prior probability of the inference that turns out to be true.
    pub p: f64,
    /// Least information for `(p, 1 - p) -> (1, 0)`.
    pub li: f64,
    /// `|H(1, 0) - H(p, 1 - p)|`.
    pub abs_delta_h: f64,
}

/// Samples `p = i / steps` for `i = 1..=steps` and compares least information
/// with entropy reduction when the first of two inferences becomes certain.
pub fn binary_li_curve(steps: usize) -> Result<Vec<CurvePoint>, LiError> {
    if steps < 2 {
        return Err(LiError::Argument(format!(
            "steps must be >= 2, got {steps}"
        )));
    }
    let certain = ProbDistribution::binary(1.0)?;
    (1..=steps)
        .map(|i| {
            let p = i as f64 / steps as f64;
            let prior = ProbDistribution::binary(p)?;
            let li = least_information(&prior, &certain)?.total;
            let abs_delta_h = delta_entropy(&prior, &certain)?.abs();
            Ok(CurvePoint { p, li, abs_delta_h })
        })
        .collect()
}

/// Writes the curve as CSV with header `p,li,abs_delta_h`, six decimals.
pub fn write_curve_csv<W: std::io::Write>(
    points: &[CurvePoint],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "p,li,abs_delta_h")?;
    for pt in points {
        writeln!(out, "{:.6},{:.6},{:.6}", pt.p, pt.li, pt.abs_delta_h)?;
    }
    Ok(())
}
