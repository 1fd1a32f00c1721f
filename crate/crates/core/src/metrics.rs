//! Link-quality metrics: EVM, the magnitude/phase split of the channel
//! estimation error, and bit-error counting with Wilson intervals.

use crate::error::{Error, Result};
use crate::primitives::{wrap_phase, ComplexValue};
use serde::Serialize;

/// RMS error vector magnitude in percent, `100 √(Σ|y - s|²/Σ|s|²)`.
pub fn evm_rms(equalized: &[ComplexValue], reference: &[ComplexValue]) -> Result<f64> {
    if equalized.len() != reference.len() {
        return Err(Error::LengthMismatch {
            what: "equalized vs reference symbols",
            left: equalized.len(),
            right: reference.len(),
        });
    }
    let p_ref: f64 = reference.iter().map(|s| s.norm_sqr()).sum();
    if !(p_ref > 0.0) {
        return Err(Error::invalid("reference symbols carry no power"));
    }
    let p_err: f64 = equalized
        .iter()
        .zip(reference)
        .map(|(y, s)| (y - s).norm_sqr())
        .sum();
    Ok(100.0 * (p_err / p_ref).sqrt())
}

/// `|ĥ - h|²` split into magnitude and phase contributions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MseDecomposition {
    pub total: f64,
    /// `(r̂ - r)²`
    pub magnitude_term: f64,
    /// `4 r̂ r sin²(Δψ/2)`
    pub phase_term: f64,
}

impl MseDecomposition {
    /// Elementwise sum, for ensemble accumulation.
    pub fn add(&self, other: &MseDecomposition) -> MseDecomposition {
        MseDecomposition {
            total: self.total + other.total,
            magnitude_term: self.magnitude_term + other.magnitude_term,
            phase_term: self.phase_term + other.phase_term,
        }
    }

    pub fn scale(&self, k: f64) -> MseDecomposition {
        MseDecomposition {
            total: self.total * k,
            magnitude_term: self.magnitude_term * k,
            phase_term: self.phase_term * k,
        }
    }
}

/// Law-of-cosines split of one estimation error.
pub fn mse_decompose(h_hat: ComplexValue, h_true: ComplexValue) -> MseDecomposition {
    let (r_hat, r) = (h_hat.norm(), h_true.norm());
    let dpsi = wrap_phase(h_hat.arg() - h_true.arg());
    let s = (0.5 * dpsi).sin();
    MseDecomposition {
        total: (h_hat - h_true).norm_sqr(),
        magnitude_term: (r_hat - r) * (r_hat - r),
        phase_term: 4.0 * r_hat * r * s * s,
    }
}

/// Bit-error tally with a 95 % Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerCount {
    pub errors: u64,
    pub total: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Two-sided 95 % normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `errors` successes in `total` trials.
pub fn wilson_interval(errors: u64, total: u64, z: f64) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let n = total as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let den = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / den;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / den;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

impl BerCount {
    pub fn from_counts(errors: u64, total: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(errors, total, Z_95);
        BerCount {
            errors,
            total,
            ber: if total == 0 {
                0.0
            } else {
                errors as f64 / total as f64
            },
            ci_low,
            ci_high,
        }
    }

    /// Combine two tallies; associative and commutative.
    pub fn merge(&self, other: &BerCount) -> BerCount {
        BerCount::from_counts(self.errors + other.errors, self.total + other.total)
    }

    /// Binomial standard error `√(p(1-p)/n)` evaluated at probability `p`.
    pub fn standard_error_at(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.total.max(1) as f64).sqrt()
    }
}

/// Count mismatched bits.
pub fn ber_count(decoded: &[u8], reference: &[u8]) -> Result<BerCount> {
    if decoded.len() != reference.len() {
        return Err(Error::LengthMismatch {
            what: "decoded vs reference bits",
            left: decoded.len(),
            right: reference.len(),
        });
    }
    let errors = decoded
        .iter()
        .zip(reference)
        .filter(|(a, b)| a != b)
        .count() as u64;
    Ok(BerCount::from_counts(errors, decoded.len() as u64))
}
