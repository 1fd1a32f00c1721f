//! Carrier-frequency-offset estimation from the first-lag autocorrelation
//! and derotation with an absolute phase reference.

use crate::error::{Error, Result};
use crate::primitives::ComplexValue;
use serde::Serialize;
use std::f64::consts::PI;

/// `|ū|` relative to the mean sample power below which the estimate is flagged.
pub const LOW_CONFIDENCE_RATIO: f64 = 1e-3;

/// Frequency estimate with its correlation magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CfoEstimate {
    pub delta_f_hz: f64,
    /// `|ū|`, the magnitude of the averaged lag product.
    pub magnitude: f64,
    /// Set when `|ū|` is tiny compared with the window power.
    pub low_confidence: bool,
}

/// `Δf̂ = arg(ū)/(2π T_s)` with `ū` the mean of `y[n] y*[n-1]` over
/// `n = n0+1 ..= n0+W`.
pub fn estimate_cfo(
    samples: &[ComplexValue],
    n0: usize,
    window: usize,
    sample_period: f64,
) -> Result<CfoEstimate> {
    if window < 2 {
        return Err(Error::invalid("CFO window must be >= 2"));
    }
    if !(sample_period > 0.0) {
        return Err(Error::invalid("sample period must be > 0"));
    }
    let end = n0 + window;
    if end >= samples.len() {
        return Err(Error::invalid(format!(
            "CFO window [{n0}, {end}] exceeds record of {} samples",
            samples.len()
        )));
    }
    let mut acc = ComplexValue::new(0.0, 0.0);
    let mut power = 0.0;
    for n in n0 + 1..=end {
        acc += samples[n] * samples[n - 1].conj();
        power += samples[n].norm_sqr();
    }
    let mean = acc / window as f64;
    let power = power / window as f64;
    let magnitude = mean.norm();
    Ok(CfoEstimate {
        delta_f_hz: mean.arg() / (2.0 * PI * sample_period),
        magnitude,
        low_confidence: !(magnitude > LOW_CONFIDENCE_RATIO * power),
    })
}

/// Remove the estimated rotation and reference the phase to sample `n0`.
///
/// Returns the corrected record and `Φ̂0 = arg(y0[n0])`; after correction the
/// sample at `n0` is real and non-negative.
pub fn correct_cfo(
    samples: &[ComplexValue],
    delta_f_hat: f64,
    n0: usize,
    sample_period: f64,
) -> Result<(Vec<ComplexValue>, f64)> {
    let reference = samples.get(n0).ok_or_else(|| {
        Error::invalid(format!(
            "reference index {n0} outside record of {}",
            samples.len()
        ))
    })?;
    let phi0 = reference.arg();
    let w = 2.0 * PI * delta_f_hat * sample_period;
    let out = samples
        .iter()
        .enumerate()
        .map(|(n, &y)| y * ComplexValue::from_polar(1.0, -(w * (n as f64 - n0 as f64) + phi0)))
        .collect();
    Ok((out, phi0))
}
