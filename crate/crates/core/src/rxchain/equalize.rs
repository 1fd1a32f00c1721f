//! Zero-forcing equalization by the frame-constant channel estimate.

use super::ChannelEstimate;
use crate::error::{Error, Result};
use crate::primitives::ComplexValue;

fn inverse(est: &ChannelEstimate, floor: f64) -> Result<ComplexValue> {
    let magnitude = est.h_hat.norm();
    if !(magnitude >= floor) || magnitude == 0.0 {
        return Err(Error::DeepFade { magnitude, floor });
    }
    Ok(est.h_hat.inv())
}

/// `z = y / ĥ` per symbol; fails with [`Error::DeepFade`] when `|ĥ| < floor`.
pub fn zf_equalize(
    payload: &[ComplexValue],
    est: &ChannelEstimate,
    floor: f64,
) -> Result<Vec<ComplexValue>> {
    let p = inverse(est, floor)?;
    Ok(payload.iter().map(|&y| y * p).collect())
}

/// ZF that also removes the estimated phase slope, `z = y e^{-jφ̂1 n}/ĥ`.
///
/// Falls back to [`zf_equalize`] for estimators without a slope estimate.
pub fn zf_equalize_tracked(
    payload: &[ComplexValue],
    times: &[f64],
    est: &ChannelEstimate,
    floor: f64,
) -> Result<Vec<ComplexValue>> {
    let Some(phi1) = est.phi1_hat else {
        return zf_equalize(payload, est, floor);
    };
    if times.len() != payload.len() {
        return Err(Error::LengthMismatch {
            what: "payload times vs payload",
            left: times.len(),
            right: payload.len(),
        });
    }
    let p = inverse(est, floor)?;
    Ok(payload
        .iter()
        .zip(times)
        .map(|(&y, &n)| y * p * ComplexValue::from_polar(1.0, -phi1 * n))
        .collect())
}

/// The equalized symbol split into transmitted symbol, mismatch and noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZfTerms {
    pub z: ComplexValue,
    pub signal: ComplexValue,
    /// `(h/ĥ - 1) x`
    pub mismatch: ComplexValue,
    /// `w/ĥ`
    pub noise: ComplexValue,
}

impl ZfTerms {
    /// `z - x - (h/ĥ - 1)x - w/ĥ`, zero up to rounding.
    pub fn residual(&self) -> ComplexValue {
        self.z - self.signal - self.mismatch - self.noise
    }
}

/// Equalize `y = h x + w` with `ĥ` and return each term of the decomposition.
pub fn zf_decomposition(
    x: ComplexValue,
    h: ComplexValue,
    h_hat: ComplexValue,
    w: ComplexValue,
) -> ZfTerms {
    let p = h_hat.inv();
    ZfTerms {
        z: (h * x + w) * p,
        signal: x,
        mismatch: (h * p - 1.0) * x,
        noise: w * p,
    }
}
