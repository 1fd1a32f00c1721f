//! Reader-side receive chain: CFO correction, matched filtering, DC removal,
//! pilot statistics, channel estimation, ZF equalization and demodulation.

pub mod cfo;
pub mod equalize;
pub mod estimate;

pub use cfo::{correct_cfo, estimate_cfo, CfoEstimate};
pub use equalize::{zf_decomposition, zf_equalize, zf_equalize_tracked, ZfTerms};
pub use estimate::{
    estimate_channel, lmmse_estimate, lmmse_ordinary, ls_estimate, ls_ordinary, ChannelEstimate,
    EstimatorKind, NormalMatrix, Prior,
};

use crate::error::{Error, Result};
use crate::primitives::ComplexValue;
use crate::txchain::Alphabet;
use serde::{Deserialize, Serialize};

/// Relative floor on `Δ / (s0 s2)` below which the lifted model is rejected.
pub const IDENTIFIABILITY_TOLERANCE: f64 = 1e-9;

/// The five pilot sums and the Gram determinant `Δ = s0 s2 - s1²`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PilotStats {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub t0: ComplexValue,
    pub t1: ComplexValue,
    pub delta: f64,
}

impl PilotStats {
    /// Accumulate the sums over paired received/known pilots at time indices `times`.
    ///
    /// Empty inputs give all-zero statistics (a prior-only posterior).
    pub fn compute(
        received: &[ComplexValue],
        known: &[ComplexValue],
        times: &[f64],
    ) -> Result<Self> {
        if received.len() != known.len() {
            return Err(Error::LengthMismatch {
                what: "received vs known pilots",
                left: received.len(),
                right: known.len(),
            });
        }
        if times.len() != known.len() {
            return Err(Error::LengthMismatch {
                what: "pilot times vs pilots",
                left: times.len(),
                right: known.len(),
            });
        }
        let mut st = PilotStats::default();
        for ((&y, &x), &n) in received.iter().zip(known).zip(times) {
            let e = x.norm_sqr();
            let c = x.conj() * y;
            st.s0 += e;
            st.s1 += n * e;
            st.s2 += n * n * e;
            st.t0 += c;
            st.t1 += c * n;
        }
        st.delta = st.s0 * st.s2 - st.s1 * st.s1;
        Ok(st)
    }

    /// Fail unless `Δ > tol · s0 s2` and `s0 > 0`.
    pub fn require_identifiable(&self) -> Result<()> {
        let tolerance = IDENTIFIABILITY_TOLERANCE * self.s0 * self.s2;
        if !(self.s0 > 0.0) || !(self.delta > tolerance) {
            return Err(Error::NonIdentifiable {
                delta: self.delta,
                tolerance,
            });
        }
        Ok(())
    }
}

/// Origin of the pilot time index `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexOrigin {
    /// `n = 0` at the first pilot symbol of the frame.
    #[default]
    BlockStart,
    /// Indices shifted so they average to zero (`s1 = 0` for equal-energy pilots).
    Centered,
    /// `n = 0` at the first symbol of the frame (start of the preamble).
    FrameStart,
}

/// Time indices of the pilot positions under the chosen origin.
pub fn pilot_time_indices(pilot_positions: &[usize], origin: IndexOrigin) -> Vec<f64> {
    let Some(&first) = pilot_positions.first() else {
        return Vec::new();
    };
    let shift = match origin {
        IndexOrigin::BlockStart => first as f64,
        IndexOrigin::Centered => {
            pilot_positions.iter().map(|&i| i as f64).sum::<f64>() / pilot_positions.len() as f64
        }
        IndexOrigin::FrameStart => 0.0,
    };
    pilot_positions.iter().map(|&i| i as f64 - shift).collect()
}

/// The same shift applied to arbitrary frame positions (payload tracking).
pub fn frame_time_indices(
    positions: &[usize],
    pilot_positions: &[usize],
    origin: IndexOrigin,
) -> Vec<f64> {
    let shift = match (origin, pilot_positions.first()) {
        (_, None) | (IndexOrigin::FrameStart, _) => 0.0,
        (IndexOrigin::BlockStart, Some(&first)) => first as f64,
        (IndexOrigin::Centered, Some(_)) => {
            pilot_positions.iter().map(|&i| i as f64).sum::<f64>() / pilot_positions.len() as f64
        }
    };
    positions.iter().map(|&i| i as f64 - shift).collect()
}

/// Integrate-and-dump: average each group of `sps` samples.
pub fn matched_filter_downsample(
    samples: &[ComplexValue],
    sps: usize,
) -> Result<Vec<ComplexValue>> {
    if sps == 0 {
        return Err(Error::invalid("samples per symbol must be >= 1"));
    }
    if !samples.len().is_multiple_of(sps) {
        return Err(Error::LengthMismatch {
            what: "sample count vs multiple of samples per symbol",
            left: samples.len(),
            right: samples.len() / sps * sps,
        });
    }
    let scale = 1.0 / sps as f64;
    Ok(samples
        .chunks_exact(sps)
        .map(|c| c.iter().sum::<ComplexValue>() * scale)
        .collect())
}

/// Mean of the received symbols over the pilot positions.
///
/// The zero-mean pilot design cancels the signal, leaving the DC term.
pub fn estimate_dc(symbols: &[ComplexValue], pilot_indices: &[usize]) -> Result<ComplexValue> {
    if pilot_indices.is_empty() {
        return Err(Error::invalid("DC estimation needs at least one pilot"));
    }
    let mut acc = ComplexValue::new(0.0, 0.0);
    for &i in pilot_indices {
        acc += *symbols.get(i).ok_or_else(|| {
            Error::invalid(format!(
                "pilot index {i} outside record of {}",
                symbols.len()
            ))
        })?;
    }
    Ok(acc / pilot_indices.len() as f64)
}

/// Subtract a DC estimate from every symbol.
pub fn remove_dc(symbols: &[ComplexValue], dc_hat: ComplexValue) -> Vec<ComplexValue> {
    symbols.iter().map(|&y| y - dc_hat).collect()
}

/// Minimum-distance decision between the two alphabet points.
///
/// Decides bit 1 when the projection onto `p1 - p0` about the midpoint is
/// strictly positive; ties go to bit 0.
pub fn demodulate(symbols: &[ComplexValue], alphabet: &Alphabet) -> Vec<u8> {
    let d = alphabet.points[1] - alphabet.points[0];
    let mid = alphabet.midpoint();
    symbols
        .iter()
        .map(|&z| u8::from(((z - mid) * d.conj()).re > 0.0))
        .collect()
}

/// Residual power after the two-parameter LS fit, divided by `P - 2`.
pub fn estimate_noise_variance(
    received: &[ComplexValue],
    known: &[ComplexValue],
    times: &[f64],
) -> Result<f64> {
    if known.len() < 5 {
        return Err(Error::invalid(format!(
            "noise variance needs at least 5 pilots, got {}",
            known.len()
        )));
    }
    let st = PilotStats::compute(received, known, times)?;
    st.require_identifiable()?;
    let th0 = (st.t0 * st.s2 - st.t1 * st.s1) / st.delta;
    let th1 = (st.t1 * st.s0 - st.t0 * st.s1) / st.delta;
    let rss: f64 = received
        .iter()
        .zip(known)
        .zip(times)
        .map(|((&y, &x), &n)| (y - (th0 + th1 * n) * x).norm_sqr())
        .sum();
    Ok(rss / (known.len() - 2) as f64)
}
