//! Pilot-aided channel estimators.
//!
//! The lifted estimators fit `θ0 x[n] + θ1 n x[n]` with `θ0 = h` and
//! `θ1 = jφ1 h`, which absorbs a small linear phase drift across the pilots.
//! The ordinary estimators fit `h x[n]` alone and are kept as baselines.

use super::PilotStats;
use crate::error::{Error, Result};
use crate::fading::ChannelParams;
use crate::primitives::ComplexValue;
use serde::{Deserialize, Serialize};

/// Which estimator produced a [`ChannelEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Genie: the true channel.
    PerfectCsi,
    /// No estimation: the prior mean is used as the channel.
    NoCe,
    /// Lifted two-parameter least squares.
    Ls,
    /// Scalar least squares `t0/s0`.
    LsOrdinary,
    /// Lifted two-parameter LMMSE.
    Lmmse,
    /// Scalar LMMSE shrinkage.
    LmmseOrdinary,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 6] = [
        EstimatorKind::PerfectCsi,
        EstimatorKind::NoCe,
        EstimatorKind::Ls,
        EstimatorKind::LsOrdinary,
        EstimatorKind::Lmmse,
        EstimatorKind::LmmseOrdinary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::PerfectCsi => "perfect-csi",
            EstimatorKind::NoCe => "no-ce",
            EstimatorKind::Ls => "ls",
            EstimatorKind::LsOrdinary => "ls-ordinary",
            EstimatorKind::Lmmse => "lmmse",
            EstimatorKind::LmmseOrdinary => "lmmse-ordinary",
        }
    }

    /// Whether the estimator also returns a phase-slope estimate.
    pub fn is_lifted(self) -> bool {
        matches!(self, EstimatorKind::Ls | EstimatorKind::Lmmse)
    }
}

/// Channel estimate and the variance its estimator predicts for it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelEstimate {
    pub h_hat: ComplexValue,
    /// Phase slope in radians per symbol, lifted estimators only.
    pub phi1_hat: Option<f64>,
    pub predicted_var: f64,
    pub method: EstimatorKind,
}

/// Gaussian prior on `θ = [h, θ1]` with diagonal covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    pub mu_h: ComplexValue,
    pub sigma_h2: f64,
    /// Prior mean of `θ1`; near zero for a slope fluctuating around zero.
    pub mu_phi: ComplexValue,
    /// Prior variance of `θ1`.
    pub sigma_phi2: f64,
}

impl Prior {
    pub fn new(
        mu_h: ComplexValue,
        sigma_h2: f64,
        mu_phi: ComplexValue,
        sigma_phi2: f64,
    ) -> Result<Self> {
        let p = Prior {
            mu_h,
            sigma_h2,
            mu_phi,
            sigma_phi2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_h2 > 0.0 && self.sigma_h2.is_finite())
            || !(self.sigma_phi2 > 0.0 && self.sigma_phi2.is_finite())
        {
            return Err(Error::invalid("prior variances must be finite and > 0"));
        }
        Ok(())
    }

    /// Prior matched to the channel law: `μ_h = E[h_eq]`, `σ_h² = Var(h_eq)`.
    pub fn from_channel(p: &ChannelParams, sigma_phi2: f64) -> Result<Self> {
        Prior::new(
            p.mean_h_eq(),
            p.var_h_eq(),
            ComplexValue::new(0.0, 0.0),
            sigma_phi2,
        )
    }

    /// Sample mean and variance of a calibration set of channel estimates.
    pub fn calibrate(estimates: &[ComplexValue], sigma_phi2: f64) -> Result<Self> {
        if estimates.len() < 2 {
            return Err(Error::invalid(
                "prior calibration needs at least two estimates",
            ));
        }
        let n = estimates.len() as f64;
        let mean = estimates.iter().sum::<ComplexValue>() / n;
        let var = estimates.iter().map(|h| (h - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
        Prior::new(mean, var, ComplexValue::new(0.0, 0.0), sigma_phi2)
    }
}

fn check_noise(noise_var: f64) -> Result<()> {
    if !(noise_var >= 0.0 && noise_var.is_finite()) {
        return Err(Error::invalid("noise variance must be finite and >= 0"));
    }
    Ok(())
}

/// Lifted LS: `θ̂0 = (s2 t0 - s1 t1)/Δ`, `φ̂1 = Im(θ̂1/θ̂0)`, variance `σ_w² s2/Δ`.
pub fn ls_estimate(stats: &PilotStats, noise_var: f64) -> Result<ChannelEstimate> {
    check_noise(noise_var)?;
    stats.require_identifiable()?;
    let st = stats;
    let th0 = (st.t0 * st.s2 - st.t1 * st.s1) / st.delta;
    let th1 = (st.t1 * st.s0 - st.t0 * st.s1) / st.delta;
    let phi1 = if th0.norm() > 0.0 {
        (th1 / th0).im
    } else {
        0.0
    };
    Ok(ChannelEstimate {
        h_hat: th0,
        phi1_hat: Some(phi1),
        predicted_var: noise_var * st.s2 / st.delta,
        method: EstimatorKind::Ls,
    })
}

/// Scalar LS `t0/s0` with variance `σ_w²/s0`.
pub fn ls_ordinary(stats: &PilotStats, noise_var: f64) -> Result<ChannelEstimate> {
    check_noise(noise_var)?;
    if !(stats.s0 > 0.0) {
        return Err(Error::invalid("ordinary LS needs nonzero pilot energy"));
    }
    Ok(ChannelEstimate {
        h_hat: stats.t0 / stats.s0,
        phi1_hat: None,
        predicted_var: noise_var / stats.s0,
        method: EstimatorKind::LsOrdinary,
    })
}

/// Posterior precision matrix `Λ⁻¹ + XᴴX/σ_w²` of the lifted model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalMatrix {
    pub b00: f64,
    pub b11: f64,
    pub b01: f64,
    pub delta_b: f64,
}

impl NormalMatrix {
    pub fn new(stats: &PilotStats, prior: &Prior, noise_var: f64) -> Result<Self> {
        prior.validate()?;
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::invalid("LMMSE needs a finite noise variance > 0"));
        }
        let b00 = 1.0 / prior.sigma_h2 + stats.s0 / noise_var;
        let b11 = 1.0 / prior.sigma_phi2 + stats.s2 / noise_var;
        let b01 = stats.s1 / noise_var;
        let delta_b = b00 * b11 - b01 * b01;
        if !(delta_b > 0.0 && delta_b.is_finite()) {
            return Err(Error::numeric(
                "lmmse normal matrix",
                format!("determinant {delta_b:e}"),
            ));
        }
        Ok(NormalMatrix {
            b00,
            b11,
            b01,
            delta_b,
        })
    }

    /// Posterior variance of `h`, `b11/Δ_B`.
    pub fn channel_variance(&self) -> f64 {
        self.b11 / self.delta_b
    }
}

/// Lifted LMMSE posterior mean `(b11 a0 - b01 a1)/Δ_B` with variance `b11/Δ_B`.
pub fn lmmse_estimate(
    stats: &PilotStats,
    prior: &Prior,
    noise_var: f64,
) -> Result<ChannelEstimate> {
    let nm = NormalMatrix::new(stats, prior, noise_var)?;
    let a0 = prior.mu_h / prior.sigma_h2 + stats.t0 / noise_var;
    let a1 = prior.mu_phi / prior.sigma_phi2 + stats.t1 / noise_var;
    let th0 = (a0 * nm.b11 - a1 * nm.b01) / nm.delta_b;
    let th1 = (a1 * nm.b00 - a0 * nm.b01) / nm.delta_b;
    let phi1 = if th0.norm() > 0.0 {
        (th1 / th0).im
    } else {
        0.0
    };
    Ok(ChannelEstimate {
        h_hat: th0,
        phi1_hat: Some(phi1),
        predicted_var: nm.channel_variance(),
        method: EstimatorKind::Lmmse,
    })
}

/// Scalar shrinkage `(σ_w² μ_h + σ_h² t0)/(σ_w² + σ_h² s0)`.
pub fn lmmse_ordinary(
    stats: &PilotStats,
    prior: &Prior,
    noise_var: f64,
) -> Result<ChannelEstimate> {
    prior.validate()?;
    check_noise(noise_var)?;
    let den = noise_var + prior.sigma_h2 * stats.s0;
    if !(den > 0.0) {
        return Err(Error::invalid("scalar LMMSE needs noise or pilot energy"));
    }
    Ok(ChannelEstimate {
        h_hat: (prior.mu_h * noise_var + stats.t0 * prior.sigma_h2) / den,
        phi1_hat: None,
        predicted_var: prior.sigma_h2 * noise_var / den,
        method: EstimatorKind::LmmseOrdinary,
    })
}

/// Dispatch on `kind`; `h_true` is only read by the genie estimator.
pub fn estimate_channel(
    kind: EstimatorKind,
    stats: &PilotStats,
    prior: &Prior,
    noise_var: f64,
    h_true: ComplexValue,
) -> Result<ChannelEstimate> {
    match kind {
        EstimatorKind::PerfectCsi => Ok(ChannelEstimate {
            h_hat: h_true,
            phi1_hat: None,
            predicted_var: 0.0,
            method: kind,
        }),
        EstimatorKind::NoCe => Ok(ChannelEstimate {
            h_hat: prior.mu_h,
            phi1_hat: None,
            predicted_var: prior.sigma_h2,
            method: kind,
        }),
        EstimatorKind::Ls => ls_estimate(stats, noise_var),
        EstimatorKind::LsOrdinary => ls_ordinary(stats, noise_var),
        EstimatorKind::Lmmse => lmmse_estimate(stats, prior, noise_var),
        EstimatorKind::LmmseOrdinary => lmmse_ordinary(stats, prior, noise_var),
    }
}
