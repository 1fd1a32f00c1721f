//! Average BER and effective-SNR analytics for the cascaded channel.
//!
//! The quadrature path `∫ P_e(r² Es/N0) p(r) dr` is the reference for every
//! BER number produced here. The Meijer-G closed forms are approximations
//! whose deviation from the reference is measured by [`fidelity_table`].

pub mod meijer;

use crate::error::{Error, Result};
use crate::fading::{envelope_expectation, mean_square_gain, sample_h_eq, ChannelParams};
use crate::primitives::Modulation;
use crate::quadrature::QuadOptions;
use crate::rxchain::{NormalMatrix, PilotStats, Prior};
use rand::Rng;
use serde::Serialize;

pub use crate::special::q_function;
pub use meijer::{meijer_g_1_3_3_0, MeijerParams};

/// One point of a BER curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerCurvePoint {
    pub gamma_eff_db: f64,
    pub ber_mc: Option<f64>,
    pub ber_quadrature: f64,
    pub ber_closed_form: f64,
}

/// Two-exponential approximation `(1/12)e^{-x²/2} + (1/4)e^{-2x²/3}` of `Q(x)`.
pub fn q_chiani(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::invalid(format!(
            "two-exponential Q approximation needs x >= 0, got {x}"
        )));
    }
    Ok((-0.5 * x * x).exp() / 12.0 + 0.25 * (-2.0 * x * x / 3.0).exp())
}

/// Conditional bit error probability at instantaneous SNR `gamma`.
///
/// OOK with the midpoint threshold: `Q(√(γ/2))`; coherent BPSK: `Q(√(2γ))`.
pub fn conditional_ber(scheme: Modulation, gamma: f64) -> f64 {
    match scheme {
        Modulation::Ook => q_function((0.5 * gamma).sqrt()),
        Modulation::Bpsk => q_function((2.0 * gamma).sqrt()),
    }
}

fn ber_quad_options() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-18,
        rel_tol: 1e-10,
        max_panels: 4000,
    }
}

/// `E[e^{-s r²}]` by quadrature against the envelope density.
pub fn laplace_r2(s: f64, p: &ChannelParams) -> Result<f64> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!(
            "Laplace argument must be finite and >= 0, got {s}"
        )));
    }
    if s == 0.0 {
        return Ok(1.0);
    }
    envelope_expectation(p, |r| (-s * r * r).exp(), ber_quad_options())
}

/// Monte Carlo estimate of `E[e^{-s r²}]` with its standard error.
pub fn laplace_r2_monte_carlo<R: Rng + ?Sized>(
    s: f64,
    p: &ChannelParams,
    n: usize,
    rng: &mut R,
) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..n {
        let v = (-s * sample_h_eq(p, rng).norm_sqr()).exp();
        sum += v;
        sum2 += v * v;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sum2 / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

/// Average BER `∫ P_e(r² Es/N0) p(r) dr`; the reference BER of the crate.
pub fn avg_ber_quadrature(scheme: Modulation, p: &ChannelParams, es_over_n0: f64) -> Result<f64> {
    if !(es_over_n0 >= 0.0 && es_over_n0.is_finite()) {
        return Err(Error::invalid("Es/N0 must be finite and >= 0"));
    }
    envelope_expectation(
        p,
        |r| conditional_ber(scheme, es_over_n0 * r * r),
        ber_quad_options(),
    )
}

/// Average BER parameterized by the average effective SNR instead of Es/N0.
pub fn avg_ber_at_gamma(scheme: Modulation, p: &ChannelParams, gamma_eff: f64) -> Result<f64> {
    avg_ber_quadrature(scheme, p, gamma_eff / mean_square_gain(p))
}

/// Candidate `(a; b)` readings of the OOK closed form's parameter row.
///
/// The row lists `1, ½, 0` plus an upper parameter; each candidate takes one
/// entry of the multiset `{1, 1, ½, 0}` as `a` and the rest as `b`.
pub const OOK_CONVENTIONS: [MeijerParams; 3] = [
    MeijerParams {
        a: 1.0,
        b: [1.0, 0.5, 0.0],
    },
    MeijerParams {
        a: 0.5,
        b: [1.0, 1.0, 0.0],
    },
    MeijerParams {
        a: 0.0,
        b: [1.0, 1.0, 0.5],
    },
];

/// Index into [`OOK_CONVENTIONS`] used by [`avg_ber_ook_closed`].
pub const OOK_CONVENTION: usize = 1;

/// Parameters of the BPSK closed form.
pub const BPSK_PARAMS: MeijerParams = MeijerParams {
    a: 1.0,
    b: [1.0, 1.0, 1.0],
};

/// OOK closed form `(1/12) G(γ̄/4 | a; b)` under a chosen parameter reading.
pub fn avg_ber_ook_closed_with(gamma_eff: f64, params: &MeijerParams) -> Result<f64> {
    if !(gamma_eff > 0.0) {
        return Err(Error::invalid("average effective SNR must be > 0"));
    }
    Ok(meijer_g_1_3_3_0(0.25 * gamma_eff, params.a, params.b)? / 12.0)
}

/// OOK closed form with the default parameter reading.
pub fn avg_ber_ook_closed(gamma_eff: f64) -> Result<f64> {
    avg_ber_ook_closed_with(gamma_eff, &OOK_CONVENTIONS[OOK_CONVENTION])
}

/// BPSK closed form `(1/12) G(γ̄ | 1; 1,1,1) + (1/4) G(4γ̄/3 | 1; 1,1,1)`.
pub fn avg_ber_bpsk_closed(gamma_eff: f64) -> Result<f64> {
    if !(gamma_eff > 0.0) {
        return Err(Error::invalid("average effective SNR must be > 0"));
    }
    let p = &BPSK_PARAMS;
    let g1 = meijer_g_1_3_3_0(gamma_eff, p.a, p.b)?;
    let g2 = meijer_g_1_3_3_0(4.0 * gamma_eff / 3.0, p.a, p.b)?;
    Ok(g1 / 12.0 + 0.25 * g2)
}

/// BPSK BER through the two-exponential Q approximation and the quadrature
/// Laplace transform: `(1/12) L(Es/N0) + (1/4) L(4Es/(3N0))`.
pub fn avg_ber_bpsk_laplace(p: &ChannelParams, es_over_n0: f64) -> Result<f64> {
    Ok(laplace_r2(es_over_n0, p)? / 12.0 + 0.25 * laplace_r2(4.0 * es_over_n0 / 3.0, p)?)
}

/// Meijer-G form `G(s ḡ | 1; 1,1,1)` proposed for `E[e^{-s r²}]`, `ḡ = E[r²]`.
pub fn laplace_r2_meijer(s: f64, p: &ChannelParams) -> Result<f64> {
    let b = &BPSK_PARAMS;
    meijer_g_1_3_3_0(s * mean_square_gain(p), b.a, b.b)
}

/// Measured deviation of one closed form from the quadrature reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelityRow {
    pub k_db: f64,
    pub gamma_eff_db: f64,
    pub ook_quadrature: f64,
    /// Closed-form OOK value for each entry of [`OOK_CONVENTIONS`].
    pub ook_closed: [f64; 3],
    pub bpsk_quadrature: f64,
    pub bpsk_closed: f64,
    /// Two-exponential approximation evaluated with the quadrature Laplace transform.
    pub bpsk_laplace: f64,
}

impl FidelityRow {
    /// `closed/quadrature - 1` for OOK under convention `i`.
    pub fn ook_rel_dev(&self, i: usize) -> f64 {
        self.ook_closed[i] / self.ook_quadrature - 1.0
    }

    pub fn bpsk_rel_dev(&self) -> f64 {
        self.bpsk_closed / self.bpsk_quadrature - 1.0
    }

    pub fn bpsk_laplace_rel_dev(&self) -> f64 {
        self.bpsk_laplace / self.bpsk_quadrature - 1.0
    }
}

/// Closed-form vs quadrature comparison over a `(K, γ̄)` grid of unit-power
/// hops with equal K-factors.
pub fn fidelity_table(k_db: &[f64], gamma_db: &[f64]) -> Result<Vec<FidelityRow>> {
    let mut rows = Vec::with_capacity(k_db.len() * gamma_db.len());
    for &kd in k_db {
        let k = crate::primitives::db_to_linear(kd);
        let p = ChannelParams::unit_power(k, k)?;
        for &gd in gamma_db {
            let g = crate::primitives::db_to_linear(gd);
            let mut ook_closed = [0.0; 3];
            for (slot, conv) in ook_closed.iter_mut().zip(OOK_CONVENTIONS.iter()) {
                *slot = avg_ber_ook_closed_with(g, conv)?;
            }
            rows.push(FidelityRow {
                k_db: kd,
                gamma_eff_db: gd,
                ook_quadrature: avg_ber_at_gamma(Modulation::Ook, &p, g)?,
                ook_closed,
                bpsk_quadrature: avg_ber_at_gamma(Modulation::Bpsk, &p, g)?,
                bpsk_closed: avg_ber_bpsk_closed(g)?,
                bpsk_laplace: avg_ber_bpsk_laplace(&p, g / mean_square_gain(&p))?,
            });
        }
    }
    Ok(rows)
}

/// Effective SNR after channel-estimation error:
/// `γ̄ / (1 + γ̄ σ_e²/σ_h²)`.
pub fn effective_snr_with_ce(gamma_eff: f64, sigma_e2: f64, sigma_h2: f64) -> f64 {
    gamma_eff / (1.0 + gamma_eff * sigma_e2 / sigma_h2)
}

/// Training-time law `γ̄ τ/(τ + α)` with `α = γ̄ N0/(p0 σ_h²)`.
pub fn effective_snr_training(gamma_eff: f64, tau_e: f64, alpha: f64) -> f64 {
    if tau_e <= 0.0 {
        return 0.0;
    }
    gamma_eff * tau_e / (tau_e + alpha)
}

/// Effective SNR with the lifted LS estimate.
///
/// Pilot SNRs are referenced to unit channel power: the pilot noise variance
/// is `1/γ̄_e`, so `σ_e²/σ_h² = s2/(γ̄_e Δ)`.
pub fn effective_snr_ls(gamma_eff: f64, gamma_e: f64, stats: &PilotStats) -> Result<f64> {
    if !(gamma_e > 0.0) {
        return Err(Error::invalid("pilot SNR must be > 0"));
    }
    stats.require_identifiable()?;
    Ok(effective_snr_with_ce(
        gamma_eff,
        stats.s2 / (gamma_e * stats.delta),
        1.0,
    ))
}

/// Effective SNR with the lifted LMMSE estimate, in the same normalization as
/// [`effective_snr_ls`]; `prior` is expressed relative to unit channel power.
pub fn effective_snr_lmmse(
    gamma_eff: f64,
    gamma_e: f64,
    stats: &PilotStats,
    prior: &Prior,
) -> Result<f64> {
    if !(gamma_e > 0.0) {
        return Err(Error::invalid("pilot SNR must be > 0"));
    }
    let nm = NormalMatrix::new(stats, prior, 1.0 / gamma_e)?;
    Ok(effective_snr_with_ce(gamma_eff, nm.channel_variance(), 1.0))
}
