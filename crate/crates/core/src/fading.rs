//! Cascaded (product) Rician channel of a monostatic backscatter link.
//!
//! Each hop is `h ~ CN(V, σ²)` with total diffuse variance `σ²` (half per real
//! dimension), so `E|h|² = σ² + |V|²` and the Rician factor is `K = |V|²/σ²`.
//! The effective channel is the product `h_eq = h_tt · h_tr` of the forward
//! and backscatter hops.
//!
//! With this variance convention the envelope `r = |h_eq|` has density
//!
//! ```text
//! p(r) = 4u/(σ_tt σ_tr) e^{-(K_tt+K_tr)} Σ_i Σ_l (K_tt u)^i (K_tr u)^l / (i! l!)² K_{i-l}(2u),
//! u = r / (σ_tt σ_tr)
//! ```
//!
//! which is summed here in the log domain, shell by shell in `i + l`.

use crate::error::{Error, Result};
use crate::primitives::{complex_normal, ComplexValue};
use crate::quadrature::{integrate, QuadOptions};
use crate::special::{bessel_i0_scaled, ln_bessel_k_sequence, ln_gamma};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Largest index reached in either summation direction before giving up.
pub const MAX_SERIES_INDEX: usize = 400;
/// A shell is negligible once it contributes less than this fraction of the running sum.
pub const SHELL_REL_TOL: f64 = 1e-13;
/// Tail mass left beyond [`envelope_support`].
pub const SUPPORT_TAIL: f64 = 1e-12;

/// One Rician hop, parameterized by LoS amplitude and diffuse power.
///
/// Storing `|V|` rather than `K` keeps the degenerate `σ² = 0` (purely
/// deterministic) hop representable; `K` is always derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopParams {
    los_amplitude: f64,
    sigma2: f64,
    los_phase: f64,
}

impl HopParams {
    /// Hop with Rician factor `k` (linear) and diffuse power `sigma2`.
    pub fn new(k: f64, sigma2: f64, los_phase: f64) -> Result<Self> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::invalid(format!(
                "K-factor must be finite and >= 0, got {k}"
            )));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid(format!(
                "diffuse power must be > 0, got {sigma2}"
            )));
        }
        Self::from_los((k * sigma2).sqrt(), sigma2, los_phase)
    }

    /// Hop given LoS amplitude `|V|` and diffuse power (which may be zero).
    pub fn from_los(los_amplitude: f64, sigma2: f64, los_phase: f64) -> Result<Self> {
        if !(los_amplitude >= 0.0 && los_amplitude.is_finite()) {
            return Err(Error::invalid("LoS amplitude must be finite and >= 0"));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid("diffuse power must be finite and >= 0"));
        }
        if !los_phase.is_finite() {
            return Err(Error::invalid("LoS phase must be finite"));
        }
        if los_amplitude == 0.0 && sigma2 == 0.0 {
            return Err(Error::invalid("hop has neither LoS nor diffuse power"));
        }
        Ok(HopParams {
            los_amplitude,
            sigma2,
            los_phase,
        })
    }

    /// Deterministic hop equal to the LoS phasor.
    pub fn deterministic(los_amplitude: f64, los_phase: f64) -> Result<Self> {
        Self::from_los(los_amplitude, 0.0, los_phase)
    }

    /// Unit mean-power hop (`σ² + |V|² = 1`) with factor `k`.
    pub fn unit_power(k: f64) -> Result<Self> {
        Self::new(k, 1.0 / (1.0 + k), 0.0)
    }

    pub fn k_factor(&self) -> f64 {
        if self.sigma2 == 0.0 {
            f64::INFINITY
        } else {
            self.los_amplitude * self.los_amplitude / self.sigma2
        }
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn los_amplitude(&self) -> f64 {
        self.los_amplitude
    }

    pub fn los_phase(&self) -> f64 {
        self.los_phase
    }

    /// The LoS phasor `V`.
    pub fn los(&self) -> ComplexValue {
        ComplexValue::from_polar(self.los_amplitude, self.los_phase)
    }

    /// `E|h|² = σ² + |V|²`.
    pub fn mean_power(&self) -> f64 {
        self.sigma2 + self.los_amplitude * self.los_amplitude
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.los_phase = phase;
        self
    }

    fn is_deterministic(&self) -> bool {
        self.sigma2 == 0.0
    }

    /// Rician density of `|h|` at `x`.
    fn envelope_density(&self, x: f64) -> f64 {
        let s2 = self.sigma2;
        let nu = self.los_amplitude;
        if x <= 0.0 {
            return 0.0;
        }
        let d = x - nu;
        2.0 * x / s2 * (-d * d / s2).exp() * bessel_i0_scaled(2.0 * x * nu / s2)
    }
}

/// Parameters of both hops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub tt: HopParams,
    pub tr: HopParams,
}

impl ChannelParams {
    /// Both hops from linear K-factors and diffuse powers; LoS phases zero.
    pub fn new(k_tt: f64, k_tr: f64, sigma2_tt: f64, sigma2_tr: f64) -> Result<Self> {
        Ok(ChannelParams {
            tt: HopParams::new(k_tt, sigma2_tt, 0.0)?,
            tr: HopParams::new(k_tr, sigma2_tr, 0.0)?,
        })
    }

    /// Unit mean-power hops, so `E|h_eq|² = 1`.
    pub fn unit_power(k_tt: f64, k_tr: f64) -> Result<Self> {
        Ok(ChannelParams {
            tt: HopParams::unit_power(k_tt)?,
            tr: HopParams::unit_power(k_tr)?,
        })
    }

    pub fn with_los_phases(mut self, phase_tt: f64, phase_tr: f64) -> Self {
        self.tt = self.tt.with_phase(phase_tt);
        self.tr = self.tr.with_phase(phase_tr);
        self
    }

    pub fn k_tt(&self) -> f64 {
        self.tt.k_factor()
    }

    pub fn k_tr(&self) -> f64 {
        self.tr.k_factor()
    }

    /// Mean of `h_eq`, the product of the LoS phasors.
    pub fn mean_h_eq(&self) -> ComplexValue {
        self.tt.los() * self.tr.los()
    }

    /// Variance of `h_eq` around its mean.
    pub fn var_h_eq(&self) -> f64 {
        mean_square_gain(self) - self.mean_h_eq().norm_sqr()
    }

    fn is_deterministic(&self) -> bool {
        self.tt.is_deterministic() && self.tr.is_deterministic()
    }
}

/// Draw one hop coefficient `V + CN(0, σ²)`.
pub fn sample_hop<R: Rng + ?Sized>(hop: &HopParams, rng: &mut R) -> ComplexValue {
    let los = hop.los();
    if hop.sigma2 == 0.0 {
        return los;
    }
    los + complex_normal(rng, hop.sigma2)
}

/// Draw `h_eq = h_tt · h_tr` from independent hops.
pub fn sample_h_eq<R: Rng + ?Sized>(p: &ChannelParams, rng: &mut R) -> ComplexValue {
    let a = sample_hop(&p.tt, rng);
    let b = sample_hop(&p.tr, rng);
    a * b
}

/// `E|h_eq|² = (σ_tt² + |V_tt|²)(σ_tr² + |V_tr|²) = (1+K_tt)(1+K_tr) σ_tt² σ_tr²`.
pub fn mean_square_gain(p: &ChannelParams) -> f64 {
    p.tt.mean_power() * p.tr.mean_power()
}

/// Average effective SNR `E|h_eq|² · Es/N0`.
pub fn avg_effective_snr(p: &ChannelParams, es_over_n0: f64) -> f64 {
    mean_square_gain(p) * es_over_n0
}

/// Upper end of the envelope support: `P(r > r_max) < 1e-12`.
///
/// Each hop exceeds `|V| + σt` with probability at most `e^{-t²}`, so a
/// union bound over both hops fixes `t`.
pub fn envelope_support(p: &ChannelParams) -> f64 {
    let t = (2.0 / SUPPORT_TAIL).ln().sqrt();
    let hop = |h: &HopParams| h.los_amplitude + h.sigma2.sqrt() * t;
    hop(&p.tt) * hop(&p.tr)
}

fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Density of `r = |h_eq|`.
///
/// Uses the double Bessel-K series; when the series would run past
/// [`MAX_SERIES_INDEX`] (large K-factors) it switches to
/// [`envelope_pdf_product`]. Errors when both hops are deterministic (the law
/// is then a point mass).
pub fn envelope_pdf(r: f64, p: &ChannelParams) -> Result<f64> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!(
            "envelope must be finite and >= 0, got {r}"
        )));
    }
    if p.is_deterministic() {
        return Err(Error::invalid(
            "both hops deterministic: envelope has no density",
        ));
    }
    if p.tt.is_deterministic() || p.tr.is_deterministic() {
        let (fixed, random) = if p.tt.is_deterministic() {
            (&p.tt, &p.tr)
        } else {
            (&p.tr, &p.tt)
        };
        let a = fixed.los_amplitude;
        return Ok(random.envelope_density(r / a) / a);
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let k1 = p.tt.k_factor();
    let k2 = p.tr.k_factor();
    let sigma = (p.tt.sigma2 * p.tr.sigma2).sqrt();
    let u = r / sigma;
    // the dominant series index grows like √(K u); past the cap use the product integral
    if (k1 * u).sqrt() + (k2 * u).sqrt() > 0.6 * MAX_SERIES_INDEX as f64 {
        return envelope_pdf_product(r, p);
    }
    match envelope_pdf_series(r, k1, k2, sigma, u) {
        Err(Error::Numeric { .. }) => envelope_pdf_product(r, p),
        other => other,
    }
}

fn envelope_pdf_series(r: f64, k1: f64, k2: f64, sigma: f64, u: f64) -> Result<f64> {
    let x = 2.0 * u;
    let ln_pref = (4.0 * u / sigma).ln() - (k1 + k2);

    let i_max = if k1 > 0.0 { MAX_SERIES_INDEX } else { 0 };
    let l_max = if k2 > 0.0 { MAX_SERIES_INDEX } else { 0 };
    let ln_k = ln_bessel_k_sequence(x, i_max.max(l_max));
    let weights = |k: f64, n_max: usize| -> Vec<f64> {
        let lk = (k * u).ln();
        (0..=n_max)
            .map(|n| {
                if n == 0 {
                    0.0
                } else {
                    n as f64 * lk - 2.0 * ln_gamma(n as f64 + 1.0)
                }
            })
            .collect()
    };
    let a = weights(k1, i_max);
    let b = weights(k2, l_max);

    let mut total = f64::NEG_INFINITY;
    let mut prev_shell = f64::NEG_INFINITY;
    let last_shell = if i_max == 0 && l_max == 0 {
        0
    } else {
        MAX_SERIES_INDEX
    };
    let mut shell_terms = Vec::with_capacity(MAX_SERIES_INDEX + 1);
    for s in 0..=last_shell {
        shell_terms.clear();
        for i in s.saturating_sub(l_max)..=s.min(i_max) {
            let l = s - i;
            shell_terms.push(a[i] + b[l] + ln_k[i.abs_diff(l)]);
        }
        let m = shell_terms
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let shell = m + shell_terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
        total = ln_add(total, shell);
        if last_shell == 0 || (shell - total < SHELL_REL_TOL.ln() && shell < prev_shell) {
            return Ok((ln_pref + total).exp());
        }
        prev_shell = shell;
    }
    Err(Error::numeric(
        "envelope_pdf",
        format!("series not converged at index cap {MAX_SERIES_INDEX} (r = {r}, K = {k1}, {k2})"),
    ))
}

/// Envelope density as `∫ f_tt(a) f_tr(r/a) / a da`, integrated over the
/// region where both hop densities carry mass.
pub fn envelope_pdf_product(r: f64, p: &ChannelParams) -> Result<f64> {
    if r == 0.0 {
        return Ok(0.0);
    }
    let t = (2.0 / SUPPORT_TAIL).ln().sqrt();
    let span = |h: &HopParams| {
        (
            (h.los_amplitude - h.sigma2.sqrt() * t).max(0.0),
            h.los_amplitude + h.sigma2.sqrt() * t,
        )
    };
    let (lo1, hi1) = span(&p.tt);
    let (lo2, hi2) = span(&p.tr);
    let lo = lo1.max(r / hi2);
    let hi = if lo2 > 0.0 { hi1.min(r / lo2) } else { hi1 };
    if !(hi > lo) {
        return Ok(0.0);
    }
    let opts = QuadOptions {
        abs_tol: 1e-300,
        rel_tol: 1e-11,
        max_panels: 4000,
    };
    Ok(integrate(
        |a| Ok(p.tt.envelope_density(a) * p.tr.envelope_density(r / a) / a),
        lo,
        hi,
        opts,
    )?
    .value)
}

/// Density of the instantaneous SNR `γ = r² Es/N0`.
pub fn snr_pdf(gamma: f64, p: &ChannelParams, es_over_n0: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::invalid("SNR argument must be > 0"));
    }
    if !(es_over_n0 > 0.0) {
        return Err(Error::invalid("Es/N0 must be > 0"));
    }
    let r = (gamma / es_over_n0).sqrt();
    Ok(0.5 * envelope_pdf(r, p)? / (gamma * es_over_n0).sqrt())
}

/// `E[g(r)]` under the envelope law by adaptive quadrature on `[0, r_max]`.
pub fn envelope_expectation<G: FnMut(f64) -> f64>(
    p: &ChannelParams,
    mut g: G,
    opts: QuadOptions,
) -> Result<f64> {
    if p.is_deterministic() {
        return Ok(g(p.tt.los_amplitude * p.tr.los_amplitude));
    }
    let r_max = envelope_support(p);
    Ok(integrate(|r| Ok(g(r) * envelope_pdf(r, p)?), 0.0, r_max, opts)?.value)
}

/// Envelope CDF tabulated on a uniform grid of `n + 1` points over `[0, r_max]`.
pub fn envelope_cdf_table(p: &ChannelParams, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let r_max = envelope_support(p);
    let step = r_max / n as f64;
    let mut grid = Vec::with_capacity(n + 1);
    let mut cdf = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    grid.push(0.0);
    cdf.push(0.0);
    let opts = QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-12,
        max_panels: 200,
    };
    for k in 0..n {
        let a = k as f64 * step;
        let b = a + step;
        acc += integrate(|r| envelope_pdf(r, p), a, b, opts)?.value;
        grid.push(b);
        cdf.push(acc);
    }
    Ok((grid, cdf))
}
