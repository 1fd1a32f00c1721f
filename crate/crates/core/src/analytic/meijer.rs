//! `G^{3,0}_{1,3}(z | a; b1, b2, b3)` by direct Mellin–Barnes integration.
//!
//! ```text
//! G(z) = 1/(2πi) ∫ Γ(b1-s) Γ(b2-s) Γ(b3-s) / Γ(a-s) · z^s ds
//! ```
//!
//! along the vertical line `Re s = c` with `c < min b`. Conjugate symmetry of
//! the integrand reduces this to `(1/π) ∫_0^∞ Re F(c + it) dt`. The abscissa
//! defaults to the minimizer of `|F|` on the real axis, which for large `z`
//! sits near `-z^{1/2}` and keeps cancellation along the line small.

use crate::error::{Error, Result};
use crate::primitives::ComplexValue;
use crate::quadrature::{integrate, QuadOptions};
use crate::special::ln_gamma_complex;
use std::f64::consts::PI;

/// Closest the abscissa may approach the leftmost pole.
const POLE_MARGIN: f64 = 0.25;
/// Contour tails are dropped once `|F|` falls this far below its peak.
const TAIL_RATIO: f64 = 1e-18;
const MAX_RETRIES: usize = 4;

/// Parameters `(a; b1, b2, b3)` of the function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeijerParams {
    pub a: f64,
    pub b: [f64; 3],
}

impl MeijerParams {
    pub fn new(a: f64, b: [f64; 3]) -> Self {
        MeijerParams { a, b }
    }

    fn min_b(&self) -> f64 {
        self.b.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    fn ln_integrand(&self, s: ComplexValue, ln_z: f64) -> ComplexValue {
        let one = |p: f64| ln_gamma_complex(ComplexValue::new(p, 0.0) - s);
        one(self.b[0]) + one(self.b[1]) + one(self.b[2]) - one(self.a) + s * ln_z
    }
}

/// Value with the abscissa and tail cut actually used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeijerEvaluation {
    pub value: f64,
    pub abscissa: f64,
    pub t_max: f64,
}

/// Real-axis minimizer of `|F(c)|` on `c <= min b - margin`, by golden section.
fn saddle_abscissa(p: &MeijerParams, ln_z: f64) -> f64 {
    let hi = p.min_b() - POLE_MARGIN;
    let lo = hi - 4.0 * (0.5 * ln_z).exp().max(1.0) - 10.0;
    let f = |c: f64| p.ln_integrand(ComplexValue::new(c, 0.0), ln_z).re;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > 1e-6 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

fn integrate_line(p: &MeijerParams, z: f64, c: f64) -> Result<MeijerEvaluation> {
    let ln_z = z.ln();
    let ln_f = |t: f64| p.ln_integrand(ComplexValue::new(c, t), ln_z);
    let reference = ln_f(0.0).re;
    // march outward until the modulus is negligible and falling
    let step = 0.5;
    let mut peak = reference;
    let mut prev = reference;
    let mut t_max = 0.0;
    loop {
        t_max += step;
        let m = ln_f(t_max).re;
        peak = peak.max(m);
        if m < peak + TAIL_RATIO.ln() && m < prev {
            break;
        }
        if t_max > 1e4 {
            return Err(Error::numeric(
                "meijer_g",
                "contour integrand does not decay",
            ));
        }
        prev = m;
    }
    let opts = QuadOptions {
        abs_tol: 1e-17,
        rel_tol: 1e-13,
        max_panels: 20_000,
    };
    let integrand = |t: f64| -> Result<f64> {
        let v = ln_f(t) - peak;
        Ok(v.re.exp() * v.im.cos())
    };
    // unit panels keep each Kronrod rule on a few oscillations at most
    let mut acc = 0.0;
    let mut a = 0.0;
    while a < t_max {
        let b = (a + 1.0).min(t_max);
        acc += integrate(integrand, a, b, opts)?.value;
        a = b;
    }
    let value = acc * peak.exp() / PI;
    if !value.is_finite() {
        return Err(Error::numeric("meijer_g", "non-finite contour integral"));
    }
    Ok(MeijerEvaluation {
        value,
        abscissa: c,
        t_max,
    })
}

/// Evaluate on a caller-chosen abscissa, shifting left if it sits too close
/// to (or right of) the leftmost pole or if the integral fails.
pub fn meijer_g_at(z: f64, p: &MeijerParams, abscissa: f64) -> Result<MeijerEvaluation> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::invalid(format!(
            "Meijer-G argument must be > 0, got {z}"
        )));
    }
    let limit = p.min_b() - POLE_MARGIN;
    let mut c = abscissa.min(limit);
    let mut last_err = None;
    for _ in 0..=MAX_RETRIES {
        match integrate_line(p, z, c) {
            Ok(ev) => return Ok(ev),
            Err(e) => last_err = Some(e),
        }
        c -= 0.5;
    }
    Err(last_err.unwrap_or_else(|| Error::numeric("meijer_g", "contour placement failed")))
}

/// `G^{3,0}_{1,3}(z | a1; b)` with an automatically placed contour.
pub fn meijer_g_1_3_3_0(z: f64, a1: f64, b: [f64; 3]) -> Result<f64> {
    let p = MeijerParams::new(a1, b);
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::invalid(format!(
            "Meijer-G argument must be > 0, got {z}"
        )));
    }
    let c = saddle_abscissa(&p, z.ln());
    Ok(meijer_g_at(z, &p, c)?.value)
}

/// Default abscissa the automatic evaluation would use.
pub fn default_abscissa(z: f64, p: &MeijerParams) -> f64 {
    saddle_abscissa(p, z.ln())
}
