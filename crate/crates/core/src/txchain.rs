//! Tag side: load-impedance reflection coefficients, symbol alphabet, frame
//! assembly and rectangular-pulse baseband synthesis.

use crate::error::{Error, Result};
use crate::frame::{pilot_index_set, FrameLayout};
use crate::primitives::{ComplexValue, Modulation, Seed};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// Largest |ξ1 + ξ2| / max|ξ| accepted silently for BPSK.
pub const ANTIPODAL_TOLERANCE: f64 = 0.05;

/// Antenna and switch-load impedances plus the structural-mode term `A_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagLoads {
    pub z_antenna: ComplexValue,
    pub z_load_1: ComplexValue,
    pub z_load_2: ComplexValue,
    pub structural_mode: ComplexValue,
}

/// Power-wave reflection coefficient `(Z_L - Z_a*)/(Z_L + Z_a)`.
pub fn reflection_coeff(z_load: ComplexValue, z_antenna: ComplexValue) -> Result<ComplexValue> {
    let den = z_load + z_antenna;
    if den.norm() <= 1e-12 * (z_load.norm() + z_antenna.norm()).max(1e-300) {
        return Err(Error::invalid("load and antenna impedances sum to zero"));
    }
    Ok((z_load - z_antenna.conj()) / den)
}

/// The two symbols the tag can present; bit `b` maps to `points[b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alphabet {
    pub points: [ComplexValue; 2],
}

impl Alphabet {
    /// Canonical alphabet: `{0, 1}` for OOK, `{-1, +1}` for BPSK.
    pub fn ideal(scheme: Modulation) -> Self {
        let p = match scheme {
            Modulation::Ook => [ComplexValue::new(0.0, 0.0), ComplexValue::new(1.0, 0.0)],
            Modulation::Bpsk => [ComplexValue::new(-1.0, 0.0), ComplexValue::new(1.0, 0.0)],
        };
        Alphabet { points: p }
    }

    pub fn map(&self, bit: u8) -> ComplexValue {
        self.points[usize::from(bit & 1)]
    }

    /// Decision midpoint between the two points.
    pub fn midpoint(&self) -> ComplexValue {
        0.5 * (self.points[0] + self.points[1])
    }

    /// Mean symbol energy over equiprobable bits.
    pub fn mean_energy(&self) -> f64 {
        0.5 * (self.points[0].norm_sqr() + self.points[1].norm_sqr())
    }
}

/// Alphabet with a note when a BPSK request is not antipodal.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphabetOutcome {
    pub alphabet: Alphabet,
    pub warning: Option<String>,
}

/// Alphabet `A_s - ξ_i` produced by the two switch loads.
pub fn symbol_alphabet(loads: &TagLoads, scheme: Modulation) -> Result<AlphabetOutcome> {
    if !(loads.z_antenna.re > 0.0) {
        return Err(Error::invalid("antenna resistance must be > 0"));
    }
    let x1 = reflection_coeff(loads.z_load_1, loads.z_antenna)?;
    let x2 = reflection_coeff(loads.z_load_2, loads.z_antenna)?;
    let mut warning = None;
    for (i, x) in [x1, x2].iter().enumerate() {
        if x.norm() > 1.0 + 1e-9 {
            warning = Some(format!(
                "load {} is not passive: |xi| = {:.4}",
                i + 1,
                x.norm()
            ));
        }
    }
    if scheme == Modulation::Bpsk {
        let scale = x1.norm().max(x2.norm()).max(1e-300);
        let mismatch = (x1 + x2).norm() / scale;
        if mismatch > ANTIPODAL_TOLERANCE {
            let sep = (x1.arg() - x2.arg()).abs().to_degrees();
            let sep = if sep > 180.0 { 360.0 - sep } else { sep };
            warning = Some(format!(
                "reflection coefficients are not antipodal: phase separation {sep:.1} deg, mismatch {mismatch:.3}"
            ));
        }
    }
    let a = loads.structural_mode;
    Ok(AlphabetOutcome {
        alphabet: Alphabet {
            points: [a - x1, a - x2],
        },
        warning,
    })
}

/// Sign pattern used for the pilot blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PilotPattern {
    /// +1, -1, +1, ...
    #[default]
    Alternating,
    /// Balanced pseudo-random ±1 sequence drawn from `seed`.
    Pn { seed: u64 },
}

/// Zero-mean unit-modulus pilot values of length `n`.
///
/// Even lengths use the ±1 pattern directly. For odd lengths the last three
/// symbols are the cube roots of unity, which sum to zero on their own.
pub fn pilot_values(n: usize, pattern: PilotPattern) -> Result<Vec<ComplexValue>> {
    if n < 2 {
        return Err(Error::invalid(
            "at least two pilot symbols are needed for a zero-mean pattern",
        ));
    }
    let antipodal = if n.is_multiple_of(2) { n } else { n - 3 };
    let mut signs: Vec<f64> = (0..antipodal)
        .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    if let PilotPattern::Pn { seed } = pattern {
        let mut rng = Seed::new(seed).stream("pilot-pattern", n as u64);
        signs.shuffle(&mut rng);
    }
    let mut out: Vec<ComplexValue> = signs
        .into_iter()
        .map(|s| ComplexValue::new(s, 0.0))
        .collect();
    if n % 2 == 1 {
        for k in 0..3 {
            out.push(ComplexValue::from_polar(
                1.0,
                2.0 * std::f64::consts::PI * k as f64 / 3.0,
            ));
        }
    }
    Ok(out)
}

/// Symbol-level frame with its index sets.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub symbols: Vec<ComplexValue>,
    pub preamble_indices: Vec<usize>,
    pub pilot_indices: Vec<usize>,
    pub payload_indices: Vec<usize>,
    pub payload_bits: Vec<u8>,
}

impl SymbolFrame {
    pub fn pilots(&self) -> Vec<ComplexValue> {
        self.pilot_indices
            .iter()
            .map(|&i| self.symbols[i])
            .collect()
    }

    pub fn payload(&self) -> Vec<ComplexValue> {
        self.payload_indices
            .iter()
            .map(|&i| self.symbols[i])
            .collect()
    }
}

/// Known preamble symbol (a constant tone after modulation).
pub const PREAMBLE_SYMBOL: ComplexValue = ComplexValue::new(1.0, 0.0);

/// Lay out preamble, pilots and payload on the frame grid.
pub fn assemble_frame(
    layout: &FrameLayout,
    bits: &[u8],
    alphabet: &Alphabet,
    pattern: PilotPattern,
) -> Result<SymbolFrame> {
    let idx = pilot_index_set(layout)?;
    if bits.len() != idx.payload.len() {
        return Err(Error::LengthMismatch {
            what: "payload bits vs payload slots",
            left: bits.len(),
            right: idx.payload.len(),
        });
    }
    let mut symbols = vec![ComplexValue::new(0.0, 0.0); layout.used_len()];
    for &i in &idx.preamble {
        symbols[i] = PREAMBLE_SYMBOL;
    }
    let pilots = pilot_values(idx.pilots.len(), pattern)?;
    for (&i, &p) in idx.pilots.iter().zip(&pilots) {
        symbols[i] = p;
    }
    for (&i, &b) in idx.payload.iter().zip(bits) {
        symbols[i] = alphabet.map(b);
    }
    let frame = SymbolFrame {
        symbols,
        preamble_indices: idx.preamble,
        pilot_indices: idx.pilots,
        payload_indices: idx.payload,
        payload_bits: bits.to_vec(),
    };
    let mean: ComplexValue =
        frame.pilots().iter().sum::<ComplexValue>() / frame.pilot_indices.len() as f64;
    debug_assert!(mean.norm() < 1e-12, "pilot mean {mean}");
    Ok(frame)
}

/// Rectangular pulse: each symbol held for `sps` samples.
pub fn synthesize_baseband(symbols: &[ComplexValue], sps: usize) -> Result<Vec<ComplexValue>> {
    if sps == 0 {
        return Err(Error::invalid("samples per symbol must be >= 1"));
    }
    Ok(symbols
        .iter()
        .flat_map(|&s| std::iter::repeat_n(s, sps))
        .collect())
}
