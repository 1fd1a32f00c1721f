//! Shared numeric types, decibel conversions and the deterministic RNG contract.
//!
//! Every random draw in the crate comes from [`derive_trial_rng`], which maps a
//! master seed, a stream label and a trial index to an independent ChaCha8
//! stream. The mapping is a pure function, so results do not depend on the
//! order in which trials are executed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Complex baseband amplitude.
pub type ComplexValue = num_complex::Complex64;

/// Random source handed to every sampling routine.
pub type TrialRng = ChaCha8Rng;

/// A quantity expressed in decibels.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DbValue(pub f64);

impl DbValue {
    /// Linear power ratio.
    pub fn linear(self) -> f64 {
        db_to_linear(self.0)
    }

    /// Wrap a linear power ratio.
    pub fn from_linear(x: f64) -> Self {
        DbValue(linear_to_db(x))
    }
}

/// `10^(x/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `10 log10(x)`.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Binary modulation carried by the tag's two load states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Ook,
    Bpsk,
}

impl Modulation {
    pub fn name(self) -> &'static str {
        match self {
            Modulation::Ook => "ook",
            Modulation::Bpsk => "bpsk",
        }
    }
}

/// Master seed from which all sub-streams are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed {
    pub master: u64,
}

impl Seed {
    pub fn new(master: u64) -> Self {
        Seed { master }
    }

    /// Independent stream for `(label, trial)`.
    pub fn stream(&self, label: &str, trial: u64) -> TrialRng {
        derive_trial_rng(*self, label, trial)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive the random stream for one trial of one named purpose.
///
/// Identical `(seed, label, trial)` triples always yield identical streams.
pub fn derive_trial_rng(seed: Seed, label: &str, trial: u64) -> TrialRng {
    let mut state = seed.master;
    let a = splitmix64(&mut state);
    let mut state = a ^ fnv1a(label);
    let b = splitmix64(&mut state);
    let mut state = b ^ trial.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Circularly-symmetric complex Gaussian with total variance `variance`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> ComplexValue {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    ComplexValue::new(s * re, s * im)
}

/// Wrap an angle to the principal interval (-pi, pi].
pub fn wrap_phase(x: f64) -> f64 {
    use std::f64::consts::PI;
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}
