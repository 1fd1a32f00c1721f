//! Channel application and reader-side impairments: frame-constant fading,
//! DC offset, carrier frequency offset with initial phase, and AWGN.
//!
//! The composition is `(h x[n] + d0) e^{j(2πΔf n T_s + Φ0)} + w[n]`: the DC
//! term rotates with the carrier, the noise does not.

use crate::error::{Error, Result};
use crate::primitives::{complex_normal, ComplexValue};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Reader impairments applied to a sample record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImpairmentConfig {
    pub dc_offset: ComplexValue,
    pub cfo_hz: f64,
    pub initial_phase: f64,
    /// Total complex noise variance per sample.
    pub noise_sigma2: f64,
    pub sample_period: f64,
}

impl Default for ImpairmentConfig {
    fn default() -> Self {
        ImpairmentConfig {
            dc_offset: ComplexValue::new(0.0, 0.0),
            cfo_hz: 0.0,
            initial_phase: 0.0,
            noise_sigma2: 0.0,
            sample_period: 1e-6,
        }
    }
}

impl ImpairmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_period > 0.0 && self.sample_period.is_finite()) {
            return Err(Error::invalid("sample period must be > 0"));
        }
        if !(self.noise_sigma2 >= 0.0 && self.noise_sigma2.is_finite()) {
            return Err(Error::invalid("noise variance must be finite and >= 0"));
        }
        if !((self.cfo_hz * self.sample_period).abs() < 0.5) {
            return Err(Error::invalid(format!(
                "|cfo| * sample period = {:.3} must stay below 0.5",
                (self.cfo_hz * self.sample_period).abs()
            )));
        }
        Ok(())
    }
}

/// Multiply every sample by the frame-constant channel.
pub fn apply_channel(samples: &[ComplexValue], h_eq: ComplexValue) -> Vec<ComplexValue> {
    samples.iter().map(|&x| h_eq * x).collect()
}

/// Add circular complex Gaussian noise of total variance `sigma2`.
pub fn add_awgn<R: Rng + ?Sized>(samples: &mut [ComplexValue], sigma2: f64, rng: &mut R) {
    if sigma2 == 0.0 {
        return;
    }
    for s in samples.iter_mut() {
        *s += complex_normal(rng, sigma2);
    }
}

/// Add DC, rotate by the carrier offset, then add noise.
pub fn apply_impairments<R: Rng + ?Sized>(
    samples: &[ComplexValue],
    cfg: &ImpairmentConfig,
    rng: &mut R,
) -> Result<Vec<ComplexValue>> {
    cfg.validate()?;
    let w = 2.0 * PI * cfg.cfo_hz * cfg.sample_period;
    let rotate = cfg.cfo_hz != 0.0 || cfg.initial_phase != 0.0;
    let mut out: Vec<ComplexValue> = samples
        .iter()
        .enumerate()
        .map(|(n, &x)| {
            let v = x + cfg.dc_offset;
            if rotate {
                v * ComplexValue::from_polar(1.0, w * n as f64 + cfg.initial_phase)
            } else {
                v
            }
        })
        .collect();
    add_awgn(&mut out, cfg.noise_sigma2, rng);
    Ok(out)
}
