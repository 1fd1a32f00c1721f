//! Declarative experiment configuration (TOML), validation and provenance hash.

use crate::error::{Error, Result};
use crate::fading::{ChannelParams, HopParams};
use crate::frame::FrameLayout;
use crate::impair::ImpairmentConfig;
use crate::primitives::{db_to_linear, ComplexValue, Modulation};
use crate::rxchain::{EstimatorKind, IndexOrigin};
use crate::txchain::PilotPattern;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Schema version understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

/// How a frame is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMode {
    /// Symbol-level model: `y = h e^{jφ1 n} x + w`, no synchronization stage.
    #[default]
    Symbol,
    /// Sample-level chain with DC offset, CFO and the full receiver front end.
    FullChain,
}

fn one() -> f64 {
    1.0
}

/// Per-hop K-factors, mean powers and LoS phases, plus the residual slope spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub k_tt_db: f64,
    pub k_tr_db: f64,
    #[serde(default = "one")]
    pub power_tt: f64,
    #[serde(default = "one")]
    pub power_tr: f64,
    #[serde(default)]
    pub los_phase_tt: f64,
    #[serde(default)]
    pub los_phase_tr: f64,
    /// Standard deviation of the per-frame phase slope, radians per symbol.
    #[serde(default)]
    pub slope_std: f64,
}

fn hop(k_db: f64, power: f64, phase: f64) -> Result<HopParams> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::Config("hop power must be finite and > 0".into()));
    }
    let k = db_to_linear(k_db);
    HopParams::from_los((k * power / (1.0 + k)).sqrt(), power / (1.0 + k), phase)
}

impl ChannelConfig {
    pub fn params(&self) -> Result<ChannelParams> {
        self.params_with_k(self.k_tt_db, self.k_tr_db)
    }

    /// Same hops with both K-factors replaced.
    pub fn params_with_k(&self, k_tt_db: f64, k_tr_db: f64) -> Result<ChannelParams> {
        Ok(ChannelParams {
            tt: hop(k_tt_db, self.power_tt, self.los_phase_tt)?,
            tr: hop(k_tr_db, self.power_tr, self.los_phase_tr)?,
        })
    }
}

/// Source of the noise variance handed to the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKnowledge {
    #[default]
    Known,
    /// Residual power of the two-parameter pilot fit.
    Estimated,
}

/// Source of the LMMSE prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorSource {
    /// Mean and variance of the configured channel law.
    #[default]
    Channel,
    /// Sample statistics of lifted-LS estimates from a separate calibration run.
    Calibrated,
}

fn default_sps() -> usize {
    8
}
fn default_window() -> usize {
    1024
}
fn default_true() -> bool {
    true
}
fn default_floor() -> f64 {
    1e-6
}
fn default_calibration() -> usize {
    2000
}

/// Receiver options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverConfig {
    #[serde(default)]
    pub index_origin: IndexOrigin,
    #[serde(default)]
    pub pilot_pattern: PilotPattern,
    #[serde(default = "default_sps")]
    pub sps: usize,
    #[serde(default = "default_window")]
    pub cfo_window: usize,
    /// Remove the estimated phase slope from the payload (lifted estimators).
    #[serde(default = "default_true")]
    pub slope_tracking: bool,
    /// Prior variance of the slope coefficient; defaults from the channel slope spread.
    #[serde(default)]
    pub sigma_phi2: Option<f64>,
    #[serde(default)]
    pub noise: NoiseKnowledge,
    #[serde(default)]
    pub prior: PriorSource,
    #[serde(default = "default_calibration")]
    pub calibration_trials: usize,
    /// Pair consecutive trials with the same channel and negated noise.
    #[serde(default)]
    pub antithetic: bool,
    /// ZF floor relative to the prior channel spread.
    #[serde(default = "default_floor")]
    pub deep_fade_floor: f64,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        ReceiverConfig {
            index_origin: IndexOrigin::default(),
            pilot_pattern: PilotPattern::default(),
            sps: default_sps(),
            cfo_window: default_window(),
            slope_tracking: true,
            sigma_phi2: None,
            noise: NoiseKnowledge::default(),
            prior: PriorSource::default(),
            calibration_trials: default_calibration(),
            antithetic: false,
            deep_fade_floor: default_floor(),
        }
    }
}

fn default_ts() -> f64 {
    1e-6
}

/// Reader impairments; the noise level follows from the SNR axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpairmentSection {
    #[serde(default)]
    pub dc_offset: ComplexValue,
    #[serde(default)]
    pub cfo_hz: f64,
    #[serde(default)]
    pub initial_phase: f64,
    #[serde(default = "default_ts")]
    pub sample_period: f64,
}

impl Default for ImpairmentSection {
    fn default() -> Self {
        ImpairmentSection {
            dc_offset: ComplexValue::new(0.0, 0.0),
            cfo_hz: 0.0,
            initial_phase: 0.0,
            sample_period: default_ts(),
        }
    }
}

impl ImpairmentSection {
    pub fn with_noise(&self, noise_sigma2: f64) -> ImpairmentConfig {
        ImpairmentConfig {
            dc_offset: self.dc_offset,
            cfo_hz: self.cfo_hz,
            initial_phase: self.initial_phase,
            noise_sigma2,
            sample_period: self.sample_period,
        }
    }
}

/// Sweep axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Average effective SNR grid in dB.
    #[serde(default)]
    pub gamma_db: Vec<f64>,
    /// K-factor grid in dB, applied to both hops; empty uses the channel section.
    #[serde(default)]
    pub k_db: Vec<f64>,
    #[serde(default)]
    pub estimators: Vec<EstimatorKind>,
}

/// Inputs of the training-time optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationConfig {
    pub p0: f64,
    pub n0: f64,
    /// Defaults to `E|h_eq|²` of the channel section.
    #[serde(default)]
    pub sigma_h2: Option<f64>,
    pub gamma_eff_db: f64,
    pub ber_target: f64,
    #[serde(default)]
    pub rate_min: f64,
}

fn default_version() -> u32 {
    SCHEMA_VERSION
}
fn default_trials() -> usize {
    10_000
}
fn default_estimator() -> EstimatorKind {
    EstimatorKind::Lmmse
}
fn default_gamma() -> f64 {
    15.0
}

/// Complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub seed: u64,
    pub scheme: Modulation,
    #[serde(default)]
    pub mode: SimMode,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Estimator of single-point runs.
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
    /// Operating point of single-point runs.
    #[serde(default = "default_gamma")]
    pub gamma_eff_db: f64,
    pub channel: ChannelConfig,
    pub layout: FrameLayout,
    #[serde(default)]
    pub receiver: ReceiverConfig,
    #[serde(default)]
    pub impairments: ImpairmentSection,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub allocation: Option<AllocationConfig>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().to_owned()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema version {} not supported (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.receiver.antithetic && self.trials % 2 == 1 {
            return Err(Error::Config(
                "antithetic pairing needs an even trial count".into(),
            ));
        }
        self.layout.validate().map_err(as_config)?;
        self.channel.params().map_err(as_config)?;
        if !(self.channel.slope_std >= 0.0 && self.channel.slope_std.is_finite()) {
            return Err(Error::Config("slope_std must be finite and >= 0".into()));
        }
        if self.receiver.sps == 0 {
            return Err(Error::Config("sps must be >= 1".into()));
        }
        if let Some(v) = self.receiver.sigma_phi2 {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config("sigma_phi2 must be finite and > 0".into()));
            }
        }
        if !(self.receiver.deep_fade_floor >= 0.0) {
            return Err(Error::Config("deep_fade_floor must be >= 0".into()));
        }
        if self.receiver.prior == PriorSource::Calibrated && self.receiver.calibration_trials < 2 {
            return Err(Error::Config("calibration_trials must be >= 2".into()));
        }
        self.impairments
            .with_noise(0.0)
            .validate()
            .map_err(as_config)?;
        if self.gamma_eff_db.is_nan() || self.sweep.gamma_db.iter().any(|g| g.is_nan()) {
            return Err(Error::Config("SNR values must not be NaN".into()));
        }
        if self.sweep.k_db.iter().any(|k| !k.is_finite()) {
            return Err(Error::Config("K grid values must be finite".into()));
        }
        Ok(())
    }

    /// Config hash over the canonical serialization (after any seed override).
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Estimators to sweep, defaulting to the single-point estimator.
    pub fn sweep_estimators(&self) -> Vec<EstimatorKind> {
        if self.sweep.estimators.is_empty() {
            vec![self.estimator]
        } else {
            self.sweep.estimators.clone()
        }
    }

    /// SNR grid, defaulting to the single operating point.
    pub fn sweep_gamma(&self) -> Vec<f64> {
        if self.sweep.gamma_db.is_empty() {
            vec![self.gamma_eff_db]
        } else {
            self.sweep.gamma_db.clone()
        }
    }

    /// `(k_tt_db, k_tr_db)` pairs of the sweep.
    pub fn sweep_k(&self) -> Vec<(f64, f64)> {
        if self.sweep.k_db.is_empty() {
            vec![(self.channel.k_tt_db, self.channel.k_tr_db)]
        } else {
            self.sweep.k_db.iter().map(|&k| (k, k)).collect()
        }
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}
