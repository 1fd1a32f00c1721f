//! One Monte Carlo trial: draw the channel, build and transmit a frame, run
//! the receiver for each requested estimator, and score the result.
//!
//! Random streams are keyed by purpose and trial index, so a trial is a pure
//! function of `(config, trial)` and estimators evaluated on the same trial
//! see the same channel, bits and noise.

use super::config::{ExperimentConfig, NoiseKnowledge, PriorSource, SimMode};
use crate::error::{Error, Result};
use crate::fading::{mean_square_gain, sample_h_eq, ChannelParams};
use crate::frame::{pilot_index_set, FrameIndices};
use crate::impair::apply_impairments;
use crate::metrics::{mse_decompose, BerCount, MseDecomposition};
use crate::primitives::{complex_normal, db_to_linear, wrap_phase, ComplexValue, Seed};
use crate::rxchain::{
    correct_cfo, demodulate, estimate_cfo, estimate_channel, estimate_dc, estimate_noise_variance,
    frame_time_indices, matched_filter_downsample, pilot_time_indices, remove_dc, zf_equalize,
    zf_equalize_tracked, EstimatorKind, PilotStats, Prior,
};
use crate::txchain::{assemble_frame, pilot_values, synthesize_baseband, Alphabet};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Floor on the noise variance handed to estimators, relative to `E|h|²`.
pub const NOISE_VAR_FLOOR: f64 = 1e-30;

/// Slope prior used when the channel has no slope spread.
pub const DEFAULT_SIGMA_PHI2: f64 = 1e-10;

/// Everything about an experiment point that does not change between trials.
#[derive(Debug, Clone)]
pub struct TrialContext {
    pub config: ExperimentConfig,
    pub channel: ChannelParams,
    pub k_db: (f64, f64),
    pub alphabet: Alphabet,
    pub indices: FrameIndices,
    pub known_pilots: Vec<ComplexValue>,
    pub pilot_times: Vec<f64>,
    pub payload_times: Vec<f64>,
    /// Index origin measured from the first pilot, in symbols.
    pub origin_offset: f64,
    pub mean_gain: f64,
    pub sigma_phi2: f64,
}

impl TrialContext {
    pub fn new(config: &ExperimentConfig, k_db: (f64, f64)) -> Result<Self> {
        config.validate()?;
        let channel = config.channel.params_with_k(k_db.0, k_db.1)?;
        let indices = pilot_index_set(&config.layout)?;
        let origin = config.receiver.index_origin;
        let known_pilots = pilot_values(indices.pilots.len(), config.receiver.pilot_pattern)?;
        let pilot_times = pilot_time_indices(&indices.pilots, origin);
        let payload_times = frame_time_indices(&indices.payload, &indices.pilots, origin);
        let origin_offset = -pilot_times.first().copied().unwrap_or(0.0);
        let mean_gain = mean_square_gain(&channel);
        let sigma_phi2 = config.receiver.sigma_phi2.unwrap_or_else(|| {
            (config.channel.slope_std.powi(2) * mean_gain).max(DEFAULT_SIGMA_PHI2)
        });
        Ok(TrialContext {
            config: config.clone(),
            channel,
            k_db,
            alphabet: Alphabet::ideal(config.scheme),
            indices,
            known_pilots,
            pilot_times,
            payload_times,
            origin_offset,
            mean_gain,
            sigma_phi2,
        })
    }

    fn seed(&self) -> Seed {
        Seed::new(self.config.seed)
    }

    /// Symbol-level noise variance `N0 = E|h|² Es / γ̄` with unit peak symbol energy.
    pub fn noise_variance(&self, gamma_db: f64) -> f64 {
        if gamma_db == f64::INFINITY {
            0.0
        } else {
            self.mean_gain / db_to_linear(gamma_db)
        }
    }

    /// LMMSE prior at an operating point.
    pub fn prior(&self, gamma_db: f64) -> Result<Prior> {
        match self.config.receiver.prior {
            PriorSource::Channel => {
                Prior::from_channel(&self.channel, self.sigma_phi2).map_err(|_| {
                    Error::Config("LMMSE prior needs a channel with nonzero variance".into())
                })
            }
            PriorSource::Calibrated => {
                let n = self.config.receiver.calibration_trials as u64;
                let estimates = (0..n)
                    .into_par_iter()
                    .map(|t| {
                        let f = self.receive_labelled(gamma_db, t, None, "calibration")?;
                        let st = PilotStats::compute(
                            &f.rx_pilots,
                            &self.known_pilots,
                            &self.pilot_times,
                        )?;
                        let ls = crate::rxchain::ls_estimate(&st, f.noise_var)?;
                        Ok(ls.h_hat)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Prior::calibrate(&estimates, self.sigma_phi2)
            }
        }
    }

    /// Transmit one frame and run the receiver front end up to the symbol stream.
    pub fn receive(&self, gamma_db: f64, trial: u64, bits: Option<&[u8]>) -> Result<ReceivedFrame> {
        self.receive_labelled(gamma_db, trial, bits, "")
    }

    fn receive_labelled(
        &self,
        gamma_db: f64,
        trial: u64,
        bits: Option<&[u8]>,
        prefix: &str,
    ) -> Result<ReceivedFrame> {
        let cfg = &self.config;
        let seed = self.seed();
        let (pair, sign) = if cfg.receiver.antithetic {
            (trial / 2, if trial % 2 == 1 { -1.0 } else { 1.0 })
        } else {
            (trial, 1.0)
        };
        let mut rng_ch = seed.stream(&format!("{prefix}channel"), pair);
        let h = sample_h_eq(&self.channel, &mut rng_ch);
        let phi1 = if cfg.channel.slope_std > 0.0 {
            cfg.channel.slope_std * rng_ch.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        let n_payload = self.indices.payload.len();
        let bits: Vec<u8> = match bits {
            Some(b) => b.to_vec(),
            None => {
                let mut rng_bits = seed.stream(&format!("{prefix}bits"), pair);
                (0..n_payload)
                    .map(|_| rng_bits.random_range(0..2u8))
                    .collect()
            }
        };
        let frame = assemble_frame(
            &cfg.layout,
            &bits,
            &self.alphabet,
            cfg.receiver.pilot_pattern,
        )?;
        let first_pilot = self.indices.pilots.first().copied().unwrap_or(0) as f64;
        let tx: Vec<ComplexValue> = frame
            .symbols
            .iter()
            .enumerate()
            .map(|(i, &x)| h * ComplexValue::from_polar(1.0, phi1 * (i as f64 - first_pilot)) * x)
            .collect();
        let n0 = self.noise_variance(gamma_db);
        let mut rng_noise = seed.stream(&format!("{prefix}noise"), pair);
        let h_slope = h * ComplexValue::from_polar(1.0, phi1 * self.origin_offset);

        let (symbols, h_target, cfo_error_hz, dc_residual) = match cfg.mode {
            SimMode::Symbol => {
                let mut y = tx;
                if n0 > 0.0 {
                    for v in y.iter_mut() {
                        *v += sign * complex_normal(&mut rng_noise, n0);
                    }
                }
                (y, h_slope, None, None)
            }
            SimMode::FullChain => {
                let sps = cfg.receiver.sps;
                let imp = cfg.impairments.with_noise(0.0);
                let ts = imp.sample_period;
                let mut y =
                    apply_impairments(&synthesize_baseband(&tx, sps)?, &imp, &mut rng_noise)?;
                let per_sample = n0 * sps as f64;
                if per_sample > 0.0 {
                    for v in y.iter_mut() {
                        *v += sign * complex_normal(&mut rng_noise, per_sample);
                    }
                }
                let preamble = cfg.layout.tau_sync * sps;
                let window = cfg.receiver.cfo_window.min(preamble.saturating_sub(1));
                let df_hat = if window >= 2 {
                    estimate_cfo(&y, 0, window, ts)?.delta_f_hz
                } else {
                    0.0
                };
                let (z, phi0_hat) = correct_cfo(&y, df_hat, 0, ts)?;
                let mf = matched_filter_downsample(&z, sps)?;
                let dc_hat = estimate_dc(&mf, &self.indices.pilots)?;
                let rot = wrap_phase(imp.initial_phase - phi0_hat);
                let w_res = 2.0 * PI * (imp.cfo_hz - df_hat) * ts;
                let centre = |pos: f64| pos * sps as f64 + 0.5 * (sps as f64 - 1.0);
                let pilot_mid = self.indices.pilots.iter().map(|&i| i as f64).sum::<f64>()
                    / self.indices.pilots.len().max(1) as f64;
                let dc_true =
                    imp.dc_offset * ComplexValue::from_polar(1.0, rot + w_res * centre(pilot_mid));
                let origin_pos = first_pilot + self.origin_offset;
                let target =
                    h_slope * ComplexValue::from_polar(1.0, rot + w_res * centre(origin_pos));
                (
                    remove_dc(&mf, dc_hat),
                    target,
                    Some(df_hat - imp.cfo_hz),
                    Some((dc_hat - dc_true).norm()),
                )
            }
        };
        Ok(ReceivedFrame {
            h_target,
            phi1,
            rx_pilots: self.indices.pilots.iter().map(|&i| symbols[i]).collect(),
            rx_payload: self.indices.payload.iter().map(|&i| symbols[i]).collect(),
            tx_payload: frame.payload(),
            bits,
            noise_var: n0,
            cfo_error_hz,
            dc_residual,
        })
    }

    /// Channel estimation, equalization, detection and scoring of one frame.
    pub fn evaluate(
        &self,
        frame: &ReceivedFrame,
        estimator: EstimatorKind,
        prior: &Prior,
        trial: u64,
    ) -> Result<(TrialRecord, Vec<u8>)> {
        let rc = &self.config.receiver;
        let stats = PilotStats::compute(&frame.rx_pilots, &self.known_pilots, &self.pilot_times)?;
        let noise_var = match rc.noise {
            NoiseKnowledge::Known => frame.noise_var,
            NoiseKnowledge::Estimated => {
                estimate_noise_variance(&frame.rx_pilots, &self.known_pilots, &self.pilot_times)?
            }
        }
        .max(NOISE_VAR_FLOOR * self.mean_gain);
        let mut record = TrialRecord {
            trial,
            estimator,
            bit_errors: 0,
            bits: frame.bits.len() as u64,
            evm_error_power: 0.0,
            evm_reference_power: 0.0,
            mse: MseDecomposition::default(),
            predicted_var: 0.0,
            phi1_error: None,
            deep_fade: false,
            non_identifiable: false,
            cfo_error_hz: frame.cfo_error_hz,
            dc_residual: frame.dc_residual,
        };
        let est = match estimate_channel(estimator, &stats, prior, noise_var, frame.h_target) {
            Ok(e) => e,
            Err(Error::NonIdentifiable { .. }) => {
                record.non_identifiable = true;
                let decoded = vec![0u8; frame.bits.len()];
                record.bit_errors = frame.bits.iter().filter(|&&b| b != 0).count() as u64;
                return Ok((record, decoded));
            }
            Err(e) => return Err(e),
        };
        record.mse = mse_decompose(est.h_hat, frame.h_target);
        record.predicted_var = est.predicted_var;
        record.phi1_error = est.phi1_hat.map(|p| p - frame.phi1);
        let floor = rc.deep_fade_floor * prior.sigma_h2.sqrt();
        let equalized = if rc.slope_tracking && est.phi1_hat.is_some() {
            zf_equalize_tracked(&frame.rx_payload, &self.payload_times, &est, floor)
        } else {
            zf_equalize(&frame.rx_payload, &est, floor)
        };
        let decoded = match equalized {
            Ok(z) => {
                for (a, b) in z.iter().zip(&frame.tx_payload) {
                    record.evm_error_power += (a - b).norm_sqr();
                    record.evm_reference_power += b.norm_sqr();
                }
                demodulate(&z, &self.alphabet)
            }
            Err(Error::DeepFade { .. }) => {
                record.deep_fade = true;
                vec![0u8; frame.bits.len()]
            }
            Err(e) => return Err(e),
        };
        record.bit_errors = decoded
            .iter()
            .zip(&frame.bits)
            .filter(|(a, b)| a != b)
            .count() as u64;
        Ok((record, decoded))
    }

    /// One trial scored for each estimator in turn.
    pub fn run_trial_multi(
        &self,
        estimators: &[EstimatorKind],
        priors: &[Prior],
        gamma_db: f64,
        trial: u64,
    ) -> Result<Vec<TrialRecord>> {
        let frame = self.receive(gamma_db, trial, None)?;
        estimators
            .iter()
            .zip(priors)
            .map(|(&k, p)| self.evaluate(&frame, k, p, trial).map(|r| r.0))
            .collect()
    }

    /// Run `trials` trials in parallel and fold the records in trial order.
    pub fn simulate_point(
        &self,
        estimators: &[EstimatorKind],
        gamma_db: f64,
        trials: usize,
    ) -> Result<Vec<PointSummary>> {
        let prior = self.prior(gamma_db)?;
        let priors = vec![prior; estimators.len()];
        let records = (0..trials as u64)
            .into_par_iter()
            .map(|t| self.run_trial_multi(estimators, &priors, gamma_db, t))
            .collect::<Result<Vec<_>>>()?;
        let mut out = vec![PointSummary::default(); estimators.len()];
        for per_trial in &records {
            for (acc, r) in out.iter_mut().zip(per_trial) {
                acc.push(r);
            }
        }
        Ok(out)
    }
}

/// Receiver input for one frame plus the ground truth needed for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedFrame {
    /// Channel the estimators aim at: `h` at the index origin, including any
    /// synchronization phase left by the front end.
    pub h_target: ComplexValue,
    pub phi1: f64,
    pub bits: Vec<u8>,
    pub tx_payload: Vec<ComplexValue>,
    pub rx_pilots: Vec<ComplexValue>,
    pub rx_payload: Vec<ComplexValue>,
    /// Symbol-level noise variance.
    pub noise_var: f64,
    pub cfo_error_hz: Option<f64>,
    pub dc_residual: Option<f64>,
}

/// Outcome of one trial for one estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub estimator: EstimatorKind,
    pub bit_errors: u64,
    pub bits: u64,
    pub evm_error_power: f64,
    pub evm_reference_power: f64,
    pub mse: MseDecomposition,
    pub predicted_var: f64,
    pub phi1_error: Option<f64>,
    pub deep_fade: bool,
    pub non_identifiable: bool,
    pub cfo_error_hz: Option<f64>,
    pub dc_residual: Option<f64>,
}

/// Running totals over trials.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PointSummary {
    pub trials: u64,
    pub bit_errors: u64,
    pub bits: u64,
    pub evm_error_power: f64,
    pub evm_reference_power: f64,
    pub mse_sum: MseDecomposition,
    pub predicted_var_sum: f64,
    pub phi1_sq_error_sum: f64,
    pub phi1_count: u64,
    pub deep_fades: u64,
    pub non_identifiable: u64,
    pub cfo_sq_error_sum: f64,
    pub cfo_count: u64,
    pub dc_residual_sum: f64,
    pub dc_count: u64,
}

impl PointSummary {
    pub fn push(&mut self, r: &TrialRecord) {
        self.trials += 1;
        self.bit_errors += r.bit_errors;
        self.bits += r.bits;
        self.evm_error_power += r.evm_error_power;
        self.evm_reference_power += r.evm_reference_power;
        self.mse_sum = self.mse_sum.add(&r.mse);
        self.predicted_var_sum += r.predicted_var;
        if let Some(e) = r.phi1_error {
            self.phi1_sq_error_sum += e * e;
            self.phi1_count += 1;
        }
        self.deep_fades += u64::from(r.deep_fade);
        self.non_identifiable += u64::from(r.non_identifiable);
        if let Some(e) = r.cfo_error_hz {
            self.cfo_sq_error_sum += e * e;
            self.cfo_count += 1;
        }
        if let Some(d) = r.dc_residual {
            self.dc_residual_sum += d;
            self.dc_count += 1;
        }
    }

    /// Combine two partial summaries. Counts combine exactly in any order;
    /// float sums are exact only when folded in a fixed order.
    pub fn merge(&self, o: &PointSummary) -> PointSummary {
        PointSummary {
            trials: self.trials + o.trials,
            bit_errors: self.bit_errors + o.bit_errors,
            bits: self.bits + o.bits,
            evm_error_power: self.evm_error_power + o.evm_error_power,
            evm_reference_power: self.evm_reference_power + o.evm_reference_power,
            mse_sum: self.mse_sum.add(&o.mse_sum),
            predicted_var_sum: self.predicted_var_sum + o.predicted_var_sum,
            phi1_sq_error_sum: self.phi1_sq_error_sum + o.phi1_sq_error_sum,
            phi1_count: self.phi1_count + o.phi1_count,
            deep_fades: self.deep_fades + o.deep_fades,
            non_identifiable: self.non_identifiable + o.non_identifiable,
            cfo_sq_error_sum: self.cfo_sq_error_sum + o.cfo_sq_error_sum,
            cfo_count: self.cfo_count + o.cfo_count,
            dc_residual_sum: self.dc_residual_sum + o.dc_residual_sum,
            dc_count: self.dc_count + o.dc_count,
        }
    }

    pub fn ber(&self) -> BerCount {
        BerCount::from_counts(self.bit_errors, self.bits)
    }

    /// EVM in percent over non-flagged frames.
    pub fn evm_pct(&self) -> f64 {
        if self.evm_reference_power > 0.0 {
            100.0 * (self.evm_error_power / self.evm_reference_power).sqrt()
        } else {
            0.0
        }
    }

    /// Mean squared estimation error and its split.
    pub fn mse(&self) -> MseDecomposition {
        self.mse_sum.scale(1.0 / self.trials.max(1) as f64)
    }

    pub fn predicted_var(&self) -> f64 {
        self.predicted_var_sum / self.trials.max(1) as f64
    }

    pub fn phi1_rmse(&self) -> Option<f64> {
        (self.phi1_count > 0).then(|| (self.phi1_sq_error_sum / self.phi1_count as f64).sqrt())
    }

    pub fn cfo_rmse_hz(&self) -> Option<f64> {
        (self.cfo_count > 0).then(|| (self.cfo_sq_error_sum / self.cfo_count as f64).sqrt())
    }

    pub fn dc_residual_mean(&self) -> Option<f64> {
        (self.dc_count > 0).then(|| self.dc_residual_sum / self.dc_count as f64)
    }
}
