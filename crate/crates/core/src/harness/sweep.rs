//! BER and channel-MSE sweeps over SNR, K-factor and estimator, plus the
//! single-point simulation report.

use super::config::{ExperimentConfig, SimMode};
use super::report::{fmt_sig, opt_field, CsvRow};
use super::trial::{PointSummary, TrialContext};
use crate::analytic::{avg_ber_at_gamma, avg_ber_bpsk_closed, avg_ber_ook_closed};
use crate::error::Result;
use crate::metrics::{BerCount, MseDecomposition};
use crate::primitives::{db_to_linear, Modulation};
use crate::rxchain::EstimatorKind;
use serde::Serialize;

/// One `(K, γ̄, estimator)` point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub scheme: Modulation,
    pub k_tt_db: f64,
    pub k_tr_db: f64,
    pub gamma_eff_db: f64,
    pub estimator: EstimatorKind,
    pub trials: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub ber_ci_low: f64,
    pub ber_ci_high: f64,
    /// Perfect-CSI average BER by numerical integration over the envelope law.
    pub ber_theory: Option<f64>,
    /// Perfect-CSI average BER from the Meijer-G closed form.
    pub ber_closed_form: Option<f64>,
    pub evm_pct: f64,
    pub mse: MseDecomposition,
    pub predicted_var: f64,
    pub deep_fades: u64,
    pub non_identifiable: u64,
    pub config_hash: String,
    pub seed: u64,
}

impl CsvRow for SweepRow {
    fn header() -> &'static [&'static str] {
        &[
            "scheme",
            "k_tt_db",
            "k_tr_db",
            "gamma_eff_db",
            "estimator",
            "trials",
            "bits",
            "bit_errors",
            "ber",
            "ber_ci_low",
            "ber_ci_high",
            "ber_theory",
            "ber_closed_form",
            "evm_pct",
            "mse",
            "mse_magnitude",
            "mse_phase",
            "predicted_var",
            "deep_fades",
            "non_identifiable",
            "config_hash",
            "seed",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.scheme.name().to_owned(),
            fmt_sig(self.k_tt_db),
            fmt_sig(self.k_tr_db),
            fmt_sig(self.gamma_eff_db),
            self.estimator.name().to_owned(),
            self.trials.to_string(),
            self.bits.to_string(),
            self.bit_errors.to_string(),
            fmt_sig(self.ber),
            fmt_sig(self.ber_ci_low),
            fmt_sig(self.ber_ci_high),
            opt_field(self.ber_theory),
            opt_field(self.ber_closed_form),
            fmt_sig(self.evm_pct),
            fmt_sig(self.mse.total),
            fmt_sig(self.mse.magnitude_term),
            fmt_sig(self.mse.phase_term),
            fmt_sig(self.predicted_var),
            self.deep_fades.to_string(),
            self.non_identifiable.to_string(),
            self.config_hash.clone(),
            self.seed.to_string(),
        ]
    }
}

/// Perfect-CSI reference curves at one point.
pub fn theory_at(ctx: &TrialContext, gamma_db: f64) -> Result<(f64, f64)> {
    let g = db_to_linear(gamma_db);
    let quad = avg_ber_at_gamma(ctx.config.scheme, &ctx.channel, g)?;
    let closed = match ctx.config.scheme {
        Modulation::Ook => avg_ber_ook_closed(g)?,
        Modulation::Bpsk => avg_ber_bpsk_closed(g)?,
    };
    Ok((quad, closed))
}

fn row(
    cfg: &ExperimentConfig,
    ctx: &TrialContext,
    g: f64,
    est: EstimatorKind,
    s: &PointSummary,
) -> SweepRow {
    let b = s.ber();
    SweepRow {
        scheme: cfg.scheme,
        k_tt_db: ctx.k_db.0,
        k_tr_db: ctx.k_db.1,
        gamma_eff_db: g,
        estimator: est,
        trials: s.trials,
        bits: b.total,
        bit_errors: b.errors,
        ber: b.ber,
        ber_ci_low: b.ci_low,
        ber_ci_high: b.ci_high,
        ber_theory: None,
        ber_closed_form: None,
        evm_pct: s.evm_pct(),
        mse: s.mse(),
        predicted_var: s.predicted_var(),
        deep_fades: s.deep_fades,
        non_identifiable: s.non_identifiable,
        config_hash: cfg.hash(),
        seed: cfg.seed,
    }
}

/// Monte Carlo over the sweep grid; `with_theory` adds the perfect-CSI
/// reference columns. Every estimator at a point shares the same trials.
pub fn run_sweep(cfg: &ExperimentConfig, with_theory: bool) -> Result<Vec<SweepRow>> {
    let estimators = cfg.sweep_estimators();
    let mut rows = Vec::new();
    for k in cfg.sweep_k() {
        let ctx = TrialContext::new(cfg, k)?;
        for g in cfg.sweep_gamma() {
            let theory = if with_theory && g.is_finite() {
                Some(theory_at(&ctx, g)?)
            } else {
                None
            };
            let summaries = ctx.simulate_point(&estimators, g, cfg.trials)?;
            for (&est, s) in estimators.iter().zip(&summaries) {
                let mut r = row(cfg, &ctx, g, est, s);
                r.ber_theory = theory.map(|t| t.0);
                r.ber_closed_form = theory.map(|t| t.1);
                rows.push(r);
            }
        }
    }
    Ok(rows)
}

/// BER sweep with theory columns.
pub fn ber_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    run_sweep(cfg, true)
}

/// Channel-estimation MSE sweep.
pub fn mse_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    run_sweep(cfg, false)
}

/// SNR at which the BER of `estimator` first falls to `target`, by linear
/// interpolation of `log10 BER` over the SNR grid. `None` if never reached or
/// if the crossing involves a zero-error point.
pub fn required_snr_db(rows: &[SweepRow], estimator: EstimatorKind, target: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.estimator == estimator)
        .map(|r| (r.gamma_eff_db, r.ber))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.first()?.1 <= target {
        return Some(pts[0].0);
    }
    for w in pts.windows(2) {
        let ((g0, b0), (g1, b1)) = (w[0], w[1]);
        if b1 <= target {
            if b0 <= 0.0 || b1 <= 0.0 {
                return None;
            }
            let (l0, l1, lt) = (b0.log10(), b1.log10(), target.log10());
            return Some(g0 + (g1 - g0) * (l0 - lt) / (l0 - l1));
        }
    }
    None
}

/// Single-point simulation report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointReport {
    pub config_hash: String,
    pub seed: u64,
    pub scheme: Modulation,
    pub mode: SimMode,
    pub estimator: EstimatorKind,
    pub gamma_eff_db: f64,
    pub k_tt_db: f64,
    pub k_tr_db: f64,
    pub trials: u64,
    pub ber: BerCount,
    pub ber_theory: Option<f64>,
    pub evm_pct: f64,
    /// Over-the-air EVM measured on a hardware link at 15 dB, for comparison only.
    pub hardware_reference_evm_pct: f64,
    pub mse: MseDecomposition,
    pub predicted_var: f64,
    pub phi1_rmse: Option<f64>,
    pub cfo_rmse_hz: Option<f64>,
    pub dc_residual_mean: Option<f64>,
    pub deep_fades: u64,
    pub non_identifiable: u64,
}

/// Hardware EVM reference values in percent.
pub fn hardware_reference_evm(scheme: Modulation) -> f64 {
    match scheme {
        Modulation::Ook => 2.97,
        Modulation::Bpsk => 4.02,
    }
}

/// Run the configured estimator at the configured operating point.
pub fn simulate(cfg: &ExperimentConfig) -> Result<PointReport> {
    let k = (cfg.channel.k_tt_db, cfg.channel.k_tr_db);
    let ctx = TrialContext::new(cfg, k)?;
    let g = cfg.gamma_eff_db;
    let s = ctx
        .simulate_point(&[cfg.estimator], g, cfg.trials)?
        .remove(0);
    let ber_theory = if g.is_finite() {
        Some(theory_at(&ctx, g)?.0)
    } else {
        None
    };
    Ok(PointReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        scheme: cfg.scheme,
        mode: cfg.mode,
        estimator: cfg.estimator,
        gamma_eff_db: g,
        k_tt_db: k.0,
        k_tr_db: k.1,
        trials: s.trials,
        ber: s.ber(),
        ber_theory,
        evm_pct: s.evm_pct(),
        hardware_reference_evm_pct: hardware_reference_evm(cfg.scheme),
        mse: s.mse(),
        predicted_var: s.predicted_var(),
        phi1_rmse: s.phi1_rmse(),
        cfo_rmse_hz: s.cfo_rmse_hz(),
        dc_residual_mean: s.dc_residual_mean(),
        deep_fades: s.deep_fades,
        non_identifiable: s.non_identifiable,
    })
}
