//! Frame optimization report: optimal training time, its quantization to a
//! whole pilot block length, and the resulting frame accounting.

use super::config::ExperimentConfig;
use crate::analytic::{avg_ber_at_gamma, effective_snr_training};
use crate::error::{Error, Result};
use crate::fading::mean_square_gain;
use crate::frame::{
    optimize_training, quantize_allocation, rate_slope_symbols, rate_symbols, AllocationProblem,
    ClipBranch, FrameLayout,
};
use crate::primitives::{db_to_linear, linear_to_db, Modulation};
use serde::Serialize;

/// Optimizer output and frame accounting. Times are in symbols unless the
/// field name says seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationReport {
    pub config_hash: String,
    pub scheme: Modulation,
    pub gamma_eff_db: f64,
    pub ber_target: f64,
    pub gamma_threshold_db: f64,
    pub alpha: f64,
    pub tau_c: usize,
    pub tau_sync: usize,
    pub beta: usize,
    pub tau_hat: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub tau_star: f64,
    pub branch: ClipBranch,
    /// Pilot block length `N*`.
    pub pilot_len: usize,
    /// Realized training time `βN*`.
    pub tau_training: usize,
    /// Remaining data time `τ_c − τ_sync − βN*`.
    pub tau_data: usize,
    /// Realized pilot fraction `βN*/τ_c`.
    pub rho_star: f64,
    pub tau_star_seconds: f64,
    pub rate_at_star: f64,
    pub rate_at_realized: f64,
    /// `dR/dτ` just below and above `τ̂`.
    pub slope_below: f64,
    pub slope_above: f64,
    /// Perfect-CSI-law average BER at the realized training SNR.
    pub ber_at_realized: f64,
    pub meets_ber_target: bool,
}

/// Build the allocation problem from the `[allocation]` section.
pub fn problem_from_config(cfg: &ExperimentConfig) -> Result<(AllocationProblem, FrameLayout)> {
    let a = cfg
        .allocation
        .ok_or_else(|| Error::Config("missing [allocation] section".into()))?;
    let channel = cfg.channel.params()?;
    let prob = AllocationProblem {
        p0: a.p0,
        n0: a.n0,
        sigma_h2: a.sigma_h2.unwrap_or_else(|| mean_square_gain(&channel)),
        gamma_eff: db_to_linear(a.gamma_eff_db),
        ber_target: a.ber_target,
        rate_min: a.rate_min,
        scheme: cfg.scheme,
        channel,
    };
    prob.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok((prob, cfg.layout))
}

/// Solve, quantize and check one allocation problem.
pub fn allocation_report(
    prob: &AllocationProblem,
    layout: &FrameLayout,
    config_hash: &str,
) -> Result<AllocationReport> {
    let opt = optimize_training(prob, layout)?;
    let n = quantize_allocation(&opt, layout)?;
    let beta = layout.beta();
    let tau_training = beta * n;
    let tau_c = layout.frame_len();
    let tau_data = tau_c - layout.tau_sync - tau_training;
    let g_ce = effective_snr_training(prob.gamma_eff, tau_training as f64, opt.alpha);
    let ber_at_realized = avg_ber_at_gamma(prob.scheme, &prob.channel, g_ce)?;
    let h = 1e-3 * opt.tau_hat.max(1.0);
    Ok(AllocationReport {
        config_hash: config_hash.to_owned(),
        scheme: prob.scheme,
        gamma_eff_db: linear_to_db(prob.gamma_eff),
        ber_target: prob.ber_target,
        gamma_threshold_db: linear_to_db(opt.gamma_threshold),
        alpha: opt.alpha,
        tau_c,
        tau_sync: layout.tau_sync,
        beta,
        tau_hat: opt.tau_hat,
        tau_min: opt.tau_min,
        tau_max: opt.tau_max,
        tau_star: opt.tau_star,
        branch: opt.branch,
        pilot_len: n,
        tau_training,
        tau_data,
        rho_star: tau_training as f64 / tau_c as f64,
        tau_star_seconds: opt.tau_star * layout.symbol_period,
        rate_at_star: opt.rate_at_star,
        rate_at_realized: rate_symbols(tau_training as f64, prob, layout),
        slope_below: rate_slope_symbols((opt.tau_hat - h).max(0.0), prob, layout),
        slope_above: rate_slope_symbols(opt.tau_hat + h, prob, layout),
        ber_at_realized,
        meets_ber_target: ber_at_realized <= prob.ber_target * (1.0 + 1e-9),
    })
}
