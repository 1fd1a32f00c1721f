//! `bsclink`: command-line front end of the backscatter link toolkit.

use backscatter_link::analytic::{
    avg_ber_at_gamma, avg_ber_bpsk_closed, avg_ber_bpsk_laplace, avg_ber_ook_closed,
};
use backscatter_link::fading::{mean_square_gain, ChannelParams};
use backscatter_link::harness::allocation::{allocation_report, problem_from_config};
use backscatter_link::harness::image::{image_roundtrip, test_image};
use backscatter_link::harness::report::{
    fmt_sig, opt_field, to_csv, to_json, write_atomic, CsvRow,
};
use backscatter_link::harness::sweep::{ber_sweep, mse_sweep, simulate};
use backscatter_link::harness::{ExperimentConfig, TrialContext};
use backscatter_link::rxchain::EstimatorKind;
use backscatter_link::{db_to_linear, Error, Modulation, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "bsclink",
    version,
    about = "Backscatter link simulation and analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the master seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Progress messages on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(clap::Args, Debug)]
struct Io {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single operating point: BER, EVM, channel MSE (JSON).
    Sim(Io),
    /// BER over the SNR/K/estimator grid (CSV, or JSON for a .json path).
    BerSweep(Io),
    /// Channel-estimation MSE over the grid (CSV, or JSON for a .json path).
    MseSweep(Io),
    /// Training-time optimization and frame accounting (JSON).
    OptimizeFrame(Io),
    /// Perfect-CSI average BER from quadrature and closed forms (CSV).
    AnalyticBer(Io),
    /// Send an image through the link once per sweep estimator.
    ImageDemo {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for received images and the summary.
        #[arg(long)]
        out: PathBuf,
        /// Binary PGM/PPM input; a synthetic test image when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Side length of the synthetic test image.
        #[arg(long, default_value_t = 256)]
        size: usize,
    },
    /// Quick internal consistency checks.
    Selftest,
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn is_json(out: Option<&Path>) -> bool {
    out.and_then(|p| p.extension()).is_some_and(|e| e == "json")
}

#[derive(Serialize)]
struct AnalyticRow {
    scheme: Modulation,
    k_tt_db: f64,
    k_tr_db: f64,
    gamma_eff_db: f64,
    ber_quadrature: f64,
    ber_closed_form: f64,
    ber_laplace: Option<f64>,
}

impl CsvRow for AnalyticRow {
    fn header() -> &'static [&'static str] {
        &[
            "scheme",
            "k_tt_db",
            "k_tr_db",
            "gamma_eff_db",
            "ber_quadrature",
            "ber_closed_form",
            "ber_laplace",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.scheme.name().to_owned(),
            fmt_sig(self.k_tt_db),
            fmt_sig(self.k_tr_db),
            fmt_sig(self.gamma_eff_db),
            fmt_sig(self.ber_quadrature),
            fmt_sig(self.ber_closed_form),
            opt_field(self.ber_laplace),
        ]
    }
}

fn analytic_rows(cfg: &ExperimentConfig) -> Result<Vec<AnalyticRow>> {
    let mut rows = Vec::new();
    for (kt, kr) in cfg.sweep_k() {
        let p = cfg.channel.params_with_k(kt, kr)?;
        for g_db in cfg.sweep_gamma() {
            let g = db_to_linear(g_db);
            let (closed, laplace) = match cfg.scheme {
                Modulation::Ook => (avg_ber_ook_closed(g)?, None),
                Modulation::Bpsk => (
                    avg_ber_bpsk_closed(g)?,
                    Some(avg_ber_bpsk_laplace(&p, g / mean_square_gain(&p))?),
                ),
            };
            rows.push(AnalyticRow {
                scheme: cfg.scheme,
                k_tt_db: kt,
                k_tr_db: kr,
                gamma_eff_db: g_db,
                ber_quadrature: avg_ber_at_gamma(cfg.scheme, &p, g)?,
                ber_closed_form: closed,
                ber_laplace: laplace,
            });
        }
    }
    Ok(rows)
}

#[derive(Serialize)]
struct ImageSummary {
    config_hash: String,
    input: String,
    runs: Vec<backscatter_link::harness::image::ImageOutcome>,
}

fn image_demo(
    cfg: &ExperimentConfig,
    out: &Path,
    input: Option<&Path>,
    size: usize,
    verbose: bool,
) -> Result<()> {
    let (bytes, name) = match input {
        Some(p) => (
            std::fs::read(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
            p.display().to_string(),
        ),
        None => (test_image(size, size), format!("synthetic {size}x{size}")),
    };
    write_atomic(&out.join("original.pgm"), &bytes)?;
    let ctx = TrialContext::new(cfg, (cfg.channel.k_tt_db, cfg.channel.k_tr_db))?;
    let mut runs = Vec::new();
    for est in cfg.sweep_estimators() {
        let r = image_roundtrip(&ctx, &bytes, est, cfg.gamma_eff_db)?;
        if verbose {
            eprintln!(
                "{}: BER {:.3e} over {} bits",
                est.name(),
                r.ber.ber,
                r.ber.total
            );
        }
        write_atomic(&out.join(format!("received-{}.pgm", est.name())), &r.image)?;
        runs.push(r);
    }
    let summary = ImageSummary {
        config_hash: cfg.hash(),
        input: name,
        runs,
    };
    write_atomic(&out.join("summary.json"), to_json(&summary)?.as_bytes())
}

fn check(name: &str, ok: bool, failures: &mut usize) {
    println!("{} {name}", if ok { "PASS" } else { "FAIL" });
    if !ok {
        *failures += 1;
    }
}

fn selftest() -> Result<bool> {
    let mut failures = 0;
    let text = r#"
seed = 7
scheme = "bpsk"
trials = 2000
[channel]
k_tt_db = 6.0
k_tr_db = 6.0
[layout]
tau_sync = 8
symbol_period = 1e-6
slots = 2
slot_len = 32
pilot_len = 8
placement = "per-slot"
"#;
    let cfg = ExperimentConfig::from_toml_str(text)?;
    let ctx = TrialContext::new(&cfg, (6.0, 6.0))?;
    let prior = ctx.prior(f64::INFINITY)?;
    let mut exact = true;
    for est in EstimatorKind::ALL
        .into_iter()
        .filter(|e| *e != EstimatorKind::NoCe)
    {
        let f = ctx.receive(f64::INFINITY, 0, None)?;
        exact &= ctx.evaluate(&f, est, &prior, 0)?.0.bit_errors == 0;
    }
    check(
        "noiseless chain decodes every estimator exactly",
        exact,
        &mut failures,
    );

    let awgn = ChannelParams::unit_power(db_to_linear(40.0), db_to_linear(40.0))?;
    let q = avg_ber_at_gamma(Modulation::Bpsk, &awgn, 4.0)?;
    check(
        "high-K average BER approaches Q(sqrt(2 gamma))",
        (q / 2.338_867_490_523_632_6e-3 - 1.0).abs() < 1e-2,
        &mut failures,
    );

    let s = ctx
        .simulate_point(&[EstimatorKind::PerfectCsi], 5.0, cfg.trials)?
        .remove(0);
    let theory = avg_ber_at_gamma(Modulation::Bpsk, &ctx.channel, db_to_linear(5.0))?;
    // bits within a frame share one fade, so compare with a loose relative band
    check(
        "Monte Carlo perfect-CSI BER matches quadrature",
        (s.ber().ber / theory - 1.0).abs() < 0.15,
        &mut failures,
    );
    Ok(failures == 0)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let v = cli.verbose;
    match cli.command {
        Command::Sim(io) => {
            let cfg = load(&io.config, cli.seed)?;
            let r = simulate(&cfg)?;
            emit(io.out.as_deref(), &(to_json(&r)? + "\n"))?;
        }
        Command::BerSweep(io) => {
            let cfg = load(&io.config, cli.seed)?;
            let rows = ber_sweep(&cfg)?;
            if v {
                eprintln!("{} rows", rows.len());
            }
            let text = if is_json(io.out.as_deref()) {
                to_json(&rows)? + "\n"
            } else {
                to_csv(&rows)
            };
            emit(io.out.as_deref(), &text)?;
        }
        Command::MseSweep(io) => {
            let cfg = load(&io.config, cli.seed)?;
            let rows = mse_sweep(&cfg)?;
            let text = if is_json(io.out.as_deref()) {
                to_json(&rows)? + "\n"
            } else {
                to_csv(&rows)
            };
            emit(io.out.as_deref(), &text)?;
        }
        Command::OptimizeFrame(io) => {
            let cfg = load(&io.config, cli.seed)?;
            let (prob, layout) = problem_from_config(&cfg)?;
            let r = allocation_report(&prob, &layout, &cfg.hash())?;
            emit(io.out.as_deref(), &(to_json(&r)? + "\n"))?;
        }
        Command::AnalyticBer(io) => {
            let cfg = load(&io.config, cli.seed)?;
            let rows = analytic_rows(&cfg)?;
            let text = if is_json(io.out.as_deref()) {
                to_json(&rows)? + "\n"
            } else {
                to_csv(&rows)
            };
            emit(io.out.as_deref(), &text)?;
        }
        Command::ImageDemo {
            config,
            out,
            input,
            size,
        } => {
            let cfg = load(&config, cli.seed)?;
            image_demo(&cfg, &out, input.as_deref(), size, v)?;
        }
        Command::Selftest => {
            if !selftest()? {
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible { .. } => 2,
        Error::Numeric { .. } | Error::NonIdentifiable { .. } | Error::DeepFade { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("bsclink: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
