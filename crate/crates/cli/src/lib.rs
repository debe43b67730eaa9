//! `qkdrate`: key rates, sweeps, boundaries, optimisation, simulation and
//! comparisons from a flat experiment config.
//!
//! Exit codes: 0 success, 1 other failure, 2 usage error, 3 invalid
//! configuration or parameters, 4 empty result (no boundary, no crossover).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use qkd_core::finite_key::{advantage_db, optimize_sps, optimize_wcp, KeyReport};
use qkd_core::{
    advantage_boundary, compare, finite_boundary, linear_grid, load_config,
    simulate_rate_distribution, sps_expected_rate, BoundaryCurve, Error, ExperimentConfig,
    SourceSpec, TrialSpec,
};

#[derive(Parser, Debug)]
#[command(
    name = "qkdrate",
    version,
    about = "Secret key rates for single-photon and decoy-state QKD"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Key length and rate at the configured operating point.
    Rate {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Configured SPS against the tuned decoy-state WCP over a loss range (CSV).
    Sweep {
        config: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        loss_min: f64,
        #[arg(long, default_value_t = 30.0)]
        loss_max: f64,
        #[arg(long, default_value_t = 31)]
        steps: usize,
        /// Also tune the SPS basis bias and pre-attenuation at every loss.
        #[arg(long)]
        tune_sps: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Advantage boundary in the (<n>, g2) plane (CSV).
    Boundary {
        /// Required in finite mode.
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        loss: f64,
        #[arg(long, value_enum, default_value_t = Mode::Asymptotic)]
        mode: Mode,
        #[arg(long, default_value_t = 0.02)]
        n_min: f64,
        #[arg(long, default_value_t = 1.5)]
        n_max: f64,
        #[arg(long, default_value_t = 75)]
        points: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Tune free protocol parameters with the genetic algorithm.
    Optimize {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Target::Sps)]
        target: Target,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sampled blocks through the key-length calculation (CSV; summary on stderr).
    Simulate {
        config: PathBuf,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        /// Defaults to the config's `seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Advantage at the configured loss, crossover loss and peak advantage.
    Compare {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Mode {
    Asymptotic,
    Finite,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Target {
    Sps,
    Wcp,
}

enum Failure {
    Core(Error),
    Usage(String),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. }
        | Error::Validation { .. }
        | Error::InvalidParameter { .. }
        | Error::NonPhysicalSource(_)
        | Error::RateTooHigh(_)
        | Error::DomainError(_) => 3,
        Error::EmptyCurve { .. } | Error::NoCrossover { .. } => 4,
        _ => 1,
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => 0,
        Err(Failure::Core(e)) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(Failure::Io(e)) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn sink<'a>(path: &Option<PathBuf>, out: &'a mut dyn Write) -> io::Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(out),
    })
}

fn csv(x: f64) -> String {
    format!("{x:.9e}")
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Rate { config, output } => {
            let cfg = load_config(&config)?;
            let report = sps_expected_rate(&cfg.sps_setup())?;
            let mut w = sink(&output, out)?;
            write_rate(&mut w, &cfg, &report)?;
            w.flush()?;
        }
        Command::Sweep {
            config,
            loss_min,
            loss_max,
            steps,
            tune_sps,
            output,
        } => {
            if steps < 2 || !(loss_max > loss_min) || loss_min < 0.0 {
                return Err(Failure::Usage(
                    "sweep needs 0 <= --loss-min < --loss-max and --steps >= 2".into(),
                ));
            }
            let cfg = load_config(&config)?;
            let mut w = sink(&output, out)?;
            writeln!(w, "loss_db,r_sps,r_wcp,advantage_db")?;
            for loss in linear_grid(loss_min, loss_max, steps) {
                let sps = cfg.sps_setup().with_loss(loss);
                let r_sps = if tune_sps {
                    optimize_sps(&sps, &cfg.ga)?.rate
                } else {
                    sps_expected_rate(&sps)
                        .map(|r| r.rate_per_pulse)
                        .unwrap_or(0.0)
                };
                let r_wcp = optimize_wcp(&cfg.wcp_setup().with_loss(loss), &cfg.ga)?.rate;
                writeln!(
                    w,
                    "{},{},{},{}",
                    csv(loss),
                    csv(r_sps),
                    csv(r_wcp),
                    csv(advantage_db(r_sps, r_wcp))
                )?;
            }
            w.flush()?;
        }
        Command::Boundary {
            config,
            loss,
            mode,
            n_min,
            n_max,
            points,
            output,
        } => {
            if points == 0 || !(n_max >= n_min) || !(n_min > 0.0) {
                return Err(Failure::Usage(
                    "boundary needs 0 < --n-min <= --n-max and --points >= 1".into(),
                ));
            }
            let grid = linear_grid(n_min, n_max, points);
            let curve: BoundaryCurve = match mode {
                Mode::Asymptotic => advantage_boundary(loss, &grid)?,
                Mode::Finite => {
                    let path = config
                        .ok_or_else(|| Failure::Usage("finite mode needs a config file".into()))?;
                    let cfg = load_config(&path)?;
                    finite_boundary(loss, &grid, &cfg.comparison_setup())?
                }
            };
            let mut w = sink(&output, out)?;
            writeln!(w, "mean_photon_number,g2")?;
            for p in &curve.points {
                writeln!(w, "{},{}", csv(p.mean_photon_number), csv(p.g2))?;
            }
            w.flush()?;
        }
        Command::Optimize {
            config,
            target,
            output,
        } => {
            let cfg = load_config(&config)?;
            let mut w = sink(&output, out)?;
            match target {
                Target::Sps => {
                    let t = optimize_sps(&cfg.sps_setup(), &cfg.ga)?;
                    writeln!(w, "target=sps")?;
                    writeln!(w, "q_z_tx={:e}", t.setup.protocol.q_z_tx)?;
                    writeln!(w, "pre_attenuation={:e}", t.setup.protocol.pre_attenuation)?;
                    writeln!(w, "rate_per_pulse={:e}", t.rate)?;
                    writeln!(w, "rate_per_second={:e}", t.rate * cfg.clock_rate_hz)?;
                    writeln!(w, "evaluations={}", t.evaluations)?;
                }
                Target::Wcp => {
                    let t = optimize_wcp(&cfg.wcp_setup(), &cfg.ga)?;
                    let d = t.setup.decoy;
                    writeln!(w, "target=wcp")?;
                    writeln!(w, "wcp_mu_s={:e}", d.mu_signal)?;
                    writeln!(w, "wcp_mu_d={:e}", d.mu_decoy)?;
                    writeln!(w, "wcp_p_s={:e}", d.p_signal)?;
                    writeln!(w, "wcp_p_d={:e}", d.p_decoy)?;
                    writeln!(w, "wcp_q_z_tx={:e}", d.q_z_tx)?;
                    writeln!(w, "rate_per_pulse={:e}", t.rate)?;
                    writeln!(w, "rate_per_second={:e}", t.rate * cfg.clock_rate_hz)?;
                    writeln!(w, "evaluations={}", t.evaluations)?;
                }
            }
            w.flush()?;
        }
        Command::Simulate {
            config,
            reps,
            seed,
            output,
        } => {
            let cfg = load_config(&config)?;
            let spec = TrialSpec {
                setup: cfg.sps_setup(),
                seed: seed.unwrap_or(cfg.seed),
                repetitions: reps,
            };
            let summary = simulate_rate_distribution(&spec)?;
            let mut w = sink(&output, out)?;
            writeln!(w, "seed,n_z,m_z,n_x,m_x,key_length,rate")?;
            for o in &summary.outcomes {
                let t = &o.tallies;
                let (key, rate) = match &o.report {
                    Ok(r) => (csv(r.key_length), csv(r.rate_per_pulse)),
                    Err(_) => ("nan".to_string(), "nan".to_string()),
                };
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    o.seed, t.z_detections, t.z_errors, t.x_detections, t.x_errors, key, rate
                )?;
            }
            w.flush()?;
            writeln!(
                err,
                "repetitions={} failures={} mean={:e} std_dev={:e} p05={:e} median={:e} p95={:e}",
                reps,
                summary.failures,
                summary.mean,
                summary.std_dev,
                summary.p05,
                summary.median,
                summary.p95
            )?;
        }
        Command::Compare { config, output } => {
            let cfg = load_config(&config)?;
            let c = compare(&cfg.comparison_setup())?;
            let mut w = sink(&output, out)?;
            writeln!(w, "loss_db={:e}", c.loss_db)?;
            writeln!(w, "r_sps={:e}", c.r_sps)?;
            writeln!(w, "r_wcp={:e}", c.r_wcp)?;
            writeln!(w, "advantage_db={:e}", c.advantage_db)?;
            writeln!(w, "crossover_loss_db={:e}", c.crossover_loss_db)?;
            writeln!(w, "peak_advantage_db={:e}", c.peak_advantage_db)?;
            writeln!(w, "peak_loss_db={:e}", c.peak_loss_db)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn write_rate(w: &mut dyn Write, cfg: &ExperimentConfig, r: &KeyReport) -> io::Result<()> {
    let source = match cfg.source {
        SourceSpec::Sps { .. } => "sps",
        SourceSpec::Wcp { .. } => "wcp",
    };
    writeln!(w, "source={source}")?;
    writeln!(w, "channel_loss_db={:e}", cfg.channel.channel_loss_db)?;
    writeln!(w, "pulses_sent={:e}", r.pulses_sent)?;
    writeln!(w, "key_length={:e}", r.key_length)?;
    writeln!(w, "rate_per_pulse={:e}", r.rate_per_pulse)?;
    writeln!(
        w,
        "rate_per_second={:e}",
        r.rate_per_pulse * cfg.clock_rate_hz
    )?;
    if let Some(cap) = r.multi_photon_cap {
        writeln!(w, "multi_photon_cap={cap:e}")?;
    }
    writeln!(w, "secure_detections={:e}", r.secure_detections)?;
    writeln!(w, "phase_error_bound={:e}", r.phase_error_bound)?;
    writeln!(w, "lambda_ec={:e}", r.lambda_ec)?;
    writeln!(w, "qber_z={:e}", r.qber_z)?;
    writeln!(w, "eps_consumed={:e}", r.eps_consumed)?;
    if let Some(c) = cfg.consistency() {
        writeln!(w, "consistency={c}")?;
    }
    Ok(())
}
