//! Command-line front end. Exit codes: 0 success, 1 usage/parse/io,
//! 2 numerical or feasibility failure (with a JSON error report on stderr).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::error::{LqgError, Result};
use crate::harness::{self, EnsembleSummary, ExpCommitConfig, RegretFit, RunResult};
use crate::io;
use crate::riccati;
use crate::sysid::RadiiMode;
use crate::system::{self, CostParams, LqgSystem};

#[derive(Debug, Parser)]
#[command(name = "ofu-lqg", version, about = "ExpCommit learning control for partially observed LQG systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roll out the plant with Gaussian inputs and write trajectory.csv
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Number of steps
        #[arg(long = "T", value_parser = parse_count)]
        t: usize,
        /// Input standard deviation
        #[arg(long, default_value_t = 1.0)]
        sigma_u: f64,
    },
    /// Explore (or read a trajectory) and run identification; writes identified.json
    Identify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        config: PathBuf,
        /// Identify from this trajectory CSV instead of exploring
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        radii_mode: Option<RadiiMode>,
    },
    /// Solve both Riccati equations; writes synthesis.json
    Dare {
        #[command(flatten)]
        common: Common,
        /// Config supplying the cost weights (identity when omitted)
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// ExpCommit run (or ensemble when --trials > 1); writes run.json and regret.csv / ensemble.csv
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        exp: ExpArgs,
    },
    /// Ensembles over several horizons and a regret-exponent fit; writes slope.json
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        exp: ExpArgs,
        /// Horizons (repeatable)
        #[arg(long = "T", value_parser = parse_count, required = true)]
        t_list: Vec<usize>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// LqgSystem JSON
    #[arg(long)]
    pub system: PathBuf,
    /// Output directory (created if missing)
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Master seed override
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ExpArgs {
    /// ExpCommitConfig JSON
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub radii_mode: Option<RadiiMode>,
    /// Replace radius_scale by the (1 - delta) coverage calibration
    #[arg(long)]
    pub calibrate: bool,
}

/// Accepts integers and integral floats such as `1e4`.
fn parse_count(s: &str) -> std::result::Result<usize, String> {
    if let Ok(v) = s.parse::<usize>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if f >= 1.0 && f.fract() == 0.0 && f <= usize::MAX as f64 {
        Ok(f as usize)
    } else {
        Err(format!("'{s}' is not a positive integer"))
    }
}

impl clap::ValueEnum for RadiiMode {
    fn value_variants<'a>() -> &'a [Self] {
        &[RadiiMode::Oracle, RadiiMode::PlugIn]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(match self {
            RadiiMode::Oracle => clap::builder::PossibleValue::new("oracle"),
            RadiiMode::PlugIn => clap::builder::PossibleValue::new("plug_in"),
        })
    }
}

/// JSON form of a run without the per-step series (those go to CSV).
#[derive(Debug, Serialize)]
struct RunReport<'a> {
    #[serde(rename = "J_star_true")]
    j_star_true: f64,
    final_regret: f64,
    steps: usize,
    t_exp: usize,
    identified: &'a crate::sysid::IdentifiedModel,
    radii: &'a crate::sysid::ConfidenceRadii,
    selected_model: &'a LqgSystem,
    #[serde(rename = "selected_J")]
    selected_j: f64,
    slack: f64,
    diagnostics: &'a harness::Diagnostics,
}

impl<'a> From<&'a RunResult> for RunReport<'a> {
    fn from(r: &'a RunResult) -> Self {
        RunReport {
            j_star_true: r.J_star_true,
            final_regret: r.final_regret(),
            steps: r.costs.len(),
            t_exp: r.t_exp,
            identified: &r.identified,
            radii: &r.radii,
            selected_model: &r.selected_model,
            selected_j: r.selected_J,
            slack: r.slack,
            diagnostics: &r.diagnostics,
        }
    }
}

#[derive(Debug, Serialize)]
struct EnsembleReport<'a> {
    #[serde(rename = "T")]
    t: usize,
    radius_scale: f64,
    n_trials: usize,
    n_succeeded: usize,
    final_mean: f64,
    final_median: f64,
    final_q10: f64,
    final_q90: f64,
    failures: &'a [(usize, String)],
    trials: &'a [harness::TrialRecord],
}

fn ensemble_report(t: usize, scale: f64, s: &EnsembleSummary) -> EnsembleReport<'_> {
    let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
    EnsembleReport {
        t,
        radius_scale: scale,
        n_trials: s.n_trials,
        n_succeeded: s.n_succeeded,
        final_mean: last(&s.mean),
        final_median: last(&s.median),
        final_q10: last(&s.q10),
        final_q90: last(&s.q90),
        failures: &s.failures,
        trials: &s.trials,
    }
}

#[derive(Debug, Serialize)]
struct SlopeReport {
    points: Vec<(f64, f64)>,
    #[serde(flatten)]
    fit: RegretFit,
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| LqgError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })
}

fn load_config(path: &Path, seed: Option<u64>, radii_mode: Option<RadiiMode>) -> Result<ExpCommitConfig> {
    let mut cfg: ExpCommitConfig = io::read_json(path)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(m) = radii_mode {
        cfg.radii_mode = m;
    }
    Ok(cfg)
}

fn maybe_calibrate(sys: &LqgSystem, cfg: &mut ExpCommitConfig, calibrate: bool) -> Result<()> {
    if calibrate {
        let cal = harness::calibrate_radius_scale(sys, cfg, 100, 1.0 - cfg.delta, 1 << 32)?;
        log::info!("calibrated radius_scale = {}", cal.scale);
        cfg.radius_scale = cal.scale;
    }
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, t, sigma_u } => {
            let sys: LqgSystem = io::read_json(&common.system)?;
            if !(sigma_u > 0.0) {
                return Err(LqgError::Parameter("sigma_u must be positive".into()));
            }
            prepare_out(&common.out)?;
            let mut rng = ChaCha8Rng::seed_from_u64(common.seed.unwrap_or(0));
            let traj = system::rollout(&sys, system::gaussian_policy(sys.p(), sigma_u), t, &mut rng)?;
            io::write_trajectory_csv(&common.out.join("trajectory.csv"), &traj)
        }
        Command::Identify {
            common,
            config,
            trajectory,
            radii_mode,
        } => {
            let sys: LqgSystem = io::read_json(&common.system)?;
            let cfg = load_config(&config, common.seed, radii_mode)?;
            let resolved = cfg.resolve(&sys)?;
            prepare_out(&common.out)?;
            let traj = match trajectory {
                Some(p) => io::read_trajectory_csv(&p)?,
                None => harness::explore_phase(&sys, &resolved)?,
            };
            let mut resolved = resolved;
            resolved.t_exp = traj.len();
            let ident = harness::identify(&traj, &resolved, sys.sigma_w(), sys.sigma_z(), Some(&sys))?;
            io::write_json(&common.out.join("identified.json"), &ident)
        }
        Command::Dare { common, config } => {
            let sys: LqgSystem = io::read_json(&common.system)?;
            let cost = match config {
                Some(p) => {
                    let cfg: ExpCommitConfig = io::read_json(&p)?;
                    cfg.cost.unwrap_or_else(|| CostParams::identity(sys.m(), sys.p()))
                }
                None => CostParams::identity(sys.m(), sys.p()),
            };
            prepare_out(&common.out)?;
            let synth = riccati::synthesize(&sys, &cost)?;
            io::write_json(&common.out.join("synthesis.json"), &synth)
        }
        Command::Run { common, exp } => {
            let sys: LqgSystem = io::read_json(&common.system)?;
            let mut cfg = load_config(&exp.config, common.seed, exp.radii_mode)?;
            cfg.resolve(&sys)?;
            prepare_out(&common.out)?;
            maybe_calibrate(&sys, &mut cfg, exp.calibrate)?;
            let trials = exp.trials.unwrap_or(1);
            if trials > 1 {
                let ens = harness::monte_carlo(&sys, &cfg, trials)?;
                io::write_ensemble_csv(&common.out.join("ensemble.csv"), &ens)?;
                io::write_json(
                    &common.out.join("run.json"),
                    &ensemble_report(cfg.t, cfg.radius_scale, &ens),
                )
            } else {
                let run = harness::run_expcommit(&sys, &cfg)?;
                io::write_regret_csv(&common.out.join("regret.csv"), &run.costs, &run.cumulative_regret)?;
                io::write_json(&common.out.join("run.json"), &RunReport::from(&run))
            }
        }
        Command::Sweep { common, exp, t_list } => {
            let sys: LqgSystem = io::read_json(&common.system)?;
            let base = load_config(&exp.config, common.seed, exp.radii_mode)?;
            prepare_out(&common.out)?;
            let trials = exp.trials.unwrap_or(8);
            let mut points = Vec::new();
            let mut reports = Vec::new();
            for &t in &t_list {
                let mut cfg = base.clone();
                cfg.t = t;
                cfg.t_exp = None;
                cfg.resolve(&sys)?;
                maybe_calibrate(&sys, &mut cfg, exp.calibrate)?;
                let ens = harness::monte_carlo(&sys, &cfg, trials)?;
                io::write_ensemble_csv(&common.out.join(format!("ensemble_T{t}.csv")), &ens)?;
                points.push((t as f64, ens.final_median()));
                reports.push(serde_json::to_value(ensemble_report(t, cfg.radius_scale, &ens)).map_err(
                    |e| LqgError::Numerical(format!("serializing report: {e}")),
                )?);
            }
            io::write_json(&common.out.join("sweep.json"), &reports)?;
            let fit = harness::fit_regret_exponent(&points)?;
            io::write_json(&common.out.join("slope.json"), &SlopeReport { points, fit })
        }
    }
}

/// JSON error report written to stderr on failure.
pub fn error_report(err: &LqgError) -> serde_json::Value {
    let mut report = json!({
        "error": err.kind(),
        "message": err.to_string(),
        "exit_code": err.exit_code(),
    });
    match err {
        LqgError::Convergence { residual, iterations, .. } => {
            report["residual"] = json!(residual);
            report["iterations"] = json!(iterations);
        }
        LqgError::Divergence { step, norm } => {
            report["step"] = json!(step);
            report["norm"] = json!(norm);
        }
        LqgError::SelectionFailure { rejections, evaluated } => {
            report["rejections"] = json!(rejections);
            report["evaluated"] = json!(evaluated);
        }
        _ => {}
    }
    report
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("{}", error_report(&err));
            err.exit_code()
        }
    }
}
