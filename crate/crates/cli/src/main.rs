//! `psp`: command-line front end.
//!
//! Exit codes: 0 on success, 2 when the input fails validation, 1 on any
//! other error.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use psp_core::harness::{
    generate_demands, read_demands, run_experiment, write_demands_csv, write_policy_json,
    ExperimentConfig,
};
use psp_core::oracle::{
    achievable_by_search, brute_force_peak, build_filling_with_gaps, default_delta,
    fractional_lower_bound, verify_filling, GridSearchConfig,
};
use psp_core::{
    certify, classify, good_region, is_achievable, largest_achievable, peak_power, power_profile,
    schedule_greedy, schedule_psp, slot_plan, stacked_height, theoretical_bounds, DemandSet, Error,
    SystemParams,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "psp",
    version,
    about = "Peak-power scheduling of malleable energy demands"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct ParamArgs {
    /// Shortest allowed duration.
    #[arg(long)]
    ell: f64,
    /// Longest allowed duration (values above 1 are clamped to 1).
    #[arg(long)]
    r: f64,
}

impl ParamArgs {
    fn params(self) -> Result<SystemParams, Error> {
        SystemParams::new(self.ell, self.r)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Psp,
    Greedy,
}

#[derive(Subcommand)]
enum Command {
    /// Classify (ell, r), optionally against a demand file.
    Classify {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        demands: Option<PathBuf>,
    },
    /// Schedule a demand file and certify the result.
    Schedule {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        demands: PathBuf,
        #[arg(long, value_enum, default_value = "psp")]
        algo: Algo,
        /// Write the policy (JSON array) here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the power profile as `t,power` CSV.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Print the optimality window for a demand file.
    Bounds {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        demands: PathBuf,
    },
    /// Run a repeated experiment from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw uniform (0, ell] demands and write them as CSV.
    Generate {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verification oracles.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Achievability of a length by formula and by enumeration.
    Search {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        w: f64,
    },
    /// Exhaustive grid search for tiny instances (n <= 4).
    Brute {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        demands: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        tau_step: f64,
        #[arg(long, default_value_t = 0.01)]
        s_step: f64,
    },
    /// Build a filling from widths and check its row structure.
    Filling {
        #[command(flatten)]
        params: ParamArgs,
        /// Comma-separated widths in [ell, r].
        #[arg(long, value_delimiter = ',', conflicts_with = "count")]
        widths: Vec<f64>,
        /// Draw this many uniform widths instead.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated idle time requested before each rectangle.
        #[arg(long, value_delimiter = ',')]
        gaps: Vec<f64>,
        #[arg(long)]
        delta: Option<f64>,
    },
}

fn load_demands(path: &Path) -> Result<DemandSet, Error> {
    let file = File::open(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    read_demands(file)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("cannot create {}", path.display())
    })?))
}

fn print_json(value: &serde_json::Value) -> anyhow::Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Classify { params, demands } => {
            let p = params.params()?;
            let plan = match demands {
                Some(path) => classify(&p, &load_demands(&path)?)?,
                None => slot_plan(&p),
            };
            print_json(&json!({
                "ell": p.ell(),
                "r": p.raw_r(),
                "effective_r": p.r(),
                "good_region": good_region(&p),
                "case": plan.case,
                "k0": plan.k0,
                "s0": plan.s0,
                "z_star": plan.z_star,
            }))
        }
        Command::Schedule {
            params,
            demands,
            algo,
            out,
            profile,
        } => {
            let p = params.params()?;
            let demands = load_demands(&demands)?;
            let policy = match algo {
                Algo::Psp => schedule_psp(&demands, &p)?,
                Algo::Greedy => schedule_greedy(&demands, &p)?,
            };
            let certificate = certify(&policy, &demands, &p)?;
            if let Some(path) = &profile {
                let mut w = create(path)?;
                power_profile(&policy)?.write_csv(&mut w)?;
                w.flush()?;
            }
            let mut summary = json!({
                "algorithm": policy.algorithm,
                "plan": policy.plan,
                "n": policy.len(),
                "stacked_height": stacked_height(&policy)?,
                "certificate": certificate,
            });
            match &out {
                Some(path) => {
                    let mut w = create(path)?;
                    write_policy_json(&policy, &mut w)?;
                    w.flush()?;
                }
                None => summary["policy"] = serde_json::to_value(&policy.assignments)?,
            }
            print_json(&summary)
        }
        Command::Bounds { params, demands } => {
            let p = params.params()?;
            let demands = load_demands(&demands)?;
            let b = theoretical_bounds(&demands, &p)?;
            print_json(&json!({
                "total": demands.total(),
                "a_max": demands.a_max(),
                "a_bar": b.a_bar,
                "upper": b.upper,
                "slot_upper": b.slot_upper,
            }))
        }
        Command::Experiment { config, out } => {
            let file = File::open(&config)
                .map_err(|e| Error::Parse(format!("cannot read {}: {e}", config.display())))?;
            let cfg = ExperimentConfig::from_json(file)?;
            let result = run_experiment(&cfg)?;
            fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
            let json_path = out.join("result.json");
            let csv_path = out.join("curve.csv");
            let mut w = create(&json_path)?;
            result.write_json(&mut w)?;
            w.flush()?;
            let mut w = create(&csv_path)?;
            result.write_curve_csv(&mut w)?;
            w.flush()?;
            print_json(&json!({
                "result": json_path,
                "curve": csv_path,
                "cells": result.cells.len(),
            }))
        }
        Command::Generate {
            params,
            n,
            seed,
            out,
        } => {
            let p = params.params()?;
            let demands = generate_demands(n, &p, &mut ChaCha8Rng::seed_from_u64(seed))?;
            match out {
                Some(path) => {
                    let mut w = create(&path)?;
                    write_demands_csv(&demands, &mut w)?;
                    w.flush()?;
                }
                None => write_demands_csv(&demands, io::stdout().lock())?,
            }
            Ok(())
        }
        Command::Oracle(cmd) => run_oracle(cmd),
    }
}

fn run_oracle(cmd: OracleCommand) -> anyhow::Result<()> {
    match cmd {
        OracleCommand::Search { params, w } => {
            let p = params.params()?;
            print_json(&json!({
                "w": w,
                "achievable_formula": is_achievable(w, &p)?,
                "achievable_search": achievable_by_search(w, &p),
                "largest_achievable": largest_achievable(w, &p)?,
            }))
        }
        OracleCommand::Brute {
            params,
            demands,
            tau_step,
            s_step,
        } => {
            let p = params.params()?;
            let demands = load_demands(&demands)?;
            let psp = schedule_psp(&demands, &p)?;
            let cfg = GridSearchConfig::new(tau_step, s_step)?.with_extra_points(
                psp.assignments.iter().map(|a| a.s).collect(),
                psp.assignments.iter().map(|a| a.tau).collect(),
            );
            let outcome = brute_force_peak(&demands, &p, &cfg)?;
            let bounds = theoretical_bounds(&demands, &p)?;
            print_json(&json!({
                "brute_force_peak": outcome.peak,
                "grid_error": outcome.grid_error,
                "nodes": outcome.nodes,
                "psp_peak": peak_power(&power_profile(&psp)?),
                "a_bar": bounds.a_bar,
                "a_bar_enumerated": fractional_lower_bound(&demands, &p),
                "upper": bounds.upper,
            }))
        }
        OracleCommand::Filling {
            params,
            widths,
            count,
            seed,
            gaps,
            delta,
        } => {
            let p = params.params()?;
            let widths = match count {
                Some(n) => {
                    use rand::Rng;
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    (0..n).map(|_| rng.random_range(p.ell()..=p.r())).collect()
                }
                None => widths,
            };
            if widths.is_empty() {
                return Err(Error::EmptyInput("widths").into());
            }
            let delta = delta.unwrap_or_else(|| default_delta(1.0));
            let filling = build_filling_with_gaps(&widths, &gaps, &p, delta)?;
            let report = verify_filling(&filling, &p)?;
            print_json(&json!({
                "passed": report.passed(),
                "report": report,
                "rows": filling.rows,
            }))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            match err.downcast_ref::<Error>() {
                Some(e) if e.is_validation() => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
