//! Experiment orchestration and file formats.
//!
//! Demand energies are drawn i.i.d. uniform on `(0, ell]` from a ChaCha8
//! generator. Repetition `k` of every instance size uses the seed
//! `seed + k`, with the instance size `n` selecting the ChaCha stream, so each
//! `(n, rep)` cell is reproducible on its own and independent of execution
//! order.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::demand::{Demand, DemandSet};
use crate::error::{Error, Result};
use crate::profile::{peak_power, power_profile, theoretical_bounds};
use crate::region::SystemParams;
use crate::scheduler::{schedule_greedy, schedule_psp, validate_policy, Policy};
use crate::TOLERANCE;

/// Formats `x` with 12 significant digits, dropping trailing zeros.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..DIGITS).contains(&exp) {
        return format!("{:.*e}", (DIGITS - 1) as usize, x);
    }
    let decimals = (DIGITS - 1 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Draws `n` energies uniform on `(0, ell]`, with ids `1..=n`.
pub fn generate_demands<R: Rng + ?Sized>(
    n: usize,
    params: &SystemParams,
    rng: &mut R,
) -> Result<DemandSet> {
    if n == 0 {
        return Err(Error::EmptyInput("demand count"));
    }
    let ell = params.ell();
    let energies: Vec<f64> = (0..n).map(|_| ell * (1.0 - rng.random::<f64>())).collect();
    DemandSet::from_energies(&energies)
}

/// Generator for repetition `rep` of the size-`n` cell.
pub fn rep_rng(seed: u64, n: usize, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(rep as u64));
    rng.set_stream(n as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Psp,
    Greedy,
}

impl Algorithm {
    pub fn schedule(self, demands: &DemandSet, params: &SystemParams) -> Result<Policy> {
        match self {
            Algorithm::Psp => schedule_psp(demands, params),
            Algorithm::Greedy => schedule_greedy(demands, params),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Psp => "psp",
            Algorithm::Greedy => "greedy",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psp" => Ok(Algorithm::Psp),
            "greedy" => Ok(Algorithm::Greedy),
            other => Err(Error::Parse(format!("unknown algorithm {other:?}"))),
        }
    }
}

fn default_reps() -> usize {
    30
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Psp, Algorithm::Greedy]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub ell: f64,
    pub r: f64,
    pub n_values: Vec<usize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
}

impl ExperimentConfig {
    pub fn params(&self) -> Result<SystemParams> {
        SystemParams::new(self.ell, self.r)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        if self.reps < 2 {
            return Err(Error::InvalidConfig(format!(
                "reps must be at least 2, got {}",
                self.reps
            )));
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(Error::InvalidConfig(
                "n_values must be non-empty and positive".into(),
            ));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidConfig("no algorithms selected".into()));
        }
        Ok(())
    }

    pub fn from_json<R: Read>(input: R) -> Result<Self> {
        let cfg: Self = serde_json::from_reader(input)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Summary of one `(n, algorithm)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub n: usize,
    pub algorithm: Algorithm,
    pub mean_peak: f64,
    /// Sample standard deviation (denominator `reps - 1`).
    pub std_peak: f64,
    /// Half-width of the two-sided 95% Student-t interval for the mean.
    pub ci_half_width: f64,
    pub peaks: Vec<f64>,
    /// `A_bar` of each repetition.
    pub a_bar: Vec<f64>,
    /// `A_bar + A_max / ell` of each repetition.
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
}

/// Mean, sample standard deviation and 95% CI half-width.
pub fn summarize(samples: &[f64]) -> (f64, f64, f64) {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("degrees of freedom >= 1")
        .inverse_cdf(0.975);
    (mean, std, t * std / (n as f64).sqrt())
}

/// Runs every selected algorithm on `reps` fresh instances of each size.
///
/// Every policy is validated and its peak checked against
/// `A_bar + A_max / ell`; a failure aborts the run since it can only come from
/// a bug.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let params = cfg.params()?;
    let mut cells = Vec::with_capacity(cfg.n_values.len() * cfg.algorithms.len());
    for &n in &cfg.n_values {
        let mut per_algo: Vec<CellResult> = cfg
            .algorithms
            .iter()
            .map(|&algorithm| CellResult {
                n,
                algorithm,
                mean_peak: 0.0,
                std_peak: 0.0,
                ci_half_width: 0.0,
                peaks: Vec::with_capacity(cfg.reps),
                a_bar: Vec::with_capacity(cfg.reps),
                upper: Vec::with_capacity(cfg.reps),
            })
            .collect();
        for rep in 0..cfg.reps {
            let demands = generate_demands(n, &params, &mut rep_rng(cfg.seed, n, rep))?;
            let bounds = theoretical_bounds(&demands, &params)?;
            for cell in per_algo.iter_mut() {
                let policy = cell.algorithm.schedule(&demands, &params)?;
                let report = validate_policy(&policy, &demands, &params);
                if !report.is_feasible() {
                    return Err(Error::Infeasible(report));
                }
                let peak = peak_power(&power_profile(&policy)?);
                if peak > bounds.upper + TOLERANCE {
                    return Err(Error::BoundViolation(format!(
                        "{} on n = {n}, rep = {rep}: peak {peak} > upper bound {}",
                        cell.algorithm.name(),
                        bounds.upper
                    )));
                }
                cell.peaks.push(peak);
                cell.a_bar.push(bounds.a_bar);
                cell.upper.push(bounds.upper);
            }
        }
        for cell in per_algo.iter_mut() {
            let (mean, std, ci) = summarize(&cell.peaks);
            cell.mean_peak = mean;
            cell.std_peak = std;
            cell.ci_half_width = ci;
        }
        cells.extend(per_algo);
    }
    Ok(ExperimentResult {
        config: cfg.clone(),
        cells,
    })
}

impl ExperimentResult {
    pub fn cell(&self, n: usize, algorithm: Algorithm) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.n == n && c.algorithm == algorithm)
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        Ok(serde_json::from_reader(input)?)
    }

    /// One row per instance size:
    /// `n,mean_peak_psp,ci_psp,mean_peak_greedy,ci_greedy,mean_bound`.
    /// Columns of algorithms that were not run are left empty.
    pub fn write_curve_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "n",
            "mean_peak_psp",
            "ci_psp",
            "mean_peak_greedy",
            "ci_greedy",
            "mean_bound",
        ])?;
        for &n in &self.config.n_values {
            let mut row = vec![n.to_string()];
            let mut bound = None;
            for algorithm in [Algorithm::Psp, Algorithm::Greedy] {
                match self.cell(n, algorithm) {
                    Some(c) => {
                        row.push(fmt_sig(c.mean_peak));
                        row.push(fmt_sig(c.ci_half_width));
                        bound.get_or_insert_with(|| {
                            c.upper.iter().sum::<f64>() / c.upper.len() as f64
                        });
                    }
                    None => row.extend([String::new(), String::new()]),
                }
            }
            row.push(bound.map(fmt_sig).unwrap_or_default());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes a policy as a JSON array of `{id, tau, s, d, slot}` records.
pub fn write_policy_json<W: Write>(policy: &Policy, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, &policy.assignments)?;
    Ok(())
}

pub fn read_policy_json<R: Read>(input: R) -> Result<Vec<crate::scheduler::Assignment>> {
    Ok(serde_json::from_reader(input)?)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DemandEntry {
    Record(Demand),
    Energy(f64),
}

/// Reads demands from JSON: either an array of `{id, energy}` records or an
/// array of bare energies (ids assigned `1..=n`).
pub fn read_demands_json<R: Read>(input: R) -> Result<DemandSet> {
    let entries: Vec<DemandEntry> = serde_json::from_reader(input)?;
    let demands = entries
        .into_iter()
        .enumerate()
        .map(|(i, e)| match e {
            DemandEntry::Record(d) => d,
            DemandEntry::Energy(energy) => Demand {
                id: i as u64 + 1,
                energy,
            },
        })
        .collect();
    DemandSet::new(demands)
}

/// Reads demands from CSV with header `id,energy`.
pub fn read_demands_csv<R: Read>(input: R) -> Result<DemandSet> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["id", "energy"] {
        return Err(Error::Parse(format!(
            "expected header id,energy, got {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let demands = reader
        .deserialize::<Demand>()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    DemandSet::new(demands)
}

/// Reads a demand file, picking the format from its first non-blank byte.
pub fn read_demands<R: Read>(mut input: R) -> Result<DemandSet> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    if text.trim_start().starts_with('[') {
        read_demands_json(text.as_bytes())
    } else {
        read_demands_csv(text.as_bytes())
    }
}

pub fn write_demands_csv<W: Write>(demands: &DemandSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "energy"])?;
    for d in demands.iter() {
        w.write_record([d.id.to_string(), format!("{}", d.energy)])?;
    }
    w.flush()?;
    Ok(())
}
