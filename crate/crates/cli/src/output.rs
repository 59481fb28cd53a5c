//! Files written by `run` and `reference`, and their parsers.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use semc::evidence::stepping_stone_term;
use semc::metrics::{build_histogram, Histogram};
use semc::problems::sort_peaks_by_position;
use semc::samplers::SamplerConfig;
use semc::{Coords, RunResult, TemperatureLadder};

use crate::config::ProblemConfig;
use crate::dataset::BuiltProblem;

pub const SCHEMA_VERSION: u32 = 1;
pub const RESULT_JSON: &str = "result.json";
pub const REFERENCE_JSON: &str = "reference.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedHistogram {
    pub name: String,
    #[serde(flatten)]
    pub histogram: Histogram,
}

/// Energy summary of one rung. `log_mean_weight` is
/// `ln mean exp(-N (beta_next - beta) (E - energy_min))`, so the rung's
/// free-energy increment is `N (beta_next - beta) energy_min - log_mean_weight`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungSummary {
    pub beta: f64,
    pub count: usize,
    pub energy_min: f64,
    pub energy_mean: f64,
    pub energy_max: f64,
    /// Absent on the last rung.
    pub log_mean_weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDoc {
    pub schema_version: u32,
    pub problem: ProblemConfig,
    pub problem_label: String,
    pub sampler: SamplerConfig,
    pub seed: u64,
    pub data_size: f64,
    pub free_energy: f64,
    pub wall_time: f64,
    pub ladder: TemperatureLadder,
    pub exchange_rates: Vec<f64>,
    pub metropolis_rates: Vec<Vec<f64>>,
    pub rungs: Vec<RungSummary>,
    pub histograms: Vec<NamedHistogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDoc {
    pub schema_version: u32,
    pub problem: ProblemConfig,
    pub problem_label: String,
    /// `quadrature`, `enumeration` or `remc`.
    pub method: String,
    pub free_energy: f64,
    /// The long run's configuration when `method` is `remc`.
    pub sampler: Option<SamplerConfig>,
    pub seed: Option<u64>,
    pub histograms: Vec<NamedHistogram>,
}

pub fn rung_summaries(result: &RunResult, n: f64) -> semc::Result<Vec<RungSummary>> {
    let snaps = &result.snapshots;
    snaps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let e = &s.energies;
            let energy_min = e.iter().cloned().fold(f64::INFINITY, f64::min);
            let log_mean_weight = match snaps.get(i + 1) {
                Some(next) => {
                    let d = n * (next.beta - s.beta);
                    Some(d * energy_min - stepping_stone_term(e, next.beta - s.beta, n)?)
                }
                None => None,
            };
            Ok(RungSummary {
                beta: s.beta,
                count: e.len(),
                energy_min,
                energy_mean: e.iter().sum::<f64>() / e.len() as f64,
                energy_max: e.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                log_mean_weight,
            })
        })
        .collect()
}

/// Histograms of the final rung: theta1 for the bimodal problem, the sorted
/// peak positions (one histogram per slot) for the spectral problem, none for
/// exhaustive search.
pub fn sample_histograms(problem: &BuiltProblem, result: &RunResult, bin_width: f64) -> semc::Result<Vec<NamedHistogram>> {
    let states = &result.final_snapshot().states;
    let cont = |s: &semc::ParameterState| s.coords.as_continuous().expect("continuous problem").to_vec();
    match problem {
        BuiltProblem::Bimodal(_) => {
            let v: Vec<f64> = states.iter().map(|s| cont(s)[0]).collect();
            Ok(vec![NamedHistogram { name: "theta1".into(), histogram: build_histogram(&v, 0.0, 1.0, bin_width)? }])
        }
        BuiltProblem::Spectral(p) => {
            let sorted: Vec<Vec<f64>> = states.iter().map(|s| sort_peaks_by_position(&cont(s)).mu).collect();
            (0..p.spec.k)
                .map(|slot| {
                    let v: Vec<f64> = sorted.iter().map(|mu| mu[slot]).collect();
                    Ok(NamedHistogram { name: format!("mu{}", slot + 1), histogram: build_histogram(&v, 0.0, 1.0, bin_width)? })
                })
                .collect()
        }
        BuiltProblem::Exhaustive(_) => Ok(vec![]),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

pub fn write_histograms_csv(path: &Path, hists: &[NamedHistogram]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["histogram", "bin_left", "mass"])?;
    for h in hists {
        for (b, m) in h.histogram.masses.iter().enumerate() {
            w.write_record([h.name.clone(), h.histogram.bin_left(b).to_string(), m.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_samples_csv(path: &Path, names: &[String], result: &RunResult) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(names.iter().map(String::as_str).chain(["energy"]))?;
    for s in &result.final_snapshot().states {
        let mut row: Vec<String> = match &s.coords {
            Coords::Continuous(x) => x.iter().map(|v| v.to_string()).collect(),
            Coords::Binary(c) => c.iter().map(|&b| (b as u8).to_string()).collect(),
        };
        row.push(s.energy.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per rung: beta, exchange rate with the previous rung, then step
/// size and Metropolis acceptance per coordinate (or per slot).
pub fn write_diagnostics_csv(path: &Path, result: &RunResult) -> anyhow::Result<()> {
    let ladder = &result.ladder;
    let eps_cols = ladder.step_sizes.iter().map(Vec::len).max().unwrap_or(0);
    let acc_cols = result.metropolis_rates.iter().map(Vec::len).max().unwrap_or(0);
    let mut header = vec!["rung".to_string(), "beta".into(), "exchange_rate".into()];
    header.extend((1..=eps_cols).map(|j| format!("step_{j}")));
    header.extend((1..=acc_cols).map(|j| format!("acceptance_{j}")));
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&header)?;
    let cell = |v: Option<&f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (r, beta) in ladder.betas.iter().enumerate() {
        let mut row = vec![r.to_string(), beta.to_string()];
        row.push(if r == 0 { String::new() } else { cell(result.exchange_rates.get(r - 1)) });
        let eps = ladder.step_sizes.get(r);
        row.extend((0..eps_cols).map(|j| cell(eps.and_then(|e| e.get(j)))));
        let acc = result.metropolis_rates.get(r);
        row.extend((0..acc_cols).map(|j| cell(acc.and_then(|a| a.get(j)))));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `result.json` files named directly or found under the given directories.
pub fn collect_results(paths: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> anyhow::Result<()> {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(&p, out)?;
            } else if p.file_name().is_some_and(|n| n == RESULT_JSON) {
                out.push(p);
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            walk(p, &mut out)?;
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            bail!("no such result: {}", p.display());
        }
    }
    Ok(out)
}
