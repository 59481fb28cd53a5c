//! Problem construction and persisted datasets (`data.csv` plus a `data.json`
//! sidecar holding the spec and seed).

use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use semc::problems::{
    BimodalProblem, ExhaustiveData, ExhaustiveProblem, ExhaustiveSpec, SpectralData, SpectralProblem, SpectralSpec,
};
use semc::Problem;

use crate::config::ProblemConfig;

pub const DATA_CSV: &str = "data.csv";
pub const DATA_JSON: &str = "data.json";

pub enum BuiltProblem {
    Bimodal(BimodalProblem),
    Spectral(SpectralProblem),
    Exhaustive(ExhaustiveProblem),
}

impl BuiltProblem {
    pub fn as_dyn(&self) -> &dyn Problem {
        match self {
            BuiltProblem::Bimodal(p) => p,
            BuiltProblem::Spectral(p) => p,
            BuiltProblem::Exhaustive(p) => p,
        }
    }

    pub fn coordinate_names(&self) -> Vec<String> {
        match self {
            BuiltProblem::Bimodal(_) => vec!["theta1".into(), "theta2".into()],
            BuiltProblem::Spectral(p) => {
                let k = p.spec.k;
                ["a", "mu", "b"].iter().flat_map(|n| (1..=k).map(move |i| format!("{n}{i}"))).collect()
            }
            BuiltProblem::Exhaustive(p) => (1..=p.spec.p).map(|i| format!("c{i}")).collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum Sidecar {
    Spectral { spec: SpectralSpec },
    Exhaustive { spec: ExhaustiveSpec, coefficients: Vec<f64> },
}

/// Builds the configured problem, loading its data from `dataset` when set
/// and generating it from the data seed otherwise.
pub fn build_problem(cfg: &ProblemConfig) -> anyhow::Result<BuiltProblem> {
    Ok(match cfg {
        ProblemConfig::Bimodal { .. } => {
            BuiltProblem::Bimodal(BimodalProblem::new(cfg.bimodal_spec().expect("bimodal"))?)
        }
        ProblemConfig::Spectral { dataset: Some(dir), .. } => BuiltProblem::Spectral(load_spectral(dir)?),
        ProblemConfig::Spectral { .. } => {
            BuiltProblem::Spectral(SpectralProblem::generate(cfg.spectral_spec()?.expect("spectral"))?)
        }
        ProblemConfig::Exhaustive { dataset: Some(dir), .. } => BuiltProblem::Exhaustive(load_exhaustive(dir)?),
        ProblemConfig::Exhaustive { .. } => {
            BuiltProblem::Exhaustive(ExhaustiveProblem::generate(cfg.exhaustive_spec().expect("exhaustive"))?)
        }
    })
}

/// Writes the problem's data to `dir`; the bimodal problem has none.
pub fn save_dataset(problem: &BuiltProblem, dir: &Path) -> anyhow::Result<()> {
    let (header, rows, sidecar): (Vec<String>, Vec<Vec<f64>>, Sidecar) = match problem {
        BuiltProblem::Bimodal(_) => return Ok(()),
        BuiltProblem::Spectral(p) => (
            vec!["x".into(), "y".into()],
            p.data.x.iter().zip(&p.data.y).map(|(&x, &y)| vec![x, y]).collect(),
            Sidecar::Spectral { spec: p.spec.clone() },
        ),
        BuiltProblem::Exhaustive(p) => {
            let cols = p.spec.p;
            let mut header: Vec<String> = (1..=cols).map(|j| format!("x{j}")).collect();
            header.push("y".into());
            let rows = p
                .data
                .x
                .chunks_exact(cols)
                .zip(&p.data.y)
                .map(|(row, &y)| row.iter().copied().chain(std::iter::once(y)).collect())
                .collect();
            (header, rows, Sidecar::Exhaustive { spec: p.spec.clone(), coefficients: p.data.coefficients.clone() })
        }
    };
    let mut w = csv::Writer::from_path(dir.join(DATA_CSV))?;
    w.write_record(&header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    std::fs::write(dir.join(DATA_JSON), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

fn read_rows(dir: &Path, width: usize) -> anyhow::Result<Vec<Vec<f64>>> {
    let path = dir.join(DATA_CSV);
    let mut r = csv::Reader::from_path(&path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != width {
            bail!("{}: expected {width} columns, found {}", path.display(), rec.len());
        }
        rows.push(rec.iter().map(|s| s.parse::<f64>()).collect::<Result<Vec<_>, _>>()?);
    }
    Ok(rows)
}

fn read_sidecar(dir: &Path) -> anyhow::Result<Sidecar> {
    let path = dir.join(DATA_JSON);
    let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

pub fn load_spectral(dir: &Path) -> anyhow::Result<SpectralProblem> {
    let Sidecar::Spectral { spec } = read_sidecar(dir)? else { bail!("{} is not a spectral dataset", dir.display()) };
    let rows = read_rows(dir, 2)?;
    let data = SpectralData { x: rows.iter().map(|r| r[0]).collect(), y: rows.iter().map(|r| r[1]).collect() };
    Ok(SpectralProblem::new(spec, data)?)
}

pub fn load_exhaustive(dir: &Path) -> anyhow::Result<ExhaustiveProblem> {
    let Sidecar::Exhaustive { spec, coefficients } = read_sidecar(dir)? else {
        bail!("{} is not an exhaustive-search dataset", dir.display())
    };
    let rows = read_rows(dir, spec.p + 1)?;
    let data = ExhaustiveData {
        x: rows.iter().flat_map(|r| r[..spec.p].iter().copied()).collect(),
        y: rows.iter().map(|r| r[spec.p]).collect(),
        coefficients,
    };
    Ok(ExhaustiveProblem::new(spec, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn datasets_round_trip_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["spectral-k3", "exhaustive-desk"] {
            let sub = dir.path().join(name);
            std::fs::create_dir(&sub).unwrap();
            let built = build_problem(&ProblemConfig::named(name).unwrap()).unwrap();
            save_dataset(&built, &sub).unwrap();
            match built {
                BuiltProblem::Spectral(p) => assert_eq!(load_spectral(&sub).unwrap().data, p.data),
                BuiltProblem::Exhaustive(p) => {
                    let q = load_exhaustive(&sub).unwrap();
                    assert_eq!((q.data, q.spec), (p.data, p.spec));
                }
                BuiltProblem::Bimodal(_) => unreachable!(),
            }
        }
    }
}
