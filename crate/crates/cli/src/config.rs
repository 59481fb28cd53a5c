//! Run configuration: TOML file, scale presets and command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use semc::problems::{BimodalSpec, ExhaustiveSpec, SpectralSpec};
use semc::samplers::{RemcConfig, SamplerConfig, SemcConfig, SmcsConfig};

pub const OUTPUT_ENV: &str = "SEMC_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    Bimodal {
        #[serde(default = "default_r")]
        r: f64,
        #[serde(default = "default_bimodal_n")]
        n: f64,
    },
    Spectral {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default)]
        data_seed: u64,
        /// Load `data.csv` + `data.json` from here instead of generating.
        #[serde(default)]
        dataset: Option<PathBuf>,
    },
    Exhaustive {
        #[serde(default)]
        size: ExhaustiveSize,
        #[serde(default)]
        data_seed: u64,
        #[serde(default)]
        dataset: Option<PathBuf>,
    },
}

fn default_r() -> f64 {
    BimodalSpec::default().r
}
fn default_bimodal_n() -> f64 {
    BimodalSpec::default().n
}
fn default_k() -> usize {
    3
}
fn default_sigma() -> f64 {
    0.05
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExhaustiveSize {
    #[default]
    Desk,
    Full,
}

impl ProblemConfig {
    pub fn named(name: &str) -> anyhow::Result<Self> {
        Ok(match name {
            "bimodal" => ProblemConfig::Bimodal { r: default_r(), n: default_bimodal_n() },
            "spectral" | "spectral-k3" => ProblemConfig::Spectral { k: 3, sigma: default_sigma(), data_seed: 0, dataset: None },
            "spectral-k10" => ProblemConfig::Spectral { k: 10, sigma: default_sigma(), data_seed: 0, dataset: None },
            "exhaustive" | "exhaustive-desk" => ProblemConfig::Exhaustive { size: ExhaustiveSize::Desk, data_seed: 0, dataset: None },
            "exhaustive-full" => ProblemConfig::Exhaustive { size: ExhaustiveSize::Full, data_seed: 0, dataset: None },
            other => bail!("unknown problem '{other}' (bimodal, spectral-k3, spectral-k10, exhaustive-desk, exhaustive-full)"),
        })
    }

    pub fn bimodal_spec(&self) -> Option<BimodalSpec> {
        match *self {
            ProblemConfig::Bimodal { r, n } => Some(BimodalSpec { r, n }),
            _ => None,
        }
    }

    pub fn spectral_spec(&self) -> anyhow::Result<Option<SpectralSpec>> {
        match *self {
            ProblemConfig::Spectral { k, sigma, data_seed, .. } => {
                Ok(Some(SpectralSpec { sigma, ..SpectralSpec::with_k(k, data_seed)? }))
            }
            _ => Ok(None),
        }
    }

    pub fn exhaustive_spec(&self) -> Option<ExhaustiveSpec> {
        match *self {
            ProblemConfig::Exhaustive { size: ExhaustiveSize::Desk, data_seed, .. } => Some(ExhaustiveSpec::desk(data_seed)),
            ProblemConfig::Exhaustive { size: ExhaustiveSize::Full, data_seed, .. } => Some(ExhaustiveSpec::full(data_seed)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramConfig {
    pub bin_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Histogram bin width; 0.001 for the bimodal problem and 0.005 for
    /// spectral peak positions when unset.
    #[serde(default)]
    pub histogram: Option<HistogramConfig>,
}

fn default_trials() -> usize {
    1
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("cannot parse config {}", path.display()))
    }

    pub fn bin_width(&self) -> f64 {
        match (&self.histogram, &self.problem) {
            (Some(h), _) => h.bin_width,
            (None, ProblemConfig::Bimodal { .. }) => 0.001,
            _ => 0.005,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Sizes that finish in minutes on a laptop: T = 10^4, 3 trials.
    Desk,
    /// Sizes of the original study: T = 3 * 10^5, REMC with 100 rungs, 10 trials.
    Paper,
}

pub fn sampler_named(name: &str) -> anyhow::Result<SamplerConfig> {
    Ok(match name {
        "semc" => SamplerConfig::Semc(SemcConfig::default()),
        "remc" => SamplerConfig::Remc(RemcConfig::default()),
        "smcs" => SamplerConfig::Smcs(SmcsConfig::default()),
        "waste-free-smc" | "waste-free" => SamplerConfig::WasteFreeSmc(SmcsConfig { s: 100, n: 100, ..SmcsConfig::default() }),
        other => bail!("unknown sampler '{other}' (semc, remc, smcs, waste-free-smc)"),
    })
}

/// Sizes that may be overridden from the command line.
#[derive(Debug, Clone, Default)]
pub struct SizeOverrides {
    pub t: Option<usize>,
    pub s: Option<usize>,
    pub l: Option<usize>,
    pub n: Option<usize>,
}

pub fn apply_preset(cfg: &mut RunConfig, preset: Preset) {
    let (t, trials, remc_l) = match preset {
        Preset::Desk => (10_000, 3, None),
        Preset::Paper => (300_000, 10, Some(100)),
    };
    cfg.trials = trials;
    apply_sizes(cfg, &SizeOverrides { t: Some(t), l: remc_l, ..Default::default() });
}

/// `t` is the per-rung sample count (burn-in and sample count for REMC);
/// for waste-free SMC the ancestor count follows `s = t / n` unless `s` is
/// given, in which case `t = s * n`.
pub fn apply_sizes(cfg: &mut RunConfig, o: &SizeOverrides) {
    match &mut cfg.sampler {
        SamplerConfig::Semc(c) => {
            if let Some(t) = o.t {
                c.t = t;
            }
            if let Some(s) = o.s {
                c.s = s;
            }
        }
        SamplerConfig::Remc(c) => {
            if let Some(t) = o.t {
                c.burn_in = t;
                c.samples = t;
            }
            if let Some(l) = o.l {
                c.l = l;
            }
        }
        SamplerConfig::Smcs(c) => {
            if let Some(t) = o.t {
                c.t = t;
            }
            if let Some(n) = o.n {
                c.n = n;
            }
        }
        SamplerConfig::WasteFreeSmc(c) => {
            if let Some(n) = o.n {
                c.n = n;
            }
            if let Some(s) = o.s {
                c.s = s;
                c.t = s * c.n;
            } else if let Some(t) = o.t {
                c.t = t;
                c.s = (t / c.n).max(1);
            } else {
                c.t = c.s * c.n;
            }
        }
    }
}

pub fn check_sampler(cfg: &SamplerConfig) -> semc::Result<()> {
    match cfg {
        SamplerConfig::Semc(c) => c.check(),
        SamplerConfig::Remc(c) => c.check(),
        SamplerConfig::Smcs(c) => c.check(),
        SamplerConfig::WasteFreeSmc(c) => SmcsConfig { waste_free: true, ..c.clone() }.check(),
    }
}

/// Default worker count: one per chain (SEMC) or rung (REMC), capped at the
/// hardware parallelism.
pub fn default_threads(cfg: &SamplerConfig) -> usize {
    let hw = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let want = match cfg {
        SamplerConfig::Semc(c) => c.s,
        SamplerConfig::Remc(c) => c.l,
        SamplerConfig::WasteFreeSmc(c) => c.s,
        SamplerConfig::Smcs(_) => hw,
    };
    want.clamp(1, hw)
}

pub fn output_root(explicit: Option<&Path>, from_config: Option<&Path>, leaf: &str) -> PathBuf {
    if let Some(p) = explicit.or(from_config) {
        return p.to_path_buf();
    }
    let root = std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("semc-output"));
    root.join(leaf)
}
