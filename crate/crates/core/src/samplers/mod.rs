//! The four samplers. Every sampler takes a run seed instead of a generator:
//! all randomness comes from per-purpose streams derived in [`crate::rng`], so
//! results are identical for any thread count.

mod chains;
mod remc;
mod sequential;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use remc::{remc_ladder, run_remc};
pub use sequential::{run_semc, run_smcs, run_waste_free_smc};

use crate::adaptation::{ExchangeTargetConfig, RobbinsMonroConfig};
use crate::error::{invalid, Error, Result};
use crate::model::{Problem, RunResult};

/// Geometric ratio of the REMC ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gamma {
    /// Pick the hottest nonzero beta so that the estimated exchange rate with
    /// the prior equals the target, then fill in geometrically.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemcConfig {
    pub l: usize,
    pub gamma: Gamma,
    pub burn_in: usize,
    pub samples: usize,
    pub exchange_every: usize,
    /// Starting step per coordinate for every rung; half the box width when unset.
    pub initial_step: Option<Vec<f64>>,
    /// Prior draws used to place the hottest nonzero rung under `Gamma::Auto`.
    pub pilot_samples: usize,
    pub rm: RobbinsMonroConfig,
    pub exchange_target: ExchangeTargetConfig,
}

impl Default for RemcConfig {
    fn default() -> Self {
        RemcConfig {
            l: 30,
            gamma: Gamma::Auto,
            burn_in: 10_000,
            samples: 10_000,
            exchange_every: 1,
            initial_step: None,
            pilot_samples: 10_000,
            rm: RobbinsMonroConfig::remc(),
            exchange_target: ExchangeTargetConfig::default(),
        }
    }
}

impl RemcConfig {
    pub fn check(&self) -> Result<()> {
        if self.l < 2 {
            return invalid("REMC needs at least two rungs");
        }
        if self.burn_in < 1 || self.samples < 1 {
            return invalid("REMC burn-in and sample counts must be at least 1");
        }
        if self.exchange_every < 1 {
            return invalid("exchange_every must be at least 1");
        }
        if let Gamma::Fixed(g) = self.gamma {
            if !(g > 1.0 && g.is_finite()) {
                return invalid(format!("geometric ratio must exceed 1, got {g}"));
            }
        }
        if self.pilot_samples < 2 {
            return invalid("REMC pilot needs at least two prior draws");
        }
        self.rm.check()?;
        self.exchange_target.check()
    }
}

/// Settings shared by the samplers that grow their ladder one rung at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LadderSettings {
    pub rm: RobbinsMonroConfig,
    pub exchange_target: ExchangeTargetConfig,
    /// Sweeps of the pilot run that sets the first adapted rung's step sizes.
    pub pilot_sweeps: usize,
    pub max_rungs: usize,
    /// Keep every chain state of every rung in the result.
    pub record_trajectories: bool,
}

impl Default for LadderSettings {
    fn default() -> Self {
        LadderSettings {
            rm: RobbinsMonroConfig::default(),
            exchange_target: ExchangeTargetConfig::default(),
            pilot_sweeps: 2000,
            max_rungs: 1000,
            record_trajectories: false,
        }
    }
}

impl LadderSettings {
    pub fn check(&self) -> Result<()> {
        if self.max_rungs < 2 {
            return invalid("max_rungs must be at least 2");
        }
        self.rm.check()?;
        self.exchange_target.check()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmcsConfig {
    pub t: usize,
    /// Kernel steps per particle (plain SMCS) or chain length (waste-free).
    pub n: usize,
    pub waste_free: bool,
    /// Resampled ancestors for waste-free; `t = s * n`.
    pub s: usize,
    /// Waste-free only: leading chain states (ancestor included) that are
    /// moved but not kept. Zero reproduces the textbook algorithm.
    pub burn_in: usize,
    #[serde(flatten)]
    pub ladder: LadderSettings,
}

impl Default for SmcsConfig {
    fn default() -> Self {
        SmcsConfig { t: 10_000, n: 1, waste_free: false, s: 10_000, burn_in: 0, ladder: LadderSettings::default() }
    }
}

impl SmcsConfig {
    pub fn waste_free(s: usize, n: usize) -> Self {
        SmcsConfig { t: s * n, n, waste_free: true, s, ..Default::default() }
    }

    pub fn check(&self) -> Result<()> {
        if self.t < 2 || self.n < 1 {
            return invalid("SMCS needs t >= 2 and n >= 1");
        }
        if self.waste_free && (self.s < 1 || self.s * self.n != self.t) {
            return invalid(format!("waste-free SMC needs t = s * n, got t = {}, s = {}, n = {}", self.t, self.s, self.n));
        }
        self.ladder.check()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SemcConfig {
    pub t: usize,
    pub s: usize,
    /// Turning exchanges off leaves waste-free SMC with one chain per ancestor.
    pub exchange: bool,
    #[serde(flatten)]
    pub ladder: LadderSettings,
}

impl Default for SemcConfig {
    fn default() -> Self {
        SemcConfig { t: 10_000, s: 50, exchange: true, ladder: LadderSettings::default() }
    }
}

impl SemcConfig {
    pub fn check(&self) -> Result<()> {
        if self.s < 1 || self.t < 2 || self.t % self.s != 0 {
            return invalid(format!("SEMC needs s >= 1 dividing t >= 2, got t = {}, s = {}", self.t, self.s));
        }
        self.ladder.check()
    }
}

/// Any sampler with its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SamplerConfig {
    Remc(RemcConfig),
    Smcs(SmcsConfig),
    WasteFreeSmc(SmcsConfig),
    Semc(SemcConfig),
}

pub fn run_sampler<P: Problem + ?Sized>(problem: &P, cfg: &SamplerConfig, seed: u64) -> Result<RunResult> {
    match cfg {
        SamplerConfig::Remc(c) => run_remc(problem, c, seed),
        SamplerConfig::Smcs(c) => run_smcs(problem, &SmcsConfig { waste_free: false, ..c.clone() }, seed),
        SamplerConfig::WasteFreeSmc(c) => run_waste_free_smc(problem, &SmcsConfig { waste_free: true, ..c.clone() }, seed),
        SamplerConfig::Semc(c) => run_semc(problem, c, seed),
    }
}

/// Normalized resampling weights `exp(-delta_beta N E)` for one rung's energies.
pub fn resampling_weights(energies: &[f64], delta_beta: f64, n: f64) -> Result<Vec<f64>> {
    if energies.is_empty() {
        return invalid("no energies to weight");
    }
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let d = delta_beta * n;
    let w: Vec<f64> = energies.iter().map(|e| (-d * (e - e_min)).exp()).collect();
    let total: f64 = w.iter().sum();
    // the minimum-energy sample has weight exactly 1, so total >= 1
    if !(total.is_finite() && total >= 1.0) {
        return Err(Error::DegenerateWeights { beta: delta_beta });
    }
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// `count` multinomial draws of indices with the given normalized weights.
pub fn multinomial_resample<R: Rng + ?Sized>(weights: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    let mut cum = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cum.push(acc);
    }
    let last = weights.len() - 1;
    (0..count)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cum.partition_point(|&c| c <= u).min(last)
        })
        .collect()
}
