//! Domain types shared by every sampler: states, the target-problem
//! abstraction, temperature ladders, per-rung snapshots and run results.
//!
//! Priors are flat over the declared support, so the tempered density of a
//! state is `exp(-beta * N * E(theta))` inside the support and zero outside.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Coordinates of one point of parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Coords {
    Continuous(Vec<f64>),
    Binary(Vec<bool>),
}

impl Coords {
    pub fn len(&self) -> usize {
        match self {
            Coords::Continuous(v) => v.len(),
            Coords::Binary(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_continuous(&self) -> Option<&[f64]> {
        match self {
            Coords::Continuous(v) => Some(v),
            Coords::Binary(_) => None,
        }
    }

    pub fn as_binary(&self) -> Option<&[bool]> {
        match self {
            Coords::Binary(v) => Some(v),
            Coords::Continuous(_) => None,
        }
    }
}

/// A point of parameter space with its cached error-function value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterState {
    pub coords: Coords,
    pub energy: f64,
}

impl ParameterState {
    /// Builds a state with a freshly evaluated energy.
    pub fn new<P: Problem + ?Sized>(problem: &P, coords: Coords) -> Self {
        let energy = problem.energy(&coords);
        ParameterState { coords, energy }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub low: f64,
    pub high: f64,
}

impl Bounds {
    pub fn new(low: f64, high: f64) -> Self {
        assert!(low < high && low.is_finite() && high.is_finite(), "empty bounds [{low}, {high}]");
        Bounds { low, high }
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.low && x <= self.high
    }
}

/// Support of the (flat) prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Support {
    /// Axis-aligned box; one interval per coordinate.
    Box(Vec<Bounds>),
    /// All bit sequences of the given length.
    Binary(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemKind {
    Continuous,
    Binary,
}

impl Support {
    pub fn dimension(&self) -> usize {
        match self {
            Support::Box(b) => b.len(),
            Support::Binary(n) => *n,
        }
    }

    pub fn kind(&self) -> ProblemKind {
        match self {
            Support::Box(_) => ProblemKind::Continuous,
            Support::Binary(_) => ProblemKind::Binary,
        }
    }

    pub fn bounds(&self) -> &[Bounds] {
        match self {
            Support::Box(b) => b,
            Support::Binary(_) => &[],
        }
    }

    pub fn contains(&self, coords: &Coords) -> bool {
        match (self, coords) {
            (Support::Box(bounds), Coords::Continuous(x)) => {
                bounds.len() == x.len() && bounds.iter().zip(x).all(|(b, &v)| b.contains(v))
            }
            (Support::Binary(n), Coords::Binary(bits)) => bits.len() == *n,
            _ => false,
        }
    }

    /// Uniform draw from the support.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Coords {
        match self {
            Support::Box(bounds) => Coords::Continuous(
                bounds.iter().map(|b| b.low + b.width() * rng.random::<f64>()).collect(),
            ),
            Support::Binary(n) => Coords::Binary((0..*n).map(|_| rng.random::<bool>()).collect()),
        }
    }
}

/// A Bayesian model seen through its error function.
///
/// The likelihood is `exp(-N * E(theta)) / C`; `C` is never needed. Energy
/// evaluation must be deterministic and re-entrant.
pub trait Problem: Send + Sync {
    fn label(&self) -> &str;

    fn support(&self) -> &Support;

    /// The `N` multiplying the error function.
    fn data_size(&self) -> f64;

    /// Error function at `coords`. Callers guarantee `coords` lies in the support.
    fn energy(&self, coords: &Coords) -> f64;

    fn dimension(&self) -> usize {
        self.support().dimension()
    }

    fn kind(&self) -> ProblemKind {
        self.support().kind()
    }
}

/// Draws a state from the flat prior.
pub fn sample_prior<P: Problem + ?Sized, R: Rng + ?Sized>(problem: &P, rng: &mut R) -> ParameterState {
    let coords = problem.support().sample(rng);
    ParameterState::new(problem, coords)
}

/// Log of the tempered density ratio `p_beta(new) / p_beta(old)` for two
/// in-support states: `-beta * N * (e_new - e_old)`.
pub fn tempered_log_density_ratio(n: f64, beta: f64, e_new: f64, e_old: f64) -> Result<f64> {
    if !(n.is_finite() && beta.is_finite() && e_new.is_finite() && e_old.is_finite()) {
        return invalid(format!(
            "non-finite input to tempered ratio (N={n}, beta={beta}, e_new={e_new}, e_old={e_old})"
        ));
    }
    if beta == 0.0 {
        return Ok(0.0);
    }
    Ok(-beta * n * (e_new - e_old))
}

/// True iff the state lies in the support and its cached energy is exactly
/// what a fresh evaluation produces.
pub fn validate_state<P: Problem + ?Sized>(problem: &P, state: &ParameterState) -> bool {
    if !problem.support().contains(&state.coords) {
        return false;
    }
    problem.energy(&state.coords).to_bits() == state.energy.to_bits()
}

/// Inverse temperatures together with the per-rung step sizes.
///
/// `step_sizes[l]` holds one step per coordinate for rung `l`; it is empty for
/// the prior rung and for binary problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureLadder {
    pub betas: Vec<f64>,
    pub step_sizes: Vec<Vec<f64>>,
}

impl TemperatureLadder {
    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.betas.last() == Some(&1.0)
    }

    /// Checks ordering and step-size positivity.
    pub fn check(&self) -> Result<()> {
        if self.betas.first() != Some(&0.0) {
            return invalid("ladder must start at beta = 0");
        }
        if self.betas.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("ladder betas must be strictly increasing");
        }
        if self.betas.iter().any(|&b| b > 1.0) {
            return invalid("ladder betas must not exceed 1");
        }
        if self.step_sizes.len() != self.betas.len() {
            return invalid("one step-size vector per rung required");
        }
        if self.step_sizes.iter().flatten().any(|&e| !(e > 0.0 && e.is_finite())) {
            return invalid("step sizes must be positive and finite");
        }
        Ok(())
    }
}

/// Retained samples at one rung.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSnapshot {
    pub beta: f64,
    pub states: Vec<ParameterState>,
    pub energies: Vec<f64>,
}

impl EnsembleSnapshot {
    pub fn new(beta: f64, states: Vec<ParameterState>) -> Self {
        let energies = states.iter().map(|s| s.energy).collect();
        EnsembleSnapshot { beta, states, energies }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Remc,
    Smcs,
    WasteFreeSmc,
    Semc,
}

impl SamplerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SamplerKind::Remc => "remc",
            SamplerKind::Smcs => "smcs",
            SamplerKind::WasteFreeSmc => "waste-free-smc",
            SamplerKind::Semc => "semc",
        }
    }
}

/// Everything a sampler run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub sampler: SamplerKind,
    pub problem: String,
    pub ladder: TemperatureLadder,
    pub snapshots: Vec<EnsembleSnapshot>,
    /// `F' = F - log C`.
    pub free_energy: f64,
    /// Realized swap acceptance per adjacent rung pair `(l-1, l)`; empty for
    /// samplers without exchanges.
    pub exchange_rates: Vec<f64>,
    /// Realized Metropolis acceptance per rung and coordinate (one entry per
    /// rung for binary problems; empty for the prior rung).
    pub metropolis_rates: Vec<Vec<f64>>,
    pub seed: u64,
    pub wall_time: f64,
    /// Full per-rung chain trajectories when recording was requested.
    pub trajectories: Option<Vec<Vec<ParameterState>>>,
}

impl RunResult {
    pub fn final_snapshot(&self) -> &EnsembleSnapshot {
        self.snapshots.last().expect("run result without snapshots")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::FnProblem;
    use proptest::prelude::*;

    fn unit_square() -> FnProblem {
        FnProblem::continuous("quad", vec![Bounds::new(0.0, 1.0); 2], 1.0, |x| x[0] * x[0] + x[1])
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(tempered_log_density_ratio(10.0, 0.0, 3.0, -1.0).unwrap(), 0.0);
        assert!((tempered_log_density_ratio(10.0, 1.0, 0.2, 0.5).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(tempered_log_density_ratio(30000.0, 0.5, 0.7, 0.7).unwrap(), 0.0);
        assert!(tempered_log_density_ratio(1.0, 1.0, f64::NAN, 0.0).is_err());
        assert!(tempered_log_density_ratio(1.0, f64::INFINITY, 0.0, 0.0).is_err());
    }

    #[test]
    fn validate_examples() {
        let p = unit_square();
        let good = ParameterState::new(&p, Coords::Continuous(vec![0.5, 0.5]));
        assert!(validate_state(&p, &good));
        let outside = ParameterState { coords: Coords::Continuous(vec![1.5, 0.5]), energy: 2.75 };
        assert!(!validate_state(&p, &outside));
        let stale = ParameterState { energy: good.energy + 1e-3, ..good.clone() };
        assert!(!validate_state(&p, &stale));
        let wrong_kind = ParameterState { coords: Coords::Binary(vec![true, false]), energy: 0.0 };
        assert!(!validate_state(&p, &wrong_kind));
    }

    #[test]
    fn ladder_check() {
        let ok = TemperatureLadder { betas: vec![0.0, 0.3, 1.0], step_sizes: vec![vec![], vec![0.1], vec![0.05]] };
        assert!(ok.check().is_ok() && ok.is_complete());
        let bad = TemperatureLadder { betas: vec![0.0, 0.3, 0.3], step_sizes: vec![vec![]; 3] };
        assert!(bad.check().is_err());
        let neg = TemperatureLadder { betas: vec![0.0, 1.0], step_sizes: vec![vec![], vec![-1.0]] };
        assert!(neg.check().is_err());
    }

    proptest! {
        #[test]
        fn ratio_zero_at_prior(e1 in -1e3..1e3f64, e2 in -1e3..1e3f64, n in 1.0..1e5f64) {
            prop_assert_eq!(tempered_log_density_ratio(n, 0.0, e1, e2).unwrap(), 0.0);
        }

        #[test]
        fn ratio_antisymmetric(e1 in -10.0..10.0f64, e2 in -10.0..10.0f64, b in 0.0..1.0f64, n in 1.0..1e4f64) {
            let fwd = tempered_log_density_ratio(n, b, e1, e2).unwrap();
            let back = tempered_log_density_ratio(n, b, e2, e1).unwrap();
            prop_assert_eq!(fwd, -back);
        }

        #[test]
        fn ratio_linear_in_beta(e1 in -10.0..10.0f64, e2 in -10.0..10.0f64, b1 in 0.0..0.5f64, b2 in 0.0..0.5f64) {
            let n = 300.0;
            let sum = tempered_log_density_ratio(n, b1 + b2, e1, e2).unwrap();
            let parts = tempered_log_density_ratio(n, b1, e1, e2).unwrap() + tempered_log_density_ratio(n, b2, e1, e2).unwrap();
            prop_assert!((sum - parts).abs() <= 1e-9 * (1.0 + sum.abs()));
        }

        #[test]
        fn prior_draws_in_support(seed in 0u64..1000) {
            let p = unit_square();
            let mut rng = crate::rng::stream(seed, crate::rng::Purpose::Prior, 0, 0);
            let s = sample_prior(&p, &mut rng);
            prop_assert!(validate_state(&p, &s));
        }
    }
}
