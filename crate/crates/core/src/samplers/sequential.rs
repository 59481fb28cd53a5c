//! Samplers that grow the ladder rung by rung from the previous rung's
//! samples: SMCS, waste-free SMC and SEMC.

use std::time::Instant;

use rand::seq::SliceRandom;

use super::chains::{run_rung, ExchangePlan, RungPlan};
use super::{multinomial_resample, resampling_weights, LadderSettings, SemcConfig, SmcsConfig};
use crate::adaptation::{extrapolate_steps, propose_next_beta, tune_initial_rungs};
use crate::error::{invalid, Error, Result};
use crate::evidence::estimate_free_energy;
use crate::model::{sample_prior, EnsembleSnapshot, ParameterState, Problem, RunResult, SamplerKind, TemperatureLadder};
use crate::rng::{stream, Purpose};

/// How one rung is populated from the previous rung.
#[derive(Clone, Copy)]
enum Scheme {
    /// `t` resampled particles, each moved `n` times; only the last state kept.
    Smcs { n: usize },
    /// `s` ancestors, each grown into a chain of `burn_in + n` states of which
    /// the first `burn_in` are dropped.
    WasteFree { s: usize, n: usize, burn_in: usize },
    /// `s` ancestors, `2t/s` moves each with optional exchanges; the second
    /// half of every chain is kept.
    Semc { s: usize, exchange: bool },
}

impl Scheme {
    fn ancestors(&self, t: usize) -> usize {
        match *self {
            Scheme::Smcs { .. } => t,
            Scheme::WasteFree { s, .. } | Scheme::Semc { s, .. } => s,
        }
    }

    fn moves(&self, t: usize) -> usize {
        match *self {
            Scheme::Smcs { n } => n,
            Scheme::WasteFree { n, burn_in, .. } => burn_in + n - 1,
            Scheme::Semc { s, .. } => 2 * t / s,
        }
    }

    fn retain_from(&self, t: usize) -> usize {
        match *self {
            Scheme::Smcs { n } => n,
            Scheme::WasteFree { burn_in, .. } => burn_in,
            Scheme::Semc { s, .. } => t / s + 1,
        }
    }
}

pub fn run_smcs<P: Problem + ?Sized>(problem: &P, cfg: &SmcsConfig, seed: u64) -> Result<RunResult> {
    cfg.check()?;
    if cfg.waste_free {
        return invalid("run_smcs called with waste_free = true");
    }
    run_sequential(problem, Scheme::Smcs { n: cfg.n }, cfg.t, &cfg.ladder, seed, SamplerKind::Smcs)
}

pub fn run_waste_free_smc<P: Problem + ?Sized>(problem: &P, cfg: &SmcsConfig, seed: u64) -> Result<RunResult> {
    cfg.check()?;
    if !cfg.waste_free {
        return invalid("run_waste_free_smc called with waste_free = false");
    }
    let scheme = Scheme::WasteFree { s: cfg.s, n: cfg.n, burn_in: cfg.burn_in };
    run_sequential(problem, scheme, cfg.t, &cfg.ladder, seed, SamplerKind::WasteFreeSmc)
}

pub fn run_semc<P: Problem + ?Sized>(problem: &P, cfg: &SemcConfig, seed: u64) -> Result<RunResult> {
    cfg.check()?;
    let scheme = Scheme::Semc { s: cfg.s, exchange: cfg.exchange };
    run_sequential(problem, scheme, cfg.t, &cfg.ladder, seed, SamplerKind::Semc)
}

fn run_sequential<P: Problem + ?Sized>(
    problem: &P,
    scheme: Scheme,
    t: usize,
    settings: &LadderSettings,
    seed: u64,
    kind: SamplerKind,
) -> Result<RunResult> {
    let clock = Instant::now();
    let n = problem.data_size();

    let prior: Vec<ParameterState> = (0..t)
        .map(|i| sample_prior(problem, &mut stream(seed, Purpose::Prior, 0, i)))
        .collect();
    let mut snapshots = vec![EnsembleSnapshot::new(0.0, prior)];
    let mut ladder = TemperatureLadder { betas: vec![0.0], step_sizes: vec![vec![]] };
    let mut exchange_rates = Vec::new();
    let mut metropolis_rates = vec![vec![]];
    let mut trajectories = settings.record_trajectories.then(|| vec![vec![]]);

    while ladder.betas.last() != Some(&1.0) {
        let l = ladder.betas.len();
        if l >= settings.max_rungs {
            return Err(Error::LadderTooLong(settings.max_rungs));
        }
        let prev = snapshots.last().expect("ladder starts with the prior rung");
        let beta_prev = prev.beta;
        let prev_gap = (l >= 2).then(|| beta_prev - ladder.betas[l - 2]);
        let beta = propose_next_beta(&prev.energies, beta_prev, prev_gap, n, &settings.exchange_target)?;
        let weights = resampling_weights(&prev.energies, beta - beta_prev, n)?;

        let steps = if problem.support().bounds().is_empty() {
            vec![]
        } else if l == 1 {
            let mut pilot_rng = stream(seed, Purpose::Pilot, l, 0);
            let start = &prev.states[multinomial_resample(&weights, 1, &mut pilot_rng)[0]];
            tune_initial_rungs(problem, beta, start, settings.pilot_sweeps, &settings.rm, &mut pilot_rng)?.steps
        } else if l == 2 {
            ladder.step_sizes[1].clone()
        } else {
            extrapolate_steps(&ladder.step_sizes[l - 1], &ladder.step_sizes[l - 2], ladder.betas[l - 1], ladder.betas[l - 2], beta)?
        };

        let mut resample_rng = stream(seed, Purpose::Resample, l, 0);
        let ancestors: Vec<ParameterState> = multinomial_resample(&weights, scheme.ancestors(t), &mut resample_rng)
            .into_iter()
            .map(|i| prev.states[i].clone())
            .collect();

        let moves = scheme.moves(t);
        let mut pool: Vec<ParameterState>;
        let partners: Vec<usize>;
        let exchange = match scheme {
            Scheme::Semc { exchange: true, .. } => {
                pool = prev.states.clone();
                let mut shuffle_rng = stream(seed, Purpose::Shuffle, l, 0);
                let mut first: Vec<usize> = (0..t).collect();
                let mut second = first.clone();
                first.shuffle(&mut shuffle_rng);
                second.shuffle(&mut shuffle_rng);
                first.extend(second);
                partners = first;
                Some(ExchangePlan { pool: &mut pool, beta_prev, partners: &partners })
            }
            _ => None,
        };

        let plan = RungPlan {
            beta,
            rung: l,
            seed,
            moves,
            retain_from: scheme.retain_from(t),
            steps,
            rm: &settings.rm,
            record: settings.record_trajectories,
            exchange,
        };
        let out = run_rung(problem, ancestors, plan)?;
        debug_assert_eq!(out.retained.len(), t);

        ladder.betas.push(beta);
        ladder.step_sizes.push(out.steps);
        metropolis_rates.push(out.metropolis_rates);
        if let Some(rate) = out.exchange_rate {
            exchange_rates.push(rate);
        }
        if let (Some(all), Some(path)) = (trajectories.as_mut(), out.trajectory) {
            all.push(path);
        }
        snapshots.push(EnsembleSnapshot::new(beta, out.retained));
    }

    let free_energy = estimate_free_energy(&snapshots, n)?;
    Ok(RunResult {
        sampler: kind,
        problem: problem.label().to_string(),
        ladder,
        snapshots,
        free_energy,
        exchange_rates,
        metropolis_rates,
        seed,
        wall_time: clock.elapsed().as_secs_f64(),
        trajectories,
    })
}
