//! Replica exchange Monte Carlo on a geometric ladder.

use std::time::Instant;

use rayon::prelude::*;

use super::{Gamma, RemcConfig};
use crate::adaptation::{propose_next_beta, robbins_monro_update};
use crate::error::{invalid, Result};
use crate::evidence::estimate_free_energy;
use crate::kernels::{acceptance_slots, exchange_accept_prob, kernel_step, try_exchange};
use crate::model::{sample_prior, EnsembleSnapshot, ParameterState, Problem, RunResult, SamplerKind, TemperatureLadder};
use crate::rng::{stream, Purpose, SimRng};

/// `beta_0 = 0` followed by `gamma^(l - L + 1)` for `l = 1..L-1`.
pub fn remc_ladder<P: Problem + ?Sized>(problem: &P, cfg: &RemcConfig, seed: u64) -> Result<Vec<f64>> {
    cfg.check()?;
    let l = cfg.l;
    if l == 2 {
        return Ok(vec![0.0, 1.0]);
    }
    let gamma = match cfg.gamma {
        Gamma::Fixed(g) => g,
        Gamma::Auto => {
            let mut rng = stream(seed, Purpose::Pilot, 0, 0);
            let energies: Vec<f64> = (0..cfg.pilot_samples).map(|_| sample_prior(problem, &mut rng).energy).collect();
            let beta1 = propose_next_beta(&energies, 0.0, None, problem.data_size(), &cfg.exchange_target)?;
            if beta1 >= 1.0 {
                return invalid("energy too flat to place a geometric ladder: one rung already reaches beta = 1");
            }
            beta1.powf(-1.0 / (l - 2) as f64)
        }
    };
    let mut betas = vec![0.0];
    betas.extend((1..l).map(|i| gamma.powi(i as i32 + 1 - l as i32)));
    *betas.last_mut().expect("L >= 2") = 1.0;
    Ok(betas)
}

struct Replica {
    state: ParameterState,
    rng: SimRng,
    steps: Vec<f64>,
    flags: Vec<bool>,
    window: Vec<usize>,
    updates: usize,
    accepted: Vec<usize>,
}

pub fn run_remc<P: Problem + ?Sized>(problem: &P, cfg: &RemcConfig, seed: u64) -> Result<RunResult> {
    let clock = Instant::now();
    let betas = remc_ladder(problem, cfg, seed)?;
    let l = betas.len();
    let n = problem.data_size();
    let slots = acceptance_slots(problem);
    let bounds = problem.support().bounds();
    let initial: Vec<f64> = match &cfg.initial_step {
        Some(s) if s.len() == bounds.len() => s.clone(),
        Some(_) => return invalid("initial_step needs one entry per coordinate"),
        None => bounds.iter().map(|b| 0.5 * b.width()).collect(),
    };

    let mut prior_rng = stream(seed, Purpose::Prior, 0, 0);
    let mut exchange_rng = stream(seed, Purpose::Exchange, 0, 0);
    let mut replicas: Vec<Replica> = (0..l)
        .map(|r| {
            let state = sample_prior(problem, &mut stream(seed, Purpose::Prior, r, 1));
            Replica {
                state,
                rng: stream(seed, Purpose::Move, r, 0),
                steps: if r == 0 { vec![] } else { initial.clone() },
                flags: vec![false; slots],
                window: vec![0; slots],
                updates: 0,
                accepted: vec![0; slots],
            }
        })
        .collect();
    let parallel = rayon::current_num_threads() > 1;
    let mut samples: Vec<Vec<ParameterState>> = vec![Vec::with_capacity(cfg.samples); l];
    let mut swaps = vec![0usize; l - 1];
    let mut attempts = 0usize;
    let total = cfg.burn_in + cfg.samples;

    for it in 0..total {
        let burning = it < cfg.burn_in;
        replicas[0].state = sample_prior(problem, &mut prior_rng);
        let sweep = |(r, rep): (usize, &mut Replica)| -> Result<()> {
            kernel_step(problem, betas[r + 1], &mut rep.state, &rep.steps, &mut rep.rng, &mut rep.flags)?;
            if burning {
                for (w, &f) in rep.window.iter_mut().zip(&rep.flags) {
                    *w += f as usize;
                }
                if !rep.steps.is_empty() && (it + 1) % cfg.rm.update_every == 0 {
                    rep.updates += 1;
                    for j in 0..rep.steps.len() {
                        let p = rep.window[j] as f64 / cfg.rm.update_every as f64;
                        rep.steps[j] = robbins_monro_update(rep.steps[j], p, rep.updates, &cfg.rm)?;
                        rep.window[j] = 0;
                    }
                }
            } else {
                for (a, &f) in rep.accepted.iter_mut().zip(&rep.flags) {
                    *a += f as usize;
                }
            }
            Ok(())
        };
        if parallel {
            replicas[1..].par_iter_mut().enumerate().try_for_each(sweep)?;
        } else {
            replicas[1..].iter_mut().enumerate().try_for_each(sweep)?;
        }

        if it % cfg.exchange_every == 0 {
            if !burning {
                attempts += 1;
            }
            for r in 0..l - 1 {
                let (lo, hi) = replicas.split_at_mut(r + 1);
                let (a, b) = (&mut lo[r].state, &mut hi[0].state);
                let prob = exchange_accept_prob(n, betas[r + 1], betas[r], b.energy, a.energy)?;
                let swapped = try_exchange(&mut exchange_rng, prob, a, b);
                if swapped && !burning {
                    swaps[r] += 1;
                }
            }
        }

        if !burning {
            for (r, rep) in replicas.iter().enumerate() {
                samples[r].push(rep.state.clone());
            }
        }
    }

    let snapshots: Vec<EnsembleSnapshot> =
        betas.iter().zip(samples).map(|(&b, states)| EnsembleSnapshot::new(b, states)).collect();
    let free_energy = estimate_free_energy(&snapshots, n)?;
    let metropolis_rates = replicas
        .iter()
        .enumerate()
        .map(|(r, rep)| if r == 0 { vec![] } else { rep.accepted.iter().map(|&a| a as f64 / cfg.samples as f64).collect() })
        .collect();
    let exchange_rates = swaps.iter().map(|&s| if attempts > 0 { s as f64 / attempts as f64 } else { 0.0 }).collect();
    let ladder = TemperatureLadder { betas, step_sizes: replicas.into_iter().map(|r| r.steps).collect() };
    Ok(RunResult {
        sampler: SamplerKind::Remc,
        problem: problem.label().to_string(),
        ladder,
        snapshots,
        free_energy,
        exchange_rates,
        metropolis_rates,
        seed,
        wall_time: clock.elapsed().as_secs_f64(),
        trajectories: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_state, Bounds, Coords};
    use crate::problems::FnProblem;

    #[test]
    fn two_rungs_flat_energy() {
        let p = FnProblem::continuous("flat", vec![Bounds::new(0.0, 1.0); 2], 10.0, |_| 0.0);
        let cfg = RemcConfig { l: 2, burn_in: 200, samples: 20_000, ..Default::default() };
        let r = run_remc(&p, &cfg, 4).unwrap();
        assert_eq!(r.ladder.betas, vec![0.0, 1.0]);
        assert_eq!(r.exchange_rates, vec![1.0]);
        let mean: f64 = r.snapshots[1].states.iter().map(|s| s.coords.as_continuous().unwrap()[0]).sum::<f64>() / 20_000.0;
        assert!((mean - 0.5).abs() < 0.02, "{mean}");
        assert_eq!(r.free_energy, 0.0);
    }

    #[test]
    fn geometric_ladder() {
        let p = FnProblem::continuous("quad", vec![Bounds::new(0.0, 1.0)], 100.0, |x| x[0] * x[0]);
        let cfg = RemcConfig { l: 5, gamma: Gamma::Fixed(2.0), ..Default::default() };
        assert_eq!(remc_ladder(&p, &cfg, 0).unwrap(), vec![0.0, 0.125, 0.25, 0.5, 1.0]);
        let auto = remc_ladder(&p, &RemcConfig { l: 10, pilot_samples: 2000, ..Default::default() }, 0).unwrap();
        assert_eq!(auto.len(), 10);
        assert!(auto.windows(2).all(|w| w[1] > w[0]) && auto[9] == 1.0);
        let ratios: Vec<f64> = auto[1..].windows(2).map(|w| w[1] / w[0]).collect();
        assert!(ratios.iter().all(|g| (g - ratios[0]).abs() < 1e-9));
    }

    #[test]
    fn gaussian_free_energy_and_determinism() {
        let p = FnProblem::continuous("quad", vec![Bounds::new(0.0, 1.0); 2], 200.0, |x| (x[0] - 0.3).powi(2) + (x[1] - 0.6).powi(2));
        let cfg = RemcConfig { l: 12, burn_in: 5000, samples: 20_000, ..Default::default() };
        let a = run_remc(&p, &cfg, 8).unwrap();
        let b = run_remc(&p, &cfg, 8).unwrap();
        assert_eq!(a.snapshots, b.snapshots);
        assert_eq!(a.ladder, b.ladder);
        let exact = -(std::f64::consts::PI / 200.0).ln();
        assert!((a.free_energy - exact).abs() < 0.1, "{} vs {exact}", a.free_energy);
        for s in &a.snapshots {
            assert_eq!(s.len(), 20_000);
            assert!(s.states.iter().take(100).all(|x| validate_state(&p, x)));
        }
        assert!(a.exchange_rates.iter().all(|&x| x > 0.2));
    }

    #[test]
    fn identical_states_always_swap() {
        let p = FnProblem::binary("const", 3, 50.0, |_| 1.25);
        let cfg = RemcConfig { l: 2, burn_in: 10, samples: 500, ..Default::default() };
        let r = run_remc(&p, &cfg, 2).unwrap();
        assert_eq!(r.exchange_rates, vec![1.0]);
        assert!(r.snapshots[1].states.iter().all(|s| matches!(s.coords, Coords::Binary(_))));
    }
}
