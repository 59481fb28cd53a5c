//! Lock-step driver for the chains of one rung.
//!
//! Every chain advances one kernel step per step index; chains are processed
//! in blocks whose pooled acceptance feeds Robbins-Monro. Exchanges with the
//! previous-rung pool happen after all blocks of a step, in chain order, so the
//! outcome never depends on thread scheduling.

use rayon::prelude::*;

use crate::adaptation::{robbins_monro_update, RobbinsMonroConfig};
use crate::error::Result;
use crate::kernels::{acceptance_slots, exchange_accept_prob, kernel_step, try_exchange};
use crate::model::{ParameterState, Problem};
use crate::rng::{stream, Purpose, SimRng};

pub(crate) struct ExchangePlan<'a> {
    pub pool: &'a mut [ParameterState],
    pub beta_prev: f64,
    /// Pool index for every (chain, step), chain-major: chain `c` uses
    /// `partners[c * moves .. (c + 1) * moves]`.
    pub partners: &'a [usize],
}

pub(crate) struct RungPlan<'a> {
    pub beta: f64,
    pub rung: usize,
    pub seed: u64,
    /// Kernel steps per chain.
    pub moves: usize,
    /// Index (0 = ancestor) of the first state each chain keeps.
    pub retain_from: usize,
    pub steps: Vec<f64>,
    pub rm: &'a RobbinsMonroConfig,
    pub record: bool,
    pub exchange: Option<ExchangePlan<'a>>,
}

pub(crate) struct RungOutput {
    /// Retained states, chain-major.
    pub retained: Vec<ParameterState>,
    /// Step sizes after adaptation.
    pub steps: Vec<f64>,
    pub metropolis_rates: Vec<f64>,
    pub exchange_rate: Option<f64>,
    /// Every state of every chain, ancestor first, chain-major.
    pub trajectory: Option<Vec<ParameterState>>,
}

struct Chain {
    state: ParameterState,
    move_rng: SimRng,
    exchange_rng: SimRng,
    flags: Vec<bool>,
    kept: Vec<ParameterState>,
    path: Vec<ParameterState>,
}

pub(crate) fn run_rung<P: Problem + ?Sized>(
    problem: &P,
    ancestors: Vec<ParameterState>,
    mut plan: RungPlan<'_>,
) -> Result<RungOutput> {
    let n_chains = ancestors.len();
    let slots = acceptance_slots(problem);
    let adaptive = !plan.steps.is_empty();
    let keep_per_chain = (plan.moves + 1).saturating_sub(plan.retain_from);
    let mut chains: Vec<Chain> = ancestors
        .into_iter()
        .enumerate()
        .map(|(c, state)| {
            let mut kept = Vec::with_capacity(keep_per_chain);
            if plan.retain_from == 0 {
                kept.push(state.clone());
            }
            let path = if plan.record { vec![state.clone()] } else { Vec::new() };
            Chain {
                state,
                move_rng: stream(plan.seed, Purpose::Move, plan.rung, c),
                exchange_rng: stream(plan.seed, Purpose::Exchange, plan.rung, c),
                flags: vec![false; slots],
                kept,
                path,
            }
        })
        .collect();

    let block = n_chains.min(plan.rm.update_every).max(1);
    let total_moves = plan.moves * n_chains;
    let adapt_moves = total_moves / 2;
    let parallel = n_chains > 1 && rayon::current_num_threads() > 1;

    let mut window_acc = vec![0usize; slots];
    let mut window_len = 0usize;
    let mut updates = 0usize;
    let mut frozen_acc = vec![0usize; slots];
    let mut frozen_len = 0usize;
    let mut all_acc = vec![0usize; slots];
    let mut swaps = 0usize;

    for k in 1..=plan.moves {
        for start in (0..n_chains).step_by(block) {
            let end = (start + block).min(n_chains);
            let beta = plan.beta;
            let steps = &plan.steps;
            let sweep = |ch: &mut Chain| kernel_step(problem, beta, &mut ch.state, steps, &mut ch.move_rng, &mut ch.flags);
            if parallel {
                chains[start..end].par_iter_mut().try_for_each(sweep)?;
            } else {
                chains[start..end].iter_mut().try_for_each(sweep)?;
            }
            let mut block_acc = vec![0usize; slots];
            for ch in &chains[start..end] {
                for (a, &f) in block_acc.iter_mut().zip(&ch.flags) {
                    *a += f as usize;
                }
            }
            for j in 0..slots {
                all_acc[j] += block_acc[j];
            }
            let first_move = (k - 1) * n_chains + start;
            if first_move < adapt_moves {
                if adaptive {
                    for j in 0..slots {
                        window_acc[j] += block_acc[j];
                    }
                    window_len += end - start;
                    if window_len >= plan.rm.update_every {
                        updates += 1;
                        for j in 0..slots {
                            let p = window_acc[j] as f64 / window_len as f64;
                            plan.steps[j] = robbins_monro_update(plan.steps[j], p, updates, plan.rm)?;
                            window_acc[j] = 0;
                        }
                        window_len = 0;
                    }
                }
            } else {
                for j in 0..slots {
                    frozen_acc[j] += block_acc[j];
                }
                frozen_len += end - start;
            }
        }

        if let Some(ex) = plan.exchange.as_mut() {
            let n = problem.data_size();
            for (c, ch) in chains.iter_mut().enumerate() {
                let partner = ex.partners[c * plan.moves + k - 1];
                let target = &mut ex.pool[partner];
                let prob = exchange_accept_prob(n, plan.beta, ex.beta_prev, ch.state.energy, target.energy)?;
                swaps += try_exchange(&mut ch.exchange_rng, prob, &mut ch.state, target) as usize;
            }
        }

        for ch in chains.iter_mut() {
            if k >= plan.retain_from {
                ch.kept.push(ch.state.clone());
            }
            if plan.record {
                ch.path.push(ch.state.clone());
            }
        }
    }

    let metropolis_rates = if frozen_len > 0 {
        frozen_acc.iter().map(|&a| a as f64 / frozen_len as f64).collect()
    } else if total_moves > 0 {
        all_acc.iter().map(|&a| a as f64 / total_moves as f64).collect()
    } else {
        vec![]
    };
    let exchange_rate = plan.exchange.as_ref().map(|_| if total_moves > 0 { swaps as f64 / total_moves as f64 } else { 0.0 });
    let trajectory = plan.record.then(|| chains.iter_mut().flat_map(|ch| std::mem::take(&mut ch.path)).collect());
    let retained = chains.into_iter().flat_map(|ch| ch.kept).collect();
    Ok(RungOutput { retained, steps: plan.steps, metropolis_rates, exchange_rate, trajectory })
}
