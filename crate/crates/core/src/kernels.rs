//! Markov kernels and the between-rung exchange move.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::model::{tempered_log_density_ratio, Coords, ParameterState, Problem, Support};

#[inline]
fn metropolis_accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp()
}

/// One sequential sweep of single-coordinate random-walk Metropolis updates.
///
/// Coordinates are visited in ascending order. Each proposal is
/// `x_j + U(-steps[j], steps[j])`; proposals leaving the box are rejected.
/// `accepted[j]` records whether coordinate `j` moved.
pub fn metropolis_sweep<P: Problem + ?Sized, R: Rng + ?Sized>(
    problem: &P,
    beta: f64,
    state: &mut ParameterState,
    steps: &[f64],
    rng: &mut R,
    accepted: &mut [bool],
) -> Result<()> {
    let Support::Box(bounds) = problem.support() else {
        return invalid("metropolis_sweep needs a continuous problem");
    };
    let dim = bounds.len();
    if steps.len() != dim || accepted.len() != dim || state.coords.len() != dim {
        return invalid(format!(
            "dimension mismatch: problem {dim}, steps {}, flags {}, state {}",
            steps.len(),
            accepted.len(),
            state.coords.len()
        ));
    }
    let n = problem.data_size();
    for j in 0..dim {
        let step = steps[j];
        let Coords::Continuous(x) = &mut state.coords else {
            return invalid("continuous problem given a binary state");
        };
        let old = x[j];
        let proposed = old + step * (2.0 * rng.random::<f64>() - 1.0);
        if !bounds[j].contains(proposed) {
            accepted[j] = false;
            continue;
        }
        x[j] = proposed;
        let e_new = problem.energy(&state.coords);
        let log_ratio = tempered_log_density_ratio(n, beta, e_new, state.energy)?;
        if metropolis_accept(log_ratio, rng) {
            state.energy = e_new;
            accepted[j] = true;
        } else {
            if let Coords::Continuous(x) = &mut state.coords {
                x[j] = old;
            }
            accepted[j] = false;
        }
    }
    Ok(())
}

/// Flips one uniformly chosen bit and accepts with the Metropolis rule.
pub fn flip_step<P: Problem + ?Sized, R: Rng + ?Sized>(
    problem: &P,
    beta: f64,
    state: &mut ParameterState,
    rng: &mut R,
) -> Result<bool> {
    let Support::Binary(len) = *problem.support() else {
        return invalid("flip_step needs a binary problem");
    };
    let Coords::Binary(bits) = &mut state.coords else {
        return invalid("binary problem given a continuous state");
    };
    if bits.len() != len || len == 0 {
        return invalid(format!("state has {} bits, problem {len}", bits.len()));
    }
    let k = rng.random_range(0..len);
    bits[k] = !bits[k];
    let e_new = problem.energy(&state.coords);
    let log_ratio = tempered_log_density_ratio(problem.data_size(), beta, e_new, state.energy)?;
    if metropolis_accept(log_ratio, rng) {
        state.energy = e_new;
        Ok(true)
    } else {
        if let Coords::Binary(bits) = &mut state.coords {
            bits[k] = !bits[k];
        }
        Ok(false)
    }
}

/// One "Metropolis update" for any problem kind: a full coordinate sweep for
/// continuous problems, one attempted flip for binary ones. `accepted` has
/// one slot per coordinate (continuous) or exactly one slot (binary).
pub fn kernel_step<P: Problem + ?Sized, R: Rng + ?Sized>(
    problem: &P,
    beta: f64,
    state: &mut ParameterState,
    steps: &[f64],
    rng: &mut R,
    accepted: &mut [bool],
) -> Result<()> {
    match problem.support() {
        Support::Box(_) => metropolis_sweep(problem, beta, state, steps, rng, accepted),
        Support::Binary(_) => {
            if accepted.len() != 1 {
                return invalid("binary kernel records a single acceptance flag");
            }
            accepted[0] = flip_step(problem, beta, state, rng)?;
            Ok(())
        }
    }
}

/// Number of acceptance slots `kernel_step` fills for this problem.
pub fn acceptance_slots<P: Problem + ?Sized>(problem: &P) -> usize {
    match problem.support() {
        Support::Box(b) => b.len(),
        Support::Binary(_) => 1,
    }
}

/// Acceptance probability for swapping the state at the colder rung
/// (`beta_hi`, energy `e_at_hi_rung`) with the state at the hotter rung
/// (`beta_lo`, energy `e_at_lo_rung`).
pub fn exchange_accept_prob(n: f64, beta_hi: f64, beta_lo: f64, e_at_hi_rung: f64, e_at_lo_rung: f64) -> Result<f64> {
    if beta_hi <= beta_lo {
        return invalid(format!("exchange needs beta_hi > beta_lo, got {beta_hi} <= {beta_lo}"));
    }
    if !(n.is_finite() && e_at_hi_rung.is_finite() && e_at_lo_rung.is_finite()) {
        return invalid("non-finite input to exchange probability");
    }
    let log_v = (beta_hi - beta_lo) * n * (e_at_hi_rung - e_at_lo_rung);
    Ok(if log_v >= 0.0 { 1.0 } else { log_v.exp() })
}

/// Swaps `a` and `b` with probability `prob`. Returns whether they were swapped.
pub fn try_exchange<R: Rng + ?Sized>(rng: &mut R, prob: f64, a: &mut ParameterState, b: &mut ParameterState) -> bool {
    let swap = prob >= 1.0 || (prob > 0.0 && rng.random::<f64>() < prob);
    if swap {
        std::mem::swap(a, b);
    }
    swap
}
