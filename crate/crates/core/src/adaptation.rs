//! Automatic tuning: Robbins-Monro step-size control, exchange-rate
//! estimation from a single rung's energies, next-temperature selection and
//! step-size extrapolation along the ladder.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernels::metropolis_sweep;
use crate::model::{ParameterState, Problem, Support};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobbinsMonroConfig {
    pub c: f64,
    pub n0: f64,
    pub p_star: f64,
    /// Pooled samples between step-size updates.
    pub update_every: usize,
}

impl Default for RobbinsMonroConfig {
    fn default() -> Self {
        RobbinsMonroConfig { c: 4.0, n0: 15.0, p_star: 0.5, update_every: 50 }
    }
}

impl RobbinsMonroConfig {
    /// The schedule used for replica exchange (updates every 20 samples).
    pub fn remc() -> Self {
        RobbinsMonroConfig { update_every: 20, ..Default::default() }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.c > 0.0 && self.n0 > 0.0 && self.update_every > 0) {
            return invalid("Robbins-Monro c, N0 and update interval must be positive");
        }
        if !(self.p_star > 0.0 && self.p_star < 1.0) {
            return invalid("Robbins-Monro target acceptance must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExchangeTargetConfig {
    pub j_target: f64,
    pub bisection_tol: f64,
    pub max_bisection_iters: usize,
}

impl Default for ExchangeTargetConfig {
    fn default() -> Self {
        ExchangeTargetConfig { j_target: 0.5, bisection_tol: 1e-4, max_bisection_iters: 200 }
    }
}

impl ExchangeTargetConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.j_target > 0.0 && self.j_target < 1.0) {
            return invalid("exchange-rate target must lie in (0, 1)");
        }
        if !(self.bisection_tol > 0.0) || self.max_bisection_iters == 0 {
            return invalid("bisection tolerance and iteration cap must be positive");
        }
        Ok(())
    }
}

/// `eps + eps * c * (p_accept - p_star) / (N0 + iter)`, floored at `eps * 1e-6`.
pub fn robbins_monro_update(eps: f64, p_accept: f64, iter: usize, cfg: &RobbinsMonroConfig) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid(format!("step size must be positive and finite, got {eps}"));
    }
    if !(0.0..=1.0).contains(&p_accept) {
        return invalid(format!("acceptance rate {p_accept} outside [0, 1]"));
    }
    let next = eps + eps * cfg.c * (p_accept - cfg.p_star) / (cfg.n0 + iter as f64);
    Ok(next.max(eps * 1e-6))
}

/// Exchange-rate estimator over the energies of one rung, sorted once so
/// that every evaluation is linear in the sample count.
///
/// For a gap `d = delta_beta * N`, with `w_i = exp(-d (E_i - E_min))`:
/// `J = min(1, [2 / (T (T-1))] * sum_{i != j} w_i (1{E_i > E_j} + 1/2 1{E_i = E_j}) / mean(w))`.
/// The weight sits on the higher-energy member of each pair, i.e. on the
/// sample that plays the role of the colder-rung state.
#[derive(Debug, Clone)]
pub struct ExchangeRateEstimator {
    shifted: Vec<f64>,
    pair_counts: Vec<f64>,
}

impl ExchangeRateEstimator {
    pub fn new(energies: &[f64]) -> Result<Self> {
        if energies.len() < 2 {
            return invalid("exchange-rate estimate needs at least two samples");
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return invalid("non-finite energy in exchange-rate estimate");
        }
        let mut sorted = energies.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let e_min = sorted[0];
        let mut pair_counts = vec![0.0; sorted.len()];
        let mut start = 0;
        while start < sorted.len() {
            let mut end = start + 1;
            while end < sorted.len() && sorted[end] == sorted[start] {
                end += 1;
            }
            // `start` samples lie strictly below, `end - start - 1` tie partners
            let count = start as f64 + 0.5 * (end - start - 1) as f64;
            pair_counts[start..end].iter_mut().for_each(|c| *c = count);
            start = end;
        }
        let shifted = sorted.iter().map(|e| e - e_min).collect();
        Ok(ExchangeRateEstimator { shifted, pair_counts })
    }

    pub fn rate(&self, delta_beta: f64, n: f64) -> f64 {
        let t = self.shifted.len() as f64;
        let d = delta_beta * n;
        let (mut pair_sum, mut w_sum) = (0.0, 0.0);
        for (&e, &count) in self.shifted.iter().zip(&self.pair_counts) {
            let w = if d == 0.0 { 1.0 } else { (-d * e).exp() };
            pair_sum += w * count;
            w_sum += w;
        }
        let numerator = 2.0 * pair_sum / (t * (t - 1.0));
        let denominator = w_sum / t;
        (numerator / denominator).min(1.0)
    }
}

pub fn estimate_exchange_rate(energies: &[f64], delta_beta: f64, n: f64) -> Result<f64> {
    if !(delta_beta >= 0.0 && delta_beta.is_finite()) {
        return invalid(format!("temperature gap must be finite and non-negative, got {delta_beta}"));
    }
    Ok(ExchangeRateEstimator::new(energies)?.rate(delta_beta, n))
}

/// Picks the next inverse temperature so that the estimated exchange rate
/// with the rung at `beta_prev` equals the target. Returns 1 when even the
/// jump to `beta = 1` keeps the rate at or above the target.
pub fn propose_next_beta(
    energies: &[f64],
    beta_prev: f64,
    prev_gap: Option<f64>,
    n: f64,
    cfg: &ExchangeTargetConfig,
) -> Result<f64> {
    if !(0.0..1.0).contains(&beta_prev) {
        return invalid(format!("previous beta {beta_prev} outside [0, 1)"));
    }
    cfg.check()?;
    let est = ExchangeRateEstimator::new(energies)?;
    let room = 1.0 - beta_prev;
    let target = cfg.j_target;

    let mut lo = 0.0;
    let mut j_lo = 1.0;
    let mut hi = (2.0 * prev_gap.filter(|g| *g > 0.0).unwrap_or(1e-6)).max(1e-6).min(room);
    let mut j_hi = est.rate(hi, n);
    while j_hi >= target {
        if hi >= room {
            return Ok(1.0);
        }
        lo = hi;
        j_lo = j_hi;
        hi = (2.0 * hi).min(room);
        j_hi = est.rate(hi, n);
    }
    for _ in 0..cfg.max_bisection_iters {
        if j_lo - j_hi < cfg.bisection_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let j_mid = est.rate(mid, n);
        if j_mid >= target {
            lo = mid;
            j_lo = j_mid;
        } else {
            hi = mid;
            j_hi = j_mid;
        }
    }
    let delta = 0.5 * (lo + hi);
    let next = beta_prev + delta;
    if next >= 1.0 {
        return Ok(1.0);
    }
    if next <= beta_prev {
        // gap below the spacing of floats near beta_prev
        return Ok(beta_prev + hi);
    }
    Ok(next)
}

/// Initial step size for the next rung assuming `eps ~ beta^(-d)`, with
/// `d` fitted to the previous two rungs and clamped to `[-3, 3]`.
pub fn extrapolate_step_size(eps_prev: f64, eps_prev2: f64, beta_prev: f64, beta_prev2: f64, beta_next: f64) -> Result<f64> {
    if !(eps_prev > 0.0 && eps_prev2 > 0.0) {
        return invalid("step sizes must be positive");
    }
    if !(beta_prev2 > 0.0 && beta_prev > 0.0 && beta_next > 0.0) {
        return invalid("extrapolation needs positive inverse temperatures");
    }
    if beta_prev2 == beta_prev {
        return invalid("degenerate ladder: two equal inverse temperatures");
    }
    let d = ((eps_prev / eps_prev2).ln() / (beta_prev2 / beta_prev).ln()).clamp(-3.0, 3.0);
    Ok(eps_prev * (beta_prev / beta_next).powf(d))
}

/// Per-coordinate version of [`extrapolate_step_size`].
pub fn extrapolate_steps(prev: &[f64], prev2: &[f64], beta_prev: f64, beta_prev2: f64, beta_next: f64) -> Result<Vec<f64>> {
    if prev.len() != prev2.len() {
        return invalid("step vectors differ in length");
    }
    prev.iter()
        .zip(prev2)
        .map(|(&a, &b)| extrapolate_step_size(a, b, beta_prev, beta_prev2, beta_next))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotOutcome {
    pub steps: Vec<f64>,
    /// Acceptance per coordinate over the second half of the pilot.
    pub acceptance: Vec<f64>,
}

/// Runs `sweeps` Metropolis sweeps at `beta` from `start`, adapting the step
/// sizes with Robbins-Monro every `cfg.update_every` sweeps.
pub fn tune_step_size<P: Problem + ?Sized, R: Rng + ?Sized>(
    problem: &P,
    beta: f64,
    start: &ParameterState,
    initial: &[f64],
    sweeps: usize,
    cfg: &RobbinsMonroConfig,
    rng: &mut R,
) -> Result<PilotOutcome> {
    cfg.check()?;
    let dim = problem.dimension();
    if initial.len() != dim {
        return invalid("initial step vector has the wrong length");
    }
    let mut state = start.clone();
    let mut steps = initial.to_vec();
    let mut window = vec![0usize; dim];
    let mut tail = vec![0usize; dim];
    let mut flags = vec![false; dim];
    let mut in_window = 0;
    let mut updates = 0;
    for sweep in 0..sweeps {
        metropolis_sweep(problem, beta, &mut state, &steps, rng, &mut flags)?;
        for j in 0..dim {
            window[j] += flags[j] as usize;
            if sweep >= sweeps / 2 {
                tail[j] += flags[j] as usize;
            }
        }
        in_window += 1;
        if in_window == cfg.update_every {
            updates += 1;
            for j in 0..dim {
                let p = window[j] as f64 / in_window as f64;
                steps[j] = robbins_monro_update(steps[j], p, updates, cfg)?;
                window[j] = 0;
            }
            in_window = 0;
        }
    }
    let tail_len = (sweeps - sweeps / 2).max(1) as f64;
    Ok(PilotOutcome { steps, acceptance: tail.iter().map(|&a| a as f64 / tail_len).collect() })
}

/// Pilot tuning for the first adapted rung, starting every coordinate at
/// half its box width. Binary problems have no step sizes.
pub fn tune_initial_rungs<P: Problem + ?Sized, R: Rng + ?Sized>(
    problem: &P,
    beta: f64,
    start: &ParameterState,
    sweeps: usize,
    cfg: &RobbinsMonroConfig,
    rng: &mut R,
) -> Result<PilotOutcome> {
    match problem.support() {
        Support::Binary(_) => Ok(PilotOutcome { steps: vec![], acceptance: vec![] }),
        Support::Box(bounds) => {
            let initial: Vec<f64> = bounds.iter().map(|b| 0.5 * b.width()).collect();
            tune_step_size(problem, beta, start, &initial, sweeps, cfg, rng)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Bounds, Coords};
    use crate::problems::FnProblem;
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    #[test]
    fn robbins_monro_examples() {
        let cfg = RobbinsMonroConfig::default();
        assert_eq!(robbins_monro_update(0.3, 0.5, 3, &cfg).unwrap(), 0.3);
        assert!((robbins_monro_update(1.0, 1.0, 5, &cfg).unwrap() - 1.1).abs() < 1e-12);
        assert!((robbins_monro_update(1.0, 0.0, 5, &cfg).unwrap() - 0.9).abs() < 1e-12);
        assert!(robbins_monro_update(0.0, 0.5, 1, &cfg).is_err());
        assert!(robbins_monro_update(-1.0, 0.5, 1, &cfg).is_err());
        // floor keeps the step positive even with an aggressive gain
        let wild = RobbinsMonroConfig { c: 1000.0, ..cfg };
        assert!(robbins_monro_update(1.0, 0.0, 1, &wild).unwrap() > 0.0);
    }

    #[test]
    fn exchange_rate_examples() {
        let e = [0.3, 1.2, -0.4, 2.2, 0.9];
        assert_eq!(estimate_exchange_rate(&e, 0.0, 100.0).unwrap(), 1.0);
        assert_eq!(estimate_exchange_rate(&[0.7; 10], 3.0, 1e4).unwrap(), 1.0);
        let j = estimate_exchange_rate(&[0.0, 1.0], 2f64.ln(), 1.0).unwrap();
        assert!((j - 2.0 / 3.0).abs() < 1e-12, "{j}");
        assert!(estimate_exchange_rate(&[1.0], 0.1, 1.0).is_err());
        assert!(estimate_exchange_rate(&e, -0.1, 1.0).is_err());
    }

    /// Direct O(T^2) evaluation of the pair sum.
    fn pair_sum_oracle(e: &[f64], delta_beta: f64, n: f64) -> f64 {
        let t = e.len() as f64;
        let e_min = e.iter().cloned().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = e.iter().map(|x| (-delta_beta * n * (x - e_min)).exp()).collect();
        let mut s = 0.0;
        for i in 0..e.len() {
            for j in 0..e.len() {
                if i != j {
                    if e[i] > e[j] {
                        s += w[i];
                    } else if e[i] == e[j] {
                        s += 0.5 * w[i];
                    }
                }
            }
        }
        let num = 2.0 * s / (t * (t - 1.0));
        (num / (w.iter().sum::<f64>() / t)).min(1.0)
    }

    #[test]
    fn sorted_form_matches_quadratic_form() {
        let mut rng = stream(3, Purpose::Data, 0, 0);
        for trial in 0..50 {
            // include ties via rounding on every other trial
            let e: Vec<f64> = (0..60)
                .map(|_| {
                    let x: f64 = rng.random_range(0.0..2.0);
                    if trial % 2 == 0 { (x * 4.0).round() / 4.0 } else { x }
                })
                .collect();
            for db in [0.0, 0.01, 0.1, 1.0, 5.0] {
                let fast = estimate_exchange_rate(&e, db, 3.0).unwrap();
                let slow = pair_sum_oracle(&e, db, 3.0);
                assert!((fast - slow).abs() < 1e-12, "{fast} {slow}");
            }
        }
    }

    #[test]
    fn monotone_and_bounded() {
        let mut rng = stream(4, Purpose::Data, 0, 0);
        for _ in 0..100 {
            let t = rng.random_range(2..200);
            let e: Vec<f64> = (0..t).map(|_| rng.random_range(-1.0..3.0f64).powi(3)).collect();
            let est = ExchangeRateEstimator::new(&e).unwrap();
            let mut last = 1.0;
            for k in 0..20 {
                let db = 1e-3 * 1.8f64.powi(k);
                let j = est.rate(db, 10.0);
                assert!((0.0..=1.0).contains(&j));
                assert!(j <= last + 1e-12, "not monotone: {j} > {last}");
                last = j;
            }
        }
    }

    /// Simulates exchanges between a draw from the rung (uniform over the
    /// samples) and a draw from the next rung (samples reweighted by w).
    fn monte_carlo_exchange_rate(e: &[f64], delta_beta: f64, n: f64, trials: usize, seed: u64) -> f64 {
        let mut rng = stream(seed, Purpose::Data, 1, 0);
        let e_min = e.iter().cloned().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = e.iter().map(|x| (-delta_beta * n * (x - e_min)).exp()).collect();
        let mut cum = Vec::with_capacity(w.len());
        let mut acc = 0.0;
        for x in &w {
            acc += x;
            cum.push(acc);
        }
        let mut total = 0.0;
        for _ in 0..trials {
            let hot = e[rng.random_range(0..e.len())];
            let u = rng.random::<f64>() * acc;
            let cold = e[cum.partition_point(|&c| c <= u).min(e.len() - 1)];
            total += (delta_beta * n * (cold - hot)).exp().min(1.0);
        }
        total / trials as f64
    }

    #[test]
    fn matches_brute_force_exchange_simulation() {
        let mut rng = stream(5, Purpose::Data, 0, 0);
        let e: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..1.0f64).powi(2)).collect();
        for db in [0.5, 2.0, 6.0] {
            let est = estimate_exchange_rate(&e, db, 1.0).unwrap();
            let mc = monte_carlo_exchange_rate(&e, db, 1.0, 1_000_000, 9);
            assert!((est - mc).abs() < 0.02, "delta {db}: {est} vs {mc}");
        }
    }

    #[test]
    fn next_beta_examples() {
        let cfg = ExchangeTargetConfig::default();
        assert_eq!(propose_next_beta(&[0.4; 50], 0.2, None, 1e4, &cfg).unwrap(), 1.0);
        let e: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        assert_eq!(propose_next_beta(&e, 0.999, Some(1e-3), 10.0, &cfg).unwrap(), 1.0);
        let b = propose_next_beta(&e, 0.0, None, 1e4, &cfg).unwrap();
        assert!(b > 0.0 && b < 1.0);
        let j = estimate_exchange_rate(&e, b, 1e4).unwrap();
        assert!((j - 0.5).abs() < 1e-3, "{j}");
        assert!(propose_next_beta(&e, 1.0, None, 1.0, &cfg).is_err());
    }

    #[test]
    fn next_beta_strictly_increases() {
        let mut rng = stream(6, Purpose::Data, 0, 0);
        let cfg = ExchangeTargetConfig::default();
        for _ in 0..100 {
            let e: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..1.0)).collect();
            let prev: f64 = rng.random_range(0.0..0.99);
            let b = propose_next_beta(&e, prev, Some(1e-3), 1e5, &cfg).unwrap();
            assert!(b > prev && b <= 1.0);
        }
    }

    #[test]
    fn extrapolation_examples() {
        assert_eq!(extrapolate_step_size(0.3, 0.3, 0.4, 0.2, 0.8).unwrap(), 0.3);
        let e = extrapolate_step_size(0.5f64.sqrt(), 1.0, 0.5, 0.25, 1.0).unwrap();
        assert!((e - 0.5).abs() < 1e-12, "{e}");
        assert!((extrapolate_step_size(0.2, 0.2, 0.2, 0.1, 0.4).unwrap() - 0.2).abs() < 1e-15);
        assert!(extrapolate_step_size(0.2, 0.1, 0.3, 0.3, 0.5).is_err());
        // exponent clamp at 3
        let clamped = extrapolate_step_size(1e-6, 1.0, 0.2, 0.1, 0.4).unwrap();
        assert!((clamped - 1e-6 * 0.5f64.powi(3)).abs() < 1e-18);
    }

    fn gaussian_1d() -> FnProblem {
        // bounds at 6 sd: truncation is invisible to the acceptance rate
        FnProblem::continuous("gauss", vec![Bounds::new(-6.0, 6.0)], 1.0, |x| 0.5 * x[0] * x[0])
    }

    #[test]
    fn pilot_reaches_half_acceptance_on_gaussian() {
        let p = gaussian_1d();
        let start = ParameterState::new(&p, Coords::Continuous(vec![0.0]));
        let mut rng = stream(1, Purpose::Pilot, 0, 0);
        let out = tune_initial_rungs(&p, 1.0, &start, 5000, &RobbinsMonroConfig::default(), &mut rng).unwrap();
        assert!((out.acceptance[0] - 0.5).abs() < 0.05, "{:?}", out);
    }

    #[test]
    fn pilot_on_flat_target_grows_until_bounds_bite() {
        let p = FnProblem::continuous("flat", vec![Bounds::new(0.0, 1.0)], 1.0, |_| 0.0);
        let start = ParameterState::new(&p, Coords::Continuous(vec![0.5]));
        let mut rng = stream(2, Purpose::Pilot, 0, 0);
        let out = tune_initial_rungs(&p, 0.0, &start, 20_000, &RobbinsMonroConfig::default(), &mut rng).unwrap();
        // acceptance is 1 - eps/2 below eps = 1, so the step must grow past its start of 0.5
        assert!(out.steps[0] > 0.7, "{:?}", out);
        assert!((out.acceptance[0] - 0.5).abs() < 0.1, "{:?}", out);
    }

    #[test]
    fn pilot_forgets_bad_initialisation() {
        let p = gaussian_1d();
        let start = ParameterState::new(&p, Coords::Continuous(vec![0.0]));
        let cfg = RobbinsMonroConfig::default();
        let good = 2.4;
        let big = tune_step_size(&p, 1.0, &start, &[good * 1e3], 60_000, &cfg, &mut stream(3, Purpose::Pilot, 0, 0)).unwrap();
        let small = tune_step_size(&p, 1.0, &start, &[good * 1e-3], 60_000, &cfg, &mut stream(4, Purpose::Pilot, 0, 0)).unwrap();
        let ratio = big.steps[0] / small.steps[0];
        assert!((0.5..2.0).contains(&ratio), "{} vs {}", big.steps[0], small.steps[0]);
    }

    #[test]
    fn robbins_monro_fixed_point_on_gaussian() {
        // exact acceptance of U(-e, e) proposals for a standard normal at stationarity
        fn acceptance(eps: f64) -> f64 {
            let grid = 120;
            let mut total = 0.0;
            let mut norm = 0.0;
            for i in 0..grid {
                let x = -8.0 + 16.0 * (i as f64 + 0.5) / grid as f64;
                let px = (-0.5 * x * x).exp();
                let mut a = 0.0;
                for k in 0..grid {
                    let y = x + eps * (-1.0 + 2.0 * (k as f64 + 0.5) / grid as f64);
                    a += (-0.5 * (y * y - x * x)).exp().min(1.0);
                }
                total += px * a / grid as f64;
                norm += px;
            }
            total / norm
        }
        let cfg = RobbinsMonroConfig::default();
        let mut rng = stream(8, Purpose::Pilot, 0, 0);
        let mut eps = 50.0;
        for it in 1..=10_000 {
            // binomial noise of a 50-sample window
            let p = acceptance(eps);
            let hits = (0..cfg.update_every).filter(|_| rng.random::<f64>() < p).count();
            eps = robbins_monro_update(eps, hits as f64 / cfg.update_every as f64, it, &cfg).unwrap();
        }
        assert!((acceptance(eps) - 0.5).abs() < 0.05, "eps {eps} acc {}", acceptance(eps));
    }
}
