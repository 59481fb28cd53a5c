//! Free-energy (negative log evidence) estimation.
//!
//! All values are `F' = F - log C`: the likelihood normalization constant is
//! never added.

use crate::error::{invalid, Error, Result};
use crate::model::{Coords, EnsembleSnapshot, Problem, Support};

/// `-log <exp(-N delta_beta E)>` over one rung's energies, shifted by the
/// minimum energy so large `N` cannot underflow every term.
pub fn stepping_stone_term(energies: &[f64], delta_beta: f64, n: f64) -> Result<f64> {
    if energies.is_empty() {
        return invalid("empty snapshot in free-energy estimate");
    }
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let d = n * delta_beta;
    let mean = energies.iter().map(|e| (-d * (e - e_min)).exp()).sum::<f64>() / energies.len() as f64;
    Ok(-mean.ln() + d * e_min)
}

/// Stepping-stone estimate over a complete ladder of snapshots.
pub fn estimate_free_energy(snapshots: &[EnsembleSnapshot], n: f64) -> Result<f64> {
    if snapshots.len() < 2 {
        return invalid("free energy needs at least two rungs");
    }
    if snapshots[0].beta != 0.0 || snapshots.last().map(|s| s.beta) != Some(1.0) {
        return invalid("ladder of snapshots must run from beta = 0 to beta = 1");
    }
    let mut f = 0.0;
    for pair in snapshots.windows(2) {
        let gap = pair[1].beta - pair[0].beta;
        if gap <= 0.0 {
            return invalid("snapshots must be ordered by strictly increasing beta");
        }
        f += stepping_stone_term(&pair[0].energies, gap, n)?;
    }
    Ok(f)
}

/// `log` of the 2-D trapezoid integral of `exp(log_f)` over a rectangle with
/// `nx x ny` intervals.
pub fn trapezoid_log_integral_2d(
    log_f: impl Fn(f64, f64) -> f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
    nx: usize,
    ny: usize,
) -> f64 {
    let hx = (x_range.1 - x_range.0) / nx as f64;
    let hy = (y_range.1 - y_range.0) / ny as f64;
    let mut values = Vec::with_capacity((nx + 1) * (ny + 1));
    for i in 0..=nx {
        let x = x_range.0 + i as f64 * hx;
        let wx = if i == 0 || i == nx { 0.5 } else { 1.0 };
        for j in 0..=ny {
            let y = y_range.0 + j as f64 * hy;
            let wy = if j == 0 || j == ny { 0.5 } else { 1.0 };
            values.push(log_f(x, y) + (wx * wy * hx * hy).ln());
        }
    }
    log_sum_exp(&values)
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Free energy of a 2-D box problem by tensor-grid trapezoid quadrature,
/// doubling the resolution from `initial_resolution` until successive values
/// agree within `1e-3`.
pub fn reference_free_energy_quadrature<P: Problem + ?Sized>(problem: &P, initial_resolution: usize) -> Result<f64> {
    const TOL: f64 = 1e-3;
    const MAX_RESOLUTION: usize = 1 << 14;
    let Support::Box(bounds) = problem.support() else {
        return invalid("quadrature reference needs a continuous problem");
    };
    if bounds.len() != 2 {
        return invalid(format!("quadrature reference needs dimension 2, got {}", bounds.len()));
    }
    let n = problem.data_size();
    let log_area = (bounds[0].width() * bounds[1].width()).ln();
    let eval = |res: usize| {
        let log_z = trapezoid_log_integral_2d(
            |a, b| -n * problem.energy(&Coords::Continuous(vec![a, b])),
            (bounds[0].low, bounds[0].high),
            (bounds[1].low, bounds[1].high),
            res,
            res,
        );
        -(log_z - log_area)
    };
    let mut res = initial_resolution.max(2);
    let mut prev = eval(res);
    while res < MAX_RESOLUTION {
        res *= 2;
        let next = eval(res);
        if (next - prev).abs() < TOL {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureNotConverged { tol: TOL, resolution: res })
}

/// Exact free energy of a binary problem under the uniform indicator prior.
pub fn reference_free_energy_enumeration<P: Problem + ?Sized>(problem: &P) -> Result<f64> {
    let Support::Binary(p) = *problem.support() else {
        return invalid("enumeration reference needs a binary problem");
    };
    if p > 20 {
        return invalid(format!("enumeration over 2^{p} indicators refused"));
    }
    let n = problem.data_size();
    let log_terms: Vec<f64> = (0usize..(1 << p))
        .map(|code| {
            let c: Vec<bool> = (0..p).map(|j| code >> j & 1 == 1).collect();
            -n * problem.energy(&Coords::Binary(c))
        })
        .collect();
    Ok(-(log_sum_exp(&log_terms) - p as f64 * std::f64::consts::LN_2))
}
