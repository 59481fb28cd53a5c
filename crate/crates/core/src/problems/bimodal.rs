use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::evidence::trapezoid_log_integral_2d;
use crate::metrics::Histogram;
use crate::model::{Bounds, Coords, Problem, Support};

/// Two quadratic wells on the unit square; the right well is raised by
/// `(r - 1) / 16` and the left one is squeezed by `r` along the first axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BimodalSpec {
    pub r: f64,
    pub n: f64,
}

impl Default for BimodalSpec {
    fn default() -> Self {
        BimodalSpec { r: 1.001, n: 30_000.0 }
    }
}

impl BimodalSpec {
    pub fn check(&self) -> Result<()> {
        if !(self.r >= 1.0 && self.r.is_finite()) {
            return invalid(format!("bimodal r must be >= 1, got {}", self.r));
        }
        if !(self.n >= 0.0 && self.n.is_finite()) {
            return invalid("bimodal N must be finite and non-negative");
        }
        Ok(())
    }
}

#[inline]
fn energy_unchecked(t1: f64, t2: f64, r: f64) -> f64 {
    if t1 < 0.5 {
        r * (t1 - 0.25) * (t1 - 0.25) + (t2 - 0.5) * (t2 - 0.5)
    } else {
        (t1 - 0.75) * (t1 - 0.75) + (t2 - 0.5) * (t2 - 0.5) + (r - 1.0) / 16.0
    }
}

pub fn bimodal_energy(theta: [f64; 2], spec: &BimodalSpec) -> Result<f64> {
    if !theta.iter().all(|t| (0.0..=1.0).contains(t)) {
        return invalid(format!("bimodal parameters {theta:?} outside [0, 1]^2"));
    }
    Ok(energy_unchecked(theta[0], theta[1], spec.r))
}

#[derive(Debug, Clone)]
pub struct BimodalProblem {
    pub spec: BimodalSpec,
    support: Support,
}

impl BimodalProblem {
    pub fn new(spec: BimodalSpec) -> Result<Self> {
        spec.check()?;
        Ok(BimodalProblem { spec, support: Support::Box(vec![Bounds::new(0.0, 1.0); 2]) })
    }
}

impl Problem for BimodalProblem {
    fn label(&self) -> &str {
        "bimodal"
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn data_size(&self) -> f64 {
        self.spec.n
    }

    fn energy(&self, coords: &Coords) -> f64 {
        let x = coords.as_continuous().expect("bimodal problem takes continuous coordinates");
        energy_unchecked(x[0], x[1], self.spec.r)
    }
}

/// Posterior mass of the left (`theta1 < 0.5`) and right wells by 2-D
/// trapezoid quadrature of `exp(-N E)` over each half of the square.
pub fn bimodal_mode_masses(spec: &BimodalSpec) -> Result<(f64, f64)> {
    spec.check()?;
    let f = |t1: f64, t2: f64| -spec.n * energy_unchecked(t1, t2, spec.r);
    // 2000 intervals per half-axis: grid spacing far below the well width 1/sqrt(2N) for N <= 1e5
    let left = trapezoid_log_integral_2d(f, (0.0, 0.5), (0.0, 1.0), 2000, 4000);
    let right = trapezoid_log_integral_2d(f, (0.5, 1.0), (0.0, 1.0), 2000, 4000);
    let m = left.max(right);
    let (l, r) = ((left - m).exp(), (right - m).exp());
    Ok((l / (l + r), r / (l + r)))
}

/// Posterior histogram of `theta1` on `[0, 1]` by quadrature. The `theta2`
/// factor is the same in both wells and drops out, so each bin is the
/// integral of `exp(-N e(theta1))` over the bin (64-interval trapezoid).
pub fn bimodal_marginal_histogram(spec: &BimodalSpec, bin_width: f64) -> Result<Histogram> {
    spec.check()?;
    if !(bin_width > 0.0 && bin_width <= 1.0) {
        return invalid(format!("bin width {bin_width} outside (0, 1]"));
    }
    let nbins = (1.0 / bin_width).round() as usize;
    if ((nbins as f64) * bin_width - 1.0).abs() > 1e-9 {
        return invalid("bin width must divide [0, 1]");
    }
    const SUB: usize = 64;
    let log_density = |t1: f64| -spec.n * energy_unchecked(t1, 0.5, spec.r);
    let h = bin_width / SUB as f64;
    let masses: Vec<f64> = (0..nbins)
        .map(|b| {
            let x0 = b as f64 * bin_width;
            (0..=SUB)
                .map(|i| {
                    let w = if i == 0 || i == SUB { 0.5 } else { 1.0 };
                    w * h * log_density(x0 + i as f64 * h).exp()
                })
                .sum()
        })
        .collect();
    let total: f64 = masses.iter().sum();
    Ok(Histogram { lo: 0.0, hi: 1.0, bin_width, masses: masses.into_iter().map(|m| m / total).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_examples() {
        let spec = BimodalSpec::default();
        assert_eq!(bimodal_energy([0.25, 0.5], &spec).unwrap(), 0.0);
        let right = bimodal_energy([0.75, 0.5], &spec).unwrap();
        assert!((right - 6.25e-5).abs() < 1e-15);
        let mid = bimodal_energy([0.5, 0.5], &spec).unwrap();
        let left_branch = spec.r * 0.0625;
        assert!((mid - 0.0625625).abs() < 1e-12);
        assert!((mid - left_branch).abs() < 1e-15);
        assert!(bimodal_energy([1.2, 0.5], &spec).is_err());
    }

    #[test]
    fn continuous_across_the_boundary() {
        let r = 1.001;
        let mut worst: f64 = 0.0;
        for i in 0..10_000 {
            let t2 = i as f64 / 9999.0;
            let left = r * 0.0625 + (t2 - 0.5).powi(2);
            let right = 0.0625 + (t2 - 0.5).powi(2) + (r - 1.0) / 16.0;
            worst = worst.max((left - right).abs());
        }
        assert!(worst < 1e-12);
    }

    #[test]
    fn mode_masses() {
        let (l, r) = bimodal_mode_masses(&BimodalSpec::default()).unwrap();
        let g = (30_000.0 * 0.001f64 / 16.0).exp();
        let closed = g / (g + 1.001f64.sqrt());
        assert!((l - closed).abs() < 1e-6, "{l} vs {closed}");
        assert!((l - 0.867).abs() < 1e-3);
        assert!((l + r - 1.0).abs() < 1e-12);
        let (l0, r0) = bimodal_mode_masses(&BimodalSpec { r: 1.0, n: 30_000.0 }).unwrap();
        assert!((l0 - 0.5).abs() < 1e-9 && (r0 - 0.5).abs() < 1e-9);
        let (lf, _) = bimodal_mode_masses(&BimodalSpec { r: 1.001, n: 0.0 }).unwrap();
        assert!((lf - 0.5).abs() < 1e-12);
    }

    #[test]
    fn marginal_histogram_matches_mode_masses() {
        let spec = BimodalSpec::default();
        let h = bimodal_marginal_histogram(&spec, 0.001).unwrap();
        assert_eq!(h.masses.len(), 1000);
        assert!((h.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let left: f64 = h.masses[..500].iter().sum();
        let (l, _) = bimodal_mode_masses(&spec).unwrap();
        assert!((left - l).abs() < 1e-6, "{left} vs {l}");
        let peak = h.masses.iter().cloned().enumerate().fold((0, 0.0), |a, (i, m)| if m > a.1 { (i, m) } else { a });
        assert!(peak.0 == 249 || peak.0 == 250);
        assert!(bimodal_marginal_histogram(&spec, 0.3).is_err());
    }
}
