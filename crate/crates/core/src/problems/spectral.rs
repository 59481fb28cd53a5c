//! Spectral deconvolution: data modelled as a sum of `K` Gaussian peaks
//! observed under Gaussian noise of known scale.
//!
//! Parameters are laid out as `[a_1..a_K, mu_1..mu_K, b_1..b_K]` with flat
//! priors `a ~ U(0, 2)`, `mu ~ U(0, 1)`, `b ~ U(10, 500)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{Bounds, Coords, Problem, Support};

pub const GRID_POINTS: usize = 301;
pub const AMPLITUDE_PRIOR: (f64, f64) = (0.0, 2.0);
pub const POSITION_PRIOR: (f64, f64) = (0.0, 1.0);
pub const WIDTH_PRIOR: (f64, f64) = (10.0, 500.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakParams {
    pub a: Vec<f64>,
    pub mu: Vec<f64>,
    pub b: Vec<f64>,
}

impl PeakParams {
    pub fn k(&self) -> usize {
        self.a.len()
    }

    pub fn from_flat(x: &[f64]) -> Self {
        let k = x.len() / 3;
        PeakParams { a: x[..k].to_vec(), mu: x[k..2 * k].to_vec(), b: x[2 * k..].to_vec() }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.a.iter().chain(&self.mu).chain(&self.b).copied().collect()
    }

    /// Three overlapping peaks.
    pub fn default_three() -> Self {
        PeakParams { a: vec![0.8, 0.6, 0.9], mu: vec![0.25, 0.5, 0.75], b: vec![100.0, 150.0, 120.0] }
    }

    /// Ten peaks on a 0.1 spacing, each about 0.05 wide.
    pub fn default_ten() -> Self {
        PeakParams {
            a: vec![0.5, 0.8, 0.6, 0.9, 0.7, 0.55, 0.85, 0.65, 0.75, 0.6],
            mu: (0..10).map(|k| 0.05 + 0.1 * k as f64).collect(),
            b: vec![400.0; 10],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSpec {
    pub k: usize,
    pub sigma: f64,
    pub true_params: PeakParams,
    pub seed: u64,
}

impl SpectralSpec {
    pub fn with_k(k: usize, seed: u64) -> Result<Self> {
        let true_params = match k {
            3 => PeakParams::default_three(),
            10 => PeakParams::default_ten(),
            _ => return invalid(format!("no default peak set for K = {k}; supply true_params")),
        };
        Ok(SpectralSpec { k, sigma: 0.05, true_params, seed })
    }

    pub fn check(&self) -> Result<()> {
        let p = &self.true_params;
        if self.k == 0 || p.a.len() != self.k || p.mu.len() != self.k || p.b.len() != self.k {
            return invalid("spectral true parameters must have K entries each");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return invalid("spectral noise scale must be finite and non-negative");
        }
        if p.mu.iter().any(|m| !(*m > 0.0 && *m < 1.0)) || p.a.iter().chain(&p.b).any(|v| *v <= 0.0) {
            return invalid("peak positions must lie in (0, 1) with positive amplitudes and widths");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

pub fn spectral_grid() -> Vec<f64> {
    (0..GRID_POINTS).map(|i| i as f64 / (GRID_POINTS - 1) as f64).collect()
}

/// `f_K(x) = sum_k a_k exp(-b_k / 2 (x - mu_k)^2)`.
pub fn spectral_model(x: f64, params: &PeakParams) -> f64 {
    params
        .a
        .iter()
        .zip(&params.mu)
        .zip(&params.b)
        .map(|((a, mu), b)| a * (-0.5 * b * (x - mu) * (x - mu)).exp())
        .sum()
}

/// Mean squared residual scaled so that the likelihood is `exp(-N E) / C`
/// with `N` the number of data points: `E = sum (y - f)^2 / (2 sigma^2 N)`.
pub fn spectral_energy(params: &PeakParams, data: &SpectralData, sigma: f64) -> f64 {
    let ss: f64 = data.x.iter().zip(&data.y).map(|(&x, &y)| (y - spectral_model(x, params)).powi(2)).sum();
    ss / (2.0 * sigma * sigma * data.x.len() as f64)
}

/// Draws `y_i = f_K(x_i) + sigma * z_i` on the 301-point grid of [0, 1].
pub fn generate_spectral_data<R: Rng + ?Sized>(spec: &SpectralSpec, rng: &mut R) -> Result<SpectralData> {
    spec.check()?;
    let x = spectral_grid();
    let y = x
        .iter()
        .map(|&xi| {
            let z: f64 = rng.sample(StandardNormal);
            spectral_model(xi, &spec.true_params) + spec.sigma * z
        })
        .collect();
    Ok(SpectralData { x, y })
}

/// Sorts the peaks of a flat parameter vector by position (label-switching
/// convention for reporting).
pub fn sort_peaks_by_position(flat: &[f64]) -> PeakParams {
    let p = PeakParams::from_flat(flat);
    let mut order: Vec<usize> = (0..p.k()).collect();
    order.sort_by(|&i, &j| p.mu[i].total_cmp(&p.mu[j]));
    PeakParams {
        a: order.iter().map(|&i| p.a[i]).collect(),
        mu: order.iter().map(|&i| p.mu[i]).collect(),
        b: order.iter().map(|&i| p.b[i]).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct SpectralProblem {
    pub spec: SpectralSpec,
    pub data: SpectralData,
    label: String,
    support: Support,
    /// `(x_0, h)` when the abscissae are equispaced.
    grid: Option<(f64, f64)>,
}

fn equispaced(x: &[f64]) -> Option<(f64, f64)> {
    if x.len() < 2 {
        return None;
    }
    let h = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    let tol = 1e-12 * h.abs().max(x[0].abs());
    (h > 0.0 && x.iter().enumerate().all(|(i, &xi)| (xi - (x[0] + i as f64 * h)).abs() <= tol)).then_some((x[0], h))
}

impl SpectralProblem {
    pub fn new(spec: SpectralSpec, data: SpectralData) -> Result<Self> {
        spec.check()?;
        if data.x.len() != data.y.len() || data.x.is_empty() {
            return invalid("spectral data needs matching, non-empty x and y");
        }
        if !(spec.sigma > 0.0) {
            return invalid("spectral problem needs a positive noise scale");
        }
        let k = spec.k;
        let mut bounds = vec![Bounds::new(AMPLITUDE_PRIOR.0, AMPLITUDE_PRIOR.1); k];
        bounds.extend(vec![Bounds::new(POSITION_PRIOR.0, POSITION_PRIOR.1); k]);
        bounds.extend(vec![Bounds::new(WIDTH_PRIOR.0, WIDTH_PRIOR.1); k]);
        let grid = equispaced(&data.x);
        Ok(SpectralProblem { label: format!("spectral-k{k}"), spec, data, support: Support::Box(bounds), grid })
    }

    /// Generates the data from the spec's own seed.
    pub fn generate(spec: SpectralSpec) -> Result<Self> {
        let mut rng = crate::rng::stream(spec.seed, crate::rng::Purpose::Data, 0, 0);
        let data = generate_spectral_data(&spec, &mut rng)?;
        Self::new(spec, data)
    }
}

impl Problem for SpectralProblem {
    fn label(&self) -> &str {
        &self.label
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn data_size(&self) -> f64 {
        self.data.x.len() as f64
    }

    fn energy(&self, coords: &Coords) -> f64 {
        let theta = coords.as_continuous().expect("spectral problem takes continuous coordinates");
        let k = self.spec.k;
        let (a, rest) = theta.split_at(k);
        let (mu, b) = rest.split_at(k);
        let ss = match self.grid {
            Some((x0, h)) => grid_residual_ss(&self.data.y, x0, h, a, mu, b),
            None => {
                let params = PeakParams { a: a.to_vec(), mu: mu.to_vec(), b: b.to_vec() };
                self.data.x.iter().zip(&self.data.y).map(|(&x, &y)| (y - spectral_model(x, &params)).powi(2)).sum()
            }
        };
        let s2 = self.spec.sigma * self.spec.sigma;
        ss / (2.0 * s2 * self.data.x.len() as f64)
    }
}

/// Residual sum of squares on the grid `x_i = x0 + i h`. Each peak is stepped
/// along the grid multiplicatively: `g_{i+1} = g_i r_i`, `r_{i+1} = r_i q`
/// with `q = exp(-b h^2)`, so only three exponentials are needed per peak.
fn grid_residual_ss(y: &[f64], x0: f64, h: f64, a: &[f64], mu: &[f64], b: &[f64]) -> f64 {
    let k = a.len();
    let mut g = Vec::with_capacity(k);
    let mut r = Vec::with_capacity(k);
    let mut q = Vec::with_capacity(k);
    for p in 0..k {
        let d = x0 - mu[p];
        g.push(a[p] * (-0.5 * b[p] * d * d).exp());
        r.push((-b[p] * h * (d + 0.5 * h)).exp());
        q.push((-b[p] * h * h).exp());
    }
    let mut ss = 0.0;
    for &yi in y {
        let mut f = 0.0;
        for ((gp, rp), qp) in g.iter_mut().zip(r.iter_mut()).zip(&q) {
            f += *gp;
            *gp *= *rp;
            *rp *= qp;
        }
        ss += (yi - f) * (yi - f);
    }
    ss
}
