//! Histograms, 1-D Wasserstein distance and step-size diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::TemperatureLadder;

/// Normalized histogram on `[lo, hi]` with equal bins; the last bin is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub bin_width: f64,
    pub masses: Vec<f64>,
}

impl Histogram {
    pub fn bin_left(&self, b: usize) -> f64 {
        self.lo + b as f64 * self.bin_width
    }

    pub fn same_binning(&self, other: &Histogram) -> bool {
        self.lo == other.lo && self.bin_width == other.bin_width && self.masses.len() == other.masses.len()
    }
}

fn bin_count(lo: f64, hi: f64, bin_width: f64) -> usize {
    // tolerate widths like 0.001 that do not divide the range exactly in binary
    let raw = (hi - lo) / bin_width;
    let rounded = raw.round();
    if (raw - rounded).abs() < 1e-9 * rounded.max(1.0) {
        rounded as usize
    } else {
        raw.ceil() as usize
    }
}

pub fn build_histogram(values: &[f64], lo: f64, hi: f64, bin_width: f64) -> Result<Histogram> {
    if !(hi > lo && bin_width > 0.0 && lo.is_finite() && hi.is_finite()) {
        return invalid(format!("bad histogram range [{lo}, {hi}] with width {bin_width}"));
    }
    if values.is_empty() {
        return invalid("histogram of no values");
    }
    let nbins = bin_count(lo, hi, bin_width).max(1);
    let mut counts = vec![0usize; nbins];
    for &v in values {
        if !(v >= lo && v <= hi) {
            return invalid(format!("value {v} outside histogram range [{lo}, {hi}]"));
        }
        let b = (((v - lo) / bin_width) as usize).min(nbins - 1);
        counts[b] += 1;
    }
    let total = values.len() as f64;
    Ok(Histogram { lo, hi, bin_width, masses: counts.into_iter().map(|c| c as f64 / total).collect() })
}

/// `W1 = width * sum_b |CDF1(b) - CDF2(b)|`.
pub fn wasserstein1(h1: &Histogram, h2: &Histogram) -> Result<f64> {
    if !h1.same_binning(h2) {
        return invalid("histograms have different binning");
    }
    let (mut c1, mut c2, mut acc) = (0.0, 0.0, 0.0);
    for (a, b) in h1.masses.iter().zip(&h2.masses) {
        c1 += a;
        c2 += b;
        acc += (c1 - c2).abs();
    }
    Ok(h1.bin_width * acc)
}

/// Least-squares slope of `log eps` against `log beta` over rungs with
/// `beta >= beta_min`, averaged over coordinates.
pub fn step_size_scaling_slope(ladder: &TemperatureLadder, beta_min: f64) -> Result<f64> {
    let rungs: Vec<usize> = (0..ladder.betas.len())
        .filter(|&l| ladder.betas[l] >= beta_min && ladder.betas[l] > 0.0 && !ladder.step_sizes[l].is_empty())
        .collect();
    if rungs.len() < 3 {
        return invalid(format!("need 3 rungs with beta >= {beta_min}, have {}", rungs.len()));
    }
    let dim = ladder.step_sizes[rungs[0]].len();
    let xs: Vec<f64> = rungs.iter().map(|&l| ladder.betas[l].ln()).collect();
    let xm = xs.iter().sum::<f64>() / xs.len() as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    let mut total = 0.0;
    for j in 0..dim {
        let ys: Vec<f64> = rungs.iter().map(|&l| ladder.step_sizes[l][j].ln()).collect();
        let ym = ys.iter().sum::<f64>() / ys.len() as f64;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
        total += sxy / sxx;
    }
    Ok(total / dim as f64)
}
