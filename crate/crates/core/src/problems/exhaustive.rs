//! Exhaustive search over explanatory-variable subsets of a linear
//! regression with Gaussian coefficient prior and isotropic noise.
//!
//! For indicator `c` selecting `K` columns `X_I`, with `Sigma = v I`,
//! `A = X_I^T X_I / v + I / s^2` and `b = X_I^T y / v`:
//!
//! `N E(c) = K ln s + (N/2) ln(2 pi v) + (1/2) ln det A - (1/2) b^T A^-1 b + y^T y / (2 v)`
//!
//! which is `-ln N(y; 0, Sigma + s^2 X_I X_I^T)`. The Gram matrix and `X^T y`
//! are precomputed so that one evaluation costs a `K x K` Cholesky factorization.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{Coords, Problem, Support};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveSpec {
    pub n_rows: usize,
    pub p: usize,
    /// Prior standard deviation of each coefficient.
    pub s: f64,
    /// Noise covariance is `noise_cov_scale * I`.
    pub noise_cov_scale: f64,
    /// The generating support is the first `true_support` columns.
    pub true_support: usize,
    pub seed: u64,
}

impl ExhaustiveSpec {
    /// 700 rows, 200 candidate columns, support of size 4.
    pub fn full(seed: u64) -> Self {
        ExhaustiveSpec { n_rows: 700, p: 200, s: 1.0, noise_cov_scale: 0.1, true_support: 4, seed }
    }

    /// 50 rows, 10 candidate columns, support of size 3; small enough to enumerate.
    pub fn desk(seed: u64) -> Self {
        ExhaustiveSpec { n_rows: 50, p: 10, s: 1.0, noise_cov_scale: 0.1, true_support: 3, seed }
    }

    pub fn check(&self) -> Result<()> {
        if self.n_rows == 0 || self.p == 0 || self.true_support > self.p {
            return invalid("exhaustive spec needs rows, columns and a support within p");
        }
        if !(self.s > 0.0 && self.noise_cov_scale > 0.0) {
            return invalid("exhaustive prior scale and noise covariance must be positive");
        }
        Ok(())
    }

    pub fn true_indicator(&self) -> Vec<bool> {
        (0..self.p).map(|j| j < self.true_support).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveData {
    /// Row-major `n_rows x p` design matrix.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Coefficients used to generate `y` (zero outside the support).
    pub coefficients: Vec<f64>,
}

/// `X` standard normal, coefficients `N(0, s^2)` on the support,
/// noise `N(0, noise_cov_scale)`.
pub fn generate_exhaustive_data<R: Rng + ?Sized>(spec: &ExhaustiveSpec, rng: &mut R) -> Result<ExhaustiveData> {
    spec.check()?;
    let (n, p) = (spec.n_rows, spec.p);
    let x: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    let coefficients: Vec<f64> = (0..p)
        .map(|j| if j < spec.true_support { spec.s * rng.sample::<f64, _>(StandardNormal) } else { 0.0 })
        .collect();
    let noise_sd = spec.noise_cov_scale.sqrt();
    let y = (0..n)
        .map(|i| {
            let row = &x[i * p..(i + 1) * p];
            let signal: f64 = row.iter().zip(&coefficients).map(|(a, b)| a * b).sum();
            signal + noise_sd * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    Ok(ExhaustiveData { x, y, coefficients })
}

#[derive(Debug, Clone)]
pub struct ExhaustiveProblem {
    pub spec: ExhaustiveSpec,
    pub data: ExhaustiveData,
    label: String,
    support: Support,
    /// `X^T X / v`, row-major `p x p`.
    gram: Vec<f64>,
    /// `X^T y / v`.
    xty: Vec<f64>,
    /// Energy terms independent of `c`, times `N`.
    constant: f64,
}

impl ExhaustiveProblem {
    pub fn new(spec: ExhaustiveSpec, data: ExhaustiveData) -> Result<Self> {
        spec.check()?;
        let (n, p) = (spec.n_rows, spec.p);
        if data.x.len() != n * p || data.y.len() != n {
            return invalid("exhaustive data dimensions do not match the spec");
        }
        let v = spec.noise_cov_scale;
        let mut gram = vec![0.0; p * p];
        for row in data.x.chunks_exact(p) {
            for i in 0..p {
                let ri = row[i];
                for j in i..p {
                    gram[i * p + j] += ri * row[j];
                }
            }
        }
        for i in 0..p {
            for j in i..p {
                gram[i * p + j] /= v;
                gram[j * p + i] = gram[i * p + j];
            }
        }
        let mut xty = vec![0.0; p];
        for (row, &yi) in data.x.chunks_exact(p).zip(&data.y) {
            for j in 0..p {
                xty[j] += row[j] * yi;
            }
        }
        xty.iter_mut().for_each(|b| *b /= v);
        let yty: f64 = data.y.iter().map(|y| y * y).sum();
        let constant = 0.5 * n as f64 * (2.0 * std::f64::consts::PI * v).ln() + 0.5 * yty / v;
        Ok(ExhaustiveProblem {
            label: format!("exhaustive-p{p}"),
            support: Support::Binary(p),
            spec,
            data,
            gram,
            xty,
            constant,
        })
    }

    pub fn generate(spec: ExhaustiveSpec) -> Result<Self> {
        let mut rng = crate::rng::stream(spec.seed, crate::rng::Purpose::Data, 0, 0);
        let data = generate_exhaustive_data(&spec, &mut rng)?;
        Self::new(spec, data)
    }

    /// `N E(c)`, or a factorization error if `A` is not numerically positive definite.
    pub fn neg_log_evidence(&self, c: &[bool]) -> Result<f64> {
        let p = self.spec.p;
        if c.len() != p {
            return invalid(format!("indicator has {} bits, expected {p}", c.len()));
        }
        let idx: Vec<usize> = (0..p).filter(|&j| c[j]).collect();
        let k = idx.len();
        if k == 0 {
            return Ok(self.constant);
        }
        let inv_s2 = 1.0 / (self.spec.s * self.spec.s);
        // lower triangle of A, row-major k x k
        let mut l = vec![0.0; k * k];
        for (r, &i) in idx.iter().enumerate() {
            for (q, &j) in idx[..=r].iter().enumerate() {
                l[r * k + q] = self.gram[i * p + j];
            }
            l[r * k + r] += inv_s2;
        }
        cholesky_in_place(&mut l, k)?;
        let mut log_det = 0.0;
        for r in 0..k {
            log_det += l[r * k + r].ln();
        }
        log_det *= 2.0;
        // z = L^-1 b, so b^T A^-1 b = |z|^2
        let mut z = vec![0.0; k];
        let mut quad = 0.0;
        for r in 0..k {
            let mut acc = self.xty[idx[r]];
            for q in 0..r {
                acc -= l[r * k + q] * z[q];
            }
            z[r] = acc / l[r * k + r];
            quad += z[r] * z[r];
        }
        Ok(k as f64 * self.spec.s.ln() + self.constant + 0.5 * log_det - 0.5 * quad)
    }
}

/// Lower Cholesky factor of the symmetric matrix whose lower triangle is
/// stored row-major in `a`.
fn cholesky_in_place(a: &mut [f64], k: usize) -> Result<()> {
    for r in 0..k {
        for q in 0..=r {
            let mut sum = a[r * k + q];
            for m in 0..q {
                sum -= a[r * k + m] * a[q * k + m];
            }
            if q == r {
                if !(sum > 0.0) {
                    return Err(Error::NotPositiveDefinite { pivot: r });
                }
                a[r * k + r] = sum.sqrt();
            } else {
                a[r * k + q] = sum / a[q * k + q];
            }
        }
    }
    Ok(())
}

/// Per-row error function `-ln p(y | c, X) / N`.
pub fn exhaustive_energy(c: &[bool], problem: &ExhaustiveProblem) -> Result<f64> {
    Ok(problem.neg_log_evidence(c)? / problem.spec.n_rows as f64)
}

impl Problem for ExhaustiveProblem {
    fn label(&self) -> &str {
        &self.label
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn data_size(&self) -> f64 {
        self.spec.n_rows as f64
    }

    fn energy(&self, coords: &Coords) -> f64 {
        let c = coords.as_binary().expect("exhaustive problem takes binary coordinates");
        // A = X^T X / v + I / s^2 is positive definite for s, v > 0
        exhaustive_energy(c, self).expect("regularised Gram matrix must factorize")
    }
}

/// Exact posterior probability of indicator `target` under the uniform
/// indicator prior, by enumeration (`p <= 20`).
pub fn indicator_posterior(problem: &ExhaustiveProblem, target: &[bool]) -> Result<f64> {
    let p = problem.spec.p;
    if p > 20 {
        return invalid(format!("enumeration over 2^{p} indicators refused"));
    }
    let mut log_w = Vec::with_capacity(1 << p);
    let mut target_idx = None;
    for code in 0usize..(1 << p) {
        let c: Vec<bool> = (0..p).map(|j| code >> j & 1 == 1).collect();
        if c == target {
            target_idx = Some(code);
        }
        log_w.push(-problem.neg_log_evidence(&c)?);
    }
    let Some(t) = target_idx else {
        return invalid("target indicator has the wrong length");
    };
    let m = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = log_w.iter().map(|w| (w - m).exp()).sum();
    Ok((log_w[t] - m).exp() / z)
}
