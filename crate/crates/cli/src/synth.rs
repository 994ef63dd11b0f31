//! Synthetic sparse-regression benchmark data: Gaussian designs with a
//! Toeplitz power covariance, planted sparse signals with
//! information-theoretically scaled magnitudes, and additive Gaussian noise.

use anyhow::{bail, Result};
use hadamard_sparse::linalg::Matrix;
use hadamard_sparse::objectives::Dataset;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Simulation design for `Y = X b* + e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimDesign {
    /// Samples per split (train, validation, and test each get `n`).
    pub n: usize,
    pub d: usize,
    /// True support size.
    pub s: usize,
    /// Toeplitz correlation: `Sigma_ij = rho^|i-j|`.
    pub rho: f64,
    /// Noise standard deviation.
    pub sigma: f64,
    pub seed: u64,
}

impl SimDesign {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            bail!("n and d must be positive");
        }
        if self.s > self.d {
            bail!("support size s = {} exceeds d = {}", self.s, self.d);
        }
        if !(0.0..1.0).contains(&self.rho) {
            bail!("rho must lie in [0, 1), got {}", self.rho);
        }
        if !(self.sigma > 0.0) {
            bail!("sigma must be positive, got {}", self.sigma);
        }
        Ok(())
    }

    /// Signal magnitude range: the smallest signal is
    /// `sigma/2 * sqrt((2/n) log d)` and the largest `2 log(d)` times the
    /// base scale `sigma * sqrt((2/n) log d)`.
    pub fn signal_range(&self) -> (f64, f64) {
        let base = self.sigma * ((2.0 / self.n as f64) * (self.d as f64).ln()).sqrt();
        (0.5 * base, 2.0 * (self.d as f64).ln() * base)
    }
}

/// Generated splits and ground truth.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub beta_star: Vec<f64>,
}

/// Sample one design-matrix row block of `n` rows from `N(0, Sigma)` using
/// the Cholesky factor of `Sigma`.
fn sample_design(
    n: usize,
    d: usize,
    chol: Option<&Matrix>,
    rng: &mut ChaCha12Rng,
) -> Matrix {
    let mut x = Matrix::zeros(n, d);
    let mut z = vec![0.0; d];
    for i in 0..n {
        for zj in z.iter_mut() {
            *zj = rng.sample::<f64, _>(StandardNormal);
        }
        match chol {
            None => x.row_mut(i).copy_from_slice(&z),
            Some(l) => {
                let row = x.row_mut(i);
                for j in 0..d {
                    let mut acc = 0.0;
                    for k in 0..=j {
                        acc += l[(j, k)] * z[k];
                    }
                    row[j] = acc;
                }
            }
        }
    }
    x
}

/// Generate three independent splits of size `n` each plus the true signal.
///
/// Support indices are drawn uniformly without replacement; the non-zero
/// magnitudes are equally spaced over [`SimDesign::signal_range`] and carry
/// random signs.
pub fn gen_synthetic(design: &SimDesign) -> Result<Synthetic> {
    design.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(design.seed);
    let d = design.d;

    let chol = if design.rho == 0.0 {
        None
    } else {
        let mut sigma = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                sigma[(i, j)] = design.rho.powi((i as i32 - j as i32).abs());
            }
        }
        Some(sigma.cholesky()?)
    };

    let mut beta_star = vec![0.0; d];
    if design.s > 0 {
        let support = rand::seq::index::sample(&mut rng, d, design.s).into_vec();
        let (lo, hi) = design.signal_range();
        for (rank, &idx) in support.iter().enumerate() {
            let magnitude = if design.s == 1 {
                lo
            } else {
                lo + (hi - lo) * rank as f64 / (design.s - 1) as f64
            };
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            beta_star[idx] = sign * magnitude;
        }
    }

    let split = |rng: &mut ChaCha12Rng| -> Result<Dataset> {
        let x = sample_design(design.n, d, chol.as_ref(), rng);
        let y: Vec<f64> = (0..design.n)
            .map(|i| {
                let mean: f64 = x
                    .row(i)
                    .iter()
                    .zip(&beta_star)
                    .map(|(a, b)| a * b)
                    .sum();
                mean + design.sigma * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        Ok(Dataset::regression(x, y)?)
    };

    let train = split(&mut rng)?;
    let val = split(&mut rng)?;
    let test = split(&mut rng)?;
    Ok(Synthetic {
        train,
        val,
        test,
        beta_star,
    })
}
