//! Regularization-path runner: one optimized surrogate fit per `lambda` on
//! an increasing grid, with optional warm starts from the previous solution.

use std::time::Instant;

use anyhow::Result;
use hadamard_sparse::linalg::{self, Matrix};
use hadamard_sparse::objectives::{
    base_objective, Dataset, LinearModel, Model, ModelParams, Objective, SurrogateObjective,
};
use hadamard_sparse::optimizer::{self, init_surrogate, InitScheme, OptimConfig};
use hadamard_sparse::oracle::lasso_lambda_max;
use hadamard_sparse::param_maps::ParamSpec;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Per-`lambda` record of a path run.
#[derive(Debug, Clone)]
pub struct PathRecord {
    pub lambda: f64,
    /// Reconstructed coefficients before thresholding.
    pub beta: Vec<f64>,
    /// Coefficients after the configured post-hoc threshold.
    pub beta_post: Vec<f64>,
    /// Base objective `P` at the user-facing `lambda`.
    pub p_value: f64,
    /// Surrogate objective `Q` at the final iterate.
    pub q_value: f64,
    /// Post-threshold non-zeros (entries, or groups for grouped kinds).
    pub nnz: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub test_loss: Option<f64>,
    /// Epochs actually run (early stopping may cut the budget short).
    pub epochs_run: usize,
    pub wall_time_secs: f64,
    pub failed: bool,
}

/// Result of a full path run; records are aligned with the strictly
/// increasing `lambda` grid.
#[derive(Debug, Clone, Default)]
pub struct PathResult {
    pub records: Vec<PathRecord>,
}

/// Log-spaced grid of `count` values from `lambda_max * ratio` up to
/// `lambda_max`, strictly increasing.
pub fn lambda_grid(lambda_max: f64, ratio: f64, count: usize) -> Vec<f64> {
    assert!(lambda_max > 0.0 && ratio > 0.0 && ratio < 1.0 && count > 0);
    if count == 1 {
        return vec![lambda_max];
    }
    let lo = (lambda_max * ratio).ln();
    let hi = lambda_max.ln();
    (0..count)
        .map(|i| (lo + (hi - lo) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Null-solution threshold of the group-lasso objective
/// `(1/n)||y - Xb||^2 + lambda sum_j w_j ||b_j||_2`.
pub fn group_lambda_max(
    x: &Matrix,
    y: &[f64],
    spec: &ParamSpec,
) -> f64 {
    let n = x.rows() as f64;
    let g = x.t_matvec(y);
    let mut worst = 0.0f64;
    for (_, r) in spec.partition().iter_slices() {
        let norm = linalg::norm(&g[r]) * 2.0 / n;
        worst = worst.max(norm);
    }
    worst
}

/// Data-driven grid top: the null-solution threshold of the matching convex
/// problem (lasso for element-wise kinds, group lasso otherwise).
pub fn default_lambda_max(train: &Dataset, spec: &ParamSpec) -> Result<f64> {
    let y = train.values()?;
    Ok(if spec.kind().is_grouped() {
        group_lambda_max(&train.x, y, spec)
    } else {
        lasso_lambda_max(&train.x, y)
    })
}

/// Inputs for [`run_path`].
pub struct PathRunner<'a> {
    pub train: &'a Dataset,
    pub val: Option<&'a Dataset>,
    pub test: Option<&'a Dataset>,
    pub spec: ParamSpec,
    pub optim: OptimConfig,
    pub init: InitScheme,
    pub warm_start: bool,
    /// Post-hoc threshold for the reported sparse solution and `nnz`.
    pub threshold: f64,
}

impl PathRunner<'_> {
    /// Fresh initialization: a He-normal draw for `beta0` fed through the
    /// configured scheme.
    fn fresh_init(&self, lambda_index: usize) -> Result<ModelParams> {
        let d = self.spec.dim();
        let seed = self
            .optim
            .seed
            .wrapping_mul(0x9e3779b97f4a7c15)
            .wrapping_add(lambda_index as u64);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let he = (2.0 / d as f64).sqrt();
        let beta0: Vec<f64> = (0..d)
            .map(|_| he * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let xi = init_surrogate(&self.spec, &beta0, self.init, seed)?;
        Ok(ModelParams::new(Vec::new(), xi))
    }

    fn post_threshold(&self, beta: &[f64]) -> (Vec<f64>, usize) {
        if self.spec.kind().is_grouped() {
            let post =
                optimizer::threshold_groups(beta, self.spec.partition(), self.threshold);
            let nnz = self
                .spec
                .partition()
                .iter_slices()
                .filter(|(_, r)| linalg::norm(&post[r.clone()]) > 0.0)
                .count();
            (post, nnz)
        } else {
            let post = optimizer::threshold(beta, self.threshold);
            let nnz = post.iter().filter(|b| **b != 0.0).count();
            (post, nnz)
        }
    }
}

/// Run the path over a strictly increasing `lambda` grid. A run that aborts
/// marks its record failed and the path continues.
pub fn run_path(runner: &PathRunner<'_>, lambdas: &[f64]) -> Result<PathResult> {
    anyhow::ensure!(
        lambdas.windows(2).all(|w| w[0] < w[1]),
        "lambda grid must be strictly increasing"
    );
    let mut result = PathResult::default();
    let mut warm: Option<ModelParams> = None;
    let all_rows: Vec<usize> = (0..runner.train.len()).collect();

    for (idx, &lambda) in lambdas.iter().enumerate() {
        let started = Instant::now();
        let objective = match runner.val {
            Some(val) => SurrogateObjective::from_base_lambda(
                LinearModel {
                    dim: runner.spec.dim(),
                },
                runner.train,
                runner.spec.clone(),
                lambda,
            )?
            .with_val(val),
            None => SurrogateObjective::from_base_lambda(
                LinearModel {
                    dim: runner.spec.dim(),
                },
                runner.train,
                runner.spec.clone(),
                lambda,
            )?,
        };
        let params0 = match (&warm, runner.warm_start) {
            (Some(prev), true) => prev.clone(),
            _ => runner.fresh_init(idx)?,
        };
        let outcome = optimizer::run(&objective, params0, &runner.optim);
        let wall_time_secs = started.elapsed().as_secs_f64();

        match outcome {
            Ok((params, trace)) => {
                let beta = objective.reconstruct_beta(&params)?;
                let (beta_post, nnz) = runner.post_threshold(&beta);
                let reg = runner.spec.base_reg(lambda)?;
                let model = LinearModel {
                    dim: runner.spec.dim(),
                };
                let p_value = base_objective(&model, runner.train, &beta, &[], &reg)?;
                let full_eval = objective.eval(&params, &all_rows)?;
                let q_value = full_eval.value;
                let train_loss = full_eval.loss;
                let val_loss = objective.val_loss(&params)?;
                let test_loss = match runner.test {
                    None => None,
                    Some(test) => {
                        let rows: Vec<usize> = (0..test.len()).collect();
                        Some(model.loss(test, &rows, &[], &beta)?)
                    }
                };
                if runner.warm_start {
                    warm = Some(params);
                }
                result.records.push(PathRecord {
                    lambda,
                    beta,
                    beta_post,
                    p_value,
                    q_value,
                    nnz,
                    train_loss,
                    val_loss,
                    test_loss,
                    epochs_run: trace.records.len(),
                    wall_time_secs,
                    failed: false,
                });
            }
            Err(_) => {
                let d = runner.spec.dim();
                result.records.push(PathRecord {
                    lambda,
                    beta: vec![f64::NAN; d],
                    beta_post: vec![f64::NAN; d],
                    p_value: f64::NAN,
                    q_value: f64::NAN,
                    nnz: 0,
                    train_loss: f64::NAN,
                    val_loss: None,
                    test_loss: None,
                    epochs_run: 0,
                    wall_time_secs,
                    failed: true,
                });
                warm = None;
            }
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_synthetic, SimDesign};
    use hadamard_sparse::optimizer::Schedule;
    use hadamard_sparse::oracle::cd_lasso;

    #[test]
    fn grid_is_increasing_and_anchored() {
        let grid = lambda_grid(2.0, 1e-3, 7);
        assert_eq!(grid.len(), 7);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        assert!((grid[6] - 2.0).abs() < 1e-12);
        assert!((grid[0] - 2e-3).abs() < 1e-12);
    }

    #[test]
    fn short_lasso_path_tracks_oracle() {
        let design = SimDesign {
            n: 80,
            d: 12,
            s: 3,
            rho: 0.0,
            sigma: 0.5,
            seed: 11,
        };
        let data = gen_synthetic(&design).unwrap();
        let spec = ParamSpec::hpp(12);
        let lmax = default_lambda_max(&data.train, &spec).unwrap();
        // a hair above the null threshold so the top solution is decisively 0
        let grid = lambda_grid(lmax * 1.05, 0.05, 5);
        let runner = PathRunner {
            train: &data.train,
            val: Some(&data.val),
            test: Some(&data.test),
            spec,
            optim: OptimConfig {
                learning_rate: 0.08,
                momentum: 0.9,
                schedule: Schedule::Cosine,
                epochs: 2000,
                ..OptimConfig::default()
            },
            init: InitScheme::OnesTail,
            warm_start: true,
            threshold: 1e-6,
        };
        let path = run_path(&runner, &grid).unwrap();
        assert_eq!(path.records.len(), 5);
        for record in &path.records {
            assert!(!record.failed);
            let oracle = cd_lasso(
                &data.train.x,
                data.train.values().unwrap(),
                record.lambda,
                1e-12,
            )
            .unwrap();
            // objective values of the convex problem agree
            assert!(
                (record.p_value - oracle.objective).abs() <= 1e-4 * (1.0 + oracle.objective),
                "lambda {}: P {} vs oracle {}",
                record.lambda,
                record.p_value,
                oracle.objective
            );
        }
        // top of the grid is the null threshold: everything shrunk away
        assert_eq!(path.records.last().unwrap().nnz, 0);
        // l1 norms shrink along the increasing grid (up to tolerance)
        for w in path.records.windows(2) {
            let a = linalg::norm_l1(&w[0].beta);
            let b = linalg::norm_l1(&w[1].beta);
            assert!(b <= a + 1e-4, "l1 not decreasing: {a} -> {b}");
        }
    }

    #[test]
    fn unregularized_entry_matches_least_squares() {
        let design = SimDesign {
            n: 60,
            d: 6,
            s: 2,
            rho: 0.0,
            sigma: 0.3,
            seed: 2,
        };
        let data = gen_synthetic(&design).unwrap();
        let spec = ParamSpec::hpp(6);
        let runner = PathRunner {
            train: &data.train,
            val: None,
            test: None,
            spec,
            optim: OptimConfig {
                learning_rate: 0.15,
                momentum: 0.9,
                schedule: Schedule::Cosine,
                epochs: 2500,
                ..OptimConfig::default()
            },
            init: InitScheme::OnesTail,
            warm_start: false,
            threshold: 1e-6,
        };
        // grid with a single (tiny) lambda approximates lambda = 0
        let path = run_path(&runner, &[1e-9]).unwrap();
        let ls = cd_lasso(&data.train.x, data.train.values().unwrap(), 0.0, 1e-13).unwrap();
        let record = &path.records[0];
        assert!((record.train_loss - ls.objective).abs() <= 1e-4 * (1.0 + ls.objective));
    }
}
