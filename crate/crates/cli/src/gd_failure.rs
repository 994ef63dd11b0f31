//! Failure of direct (sub)gradient descent on non-smooth sparse objectives,
//! against the smooth-transfer runs and the specialized oracles: per-lambda
//! sparsity counts, parameter norms, and objective values for the lasso and
//! the group lasso on one Gaussian instance.

use anyhow::Result;
use hadamard_sparse::linalg::{self, Matrix};
use hadamard_sparse::objectives::Dataset;
use hadamard_sparse::optimizer::{InitScheme, OptimConfig, Schedule};
use hadamard_sparse::oracle::{
    cd_lasso, prox_group_lasso, subgradient_gd_lasso, SubGdConfig,
};
use hadamard_sparse::param_maps::ParamSpec;
use hadamard_sparse::spaces::GroupPartition;
use rand::prelude::*;
use rand_distr::StandardNormal;

use crate::csvout::{Cell, CsvTable};
use crate::pathrun::{default_lambda_max, lambda_grid, run_path, PathRunner};

/// Documented header of `gd_failure.csv`.
pub const CSV_HEADER: [&str; 5] = ["lambda", "method", "nnz", "l1_norm", "objective"];

/// One emitted row, with the fitted coefficients retained for assertions.
#[derive(Debug, Clone)]
pub struct MethodRecord {
    pub lambda: f64,
    pub method: &'static str,
    /// Entries above 1e-6 for element-wise methods, groups above 1e-6 for
    /// the group methods.
    pub nnz: usize,
    pub l1_norm: f64,
    pub objective: f64,
    pub beta: Vec<f64>,
}

/// The benchmark instance: `X in R^{1000 x 100}`, `beta*`, `eps` all from
/// independent standard Gaussians, 20 groups of 5 for the group problem.
pub fn instance(seed: u64) -> (Dataset, GroupPartition) {
    let mut rng = crate::cell_rng(seed, 0);
    let (n, d) = (1000, 100);
    let mut x = Matrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            x[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let beta_star: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| linalg::dot(x.row(i), &beta_star) + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let data = Dataset::regression(x, y).expect("consistent shapes");
    let partition = GroupPartition::even(d, 20).expect("100 = 20 x 5");
    (data, partition)
}

fn entry_nnz(beta: &[f64]) -> usize {
    beta.iter().filter(|b| b.abs() > 1e-6).count()
}

fn group_nnz(beta: &[f64], partition: &GroupPartition) -> usize {
    partition
        .iter_slices()
        .filter(|(_, r)| linalg::norm(&beta[r.clone()]) > 1e-6)
        .count()
}

fn group_objective(data: &Dataset, partition: &GroupPartition, lambda: f64, beta: &[f64]) -> f64 {
    let y = data.values().expect("regression targets");
    let r: Vec<f64> = data
        .x
        .matvec(beta)
        .iter()
        .zip(y)
        .map(|(p, yi)| yi - p)
        .collect();
    let mut value = linalg::norm_sq(&r) / data.len() as f64;
    for (_, range) in partition.iter_slices() {
        value += lambda * linalg::norm(&beta[range]);
    }
    value
}

/// Direct full-batch subgradient descent on the group-lasso objective, with
/// the subgradient of `||.||_2` assigned 0 at 0 (failure demonstrator only).
fn subgradient_gd_group(
    data: &Dataset,
    partition: &GroupPartition,
    lambda: f64,
    config: &SubGdConfig,
) -> Vec<f64> {
    let y = data.values().expect("regression targets");
    let (n, d) = (data.len(), data.x.cols());
    let inv_n = 2.0 / n as f64;
    let mut beta = vec![0.0; d];
    let mut velocity = vec![0.0; d];
    for epoch in 0..config.epochs {
        let lr = if config.cosine {
            config.learning_rate
                * 0.5
                * (1.0 + (std::f64::consts::PI * epoch as f64 / config.epochs as f64).cos())
        } else {
            config.learning_rate
        };
        let residual: Vec<f64> = data
            .x
            .matvec(&beta)
            .iter()
            .zip(y)
            .map(|(p, yi)| yi - p)
            .collect();
        let smooth = data.x.t_matvec(&residual);
        let mut grad: Vec<f64> = smooth.iter().map(|g| -inv_n * g).collect();
        for (_, range) in partition.iter_slices() {
            let norm = linalg::norm(&beta[range.clone()]);
            if norm > 0.0 {
                for i in range {
                    grad[i] += lambda * beta[i] / norm;
                }
            }
        }
        for j in 0..d {
            velocity[j] = config.momentum * velocity[j] + grad[j];
            beta[j] -= lr * velocity[j];
        }
    }
    beta
}

/// Run the demonstration: `num_lambdas` points per problem, six methods.
pub fn experiment_gd_failure(seed: u64, num_lambdas: usize) -> Result<Vec<MethodRecord>> {
    let (data, partition) = instance(seed);
    let mut records = Vec::new();

    // ---- lasso problem ----
    let spec = ParamSpec::hpp(data.x.cols());
    let lmax = default_lambda_max(&data, &spec)?;
    let grid = lambda_grid(lmax * 1.02, 0.04, num_lambdas);
    // half rate through the early unbalanced transient, full rate afterwards
    let optim = OptimConfig {
        learning_rate: 0.18,
        momentum: 0.9,
        schedule: Schedule::Cosine,
        epochs: 3000,
        warmup_epochs: 600,
        warmup_scale: 0.5,
        seed,
        ..OptimConfig::default()
    };
    let runner = PathRunner {
        train: &data,
        val: None,
        test: None,
        spec,
        optim,
        init: InitScheme::OnesTail,
        warm_start: true,
        threshold: 1e-6,
    };
    let path = run_path(&runner, &grid)?;
    let subgd_cfg = SubGdConfig::default();
    for record in &path.records {
        let lambda = record.lambda;
        records.push(MethodRecord {
            lambda,
            method: "hpp",
            nnz: entry_nnz(&record.beta),
            l1_norm: linalg::norm_l1(&record.beta),
            objective: record.p_value,
            beta: record.beta.clone(),
        });
        let cd = cd_lasso(&data.x, data.values()?, lambda, 1e-10)?;
        records.push(MethodRecord {
            lambda,
            method: "cd",
            nnz: entry_nnz(&cd.beta),
            l1_norm: linalg::norm_l1(&cd.beta),
            objective: cd.objective,
            beta: cd.beta,
        });
        let sub = subgradient_gd_lasso(&data.x, data.values()?, lambda, &subgd_cfg)?;
        records.push(MethodRecord {
            lambda,
            method: "subgd",
            nnz: entry_nnz(&sub.beta),
            l1_norm: linalg::norm_l1(&sub.beta),
            objective: sub.objective,
            beta: sub.beta,
        });
    }

    // ---- group-lasso problem ----
    let spec = ParamSpec::ghpp(partition.clone());
    let lmax = default_lambda_max(&data, &spec)?;
    let grid = lambda_grid(lmax * 1.02, 0.04, num_lambdas);
    let optim = OptimConfig {
        learning_rate: 0.1,
        momentum: 0.9,
        schedule: Schedule::Cosine,
        epochs: 2000,
        warmup_epochs: 400,
        warmup_scale: 0.5,
        seed,
        ..OptimConfig::default()
    };
    let runner = PathRunner {
        train: &data,
        val: None,
        test: None,
        spec,
        optim,
        init: InitScheme::OnesTail,
        warm_start: true,
        threshold: 1e-6,
    };
    let path = run_path(&runner, &grid)?;
    let group_subgd_cfg = SubGdConfig {
        learning_rate: 0.1,
        epochs: 2000,
        momentum: 0.9,
        cosine: false,
    };
    let weights = vec![1.0; partition.num_groups()];
    for record in &path.records {
        let lambda = record.lambda;
        records.push(MethodRecord {
            lambda,
            method: "ghpp",
            nnz: group_nnz(&record.beta, &partition),
            l1_norm: linalg::norm_l1(&record.beta),
            objective: record.p_value,
            beta: record.beta.clone(),
        });
        let prox = prox_group_lasso(&data.x, data.values()?, lambda, &partition, &weights, 1e-10)?;
        records.push(MethodRecord {
            lambda,
            method: "prox_group",
            nnz: group_nnz(&prox.beta, &partition),
            l1_norm: linalg::norm_l1(&prox.beta),
            objective: prox.objective,
            beta: prox.beta,
        });
        let sub = subgradient_gd_group(&data, &partition, lambda, &group_subgd_cfg);
        records.push(MethodRecord {
            lambda,
            method: "subgd_group",
            nnz: group_nnz(&sub, &partition),
            l1_norm: linalg::norm_l1(&sub),
            objective: group_objective(&data, &partition, lambda, &sub),
            beta: sub,
        });
    }
    Ok(records)
}

/// Render records into the documented CSV layout.
pub fn to_table(records: &[MethodRecord]) -> CsvTable {
    let mut table = CsvTable::new(&CSV_HEADER);
    for r in records {
        table.push(vec![
            Cell::from(r.lambda),
            Cell::from(r.method),
            Cell::from(r.nnz),
            Cell::from(r.l1_norm),
            Cell::from(r.objective),
        ]);
    }
    table
}
