//! Sparse linear regression benchmark across factorization depths: for each
//! (correlation, repetition) cell, fit depth-`k` chains by SGD over a lambda
//! path, pick lambda and the post-hoc threshold on validation loss, and
//! score against the true signal on the test split. A coordinate-descent
//! lasso run through the identical selection protocol is the reference.

use anyhow::Result;
use hadamard_sparse::objectives::Dataset;
use hadamard_sparse::optimizer::{select_threshold, EarlyStopping, OptimConfig, Schedule};
use hadamard_sparse::oracle::cd_lasso;
use hadamard_sparse::param_maps::ParamSpec;
use rand::Rng;
use rayon::prelude::*;

use crate::csvout::{Cell, CsvTable};
use crate::metrics::{metrics, Metrics};
use crate::pathrun::{default_lambda_max, lambda_grid, run_path, PathRunner};
use crate::synth::{gen_synthetic, SimDesign, Synthetic};

/// Documented header of `highdim.csv`.
pub const CSV_HEADER: [&str; 10] = [
    "rho",
    "seed",
    "method",
    "k",
    "lambda",
    "threshold",
    "est_err",
    "rmse",
    "support_accuracy",
    "false_positives",
];

/// Settings for the benchmark.
#[derive(Debug, Clone)]
pub struct HighdimConfig {
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub sigma: f64,
    pub rhos: Vec<f64>,
    pub depths: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    pub num_lambdas: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
}

impl Default for HighdimConfig {
    fn default() -> Self {
        HighdimConfig {
            n: 200,
            d: 400,
            s: 10,
            sigma: 1.0,
            rhos: vec![0.0, 0.5],
            depths: vec![2, 3, 4, 6],
            repetitions: 10,
            seed: 0,
            num_lambdas: 12,
            epochs: 2000,
            batch_size: 32,
            learning_rate: 0.005,
            patience: 200,
        }
    }
}

/// One scored cell.
#[derive(Debug, Clone)]
pub struct HighdimCell {
    pub rho: f64,
    pub rep: usize,
    /// `hppk` or `cd_lasso`.
    pub method: &'static str,
    /// Factorization depth; 0 for the coordinate-descent reference.
    pub k: usize,
    pub lambda: f64,
    pub threshold: f64,
    pub metrics: Metrics,
}

fn val_mse(val: &Dataset) -> impl Fn(&[f64]) -> f64 + '_ {
    let y = val.values().expect("regression targets");
    move |beta: &[f64]| {
        let pred = val.x.matvec(beta);
        let sq: f64 = y.iter().zip(&pred).map(|(a, b)| (a - b) * (a - b)).sum();
        sq / val.len() as f64
    }
}

fn threshold_grid() -> Vec<f64> {
    let mut taus: Vec<f64> = (0..25)
        .map(|i| 10f64.powf(-8.0 + 8.0 * i as f64 / 24.0))
        .collect();
    taus.insert(0, 0.0);
    taus
}

/// Pick `(lambda, tau, thresholded beta)` over the candidates by validation
/// loss of the thresholded solution; ties break toward the larger lambda.
fn select_on_validation(
    candidates: &[(f64, Vec<f64>)],
    val: &Dataset,
) -> Result<(f64, f64, Vec<f64>)> {
    let taus = threshold_grid();
    let score = val_mse(val);
    let mut best: Option<(f64, f64, f64, Vec<f64>)> = None;
    for (lambda, beta) in candidates {
        if beta.iter().any(|b| !b.is_finite()) {
            continue;
        }
        let (tau, post) = select_threshold(beta, &taus, None, &score)?;
        let loss = score(&post);
        if best.as_ref().map_or(true, |(bl, _, _, _)| loss <= *bl) {
            best = Some((loss, *lambda, tau, post));
        }
    }
    let (_, lambda, tau, post) =
        best.ok_or_else(|| anyhow::anyhow!("no finite candidate on the path"))?;
    Ok((lambda, tau, post))
}

fn run_cell(cfg: &HighdimConfig, rho: f64, rep: usize, cell: u64) -> Result<Vec<HighdimCell>> {
    let design = SimDesign {
        n: cfg.n,
        d: cfg.d,
        s: cfg.s,
        rho,
        sigma: cfg.sigma,
        seed: crate::cell_rng(cfg.seed, cell).gen(),
    };
    let data: Synthetic = gen_synthetic(&design)?;
    let spec_l1 = ParamSpec::hpp(cfg.d);
    let lmax = default_lambda_max(&data.train, &spec_l1)?;
    let grid = lambda_grid(lmax, 0.01, cfg.num_lambdas);
    let mut out = Vec::new();

    // coordinate-descent reference through the same selection protocol
    let cd_candidates: Vec<(f64, Vec<f64>)> = grid
        .iter()
        .map(|&lambda| {
            cd_lasso(&data.train.x, data.train.values()?, lambda, 1e-9)
                .map(|r| (lambda, r.beta))
                .map_err(anyhow::Error::from)
        })
        .collect::<Result<_>>()?;
    let (lambda, tau, post) = select_on_validation(&cd_candidates, &data.val)?;
    out.push(HighdimCell {
        rho,
        rep,
        method: "cd_lasso",
        k: 0,
        lambda,
        threshold: tau,
        metrics: metrics(&post, &data.beta_star, &data.test)?,
    });

    for &k in &cfg.depths {
        let spec = ParamSpec::hppk(cfg.d, k)?;
        let runner = PathRunner {
            train: &data.train,
            val: Some(&data.val),
            test: Some(&data.test),
            spec,
            optim: OptimConfig {
                learning_rate: cfg.learning_rate,
                momentum: 0.0,
                schedule: Schedule::InverseTime { rate: 1e-6 },
                epochs: cfg.epochs,
                batch_size: Some(cfg.batch_size),
                early_stopping: Some(EarlyStopping {
                    patience: cfg.patience,
                }),
                seed: design.seed,
                ..OptimConfig::default()
            },
            init: hadamard_sparse::optimizer::InitScheme::OnesTail,
            warm_start: true,
            threshold: 1e-6,
        };
        let path = run_path(&runner, &grid)?;
        let candidates: Vec<(f64, Vec<f64>)> = path
            .records
            .iter()
            .filter(|r| !r.failed)
            .map(|r| (r.lambda, r.beta.clone()))
            .collect();
        let (lambda, tau, post) = select_on_validation(&candidates, &data.val)?;
        out.push(HighdimCell {
            rho,
            rep,
            method: "hppk",
            k,
            lambda,
            threshold: tau,
            metrics: metrics(&post, &data.beta_star, &data.test)?,
        });
    }
    Ok(out)
}

/// Run the full grid; cells execute in parallel, output order is fixed.
pub fn experiment_highdim(cfg: &HighdimConfig) -> Result<Vec<HighdimCell>> {
    let cells: Vec<(usize, f64, usize)> = cfg
        .rhos
        .iter()
        .enumerate()
        .flat_map(|(ri, &rho)| (0..cfg.repetitions).map(move |rep| (ri, rho, rep)))
        .collect();
    let results: Vec<Result<Vec<HighdimCell>>> = cells
        .par_iter()
        .map(|&(ri, rho, rep)| run_cell(cfg, rho, rep, (ri * cfg.repetitions + rep) as u64))
        .collect();
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Median of a non-empty sample (midpoint convention for even sizes).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

/// Median standardized estimation error per `(method, k, rho)`.
pub fn summarize(cells: &[HighdimCell]) -> Vec<(String, f64, f64)> {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for c in cells {
        let label = if c.method == "cd_lasso" {
            "cd_lasso".to_string()
        } else {
            format!("{}{}", c.method, c.k)
        };
        if !keys.iter().any(|(l, r)| *l == label && *r == c.rho) {
            keys.push((label, c.rho));
        }
    }
    keys.into_iter()
        .map(|(label, rho)| {
            let errs: Vec<f64> = cells
                .iter()
                .filter(|c| {
                    c.rho == rho
                        && label
                            == if c.method == "cd_lasso" {
                                "cd_lasso".to_string()
                            } else {
                                format!("{}{}", c.method, c.k)
                            }
                })
                .filter_map(|c| c.metrics.est_err)
                .collect();
            (label, rho, median(&errs))
        })
        .collect()
}

/// Render cells into the documented CSV layout.
pub fn to_table(cells: &[HighdimCell]) -> CsvTable {
    let mut table = CsvTable::new(&CSV_HEADER);
    for c in cells {
        table.push(vec![
            Cell::from(c.rho),
            Cell::from(c.rep),
            Cell::from(c.method),
            Cell::from(c.k),
            Cell::from(c.lambda),
            Cell::from(c.threshold),
            match c.metrics.est_err {
                Some(e) => Cell::from(e),
                None => Cell::from(""),
            },
            Cell::from(c.metrics.rmse),
            Cell::from(c.metrics.support_accuracy),
            Cell::from(c.metrics.false_positives),
        ]);
    }
    table
}
