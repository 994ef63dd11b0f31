//! Deterministic, seeded (S)GD with heavy-ball momentum, learning-rate
//! schedules, early stopping, balanced surrogate initialization, and
//! post-hoc thresholding.
//!
//! A run is fully determined by `(objective, params0, config)`: batch order
//! comes from an epoch-wise Fisher-Yates shuffle driven by a counter-based
//! generator seeded from `(config.seed, epoch)`, so two runs with the same
//! seed produce bit-identical traces.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::linalg;
use crate::objectives::{ModelParams, Objective};
use crate::param_maps::{solution_map, FactorSet, ParamSpec};
use crate::spaces::GroupPartition;
use crate::{Error, Result};

/// Learning-rate schedule, as a multiplier on the base rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant,
    /// `0.5 (1 + cos(pi * epoch / total))`.
    Cosine,
    /// `1 / (1 + rate * epoch)`.
    InverseTime { rate: f64 },
}

/// Multiplier applied to the base learning rate at `epoch` of `total`.
pub fn schedule_lr(schedule: Schedule, epoch: usize, total: usize) -> f64 {
    match schedule {
        Schedule::Constant => 1.0,
        Schedule::Cosine => {
            0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / total as f64).cos())
        }
        Schedule::InverseTime { rate } => 1.0 / (1.0 + rate * epoch as f64),
    }
}

/// Early stopping on validation loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EarlyStopping {
    /// Number of epochs without improvement before stopping (>= 1).
    pub patience: usize,
}

/// Optimizer configuration.
#[derive(Debug, Clone)]
pub struct OptimConfig {
    pub learning_rate: f64,
    /// Heavy-ball momentum in `[0, 1)`: `v <- m v + g; theta <- theta - lr v`.
    pub momentum: f64,
    pub schedule: Schedule,
    pub epochs: usize,
    /// `None` runs full-batch.
    pub batch_size: Option<usize>,
    pub early_stopping: Option<EarlyStopping>,
    pub seed: u64,
    /// Per-factor learning-rate scale, matched by factor name.
    pub factor_lr_scale: Vec<(String, f64)>,
    /// Learning-rate multiplier applied during the first `warmup_epochs`
    /// epochs. No default recommendation is made; 1.0 disables it.
    pub warmup_scale: f64,
    pub warmup_epochs: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            learning_rate: 0.1,
            momentum: 0.9,
            schedule: Schedule::Cosine,
            epochs: 1000,
            batch_size: None,
            early_stopping: None,
            seed: 0,
            factor_lr_scale: Vec::new(),
            warmup_scale: 1.0,
            warmup_epochs: 0,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be positive"));
        }
        if let Some(b) = self.batch_size {
            if b == 0 {
                return Err(Error::invalid("batch size must be positive"));
            }
        }
        if let Some(es) = self.early_stopping {
            if es.patience == 0 {
                return Err(Error::invalid("early-stopping patience must be >= 1"));
            }
        }
        if self.factor_lr_scale.iter().any(|(_, s)| !(*s > 0.0)) {
            return Err(Error::invalid("factor learning-rate scales must be positive"));
        }
        if !(self.warmup_scale > 0.0) {
            return Err(Error::invalid("warmup scale must be positive"));
        }
        Ok(())
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub epoch: usize,
    /// Mean objective value over the epoch's batches.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    /// `l1` norm of the reconstructed `beta`.
    pub beta_l1: f64,
    /// Count of entries with `|beta_i| > 1e-6`.
    pub nnz: usize,
    pub learning_rate: f64,
}

/// Optimization trace, one record per completed epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

/// Surrogate initialization scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    /// Balanced factors from the solution map of `beta0`, with additive
    /// jitter on exactly-zero entries (the origin is a stationary point of
    /// `Q`, so unjittered zeros never move under full-batch GD).
    SvfBalanced { jitter: Option<f64> },
    /// First factor set to `beta0`, all remaining factors set to ones.
    /// Reproduces `beta0` exactly for the product-structured kinds (unit
    /// co-factors); for the difference kinds and the bijective power map it
    /// is a literal scheme only and [`InitScheme::SvfBalanced`] is the
    /// natural choice.
    OnesTail,
    /// All factors i.i.d. normal with per-factor scale `sigma^(1/k)`, so the
    /// entry-wise product of a depth-`k` chain has standard deviation
    /// `sigma` (exact for the monomial kinds, where factor moments multiply).
    RandomScaled { sigma: f64 },
}

/// Default jitter applied by [`InitScheme::SvfBalanced`] when enabled.
pub const DEFAULT_INIT_JITTER: f64 = 1e-4;

/// Build surrogate factors that reproduce `beta0` (for the deterministic
/// schemes) or scatter around it (`RandomScaled`).
pub fn init_surrogate(
    spec: &ParamSpec,
    beta0: &[f64],
    scheme: InitScheme,
    seed: u64,
) -> Result<FactorSet> {
    if beta0.len() != spec.dim() {
        return Err(Error::shape("beta0 does not match spec dimension".to_string()));
    }
    match scheme {
        InitScheme::SvfBalanced { jitter } => {
            let mut xi = solution_map(spec, beta0)?;
            if let Some(eps) = jitter {
                for f in 0..xi.num_factors() {
                    for v in xi.values_mut(f) {
                        if *v == 0.0 {
                            *v = eps;
                        }
                    }
                }
            }
            Ok(xi)
        }
        InitScheme::OnesTail => {
            let mut xi = FactorSet::zeros(spec);
            let shapes = spec.factor_shapes();
            if shapes[0].1 != beta0.len() {
                return Err(Error::invalid(format!(
                    "ones-tail init needs a d-dimensional leading factor, kind '{}' has length {}",
                    spec.kind(),
                    shapes[0].1
                )));
            }
            xi.values_mut(0).copy_from_slice(beta0);
            for f in 1..xi.num_factors() {
                for v in xi.values_mut(f) {
                    *v = 1.0;
                }
            }
            Ok(xi)
        }
        InitScheme::RandomScaled { sigma } => {
            if !(sigma > 0.0) {
                return Err(Error::invalid("random init scale must be positive"));
            }
            let factor_sigma = sigma.powf(1.0 / spec.k());
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut xi = FactorSet::zeros(spec);
            for f in 0..xi.num_factors() {
                for v in xi.values_mut(f) {
                    *v = factor_sigma * rng.sample::<f64, _>(StandardNormal);
                }
            }
            Ok(xi)
        }
    }
}

/// Seed an epoch-local generator from `(seed, counter)`.
fn epoch_rng(seed: u64, epoch: u64) -> ChaCha12Rng {
    let mut material = [0u8; 32];
    material[..8].copy_from_slice(&seed.to_le_bytes());
    material[8..16].copy_from_slice(&epoch.to_le_bytes());
    material[16..24].copy_from_slice(&0x5851f42d4c957f2d_u64.to_le_bytes());
    ChaCha12Rng::from_seed(material)
}

/// Run heavy-ball (S)GD on `objective` from `params0`.
///
/// Returns the best-validation parameters when early stopping is active,
/// the final parameters otherwise. Aborts with a diagnostic on non-finite
/// loss.
pub fn run(
    objective: &dyn Objective,
    params0: ModelParams,
    config: &OptimConfig,
) -> Result<(ModelParams, Trace)> {
    config.validate()?;
    let n = objective.num_samples();
    let batch_size = config.batch_size.unwrap_or(n).min(n);
    let full_batch = batch_size == n;

    // resolve per-factor learning-rate scales once
    let scales: Vec<f64> = params0
        .xi
        .factors()
        .iter()
        .map(|f| {
            config
                .factor_lr_scale
                .iter()
                .find(|(name, _)| name == &f.name)
                .map(|(_, s)| *s)
                .unwrap_or(1.0)
        })
        .collect();

    let mut params = params0;
    let mut vel_psi = vec![0.0; params.psi.len()];
    let mut vel_xi = params.xi.clone();
    vel_xi.scale(0.0);

    let mut trace = Trace::default();
    let mut order: Vec<usize> = (0..n).collect();
    let mut best: Option<(f64, ModelParams)> = None;
    let mut stale_epochs = 0usize;

    for epoch in 0..config.epochs {
        let mut lr = config.learning_rate * schedule_lr(config.schedule, epoch, config.epochs);
        if epoch < config.warmup_epochs {
            lr *= config.warmup_scale;
        }

        if !full_batch {
            order.shuffle(&mut epoch_rng(config.seed, epoch as u64));
        }

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(batch_size) {
            let eval = objective.eval(&params, chunk)?;
            if !eval.value.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    value: eval.value,
                });
            }
            epoch_loss += eval.value;
            batches += 1;
            for ((v, g), p) in vel_psi
                .iter_mut()
                .zip(&eval.grad_psi)
                .zip(params.psi.iter_mut())
            {
                *v = config.momentum * *v + g;
                *p -= lr * *v;
            }
            for f in 0..params.xi.num_factors() {
                let g = eval.grad_xi.values(f);
                let step = lr * scales[f];
                for ((v, g), p) in vel_xi
                    .values_mut(f)
                    .iter_mut()
                    .zip(g)
                    .zip(params.xi.values_mut(f).iter_mut())
                {
                    // borrow juggling: vel entry first, then the parameter
                    *v = config.momentum * *v + g;
                    *p -= step * *v;
                }
            }
        }

        let beta = objective.reconstruct_beta(&params)?;
        let val_loss = objective.val_loss(&params)?;
        trace.records.push(TraceRecord {
            epoch,
            train_loss: epoch_loss / batches as f64,
            val_loss,
            beta_l1: linalg::norm_l1(&beta),
            nnz: beta.iter().filter(|b| b.abs() > 1e-6).count(),
            learning_rate: lr,
        });

        if let (Some(es), Some(v)) = (config.early_stopping, val_loss) {
            let improved = best.as_ref().map_or(true, |(bv, _)| v < *bv);
            if improved {
                best = Some((v, params.clone()));
                stale_epochs = 0;
            } else {
                stale_epochs += 1;
                if stale_epochs >= es.patience {
                    break;
                }
            }
        }
    }

    let final_params = match (config.early_stopping, best) {
        (Some(_), Some((_, snapshot))) => snapshot,
        _ => params,
    };
    Ok((final_params, trace))
}

/// Set entries with `|beta_i| <= tau` to exact zero.
pub fn threshold(beta: &[f64], tau: f64) -> Vec<f64> {
    beta.iter()
        .map(|&b| if b.abs() <= tau { 0.0 } else { b })
        .collect()
}

/// Group variant: zero out whole groups with `||beta_j||_2 <= tau`.
pub fn threshold_groups(beta: &[f64], partition: &GroupPartition, tau: f64) -> Vec<f64> {
    let mut out = beta.to_vec();
    for (_, r) in partition.iter_slices() {
        if linalg::norm(&beta[r.clone()]) <= tau {
            out[r].fill(0.0);
        }
    }
    out
}

/// Pick the cut-off from `taus` whose thresholded `beta` minimizes the given
/// validation loss, evaluating the thresholded vector directly (no refit).
/// Exact ties break toward the larger (sparser) cut-off. Returns the winning
/// `(tau, thresholded beta)`.
pub fn select_threshold(
    beta: &[f64],
    taus: &[f64],
    partition: Option<&GroupPartition>,
    val_loss: impl Fn(&[f64]) -> f64,
) -> Result<(f64, Vec<f64>)> {
    if taus.is_empty() {
        return Err(Error::invalid("threshold grid must be non-empty"));
    }
    let mut sorted = taus.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for &tau in &sorted {
        let candidate = match partition {
            Some(p) => threshold_groups(beta, p, tau),
            None => threshold(beta, tau),
        };
        let loss = val_loss(&candidate);
        let take = best.as_ref().map_or(true, |(bl, _, _)| loss <= *bl);
        if take {
            best = Some((loss, tau, candidate));
        }
    }
    let (_, tau, candidate) = best.unwrap();
    Ok((tau, candidate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::objectives::{Dataset, LinearModel, ObjEval, SurrogateObjective};
    use crate::param_maps::{forward, ParamKind};
    use rand::Rng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    /// `loss = (psi_0 - 3)^2`, no surrogate block.
    struct Quadratic {
        spec: ParamSpec,
    }

    impl Quadratic {
        fn new() -> Self {
            Quadratic {
                spec: ParamSpec::hpp(1),
            }
        }
    }

    impl Objective for Quadratic {
        fn param_spec(&self) -> &ParamSpec {
            &self.spec
        }

        fn num_samples(&self) -> usize {
            1
        }

        fn eval(&self, params: &ModelParams, _rows: &[usize]) -> crate::Result<ObjEval> {
            let d = params.psi[0] - 3.0;
            let mut grad_xi = params.xi.clone();
            grad_xi.scale(0.0);
            Ok(ObjEval {
                value: d * d,
                loss: d * d,
                grad_psi: vec![2.0 * d],
                grad_xi,
            })
        }

        fn val_loss(&self, _params: &ModelParams) -> crate::Result<Option<f64>> {
            Ok(None)
        }

        fn reconstruct_beta(&self, params: &ModelParams) -> crate::Result<Vec<f64>> {
            Ok(vec![params.psi[0]])
        }
    }

    fn toy_objective(data: &Dataset, lambda: f64) -> SurrogateObjective<'_, LinearModel> {
        SurrogateObjective::from_base_lambda(
            LinearModel { dim: 1 },
            data,
            ParamSpec::hpp(1),
            lambda,
        )
        .unwrap()
    }

    #[test]
    fn schedules() {
        assert_eq!(schedule_lr(Schedule::Cosine, 0, 100), 1.0);
        let last = schedule_lr(Schedule::Cosine, 100, 100);
        assert!(last.abs() < 1e-15);
        assert_eq!(schedule_lr(Schedule::InverseTime { rate: 1e-6 }, 0, 10), 1.0);
        assert_eq!(schedule_lr(Schedule::Constant, 7, 10), 1.0);
    }

    #[test]
    fn quadratic_contracts() {
        let obj = Quadratic::new();
        let params = ModelParams::new(vec![0.0], FactorSet::zeros(&obj.spec));
        let config = OptimConfig {
            learning_rate: 0.1,
            momentum: 0.0,
            schedule: Schedule::Constant,
            epochs: 200,
            ..OptimConfig::default()
        };
        let (fit, trace) = run(&obj, params, &config).unwrap();
        assert!((fit.psi[0] - 3.0).abs() <= 1e-6);
        assert_eq!(trace.records.len(), 200);
    }

    #[test]
    fn toy_landscape_reaches_scalar_lasso_solution() {
        // Q(u,v) = (1 - 1.5 u v)^2 + u^2 + v^2; minimizer maps to 2/9 with
        // Q = 8/9 (scalar soft-threshold stationarity)
        let data =
            Dataset::regression(Matrix::from_rows(1, 1, vec![1.5]).unwrap(), vec![1.0]).unwrap();
        let obj = toy_objective(&data, 2.0);
        let spec = ParamSpec::hpp(1);
        let xi = FactorSet::new(&spec, vec![vec![1.0], vec![1.0]]).unwrap();
        let config = OptimConfig {
            learning_rate: 0.05,
            momentum: 0.0,
            schedule: Schedule::Constant,
            epochs: 3000,
            ..OptimConfig::default()
        };
        let (fit, trace) = run(&obj, ModelParams::new(vec![], xi), &config).unwrap();
        let beta = obj.reconstruct_beta(&fit).unwrap();
        assert!((beta[0] - 2.0 / 9.0).abs() <= 1e-3, "beta {}", beta[0]);
        let q = trace.records.last().unwrap().train_loss;
        assert!((q - 8.0 / 9.0).abs() <= 1e-3, "Q {q}");
    }

    #[test]
    fn shared_depth_three_matches_identically_initialized_chain() {
        // u_2 = u_3 identically initialized HppK(k=3) vs HppKShared(k=3)
        // with the v learning rate scaled by 1/(k-1): identical beta iterates
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let d = 50;
        let n = 60;
        let mut x = Matrix::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                x[(i, j)] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        let y: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let data = Dataset::regression(x, y).unwrap();

        let spec_full = ParamSpec::hppk(d, 3).unwrap();
        let spec_shared = ParamSpec::hppk_shared(d, 3).unwrap();
        let lambda = 0.05;
        let obj_full = SurrogateObjective::from_base_lambda(
            LinearModel { dim: d },
            &data,
            spec_full.clone(),
            lambda,
        )
        .unwrap();
        let obj_shared = SurrogateObjective::from_base_lambda(
            LinearModel { dim: d },
            &data,
            spec_shared.clone(),
            lambda,
        )
        .unwrap();

        let u0: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v0: Vec<f64> = (0..d).map(|_| rng.gen_range(0.2..1.0)).collect();
        let xi_full =
            FactorSet::new(&spec_full, vec![u0.clone(), v0.clone(), v0.clone()]).unwrap();
        let xi_shared = FactorSet::new(&spec_shared, vec![u0, v0]).unwrap();

        let base = OptimConfig {
            learning_rate: 0.02,
            momentum: 0.0,
            schedule: Schedule::Constant,
            epochs: 200,
            ..OptimConfig::default()
        };
        let shared_cfg = OptimConfig {
            factor_lr_scale: vec![("v".to_string(), 0.5)],
            ..base.clone()
        };
        let (fit_full, tr_full) = run(&obj_full, ModelParams::new(vec![], xi_full), &base).unwrap();
        let (fit_shared, tr_shared) =
            run(&obj_shared, ModelParams::new(vec![], xi_shared), &shared_cfg).unwrap();

        let bf = obj_full.reconstruct_beta(&fit_full).unwrap();
        let bs = obj_shared.reconstruct_beta(&fit_shared).unwrap();
        for (a, b) in bf.iter().zip(&bs) {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
        // the whole trajectory agrees, not just the endpoint
        for (ra, rb) in tr_full.records.iter().zip(&tr_shared.records) {
            assert!((ra.beta_l1 - rb.beta_l1).abs() <= 1e-10);
        }
    }

    #[test]
    fn deterministic_traces() {
        let data = Dataset::regression(
            Matrix::from_rows(4, 1, vec![1.0, 2.0, -1.0, 0.5]).unwrap(),
            vec![1.0, 0.5, -0.25, 2.0],
        )
        .unwrap();
        let obj = toy_objective(&data, 0.3);
        let spec = ParamSpec::hpp(1);
        let config = OptimConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            schedule: Schedule::Cosine,
            epochs: 50,
            batch_size: Some(2),
            seed: 123,
            ..OptimConfig::default()
        };
        let xi = FactorSet::new(&spec, vec![vec![0.5], vec![0.5]]).unwrap();
        let (_, t1) = run(&obj, ModelParams::new(vec![], xi.clone()), &config).unwrap();
        let (_, t2) = run(&obj, ModelParams::new(vec![], xi), &config).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn balance_emerges_at_stationarity() {
        // full-batch HPP with lambda > 0: |u_i^2 - v_i^2| -> 0
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let n = 40;
        let d = 5;
        let mut x = Matrix::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                x[(i, j)] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        let betastar = [1.5, -0.8, 0.0, 0.0, 0.6];
        let y: Vec<f64> = (0..n)
            .map(|i| {
                linalg::dot(x.row(i), &betastar) + 0.05 * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let data = Dataset::regression(x, y).unwrap();
        let spec = ParamSpec::hpp(d);
        let obj = SurrogateObjective::from_base_lambda(
            LinearModel { dim: d },
            &data,
            spec.clone(),
            0.1,
        )
        .unwrap();
        let xi = init_surrogate(&spec, &vec![0.5; d], InitScheme::OnesTail, 0).unwrap();
        let config = OptimConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            schedule: Schedule::Cosine,
            epochs: 4000,
            ..OptimConfig::default()
        };
        let (fit, _) = run(&obj, ModelParams::new(vec![], xi), &config).unwrap();
        let beta = obj.reconstruct_beta(&fit).unwrap();
        let (u, v) = (fit.xi.values(0), fit.xi.values(1));
        for i in 0..d {
            let residual = (u[i] * u[i] - v[i] * v[i]).abs();
            assert!(
                residual <= 1e-4 * 1.0f64.max(beta[i].abs()),
                "imbalance {residual} at {i}"
            );
        }
    }

    #[test]
    fn zero_stays_zero_without_jitter() {
        // svf_balanced init without jitter: exact zeros are stationary under
        // full-batch GD; this is the documented motivation for the jitter.
        // The second coordinate's optimum is positive, matching the jitter
        // orthant (a sign-mismatched jitter decays back to zero instead).
        let data = Dataset::regression(
            Matrix::from_rows(2, 2, vec![1.0, 0.4, -0.3, 1.0]).unwrap(),
            vec![1.0, 2.0],
        )
        .unwrap();
        let spec = ParamSpec::hpp(2);
        let obj = toy_2d_objective(&data);
        let xi = init_surrogate(&spec, &[0.7, 0.0], InitScheme::SvfBalanced { jitter: None }, 0)
            .unwrap();
        let config = OptimConfig {
            learning_rate: 0.05,
            momentum: 0.0,
            schedule: Schedule::Constant,
            epochs: 500,
            ..OptimConfig::default()
        };
        let (fit, _) = run(&obj, ModelParams::new(vec![], xi), &config).unwrap();
        let beta = obj.reconstruct_beta(&fit).unwrap();
        assert_eq!(beta[1], 0.0);
        // jitter frees the entry
        let xi = init_surrogate(
            &spec,
            &[0.7, 0.0],
            InitScheme::SvfBalanced {
                jitter: Some(DEFAULT_INIT_JITTER),
            },
            0,
        )
        .unwrap();
        let (fit, _) = run(&obj, ModelParams::new(vec![], xi), &config).unwrap();
        let beta = obj.reconstruct_beta(&fit).unwrap();
        assert!(beta[1].abs() > 1e-6, "jittered entry stayed at {}", beta[1]);
    }

    fn toy_2d_objective(data: &Dataset) -> SurrogateObjective<'_, LinearModel> {
        SurrogateObjective::from_base_lambda(
            LinearModel { dim: 2 },
            data,
            ParamSpec::hpp(2),
            0.05,
        )
        .unwrap()
    }

    #[test]
    fn init_schemes_round_trip() {
        let spec = ParamSpec::hpp(2);
        let xi = init_surrogate(&spec, &[4.0, 0.0], InitScheme::SvfBalanced { jitter: None }, 0)
            .unwrap();
        assert_eq!(xi.values(0), &[2.0, 0.0]);
        assert_eq!(xi.values(1), &[2.0, 0.0]);

        let spec = ParamSpec::hppk(2, 3).unwrap();
        let xi = init_surrogate(&spec, &[5.0, -1.0], InitScheme::OnesTail, 0).unwrap();
        assert_eq!(xi.values(0), &[5.0, -1.0]);
        assert_eq!(xi.values(1), &[1.0, 1.0]);
        assert_eq!(xi.values(2), &[1.0, 1.0]);
        for scheme in [InitScheme::SvfBalanced { jitter: None }, InitScheme::OnesTail] {
            let xi = init_surrogate(&spec, &[5.0, -1.0], scheme, 0).unwrap();
            let beta = forward(&spec, &xi).unwrap();
            assert!((beta[0] - 5.0).abs() <= 1e-12);
            assert!((beta[1] + 1.0).abs() <= 1e-12);
        }
        // powerprop has no d-dimensional leading factor issue; ones-tail on a
        // single-factor kind is just the base vector itself
        let spec = ParamSpec::powerprop(2, 3.0).unwrap();
        let xi = init_surrogate(&spec, &[8.0, -1.0], InitScheme::OnesTail, 0).unwrap();
        assert_eq!(xi.values(0), &[8.0, -1.0]);
    }

    #[test]
    fn random_scaled_init_targets_product_scale() {
        let d = 10_000;
        let spec = ParamSpec::hppk(d, 3).unwrap();
        let xi = init_surrogate(
            &spec,
            &vec![0.0; d],
            InitScheme::RandomScaled { sigma: 0.5 },
            42,
        )
        .unwrap();
        let beta = forward(&spec, &xi).unwrap();
        let sd = (linalg::norm_sq(&beta) / d as f64).sqrt();
        assert!((sd - 0.5).abs() < 0.07, "product sd {sd}");
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(threshold(&[1e-8, 0.5], 1e-6), vec![0.0, 0.5]);
        assert_eq!(threshold(&[0.0, -0.1], 0.0), vec![0.0, -0.1]);
        let part = GroupPartition::new(vec![2]).unwrap();
        assert_eq!(
            threshold_groups(&[3e-7, 4e-7], &part, 1e-6),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn select_threshold_examples() {
        // noiseless recovery: every tau below the smallest signal is tied;
        // the largest such tau wins
        let beta = [1.0, 0.0, -2.0];
        let true_loss = |b: &[f64]| {
            b.iter()
                .zip(&beta)
                .map(|(x, t)| (x - t) * (x - t))
                .sum::<f64>()
        };
        let taus = [1e-8, 1e-6, 1e-4, 0.5, 3.0];
        let (tau, kept) = select_threshold(&beta, &taus, None, true_loss).unwrap();
        assert_eq!(tau, 0.5);
        assert_eq!(kept, vec![1.0, 0.0, -2.0]);

        let (tau, _) = select_threshold(&beta, &[0.3], None, true_loss).unwrap();
        assert_eq!(tau, 0.3);
        assert!(select_threshold(&beta, &[], None, true_loss).is_err());
    }

    #[test]
    fn select_threshold_recovers_planted_support() {
        // planted sparse signal, estimate = signal + small dense noise; the
        // winning cut-off must strip the noise without false positives.
        // verified against an independent exhaustive sweep of the grid.
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        let d = 30;
        let n_val = 200;
        let mut beta_star = vec![0.0; d];
        for b in beta_star.iter_mut().take(5) {
            *b = rng.gen_range(0.5..2.0);
        }
        let mut estimate = beta_star.clone();
        for e in estimate.iter_mut() {
            *e += 0.01 * rng.sample::<f64, _>(StandardNormal);
        }
        let mut x = Matrix::zeros(n_val, d);
        for i in 0..n_val {
            for j in 0..d {
                x[(i, j)] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        let y: Vec<f64> = (0..n_val)
            .map(|i| linalg::dot(x.row(i), &beta_star))
            .collect();
        let val_loss = |b: &[f64]| {
            let pred = x.matvec(b);
            pred.iter()
                .zip(&y)
                .map(|(p, t)| (p - t) * (p - t))
                .sum::<f64>()
                / n_val as f64
        };
        let taus: Vec<f64> = (0..20).map(|i| 10f64.powf(-6.0 + 6.0 * i as f64 / 19.0)).collect();
        let (tau_star, kept) = select_threshold(&estimate, &taus, None, val_loss).unwrap();

        // independent exhaustive oracle over the same grid
        let mut best = (f64::INFINITY, f64::NAN);
        for &tau in &taus {
            let cand = threshold(&estimate, tau);
            let loss = val_loss(&cand);
            if loss <= best.0 {
                best = (loss, tau);
            }
        }
        assert_eq!(tau_star, best.1);
        for (k, s) in kept.iter().zip(&beta_star) {
            assert_eq!(*k != 0.0, *s != 0.0, "support recovery with 0 false positives");
        }
    }

    #[test]
    fn config_validation() {
        let mut c = OptimConfig::default();
        c.momentum = 1.0;
        assert!(c.validate().is_err());
        c.momentum = 0.5;
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
        c.learning_rate = 0.1;
        c.early_stopping = Some(EarlyStopping { patience: 0 });
        assert!(c.validate().is_err());
    }

    #[test]
    fn early_stopping_restores_best() {
        // validation objective worsens when training keeps pushing past the
        // best point: use a huge lr late via inverse schedule... simpler:
        // track that the returned params correspond to the recorded minimum
        let data = Dataset::regression(
            Matrix::from_rows(4, 1, vec![1.0, 0.8, 1.2, 0.9]).unwrap(),
            vec![1.0, 0.9, 1.1, 1.0],
        )
        .unwrap();
        let val = Dataset::regression(
            Matrix::from_rows(2, 1, vec![1.0, 1.1]).unwrap(),
            vec![1.05, 1.0],
        )
        .unwrap();
        let spec = ParamSpec::hpp(1);
        let obj = SurrogateObjective::from_base_lambda(
            LinearModel { dim: 1 },
            &data,
            spec.clone(),
            0.0,
        )
        .unwrap()
        .with_val(&val);
        let xi = FactorSet::new(&spec, vec![vec![1.4], vec![1.4]]).unwrap();
        let config = OptimConfig {
            learning_rate: 0.3,
            momentum: 0.9,
            schedule: Schedule::Constant,
            epochs: 400,
            early_stopping: Some(EarlyStopping { patience: 20 }),
            ..OptimConfig::default()
        };
        let (fit, trace) = run(&obj, ModelParams::new(vec![], xi), &config).unwrap();
        let best_trace = trace
            .records
            .iter()
            .filter_map(|r| r.val_loss)
            .fold(f64::INFINITY, f64::min);
        let returned = obj.val_loss(&fit).unwrap().unwrap();
        assert!((returned - best_trace).abs() <= 1e-12);
        assert!(trace.records.len() < 400, "early stopping never triggered");
    }

    #[test]
    fn non_finite_loss_aborts() {
        let data = Dataset::regression(
            Matrix::from_rows(1, 1, vec![1.0]).unwrap(),
            vec![1.0],
        )
        .unwrap();
        let obj = toy_objective(&data, 0.0);
        let spec = ParamSpec::hpp(1);
        let xi = FactorSet::new(&spec, vec![vec![1e200], vec![1e200]]).unwrap();
        let config = OptimConfig {
            learning_rate: 10.0,
            momentum: 0.0,
            schedule: Schedule::Constant,
            epochs: 50,
            ..OptimConfig::default()
        };
        let err = run(&obj, ModelParams::new(vec![], xi), &config);
        assert!(matches!(err, Err(Error::NonFiniteLoss { .. })));
    }

    #[test]
    fn all_kinds_train_one_epoch() {
        // smoke test: every catalogue kind survives a few optimizer steps
        let part = GroupPartition::new(vec![2, 2]).unwrap();
        let data = Dataset::regression(
            Matrix::from_rows(3, 4, vec![1.0, 0.2, -0.4, 0.6, 0.1, 1.2, 0.3, -0.2, 0.5, -0.7, 0.8, 0.9])
                .unwrap(),
            vec![1.0, -0.5, 0.25],
        )
        .unwrap();
        for kind in ParamKind::ALL {
            let spec = match kind {
                ParamKind::Hpp => ParamSpec::hpp(4),
                ParamKind::Hdp => ParamSpec::hdp(4),
                ParamKind::Ghpp => ParamSpec::ghpp(part.clone()),
                ParamKind::AdjGhpp => ParamSpec::adj_ghpp(part.clone()),
                ParamKind::HppK => ParamSpec::hppk(4, 3).unwrap(),
                ParamKind::GhppK => ParamSpec::ghppk(part.clone(), 3).unwrap(),
                ParamKind::GhppK1K => ParamSpec::ghppk1k(part.clone(), 2, 1).unwrap(),
                ParamKind::HppKShared => ParamSpec::hppk_shared(4, 3).unwrap(),
                ParamKind::HdpK => ParamSpec::hdpk(4, 3).unwrap(),
                ParamKind::HdpKShared => ParamSpec::hdpk_shared(4, 3).unwrap(),
                ParamKind::HPowP => ParamSpec::hpowp(4, 2.5).unwrap(),
                ParamKind::PowerProp => ParamSpec::powerprop(4, 3.0).unwrap(),
                ParamKind::GhPowP => ParamSpec::ghpowp(part.clone(), 2.5).unwrap(),
                ParamKind::GhPowPK1K => ParamSpec::ghpowpk1k(part.clone(), 1.5, 1.0).unwrap(),
            };
            let obj = SurrogateObjective::from_base_lambda(
                LinearModel { dim: 4 },
                &data,
                spec.clone(),
                0.1,
            )
            .unwrap();
            let xi = init_surrogate(
                &spec,
                &[0.5, -0.25, 0.1, 0.3],
                InitScheme::SvfBalanced { jitter: Some(1e-4) },
                0,
            )
            .unwrap();
            let config = OptimConfig {
                learning_rate: 0.02,
                momentum: 0.9,
                schedule: Schedule::Cosine,
                epochs: 20,
                ..OptimConfig::default()
            };
            let res = run(&obj, ModelParams::new(vec![], xi), &config);
            assert!(res.is_ok(), "{kind}: {res:?}");
        }
    }
}
