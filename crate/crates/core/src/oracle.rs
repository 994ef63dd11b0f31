//! Independent non-smooth reference solvers and numeric verifiers.
//!
//! Everything in this module certifies the smooth-transfer machinery from the
//! outside: the augmented-Lagrangian fiber minimizer never touches the
//! closed-form solution maps, and the lasso / group-lasso / elastic-net
//! solvers work directly on the non-smooth objectives.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use crate::linalg::{self, Matrix};
use crate::param_maps::{
    forward, surrogate_penalty, surrogate_penalty_grad, vjp, FactorSet, ParamKind, ParamSpec,
};
use crate::spaces::{abs_pow, GroupPartition};
use crate::{Error, Result};

/// Result of a reference solver run.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub beta: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Result of the numeric fiber minimization.
#[derive(Debug, Clone, Copy)]
pub struct FiberMin {
    /// Best surrogate-penalty value found over the fiber.
    pub value: f64,
    /// Whether at least one restart reached feasibility and stationarity.
    pub converged: bool,
}

/// Soft-threshold operator `sign(z) * max(0, |z| - t)`.
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

/// Block soft-threshold `max(0, 1 - t / ||z||) z` (0 when `||z|| = 0`).
pub fn block_soft_threshold(z: &[f64], t: f64) -> Vec<f64> {
    let n = linalg::norm(z);
    if n == 0.0 {
        return vec![0.0; z.len()];
    }
    let scale = (1.0 - t / n).max(0.0);
    z.iter().map(|&v| scale * v).collect()
}

/// Null-solution threshold of the lasso objective `(1/n)||y - Xb||^2 +
/// lambda ||b||_1`: the smallest `lambda` at which `b = 0` is optimal.
pub fn lasso_lambda_max(x: &Matrix, y: &[f64]) -> f64 {
    let n = x.rows() as f64;
    let g = x.t_matvec(y);
    g.iter().fold(0.0, |m, v| m.max((2.0 * v / n).abs()))
}

fn lasso_objective(x: &Matrix, y: &[f64], lambda: f64, beta: &[f64]) -> f64 {
    let r: Vec<f64> = x
        .matvec(beta)
        .iter()
        .zip(y)
        .map(|(p, yi)| yi - p)
        .collect();
    linalg::norm_sq(&r) / x.rows() as f64 + lambda * linalg::norm_l1(beta)
}

/// Cyclic coordinate descent for `(1/n)||y - Xb||^2 + lambda ||b||_1` with
/// exact per-coordinate soft-threshold updates.
pub fn cd_lasso(x: &Matrix, y: &[f64], lambda: f64, tol: f64) -> Result<OracleResult> {
    cd_elastic_net(x, y, lambda, 0.0, tol, 100_000)
}

/// [`cd_lasso`] with an explicit sweep budget (used by tests that check the
/// per-sweep descent property).
pub fn cd_lasso_opts(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<OracleResult> {
    cd_elastic_net(x, y, lambda, 0.0, tol, max_sweeps)
}

/// Coordinate descent for the elastic net
/// `(1/n)||y - Xb||^2 + lambda (1-alpha) ||b||_1 + lambda alpha ||b||_2^2`.
///
/// The ridge term is folded into the per-coordinate quadratic coefficient;
/// `alpha = 0` recovers the lasso. Zero-variance columns are skipped.
pub fn prox_elastic_net(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    alpha: f64,
    tol: f64,
) -> Result<OracleResult> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must be in [0, 1], got {alpha}")));
    }
    cd_elastic_net(x, y, lambda, alpha, tol, 100_000)
}

fn cd_elastic_net(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    alpha: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<OracleResult> {
    let (n, d) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::shape(format!("y has length {}, X has {n} rows", y.len())));
    }
    if lambda < 0.0 {
        return Err(Error::invalid("lambda must be non-negative"));
    }
    let inv_n = 2.0 / n as f64;
    // column-major copy for the coordinate sweeps
    let cols: Vec<Vec<f64>> = (0..d)
        .map(|j| (0..n).map(|i| x[(i, j)]).collect())
        .collect();
    let quad: Vec<f64> = cols
        .iter()
        .map(|c| inv_n * linalg::norm_sq(c) + 2.0 * lambda * alpha)
        .collect();
    let l1 = lambda * (1.0 - alpha);

    let mut beta = vec![0.0; d];
    let mut residual = y.to_vec();
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for j in 0..d {
            if quad[j] == 0.0 {
                continue;
            }
            let old = beta[j];
            let z = inv_n * linalg::dot(&cols[j], &residual) + (inv_n * linalg::norm_sq(&cols[j])) * old;
            let new = soft_threshold(z, l1) / quad[j];
            if new != old {
                linalg::axpy(old - new, &cols[j], &mut residual);
                beta[j] = new;
            }
            max_change = max_change.max((new - old).abs());
        }
        if max_change <= tol {
            converged = true;
            break;
        }
    }
    let objective = linalg::norm_sq(&residual) / n as f64
        + l1 * linalg::norm_l1(&beta)
        + lambda * alpha * linalg::norm_sq(&beta);
    Ok(OracleResult {
        beta,
        objective,
        iterations: sweeps,
        converged,
    })
}

/// Largest eigenvalue of `(2/n) X^T X` by power iteration (20 rounds).
fn lipschitz_estimate(x: &Matrix, rng: &mut impl Rng) -> f64 {
    let d = x.cols();
    let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut lam = 1.0;
    for _ in 0..20 {
        let w = x.t_matvec(&x.matvec(&v));
        lam = linalg::norm(&w);
        if lam == 0.0 {
            return 2.0 / x.rows() as f64;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / lam;
        }
    }
    2.0 * lam / x.rows() as f64
}

/// ISTA with block soft-threshold prox for the group lasso
/// `(1/n)||y - Xb||^2 + lambda sum_j w_j ||b_j||_2`.
///
/// Step size is `0.95 / L` with `L` from a 20-round power iteration.
pub fn prox_group_lasso(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    partition: &GroupPartition,
    weights: &[f64],
    tol: f64,
) -> Result<OracleResult> {
    let (n, d) = (x.rows(), x.cols());
    if y.len() != n || partition.dim() != d {
        return Err(Error::shape("group lasso inputs do not conform".to_string()));
    }
    if weights.len() != partition.num_groups() {
        return Err(Error::shape("one weight per group required".to_string()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(0x9e3779b97f4a7c15);
    let step = 0.95 / lipschitz_estimate(x, &mut rng);
    let inv_n = 2.0 / n as f64;

    let mut beta = vec![0.0; d];
    let max_iter = 200_000;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let residual: Vec<f64> = x
            .matvec(&beta)
            .iter()
            .zip(y)
            .map(|(p, yi)| yi - p)
            .collect();
        let grad = x.t_matvec(&residual);
        let z: Vec<f64> = beta
            .iter()
            .zip(&grad)
            .map(|(b, g)| b + step * inv_n * g)
            .collect();
        let mut next = vec![0.0; d];
        for (j, r) in partition.iter_slices() {
            let prox = block_soft_threshold(&z[r.clone()], step * lambda * weights[j]);
            next[r].copy_from_slice(&prox);
        }
        let change = beta
            .iter()
            .zip(&next)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        beta = next;
        if change <= tol {
            converged = true;
            break;
        }
    }
    let residual: Vec<f64> = x
        .matvec(&beta)
        .iter()
        .zip(y)
        .map(|(p, yi)| yi - p)
        .collect();
    let mut objective = linalg::norm_sq(&residual) / n as f64;
    for (j, r) in partition.iter_slices() {
        objective += lambda * weights[j] * linalg::norm(&beta[r]);
    }
    Ok(OracleResult {
        beta,
        objective,
        iterations,
        converged,
    })
}

/// Configuration for [`subgradient_gd_lasso`].
#[derive(Debug, Clone)]
pub struct SubGdConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub momentum: f64,
    /// Cosine-decay the learning rate over the run when true.
    pub cosine: bool,
}

impl Default for SubGdConfig {
    fn default() -> Self {
        SubGdConfig {
            learning_rate: 0.18,
            epochs: 3000,
            momentum: 0.9,
            // constant rate: with an annealed step this would turn into a
            // diminishing-step subgradient method that slowly parks dead
            // coordinates near 0 instead of oscillating around it
            cosine: false,
        }
    }
}

/// Direct full-batch (sub)gradient descent on the non-smooth lasso objective,
/// with the subgradient of `|.|` assigned 0 at 0.
///
/// This is the failure-mode demonstrator: it does not reach exact zeros and
/// must never be used as a correctness oracle.
pub fn subgradient_gd_lasso(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    config: &SubGdConfig,
) -> Result<OracleResult> {
    let (n, d) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::shape("y does not match X".to_string()));
    }
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
        let residual: Vec<f64> = x
            .matvec(&beta)
            .iter()
            .zip(y)
            .map(|(p, yi)| yi - p)
            .collect();
        let grad_smooth = x.t_matvec(&residual);
        for j in 0..d {
            let sub = if beta[j] > 0.0 {
                1.0
            } else if beta[j] < 0.0 {
                -1.0
            } else {
                0.0
            };
            let g = -inv_n * grad_smooth[j] + lambda * sub;
            velocity[j] = config.momentum * velocity[j] + g;
            beta[j] -= lr * velocity[j];
        }
    }
    let objective = lasso_objective(x, y, lambda, &beta);
    Ok(OracleResult {
        beta,
        objective,
        iterations: config.epochs,
        converged: true,
    })
}

/// Central finite-difference check of an analytic gradient.
///
/// Returns the maximum over coordinates of
/// `|fd_i - analytic_i| / max(1, |analytic_i|)`; errors on non-finite values.
pub fn fd_gradient_check(
    f: &dyn Fn(&[f64]) -> f64,
    analytic: &[f64],
    x: &[f64],
    step: f64,
) -> Result<f64> {
    if step <= 0.0 {
        return Err(Error::invalid("step must be positive"));
    }
    if analytic.len() != x.len() {
        return Err(Error::shape("gradient and point lengths differ".to_string()));
    }
    let mut worst = 0.0f64;
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + step;
        let fp = f(&xp);
        xp[i] = x[i] - step;
        let fm = f(&xp);
        xp[i] = x[i];
        let fd = (fp - fm) / (2.0 * step);
        if !fd.is_finite() || !analytic[i].is_finite() {
            return Err(Error::invalid(format!(
                "non-finite value in gradient check at coordinate {i}"
            )));
        }
        worst = worst.max((fd - analytic[i]).abs() / analytic[i].abs().max(1.0));
    }
    Ok(worst)
}

/// Rescale exactly one factor (per product chain) of `xi` so that
/// `K(xi) = beta` holds, when that is algebraically possible.
///
/// Used for feasible restarts of the fiber minimizer and to generate random
/// fiber points in tests. Returns `None` when a division by an exactly-zero
/// co-factor would be required for a non-zero target entry.
pub fn rescale_to_fiber(spec: &ParamSpec, xi: &FactorSet, beta: &[f64]) -> Option<FactorSet> {
    let mut out = xi.clone();
    let part = spec.partition().clone();
    let d = spec.dim();
    debug_assert_eq!(beta.len(), d);

    // solve `first * rest = target` entry-wise
    let solve_scale = |target: f64, rest: f64| -> Option<f64> {
        if rest != 0.0 {
            Some(target / rest)
        } else if target == 0.0 {
            Some(0.0)
        } else {
            None
        }
    };

    match spec.kind() {
        ParamKind::Hpp => {
            for i in 0..d {
                let s = solve_scale(beta[i], xi.values(1)[i])?;
                out.values_mut(0)[i] = s;
            }
        }
        ParamKind::Ghpp | ParamKind::AdjGhpp => {
            for (j, r) in part.iter_slices() {
                for i in r {
                    let s = solve_scale(beta[i], xi.values(1)[j])?;
                    out.values_mut(0)[i] = s;
                }
            }
        }
        ParamKind::HppK => {
            let k = spec.k() as usize;
            for i in 0..d {
                let mut rest = 1.0;
                for l in 1..k {
                    rest *= xi.values(l)[i];
                }
                out.values_mut(0)[i] = solve_scale(beta[i], rest)?;
            }
        }
        ParamKind::GhppK => {
            let k = spec.k() as usize;
            for (j, r) in part.iter_slices() {
                let mut rest = 1.0;
                for fac in 1..k {
                    rest *= xi.values(fac)[j];
                }
                for i in r {
                    out.values_mut(0)[i] = solve_scale(beta[i], rest)?;
                }
            }
        }
        ParamKind::GhppK1K => {
            let (k1, k2) = (spec.k1() as usize, spec.k2() as usize);
            for (j, r) in part.iter_slices() {
                let mut scale = 1.0;
                for fac in 0..k2 {
                    scale *= xi.values(k1 + fac)[j];
                }
                for i in r {
                    let mut rest = scale;
                    for t in 1..k1 {
                        rest *= xi.values(t)[i];
                    }
                    out.values_mut(0)[i] = solve_scale(beta[i], rest)?;
                }
            }
        }
        ParamKind::HppKShared => {
            let e = spec.k() as i32 - 1;
            for i in 0..d {
                out.values_mut(0)[i] = solve_scale(beta[i], xi.values(1)[i].powi(e))?;
            }
        }
        ParamKind::HPowP => {
            let e = spec.k() - 1.0;
            for i in 0..d {
                out.values_mut(0)[i] = solve_scale(beta[i], abs_pow(xi.values(1)[i], e))?;
            }
        }
        ParamKind::PowerProp => {
            for i in 0..d {
                out.values_mut(0)[i] = beta[i].signum() * abs_pow(beta[i], 1.0 / spec.k());
            }
        }
        ParamKind::GhPowP => {
            let e = spec.k() - 1.0;
            for (j, r) in part.iter_slices() {
                let scale = abs_pow(xi.values(1)[j], e);
                for i in r {
                    out.values_mut(0)[i] = solve_scale(beta[i], scale)?;
                }
            }
        }
        ParamKind::GhPowPK1K => {
            let (k1, k2) = (spec.k1(), spec.k2());
            for (j, r) in part.iter_slices() {
                let scale = abs_pow(xi.values(1)[j], k2);
                for i in r {
                    let t = solve_scale(beta[i], scale)?;
                    out.values_mut(0)[i] = t.signum() * abs_pow(t, 1.0 / k1);
                }
            }
        }
        ParamKind::Hdp => {
            for i in 0..d {
                let t = beta[i] + xi.values(1)[i] * xi.values(1)[i];
                if t >= 0.0 {
                    out.values_mut(0)[i] = t.sqrt();
                } else {
                    // adjust delta instead; gamma^2 - beta >= 0 here
                    let g = xi.values(0)[i];
                    out.values_mut(1)[i] = (g * g - beta[i]).sqrt();
                }
            }
        }
        ParamKind::HdpK => {
            let k = spec.k() as usize;
            for i in 0..d {
                let mut vp = 1.0;
                for l in 0..k {
                    vp *= xi.values(k + l)[i];
                }
                let target = beta[i] + vp;
                let mut rest = 1.0;
                for l in 1..k {
                    rest *= xi.values(l)[i];
                }
                out.values_mut(0)[i] = solve_scale(target, rest)?;
            }
        }
        ParamKind::HdpKShared => {
            let k = spec.k();
            let e = spec.k() as i32;
            for i in 0..d {
                let t = beta[i] + xi.values(1)[i].powi(e);
                if e % 2 == 1 {
                    out.values_mut(0)[i] = t.signum() * abs_pow(t, 1.0 / k);
                } else if t >= 0.0 {
                    out.values_mut(0)[i] = abs_pow(t, 1.0 / k);
                } else {
                    // move the v side; u^k - beta >= 0 since beta < -v^k <= 0
                    let u = xi.values(0)[i];
                    out.values_mut(1)[i] = abs_pow(u.powi(e) - beta[i], 1.0 / k);
                }
            }
        }
    }
    Some(out)
}

/// A random exactly-feasible point of the fiber `K^{-1}(beta)`, built by
/// sampling all factors i.i.d. normal and rescaling one factor per chain.
pub fn random_fiber_point(
    spec: &ParamSpec,
    beta: &[f64],
    scale: f64,
    rng: &mut impl Rng,
) -> Option<FactorSet> {
    let mut xi = FactorSet::zeros(spec);
    for f in 0..xi.num_factors() {
        for v in xi.values_mut(f) {
            *v = scale * rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
    }
    rescale_to_fiber(spec, &xi, beta)
}

/// Minimize the surrogate penalty over the fiber `{xi : K(xi) = beta}` by an
/// augmented-Lagrangian method from several random feasible-neighborhood
/// starts, without using the closed-form solution map or induced regularizer.
///
/// The parametrization maps are block-separable, so the minimization
/// decomposes into one independent subproblem per group (per entry for the
/// ungrouped kinds); block values add up. Each block runs `restarts`
/// restarts with its own penalty scaling: the zero-product structure makes
/// the collapsed origin a spurious local minimum of the augmented Lagrangian
/// whose basin grows as entries shrink, so the initial penalty parameter is
/// chosen large relative to the block's smallest non-zero entry.
///
/// Desk scale only (`d <= 8`); `restarts >= 8` recommended (enforced lower
/// bound of 1). Non-convergence returns the best found value with
/// `converged = false`.
pub fn svf_numeric_min(
    spec: &ParamSpec,
    beta: &[f64],
    restarts: usize,
    seed: u64,
) -> Result<FiberMin> {
    if beta.len() != spec.dim() {
        return Err(Error::shape("beta does not match spec dimension".to_string()));
    }
    if spec.dim() > 8 {
        return Err(Error::invalid("fiber minimization is desk scale (d <= 8)"));
    }
    let restarts = restarts.max(1);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut total = 0.0;
    let mut all_converged = true;

    for (_, range) in spec.partition().iter_slices() {
        let block_beta = &beta[range.clone()];
        let block_spec = ParamSpec::new(
            spec.kind(),
            spec.k(),
            if spec.kind().is_mixed() {
                Some(spec.k1())
            } else {
                None
            },
            block_partition(spec, range.len()),
        )?;
        let block = minimize_block(&block_spec, block_beta, restarts, &mut rng)?;
        match block {
            Some((value, block_converged)) => {
                total += value;
                all_converged &= block_converged;
            }
            None => {
                return Ok(FiberMin {
                    value: f64::INFINITY,
                    converged: false,
                });
            }
        }
    }
    Ok(FiberMin {
        value: total,
        converged: all_converged,
    })
}

/// Partition for a single extracted block: one group for the grouped kinds,
/// the trivial partition otherwise (block size is 1 there).
fn block_partition(spec: &ParamSpec, block_len: usize) -> GroupPartition {
    if spec.kind().is_grouped() {
        GroupPartition::new(vec![block_len]).expect("non-empty block")
    } else {
        GroupPartition::trivial(block_len)
    }
}

/// Best feasible surrogate-penalty value over one block's fiber (with a flag
/// for whether any restart fully met the solver targets), or `None` when no
/// restart produced a feasible point.
fn minimize_block(
    spec: &ParamSpec,
    beta: &[f64],
    restarts: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Option<(f64, bool)>> {
    // Initial penalty parameter. The collapsed origin is a spurious local
    // minimum of the augmented Lagrangian whenever rho < ~2k |b|^{2/k - 2}
    // for the smallest non-zero entry; scaling rho0 like |b|^{2/k - 2} also
    // keeps the across-fiber curvature at the solution scale-free.
    let min_nonzero = beta
        .iter()
        .filter(|b| **b != 0.0)
        .map(|b| b.abs())
        .fold(f64::INFINITY, f64::min);
    let rho0 = if min_nonzero.is_finite() {
        let k = spec.k();
        (50.0 * k * abs_pow(min_nonzero, 2.0 / k - 2.0)).clamp(10.0, 1e12)
    } else {
        10.0
    };

    let mut best: Option<f64> = None;
    let mut any_converged = false;
    for restart in 0..restarts {
        let scale = [0.4, 0.8, 1.2, 2.0][restart % 4];
        let start = match random_fiber_point(spec, beta, scale, rng) {
            Some(xi) => xi,
            None => {
                // pure penalty start: random infeasible point
                let mut xi = FactorSet::zeros(spec);
                for f in 0..xi.num_factors() {
                    for v in xi.values_mut(f) {
                        *v = scale * rng.sample::<f64, _>(rand_distr::StandardNormal);
                    }
                }
                xi
            }
        };
        let outcome = augmented_lagrangian(spec, beta, start, rho0)?;
        if let Some(value) = outcome.best_feasible_value {
            any_converged |= outcome.converged;
            if best.map_or(true, |b| value < b) {
                best = Some(value);
            }
        }
    }
    Ok(best.map(|value| (value, any_converged)))
}

fn fiber_violation(spec: &ParamSpec, xi: &FactorSet, beta: &[f64]) -> Result<f64> {
    let k = forward(spec, xi)?;
    Ok(k.iter()
        .zip(beta)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
}

struct AlOutcome {
    /// Smallest surrogate penalty seen at an exactly-feasible polish of any
    /// outer iterate (each one is a valid upper bound on the fiber minimum).
    best_feasible_value: Option<f64>,
    converged: bool,
}

/// One augmented-Lagrangian solve with the classic safeguarded update rule:
/// multipliers move only when the violation target is met, otherwise the
/// penalty parameter is boosted and the target reset.
fn augmented_lagrangian(
    spec: &ParamSpec,
    beta: &[f64],
    start: FactorSet,
    rho0: f64,
) -> Result<AlOutcome> {
    let d = spec.dim();
    let scale = 1.0 + linalg::norm_inf(beta);
    let constraint_tol = 1e-10 * scale;
    let mut xi = start;
    let mut multipliers = vec![0.0; d];
    let mut rho = rho0;
    let mut eta = 1.0 / rho.powf(0.1);
    let mut omega = (1.0 / rho).max(1e-6);
    let mut best_feasible_value = None;
    let mut converged = false;

    for _outer in 0..100 {
        inner_descent(spec, beta, &mut xi, &multipliers, rho, omega.max(1e-12))?;

        // record the exactly-feasible polish of this iterate
        if let Some(polished) = rescale_to_fiber(spec, &xi, beta) {
            if fiber_violation(spec, &polished, beta)? <= 1e-8 * scale {
                let value = surrogate_penalty(spec, &polished)?;
                if value.is_finite()
                    && best_feasible_value.map_or(true, |best: f64| value < best)
                {
                    best_feasible_value = Some(value);
                }
            }
        }

        let constraint: Vec<f64> = forward(spec, &xi)?
            .iter()
            .zip(beta)
            .map(|(k, b)| k - b)
            .collect();
        let violation = linalg::norm_inf(&constraint);
        if violation <= constraint_tol && omega <= 1e-9 {
            converged = true;
            break;
        }
        if violation <= eta * scale {
            // first-order multiplier update, tighten both targets
            for (m, c) in multipliers.iter_mut().zip(&constraint) {
                *m += rho * c;
            }
            eta /= rho.powf(0.9);
            omega /= rho;
        } else {
            // keep multipliers, boost the penalty
            rho = (rho * 10.0).min(1e14);
            eta = 1.0 / rho.powf(0.1);
            omega = 1.0 / rho;
        }
    }
    Ok(AlOutcome {
        best_feasible_value,
        converged,
    })
}

/// Barzilai-Borwein spectral gradient descent with a nonmonotone (watchdog)
/// line search on the augmented Lagrangian. Plain steepest descent is far
/// too slow here: the penalty term makes the across-fiber curvature orders
/// of magnitude stiffer than the along-fiber direction.
fn inner_descent(
    spec: &ParamSpec,
    beta: &[f64],
    xi: &mut FactorSet,
    multipliers: &[f64],
    rho: f64,
    tol: f64,
) -> Result<()> {
    let eval = |point: &FactorSet| -> Result<(f64, FactorSet)> {
        let k = forward(spec, point)?;
        let constraint: Vec<f64> = k.iter().zip(beta).map(|(a, b)| a - b).collect();
        let mut value = surrogate_penalty(spec, point)?;
        let mut cotangent = vec![0.0; beta.len()];
        for i in 0..beta.len() {
            value += multipliers[i] * constraint[i] + 0.5 * rho * constraint[i] * constraint[i];
            cotangent[i] = multipliers[i] + rho * constraint[i];
        }
        let mut grad = vjp(spec, point, &cotangent)?;
        let pen_grad = surrogate_penalty_grad(spec, point)?;
        for f in 0..grad.num_factors() {
            let pg = pen_grad.values(f).to_vec();
            for (g, p) in grad.values_mut(f).iter_mut().zip(pg) {
                *g += p;
            }
        }
        Ok((value, grad))
    };

    let (mut value, mut grad_set) = eval(xi)?;
    let mut x = xi.to_flat();
    let mut grad = grad_set.to_flat();
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    // reference values for the nonmonotone acceptance test
    let mut recent = [value; 8];
    let mut recent_idx = 0;

    for _ in 0..1500 {
        let gnorm = linalg::norm_inf(&grad);
        if gnorm <= tol {
            break;
        }
        let mut step = match &prev {
            Some((px, pg)) => {
                let mut sty = 0.0;
                let mut sts = 0.0;
                for i in 0..x.len() {
                    let s = x[i] - px[i];
                    let y = grad[i] - pg[i];
                    sty += s * y;
                    sts += s * s;
                }
                if sty > 0.0 && sts > 0.0 {
                    (sts / sty).clamp(1e-16, 1e8)
                } else {
                    1.0 / (1.0 + rho)
                }
            }
            None => 1.0 / (1.0 + rho),
        };
        let gsq = linalg::norm_sq(&grad);
        let reference = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut accepted = false;
        for _ in 0..60 {
            let candidate: Vec<f64> = x.iter().zip(&grad).map(|(xv, g)| xv - step * g).collect();
            let mut trial = xi.clone();
            trial.assign_flat(&candidate)?;
            let (trial_value, trial_grad) = eval(&trial)?;
            if trial_value.is_finite() && trial_value <= reference - 1e-4 * step * gsq {
                prev = Some((x, grad));
                *xi = trial;
                x = candidate;
                grad_set = trial_grad;
                grad = grad_set.to_flat();
                value = trial_value;
                recent[recent_idx] = value;
                recent_idx = (recent_idx + 1) % recent.len();
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(())
}

/// Certify the closed-form induced regularizer of `spec` against the numeric
/// fiber minimum on one `beta`; returns the relative error.
pub fn svf_certificate_error(
    spec: &ParamSpec,
    beta: &[f64],
    restarts: usize,
    seed: u64,
) -> Result<f64> {
    let numeric = svf_numeric_min(spec, beta, restarts, seed)?;
    let (_, closed) = spec.induced_reg(beta)?;
    Ok((numeric.value - closed).abs() / closed.abs().max(1.0))
}
