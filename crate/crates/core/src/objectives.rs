//! Base objectives `P(psi, beta) = L + lambda R(beta)` and their smooth
//! surrogates `Q(psi, xi) = L(psi, K(xi)) + lambda_xi R_xi(xi)`, with
//! analytic gradients, over linear models and a minimal feedforward network.
//!
//! The loss reduction is the MEAN over samples. The surrogate penalty weight
//! is *not* rescaled by batch size, so mini-batch gradients are unbiased
//! estimates of the full-batch gradient of the same `Q`. A user-facing
//! `lambda` on the normalized base regularizer translates to
//! `lambda_xi = lambda / table_constant` (see
//! [`ParamSpec::surrogate_lambda`]).

use crate::linalg::{self, Matrix};
use crate::param_maps::{
    forward, surrogate_penalty, surrogate_penalty_grad, vjp, FactorSet, ParamSpec,
};
use crate::spaces::RegSpec;
use crate::{Error, Result};

/// Loss family of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// `(1/n) ||y - yhat||^2`.
    SquaredError,
    /// Mean softmax cross-entropy.
    CrossEntropy,
}

/// Training targets: regression values or class labels.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Values(Vec<f64>),
    Labels(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Values(v) => v.len(),
            Targets::Labels(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A design matrix paired with its targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub targets: Targets,
}

impl Dataset {
    pub fn regression(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() || x.rows() == 0 {
            return Err(Error::shape(format!(
                "{} rows of X vs {} targets",
                x.rows(),
                y.len()
            )));
        }
        Ok(Dataset {
            x,
            targets: Targets::Values(y),
        })
    }

    pub fn classification(x: Matrix, labels: Vec<usize>) -> Result<Self> {
        if x.rows() != labels.len() || x.rows() == 0 {
            return Err(Error::shape(format!(
                "{} rows of X vs {} labels",
                x.rows(),
                labels.len()
            )));
        }
        Ok(Dataset {
            x,
            targets: Targets::Labels(labels),
        })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> Result<&[f64]> {
        match &self.targets {
            Targets::Values(v) => Ok(v),
            Targets::Labels(_) => Err(Error::invalid("dataset holds labels, not values")),
        }
    }

    pub fn labels(&self) -> Result<&[usize]> {
        match &self.targets {
            Targets::Labels(l) => Ok(l),
            Targets::Values(_) => Err(Error::invalid("dataset holds values, not labels")),
        }
    }
}

/// Model parameters: the unregularized part `psi` and the overparametrized,
/// regularized block `xi` with `beta = K(xi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub psi: Vec<f64>,
    pub xi: FactorSet,
}

impl ModelParams {
    pub fn new(psi: Vec<f64>, xi: FactorSet) -> Self {
        ModelParams { psi, xi }
    }
}

/// Value and gradients of an objective on a batch.
#[derive(Debug, Clone)]
pub struct ObjEval {
    /// Full objective value (loss plus penalties).
    pub value: f64,
    /// Loss part alone.
    pub loss: f64,
    pub grad_psi: Vec<f64>,
    pub grad_xi: FactorSet,
}

/// A differentiable model `f(x | psi, beta)` with a mean-reduced loss.
pub trait Model {
    fn loss_kind(&self) -> LossKind;
    fn beta_dim(&self) -> usize;
    fn psi_dim(&self) -> usize;

    /// Mean loss over the given rows.
    fn loss(&self, data: &Dataset, rows: &[usize], psi: &[f64], beta: &[f64]) -> Result<f64>;

    /// Mean loss and its gradients with respect to `psi` and `beta`.
    fn loss_grad(
        &self,
        data: &Dataset,
        rows: &[usize],
        psi: &[f64],
        beta: &[f64],
    ) -> Result<(f64, Vec<f64>, Vec<f64>)>;

    /// Model output for one input row (predictions of the collapsed model).
    fn predict(&self, input: &[f64], psi: &[f64], beta: &[f64]) -> Result<Vec<f64>>;
}

/// `yhat = x^T beta` with squared-error loss and no `psi`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub dim: usize,
}

impl Model for LinearModel {
    fn loss_kind(&self) -> LossKind {
        LossKind::SquaredError
    }

    fn beta_dim(&self) -> usize {
        self.dim
    }

    fn psi_dim(&self) -> usize {
        0
    }

    fn loss(&self, data: &Dataset, rows: &[usize], _psi: &[f64], beta: &[f64]) -> Result<f64> {
        let y = data.values()?;
        if beta.len() != data.x.cols() {
            return Err(Error::shape("beta does not match design matrix".to_string()));
        }
        let pred = data.x.matvec_rows(rows, beta);
        let sq: f64 = rows
            .iter()
            .zip(&pred)
            .map(|(&i, p)| (y[i] - p) * (y[i] - p))
            .sum();
        Ok(sq / rows.len() as f64)
    }

    fn loss_grad(
        &self,
        data: &Dataset,
        rows: &[usize],
        _psi: &[f64],
        beta: &[f64],
    ) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let y = data.values()?;
        if beta.len() != data.x.cols() {
            return Err(Error::shape("beta does not match design matrix".to_string()));
        }
        let n = rows.len() as f64;
        let pred = data.x.matvec_rows(rows, beta);
        let residual: Vec<f64> = rows.iter().zip(&pred).map(|(&i, p)| y[i] - p).collect();
        let loss = linalg::norm_sq(&residual) / n;
        let mut grad = data.x.t_matvec_rows(rows, &residual);
        for g in &mut grad {
            *g *= -2.0 / n;
        }
        Ok((loss, Vec::new(), grad))
    }

    fn predict(&self, input: &[f64], _psi: &[f64], beta: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![linalg::dot(input, beta)])
    }
}

/// Base objective `P = L(psi, beta) + lambda * R(beta)`.
pub fn base_objective(
    model: &dyn Model,
    data: &Dataset,
    beta: &[f64],
    psi: &[f64],
    reg: &RegSpec,
) -> Result<f64> {
    let rows: Vec<usize> = (0..data.len()).collect();
    let loss = model.loss(data, &rows, psi, beta)?;
    Ok(loss + reg.lambda * reg.eval(beta)?)
}

/// Reconstruct `beta = K(xi)` from trained parameters. The collapsed model
/// uses this `beta` directly and computes identical predictions.
pub fn reconstruct(spec: &ParamSpec, params: &ModelParams) -> Result<Vec<f64>> {
    forward(spec, &params.xi)
}

/// An objective the optimizer can run on: evaluate on a row batch, report
/// validation loss, and reconstruct `beta`.
pub trait Objective {
    fn param_spec(&self) -> &ParamSpec;
    fn num_samples(&self) -> usize;
    fn eval(&self, params: &ModelParams, rows: &[usize]) -> Result<ObjEval>;
    /// Unpenalized loss on the validation split, if one is attached.
    fn val_loss(&self, params: &ModelParams) -> Result<Option<f64>>;
    fn reconstruct_beta(&self, params: &ModelParams) -> Result<Vec<f64>> {
        forward(self.param_spec(), &params.xi)
    }
}

/// The smooth surrogate `Q(psi, xi) = L(psi, K(xi)) + lambda_xi R_xi(xi)`,
/// optionally with plain weight decay on `psi`.
pub struct SurrogateObjective<'a, M: Model> {
    pub model: M,
    pub data: &'a Dataset,
    pub val: Option<&'a Dataset>,
    pub spec: ParamSpec,
    /// Weight on the surrogate penalty `R_xi` (not rescaled by batch size).
    pub lambda_xi: f64,
    /// Optional weight decay `psi_decay * ||psi||^2`, off by default.
    pub psi_decay: f64,
}

impl<'a, M: Model> SurrogateObjective<'a, M> {
    pub fn new(model: M, data: &'a Dataset, spec: ParamSpec, lambda_xi: f64) -> Result<Self> {
        if model.beta_dim() != spec.dim() {
            return Err(Error::shape(format!(
                "model expects beta of length {}, parametrization produces {}",
                model.beta_dim(),
                spec.dim()
            )));
        }
        Ok(SurrogateObjective {
            model,
            data,
            val: None,
            spec,
            lambda_xi,
            psi_decay: 0.0,
        })
    }

    /// Construct with a user-facing `lambda` on the normalized base
    /// regularizer; divides by the table constant internally.
    pub fn from_base_lambda(
        model: M,
        data: &'a Dataset,
        spec: ParamSpec,
        lambda: f64,
    ) -> Result<Self> {
        let lambda_xi = spec.surrogate_lambda(lambda);
        SurrogateObjective::new(model, data, spec, lambda_xi)
    }

    pub fn with_val(mut self, val: &'a Dataset) -> Self {
        self.val = Some(val);
        self
    }
}

impl<M: Model> Objective for SurrogateObjective<'_, M> {
    fn param_spec(&self) -> &ParamSpec {
        &self.spec
    }

    fn num_samples(&self) -> usize {
        self.data.len()
    }

    fn eval(&self, params: &ModelParams, rows: &[usize]) -> Result<ObjEval> {
        let beta = forward(&self.spec, &params.xi)?;
        let (loss, mut grad_psi, grad_beta) =
            self.model
                .loss_grad(self.data, rows, &params.psi, &beta)?;
        let mut grad_xi = vjp(&self.spec, &params.xi, &grad_beta)?;
        let penalty = surrogate_penalty(&self.spec, &params.xi)?;
        let pen_grad = surrogate_penalty_grad(&self.spec, &params.xi)?;
        for f in 0..grad_xi.num_factors() {
            let pg = pen_grad.values(f).to_vec();
            for (g, p) in grad_xi.values_mut(f).iter_mut().zip(pg) {
                *g += self.lambda_xi * p;
            }
        }
        let mut value = loss + self.lambda_xi * penalty;
        if self.psi_decay > 0.0 {
            value += self.psi_decay * linalg::norm_sq(&params.psi);
            for (g, p) in grad_psi.iter_mut().zip(&params.psi) {
                *g += 2.0 * self.psi_decay * p;
            }
        }
        Ok(ObjEval {
            value,
            loss,
            grad_psi,
            grad_xi,
        })
    }

    fn val_loss(&self, params: &ModelParams) -> Result<Option<f64>> {
        match self.val {
            None => Ok(None),
            Some(val) => {
                let beta = forward(&self.spec, &params.xi)?;
                let rows: Vec<usize> = (0..val.len()).collect();
                Ok(Some(self.model.loss(val, &rows, &params.psi, &beta)?))
            }
        }
    }
}

/// The smooth elastic-net surrogate for a linear model:
/// `Q(u, v) = L(u . v) + lambda alpha ||u . v||^2
///          + lambda (1-alpha)/2 (||u||^2 + ||v||^2)`,
/// equivalent to `L(beta) + lambda ((1-alpha) ||beta||_1 + alpha ||beta||^2)`
/// with the reconstruction `beta = u . v`.
pub struct ElasticNetSurrogate<'a> {
    pub data: &'a Dataset,
    pub val: Option<&'a Dataset>,
    pub lambda: f64,
    pub alpha: f64,
    spec: ParamSpec,
    model: LinearModel,
}

impl<'a> ElasticNetSurrogate<'a> {
    pub fn new(data: &'a Dataset, lambda: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!(
                "alpha must lie strictly inside (0, 1), got {alpha}"
            )));
        }
        let dim = data.x.cols();
        Ok(ElasticNetSurrogate {
            data,
            val: None,
            lambda,
            alpha,
            spec: ParamSpec::hpp(dim),
            model: LinearModel { dim },
        })
    }

    pub fn with_val(mut self, val: &'a Dataset) -> Self {
        self.val = Some(val);
        self
    }
}

impl Objective for ElasticNetSurrogate<'_> {
    fn param_spec(&self) -> &ParamSpec {
        &self.spec
    }

    fn num_samples(&self) -> usize {
        self.data.len()
    }

    fn eval(&self, params: &ModelParams, rows: &[usize]) -> Result<ObjEval> {
        let beta = forward(&self.spec, &params.xi)?;
        let (loss, grad_psi, mut grad_beta) =
            self.model
                .loss_grad(self.data, rows, &params.psi, &beta)?;
        let ridge = self.lambda * self.alpha;
        let l2half = self.lambda * (1.0 - self.alpha) / 2.0;
        let value = loss
            + ridge * linalg::norm_sq(&beta)
            + l2half * (linalg::norm_sq(params.xi.values(0)) + linalg::norm_sq(params.xi.values(1)));
        // fold the ridge term into the cotangent before pulling back through K
        for (g, b) in grad_beta.iter_mut().zip(&beta) {
            *g += 2.0 * ridge * b;
        }
        let mut grad_xi = vjp(&self.spec, &params.xi, &grad_beta)?;
        for f in 0..2 {
            let xi_f = params.xi.values(f).to_vec();
            for (g, x) in grad_xi.values_mut(f).iter_mut().zip(xi_f) {
                *g += 2.0 * l2half * x;
            }
        }
        Ok(ObjEval {
            value,
            loss,
            grad_psi,
            grad_xi,
        })
    }

    fn val_loss(&self, params: &ModelParams) -> Result<Option<f64>> {
        match self.val {
            None => Ok(None),
            Some(val) => {
                let beta = forward(&self.spec, &params.xi)?;
                let rows: Vec<usize> = (0..val.len()).collect();
                Ok(Some(self.model.loss(val, &rows, &params.psi, &beta)?))
            }
        }
    }
}

/// Which dense layer of the two-layer network is overparametrized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlpSlot {
    /// The hidden-layer weight matrix (`hidden x input`).
    Hidden,
    /// The output-layer weight matrix (`classes x hidden`).
    Output,
}

/// One-hidden-layer ReLU network with softmax cross-entropy; exactly one
/// weight matrix is the regularized block `beta`, everything else is `psi`.
///
/// `psi` layout: `[b1, W2 (row-major), b2]` when the hidden weights are
/// overparametrized, `[W1 (row-major), b1, b2]` when the output weights are.
#[derive(Debug, Clone)]
pub struct MlpModel {
    pub input_dim: usize,
    pub hidden: usize,
    pub classes: usize,
    pub slot: MlpSlot,
}

struct MlpWeights<'p> {
    w1: &'p [f64],
    b1: &'p [f64],
    w2: &'p [f64],
    b2: &'p [f64],
}

impl MlpModel {
    fn split<'p>(&self, psi: &'p [f64], beta: &'p [f64]) -> Result<MlpWeights<'p>> {
        if psi.len() != self.psi_dim() || beta.len() != self.beta_dim() {
            return Err(Error::shape(format!(
                "mlp expects psi of length {} and beta of length {}, got {} and {}",
                self.psi_dim(),
                self.beta_dim(),
                psi.len(),
                beta.len()
            )));
        }
        let (h, c, i) = (self.hidden, self.classes, self.input_dim);
        Ok(match self.slot {
            MlpSlot::Hidden => MlpWeights {
                w1: beta,
                b1: &psi[0..h],
                w2: &psi[h..h + c * h],
                b2: &psi[h + c * h..],
            },
            MlpSlot::Output => MlpWeights {
                w1: &psi[0..h * i],
                b1: &psi[h * i..h * i + h],
                w2: beta,
                b2: &psi[h * i + h..],
            },
        })
    }

    fn forward_sample(&self, w: &MlpWeights<'_>, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (h, c, i) = (self.hidden, self.classes, self.input_dim);
        let mut z1 = vec![0.0; h];
        for a in 0..h {
            z1[a] = w.b1[a] + linalg::dot(&w.w1[a * i..(a + 1) * i], x);
        }
        let act: Vec<f64> = z1.iter().map(|&z| z.max(0.0)).collect();
        let mut logits = vec![0.0; c];
        for o in 0..c {
            logits[o] = w.b2[o] + linalg::dot(&w.w2[o * h..(o + 1) * h], &act);
        }
        (z1, act, logits)
    }
}

fn log_softmax(logits: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|&e| e / sum).collect();
    let logp: Vec<f64> = logits.iter().map(|&z| z - max - sum.ln()).collect();
    (probs, logp)
}

impl Model for MlpModel {
    fn loss_kind(&self) -> LossKind {
        LossKind::CrossEntropy
    }

    fn beta_dim(&self) -> usize {
        match self.slot {
            MlpSlot::Hidden => self.hidden * self.input_dim,
            MlpSlot::Output => self.classes * self.hidden,
        }
    }

    fn psi_dim(&self) -> usize {
        let full = self.hidden * self.input_dim + self.hidden + self.classes * self.hidden
            + self.classes;
        full - self.beta_dim()
    }

    fn loss(&self, data: &Dataset, rows: &[usize], psi: &[f64], beta: &[f64]) -> Result<f64> {
        let labels = data.labels()?;
        let w = self.split(psi, beta)?;
        let mut total = 0.0;
        for &r in rows {
            let (_, _, logits) = self.forward_sample(&w, data.x.row(r));
            let (_, logp) = log_softmax(&logits);
            total -= logp[labels[r]];
        }
        Ok(total / rows.len() as f64)
    }

    fn loss_grad(
        &self,
        data: &Dataset,
        rows: &[usize],
        psi: &[f64],
        beta: &[f64],
    ) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let labels = data.labels()?;
        let w = self.split(psi, beta)?;
        let (h, c, i) = (self.hidden, self.classes, self.input_dim);
        let inv_n = 1.0 / rows.len() as f64;

        let mut loss = 0.0;
        let mut d_w1 = vec![0.0; h * i];
        let mut d_b1 = vec![0.0; h];
        let mut d_w2 = vec![0.0; c * h];
        let mut d_b2 = vec![0.0; c];
        for &r in rows {
            let x = data.x.row(r);
            let (z1, act, logits) = self.forward_sample(&w, x);
            let (probs, logp) = log_softmax(&logits);
            loss -= logp[labels[r]] * inv_n;
            // dz2 = probs - onehot(label)
            let mut dz2 = probs;
            dz2[labels[r]] -= 1.0;
            for v in &mut dz2 {
                *v *= inv_n;
            }
            for o in 0..c {
                d_b2[o] += dz2[o];
                for a in 0..h {
                    d_w2[o * h + a] += dz2[o] * act[a];
                }
            }
            for a in 0..h {
                if z1[a] <= 0.0 {
                    continue;
                }
                let mut da = 0.0;
                for o in 0..c {
                    da += w.w2[o * h + a] * dz2[o];
                }
                d_b1[a] += da;
                for (slot, xv) in d_w1[a * i..(a + 1) * i].iter_mut().zip(x) {
                    *slot += da * xv;
                }
            }
        }

        let (grad_psi, grad_beta) = match self.slot {
            MlpSlot::Hidden => {
                let mut grad_psi = Vec::with_capacity(self.psi_dim());
                grad_psi.extend_from_slice(&d_b1);
                grad_psi.extend_from_slice(&d_w2);
                grad_psi.extend_from_slice(&d_b2);
                (grad_psi, d_w1)
            }
            MlpSlot::Output => {
                let mut grad_psi = Vec::with_capacity(self.psi_dim());
                grad_psi.extend_from_slice(&d_w1);
                grad_psi.extend_from_slice(&d_b1);
                grad_psi.extend_from_slice(&d_b2);
                (grad_psi, d_w2)
            }
        };
        Ok((loss, grad_psi, grad_beta))
    }

    fn predict(&self, input: &[f64], psi: &[f64], beta: &[f64]) -> Result<Vec<f64>> {
        let w = self.split(psi, beta)?;
        let (_, _, logits) = self.forward_sample(&w, input);
        Ok(logits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::fd_gradient_check;
    use crate::param_maps::solution_map;
    use crate::spaces::GroupPartition;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn toy_1d() -> Dataset {
        // single sample giving L(beta) = (1 - 1.5 beta)^2
        Dataset::regression(Matrix::from_rows(1, 1, vec![1.5]).unwrap(), vec![1.0]).unwrap()
    }

    #[test]
    fn base_objective_toy() {
        let data = toy_1d();
        let model = LinearModel { dim: 1 };
        let spec = ParamSpec::hpp(1);
        // P(beta) = (1 - 1.5 beta)^2 + 2 * 1 * |beta|, i.e. user lambda 2
        let reg = spec.base_reg(2.0).unwrap();
        let p0 = base_objective(&model, &data, &[0.0], &[], &reg).unwrap();
        assert!((p0 - 1.0).abs() < 1e-15);

        // stationarity of the scalar lasso: beta = soft(z, tau) / a with
        // a = 2 * 1.5^2, z = 2 * 1.5, tau = 2
        let (a, z, tau) = (4.5, 3.0, 2.0);
        let beta_hat = crate::oracle::soft_threshold(z, tau) / a;
        assert!((beta_hat - 2.0 / 9.0).abs() < 1e-15);
        let p_hat = base_objective(&model, &data, &[beta_hat], &[], &reg).unwrap();
        assert!((p_hat - 8.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn base_objective_zero_loss() {
        let data = Dataset::regression(Matrix::identity(2), vec![3.0, 0.5]).unwrap();
        let model = LinearModel { dim: 2 };
        let reg = ParamSpec::hpp(2).base_reg(0.0).unwrap();
        let p = base_objective(&model, &data, &[3.0, 0.5], &[], &reg).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn surrogate_toy_origin_and_balanced_point() {
        let data = toy_1d();
        let spec = ParamSpec::hpp(1);
        // Q(u, v) = (1 - 1.5 u v)^2 + u^2 + v^2 (unit-weight penalty)
        let obj =
            SurrogateObjective::new(LinearModel { dim: 1 }, &data, spec.clone(), 1.0).unwrap();
        let params = ModelParams::new(vec![], FactorSet::new(&spec, vec![vec![0.0], vec![0.0]]).unwrap());
        let eval = obj.eval(&params, &[0]).unwrap();
        assert!((eval.value - 1.0).abs() < 1e-15);
        assert_eq!(eval.grad_xi.values(0)[0], 0.0);
        assert_eq!(eval.grad_xi.values(1)[0], 0.0);

        // at the balanced point over beta = 2/9, Q equals P = 8/9 exactly
        let beta_hat = 2.0 / 9.0;
        let xi = solution_map(&spec, &[beta_hat]).unwrap();
        let eval = obj.eval(&ModelParams::new(vec![], xi), &[0]).unwrap();
        assert!((eval.value - 8.0 / 9.0).abs() < 1e-12, "got {}", eval.value);
    }

    #[test]
    fn surrogate_gradients_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let n = 6;
        let mut x = Matrix::zeros(n, 4);
        for i in 0..n {
            for j in 0..4 {
                x[(i, j)] = rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
        }
        let y: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let data = Dataset::regression(x, y).unwrap();
        let part = GroupPartition::new(vec![2, 2]).unwrap();
        let specs = [
            ParamSpec::hpp(4),
            ParamSpec::hppk(4, 3).unwrap(),
            ParamSpec::ghpowp(part, 2.5).unwrap(),
        ];
        for spec in specs {
            let obj =
                SurrogateObjective::new(LinearModel { dim: 4 }, &data, spec.clone(), 0.3).unwrap();
            for _ in 0..20 {
                let mut xi = FactorSet::zeros(&spec);
                for f in 0..xi.num_factors() {
                    for v in xi.values_mut(f) {
                        *v = rng.gen_range(0.3..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    }
                }
                let rows: Vec<usize> = (0..n).collect();
                let params = ModelParams::new(vec![], xi.clone());
                let eval = obj.eval(&params, &rows).unwrap();
                let flat = xi.to_flat();
                let spec_c = spec.clone();
                let f = |p: &[f64]| {
                    let mut xt = xi.clone();
                    xt.assign_flat(p).unwrap();
                    let o = SurrogateObjective::new(
                        LinearModel { dim: 4 },
                        &data,
                        spec_c.clone(),
                        0.3,
                    )
                    .unwrap();
                    o.eval(&ModelParams::new(vec![], xt), &rows).unwrap().value
                };
                let err =
                    fd_gradient_check(&f, &eval.grad_xi.to_flat(), &flat, 1e-6).unwrap();
                assert!(err <= 1e-5, "{}: fd error {err}", spec.kind());
            }
        }
    }

    #[test]
    fn majorization_and_equality_on_solution_manifold() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let data = toy_1d();
        let model = LinearModel { dim: 1 };
        let spec = ParamSpec::hppk(1, 3).unwrap();
        let lambda = 0.8;
        let reg = spec.base_reg(lambda).unwrap();
        let obj = SurrogateObjective::from_base_lambda(model, &data, spec.clone(), lambda).unwrap();
        for _ in 0..1000 {
            let beta = [rng.gen_range(-2.0..2.0)];
            // random fiber point: Q there majorizes P at K(xi)
            if let Some(xi) = crate::oracle::random_fiber_point(&spec, &beta, 1.0, &mut rng) {
                let q = obj.eval(&ModelParams::new(vec![], xi), &[0]).unwrap().value;
                let p = base_objective(&LinearModel { dim: 1 }, &data, &beta, &[], &reg).unwrap();
                assert!(q + 1e-10 >= p, "Q = {q} < P = {p}");
            }
            // equality at the balanced solution-map point
            let xi = solution_map(&spec, &beta).unwrap();
            let q = obj.eval(&ModelParams::new(vec![], xi), &[0]).unwrap().value;
            let p = base_objective(&LinearModel { dim: 1 }, &data, &beta, &[], &reg).unwrap();
            assert!((q - p).abs() <= 1e-12 * (1.0 + p.abs()), "Q = {q} vs P = {p}");
        }
    }

    #[test]
    fn elastic_net_surrogate_gradients_and_domain() {
        let data = toy_1d();
        assert!(ElasticNetSurrogate::new(&data, 1.0, 0.0).is_err());
        assert!(ElasticNetSurrogate::new(&data, 1.0, 1.0).is_err());

        let obj = ElasticNetSurrogate::new(&data, 0.0, 0.5).unwrap();
        let spec = ParamSpec::hpp(1);
        let xi = FactorSet::new(&spec, vec![vec![0.0], vec![0.0]]).unwrap();
        let eval = obj.eval(&ModelParams::new(vec![], xi), &[0]).unwrap();
        assert!((eval.value - 1.0).abs() < 1e-15); // L(0) = 1

        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let obj = ElasticNetSurrogate::new(&data, 0.7, 0.5).unwrap();
        for _ in 0..20 {
            let xi = FactorSet::new(
                &spec,
                vec![vec![rng.gen_range(-2.0..2.0)], vec![rng.gen_range(-2.0..2.0)]],
            )
            .unwrap();
            let eval = obj.eval(&ModelParams::new(vec![], xi.clone()), &[0]).unwrap();
            let f = |p: &[f64]| {
                let mut xt = xi.clone();
                xt.assign_flat(p).unwrap();
                let o = ElasticNetSurrogate::new(&data, 0.7, 0.5).unwrap();
                o.eval(&ModelParams::new(vec![], xt), &[0]).unwrap().value
            };
            let err = fd_gradient_check(&f, &eval.grad_xi.to_flat(), &xi.to_flat(), 1e-6).unwrap();
            assert!(err <= 1e-5, "fd error {err}");
        }
    }

    fn tiny_classification(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut x = Matrix::zeros(n, 3);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let class = i % 2;
            labels.push(class);
            for j in 0..3 {
                let center = if class == 0 { -1.0 } else { 1.0 };
                x[(i, j)] = center + rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
        }
        Dataset::classification(x, labels).unwrap()
    }

    #[test]
    fn mlp_zero_weights_gives_log_c() {
        let data = tiny_classification(8, 2);
        let model = MlpModel {
            input_dim: 3,
            hidden: 4,
            classes: 2,
            slot: MlpSlot::Hidden,
        };
        let rows: Vec<usize> = (0..8).collect();
        let psi = vec![0.0; model.psi_dim()];
        let beta = vec![0.0; model.beta_dim()];
        let loss = model.loss(&data, &rows, &psi, &beta).unwrap();
        assert!((loss - (2.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn mlp_gradient_check() {
        let data = tiny_classification(4, 3);
        for slot in [MlpSlot::Hidden, MlpSlot::Output] {
            let model = MlpModel {
                input_dim: 3,
                hidden: 4,
                classes: 2,
                slot,
            };
            let mut rng = ChaCha12Rng::seed_from_u64(9);
            let psi: Vec<f64> = (0..model.psi_dim()).map(|_| rng.gen_range(-0.7..0.7)).collect();
            let beta: Vec<f64> = (0..model.beta_dim()).map(|_| rng.gen_range(-0.7..0.7)).collect();
            let rows: Vec<usize> = (0..4).collect();
            let (_, grad_psi, grad_beta) = model.loss_grad(&data, &rows, &psi, &beta).unwrap();

            let f_beta = |p: &[f64]| model.loss(&data, &rows, &psi, p).unwrap();
            let err = fd_gradient_check(&f_beta, &grad_beta, &beta, 1e-6).unwrap();
            assert!(err <= 1e-4, "beta grad error {err}");
            let f_psi = |p: &[f64]| model.loss(&data, &rows, p, &beta).unwrap();
            let err = fd_gradient_check(&f_psi, &grad_psi, &psi, 1e-6).unwrap();
            assert!(err <= 1e-4, "psi grad error {err}");
        }
    }

    #[test]
    fn mlp_collapsed_parametrization_matches_plain_weights() {
        // K collapsed: HPP with v = 1 makes beta = u, so the overparametrized
        // loss with lambda = 0 equals the plain network's loss
        let data = tiny_classification(6, 4);
        let model = MlpModel {
            input_dim: 3,
            hidden: 4,
            classes: 2,
            slot: MlpSlot::Hidden,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let psi: Vec<f64> = (0..model.psi_dim()).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let w: Vec<f64> = (0..model.beta_dim()).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let rows: Vec<usize> = (0..6).collect();
        let plain = model.loss(&data, &rows, &psi, &w).unwrap();

        let spec = ParamSpec::hpp(model.beta_dim());
        let xi = FactorSet::new(&spec, vec![w.clone(), vec![1.0; w.len()]]).unwrap();
        let obj = SurrogateObjective::new(model.clone(), &data, spec, 0.0).unwrap();
        let eval = obj.eval(&ModelParams::new(psi, xi), &rows).unwrap();
        assert!((eval.value - plain).abs() < 1e-15);
    }

    #[test]
    fn reconstruct_examples() {
        let spec = ParamSpec::hpp(2);
        let xi = FactorSet::new(&spec, vec![vec![2.0, -1.0], vec![2.0, 1.0]]).unwrap();
        let params = ModelParams::new(vec![], xi);
        assert_eq!(reconstruct(&spec, &params).unwrap(), vec![4.0, -1.0]);

        // collapsed linear model predicts identically on random inputs
        let mut rng = ChaCha12Rng::seed_from_u64(40);
        let model = LinearModel { dim: 2 };
        let beta_hat = reconstruct(&spec, &params).unwrap();
        for _ in 0..100 {
            let input = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let collapsed = model.predict(&input, &[], &beta_hat).unwrap();
            let over = linalg::dot(&input, &beta_hat);
            assert!((collapsed[0] - over).abs() <= 1e-12);
        }

        // collapsed group-power weights reproduce the group norms
        let part = GroupPartition::new(vec![2, 1]).unwrap();
        let spec = ParamSpec::ghpowp(part.clone(), 2.5).unwrap();
        let xi = FactorSet::new(&spec, vec![vec![0.3, -0.4, 1.1], vec![1.7, 0.6]]).unwrap();
        let beta = forward(&spec, &xi).unwrap();
        for (j, r) in part.iter_slices() {
            let u_norm = linalg::norm(&xi.values(0)[r.clone()]);
            let expect = u_norm * crate::spaces::abs_pow(xi.values(1)[j], 1.5);
            assert!((linalg::norm(&beta[r]) - expect).abs() < 1e-12);
        }
    }
}
