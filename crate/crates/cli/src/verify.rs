//! Verification runners behind the `svf-check` and `gradcheck` subcommands:
//! certify the closed-form induced regularizers against the numeric fiber
//! minimizer, and the analytic gradients against central finite differences.

use anyhow::{bail, Result};
use hadamard_sparse::linalg::Matrix;
use hadamard_sparse::objectives::{
    Dataset, LinearModel, MlpModel, MlpSlot, Model, ModelParams, Objective, SurrogateObjective,
};
use hadamard_sparse::oracle::{fd_gradient_check, svf_certificate_error};
use hadamard_sparse::param_maps::{FactorSet, ParamKind, ParamSpec};
use hadamard_sparse::spaces::GroupPartition;
use rand::prelude::*;
use rand_distr::StandardNormal;

/// One table row of a verification report.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub label: String,
    pub max_error: f64,
    pub pass: bool,
}

/// A verification report with an overall verdict.
#[derive(Debug, Clone)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub tolerance: f64,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<14} {:>14}  {}\n",
            "kind", "max rel error", "status"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<14} {:>14.3e}  {}\n",
                row.label,
                row.max_error,
                if row.pass { "ok" } else { "FAIL" }
            ));
        }
        out.push_str(&format!("tolerance: {:.1e}\n", self.tolerance));
        out
    }
}

/// Build a representative spec for `kind` at dimension `dims` with depth
/// parameters `k` (and `k1` for the mixed kinds).
pub fn spec_for(kind: ParamKind, dims: usize, k: f64, k1: Option<f64>) -> Result<ParamSpec> {
    let partition = if kind.is_grouped() {
        if dims < 2 {
            bail!("grouped kinds need dims >= 2");
        }
        GroupPartition::new(vec![dims - dims / 2, dims / 2])?
    } else {
        GroupPartition::trivial(dims)
    };
    let k1 = match (kind.is_mixed(), k1) {
        (true, Some(v)) => Some(v),
        // default split: everything but one unit of depth inside the group
        (true, None) if kind == ParamKind::GhppK1K => Some((k - 1.0).floor().max(1.0)),
        (true, None) => Some((k - 1.0).max(1.0)),
        (false, _) => None,
    };
    Ok(ParamSpec::new(kind, k, k1, partition)?)
}

fn random_beta(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            if rng.gen_bool(0.25) {
                0.0
            } else {
                rng.gen_range(-3.0..3.0)
            }
        })
        .collect()
}

/// Certify `induced_reg` against the numeric fiber minimum for each kind:
/// `trials` random draws of `beta` (entries U[-3,3] with planted zeros).
pub fn svf_check(
    kinds: &[ParamKind],
    dims: usize,
    k: f64,
    k1: Option<f64>,
    trials: usize,
    restarts: usize,
    seed: u64,
) -> Result<Report> {
    let tolerance = 1e-6;
    let mut rows = Vec::new();
    for &kind in kinds {
        let spec = spec_for(kind, dims, k, k1)?;
        let mut rng = crate::cell_rng(seed, kind as u64);
        let mut worst = 0.0f64;
        for trial in 0..trials {
            let beta = random_beta(spec.dim(), &mut rng);
            let err = svf_certificate_error(&spec, &beta, restarts, seed ^ trial as u64)?;
            worst = worst.max(err);
        }
        rows.push(ReportRow {
            label: kind.name().to_string(),
            max_error: worst,
            pass: worst <= tolerance,
        });
    }
    Ok(Report { rows, tolerance })
}

/// Finite-difference check of the surrogate objective gradients for each
/// kind at `trials` random non-degenerate points, plus the network
/// objective (checked at the looser `1e-4` network tolerance).
pub fn gradcheck(kinds: &[ParamKind], trials: usize, seed: u64) -> Result<Report> {
    let tolerance = 1e-5;
    let mut rng = crate::cell_rng(seed, 99);
    let n = 8;
    let dims = 4;
    let mut x = Matrix::zeros(n, dims);
    for i in 0..n {
        for j in 0..dims {
            x[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let data = Dataset::regression(x, y)?;
    let rows_idx: Vec<usize> = (0..n).collect();

    let mut rows = Vec::new();
    for &kind in kinds {
        let depth = if kind.is_power() { 2.5 } else { 3.0 };
        let spec = spec_for(kind, dims, depth, None)?;
        let objective = SurrogateObjective::from_base_lambda(
            LinearModel { dim: dims },
            &data,
            spec.clone(),
            0.3,
        )?;
        let mut worst = 0.0f64;
        for _ in 0..trials {
            let mut xi = FactorSet::zeros(&spec);
            for f in 0..xi.num_factors() {
                for v in xi.values_mut(f) {
                    // non-degenerate: keep entries away from the kink at 0
                    let mag = rng.gen_range(0.3..1.5);
                    *v = if rng.gen_bool(0.5) { mag } else { -mag };
                }
            }
            let params = ModelParams::new(Vec::new(), xi.clone());
            let eval = objective.eval(&params, &rows_idx)?;
            let template = xi.clone();
            let f = |flat: &[f64]| {
                let mut p = template.clone();
                p.assign_flat(flat).unwrap();
                objective
                    .eval(&ModelParams::new(Vec::new(), p), &rows_idx)
                    .unwrap()
                    .value
            };
            let err = fd_gradient_check(&f, &eval.grad_xi.to_flat(), &xi.to_flat(), 1e-6)?;
            worst = worst.max(err);
        }
        rows.push(ReportRow {
            label: kind.name().to_string(),
            max_error: worst,
            pass: worst <= tolerance,
        });
    }

    // network objective at its own tolerance
    let err = mlp_gradcheck(seed)?;
    rows.push(ReportRow {
        label: "mlp".to_string(),
        max_error: err,
        pass: err <= 1e-4,
    });
    Ok(Report { rows, tolerance })
}

fn mlp_gradcheck(seed: u64) -> Result<f64> {
    let train = crate::mlp_demo::two_gaussians(8, seed)?;
    let model = MlpModel {
        input_dim: 10,
        hidden: 6,
        classes: 2,
        slot: MlpSlot::Hidden,
    };
    let spec = ParamSpec::hppk(model.beta_dim(), 3)?;
    let objective = SurrogateObjective::from_base_lambda(model.clone(), &train, spec.clone(), 0.2)?;
    let mut rng = crate::cell_rng(seed, 100);
    let mut xi = FactorSet::zeros(&spec);
    for f in 0..xi.num_factors() {
        for v in xi.values_mut(f) {
            *v = rng.gen_range(0.2..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        }
    }
    let psi: Vec<f64> = (0..model.psi_dim()).map(|_| rng.gen_range(-0.6..0.6)).collect();
    let params = ModelParams::new(psi, xi);
    let rows: Vec<usize> = (0..train.len()).collect();
    let eval = objective.eval(&params, &rows)?;
    let mut flat = params.psi.clone();
    flat.extend(params.xi.to_flat());
    let mut analytic = eval.grad_psi.clone();
    analytic.extend(eval.grad_xi.to_flat());
    let template = params.clone();
    let f = |p: &[f64]| {
        let mut t = template.clone();
        let (psi_part, xi_part) = p.split_at(t.psi.len());
        t.psi.copy_from_slice(psi_part);
        t.xi.assign_flat(xi_part).unwrap();
        objective.eval(&t, &rows).unwrap().value
    };
    Ok(fd_gradient_check(&f, &analytic, &flat, 1e-6)?)
}

/// Parse a comma-separated kind list; "all" selects the whole catalogue.
pub fn parse_kinds(arg: &str) -> Result<Vec<ParamKind>> {
    if arg == "all" {
        return Ok(ParamKind::ALL.to_vec());
    }
    arg.split(',')
        .map(|s| Ok(ParamKind::parse(s.trim())?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_kind_lists() {
        assert_eq!(parse_kinds("all").unwrap().len(), 14);
        let kinds = parse_kinds("hpp, hppk").unwrap();
        assert_eq!(kinds, vec![ParamKind::Hpp, ParamKind::HppK]);
        assert!(parse_kinds("nope").is_err());
    }

    #[test]
    fn svf_check_small() {
        let report = svf_check(
            &[ParamKind::Hpp, ParamKind::Ghpp],
            3,
            3.0,
            None,
            5,
            8,
            1,
        )
        .unwrap();
        assert!(report.all_pass(), "{}", report.render());
    }

    #[test]
    fn gradcheck_small() {
        let report = gradcheck(&[ParamKind::Hpp, ParamKind::HPowP], 5, 2).unwrap();
        assert!(report.all_pass(), "{}", report.render());
    }
}
