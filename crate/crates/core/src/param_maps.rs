//! The catalogue of parametrization maps `K(xi) = beta`, their analytic
//! gradients (vector-Jacobian products), the surrogate penalties they carry,
//! and the closed-form induced regularizers with balanced solution maps.
//!
//! Each [`ParamKind`] couples a map `K` with a weighted squared-`l2` penalty
//! `R_xi` such that minimizing `R_xi` over the fiber `K^{-1}(beta)` equals a
//! sparse (quasi-)norm penalty `R(beta)` in closed form:
//!
//! | kind           | `K(xi)`                          | `R_xi`                       | induced `R(beta)`                  |
//! |----------------|----------------------------------|------------------------------|------------------------------------|
//! | `Hpp`          | `u . v`                          | `|u|^2 + |v|^2`              | `2 ||b||_1`                        |
//! | `Hdp`          | `g^2 - d^2`                      | `|g|^2 + |d|^2`              | `||b||_1`                          |
//! | `Ghpp`         | `u .G nu`                        | `sum_j |u_j|^2 + nu_j^2`     | `2 ||b||_{2,1}`                    |
//! | `AdjGhpp`      | `u .G nu`                        | `sum_j |u_j|^2 + |G_j| nu_j^2` | `2 sum_j sqrt(|G_j|) ||b_j||_2`  |
//! | `HppK`         | `u_1 . .. . u_k`                 | `sum_l |u_l|^2`              | `k ||b||_{2/k}^{2/k}`              |
//! | `GhppK`        | `u .G (nu_1 . .. . nu_{k-1})`    | `|u|^2 + sum_r |nu_r|^2`     | `k ||b||_{2,2/k}^{2/k}`            |
//! | `GhppK1K`      | `(mu_1 . .. . mu_{k1}) .G (nu_1 . .. . nu_{k2})` | plain `l2`  | `k ||b||_{2/k1,2/k}^{2/k}`         |
//! | `HdpK`         | `u_1...u_k - v_1...v_k`          | plain `l2`                   | `k ||b||_{2/k}^{2/k}`              |
//! | `HppKShared`   | `u . v^{k-1}`                    | `|u|^2 + (k-1)|v|^2`         | `k ||b||_{2/k}^{2/k}`              |
//! | `HdpKShared`   | `u^k - v^k`                      | `|u|^2 + |v|^2`              | `||b||_{2/k}^{2/k}`                |
//! | `HPowP`        | `u . |v|^(k-1)`                  | `|u|^2 + (k-1)|v|^2`         | `k ||b||_{2/k}^{2/k}`              |
//! | `PowerProp`    | `v . |v|^(k-1)`                  | `|v|^2`                      | `||b||_{2/k}^{2/k}`                |
//! | `GhPowP`       | `u .G |nu|^(k-1)`                | `|u|^2 + (k-1)|nu|^2`        | `k ||b||_{2,2/k}^{2/k}`            |
//! | `GhPowPK1K`    | `(mu.|mu|^(k1-1)) .G |nu|^k2`    | `k1 |mu|^2 + k2 |nu|^2`      | `k ||b||_{2/k1,2/k}^{2/k}`         |
//!
//! where `.` is the element-wise product, `.G` scales each group by a shared
//! scalar, and powers act element-wise. The leading constant of the induced
//! regularizer (column 4) is exposed as [`ParamSpec::table_constant`] so a
//! user-facing `lambda` on the *normalized* penalty can be translated into
//! the surrogate-level weight (see [`ParamSpec::surrogate_lambda`]).

use crate::spaces::{abs_pow, GroupPartition, RegSpec};
use crate::{Error, Result};

/// Which parametrization map is in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamKind {
    Hpp,
    Hdp,
    Ghpp,
    AdjGhpp,
    HppK,
    GhppK,
    GhppK1K,
    HppKShared,
    HdpK,
    HdpKShared,
    HPowP,
    PowerProp,
    GhPowP,
    GhPowPK1K,
}

impl ParamKind {
    /// All kinds, in catalogue order.
    pub const ALL: [ParamKind; 14] = [
        ParamKind::Hpp,
        ParamKind::Hdp,
        ParamKind::Ghpp,
        ParamKind::AdjGhpp,
        ParamKind::HppK,
        ParamKind::GhppK,
        ParamKind::GhppK1K,
        ParamKind::HppKShared,
        ParamKind::HdpK,
        ParamKind::HdpKShared,
        ParamKind::HPowP,
        ParamKind::PowerProp,
        ParamKind::GhPowP,
        ParamKind::GhPowPK1K,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ParamKind::Hpp => "hpp",
            ParamKind::Hdp => "hdp",
            ParamKind::Ghpp => "ghpp",
            ParamKind::AdjGhpp => "adj_ghpp",
            ParamKind::HppK => "hppk",
            ParamKind::GhppK => "ghppk",
            ParamKind::GhppK1K => "ghppk1k",
            ParamKind::HppKShared => "hppk_shared",
            ParamKind::HdpK => "hdpk",
            ParamKind::HdpKShared => "hdpk_shared",
            ParamKind::HPowP => "hpowp",
            ParamKind::PowerProp => "powerprop",
            ParamKind::GhPowP => "ghpowp",
            ParamKind::GhPowPK1K => "ghpowpk1k",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        ParamKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown parametrization kind '{s}'")))
    }

    /// Kinds whose depth `k` must be an integer `>= 2`.
    pub fn is_integer_depth(&self) -> bool {
        matches!(
            self,
            ParamKind::HppK
                | ParamKind::GhppK
                | ParamKind::GhppK1K
                | ParamKind::HppKShared
                | ParamKind::HdpK
                | ParamKind::HdpKShared
        )
    }

    /// Kinds built from element-wise powers; any real depth `k > 1`.
    pub fn is_power(&self) -> bool {
        matches!(
            self,
            ParamKind::HPowP | ParamKind::PowerProp | ParamKind::GhPowP | ParamKind::GhPowPK1K
        )
    }

    /// Fixed depth-two kinds that take no `k` parameter.
    pub fn is_fixed_depth(&self) -> bool {
        matches!(
            self,
            ParamKind::Hpp | ParamKind::Hdp | ParamKind::Ghpp | ParamKind::AdjGhpp
        )
    }

    /// Kinds that use a non-trivial group structure.
    pub fn is_grouped(&self) -> bool {
        matches!(
            self,
            ParamKind::Ghpp
                | ParamKind::AdjGhpp
                | ParamKind::GhppK
                | ParamKind::GhppK1K
                | ParamKind::GhPowP
                | ParamKind::GhPowPK1K
        )
    }

    /// Kinds with a within-group/between-group depth split `(k1, k2)`.
    pub fn is_mixed(&self) -> bool {
        matches!(self, ParamKind::GhppK1K | ParamKind::GhPowPK1K)
    }

    /// Difference-structured kinds `K = A(xi_+) - A(xi_-)`.
    pub fn is_difference(&self) -> bool {
        matches!(
            self,
            ParamKind::Hdp | ParamKind::HdpK | ParamKind::HdpKShared
        )
    }
}

impl std::fmt::Display for ParamKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A fully specified parametrization: kind, depth parameters, and partition.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    kind: ParamKind,
    k: f64,
    k1: f64,
    partition: GroupPartition,
}

impl ParamSpec {
    /// General constructor. `k` is ignored (forced to 2) for fixed-depth
    /// kinds; `k1` is only meaningful for the mixed kinds.
    pub fn new(
        kind: ParamKind,
        k: f64,
        k1: Option<f64>,
        partition: GroupPartition,
    ) -> Result<Self> {
        let k = if kind.is_fixed_depth() { 2.0 } else { k };
        if !kind.is_grouped() && !partition.is_trivial() {
            return Err(Error::invalid(format!(
                "kind '{kind}' requires the trivial (element-wise) partition"
            )));
        }
        if kind.is_integer_depth() {
            if k.fract() != 0.0 || k < 2.0 {
                return Err(Error::invalid(format!(
                    "kind '{kind}' requires integer depth k >= 2, got {k}"
                )));
            }
        } else if !kind.is_fixed_depth() && !(k > 1.0) {
            return Err(Error::invalid(format!(
                "kind '{kind}' requires real depth k > 1, got {k}"
            )));
        }
        let k1 = match (kind.is_mixed(), k1) {
            (false, None) => 0.0,
            (false, Some(_)) => {
                return Err(Error::invalid(format!("kind '{kind}' takes no k1")));
            }
            (true, None) => {
                return Err(Error::invalid(format!("kind '{kind}' requires k1")));
            }
            (true, Some(k1)) => {
                let k2 = k - k1;
                match kind {
                    ParamKind::GhppK1K => {
                        if k1.fract() != 0.0 || k1 < 1.0 || k2.fract() != 0.0 || k2 < 1.0 {
                            return Err(Error::invalid(format!(
                                "ghppk1k requires integer k1 >= 1 and k2 = k - k1 >= 1, got k1={k1}, k2={k2}"
                            )));
                        }
                    }
                    ParamKind::GhPowPK1K => {
                        if !(k1 >= 1.0) || !(k2 > 0.0) {
                            return Err(Error::invalid(format!(
                                "ghpowpk1k requires k1 >= 1 and k2 = k - k1 > 0, got k1={k1}, k2={k2}"
                            )));
                        }
                    }
                    _ => unreachable!(),
                }
                k1
            }
        };
        Ok(ParamSpec {
            kind,
            k,
            k1,
            partition,
        })
    }

    pub fn hpp(dim: usize) -> Self {
        ParamSpec::new(ParamKind::Hpp, 2.0, None, GroupPartition::trivial(dim)).unwrap()
    }

    pub fn hdp(dim: usize) -> Self {
        ParamSpec::new(ParamKind::Hdp, 2.0, None, GroupPartition::trivial(dim)).unwrap()
    }

    pub fn ghpp(partition: GroupPartition) -> Self {
        ParamSpec::new(ParamKind::Ghpp, 2.0, None, partition).unwrap()
    }

    pub fn adj_ghpp(partition: GroupPartition) -> Self {
        ParamSpec::new(ParamKind::AdjGhpp, 2.0, None, partition).unwrap()
    }

    pub fn hppk(dim: usize, k: usize) -> Result<Self> {
        ParamSpec::new(ParamKind::HppK, k as f64, None, GroupPartition::trivial(dim))
    }

    pub fn ghppk(partition: GroupPartition, k: usize) -> Result<Self> {
        ParamSpec::new(ParamKind::GhppK, k as f64, None, partition)
    }

    pub fn ghppk1k(partition: GroupPartition, k1: usize, k2: usize) -> Result<Self> {
        ParamSpec::new(
            ParamKind::GhppK1K,
            (k1 + k2) as f64,
            Some(k1 as f64),
            partition,
        )
    }

    pub fn hppk_shared(dim: usize, k: usize) -> Result<Self> {
        ParamSpec::new(
            ParamKind::HppKShared,
            k as f64,
            None,
            GroupPartition::trivial(dim),
        )
    }

    pub fn hdpk(dim: usize, k: usize) -> Result<Self> {
        ParamSpec::new(ParamKind::HdpK, k as f64, None, GroupPartition::trivial(dim))
    }

    pub fn hdpk_shared(dim: usize, k: usize) -> Result<Self> {
        ParamSpec::new(
            ParamKind::HdpKShared,
            k as f64,
            None,
            GroupPartition::trivial(dim),
        )
    }

    pub fn hpowp(dim: usize, k: f64) -> Result<Self> {
        ParamSpec::new(ParamKind::HPowP, k, None, GroupPartition::trivial(dim))
    }

    pub fn powerprop(dim: usize, k: f64) -> Result<Self> {
        ParamSpec::new(ParamKind::PowerProp, k, None, GroupPartition::trivial(dim))
    }

    pub fn ghpowp(partition: GroupPartition, k: f64) -> Result<Self> {
        ParamSpec::new(ParamKind::GhPowP, k, None, partition)
    }

    pub fn ghpowpk1k(partition: GroupPartition, k1: f64, k2: f64) -> Result<Self> {
        ParamSpec::new(ParamKind::GhPowPK1K, k1 + k2, Some(k1), partition)
    }

    pub fn kind(&self) -> ParamKind {
        self.kind
    }

    /// Total factorization depth (2 for the fixed-depth kinds).
    pub fn k(&self) -> f64 {
        self.k
    }

    /// Within-group depth for the mixed kinds, 0 otherwise.
    pub fn k1(&self) -> f64 {
        self.k1
    }

    /// Between-group depth `k - k1` for the mixed kinds, 0 otherwise.
    pub fn k2(&self) -> f64 {
        if self.kind.is_mixed() {
            self.k - self.k1
        } else {
            0.0
        }
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }

    /// Dimension of `beta`.
    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    /// Named factor shapes, in order. Lengths are `d` or `L`.
    pub fn factor_shapes(&self) -> Vec<(String, usize)> {
        let d = self.partition.dim();
        let l = self.partition.num_groups();
        match self.kind {
            ParamKind::Hpp => vec![("u".into(), d), ("v".into(), d)],
            ParamKind::Hdp => vec![("gamma".into(), d), ("delta".into(), d)],
            ParamKind::Ghpp | ParamKind::AdjGhpp => vec![("u".into(), d), ("nu".into(), l)],
            ParamKind::HppK => (1..=self.k as usize).map(|i| (format!("u{i}"), d)).collect(),
            ParamKind::GhppK => {
                let mut shapes = vec![("u".into(), d)];
                shapes.extend((1..self.k as usize).map(|r| (format!("nu{r}"), l)));
                shapes
            }
            ParamKind::GhppK1K => {
                let (k1, k2) = (self.k1 as usize, self.k2() as usize);
                let mut shapes: Vec<_> = (1..=k1).map(|t| (format!("mu{t}"), d)).collect();
                shapes.extend((1..=k2).map(|r| (format!("nu{r}"), l)));
                shapes
            }
            ParamKind::HppKShared | ParamKind::HPowP => {
                vec![("u".into(), d), ("v".into(), d)]
            }
            ParamKind::HdpK => {
                let k = self.k as usize;
                let mut shapes: Vec<_> = (1..=k).map(|i| (format!("u{i}"), d)).collect();
                shapes.extend((1..=k).map(|i| (format!("v{i}"), d)));
                shapes
            }
            ParamKind::HdpKShared => vec![("u".into(), d), ("v".into(), d)],
            ParamKind::PowerProp => vec![("v".into(), d)],
            ParamKind::GhPowP => vec![("u".into(), d), ("nu".into(), l)],
            ParamKind::GhPowPK1K => vec![("mu".into(), d), ("nu".into(), l)],
        }
    }

    /// Leading constant of the induced regularizer as catalogued above
    /// (e.g. 2 for `Hpp`, `k` for `HppK`, 1 for `PowerProp`).
    pub fn table_constant(&self) -> f64 {
        match self.kind {
            ParamKind::Hpp | ParamKind::Ghpp | ParamKind::AdjGhpp => 2.0,
            ParamKind::Hdp | ParamKind::HdpKShared | ParamKind::PowerProp => 1.0,
            ParamKind::HppK
            | ParamKind::GhppK
            | ParamKind::GhppK1K
            | ParamKind::HppKShared
            | ParamKind::HdpK
            | ParamKind::HPowP
            | ParamKind::GhPowP
            | ParamKind::GhPowPK1K => self.k,
        }
    }

    /// Exponents `(p, q)` of the induced `l_{p,q}` regularizer.
    pub fn induced_exponents(&self) -> (f64, f64) {
        let q = 2.0 / self.k;
        let p = if self.kind.is_mixed() {
            2.0 / self.k1
        } else if self.kind.is_grouped() {
            2.0
        } else {
            q
        };
        (p, q)
    }

    /// The induced regularizer as a weighted `l_{p,q}` descriptor, with the
    /// leading constant folded into the group weights, plus its value at
    /// `beta`. `induced_reg` evaluates exactly the closed forms catalogued in
    /// the module docs.
    pub fn induced_reg(&self, beta: &[f64]) -> Result<(RegSpec, f64)> {
        let descriptor = self.induced_descriptor()?;
        let value = descriptor.eval(beta)?;
        Ok((descriptor, value))
    }

    /// Descriptor of the induced regularizer including the table constant.
    pub fn induced_descriptor(&self) -> Result<RegSpec> {
        let (p, q) = self.induced_exponents();
        let c = self.table_constant();
        let weights: Vec<f64> = match self.kind {
            // group-size adjustment: 2 sqrt(|G_j|) per group
            ParamKind::AdjGhpp => self
                .partition
                .group_sizes()
                .iter()
                .map(|&s| c * (s as f64).sqrt())
                .collect(),
            _ => vec![c; self.partition.num_groups()],
        };
        RegSpec::with_weights(p, q, weights, 0.0, self.partition.clone())
    }

    /// The user-facing base regularizer `lambda * R(beta)` with the table
    /// constant divided out, so that `lambda` multiplies the plain
    /// (quasi-)norm penalty (`||b||_1` for `Hpp`, `||b||_{2/k}^{2/k}` for
    /// `HppK`, `sum_j sqrt(|G_j|) ||b_j||_2` for `AdjGhpp`, ...).
    pub fn base_reg(&self, lambda: f64) -> Result<RegSpec> {
        let mut spec = self.induced_descriptor()?;
        let c = self.table_constant();
        for w in &mut spec.weights {
            *w /= c;
        }
        spec.lambda = lambda;
        Ok(spec)
    }

    /// Surrogate-level penalty weight corresponding to a user-facing
    /// `lambda` on the normalized base regularizer: `lambda / table_constant`.
    pub fn surrogate_lambda(&self, lambda: f64) -> f64 {
        lambda / self.table_constant()
    }
}

/// One named factor vector of a [`FactorSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub name: String,
    pub values: Vec<f64>,
}

/// The surrogate parameter `xi`: an ordered list of named factor vectors
/// whose shapes are determined by a [`ParamSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    factors: Vec<Factor>,
}

impl FactorSet {
    /// All-zero factors conforming to `spec`.
    pub fn zeros(spec: &ParamSpec) -> Self {
        FactorSet {
            factors: spec
                .factor_shapes()
                .into_iter()
                .map(|(name, len)| Factor {
                    name,
                    values: vec![0.0; len],
                })
                .collect(),
        }
    }

    /// Build from per-factor value vectors, validating shapes against `spec`.
    pub fn new(spec: &ParamSpec, values: Vec<Vec<f64>>) -> Result<Self> {
        let shapes = spec.factor_shapes();
        if values.len() != shapes.len() {
            return Err(Error::shape(format!(
                "{} factors provided, kind '{}' has {}",
                values.len(),
                spec.kind(),
                shapes.len()
            )));
        }
        let factors = shapes
            .into_iter()
            .zip(values)
            .map(|((name, len), vals)| {
                if vals.len() != len {
                    Err(Error::shape(format!(
                        "factor '{name}' has length {}, expected {len}",
                        vals.len()
                    )))
                } else {
                    Ok(Factor { name, values: vals })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FactorSet { factors })
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, i: usize) -> &Factor {
        &self.factors[i]
    }

    pub fn values(&self, i: usize) -> &[f64] {
        &self.factors[i].values
    }

    pub fn values_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.factors[i].values
    }

    pub fn by_name(&self, name: &str) -> Option<&Factor> {
        self.factors.iter().find(|f| f.name == name)
    }

    /// Total number of scalar parameters.
    pub fn total_dim(&self) -> usize {
        self.factors.iter().map(|f| f.values.len()).sum()
    }

    /// Concatenate all factors into one flat vector (catalogue order).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_dim());
        for f in &self.factors {
            out.extend_from_slice(&f.values);
        }
        out
    }

    /// Overwrite all factor values from a flat vector.
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.total_dim() {
            return Err(Error::shape(format!(
                "flat vector has length {}, factor set has {}",
                flat.len(),
                self.total_dim()
            )));
        }
        let mut offset = 0;
        for f in &mut self.factors {
            let n = f.values.len();
            f.values.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Uniform scaling of every factor entry.
    pub fn scale(&mut self, c: f64) {
        for f in &mut self.factors {
            for v in &mut f.values {
                *v *= c;
            }
        }
    }

    fn check_conformant(&self, spec: &ParamSpec) -> Result<()> {
        let shapes = spec.factor_shapes();
        if shapes.len() != self.factors.len() {
            return Err(Error::shape(format!(
                "factor set has {} factors, kind '{}' expects {}",
                self.factors.len(),
                spec.kind(),
                shapes.len()
            )));
        }
        for ((name, len), f) in shapes.iter().zip(&self.factors) {
            if f.values.len() != *len {
                return Err(Error::shape(format!(
                    "factor '{name}' has length {}, expected {len}",
                    f.values.len()
                )));
            }
        }
        Ok(())
    }
}

/// `d/dx |x|^e` with the value at `x = 0` defined as 0 for every `e > 0`.
///
/// For `e >= 1` this is the true (sub)derivative limit; for `0 < e < 1` the
/// derivative is singular at 0 and returning 0 keeps the origin stationary.
#[inline]
fn d_abs_pow(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        e * abs_pow(x, e - 1.0) * x.signum()
    }
}

/// `d/dx (x |x|^{e-1})` = `e |x|^{e-1}`, with value 0 at `x = 0` (exception:
/// identically 1 when `e = 1`, where the map is the identity).
#[inline]
fn d_signed_pow(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        1.0
    } else if x == 0.0 {
        0.0
    } else {
        e * abs_pow(x, e - 1.0)
    }
}

/// `x |x|^{e-1}` (sign-preserving power).
#[inline]
fn signed_pow(x: f64, e: f64) -> f64 {
    x.signum() * abs_pow(x, e)
}

/// Evaluate `beta = K(xi)`, exactly as catalogued (no normalization).
pub fn forward(spec: &ParamSpec, xi: &FactorSet) -> Result<Vec<f64>> {
    xi.check_conformant(spec)?;
    let d = spec.dim();
    let part = spec.partition();
    let mut beta = vec![0.0; d];
    match spec.kind() {
        ParamKind::Hpp => {
            let (u, v) = (xi.values(0), xi.values(1));
            for i in 0..d {
                beta[i] = u[i] * v[i];
            }
        }
        ParamKind::Hdp => {
            let (g, del) = (xi.values(0), xi.values(1));
            for i in 0..d {
                beta[i] = g[i] * g[i] - del[i] * del[i];
            }
        }
        ParamKind::Ghpp | ParamKind::AdjGhpp => {
            let (u, nu) = (xi.values(0), xi.values(1));
            for (j, r) in part.iter_slices() {
                for i in r {
                    beta[i] = u[i] * nu[j];
                }
            }
        }
        ParamKind::HppK => {
            let k = spec.k() as usize;
            for i in 0..d {
                let mut prod = 1.0;
                for l in 0..k {
                    prod *= xi.values(l)[i];
                }
                beta[i] = prod;
            }
        }
        ParamKind::GhppK => {
            let u = xi.values(0);
            let k = spec.k() as usize;
            for (j, r) in part.iter_slices() {
                let mut scale = 1.0;
                for fac in 1..k {
                    scale *= xi.values(fac)[j];
                }
                for i in r {
                    beta[i] = u[i] * scale;
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
                    let mut prod = scale;
                    for t in 0..k1 {
                        prod *= xi.values(t)[i];
                    }
                    beta[i] = prod;
                }
            }
        }
        ParamKind::HppKShared => {
            let (u, v) = (xi.values(0), xi.values(1));
            let e = spec.k() as i32 - 1;
            for i in 0..d {
                beta[i] = u[i] * v[i].powi(e);
            }
        }
        ParamKind::HdpK => {
            let k = spec.k() as usize;
            for i in 0..d {
                let mut up = 1.0;
                let mut vp = 1.0;
                for l in 0..k {
                    up *= xi.values(l)[i];
                    vp *= xi.values(k + l)[i];
                }
                beta[i] = up - vp;
            }
        }
        ParamKind::HdpKShared => {
            let (u, v) = (xi.values(0), xi.values(1));
            let e = spec.k() as i32;
            for i in 0..d {
                beta[i] = u[i].powi(e) - v[i].powi(e);
            }
        }
        ParamKind::HPowP => {
            let (u, v) = (xi.values(0), xi.values(1));
            let e = spec.k() - 1.0;
            for i in 0..d {
                beta[i] = u[i] * abs_pow(v[i], e);
            }
        }
        ParamKind::PowerProp => {
            let v = xi.values(0);
            for i in 0..d {
                beta[i] = signed_pow(v[i], spec.k());
            }
        }
        ParamKind::GhPowP => {
            let (u, nu) = (xi.values(0), xi.values(1));
            let e = spec.k() - 1.0;
            for (j, r) in part.iter_slices() {
                let scale = abs_pow(nu[j], e);
                for i in r {
                    beta[i] = u[i] * scale;
                }
            }
        }
        ParamKind::GhPowPK1K => {
            let (mu, nu) = (xi.values(0), xi.values(1));
            let (k1, k2) = (spec.k1(), spec.k2());
            for (j, r) in part.iter_slices() {
                let scale = abs_pow(nu[j], k2);
                for i in r {
                    beta[i] = signed_pow(mu[i], k1) * scale;
                }
            }
        }
    }
    Ok(beta)
}

/// Vector-Jacobian product: the gradient of `g . K(xi)` with respect to
/// every factor, returned in the same shape as `xi`.
///
/// For the power kinds the partial derivative with respect to a base entry
/// at exactly 0 is defined as 0 (see [`d_abs_pow`]); this is a deliberate
/// subderivative choice that keeps the origin stationary.
pub fn vjp(spec: &ParamSpec, xi: &FactorSet, g: &[f64]) -> Result<FactorSet> {
    xi.check_conformant(spec)?;
    let d = spec.dim();
    if g.len() != d {
        return Err(Error::shape(format!(
            "cotangent has length {}, expected {d}",
            g.len()
        )));
    }
    let part = spec.partition();
    let mut grad = FactorSet::zeros(spec);
    match spec.kind() {
        ParamKind::Hpp => {
            let (u, v) = (xi.values(0), xi.values(1));
            for i in 0..d {
                grad.values_mut(0)[i] = g[i] * v[i];
                grad.values_mut(1)[i] = g[i] * u[i];
            }
        }
        ParamKind::Hdp => {
            let (ga, del) = (xi.values(0), xi.values(1));
            for i in 0..d {
                grad.values_mut(0)[i] = 2.0 * g[i] * ga[i];
                grad.values_mut(1)[i] = -2.0 * g[i] * del[i];
            }
        }
        ParamKind::Ghpp | ParamKind::AdjGhpp => {
            let (u, nu) = (xi.values(0), xi.values(1));
            for (j, r) in part.iter_slices() {
                let mut acc = 0.0;
                for i in r {
                    grad.values_mut(0)[i] = g[i] * nu[j];
                    acc += g[i] * u[i];
                }
                grad.values_mut(1)[j] = acc;
            }
        }
        ParamKind::HppK => {
            let k = spec.k() as usize;
            for i in 0..d {
                for l in 0..k {
                    let mut prod = g[i];
                    for m in 0..k {
                        if m != l {
                            prod *= xi.values(m)[i];
                        }
                    }
                    grad.values_mut(l)[i] = prod;
                }
            }
        }
        ParamKind::GhppK => {
            let u = xi.values(0);
            let k = spec.k() as usize;
            for (j, r) in part.iter_slices() {
                let mut full = 1.0;
                for fac in 1..k {
                    full *= xi.values(fac)[j];
                }
                let mut acc = 0.0;
                for i in r {
                    grad.values_mut(0)[i] = g[i] * full;
                    acc += g[i] * u[i];
                }
                for fac in 1..k {
                    let mut rest = acc;
                    for other in 1..k {
                        if other != fac {
                            rest *= xi.values(other)[j];
                        }
                    }
                    grad.values_mut(fac)[j] = rest;
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
                // mu gradients and the accumulated inner product for nu
                let mut acc = 0.0;
                for i in r {
                    let mut mu_prod = 1.0;
                    for t in 0..k1 {
                        mu_prod *= xi.values(t)[i];
                    }
                    acc += g[i] * mu_prod;
                    for t in 0..k1 {
                        let mut rest = g[i] * scale;
                        for other in 0..k1 {
                            if other != t {
                                rest *= xi.values(other)[i];
                            }
                        }
                        grad.values_mut(t)[i] = rest;
                    }
                }
                for fac in 0..k2 {
                    let mut rest = acc;
                    for other in 0..k2 {
                        if other != fac {
                            rest *= xi.values(k1 + other)[j];
                        }
                    }
                    grad.values_mut(k1 + fac)[j] = rest;
                }
            }
        }
        ParamKind::HppKShared => {
            let (u, v) = (xi.values(0), xi.values(1));
            let e = spec.k() as i32 - 1;
            for i in 0..d {
                grad.values_mut(0)[i] = g[i] * v[i].powi(e);
                grad.values_mut(1)[i] = g[i] * u[i] * (e as f64) * v[i].powi(e - 1);
            }
        }
        ParamKind::HdpK => {
            let k = spec.k() as usize;
            for i in 0..d {
                for l in 0..k {
                    let mut up = g[i];
                    let mut vp = -g[i];
                    for m in 0..k {
                        if m != l {
                            up *= xi.values(m)[i];
                            vp *= xi.values(k + m)[i];
                        }
                    }
                    grad.values_mut(l)[i] = up;
                    grad.values_mut(k + l)[i] = vp;
                }
            }
        }
        ParamKind::HdpKShared => {
            let (u, v) = (xi.values(0), xi.values(1));
            let k = spec.k();
            let e = spec.k() as i32 - 1;
            for i in 0..d {
                grad.values_mut(0)[i] = g[i] * k * u[i].powi(e);
                grad.values_mut(1)[i] = -g[i] * k * v[i].powi(e);
            }
        }
        ParamKind::HPowP => {
            let (u, v) = (xi.values(0), xi.values(1));
            let e = spec.k() - 1.0;
            for i in 0..d {
                grad.values_mut(0)[i] = g[i] * abs_pow(v[i], e);
                grad.values_mut(1)[i] = g[i] * u[i] * d_abs_pow(v[i], e);
            }
        }
        ParamKind::PowerProp => {
            let v = xi.values(0);
            let k = spec.k();
            for i in 0..d {
                grad.values_mut(0)[i] = g[i] * d_signed_pow(v[i], k);
            }
        }
        ParamKind::GhPowP => {
            let (u, nu) = (xi.values(0), xi.values(1));
            let e = spec.k() - 1.0;
            for (j, r) in part.iter_slices() {
                let scale = abs_pow(nu[j], e);
                let mut acc = 0.0;
                for i in r {
                    grad.values_mut(0)[i] = g[i] * scale;
                    acc += g[i] * u[i];
                }
                grad.values_mut(1)[j] = acc * d_abs_pow(nu[j], e);
            }
        }
        ParamKind::GhPowPK1K => {
            let (mu, nu) = (xi.values(0), xi.values(1));
            let (k1, k2) = (spec.k1(), spec.k2());
            for (j, r) in part.iter_slices() {
                let scale = abs_pow(nu[j], k2);
                let mut acc = 0.0;
                for i in r {
                    grad.values_mut(0)[i] = g[i] * scale * d_signed_pow(mu[i], k1);
                    acc += g[i] * signed_pow(mu[i], k1);
                }
                grad.values_mut(1)[j] = acc * d_abs_pow(nu[j], k2);
            }
        }
    }
    Ok(grad)
}

/// The kind-specific weighted squared-`l2` surrogate penalty `R_xi`.
pub fn surrogate_penalty(spec: &ParamSpec, xi: &FactorSet) -> Result<f64> {
    xi.check_conformant(spec)?;
    let sq = |vals: &[f64]| -> f64 { vals.iter().map(|x| x * x).sum() };
    let value = match spec.kind() {
        ParamKind::Hpp
        | ParamKind::Hdp
        | ParamKind::Ghpp
        | ParamKind::HppK
        | ParamKind::GhppK
        | ParamKind::GhppK1K
        | ParamKind::HdpK
        | ParamKind::HdpKShared => xi.factors().iter().map(|f| sq(&f.values)).sum(),
        ParamKind::AdjGhpp => {
            let mut total = sq(xi.values(0));
            let nu = xi.values(1);
            for (j, &size) in spec.partition().group_sizes().iter().enumerate() {
                total += size as f64 * nu[j] * nu[j];
            }
            total
        }
        ParamKind::HppKShared | ParamKind::HPowP => {
            sq(xi.values(0)) + (spec.k() - 1.0) * sq(xi.values(1))
        }
        ParamKind::PowerProp => sq(xi.values(0)),
        ParamKind::GhPowP => sq(xi.values(0)) + (spec.k() - 1.0) * sq(xi.values(1)),
        ParamKind::GhPowPK1K => spec.k1() * sq(xi.values(0)) + spec.k2() * sq(xi.values(1)),
    };
    Ok(value)
}

/// Gradient of [`surrogate_penalty`] with respect to every factor.
pub fn surrogate_penalty_grad(spec: &ParamSpec, xi: &FactorSet) -> Result<FactorSet> {
    xi.check_conformant(spec)?;
    let mut grad = xi.clone();
    let unit = |g: &mut FactorSet| {
        for f in &mut g.factors {
            for v in &mut f.values {
                *v *= 2.0;
            }
        }
    };
    match spec.kind() {
        ParamKind::Hpp
        | ParamKind::Hdp
        | ParamKind::Ghpp
        | ParamKind::HppK
        | ParamKind::GhppK
        | ParamKind::GhppK1K
        | ParamKind::HdpK
        | ParamKind::HdpKShared
        | ParamKind::PowerProp => unit(&mut grad),
        ParamKind::AdjGhpp => {
            unit(&mut grad);
            let sizes = spec.partition().group_sizes().to_vec();
            for (j, v) in grad.values_mut(1).iter_mut().enumerate() {
                *v *= sizes[j] as f64;
            }
        }
        ParamKind::HppKShared | ParamKind::HPowP | ParamKind::GhPowP => {
            unit(&mut grad);
            let w = spec.k() - 1.0;
            for v in grad.values_mut(1) {
                *v *= w;
            }
        }
        ParamKind::GhPowPK1K => {
            unit(&mut grad);
            let (k1, k2) = (spec.k1(), spec.k2());
            for v in grad.values_mut(0) {
                *v *= k1;
            }
            for v in grad.values_mut(1) {
                *v *= k2;
            }
        }
    }
    Ok(grad)
}

/// One canonical element of the arg-min of the surrogate penalty over the
/// fiber `K^{-1}(beta)`: all factor magnitudes balanced by the equality case
/// of the (weighted) AM-GM inequality.
///
/// Sign convention: the sign of `beta` is carried by the *first* factor, all
/// other factors are non-negative. For the difference kinds the positive
/// entries live on the `u` side and the negative entries on the `v` side,
/// with the opposite side zero. Exactly-zero entries (groups) map to
/// all-zero factors.
pub fn solution_map(spec: &ParamSpec, beta: &[f64]) -> Result<FactorSet> {
    if beta.len() != spec.dim() {
        return Err(Error::shape(format!(
            "beta has length {}, expected {}",
            beta.len(),
            spec.dim()
        )));
    }
    let part = spec.partition();
    let mut xi = FactorSet::zeros(spec);
    match spec.kind() {
        ParamKind::Hpp => {
            for (i, &b) in beta.iter().enumerate() {
                let root = b.abs().sqrt();
                xi.values_mut(0)[i] = b.signum() * root;
                xi.values_mut(1)[i] = root;
            }
        }
        ParamKind::Hdp => {
            for (i, &b) in beta.iter().enumerate() {
                let root = b.abs().sqrt();
                if b > 0.0 {
                    xi.values_mut(0)[i] = root;
                } else if b < 0.0 {
                    xi.values_mut(1)[i] = root;
                }
            }
        }
        ParamKind::Ghpp => {
            for (j, r) in part.iter_slices() {
                let gn = crate::linalg::norm(&beta[r.clone()]);
                if gn == 0.0 {
                    continue;
                }
                let nu = gn.sqrt();
                xi.values_mut(1)[j] = nu;
                for i in r {
                    xi.values_mut(0)[i] = beta[i] / nu;
                }
            }
        }
        ParamKind::AdjGhpp => {
            let sizes = part.group_sizes().to_vec();
            for (j, r) in part.iter_slices() {
                let gn = crate::linalg::norm(&beta[r.clone()]);
                if gn == 0.0 {
                    continue;
                }
                // balance ||u_j||^2 = |G_j| nu_j^2 = sqrt(|G_j|) ||beta_j||
                let nu = (gn / (sizes[j] as f64).sqrt()).sqrt();
                xi.values_mut(1)[j] = nu;
                for i in r {
                    xi.values_mut(0)[i] = beta[i] / nu;
                }
            }
        }
        ParamKind::HppK => {
            let k = spec.k();
            for (i, &b) in beta.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                let root = abs_pow(b, 1.0 / k);
                xi.values_mut(0)[i] = b.signum() * root;
                for l in 1..k as usize {
                    xi.values_mut(l)[i] = root;
                }
            }
        }
        ParamKind::GhppK => {
            let k = spec.k();
            for (j, r) in part.iter_slices() {
                let gn = crate::linalg::norm(&beta[r.clone()]);
                if gn == 0.0 {
                    continue;
                }
                let nu = abs_pow(gn, 1.0 / k);
                let scale = abs_pow(gn, (k - 1.0) / k);
                for fac in 1..k as usize {
                    xi.values_mut(fac)[j] = nu;
                }
                for i in r {
                    xi.values_mut(0)[i] = beta[i] / scale;
                }
            }
        }
        ParamKind::GhppK1K => {
            let (k1, k2, k) = (spec.k1(), spec.k2(), spec.k());
            let k1u = k1 as usize;
            for (j, r) in part.iter_slices() {
                // S = ||beta_j||_{2/k1}^{2/k1}
                let s: f64 = beta[r.clone()].iter().map(|&b| abs_pow(b, 2.0 / k1)).sum();
                if s == 0.0 {
                    continue;
                }
                // balanced scalars: nu_jr^2 = S^{k1/k}; product tau = S^{k1 k2 / (2k)}
                let nu = abs_pow(s, k1 / (2.0 * k));
                let tau = abs_pow(s, k1 * k2 / (2.0 * k));
                for fac in 0..k2 as usize {
                    xi.values_mut(k1u + fac)[j] = nu;
                }
                for i in r {
                    let m = beta[i] / tau;
                    let root = abs_pow(m, 1.0 / k1);
                    xi.values_mut(0)[i] = m.signum() * root;
                    for t in 1..k1u {
                        xi.values_mut(t)[i] = root;
                    }
                }
            }
        }
        ParamKind::HppKShared | ParamKind::HPowP => {
            let k = spec.k();
            for (i, &b) in beta.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                let root = abs_pow(b, 1.0 / k);
                xi.values_mut(0)[i] = b.signum() * root;
                xi.values_mut(1)[i] = root;
            }
        }
        ParamKind::HdpK => {
            let k = spec.k();
            let ku = k as usize;
            for (i, &b) in beta.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                let root = abs_pow(b, 1.0 / k);
                let side = if b > 0.0 { 0 } else { ku };
                for l in 0..ku {
                    xi.values_mut(side + l)[i] = root;
                }
            }
        }
        ParamKind::HdpKShared => {
            let k = spec.k();
            for (i, &b) in beta.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                let root = abs_pow(b, 1.0 / k);
                if b > 0.0 {
                    xi.values_mut(0)[i] = root;
                } else {
                    xi.values_mut(1)[i] = root;
                }
            }
        }
        ParamKind::PowerProp => {
            let k = spec.k();
            for (i, &b) in beta.iter().enumerate() {
                xi.values_mut(0)[i] = signed_pow(b, 1.0 / k);
            }
        }
        ParamKind::GhPowP => {
            let k = spec.k();
            for (j, r) in part.iter_slices() {
                let gn = crate::linalg::norm(&beta[r.clone()]);
                if gn == 0.0 {
                    continue;
                }
                xi.values_mut(1)[j] = abs_pow(gn, 1.0 / k);
                let scale = abs_pow(gn, (k - 1.0) / k);
                for i in r {
                    xi.values_mut(0)[i] = beta[i] / scale;
                }
            }
        }
        ParamKind::GhPowPK1K => {
            let (k1, k2, k) = (spec.k1(), spec.k2(), spec.k());
            for (j, r) in part.iter_slices() {
                let s: f64 = beta[r.clone()].iter().map(|&b| abs_pow(b, 2.0 / k1)).sum();
                if s == 0.0 {
                    continue;
                }
                let tau = abs_pow(s, k1 * k2 / (2.0 * k));
                xi.values_mut(1)[j] = abs_pow(tau, 1.0 / k2);
                for i in r {
                    let t = beta[i] / tau;
                    xi.values_mut(0)[i] = signed_pow(t, 1.0 / k1);
                }
            }
        }
    }
    Ok(xi)
}
