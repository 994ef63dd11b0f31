//! Index partitions and the `l_q` / `l_{p,q}` (quasi-)norm calculus.
//!
//! Every regularizer and evaluation metric in this crate is built from the
//! two functions [`lq_norm_pow`] and [`lpq_reg`] defined here. All arithmetic
//! is f64 with summation in index order, so repeated evaluations are
//! bit-identical.

use std::ops::Range;

use crate::{Error, Result};

/// A partition of the coefficient indices `0..d` into `L` contiguous groups.
///
/// Groups are stored by size; group `j` covers the half-open index range
/// returned by [`GroupPartition::slices`]. The trivial partition (every group
/// a singleton) reduces all group-level formulas to element-wise ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPartition {
    group_sizes: Vec<usize>,
    dim: usize,
}

impl GroupPartition {
    /// Partition with the given group sizes; all sizes must be positive.
    pub fn new(group_sizes: Vec<usize>) -> Result<Self> {
        if group_sizes.is_empty() {
            return Err(Error::invalid("partition needs at least one group"));
        }
        if group_sizes.contains(&0) {
            return Err(Error::invalid("all group sizes must be >= 1"));
        }
        let dim = group_sizes.iter().sum();
        Ok(GroupPartition { group_sizes, dim })
    }

    /// The trivial partition of `0..d` into `d` singletons.
    pub fn trivial(dim: usize) -> Self {
        GroupPartition::new(vec![1; dim]).expect("dim >= 1")
    }

    /// `d` equally sized groups are not required; this splits `dim` into
    /// `num_groups` groups of size `dim / num_groups` (must divide evenly).
    pub fn even(dim: usize, num_groups: usize) -> Result<Self> {
        if num_groups == 0 || dim % num_groups != 0 {
            return Err(Error::invalid(format!(
                "cannot split {dim} indices into {num_groups} equal groups"
            )));
        }
        GroupPartition::new(vec![dim / num_groups; num_groups])
    }

    /// Total dimension `d = sum of group sizes`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of groups `L`.
    pub fn num_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    /// True when every group is a singleton.
    pub fn is_trivial(&self) -> bool {
        self.group_sizes.iter().all(|&s| s == 1)
    }

    /// The index ranges of all groups, in order, disjoint and covering `0..d`.
    pub fn slices(&self) -> Vec<Range<usize>> {
        let mut out = Vec::with_capacity(self.group_sizes.len());
        let mut start = 0;
        for &s in &self.group_sizes {
            out.push(start..start + s);
            start += s;
        }
        out
    }

    /// Iterate over `(group index, index range)` pairs without allocating.
    pub fn iter_slices(&self) -> impl Iterator<Item = (usize, Range<usize>)> + '_ {
        self.group_sizes.iter().scan(0usize, |start, &s| {
            let r = *start..*start + s;
            *start += s;
            Some(r)
        }).enumerate()
    }
}

/// A base regularizer `sum_j w_j * ||beta_j||_p^q` with strength `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegSpec {
    pub p: f64,
    pub q: f64,
    /// Per-group positive weights `w_j`.
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub partition: GroupPartition,
}

impl RegSpec {
    /// Regularizer with unit weights.
    pub fn new(p: f64, q: f64, lambda: f64, partition: GroupPartition) -> Result<Self> {
        let weights = vec![1.0; partition.num_groups()];
        RegSpec::with_weights(p, q, weights, lambda, partition)
    }

    pub fn with_weights(
        p: f64,
        q: f64,
        weights: Vec<f64>,
        lambda: f64,
        partition: GroupPartition,
    ) -> Result<Self> {
        if !(0.0 < q && q <= p && p <= 2.0) {
            return Err(Error::invalid(format!(
                "exponents must satisfy 0 < q <= p <= 2, got p={p}, q={q}"
            )));
        }
        if lambda < 0.0 {
            return Err(Error::invalid("lambda must be non-negative"));
        }
        if weights.len() != partition.num_groups() {
            return Err(Error::shape(format!(
                "{} weights for {} groups",
                weights.len(),
                partition.num_groups()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::invalid("all group weights must be positive"));
        }
        Ok(RegSpec {
            p,
            q,
            weights,
            lambda,
            partition,
        })
    }

    /// Penalty value `sum_j w_j ||beta_j||_p^q` (without `lambda`).
    pub fn eval(&self, beta: &[f64]) -> Result<f64> {
        lpq_reg(beta, self)
    }
}

/// `|x|^q` with an exact-zero branch so `x = 0` never hits `log(0)`.
#[inline]
pub fn abs_pow(x: f64, q: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if q == 1.0 {
        x.abs()
    } else if q == 2.0 {
        x * x
    } else {
        (q * x.abs().ln()).exp()
    }
}

/// `||beta||_q^q = sum_j |beta_j|^q`, for any `q > 0`.
///
/// Returns 0 exactly when `beta = 0`.
pub fn lq_norm_pow(beta: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::invalid(format!("q must be positive, got {q}")));
    }
    Ok(beta.iter().map(|&b| abs_pow(b, q)).sum())
}

/// `sum_j w_j (sum_{i in G_j} |beta_i|^p)^{q/p}`.
///
/// With `p = q`, the trivial partition, and unit weights, this sums the same
/// `|beta_i|^q` terms in the same index order as [`lq_norm_pow`].
pub fn lpq_reg(beta: &[f64], spec: &RegSpec) -> Result<f64> {
    if beta.len() != spec.partition.dim() {
        return Err(Error::shape(format!(
            "beta has length {}, partition dimension is {}",
            beta.len(),
            spec.partition.dim()
        )));
    }
    let mut total = 0.0;
    for (j, r) in spec.partition.iter_slices() {
        let inner: f64 = beta[r].iter().map(|&b| abs_pow(b, spec.p)).sum();
        total += spec.weights[j] * abs_pow_of_nonneg(inner, spec.q / spec.p);
    }
    Ok(total)
}

/// `x^e` for `x >= 0` with the same exact-zero guard as [`abs_pow`].
#[inline]
fn abs_pow_of_nonneg(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if e == 1.0 {
        x
    } else {
        (e * x.ln()).exp()
    }
}

/// The index ranges of the partition's groups (see [`GroupPartition::slices`]).
pub fn group_slices(partition: &GroupPartition) -> Vec<Range<usize>> {
    partition.slices()
}
