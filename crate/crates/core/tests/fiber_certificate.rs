//! Spot check: the augmented-Lagrangian fiber minimum agrees with the
//! closed-form induced regularizer for every parametrization kind.
//!
//! The full 100-draw certificate per kind runs in the acceptance suite; this
//! keeps a fast cross-kind regression in the core crate.

use hadamard_sparse::oracle::svf_certificate_error;
use hadamard_sparse::param_maps::ParamSpec;
use hadamard_sparse::spaces::GroupPartition;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

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

#[test]
fn fiber_minimum_matches_closed_form_for_every_kind() {
    let part = GroupPartition::new(vec![2, 2]).unwrap();
    let specs = vec![
        ParamSpec::hpp(4),
        ParamSpec::hdp(4),
        ParamSpec::ghpp(part.clone()),
        ParamSpec::adj_ghpp(GroupPartition::new(vec![3, 1]).unwrap()),
        ParamSpec::hppk(4, 3).unwrap(),
        ParamSpec::ghppk(part.clone(), 3).unwrap(),
        ParamSpec::ghppk1k(part.clone(), 2, 1).unwrap(),
        ParamSpec::hppk_shared(4, 4).unwrap(),
        ParamSpec::hdpk(4, 3).unwrap(),
        ParamSpec::hdpk_shared(4, 3).unwrap(),
        ParamSpec::hpowp(4, 2.5).unwrap(),
        ParamSpec::powerprop(4, 3.0).unwrap(),
        ParamSpec::ghpowp(part.clone(), 2.5).unwrap(),
        ParamSpec::ghpowpk1k(part, 1.5, 1.0).unwrap(),
    ];
    let mut rng = ChaCha12Rng::seed_from_u64(2024);
    for spec in specs {
        let mut worst = 0.0f64;
        for trial in 0..10u64 {
            let beta = random_beta(spec.dim(), &mut rng);
            let err = svf_certificate_error(&spec, &beta, 8, 1000 + trial).unwrap();
            worst = worst.max(err);
        }
        assert!(worst <= 1e-6, "{}: worst relative error {worst}", spec.kind());
    }
}
