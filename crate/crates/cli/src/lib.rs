//! Experiment layer on top of `hadamard-sparse`: synthetic data generation,
//! evaluation metrics, the lambda-path runner, benchmark reproductions, and
//! CSV/config file handling for the command-line tool.

pub mod config;
pub mod csvout;
pub mod gd_failure;
pub mod highdim;
pub mod metrics;
pub mod mlp_demo;
pub mod pathrun;
pub mod synth;
pub mod verify;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Counter-based generator for one experiment cell, seeded from the global
/// seed and the cell index so cells are independent and order-insensitive.
pub fn cell_rng(seed: u64, cell: u64) -> ChaCha12Rng {
    let mut material = [0u8; 32];
    material[..8].copy_from_slice(&seed.to_le_bytes());
    material[8..16].copy_from_slice(&cell.to_le_bytes());
    material[16..24].copy_from_slice(&0x9e3779b97f4a7c15_u64.to_le_bytes());
    ChaCha12Rng::from_seed(material)
}
