//! Fixed instances shared by the benchmarks.

use mcbf_core::channel::{db_to_linear, generate_channels, ChannelSet, NetworkConfig};
use mcbf_core::qos::ItVector;

pub fn network(n: usize, k: usize, nt: usize, seed: u64) -> ChannelSet {
    generate_channels(&NetworkConfig::new(n, k, nt).with_seed(seed)).expect("valid config")
}

pub fn target_db(db: f64) -> f64 {
    db_to_linear(db)
}

/// Moderate caps that keep every subproblem feasible at a few dB.
pub fn uniform_it(ch: &ChannelSet) -> ItVector {
    ItVector::filled(ch.n(), ch.k(), 0.5)
}
