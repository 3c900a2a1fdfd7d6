//! Shared fixtures for the benchmarks.

use tubetopo::flowgen::{synth_triples, Triple};
use tubetopo::synth::{generate_vessel, VesselParams};
use tubetopo::BinaryMask;

/// A 128x128 vessel mask with two trees and one loop.
pub fn vessel_mask(seed: u64) -> BinaryMask {
    generate_vessel(&VesselParams {
        n_trees: 2,
        n_loops: 1,
        seed,
        ..VesselParams::default()
    })
    .expect("default canvas fits two trees")
    .mask
}

/// Small refinement triples for training-step timings.
pub fn triples(n: usize) -> Vec<Triple> {
    synth_triples(&VesselParams::small(0), n, 1).expect("small canvas generates")
}
