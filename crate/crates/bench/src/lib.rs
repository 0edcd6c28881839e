//! Fixtures shared by the benchmarks.

use ringamp::simulate::random_state;
use ringamp::{make_duffing_ring, DuffingRingParams, RingModel};

/// Duffing ring of `nodes` oscillators and a seeded state on its attractor scale.
pub fn duffing_fixture(nodes: usize) -> (RingModel, Vec<f64>) {
    let model = make_duffing_ring(DuffingRingParams::default(), nodes).expect("valid ring");
    let state = random_state(model.state_len(), 0.5, 7);
    (model, state)
}
