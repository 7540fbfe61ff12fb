//! Fixtures shared by the benchmarks.

use varnav::estimator::{EstimatorGains, EstimatorInput, EstimatorState};
use varnav::harness::{reference_config, run_with_observer};

/// Estimator state and the two inputs around step `k` of the reference run.
pub struct Snapshot {
    pub state: EstimatorState,
    pub input_i: EstimatorInput,
    pub input_ip1: EstimatorInput,
    pub gains: EstimatorGains,
    pub dt: f64,
}

pub fn snapshot(k: usize) -> Snapshot {
    let cfg = reference_config();
    let mut seen = Vec::new();
    run_with_observer(&cfg, |ev| {
        if ev.index == k || ev.index == k + 1 {
            seen.push((*ev.state, ev.input.clone(), *ev.gains));
        }
    })
    .expect("reference run");
    let (state, input_i, gains) = seen[0].clone();
    Snapshot {
        state,
        input_i,
        input_ip1: seen[1].1.clone(),
        gains,
        dt: cfg.sim.dt,
    }
}
