use std::f64::consts::FRAC_PI_4;

use nalgebra::Vector3;
use varnav::estimator::{discrete_energy, z_vector};
use varnav::harness::{
    reference_config, run_experiment, run_on_truth, run_with_observer, sweep, write_log,
    ExperimentConfig, SweepAxis, VelocityMode,
};
use varnav::measproc::{assemble_vector_set, mean_pair, WeightPolicy};
use varnav::truthsim::PoseKinematics;

fn quiet(mut cfg: ExperimentConfig) -> ExperimentConfig {
    cfg.sensors.set_noise_width(0.0);
    cfg
}

#[test]
fn reference_run_has_one_record_per_sample() {
    let log = run_experiment(&reference_config()).unwrap();
    assert_eq!(log.len(), 1001);
    assert!(log.records.windows(2).all(|w| w[1].t > w[0].t));
    assert_eq!(log.records[0].newton_iters, 0);
    assert!(log.records[1..].iter().all(|r| r.newton_iters >= 1));
}

#[test]
fn initial_errors_match_the_initial_conditions() {
    let log = run_experiment(&reference_config()).unwrap();
    let e = log.records[0].errors;
    assert!((e.angle - FRAC_PI_4).abs() < 1e-9);
    assert!((e.position - Vector3::<f64>::new(2.5, 0.5, -3.0).norm()).abs() < 1e-9);
}

#[test]
fn single_step_from_truth_is_exact() {
    let mut cfg = quiet(reference_config());
    cfg.sim.duration = cfg.sim.dt;
    cfg.sim.kinematics = PoseKinematics::ZeroOrderHold;
    cfg.estimator.velocity_mode = VelocityMode::Direct;
    cfg.estimator.initial = cfg.sim.initial;
    let log = run_experiment(&cfg).unwrap();
    assert_eq!(log.len(), 2);
    assert!(log.last().unwrap().errors.max_abs() < 1e-9);
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reference_config();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    write_log(&run_experiment(&cfg).unwrap(), &a).unwrap();
    write_log(&run_experiment(&cfg).unwrap(), &b).unwrap();
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn estimator_never_reads_past_the_next_frame() {
    // records 0..=k depend only on samples 0..=k: cutting the trajectory
    // short must not change them
    let cfg = reference_config();
    let truth = cfg.truth().unwrap();
    let full = run_on_truth(&cfg, &truth, |_| {}).unwrap();
    for k in [0, 1, 10, 500] {
        let part = run_on_truth(&cfg, &truth[..=k], |_| {}).unwrap();
        assert_eq!(part.records[..], full.records[..=k]);
    }
}

#[test]
fn noise_free_frames_are_exact_along_the_reference_trajectory() {
    let cfg = quiet(reference_config());
    let truth = cfg.truth().unwrap();
    let mut suite = cfg.sensor_suite().unwrap();
    let map = cfg.sensors.beacon_map().unwrap();
    for (i, s) in truth.iter().enumerate().step_by(10) {
        let f = suite.measure(i as f64 * cfg.sim.dt, s);
        let vs = assemble_vector_set(&f, &map, WeightPolicy::Uniform).unwrap();
        let rt = s.pose.rotation.matrix().transpose();
        assert!((&vs.l_m - rt * &vs.d).amax() < 1e-12);
        let m = mean_pair(&f, &map).unwrap();
        assert!((m.a_bar_m - rt * (m.p_bar - s.pose.position)).norm() < 1e-12);
    }
}

#[test]
fn truth_stays_inside_the_beacon_cube_for_the_run() {
    let truth = reference_config().truth().unwrap();
    assert!(truth.iter().all(|s| s.pose.position.amax() < 5.0));
}

#[test]
fn noise_free_run_converges() {
    let log = run_experiment(&quiet(reference_config())).unwrap();
    let last = log.last().unwrap().errors;
    assert!(last.angle < 0.05 && last.position < 0.05, "{last:?}");
}

#[test]
fn gyro_run_stays_bounded_under_noise() {
    let mut cfg = reference_config();
    cfg.estimator.velocity_mode = VelocityMode::Gyro;
    let log = run_experiment(&cfg).unwrap();
    let tail = log.records.iter().filter(|r| r.t >= 15.0);
    for r in tail {
        assert!(r.errors.angle < 0.1 && r.errors.position < 0.1);
    }
}

#[test]
fn shifted_energy_decreases_between_visibility_changes() {
    // E_i + dt/2 phi_i . Z_i is what the discrete scheme dissipates; the
    // plain energy picks up O(dt^2) per step.
    let cfg = quiet(reference_config());
    let dt = cfg.sim.dt;
    let mut rows = Vec::new();
    run_with_observer(&cfg, |ev| {
        let z = z_vector(
            &ev.state.g_hat,
            &ev.input.vecset,
            ev.input.means.as_ref(),
            ev.gains,
        );
        let e = discrete_energy(ev.state, ev.input, ev.gains)
            + 0.5 * dt * ev.state.phi_err.to_vector().dot(&z);
        rows.push((e, ev.frame.ids().collect::<Vec<_>>()));
    })
    .unwrap();
    let tol = 1e-6 * rows[0].0;
    for (i, w) in rows.windows(2).enumerate() {
        if w[0].1 == w[1].1 {
            assert!(
                w[1].0 - w[0].0 <= tol,
                "rise {} at step {i}",
                w[1].0 - w[0].0
            );
        }
    }
}

#[test]
fn butterworth_path_runs_and_converges() {
    let mut cfg = quiet(reference_config());
    cfg.estimator.butterworth = true;
    cfg.estimator.velocity_mode = VelocityMode::Gyro;
    let log = run_experiment(&cfg).unwrap();
    assert!(log.last().unwrap().errors.position < 0.05);
}

#[test]
fn sweep_matches_individual_runs() {
    let base = reference_config();
    let out = sweep(&base, SweepAxis::NoiseWidth, &[0.0, 0.002]);
    assert_eq!(out.len(), 2);
    for (w, log) in out {
        let mut cfg = base.clone();
        cfg.sensors.set_noise_width(w);
        assert_eq!(log.unwrap(), run_experiment(&cfg).unwrap());
    }
    let out = sweep(&base, SweepAxis::Dt, &[0.04]);
    assert_eq!(out[0].1.as_ref().unwrap().len(), 501);
}
