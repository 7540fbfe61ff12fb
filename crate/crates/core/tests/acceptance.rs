//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Lines marked INFO are diagnostics.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Matrix3xX, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use varnav::estimator::{
    continuous_step, discrete_energy, implicit_residual, lgvi_step, s_gamma, solve_f, wahba_cost,
    EstimatorGains, EstimatorState,
};
use varnav::harness::{reference_config, run_with_observer, ExperimentConfig, VelocityMode};
use varnav::liegroups::{exp_so3, log_so3, Pose, Twist};
use varnav::measproc::{velocity_from_gyro, velocity_from_points, VectorSet};
use varnav::sensors::{visible_beacons, BeaconMap, CameraRig, NoiseModel, SensorSuite};
use varnav::truthsim::{PoseKinematics, TrueState};

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(name: &str, elapsed: Duration, o: &Outcome) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!(
        "{tag}  {name}: {} [{:.3} s]",
        o.detail,
        elapsed.as_secs_f64()
    );
}

fn rand_v3(rng: &mut ChaCha8Rng, s: f64) -> Vector3<f64> {
    Vector3::new(
        rng.random_range(-s..s),
        rng.random_range(-s..s),
        rng.random_range(-s..s),
    )
}

fn noise_free(mut cfg: ExperimentConfig) -> ExperimentConfig {
    cfg.sensors.set_noise_width(0.0);
    cfg
}

fn equilibrium() -> Outcome {
    let mut cfg = noise_free(reference_config());
    // held-twist truth is the motion model of the discrete filter
    cfg.sim.kinematics = PoseKinematics::ZeroOrderHold;
    cfg.estimator.velocity_mode = VelocityMode::Direct;
    cfg.estimator.initial = cfg.sim.initial;
    let start = Instant::now();
    let log = varnav::harness::run_experiment(&cfg).expect("run");
    let elapsed = start.elapsed();
    let worst = log
        .records
        .iter()
        .map(|r| r.errors.max_abs())
        .fold(0.0, f64::max);
    let steps = log.len() - 1;
    Outcome {
        pass: steps == 1000 && worst < 1e-8 && elapsed < Duration::from_secs(1),
        detail: format!(
            "{steps} steps, max error {worst:.2e} (< 1e-8), run time {:.3} s (< 1 s)",
            elapsed.as_secs_f64()
        ),
    }
}

fn noise_free_convergence() -> Outcome {
    let cfg = noise_free(reference_config());
    let start = Instant::now();
    let mut energies = Vec::new();
    let log = run_with_observer(&cfg, |ev| {
        energies.push(discrete_energy(ev.state, ev.input, ev.gains))
    })
    .expect("run");
    let elapsed = start.elapsed();
    let first = log.records[0].errors;
    let last = log.last().unwrap().errors;
    let e0 = energies[0];
    let tol = 1e-6 * e0;
    let rises: Vec<(usize, f64)> = energies
        .windows(2)
        .enumerate()
        .skip(1)
        .map(|(i, w)| (i, w[1] - w[0]))
        .filter(|&(_, d)| d > tol)
        .collect();
    let worst_rise = rises.iter().map(|r| r.1).fold(0.0, f64::max);
    let errors_ok = last.angle < 0.05 && last.position < 0.05;
    Outcome {
        pass: errors_ok && rises.is_empty() && elapsed < Duration::from_secs(10),
        detail: format!(
            "initial ({:.4} rad, {:.3} m) -> final ({:.2e} rad, {:.2e} m) [< 0.05]; \
             energy rises above 1e-6 E0 after step 1: {} (largest {:.3e}, E0 {:.3}, first at steps {:?}); run time {:.2} s",
            first.angle,
            first.position,
            last.angle,
            last.position,
            rises.len(),
            worst_rise,
            e0,
            rises.iter().take(5).map(|r| r.0).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    }
}

fn tail_max(cfg: &ExperimentConfig, from: f64) -> (f64, f64, usize) {
    let log = varnav::harness::run_experiment(cfg).expect("run");
    let tail: Vec<_> = log.records.iter().filter(|r| r.t >= from - 1e-9).collect();
    let a = tail.iter().map(|r| r.errors.angle).fold(0.0, f64::max);
    let p = tail.iter().map(|r| r.errors.position).fold(0.0, f64::max);
    let min_vis = log.records.iter().map(|r| r.n_visible).min().unwrap_or(0);
    (a, p, min_vis)
}

fn noisy_boundedness() -> Outcome {
    let cfg = reference_config();
    let (a, p, min_vis) = tail_max(&cfg, 15.0);
    Outcome {
        pass: a < 0.1 && p < 0.1,
        detail: format!(
            "bump width {} m, velocity from beacon points: max over last 5 s angle {a:.3e} rad, position {p:.3e} m (< 0.1); \
             fewest visible beacons {min_vis}",
            cfg.sensors.noise_width
        ),
    }
}

fn noisy_gyro_info() -> String {
    let mut cfg = reference_config();
    cfg.estimator.velocity_mode = VelocityMode::Gyro;
    let (a, p, _) = tail_max(&cfg, 15.0);
    format!("same run with a rate gyro: max over last 5 s angle {a:.3e} rad, position {p:.3e} m")
}

fn gradient_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let rh = exp_so3(&rand_v3(&mut rng, 3.0));
        let n = rng.random_range(3..9);
        let d = Matrix3xX::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let l = Matrix3xX::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let w = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.random_range(0.1..1.0)));
        let vs = VectorSet { d, l_m: l, w };
        let eta = rand_v3(&mut rng, 1.0);
        let eps = 1e-4;
        let fd = (wahba_cost(&(exp_so3(&(eta * eps)) * rh), &vs)
            - wahba_cost(&(exp_so3(&(eta * -eps)) * rh), &vs))
            / (2.0 * eps);
        let analytic = -eta.dot(&s_gamma(&rh, &vs));
        worst = worst.max((fd - analytic).abs() / analytic.abs().max(1e-12));
    }
    Outcome {
        pass: worst < 1e-4,
        detail: format!("100 random instances, worst relative error {worst:.2e} (< 1e-4)"),
    }
}

fn solve_f_correctness() -> Outcome {
    let gains = EstimatorGains::reference();
    let dt = 0.02;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut res, mut orth, mut cons, mut iters) = (0.0f64, 0.0f64, 0.0f64, 0usize);
    let mut failures = 0;
    for _ in 0..1000 {
        let dir = rand_v3(&mut rng, 1.0).normalize();
        let w = dir * rng.random_range(0.0..2.0);
        match solve_f(&w, &gains, dt) {
            Ok(fs) => {
                res = res.max(implicit_residual(&fs.rotation, &w, &gains, dt).norm());
                orth = orth.max(fs.rotation.orthogonality_error());
                cons = cons.max((log_so3(&fs.rotation) / dt - w).norm() / w.norm().max(1e-12));
                iters = iters.max(fs.iterations);
            }
            Err(_) => failures += 1,
        }
    }
    // first-order consistency: halving dt halves the discrepancy
    let w = Vector3::new(1.2, -0.9, 0.7);
    let disc = |dt: f64| (log_so3(&solve_f(&w, &gains, dt).unwrap().rotation) / dt - w).norm();
    let errs: Vec<f64> = [0.04, 0.02, 0.01, 0.005].iter().map(|&h| disc(h)).collect();
    let ratios: Vec<f64> = errs.windows(2).map(|e| e[0] / e[1]).collect();
    let first_order = ratios.iter().all(|r| (r - 2.0).abs() < 0.2);
    Outcome {
        pass: failures == 0 && res <= 1e-10 && orth <= 1e-12 && cons <= 0.05 && first_order,
        detail: format!(
            "1000 rates |w| <= 2: failures {failures}, max residual {res:.2e} (<= 1e-10), SO(3) error {orth:.2e} (<= 1e-12), \
             max |log F/dt - w|/|w| {cons:.2e} (<= 0.05), max iterations {iters}; dt-sweep ratios {:?} (~2)",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
        ),
    }
}

fn velocity_reconstruction() -> Outcome {
    let map = BeaconMap::cube(10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut rec, mut cross) = (0.0f64, 0.0f64);
    let mut trials = 0;
    let mut suite = SensorSuite::new(
        map.clone(),
        CameraRig::reference(),
        vec![Vector3::z()],
        NoiseModel::none(),
        0,
    )
    .unwrap();
    while trials < 1000 {
        let truth = TrueState {
            pose: Pose::new(exp_so3(&rand_v3(&mut rng, 3.0)), rand_v3(&mut rng, 4.0)),
            twist: Twist::new(rand_v3(&mut rng, 2.0), rand_v3(&mut rng, 2.0)),
        };
        let frame = suite.measure(0.0, &truth);
        if frame.n_visible() < 3 {
            continue;
        }
        trials += 1;
        let pts: Vec<_> = frame
            .observed
            .iter()
            .map(|o| (o.position, o.velocity))
            .collect();
        let xi = velocity_from_points(&pts).expect("cube vertices are never collinear");
        let g = velocity_from_gyro(&truth.twist.omega, &pts).unwrap();
        rec = rec.max((xi.to_vector() - truth.twist.to_vector()).norm());
        cross = cross.max((xi.to_vector() - g.to_vector()).norm());
    }
    Outcome {
        pass: rec < 1e-10 && cross < 1e-10,
        detail: format!("1000 random twists with >= 3 visible beacons: recovery error {rec:.2e}, gyro-path disagreement {cross:.2e} (< 1e-10)"),
    }
}

fn state_distance(a: &EstimatorState, b: &EstimatorState) -> f64 {
    let dr = log_so3(&(a.g_hat.rotation.transpose() * b.g_hat.rotation)).norm();
    let db = (a.g_hat.position - b.g_hat.position).norm();
    let dp = (a.phi_err.to_vector() - b.phi_err.to_vector()).norm();
    dr + db + dp
}

fn order_of_accuracy() -> (Outcome, String) {
    let fine = 0.000625;
    let horizon = 2.0;
    let mut cfg = noise_free(reference_config());
    cfg.sim.dt = fine;
    cfg.sim.duration = horizon;
    cfg.estimator.velocity_mode = VelocityMode::Direct;
    let truth = cfg.truth().unwrap();
    let mut suite = cfg.sensor_suite().unwrap();
    let mut pre = cfg.preprocessor().unwrap();
    let mut ids = std::collections::BTreeSet::new();
    let inputs: Vec<_> = truth
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let f = suite.measure(i as f64 * fine, s);
            ids.insert(f.ids().collect::<Vec<_>>());
            pre.process(&f).unwrap()
        })
        .collect();
    let gains = cfg.estimator.gains().unwrap();
    let init = cfg.estimator.initial.state().unwrap();
    let s0 = EstimatorState::from_estimates(init.pose, &init.twist, &inputs[0].xi_m);

    // continuous reference, RK4 with step 2 * fine
    let mut reference = s0;
    for k in (0..inputs.len() - 1).step_by(2) {
        reference = continuous_step(
            &reference,
            [&inputs[k], &inputs[k + 1], &inputs[k + 2]],
            &gains,
            2.0 * fine,
        );
    }

    let dts = [0.02, 0.01, 0.005];
    let errs: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            let stride = (dt / fine).round() as usize;
            let mut s = s0;
            let mut k = 0;
            while k + stride < inputs.len() {
                s = lgvi_step(&s, &inputs[k], &inputs[k + stride], &gains, dt)
                    .unwrap()
                    .state;
                k += stride;
            }
            state_distance(&s, &reference)
        })
        .collect();
    let x: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let y: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = x.iter().sum::<f64>() / 3.0;
    let my = y.iter().sum::<f64>() / 3.0;
    let slope = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / x.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
    (
        Outcome {
            pass: (slope - 1.0).abs() <= 0.3,
            detail: format!(
                "2 s noise-free run, errors at dt 0.02/0.01/0.005 = {:.3e}/{:.3e}/{:.3e}, log-log slope {slope:.3} (1 +/- 0.3)",
                errs[0], errs[1], errs[2]
            ),
        },
        format!("visible sets during the order-of-accuracy run: {ids:?}"),
    )
}

fn visibility() -> Outcome {
    let cfg = reference_config();
    let truth = cfg.truth().unwrap();
    let map = cfg.sensors.beacon_map().unwrap();
    let rig = cfg.sensors.rig().unwrap();
    let sets: Vec<Vec<u32>> = truth
        .iter()
        .map(|s| visible_beacons(&s.pose, &rig, &map))
        .collect();
    let min_vis = sets.iter().map(|s| s.len()).min().unwrap();
    let short = sets.iter().filter(|s| s.len() < 3).count();
    let first_short = sets.iter().position(|s| s.len() < 3);
    let common_min = sets
        .windows(2)
        .map(|w| w[0].iter().filter(|id| w[1].contains(id)).count())
        .min()
        .unwrap();
    Outcome {
        pass: min_vis >= 3 && common_min >= 3,
        detail: format!(
            "{} samples: fewest visible {min_vis}, samples with < 3 visible {short}{}, fewest common to successive samples {common_min} (need >= 3)",
            sets.len(),
            first_short.map_or(String::new(), |i| format!(" (first at t = {:.2} s)", i as f64 * cfg.sim.dt)),
        ),
    }
}

fn main() -> ExitCode {
    let mut all = true;
    let mut check = |name: &str, f: &dyn Fn() -> (Outcome, Option<String>)| {
        let start = Instant::now();
        let (o, info) = f();
        report(name, start.elapsed(), &o);
        if let Some(info) = info {
            println!("INFO  {name}: {info}");
        }
        all &= o.pass;
    };
    check("equilibrium fixed point", &|| (equilibrium(), None));
    check("noise-free convergence", &|| {
        (noise_free_convergence(), None)
    });
    check("noisy boundedness", &|| {
        (noisy_boundedness(), Some(noisy_gyro_info()))
    });
    check("gradient identity", &|| (gradient_identity(), None));
    check("solve_F correctness", &|| (solve_f_correctness(), None));
    check("velocity reconstruction exactness", &|| {
        (velocity_reconstruction(), None)
    });
    check("order of accuracy", &|| {
        let (o, info) = order_of_accuracy();
        (o, Some(info))
    });
    check("visibility guarantee", &|| (visibility(), None));
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
