//! End-to-end experiments: configuration, the truth-to-estimate pipeline,
//! and CSV logs.
//!
//! A run samples the truth trajectory at `t_i = i dt`, synthesizes one
//! measurement frame per sample, and advances the estimator with frames
//! `i` and `i + 1`. Frame `i + 1` is generated only when step `i` needs it,
//! so nothing later is ever read.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    error_metrics, lgvi_step, ErrorMetrics, EstimatorGains, EstimatorInput, EstimatorState, Shaping,
};
use crate::liegroups::{exp_so3, Pose, Rotation, Twist};
use crate::measproc::{
    assemble_vector_set, mean_pair, velocity_from_gyro, velocity_from_points,
    velocity_from_points_anchored, Butterworth2, PointSample, WeightPolicy,
};
use crate::sensors::{Beacon, BeaconMap, CameraRig, MeasurementFrame, NoiseModel, SensorSuite};
use crate::truthsim::{
    generate_trajectory, BodyParams, ForceFrame, NoWrench, PoseKinematics, ReferenceWrench,
    TrueState, TruthConfig, WrenchProfile,
};

/// Source of the measured twist `xi^m`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityMode {
    /// The sensors report the twist itself.
    Direct,
    /// Rate gyro for `Omega`, averaged point velocities for `nu`.
    Gyro,
    /// Least-squares twist from beacon point velocities alone.
    #[default]
    Points,
}

impl std::str::FromStr for VelocityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Self::Direct),
            "gyro" => Ok(Self::Gyro),
            "points" => Ok(Self::Points),
            _ => Err(Error::Config(format!("unknown velocity mode {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WrenchKind {
    #[default]
    Reference,
    None,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapingKind {
    #[default]
    Identity,
    Log1p,
}

impl ShapingKind {
    pub fn shaping(self) -> Shaping {
        match self {
            Self::Identity => Shaping::identity(),
            Self::Log1p => Shaping::log1p(),
        }
    }
}

/// Pose as axis and angle plus position, with a body twist.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub attitude_axis: [f64; 3],
    pub attitude_angle_deg: f64,
    pub position: [f64; 3],
    pub omega: [f64; 3],
    pub nu: [f64; 3],
}

impl InitialState {
    pub fn from_state(s: &TrueState) -> Self {
        let v = s.pose.rotation.log();
        let angle = v.norm();
        let axis = if angle > 0.0 { v / angle } else { Vector3::x() };
        Self {
            attitude_axis: axis.into(),
            attitude_angle_deg: angle.to_degrees(),
            position: s.pose.position.into(),
            omega: s.twist.omega.into(),
            nu: s.twist.nu.into(),
        }
    }

    pub fn rotation(&self) -> Result<Rotation> {
        let axis = Vector3::from(self.attitude_axis);
        if self.attitude_angle_deg == 0.0 {
            return Ok(Rotation::identity());
        }
        let n = axis.norm();
        if !(n > 0.0 && n.is_finite() && self.attitude_angle_deg.is_finite()) {
            return Err(Error::Config(
                "attitude axis must be a finite non-zero vector".into(),
            ));
        }
        Ok(exp_so3(&(axis / n * self.attitude_angle_deg.to_radians())))
    }

    pub fn state(&self) -> Result<TrueState> {
        Ok(TrueState {
            pose: Pose::new(self.rotation()?, self.position.into()),
            twist: Twist::new(self.omega.into(), self.nu.into()),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub duration: f64,
    pub mass: f64,
    pub inertia: [[f64; 3]; 3],
    #[serde(default)]
    pub wrench: WrenchKind,
    #[serde(default)]
    pub force_frame: ForceFrame,
    #[serde(default)]
    pub kinematics: PoseKinematics,
    pub initial: InitialState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    /// Beacon positions; ids are assigned 1, 2, ... in list order.
    pub beacons: Vec<[f64; 3]>,
    /// Known inertial directions.
    pub directions: Vec<[f64; 3]>,
    pub camera_azimuths_deg: Vec<f64>,
    pub camera_elevations_deg: Vec<f64>,
    pub camera_half_angle_deg: f64,
    /// Bump noise half-width on every channel unless overridden below.
    pub noise_width: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_noise_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertial_noise_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_noise_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gyro_noise_width: Option<f64>,
    pub seed: u64,
}

impl SensorSection {
    pub fn noise(&self) -> NoiseModel {
        let w = self.noise_width;
        NoiseModel {
            position: self.position_noise_width.unwrap_or(w),
            inertial: self.inertial_noise_width.unwrap_or(w),
            velocity: self.velocity_noise_width.unwrap_or(w),
            gyro: self.gyro_noise_width.unwrap_or(w),
        }
    }

    /// Sets every channel to `width`, dropping per-channel overrides.
    pub fn set_noise_width(&mut self, width: f64) {
        self.noise_width = width;
        self.position_noise_width = None;
        self.inertial_noise_width = None;
        self.velocity_noise_width = None;
        self.gyro_noise_width = None;
    }

    pub fn beacon_map(&self) -> Result<BeaconMap> {
        BeaconMap::new(
            self.beacons
                .iter()
                .enumerate()
                .map(|(k, p)| Beacon {
                    id: k as u32 + 1,
                    position: (*p).into(),
                })
                .collect(),
        )
    }

    pub fn rig(&self) -> Result<CameraRig> {
        CameraRig::from_angles(
            &self.camera_azimuths_deg,
            &self.camera_elevations_deg,
            self.camera_half_angle_deg,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    #[serde(rename = "J")]
    pub j: [[f64; 3]; 3],
    #[serde(rename = "M")]
    pub m: [[f64; 3]; 3],
    #[serde(rename = "Dr")]
    pub d_r: [[f64; 3]; 3],
    #[serde(rename = "Dt")]
    pub d_t: [[f64; 3]; 3],
    pub kappa: f64,
    #[serde(default)]
    pub shaping: ShapingKind,
    #[serde(default)]
    pub velocity_mode: VelocityMode,
    #[serde(default)]
    pub weights: WeightPolicy,
    #[serde(default)]
    pub butterworth: bool,
    pub cutoff_hz: f64,
    pub initial: InitialState,
}

impl EstimatorSection {
    pub fn gains(&self) -> Result<EstimatorGains> {
        EstimatorGains::new(
            mat(&self.j),
            mat(&self.m),
            mat(&self.d_r),
            mat(&self.d_t),
            self.kappa,
            self.shaping.shaping(),
        )
    }
}

fn mat(rows: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| rows[r][c])
}

fn diag(d: [f64; 3]) -> [[f64; 3]; 3] {
    [[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]]
}

/// Complete description of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sim: SimSection,
    pub sensors: SensorSection,
    pub estimator: EstimatorSection,
}

/// The reference scenario: 10 m cube of beacons, two inertial directions,
/// three 40 degree cameras, 1 mm bump noise, 20 s at 50 Hz.
pub fn reference_config() -> ExperimentConfig {
    let body = BodyParams::reference();
    let h = 5.0;
    let beacons = BeaconMap::cube(2.0 * h)
        .iter()
        .map(|b| b.position.into())
        .collect();
    ExperimentConfig {
        sim: SimSection {
            dt: 0.02,
            duration: 20.0,
            mass: body.mass,
            inertia: diag([51.2e-3, 60.2e-3, 59.6e-3]),
            wrench: WrenchKind::Reference,
            force_frame: ForceFrame::Inertial,
            kinematics: PoseKinematics::Exact,
            initial: InitialState {
                attitude_axis: [3.0, -6.0, 2.0],
                attitude_angle_deg: 45.0,
                position: [2.5, 0.5, -3.0],
                omega: [0.2, -0.05, 0.1],
                nu: [-0.05, 0.15, 0.03],
            },
        },
        sensors: SensorSection {
            beacons,
            directions: vec![[0.0, 0.0, -1.0], [0.1, 0.975, -0.2]],
            camera_azimuths_deg: vec![0.0, 120.0, 240.0],
            camera_elevations_deg: vec![0.0, 0.0, 0.0],
            camera_half_angle_deg: 40.0,
            noise_width: 0.001,
            position_noise_width: None,
            inertial_noise_width: None,
            velocity_noise_width: None,
            gyro_noise_width: None,
            seed: 1,
        },
        estimator: EstimatorSection {
            j: diag([0.9, 0.6, 0.3]),
            m: diag([0.0608, 0.0486, 0.0365]),
            d_r: diag([2.7, 2.2, 1.5]),
            d_t: diag([0.1, 0.12, 0.14]),
            kappa: 1.0,
            shaping: ShapingKind::Identity,
            velocity_mode: VelocityMode::Points,
            weights: WeightPolicy::Uniform,
            butterworth: false,
            cutoff_hz: 5.0,
            initial: InitialState {
                attitude_axis: [1.0, 0.0, 0.0],
                attitude_angle_deg: 0.0,
                position: [0.0, 0.0, 0.0],
                omega: [0.1, 0.45, 0.05],
                nu: [2.05, 0.64, 1.29],
            },
        },
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        reference_config()
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.truth_config()?.validate()?;
        self.sensors.noise().validate()?;
        self.sensors.beacon_map()?;
        self.sensors.rig()?;
        if let Some(k) = self
            .sensors
            .directions
            .iter()
            .position(|d| Vector3::from(*d).norm() == 0.0)
        {
            return Err(Error::Config(format!("inertial direction {k} is zero")));
        }
        self.estimator.gains()?;
        self.estimator.weights.validate()?;
        self.estimator.initial.state()?;
        if self.estimator.butterworth {
            Butterworth2::new(self.estimator.cutoff_hz, self.sim.dt)?;
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.sim.duration / self.sim.dt).round() as usize
    }

    pub fn truth_config(&self) -> Result<TruthConfig> {
        Ok(TruthConfig {
            t0: 0.0,
            dt: self.sim.dt,
            duration: self.sim.duration,
            body: BodyParams {
                mass: self.sim.mass,
                inertia: mat(&self.sim.inertia),
            },
            initial: self.sim.initial.state()?,
            force_frame: self.sim.force_frame,
            kinematics: self.sim.kinematics,
        })
    }

    pub fn wrench(&self) -> Box<dyn WrenchProfile> {
        match self.sim.wrench {
            WrenchKind::Reference => Box::new(ReferenceWrench),
            WrenchKind::None => Box::new(NoWrench),
        }
    }

    pub fn sensor_suite(&self) -> Result<SensorSuite> {
        SensorSuite::new(
            self.sensors.beacon_map()?,
            self.sensors.rig()?,
            self.sensors
                .directions
                .iter()
                .map(|d| Vector3::from(*d))
                .collect(),
            self.sensors.noise(),
            self.sensors.seed,
        )
    }

    pub fn preprocessor(&self) -> Result<Preprocessor> {
        let filter = if self.estimator.butterworth {
            Butterworth2::new(self.estimator.cutoff_hz, self.sim.dt)?;
            Some(self.estimator.cutoff_hz)
        } else {
            None
        };
        Ok(Preprocessor {
            map: self.sensors.beacon_map()?,
            mode: self.estimator.velocity_mode,
            weights: self.estimator.weights,
            cutoff_hz: filter,
            dt: self.sim.dt,
            filters: None,
            last_xi: None,
        })
    }

    pub fn truth(&self) -> Result<Vec<TrueState>> {
        generate_trajectory(&self.truth_config()?, self.wrench().as_ref())
    }
}

/// Turns measurement frames into estimator inputs, holding the state the
/// velocity path needs between frames.
///
/// When the velocity cannot be reconstructed from the current frame
/// (fewer than three beacons in points mode, none in gyro mode), the
/// previous `xi^m` is kept for whatever the frame does not determine.
#[derive(Clone, Debug)]
pub struct Preprocessor {
    map: BeaconMap,
    mode: VelocityMode,
    weights: WeightPolicy,
    cutoff_hz: Option<f64>,
    dt: f64,
    filters: Option<[Butterworth2; 2]>,
    last_xi: Option<Twist>,
}

impl Preprocessor {
    pub fn process(&mut self, frame: &MeasurementFrame) -> Result<EstimatorInput> {
        let vecset = assemble_vector_set(frame, &self.map, self.weights)?;
        let means = if frame.observed.is_empty() {
            None
        } else {
            Some(mean_pair(frame, &self.map)?)
        };
        let raw = self.velocity(frame)?;
        self.last_xi = Some(raw);
        let xi_m = match self.cutoff_hz {
            None => raw,
            Some(fc) => match &mut self.filters {
                None => {
                    self.filters = Some([
                        Butterworth2::primed(fc, self.dt, &raw.omega)?,
                        Butterworth2::primed(fc, self.dt, &raw.nu)?,
                    ]);
                    raw
                }
                Some([fw, fv]) => Twist::new(fw.step(&raw.omega), fv.step(&raw.nu)),
            },
        };
        Ok(EstimatorInput {
            vecset,
            means,
            xi_m,
        })
    }

    fn velocity(&self, frame: &MeasurementFrame) -> Result<Twist> {
        let points: Vec<PointSample> = frame
            .observed
            .iter()
            .map(|o| (o.position, o.velocity))
            .collect();
        let prior = self.last_xi.unwrap_or_default();
        match self.mode {
            VelocityMode::Direct => frame.twist.ok_or_else(|| {
                Error::InsufficientVectors(format!("no twist measurement at t = {}", frame.t))
            }),
            VelocityMode::Gyro => {
                let omega = frame.gyro.ok_or_else(|| {
                    Error::InsufficientVectors(format!("no gyro measurement at t = {}", frame.t))
                })?;
                if points.is_empty() {
                    Ok(Twist::new(omega, prior.nu))
                } else {
                    velocity_from_gyro(&omega, &points)
                }
            }
            VelocityMode::Points => match velocity_from_points(&points) {
                Ok(xi) => Ok(xi),
                Err(Error::RankDeficient { .. }) => {
                    Ok(velocity_from_points_anchored(&points, &prior))
                }
                Err(e) => Err(e),
            },
        }
    }
}

/// One line of a run log: truth, estimate and errors at `t`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunRecord {
    pub t: f64,
    pub truth: TrueState,
    pub estimate: Pose,
    pub xi_hat: Twist,
    pub errors: ErrorMetrics,
    pub n_visible: usize,
    /// Newton iterations spent producing this estimate (0 at the start).
    pub newton_iters: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<RunRecord>,
}

impl RunLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&RunRecord> {
        self.records.last()
    }
}

/// What an observer of a run sees at each sample.
pub struct StepEvent<'a> {
    pub index: usize,
    pub record: &'a RunRecord,
    pub state: &'a EstimatorState,
    pub input: &'a EstimatorInput,
    pub frame: &'a MeasurementFrame,
    pub gains: &'a EstimatorGains,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunLog> {
    run_with_observer(cfg, |_| {})
}

/// Runs the pipeline, calling `observer` once per sample.
pub fn run_with_observer<F>(cfg: &ExperimentConfig, observer: F) -> Result<RunLog>
where
    F: FnMut(&StepEvent<'_>),
{
    cfg.validate()?;
    let truth = cfg.truth()?;
    run_on_truth(cfg, &truth, observer)
}

/// Runs the sensors and estimator over a given truth trajectory sampled at
/// `cfg.sim.dt`.
pub fn run_on_truth<F>(
    cfg: &ExperimentConfig,
    truth: &[TrueState],
    mut observer: F,
) -> Result<RunLog>
where
    F: FnMut(&StepEvent<'_>),
{
    let dt = cfg.sim.dt;
    let gains = cfg.estimator.gains()?;
    let mut suite = cfg.sensor_suite()?;
    let mut pre = cfg.preprocessor()?;
    let mut records = Vec::with_capacity(truth.len());
    let Some(first) = truth.first() else {
        return Ok(RunLog { records });
    };

    let mut frame = suite.measure(0.0, first);
    let mut input = pre.process(&frame).map_err(|e| e.at_step(0))?;
    let init = cfg.estimator.initial.state()?;
    let mut state = EstimatorState::from_estimates(init.pose, &init.twist, &input.xi_m);
    let mut iters = 0;

    for (i, truth_i) in truth.iter().enumerate() {
        let t = i as f64 * dt;
        let xi_hat = state.xi_hat(&input.xi_m);
        let record = RunRecord {
            t,
            truth: *truth_i,
            estimate: state.g_hat,
            xi_hat,
            errors: error_metrics(truth_i, &state.g_hat, &xi_hat),
            n_visible: frame.n_visible(),
            newton_iters: iters,
        };
        observer(&StepEvent {
            index: i,
            record: &record,
            state: &state,
            input: &input,
            frame: &frame,
            gains: &gains,
        });
        records.push(record);
        let Some(truth_next) = truth.get(i + 1) else {
            break;
        };
        let frame_next = suite.measure((i + 1) as f64 * dt, truth_next);
        let input_next = pre.process(&frame_next).map_err(|e| e.at_step(i + 1))?;
        let step = lgvi_step(&state, &input, &input_next, &gains, dt).map_err(|e| e.at_step(i))?;
        state = step.state;
        iters = step.newton_iterations;
        frame = frame_next;
        input = input_next;
    }
    Ok(RunLog { records })
}

/// Parameter varied by [`sweep`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Dt,
    NoiseWidth,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dt" => Ok(Self::Dt),
            "noise-width" | "noise_width" => Ok(Self::NoiseWidth),
            _ => Err(Error::Config(format!("unknown sweep axis {s:?}"))),
        }
    }
}

impl SweepAxis {
    pub fn apply(self, cfg: &mut ExperimentConfig, value: f64) {
        match self {
            SweepAxis::Dt => cfg.sim.dt = value,
            SweepAxis::NoiseWidth => cfg.sensors.set_noise_width(value),
        }
    }
}

/// Independent runs of `base` with `axis` set to each value, in parallel.
/// Every run gets its own sensor rng seeded from the config.
pub fn sweep(
    base: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
) -> Vec<(f64, Result<RunLog>)> {
    values
        .par_iter()
        .map(|&v| {
            let mut cfg = base.clone();
            axis.apply(&mut cfg, v);
            (v, run_experiment(&cfg))
        })
        .collect()
}

/// Column names of the run-log CSV, in order.
pub const LOG_COLUMNS: [&str; 43] = [
    "t",
    "R11",
    "R12",
    "R13",
    "R21",
    "R22",
    "R23",
    "R31",
    "R32",
    "R33",
    "bx",
    "by",
    "bz",
    "wx",
    "wy",
    "wz",
    "vx",
    "vy",
    "vz",
    "Rh11",
    "Rh12",
    "Rh13",
    "Rh21",
    "Rh22",
    "Rh23",
    "Rh31",
    "Rh32",
    "Rh33",
    "bhx",
    "bhy",
    "bhz",
    "whx",
    "why",
    "whz",
    "vhx",
    "vhy",
    "vhz",
    "err_angle",
    "err_pos",
    "err_omega",
    "err_nu",
    "n_visible",
    "newton_iters",
];

/// Column names of the truth-only CSV written by [`write_truth`].
pub const TRUTH_COLUMNS: [&str; 19] = [
    "t", "R11", "R12", "R13", "R21", "R22", "R23", "R31", "R32", "R33", "bx", "by", "bz", "wx",
    "wy", "wz", "vx", "vy", "vz",
];

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_pose(out: &mut Vec<String>, g: &Pose) {
    let r = g.rotation.matrix();
    for i in 0..3 {
        for k in 0..3 {
            out.push(num(r[(i, k)]));
        }
    }
    out.extend(g.position.iter().map(|x| num(*x)));
}

fn push_twist(out: &mut Vec<String>, xi: &Twist) {
    out.extend(xi.omega.iter().chain(xi.nu.iter()).map(|x| num(*x)));
}

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_owned(),
            source,
        },
        other => Error::Parse {
            path: path.to_owned(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Writes `log` as CSV with a header row; numbers carry 17 significant
/// digits so [`read_log`] reproduces them exactly.
pub fn write_log(log: &RunLog, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(LOG_COLUMNS).map_err(|e| csv_io(path, e))?;
    let mut row = Vec::with_capacity(LOG_COLUMNS.len());
    for r in &log.records {
        row.clear();
        row.push(num(r.t));
        push_pose(&mut row, &r.truth.pose);
        push_twist(&mut row, &r.truth.twist);
        push_pose(&mut row, &r.estimate);
        push_twist(&mut row, &r.xi_hat);
        for e in [
            r.errors.angle,
            r.errors.position,
            r.errors.omega,
            r.errors.nu,
        ] {
            row.push(num(e));
        }
        row.push(r.n_visible.to_string());
        row.push(r.newton_iters.to_string());
        w.write_record(&row).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

/// Writes a truth trajectory sampled every `dt` from `t = 0`.
pub fn write_truth(states: &[TrueState], dt: f64, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(TRUTH_COLUMNS).map_err(|e| csv_io(path, e))?;
    let mut row = Vec::with_capacity(TRUTH_COLUMNS.len());
    for (i, s) in states.iter().enumerate() {
        row.clear();
        row.push(num(i as f64 * dt));
        push_pose(&mut row, &s.pose);
        push_twist(&mut row, &s.twist);
        w.write_record(&row).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

/// Reads a log written by [`write_log`].
pub fn read_log(path: &Path) -> Result<RunLog> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    let header = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.iter().ne(LOG_COLUMNS.iter().copied()) {
        let missing: Vec<_> = LOG_COLUMNS
            .iter()
            .filter(|c| !header.iter().any(|h| h == **c))
            .collect();
        return Err(parse_err(
            1,
            format!("unexpected header; missing columns {missing:?}"),
        ));
    }
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let f = |k: usize| -> Result<f64> {
            row[k]
                .trim()
                .parse::<f64>()
                .map_err(|e| parse_err(line, format!("column {}: {e}", LOG_COLUMNS[k])))
        };
        let u = |k: usize| -> Result<usize> {
            row[k]
                .trim()
                .parse::<usize>()
                .map_err(|e| parse_err(line, format!("column {}: {e}", LOG_COLUMNS[k])))
        };
        let pose = |k: usize| -> Result<Pose> {
            let mut m = Matrix3::zeros();
            for i in 0..3 {
                for c in 0..3 {
                    m[(i, c)] = f(k + 3 * i + c)?;
                }
            }
            Ok(Pose::new(
                Rotation::from_matrix_unchecked(m),
                Vector3::new(f(k + 9)?, f(k + 10)?, f(k + 11)?),
            ))
        };
        let twist = |k: usize| -> Result<Twist> {
            Ok(Twist::new(
                Vector3::new(f(k)?, f(k + 1)?, f(k + 2)?),
                Vector3::new(f(k + 3)?, f(k + 4)?, f(k + 5)?),
            ))
        };
        records.push(RunRecord {
            t: f(0)?,
            truth: TrueState {
                pose: pose(1)?,
                twist: twist(13)?,
            },
            estimate: pose(19)?,
            xi_hat: twist(31)?,
            errors: ErrorMetrics {
                angle: f(37)?,
                position: f(38)?,
                omega: f(39)?,
                nu: f(40)?,
            },
            n_visible: u(41)?,
            newton_iters: u(42)?,
        });
    }
    Ok(RunLog { records })
}

/// Writes `text` to `path`, mapping failures to [`Error::Io`].
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    File::create(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })
}
