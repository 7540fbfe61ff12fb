//! Ground-truth rigid-body motion under prescribed forces and torques.
//!
//! Body-frame Newton-Euler equations
//!
//! ```text
//! J_v Omega_dot = (J_v Omega) x Omega + tau_v
//! m_v nu_dot    = m_v nu x Omega + f_b,   f_b = R^T phi_v (inertial force) or phi_v (body force)
//! ```
//!
//! are integrated with a fourth-order Lie group Runge-Kutta scheme so the pose
//! never leaves SE(3).

use nalgebra::{Matrix3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegroups::{exp_se3, Pose, Twist};
use crate::rkmk;

/// Mass (kg) and inertia (kg m^2) of the simulated vehicle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyParams {
    pub mass: f64,
    pub inertia: Matrix3<f64>,
}

impl BodyParams {
    pub fn new(mass: f64, inertia: Matrix3<f64>) -> Result<Self> {
        let p = Self { mass, inertia };
        p.validate()?;
        Ok(p)
    }

    /// 420 g vehicle with principal inertia (51.2, 60.2, 59.6) g m^2.
    pub fn reference() -> Self {
        Self {
            mass: 0.420,
            inertia: Matrix3::from_diagonal(&Vector3::new(51.2, 60.2, 59.6)) * 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::Config(format!(
                "mass must be positive, got {}",
                self.mass
            )));
        }
        if !crate::estimator::is_spd(&self.inertia) {
            return Err(Error::Config(
                "inertia must be symmetric positive definite".into(),
            ));
        }
        Ok(())
    }
}

/// Pose and body-frame twist of the vehicle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrueState {
    pub pose: Pose,
    pub twist: Twist,
}

/// Applied force (N) and torque (N m) as functions of time.
pub trait WrenchProfile: Send + Sync {
    fn force(&self, t: f64) -> Vector3<f64>;
    fn torque(&self, t: f64) -> Vector3<f64>;
}

/// Torque- and force-free motion.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoWrench;

impl WrenchProfile for NoWrench {
    fn force(&self, _t: f64) -> Vector3<f64> {
        Vector3::zeros()
    }
    fn torque(&self, _t: f64) -> Vector3<f64> {
        Vector3::zeros()
    }
}

/// `phi_v(t) = 1e-3 [10 cos(0.1t), 2 sin(0.2t), -2 sin(0.5t)]` N and
/// `tau_v = 1e-6 phi_v` N m.
#[derive(Clone, Copy, Debug, Default)]
pub struct ReferenceWrench;

impl WrenchProfile for ReferenceWrench {
    fn force(&self, t: f64) -> Vector3<f64> {
        1e-3 * Vector3::new(
            10.0 * (0.1 * t).cos(),
            2.0 * (0.2 * t).sin(),
            -2.0 * (0.5 * t).sin(),
        )
    }
    fn torque(&self, t: f64) -> Vector3<f64> {
        1e-6 * self.force(t)
    }
}

/// Wrench built from two closures.
pub struct FnWrench<F, G> {
    pub force: F,
    pub torque: G,
}

impl<F, G> WrenchProfile for FnWrench<F, G>
where
    F: Fn(f64) -> Vector3<f64> + Send + Sync,
    G: Fn(f64) -> Vector3<f64> + Send + Sync,
{
    fn force(&self, t: f64) -> Vector3<f64> {
        (self.force)(t)
    }
    fn torque(&self, t: f64) -> Vector3<f64> {
        (self.torque)(t)
    }
}

/// Frame in which the applied force is expressed. Torque is always body-frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceFrame {
    #[default]
    Inertial,
    Body,
}

/// How sampled poses relate to sampled twists.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseKinematics {
    /// Poses from the Lie group Runge-Kutta solution.
    #[default]
    Exact,
    /// Poses recomposed as `g_{i+1} = g_i exp(dt xi_i)`: the body holds each
    /// sampled twist over its step. This is the motion model the discrete
    /// estimator assumes, so noise-free data make it an exact fixed point.
    ZeroOrderHold,
}

fn body_rates(
    params: &BodyParams,
    wrench: &dyn WrenchProfile,
    frame: ForceFrame,
    t: f64,
    pose: &Pose,
    xi: &Vector6<f64>,
) -> Vector6<f64> {
    let omega = xi.fixed_rows::<3>(0).into_owned();
    let nu = xi.fixed_rows::<3>(3).into_owned();
    let h = params.inertia * omega;
    let omega_dot = params
        .inertia
        .lu()
        .solve(&(h.cross(&omega) + wrench.torque(t)))
        .unwrap_or_else(Vector3::zeros);
    let force = match frame {
        ForceFrame::Inertial => pose.rotation.matrix().transpose() * wrench.force(t),
        ForceFrame::Body => wrench.force(t),
    };
    let nu_dot = nu.cross(&omega) + force / params.mass;
    let mut out = Vector6::zeros();
    out.fixed_rows_mut::<3>(0).copy_from(&omega_dot);
    out.fixed_rows_mut::<3>(3).copy_from(&nu_dot);
    out
}

/// One RK4 step of the Newton-Euler equations from time `t`; the pose is
/// advanced by `exp_se3` of the step-averaged twist.
pub fn step_truth(
    state: &TrueState,
    params: &BodyParams,
    wrench: &dyn WrenchProfile,
    frame: ForceFrame,
    t: f64,
    dt: f64,
) -> TrueState {
    let x = state.twist.to_vector();
    let (pose, x_next, _) = rkmk::step(&state.pose, &x, dt, |stage, g, xi| {
        let ts = t + rkmk::STAGES[stage] * dt;
        (
            Twist::from_vector(xi),
            body_rates(params, wrench, frame, ts, g, xi),
        )
    });
    TrueState {
        pose,
        twist: Twist::from_vector(&x_next),
    }
}

/// Everything needed to produce a truth trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthConfig {
    pub t0: f64,
    pub dt: f64,
    pub duration: f64,
    pub body: BodyParams,
    pub initial: TrueState,
    pub force_frame: ForceFrame,
    pub kinematics: PoseKinematics,
}

impl TruthConfig {
    /// Number of steps; the trajectory holds `steps() + 1` samples.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        self.body.validate()
    }
}

/// Samples `t_i = t0 + i dt`, `i = 0..=N`, starting from `cfg.initial`.
pub fn generate_trajectory(
    cfg: &TruthConfig,
    wrench: &dyn WrenchProfile,
) -> Result<Vec<TrueState>> {
    cfg.validate()?;
    let n = cfg.steps();
    let mut out = Vec::with_capacity(n + 1);
    out.push(cfg.initial);
    let mut state = cfg.initial;
    for i in 0..n {
        let t = cfg.t0 + i as f64 * cfg.dt;
        state = step_truth(&state, &cfg.body, wrench, cfg.force_frame, t, cfg.dt);
        out.push(state);
    }
    if cfg.kinematics == PoseKinematics::ZeroOrderHold {
        for i in 1..out.len() {
            let prev = out[i - 1];
            out[i].pose = prev.pose * exp_se3(&prev.twist, cfg.dt);
        }
    }
    Ok(out)
}
