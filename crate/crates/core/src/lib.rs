//! Variational pose and velocity estimation on SE(3).
//!
//! The estimator fuses body-frame measurements of inertially fixed beacons
//! and known inertial directions into a pose estimate `g_hat` and a velocity
//! error `phi`, evolving them with a dissipative Lie group variational
//! integrator. The crate also carries the pieces needed to exercise it end
//! to end: a rigid-body truth simulator, a sensor synthesizer with bounded
//! (bump-function) noise, measurement preprocessing, and an experiment
//! harness with CSV logging.
//!
//! Module map:
//! - [`liegroups`]: SO(3)/SE(3) kernel.
//! - [`truthsim`]: Newton-Euler truth trajectories.
//! - [`sensors`]: beacon visibility and measurement synthesis.
//! - [`measproc`]: vector sets, means and velocity reconstruction.
//! - [`estimator`]: potentials, the continuous filter and the LGVI step.
//! - [`harness`]: configuration, pipeline, logs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod harness;
pub mod liegroups;
pub mod measproc;
pub mod sensors;
pub mod truthsim;

mod rkmk;

pub use error::{Error, Result};
pub use estimator::{EstimatorGains, EstimatorInput, EstimatorState, Shaping};
pub use harness::{ExperimentConfig, RunLog, RunRecord};
pub use liegroups::{Pose, Rotation, Twist};
pub use measproc::{MeanPair, VectorSet};
pub use sensors::{BeaconMap, CameraRig, MeasurementFrame, NoiseModel};
pub use truthsim::{BodyParams, TrueState};

pub use nalgebra;
