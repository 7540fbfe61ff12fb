//! Measurement synthesis: beacon visibility through conic fields of view,
//! body-frame beacon positions and velocities, inertial directions and rate
//! gyros, all corrupted by compactly supported bump-function noise.

use std::collections::HashSet;

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegroups::{Pose, Twist};
use crate::truthsim::TrueState;

pub type BeaconId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Beacon {
    pub id: BeaconId,
    /// Position in the inertial frame, m.
    pub position: Vector3<f64>,
}

/// Inertially fixed beacons with unique ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeaconMap {
    beacons: Vec<Beacon>,
}

impl BeaconMap {
    pub fn new(beacons: Vec<Beacon>) -> Result<Self> {
        let mut seen = HashSet::new();
        for b in &beacons {
            if !seen.insert(b.id) {
                return Err(Error::Config(format!("duplicate beacon id {}", b.id)));
            }
            if !b.position.iter().all(|x| x.is_finite()) {
                return Err(Error::Config(format!(
                    "beacon {} has a non-finite position",
                    b.id
                )));
            }
        }
        Ok(Self { beacons })
    }

    /// Beacons `1..=8` at the vertices of an axis-aligned cube of side `side`
    /// centred on the origin.
    pub fn cube(side: f64) -> Self {
        let h = 0.5 * side;
        let beacons = (0..8)
            .map(|k| {
                let sx = if k & 1 == 0 { -h } else { h };
                let sy = if k & 2 == 0 { -h } else { h };
                let sz = if k & 4 == 0 { -h } else { h };
                Beacon {
                    id: k as BeaconId + 1,
                    position: Vector3::new(sx, sy, sz),
                }
            })
            .collect();
        Self { beacons }
    }

    pub fn get(&self, id: BeaconId) -> Result<&Vector3<f64>> {
        self.beacons
            .iter()
            .find(|b| b.id == id)
            .map(|b| &b.position)
            .ok_or(Error::UnknownBeacon(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Beacon> {
        self.beacons.iter()
    }

    pub fn len(&self) -> usize {
        self.beacons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beacons.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    /// Mount point `s^k` in the body frame, m.
    pub mount: Vector3<f64>,
    /// Unit boresight in the body frame.
    pub boresight: Vector3<f64>,
    /// Cone half-angle, rad.
    pub half_angle: f64,
}

impl Camera {
    /// Whether the body-frame point `a` lies inside the viewing cone.
    pub fn sees(&self, a: &Vector3<f64>) -> bool {
        let ray = a - self.mount;
        let n = ray.norm();
        if n == 0.0 {
            return false;
        }
        // Compare angles, not cosines, so a point on the cone edge counts.
        let c = (ray.dot(&self.boresight) / n).clamp(-1.0, 1.0);
        c.acos() <= self.half_angle + 1e-12
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraRig {
    cameras: Vec<Camera>,
}

impl CameraRig {
    pub fn new(cameras: Vec<Camera>) -> Result<Self> {
        for (k, c) in cameras.iter().enumerate() {
            if (c.boresight.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "camera {k}: boresight is not unit norm"
                )));
            }
            if !(c.half_angle > 0.0 && c.half_angle < std::f64::consts::FRAC_PI_2) {
                return Err(Error::Config(format!(
                    "camera {k}: half-angle {} outside (0, pi/2)",
                    c.half_angle
                )));
            }
        }
        Ok(Self { cameras })
    }

    /// Cameras at the body origin with boresights at the given azimuths and
    /// elevations (degrees) from the body x axis.
    pub fn from_angles(
        azimuths_deg: &[f64],
        elevations_deg: &[f64],
        half_angle_deg: f64,
    ) -> Result<Self> {
        if azimuths_deg.len() != elevations_deg.len() {
            return Err(Error::Config(
                "camera azimuth and elevation lists differ in length".into(),
            ));
        }
        let cameras = azimuths_deg
            .iter()
            .zip(elevations_deg)
            .map(|(az, el)| {
                let (az, el) = (az.to_radians(), el.to_radians());
                Camera {
                    mount: Vector3::zeros(),
                    boresight: Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()),
                    half_angle: half_angle_deg.to_radians(),
                }
            })
            .collect();
        Self::new(cameras)
    }

    /// Three cameras 120 degrees apart in the body x-y plane, 40 degree
    /// half-angle cones.
    pub fn reference() -> Self {
        Self::from_angles(&[0.0, 120.0, 240.0], &[0.0; 3], 40.0).expect("valid rig")
    }

    pub fn cameras(&self) -> &[Camera] {
        &self.cameras
    }
}

/// Support half-widths of the bump noise on each measurement channel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Beacon relative positions, m.
    pub position: f64,
    /// Inertial direction measurements (same units as the directions).
    pub inertial: f64,
    /// Beacon point velocities, m/s.
    pub velocity: f64,
    /// Rate gyro, rad/s.
    pub gyro: f64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self::default()
    }

    /// The same width on every channel.
    pub fn uniform(width: f64) -> Self {
        Self {
            position: width,
            inertial: width,
            velocity: width,
            gyro: width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("position", self.position),
            ("inertial", self.inertial),
            ("velocity", self.velocity),
            ("gyro", self.gyro),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} noise width must be >= 0, got {w}"
                )));
            }
        }
        Ok(())
    }
}

/// One draw from the normalized bump density `exp(-1/(1 - (x/w)^2))` on
/// `(-w, w)`. Rejection sampling against the uniform envelope.
pub fn sample_bump<R: Rng + ?Sized>(width: f64, rng: &mut R) -> f64 {
    if width == 0.0 {
        return 0.0;
    }
    loop {
        let x: f64 = rng.random_range(-1.0..1.0);
        let u: f64 = rng.random();
        // peak of the density is exp(-1); the ratio vanishes at |x| = 1
        if u < (1.0 - 1.0 / (1.0 - x * x)).exp() {
            return x * width;
        }
    }
}

fn bump3<R: Rng + ?Sized>(width: f64, rng: &mut R) -> Vector3<f64> {
    Vector3::new(
        sample_bump(width, rng),
        sample_bump(width, rng),
        sample_bump(width, rng),
    )
}

/// Ids of the beacons inside at least one camera cone, ascending.
pub fn visible_beacons(pose: &Pose, rig: &CameraRig, map: &BeaconMap) -> Vec<BeaconId> {
    let rt = pose.rotation.matrix().transpose();
    let mut ids: Vec<BeaconId> = map
        .iter()
        .filter(|b| {
            let a = rt * (b.position - pose.position);
            rig.cameras().iter().any(|c| c.sees(&a))
        })
        .map(|b| b.id)
        .collect();
    ids.sort_unstable();
    ids
}

/// `a_j^m = R^T (p_j - b) + eps_j`.
pub fn measure_positions<R: Rng + ?Sized>(
    pose: &Pose,
    map: &BeaconMap,
    ids: &[BeaconId],
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Vec<Vector3<f64>>> {
    let rt = pose.rotation.matrix().transpose();
    ids.iter()
        .map(|&id| {
            let p = map.get(id)?;
            Ok(rt * (p - pose.position) + bump3(noise.position, rng))
        })
        .collect()
}

/// `l_j^m = R^T d_j + noise`.
pub fn measure_inertial<R: Rng + ?Sized>(
    pose: &Pose,
    dirs: &[Vector3<f64>],
    noise: &NoiseModel,
    rng: &mut R,
) -> Vec<Vector3<f64>> {
    let rt = pose.rotation.matrix().transpose();
    dirs.iter()
        .map(|d| rt * d + bump3(noise.inertial, rng))
        .collect()
}

/// `v_j^m = a_j x Omega - nu + theta_j` with the noise-free `a_j`.
pub fn measure_point_velocities<R: Rng + ?Sized>(
    pose: &Pose,
    twist: &Twist,
    map: &BeaconMap,
    ids: &[BeaconId],
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Vec<Vector3<f64>>> {
    let rt = pose.rotation.matrix().transpose();
    ids.iter()
        .map(|&id| {
            let a = rt * (map.get(id)? - pose.position);
            Ok(a.cross(&twist.omega) - twist.nu + bump3(noise.velocity, rng))
        })
        .collect()
}

pub fn measure_gyro<R: Rng + ?Sized>(
    twist: &Twist,
    noise: &NoiseModel,
    rng: &mut R,
) -> Vector3<f64> {
    twist.omega + bump3(noise.gyro, rng)
}

/// One beacon seen at a measurement instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub id: BeaconId,
    /// Measured body-frame position `a_j^m`, m.
    pub position: Vector3<f64>,
    /// Measured body-frame velocity `v_j^m`, m/s.
    pub velocity: Vector3<f64>,
}

/// A known inertial direction and its body-frame measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InertialPair {
    pub reference: Vector3<f64>,
    pub measured: Vector3<f64>,
}

/// Everything the sensors report at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementFrame {
    pub t: f64,
    pub observed: Vec<Observation>,
    pub inertial: Vec<InertialPair>,
    pub gyro: Option<Vector3<f64>>,
    /// Direct twist measurement, when the configuration provides one.
    pub twist: Option<Twist>,
}

impl MeasurementFrame {
    pub fn n_visible(&self) -> usize {
        self.observed.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = BeaconId> + '_ {
        self.observed.iter().map(|o| o.id)
    }
}

/// Sensor suite with its own deterministic random stream.
#[derive(Clone, Debug)]
pub struct SensorSuite {
    pub map: BeaconMap,
    pub rig: CameraRig,
    pub inertial_directions: Vec<Vector3<f64>>,
    pub noise: NoiseModel,
    rng: ChaCha8Rng,
}

impl SensorSuite {
    pub fn new(
        map: BeaconMap,
        rig: CameraRig,
        inertial_directions: Vec<Vector3<f64>>,
        noise: NoiseModel,
        seed: u64,
    ) -> Result<Self> {
        noise.validate()?;
        if let Some(k) = inertial_directions.iter().position(|d| d.norm() == 0.0) {
            return Err(Error::Config(format!("inertial direction {k} is zero")));
        }
        Ok(Self {
            map,
            rig,
            inertial_directions,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Synthesizes the frame for `truth` at time `t`. Draw order is fixed:
    /// positions, point velocities, inertial directions, gyro, twist.
    pub fn measure(&mut self, t: f64, truth: &TrueState) -> MeasurementFrame {
        let ids = visible_beacons(&truth.pose, &self.rig, &self.map);
        let positions = measure_positions(&truth.pose, &self.map, &ids, &self.noise, &mut self.rng)
            .expect("visible ids come from the map");
        let velocities = measure_point_velocities(
            &truth.pose,
            &truth.twist,
            &self.map,
            &ids,
            &self.noise,
            &mut self.rng,
        )
        .expect("visible ids come from the map");
        let measured = measure_inertial(
            &truth.pose,
            &self.inertial_directions,
            &self.noise,
            &mut self.rng,
        );
        let gyro = measure_gyro(&truth.twist, &self.noise, &mut self.rng);
        let twist = Twist::new(
            gyro,
            truth.twist.nu + bump3(self.noise.velocity, &mut self.rng),
        );
        MeasurementFrame {
            t,
            observed: ids
                .into_iter()
                .zip(positions.into_iter().zip(velocities))
                .map(|(id, (position, velocity))| Observation {
                    id,
                    position,
                    velocity,
                })
                .collect(),
            inertial: self
                .inertial_directions
                .iter()
                .zip(measured)
                .map(|(&reference, measured)| InertialPair {
                    reference,
                    measured,
                })
                .collect(),
            gyro: Some(gyro),
            twist: Some(twist),
        }
    }
}
