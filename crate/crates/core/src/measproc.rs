//! Turns measurement frames into estimator inputs: the paired direction sets
//! `(D, L^m, W)`, the beacon means `(p_bar, a_bar^m)`, and a measured or
//! reconstructed twist `xi^m`.

use nalgebra::{DMatrix, DVector, Matrix3xX, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegroups::{hat, Twist};
use crate::sensors::{BeaconMap, MeasurementFrame};

/// Relative rank threshold on the stacked point-velocity matrix.
pub const RANK_TOL: f64 = 1e-6;

/// Inertial-frame directions `D`, their body-frame measurements `L^m`, and
/// the weight matrix `W`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorSet {
    pub d: Matrix3xX<f64>,
    pub l_m: Matrix3xX<f64>,
    pub w: DMatrix<f64>,
}

impl VectorSet {
    /// Builds a set with `W = I / n`.
    pub fn uniform(d: Matrix3xX<f64>, l_m: Matrix3xX<f64>) -> Self {
        let n = d.ncols();
        Self {
            d,
            l_m,
            w: DMatrix::identity(n, n) / n as f64,
        }
    }

    pub fn len(&self) -> usize {
        self.d.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.d.ncols() == 0
    }
}

/// How `W` is filled in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WeightPolicy {
    /// `W = I / n`.
    #[default]
    Uniform,
    /// Diagonal weights by vector origin, normalized to unit trace.
    ByKind { beacon: f64, inertial: f64 },
}

impl WeightPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightPolicy::Uniform => Ok(()),
            WeightPolicy::ByKind { beacon, inertial } if beacon > 0.0 && inertial > 0.0 => Ok(()),
            WeightPolicy::ByKind { .. } => Err(Error::Config("weights must be positive".into())),
        }
    }
}

/// Beacon-set means `p_bar` (inertial frame) and `a_bar^m` (body frame).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanPair {
    pub p_bar: Vector3<f64>,
    pub a_bar_m: Vector3<f64>,
}

/// Assembles `(D, L^m, W)` from a frame.
///
/// Columns are the beacon differences `p_l - p_k` / `a_l^m - a_k^m` for all
/// pairs of observed ids `k < l` (ascending), followed by the inertial pairs.
/// With exactly two vectors, their cross products are appended as a third.
pub fn assemble_vector_set(
    frame: &MeasurementFrame,
    map: &BeaconMap,
    policy: WeightPolicy,
) -> Result<VectorSet> {
    let mut obs: Vec<_> = frame.observed.iter().collect();
    obs.sort_by_key(|o| o.id);
    let mut d_cols = Vec::new();
    let mut l_cols = Vec::new();
    let mut kinds = Vec::new();
    for (i, lo) in obs.iter().enumerate() {
        let p_lo = map.get(lo.id)?;
        for hi in &obs[i + 1..] {
            let p_hi = map.get(hi.id)?;
            d_cols.push(p_lo - p_hi);
            l_cols.push(lo.position - hi.position);
            kinds.push(true);
        }
    }
    for pair in &frame.inertial {
        d_cols.push(pair.reference);
        l_cols.push(pair.measured);
        kinds.push(false);
    }
    match d_cols.len() {
        0 | 1 => {
            return Err(Error::InsufficientVectors(format!(
                "{} direction(s) at t = {}; attitude needs at least 2",
                d_cols.len(),
                frame.t
            )))
        }
        2 => {
            d_cols.push(d_cols[0].cross(&d_cols[1]));
            l_cols.push(l_cols[0].cross(&l_cols[1]));
            kinds.push(kinds[0] && kinds[1]);
        }
        _ => {}
    }
    let n = d_cols.len();
    let w = match policy {
        WeightPolicy::Uniform => DMatrix::identity(n, n) / n as f64,
        WeightPolicy::ByKind { beacon, inertial } => {
            let diag =
                DVector::from_iterator(n, kinds.iter().map(|&b| if b { beacon } else { inertial }));
            let total = diag.sum();
            DMatrix::from_diagonal(&(diag / total))
        }
    };
    Ok(VectorSet {
        d: Matrix3xX::from_columns(&d_cols),
        l_m: Matrix3xX::from_columns(&l_cols),
        w,
    })
}

/// Arithmetic means of the observed beacons' inertial and measured positions.
pub fn mean_pair(frame: &MeasurementFrame, map: &BeaconMap) -> Result<MeanPair> {
    if frame.observed.is_empty() {
        return Err(Error::InsufficientVectors(format!(
            "no beacon observed at t = {}; position is unobservable",
            frame.t
        )));
    }
    let n = frame.observed.len() as f64;
    let mut p_bar = Vector3::zeros();
    let mut a_bar_m = Vector3::zeros();
    for o in &frame.observed {
        p_bar += map.get(o.id)?;
        a_bar_m += o.position;
    }
    Ok(MeanPair {
        p_bar: p_bar / n,
        a_bar_m: a_bar_m / n,
    })
}

/// Body position and velocity of one observed point, `(a_j, v_j)`.
pub type PointSample = (Vector3<f64>, Vector3<f64>);

/// Rate-gyro case: `nu = mean_j (a_j x Omega - v_j)`.
pub fn velocity_from_gyro(omega: &Vector3<f64>, points: &[PointSample]) -> Result<Twist> {
    if points.is_empty() {
        return Err(Error::InsufficientVectors(
            "translational velocity needs at least one observed point".into(),
        ));
    }
    let sum: Vector3<f64> = points.iter().map(|(a, v)| a.cross(omega) - v).sum();
    Ok(Twist::new(*omega, sum / points.len() as f64))
}

/// Stacked `G = [G(a_1); ...; G(a_j)]`, `G(a) = [a^ -I]`.
pub fn stacked_g(points: &[PointSample]) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(3 * points.len(), 6);
    for (k, (a, _)) in points.iter().enumerate() {
        g.view_mut((3 * k, 0), (3, 3)).copy_from(&hat(a));
        g.view_mut((3 * k, 3), (3, 3))
            .copy_from(&(-nalgebra::Matrix3::identity()));
    }
    g
}

fn stacked_v(points: &[PointSample]) -> DVector<f64> {
    DVector::from_iterator(
        3 * points.len(),
        points.iter().flat_map(|(_, v)| v.iter().copied()),
    )
}

/// No-gyro case: least-squares twist `(G^T G)^{-1} G^T V` from the point
/// velocities. Needs three non-collinear points.
pub fn velocity_from_points(points: &[PointSample]) -> Result<Twist> {
    let g = stacked_g(points);
    if g.nrows() < 6 {
        return Err(Error::RankDeficient {
            sigma_min: 0.0,
            tol: RANK_TOL,
        });
    }
    let sv = g.singular_values();
    let s_max = sv.max();
    let s_min = sv.min();
    let tol = RANK_TOL * s_max;
    if s_min < tol || s_max == 0.0 {
        return Err(Error::RankDeficient {
            sigma_min: s_min,
            tol,
        });
    }
    let gt = g.transpose();
    let xi = (&gt * &g)
        .cholesky()
        .ok_or(Error::RankDeficient {
            sigma_min: s_min,
            tol,
        })?
        .solve(&(gt * stacked_v(points)));
    Ok(Twist::from_vector(&nalgebra::Vector6::from_iterator(
        xi.iter().copied(),
    )))
}

/// Twist closest to `prior` among the least-squares solutions:
/// `prior + G^+ (V - G prior)`. The components the points cannot resolve
/// keep their prior values; with full rank this equals
/// [`velocity_from_points`].
pub fn velocity_from_points_anchored(points: &[PointSample], prior: &Twist) -> Twist {
    if points.is_empty() {
        return *prior;
    }
    if let Ok(xi) = velocity_from_points(points) {
        return xi;
    }
    let g = stacked_g(points);
    let v = stacked_v(points);
    let x0 = DVector::from_iterator(6, prior.to_vector().iter().copied());
    let svd = g.clone().svd(true, true);
    let eps = RANK_TOL * svd.singular_values.max();
    let mut x = x0;
    // one refinement pass tightens the SVD solve to working precision
    for _ in 0..2 {
        match svd.solve(&(&v - &g * &x), eps) {
            Ok(dx) => x += dx,
            Err(_) => return *prior,
        }
    }
    Twist::from_vector(&nalgebra::Vector6::from_iterator(x.iter().copied()))
}

/// Second-order Butterworth low-pass, three independent channels.
///
/// Bilinear transform with the cutoff prewarped, so the -3 dB point lands
/// exactly on `cutoff_hz`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Butterworth2 {
    b: [f64; 3],
    a: [f64; 2],
    x1: Vector3<f64>,
    x2: Vector3<f64>,
    y1: Vector3<f64>,
    y2: Vector3<f64>,
}

impl Butterworth2 {
    /// Zero initial state. Requires `0 < cutoff_hz < 1 / (2 dt)`.
    pub fn new(cutoff_hz: f64, dt: f64) -> Result<Self> {
        let nyquist = 0.5 / dt;
        if !(dt > 0.0 && cutoff_hz > 0.0 && cutoff_hz < nyquist) {
            return Err(Error::Config(format!(
                "Butterworth cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) Hz"
            )));
        }
        let k = (std::f64::consts::PI * cutoff_hz * dt).tan();
        let k2 = k * k;
        let sqrt2 = std::f64::consts::SQRT_2;
        let norm = 1.0 / (1.0 + sqrt2 * k + k2);
        let b0 = k2 * norm;
        Ok(Self {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k2 - 1.0) * norm, (1.0 - sqrt2 * k + k2) * norm],
            x1: Vector3::zeros(),
            x2: Vector3::zeros(),
            y1: Vector3::zeros(),
            y2: Vector3::zeros(),
        })
    }

    /// State set to the steady response to a constant `sample`, so the first
    /// output equals the first input.
    pub fn primed(cutoff_hz: f64, dt: f64, sample: &Vector3<f64>) -> Result<Self> {
        let mut f = Self::new(cutoff_hz, dt)?;
        f.x1 = *sample;
        f.x2 = *sample;
        f.y1 = *sample;
        f.y2 = *sample;
        Ok(f)
    }

    pub fn step(&mut self, x: &Vector3<f64>) -> Vector3<f64> {
        let y = self.b[0] * x + self.b[1] * self.x1 + self.b[2] * self.x2
            - self.a[0] * self.y1
            - self.a[1] * self.y2;
        self.x2 = self.x1;
        self.x1 = *x;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }

    /// Poles of the difference equation.
    pub fn poles(&self) -> [nalgebra::Complex<f64>; 2] {
        let disc = nalgebra::Complex::new(self.a[0] * self.a[0] - 4.0 * self.a[1], 0.0).sqrt();
        let m = nalgebra::Complex::new(-self.a[0], 0.0);
        [(m + disc) * 0.5, (m - disc) * 0.5]
    }
}
