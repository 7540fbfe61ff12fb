//! The pose and velocity estimator.
//!
//! State is the pose estimate `g_hat` and the velocity estimation error
//! `phi = [omega; upsilon]`. Attitude information enters through Wahba's
//! cost on paired directions, position through the beacon means. The
//! continuous filter
//!
//! ```text
//! JJ phi_dot = ad*_phi JJ phi - Z - DD phi,   xi_hat = xi^m - Ad_{g_hat^-1} phi,   g_hat_dot = g_hat xi_hat^
//! ```
//!
//! is kept as a reference; [`lgvi_step`] is its first-order variational
//! discretization, which is what the pipeline runs.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::liegroups::{
    ad_star, adjoint_apply, exp_so3, hat, principal_angle, vex_unchecked, Pose, Rotation, Twist,
};
use crate::measproc::{MeanPair, VectorSet};
use crate::rkmk;
use crate::truthsim::TrueState;

/// Newton iteration cap in [`solve_f`].
pub const MAX_NEWTON_ITERS: usize = 50;
/// Frobenius residual accepted by [`solve_f`].
pub const F_RESIDUAL_TOL: f64 = 1e-10;
const TIKHONOV: f64 = 1e-12;

/// Symmetric (to 1e-12 relative) with a Cholesky factorization.
pub fn is_spd(m: &Matrix3<f64>) -> bool {
    if !m.iter().all(|x| x.is_finite()) {
        return false;
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return false;
    }
    m.cholesky().is_some()
}

/// Shaping function `Phi` applied to Wahba's cost, with its derivative.
/// Needs `Phi(0) = 0` and `Phi' > 0`.
#[derive(Clone, Copy, Debug)]
pub struct Shaping {
    pub value: fn(f64) -> f64,
    pub derivative: fn(f64) -> f64,
}

impl Shaping {
    pub fn identity() -> Self {
        Self {
            value: |x| x,
            derivative: |_| 1.0,
        }
    }

    /// `Phi(x) = ln(1 + x)`.
    pub fn log1p() -> Self {
        Self {
            value: f64::ln_1p,
            derivative: |x| 1.0 / (1.0 + x),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v0 = (self.value)(0.0);
        if v0.abs() > 1e-14 {
            return Err(Error::Config(format!(
                "shaping function must vanish at 0, got {v0}"
            )));
        }
        if !((self.derivative)(0.0) > 0.0) {
            return Err(Error::Config("shaping function must be increasing".into()));
        }
        Ok(())
    }
}

impl Default for Shaping {
    fn default() -> Self {
        Self::identity()
    }
}

/// Estimator gains. `j` and `m` are the inertia-like kernels, `d_r` and
/// `d_t` the dissipation matrices, `kappa` the translational potential gain.
#[derive(Clone, Copy, Debug)]
pub struct EstimatorGains {
    pub j: Matrix3<f64>,
    pub m: Matrix3<f64>,
    pub d_r: Matrix3<f64>,
    pub d_t: Matrix3<f64>,
    pub kappa: f64,
    pub phi: Shaping,
}

impl EstimatorGains {
    pub fn new(
        j: Matrix3<f64>,
        m: Matrix3<f64>,
        d_r: Matrix3<f64>,
        d_t: Matrix3<f64>,
        kappa: f64,
        phi: Shaping,
    ) -> Result<Self> {
        let g = Self {
            j,
            m,
            d_r,
            d_t,
            kappa,
            phi,
        };
        g.validate()?;
        Ok(g)
    }

    /// J = diag(0.9, 0.6, 0.3), M = diag(0.0608, 0.0486, 0.0365),
    /// D_r = diag(2.7, 2.2, 1.5), D_t = diag(0.1, 0.12, 0.14), kappa = 1,
    /// identity shaping.
    pub fn reference() -> Self {
        Self {
            j: Matrix3::from_diagonal(&Vector3::new(0.9, 0.6, 0.3)),
            m: Matrix3::from_diagonal(&Vector3::new(0.0608, 0.0486, 0.0365)),
            d_r: Matrix3::from_diagonal(&Vector3::new(2.7, 2.2, 1.5)),
            d_t: Matrix3::from_diagonal(&Vector3::new(0.1, 0.12, 0.14)),
            kappa: 1.0,
            phi: Shaping::identity(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, mat) in [
            ("J", &self.j),
            ("M", &self.m),
            ("D_r", &self.d_r),
            ("D_t", &self.d_t),
        ] {
            if !is_spd(mat) {
                return Err(Error::Config(format!(
                    "{name} must be symmetric positive definite"
                )));
            }
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Config(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        self.phi.validate()
    }

    /// `tr(J)/2 I - J`.
    pub fn jc(&self) -> Matrix3<f64> {
        Matrix3::identity() * (0.5 * self.j.trace()) - self.j
    }

    /// `blockdiag(J, M)`.
    pub fn inertia6(&self) -> Matrix6<f64> {
        block_diag(&self.j, &self.m)
    }

    /// `blockdiag(D_r, D_t)`.
    pub fn damping6(&self) -> Matrix6<f64> {
        block_diag(&self.d_r, &self.d_t)
    }
}

impl Default for EstimatorGains {
    fn default() -> Self {
        Self::reference()
    }
}

fn block_diag(a: &Matrix3<f64>, b: &Matrix3<f64>) -> Matrix6<f64> {
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(a);
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(b);
    out
}

/// Pose estimate and velocity estimation error.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EstimatorState {
    pub g_hat: Pose,
    pub phi_err: Twist,
}

impl EstimatorState {
    /// State whose velocity estimate at `g_hat` is `xi_hat0`, given the
    /// measured twist `xi_m0`: `phi = Ad_{g_hat} (xi_m0 - xi_hat0)`.
    pub fn from_estimates(g_hat: Pose, xi_hat0: &Twist, xi_m0: &Twist) -> Self {
        Self {
            g_hat,
            phi_err: adjoint_apply(&g_hat, &(*xi_m0 - *xi_hat0)),
        }
    }

    /// `xi_hat = xi^m - Ad_{g_hat^-1} phi`.
    pub fn xi_hat(&self, xi_m: &Twist) -> Twist {
        *xi_m - adjoint_apply(&self.g_hat.inverse(), &self.phi_err)
    }
}

/// Measurements at one instant, preprocessed. `means` is `None` when no
/// beacon is visible, which switches the translational potential off.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorInput {
    pub vecset: VectorSet,
    pub means: Option<MeanPair>,
    pub xi_m: Twist,
}

/// `1/2 tr((D - R_hat L^m) W (D - R_hat L^m)^T)`.
pub fn wahba_cost(r_hat: &Rotation, vs: &VectorSet) -> f64 {
    let e = &vs.d - r_hat.matrix() * &vs.l_m;
    0.5 * (&e * &vs.w * e.transpose()).trace()
}

/// `y = p_bar - R_hat a_bar^m - b_hat`.
pub fn translational_residual(g_hat: &Pose, means: &MeanPair) -> Vector3<f64> {
    means.p_bar - g_hat.rotation.matrix() * means.a_bar_m - g_hat.position
}

/// `vex(D W L^T R_hat^T - R_hat L W D^T)`.
pub fn s_gamma(r_hat: &Rotation, vs: &VectorSet) -> Vector3<f64> {
    let a = &vs.d * &vs.w * vs.l_m.transpose() * r_hat.matrix().transpose();
    vex_unchecked(&(a - a.transpose()))
}

/// `Phi(U_r) + kappa/2 |y|^2`.
pub fn potential(g_hat: &Pose, input: &EstimatorInput, gains: &EstimatorGains) -> f64 {
    let rot = (gains.phi.value)(wahba_cost(&g_hat.rotation, &input.vecset));
    let trans = input.means.as_ref().map_or(0.0, |m| {
        0.5 * gains.kappa * translational_residual(g_hat, m).norm_squared()
    });
    rot + trans
}

/// `Z = [Phi'(U_r) S_Gamma + kappa p_bar x y; kappa y]`.
pub fn z_vector(
    g_hat: &Pose,
    vs: &VectorSet,
    means: Option<&MeanPair>,
    gains: &EstimatorGains,
) -> Vector6<f64> {
    let dphi = (gains.phi.derivative)(wahba_cost(&g_hat.rotation, vs));
    let mut top = s_gamma(&g_hat.rotation, vs) * dphi;
    let mut bottom = Vector3::zeros();
    if let Some(m) = means {
        let y = translational_residual(g_hat, m);
        top += m.p_bar.cross(&y) * gains.kappa;
        bottom = y * gains.kappa;
    }
    let mut z = Vector6::zeros();
    z.fixed_rows_mut::<3>(0).copy_from(&top);
    z.fixed_rows_mut::<3>(3).copy_from(&bottom);
    z
}

/// Right-hand side of the continuous filter: `(phi_dot, xi_hat)`.
pub fn continuous_rhs(
    state: &EstimatorState,
    input: &EstimatorInput,
    gains: &EstimatorGains,
) -> (Vector6<f64>, Twist) {
    let phi = state.phi_err.to_vector();
    let jj = gains.inertia6();
    let z = z_vector(&state.g_hat, &input.vecset, input.means.as_ref(), gains);
    let rhs = ad_star(&state.phi_err) * (jj * phi) - z - gains.damping6() * phi;
    let mut phi_dot = Vector6::zeros();
    let jinv = gains.j.cholesky().expect("J is SPD");
    let minv = gains.m.cholesky().expect("M is SPD");
    phi_dot
        .fixed_rows_mut::<3>(0)
        .copy_from(&jinv.solve(&rhs.fixed_rows::<3>(0).into_owned()));
    phi_dot
        .fixed_rows_mut::<3>(3)
        .copy_from(&minv.solve(&rhs.fixed_rows::<3>(3).into_owned()));
    (phi_dot, state.xi_hat(&input.xi_m))
}

/// One fourth-order Lie group Runge-Kutta step of the continuous filter.
/// `inputs` are the measurements at `t`, `t + dt/2` and `t + dt`.
pub fn continuous_step(
    state: &EstimatorState,
    inputs: [&EstimatorInput; 3],
    gains: &EstimatorGains,
    dt: f64,
) -> EstimatorState {
    let (g_hat, phi, _) = rkmk::step(
        &state.g_hat,
        &state.phi_err.to_vector(),
        dt,
        |stage, g, x| {
            let input = inputs[[0, 1, 1, 2][stage]];
            let s = EstimatorState {
                g_hat: *g,
                phi_err: Twist::from_vector(x),
            };
            let (phi_dot, xi_hat) = continuous_rhs(&s, input, gains);
            (xi_hat, phi_dot)
        },
    );
    EstimatorState {
        g_hat,
        phi_err: Twist::from_vector(&phi),
    }
}

/// `dt hat(J omega) - (F Jc - Jc F^T)`.
pub fn implicit_residual(
    f: &Rotation,
    omega: &Vector3<f64>,
    gains: &EstimatorGains,
    dt: f64,
) -> Matrix3<f64> {
    let jc = gains.jc();
    let fm = f.matrix();
    hat(&(gains.j * omega)) * dt - (fm * jc - jc * fm.transpose())
}

/// Converged solution of the implicit rotation equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FSolve {
    pub rotation: Rotation,
    pub iterations: usize,
    /// Frobenius norm of [`implicit_residual`].
    pub residual: f64,
}

// sin(t)/t, (1-cos t)/t^2 and their derivatives divided by t.
fn exp_coeffs(t: f64) -> (f64, f64, f64, f64) {
    let t2 = t * t;
    if t < 0.1 {
        let t4 = t2 * t2;
        let t6 = t4 * t2;
        (
            1.0 - t2 / 6.0 + t4 / 120.0 - t6 / 5040.0,
            0.5 - t2 / 24.0 + t4 / 720.0 - t6 / 40320.0,
            -1.0 / 3.0 + t2 / 30.0 - t4 / 840.0 + t6 / 45360.0,
            -1.0 / 12.0 + t2 / 180.0 - t4 / 6720.0 + t6 / 453600.0,
        )
    } else {
        let (s, c) = t.sin_cos();
        let half = (0.5 * t).sin();
        let one_minus_c = 2.0 * half * half;
        (
            s / t,
            one_minus_c / t2,
            (t * c - s) / (t2 * t),
            (t * s - 2.0 * one_minus_c) / (t2 * t2),
        )
    }
}

/// Solves `(J omega)^ = (F Jc - Jc F^T) / dt` for `F = exp(f)` by Newton
/// iteration on `f`, starting from `f = dt omega`.
///
/// With `F = I + a K + b K^2`, `K = f^`, the equation reduces to
/// `a J f + b f x (J f) = dt J omega`, which is what gets iterated; the
/// Jacobian is exact. Steps that increase the residual are halved.
pub fn solve_f(omega: &Vector3<f64>, gains: &EstimatorGains, dt: f64) -> Result<FSolve> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let j = gains.j;
    let target = j * omega * dt;
    let residual = |f: &Vector3<f64>| {
        let (a, b, _, _) = exp_coeffs(f.norm());
        let jf = j * f;
        jf * a + f.cross(&jf) * b - target
    };
    let stop = 1e-15 * target.norm().max(1e-3);

    let mut f = omega * dt;
    let mut r = residual(&f);
    let mut iterations = 0;
    while r.norm() > stop && iterations < MAX_NEWTON_ITERS {
        iterations += 1;
        let theta = f.norm();
        let (a, b, da, db) = exp_coeffs(theta);
        let jf = j * f;
        let fxjf = f.cross(&jf);
        let jac = j * a
            + (hat(&f) * j - hat(&jf)) * b
            + jf * (f.transpose() * da)
            + fxjf * (f.transpose() * db);
        let step = jac.lu().solve(&r).unwrap_or_else(|| {
            let jt = jac.transpose();
            (jt * jac + Matrix3::identity() * TIKHONOV)
                .lu()
                .solve(&(jt * r))
                .unwrap_or_else(Vector3::zeros)
        });
        let mut lambda = 1.0;
        let mut next = f - step * lambda;
        let mut r_next = residual(&next);
        while r_next.norm() > r.norm() && lambda > 1e-6 {
            lambda *= 0.5;
            next = f - step * lambda;
            r_next = residual(&next);
        }
        let stalled = (next - f).norm() <= f64::EPSILON * f.norm().max(f64::MIN_POSITIVE);
        f = next;
        r = r_next;
        if stalled {
            break;
        }
    }
    let rotation = exp_so3(&f);
    let frob = implicit_residual(&rotation, omega, gains, dt).norm();
    if !(frob <= F_RESIDUAL_TOL) {
        return Err(Error::NoConvergence {
            iterations,
            residual: frob,
        });
    }
    Ok(FSolve {
        rotation,
        iterations,
        residual: frob,
    })
}

/// Result of one discrete step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LgviStep {
    pub state: EstimatorState,
    /// Velocity estimate `xi_hat_i` used to advance the pose.
    pub xi_hat: Twist,
    pub newton_iterations: usize,
}

/// Advances the estimator from `t_i` to `t_{i+1}`.
///
/// Uses `xi^m_i` from `input_i` and the vector set and means from
/// `input_ip1`:
///
/// ```text
/// (J omega_i)^ = (F_i Jc - Jc F_i^T) / dt
/// xi_hat_i     = xi^m_i - Ad_{g_hat_i^-1} phi_i
/// g_hat_{i+1}  = g_hat_i exp(dt xi_hat_i)
/// (M + dt D_t) upsilon_{i+1} = F_i^T M upsilon_i + dt kappa (b_hat + R_hat a_bar^m - p_bar)
/// (J + dt D_r) omega_{i+1}   = F_i^T J omega_i + dt (M upsilon_{i+1}) x upsilon_{i+1}
///                              + dt kappa p_bar x (b_hat + R_hat a_bar^m) - dt Phi'(U_r) S_Gamma
/// ```
pub fn lgvi_step(
    state: &EstimatorState,
    input_i: &EstimatorInput,
    input_ip1: &EstimatorInput,
    gains: &EstimatorGains,
    dt: f64,
) -> Result<LgviStep> {
    let omega = state.phi_err.omega;
    let upsilon = state.phi_err.nu;
    let fs = solve_f(&omega, gains, dt)?;
    let ft = fs.rotation.matrix().transpose();

    let xi_hat = state.xi_hat(&input_i.xi_m);
    let g_next = state.g_hat.retract(&xi_hat, dt);
    let r_next = g_next.rotation.matrix();

    let mut rhs_t = ft * (gains.m * upsilon);
    let mut rhs_r = ft * (gains.j * omega);
    if let Some(means) = &input_ip1.means {
        let c = g_next.position + r_next * means.a_bar_m;
        rhs_t += (c - means.p_bar) * (dt * gains.kappa);
        rhs_r += means.p_bar.cross(&c) * (dt * gains.kappa);
    }
    let upsilon_next = solve_spd(&(gains.m + gains.d_t * dt), &rhs_t);

    let u_r = wahba_cost(&g_next.rotation, &input_ip1.vecset);
    rhs_r += (gains.m * upsilon_next).cross(&upsilon_next) * dt;
    rhs_r -= s_gamma(&g_next.rotation, &input_ip1.vecset) * (dt * (gains.phi.derivative)(u_r));
    let omega_next = solve_spd(&(gains.j + gains.d_r * dt), &rhs_r);

    Ok(LgviStep {
        state: EstimatorState {
            g_hat: g_next,
            phi_err: Twist::new(omega_next, upsilon_next),
        },
        xi_hat,
        newton_iterations: fs.iterations,
    })
}

fn solve_spd(a: &Matrix3<f64>, b: &Vector3<f64>) -> Vector3<f64> {
    a.cholesky().expect("gain sums are SPD").solve(b)
}

/// `E = 1/2 omega^T J omega + 1/2 upsilon^T M upsilon + U(g_hat)`.
pub fn discrete_energy(
    state: &EstimatorState,
    input: &EstimatorInput,
    gains: &EstimatorGains,
) -> f64 {
    let w = &state.phi_err.omega;
    let u = &state.phi_err.nu;
    0.5 * w.dot(&(gains.j * w))
        + 0.5 * u.dot(&(gains.m * u))
        + potential(&state.g_hat, input, gains)
}

/// Attitude, position and velocity estimation errors.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorMetrics {
    /// Principal angle of `R R_hat^T`, rad.
    pub angle: f64,
    /// `|b - R R_hat^T b_hat|`, m.
    pub position: f64,
    /// `|Omega - Omega_hat|`, rad/s.
    pub omega: f64,
    /// `|nu - nu_hat|`, m/s.
    pub nu: f64,
}

impl ErrorMetrics {
    pub fn max_abs(&self) -> f64 {
        self.angle.max(self.position).max(self.omega).max(self.nu)
    }
}

pub fn error_metrics(truth: &TrueState, g_hat: &Pose, xi_hat: &Twist) -> ErrorMetrics {
    let q = truth.pose.rotation * g_hat.rotation.transpose();
    ErrorMetrics {
        angle: principal_angle(&q),
        position: (truth.pose.position - q * g_hat.position).norm(),
        omega: (truth.twist.omega - xi_hat.omega).norm(),
        nu: (truth.twist.nu - xi_hat.nu).norm(),
    }
}
