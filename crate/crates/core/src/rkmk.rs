//! Fourth-order Runge-Kutta-Munthe-Kaas step for systems
//! `g_dot = g * xi^`, `x_dot = f(t, g, x)` with `g` in SE(3).
//!
//! The pose is carried as `g = g0 * exp(u)`; `u` follows
//! `u_dot = dexp^{-1}_{-u}(xi) = xi + [u, xi]/2 + [u, [u, xi]]/12 + O(u^3)`,
//! which is enough for order four.

use nalgebra::Vector6;

use crate::liegroups::{bracket, exp_se3, Pose, Twist};

/// Stage abscissae of the classical RK4 tableau.
pub(crate) const STAGES: [f64; 4] = [0.0, 0.5, 0.5, 1.0];

fn dexpinv(u: &Twist, xi: &Twist) -> Twist {
    let c1 = bracket(u, xi);
    let c2 = bracket(u, &c1);
    *xi + c1 * 0.5 + c2 * (1.0 / 12.0)
}

/// One step of size `dt`. `f(stage, g, x)` returns the body velocity and
/// the derivative of `x` at stage `stage` (time `t + STAGES[stage] * dt`).
///
/// Returns the new pose, the new `x`, and the effective constant twist
/// `u / dt` that carries `g` to the new pose.
pub(crate) fn step<F>(
    pose: &Pose,
    x: &Vector6<f64>,
    dt: f64,
    mut f: F,
) -> (Pose, Vector6<f64>, Twist)
where
    F: FnMut(usize, &Pose, &Vector6<f64>) -> (Twist, Vector6<f64>),
{
    let at = |u: &Twist| *pose * exp_se3(u, 1.0);

    let u1 = Twist::zero();
    let (xi1, k1) = f(0, pose, x);
    let d1 = dexpinv(&u1, &xi1);

    let u2 = d1 * (0.5 * dt);
    let x2 = x + k1 * (0.5 * dt);
    let (xi2, k2) = f(1, &at(&u2), &x2);
    let d2 = dexpinv(&u2, &xi2);

    let u3 = d2 * (0.5 * dt);
    let x3 = x + k2 * (0.5 * dt);
    let (xi3, k3) = f(2, &at(&u3), &x3);
    let d3 = dexpinv(&u3, &xi3);

    let u4 = d3 * dt;
    let x4 = x + k3 * dt;
    let (xi4, k4) = f(3, &at(&u4), &x4);
    let d4 = dexpinv(&u4, &xi4);

    let u = (d1 + d2 * 2.0 + d3 * 2.0 + d4) * (dt / 6.0);
    let x_next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    (at(&u), x_next, u * (1.0 / dt))
}
