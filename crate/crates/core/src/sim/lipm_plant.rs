//! Reduced plant: the pendulum driven by a CoP input and an external push.

use crate::error::{domain, Result};
use crate::lipm::{propagate_com, LipmState, Vec2};

/// Exact propagation over `dt` with constant CoP and constant push
/// acceleration. The push enters as a shift of the effective CoP by
/// `-a / omega0²`, which is exact for the linear dynamics.
pub fn step_lipm_plant(state: &LipmState, cop: &Vec2, disturbance_accel: &Vec2, omega0: f64, dt: f64) -> Result<LipmState> {
    if !(dt > 0.0) {
        return domain(format!("plant step must be positive (got {dt})"));
    }
    let effective = cop - disturbance_accel / (omega0 * omega0);
    propagate_com(state, &effective, omega0, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lipm::lipm_accel;

    const W: f64 = 3.1321;

    fn rk4(state: &LipmState, cop: &Vec2, a: &Vec2, t: f64, h: f64) -> LipmState {
        let f = |x: &Vec2, v: &Vec2| (*v, lipm_accel(x, cop, W) + a);
        let (mut x, mut v) = (state.com, state.com_vel);
        let steps = (t / h).round() as usize;
        for _ in 0..steps {
            let (k1x, k1v) = f(&x, &v);
            let (k2x, k2v) = f(&(x + k1x * (h / 2.0)), &(v + k1v * (h / 2.0)));
            let (k3x, k3v) = f(&(x + k2x * (h / 2.0)), &(v + k2v * (h / 2.0)));
            let (k4x, k4v) = f(&(x + k3x * h), &(v + k3v * h));
            x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
            v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        }
        LipmState::new(x, v)
    }

    #[test]
    fn no_push_matches_closed_form() {
        let s = LipmState::new(Vec2::new(0.1, -0.02), Vec2::new(0.3, 0.1));
        let u = Vec2::new(0.05, 0.0);
        assert_eq!(step_lipm_plant(&s, &u, &Vec2::zeros(), W, 0.01).unwrap(), propagate_com(&s, &u, W, 0.01).unwrap());
    }

    #[test]
    fn push_matches_rk4() {
        let s = LipmState::at_rest(Vec2::zeros());
        let a = Vec2::new(0.0, 0.1 * 9.81);
        let exact = step_lipm_plant(&s, &Vec2::zeros(), &a, W, 0.3).unwrap();
        let oracle = rk4(&s, &Vec2::zeros(), &a, 0.3, 1e-5);
        assert!((exact.com - oracle.com).norm() < 1e-9 && (exact.com_vel - oracle.com_vel).norm() < 1e-9);
    }

    /// Short pulses of the same impulse converge to a pure velocity kick.
    #[test]
    fn push_impulse_limit() {
        let impulse: f64 = 0.1 * 9.81 * 0.3;
        assert!((impulse - 0.2943).abs() < 1e-12);
        let duration = 1e-4;
        let a = Vec2::new(impulse / duration, 0.0);
        let s = step_lipm_plant(&LipmState::at_rest(Vec2::zeros()), &Vec2::zeros(), &a, W, duration).unwrap();
        assert!((s.com_vel.x - impulse).abs() < 1e-4);
        assert!((s.dcm(W).x - 0.09397).abs() < 1e-4);
    }

    /// CoP under the CoM at rest: the push alone double-integrates, with the
    /// pendulum term only adding O(t^4) corrections.
    #[test]
    fn push_from_balance_matches_constant_acceleration() {
        let a = Vec2::new(0.5, -0.2);
        let t = 0.01;
        let s = step_lipm_plant(&LipmState::at_rest(Vec2::zeros()), &Vec2::zeros(), &a, W, t).unwrap();
        let analytic = a * (0.5 * t * t);
        assert!((s.com - analytic).norm() < 1e-6);
        assert!(step_lipm_plant(&s, &Vec2::zeros(), &a, W, 0.0).is_err());
    }
}
