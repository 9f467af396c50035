//! Linear inverted pendulum model and its divergent component of motion.
//!
//! Horizontal axes are independent, so every operation here is applied
//! componentwise to 2-vectors.

use nalgebra::Vector2;

use crate::error::{domain, Result};

pub type Vec2 = Vector2<f64>;

/// Standard gravity used by default configurations (m/s²).
pub const GRAVITY: f64 = 9.81;

/// Pendulum parameters. The natural frequency is always derived from
/// `com_height` and `gravity`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipmParams {
    com_height: f64,
    gravity: f64,
}

impl LipmParams {
    pub fn new(com_height: f64, gravity: f64) -> Result<Self> {
        natural_frequency(com_height, gravity)?;
        Ok(Self { com_height, gravity })
    }

    pub fn com_height(&self) -> f64 {
        self.com_height
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    pub fn omega0(&self) -> f64 {
        (self.gravity / self.com_height).sqrt()
    }
}

/// CoM position and velocity of the reduced model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipmState {
    pub com: Vec2,
    pub com_vel: Vec2,
}

impl LipmState {
    pub fn new(com: Vec2, com_vel: Vec2) -> Self {
        Self { com, com_vel }
    }

    pub fn at_rest(com: Vec2) -> Self {
        Self { com, com_vel: Vec2::zeros() }
    }

    pub fn is_finite(&self) -> bool {
        self.com.iter().chain(self.com_vel.iter()).all(|v| v.is_finite())
    }

    pub fn dcm(&self, omega0: f64) -> Vec2 {
        dcm_from_state(self, omega0)
    }
}

/// `omega0 = sqrt(g / z0)`.
pub fn natural_frequency(com_height: f64, gravity: f64) -> Result<f64> {
    if !(com_height > 0.0) || !(gravity > 0.0) {
        return domain(format!(
            "natural frequency needs z0 > 0 and g > 0 (got z0={com_height}, g={gravity})"
        ));
    }
    Ok((gravity / com_height).sqrt())
}

/// `xi = x + xdot / omega0`.
pub fn dcm_from_state(state: &LipmState, omega0: f64) -> Vec2 {
    state.com + state.com_vel / omega0
}

/// Open-loop DCM evolution under a constant CoP: `(xi0 - u) e^{omega0 t} + u`.
pub fn propagate_dcm(xi0: &Vec2, cop: &Vec2, omega0: f64, t: f64) -> Result<Vec2> {
    if !(t >= 0.0) {
        return domain(format!("DCM propagation time must be non-negative (got {t})"));
    }
    Ok((xi0 - cop) * (omega0 * t).exp() + cop)
}

/// Closed-form CoM propagation under a constant CoP.
///
/// `x(t) = u + (x0 - u) e^{-w t} + (xi0 - u) sinh(w t)`, velocity from
/// `xdot = w (xi - x)`.
pub fn propagate_com(state: &LipmState, cop: &Vec2, omega0: f64, t: f64) -> Result<LipmState> {
    if !(t >= 0.0) {
        return domain(format!("CoM propagation time must be non-negative (got {t})"));
    }
    let xi0 = dcm_from_state(state, omega0);
    let grow = (omega0 * t).exp();
    let decay = (-omega0 * t).exp();
    let com = cop + (state.com - cop) * decay + (xi0 - cop) * (0.5 * (grow - decay));
    let xi = (xi0 - cop) * grow + cop;
    Ok(LipmState { com, com_vel: (xi - com) * omega0 })
}

/// `xddot = omega0^2 (x - u)`.
pub fn lipm_accel(com: &Vec2, cop: &Vec2, omega0: f64) -> Vec2 {
    (com - cop) * (omega0 * omega0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const W: f64 = 3.1321;

    /// Fixed-step RK4 on the (x, xdot) form of the pendulum.
    fn rk4(state: &LipmState, cop: &Vec2, omega0: f64, t: f64, dt: f64) -> LipmState {
        let f = |x: Vec2, v: Vec2| (v, lipm_accel(&x, cop, omega0));
        let steps = (t / dt).round() as usize;
        let h = t / steps as f64;
        let (mut x, mut v) = (state.com, state.com_vel);
        for _ in 0..steps {
            let (k1x, k1v) = f(x, v);
            let (k2x, k2v) = f(x + k1x * (h / 2.0), v + k1v * (h / 2.0));
            let (k3x, k3v) = f(x + k2x * (h / 2.0), v + k2v * (h / 2.0));
            let (k4x, k4v) = f(x + k3x * h, v + k3v * h);
            x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
            v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        }
        LipmState::new(x, v)
    }

    #[test]
    fn natural_frequency_values() {
        assert_relative_eq!(natural_frequency(1.0, 9.81).unwrap(), 3.132092, epsilon = 1e-6);
        assert_eq!(natural_frequency(9.81, 9.81).unwrap(), 1.0);
        let w = natural_frequency(0.81, 9.81).unwrap();
        assert_relative_eq!(w * w * 0.81, 9.81, epsilon = 1e-12);
        assert!(natural_frequency(0.0, 9.81).is_err());
        assert!(natural_frequency(1.0, -1.0).is_err());
        assert!(LipmParams::new(-0.5, 9.81).is_err());
    }

    #[test]
    fn params_recompute_frequency() {
        let p = LipmParams::new(0.9, 9.81).unwrap();
        assert_eq!(p.omega0(), (9.81f64 / 0.9).sqrt());
    }

    #[test]
    fn dcm_examples() {
        let rest = LipmState::at_rest(Vec2::zeros());
        assert_eq!(dcm_from_state(&rest, W), Vec2::zeros());
        let s = LipmState::new(Vec2::new(0.1, 0.0), Vec2::new(0.31321, 0.0));
        assert_relative_eq!(dcm_from_state(&s, W), Vec2::new(0.2, 0.0), epsilon = 1e-12);
        let still = LipmState::at_rest(Vec2::new(-0.4, 1.3));
        assert_eq!(dcm_from_state(&still, W), still.com);
    }

    #[test]
    fn dcm_propagation_examples() {
        let u = Vec2::new(0.3, -0.2);
        assert_eq!(propagate_dcm(&u, &u, W, 0.77).unwrap(), u);
        let xi = propagate_dcm(&Vec2::new(0.0627, 0.0), &Vec2::zeros(), W, 0.5).unwrap();
        assert!((xi.x - 0.3).abs() < 1e-3 && xi.y == 0.0);
        let xi0 = Vec2::new(0.1, 0.2);
        assert_eq!(propagate_dcm(&xi0, &u, W, 0.0).unwrap(), xi0);
        assert!(propagate_dcm(&xi0, &u, W, -1e-3).is_err());
    }

    #[test]
    fn com_propagation_examples() {
        let s = LipmState::new(Vec2::new(0.05, -0.02), Vec2::new(0.3, 0.1));
        let u = Vec2::new(0.0, 0.02);
        assert_eq!(propagate_com(&s, &u, W, 0.0).unwrap().com, s.com);
        let eq = LipmState::at_rest(u);
        for t in [0.1, 0.5, 2.0] {
            let out = propagate_com(&eq, &u, W, t).unwrap();
            assert_eq!(out.com, u);
            assert_eq!(out.com_vel, Vec2::zeros());
        }
        let closed = propagate_com(&s, &u, W, 0.4).unwrap();
        let oracle = rk4(&s, &u, W, 0.4, 1e-5);
        assert!((closed.com - oracle.com).norm() < 1e-6);
        assert!((closed.com_vel - oracle.com_vel).norm() < 1e-6);
        assert!(propagate_com(&s, &u, W, -0.1).is_err());
    }

    #[test]
    fn accel_examples() {
        let u = Vec2::new(0.2, 0.1);
        assert_eq!(lipm_accel(&u, &u, W), Vec2::zeros());
        let w = natural_frequency(1.0, 9.81).unwrap();
        assert_relative_eq!(
            lipm_accel(&Vec2::new(0.1, 0.0), &Vec2::zeros(), w),
            Vec2::new(0.981, 0.0),
            epsilon = 1e-12
        );
        let x = Vec2::new(-0.3, 0.7);
        assert_eq!(lipm_accel(&x, &u, W), -lipm_accel(&u, &x, W));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn v2() -> impl Strategy<Value = Vec2> {
            (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| Vec2::new(a, b))
        }

        proptest! {
            #[test]
            fn fixed_point(u in v2(), t in 0.0..3.0f64) {
                prop_assert_eq!(propagate_dcm(&u, &u, W, t).unwrap(), u);
            }

            #[test]
            fn semigroup(xi in v2(), u in v2(), t1 in 0.0..0.6f64, t2 in 0.0..0.6f64) {
                let direct = propagate_dcm(&xi, &u, W, t1 + t2).unwrap();
                let mid = propagate_dcm(&xi, &u, W, t1).unwrap();
                let chained = propagate_dcm(&mid, &u, W, t2).unwrap();
                prop_assert!((direct - chained).norm() <= 1e-12);
            }

            #[test]
            fn com_and_dcm_decouple(x in v2(), v in v2(), u in v2(), t in 0.0..1.0f64) {
                let s = LipmState::new(x, v);
                let after = propagate_com(&s, &u, W, t).unwrap();
                let via_com = dcm_from_state(&after, W);
                let via_dcm = propagate_dcm(&dcm_from_state(&s, W), &u, W, t).unwrap();
                prop_assert!((via_com - via_dcm).norm() <= 1e-10);
            }
        }
    }
}
