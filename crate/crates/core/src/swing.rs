//! Swing-foot polynomials and real-time landing adjustment from DCM feedback.
//!
//! Horizontal axes use rest-to-rest quintics, the vertical axis a sextic
//! that also passes through an apex height at mid-swing. The landing point
//! is shifted by a live horizontal offset chosen so that the DCM reaches its
//! planned boundary at the end of the following step.

use nalgebra::Vector3;

use crate::error::{domain, Result};
use crate::lipm::Vec2;

pub type Vec3 = Vector3<f64>;

/// Polynomial coefficients in ascending powers of time.
fn eval_poly(coeffs: &[f64], t: f64) -> (f64, f64, f64) {
    let (mut p, mut v, mut a) = (0.0, 0.0, 0.0);
    for (k, c) in coeffs.iter().enumerate().rev() {
        let kf = k as f64;
        p = p * t + c;
        if k >= 1 {
            v = v * t + kf * c;
        }
        if k >= 2 {
            a = a * t + kf * (kf - 1.0) * c;
        }
    }
    (p, v, a)
}

/// Quintic meeting position, velocity and acceleration at both ends of `[0, T]`.
pub fn quintic_horizontal_coeffs(
    p0: f64,
    v0: f64,
    a0: f64,
    p_end: f64,
    v_end: f64,
    a_end: f64,
    period: f64,
) -> Result<[f64; 6]> {
    if !(period > 0.0) {
        return domain(format!("swing period must be positive (got {period})"));
    }
    let t = period;
    let (t2, t3) = (t * t, t * t * t);
    let h = p_end - p0;
    let c3 = (20.0 * h - (8.0 * v_end + 12.0 * v0) * t - (3.0 * a0 - a_end) * t2) / (2.0 * t3);
    let c4 = (-30.0 * h + (14.0 * v_end + 16.0 * v0) * t + (3.0 * a0 - 2.0 * a_end) * t2) / (2.0 * t3 * t);
    let c5 = (12.0 * h - 6.0 * (v_end + v0) * t + (a_end - a0) * t2) / (2.0 * t3 * t2);
    Ok([p0, v0, 0.5 * a0, c3, c4, c5])
}

/// Sextic starting and ending at rest, passing through `apex` at `T/2`.
pub fn sextic_vertical_coeffs(z0: f64, z_end: f64, apex: f64, period: f64) -> Result<[f64; 7]> {
    if !(period > 0.0) {
        return domain(format!("swing period must be positive (got {period})"));
    }
    let d = z_end - z0;
    let h = apex - z0;
    // coefficients in normalized time s = t / T
    let b = [
        -22.0 * d + 64.0 * h,
        81.0 * d - 192.0 * h,
        -90.0 * d + 192.0 * h,
        32.0 * d - 64.0 * h,
    ];
    let mut c = [z0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    for (k, bk) in b.iter().enumerate() {
        c[k + 3] = bk / period.powi(k as i32 + 3);
    }
    Ok(c)
}

/// Position, velocity and acceleration of the swing foot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingPose {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
}

/// One step of swing motion plus the live landing modification.
#[derive(Debug, Clone, PartialEq)]
pub struct SwingTrajectory {
    horizontal: [[f64; 6]; 2],
    vertical: [f64; 7],
    step_period: f64,
    apex_height: f64,
    modification: Vec2,
}

impl SwingTrajectory {
    /// Rest-to-rest swing from `start` to `end` (x, y, z).
    pub fn new(start: Vec3, end: Vec3, apex_height: f64, step_period: f64) -> Result<Self> {
        let hx = quintic_horizontal_coeffs(start.x, 0.0, 0.0, end.x, 0.0, 0.0, step_period)?;
        let hy = quintic_horizontal_coeffs(start.y, 0.0, 0.0, end.y, 0.0, 0.0, step_period)?;
        let vertical = sextic_vertical_coeffs(start.z, end.z, apex_height, step_period)?;
        Ok(Self {
            horizontal: [hx, hy],
            vertical,
            step_period,
            apex_height,
            modification: Vec2::zeros(),
        })
    }

    pub fn step_period(&self) -> f64 {
        self.step_period
    }

    pub fn apex_height(&self) -> f64 {
        self.apex_height
    }

    pub fn horizontal_coeffs(&self) -> &[[f64; 6]; 2] {
        &self.horizontal
    }

    pub fn vertical_coeffs(&self) -> &[f64; 7] {
        &self.vertical
    }

    pub fn modification(&self) -> Vec2 {
        self.modification
    }

    pub fn set_modification(&mut self, modification: Vec2) {
        self.modification = modification;
    }

    /// Landing point of the unmodified polynomials.
    pub fn planned_landing(&self) -> Vec3 {
        let p = self.eval_unmodified(self.step_period);
        p.position
    }

    fn eval_unmodified(&self, t: f64) -> SwingPose {
        let (px, vx, ax) = eval_poly(&self.horizontal[0], t);
        let (py, vy, ay) = eval_poly(&self.horizontal[1], t);
        let (pz, vz, az) = eval_poly(&self.vertical, t);
        SwingPose {
            position: Vec3::new(px, py, pz),
            velocity: Vec3::new(vx, vy, vz),
            acceleration: Vec3::new(ax, ay, az),
        }
    }

    /// Reference pose at `t_in_step`; the modification shifts horizontal
    /// position only.
    pub fn eval(&self, t_in_step: f64) -> Result<SwingPose> {
        eval_swing_pose(self, t_in_step)
    }
}

pub fn eval_swing_pose(traj: &SwingTrajectory, t_in_step: f64) -> Result<SwingPose> {
    if !(t_in_step >= 0.0 && t_in_step <= traj.step_period * (1.0 + 1e-12)) {
        return domain(format!("time {t_in_step} outside swing [0, {}]", traj.step_period));
    }
    let mut pose = traj.eval_unmodified(t_in_step);
    pose.position.x += traj.modification.x;
    pose.position.y += traj.modification.y;
    Ok(pose)
}

/// Measured DCM and the time elapsed in the current step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcmMeasurement {
    pub xi_mea: Vec2,
    pub t_in_step: f64,
}

/// DCM expected at the end of the current step if the CoP stays on `u_i`.
///
/// Propagates forward over the remaining time `T - t`.
pub fn predict_step_end_dcm(meas: &DcmMeasurement, u_i: &Vec2, omega0: f64, step_period: f64) -> Result<Vec2> {
    let t = meas.t_in_step;
    if !(t >= 0.0 && t <= step_period * (1.0 + 1e-12)) {
        return domain(format!("measurement time {t} outside step [0, {step_period}]"));
    }
    let remaining = (step_period - t).max(0.0);
    Ok((meas.xi_mea - u_i) * (omega0 * remaining).exp() + u_i)
}

/// Next footprint that carries the DCM from `xi_end_est` to `xi_boundary_next2`
/// in one step.
pub fn adjusted_footprint(xi_end_est: &Vec2, xi_boundary_next2: &Vec2, omega0: f64, step_period: f64) -> Result<Vec2> {
    if !(step_period > 0.0) {
        return domain(format!("step period must be positive (got {step_period})"));
    }
    let grow = (omega0 * step_period).exp();
    Ok((xi_boundary_next2 - xi_end_est * grow) / (1.0 - grow))
}

pub fn footprint_modification(u_adjusted: &Vec2, u_planned: &Vec2) -> Vec2 {
    u_adjusted - u_planned
}

/// Tuning of the live landing adjustment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjustmentConfig {
    /// Fraction of the step at its end during which the offset is held.
    pub freeze_fraction: f64,
    /// Ramp the applied offset toward its target over the remaining swing.
    pub smoothing: bool,
    /// Symmetric per-axis bound on the offset.
    pub limit: Option<Vec2>,
}

impl Default for AdjustmentConfig {
    fn default() -> Self {
        Self { freeze_fraction: 0.05, smoothing: false, limit: None }
    }
}

/// Inputs of one landing-adjustment update.
#[derive(Debug, Clone, Copy)]
pub struct AdjustmentInput {
    pub measurement: DcmMeasurement,
    /// Current stance footprint (CoP of this step).
    pub stance: Vec2,
    /// Planned landing of the swing foot.
    pub planned_next: Vec2,
    /// Planned DCM at the end of the step after next.
    pub boundary_next2: Vec2,
    pub omega0: f64,
    pub step_period: f64,
    pub dt: f64,
}

/// Raw offset from the measurement, before freezing, clamping or smoothing.
pub fn target_modification(input: &AdjustmentInput) -> Result<Vec2> {
    let end = predict_step_end_dcm(&input.measurement, &input.stance, input.omega0, input.step_period)?;
    let adjusted = adjusted_footprint(&end, &input.boundary_next2, input.omega0, input.step_period)?;
    Ok(footprint_modification(&adjusted, &input.planned_next))
}

/// Updates the live offset of `traj` for one control cycle. Returns the
/// applied offset.
pub fn update_modification(traj: &mut SwingTrajectory, input: &AdjustmentInput, config: &AdjustmentConfig) -> Result<Vec2> {
    let t = input.measurement.t_in_step;
    let freeze_at = input.step_period * (1.0 - config.freeze_fraction);
    if t >= freeze_at {
        return Ok(traj.modification());
    }
    let mut target = target_modification(input)?;
    if let Some(limit) = config.limit {
        target.x = target.x.clamp(-limit.x.abs(), limit.x.abs());
        target.y = target.y.clamp(-limit.y.abs(), limit.y.abs());
    }
    let applied = if config.smoothing {
        let current = traj.modification();
        let remaining = (freeze_at - t).max(input.dt);
        current + (target - current) * (input.dt / remaining).min(1.0)
    } else {
        target
    };
    traj.set_modification(applied);
    Ok(applied)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lipm::propagate_dcm;
    use crate::planner::{backward_recursion, FootstepPlan};
    use approx::assert_relative_eq;
    use nalgebra::{Matrix6, Vector6};
    use proptest::prelude::*;

    const W: f64 = 3.1321;
    const T: f64 = 0.5;

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    /// Solves the 6x6 boundary system directly.
    fn quintic_oracle(b: [f64; 6], t: f64) -> [f64; 6] {
        let mut m = Matrix6::zeros();
        for k in 0..6 {
            let kf = k as f64;
            m[(0, k)] = if k == 0 { 1.0 } else { 0.0 };
            m[(1, k)] = if k == 1 { 1.0 } else { 0.0 };
            m[(2, k)] = if k == 2 { 2.0 } else { 0.0 };
            m[(3, k)] = t.powi(k as i32);
            m[(4, k)] = if k >= 1 { kf * t.powi(k as i32 - 1) } else { 0.0 };
            m[(5, k)] = if k >= 2 { kf * (kf - 1.0) * t.powi(k as i32 - 2) } else { 0.0 };
        }
        let sol = m.lu().solve(&Vector6::from_row_slice(&b)).unwrap();
        let mut out = [0.0; 6];
        out.copy_from_slice(sol.as_slice());
        out
    }

    #[test]
    fn quintic_examples() {
        let c = quintic_horizontal_coeffs(0.0, 0.0, 0.0, 0.3, 0.0, 0.0, T).unwrap();
        assert!((eval_poly(&c, T / 2.0).0 - 0.15).abs() <= 1e-12);
        let z = quintic_horizontal_coeffs(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, T).unwrap();
        assert!(z.iter().all(|c| *c == 0.0));
        assert!(quintic_horizontal_coeffs(0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0).is_err());

        let b = [0.1, -0.4, 2.0, 0.35, 0.2, -1.5];
        let c = quintic_horizontal_coeffs(b[0], b[1], b[2], b[3], b[4], b[5], 0.7).unwrap();
        let o = quintic_oracle(b, 0.7);
        for k in 0..6 {
            assert_relative_eq!(c[k], o[k], epsilon = 1e-9, max_relative = 1e-9);
        }
    }

    #[test]
    fn sextic_examples() {
        let c = sextic_vertical_coeffs(0.0, 0.0, 0.05, T).unwrap();
        assert!((eval_poly(&c, T / 2.0).0 - 0.05).abs() <= 1e-15);
        let z = sextic_vertical_coeffs(0.0, 0.0, 0.0, T).unwrap();
        assert!(z.iter().all(|c| *c == 0.0));
        let c = sextic_vertical_coeffs(0.02, 0.02, 0.09, 0.6).unwrap();
        assert!(eval_poly(&c, 0.3).1.abs() <= 1e-12);
        assert!(sextic_vertical_coeffs(0.0, 0.0, 0.05, -1.0).is_err());
    }

    #[test]
    fn swing_pose_modification_is_horizontal_offset() {
        let mut traj = SwingTrajectory::new(Vec3::new(0.0, -0.1, 0.0), Vec3::new(0.3, -0.1, 0.0), 0.05, T).unwrap();
        let plain = traj.eval(0.2).unwrap();
        assert_eq!(plain, traj.eval_unmodified(0.2));
        let m = v(0.04, -0.02);
        traj.set_modification(m);
        let land = traj.eval(T).unwrap();
        assert_relative_eq!(land.position.x, 0.3 + m.x, epsilon = 1e-12);
        assert_relative_eq!(land.position.y, -0.1 + m.y, epsilon = 1e-12);
        for t in [0.0, 0.1, 0.25, 0.4, T] {
            let a = traj.eval(t).unwrap();
            let b = traj.eval_unmodified(t);
            assert_eq!(a.position.z, b.position.z);
            assert_eq!(a.velocity, b.velocity);
            assert_eq!(a.acceleration, b.acceleration);
        }
        assert!(traj.eval(T * 1.01).is_err());
        assert!(traj.eval(-0.001).is_err());
    }

    #[test]
    fn prediction_examples() {
        let meas = DcmMeasurement { xi_mea: v(0.05, 0.0), t_in_step: 0.0 };
        let end = predict_step_end_dcm(&meas, &Vec2::zeros(), W, T).unwrap();
        assert_relative_eq!(end.x, 0.23939, epsilon = 1e-5);
        let oracle = propagate_dcm(&v(0.05, 0.0), &Vec2::zeros(), W, T).unwrap();
        assert_relative_eq!(end, oracle, epsilon = 1e-15);

        let late = DcmMeasurement { xi_mea: v(0.3, 0.1), t_in_step: T };
        assert_eq!(predict_step_end_dcm(&late, &Vec2::zeros(), W, T).unwrap(), v(0.3, 0.1));
        let on = DcmMeasurement { xi_mea: v(0.2, 0.2), t_in_step: 0.1 };
        assert_eq!(predict_step_end_dcm(&on, &v(0.2, 0.2), W, T).unwrap(), v(0.2, 0.2));
        let bad = DcmMeasurement { xi_mea: v(0.0, 0.0), t_in_step: 0.6 };
        assert!(predict_step_end_dcm(&bad, &Vec2::zeros(), W, T).is_err());
    }

    #[test]
    fn adjusted_footprint_examples() {
        let u = adjusted_footprint(&v(0.23939, 0.0), &v(0.36266, 0.0), W, T).unwrap();
        assert_relative_eq!(u.x, 0.20686, epsilon = 5e-5);
        let reached = propagate_dcm(&v(0.23939, 0.0), &u, W, T).unwrap();
        assert_relative_eq!(reached, v(0.36266, 0.0), epsilon = 1e-12);

        let (u_next, xi2) = (v(0.3, -0.1), v(0.42, 0.05));
        let xi1 = (xi2 - u_next) * (-W * T).exp() + u_next;
        assert_relative_eq!(adjusted_footprint(&xi1, &xi2, W, T).unwrap(), u_next, epsilon = 1e-12);

        let p = v(0.7, -0.3);
        assert_relative_eq!(adjusted_footprint(&p, &p, W, T).unwrap(), p, epsilon = 1e-12);
        assert!(adjusted_footprint(&p, &p, W, 0.0).is_err());
    }

    #[test]
    fn modification_examples() {
        let a = v(0.1, 0.2);
        assert_eq!(footprint_modification(&a, &a), Vec2::zeros());
        let m = footprint_modification(&v(0.20686, 0.0), &v(0.3, 0.0));
        assert_relative_eq!(m, v(-0.09314, 0.0), epsilon = 1e-12);
        let b = v(-0.4, 0.05);
        assert_eq!(footprint_modification(&a, &b), -footprint_modification(&b, &a));
    }

    fn input_for(xi: Vec2, t: f64, plan: &FootstepPlan) -> AdjustmentInput {
        let s = backward_recursion(plan, W).unwrap();
        AdjustmentInput {
            measurement: DcmMeasurement { xi_mea: xi, t_in_step: t },
            stance: plan.footprints[0],
            planned_next: plan.footprints[1],
            boundary_next2: s.get(2).unwrap(),
            omega0: W,
            step_period: T,
            dt: 1e-3,
        }
    }

    fn walking_plan() -> FootstepPlan {
        FootstepPlan::new(vec![v(0.0, 0.1), v(0.2, -0.1), v(0.4, 0.1), v(0.6, -0.1), v(0.6, 0.1)], T).unwrap()
    }

    #[test]
    fn freeze_clamp_and_smoothing() {
        let plan = walking_plan();
        let s = backward_recursion(&plan, W).unwrap();
        let xi = s.get(0).unwrap() + v(0.0, 0.03);
        let mut traj = SwingTrajectory::new(Vec3::new(0.0, -0.1, 0.0), Vec3::new(0.2, -0.1, 0.0), 0.05, T).unwrap();

        let cfg = AdjustmentConfig::default();
        let frozen = update_modification(&mut traj, &input_for(xi, 0.48, &plan), &cfg).unwrap();
        assert_eq!(frozen, Vec2::zeros());

        let limited = AdjustmentConfig { limit: Some(v(0.01, 0.01)), ..cfg };
        let m = update_modification(&mut traj, &input_for(xi, 0.0, &plan), &limited).unwrap();
        assert!(m.x.abs() <= 0.01 && m.y.abs() <= 0.01 + 1e-15);
        assert_eq!(m.y, 0.01);

        traj.set_modification(Vec2::zeros());
        let smooth = AdjustmentConfig { smoothing: true, ..cfg };
        let input = input_for(xi, 0.1, &plan);
        let target = target_modification(&input).unwrap();
        let first = update_modification(&mut traj, &input, &smooth).unwrap();
        assert!(first.norm() < target.norm() && first.norm() > 0.0);
        let mut t = 0.1;
        while t < T * 0.95 - 1e-9 {
            // open-loop measurement keeps the target fixed
            let xi_t = propagate_dcm(&xi, &plan.footprints[0], W, t - 0.1).unwrap();
            update_modification(&mut traj, &input_for(xi_t, t, &plan), &smooth).unwrap();
            t += 1e-3;
        }
        assert_relative_eq!(traj.modification(), target, epsilon = 1e-9);
    }

    #[test]
    fn one_step_recovery_on_exact_pendulum() {
        let plan = walking_plan();
        let s = backward_recursion(&plan, W).unwrap();
        // DCM knocked off its reference in the middle of step 0
        let t_kick = 0.21;
        let xi_ref = propagate_dcm(&s.get(0).unwrap(), &plan.footprints[0], W, t_kick).unwrap();
        let xi_kicked = xi_ref + v(0.0, 0.05);
        let mut traj = SwingTrajectory::new(Vec3::new(0.0, -0.1, 0.0), Vec3::new(0.2, -0.1, 0.0), 0.05, T).unwrap();
        update_modification(&mut traj, &input_for(xi_kicked, t_kick, &plan), &AdjustmentConfig::default()).unwrap();
        let landed = plan.footprints[1] + traj.modification();
        let xi_end = propagate_dcm(&xi_kicked, &plan.footprints[0], W, T - t_kick).unwrap();
        let xi_next = propagate_dcm(&xi_end, &landed, W, T).unwrap();
        assert!((xi_next - s.get(2).unwrap()).norm() < 1e-3);
        assert!((xi_next - s.get(2).unwrap()).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn boundary_residuals(b in prop::array::uniform6(-2.0..2.0f64), t in 0.2..1.5f64) {
            let c = quintic_horizontal_coeffs(b[0], b[1], b[2], b[3], b[4], b[5], t).unwrap();
            let (p0, v0, a0) = eval_poly(&c, 0.0);
            let (p1, v1, a1) = eval_poly(&c, t);
            for (got, want) in [(p0, b[0]), (v0, b[1]), (a0, b[2]), (p1, b[3]), (v1, b[4]), (a1, b[5])] {
                prop_assert!((got - want).abs() <= 1e-9);
            }
        }

        #[test]
        fn sextic_residuals(z0 in -0.1..0.1f64, z1 in -0.1..0.1f64, apex in 0.0..0.2f64, t in 0.2..1.5f64) {
            let c = sextic_vertical_coeffs(z0, z1, apex, t).unwrap();
            let (p0, v0, a0) = eval_poly(&c, 0.0);
            let (p1, v1, a1) = eval_poly(&c, t);
            let (pm, _, _) = eval_poly(&c, t / 2.0);
            for (got, want) in [(p0, z0), (v0, 0.0), (a0, 0.0), (p1, z1), (v1, 0.0), (a1, 0.0), (pm, apex)] {
                prop_assert!((got - want).abs() <= 1e-9);
            }
        }

        #[test]
        fn zero_modification_on_reference(t in 0.0..T, xi_shift in -0.3..0.3f64) {
            let mut plan = walking_plan();
            for u in plan.footprints.iter_mut() {
                u.x += xi_shift;
            }
            let s = backward_recursion(&plan, W).unwrap();
            let xi = propagate_dcm(&s.get(0).unwrap(), &plan.footprints[0], W, t).unwrap();
            let m = target_modification(&input_for(xi, t, &plan)).unwrap();
            prop_assert!(m.norm() <= 1e-12);
        }

        #[test]
        fn linear_sensitivity(t in 0.0..T, dx in -0.05..0.05f64, dy in -0.05..0.05f64) {
            let plan = walking_plan();
            let s = backward_recursion(&plan, W).unwrap();
            let xi = propagate_dcm(&s.get(0).unwrap(), &plan.footprints[0], W, t).unwrap();
            let delta = v(dx, dy);
            let m0 = target_modification(&input_for(xi, t, &plan)).unwrap();
            let m1 = target_modification(&input_for(xi + delta, t, &plan)).unwrap();
            let e = (W * T).exp();
            let bound = e / (e - 1.0) * (W * (T - t)).exp() * delta.norm();
            prop_assert!((m1 - m0).norm() <= bound * (1.0 + 1e-9) + 1e-14);
        }
    }
}
