//! Closed-loop scenario execution on either plant.

use nalgebra::DVector;

use super::config::{PlantKind, PushConfig, ScenarioConfig};
use super::gait::GaitState;
use super::lipm_plant::step_lipm_plant;
use super::log::{LogRow, RunStatus, TrajectoryLog};
use super::multibody::{impact_map, initial_pose, step_multibody_plant, ContactAnchor, PlantOptions};
use crate::error::{Error, Result};
use crate::lipm::{LipmParams, LipmState, Vec2};
use crate::planner::FootstepPlan;
use crate::swing::{update_modification, AdjustmentConfig, AdjustmentInput, DcmMeasurement, Vec3};
use crate::tracking::{desired_cop, project_cop, DcmGains, SupportPolygon};
use crate::whole_body::{solve_whole_body, ContactState, Foot, FootReference, Kinematics, Profile, WholeBodyTargets, N_DOF};

/// Runs the scenario; divergence ends the run early with a partial log.
pub fn run_scenario(config: &ScenarioConfig) -> Result<TrajectoryLog> {
    config.validate()?;
    match config.plant {
        PlantKind::Lipm => run_lipm(config),
        PlantKind::Multibody => run_multibody(config),
    }
}

fn vec3(p: Vec2) -> Vec3 {
    Vec3::new(p.x, p.y, 0.0)
}

/// Per-cycle DCM control shared by both plants.
struct Controller {
    gains: DcmGains,
    adjustment: Option<AdjustmentConfig>,
    profile: Profile,
    heel: f64,
    toe: f64,
    half_width: f64,
    dt: f64,
}

struct CycleOutput {
    xi_d: Vec2,
    cop: Vec2,
}

impl Controller {
    fn new(config: &ScenarioConfig, dt: f64, half_width: f64) -> Result<Self> {
        let (heel, toe) = match config.plant {
            PlantKind::Lipm => (config.foot.heel, config.foot.toe),
            PlantKind::Multibody => (config.model.foot.heel, config.model.foot.toe),
        };
        Ok(Self {
            gains: config.gains.dcm()?,
            adjustment: config.adjustment.then(|| config.adjustment_options.to_config()),
            profile: config.profile,
            heel,
            toe,
            half_width,
            dt,
        })
    }

    fn cycle(&self, gait: &mut GaitState, xi: Vec2, t_in: f64) -> Result<CycleOutput> {
        let omega = gait.omega0();
        let (xi_d, xi_d_dot) = gait.reference(t_in)?;
        if let Some(adj) = &self.adjustment {
            let input = AdjustmentInput {
                measurement: DcmMeasurement { xi_mea: xi, t_in_step: t_in },
                stance: gait.stance(),
                planned_next: gait.planned_next(),
                boundary_next2: gait.boundary_next2(),
                omega0: omega,
                step_period: gait.step_period(),
                dt: self.dt,
            };
            update_modification(gait.swing_mut(), &input, adj)?;
        }
        let polygon = match self.profile {
            Profile::Passive => SupportPolygon::point(gait.stance()),
            Profile::Active => SupportPolygon::rectangle(gait.stance(), self.heel, self.toe, self.half_width)?,
        };
        let cop = project_cop(&desired_cop(&xi, &xi_d, &xi_d_dot, &self.gains, omega), &polygon)?;
        Ok(CycleOutput { xi_d, cop })
    }
}

/// Push-window boundaries inside `[t, t + dt]`, so each piece has a
/// constant push.
fn push_segments(push: Option<&PushConfig>, t: f64, dt: f64) -> Vec<(f64, f64)> {
    let mut cuts = vec![t, t + dt];
    if let Some(p) = push {
        for b in [p.start, p.end()] {
            if b > t && b < t + dt {
                cuts.push(b);
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    cuts.windows(2).map(|w| (w[0], w[1] - w[0])).filter(|(_, h)| *h > 0.0).collect()
}

fn new_log(config: &ScenarioConfig, dt: f64, torque_names: Vec<String>) -> TrajectoryLog {
    TrajectoryLog {
        rows: Vec::new(),
        status: RunStatus::Completed,
        message: None,
        steps_completed: 0,
        dt,
        step_period: config.period(),
        footprints: Vec::new(),
        torque_names,
    }
}

fn make_gait(config: &ScenarioConfig, omega: f64) -> Result<GaitState> {
    let plan = FootstepPlan::new(config.footprints(), config.period())?;
    GaitState::new(plan, config.preview, omega, vec3(config.initial_swing_foot()), config.apex_height)
}

fn run_lipm(config: &ScenarioConfig) -> Result<TrajectoryLog> {
    let omega = LipmParams::new(config.com_height, config.gravity)?.omega0();
    let (cycles, dt) = config.cycles_per_step();
    let mut gait = make_gait(config, omega)?;
    let controller = Controller::new(config, dt, config.foot.half_width)?;
    let com0 = config.initial.com.map_or(gait.boundary(), |c| Vec2::new(c[0], c[1]));
    let vel0 = config.initial.com_vel.map_or(Vec2::zeros(), |v| Vec2::new(v[0], v[1]));
    let mut state = LipmState::new(com0, vel0);
    let mut log = new_log(config, dt, Vec::new());
    log.footprints.push(gait.stance());
    let mut impulse = config.impulse;
    let push = config.disturbance.as_ref();

    for step in 0..=config.total_steps {
        let last = step == config.total_steps;
        for c in 0..cycles {
            let t = (step * cycles + c) as f64 * dt;
            let t_in = c as f64 * dt;
            if let Some(imp) = impulse {
                if t >= imp.time - 1e-12 {
                    state.com_vel += Vec2::new(imp.dcm_offset[0], imp.dcm_offset[1]) * omega;
                    impulse = None;
                }
            }
            let xi = state.dcm(omega);
            let out = controller.cycle(&mut gait, xi, t_in)?;
            let swing = gait.swing().eval(t_in)?.position;
            log.rows.push(LogRow {
                t,
                step,
                t_in_step: t_in,
                xi_d: out.xi_d,
                xi,
                com: state.com,
                com_height: config.com_height,
                cop: out.cop,
                stance: gait.stance(),
                next_planned: gait.planned_next(),
                swing,
                modification: gait.swing().modification(),
                residuals: Vec::new(),
                torques: Vec::new(),
            });
            let err = (xi - out.xi_d).norm();
            if !err.is_finite() || err > config.abort_radius {
                log.status = RunStatus::Diverged;
                log.message = Some(format!("DCM error {err:.3} m exceeded the abort radius at t = {t:.3} s"));
                return Ok(log);
            }
            if last {
                // final standing sample after the last exchange
                return Ok(log);
            }
            for (t0, h) in push_segments(push, t, dt) {
                let a = push.map_or(Vec2::zeros(), |p| p.accel_at(t0 + 0.5 * h, config.gravity));
                state = step_lipm_plant(&state, &out.cop, &a, omega, h)?;
            }
        }
        let swing_start = vec3(gait.stance());
        let landed = gait.commanded_landing();
        gait.support_exchange(landed, swing_start)?;
        log.footprints.push(landed);
        log.steps_completed = step + 1;
    }
    Ok(log)
}

const JOINT_NAMES: [&str; 6] = ["hip_r", "knee_r", "ankle_r", "hip_l", "knee_l", "ankle_l"];

fn run_multibody(config: &ScenarioConfig) -> Result<TrajectoryLog> {
    let model = &config.model;
    let lipm = model.lipm_params()?;
    let (omega, z0) = (lipm.omega0(), lipm.com_height());
    let (cycles, dt) = config.cycles_per_step();
    let mut gait = make_gait(config, omega)?;
    if config.initial.com_vel.is_some() {
        return Err(Error::Config("initial.com_vel is not supported by the multibody plant".into()));
    }
    let controller = Controller::new(config, dt, 0.0)?;
    let wb_gains = config.gains.whole_body();
    let plant = PlantOptions::default();
    let mode = model.contact_mode();
    let mut stance = config.plan.first_stance;
    let com_x = config.initial.com.map_or(gait.boundary().x, |c| c[0]);
    let mut q = initial_pose(model, stance, gait.stance().x, config.initial_swing_foot().x, Vec2::new(com_x, z0))?;
    let mut qd = DVector::zeros(N_DOF);
    let mut anchor = ContactAnchor::at_current(model, &q, ContactState::new(stance, mode));
    let posture = model.nominal_pose();
    let joints = model.actuated_joints();
    let names = joints
        .iter()
        .map(|j| JOINT_NAMES[*j - Foot::Right.hip()].to_string())
        .collect();
    let mut log = new_log(config, dt, names);
    log.footprints.push(gait.stance());
    let push = config.disturbance.as_ref();
    let weight = model.total_mass() * model.gravity;

    for step in 0..=config.total_steps {
        let last = step == config.total_steps;
        for c in 0..cycles {
            let t = (step * cycles + c) as f64 * dt;
            let t_in = c as f64 * dt;
            let kin = Kinematics::new(model, &q, &qd);
            let com = kin.com();
            let xi = Vec2::new(com.position.x + com.velocity.x / omega, 0.0);
            let out = controller.cycle(&mut gait, xi, t_in)?;
            let pose = gait.swing().eval(t_in)?;
            let reference = FootReference {
                position: Vec2::new(pose.position.x, pose.position.z),
                velocity: Vec2::new(pose.velocity.x, pose.velocity.z),
                acceleration: Vec2::new(pose.acceleration.x, pose.acceleration.z),
            };
            let targets = WholeBodyTargets {
                stance,
                swing: Some(reference),
                com_accel_x: match config.profile {
                    Profile::Active => Some(omega * omega * (com.position.x - out.cop.x)),
                    Profile::Passive => None,
                },
                com_height: z0,
                posture: posture.clone(),
                pitch: 0.0,
            };
            let err = (xi - out.xi_d).norm();
            let cmd = if err.is_finite() && err <= config.abort_radius && !last {
                match solve_whole_body(model, config.profile, &q, &qd, &targets, &wb_gains) {
                    Ok(cmd) => Some(cmd),
                    Err(e) => {
                        log.status = RunStatus::Faulted;
                        log.message = Some(format!("controller failed at t = {t:.3} s: {e}"));
                        return Ok(log);
                    }
                }
            } else {
                None
            };
            let sole_x = kin.sole(stance).position.x;
            let cop_x = match &cmd {
                Some(cmd) if mode == crate::whole_body::ContactMode::Flat => sole_x + cmd.lambda[2] / cmd.lambda[1],
                _ => sole_x,
            };
            log.rows.push(LogRow {
                t,
                step,
                t_in_step: t_in,
                xi_d: out.xi_d,
                xi,
                com: Vec2::new(com.position.x, 0.0),
                com_height: com.position.y,
                cop: Vec2::new(cop_x, 0.0),
                stance: gait.stance(),
                next_planned: gait.planned_next(),
                swing: pose.position,
                modification: gait.swing().modification(),
                residuals: cmd.as_ref().map_or_else(|| vec![f64::NAN; 3], |c| c.residuals.clone()),
                torques: cmd.as_ref().map_or_else(|| vec![f64::NAN; joints.len()], |c| c.tau.iter().copied().collect()),
            });
            if !err.is_finite() || err > config.abort_radius {
                log.status = RunStatus::Diverged;
                log.message = Some(format!("DCM error {err:.3} m exceeded the abort radius at t = {t:.3} s"));
                return Ok(log);
            }
            let Some(cmd) = cmd else {
                return Ok(log);
            };
            for (t0, h) in push_segments(push, t, dt) {
                let f = push.map_or(Vec2::zeros(), |p| p.accel_at(t0 + 0.5 * h, 1.0) * weight);
                let force = Vec2::new(f.x, 0.0);
                match step_multibody_plant(model, &q, &qd, &cmd.tau, Some(&anchor), &force, h, &plant) {
                    Ok((qn, vn)) => (q, qd) = (qn, vn),
                    Err(e) => {
                        log.status = RunStatus::Faulted;
                        log.message = Some(format!("plant failed at t = {t:.3} s: {e}"));
                        return Ok(log);
                    }
                }
            }
        }
        // touchdown of the swing foot where it actually is
        let kin = Kinematics::new(model, &q, &qd);
        let landed = Vec2::new(kin.sole(stance.other()).position.x, 0.0);
        let old = kin.sole(stance).position;
        stance = stance.other();
        let contact = ContactState::new(stance, mode);
        qd = impact_map(model, &q, &qd, &contact)?;
        anchor = ContactAnchor::at_current(model, &q, contact);
        gait.support_exchange(landed, Vec3::new(old.x, 0.0, old.y))?;
        log.footprints.push(landed);
        log.steps_completed = step + 1;
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_segments_split_at_window_edges() {
        let p = PushConfig { fraction: 0.1, start: 1.00025, duration: 0.3, direction: [0.0, 1.0] };
        let s = push_segments(Some(&p), 1.0, 1e-3);
        assert_eq!(s.len(), 2);
        assert!((s[0].1 - 0.00025).abs() < 1e-15);
        let whole = push_segments(None, 1.0, 1e-3);
        assert_eq!(whole.len(), 1);
        assert!((whole[0].1 - 1e-3).abs() < 1e-15);
    }
}
