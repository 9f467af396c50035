//! Task rows over the decision vector `z = [q̈, tau, lambda]` and the two
//! priority layouts (active and passive ankles).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::model::{check_state, dynamics_terms, ContactMode, ContactState, DynamicsTerms, Foot, Kinematics, PlanarBipedModel, N_DOF, PITCH};
use crate::error::{Error, Result};
use crate::hqp::{solve_hierarchy, Hierarchy, TaskLevel};
use crate::lipm::Vec2;

/// PD pair for a task-space servo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
}

impl PdGains {
    pub fn new(kp: f64, kd: f64) -> Self {
        Self { kp, kd }
    }

    /// `kd = 2 sqrt(kp)`.
    pub fn critically_damped(kp: f64) -> Self {
        Self { kp, kd: 2.0 * kp.sqrt() }
    }
}

/// Index bookkeeping for `z = [q̈ (9), tau (n_act), lambda (n_c)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionLayout {
    pub n_tau: usize,
    pub n_lambda: usize,
}

impl DecisionLayout {
    pub fn new(model: &PlanarBipedModel, contact: &ContactState) -> Self {
        Self { n_tau: model.n_actuated(), n_lambda: contact.dim() }
    }

    pub fn n_dec(&self) -> usize {
        N_DOF + self.n_tau + self.n_lambda
    }

    pub fn tau_offset(&self) -> usize {
        N_DOF
    }

    pub fn lambda_offset(&self) -> usize {
        N_DOF + self.n_tau
    }

    pub fn split(&self, z: &DVector<f64>) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        (
            z.rows(0, N_DOF).into_owned(),
            z.rows(self.tau_offset(), self.n_tau).into_owned(),
            z.rows(self.lambda_offset(), self.n_lambda).into_owned(),
        )
    }
}

/// `J q̈ = target` embedded in the q̈ columns.
fn motion_level(layout: &DecisionLayout, jacobian: &DMatrix<f64>, target: &DVector<f64>) -> TaskLevel {
    let mut a = DMatrix::zeros(jacobian.nrows(), layout.n_dec());
    a.view_mut((0, 0), (jacobian.nrows(), N_DOF)).copy_from(jacobian);
    let mut level = TaskLevel::new(layout.n_dec());
    level.push_equalities(&a, target, 1.0).expect("rows built to size");
    level
}

/// Reference for a foot in the sagittal plane, components (x, z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootReference {
    pub position: Vec2,
    pub velocity: Vec2,
    pub acceleration: Vec2,
}

impl FootReference {
    pub fn at_rest(position: Vec2) -> Self {
        Self { position, velocity: Vec2::zeros(), acceleration: Vec2::zeros() }
    }
}

/// Swing sole servo over (x, z) and, when `with_pitch`, foot pitch held at zero.
pub fn swing_foot_task(
    model: &PlanarBipedModel,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    foot: Foot,
    reference: &FootReference,
    gains: &PdGains,
    with_pitch: bool,
    layout: &DecisionLayout,
) -> Result<TaskLevel> {
    check_state(q, qd)?;
    let kin = Kinematics::new(model, q, qd);
    let sole = kin.sole(foot);
    let acc = reference.acceleration
        + (reference.velocity - sole.velocity) * gains.kd
        + (reference.position - sole.position) * gains.kp
        - sole.bias;
    if !with_pitch {
        return Ok(motion_level(layout, &sole.jacobian, &DVector::from_row_slice(&[acc.x, acc.y])));
    }
    let (angle, row) = kin.foot_angle(foot);
    let rate = row.row(0).dot(&qd.transpose());
    let mut j = DMatrix::zeros(3, N_DOF);
    j.view_mut((0, 0), (2, N_DOF)).copy_from(&sole.jacobian);
    j.view_mut((2, 0), (1, N_DOF)).copy_from(&row);
    let target = DVector::from_row_slice(&[acc.x, acc.y, -gains.kp * angle - gains.kd * rate]);
    Ok(motion_level(layout, &j, &target))
}

/// Stationary stance contact: `J_c q̈ = -J̇_c q̇`.
pub fn stance_foot_task(
    model: &PlanarBipedModel,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    contact: &ContactState,
    layout: &DecisionLayout,
) -> Result<TaskLevel> {
    check_state(q, qd)?;
    let (j, bias) = Kinematics::new(model, q, qd).contact(contact);
    Ok(motion_level(layout, &j, &(-bias)))
}

/// Joint-space PD toward `q_des` (full coordinate vector) on actuated joints.
pub fn posture_task(
    model: &PlanarBipedModel,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    q_des: &DVector<f64>,
    gains: &PdGains,
    layout: &DecisionLayout,
) -> Result<TaskLevel> {
    check_state(q, qd)?;
    if q_des.len() != N_DOF {
        return Err(Error::Dimension(format!("posture target needs {N_DOF} entries")));
    }
    let joints = model.actuated_joints();
    let j = model.selection();
    let target = DVector::from_iterator(
        joints.len(),
        joints.iter().map(|&i| gains.kp * (q_des[i] - q[i]) - gains.kd * qd[i]),
    );
    Ok(motion_level(layout, &j, &target))
}

/// Torso pitch servo; the pitch row has no velocity-product term.
pub fn base_task(q: &DVector<f64>, qd: &DVector<f64>, pitch_des: f64, gains: &PdGains, layout: &DecisionLayout) -> Result<TaskLevel> {
    check_state(q, qd)?;
    let mut j = DMatrix::zeros(1, N_DOF);
    j[(0, PITCH)] = 1.0;
    let target = DVector::from_element(1, gains.kp * (pitch_des - q[PITCH]) - gains.kd * qd[PITCH]);
    Ok(motion_level(layout, &j, &target))
}

/// CoM acceleration task, `accel = (horizontal, vertical)`.
pub fn com_task(
    model: &PlanarBipedModel,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    accel: Vec2,
    layout: &DecisionLayout,
) -> Result<TaskLevel> {
    check_state(q, qd)?;
    let com = Kinematics::new(model, q, qd).com();
    let target = accel - com.bias;
    Ok(motion_level(layout, &com.jacobian, &DVector::from_row_slice(&[target.x, target.y])))
}

/// Equations of motion as equalities: `M q̈ - S^T tau - J_c^T lambda = -N`.
pub fn dynamics_level(terms: &DynamicsTerms, layout: &DecisionLayout) -> Result<TaskLevel> {
    if terms.selection.nrows() != layout.n_tau || terms.contact_jacobian.nrows() != layout.n_lambda {
        return Err(Error::Dimension("dynamics terms do not match the decision layout".into()));
    }
    let mut a = DMatrix::zeros(N_DOF, layout.n_dec());
    a.view_mut((0, 0), (N_DOF, N_DOF)).copy_from(&terms.mass_matrix);
    a.view_mut((0, layout.tau_offset()), (N_DOF, layout.n_tau)).copy_from(&(-terms.selection.transpose()));
    a.view_mut((0, layout.lambda_offset()), (N_DOF, layout.n_lambda))
        .copy_from(&(-terms.contact_jacobian.transpose()));
    let mut level = TaskLevel::new(layout.n_dec());
    level.push_equalities(&a, &(-&terms.bias), 1.0)?;
    Ok(level)
}

/// `|tau_i| <= limit`.
pub fn torque_limits(model: &PlanarBipedModel, layout: &DecisionLayout) -> TaskLevel {
    let n = layout.n_tau;
    let mut c = DMatrix::zeros(2 * n, layout.n_dec());
    for i in 0..n {
        c[(2 * i, layout.tau_offset() + i)] = 1.0;
        c[(2 * i + 1, layout.tau_offset() + i)] = -1.0;
    }
    let mut level = TaskLevel::new(layout.n_dec());
    level.push_inequalities(&c, &DVector::from_element(2 * n, model.torque_limit)).expect("rows built to size");
    level
}

/// Unilateral force floor, planar friction pyramid and, for flat feet, the
/// CoP bounds, written as rows `C lambda <= d`.
pub fn contact_wrench_rows(model: &PlanarBipedModel, mode: ContactMode) -> (DMatrix<f64>, DVector<f64>) {
    let mu = model.friction;
    let mut rows: Vec<[f64; 3]> = vec![[0.0, -1.0, 0.0], [1.0, -mu, 0.0], [-1.0, -mu, 0.0]];
    let mut bounds = vec![-model.min_normal_force, 0.0, 0.0];
    if mode == ContactMode::Flat {
        rows.push([0.0, -model.foot.toe, 1.0]);
        rows.push([0.0, -model.foot.heel, -1.0]);
        bounds.extend([0.0, 0.0]);
    }
    let dim = mode.dim();
    let c = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
    (c, DVector::from_vec(bounds))
}

/// Contact wrench rows embedded in the lambda columns.
pub fn contact_inequalities(model: &PlanarBipedModel, contact: &ContactState, layout: &DecisionLayout) -> TaskLevel {
    let (c, d) = contact_wrench_rows(model, contact.mode);
    let mut full = DMatrix::zeros(c.nrows(), layout.n_dec());
    full.view_mut((0, layout.lambda_offset()), c.shape()).copy_from(&c);
    let mut level = TaskLevel::new(layout.n_dec());
    level.push_inequalities(&full, &d).expect("rows built to size");
    level
}

/// CoP offset from the sole point along the foot.
pub fn wrench_cop(mode: ContactMode, lambda: &DVector<f64>) -> f64 {
    match mode {
        ContactMode::Flat => lambda[2] / lambda[1],
        ContactMode::Point => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Flat feet with ankle torque; the CoM task tracks the DCM controller.
    Active,
    /// Point feet and free ankles; stabilization relies on stepping alone.
    Passive,
}

/// Task levels for one control cycle, to be ranked by [`assemble_hierarchy`].
#[derive(Debug, Clone)]
pub struct TaskSet {
    pub dynamics: TaskLevel,
    pub torque_limits: TaskLevel,
    pub contact: TaskLevel,
    pub stance: TaskLevel,
    pub swing: Option<TaskLevel>,
    pub com: Option<TaskLevel>,
    pub posture: TaskLevel,
    pub base: TaskLevel,
}

/// Active: {dynamics, torque} > {swing, stance, CoM, contact} > {posture, base}.
/// Passive: {dynamics, torque, contact} > {swing, stance, posture} > {base}.
pub fn assemble_hierarchy(profile: Profile, tasks: TaskSet) -> Result<Hierarchy> {
    let n = tasks.dynamics.n_dec();
    let merge = |parts: &[&TaskLevel]| -> Result<TaskLevel> {
        let mut level = TaskLevel::new(n);
        for p in parts {
            level.extend(p)?;
        }
        Ok(level)
    };
    let empty = TaskLevel::new(n);
    let swing = tasks.swing.as_ref().unwrap_or(&empty);
    let levels = match profile {
        Profile::Active => {
            let com = tasks.com.as_ref().ok_or_else(|| Error::Config("active profile requires a CoM task".into()))?;
            vec![
                merge(&[&tasks.dynamics, &tasks.torque_limits])?,
                merge(&[swing, &tasks.stance, com, &tasks.contact])?,
                merge(&[&tasks.posture, &tasks.base])?,
            ]
        }
        Profile::Passive => {
            if tasks.com.is_some() {
                return Err(Error::Config("passive profile has no CoM task".into()));
            }
            vec![
                merge(&[&tasks.dynamics, &tasks.torque_limits, &tasks.contact])?,
                merge(&[swing, &tasks.stance, &tasks.posture])?,
                merge(&[&tasks.base])?,
            ]
        }
    };
    Hierarchy::from_levels(n, levels)
}

/// Servo gains used by the whole-body controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WholeBodyGains {
    pub swing: PdGains,
    pub posture: PdGains,
    pub base: PdGains,
    pub com_height: PdGains,
}

impl Default for WholeBodyGains {
    fn default() -> Self {
        Self {
            swing: PdGains::critically_damped(400.0),
            posture: PdGains::critically_damped(100.0),
            base: PdGains::critically_damped(100.0),
            com_height: PdGains::critically_damped(100.0),
        }
    }
}

/// Per-cycle references.
#[derive(Debug, Clone)]
pub struct WholeBodyTargets {
    pub stance: Foot,
    pub swing: Option<FootReference>,
    /// Desired horizontal CoM acceleration (active profile only).
    pub com_accel_x: Option<f64>,
    pub com_height: f64,
    /// Full coordinate vector; only actuated entries are used.
    pub posture: DVector<f64>,
    pub pitch: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WholeBodyCommand {
    pub qdd: DVector<f64>,
    pub tau: DVector<f64>,
    pub lambda: DVector<f64>,
    pub contact: ContactState,
    pub residuals: Vec<f64>,
}

/// Builds the profile's hierarchy for this state and solves it.
pub fn solve_whole_body(
    model: &PlanarBipedModel,
    profile: Profile,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    targets: &WholeBodyTargets,
    gains: &WholeBodyGains,
) -> Result<WholeBodyCommand> {
    let expected = match profile {
        Profile::Active => true,
        Profile::Passive => false,
    };
    if model.active_ankles != expected {
        return Err(Error::Config(format!("{profile:?} profile does not match the model's ankle actuation")));
    }
    let contact = ContactState::new(targets.stance, model.contact_mode());
    let layout = DecisionLayout::new(model, &contact);
    let terms = dynamics_terms(model, q, qd, Some(&contact))?;
    let swing = match &targets.swing {
        Some(r) => Some(swing_foot_task(model, q, qd, targets.stance.other(), r, &gains.swing, model.active_ankles, &layout)?),
        None => None,
    };
    let com = match (profile, targets.com_accel_x) {
        (Profile::Active, Some(ax)) => {
            let c = Kinematics::new(model, q, qd).com();
            let az = gains.com_height.kp * (targets.com_height - c.position.y) - gains.com_height.kd * c.velocity.y;
            Some(com_task(model, q, qd, Vec2::new(ax, az), &layout)?)
        }
        (Profile::Passive, Some(_)) => return Err(Error::Config("passive profile has no CoM task".into())),
        (_, None) => None,
    };
    let tasks = TaskSet {
        dynamics: dynamics_level(&terms, &layout)?,
        torque_limits: torque_limits(model, &layout),
        contact: contact_inequalities(model, &contact, &layout),
        stance: stance_foot_task(model, q, qd, &contact, &layout)?,
        swing,
        com,
        posture: posture_task(model, q, qd, &targets.posture, &gains.posture, &layout)?,
        base: base_task(q, qd, targets.pitch, &gains.base, &layout)?,
    };
    let solution = solve_hierarchy(&assemble_hierarchy(profile, tasks)?)?;
    let (qdd, tau, lambda) = layout.split(&solution.z);
    Ok(WholeBodyCommand { qdd, tau, lambda, contact, residuals: solution.residuals })
}
