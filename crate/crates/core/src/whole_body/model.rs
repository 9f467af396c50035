//! Planar floating-base biped: kinematics, equations of motion and contact
//! Jacobians.
//!
//! Coordinates `q = [x_b, z_b, pitch, hip_r, knee_r, ankle_r, hip_l, knee_l,
//! ankle_l]`. The base point is the hip; the torso CoM sits above it and each
//! leg hangs from it. Every angle rotates the x axis toward z, so a positive
//! hip angle swings the leg forward.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::lipm::{LipmParams, Vec2, GRAVITY};

pub const N_DOF: usize = 9;
pub const BASE_X: usize = 0;
pub const BASE_Z: usize = 1;
pub const PITCH: usize = 2;

/// Nominal (hip, knee, ankle) angles of the standing pose.
pub const NOMINAL_LEG: [f64; 3] = [0.3, -0.6, 0.3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Foot {
    Right,
    Left,
}

impl Foot {
    pub fn other(self) -> Foot {
        match self {
            Foot::Right => Foot::Left,
            Foot::Left => Foot::Right,
        }
    }

    pub fn hip(self) -> usize {
        match self {
            Foot::Right => 3,
            Foot::Left => 6,
        }
    }

    pub fn knee(self) -> usize {
        self.hip() + 1
    }

    pub fn ankle(self) -> usize {
        self.hip() + 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContactMode {
    /// Sole point position plus foot pitch; wrench `(f_x, f_z, m)`.
    Flat,
    /// Sole point position only; force `(f_x, f_z)`.
    Point,
}

impl ContactMode {
    pub fn dim(self) -> usize {
        match self {
            ContactMode::Flat => 3,
            ContactMode::Point => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContactState {
    pub foot: Foot,
    pub mode: ContactMode,
}

impl ContactState {
    pub fn new(foot: Foot, mode: ContactMode) -> Self {
        Self { foot, mode }
    }

    pub fn dim(&self) -> usize {
        self.mode.dim()
    }

    /// Checks that `lambda` has the size this mode expects.
    pub fn check_wrench(&self, lambda: &DVector<f64>) -> Result<()> {
        if lambda.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "{:?} contact expects {} wrench components, got {}",
                self.mode,
                self.dim(),
                lambda.len()
            )));
        }
        Ok(())
    }
}

/// A rigid segment hanging from its proximal joint (torso: standing on it).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    pub mass: f64,
    pub length: f64,
    /// Distance from the proximal joint to the link CoM.
    pub com_offset: f64,
    pub inertia: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootParams {
    pub mass: f64,
    pub inertia: f64,
    /// Ankle height above the sole.
    pub sole_depth: f64,
    /// Foot CoM relative to the ankle, forward and down.
    pub com_forward: f64,
    pub com_down: f64,
    pub heel: f64,
    pub toe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanarBipedModel {
    pub torso: LinkParams,
    pub thigh: LinkParams,
    pub shank: LinkParams,
    pub foot: FootParams,
    pub friction: f64,
    pub active_ankles: bool,
    pub torque_limit: f64,
    pub min_normal_force: f64,
    pub gravity: f64,
}

impl Default for PlanarBipedModel {
    /// About 60 kg with the CoM near 0.88 m in the nominal pose.
    fn default() -> Self {
        Self {
            torso: LinkParams { mass: 34.0, length: 0.6, com_offset: 0.25, inertia: 1.0 },
            thigh: LinkParams { mass: 8.0, length: 0.45, com_offset: 0.2, inertia: 0.135 },
            shank: LinkParams { mass: 4.0, length: 0.45, com_offset: 0.2, inertia: 0.07 },
            foot: FootParams {
                mass: 1.0,
                inertia: 0.01,
                sole_depth: 0.05,
                com_forward: 0.02,
                com_down: 0.025,
                heel: 0.05,
                toe: 0.1,
            },
            friction: 0.8,
            active_ankles: true,
            torque_limit: 200.0,
            min_normal_force: 1.0,
            gravity: GRAVITY,
        }
    }
}

impl PlanarBipedModel {
    /// Same body with unactuated ankles and point feet at the ankle.
    pub fn point_foot() -> Self {
        let d = Self::default();
        Self {
            active_ankles: false,
            foot: FootParams { sole_depth: 0.0, com_forward: 0.0, com_down: 0.0, heel: 0.0, toe: 0.0, ..d.foot },
            ..d
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, link) in [("torso", &self.torso), ("thigh", &self.thigh), ("shank", &self.shank)] {
            if !(link.mass > 0.0 && link.length > 0.0 && link.inertia > 0.0) {
                return Err(Error::Config(format!("{name} mass, length and inertia must be positive")));
            }
            if !link.com_offset.is_finite() {
                return Err(Error::Config(format!("{name} CoM offset must be finite")));
            }
        }
        let f = &self.foot;
        if !(f.mass > 0.0 && f.inertia > 0.0) {
            return Err(Error::Config("foot mass and inertia must be positive".into()));
        }
        if !(f.sole_depth >= 0.0 && f.heel >= 0.0 && f.toe >= 0.0 && f.com_forward.is_finite() && f.com_down.is_finite()) {
            return Err(Error::Config("foot geometry must be finite and non-negative".into()));
        }
        if !(self.friction > 0.0 && self.friction <= 2.0) {
            return Err(Error::Config(format!("friction coefficient {} outside (0, 2]", self.friction)));
        }
        if !(self.torque_limit > 0.0 && self.min_normal_force >= 0.0 && self.gravity.is_finite()) {
            return Err(Error::Config("torque limit must be positive, normal force floor non-negative".into()));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.torso.mass + 2.0 * (self.thigh.mass + self.shank.mass + self.foot.mass)
    }

    pub fn contact_mode(&self) -> ContactMode {
        if self.active_ankles {
            ContactMode::Flat
        } else {
            ContactMode::Point
        }
    }

    /// Generalized-coordinate indices driven by a motor.
    pub fn actuated_joints(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(6);
        for foot in [Foot::Right, Foot::Left] {
            out.push(foot.hip());
            out.push(foot.knee());
            if self.active_ankles {
                out.push(foot.ankle());
            }
        }
        out
    }

    pub fn n_actuated(&self) -> usize {
        self.actuated_joints().len()
    }

    /// `n_act x 9` selection matrix, so `S^T tau` is the generalized force.
    pub fn selection(&self) -> DMatrix<f64> {
        let joints = self.actuated_joints();
        let mut s = DMatrix::zeros(joints.len(), N_DOF);
        for (r, j) in joints.iter().enumerate() {
            s[(r, *j)] = 1.0;
        }
        s
    }

    /// Both feet flat under the hip at the nominal joint angles, sole at z=0.
    pub fn nominal_pose(&self) -> DVector<f64> {
        let mut q = DVector::zeros(N_DOF);
        for foot in [Foot::Right, Foot::Left] {
            q[foot.hip()] = NOMINAL_LEG[0];
            q[foot.knee()] = NOMINAL_LEG[1];
            q[foot.ankle()] = NOMINAL_LEG[2];
        }
        let kin = Kinematics::new(self, &q, &DVector::zeros(N_DOF));
        let sole = kin.sole(Foot::Right).position;
        q[BASE_X] = -sole.x;
        q[BASE_Z] = -sole.y;
        q
    }

    /// CoM height above the ground in the nominal pose.
    pub fn nominal_com_height(&self) -> f64 {
        let q = self.nominal_pose();
        Kinematics::new(self, &q, &DVector::zeros(N_DOF)).com().position.y
    }

    pub fn lipm_params(&self) -> Result<LipmParams> {
        LipmParams::new(self.nominal_com_height(), self.gravity)
    }
}

/// 2x2 rotation by `angle` (x toward z).
fn rot(angle: f64, v: Vec2) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Derivative of `rot(angle, v)` with respect to the angle, expressed as a
/// quarter turn of the rotated vector.
fn perp(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

/// A point with its Jacobian and velocity-product term `J̇ q̇`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointTerms {
    pub position: Vec2,
    pub velocity: Vec2,
    pub jacobian: DMatrix<f64>,
    pub bias: Vec2,
}

#[derive(Debug, Clone)]
struct Frame {
    origin: Vec2,
    angle: f64,
    /// Angle coordinates this frame depends on, with their pivot points.
    joints: Vec<(usize, Vec2)>,
}

#[derive(Debug, Clone)]
struct Body {
    frame: Frame,
    local_com: Vec2,
    mass: f64,
    inertia: f64,
}

/// Positions, Jacobians and bias terms at one state.
#[derive(Debug, Clone)]
pub struct Kinematics {
    qd: DVector<f64>,
    bodies: Vec<Body>,
    feet: [Frame; 2],
    sole_local: Vec2,
    foot_geom: FootParams,
}

impl Kinematics {
    pub fn new(model: &PlanarBipedModel, q: &DVector<f64>, qd: &DVector<f64>) -> Self {
        let hip = Vec2::new(q[BASE_X], q[BASE_Z]);
        let pitch = q[PITCH];
        let torso = Frame { origin: hip, angle: pitch, joints: vec![(PITCH, hip)] };
        let mut bodies = vec![Body {
            frame: torso,
            local_com: Vec2::new(0.0, model.torso.com_offset),
            mass: model.torso.mass,
            inertia: model.torso.inertia,
        }];
        let mut feet = Vec::with_capacity(2);
        for foot in [Foot::Right, Foot::Left] {
            let a1 = pitch + q[foot.hip()];
            let thigh = Frame { origin: hip, angle: a1, joints: vec![(PITCH, hip), (foot.hip(), hip)] };
            let knee = hip + rot(a1, Vec2::new(0.0, -model.thigh.length));
            let a2 = a1 + q[foot.knee()];
            let mut joints = thigh.joints.clone();
            joints.push((foot.knee(), knee));
            let shank = Frame { origin: knee, angle: a2, joints };
            let ankle = knee + rot(a2, Vec2::new(0.0, -model.shank.length));
            let mut joints = shank.joints.clone();
            joints.push((foot.ankle(), ankle));
            let foot_frame = Frame { origin: ankle, angle: a2 + q[foot.ankle()], joints };
            bodies.push(Body {
                frame: thigh,
                local_com: Vec2::new(0.0, -model.thigh.com_offset),
                mass: model.thigh.mass,
                inertia: model.thigh.inertia,
            });
            bodies.push(Body {
                frame: shank,
                local_com: Vec2::new(0.0, -model.shank.com_offset),
                mass: model.shank.mass,
                inertia: model.shank.inertia,
            });
            bodies.push(Body {
                frame: foot_frame.clone(),
                local_com: Vec2::new(model.foot.com_forward, -model.foot.com_down),
                mass: model.foot.mass,
                inertia: model.foot.inertia,
            });
            feet.push(foot_frame);
        }
        let right = feet.remove(0);
        let left = feet.remove(0);
        Self {
            qd: qd.clone(),
            bodies,
            feet: [right, left],
            sole_local: Vec2::new(0.0, -model.foot.sole_depth),
            foot_geom: model.foot,
        }
    }

    fn point(&self, frame: &Frame, local: Vec2) -> PointTerms {
        let position = frame.origin + rot(frame.angle, local);
        let mut jacobian = DMatrix::zeros(2, N_DOF);
        jacobian[(0, BASE_X)] = 1.0;
        jacobian[(1, BASE_Z)] = 1.0;
        for (j, pivot) in &frame.joints {
            let col = perp(position - pivot);
            jacobian[(0, *j)] += col.x;
            jacobian[(1, *j)] += col.y;
        }
        let velocity = Vec2::new(
            jacobian.row(0).dot(&self.qd.transpose()),
            jacobian.row(1).dot(&self.qd.transpose()),
        );
        // pivot velocities follow from the joints that precede them
        let base_vel = Vec2::new(self.qd[BASE_X], self.qd[BASE_Z]);
        let mut bias = Vec2::zeros();
        for (k, (j, pivot)) in frame.joints.iter().enumerate() {
            let mut pivot_vel = base_vel;
            for (m, other) in &frame.joints[..k] {
                pivot_vel += perp(pivot - other) * self.qd[*m];
            }
            bias += perp(velocity - pivot_vel) * self.qd[*j];
        }
        PointTerms { position, velocity, jacobian, bias }
    }

    fn angle_row(frame: &Frame) -> DMatrix<f64> {
        let mut row = DMatrix::zeros(1, N_DOF);
        for (j, _) in &frame.joints {
            row[(0, *j)] = 1.0;
        }
        row
    }

    fn foot_frame(&self, foot: Foot) -> &Frame {
        match foot {
            Foot::Right => &self.feet[0],
            Foot::Left => &self.feet[1],
        }
    }

    /// Sole reference point of a foot (the flat-contact point).
    pub fn sole(&self, foot: Foot) -> PointTerms {
        self.point(self.foot_frame(foot), self.sole_local)
    }

    pub fn heel(&self, foot: Foot) -> PointTerms {
        self.point(self.foot_frame(foot), self.sole_local - Vec2::new(self.foot_geom.heel, 0.0))
    }

    pub fn toe(&self, foot: Foot) -> PointTerms {
        self.point(self.foot_frame(foot), self.sole_local + Vec2::new(self.foot_geom.toe, 0.0))
    }

    pub fn ankle(&self, foot: Foot) -> PointTerms {
        self.point(self.foot_frame(foot), Vec2::zeros())
    }

    /// Absolute foot pitch and its (constant) Jacobian row.
    pub fn foot_angle(&self, foot: Foot) -> (f64, DMatrix<f64>) {
        let f = self.foot_frame(foot);
        (f.angle, Self::angle_row(f))
    }

    /// CoM of the torso link, where external pushes are applied.
    pub fn torso_com(&self) -> PointTerms {
        let b = &self.bodies[0];
        self.point(&b.frame, b.local_com)
    }

    /// Whole-body CoM.
    pub fn com(&self) -> PointTerms {
        let mut total = 0.0;
        let mut position = Vec2::zeros();
        let mut velocity = Vec2::zeros();
        let mut jacobian = DMatrix::zeros(2, N_DOF);
        let mut bias = Vec2::zeros();
        for b in &self.bodies {
            let p = self.point(&b.frame, b.local_com);
            total += b.mass;
            position += p.position * b.mass;
            velocity += p.velocity * b.mass;
            jacobian += p.jacobian * b.mass;
            bias += p.bias * b.mass;
        }
        PointTerms { position: position / total, velocity: velocity / total, jacobian: jacobian / total, bias: bias / total }
    }

    /// Contact rows and their bias for the given contact.
    pub fn contact(&self, contact: &ContactState) -> (DMatrix<f64>, DVector<f64>) {
        let sole = self.sole(contact.foot);
        match contact.mode {
            ContactMode::Point => (sole.jacobian, DVector::from_row_slice(&[sole.bias.x, sole.bias.y])),
            ContactMode::Flat => {
                let (_, row) = self.foot_angle(contact.foot);
                let mut j = DMatrix::zeros(3, N_DOF);
                j.view_mut((0, 0), (2, N_DOF)).copy_from(&sole.jacobian);
                j.view_mut((2, 0), (1, N_DOF)).copy_from(&row);
                (j, DVector::from_row_slice(&[sole.bias.x, sole.bias.y, 0.0]))
            }
        }
    }

    /// Contact coordinates: sole position, plus foot pitch for flat contact.
    pub fn contact_position(&self, contact: &ContactState) -> DVector<f64> {
        let sole = self.sole(contact.foot).position;
        match contact.mode {
            ContactMode::Point => DVector::from_row_slice(&[sole.x, sole.y]),
            ContactMode::Flat => DVector::from_row_slice(&[sole.x, sole.y, self.foot_frame(contact.foot).angle]),
        }
    }

    fn mass_and_bias(&self, gravity: f64) -> (DMatrix<f64>, DVector<f64>, f64) {
        let mut m = DMatrix::zeros(N_DOF, N_DOF);
        let mut n = DVector::zeros(N_DOF);
        let mut potential = 0.0;
        for b in &self.bodies {
            let p = self.point(&b.frame, b.local_com);
            let jt = p.jacobian.transpose();
            let w = Self::angle_row(&b.frame);
            m += &jt * &p.jacobian * b.mass + w.transpose() * &w * b.inertia;
            // projected Newton-Euler: planar bodies carry no gyroscopic term
            n += &jt * DVector::from_row_slice(&[p.bias.x, p.bias.y + gravity]) * b.mass;
            potential += b.mass * gravity * p.position.y;
        }
        (m, n, potential)
    }
}

/// `M(q) q̈ + N(q, q̇) = S^T tau + J_c^T lambda` ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsTerms {
    pub mass_matrix: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub selection: DMatrix<f64>,
    pub contact_jacobian: DMatrix<f64>,
    pub contact_bias: DVector<f64>,
}

pub fn check_state(q: &DVector<f64>, qd: &DVector<f64>) -> Result<()> {
    if q.len() != N_DOF || qd.len() != N_DOF {
        return Err(Error::Dimension(format!("state must have {N_DOF} coordinates")));
    }
    if q.iter().chain(qd.iter()).any(|v| !v.is_finite()) {
        return domain("state contains non-finite values");
    }
    Ok(())
}

/// Equation-of-motion terms; without a contact the Jacobian has zero rows.
pub fn dynamics_terms(
    model: &PlanarBipedModel,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    contact: Option<&ContactState>,
) -> Result<DynamicsTerms> {
    check_state(q, qd)?;
    let kin = Kinematics::new(model, q, qd);
    let (mass_matrix, bias, _) = kin.mass_and_bias(model.gravity);
    let (contact_jacobian, contact_bias) = match contact {
        Some(c) => kin.contact(c),
        None => (DMatrix::zeros(0, N_DOF), DVector::zeros(0)),
    };
    Ok(DynamicsTerms { mass_matrix, bias, selection: model.selection(), contact_jacobian, contact_bias })
}

/// Kinetic plus gravitational energy.
pub fn total_energy(model: &PlanarBipedModel, q: &DVector<f64>, qd: &DVector<f64>) -> f64 {
    let kin = Kinematics::new(model, q, qd);
    let (m, _, potential) = kin.mass_and_bias(model.gravity);
    0.5 * qd.dot(&(&m * qd)) + potential
}

/// Joint angles (hip, knee, ankle) placing a flat sole at `sole` for the
/// given hip position and torso pitch. The knee bends forward.
pub fn leg_ik(model: &PlanarBipedModel, hip: Vec2, pitch: f64, sole: Vec2) -> Result<[f64; 3]> {
    let ankle = sole + Vec2::new(0.0, model.foot.sole_depth);
    let d = ankle - hip;
    let (l1, l2) = (model.thigh.length, model.shank.length);
    let reach = d.norm();
    if reach > l1 + l2 || reach < (l1 - l2).abs() {
        return domain(format!("sole target at distance {reach:.4} m from the hip is out of reach"));
    }
    let cos_knee = ((reach * reach - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let knee = -cos_knee.acos();
    let alpha = d.x.atan2(-d.y);
    let gamma = (l2 * knee.sin()).atan2(l1 + l2 * knee.cos());
    let thigh = alpha - gamma;
    Ok([thigh - pitch, knee, -thigh - knee])
}
