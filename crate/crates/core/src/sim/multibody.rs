//! Forward simulation of the planar biped with one stationary contact.

use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Error, Result};
use crate::lipm::Vec2;
use crate::whole_body::model::{check_state, BASE_X, BASE_Z, PITCH};
use crate::whole_body::{dynamics_terms, leg_ik, ContactState, Foot, Kinematics, PlanarBipedModel, N_DOF};

/// Contact with the coordinates it is held at.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactAnchor {
    pub contact: ContactState,
    /// Sole position, plus foot pitch for flat contact.
    pub target: DVector<f64>,
}

impl ContactAnchor {
    /// Anchors the contact where the foot currently is.
    pub fn at_current(model: &PlanarBipedModel, q: &DVector<f64>, contact: ContactState) -> Self {
        let kin = Kinematics::new(model, q, &DVector::zeros(N_DOF));
        Self { target: kin.contact_position(&contact), contact }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantOptions {
    /// Baumgarte rate; the drift obeys `e'' + 2a e' + a² e = 0`.
    pub baumgarte: f64,
    /// Largest RK4 step.
    pub max_step: f64,
}

impl Default for PlantOptions {
    fn default() -> Self {
        Self { baumgarte: 20.0, max_step: 1e-3 }
    }
}

/// Accelerations and contact wrench with the contact held stationary.
pub fn constrained_dynamics(
    model: &PlanarBipedModel,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    tau: &DVector<f64>,
    anchor: Option<&ContactAnchor>,
    push: &Vec2,
    baumgarte: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let terms = dynamics_terms(model, q, qd, anchor.map(|a| &a.contact))?;
    if tau.len() != terms.selection.nrows() {
        return Err(Error::Dimension(format!("expected {} torques, got {}", terms.selection.nrows(), tau.len())));
    }
    let mut force = terms.selection.transpose() * tau - &terms.bias;
    if push.norm() > 0.0 {
        let torso = Kinematics::new(model, q, qd).torso_com();
        force += torso.jacobian.transpose() * DVector::from_row_slice(&[push.x, push.y]);
    }
    let chol = terms
        .mass_matrix
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SimulationFault("mass matrix lost positive definiteness".into()))?;
    let free = chol.solve(&force);
    let Some(anchor) = anchor else {
        return Ok((free, DVector::zeros(0)));
    };
    let j = &terms.contact_jacobian;
    let drift = Kinematics::new(model, q, qd).contact_position(&anchor.contact) - &anchor.target;
    let desired = -&terms.contact_bias - (j * qd) * (2.0 * baumgarte) - drift * (baumgarte * baumgarte);
    let minv_jt = chol.solve(&j.transpose());
    let schur = j * &minv_jt;
    let lambda = schur
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SimulationFault(format!("singular contact force solve (J M^-1 J^T = {schur:.3e})")))?
        .solve(&(desired - j * &free));
    let qdd = free + minv_jt * &lambda;
    Ok((qdd, lambda))
}

/// RK4 over `dt` (split into steps no longer than `options.max_step`) with
/// torque and push held constant.
pub fn step_multibody_plant(
    model: &PlanarBipedModel,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    tau: &DVector<f64>,
    anchor: Option<&ContactAnchor>,
    push: &Vec2,
    dt: f64,
    options: &PlantOptions,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_state(q, qd)?;
    if !(dt > 0.0) {
        return domain(format!("plant step must be positive (got {dt})"));
    }
    let n = (dt / options.max_step - 1e-9).ceil().max(1.0) as usize;
    let h = dt / n as f64;
    let f = |q: &DVector<f64>, qd: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(constrained_dynamics(model, q, qd, tau, anchor, push, options.baumgarte)?.0)
    };
    let (mut q, mut qd) = (q.clone(), qd.clone());
    for _ in 0..n {
        let a1 = f(&q, &qd)?;
        let (q2, v2) = (&q + &qd * (h / 2.0), &qd + &a1 * (h / 2.0));
        let a2 = f(&q2, &v2)?;
        let (q3, v3) = (&q + &v2 * (h / 2.0), &qd + &a2 * (h / 2.0));
        let a3 = f(&q3, &v3)?;
        let (q4, v4) = (&q + &v3 * h, &qd + &a3 * h);
        let a4 = f(&q4, &v4)?;
        q += (&qd + &v2 * 2.0 + &v3 * 2.0 + &v4) * (h / 6.0);
        qd += (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
        if q.iter().chain(qd.iter()).any(|v| !v.is_finite()) {
            return Err(Error::SimulationFault("state became non-finite".into()));
        }
    }
    Ok((q, qd))
}

/// Plastic touchdown: the post-impact velocity is the M-orthogonal
/// projection that zeroes the new contact's velocity.
pub fn impact_map(model: &PlanarBipedModel, q: &DVector<f64>, qd: &DVector<f64>, contact: &ContactState) -> Result<DVector<f64>> {
    let terms = dynamics_terms(model, q, qd, Some(contact))?;
    let chol = terms
        .mass_matrix
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SimulationFault("mass matrix lost positive definiteness".into()))?;
    let j = &terms.contact_jacobian;
    let minv_jt = chol.solve(&j.transpose());
    let schur: DMatrix<f64> = j * &minv_jt;
    let impulse = schur
        .cholesky()
        .ok_or_else(|| Error::SimulationFault("singular impact solve".into()))?
        .solve(&(j * qd));
    Ok(qd - minv_jt * impulse)
}

/// Standing pose with flat soles at `stance_x` and `swing_x` (ground level),
/// upright torso, and the CoM at `com` (x, height).
pub fn initial_pose(model: &PlanarBipedModel, stance: Foot, stance_x: f64, swing_x: f64, com: Vec2) -> Result<DVector<f64>> {
    let pose = |base: Vec2| -> Result<DVector<f64>> {
        let mut q = DVector::zeros(N_DOF);
        q[BASE_X] = base.x;
        q[BASE_Z] = base.y;
        q[PITCH] = 0.0;
        for (foot, x) in [(stance, stance_x), (stance.other(), swing_x)] {
            let a = leg_ik(model, base, 0.0, Vec2::new(x, 0.0))?;
            q[foot.hip()] = a[0];
            q[foot.knee()] = a[1];
            q[foot.ankle()] = a[2];
        }
        Ok(q)
    };
    let com_of = |base: Vec2| -> Result<Vec2> {
        Ok(Kinematics::new(model, &pose(base)?, &DVector::zeros(N_DOF)).com().position)
    };
    let nominal = model.nominal_pose();
    let mut base = Vec2::new(com.x, nominal[BASE_Z]);
    for _ in 0..50 {
        let r = com_of(base)? - com;
        if r.norm() < 1e-13 {
            return pose(base);
        }
        let h = 1e-7;
        let cx = (com_of(base + Vec2::new(h, 0.0))? - com_of(base - Vec2::new(h, 0.0))?) / (2.0 * h);
        let cz = (com_of(base + Vec2::new(0.0, h))? - com_of(base - Vec2::new(0.0, h))?) / (2.0 * h);
        let jac = nalgebra::Matrix2::from_columns(&[cx, cz]);
        let step = jac
            .try_inverse()
            .ok_or_else(|| Error::Domain("initial pose solve became singular".into()))?
            * r;
        base -= step;
    }
    domain("initial pose did not converge; CoM target may be out of reach")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::whole_body::{total_energy, ContactMode};

    /// Straight legs and zero foot CoM offset: every link CoM sits on the
    /// vertical through the sole, so zero torque is an equilibrium.
    #[test]
    fn balanced_pose_stays_static() {
        let mut model = PlanarBipedModel::default();
        model.foot.com_forward = 0.0;
        let mut q = DVector::zeros(N_DOF);
        q[BASE_Z] = model.thigh.length + model.shank.length + model.foot.sole_depth;
        let qd = DVector::zeros(N_DOF);
        let anchor = ContactAnchor::at_current(&model, &q, ContactState::new(Foot::Right, ContactMode::Flat));
        let tau = DVector::zeros(6);
        let (mut qs, mut vs) = (q.clone(), qd.clone());
        for _ in 0..100 {
            (qs, vs) = step_multibody_plant(&model, &qs, &vs, &tau, Some(&anchor), &Vec2::zeros(), 1e-3, &PlantOptions::default()).unwrap();
        }
        assert!((&qs - &q).amax() <= 1e-9 && vs.amax() <= 1e-9);
    }

    /// Gravity reversed so the free chain hangs from the pinned contact; with
    /// no torque the stationary contact does no work.
    #[test]
    fn passive_pendulum_conserves_energy() {
        let mut model = PlanarBipedModel::point_foot();
        model.gravity = -9.81;
        let mut q = model.nominal_pose();
        q[PITCH] = 0.3;
        q[Foot::Left.hip()] = -0.5;
        let anchor = ContactAnchor::at_current(&model, &q, ContactState::new(Foot::Right, ContactMode::Point));
        let tau = DVector::zeros(4);
        let mut qd = DVector::zeros(N_DOF);
        let e0 = total_energy(&model, &q, &qd);
        for _ in 0..1000 {
            (q, qd) = step_multibody_plant(&model, &q, &qd, &tau, Some(&anchor), &Vec2::zeros(), 1e-3, &PlantOptions::default()).unwrap();
        }
        let e1 = total_energy(&model, &q, &qd);
        assert!((e1 - e0).abs() <= 1e-4, "energy drift {}", e1 - e0);
        assert!(qd.amax() > 0.1, "the chain should actually swing");
    }

    #[test]
    fn impact_zeroes_contact_velocity() {
        let model = PlanarBipedModel::default();
        let q = model.nominal_pose();
        let qd = DVector::from_fn(N_DOF, |i, _| 0.1 * (i as f64 + 1.0).sin());
        let contact = ContactState::new(Foot::Left, ContactMode::Flat);
        let plus = impact_map(&model, &q, &qd, &contact).unwrap();
        let terms = dynamics_terms(&model, &q, &plus, Some(&contact)).unwrap();
        assert!((&terms.contact_jacobian * &plus).amax() < 1e-12);
        // plastic impact never adds kinetic energy
        assert!(total_energy(&model, &q, &plus) <= total_energy(&model, &q, &qd) + 1e-12);
    }

    #[test]
    fn initial_pose_hits_com_target() {
        let model = PlanarBipedModel::default();
        let target = Vec2::new(0.04, model.nominal_com_height());
        let q = initial_pose(&model, Foot::Right, 0.0, 0.0, target).unwrap();
        let kin = Kinematics::new(&model, &q, &DVector::zeros(N_DOF));
        assert!((kin.com().position - target).norm() < 1e-12);
        assert!(kin.sole(Foot::Right).position.norm() < 1e-12);
        assert!(kin.sole(Foot::Left).position.norm() < 1e-12);
        assert!(initial_pose(&model, Foot::Right, 0.0, 0.0, Vec2::new(0.0, 2.0)).is_err());
    }
}
