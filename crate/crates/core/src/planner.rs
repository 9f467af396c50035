//! DCM boundary conditions over a previewed footstep sequence.
//!
//! The CoP of step `i` is the footprint `u_i`, held for the whole step.
//! Boundaries are computed backward from the last previewed footprint,
//! where the DCM is required to come to rest.

use crate::error::{domain, Error, Result};
use crate::lipm::{propagate_dcm, Vec2};

/// Ordered footprints `u_0..u_n` with a uniform step period.
#[derive(Debug, Clone, PartialEq)]
pub struct FootstepPlan {
    pub footprints: Vec<Vec2>,
    pub step_period: f64,
    /// Number of previewed steps `n`; the recursion uses `u_0..=u_n`.
    pub preview_count: usize,
}

impl FootstepPlan {
    /// Plan whose preview covers every footprint.
    pub fn new(footprints: Vec<Vec2>, step_period: f64) -> Result<Self> {
        let n = footprints.len().saturating_sub(1);
        Self::with_preview(footprints, step_period, n)
    }

    pub fn with_preview(footprints: Vec<Vec2>, step_period: f64, preview_count: usize) -> Result<Self> {
        let plan = Self { footprints, step_period, preview_count };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.footprints.len() < 2 {
            return Err(Error::Plan(format!(
                "need at least 2 footprints, got {}",
                self.footprints.len()
            )));
        }
        if !(self.step_period > 0.0) {
            return Err(Error::Plan(format!("step period must be positive (got {})", self.step_period)));
        }
        if self.preview_count == 0 || self.preview_count >= self.footprints.len() {
            return Err(Error::Plan(format!(
                "preview count {} must lie in 1..={}",
                self.preview_count,
                self.footprints.len() - 1
            )));
        }
        if self.footprints.iter().any(|u| !u.iter().all(|c| c.is_finite())) {
            return Err(Error::Plan("footprints must be finite".into()));
        }
        Ok(())
    }

    /// The `n + 1` footprints starting at `start`, padded with the final
    /// footprint once the plan runs out (standing still after the last step).
    pub fn preview_window(&self, start: usize, preview_count: usize) -> Result<FootstepPlan> {
        if start >= self.footprints.len() {
            return Err(Error::Plan(format!(
                "window start {start} beyond plan of {} footprints",
                self.footprints.len()
            )));
        }
        let last = *self.footprints.last().expect("validated plan");
        let footprints = (start..=start + preview_count)
            .map(|k| self.footprints.get(k).copied().unwrap_or(last))
            .collect();
        FootstepPlan::with_preview(footprints, self.step_period, preview_count)
    }
}

/// DCM at the start of each previewed step, indexed like the footprints.
#[derive(Debug, Clone, PartialEq)]
pub struct DcmBoundarySchedule {
    boundaries: Vec<Vec2>,
}

impl DcmBoundarySchedule {
    pub fn boundaries(&self) -> &[Vec2] {
        &self.boundaries
    }

    pub fn get(&self, step: usize) -> Option<Vec2> {
        self.boundaries.get(step).copied()
    }

    pub fn len(&self) -> usize {
        self.boundaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundaries.is_empty()
    }
}

/// Initial DCM of the last previewed step so that it ends on `u_last`.
pub fn terminal_dcm_boundary(u_last: &Vec2, u_prev: &Vec2, omega0: f64, step_period: f64) -> Result<Vec2> {
    if !(step_period > 0.0) {
        return domain(format!("step period must be positive (got {step_period})"));
    }
    Ok((u_last - u_prev) * (-omega0 * step_period).exp() + u_prev)
}

pub fn backward_recursion(plan: &FootstepPlan, omega0: f64) -> Result<DcmBoundarySchedule> {
    plan.validate()?;
    let n = plan.preview_count;
    let u = &plan.footprints[..=n];
    let decay = (-omega0 * plan.step_period).exp();
    let mut boundaries = vec![Vec2::zeros(); n + 1];
    boundaries[n] = u[n];
    for i in (1..=n).rev() {
        boundaries[i - 1] = (boundaries[i] - u[i - 1]) * decay + u[i - 1];
    }
    Ok(DcmBoundarySchedule { boundaries })
}

/// Reference DCM `t_in_step` seconds into a step that started at `xi0_i`.
pub fn reference_dcm_at(xi0_i: &Vec2, u_i: &Vec2, omega0: f64, step_period: f64, t_in_step: f64) -> Result<Vec2> {
    if !(t_in_step >= 0.0 && t_in_step <= step_period * (1.0 + 1e-12)) {
        return domain(format!("time {t_in_step} outside step [0, {step_period}]"));
    }
    propagate_dcm(xi0_i, u_i, omega0, t_in_step)
}

/// `xi_dot = omega0 (xi - u_i)`.
pub fn reference_dcm_velocity(xi: &Vec2, u_i: &Vec2, omega0: f64) -> Vec2 {
    (xi - u_i) * omega0
}
