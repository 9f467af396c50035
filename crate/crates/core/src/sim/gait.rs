//! Step bookkeeping: current stance, replanned DCM boundaries, and the
//! active swing trajectory.

use crate::error::{Error, Result};
use crate::lipm::Vec2;
use crate::planner::{backward_recursion, reference_dcm_at, reference_dcm_velocity, DcmBoundarySchedule, FootstepPlan};
use crate::swing::{SwingTrajectory, Vec3};

#[derive(Debug, Clone)]
pub struct GaitState {
    plan: FootstepPlan,
    preview: usize,
    omega0: f64,
    apex_height: f64,
    step: usize,
    schedule: DcmBoundarySchedule,
    swing: SwingTrajectory,
}

impl GaitState {
    /// Starts at step 0 with the swing foot leaving `swing_start`.
    pub fn new(plan: FootstepPlan, preview: usize, omega0: f64, swing_start: Vec3, apex_height: f64) -> Result<Self> {
        if preview < 2 {
            return Err(Error::Plan(format!("preview {preview} too short to look two boundaries ahead")));
        }
        let schedule = backward_recursion(&plan.preview_window(0, preview)?, omega0)?;
        let next = footprint_at(&plan, 1);
        let swing = SwingTrajectory::new(swing_start, Vec3::new(next.x, next.y, 0.0), apex_height, plan.step_period)?;
        Ok(Self { plan, preview, omega0, apex_height, step: 0, schedule, swing })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn step_period(&self) -> f64 {
        self.plan.step_period
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    /// Footprints so far landed, followed by the still-planned ones.
    pub fn footprints(&self) -> &[Vec2] {
        &self.plan.footprints
    }

    pub fn schedule(&self) -> &DcmBoundarySchedule {
        &self.schedule
    }

    pub fn stance(&self) -> Vec2 {
        footprint_at(&self.plan, self.step)
    }

    pub fn planned_next(&self) -> Vec2 {
        footprint_at(&self.plan, self.step + 1)
    }

    /// Planned DCM at the start of the current step.
    pub fn boundary(&self) -> Vec2 {
        self.schedule.boundaries()[0]
    }

    /// Planned DCM at the end of the step after the current one.
    pub fn boundary_next2(&self) -> Vec2 {
        self.schedule.boundaries()[2]
    }

    /// Desired DCM and its rate `t_in_step` into the current step.
    pub fn reference(&self, t_in_step: f64) -> Result<(Vec2, Vec2)> {
        let u = self.stance();
        let xi = reference_dcm_at(&self.boundary(), &u, self.omega0, self.plan.step_period, t_in_step)?;
        Ok((xi, reference_dcm_velocity(&xi, &u, self.omega0)))
    }

    pub fn swing(&self) -> &SwingTrajectory {
        &self.swing
    }

    pub fn swing_mut(&mut self) -> &mut SwingTrajectory {
        &mut self.swing
    }

    /// Landing point implied by the plan and the live modification.
    pub fn commanded_landing(&self) -> Vec2 {
        self.planned_next() + self.swing.modification()
    }

    /// Zero-duration support exchange: the swing foot lands at `landed`,
    /// becomes the stance, the boundaries are recomputed from the updated
    /// footprints, and the former stance foot starts a new swing from
    /// `swing_start` toward the next planned footprint.
    pub fn support_exchange(&mut self, landed: Vec2, swing_start: Vec3) -> Result<()> {
        let next = self.step + 1;
        let last = self.plan.footprints.len() - 1;
        if next > last {
            let end = *self.plan.footprints.last().expect("validated plan");
            self.plan.footprints.push(end);
        }
        self.plan.footprints[next] = landed;
        self.step = next;
        self.schedule = backward_recursion(&self.plan.preview_window(self.step, self.preview)?, self.omega0)?;
        let target = self.planned_next();
        self.swing = SwingTrajectory::new(swing_start, Vec3::new(target.x, target.y, 0.0), self.apex_height, self.plan.step_period)?;
        Ok(())
    }
}

fn footprint_at(plan: &FootstepPlan, k: usize) -> Vec2 {
    plan.footprints.get(k).copied().unwrap_or_else(|| *plan.footprints.last().expect("validated plan"))
}
