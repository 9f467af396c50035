//! Trajectory log, CSV export and run summary.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lipm::Vec2;
use crate::swing::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    /// DCM error exceeded the abort radius.
    Diverged,
    /// The plant or controller failed (e.g. singular contact solve).
    Faulted,
}

/// One control cycle, recorded before the plant step.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub step: usize,
    pub t_in_step: f64,
    pub xi_d: Vec2,
    pub xi: Vec2,
    pub com: Vec2,
    pub com_height: f64,
    pub cop: Vec2,
    pub stance: Vec2,
    pub next_planned: Vec2,
    /// Commanded swing foot position including the modification.
    pub swing: Vec3,
    pub modification: Vec2,
    /// Per-level HQP residuals (multibody only).
    pub residuals: Vec<f64>,
    /// Joint torques (multibody only).
    pub torques: Vec<f64>,
}

impl LogRow {
    pub fn dcm_error(&self) -> f64 {
        (self.xi - self.xi_d).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub rows: Vec<LogRow>,
    pub status: RunStatus,
    pub message: Option<String>,
    pub steps_completed: usize,
    pub dt: f64,
    pub step_period: f64,
    /// Footprints actually stood on, in order.
    pub footprints: Vec<Vec2>,
    pub torque_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub status: RunStatus,
    pub message: Option<String>,
    pub steps_completed: usize,
    pub step_period_s: f64,
    pub dt_s: f64,
    pub duration_s: f64,
    pub per_step_max_dcm_error_m: Vec<f64>,
    pub max_dcm_error_m: f64,
    pub max_mod_m: f64,
}

impl TrajectoryLog {
    /// Largest DCM error within each step.
    pub fn per_step_max_dcm_error(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if out.len() <= r.step {
                out.resize(r.step + 1, 0.0);
            }
            out[r.step] = out[r.step].max(r.dcm_error());
        }
        out
    }

    pub fn max_mod(&self) -> f64 {
        self.rows.iter().map(|r| r.modification.norm()).fold(0.0, f64::max)
    }

    pub fn max_dcm_error(&self) -> f64 {
        self.rows.iter().map(LogRow::dcm_error).fold(0.0, f64::max)
    }

    /// Rows at the first cycle of each step.
    pub fn step_starts(&self) -> Vec<&LogRow> {
        let mut out = Vec::new();
        let mut last = None;
        for r in &self.rows {
            if last != Some(r.step) {
                out.push(r);
                last = Some(r.step);
            }
        }
        out
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            status: self.status,
            message: self.message.clone(),
            steps_completed: self.steps_completed,
            step_period_s: self.step_period,
            dt_s: self.dt,
            duration_s: self.rows.last().map_or(0.0, |r| r.t),
            per_step_max_dcm_error_m: self.per_step_max_dcm_error(),
            max_dcm_error_m: self.max_dcm_error(),
            max_mod_m: self.max_mod(),
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = [
            "t_s", "step", "t_in_step_s", "xi_d_x_m", "xi_d_y_m", "xi_x_m", "xi_y_m", "com_x_m", "com_y_m", "com_z_m", "cop_x_m",
            "cop_y_m", "stance_x_m", "stance_y_m", "next_planned_x_m", "next_planned_y_m", "swing_x_m", "swing_y_m", "swing_z_m",
            "mod_x_m", "mod_y_m",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let levels = self.rows.first().map_or(0, |r| r.residuals.len());
        h.extend((0..levels).map(|k| format!("hqp_residual_level{k}")));
        h.extend(self.torque_names.iter().map(|n| format!("tau_{n}_Nm")));
        h
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e: csv::Error| Error::Io(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(self.header()).map_err(io)?;
        let f = |v: f64| format!("{v:.8e}");
        for r in &self.rows {
            let mut rec = vec![f(r.t), r.step.to_string(), f(r.t_in_step)];
            for v in [r.xi_d, r.xi] {
                rec.extend([f(v.x), f(v.y)]);
            }
            rec.extend([f(r.com.x), f(r.com.y), f(r.com_height)]);
            for v in [r.cop, r.stance, r.next_planned] {
                rec.extend([f(v.x), f(v.y)]);
            }
            rec.extend([f(r.swing.x), f(r.swing.y), f(r.swing.z), f(r.modification.x), f(r.modification.y)]);
            rec.extend(r.residuals.iter().map(|v| f(*v)));
            rec.extend(r.torques.iter().map(|v| f(*v)));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(())
    }

    pub fn write_summary(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.summary()).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}
