//! Closed-loop simulation: plants, step bookkeeping, scenario runner.

pub mod config;
pub mod gait;
pub mod lipm_plant;
pub mod log;
pub mod multibody;
pub mod runner;
pub mod tuning;

pub use config::{PlantKind, ScenarioConfig};
pub use gait::GaitState;
pub use lipm_plant::step_lipm_plant;
pub use log::{LogRow, RunStatus, RunSummary, TrajectoryLog};
pub use multibody::{impact_map, initial_pose, step_multibody_plant, ContactAnchor, PlantOptions};
pub use runner::run_scenario;
pub use tuning::{tune_step_timing, TimingTune};
