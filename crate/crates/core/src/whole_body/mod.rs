//! Planar whole-body model and the prioritized inverse-dynamics tasks built
//! on it.

pub mod model;
pub mod tasks;

pub use model::{
    dynamics_terms, leg_ik, total_energy, ContactMode, ContactState, DynamicsTerms, Foot, FootParams,
    Kinematics, LinkParams, PlanarBipedModel, PointTerms, N_DOF,
};
pub use tasks::{
    assemble_hierarchy, base_task, com_task, contact_inequalities, contact_wrench_rows, dynamics_level, posture_task,
    solve_whole_body, stance_foot_task, swing_foot_task, torque_limits, wrench_cop, DecisionLayout, FootReference, PdGains,
    Profile, TaskSet, WholeBodyCommand, WholeBodyGains, WholeBodyTargets,
};
