//! Swarm motion planning from spatio-temporal logic specifications.
//!
//! The pipeline: a gridded workspace holds a robot swarm whose per-cell
//! counts form an occupancy matrix; a quad transition system (QTS) is the
//! quad-tree view of that matrix; TSSL formulas constrain one QTS and
//! SpaTeL formulas constrain a time-indexed QTS signal. Planning encodes
//! the flow-network dynamics and the formula as a mixed-integer linear
//! program, solves it, and a low-level layer turns the cell-to-cell flows
//! into per-robot straight-line trajectories.

pub mod encoder;
pub mod grid;
pub mod logic;
pub mod lowlevel;
pub mod milp;
pub mod monitor;
pub mod planner;
pub mod render;
pub mod scenario;

pub use grid::{GridConfig, LabeledPath, OccupancyMatrix, Qts, QuadLabel};
pub use logic::{SpatelFormula, TsslFormula};
pub use milp::{MilpModel, MilpSolution, SolveStatus};
pub use monitor::{spatel_robustness, tssl_robustness, QtsSignal, Verdict};
pub use planner::{plan, FlowPlan, PlanMode, PlannerConfig};
pub use scenario::Scenario;
