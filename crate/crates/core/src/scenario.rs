//! Versioned JSON scenario files: grid, initial swarm, formula text
//! with named constants and sub-formulas, planner settings, and region
//! annotations for rendering.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridConfig, GridError, OccupancyMatrix};
use crate::logic::{parse_with, FormulaEnv, ParseError, SpatelFormula};
use crate::lowlevel::{occupancy_of, scatter};
use crate::planner::{PlanMode, PlannerConfig, RunningCost};
use crate::render::Region;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("unsupported scenario version {0} (expected {SCHEMA_VERSION})")]
    Version(u32),
    #[error("formula error in `{name}`: {source}")]
    Formula {
        name: String,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("initial positions hold {got} robots but the grid is configured for {expected}")]
    RobotCount { expected: u64, got: u64 },
    #[error("robot {index} at ({x}, {y}) lies outside the workspace")]
    OutOfWorkspace { index: usize, x: f64, y: f64 },
    #[error("initial counts grid is {got}x{got2} but the grid has {expected} cells per side")]
    CountsShape {
        expected: usize,
        got: usize,
        got2: usize,
    },
}

/// Initial swarm: either explicit positions or per-cell counts placed
/// uniformly inside each cell using the scenario seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    Positions(Vec<(f64, f64)>),
    Counts(Vec<Vec<u64>>),
}

/// Planner settings as stored in scenario files (the runtime-only
/// fields of `PlannerConfig` — time limit, cancellation — come from CLI
/// flags instead).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSettings {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub mode: PlanMode,
    #[serde(default)]
    pub running_cost: RunningCost,
    #[serde(default)]
    pub capacity: Option<u64>,
    #[serde(default)]
    pub epsilon: f64,
}

fn default_alpha() -> f64 {
    1.0
}

impl Default for PlannerSettings {
    fn default() -> Self {
        PlannerSettings {
            alpha: 1.0,
            mode: PlanMode::Exact,
            running_cost: RunningCost::TotalDisplacement,
            capacity: None,
            epsilon: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub grid: GridConfig,
    pub initial: Initial,
    /// Seeds in-cell placement (counts mode) and any downstream
    /// randomness; same seed, same artifacts.
    #[serde(default)]
    pub seed: u64,
    /// Named thresholds usable in formulas (the case study's gammas).
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    /// Named sub-formulas, resolved in order; later entries may
    /// reference earlier ones.
    #[serde(default)]
    pub definitions: Vec<(String, String)>,
    pub formula: String,
    #[serde(default)]
    pub planner: PlannerSettings,
    #[serde(default)]
    pub regions: Vec<Region>,
}

impl Scenario {
    pub fn from_str(text: &str) -> Result<Scenario, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario =
            serde_path_to_error::deserialize(de).map_err(|e| ScenarioError::Schema {
                path: format!("/{}", e.path().to_string().replace('.', "/")),
                message: e.inner().to_string(),
            })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: &Path) -> Result<Scenario, ScenarioError> {
        Scenario::from_str(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if self.version != SCHEMA_VERSION {
            return Err(ScenarioError::Version(self.version));
        }
        self.grid.validate()?;
        let side = self.grid.cells_per_side();
        match &self.initial {
            Initial::Positions(ps) => {
                if ps.len() as u64 != self.grid.robot_count {
                    return Err(ScenarioError::RobotCount {
                        expected: self.grid.robot_count,
                        got: ps.len() as u64,
                    });
                }
                let half = self.grid.side_length / 2.0;
                for (index, &(x, y)) in ps.iter().enumerate() {
                    if x < -half || x > half || y < -half || y > half {
                        return Err(ScenarioError::OutOfWorkspace { index, x, y });
                    }
                }
            }
            Initial::Counts(rows) => {
                if rows.len() != side || rows.iter().any(|r| r.len() != side) {
                    return Err(ScenarioError::CountsShape {
                        expected: side,
                        got: rows.len(),
                        got2: rows.first().map_or(0, |r| r.len()),
                    });
                }
                let total: u64 = rows.iter().flatten().sum();
                if total != self.grid.robot_count {
                    return Err(ScenarioError::RobotCount {
                        expected: self.grid.robot_count,
                        got: total,
                    });
                }
            }
        }
        // Formula (and all definitions) must parse.
        self.formula()?;
        Ok(())
    }

    /// Parses the scenario formula in an environment holding all named
    /// constants and definitions.
    pub fn formula(&self) -> Result<SpatelFormula, ScenarioError> {
        let mut env = FormulaEnv::new();
        for (name, value) in &self.constants {
            env.set_constant(name, *value);
        }
        for (name, text) in &self.definitions {
            env.define(name, text).map_err(|source| ScenarioError::Formula {
                name: name.clone(),
                source,
            })?;
        }
        parse_with(&self.formula, &env).map_err(|source| ScenarioError::Formula {
            name: "formula".into(),
            source,
        })
    }

    /// Initial robot positions: explicit, or scattered per counts with
    /// the scenario seed.
    pub fn initial_positions(&self) -> Result<Vec<(f64, f64)>, ScenarioError> {
        match &self.initial {
            Initial::Positions(ps) => Ok(ps.clone()),
            Initial::Counts(rows) => {
                let m = OccupancyMatrix::from_rows(rows)?;
                Ok(scatter(&self.grid, &m, self.seed))
            }
        }
    }

    pub fn initial_occupancy(&self) -> Result<OccupancyMatrix, ScenarioError> {
        match &self.initial {
            Initial::Positions(ps) => Ok(occupancy_of(&self.grid, ps)),
            Initial::Counts(rows) => Ok(OccupancyMatrix::from_rows(rows)?),
        }
    }

    pub fn planner_config(&self) -> PlannerConfig {
        PlannerConfig {
            alpha: self.planner.alpha,
            running_cost: self.planner.running_cost,
            mode: self.planner.mode,
            capacity: self.planner.capacity,
            epsilon: self.planner.epsilon,
            time_limit: None,
            cancel: None,
        }
    }
}
