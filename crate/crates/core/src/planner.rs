//! High-level planning: assemble the dynamics + formula + robustness
//! MILP, solve it, and extract an integral flow plan.
//!
//! Exact mode keeps flow variables integer. Relaxed-and-round mode
//! declares flows continuous (satisfaction variables stay binary — they
//! carry the formula semantics), then restores integrality by
//! largest-remainder rounding per cell and step, re-deriving the
//! occupancies forward so conservation holds exactly. Either way, the
//! returned plan's robustness is re-measured by the monitor on the
//! actual occupancy trajectory, never taken on faith from the solver.

use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{
    self, encode_dynamics, encode_formula, encode_robustness, neighbors, EncodeError, FlowVars,
};
use crate::grid::{GridConfig, GridError, OccupancyMatrix};
use crate::logic::SpatelFormula;
use crate::milp::{
    ConstraintOp, IntegerMode, MilpError, MilpModel, MilpSolution, SolveOptions, SolveStatus,
};
use crate::monitor::{spatel_robustness, step_window, MonitorError, QtsSignal};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error("initial occupancy totals {got} robots but the grid is configured for {expected}")]
    RobotCountMismatch { expected: u64, got: u64 },
    #[error("initial occupancy is {got}x{got} but the grid has {expected} cells per side")]
    SideMismatch { expected: usize, got: usize },
    #[error("solver hit the time limit with no incumbent plan")]
    TimeLimitNoIncumbent,
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RunningCost {
    #[default]
    TotalDisplacement,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    #[default]
    Exact,
    RelaxedRound,
}

#[derive(Debug, Clone)]
pub struct PlannerConfig {
    /// Robustness weight in the objective `-alpha * rho + sum f`.
    pub alpha: f64,
    pub running_cost: RunningCost,
    pub mode: PlanMode,
    /// Optional per-cell occupancy cap (Remark 2's n^cap).
    pub capacity: Option<u64>,
    /// Strictness: satisfaction is demanded as `rho >= epsilon`.
    pub epsilon: f64,
    pub time_limit: Option<Duration>,
    /// Cooperative cancellation, honored at branch-and-bound node
    /// boundaries.
    pub cancel: Option<Arc<AtomicBool>>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            alpha: 1.0,
            running_cost: RunningCost::TotalDisplacement,
            mode: PlanMode::Exact,
            capacity: None,
            epsilon: 0.0,
            time_limit: None,
            cancel: None,
        }
    }
}

/// One unit-direction transfer in a plan: `amount` robots from `from`
/// to the 4-neighbor `to` during step `step`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowMove {
    pub step: usize,
    pub from: (usize, usize),
    pub to: (usize, usize),
    pub amount: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowPlan {
    pub mode: PlanMode,
    /// Sparse integral flows (zero flows omitted).
    pub flows: Vec<FlowMove>,
    /// Occupancy frames `N[0..=K]`.
    pub occupancies: Vec<OccupancyMatrix>,
    /// Monitored robustness of the occupancy trajectory (ground truth).
    pub robustness: f64,
    /// The solver's robustness variable value; can differ from
    /// `robustness` after rounding.
    pub milp_robustness: f64,
    pub objective_value: f64,
    pub displacement_total: u64,
    /// Set when strict satisfaction was infeasible and the plan comes
    /// from violation minimization instead.
    pub best_effort: bool,
    /// True when branch-and-bound stopped on the time limit; the plan is
    /// the incumbent, not a proven optimum.
    pub time_limited: bool,
    pub steps: usize,
    pub step_seconds: f64,
    /// Wall-clock solve time; excluded from serialization so identical
    /// scenarios and seeds produce byte-identical plan files.
    #[serde(skip_serializing, default)]
    pub solve_seconds: f64,
}

impl FlowPlan {
    /// Amount moved from `from` to `to` during `step`, zero if absent.
    pub fn flow_amount(&self, step: usize, from: (usize, usize), to: (usize, usize)) -> u64 {
        self.flows
            .iter()
            .find(|m| m.step == step && m.from == from && m.to == to)
            .map_or(0, |m| m.amount)
    }
}

/// Number of discrete steps the formula requires: `horizon / dt`.
pub fn horizon_steps(phi: &SpatelFormula, dt: f64) -> Result<usize, MonitorError> {
    let horizon = phi.horizon().max(dt);
    Ok(step_window(0, &crate::logic::Interval::new(0.0, horizon), dt)?.end)
}

/// Solves Problem 1's discrete MILP for `phi` from initial occupancy
/// `n0`. On strict infeasibility, automatically falls back to violation
/// minimization (`maximize rho` with `rho` free) and marks the plan
/// best-effort.
pub fn plan(
    cfg: &GridConfig,
    pcfg: &PlannerConfig,
    n0: &OccupancyMatrix,
    phi: &SpatelFormula,
) -> Result<FlowPlan, PlanError> {
    cfg.validate()?;
    if n0.total() != cfg.robot_count {
        return Err(PlanError::RobotCountMismatch {
            expected: cfg.robot_count,
            got: n0.total(),
        });
    }
    if n0.side() != cfg.cells_per_side() {
        return Err(PlanError::SideMismatch {
            expected: cfg.cells_per_side(),
            got: n0.side(),
        });
    }
    let nnf = phi.to_nnf();
    let steps = horizon_steps(&nnf, cfg.step)?;

    let started = Instant::now();
    let strict = build_and_solve(pcfg, cfg.step, n0, &nnf, steps, false)?;
    let (solved, best_effort) = match strict {
        Solved::Feasible(s) => (s, false),
        Solved::Infeasible => {
            // "Relax the last constraint rho >= 0": drop strictness and
            // minimize violation.
            match build_and_solve(pcfg, cfg.step, n0, &nnf, steps, true)? {
                Solved::Feasible(s) => (s, true),
                Solved::Infeasible => {
                    return Err(PlanError::Internal(
                        "violation-minimization model infeasible; dynamics must always \
                         admit the zero-flow plan"
                            .into(),
                    ))
                }
            }
        }
    };
    let solve_seconds = started.elapsed().as_secs_f64();

    let (flows, occupancies) = match pcfg.mode {
        PlanMode::Exact => {
            let occ = extract_occupancies(&solved.solution, &solved.flow_vars)?;
            (integral_flows(&solved), occ)
        }
        PlanMode::RelaxedRound => round_relaxed(n0, &solved)?,
    };

    let signal = QtsSignal::from_occupancies(&occupancies, cfg.step)?;
    let robustness = spatel_robustness(phi, &signal, 0)?;
    let displacement_total = flows.iter().map(|m| m.amount).sum();

    Ok(FlowPlan {
        mode: pcfg.mode,
        flows,
        occupancies,
        robustness,
        milp_robustness: solved.rho_value,
        objective_value: solved.solution.objective_value,
        displacement_total,
        best_effort,
        time_limited: solved.solution.status == SolveStatus::TimeLimit,
        steps,
        step_seconds: cfg.step,
        solve_seconds,
    })
}

/// A feasible solve of the planner MILP, before flow extraction.
pub struct SolvedModel {
    pub solution: MilpSolution,
    pub flow_vars: FlowVars,
    pub rho_value: f64,
}

enum Solved {
    Feasible(SolvedModel),
    Infeasible,
}

/// A fully assembled (sealed) planner MILP, before solving — also the
/// entry point for LP export and external-solution import.
pub struct BuiltModel {
    pub model: MilpModel,
    pub flow_vars: FlowVars,
    pub rho: crate::milp::VarId,
}

/// Assembles Problem 1's MILP: dynamics, formula with robustness
/// tightening, the pinned root, strictness (unless in violation mode),
/// and the objective.
pub fn build_model(
    pcfg: &PlannerConfig,
    dt: f64,
    n0: &OccupancyMatrix,
    nnf: &SpatelFormula,
    steps: usize,
    violation_mode: bool,
) -> Result<BuiltModel, PlanError> {
    let mut model = MilpModel::new();
    let flow_mode = match pcfg.mode {
        PlanMode::Exact => IntegerMode::Exact,
        PlanMode::RelaxedRound => IntegerMode::Relaxed,
    };
    let flow_vars = encode_dynamics(&mut model, n0, steps, flow_mode, pcfg.capacity)?;
    let rho = encode_robustness(&mut model, encoder::rho_bound(n0.total(), nnf))?;
    let big_m = encoder::recommended_big_m(n0.total(), nnf, true);
    let encoded = encode_formula(&mut model, nnf, &flow_vars, dt, big_m, Some(rho))?;

    model.add_constraint("pin_root", vec![(encoded.root, 1.0)], ConstraintOp::Eq, 1.0)?;
    if !violation_mode {
        model.add_constraint("strict_rho", vec![(rho, 1.0)], ConstraintOp::Ge, pcfg.epsilon)?;
    }

    let mut objective: Vec<_> = vec![(rho, if violation_mode { -1.0 } else { -pcfg.alpha })];
    if !violation_mode && pcfg.running_cost == RunningCost::TotalDisplacement {
        objective.extend(flow_vars.flow_list.iter().map(|&(_, f)| (f, 1.0)));
    }
    model.set_objective(objective)?;
    model.seal();
    Ok(BuiltModel {
        model,
        flow_vars,
        rho,
    })
}

fn build_and_solve(
    pcfg: &PlannerConfig,
    dt: f64,
    n0: &OccupancyMatrix,
    nnf: &SpatelFormula,
    steps: usize,
    violation_mode: bool,
) -> Result<Solved, PlanError> {
    let BuiltModel {
        model,
        flow_vars,
        rho,
    } = build_model(pcfg, dt, n0, nnf, steps, violation_mode)?;

    // Satisfaction variables stay binary in both planner modes, so the
    // MILP layer always runs exact branch-and-bound; "relaxed" only
    // changed the flow variable kinds above.
    let solution = model.solve(&SolveOptions {
        time_limit: pcfg.time_limit,
        integer_mode: Some(IntegerMode::Exact),
        cancel: pcfg.cancel.clone(),
    })?;
    match solution.status {
        SolveStatus::Infeasible => Ok(Solved::Infeasible),
        SolveStatus::TimeLimit if solution.values.is_empty() => {
            Err(PlanError::TimeLimitNoIncumbent)
        }
        _ => {
            let rho_value = solution.values[rho.0];
            Ok(Solved::Feasible(SolvedModel {
                solution,
                flow_vars,
                rho_value,
            }))
        }
    }
}

/// Reads the occupancy variables of a feasible solution, validating the
/// conservation recurrence against the flow values to 1e-6 (a mismatch
/// signals an encoder or solver bug) and integrality of the frames.
pub fn extract_occupancies(
    solution: &MilpSolution,
    flow_vars: &FlowVars,
) -> Result<Vec<OccupancyMatrix>, PlanError> {
    let side = flow_vars.side;
    validate_conservation(solution, flow_vars)?;
    let mut frames = Vec::with_capacity(flow_vars.steps + 1);
    for k in 0..=flow_vars.steps {
        let mut m = OccupancyMatrix::zeros(side.trailing_zeros());
        for i in 0..side {
            for j in 0..side {
                let v = solution.values[flow_vars.occ(k, i, j).0];
                if (v - v.round()).abs() > 1e-6 {
                    return Err(PlanError::Internal(format!(
                        "occupancy n[{k}][{i},{j}] = {v} is not integral"
                    )));
                }
                m.set(i, j, v.round() as u64);
            }
        }
        frames.push(m);
    }
    Ok(frames)
}

fn validate_conservation(solution: &MilpSolution, flow_vars: &FlowVars) -> Result<(), PlanError> {
    let side = flow_vars.side;
    for k in 0..flow_vars.steps {
        for i in 0..side {
            for j in 0..side {
                let mut expected = solution.values[flow_vars.occ(k, i, j).0];
                for (i2, j2) in neighbors(side, i, j) {
                    expected -= solution.values[flow_vars.flow(k, i, j, i2, j2).unwrap().0];
                    expected += solution.values[flow_vars.flow(k, i2, j2, i, j).unwrap().0];
                }
                let got = solution.values[flow_vars.occ(k + 1, i, j).0];
                if (got - expected).abs() > 1e-6 {
                    return Err(PlanError::Internal(format!(
                        "conservation violated at step {k} cell [{i},{j}]: \
                         n[k+1]={got} vs recurrence {expected}"
                    )));
                }
            }
        }
    }
    Ok(())
}

fn integral_flows(solved: &SolvedModel) -> Vec<FlowMove> {
    solved
        .flow_vars
        .flow_list
        .iter()
        .filter_map(|&((k, i, j, i2, j2), f)| {
            let amount = solved.solution.values[f.0].round() as u64;
            (amount > 0).then_some(FlowMove {
                step: k,
                from: (i, j),
                to: (i2, j2),
                amount,
            })
        })
        .collect()
}

/// Largest-remainder rounding of a fractional flow solution. Per cell
/// and step: floor every outgoing flow, then hand the cell's residual
/// units to the flows with the largest fractional remainders (ties by
/// neighbor NW-row-major order). Occupancies are re-derived forward, so
/// conservation, integrality, and outflow caps hold exactly.
pub fn round_relaxed(
    n0: &OccupancyMatrix,
    solved: &SolvedModel,
) -> Result<(Vec<FlowMove>, Vec<OccupancyMatrix>), PlanError> {
    let side = solved.flow_vars.side;
    let steps = solved.flow_vars.steps;
    let mut frames = vec![n0.clone()];
    let mut moves = Vec::new();

    for k in 0..steps {
        let current = frames[k].clone();
        let mut next = current.clone();
        for i in 0..side {
            for j in 0..side {
                let nbs = neighbors(side, i, j);
                let fracs: Vec<f64> = nbs
                    .iter()
                    .map(|&(i2, j2)| {
                        solved.solution.values
                            [solved.flow_vars.flow(k, i, j, i2, j2).unwrap().0]
                            .max(0.0)
                    })
                    .collect();
                let total: f64 = fracs.iter().sum();
                let available = current.get(i, j);
                // Target outflow: nearest integer to the fractional sum,
                // never beyond what the rounded trajectory holds here.
                let target = (total.round() as u64).min(available);
                let mut units: Vec<u64> = fracs.iter().map(|f| f.floor() as u64).collect();
                let mut assigned: u64 = units.iter().sum();

                // Order by descending remainder; ties keep NW-row-major
                // neighbor order (sort_by is stable).
                let mut order: Vec<usize> = (0..nbs.len()).collect();
                order.sort_by(|&a, &b| {
                    let ra = fracs[a] - fracs[a].floor();
                    let rb = fracs[b] - fracs[b].floor();
                    rb.partial_cmp(&ra).unwrap()
                });
                let mut idx = 0;
                while assigned < target {
                    units[order[idx % order.len()]] += 1;
                    assigned += 1;
                    idx += 1;
                }
                // The available-mass cap can undershoot the floors;
                // shave the smallest-remainder flows first.
                let mut back = order.len();
                while assigned > target {
                    back = if back == 0 { order.len() - 1 } else { back - 1 };
                    if units[order[back]] > 0 {
                        units[order[back]] -= 1;
                        assigned -= 1;
                    }
                }

                for (slot, &(i2, j2)) in nbs.iter().enumerate() {
                    let amount = units[slot];
                    if amount > 0 {
                        moves.push(FlowMove {
                            step: k,
                            from: (i, j),
                            to: (i2, j2),
                            amount,
                        });
                        next.set(i, j, next.get(i, j) - amount);
                        next.set(i2, j2, next.get(i2, j2) + amount);
                    }
                }
            }
        }
        frames.push(next);
    }
    Ok((moves, frames))
}
