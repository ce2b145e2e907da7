//! Low-level layer: robot-to-flow assignment and the kinematic
//! simulator.
//!
//! The assignment is a greedy loop: while any neighbor demand
//! is unmet, pick the robot closest (perpendicular distance) to a
//! demanded edge and send it there, recomputing distances after every
//! pick. The simulator then emits one constant-velocity segment per
//! assigned robot and step, moving it exactly one cell width, and
//! cross-checks the induced occupancy against the plan at every step
//! boundary.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{cell_bounds, GridConfig, GridError, OccupancyMatrix};
use crate::planner::FlowPlan;

#[derive(Debug, Error)]
pub enum LowLevelError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("robot {robot} at ({x}, {y}) lies outside the workspace")]
    OutOfWorkspace { robot: usize, x: f64, y: f64 },
    #[error("initial positions induce occupancy different from the plan at cell [{i},{j}]: {got} vs {expected}")]
    InitialMismatch {
        i: usize,
        j: usize,
        got: u64,
        expected: u64,
    },
    #[error("step {step} cell [{i},{j}]: outflow demand {demand} exceeds the {supply} robots present")]
    DemandExceedsSupply {
        step: usize,
        i: usize,
        j: usize,
        demand: u64,
        supply: u64,
    },
    #[error("occupancy mismatch after step {step} (internal error)")]
    OccupancyMismatch { step: usize },
    #[error("control speed {speed} exceeds the bound {max}")]
    SpeedBound { speed: f64, max: f64 },
}

/// Robot positions at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmState {
    pub time: f64,
    pub positions: Vec<(f64, f64)>,
}

/// Constant-velocity control of one robot over one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSegment {
    pub robot: usize,
    pub start: f64,
    pub end: f64,
    /// m/s; either zero or exactly one cell width per step along an
    /// axis.
    pub velocity: (f64, f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    /// States at every step boundary, `0..=K`.
    pub states: Vec<SwarmState>,
    /// Only moving robots get segments; everyone else holds position.
    pub segments: Vec<ControlSegment>,
    pub step_seconds: f64,
}

impl Trajectory {
    /// Piecewise-linear position of `robot` at time `t`.
    pub fn position_at(&self, robot: usize, t: f64) -> (f64, f64) {
        let dt = self.step_seconds;
        let k = ((t / dt).floor() as usize).min(self.states.len() - 2);
        let (x0, y0) = self.states[k].positions[robot];
        let local = t - k as f64 * dt;
        for seg in &self.segments {
            if seg.robot == robot && seg.start <= t + 1e-12 && t < seg.end + 1e-12 {
                return (x0 + seg.velocity.0 * local, y0 + seg.velocity.1 * local);
            }
        }
        (x0, y0)
    }

    /// CSV export `t,robot_id,x,y`, sampled `samples_per_step` times per
    /// step plus the final boundary.
    pub fn to_csv(&self, samples_per_step: usize) -> String {
        let mut out = String::from("t,robot_id,x,y\n");
        let dt = self.step_seconds;
        let steps = self.states.len() - 1;
        let per = samples_per_step.max(1);
        let robots = self.states[0].positions.len();
        for k in 0..steps {
            for s in 0..per {
                let t = k as f64 * dt + s as f64 * dt / per as f64;
                for r in 0..robots {
                    let (x, y) = self.position_at(r, t);
                    out.push_str(&format!("{t},{r},{x},{y}\n"));
                }
            }
        }
        let t = steps as f64 * dt;
        for r in 0..robots {
            let (x, y) = self.states[steps].positions[r];
            out.push_str(&format!("{t},{r},{x},{y}\n"));
        }
        out
    }
}

/// 0-based cell of a workspace position.
pub fn cell_of(cfg: &GridConfig, x: f64, y: f64) -> (usize, usize) {
    let a = cfg.side_length;
    let w = cfg.cell_width();
    let n = cfg.cells_per_side();
    let j = (((x + a / 2.0) / w).floor() as isize).clamp(0, n as isize - 1) as usize;
    let i = (((a / 2.0 - y) / w).floor() as isize).clamp(0, n as isize - 1) as usize;
    (i, j)
}

/// Occupancy matrix induced by a set of positions.
pub fn occupancy_of(cfg: &GridConfig, positions: &[(f64, f64)]) -> OccupancyMatrix {
    let mut m = OccupancyMatrix::zeros(cfg.depth);
    for &(x, y) in positions {
        let (i, j) = cell_of(cfg, x, y);
        m.set(i, j, m.get(i, j) + 1);
    }
    m
}

/// Uniform in-cell placement of `n0` robots, deterministic per seed.
/// Robot indices run over cells in NW-row-major order.
pub fn scatter(cfg: &GridConfig, n0: &OccupancyMatrix, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n0.total() as usize);
    for i in 0..n0.side() {
        for j in 0..n0.side() {
            let b = cell_bounds(cfg, i + 1, j + 1).expect("cell in range");
            for _ in 0..n0.get(i, j) {
                let x = rng.gen_range(b.x_min..b.x_max);
                let y = rng.gen_range(b.y_min..b.y_max);
                out.push((x, y));
            }
        }
    }
    out
}

/// Perpendicular distance from a robot to the edge shared with a
/// neighbor cell.
fn edge_distance(cfg: &GridConfig, from: (usize, usize), to: (usize, usize), pos: (f64, f64)) -> f64 {
    let b = cell_bounds(cfg, from.0 + 1, from.1 + 1).expect("cell in range");
    let (x, y) = pos;
    if to.0 + 1 == from.0 {
        b.y_max - y // north edge
    } else if to.0 == from.0 + 1 {
        y - b.y_min // south edge
    } else if to.1 + 1 == from.1 {
        x - b.x_min // west edge
    } else {
        b.x_max - x // east edge
    }
}

/// Greedy robot-to-neighbor assignment for one cell and step.
///
/// `robots` are `(robot index, position)` pairs of the robots currently
/// in the cell; `demands` are `(neighbor cell, robots required)` pairs.
/// Returns `(robot index, neighbor)` assignments. Ties break by
/// distance, then robot index, then neighbor NW-row-major order.
pub fn assign(
    cfg: &GridConfig,
    cell: (usize, usize),
    robots: &[(usize, (f64, f64))],
    demands: &[((usize, usize), u64)],
) -> Result<Vec<(usize, (usize, usize))>, LowLevelError> {
    let total_demand: u64 = demands.iter().map(|&(_, d)| d).sum();
    if total_demand > robots.len() as u64 {
        return Err(LowLevelError::DemandExceedsSupply {
            step: 0,
            i: cell.0,
            j: cell.1,
            demand: total_demand,
            supply: robots.len() as u64,
        });
    }
    let mut remaining: Vec<((usize, usize), u64)> = demands.to_vec();
    remaining.sort_by_key(|&((i, j), _)| (i, j));
    let mut free: Vec<(usize, (f64, f64))> = robots.to_vec();
    free.sort_by_key(|&(r, _)| r);
    let mut out = Vec::new();

    while remaining.iter().any(|&(_, d)| d > 0) {
        // Recompute distances each iteration: removals can change which
        // demanded edge is nearest for the survivors.
        let mut best: Option<(f64, usize, usize)> = None; // (dist, slot in free, slot in remaining)
        for (fi, &(_, pos)) in free.iter().enumerate() {
            for (di, &(to, d)) in remaining.iter().enumerate() {
                if d == 0 {
                    continue;
                }
                let dist = edge_distance(cfg, cell, to, pos);
                let better = match best {
                    None => true,
                    Some((bd, bf, bdem)) => {
                        (dist, free[fi].0, di) < (bd, free[bf].0, bdem)
                    }
                };
                if better {
                    best = Some((dist, fi, di));
                }
            }
        }
        let (_, fi, di) = best.expect("unmet demand implies a candidate");
        let (robot, _) = free.remove(fi);
        out.push((robot, remaining[di].0));
        remaining[di].1 -= 1;
    }
    Ok(out)
}

/// Runs the plan from explicit initial positions, producing step-bounded
/// states and per-move control segments. Verifies occupancy fidelity at
/// every step boundary and the speed bound on every segment.
pub fn simulate(
    cfg: &GridConfig,
    plan: &FlowPlan,
    initial: &[(f64, f64)],
) -> Result<Trajectory, LowLevelError> {
    cfg.validate()?;
    let a = cfg.side_length;
    for (r, &(x, y)) in initial.iter().enumerate() {
        if x < -a / 2.0 || x > a / 2.0 || y < -a / 2.0 || y > a / 2.0 {
            return Err(LowLevelError::OutOfWorkspace { robot: r, x, y });
        }
    }
    let induced = occupancy_of(cfg, initial);
    if induced != plan.occupancies[0] {
        for i in 0..induced.side() {
            for j in 0..induced.side() {
                if induced.get(i, j) != plan.occupancies[0].get(i, j) {
                    return Err(LowLevelError::InitialMismatch {
                        i,
                        j,
                        got: induced.get(i, j),
                        expected: plan.occupancies[0].get(i, j),
                    });
                }
            }
        }
    }

    let dt = plan.step_seconds;
    let speed = cfg.cell_width() / dt;
    if speed > cfg.max_speed + 1e-9 {
        return Err(LowLevelError::SpeedBound {
            speed,
            max: cfg.max_speed,
        });
    }

    let mut positions: Vec<(f64, f64)> = initial.to_vec();
    let mut states = vec![SwarmState {
        time: 0.0,
        positions: positions.clone(),
    }];
    let mut segments = Vec::new();

    for k in 0..plan.steps {
        let side = cfg.cells_per_side();
        // Robots per cell.
        let mut per_cell: Vec<Vec<(usize, (f64, f64))>> = vec![Vec::new(); side * side];
        for (r, &p) in positions.iter().enumerate() {
            let (i, j) = cell_of(cfg, p.0, p.1);
            per_cell[i * side + j].push((r, p));
        }
        let mut next = positions.clone();
        for i in 0..side {
            for j in 0..side {
                let demands: Vec<((usize, usize), u64)> = plan
                    .flows
                    .iter()
                    .filter(|m| m.step == k && m.from == (i, j))
                    .map(|m| (m.to, m.amount))
                    .collect();
                if demands.is_empty() {
                    continue;
                }
                let assignments = assign(cfg, (i, j), &per_cell[i * side + j], &demands)
                    .map_err(|e| match e {
                        LowLevelError::DemandExceedsSupply {
                            i: ci,
                            j: cj,
                            demand,
                            supply,
                            ..
                        } => LowLevelError::DemandExceedsSupply {
                            step: k,
                            i: ci,
                            j: cj,
                            demand,
                            supply,
                        },
                        other => other,
                    })?;
                for (robot, (i2, j2)) in assignments {
                    // Eq. 18: u = a / (2^D dt) * (j' - j, i - i').
                    let vx = speed * (j2 as f64 - j as f64);
                    let vy = speed * (i as f64 - i2 as f64);
                    segments.push(ControlSegment {
                        robot,
                        start: k as f64 * dt,
                        end: (k + 1) as f64 * dt,
                        velocity: (vx, vy),
                    });
                    next[robot].0 += vx * dt;
                    next[robot].1 += vy * dt;
                }
            }
        }
        positions = next;
        states.push(SwarmState {
            time: (k + 1) as f64 * dt,
            positions: positions.clone(),
        });
        if occupancy_of(cfg, &positions) != plan.occupancies[k + 1] {
            return Err(LowLevelError::OccupancyMismatch { step: k });
        }
    }

    Ok(Trajectory {
        states,
        segments,
        step_seconds: dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse;
    use crate::planner::{plan, PlannerConfig};

    fn cfg(depth: u32, robots: u64) -> GridConfig {
        GridConfig {
            depth,
            side_length: 4.0,
            robot_count: robots,
            max_speed: 10.0,
            step: 1.0,
            allow_deep_grid: false,
        }
    }

    #[test]
    fn cell_of_maps_corners() {
        let c = cfg(1, 1);
        assert_eq!(cell_of(&c, -1.5, 1.5), (0, 0)); // NW
        assert_eq!(cell_of(&c, 1.5, 1.5), (0, 1)); // NE
        assert_eq!(cell_of(&c, -1.5, -1.5), (1, 0)); // SW
        assert_eq!(cell_of(&c, 1.5, -1.5), (1, 1)); // SE
    }

    #[test]
    fn single_choice_assignment() {
        let c = cfg(1, 1);
        // One robot at the center of NW; demand 1 to the east.
        let got = assign(&c, (0, 0), &[(0, (-1.0, 1.0))], &[((0, 1), 1)]).unwrap();
        assert_eq!(got, vec![(0, (0, 1))]);
    }

    #[test]
    fn two_robots_two_edges_greedy_matches_nearest() {
        let c = cfg(1, 2);
        // In cell SW: robot 0 near the north edge, robot 1 near the east
        // edge; demands north 1, east 1.
        let robots = [(0, (-1.5, -0.1)), (1, (-0.1, -1.5))];
        let got = assign(&c, (1, 0), &robots, &[((0, 0), 1), ((1, 1), 1)]).unwrap();
        let mut sorted = got.clone();
        sorted.sort();
        assert_eq!(sorted, vec![(0, (0, 0)), (1, (1, 1))]);
    }

    #[test]
    fn zero_demand_assigns_nobody() {
        let c = cfg(1, 1);
        let got = assign(&c, (0, 0), &[(0, (-1.0, 1.0))], &[]).unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn demand_exceeding_supply_rejected() {
        let c = cfg(1, 1);
        assert!(matches!(
            assign(&c, (0, 0), &[(0, (-1.0, 1.0))], &[((0, 1), 2)]),
            Err(LowLevelError::DemandExceedsSupply { .. })
        ));
    }

    #[test]
    fn east_move_velocity() {
        // a=4, D=1 -> cell width 2; dt=1 -> speed 2 m/s east.
        let c = cfg(1, 1);
        let n0 = OccupancyMatrix::from_rows(&[vec![1, 0], vec![0, 0]]).unwrap();
        let phi = parse("F[0,2) (A[NE] O (mu >= 1))").unwrap();
        let p = plan(&c, &PlannerConfig::default(), &n0, &phi).unwrap();
        let initial = scatter(&c, &n0, 7);
        let traj = simulate(&c, &p, &initial).unwrap();
        let east: Vec<_> = traj
            .segments
            .iter()
            .filter(|s| s.velocity == (2.0, 0.0))
            .collect();
        assert_eq!(east.len(), 1);
    }

    #[test]
    fn north_move_velocity_sign() {
        // Robot in SW moving north: i' = i - 1 -> velocity (0, +w/dt).
        let c = cfg(1, 1);
        let n0 = OccupancyMatrix::from_rows(&[vec![0, 0], vec![1, 0]]).unwrap();
        let phi = parse("F[0,2) (A[NW] O (mu >= 1))").unwrap();
        let p = plan(&c, &PlannerConfig::default(), &n0, &phi).unwrap();
        let traj = simulate(&c, &p, &scatter(&c, &n0, 3)).unwrap();
        assert!(traj.segments.iter().any(|s| s.velocity == (0.0, 2.0)));
    }

    #[test]
    fn empty_plan_keeps_positions() {
        let c = cfg(1, 2);
        let n0 = OccupancyMatrix::from_rows(&[vec![1, 1], vec![0, 0]]).unwrap();
        let phi = parse("G[0,2) true").unwrap();
        let p = plan(
            &c,
            &PlannerConfig {
                alpha: 0.0,
                ..Default::default()
            },
            &n0,
            &phi,
        )
        .unwrap();
        let initial = scatter(&c, &n0, 11);
        let traj = simulate(&c, &p, &initial).unwrap();
        assert!(traj.segments.is_empty());
        for state in &traj.states {
            assert_eq!(state.positions, initial);
        }
    }

    #[test]
    fn occupancy_fidelity_and_speed_bound() {
        let c = cfg(1, 3);
        let n0 = OccupancyMatrix::from_rows(&[vec![3, 0], vec![0, 0]]).unwrap();
        let phi = parse("F[0,3) (A[SE] O (mu >= 2))").unwrap();
        let p = plan(&c, &PlannerConfig::default(), &n0, &phi).unwrap();
        let traj = simulate(&c, &p, &scatter(&c, &n0, 5)).unwrap();
        for (k, state) in traj.states.iter().enumerate() {
            assert_eq!(occupancy_of(&c, &state.positions), p.occupancies[k]);
        }
        for seg in &traj.segments {
            let speed = (seg.velocity.0.powi(2) + seg.velocity.1.powi(2)).sqrt();
            assert!(speed <= c.max_speed + 1e-9);
        }
    }

    #[test]
    fn determinism() {
        let c = cfg(1, 3);
        let n0 = OccupancyMatrix::from_rows(&[vec![2, 1], vec![0, 0]]).unwrap();
        let phi = parse("F[0,3) (A[SE] O (mu >= 2))").unwrap();
        let p = plan(&c, &PlannerConfig::default(), &n0, &phi).unwrap();
        let initial = scatter(&c, &n0, 42);
        let t1 = simulate(&c, &p, &initial).unwrap();
        let t2 = simulate(&c, &p, &initial).unwrap();
        assert_eq!(t1.states, t2.states);
        assert_eq!(t1.segments, t2.segments);
    }

    #[test]
    fn csv_has_header_and_final_row() {
        let c = cfg(1, 1);
        let n0 = OccupancyMatrix::from_rows(&[vec![1, 0], vec![0, 0]]).unwrap();
        let phi = parse("G[0,1) true").unwrap();
        let p = plan(
            &c,
            &PlannerConfig {
                alpha: 0.0,
                ..Default::default()
            },
            &n0,
            &phi,
        )
        .unwrap();
        let traj = simulate(&c, &p, &scatter(&c, &n0, 1)).unwrap();
        let csv = traj.to_csv(2);
        assert!(csv.starts_with("t,robot_id,x,y\n"));
        // K=1 step, 2 samples + final boundary = 3 rows for 1 robot.
        assert_eq!(csv.lines().count(), 4);
    }
}
