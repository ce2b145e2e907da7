//! Command-line front end: scenario loading, planning, monitoring,
//! simulation, LP exchange, and SVG rendering.
//!
//! Exit codes: 0 satisfied/optimal, 2 best-effort (violation
//! minimized), 3 input error, 4 time limit hit.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use spatel::lowlevel::{occupancy_of, simulate};
use spatel::milp::SolveStatus;
use spatel::monitor::{satisfies, spatel_robustness, QtsSignal};
use spatel::planner::{
    build_model, extract_occupancies, horizon_steps, plan, FlowMove, FlowPlan, PlanMode,
    PlannerConfig,
};
use spatel::render::render_svg;
use spatel::Scenario;

const EXIT_BEST_EFFORT: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_TIME_LIMIT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "spatel",
    about = "Swarm motion planning from spatial-temporal logic specifications",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Relaxed,
}

/// Flags shared by every planning-capable subcommand; each overrides
/// the corresponding scenario setting.
#[derive(Args)]
struct PlanFlags {
    /// exact: integer flows; relaxed: continuous flows, rounded after.
    #[arg(long)]
    mode: Option<ModeArg>,
    /// Robustness weight in the objective.
    #[arg(long)]
    alpha: Option<f64>,
    /// Solver time limit in seconds.
    #[arg(long = "time-limit")]
    time_limit: Option<f64>,
    /// Overrides the scenario RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Per-cell occupancy cap.
    #[arg(long)]
    capacity: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the scenario's planning MILP and write plan.json.
    Plan {
        scenario: PathBuf,
        #[command(flatten)]
        flags: PlanFlags,
    },
    /// Monitor a trajectory (a plan's frames, or the stationary initial
    /// occupancy) against the scenario formula.
    Monitor {
        scenario: PathBuf,
        /// plan.json whose occupancy frames form the trajectory;
        /// omitted: the initial occupancy held stationary.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Plan (or load a plan) and run the per-robot simulator; writes
    /// trajectory.csv and per-step SVG frames.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Trajectory CSV samples per step.
        #[arg(long, default_value_t = 5)]
        samples: usize,
        #[command(flatten)]
        flags: PlanFlags,
    },
    /// Write the scenario's planning MILP in LP text format.
    ExportLp {
        scenario: PathBuf,
        #[command(flatten)]
        flags: PlanFlags,
    },
    /// Import an external `name value` solution for the scenario's
    /// MILP, validate it, and write the resulting plan.
    ImportSol {
        scenario: PathBuf,
        /// Solution file, one `variable value` pair per line.
        #[arg(long)]
        solution: PathBuf,
        #[command(flatten)]
        flags: PlanFlags,
    },
    /// Render occupancy frames (a plan's, or the initial frame) as SVG.
    Render {
        scenario: PathBuf,
        #[arg(long)]
        plan: Option<PathBuf>,
        #[command(flatten)]
        flags: PlanFlags,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn load_scenario(path: &Path, flags: &PlanFlags) -> Result<Scenario> {
    let mut scenario = Scenario::from_path(path)
        .with_context(|| format!("loading scenario {}", path.display()))?;
    if let Some(mode) = flags.mode {
        scenario.planner.mode = match mode {
            ModeArg::Exact => PlanMode::Exact,
            ModeArg::Relaxed => PlanMode::RelaxedRound,
        };
    }
    if let Some(alpha) = flags.alpha {
        scenario.planner.alpha = alpha;
    }
    if let Some(capacity) = flags.capacity {
        scenario.planner.capacity = Some(capacity);
    }
    if let Some(seed) = flags.seed {
        scenario.seed = seed;
    }
    Ok(scenario)
}

fn planner_config(scenario: &Scenario, flags: &PlanFlags) -> PlannerConfig {
    let mut pcfg = scenario.planner_config();
    pcfg.time_limit = flags.time_limit.map(Duration::from_secs_f64);
    pcfg
}

fn write_plan(out: &Path, plan: &FlowPlan) -> Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    let path = out.join("plan.json");
    let mut json = serde_json::to_string_pretty(plan)?;
    json.push('\n');
    std::fs::write(&path, json)?;
    Ok(path)
}

fn plan_summary(p: &FlowPlan) {
    let status = if p.time_limited {
        "time-limit (incumbent)"
    } else if p.best_effort {
        "best-effort (violation minimized)"
    } else {
        "optimal"
    };
    println!("status: {status}");
    println!("objective: {}", p.objective_value);
    println!("robustness (monitored): {}", p.robustness);
    println!("robustness (solver rho): {}", p.milp_robustness);
    println!("displacement total: {}", p.displacement_total);
    println!("steps: {} x {} s", p.steps, p.step_seconds);
    println!("solve time: {:.3} s", p.solve_seconds);
}

fn plan_exit(p: &FlowPlan) -> u8 {
    if p.time_limited {
        EXIT_TIME_LIMIT
    } else if p.best_effort {
        EXIT_BEST_EFFORT
    } else {
        0
    }
}

fn load_plan(path: &Path) -> Result<FlowPlan> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading plan {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing plan {}", path.display()))
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Plan { scenario, flags } => {
            let sc = load_scenario(&scenario, &flags)?;
            let phi = sc.formula()?;
            let n0 = sc.initial_occupancy()?;
            let pcfg = planner_config(&sc, &flags);
            let p = plan(&sc.grid, &pcfg, &n0, &phi)?;
            plan_summary(&p);
            let path = write_plan(&flags.out, &p)?;
            println!("plan written to {}", path.display());
            Ok(plan_exit(&p))
        }

        Command::Monitor { scenario, plan } => {
            let flags = PlanFlags {
                mode: None,
                alpha: None,
                time_limit: None,
                seed: None,
                capacity: None,
                out: PathBuf::from("out"),
            };
            let sc = load_scenario(&scenario, &flags)?;
            let phi = sc.formula()?;
            let signal = match plan {
                Some(path) => {
                    let p = load_plan(&path)?;
                    QtsSignal::from_occupancies(&p.occupancies, p.step_seconds)?
                }
                None => {
                    let n0 = sc.initial_occupancy()?;
                    let steps = horizon_steps(&phi, sc.grid.step)?;
                    QtsSignal::from_occupancies(&vec![n0; steps + 1], sc.grid.step)?
                }
            };
            let rho = spatel_robustness(&phi, &signal, 0)?;
            let verdict = satisfies(&phi, &signal, 0)?;
            println!("robustness: {rho}");
            println!("verdict: {verdict}");
            Ok(0)
        }

        Command::Simulate {
            scenario,
            plan: plan_path,
            samples,
            flags,
        } => {
            let sc = load_scenario(&scenario, &flags)?;
            let phi = sc.formula()?;
            let n0 = sc.initial_occupancy()?;
            let p = match plan_path {
                Some(path) => load_plan(&path)?,
                None => {
                    let pcfg = planner_config(&sc, &flags);
                    plan(&sc.grid, &pcfg, &n0, &phi)?
                }
            };
            let initial = sc.initial_positions()?;
            let traj = simulate(&sc.grid, &p, &initial)?;
            std::fs::create_dir_all(&flags.out)?;
            let csv_path = flags.out.join("trajectory.csv");
            std::fs::write(&csv_path, traj.to_csv(samples))?;
            for (k, state) in traj.states.iter().enumerate() {
                let svg = render_svg(
                    &sc.grid,
                    &occupancy_of(&sc.grid, &state.positions),
                    Some(&state.positions),
                    &sc.regions,
                    &format!("step {k}"),
                );
                std::fs::write(flags.out.join(format!("frame_{k:03}.svg")), svg)?;
            }
            plan_summary(&p);
            println!(
                "trajectory written to {} plus {} SVG frames",
                csv_path.display(),
                traj.states.len()
            );
            Ok(plan_exit(&p))
        }

        Command::ExportLp { scenario, flags } => {
            let sc = load_scenario(&scenario, &flags)?;
            let phi = sc.formula()?.to_nnf();
            let n0 = sc.initial_occupancy()?;
            let pcfg = planner_config(&sc, &flags);
            let steps = horizon_steps(&phi, sc.grid.step)?;
            let built = build_model(&pcfg, sc.grid.step, &n0, &phi, steps, false)?;
            std::fs::create_dir_all(&flags.out)?;
            let path = flags.out.join("model.lp");
            built.model.export_lp(&path)?;
            println!(
                "LP written to {} ({} variables, {} constraints)",
                path.display(),
                built.model.num_vars(),
                built.model.num_constraints()
            );
            Ok(0)
        }

        Command::ImportSol {
            scenario,
            solution,
            flags,
        } => {
            let sc = load_scenario(&scenario, &flags)?;
            let phi = sc.formula()?;
            let nnf = phi.to_nnf();
            let n0 = sc.initial_occupancy()?;
            let pcfg = planner_config(&sc, &flags);
            let steps = horizon_steps(&nnf, sc.grid.step)?;
            let built = build_model(&pcfg, sc.grid.step, &n0, &nnf, steps, false)?;
            let (sol, warnings) = built.model.import_solution(&solution)?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            if sol.status != SolveStatus::Optimal {
                bail!("imported solution violates integrality requirements");
            }
            let occupancies = extract_occupancies(&sol, &built.flow_vars)?;
            let flows: Vec<FlowMove> = built
                .flow_vars
                .flow_list
                .iter()
                .filter_map(|&((k, i, j, i2, j2), f)| {
                    let amount = sol.values[f.0].round() as u64;
                    (amount > 0).then_some(FlowMove {
                        step: k,
                        from: (i, j),
                        to: (i2, j2),
                        amount,
                    })
                })
                .collect();
            let signal = QtsSignal::from_occupancies(&occupancies, sc.grid.step)?;
            let robustness = spatel_robustness(&phi, &signal, 0)?;
            let displacement_total = flows.iter().map(|m| m.amount).sum();
            let p = FlowPlan {
                mode: pcfg.mode,
                flows,
                occupancies,
                robustness,
                milp_robustness: sol.values[built.rho.0],
                objective_value: sol.objective_value,
                displacement_total,
                best_effort: false,
                time_limited: false,
                steps,
                step_seconds: sc.grid.step,
                solve_seconds: 0.0,
            };
            plan_summary(&p);
            let path = write_plan(&flags.out, &p)?;
            println!("plan written to {}", path.display());
            Ok(if p.robustness >= 0.0 { 0 } else { EXIT_BEST_EFFORT })
        }

        Command::Render {
            scenario,
            plan: plan_path,
            flags,
        } => {
            let sc = load_scenario(&scenario, &flags)?;
            let frames = match plan_path {
                Some(path) => load_plan(&path)?.occupancies,
                None => vec![sc.initial_occupancy()?],
            };
            std::fs::create_dir_all(&flags.out)?;
            for (k, frame) in frames.iter().enumerate() {
                let svg = render_svg(&sc.grid, frame, None, &sc.regions, &format!("step {k}"));
                std::fs::write(flags.out.join(format!("frame_{k:03}.svg")), svg)?;
            }
            println!("{} SVG frames written to {}", frames.len(), flags.out.display());
            Ok(0)
        }
    }
}
