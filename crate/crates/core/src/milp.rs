//! Self-contained mixed-integer linear programming layer.
//!
//! The model builder collects variables (all with finite bounds in this
//! toolkit, except slack machinery), sparse linear constraints and a
//! linear minimization objective. Solving is dual-mode: `Exact` runs a
//! best-first branch-and-bound over a two-phase primal simplex on the
//! bounded-variable form (Dantzig pricing with a Bland's-rule fallback
//! against cycling); `Relaxed` returns the root LP optimum. Models also
//! export to the industry-standard LP text format and import plain
//! `name value` solution files for external solvers.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

/// Feasibility and integrality tolerance used throughout.
pub const FEAS_TOL: f64 = 1e-6;
/// Absolute branch-and-bound gap at which a node is fathomed.
pub const GAP_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("duplicate variable name `{0}`")]
    DuplicateVar(String),
    #[error("model is sealed; no further mutation allowed")]
    Sealed,
    #[error("model must be sealed before solving or exporting")]
    NotSealed,
    #[error("unknown variable {0:?} referenced in constraint or objective")]
    UnknownVar(usize),
    #[error("LP is unbounded (a variable with infinite bound escapes)")]
    Unbounded,
    #[error("simplex failed to converge within the iteration limit")]
    IterationLimit,
    #[error("solution violates `{constraint}` by {violation:.3e} (worst violation)")]
    Validation { constraint: String, violation: f64 },
    #[error("bad solution file line {line}: {message}")]
    BadSolutionFile { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
    Integer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintOp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
struct VarDef {
    name: String,
    kind: VarKind,
    lb: f64,
    ub: f64,
}

#[derive(Debug, Clone)]
struct Constraint {
    name: String,
    terms: Vec<(VarId, f64)>,
    op: ConstraintOp,
    rhs: f64,
}

/// Mutable-until-sealed MILP model.
#[derive(Debug, Clone, Default)]
pub struct MilpModel {
    vars: Vec<VarDef>,
    by_name: HashMap<String, VarId>,
    constraints: Vec<Constraint>,
    objective: Vec<(VarId, f64)>,
    sealed: bool,
}

impl MilpModel {
    pub fn new() -> MilpModel {
        MilpModel::default()
    }

    pub fn add_var(
        &mut self,
        name: &str,
        kind: VarKind,
        lb: f64,
        ub: f64,
    ) -> Result<VarId, MilpError> {
        if self.sealed {
            return Err(MilpError::Sealed);
        }
        if self.by_name.contains_key(name) {
            return Err(MilpError::DuplicateVar(name.to_string()));
        }
        let (lb, ub) = match kind {
            VarKind::Binary => (0.0, 1.0),
            _ => (lb, ub),
        };
        let id = VarId(self.vars.len());
        self.vars.push(VarDef {
            name: name.to_string(),
            kind,
            lb,
            ub,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn add_constraint(
        &mut self,
        name: &str,
        terms: Vec<(VarId, f64)>,
        op: ConstraintOp,
        rhs: f64,
    ) -> Result<usize, MilpError> {
        if self.sealed {
            return Err(MilpError::Sealed);
        }
        for (v, _) in &terms {
            if v.0 >= self.vars.len() {
                return Err(MilpError::UnknownVar(v.0));
            }
        }
        self.constraints.push(Constraint {
            name: name.to_string(),
            terms,
            op,
            rhs,
        });
        Ok(self.constraints.len() - 1)
    }

    pub fn set_objective(&mut self, terms: Vec<(VarId, f64)>) -> Result<(), MilpError> {
        if self.sealed {
            return Err(MilpError::Sealed);
        }
        for (v, _) in &terms {
            if v.0 >= self.vars.len() {
                return Err(MilpError::UnknownVar(v.0));
            }
        }
        self.objective = terms;
        Ok(())
    }

    /// Freezes the model; required before solve/export.
    pub fn seal(&mut self) {
        self.sealed = true;
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn var(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    pub fn var_name(&self, id: VarId) -> &str {
        &self.vars[id.0].name
    }

    pub fn var_kind(&self, id: VarId) -> VarKind {
        self.vars[id.0].kind
    }

    pub fn var_bounds(&self, id: VarId) -> (f64, f64) {
        (self.vars[id.0].lb, self.vars[id.0].ub)
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn var_names(&self) -> impl Iterator<Item = &str> {
        self.vars.iter().map(|v| v.name.as_str())
    }

    fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|(v, c)| c * values[v.0]).sum()
    }

    /// Checks `values` against every constraint, bound, and integrality
    /// requirement at `FEAS_TOL`, reporting the worst violation.
    pub fn validate(&self, values: &[f64]) -> Result<(), MilpError> {
        let mut worst: Option<(String, f64)> = None;
        let mut record = |name: String, violation: f64| {
            if violation > FEAS_TOL && worst.as_ref().map_or(true, |(_, w)| violation > *w) {
                worst = Some((name, violation));
            }
        };
        for (i, v) in self.vars.iter().enumerate() {
            record(format!("bound of {}", v.name), v.lb - values[i]);
            record(format!("bound of {}", v.name), values[i] - v.ub);
            if matches!(v.kind, VarKind::Binary | VarKind::Integer) {
                record(
                    format!("integrality of {}", v.name),
                    (values[i] - values[i].round()).abs(),
                );
            }
        }
        for c in &self.constraints {
            let lhs: f64 = c.terms.iter().map(|(v, a)| a * values[v.0]).sum();
            let violation = match c.op {
                ConstraintOp::Le => lhs - c.rhs,
                ConstraintOp::Ge => c.rhs - lhs,
                ConstraintOp::Eq => (lhs - c.rhs).abs(),
            };
            record(c.name.clone(), violation);
        }
        match worst {
            Some((constraint, violation)) => Err(MilpError::Validation {
                constraint,
                violation,
            }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegerMode {
    Exact,
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    RelaxationOnly,
    TimeLimit,
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: SolveStatus,
    /// Variable values in declaration order; empty when infeasible.
    pub values: Vec<f64>,
    pub objective_value: f64,
    /// Absolute branch-and-bound gap (0 for proven optima).
    pub gap: f64,
}

impl MilpSolution {
    pub fn value(&self, model: &MilpModel, name: &str) -> Option<f64> {
        model.var(name).map(|id| self.values[id.0])
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub time_limit: Option<Duration>,
    pub integer_mode: Option<IntegerMode>,
    /// Cooperative cancellation, checked at branch-and-bound node
    /// boundaries.
    pub cancel: Option<Arc<AtomicBool>>,
}

impl MilpModel {
    pub fn solve(&self, opts: &SolveOptions) -> Result<MilpSolution, MilpError> {
        if !self.sealed {
            return Err(MilpError::NotSealed);
        }
        let mode = opts.integer_mode.unwrap_or(IntegerMode::Exact);
        let lp = LpForm::build(self);
        match mode {
            IntegerMode::Relaxed => {
                let lb: Vec<f64> = self.vars.iter().map(|v| v.lb).collect();
                let ub: Vec<f64> = self.vars.iter().map(|v| v.ub).collect();
                match lp.solve(&lb, &ub)? {
                    Some((values, obj)) => Ok(MilpSolution {
                        status: SolveStatus::RelaxationOnly,
                        values,
                        objective_value: obj,
                        gap: 0.0,
                    }),
                    None => Ok(MilpSolution {
                        status: SolveStatus::Infeasible,
                        values: Vec::new(),
                        objective_value: f64::INFINITY,
                        gap: 0.0,
                    }),
                }
            }
            IntegerMode::Exact => self.branch_and_bound(&lp, opts),
        }
    }

    fn branch_and_bound(
        &self,
        lp: &LpForm,
        opts: &SolveOptions,
    ) -> Result<MilpSolution, MilpError> {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;

        let start = Instant::now();
        let integer_vars: Vec<usize> = self
            .vars
            .iter()
            .enumerate()
            .filter(|(_, v)| matches!(v.kind, VarKind::Binary | VarKind::Integer))
            .map(|(i, _)| i)
            .collect();

        #[derive(PartialEq)]
        struct Node {
            bound: f64,
            seq: u64,
            lb: Vec<f64>,
            ub: Vec<f64>,
        }
        impl Eq for Node {}
        impl Ord for Node {
            fn cmp(&self, other: &Self) -> std::cmp::Ordering {
                // Natural order on the LP bound; the heap wraps nodes in
                // `Reverse`, so it pops the smallest bound first (best-first)
                // with FIFO tie-breaks for reproducible runs.
                self.bound
                    .partial_cmp(&other.bound)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(self.seq.cmp(&other.seq))
            }
        }
        impl PartialOrd for Node {
            fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(other))
            }
        }

        let root_lb: Vec<f64> = self.vars.iter().map(|v| v.lb).collect();
        let root_ub: Vec<f64> = self.vars.iter().map(|v| v.ub).collect();

        let mut heap: BinaryHeap<Reverse<Node>> = BinaryHeap::new();
        let mut seq = 0u64;
        let mut incumbent: Option<(Vec<f64>, f64)> = None;
        let mut timed_out = false;

        match lp.solve(&root_lb, &root_ub)? {
            Some((_, obj)) => heap.push(Reverse(Node {
                bound: obj,
                seq,
                lb: root_lb,
                ub: root_ub,
            })),
            None => {
                return Ok(MilpSolution {
                    status: SolveStatus::Infeasible,
                    values: Vec::new(),
                    objective_value: f64::INFINITY,
                    gap: 0.0,
                })
            }
        }

        let mut best_outstanding = f64::INFINITY;
        'outer: while let Some(Reverse(node)) = heap.pop() {
            best_outstanding = node.bound;
            if let Some((_, inc_obj)) = &incumbent {
                if node.bound >= inc_obj - GAP_TOL {
                    best_outstanding = *inc_obj;
                    break;
                }
            }
            // Plunge from the popped node: follow the better child
            // depth-first (pushing the sibling) until the dive hits an
            // integral or fathomed leaf. Dives reach incumbents early;
            // the heap keeps global best-first order between dives. The
            // heap stores bounds, not LP solutions, to keep memory
            // proportional to the frontier, so the popped node is
            // re-solved once here.
            let mut cur = lp
                .cold_dict(&node.lb, &node.ub)?
                .map(|d| (node.lb, node.ub, d));
            while let Some((cur_lb, cur_ub, dict)) = cur.take() {
                let values = &dict.x;
                let obj = lp.objective_of(&dict);
                if let Some(limit) = opts.time_limit {
                    if start.elapsed() > limit {
                        timed_out = true;
                        break 'outer;
                    }
                }
                if let Some(cancel) = &opts.cancel {
                    if cancel.load(Ordering::Relaxed) {
                        timed_out = true;
                        break 'outer;
                    }
                }
                if incumbent.as_ref().map_or(false, |(_, o)| obj >= o - GAP_TOL) {
                    break;
                }
                // Branch on binaries before general integers: in the
                // big-M formula encodings the satisfaction binaries
                // decide the logic and the flow integers then come out
                // integral from the (near-network) LP on their own.
                // Within a class: most fractional, ties by declaration
                // order.
                let mut branch: Option<(usize, bool, f64)> = None;
                for &vi in &integer_vars {
                    let frac = (values[vi] - values[vi].round()).abs();
                    if frac > FEAS_TOL {
                        let binary = self.vars[vi].kind == VarKind::Binary;
                        let score = (values[vi] - values[vi].floor() - 0.5).abs();
                        let better = match branch {
                            None => true,
                            Some((_, b, s)) => {
                                (binary, score) != (b, score)
                                    && (binary && !b || binary == b && score < s - 1e-12)
                            }
                        };
                        if better {
                            branch = Some((vi, binary, score));
                        }
                    }
                }
                let Some((vi, _, _)) = branch else {
                    let rounded: Vec<f64> = self
                        .vars
                        .iter()
                        .enumerate()
                        .map(|(i, v)| match v.kind {
                            VarKind::Continuous => values[i],
                            _ => values[i].round(),
                        })
                        .collect();
                    let obj = self.objective_value(&rounded);
                    if incumbent.as_ref().map_or(true, |(_, o)| obj < *o) {
                        incumbent = Some((rounded, obj));
                    }
                    break;
                };
                let floor = values[vi].floor();
                let mut parent = Some(dict);
                let splits = [(cur_lb[vi], floor), (floor + 1.0, cur_ub[vi])];
                for (k, &(new_lb, new_ub)) in splits.iter().enumerate() {
                    let mut lb = cur_lb.clone();
                    let mut ub = cur_ub.clone();
                    lb[vi] = new_lb;
                    ub[vi] = new_ub;
                    if lb[vi] > ub[vi] + FEAS_TOL {
                        continue;
                    }
                    // Warm-start the child from the parent dictionary;
                    // the last child may consume it.
                    let mut cd = if k + 1 == splits.len() {
                        parent.take().unwrap()
                    } else {
                        parent.clone().unwrap()
                    };
                    if lp.retighten(&mut cd, vi, new_lb, new_ub)? {
                        let child_obj = lp.objective_of(&cd).max(obj);
                        if incumbent
                            .as_ref()
                            .map_or(false, |(_, o)| child_obj >= o - GAP_TOL)
                        {
                            continue;
                        }
                        // Continue the dive with the lower-bound child;
                        // the other goes to the frontier (bounds only).
                        let take = cur
                            .as_ref()
                            .map_or(true, |(_, _, d)| child_obj < lp.objective_of(d));
                        let displaced = if take {
                            cur.replace((lb, ub, cd)).map(|(dlb, dub, dd)| {
                                (dlb, dub, lp.objective_of(&dd).max(obj))
                            })
                        } else {
                            Some((lb, ub, child_obj))
                        };
                        if let Some((dlb, dub, dbound)) = displaced {
                            seq += 1;
                            heap.push(Reverse(Node {
                                bound: dbound,
                                seq,
                                lb: dlb,
                                ub: dub,
                            }));
                        }
                    }
                }
            }
            best_outstanding = heap
                .peek()
                .map(|Reverse(n)| n.bound)
                .unwrap_or(f64::INFINITY);
        }

        match incumbent {
            Some((values, obj)) => {
                let gap = if timed_out {
                    (obj - best_outstanding.min(obj)).max(0.0)
                } else {
                    0.0
                };
                Ok(MilpSolution {
                    status: if timed_out {
                        SolveStatus::TimeLimit
                    } else {
                        SolveStatus::Optimal
                    },
                    values,
                    objective_value: obj,
                    gap,
                })
            }
            None => Ok(MilpSolution {
                status: if timed_out {
                    SolveStatus::TimeLimit
                } else {
                    SolveStatus::Infeasible
                },
                values: Vec::new(),
                objective_value: f64::INFINITY,
                gap: f64::INFINITY,
            }),
        }
    }
}

// -- simplex --------------------------------------------------------------

/// Equality-form LP data shared by all branch-and-bound nodes: structural
/// columns first, then one slack per inequality. Artificials are added per
/// solve.
struct LpForm {
    n_struct: usize,
    n_slack: usize,
    /// Dense rows over structural+slack columns.
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    costs: Vec<f64>,
}

/// A simplex dictionary: the full tableau state of a solved LP, kept
/// alive across branch-and-bound dives so child nodes can warm-start.
#[derive(Clone)]
struct Dict {
    tab: Vec<Vec<f64>>,
    x: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    at_upper: Vec<bool>,
    /// Phase-2 reduced costs, maintained through every pivot.
    cost: Vec<f64>,
    /// Bounds over all columns (structural, slack, artificial).
    lb: Vec<f64>,
    ub: Vec<f64>,
}

impl LpForm {
    fn build(model: &MilpModel) -> LpForm {
        let n_struct = model.vars.len();
        let n_slack = model
            .constraints
            .iter()
            .filter(|c| c.op != ConstraintOp::Eq)
            .count();
        let n = n_struct + n_slack;
        let mut rows = Vec::with_capacity(model.constraints.len());
        let mut rhs = Vec::with_capacity(model.constraints.len());
        let mut slack = n_struct;
        for c in &model.constraints {
            let mut row = vec![0.0; n];
            for (v, a) in &c.terms {
                row[v.0] += a;
            }
            match c.op {
                ConstraintOp::Le => {
                    row[slack] = 1.0;
                    slack += 1;
                }
                ConstraintOp::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                }
                ConstraintOp::Eq => {}
            }
            rows.push(row);
            rhs.push(c.rhs);
        }
        let mut costs = vec![0.0; n];
        for (v, c) in &model.objective {
            costs[v.0] += c;
        }
        LpForm {
            n_struct,
            n_slack,
            rows,
            rhs,
            costs,
        }
    }

    /// Solves the LP with the given structural bounds. Returns
    /// `Ok(None)` when infeasible, else the structural values and
    /// objective.
    fn solve(&self, lb_struct: &[f64], ub_struct: &[f64]) -> Result<Option<(Vec<f64>, f64)>, MilpError> {
        Ok(self
            .cold_dict(lb_struct, ub_struct)?
            .map(|d| (d.x[..self.n_struct].to_vec(), self.objective_of(&d))))
    }

    fn objective_of(&self, d: &Dict) -> f64 {
        self.costs.iter().zip(&d.x).map(|(c, v)| c * v).sum()
    }

    /// Solves the LP from scratch (slack crash basis, then two-phase
    /// primal simplex) and returns the optimal dictionary, or `None`
    /// when infeasible.
    fn cold_dict(&self, lb_struct: &[f64], ub_struct: &[f64]) -> Result<Option<Dict>, MilpError> {
        let m = self.rows.len();
        let n_base = self.n_struct + self.n_slack;
        let n = n_base + m; // plus artificials

        let mut lb = vec![0.0; n];
        let mut ub = vec![f64::INFINITY; n];
        lb[..self.n_struct].copy_from_slice(lb_struct);
        ub[..self.n_struct].copy_from_slice(ub_struct);

        // Tableau rows over all columns; artificial i occupies column
        // n_base + i.
        let mut tab: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut x = vec![0.0; n];
        let mut at_upper = vec![false; n];
        for j in 0..self.n_struct {
            // Nonbasic structurals start at the finite bound nearer zero.
            if lb[j].abs() <= ub[j].abs() {
                x[j] = lb[j];
            } else {
                x[j] = ub[j];
                at_upper[j] = true;
            }
            if !x[j].is_finite() {
                x[j] = 0.0;
            }
        }

        let mut basis = Vec::with_capacity(m);
        let mut in_basis = vec![false; n];
        for i in 0..m {
            let mut row = vec![0.0; n];
            row[..n_base].copy_from_slice(&self.rows[i]);
            let residual =
                self.rhs[i] - row[..n_base].iter().zip(&x).map(|(a, v)| a * v).sum::<f64>();
            if residual < 0.0 {
                for a in row.iter_mut() {
                    *a = -*a;
                }
            }
            row[n_base + i] = 1.0;
            // Crash basis: when the row's own slack has coefficient +1
            // after the sign normalization it can absorb the residual
            // directly (slacks are [0, inf)), sparing an artificial.
            let own_slack = (self.n_struct..n_base).find(|&j| self.rows[i][j] != 0.0 && row[j] == 1.0);
            let basic = match own_slack {
                Some(sj) if !in_basis[sj] => {
                    // Fix the unused artificial so it can never enter.
                    lb[n_base + i] = 0.0;
                    ub[n_base + i] = 0.0;
                    sj
                }
                _ => n_base + i,
            };
            x[basic] = residual.abs();
            basis.push(basic);
            in_basis[basic] = true;
            tab.push(row);
        }

        // Phase-1 reduced costs: minimize the sum of basic artificials.
        let mut cost = vec![0.0; n];
        for j in n_base..n {
            cost[j] = 1.0;
        }
        for (i, row) in tab.iter().enumerate() {
            if basis[i] >= n_base {
                for j in 0..n {
                    cost[j] -= row[j];
                }
            } else {
                cost[basis[i]] = 0.0;
            }
        }

        self.iterate(&mut tab, &mut x, &mut basis, &mut in_basis, &mut at_upper, &mut cost, &lb, &ub)?;
        let infeas: f64 = (n_base..n).map(|j| x[j]).sum();
        if infeas > 1e-7 {
            return Ok(None);
        }
        // Fix artificials at zero for phase 2.
        for j in n_base..n {
            lb[j] = 0.0;
            ub[j] = 0.0;
            x[j] = 0.0;
        }
        let mut cost2 = vec![0.0; n];
        cost2[..n_base].copy_from_slice(&self.costs[..n_base]);
        for (r, row) in tab.iter().enumerate() {
            let cb = cost2[basis[r]];
            if cb != 0.0 {
                for j in 0..n {
                    cost2[j] -= cb * row[j];
                }
            }
        }

        self.iterate(&mut tab, &mut x, &mut basis, &mut in_basis, &mut at_upper, &mut cost2, &lb, &ub)?;

        Ok(Some(Dict {
            tab,
            x,
            basis,
            in_basis,
            at_upper,
            cost: cost2,
            lb,
            ub,
        }))
    }

    /// Warm restart after changing one structural variable's bounds: the
    /// dictionary stays dual-feasible (costs are untouched), so a dual
    /// simplex pass restores primal feasibility in a handful of pivots.
    /// Falls back to a cold solve when the dual pass stalls. Returns
    /// `false` (and leaves `d` unusable) when the tightened LP is
    /// infeasible.
    fn retighten(
        &self,
        d: &mut Dict,
        vi: usize,
        new_lb: f64,
        new_ub: f64,
    ) -> Result<bool, MilpError> {
        d.lb[vi] = new_lb;
        d.ub[vi] = new_ub;
        if !d.in_basis[vi] {
            let clamped = d.x[vi].clamp(new_lb, new_ub);
            let delta = clamped - d.x[vi];
            if delta != 0.0 {
                let Dict { tab, x, basis, .. } = d;
                for (i, row) in tab.iter().enumerate() {
                    x[basis[i]] -= row[vi] * delta;
                }
                d.x[vi] = clamped;
            }
            d.at_upper[vi] = new_ub.is_finite() && d.x[vi] >= new_ub;
        }
        match self.dual_iterate(d) {
            Ok(true) => {
                // Polish with the primal rule; at a true optimum this is
                // a no-op, otherwise it repairs residual dual slack.
                match self.iterate(
                    &mut d.tab,
                    &mut d.x,
                    &mut d.basis,
                    &mut d.in_basis,
                    &mut d.at_upper,
                    &mut d.cost,
                    &d.lb,
                    &d.ub,
                ) {
                    Ok(()) => Ok(true),
                    Err(MilpError::IterationLimit) => self.cold_fallback(d),
                    Err(e) => Err(e),
                }
            }
            // Dual unboundedness is a primal infeasibility proof: the
            // violated row admits no sign-compatible entering column.
            Ok(false) => Ok(false),
            // A stalled dual pass proves nothing; resolve from scratch.
            Err(MilpError::IterationLimit) => self.cold_fallback(d),
            Err(e) => Err(e),
        }
    }

    fn cold_fallback(&self, d: &mut Dict) -> Result<bool, MilpError> {
        let lb = d.lb[..self.n_struct].to_vec();
        let ub = d.ub[..self.n_struct].to_vec();
        match self.cold_dict(&lb, &ub)? {
            Some(fresh) => {
                *d = fresh;
                Ok(true)
            }
            None => Ok(false),
        }
    }

    /// Bounded-variable dual simplex: drives out-of-bounds basic
    /// variables back inside their boxes while keeping reduced costs
    /// sign-feasible. Returns `false` when no entering column exists for
    /// a violated row (primal infeasible).
    fn dual_iterate(&self, d: &mut Dict) -> Result<bool, MilpError> {
        const P_TOL: f64 = 1e-9;
        let m = d.tab.len();
        let n = d.cost.len();
        let bland_after = 2 * (m + n);
        let max_iter = 6 * (m + n) + 1_000;

        for iter in 0..max_iter {
            let bland = iter >= bland_after;
            // Leaving variable: most violated basic (first violated once
            // Bland's rule engages).
            let mut leave: Option<(usize, f64, bool)> = None; // (row, violation, below lb)
            for i in 0..m {
                let b = d.basis[i];
                let xb = d.x[b];
                let (violation, below) = if xb < d.lb[b] - P_TOL {
                    (d.lb[b] - xb, true)
                } else if xb > d.ub[b] + P_TOL {
                    (xb - d.ub[b], false)
                } else {
                    continue;
                };
                if bland {
                    leave = Some((i, violation, below));
                    break;
                }
                if leave.map_or(true, |(_, v, _)| violation > v + 1e-12) {
                    leave = Some((i, violation, below));
                }
            }
            let Some((r, _, below)) = leave else {
                return Ok(true);
            };

            // Entering variable: dual ratio test over the leaving row.
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..n {
                if d.in_basis[j] || d.ub[j] - d.lb[j] < 1e-12 {
                    continue;
                }
                let a = d.tab[r][j];
                let eligible = if below {
                    // The basic variable must increase.
                    (!d.at_upper[j] && a < -P_TOL) || (d.at_upper[j] && a > P_TOL)
                } else {
                    (!d.at_upper[j] && a > P_TOL) || (d.at_upper[j] && a < -P_TOL)
                };
                if !eligible {
                    continue;
                }
                let ratio = (d.cost[j] / a).abs();
                if bland {
                    if ratio < 1e-12 {
                        enter = Some((j, ratio));
                        break;
                    }
                    if enter.map_or(true, |(_, best)| ratio < best) {
                        enter = Some((j, ratio));
                    }
                } else if enter.map_or(true, |(_, best)| ratio < best - 1e-12) {
                    enter = Some((j, ratio));
                }
            }
            let Some((jin, _)) = enter else {
                return Ok(false);
            };

            let b_out = d.basis[r];
            let target = if below { d.lb[b_out] } else { d.ub[b_out] };
            let a_rj = d.tab[r][jin];
            let delta = (d.x[b_out] - target) / a_rj;
            {
                let Dict { tab, x, basis, .. } = d;
                for (i, row) in tab.iter().enumerate() {
                    x[basis[i]] -= row[jin] * delta;
                }
            }
            d.x[jin] += delta;
            d.x[b_out] = target;
            d.at_upper[b_out] = !below;
            d.in_basis[b_out] = false;
            d.in_basis[jin] = true;
            d.at_upper[jin] = false;
            d.basis[r] = jin;

            // Pivot.
            let piv = d.tab[r][jin];
            let inv = 1.0 / piv;
            for a in d.tab[r].iter_mut() {
                *a *= inv;
            }
            let pivot_row = d.tab[r].clone();
            for (i, row) in d.tab.iter_mut().enumerate() {
                if i != r {
                    let factor = row[jin];
                    if factor != 0.0 {
                        for (a, p) in row.iter_mut().zip(&pivot_row) {
                            *a -= factor * p;
                        }
                        row[jin] = 0.0;
                    }
                }
            }
            let factor = d.cost[jin];
            if factor != 0.0 {
                for (c, p) in d.cost.iter_mut().zip(&pivot_row) {
                    *c -= factor * p;
                }
                d.cost[jin] = 0.0;
            }
        }
        Err(MilpError::IterationLimit)
    }

    #[allow(clippy::too_many_arguments)]
    fn iterate(
        &self,
        tab: &mut [Vec<f64>],
        x: &mut [f64],
        basis: &mut [usize],
        in_basis: &mut [bool],
        at_upper: &mut [bool],
        cost: &mut [f64],
        lb: &[f64],
        ub: &[f64],
    ) -> Result<(), MilpError> {
        const D_TOL: f64 = 1e-9;
        const P_TOL: f64 = 1e-9;
        let m = tab.len();
        let n = cost.len();
        let bland_after = 20 * (m + n);
        let max_iter = 400 * (m + n) + 20_000;

        for iter in 0..max_iter {
            let bland = iter >= bland_after;
            // Entering variable.
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..n {
                if in_basis[j] || ub[j] - lb[j] < 1e-12 {
                    // Basic or fixed variables cannot enter.
                    continue;
                }
                let d = cost[j];
                let improving = if at_upper[j] { d > D_TOL } else { d < -D_TOL };
                if improving {
                    if bland {
                        entering = Some((j, d.abs()));
                        break;
                    }
                    if entering.map_or(true, |(_, best)| d.abs() > best) {
                        entering = Some((j, d.abs()));
                    }
                }
            }
            let Some((jin, _)) = entering else {
                return Ok(());
            };
            let dir = if at_upper[jin] { -1.0 } else { 1.0 };

            // Ratio test.
            let own_range = ub[jin] - lb[jin];
            let mut t_best = own_range;
            let mut leave: Option<(usize, bool)> = None; // (row, leaves at upper)
            for (i, row) in tab.iter().enumerate() {
                let g = row[jin] * dir;
                if g > P_TOL {
                    let limit = (x[basis[i]] - lb[basis[i]]) / g;
                    if limit < t_best - 1e-12
                        || (limit < t_best + 1e-12
                            && leave.map_or(false, |(r, _)| basis[i] < basis[r]))
                    {
                        t_best = limit.max(0.0);
                        leave = Some((i, false));
                    }
                } else if g < -P_TOL && ub[basis[i]].is_finite() {
                    let limit = (ub[basis[i]] - x[basis[i]]) / -g;
                    if limit < t_best - 1e-12
                        || (limit < t_best + 1e-12
                            && leave.map_or(false, |(r, _)| basis[i] < basis[r]))
                    {
                        t_best = limit.max(0.0);
                        leave = Some((i, true));
                    }
                }
            }
            if !t_best.is_finite() {
                return Err(MilpError::Unbounded);
            }

            match leave {
                None => {
                    // Bound flip: the entering variable crosses its range.
                    let delta = dir * t_best;
                    for (i, row) in tab.iter().enumerate() {
                        x[basis[i]] -= row[jin] * delta;
                    }
                    at_upper[jin] = !at_upper[jin];
                    x[jin] = if at_upper[jin] { ub[jin] } else { lb[jin] };
                }
                Some((r, leaves_at_upper)) => {
                    let delta = dir * t_best;
                    for (i, row) in tab.iter().enumerate() {
                        x[basis[i]] -= row[jin] * delta;
                    }
                    x[jin] = if at_upper[jin] { ub[jin] } else { lb[jin] };
                    x[jin] += delta;

                    let out = basis[r];
                    x[out] = if leaves_at_upper { ub[out] } else { lb[out] };
                    at_upper[out] = leaves_at_upper;
                    in_basis[out] = false;
                    in_basis[jin] = true;
                    at_upper[jin] = false;
                    basis[r] = jin;

                    // Pivot.
                    let piv = tab[r][jin];
                    let inv = 1.0 / piv;
                    for a in tab[r].iter_mut() {
                        *a *= inv;
                    }
                    let pivot_row = tab[r].clone();
                    for (i, row) in tab.iter_mut().enumerate() {
                        if i != r {
                            let factor = row[jin];
                            if factor != 0.0 {
                                for (a, p) in row.iter_mut().zip(&pivot_row) {
                                    *a -= factor * p;
                                }
                                row[jin] = 0.0;
                            }
                        }
                    }
                    let factor = cost[jin];
                    if factor != 0.0 {
                        for (c, p) in cost.iter_mut().zip(&pivot_row) {
                            *c -= factor * p;
                        }
                        cost[jin] = 0.0;
                    }
                }
            }
        }
        Err(MilpError::IterationLimit)
    }
}

// -- LP file exchange -----------------------------------------------------

fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

impl MilpModel {
    /// Renders the model in LP text format with a fixed section order:
    /// Minimize, Subject To, Bounds, Binaries, Generals, End.
    pub fn write_lp(&self) -> Result<String, MilpError> {
        if !self.sealed {
            return Err(MilpError::NotSealed);
        }
        let mut out = String::new();
        out.push_str("Minimize\n obj:");
        if self.objective.is_empty() {
            out.push_str(" 0 ");
            out.push_str(&self.vars[0].name);
        } else {
            let mut first = true;
            for (v, c) in &self.objective {
                write_term(&mut out, *c, &self.vars[v.0].name, first);
                first = false;
            }
        }
        out.push('\n');

        out.push_str("Subject To\n");
        for c in &self.constraints {
            write!(out, " {}:", c.name).unwrap();
            let mut first = true;
            for (v, a) in &c.terms {
                write_term(&mut out, *a, &self.vars[v.0].name, first);
                first = false;
            }
            if c.terms.is_empty() {
                out.push_str(" 0");
            }
            let op = match c.op {
                ConstraintOp::Le => "<=",
                ConstraintOp::Ge => ">=",
                ConstraintOp::Eq => "=",
            };
            writeln!(out, " {} {}", op, fmt_num(c.rhs)).unwrap();
        }

        out.push_str("Bounds\n");
        for v in &self.vars {
            if v.kind == VarKind::Binary {
                continue; // implied [0,1]
            }
            writeln!(out, " {} <= {} <= {}", fmt_num(v.lb), v.name, fmt_num(v.ub)).unwrap();
        }

        let binaries: Vec<&str> = self
            .vars
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .map(|v| v.name.as_str())
            .collect();
        if !binaries.is_empty() {
            out.push_str("Binaries\n");
            for name in binaries {
                writeln!(out, " {name}").unwrap();
            }
        }
        let generals: Vec<&str> = self
            .vars
            .iter()
            .filter(|v| v.kind == VarKind::Integer)
            .map(|v| v.name.as_str())
            .collect();
        if !generals.is_empty() {
            out.push_str("Generals\n");
            for name in generals {
                writeln!(out, " {name}").unwrap();
            }
        }
        out.push_str("End\n");
        Ok(out)
    }

    pub fn export_lp(&self, path: &Path) -> Result<(), MilpError> {
        std::fs::write(path, self.write_lp()?)?;
        Ok(())
    }

    /// Reads a `name value` per-line solution file, defaulting missing
    /// variables to their lower bound. Returns the validated solution and
    /// the names that were defaulted or unknown.
    pub fn import_solution(&self, path: &Path) -> Result<(MilpSolution, Vec<String>), MilpError> {
        if !self.sealed {
            return Err(MilpError::NotSealed);
        }
        let text = std::fs::read_to_string(path)?;
        let mut values: Vec<f64> = self.vars.iter().map(|v| v.lb).collect();
        let mut seen = vec![false; self.vars.len()];
        let mut warnings = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let name = parts.next().unwrap();
            let value: f64 = parts
                .next()
                .ok_or_else(|| MilpError::BadSolutionFile {
                    line: lineno + 1,
                    message: "missing value".into(),
                })?
                .parse()
                .map_err(|e| MilpError::BadSolutionFile {
                    line: lineno + 1,
                    message: format!("bad value: {e}"),
                })?;
            match self.var(name) {
                Some(id) => {
                    values[id.0] = value;
                    seen[id.0] = true;
                }
                None => warnings.push(format!("unknown variable `{name}` ignored")),
            }
        }
        for (i, v) in self.vars.iter().enumerate() {
            if !seen[i] {
                warnings.push(format!(
                    "variable `{}` missing from solution file; defaulted to lower bound {}",
                    v.name,
                    fmt_num(v.lb)
                ));
            }
        }
        self.validate(&values)?;
        let integral = self.vars.iter().enumerate().all(|(i, v)| {
            v.kind == VarKind::Continuous || (values[i] - values[i].round()).abs() <= FEAS_TOL
        });
        let objective_value = self.objective_value(&values);
        Ok((
            MilpSolution {
                status: if integral {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::RelaxationOnly
                },
                values,
                objective_value,
                gap: f64::NAN,
            },
            warnings,
        ))
    }
}

fn write_term(out: &mut String, coef: f64, name: &str, first: bool) {
    if coef >= 0.0 {
        if first {
            write!(out, " {} {}", fmt_num(coef), name).unwrap();
        } else {
            write!(out, " + {} {}", fmt_num(coef), name).unwrap();
        }
    } else {
        write!(out, " - {} {}", fmt_num(-coef), name).unwrap();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple_model() -> (MilpModel, VarId, VarId) {
        let mut m = MilpModel::new();
        let x = m.add_var("x", VarKind::Continuous, 0.0, 10.0).unwrap();
        let y = m.add_var("y", VarKind::Continuous, 0.0, 10.0).unwrap();
        (m, x, y)
    }

    #[test]
    fn duplicate_name_rejected() {
        let mut m = MilpModel::new();
        m.add_var("x", VarKind::Continuous, 0.0, 1.0).unwrap();
        assert!(matches!(
            m.add_var("x", VarKind::Binary, 0.0, 1.0),
            Err(MilpError::DuplicateVar(_))
        ));
    }

    #[test]
    fn sealed_model_rejects_mutation() {
        let (mut m, x, _) = simple_model();
        m.seal();
        assert!(matches!(
            m.add_var("z", VarKind::Binary, 0.0, 1.0),
            Err(MilpError::Sealed)
        ));
        assert!(matches!(
            m.add_constraint("c", vec![(x, 1.0)], ConstraintOp::Ge, 1.0),
            Err(MilpError::Sealed)
        ));
        assert!(matches!(m.set_objective(vec![(x, 1.0)]), Err(MilpError::Sealed)));
    }

    #[test]
    fn unknown_var_rejected() {
        let (mut m, _, _) = simple_model();
        assert!(matches!(
            m.add_constraint("c", vec![(VarId(99), 1.0)], ConstraintOp::Le, 1.0),
            Err(MilpError::UnknownVar(99))
        ));
    }

    #[test]
    fn solve_requires_seal() {
        let (m, _, _) = simple_model();
        assert!(matches!(
            m.solve(&SolveOptions::default()),
            Err(MilpError::NotSealed)
        ));
    }

    #[test]
    fn lp_basic_optimum() {
        // min -x - y s.t. x + y <= 3, x <= 2 => obj -3.
        let (mut m, x, y) = simple_model();
        m.add_constraint("cap", vec![(x, 1.0), (y, 1.0)], ConstraintOp::Le, 3.0)
            .unwrap();
        m.add_constraint("xcap", vec![(x, 1.0)], ConstraintOp::Le, 2.0)
            .unwrap();
        m.set_objective(vec![(x, -1.0), (y, -1.0)]).unwrap();
        m.seal();
        let sol = m.solve(&SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective_value + 3.0).abs() < 1e-6);
        m.validate(&sol.values).unwrap();
    }

    #[test]
    fn integer_rounds_up_fractional_bound() {
        // min x s.t. x >= 2.5, x integer => 3.
        let mut m = MilpModel::new();
        let x = m.add_var("x", VarKind::Integer, 0.0, 10.0).unwrap();
        m.add_constraint("low", vec![(x, 1.0)], ConstraintOp::Ge, 2.5)
            .unwrap();
        m.set_objective(vec![(x, 1.0)]).unwrap();
        m.seal();
        let sol = m.solve(&SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective_value - 3.0).abs() < 1e-6);
        assert!((sol.values[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_detected() {
        let (mut m, x, _) = simple_model();
        m.add_constraint("lo", vec![(x, 1.0)], ConstraintOp::Ge, 1.0)
            .unwrap();
        m.add_constraint("hi", vec![(x, 1.0)], ConstraintOp::Le, 0.0)
            .unwrap();
        m.seal();
        let sol = m.solve(&SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
        assert!(sol.values.is_empty());
    }

    #[test]
    fn relaxed_mode_reports_relaxation_only() {
        let mut m = MilpModel::new();
        let x = m.add_var("x", VarKind::Integer, 0.0, 10.0).unwrap();
        m.add_constraint("low", vec![(x, 1.0)], ConstraintOp::Ge, 2.5)
            .unwrap();
        m.set_objective(vec![(x, 1.0)]).unwrap();
        m.seal();
        let sol = m
            .solve(&SolveOptions {
                integer_mode: Some(IntegerMode::Relaxed),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(sol.status, SolveStatus::RelaxationOnly);
        assert!((sol.objective_value - 2.5).abs() < 1e-6);
    }

    #[test]
    fn equality_constraints_honored() {
        // min x + y s.t. x + y = 4, x - y = 2 => x=3, y=1.
        let (mut m, x, y) = simple_model();
        m.add_constraint("sum", vec![(x, 1.0), (y, 1.0)], ConstraintOp::Eq, 4.0)
            .unwrap();
        m.add_constraint("diff", vec![(x, 1.0), (y, -1.0)], ConstraintOp::Eq, 2.0)
            .unwrap();
        m.set_objective(vec![(x, 1.0), (y, 1.0)]).unwrap();
        m.seal();
        let sol = m.solve(&SolveOptions::default()).unwrap();
        assert!((sol.values[0] - 3.0).abs() < 1e-6);
        assert!((sol.values[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn negative_lower_bounds_supported() {
        // The robustness variable is free within [-M, M]; exercise that.
        let mut m = MilpModel::new();
        let r = m.add_var("rho", VarKind::Continuous, -100.0, 100.0).unwrap();
        m.add_constraint("cap", vec![(r, 1.0)], ConstraintOp::Le, -7.0)
            .unwrap();
        m.set_objective(vec![(r, -1.0)]).unwrap();
        m.seal();
        let sol = m.solve(&SolveOptions::default()).unwrap();
        assert!((sol.values[0] + 7.0).abs() < 1e-6);
    }

    /// Knapsack solved by branch-and-bound must match brute-force
    /// enumeration of all 32 subsets.
    #[test]
    fn knapsack_matches_enumeration() {
        let weights = [3.0, 5.0, 7.0, 4.0, 6.0];
        let values = [4.0, 6.0, 9.0, 5.0, 7.0];
        let cap = 13.0;

        let mut best = 0.0f64;
        for mask in 0u32..32 {
            let w: f64 = (0..5).filter(|i| mask >> i & 1 == 1).map(|i| weights[i]).sum();
            let v: f64 = (0..5).filter(|i| mask >> i & 1 == 1).map(|i| values[i]).sum();
            if w <= cap {
                best = best.max(v);
            }
        }

        let mut m = MilpModel::new();
        let xs: Vec<VarId> = (0..5)
            .map(|i| m.add_var(&format!("x{i}"), VarKind::Binary, 0.0, 1.0).unwrap())
            .collect();
        m.add_constraint(
            "cap",
            xs.iter().zip(weights).map(|(v, w)| (*v, w)).collect(),
            ConstraintOp::Le,
            cap,
        )
        .unwrap();
        m.set_objective(xs.iter().zip(values).map(|(v, p)| (*v, -p)).collect())
            .unwrap();
        m.seal();
        let sol = m.solve(&SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(
            (-sol.objective_value - best).abs() < 1e-6,
            "got {}, enumeration says {best}",
            -sol.objective_value
        );
        m.validate(&sol.values).unwrap();
    }

    #[test]
    fn validate_reports_worst_violation() {
        let (mut m, x, y) = simple_model();
        m.add_constraint("small", vec![(x, 1.0)], ConstraintOp::Le, 1.0)
            .unwrap();
        m.add_constraint("big", vec![(y, 1.0)], ConstraintOp::Le, 1.0)
            .unwrap();
        m.seal();
        let err = m.validate(&[1.5, 4.0]).unwrap_err();
        match err {
            MilpError::Validation { constraint, violation } => {
                assert_eq!(constraint, "big");
                assert!((violation - 3.0).abs() < 1e-9);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn lp_round_trip_through_solution_file() {
        let dir = std::env::temp_dir().join(format!("milp_rt_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut m = MilpModel::new();
        let x = m.add_var("x", VarKind::Integer, 0.0, 10.0).unwrap();
        let y = m.add_var("y", VarKind::Continuous, 0.0, 5.0).unwrap();
        m.add_constraint("low", vec![(x, 1.0), (y, 1.0)], ConstraintOp::Ge, 3.5)
            .unwrap();
        m.set_objective(vec![(x, 2.0), (y, 1.0)]).unwrap();
        m.seal();
        let lp_path = dir.join("model.lp");
        m.export_lp(&lp_path).unwrap();
        let text = std::fs::read_to_string(&lp_path).unwrap();
        assert!(text.starts_with("Minimize\n"));
        assert!(text.contains("Subject To\n"));
        assert!(text.contains("Generals\n"));
        assert!(text.ends_with("End\n"));

        let sol_path = dir.join("model.sol");
        std::fs::write(&sol_path, "x 0\ny 3.5\n").unwrap();
        let (sol, warnings) = m.import_solution(&sol_path).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective_value - 3.5).abs() < 1e-9);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn import_defaults_missing_vars_with_warning() {
        let dir = std::env::temp_dir().join(format!("milp_miss_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut m = MilpModel::new();
        m.add_var("x", VarKind::Continuous, 1.0, 10.0).unwrap();
        m.add_var("y", VarKind::Continuous, 0.0, 10.0).unwrap();
        m.seal();
        let sol_path = dir.join("partial.sol");
        std::fs::write(&sol_path, "y 2\n").unwrap();
        let (sol, warnings) = m.import_solution(&sol_path).unwrap();
        assert_eq!(sol.values[0], 1.0); // lower bound
        assert_eq!(sol.values[1], 2.0);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("`x`"));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn import_rejects_infeasible_solution() {
        let dir = std::env::temp_dir().join(format!("milp_bad_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut m = MilpModel::new();
        let x = m.add_var("x", VarKind::Continuous, 0.0, 10.0).unwrap();
        m.add_constraint("lo", vec![(x, 1.0)], ConstraintOp::Ge, 5.0)
            .unwrap();
        m.seal();
        let sol_path = dir.join("bad.sol");
        std::fs::write(&sol_path, "x 1\n").unwrap();
        assert!(matches!(
            m.import_solution(&sol_path),
            Err(MilpError::Validation { .. })
        ));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn time_limit_zero_reports_time_limit() {
        let mut m = MilpModel::new();
        let x = m.add_var("x", VarKind::Integer, 0.0, 10.0).unwrap();
        m.add_constraint("low", vec![(x, 1.0)], ConstraintOp::Ge, 2.5)
            .unwrap();
        m.set_objective(vec![(x, 1.0)]).unwrap();
        m.seal();
        let sol = m
            .solve(&SolveOptions {
                time_limit: Some(Duration::ZERO),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(sol.status, SolveStatus::TimeLimit);
    }

    #[test]
    fn cancellation_stops_search() {
        let mut m = MilpModel::new();
        let x = m.add_var("x", VarKind::Integer, 0.0, 10.0).unwrap();
        m.add_constraint("low", vec![(x, 1.0)], ConstraintOp::Ge, 2.5)
            .unwrap();
        m.set_objective(vec![(x, 1.0)]).unwrap();
        m.seal();
        let cancel = Arc::new(AtomicBool::new(true));
        let sol = m
            .solve(&SolveOptions {
                cancel: Some(cancel),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(sol.status, SolveStatus::TimeLimit);
    }

    #[test]
    fn degenerate_lp_terminates() {
        // Many redundant constraints through the same vertex.
        let mut m = MilpModel::new();
        let x = m.add_var("x", VarKind::Continuous, 0.0, 1.0).unwrap();
        let y = m.add_var("y", VarKind::Continuous, 0.0, 1.0).unwrap();
        for i in 0..6 {
            m.add_constraint(
                &format!("c{i}"),
                vec![(x, 1.0 + i as f64), (y, 1.0 + i as f64)],
                ConstraintOp::Le,
                0.0,
            )
            .unwrap();
        }
        m.set_objective(vec![(x, -1.0), (y, -1.0)]).unwrap();
        m.seal();
        let sol = m.solve(&SolveOptions::default()).unwrap();
        assert!(sol.objective_value.abs() < 1e-9);
    }
}
