//! MILP encoding of flow-network dynamics, SpaTeL satisfaction, and
//! robustness tightening.
//!
//! Dynamics: one flow variable per step, cell, and 4-neighbor; one
//! occupancy variable per step and cell, tied by outflow caps and the
//! conservation recurrence. Formulas: every (sub-formula, node, step)
//! triple gets a satisfaction variable `z` in `[0,1]`; only predicate
//! z's are binary — the boolean combinators' two-sided inequalities
//! force the rest. Robustness: a single shared continuous variable
//! uniformly tightens every predicate threshold by `+rho` or `-rho`
//! depending on the site's polarity.
//!
//! Temporal windows reuse the monitor's `step_window`, so the encoder
//! and monitor agree on index arithmetic by construction. The spatial
//! for-all-until is encoded as a conjunction over paths of a
//! disjunction over prefixes, mirroring the monitor's min-over-paths /
//! max-over-prefixes robustness semantics.

use std::collections::HashMap;

use thiserror::Error;

use crate::grid::{NodeId, OccupancyMatrix, Qts};
use crate::logic::{Polarity, PredOp, SpatelFormula, TsslFormula};
use crate::milp::{ConstraintOp, IntegerMode, MilpError, MilpModel, VarId, VarKind};
use crate::monitor::{step_window, MonitorError};

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("formula horizon needs {needed} steps but the plan has {steps}")]
    HorizonExceedsK { needed: usize, steps: usize },
    #[error("big-M {given} too small; at least {required} required for this model")]
    BigMTooSmall { given: f64, required: f64 },
    #[error(transparent)]
    Interval(#[from] MonitorError),
    #[error(transparent)]
    Milp(#[from] MilpError),
}

/// 4-neighborhood of `(i, j)` on a `side`x`side` grid, in NW-row-major
/// order (up, left, right, down). No diagonals, no wraparound.
pub fn neighbors(side: usize, i: usize, j: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(4);
    if i > 0 {
        out.push((i - 1, j));
    }
    if j > 0 {
        out.push((i, j - 1));
    }
    if j + 1 < side {
        out.push((i, j + 1));
    }
    if i + 1 < side {
        out.push((i + 1, j));
    }
    out
}

/// Handles to the dynamics variables of one encoded plan.
pub struct FlowVars {
    pub side: usize,
    /// Number of flow steps K; occupancies span `0..=K`.
    pub steps: usize,
    pub total_robots: u64,
    occ: Vec<VarId>,
    flows: HashMap<(usize, usize, usize, usize, usize), VarId>,
    /// Creation-ordered flow list for deterministic iteration:
    /// `((k, i, j, i2, j2), var)`.
    pub flow_list: Vec<((usize, usize, usize, usize, usize), VarId)>,
}

impl FlowVars {
    pub fn occ(&self, k: usize, i: usize, j: usize) -> VarId {
        self.occ[k * self.side * self.side + i * self.side + j]
    }

    pub fn flow(&self, k: usize, i: usize, j: usize, i2: usize, j2: usize) -> Option<VarId> {
        self.flows.get(&(k, i, j, i2, j2)).copied()
    }
}

/// Adds flow and occupancy variables plus outflow caps and the
/// conservation recurrence for `steps` flow steps. Flows are integer in
/// exact mode and continuous in relaxed mode; occupancies are always
/// continuous (the equalities make them integral whenever flows are).
/// `capacity` installs the optional per-cell bound as occupancy upper
/// bounds.
pub fn encode_dynamics(
    model: &mut MilpModel,
    n0: &OccupancyMatrix,
    steps: usize,
    mode: IntegerMode,
    capacity: Option<u64>,
) -> Result<FlowVars, EncodeError> {
    let side = n0.side();
    let total = n0.total();
    let occ_cap = capacity.map_or(total as f64, |c| (c as f64).min(total as f64));
    let flow_kind = match mode {
        IntegerMode::Exact => VarKind::Integer,
        IntegerMode::Relaxed => VarKind::Continuous,
    };

    let mut occ = Vec::with_capacity((steps + 1) * side * side);
    for k in 0..=steps {
        for i in 0..side {
            for j in 0..side {
                let (lb, ub) = if k == 0 {
                    let v = n0.get(i, j) as f64;
                    (v, v)
                } else {
                    (0.0, occ_cap)
                };
                occ.push(model.add_var(&format!("n_k{k}_i{i}_j{j}"), VarKind::Continuous, lb, ub)?);
            }
        }
    }

    let mut flows = HashMap::new();
    let mut flow_list = Vec::new();
    for k in 0..steps {
        for i in 0..side {
            for j in 0..side {
                for (i2, j2) in neighbors(side, i, j) {
                    let v = model.add_var(
                        &format!("f_k{k}_i{i}_j{j}_to_i{i2}_j{j2}"),
                        flow_kind,
                        0.0,
                        total as f64,
                    )?;
                    flows.insert((k, i, j, i2, j2), v);
                    flow_list.push(((k, i, j, i2, j2), v));
                }
            }
        }
    }

    let vars = FlowVars {
        side,
        steps,
        total_robots: total,
        occ,
        flows,
        flow_list,
    };

    for k in 0..steps {
        for i in 0..side {
            for j in 0..side {
                // Outflow cap: sum of outgoing flows <= occupancy.
                let mut cap_terms: Vec<(VarId, f64)> = neighbors(side, i, j)
                    .into_iter()
                    .map(|(i2, j2)| (vars.flow(k, i, j, i2, j2).unwrap(), 1.0))
                    .collect();
                cap_terms.push((vars.occ(k, i, j), -1.0));
                model.add_constraint(
                    &format!("cap_k{k}_i{i}_j{j}"),
                    cap_terms,
                    ConstraintOp::Le,
                    0.0,
                )?;

                // Conservation: n[k+1] = n[k] - f_out + f_in.
                let mut terms: Vec<(VarId, f64)> = vec![
                    (vars.occ(k + 1, i, j), 1.0),
                    (vars.occ(k, i, j), -1.0),
                ];
                for (i2, j2) in neighbors(side, i, j) {
                    terms.push((vars.flow(k, i, j, i2, j2).unwrap(), 1.0));
                    terms.push((vars.flow(k, i2, j2, i, j).unwrap(), -1.0));
                }
                model.add_constraint(
                    &format!("cons_k{k}_i{i}_j{j}"),
                    terms,
                    ConstraintOp::Eq,
                    0.0,
                )?;
            }
        }
    }

    Ok(vars)
}

/// Largest absolute predicate threshold in the formula.
fn max_threshold(phi: &SpatelFormula) -> f64 {
    fn tssl(phi: &TsslFormula, acc: &mut f64) {
        match phi {
            TsslFormula::True => {}
            TsslFormula::Pred { threshold, .. } => *acc = acc.max(threshold.abs()),
            TsslFormula::Not(p) => tssl(p, acc),
            TsslFormula::And(ps) | TsslFormula::Or(ps) => ps.iter().for_each(|p| tssl(p, acc)),
            TsslFormula::ExistsNext { inner, .. } | TsslFormula::ForallNext { inner, .. } => {
                tssl(inner, acc)
            }
            TsslFormula::ExistsUntil { lhs, rhs, .. } | TsslFormula::ForallUntil { lhs, rhs, .. } => {
                tssl(lhs, acc);
                tssl(rhs, acc);
            }
        }
    }
    fn spatel(phi: &SpatelFormula, acc: &mut f64) {
        match phi {
            SpatelFormula::Tssl(t) => tssl(t, acc),
            SpatelFormula::Not(p) => spatel(p, acc),
            SpatelFormula::And(ps) | SpatelFormula::Or(ps) => {
                ps.iter().for_each(|p| spatel(p, acc))
            }
            SpatelFormula::Eventually { inner, .. } | SpatelFormula::Always { inner, .. } => {
                spatel(inner, acc)
            }
            SpatelFormula::Until { lhs, rhs, .. } => {
                spatel(lhs, acc);
                spatel(rhs, acc);
            }
        }
    }
    let mut acc = 0.0;
    spatel(phi, &mut acc);
    acc
}

/// Provably sufficient big-M: node valuations lie in `[0, N]` and
/// thresholds in `[-c_max, c_max]`, so `N + c_max + 1` bounds every
/// `|mu - c|`. With a free robustness variable the effective threshold
/// shifts by up to `N + c_max` more, hence the doubled slack.
pub fn recommended_big_m(total_robots: u64, phi: &SpatelFormula, with_rho: bool) -> f64 {
    let base = total_robots as f64 + max_threshold(phi);
    if with_rho {
        2.0 * base + 1.0
    } else {
        base + 1.0
    }
}

/// Magnitude bound for the robustness variable: `|rho| <= N + c_max`.
pub fn rho_bound(total_robots: u64, phi: &SpatelFormula) -> f64 {
    total_robots as f64 + max_threshold(phi)
}

/// Declares the shared robustness variable, free within `[-bound, bound]`.
/// Strict satisfaction (`rho >= epsilon`) is the caller's constraint to
/// add; violation-minimization mode leaves the variable free.
pub fn encode_robustness(model: &mut MilpModel, bound: f64) -> Result<VarId, MilpError> {
    model.add_var("rho", VarKind::Continuous, -bound, bound)
}

/// Result of encoding one formula.
pub struct EncodedFormula {
    /// `z` of the whole formula at the root node, step 0. The caller
    /// pins it to 1 to demand satisfaction.
    pub root: VarId,
    pub rho: Option<VarId>,
    pub big_m: f64,
    /// Number of satisfaction variables created (after memoization).
    pub z_count: usize,
}

/// Encodes satisfaction of `phi` over the occupancy variables in
/// `flows`. `rho`, when present, tightens every predicate per its
/// polarity. Negations need not be pre-eliminated: `Not` encodes as
/// `z = 1 - z_inner` and predicate polarities track negation parity.
pub fn encode_formula(
    model: &mut MilpModel,
    phi: &SpatelFormula,
    flows: &FlowVars,
    dt: f64,
    big_m: f64,
    rho: Option<VarId>,
) -> Result<EncodedFormula, EncodeError> {
    let needed = num_steps(phi.horizon(), dt)?;
    if needed > flows.steps {
        return Err(EncodeError::HorizonExceedsK {
            needed,
            steps: flows.steps,
        });
    }
    let required = recommended_big_m(flows.total_robots, phi, rho.is_some());
    if big_m < required - 1e-9 {
        return Err(EncodeError::BigMTooSmall {
            given: big_m,
            required,
        });
    }

    let depth = flows.side.trailing_zeros();
    let shape = Qts::from_values(depth, &vec![0.0; flows.side * flows.side]);
    let mut enc = Enc {
        model,
        flows,
        shape,
        dt,
        big_m,
        rho,
        memo: HashMap::new(),
        aux_mu: HashMap::new(),
        // Auxiliary node-valuation variables keep predicate rows sparse
        // once internal nodes cover many leaves.
        use_aux: depth >= 4,
        counter: 0,
    };
    let root = enc.spatel(phi, 0, false)?;
    Ok(EncodedFormula {
        root,
        rho,
        big_m,
        z_count: enc.counter,
    })
}

fn num_steps(horizon: f64, dt: f64) -> Result<usize, MonitorError> {
    // Reuse the monitor's multiple-of-dt validation via a degenerate
    // window anchored at 0.
    let w = step_window(
        0,
        &crate::logic::Interval::new(0.0, horizon.max(dt)),
        dt,
    )?;
    Ok(w.end)
}

struct Enc<'a> {
    model: &'a mut MilpModel,
    flows: &'a FlowVars,
    shape: Qts,
    dt: f64,
    big_m: f64,
    rho: Option<VarId>,
    /// `(formula text, node, step, negation parity) -> z`. Parity only
    /// splits entries when a robustness variable is present, since it
    /// only affects predicate tightening.
    memo: HashMap<(String, usize, usize, bool), VarId>,
    aux_mu: HashMap<(usize, usize), VarId>,
    use_aux: bool,
    counter: usize,
}

impl Enc<'_> {
    fn fresh_z(&mut self, kind: VarKind) -> Result<VarId, MilpError> {
        let id = self.counter;
        self.counter += 1;
        self.model.add_var(&format!("z{id}"), kind, 0.0, 1.0)
    }

    fn parity_key(&self, parity: bool) -> bool {
        parity && self.rho.is_some()
    }

    /// Linear expression for the node valuation `mu[v, k]` (Eq. 1: sum
    /// of descendant leaves).
    fn mu_terms(&mut self, v: NodeId, k: usize) -> Result<Vec<(VarId, f64)>, MilpError> {
        let cells = self.shape.leaf_cells(v);
        if cells.len() == 1 || !self.use_aux {
            return Ok(cells
                .into_iter()
                .map(|(i, j)| (self.flows.occ(k, i, j), 1.0))
                .collect());
        }
        if let Some(&aux) = self.aux_mu.get(&(v.0, k)) {
            return Ok(vec![(aux, 1.0)]);
        }
        let aux = self.model.add_var(
            &format!("mu_v{}_k{k}", v.0),
            VarKind::Continuous,
            0.0,
            self.flows.total_robots as f64,
        )?;
        let mut terms: Vec<(VarId, f64)> = vec![(aux, 1.0)];
        for (i, j) in cells {
            terms.push((self.flows.occ(k, i, j), -1.0));
        }
        self.model.add_constraint(
            &format!("def_mu_v{}_k{k}", v.0),
            terms,
            ConstraintOp::Eq,
            0.0,
        )?;
        self.aux_mu.insert((v.0, k), aux);
        Ok(vec![(aux, 1.0)])
    }

    /// `z = AND(terms)` via the two-sided conjunction inequalities.
    fn encode_and(&mut self, terms: &[VarId]) -> Result<VarId, MilpError> {
        if terms.len() == 1 {
            return Ok(terms[0]);
        }
        let z = self.fresh_z(VarKind::Continuous)?;
        if terms.is_empty() {
            self.model.add_constraint(
                &format!("true_{}", z.0),
                vec![(z, 1.0)],
                ConstraintOp::Eq,
                1.0,
            )?;
            return Ok(z);
        }
        for (idx, &t) in terms.iter().enumerate() {
            self.model.add_constraint(
                &format!("and{}_ub{idx}", z.0),
                vec![(z, 1.0), (t, -1.0)],
                ConstraintOp::Le,
                0.0,
            )?;
        }
        let mut lower: Vec<(VarId, f64)> = vec![(z, 1.0)];
        for &t in terms {
            lower.push((t, -1.0));
        }
        self.model.add_constraint(
            &format!("and{}_lb", z.0),
            lower,
            ConstraintOp::Ge,
            1.0 - terms.len() as f64,
        )?;
        Ok(z)
    }

    /// `z = OR(terms)` via the two-sided disjunction inequalities.
    fn encode_or(&mut self, terms: &[VarId]) -> Result<VarId, MilpError> {
        if terms.len() == 1 {
            return Ok(terms[0]);
        }
        let z = self.fresh_z(VarKind::Continuous)?;
        if terms.is_empty() {
            self.model.add_constraint(
                &format!("false_{}", z.0),
                vec![(z, 1.0)],
                ConstraintOp::Eq,
                0.0,
            )?;
            return Ok(z);
        }
        for (idx, &t) in terms.iter().enumerate() {
            self.model.add_constraint(
                &format!("or{}_lb{idx}", z.0),
                vec![(z, 1.0), (t, -1.0)],
                ConstraintOp::Ge,
                0.0,
            )?;
        }
        let mut upper: Vec<(VarId, f64)> = vec![(z, 1.0)];
        for &t in terms {
            upper.push((t, -1.0));
        }
        self.model
            .add_constraint(&format!("or{}_ub", z.0), upper, ConstraintOp::Le, 0.0)?;
        Ok(z)
    }

    fn encode_not(&mut self, inner: VarId) -> Result<VarId, MilpError> {
        let z = self.fresh_z(VarKind::Continuous)?;
        self.model.add_constraint(
            &format!("not{}", z.0),
            vec![(z, 1.0), (inner, 1.0)],
            ConstraintOp::Eq,
            1.0,
        )?;
        Ok(z)
    }

    /// Big-M pair of the predicate at `(v, k)`, threshold tightened by
    /// the shared robustness variable per site polarity.
    fn encode_pred(
        &mut self,
        op: PredOp,
        threshold: f64,
        v: NodeId,
        k: usize,
        parity: bool,
    ) -> Result<VarId, MilpError> {
        let z = self.fresh_z(VarKind::Binary)?;
        let base = match op {
            PredOp::Ge => Polarity::NonIncreasing,
            PredOp::Le => Polarity::NonDecreasing,
        };
        let polarity = if parity { base.flipped() } else { base };
        // Effective threshold c' = c + sign * rho.
        let sign = match polarity {
            Polarity::NonIncreasing => 1.0,
            Polarity::NonDecreasing => -1.0,
        };
        let m = self.big_m;
        let mu = self.mu_terms(v, k)?;
        let mut row = |z_coef: f64, rho_handled: bool, op: ConstraintOp, rhs: f64, tag: &str, zv: VarId| {
            let mut terms = mu.clone();
            terms.push((zv, z_coef));
            if rho_handled {
                if let Some(r) = self.rho {
                    terms.push((r, -sign));
                }
            }
            self.model
                .add_constraint(&format!("pred{}_{tag}", zv.0), terms, op, rhs)
        };
        match op {
            PredOp::Ge => {
                // mu - M z <= c'  and  mu + M(1 - z) >= c'.
                row(-m, true, ConstraintOp::Le, threshold, "ub", z)?;
                row(-m, true, ConstraintOp::Ge, threshold - m, "lb", z)?;
            }
            PredOp::Le => {
                // mu + M z >= c'  and  mu - M(1 - z) <= c'.
                row(m, true, ConstraintOp::Ge, threshold, "lb", z)?;
                row(m, true, ConstraintOp::Le, threshold + m, "ub", z)?;
            }
        }
        Ok(z)
    }

    fn tssl(
        &mut self,
        phi: &TsslFormula,
        v: NodeId,
        k: usize,
        parity: bool,
    ) -> Result<VarId, EncodeError> {
        let key = (phi.to_string(), v.0, k, self.parity_key(parity));
        if let Some(&z) = self.memo.get(&key) {
            return Ok(z);
        }
        let z = match phi {
            TsslFormula::True => {
                let z = self.fresh_z(VarKind::Continuous)?;
                self.model.add_constraint(
                    &format!("taut{}", z.0),
                    vec![(z, 1.0)],
                    ConstraintOp::Eq,
                    1.0,
                )?;
                z
            }
            TsslFormula::Pred { op, threshold } => {
                self.encode_pred(*op, *threshold, v, k, parity)?
            }
            TsslFormula::Not(inner) => {
                let zi = self.tssl(inner, v, k, !parity)?;
                self.encode_not(zi)?
            }
            TsslFormula::And(parts) => {
                let zs = parts
                    .iter()
                    .map(|p| self.tssl(p, v, k, parity))
                    .collect::<Result<Vec<_>, _>>()?;
                self.encode_and(&zs)?
            }
            TsslFormula::Or(parts) => {
                let zs = parts
                    .iter()
                    .map(|p| self.tssl(p, v, k, parity))
                    .collect::<Result<Vec<_>, _>>()?;
                self.encode_or(&zs)?
            }
            TsslFormula::ExistsNext { labels, inner }
            | TsslFormula::ForallNext { labels, inner } => {
                let firsts: Vec<NodeId> = self
                    .shape
                    .labeled_paths(v, *labels, 1)
                    .map(|p| p.at(1))
                    .collect();
                let zs = firsts
                    .into_iter()
                    .map(|n| self.tssl(inner, n, k, parity))
                    .collect::<Result<Vec<_>, _>>()?;
                if matches!(phi, TsslFormula::ExistsNext { .. }) {
                    self.encode_or(&zs)?
                } else {
                    self.encode_and(&zs)?
                }
            }
            TsslFormula::ExistsUntil {
                labels,
                kappa,
                lhs,
                rhs,
            }
            | TsslFormula::ForallUntil {
                labels,
                kappa,
                lhs,
                rhs,
            } => {
                let paths: Vec<Vec<NodeId>> = self
                    .shape
                    .labeled_paths(v, *labels, *kappa)
                    .map(|p| (0..=*kappa).map(|i| p.at(i)).collect())
                    .collect();
                let exists = matches!(phi, TsslFormula::ExistsUntil { .. });
                let mut per_path = Vec::with_capacity(paths.len());
                let mut all = Vec::new();
                for path in &paths {
                    let mut choices = Vec::with_capacity(*kappa);
                    for i in 1..=*kappa {
                        let mut conj = vec![self.tssl(rhs, path[i], k, parity)?];
                        for &p in path.iter().take(i) {
                            conj.push(self.tssl(lhs, p, k, parity)?);
                        }
                        choices.push(self.encode_and(&conj)?);
                    }
                    if exists {
                        all.extend(choices);
                    } else {
                        per_path.push(self.encode_or(&choices)?);
                    }
                }
                if exists {
                    self.encode_or(&all)?
                } else {
                    self.encode_and(&per_path)?
                }
            }
        };
        self.memo.insert(key, z);
        Ok(z)
    }

    fn spatel(&mut self, phi: &SpatelFormula, k: usize, parity: bool) -> Result<VarId, EncodeError> {
        let root = self.shape.root();
        let key = (phi.to_string(), root.0, k, self.parity_key(parity));
        if let Some(&z) = self.memo.get(&key) {
            return Ok(z);
        }
        let z = match phi {
            SpatelFormula::Tssl(t) => self.tssl(t, root, k, parity)?,
            SpatelFormula::Not(inner) => {
                let zi = self.spatel(inner, k, !parity)?;
                self.encode_not(zi)?
            }
            SpatelFormula::And(parts) => {
                let zs = parts
                    .iter()
                    .map(|p| self.spatel(p, k, parity))
                    .collect::<Result<Vec<_>, _>>()?;
                self.encode_and(&zs)?
            }
            SpatelFormula::Or(parts) => {
                let zs = parts
                    .iter()
                    .map(|p| self.spatel(p, k, parity))
                    .collect::<Result<Vec<_>, _>>()?;
                self.encode_or(&zs)?
            }
            SpatelFormula::Eventually { interval, inner }
            | SpatelFormula::Always { interval, inner } => {
                let window = step_window(k, interval, self.dt)?;
                let zs = window
                    .map(|k2| self.spatel(inner, k2, parity))
                    .collect::<Result<Vec<_>, _>>()?;
                if matches!(phi, SpatelFormula::Eventually { .. }) {
                    self.encode_or(&zs)?
                } else {
                    self.encode_and(&zs)?
                }
            }
            SpatelFormula::Until { interval, lhs, rhs } => {
                let window = step_window(k, interval, self.dt)?;
                let start = window.start;
                let mut choices = Vec::new();
                for k2 in window {
                    // lhs holds on [window start, k2), exclusive of k2 —
                    // same convention as the monitor.
                    let mut conj = vec![self.spatel(rhs, k2, parity)?];
                    for k3 in start..k2 {
                        conj.push(self.spatel(lhs, k3, parity)?);
                    }
                    choices.push(self.encode_and(&conj)?);
                }
                self.encode_or(&choices)?
            }
        };
        self.memo.insert(key, z);
        Ok(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse;
    use crate::milp::SolveOptions;
    use crate::monitor::{spatel_robustness, QtsSignal};

    fn fix_flows_zero(model: &mut MilpModel, flows: &FlowVars) {
        for (idx, &(_, f)) in flows.flow_list.iter().enumerate() {
            model
                .add_constraint(&format!("freeze{idx}"), vec![(f, 1.0)], ConstraintOp::Eq, 0.0)
                .unwrap();
        }
    }

    #[test]
    fn two_by_two_counts() {
        let mut model = MilpModel::new();
        let n0 = OccupancyMatrix::from_rows(&[vec![1, 0], vec![0, 0]]).unwrap();
        let flows = encode_dynamics(&mut model, &n0, 1, IntegerMode::Exact, None).unwrap();
        assert_eq!(flows.flow_list.len(), 8);
        // 8 occupancy vars + 8 flow vars; 4 caps + 4 conservation rows.
        assert_eq!(model.num_vars(), 16);
        assert_eq!(model.num_constraints(), 8);
    }

    #[test]
    fn zero_flows_are_stationary() {
        let mut model = MilpModel::new();
        let n0 = OccupancyMatrix::from_rows(&[vec![2, 1], vec![0, 3]]).unwrap();
        let flows = encode_dynamics(&mut model, &n0, 2, IntegerMode::Exact, None).unwrap();
        fix_flows_zero(&mut model, &flows);
        model.seal();
        let sol = model.solve(&SolveOptions::default()).unwrap();
        for k in 0..=2 {
            for i in 0..2 {
                for j in 0..2 {
                    let v = sol.values[flows.occ(k, i, j).0];
                    assert!((v - n0.get(i, j) as f64).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn mass_is_conserved_in_feasible_solutions() {
        let mut model = MilpModel::new();
        let n0 = OccupancyMatrix::from_rows(&[vec![3, 0], vec![0, 1]]).unwrap();
        let flows = encode_dynamics(&mut model, &n0, 3, IntegerMode::Exact, None).unwrap();
        // Push mass around: maximize the far corner at the last step.
        model
            .set_objective(vec![(flows.occ(3, 1, 1), -1.0)])
            .unwrap();
        model.seal();
        let sol = model.solve(&SolveOptions::default()).unwrap();
        for k in 0..=3 {
            let mass: f64 = (0..2)
                .flat_map(|i| (0..2).map(move |j| (i, j)))
                .map(|(i, j)| sol.values[flows.occ(k, i, j).0])
                .sum();
            assert!((mass - 4.0).abs() < 1e-6, "mass {mass} at step {k}");
        }
        // Everything can reach the corner in 3 steps.
        assert!((sol.values[flows.occ(3, 1, 1).0] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn capacity_caps_occupancy() {
        let mut model = MilpModel::new();
        let n0 = OccupancyMatrix::from_rows(&[vec![2, 0], vec![0, 0]]).unwrap();
        let flows = encode_dynamics(&mut model, &n0, 2, IntegerMode::Exact, Some(3)).unwrap();
        model
            .set_objective(vec![(flows.occ(2, 1, 1), -1.0)])
            .unwrap();
        model.seal();
        let sol = model.solve(&SolveOptions::default()).unwrap();
        for k in 1..=2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert!(sol.values[flows.occ(k, i, j).0] <= 3.0 + 1e-6);
                }
            }
        }
    }

    #[test]
    fn predicate_big_m_soundness() {
        // Pin z of (mu >= 2) at the root; the solver must move mass so
        // the root valuation meets the threshold... which it always does
        // (root = total). Use a leaf-level predicate instead.
        let mut model = MilpModel::new();
        let n0 = OccupancyMatrix::from_rows(&[vec![2, 0], vec![0, 0]]).unwrap();
        let flows = encode_dynamics(&mut model, &n0, 3, IntegerMode::Exact, None).unwrap();
        let phi = parse("F[0,3) (A[SE] O (mu >= 2))").unwrap();
        let m = recommended_big_m(2, &phi, false);
        let enc = encode_formula(&mut model, &phi, &flows, 1.0, m, None).unwrap();
        model
            .add_constraint("pin", vec![(enc.root, 1.0)], ConstraintOp::Eq, 1.0)
            .unwrap();
        let obj = flows.flow_list.iter().map(|&(_, f)| (f, 1.0)).collect();
        model.set_objective(obj).unwrap();
        model.seal();
        let sol = model.solve(&SolveOptions::default()).unwrap();
        assert_eq!(sol.status, crate::milp::SolveStatus::Optimal);
        // Both robots must reach the SE cell by step 2: 2 robots x 2
        // moves = 4 displacements.
        assert!((sol.objective_value - 4.0).abs() < 1e-6);
        let best_se = (0..=2)
            .map(|k| sol.values[flows.occ(k, 1, 1).0])
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(best_se >= 2.0 - 1e-6);
    }

    #[test]
    fn conjunction_rows_shape() {
        let mut model = MilpModel::new();
        let n0 = OccupancyMatrix::from_rows(&[vec![1, 0], vec![0, 0]]).unwrap();
        let flows = encode_dynamics(&mut model, &n0, 1, IntegerMode::Exact, None).unwrap();
        let before = model.num_constraints();
        let phi = parse("(mu >= 1) & (mu <= 5)").unwrap();
        let m = recommended_big_m(1, &phi, false);
        encode_formula(&mut model, &phi, &flows, 1.0, m, None).unwrap();
        // Two predicates (2 rows each) + one conjunction (2 upper rows +
        // 1 lower row).
        assert_eq!(model.num_constraints() - before, 7);
    }

    #[test]
    fn always_forced_true_on_satisfying_trajectory() {
        // G[0,2) sigma with frozen flows on a trajectory satisfying
        // sigma at steps 0 and 1: z must be 1 in every feasible
        // solution, so minimizing z yields 1.
        let mut model = MilpModel::new();
        let n0 = OccupancyMatrix::from_rows(&[vec![2, 0], vec![0, 0]]).unwrap();
        let flows = encode_dynamics(&mut model, &n0, 2, IntegerMode::Exact, None).unwrap();
        fix_flows_zero(&mut model, &flows);
        let phi = parse("G[0,2) (A[NW] O (mu >= 1))").unwrap();
        let m = recommended_big_m(2, &phi, false);
        let enc = encode_formula(&mut model, &phi, &flows, 1.0, m, None).unwrap();
        model.set_objective(vec![(enc.root, 1.0)]).unwrap();
        model.seal();
        let sol = model.solve(&SolveOptions::default()).unwrap();
        assert!((sol.values[enc.root.0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn memoization_shares_repeated_subformulas() {
        let mut model = MilpModel::new();
        let n0 = OccupancyMatrix::from_rows(&[vec![1, 0], vec![0, 0]]).unwrap();
        let flows = encode_dynamics(&mut model, &n0, 1, IntegerMode::Exact, None).unwrap();
        let phi = parse("((mu >= 1) | (mu >= 1)) & (mu >= 1)").unwrap();
        let m = recommended_big_m(1, &phi, false);
        let enc = encode_formula(&mut model, &phi, &flows, 1.0, m, None).unwrap();
        // One shared predicate z, one or-z, one and-z.
        assert_eq!(enc.z_count, 3);
    }

    #[test]
    fn horizon_exceeding_k_rejected() {
        let mut model = MilpModel::new();
        let n0 = OccupancyMatrix::from_rows(&[vec![1, 0], vec![0, 0]]).unwrap();
        let flows = encode_dynamics(&mut model, &n0, 1, IntegerMode::Exact, None).unwrap();
        let phi = parse("F[0,5) (mu >= 1)").unwrap();
        let m = recommended_big_m(1, &phi, false);
        assert!(matches!(
            encode_formula(&mut model, &phi, &flows, 1.0, m, None),
            Err(EncodeError::HorizonExceedsK { needed: 5, steps: 1 })
        ));
    }

    #[test]
    fn undersized_big_m_rejected() {
        let mut model = MilpModel::new();
        let n0 = OccupancyMatrix::from_rows(&[vec![1, 0], vec![0, 0]]).unwrap();
        let flows = encode_dynamics(&mut model, &n0, 1, IntegerMode::Exact, None).unwrap();
        let phi = parse("mu >= 7").unwrap();
        assert!(matches!(
            encode_formula(&mut model, &phi, &flows, 1.0, 5.0, None),
            Err(EncodeError::BigMTooSmall { .. })
        ));
    }

    #[test]
    fn max_rho_matches_monitor_on_fixed_trajectory() {
        // Freeze the trajectory; maximizing rho with the root pinned
        // must reproduce the monitor's robustness.
        let cases = [
            "G[0,2) (E[NW,NE] O (mu >= 1))",
            "F[0,3) (mu >= 3)",
            "! (A[SE] O (mu >= 2))",
            "(mu >= 1) U[0,3) (A[NE] O (mu >= 1))",
        ];
        let n0 = OccupancyMatrix::from_rows(&[vec![2, 1], vec![0, 0]]).unwrap();
        let signal =
            QtsSignal::from_occupancies(&vec![n0.clone(); 4], 1.0).unwrap();
        for text in cases {
            let phi = parse(text).unwrap();
            let expected = spatel_robustness(&phi, &signal, 0).unwrap();

            let mut model = MilpModel::new();
            let flows = encode_dynamics(&mut model, &n0, 3, IntegerMode::Exact, None).unwrap();
            fix_flows_zero(&mut model, &flows);
            let rho = encode_robustness(&mut model, rho_bound(3, &phi)).unwrap();
            let m = recommended_big_m(3, &phi, true);
            let enc = encode_formula(&mut model, &phi, &flows, 1.0, m, Some(rho)).unwrap();
            model
                .add_constraint("pin", vec![(enc.root, 1.0)], ConstraintOp::Eq, 1.0)
                .unwrap();
            model.set_objective(vec![(rho, -1.0)]).unwrap();
            model.seal();
            let sol = model.solve(&SolveOptions::default()).unwrap();
            assert_eq!(sol.status, crate::milp::SolveStatus::Optimal, "{text}");
            let got = sol.values[rho.0];
            assert!(
                (got - expected).abs() < 1e-6,
                "{text}: milp rho {got} vs monitor {expected}"
            );
        }
    }
}
