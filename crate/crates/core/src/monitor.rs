//! Quantitative (robustness) semantics of TSSL over a QTS and SpaTeL over
//! a discrete-time QTS signal.
//!
//! This is the ground truth the MILP encoder is checked against. Temporal
//! intervals `[t1,t2)` evaluated at step `k` map to the discrete index
//! window `k + t1/dt .. k + t2/dt` (half-open); the encoder reuses
//! [`step_window`] so both sides agree on indexing by construction.

use thiserror::Error;

use crate::grid::{NodeId, OccupancyMatrix, Qts};
use crate::logic::{Interval, PredOp, SpatelFormula, TsslFormula};

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("signal too short: formula needs steps {from}..={to} but the signal ends at step {have}")]
    SignalTooShort { from: usize, to: usize, have: usize },
    #[error("interval bound {bound}s is not a non-negative multiple of the step {step}s")]
    IntervalNotMultiple { bound: f64, step: f64 },
    #[error("signal frames disagree on depth")]
    DepthMismatch,
    #[error("signal has no frames")]
    Empty,
}

/// A QTS per discrete step `k = 0..=K`, sampled every `step` seconds.
#[derive(Debug, Clone)]
pub struct QtsSignal {
    frames: Vec<Qts>,
    step: f64,
}

impl QtsSignal {
    pub fn new(frames: Vec<Qts>, step: f64) -> Result<QtsSignal, MonitorError> {
        let first = frames.first().ok_or(MonitorError::Empty)?;
        if frames.iter().any(|f| f.depth() != first.depth()) {
            return Err(MonitorError::DepthMismatch);
        }
        Ok(QtsSignal { frames, step })
    }

    pub fn from_occupancies(
        occupancies: &[OccupancyMatrix],
        step: f64,
    ) -> Result<QtsSignal, MonitorError> {
        QtsSignal::new(occupancies.iter().map(Qts::from_occupancy).collect(), step)
    }

    /// Number of frames (`K + 1`).
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Last step index `K`.
    pub fn last_step(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn frame(&self, k: usize) -> &Qts {
        &self.frames[k]
    }
}

/// Discrete index window of interval `[t1,t2)` anchored at step `k`:
/// `k + t1/dt .. k + t2/dt`, half-open. Errors unless both endpoints are
/// non-negative multiples of `dt`.
pub fn step_window(
    k: usize,
    interval: &Interval,
    dt: f64,
) -> Result<std::ops::Range<usize>, MonitorError> {
    let lo = to_steps(interval.start, dt)?;
    let hi = to_steps(interval.end, dt)?;
    Ok(k + lo..k + hi)
}

fn to_steps(bound: f64, dt: f64) -> Result<usize, MonitorError> {
    let ratio = bound / dt;
    let rounded = ratio.round();
    if bound < 0.0 || (ratio - rounded).abs() > 1e-9 {
        return Err(MonitorError::IntervalNotMultiple { bound, step: dt });
    }
    Ok(rounded as usize)
}

/// Robustness of a TSSL formula at node `v` of one QTS.
pub fn tssl_robustness(phi: &TsslFormula, q: &Qts, v: NodeId) -> f64 {
    match phi {
        TsslFormula::True => 1.0,
        TsslFormula::Pred { op, threshold } => {
            let mu = q.value(v);
            match op {
                PredOp::Ge => mu - threshold,
                PredOp::Le => threshold - mu,
            }
        }
        TsslFormula::Not(inner) => -tssl_robustness(inner, q, v),
        TsslFormula::And(parts) => parts
            .iter()
            .map(|p| tssl_robustness(p, q, v))
            .fold(f64::INFINITY, f64::min),
        TsslFormula::Or(parts) => parts
            .iter()
            .map(|p| tssl_robustness(p, q, v))
            .fold(f64::NEG_INFINITY, f64::max),
        TsslFormula::ExistsNext { labels, inner } => q
            .labeled_paths(v, *labels, 1)
            .map(|path| tssl_robustness(inner, q, path.at(1)))
            .fold(f64::NEG_INFINITY, f64::max),
        TsslFormula::ForallNext { labels, inner } => q
            .labeled_paths(v, *labels, 1)
            .map(|path| tssl_robustness(inner, q, path.at(1)))
            .fold(f64::INFINITY, f64::min),
        TsslFormula::ExistsUntil {
            labels,
            kappa,
            lhs,
            rhs,
        } => until_paths(q, v, *labels, *kappa, lhs, rhs).fold(f64::NEG_INFINITY, f64::max),
        TsslFormula::ForallUntil {
            labels,
            kappa,
            lhs,
            rhs,
        } => until_paths(q, v, *labels, *kappa, lhs, rhs).fold(f64::INFINITY, f64::min),
    }
}

/// Per-(path, i) until scores: `min(rhs at pi_i, min over j < i of lhs at
/// pi_j)` for `i` in `(0, kappa]`.
fn until_paths<'a>(
    q: &'a Qts,
    v: NodeId,
    labels: crate::grid::LabelSet,
    kappa: usize,
    lhs: &'a TsslFormula,
    rhs: &'a TsslFormula,
) -> impl Iterator<Item = f64> + 'a {
    q.labeled_paths(v, labels, kappa).flat_map(move |path| {
        let mut scores = Vec::with_capacity(kappa);
        let mut lhs_prefix = f64::INFINITY;
        for i in 1..=kappa {
            lhs_prefix = lhs_prefix.min(tssl_robustness(lhs, q, path.at(i - 1)));
            scores.push(tssl_robustness(rhs, q, path.at(i)).min(lhs_prefix));
        }
        scores
    })
}

/// Robustness of a SpaTeL formula against a signal, anchored at step `k`.
pub fn spatel_robustness(
    phi: &SpatelFormula,
    signal: &QtsSignal,
    k: usize,
) -> Result<f64, MonitorError> {
    let needed = to_steps(phi.horizon(), signal.step())?;
    if k + needed > signal.last_step() {
        return Err(MonitorError::SignalTooShort {
            from: signal.last_step() + 1,
            to: k + needed,
            have: signal.last_step(),
        });
    }
    eval_spatel(phi, signal, k)
}

fn eval_spatel(phi: &SpatelFormula, signal: &QtsSignal, k: usize) -> Result<f64, MonitorError> {
    Ok(match phi {
        SpatelFormula::Tssl(t) => {
            let q = signal.frame(k);
            tssl_robustness(t, q, q.root())
        }
        SpatelFormula::Not(inner) => -eval_spatel(inner, signal, k)?,
        SpatelFormula::And(parts) => {
            let mut acc = f64::INFINITY;
            for p in parts {
                acc = acc.min(eval_spatel(p, signal, k)?);
            }
            acc
        }
        SpatelFormula::Or(parts) => {
            let mut acc = f64::NEG_INFINITY;
            for p in parts {
                acc = acc.max(eval_spatel(p, signal, k)?);
            }
            acc
        }
        SpatelFormula::Eventually { interval, inner } => {
            let mut acc = f64::NEG_INFINITY;
            for k2 in step_window(k, interval, signal.step())? {
                acc = acc.max(eval_spatel(inner, signal, k2)?);
            }
            acc
        }
        SpatelFormula::Always { interval, inner } => {
            let mut acc = f64::INFINITY;
            for k2 in step_window(k, interval, signal.step())? {
                acc = acc.min(eval_spatel(inner, signal, k2)?);
            }
            acc
        }
        SpatelFormula::Until { interval, lhs, rhs } => {
            let window = step_window(k, interval, signal.step())?;
            let mut acc = f64::NEG_INFINITY;
            let mut lhs_prefix = f64::INFINITY;
            for k2 in window {
                // lhs must hold on [window start, k2), exclusive of k2.
                let score = eval_spatel(rhs, signal, k2)?.min(lhs_prefix);
                lhs_prefix = lhs_prefix.min(eval_spatel(lhs, signal, k2)?);
                acc = acc.max(score);
            }
            acc
        }
    })
}

/// Three-valued satisfaction verdict; zero robustness is reported as its
/// own case since the soundness implication is silent there.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Sat,
    Unsat,
    Boundary,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::Sat => "sat",
            Verdict::Unsat => "unsat",
            Verdict::Boundary => "boundary",
        };
        f.write_str(s)
    }
}

pub fn satisfies(
    phi: &SpatelFormula,
    signal: &QtsSignal,
    k: usize,
) -> Result<Verdict, MonitorError> {
    let rho = spatel_robustness(phi, signal, k)?;
    Ok(if rho > 0.0 {
        Verdict::Sat
    } else if rho < 0.0 {
        Verdict::Unsat
    } else {
        Verdict::Boundary
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{LabelSet, QuadLabel};
    use crate::logic::parse;

    fn example_matrix() -> OccupancyMatrix {
        OccupancyMatrix::from_rows(&[
            vec![3, 4, 1, 1],
            vec![0, 0, 2, 3],
            vec![0, 0, 0, 0],
            vec![1, 1, 0, 0],
        ])
        .unwrap()
    }

    fn stationary_signal(frames: usize) -> QtsSignal {
        let m = example_matrix();
        QtsSignal::from_occupancies(&vec![m; frames], 1.0).unwrap()
    }

    fn tssl(text: &str) -> TsslFormula {
        match parse(text).unwrap() {
            SpatelFormula::Tssl(t) => t,
            other => panic!("expected TSSL formula, got {other:?}"),
        }
    }

    #[test]
    fn checkerboard_half_on_example_tree() {
        // Worst leaf is the NE position of the NW quadrant (value 4).
        let q = Qts::from_occupancy(&example_matrix());
        let phi = tssl("A[L] O (A[NE,SW] O (mu <= 0))");
        assert_eq!(tssl_robustness(&phi, &q, q.root()), -4.0);
    }

    #[test]
    fn top_is_one() {
        let q = Qts::from_occupancy(&example_matrix());
        assert_eq!(tssl_robustness(&TsslFormula::True, &q, q.root()), 1.0);
    }

    #[test]
    fn predicate_at_inner_node() {
        // Node v1 (the NW quadrant) has value 7; rho(mu >= 3) = 4.
        let q = Qts::from_occupancy(&example_matrix());
        let v1 = q.child(q.root(), QuadLabel::Nw).unwrap();
        let phi = tssl("mu >= 3");
        assert_eq!(tssl_robustness(&phi, &q, v1), 4.0);
    }

    #[test]
    fn checkerboard_spatel_is_minus_four() {
        // Phi_c = G[0,4)(F[0,2) phi_c1 & F[0,2) phi_c2) on the stationary
        // signal: violated with robustness -4.
        let phi = parse(
            "G[0,4)(F[0,2) A[L] O (A[NW,SE] O (mu <= 0)) & F[0,2) A[L] O (A[NE,SW] O (mu <= 0)))",
        )
        .unwrap();
        let signal = stationary_signal(7);
        assert_eq!(spatel_robustness(&phi, &signal, 0).unwrap(), -4.0);
        assert_eq!(satisfies(&phi, &signal, 0).unwrap(), Verdict::Unsat);

        // Same result with the equality reading of the checkerboard zeros.
        let phi_eq = parse(
            "G[0,4)(F[0,2) A[L] O (A[NW,SE] O (mu == 0)) & F[0,2) A[L] O (A[NE,SW] O (mu == 0)))",
        )
        .unwrap();
        assert_eq!(spatel_robustness(&phi_eq, &signal, 0).unwrap(), -4.0);
    }

    #[test]
    fn always_top_is_one() {
        let phi = parse("G[0,1) true").unwrap();
        let signal = stationary_signal(2);
        assert_eq!(spatel_robustness(&phi, &signal, 0).unwrap(), 1.0);
        assert_eq!(satisfies(&phi, &signal, 0).unwrap(), Verdict::Sat);
    }

    #[test]
    fn eventually_takes_best_frame() {
        // Root values (3, 9): F[0,2)(mu >= 5) = max(3-5, 9-5) = 4.
        let frames = vec![
            Qts::from_values(1, &[1.0, 1.0, 1.0, 0.0]),
            Qts::from_values(1, &[4.0, 3.0, 1.0, 1.0]),
            // The horizon of F[0,2) is a conservative 2 steps, so a third
            // frame must exist even though it is never inspected.
            Qts::from_values(1, &[0.0, 0.0, 0.0, 0.0]),
        ];
        let signal = QtsSignal::new(frames, 1.0).unwrap();
        let phi = parse("F[0,2) mu >= 5").unwrap();
        assert_eq!(spatel_robustness(&phi, &signal, 0).unwrap(), 4.0);
    }

    #[test]
    fn boundary_verdict_at_zero() {
        let phi = parse("mu >= 16").unwrap();
        let signal = stationary_signal(1);
        assert_eq!(spatel_robustness(&phi, &signal, 0).unwrap(), 0.0);
        assert_eq!(satisfies(&phi, &signal, 0).unwrap(), Verdict::Boundary);
    }

    #[test]
    fn signal_too_short_names_missing_steps() {
        let phi = parse("G[0,10) true").unwrap();
        let signal = stationary_signal(3);
        match spatel_robustness(&phi, &signal, 0) {
            Err(MonitorError::SignalTooShort { to, have, .. }) => {
                assert_eq!(to, 10);
                assert_eq!(have, 2);
            }
            other => panic!("expected SignalTooShort, got {other:?}"),
        }
    }

    #[test]
    fn interval_must_be_step_multiple() {
        let phi = parse("G[0,1.5) true").unwrap();
        let signal = stationary_signal(4);
        assert!(matches!(
            spatel_robustness(&phi, &signal, 0),
            Err(MonitorError::IntervalNotMultiple { .. })
        ));
    }

    #[test]
    fn negation_antisymmetry() {
        let phi = parse("F[0,2) A[L] O (mu >= 2)").unwrap();
        let neg = SpatelFormula::Not(Box::new(phi.clone()));
        let signal = stationary_signal(3);
        assert_eq!(
            spatel_robustness(&neg, &signal, 0).unwrap(),
            -spatel_robustness(&phi, &signal, 0).unwrap()
        );
    }

    #[test]
    fn until_excludes_current_step_in_prefix() {
        // rhs true only at step 2, lhs fails at step 2: the lhs prefix for
        // k'=2 covers steps 0 and 1 only, so the until still holds.
        let mk = |root4: [f64; 4]| Qts::from_values(1, &root4);
        let frames = vec![
            mk([2.0, 0.0, 0.0, 0.0]),
            mk([2.0, 0.0, 0.0, 0.0]),
            mk([0.0, 9.0, 0.0, 0.0]),
            mk([0.0, 0.0, 0.0, 0.0]),
        ];
        let signal = QtsSignal::new(frames, 1.0).unwrap();
        let phi = parse("(E[NW] O (mu >= 1)) U[0,3) (E[NE] O (mu >= 5))").unwrap();
        let rho = spatel_robustness(&phi, &signal, 0).unwrap();
        assert_eq!(rho, 1.0); // min(9-5, lhs at steps 0,1 = 2-1)
    }

    #[test]
    fn spatial_until_with_leaf_repetition() {
        // kappa beyond the tree depth is legal; the leaf repeats.
        let q = Qts::from_values(1, &[5.0, 0.0, 0.0, 0.0]);
        let phi = tssl("E[NW] ((mu >= 1) U[3] (mu >= 4))");
        let rho = tssl_robustness(&phi, &q, q.root());
        // Best witness: i=1 hits the NW leaf (5-4), prefix is the root (5-1).
        assert_eq!(rho, 1.0);
    }

    #[test]
    fn min_max_algebra() {
        let signal = stationary_signal(3);
        let a = parse("A[L] O (mu >= 2)").unwrap();
        let b = parse("E[L] O (mu <= 3)").unwrap();
        let both = SpatelFormula::And(vec![a.clone(), b.clone()]);
        let either = SpatelFormula::Or(vec![a.clone(), b.clone()]);
        let ra = spatel_robustness(&a, &signal, 0).unwrap();
        let rb = spatel_robustness(&b, &signal, 0).unwrap();
        assert_eq!(spatel_robustness(&both, &signal, 0).unwrap(), ra.min(rb));
        assert_eq!(spatel_robustness(&either, &signal, 0).unwrap(), ra.max(rb));
    }

    #[test]
    fn window_helper_examples() {
        let w = step_window(2, &Interval::new(0.0, 4.0), 2.0).unwrap();
        assert_eq!(w, 2..4);
        let w = step_window(0, &Interval::new(30.0, 40.0), 10.0).unwrap();
        assert_eq!(w, 3..4);
    }

    #[test]
    fn labeled_path_next_on_leaf_is_itself() {
        // Spatial next at a leaf sees the leaf again via repetition.
        let q = Qts::from_values(1, &[5.0, 1.0, 1.0, 1.0]);
        let leaf = q.child(q.root(), QuadLabel::Nw).unwrap();
        let phi = TsslFormula::ForallNext {
            labels: LabelSet::ALL,
            inner: Box::new(tssl("mu >= 4")),
        };
        assert_eq!(tssl_robustness(&phi, &q, leaf), 1.0);
    }
}
