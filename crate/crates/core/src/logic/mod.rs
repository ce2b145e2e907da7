//! TSSL and SpaTeL formula ASTs, concrete syntax, and structural analyses.
//!
//! TSSL formulas constrain a single quad transition system through spatial
//! next/until operators quantified over labeled paths. SpaTeL formulas wrap
//! TSSL formulas in STL-style temporal operators over half-open intervals
//! `[t1, t2)`.

mod parser;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::grid::LabelSet;

pub use parser::{parse, parse_with, FormulaEnv, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PredOp {
    /// `mu >= c`
    Ge,
    /// `mu <= c`
    Le,
}

/// Half-open time interval `[start, end)` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Interval {
        Interval { start, end }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", Num(self.start), Num(self.end))
    }
}

/// Tree spatial superposition logic over one QTS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TsslFormula {
    True,
    Pred {
        op: PredOp,
        threshold: f64,
    },
    Not(Box<TsslFormula>),
    And(Vec<TsslFormula>),
    Or(Vec<TsslFormula>),
    ExistsNext {
        labels: LabelSet,
        inner: Box<TsslFormula>,
    },
    ForallNext {
        labels: LabelSet,
        inner: Box<TsslFormula>,
    },
    ExistsUntil {
        labels: LabelSet,
        kappa: usize,
        lhs: Box<TsslFormula>,
        rhs: Box<TsslFormula>,
    },
    ForallUntil {
        labels: LabelSet,
        kappa: usize,
        lhs: Box<TsslFormula>,
        rhs: Box<TsslFormula>,
    },
}

/// SpaTeL: temporal operators over TSSL leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpatelFormula {
    Tssl(TsslFormula),
    Not(Box<SpatelFormula>),
    And(Vec<SpatelFormula>),
    Or(Vec<SpatelFormula>),
    Eventually {
        interval: Interval,
        inner: Box<SpatelFormula>,
    },
    Always {
        interval: Interval,
        inner: Box<SpatelFormula>,
    },
    Until {
        interval: Interval,
        lhs: Box<SpatelFormula>,
        rhs: Box<SpatelFormula>,
    },
}

impl SpatelFormula {
    pub fn tssl(phi: TsslFormula) -> SpatelFormula {
        SpatelFormula::Tssl(phi)
    }

    /// Formula horizon `T` in seconds: the farthest look-ahead the formula
    /// requires of a signal starting at its evaluation time.
    pub fn horizon(&self) -> f64 {
        match self {
            SpatelFormula::Tssl(_) => 0.0,
            SpatelFormula::Not(inner) => inner.horizon(),
            SpatelFormula::And(parts) | SpatelFormula::Or(parts) => parts
                .iter()
                .map(|p| p.horizon())
                .fold(0.0, f64::max),
            SpatelFormula::Eventually { interval, inner }
            | SpatelFormula::Always { interval, inner } => interval.end + inner.horizon(),
            SpatelFormula::Until { interval, lhs, rhs } => {
                interval.end + lhs.horizon().max(rhs.horizon())
            }
        }
    }

    /// Negation normal form: negations are pushed inward through every
    /// operator that has a syntactic dual. The spatial and temporal until
    /// operators have no dual in this syntax, so `Not` may remain directly
    /// above an until; `Not` always remains directly above predicates
    /// (flipping a predicate's comparison is left to the robustness
    /// tightening machinery, which works off negation parity instead).
    pub fn to_nnf(&self) -> SpatelFormula {
        self.nnf(false)
    }

    fn nnf(&self, negated: bool) -> SpatelFormula {
        match self {
            SpatelFormula::Tssl(phi) => SpatelFormula::Tssl(phi.nnf(negated)),
            SpatelFormula::Not(inner) => inner.nnf(!negated),
            SpatelFormula::And(parts) => {
                let parts = parts.iter().map(|p| p.nnf(negated)).collect();
                if negated {
                    SpatelFormula::Or(parts)
                } else {
                    SpatelFormula::And(parts)
                }
            }
            SpatelFormula::Or(parts) => {
                let parts = parts.iter().map(|p| p.nnf(negated)).collect();
                if negated {
                    SpatelFormula::And(parts)
                } else {
                    SpatelFormula::Or(parts)
                }
            }
            SpatelFormula::Eventually { interval, inner } => {
                let inner = Box::new(inner.nnf(negated));
                if negated {
                    SpatelFormula::Always {
                        interval: *interval,
                        inner,
                    }
                } else {
                    SpatelFormula::Eventually {
                        interval: *interval,
                        inner,
                    }
                }
            }
            SpatelFormula::Always { interval, inner } => {
                let inner = Box::new(inner.nnf(negated));
                if negated {
                    SpatelFormula::Eventually {
                        interval: *interval,
                        inner,
                    }
                } else {
                    SpatelFormula::Always {
                        interval: *interval,
                        inner,
                    }
                }
            }
            SpatelFormula::Until { interval, lhs, rhs } => {
                let inner = SpatelFormula::Until {
                    interval: *interval,
                    lhs: Box::new(lhs.nnf(false)),
                    rhs: Box::new(rhs.nnf(false)),
                };
                if negated {
                    SpatelFormula::Not(Box::new(inner))
                } else {
                    inner
                }
            }
        }
    }
}

impl TsslFormula {
    fn nnf(&self, negated: bool) -> TsslFormula {
        match self {
            TsslFormula::True => {
                if negated {
                    TsslFormula::Not(Box::new(TsslFormula::True))
                } else {
                    TsslFormula::True
                }
            }
            TsslFormula::Pred { .. } => {
                if negated {
                    TsslFormula::Not(Box::new(self.clone()))
                } else {
                    self.clone()
                }
            }
            TsslFormula::Not(inner) => inner.nnf(!negated),
            TsslFormula::And(parts) => {
                let parts = parts.iter().map(|p| p.nnf(negated)).collect();
                if negated {
                    TsslFormula::Or(parts)
                } else {
                    TsslFormula::And(parts)
                }
            }
            TsslFormula::Or(parts) => {
                let parts = parts.iter().map(|p| p.nnf(negated)).collect();
                if negated {
                    TsslFormula::And(parts)
                } else {
                    TsslFormula::Or(parts)
                }
            }
            TsslFormula::ExistsNext { labels, inner } => {
                let inner = Box::new(inner.nnf(negated));
                if negated {
                    TsslFormula::ForallNext {
                        labels: *labels,
                        inner,
                    }
                } else {
                    TsslFormula::ExistsNext {
                        labels: *labels,
                        inner,
                    }
                }
            }
            TsslFormula::ForallNext { labels, inner } => {
                let inner = Box::new(inner.nnf(negated));
                if negated {
                    TsslFormula::ExistsNext {
                        labels: *labels,
                        inner,
                    }
                } else {
                    TsslFormula::ForallNext {
                        labels: *labels,
                        inner,
                    }
                }
            }
            TsslFormula::ExistsUntil {
                labels,
                kappa,
                lhs,
                rhs,
            } => {
                let inner = TsslFormula::ExistsUntil {
                    labels: *labels,
                    kappa: *kappa,
                    lhs: Box::new(lhs.nnf(false)),
                    rhs: Box::new(rhs.nnf(false)),
                };
                if negated {
                    TsslFormula::Not(Box::new(inner))
                } else {
                    inner
                }
            }
            TsslFormula::ForallUntil {
                labels,
                kappa,
                lhs,
                rhs,
            } => {
                let inner = TsslFormula::ForallUntil {
                    labels: *labels,
                    kappa: *kappa,
                    lhs: Box::new(lhs.nnf(false)),
                    rhs: Box::new(rhs.nnf(false)),
                };
                if negated {
                    TsslFormula::Not(Box::new(inner))
                } else {
                    inner
                }
            }
        }
    }
}

/// Sign class of the robustness derivative with respect to a predicate's
/// threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    /// Raising `c` tightens (`d rho / d c` in `{0, -1}`).
    NonIncreasing,
    /// Lowering `c` tightens (`d rho / d c` in `{0, 1}`).
    NonDecreasing,
}

impl Polarity {
    pub fn flipped(self) -> Polarity {
        match self {
            Polarity::NonIncreasing => Polarity::NonDecreasing,
            Polarity::NonDecreasing => Polarity::NonIncreasing,
        }
    }
}

/// One predicate occurrence: its position inside the formula plus the
/// tightening direction implied by the operators above it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateSite {
    /// Child indices from the root, crossing the SpaTeL/TSSL boundary.
    pub path: Vec<usize>,
    pub polarity: Polarity,
}

/// Lists every predicate occurrence with its polarity. The polarity of a
/// `mu >= c` site is non-increasing under an even number of enclosing
/// negations and non-decreasing under an odd number; `mu <= c` mirrors.
pub fn predicate_sites(phi: &SpatelFormula) -> Vec<PredicateSite> {
    let mut out = Vec::new();
    spatel_sites(phi, &mut Vec::new(), false, &mut out);
    out
}

fn spatel_sites(
    phi: &SpatelFormula,
    path: &mut Vec<usize>,
    negated: bool,
    out: &mut Vec<PredicateSite>,
) {
    match phi {
        SpatelFormula::Tssl(t) => tssl_sites(t, path, negated, out),
        SpatelFormula::Not(inner) => {
            path.push(0);
            spatel_sites(inner, path, !negated, out);
            path.pop();
        }
        SpatelFormula::And(parts) | SpatelFormula::Or(parts) => {
            for (i, p) in parts.iter().enumerate() {
                path.push(i);
                spatel_sites(p, path, negated, out);
                path.pop();
            }
        }
        SpatelFormula::Eventually { inner, .. } | SpatelFormula::Always { inner, .. } => {
            path.push(0);
            spatel_sites(inner, path, negated, out);
            path.pop();
        }
        SpatelFormula::Until { lhs, rhs, .. } => {
            path.push(0);
            spatel_sites(lhs, path, negated, out);
            path.pop();
            path.push(1);
            spatel_sites(rhs, path, negated, out);
            path.pop();
        }
    }
}

fn tssl_sites(
    phi: &TsslFormula,
    path: &mut Vec<usize>,
    negated: bool,
    out: &mut Vec<PredicateSite>,
) {
    match phi {
        TsslFormula::True => {}
        TsslFormula::Pred { op, .. } => {
            let base = match op {
                PredOp::Ge => Polarity::NonIncreasing,
                PredOp::Le => Polarity::NonDecreasing,
            };
            let polarity = if negated {
                match base {
                    Polarity::NonIncreasing => Polarity::NonDecreasing,
                    Polarity::NonDecreasing => Polarity::NonIncreasing,
                }
            } else {
                base
            };
            out.push(PredicateSite {
                path: path.clone(),
                polarity,
            });
        }
        TsslFormula::Not(inner) => {
            path.push(0);
            tssl_sites(inner, path, !negated, out);
            path.pop();
        }
        TsslFormula::And(parts) | TsslFormula::Or(parts) => {
            for (i, p) in parts.iter().enumerate() {
                path.push(i);
                tssl_sites(p, path, negated, out);
                path.pop();
            }
        }
        TsslFormula::ExistsNext { inner, .. } | TsslFormula::ForallNext { inner, .. } => {
            path.push(0);
            tssl_sites(inner, path, negated, out);
            path.pop();
        }
        TsslFormula::ExistsUntil { lhs, rhs, .. } | TsslFormula::ForallUntil { lhs, rhs, .. } => {
            path.push(0);
            tssl_sites(lhs, path, negated, out);
            path.pop();
            path.push(1);
            tssl_sites(rhs, path, negated, out);
            path.pop();
        }
    }
}

/// Prints a float without a trailing `.0` for whole numbers.
struct Num(f64);

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.fract() == 0.0 && self.0.abs() < 1e15 {
            write!(f, "{}", self.0 as i64)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

// Display implementations produce concrete syntax that re-parses to a
// structurally identical AST: children at the same or looser precedence
// level are parenthesized.

impl fmt::Display for TsslFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TsslFormula::True => f.write_str("true"),
            TsslFormula::Pred { op, threshold } => {
                let sym = match op {
                    PredOp::Ge => ">=",
                    PredOp::Le => "<=",
                };
                write!(f, "mu {sym} {}", Num(*threshold))
            }
            TsslFormula::Not(inner) => write!(f, "!({inner})"),
            TsslFormula::And(parts) => join(f, parts, " & "),
            TsslFormula::Or(parts) => join(f, parts, " | "),
            TsslFormula::ExistsNext { labels, inner } => write!(f, "E[{labels}] O ({inner})"),
            TsslFormula::ForallNext { labels, inner } => write!(f, "A[{labels}] O ({inner})"),
            TsslFormula::ExistsUntil {
                labels,
                kappa,
                lhs,
                rhs,
            } => write!(f, "E[{labels}] (({lhs}) U[{kappa}] ({rhs}))"),
            TsslFormula::ForallUntil {
                labels,
                kappa,
                lhs,
                rhs,
            } => write!(f, "A[{labels}] (({lhs}) U[{kappa}] ({rhs}))"),
        }
    }
}

impl fmt::Display for SpatelFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpatelFormula::Tssl(t) => write!(f, "{t}"),
            SpatelFormula::Not(inner) => write!(f, "!({inner})"),
            SpatelFormula::And(parts) => join(f, parts, " & "),
            SpatelFormula::Or(parts) => join(f, parts, " | "),
            SpatelFormula::Eventually { interval, inner } => write!(f, "F{interval} ({inner})"),
            SpatelFormula::Always { interval, inner } => write!(f, "G{interval} ({inner})"),
            SpatelFormula::Until { interval, lhs, rhs } => {
                write!(f, "({lhs}) U{interval} ({rhs})")
            }
        }
    }
}

fn join<T: fmt::Display>(f: &mut fmt::Formatter<'_>, parts: &[T], sep: &str) -> fmt::Result {
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write!(f, "({p})")?;
    }
    Ok(())
}
