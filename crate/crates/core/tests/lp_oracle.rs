//! Random LPs cross-checked against an exact rational-arithmetic oracle
//! that enumerates every basic feasible solution. The LP optimum of a
//! bounded feasible LP is attained at a vertex, and every vertex is a
//! basic solution, so the oracle's minimum equals the true optimum.

use num_rational::Ratio;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spatel::milp::{ConstraintOp, IntegerMode, MilpModel, SolveOptions, SolveStatus, VarKind};

type Q = Ratio<i128>;

fn q(n: i64) -> Q {
    Ratio::from_integer(n as i128)
}

/// Solves the square rational system `a x = b` by Gaussian elimination.
/// Returns `None` when singular.
fn solve_square(mut a: Vec<Vec<Q>>, mut b: Vec<Q>) -> Option<Vec<Q>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col];
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col] / p;
                for c in col..n {
                    let sub = f * a[col][c];
                    a[r][c] -= sub;
                }
                let sub = f * b[col];
                b[r] -= sub;
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

struct RandomLp {
    n: usize,
    // Rows of `a x <= rhs`.
    a: Vec<Vec<i64>>,
    rhs: Vec<i64>,
    ub: Vec<i64>,
    obj: Vec<i64>,
}

/// Exact optimum by enumerating all choices of `n` active constraints
/// from {rows, lower bounds, upper bounds}.
fn oracle_optimum(lp: &RandomLp) -> Q {
    let n = lp.n;
    let m = lp.a.len();
    let total = m + 2 * n;
    let mut best: Option<Q> = None;

    let mut combo: Vec<usize> = (0..n).collect();
    loop {
        // Build the active-set system.
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for &c in &combo {
            if c < m {
                a.push(lp.a[c].iter().map(|&v| q(v)).collect());
                b.push(q(lp.rhs[c]));
            } else if c < m + n {
                let v = c - m;
                let mut row = vec![Q::zero(); n];
                row[v] = q(1);
                a.push(row);
                b.push(Q::zero());
            } else {
                let v = c - m - n;
                let mut row = vec![Q::zero(); n];
                row[v] = q(1);
                a.push(row);
                b.push(q(lp.ub[v]));
            }
        }
        if let Some(x) = solve_square(a, b) {
            let feasible = (0..n).all(|v| x[v] >= Q::zero() && x[v] <= q(lp.ub[v]))
                && lp.a.iter().zip(&lp.rhs).all(|(row, &r)| {
                    row.iter().zip(&x).map(|(&c, xv)| q(c) * xv).sum::<Q>() <= q(r)
                });
            if feasible {
                let val: Q = lp.obj.iter().zip(&x).map(|(&c, xv)| q(c) * xv).sum();
                if best.as_ref().map_or(true, |b| val < *b) {
                    best = Some(val);
                }
            }
        }

        // Next lexicographic combination of `n` out of `total`.
        let mut i = n;
        loop {
            if i == 0 {
                return best.expect("origin is always feasible");
            }
            i -= 1;
            if combo[i] < total - (n - i) {
                combo[i] += 1;
                for j in i + 1..n {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[test]
fn random_lps_match_rational_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    for case in 0..40 {
        let n = rng.gen_range(2..=4usize);
        let m = rng.gen_range(1..=4usize);
        let ub: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=5)).collect();
        let a: Vec<Vec<i64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.gen_range(-4..=4)).collect())
            .collect();
        // Non-negative right-hand sides keep the origin feasible, so
        // every generated LP is feasible and the box keeps it bounded.
        let rhs: Vec<i64> = (0..m).map(|_| rng.gen_range(0..=10)).collect();
        let obj: Vec<i64> = (0..n).map(|_| rng.gen_range(-5..=5)).collect();
        let lp = RandomLp { n, a, rhs, ub, obj };

        let mut model = MilpModel::new();
        let vars: Vec<_> = (0..n)
            .map(|v| {
                model
                    .add_var(&format!("x{v}"), VarKind::Continuous, 0.0, lp.ub[v] as f64)
                    .unwrap()
            })
            .collect();
        for (i, row) in lp.a.iter().enumerate() {
            model
                .add_constraint(
                    &format!("c{i}"),
                    vars.iter().zip(row).map(|(&v, &c)| (v, c as f64)).collect(),
                    ConstraintOp::Le,
                    lp.rhs[i] as f64,
                )
                .unwrap();
        }
        model
            .set_objective(vars.iter().zip(&lp.obj).map(|(&v, &c)| (v, c as f64)).collect())
            .unwrap();
        model.seal();
        let sol = model
            .solve(&SolveOptions {
                integer_mode: Some(IntegerMode::Relaxed),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(sol.status, SolveStatus::RelaxationOnly, "case {case}");
        model.validate(&sol.values).unwrap();

        let exact = oracle_optimum(&lp);
        let exact_f = *exact.numer() as f64 / *exact.denom() as f64;
        assert!(
            (sol.objective_value - exact_f).abs() < 1e-6,
            "case {case}: simplex {} vs oracle {}",
            sol.objective_value,
            exact_f
        );
    }
}

/// MILPs with a handful of binaries, cross-checked by enumerating every
/// binary assignment and solving the continuous rest with the same LP
/// machinery (exercising branch-and-bound against exhaustive search).
#[test]
fn random_milps_match_binary_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF);
    for case in 0..20 {
        let nb = rng.gen_range(1..=4usize); // binaries
        let nc = rng.gen_range(1..=2usize); // continuous
        let n = nb + nc;
        let m = rng.gen_range(1..=3usize);
        let a: Vec<Vec<i64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.gen_range(-3..=3)).collect())
            .collect();
        let rhs: Vec<i64> = (0..m).map(|_| rng.gen_range(0..=6)).collect();
        let obj: Vec<i64> = (0..n).map(|_| rng.gen_range(-5..=5)).collect();

        let build = |fixed: Option<u32>| {
            let mut model = MilpModel::new();
            let mut vars = Vec::new();
            for v in 0..nb {
                let (lb, ub) = match fixed {
                    Some(mask) => {
                        let bit = (mask >> v & 1) as f64;
                        (bit, bit)
                    }
                    None => (0.0, 1.0),
                };
                let kind = if fixed.is_some() {
                    VarKind::Continuous
                } else {
                    VarKind::Binary
                };
                vars.push(model.add_var(&format!("z{v}"), kind, lb, ub).unwrap());
            }
            for v in 0..nc {
                vars.push(
                    model
                        .add_var(&format!("x{v}"), VarKind::Continuous, 0.0, 4.0)
                        .unwrap(),
                );
            }
            for (i, row) in a.iter().enumerate() {
                model
                    .add_constraint(
                        &format!("c{i}"),
                        vars.iter().zip(row).map(|(&v, &c)| (v, c as f64)).collect(),
                        ConstraintOp::Le,
                        rhs[i] as f64,
                    )
                    .unwrap();
            }
            model
                .set_objective(vars.iter().zip(&obj).map(|(&v, &c)| (v, c as f64)).collect())
                .unwrap();
            model.seal();
            model
        };

        let mut best = f64::INFINITY;
        for mask in 0..1u32 << nb {
            let model = build(Some(mask));
            let sol = model
                .solve(&SolveOptions {
                    integer_mode: Some(IntegerMode::Relaxed),
                    ..Default::default()
                })
                .unwrap();
            if sol.status == SolveStatus::RelaxationOnly {
                best = best.min(sol.objective_value);
            }
        }

        let model = build(None);
        let sol = model.solve(&SolveOptions::default()).unwrap();
        if best.is_finite() {
            assert_eq!(sol.status, SolveStatus::Optimal, "case {case}");
            assert!(
                (sol.objective_value - best).abs() < 1e-6,
                "case {case}: b&b {} vs enumeration {}",
                sol.objective_value,
                best
            );
            model.validate(&sol.values).unwrap();
        } else {
            assert_eq!(sol.status, SolveStatus::Infeasible, "case {case}");
        }
    }
}

struct GeneralLp {
    n: usize,
    a: Vec<Vec<i64>>,
    op: Vec<ConstraintOp>,
    rhs: Vec<i64>,
    lb: Vec<i64>,
    ub: Vec<i64>,
    obj: Vec<i64>,
}

/// Exact optimum of an LP with mixed Le/Ge/Eq rows and general variable
/// boxes, by enumerating all n-subsets of {rows, lower bounds, upper
/// bounds} as candidate active sets. Feasibility is generated into the
/// instances, so `None` never escapes the callers below.
fn oracle_optimum_general(lp: &GeneralLp) -> Option<Q> {
    let n = lp.n;
    let m = lp.a.len();
    let total = m + 2 * n;
    let mut best: Option<Q> = None;
    let mut combo: Vec<usize> = (0..n).collect();
    loop {
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for &c in &combo {
            if c < m {
                a.push(lp.a[c].iter().map(|&v| q(v)).collect::<Vec<_>>());
                b.push(q(lp.rhs[c]));
            } else {
                let (v, bound) = if c < m + n {
                    (c - m, lp.lb[c - m])
                } else {
                    (c - m - n, lp.ub[c - m - n])
                };
                let mut row = vec![Q::zero(); n];
                row[v] = q(1);
                a.push(row);
                b.push(q(bound));
            }
        }
        if let Some(x) = solve_square(a, b) {
            let feasible = (0..n).all(|v| x[v] >= q(lp.lb[v]) && x[v] <= q(lp.ub[v]))
                && (0..m).all(|i| {
                    let lhs: Q = lp.a[i].iter().zip(&x).map(|(&c, xv)| q(c) * xv).sum();
                    match lp.op[i] {
                        ConstraintOp::Le => lhs <= q(lp.rhs[i]),
                        ConstraintOp::Ge => lhs >= q(lp.rhs[i]),
                        ConstraintOp::Eq => lhs == q(lp.rhs[i]),
                    }
                });
            if feasible {
                let val: Q = lp.obj.iter().zip(&x).map(|(&c, xv)| q(c) * xv).sum();
                if best.as_ref().map_or(true, |b| val < *b) {
                    best = Some(val);
                }
            }
        }
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if combo[i] < total - (n - i) {
                combo[i] += 1;
                for j in i + 1..n {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Draws a random feasible LP: an integer point is sampled inside the
/// box first and every row's right-hand side is offset from it, so the
/// instance is feasible (and bounded) by construction.
fn random_general_lp(rng: &mut ChaCha8Rng) -> GeneralLp {
    let n = rng.gen_range(2..=4usize);
    let m = rng.gen_range(1..=4usize);
    let lb: Vec<i64> = (0..n).map(|_| rng.gen_range(-1..=2)).collect();
    let ub: Vec<i64> = (0..n).map(|v| lb[v] + rng.gen_range(0..=4)).collect();
    let x0: Vec<i64> = (0..n).map(|v| rng.gen_range(lb[v]..=ub[v])).collect();
    let a: Vec<Vec<i64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.gen_range(-4..=4)).collect())
        .collect();
    let op: Vec<ConstraintOp> = (0..m)
        .map(|_| match rng.gen_range(0..3) {
            0 => ConstraintOp::Le,
            1 => ConstraintOp::Ge,
            _ => ConstraintOp::Eq,
        })
        .collect();
    let rhs: Vec<i64> = (0..m)
        .map(|i| {
            let dot: i64 = a[i].iter().zip(&x0).map(|(&c, &x)| c * x).sum();
            match op[i] {
                ConstraintOp::Le => dot + rng.gen_range(0..=3),
                ConstraintOp::Ge => dot - rng.gen_range(0..=3),
                ConstraintOp::Eq => dot,
            }
        })
        .collect();
    let obj: Vec<i64> = (0..n).map(|_| rng.gen_range(-5..=5)).collect();
    GeneralLp { n, a, op, rhs, lb, ub, obj }
}

fn build_general(lp: &GeneralLp, kind: VarKind) -> MilpModel {
    let mut model = MilpModel::new();
    let vars: Vec<_> = (0..lp.n)
        .map(|v| {
            model
                .add_var(&format!("x{v}"), kind, lp.lb[v] as f64, lp.ub[v] as f64)
                .unwrap()
        })
        .collect();
    for i in 0..lp.a.len() {
        model
            .add_constraint(
                &format!("c{i}"),
                vars.iter().zip(&lp.a[i]).map(|(&v, &c)| (v, c as f64)).collect(),
                lp.op[i],
                lp.rhs[i] as f64,
            )
            .unwrap();
    }
    model
        .set_objective(vars.iter().zip(&lp.obj).map(|(&v, &c)| (v, c as f64)).collect())
        .unwrap();
    model.seal();
    model
}

/// Mixed Le/Ge/Eq rows and nonzero (also negative) variable bounds —
/// the bound shapes branch-and-bound hands to node LPs.
#[test]
fn random_general_lps_match_rational_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x57E55);
    for case in 0..400 {
        let lp = random_general_lp(&mut rng);
        let model = build_general(&lp, VarKind::Continuous);
        let sol = model
            .solve(&SolveOptions {
                integer_mode: Some(IntegerMode::Relaxed),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(sol.status, SolveStatus::RelaxationOnly, "case {case}");
        model.validate(&sol.values).unwrap();
        let exact = oracle_optimum_general(&lp).expect("feasible by construction");
        let exact_f = *exact.numer() as f64 / *exact.denom() as f64;
        assert!(
            (sol.objective_value - exact_f).abs() < 1e-6,
            "case {case}: simplex {} vs oracle {}",
            sol.objective_value,
            exact_f
        );
    }
}

/// All-integer programs checked against brute-force enumeration of every
/// lattice point in the box. Exercises general-integer branching and the
/// frontier ordering (a worst-first heap regression once terminated on a
/// suboptimal incumbent here).
#[test]
fn random_integer_programs_match_lattice_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1A77);
    for case in 0..200 {
        let lp = random_general_lp(&mut rng);
        let mut best: Option<i64> = None;
        let mut x = lp.lb.clone();
        'enumerate: loop {
            let feasible = (0..lp.a.len()).all(|i| {
                let dot: i64 = lp.a[i].iter().zip(&x).map(|(&c, &v)| c * v).sum();
                match lp.op[i] {
                    ConstraintOp::Le => dot <= lp.rhs[i],
                    ConstraintOp::Ge => dot >= lp.rhs[i],
                    ConstraintOp::Eq => dot == lp.rhs[i],
                }
            });
            if feasible {
                let val: i64 = lp.obj.iter().zip(&x).map(|(&c, &v)| c * v).sum();
                if best.map_or(true, |b| val < b) {
                    best = Some(val);
                }
            }
            for v in 0..lp.n {
                if x[v] < lp.ub[v] {
                    x[v] += 1;
                    continue 'enumerate;
                }
                x[v] = lp.lb[v];
            }
            break;
        }

        let model = build_general(&lp, VarKind::Integer);
        let sol = model.solve(&SolveOptions::default()).unwrap();
        let best = best.expect("lattice point feasible by construction");
        assert_eq!(sol.status, SolveStatus::Optimal, "case {case}");
        assert!(
            (sol.objective_value - best as f64).abs() < 1e-6,
            "case {case}: b&b {} vs enumeration {best}",
            sol.objective_value,
        );
        model.validate(&sol.values).unwrap();
    }
}
