#!/usr/bin/env python3
"""Solve an LP-format model with SciPy's HiGHS backend.

Reads the LP files written by `spatel export-lp` (sections: Minimize,
Subject To, Bounds, Binaries, Generals, End) and writes a solution file
of `name value` lines that `spatel import-sol` accepts.

Usage: solve_lp.py MODEL.lp SOLUTION.sol [--time-limit S] [--gap G]
"""

import argparse
import sys

import numpy as np
from scipy import sparse
from scipy.optimize import LinearConstraint, milp


def parse_expr(tokens):
    """`[+|-] coef name ...` token stream -> {name: coef}."""
    coefs = {}
    sign = 1.0
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok == "+":
            sign = 1.0
            i += 1
        elif tok == "-":
            sign = -1.0
            i += 1
        else:
            coef = float(tok)
            name = tokens[i + 1]
            coefs[name] = coefs.get(name, 0.0) + sign * coef
            sign = 1.0
            i += 2
    return coefs


def parse_lp(text):
    objective = {}
    constraints = []  # (name, coefs, op, rhs)
    bounds = {}  # name -> (lb, ub)
    binaries = set()
    generals = set()

    section = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        lower = line.lower()
        if lower in ("minimize", "subject to", "bounds", "binaries", "generals", "end"):
            section = lower
            continue
        if section == "minimize":
            body = line.split(":", 1)[1] if ":" in line else line
            for name, coef in parse_expr(body.split()).items():
                objective[name] = objective.get(name, 0.0) + coef
        elif section == "subject to":
            cname, body = line.split(":", 1)
            for op in ("<=", ">=", "="):
                if f" {op} " in body:
                    expr, rhs = body.rsplit(f" {op} ", 1)
                    constraints.append((cname.strip(), parse_expr(expr.split()), op, float(rhs)))
                    break
            else:
                raise ValueError(f"constraint without operator: {line}")
        elif section == "bounds":
            lb, _, name, _, ub = line.split()
            bounds[name] = (float(lb.replace("inf", "inf")), float(ub))
        elif section == "binaries":
            binaries.add(line)
        elif section == "generals":
            generals.add(line)
    return objective, constraints, bounds, binaries, generals


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("model")
    ap.add_argument("solution")
    ap.add_argument("--time-limit", type=float, default=None)
    ap.add_argument("--gap", type=float, default=None, help="relative MIP gap, e.g. 0.5")
    args = ap.parse_args()

    with open(args.model) as f:
        objective, constraints, bounds, binaries, generals = parse_lp(f.read())

    names = []
    seen = set()
    for source in (objective, *(c[1] for c in constraints), bounds, binaries, generals):
        for name in source:
            if name not in seen:
                seen.add(name)
                names.append(name)
    index = {name: i for i, name in enumerate(names)}
    n = len(names)

    c = np.zeros(n)
    for name, coef in objective.items():
        c[index[name]] = coef

    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    for name, (lo, hi) in bounds.items():
        lb[index[name]] = lo
        ub[index[name]] = hi
    for name in binaries:
        lb[index[name]] = max(lb[index[name]], 0.0)
        ub[index[name]] = min(ub[index[name]], 1.0)

    integrality = np.zeros(n)
    for name in binaries | generals:
        integrality[index[name]] = 1

    rows, cols, vals = [], [], []
    c_lb = np.empty(len(constraints))
    c_ub = np.empty(len(constraints))
    for r, (_, coefs, op, rhs) in enumerate(constraints):
        for name, coef in coefs.items():
            rows.append(r)
            cols.append(index[name])
            vals.append(coef)
        c_lb[r] = rhs if op in (">=", "=") else -np.inf
        c_ub[r] = rhs if op in ("<=", "=") else np.inf
    a = sparse.csr_matrix((vals, (rows, cols)), shape=(len(constraints), n))

    options = {}
    if args.time_limit is not None:
        options["time_limit"] = args.time_limit
    if args.gap is not None:
        options["mip_rel_gap"] = args.gap
    res = milp(
        c=c,
        constraints=LinearConstraint(a, c_lb, c_ub),
        integrality=integrality,
        bounds=(lb, ub),
        options=options,
    )
    if res.x is None:
        print(f"no solution: {res.message}", file=sys.stderr)
        return 1

    with open(args.solution, "w") as f:
        for name in names:
            v = res.x[index[name]]
            if integrality[index[name]]:
                v = round(v)
            f.write(f"{name} {v:.12g}\n")
    print(f"status: {res.message}")
    print(f"objective: {res.fun}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
