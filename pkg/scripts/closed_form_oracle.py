"""Independent eigenvalue oracle for problems with q = 0 on both pieces.

With q = 0 every solution is a combination of cos and sin, so the boundary
functional at b can be written in closed form.  The roots are bracketed on
a dense uniform lam grid and bisected.  Nothing from the package is imported
except for reading the problem file format by hand.

    python3 scripts/closed_form_oracle.py problems/p2.json --lo -10 --hi 200 \
        --step 1e-3 --out tests/data/p2_oracle.csv
"""

import argparse
import csv
import json

import numpy as np


def boundary_functional(p, lam):
    """tau2 applied to the solution satisfying the left condition, as an
    array function of lam (real), continued across c by a direct solve."""
    lam = np.asarray(lam, dtype=complex)
    s = np.sqrt(lam)
    s = np.where(s == 0, 1e-300, s)
    al = p["alpha"]
    a, c, b = p["a"], p["c"], p["b"]
    y0, p0 = al["a11"], -al["a10"]
    L = c - a
    ym = y0 * np.cos(s * L) + p0 * np.sin(s * L) / s
    pm = -y0 * s * np.sin(s * L) + p0 * np.cos(s * L)
    beta = np.array(p["beta"], dtype=float)
    minus, plus = beta[:, :2], beta[:, 2:]
    rhs = -(minus @ np.vstack([ym, pm]))
    yp_, pp_ = np.linalg.solve(plus, rhs)
    R = b - c
    yb = yp_ * np.cos(s * R) + pp_ * np.sin(s * R) / s
    pb = -yp_ * s * np.sin(s * R) + pp_ * np.cos(s * R)
    tau = al["a20"] * yb - al["a21"] * pb + lam * (al["a20p"] * yb - al["a21p"] * pb)
    return tau.real


def roots(p, lo, hi, step, tol=1e-12):
    n = int(np.floor((hi - lo) / step)) + 1
    grid = lo + step * np.arange(n)
    f = boundary_functional(p, grid)
    out = []
    for i in np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) <= 0)[0]:
        u, v, fu = grid[i], grid[i + 1], f[i]
        if fu == 0:
            out.append(u)
            continue
        while v - u > tol * max(1.0, abs(u)):
            m = 0.5 * (u + v)
            fm = boundary_functional(p, [m])[0]
            if np.sign(fm) == np.sign(fu):
                u, fu = m, fm
            else:
                v = m
        out.append(0.5 * (u + v))
    return sorted(set(np.round(out, 13)))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("problem")
    ap.add_argument("--lo", type=float, default=-10.0)
    ap.add_argument("--hi", type=float, default=200.0)
    ap.add_argument("--step", type=float, default=1e-3)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    with open(args.problem) as fh:
        p = json.load(fh)
    for side in ("left", "right"):
        if any(v != 0 for v in p.get("q", {}).get(side, [0.0])):
            raise SystemExit("oracle requires q = 0")
    rs = roots(p, args.lo, args.hi, args.step)
    rows = [(i + 1, f"{r:.15g}") for i, r in enumerate(rs)]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "lambda"])
            w.writerows(rows)
    for i, r in rows:
        print(i, r)


if __name__ == "__main__":
    main()
