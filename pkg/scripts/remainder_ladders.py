"""Remainder-to-order ratios of the leading asymptotic terms along
s = {10, 20, 40, 80} + pi/7, for all four case combinations.

    python3 scripts/remainder_ladders.py problems/case_i.json
"""

import argparse

import numpy as np

from tsl import load_problem
from tsl.asymptotics import charfun_ladder, solution_ladder

CASES = {"i": (None, None), "ii": (0.0, None), "iii": (None, 0.0), "iv": (0.0, 0.0)}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("problem", help="base problem; a11 / a21p are zeroed per case")
    ap.add_argument("--points", type=int, default=11, help="x samples per piece")
    args = ap.parse_args()
    base = load_problem(args.problem)
    print(f"{'case':<5}{'what':<7}{'side':<6}{'k':>2}{'order':>6}  ratios")
    for tag, (a11, p1) in CASES.items():
        spec = base.replace(alpha11=base.alpha11 if a11 is None else a11,
                            alpha21p=base.alpha21p if p1 is None else p1)
        for side, (lo, hi) in (("left", (spec.a, spec.c)), ("right", (spec.c, spec.b))):
            xs = np.linspace(lo, hi, args.points)
            for which in ("phi", "psi"):
                for k in (0, 1):
                    rows = solution_ladder(spec, which, k, side, xs)
                    r = " ".join(f"{row.ratio:10.4g}" for row in rows)
                    print(f"{tag:<5}{which:<7}{side:<6}{k:>2}{rows[0].order:>6}  {r}")
        rows = charfun_ladder(spec)
        r = " ".join(f"{row.ratio:10.4g}" for row in rows)
        print(f"{tag:<5}{'omega':<7}{'-':<6}{0:>2}{rows[0].order:>6}  {r}")


if __name__ == "__main__":
    main()
