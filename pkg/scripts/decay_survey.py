"""How uniform is the O(1/n) eigenvalue error across piece geometries?

For each case tag and each right-piece length, tabulates per branch the
ratio max(n*err) / median(n*err) over n = n_min..n_max, plus the n where the
maximum occurs.  Ratios above 2 fail the boundedness test.

    python3 scripts/decay_survey.py --n-min 10 --n-max 30
"""

import argparse
import math
import time

import numpy as np

from tsl import load_problem
from tsl.asymptotics import decay_report

GEOMETRIES = {"equal": 2.0, "3:2": 2.5, "sqrt2": 1.0 + math.sqrt(2.0)}


def survey(base_dir, n_min, n_max, geometries):
    print(f"{'case':<5}{'geometry':<9}{'branch':>7}{'max/med':>9}{'argmax n':>9}{'secs':>7}")
    for tag in ("i", "ii", "iii", "iv"):
        base = load_problem(f"{base_dir}/case_{tag}.json")
        for gname, b in geometries.items():
            spec = base.replace(b=b)
            t0 = time.perf_counter()
            rows = decay_report(spec, n_min, n_max)
            dt = time.perf_counter() - t0
            for br in (1, 2):
                sel = [r for r in rows if r.branch == br]
                v = np.array([r.n_times_err for r in sel])
                k = int(np.argmax(v))
                print(f"{tag:<5}{gname:<9}{br:>7}{v.max() / np.median(v):>9.2f}"
                      f"{sel[k].n:>9}{dt:>7.1f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--problems", default="problems")
    ap.add_argument("--n-min", type=int, default=10)
    ap.add_argument("--n-max", type=int, default=30)
    ap.add_argument("--geometry", choices=sorted(GEOMETRIES), action="append")
    args = ap.parse_args()
    geos = {g: GEOMETRIES[g] for g in (args.geometry or GEOMETRIES)}
    survey(args.problems, args.n_min, args.n_max, geos)


if __name__ == "__main__":
    main()
