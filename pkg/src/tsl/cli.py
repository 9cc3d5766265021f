"""Command-line front end.

Exit codes: 0 ok, 2 usage or parse error, 3 validation/domain error,
4 completeness warning, 5 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import charfun as cf
from . import solutions as sol
from .asymptotics import decay_report, eigenfunction_leading
from .errors import CompletenessMismatch, DegenerateLeadingCoefficient, TSLError, ValidationError
from .integrate import IntegratorOptions
from .model import ProblemSpec, classify_case, compute_determinants, validate

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_INCOMPLETE, EXIT_VERIFY = 0, 2, 3, 4, 5


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    input: str
    output: Optional[str] = None
    rel_tol: float = 1e-11
    abs_tol: float = 1e-13
    permissive: bool = False
    threads: int = 1
    extra: dict = field(default_factory=dict)

    @property
    def opts(self) -> IntegratorOptions:
        return IntegratorOptions(rel_tol=self.rel_tol, abs_tol=self.abs_tol)


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.12g}"


@contextmanager
def _sink(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _write_csv(cfg: RunConfig, header, rows):
    with _sink(cfg.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def _load(cfg: RunConfig) -> tuple[ProblemSpec, list[str]]:
    try:
        with open(cfg.input) as fh:
            data = json.load(fh)
        spec = ProblemSpec.from_dict(data)
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"cannot read problem file {cfg.input!r}: {exc}") from exc
    warnings = validate(spec, strict=not cfg.permissive)
    for msg in warnings:
        print(f"warning: {msg}", file=sys.stderr)
    return spec, warnings


# ---------------------------------------------------------------------------
# commands


def cmd_validate(cfg: RunConfig) -> int:
    spec, warnings = _load(cfg)
    d = compute_determinants(spec)
    print(f"case: {classify_case(spec)}")
    for k, v in d.as_dict().items():
        print(f"{k}: {fmt(v)}")
    print(f"plucker: {fmt(d.plucker)}")
    print("status: ok" + (" (with warnings)" if warnings else ""))
    return EXIT_OK


def _labels(spec, eigs):
    from .spectrum import asymptotic_seeds, has_seeds, label_branches
    if not has_seeds(spec) or not eigs:
        return eigs, []
    top = max(e.s for e in eigs)
    n_top = int(top * max(spec.left_length, spec.right_length) / math.pi) + 3
    seeds = asymptotic_seeds(spec, 0, n_top)
    return label_branches(eigs, seeds), seeds


def cmd_solve(cfg: RunConfig) -> int:
    from .spectrum import eigenvalues
    count = cfg.extra["count"]
    if count < 1:
        raise UsageError("--count must be >= 1")
    spec, _ = _load(cfg)
    code, flag = EXIT_OK, None
    try:
        eigs = eigenvalues(spec, count, cfg.opts, threads=cfg.threads)
    except CompletenessMismatch as exc:
        print(f"completeness: {exc}", file=sys.stderr)
        eigs, code, flag = exc.eigenpairs, EXIT_INCOMPLETE, "incomplete"
    eigs, _ = _labels(spec, eigs)
    header = ["n", "branch", "lambda", "s", "residual", "bracket_lo", "bracket_hi"]
    rows = []
    for i, e in enumerate(eigs, start=1):
        s = f"{e.s:.12g}j" if e.s_is_imaginary else e.s
        rows.append([i, e.branch, e.lam, s, e.residual, e.bracket[0], e.bracket[1]])
    if flag:
        header.append("flag")
        rows = [r + [flag] for r in rows]
    _write_csv(cfg, header, rows)
    return code


def cmd_charfun(cfg: RunConfig) -> int:
    lo, hi, step = cfg.extra["lambda_min"], cfg.extra["lambda_max"], cfg.extra["step"]
    if not step > 0 or hi < lo:
        raise UsageError("need step > 0 and lambda_max >= lambda_min")
    spec, _ = _load(cfg)
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    lams = lo + step * np.arange(n)
    w = cf.omega_many(spec, lams, cfg.opts, "via_psi_at_a", threads=cfg.threads)
    _write_csv(cfg, ["lambda", "w"], zip(lams, w))
    return EXIT_OK


def cmd_eigenfunction(cfg: RunConfig) -> int:
    from .spectrum import eigenfunction, eigenvalues
    index, n_samples = cfg.extra["index"], cfg.extra["n_samples"]
    if index < 1 or n_samples < 2:
        raise UsageError("need --index >= 1 and --n-samples >= 2")
    spec, _ = _load(cfg)
    if index > cfg.extra["max_index"]:
        print(f"error: index {index} beyond the computed spectrum", file=sys.stderr)
        return EXIT_DOMAIN
    eigs = eigenvalues(spec, index, cfg.opts, threads=cfg.threads)
    eigs, seeds = _labels(spec, eigs)
    eig = eigs[index - 1]
    ef = eigenfunction(spec, eig, cfg.opts)
    seed = None
    if eig.branch is not None:
        seed = next(sd for sd in seeds if sd.n == eig.n_index and sd.branch == eig.branch)
    header = ["x", "side", "y", "yp"] + (["y_asym"] if seeds else [])
    rows = []
    for side, x0, x1 in (("left", spec.a, spec.c), ("right", spec.c, spec.b)):
        xs = np.linspace(x0, x1, n_samples)
        y, yp = ef.sample(xs, side)
        asym = (eigenfunction_leading(spec, seed, xs, side) if seed is not None
                else [None] * len(xs))
        for x, a, b, z in zip(xs, y, yp, asym):
            row = [x, side, float(np.real(a)), float(np.real(b))]
            if seeds:
                row.append(None if z is None else float(z))
            rows.append(row)
    _write_csv(cfg, header, rows)
    return EXIT_OK


def cmd_asymptotics(cfg: RunConfig) -> int:
    n_min, n_max = cfg.extra["n_min"], cfg.extra["n_max"]
    if n_min > n_max:
        raise UsageError("--n-min must not exceed --n-max")
    spec, _ = _load(cfg)
    try:
        rows = decay_report(spec, n_min, n_max, cfg.opts, threads=cfg.threads)
    except DegenerateLeadingCoefficient as exc:
        print(f"error: {exc}; the transmission matrix has d24 = 0, so the asymptotic "
              "eigenvalue formulas carry no information", file=sys.stderr)
        return EXIT_DOMAIN
    _write_csv(cfg, ["n", "branch", "s_computed", "s_pred", "err", "n_times_err"],
               [(r.n, r.branch, r.s_computed, r.s_pred, r.err, r.n_times_err) for r in rows])
    return EXIT_OK


def verify_checks(spec: ProblemSpec, level: str, opts: IntegratorOptions, threads: int = 1):
    """Yield ``(name, passed, detail)`` for each self-consistency check."""
    rng = np.random.default_rng(12345)
    d = compute_determinants(spec)
    lams = [1.0, 10.0, 100.0]
    xl = np.linspace(spec.a, spec.c, 7)[:-1] + 0.5 * (spec.c - spec.a) / 6
    xr = np.linspace(spec.c, spec.b, 7)[1:] - 0.5 * (spec.b - spec.c) / 6

    spread = 0.0
    prop = 0.0
    for lam in lams:
        ph, ps = sol.phi(spec, lam, opts), sol.psi(spec, lam, opts)
        wl = cf.wronskian(ph, ps, xl, "left")
        wr = cf.wronskian(ph, ps, xr, "right")
        for w in (wl, wr):
            spread = max(spread, float(np.ptp(w) / max(np.max(np.abs(w)), 1e-300)))
        w1, w2 = d.d34 * wl[0], d.d12 * wr[0]
        prop = max(prop, abs(w1 - w2) / max(abs(w1), 1e-300))
    yield "wronskian_x_independence", spread < 1e-8, f"max relative spread {spread:.3g}"
    yield "proportionality", prop < 1e-8, f"max relative mismatch {prop:.3g}"

    paths = 0.0
    for lam in lams + [0.0]:
        a_ = cf.charfun_via_boundary(spec, lam, opts, "A")
        b_ = cf.charfun_via_boundary(spec, lam, opts, "B")
        m_ = cf.charfun_sample(spec, lam, "via_wronskian_midpoint", opts).w
        scale = max(abs(a_), abs(b_), 1e-300)
        paths = max(paths, abs(a_ - b_) / scale, abs(a_ - m_) / scale)
    yield "charfun_paths", paths < 1e-8, f"max relative disagreement {paths:.3g}"

    res = 0.0
    for lam in lams:
        ph, ps = sol.phi(spec, lam, opts), sol.psi(spec, lam, opts)
        for which, s_, xs in (("phi1", ph, xl), ("phi2", ph, xr), ("psi1", ps, xl),
                              ("psi2", ps, xr)):
            for k in (0, 1):
                res = max(res, sol.integral_residual(spec, s_, which, k, xs))
    yield "integral_residuals", res < 1e-6, f"max residual {res:.3g}"

    pic = 0.0
    for lam in (1.0, 10.0, 50.0):
        tr = sol.picard_phi2(spec, lam, 25, opts=opts)
        ph = sol.phi(spec, lam, opts)
        pic = max(pic, abs(tr.y[-1] - ph.right.y[-1]) / max(1.0, abs(ph.right.y[-1])))
    yield "picard_vs_shooting", pic < 1e-6, f"max difference at b {pic:.3g}"

    rt = 0.0
    for _ in range(20):
        v = rng.normal(size=2)
        fwd = sol.transmission_forward(d, spec.beta, v)
        back = sol.transmission_backward(d, spec.beta, fwd)
        rt = max(rt, float(np.max(np.abs(np.array(back) - v))),
                 float(np.max(np.abs(sol.transmission_residuals(spec.beta, v, fwd)))))
    yield "transmission_round_trip", rt < 1e-12, f"max error {rt:.3g}"

    if level == "full":
        from .spectrum import eigenvalues
        try:
            scan = eigenvalues(spec, 10, opts, threads=threads, return_scan=True)
            ok = True
            detail = (f"winding number {scan.counted} on [{scan.lam_lo:.6g}, {scan.lam_hi:.6g}]"
                      f" matches the scan")
        except CompletenessMismatch as exc:
            ok, detail = False, str(exc)
        yield "argument_principle_completeness", ok, detail


def cmd_verify(cfg: RunConfig) -> int:
    spec, _ = _load(cfg)
    t0 = time.perf_counter()
    all_ok = True
    with _sink(cfg.output) as fh:
        for name, ok, detail in verify_checks(spec, cfg.extra["level"], cfg.opts, cfg.threads):
            all_ok &= bool(ok)
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}", file=fh)
        print(f"elapsed {time.perf_counter() - t0:.2f}s", file=fh)
    return EXIT_OK if all_ok else EXIT_VERIFY


COMMANDS = {
    "validate": cmd_validate,
    "solve": cmd_solve,
    "charfun": cmd_charfun,
    "eigenfunction": cmd_eigenfunction,
    "asymptotics": cmd_asymptotics,
    "verify": cmd_verify,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", "-i", required=True, help="problem JSON file")
    common.add_argument("--output", "-o", default=None, help="output path (default stdout)")
    common.add_argument("--rel-tol", type=float, default=1e-11)
    common.add_argument("--abs-tol", type=float, default=1e-13)
    common.add_argument("--permissive", action="store_true",
                        help="downgrade positivity violations to warnings")
    common.add_argument("--threads", type=int, default=cf.default_threads(),
                        help="worker threads (default: $TSL_THREADS or 1)")

    p = _Parser(prog="tsl", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("validate", parents=[common], help="check a problem file")
    s = sub.add_parser("solve", parents=[common], help="lowest eigenvalues as CSV")
    s.add_argument("--count", type=int, default=10)
    s = sub.add_parser("charfun", parents=[common], help="sample the characteristic function")
    s.add_argument("--lambda-min", type=float, required=True)
    s.add_argument("--lambda-max", type=float, required=True)
    s.add_argument("--step", type=float, required=True)
    s = sub.add_parser("eigenfunction", parents=[common], help="sample one eigenfunction")
    s.add_argument("--index", type=int, required=True, help="1-based, ascending in lambda")
    s.add_argument("--n-samples", type=int, default=101, help="samples per piece")
    s.add_argument("--max-index", type=int, default=500)
    s = sub.add_parser("asymptotics", parents=[common], help="eigenvalue decay table")
    s.add_argument("--n-min", type=int, default=10)
    s.add_argument("--n-max", type=int, default=30)
    s = sub.add_parser("verify", parents=[common], help="run the self-consistency checks")
    s.add_argument("--level", choices=("fast", "full"), default="fast")
    return p


def parse_config(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    base = {"command", "input", "output", "rel_tol", "abs_tol", "permissive", "threads"}
    extra = {k: v for k, v in vars(ns).items() if k not in base}
    if ns.threads < 1:
        raise UsageError("--threads must be >= 1")
    return RunConfig(ns.command, ns.input, ns.output, ns.rel_tol, ns.abs_tol,
                     ns.permissive, ns.threads, extra)


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"invalid problem: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except TSLError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
