"""Leading-order asymptotics of phi, psi, omega and the eigenvalues, and tools
to measure how fast the computed quantities approach them.

All evaluators take real ``s = sqrt(lam) > 0``.  Remainder orders returned by
:func:`phi_order` / :func:`psi_order` / :func:`charfun_order` are the powers
of s that bound ``|computed - leading|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .charfun import omega_many
from .errors import DegenerateLeadingCoefficient
from .integrate import DEFAULT_OPTIONS, IntegratorOptions
from .model import CaseTag, ProblemSpec, classify_case, compute_determinants
from .solutions import phi, psi
from .spectrum import (AsymptoticSeed, Eigenpair, asymptotic_seeds, eigenvalues_in_range,
                       has_seeds, label_branches, lambda_floor)


def _side(spec: ProblemSpec, x: float, side: str | None) -> str:
    if side is not None:
        return side
    if x == spec.c:
        raise ValueError("x = c needs an explicit side")
    return "left" if x < spec.c else "right"


def _nonzero(v, scale, tol=1e-12):
    return abs(v) > tol * max(scale, 1e-300)


def phi_leading(spec: ProblemSpec, lam: float, x, k: int = 0, side: str | None = None,
                zero_tol: float = 1e-12):
    s = math.sqrt(lam)
    a, c = spec.a, spec.c
    d = compute_determinants(spec)
    x = np.asarray(x, dtype=float)
    side = _side(spec, float(np.ravel(x)[0]), side)
    a10, a11 = spec.alpha10, spec.alpha11
    robin = _nonzero(a11, max(abs(a10), abs(a11)), zero_tol)
    if side == "left":
        u = s * (x - a)
        if robin:
            return a11 * np.cos(u) if k == 0 else -a11 * s * np.sin(u)
        return -a10 * np.sin(u) / s if k == 0 else -a10 * np.cos(u)
    amp = -(d.d24 / d.d12) * (a11 * s * math.sin(s * (c - a)) if robin
                              else a10 * math.cos(s * (c - a)))
    u = s * (x - c)
    return amp * np.cos(u) if k == 0 else -amp * s * np.sin(u)


def phi_order(spec: ProblemSpec, k: int, side: str, zero_tol: float = 1e-12) -> int:
    robin = _nonzero(spec.alpha11, max(abs(spec.alpha10), abs(spec.alpha11)), zero_tol)
    base = (k - 1 if robin else k - 2)
    return base + (1 if side == "right" else 0)


def psi_leading(spec: ProblemSpec, lam: float, x, k: int = 0, side: str | None = None,
                zero_tol: float = 1e-12):
    s = math.sqrt(lam)
    c, b = spec.c, spec.b
    d = compute_determinants(spec)
    x = np.asarray(x, dtype=float)
    side = _side(spec, float(np.ravel(x)[0]), side)
    p0, p1 = spec.alpha20p, spec.alpha21p
    full = _nonzero(p1, max(abs(spec.alpha20), abs(spec.alpha21), abs(p0), abs(p1)), zero_tol)
    if side == "right":
        u = s * (b - x)
        if full:
            return p1 * s ** 2 * np.cos(u) if k == 0 else p1 * s ** 3 * np.sin(u)
        return -p0 * s * np.sin(u) if k == 0 else p0 * s ** 2 * np.cos(u)
    amp = -(d.d24 / d.d34) * (p1 * s ** 3 * math.sin(s * (b - c)) if full
                              else p0 * s ** 2 * math.cos(s * (b - c)))
    u = s * (x - c)
    return amp * np.cos(u) if k == 0 else -amp * s * np.sin(u)


def psi_order(spec: ProblemSpec, k: int, side: str, zero_tol: float = 1e-12) -> int:
    p1 = spec.alpha21p
    full = _nonzero(p1, max(abs(spec.alpha20), abs(spec.alpha21), abs(spec.alpha20p), abs(p1)),
                    zero_tol)
    base = k + 1 if full else k
    return base + (1 if side == "left" else 0)


_CHAR_ORDER = {CaseTag.I: 4, CaseTag.II: 3, CaseTag.III: 3, CaseTag.IV: 2}


def charfun_order(spec: ProblemSpec, zero_tol: float = 1e-12) -> int:
    """Power of s in the leading term of omega."""
    return _CHAR_ORDER[classify_case(spec, zero_tol)]


def charfun_leading(spec: ProblemSpec, lam: float, zero_tol: float = 1e-12) -> float:
    s = math.sqrt(lam)
    d = compute_determinants(spec)
    r, l = s * (spec.b - spec.c), s * (spec.a - spec.c)
    case = classify_case(spec, zero_tol)
    a10, a11, p0, p1 = spec.alpha10, spec.alpha11, spec.alpha20p, spec.alpha21p
    if case is CaseTag.I:
        return d.d24 * a11 * p1 * s ** 4 * math.sin(r) * math.sin(l)
    if case is CaseTag.II:
        return -d.d24 * a10 * p1 * s ** 3 * math.sin(r) * math.cos(l)
    if case is CaseTag.III:
        return d.d24 * a11 * p0 * s ** 3 * math.cos(r) * math.sin(l)
    return -d.d24 * a10 * p0 * s ** 2 * math.cos(r) * math.cos(l)


def eigenfunction_leading(spec: ProblemSpec, seed: AsymptoticSeed, x, side: str | None = None):
    """Leading-order eigenfunction: phi's leading term evaluated at the seed."""
    return phi_leading(spec, seed.s_pred ** 2, x, 0, side)


# ---------------------------------------------------------------------------
# remainder ladders


def ladder_points(base=(10.0, 20.0, 40.0, 80.0), offset: float = math.pi / 7) -> np.ndarray:
    return np.asarray(base) + offset


def bounded_by_median(values, factor: float = 2.0) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.isfinite(v)) and v.max() <= factor * np.median(v))


@dataclass(frozen=True)
class LadderRow:
    which: str
    side: str
    k: int
    s: float
    remainder: float
    order: int
    ratio: float


def solution_ladder(spec: ProblemSpec, which: str, k: int, side: str, xs,
                    s_values=None, opts: IntegratorOptions = DEFAULT_OPTIONS) -> list[LadderRow]:
    """``max_x |computed - leading| / s**order`` along the s ladder."""
    s_values = ladder_points() if s_values is None else s_values
    lead_fn, order_fn, build = ((phi_leading, phi_order, phi) if which == "phi"
                                else (psi_leading, psi_order, psi))
    order = order_fn(spec, k, side)
    rows = []
    for s in s_values:
        lam = float(s) ** 2
        y, yp = build(spec, lam, opts).sample(xs, side)
        comp = y if k == 0 else yp
        rem = float(np.max(np.abs(comp - lead_fn(spec, lam, xs, k, side))))
        rows.append(LadderRow(which, side, k, float(s), rem, order, rem / s ** order))
    return rows


def charfun_ladder(spec: ProblemSpec, s_values=None,
                   opts: IntegratorOptions = DEFAULT_OPTIONS) -> list[LadderRow]:
    s_values = ladder_points() if s_values is None else s_values
    order = charfun_order(spec) - 1
    lams = np.asarray(s_values, float) ** 2
    w = omega_many(spec, lams, opts, "via_psi_at_a")
    rows = []
    for s, lam, wv in zip(s_values, lams, w):
        rem = abs(wv - charfun_leading(spec, lam))
        rows.append(LadderRow("omega", "-", 0, float(s), rem, order, rem / s ** order))
    return rows


# ---------------------------------------------------------------------------
# eigenvalue decay


@dataclass(frozen=True)
class DecayRow:
    n: int
    branch: int
    s_computed: float
    s_pred: float
    err: float
    n_times_err: float


def decay_rows(pairs) -> list[DecayRow]:
    """Rows from ``(n, branch, s_computed, s_pred)`` tuples."""
    out = []
    for n, br, sc, sp in pairs:
        err = abs(sc - sp)
        out.append(DecayRow(int(n), int(br), float(sc), float(sp), err, n * err))
    return out


def decay_report(spec: ProblemSpec, n_min: int, n_max: int,
                 opts: IntegratorOptions = DEFAULT_OPTIONS, convention: str = "consistent",
                 eigs: list[Eigenpair] | None = None, threads: int | None = None,
                 check_completeness: bool = True) -> list[DecayRow]:
    """Pair seeds for ``n_min..n_max`` with computed eigenvalues and tabulate
    ``n * |s_computed - s_pred|``.

    Seeds are matched one-to-one greedily by distance in s, with no window.
    """
    if not has_seeds(spec):
        raise DegenerateLeadingCoefficient("d24 = 0: no asymptotic eigenvalue formulas")
    if n_min > n_max:
        raise ValueError("n_min > n_max")
    seeds = asymptotic_seeds(spec, n_min, n_max, convention=convention)
    if eigs is None:
        spacing = math.pi / max(spec.left_length, spec.right_length)
        top = (max(sd.s_pred for sd in seeds) + 2 * spacing) ** 2
        bottom = max(lambda_floor(spec), (max(0.0, min(sd.s_pred for sd in seeds) - 2 * spacing)) ** 2)
        eigs = eigenvalues_in_range(spec, bottom, top, opts, threads=threads,
                                    check_completeness=check_completeness)
    labeled = label_branches(eigs, seeds, window=math.inf)
    by_seed = {(e.n_index, e.branch): e for e in labeled if e.branch is not None}
    pairs = []
    for sd in seeds:
        e = by_seed.get((sd.n, sd.branch))
        if e is not None:
            pairs.append((sd.n, sd.branch, e.s, sd.s_pred))
    return sorted(decay_rows(pairs), key=lambda r: (r.branch, r.n))


def decay_bounded(rows: list[DecayRow], n_from: int | None = None, factor: float = 2.0) -> dict:
    """Per-branch check that ``max n*err <= factor * median`` over ``n >= n_from``
    (the median is taken over the same rows)."""
    out = {}
    for br in sorted({r.branch for r in rows}):
        vals = [r.n_times_err for r in rows if r.branch == br and (n_from is None or r.n >= n_from)]
        if vals:
            out[br] = bounded_by_median(vals, factor)
    return out


def overlap(spec: ProblemSpec, eig: Eigenpair, seed: AsymptoticSeed, n_samples: int = 400) -> float:
    """|<u, v>| / (|u| |v|) between the computed eigenfunction and the leading
    term, on uniform samples of both pieces."""
    ef = eig.eigenfunction if eig.eigenfunction is not None else phi(spec, eig.lam)
    xl = np.linspace(spec.a, spec.c, n_samples, endpoint=False)
    xr = np.linspace(spec.b, spec.c, n_samples, endpoint=False)[::-1]
    u = np.concatenate([ef.sample(xl, "left")[0], ef.sample(xr, "right")[0]]).real
    v = np.concatenate([eigenfunction_leading(spec, seed, xl, "left"),
                        eigenfunction_leading(spec, seed, xr, "right")])
    den = np.linalg.norm(u) * np.linalg.norm(v)
    return float(abs(u @ v) / den) if den > 0 else 0.0
