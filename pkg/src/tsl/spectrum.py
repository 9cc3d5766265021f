"""Eigenvalue localization, refinement, branch labels and eigenfunctions.

Roots of omega are bracketed on a grid that is uniform in
``sigma = sign(lam) sqrt|lam|`` (uniform in s on the positive axis, where the
eigenvalues are asymptotically equispaced in s).  When d24 != 0 the
asymptotic seeds and the midpoints between consecutive seeds are merged into
the grid, so two close eigenvalues on different branches still land in
different cells.  The argument-principle count backstops the scan.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .charfun import count_zeros, omega_many
from .errors import (CompletenessMismatch, DegenerateLeadingCoefficient, LostBracket,
                     NotAnEigenvalue, QuadratureInconclusive, ZeroOnContour)
from .integrate import DEFAULT_OPTIONS, IntegratorOptions
from .model import CaseTag, ProblemSpec, classify_case, compute_determinants, sup_abs_q
from .solutions import PiecewiseSolution, boundary_residuals, phi, psi


@dataclass(frozen=True)
class AsymptoticSeed:
    s_pred: float
    branch: int
    n: int
    case: CaseTag

    @property
    def lambda_pred(self) -> float:
        return self.s_pred ** 2


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    w_lo: float
    w_hi: float


@dataclass(frozen=True)
class Eigenpair:
    lam: float
    residual: float
    bracket: tuple[float, float]
    eigenfunction: Optional[PiecewiseSolution] = None
    n_index: Optional[int] = None
    branch: Optional[int] = None

    @property
    def s(self) -> float:
        """sqrt(lam) for lam >= 0, otherwise the magnitude of the imaginary root."""
        return math.sqrt(abs(self.lam))

    @property
    def s_is_imaginary(self) -> bool:
        return self.lam < 0


# ---------------------------------------------------------------------------
# seeds


# (numerator offset, branch length) per case and branch; s = (n + off) pi / L
_SEED_TABLE = {
    "consistent": {
        CaseTag.I: ((-2.0, "right"), (0.0, "left")),
        CaseTag.II: ((-1.0, "right"), (0.5, "left")),
        CaseTag.III: ((0.5, "right"), (-1.0, "left")),
        CaseTag.IV: ((-0.5, "right"), (0.5, "left")),
    },
    "literal": {
        CaseTag.I: ((-2.0, "right"), (0.0, "left")),
        CaseTag.II: ((0.5, "right"), (-1.0, "left")),
        CaseTag.III: ((-1.0, "right"), (0.5, "left")),
        CaseTag.IV: ((-0.5, "right"), (0.5, "left")),
    },
}


def has_seeds(spec: ProblemSpec, zero_tol: float = 1e-12) -> bool:
    d = compute_determinants(spec)
    scale = max(abs(v) for v in d.as_dict().values() if v is not None)
    return abs(d.d24) > zero_tol * max(scale, 1e-300)


def asymptotic_seeds(spec: ProblemSpec, n_min: int, n_max: int, zero_tol: float = 1e-12,
                     convention: str = "consistent") -> list[AsymptoticSeed]:
    """Leading-order predictions for sqrt(lam) on both branches.

    Branch 1 follows the zeros of the right-piece factor of the leading
    characteristic term, branch 2 those of the left-piece factor.  The
    ``literal`` convention swaps the case II/III offsets between the two
    branches.  That table does not match the zeros of the leading terms and
    is kept only for comparison.
    """
    if not has_seeds(spec, zero_tol):
        raise DegenerateLeadingCoefficient("d24 = 0: leading asymptotic terms vanish")
    case = classify_case(spec, zero_tol)
    lengths = {"right": spec.right_length, "left": spec.left_length}
    out = []
    for n in range(n_min, n_max + 1):
        for branch, (off, side) in enumerate(_SEED_TABLE[convention][case], start=1):
            s = (n + off) * math.pi / lengths[side]
            if s > 0:
                out.append(AsymptoticSeed(s, branch, n, case))
    return sorted(out, key=lambda sd: (sd.s_pred, sd.branch))


# ---------------------------------------------------------------------------
# scanning and refinement


def lambda_floor(spec: ProblemSpec) -> float:
    """Heuristic lower end of the scan: -(sup|q| + 10) pushed further down by
    large Robin-type ratios at the ends, which can produce deep eigenvalues."""
    kappa = 0.0
    if spec.alpha11 != 0:
        kappa = max(kappa, abs(spec.alpha10 / spec.alpha11))
    for num, den in ((spec.alpha20, spec.alpha21), (spec.alpha20p, spec.alpha21p)):
        if den != 0:
            kappa = max(kappa, abs(num / den))
    return -(sup_abs_q(spec) + 10.0 + kappa ** 2)


def _sigma(lam):
    return np.sign(lam) * np.sqrt(np.abs(lam))


def _lam(sig):
    return np.sign(sig) * sig ** 2


def brackets_from_grid(grid, values) -> list[Bracket]:
    grid, values = np.asarray(grid, float), np.asarray(values, float)
    out = []
    sg = np.sign(values)
    for i in range(len(grid) - 1):
        if sg[i] == 0:
            out.append(Bracket(grid[i], grid[i], 0.0, 0.0))
        elif sg[i] * sg[i + 1] < 0:
            out.append(Bracket(grid[i], grid[i + 1], values[i], values[i + 1]))
    if len(grid) and sg[-1] == 0:
        out.append(Bracket(grid[-1], grid[-1], 0.0, 0.0))
    return out


def scan_brackets(spec: ProblemSpec, lambda_min: float, lambda_max: float, step: float,
                  opts: IntegratorOptions = DEFAULT_OPTIONS,
                  threads: int | None = None) -> list[Bracket]:
    """Sign changes of omega on the uniform grid ``lambda_min + k*step``."""
    if step <= 0:
        raise ValueError("step must be positive")
    n = int(math.floor((lambda_max - lambda_min) / step + 1e-9)) + 1
    grid = lambda_min + step * np.arange(n)
    return brackets_from_grid(grid, omega_many(spec, grid, opts, threads=threads))


def _omega_scalar(spec, opts):
    return lambda x: float(omega_many(spec, [x], opts)[0])


def _residual_scale(spec, lam, opts):
    """Size of omega's ingredients at b (boundary coefficients times the
    state of phi); used to turn |omega| into a scale-free residual."""
    sol = phi(spec, lam, opts)
    d = compute_determinants(spec)
    y, p = sol.right.y[-1], sol.right.yp[-1]
    coef = abs(spec.alpha20 + lam * spec.alpha20p) + abs(spec.alpha21 + lam * spec.alpha21p)
    return abs(d.d12) * coef * max(abs(y), abs(p)), sol


def refine(spec: ProblemSpec, bracket, refine_tol: float = 1e-13,
           opts: IntegratorOptions = DEFAULT_OPTIONS) -> Eigenpair:
    """Brent refinement on omega inside a sign-change bracket."""
    if isinstance(bracket, Bracket):
        lo, hi = bracket.lo, bracket.hi
    else:
        lo, hi = map(float, bracket)
    if lo == hi:
        root = lo
    else:
        root = None
        for o in (opts, opts.tightened(100.0)):
            f = _omega_scalar(spec, o)
            flo, fhi = f(lo), f(hi)
            if flo == 0:
                root = lo
            elif fhi == 0:
                root = hi
            elif flo * fhi < 0:
                xtol = refine_tol * max(1.0, abs(lo), abs(hi))
                root = brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
            if root is not None:
                opts = o
                break
        if root is None:
            raise LostBracket(f"omega has no sign change on [{lo}, {hi}]")
    w = float(omega_many(spec, [root], opts)[0])
    scale, sol = _residual_scale(spec, root, opts)
    residual = abs(w) / scale if scale > 0 else abs(w)
    ef = _normalize(sol)
    return Eigenpair(float(root), float(residual), (lo, hi), ef)


def _dedupe(pairs: list[Eigenpair], refine_tol: float) -> list[Eigenpair]:
    out: list[Eigenpair] = []
    for e in sorted(pairs, key=lambda e: e.lam):
        if out and abs(e.lam - out[-1].lam) <= refine_tol * max(1.0, abs(e.lam)) * 10:
            continue
        out.append(e)
    return out


@dataclass
class ScanResult:
    eigenpairs: list[Eigenpair]
    lam_lo: float
    lam_hi: float
    counted: Optional[int] = None


def _grid(spec, lam_lo, lam_hi, dsig, seeds):
    s_lo, s_hi = float(_sigma(lam_lo)), float(_sigma(lam_hi))
    n = max(2, int(math.ceil((s_hi - s_lo) / dsig)) + 1)
    sig = np.linspace(s_lo, s_hi, n)
    if seeds:
        sp = np.array(sorted({sd.s_pred for sd in seeds}))
        sp = sp[(sp > s_lo) & (sp < s_hi)]
        if len(sp) > 1:
            sig = np.concatenate([sig, sp, 0.5 * (sp[1:] + sp[:-1])])
        sig = np.unique(sig)
    return _lam(sig)


def split_near_misses(spec: ProblemSpec, grid, values, opts: IntegratorOptions = DEFAULT_OPTIONS):
    """Brackets hidden inside one sign pattern.

    A local minimum of |omega| at a grid point with no sign change around it
    usually means two roots in neighbouring cells.  The sign-adjusted omega is
    minimized over the two cells; a minimum of the opposite sign splits them.
    """
    grid, values = np.asarray(grid, float), np.asarray(values, float)
    mag = np.abs(values)
    sg = np.sign(values)
    out = []
    for i in range(1, len(grid) - 1):
        if not (sg[i - 1] == sg[i] == sg[i + 1] != 0):
            continue
        if not (mag[i] < mag[i - 1] and mag[i] < mag[i + 1]):
            continue
        f = lambda x, sgn=sg[i]: sgn * float(omega_many(spec, [x], opts)[0])
        res = minimize_scalar(f, bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, abs(grid[i]))})
        if res.fun < 0:
            xm = float(res.x)
            wm = sg[i] * res.fun
            out.append(Bracket(grid[i - 1], xm, values[i - 1], wm))
            out.append(Bracket(xm, grid[i + 1], wm, values[i + 1]))
    return out


def _scan(spec, lam_lo, lam_hi, opts, refine_tol, dsig, threads, use_seeds):
    seeds = []
    if use_seeds and has_seeds(spec):
        s_top = math.sqrt(max(lam_hi, 0.0))
        n_top = int(s_top * max(spec.left_length, spec.right_length) / math.pi) + 4
        seeds = asymptotic_seeds(spec, 0, n_top)
    grid = _grid(spec, lam_lo, lam_hi, dsig, seeds)
    vals = omega_many(spec, grid, opts, threads=threads)
    brs = brackets_from_grid(grid, vals) + split_near_misses(spec, grid, vals, opts)
    return [refine(spec, br, refine_tol, opts) for br in brs]


def _edge(roots, x, inward, cell):
    """Move a contour edge off a nearby root into the adjacent gap."""
    near = [r for r in roots if abs(r - x) < cell]
    if not near:
        return x
    ordered = sorted(roots, reverse=inward < 0)
    k = ordered.index(near[0])
    return 0.5 * (ordered[k] + ordered[k + 1]) if k + 1 < len(ordered) else x


def count_real_roots_check(spec: ProblemSpec, roots, lo: float, hi: float,
                           opts: IntegratorOptions = DEFAULT_OPTIONS, threads: int | None = None,
                           per_chunk: int = 8) -> int:
    """Winding number of omega over ``[lo, hi]``, summed over abutting
    rectangles.

    Chunk edges sit halfway between consecutive roots, and each rectangle's
    half-height is a fraction of the root spacing inside it (never below 5),
    which keeps the integrand smooth at large lam where roots are far apart.
    """
    inside = sorted(r for r in roots if lo < r < hi)
    edges = [lo]
    for k in range(per_chunk, len(inside) - 2, per_chunk):
        # widest nearby gap, so an edge never splits a close pair
        j = max(range(k - 2, k + 3), key=lambda i: inside[i] - inside[i - 1])
        edges.append(0.5 * (inside[j - 1] + inside[j]))
    edges.append(hi)
    total = 0
    for u, v in zip(edges[:-1], edges[1:]):
        m = sum(1 for r in inside if u < r < v)
        half = max(5.0, 0.3 * (v - u) / max(1, m))
        total += count_zeros(spec, (u, v), half, opts=opts, threads=threads)
    return total


def _count_or_none(spec, roots, lo, hi, opts, threads):
    # an inconclusive contour usually means an unfound root near an edge
    try:
        return count_real_roots_check(spec, roots, lo, hi, opts, threads)
    except (QuadratureInconclusive, ZeroOnContour):
        return None


def eigenvalues_in_range(spec: ProblemSpec, lam_lo: float, lam_hi: float,
                         opts: IntegratorOptions = DEFAULT_OPTIONS, refine_tol: float = 1e-13,
                         dsig: float | None = None, threads: int | None = None,
                         use_seeds: bool = True, check_completeness: bool = False,
                         max_refinements: int = 3) -> list[Eigenpair]:
    """All roots found by the scan in ``[lam_lo, lam_hi]``.

    With ``check_completeness`` the number of roots found is compared with
    the winding number over the range (edges moved off any root lying within
    two grid cells of them); the grid is halved on a mismatch.
    """
    if dsig is None:
        dsig = math.pi / (8.0 * (spec.b - spec.a))
    # scan a little beyond the range so roots near its ends are known
    ext_lo = float(_lam(_sigma(lam_lo) - 3 * dsig))
    ext_hi = float(_lam(_sigma(lam_hi) + 3 * dsig))
    found = _dedupe(_scan(spec, ext_lo, ext_hi, opts, refine_tol, dsig, threads, use_seeds),
                    refine_tol)
    if check_completeness:
        for _ in range(max_refinements + 1):
            lams = [e.lam for e in found]
            lo = _edge(lams, lam_lo, +1, 4 * dsig * max(1.0, math.sqrt(abs(lam_lo))))
            hi = _edge(lams, lam_hi, -1, 4 * dsig * max(1.0, math.sqrt(abs(lam_hi))))
            inside = sum(1 for x in lams if lo < x < hi)
            counted = _count_or_none(spec, lams, lo, hi, opts, threads)
            if counted == inside:
                break
            dsig /= 2.0
            found = _dedupe(found + _scan(spec, ext_lo, ext_hi, opts, refine_tol, dsig, threads,
                                          use_seeds), refine_tol)
        else:
            raise CompletenessMismatch(inside, counted, lo, hi)
    return [e for e in found if lam_lo <= e.lam <= lam_hi]


def eigenvalues(spec: ProblemSpec, count: int, opts: IntegratorOptions = DEFAULT_OPTIONS,
                refine_tol: float = 1e-13, check_completeness: bool = True,
                threads: int | None = None, dsig: float | None = None,
                return_scan: bool = False):
    """The ``count`` lowest eigenvalues, ascending.

    The scan starts at :func:`lambda_floor`.  With ``check_completeness`` the
    argument-principle count from four times deeper than the floor up to the
    gap after the last wanted root must equal the number of roots found; on
    a shortfall the grid is halved (up to three times) before
    :class:`CompletenessMismatch` is raised.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    floor = lambda_floor(spec)
    if dsig is None:
        dsig = math.pi / (8.0 * (spec.b - spec.a))
    s_top = (count + 4) * math.pi / (spec.b - spec.a)
    found: list[Eigenpair] = []
    for _ in range(40):
        found = _dedupe(_scan(spec, floor, s_top ** 2, opts, refine_tol, dsig, threads, True),
                        refine_tol)
        if len(found) >= count + 1:
            break
        s_top *= 1.3
    else:
        raise RuntimeError("could not locate enough eigenvalues")
    lo = 4.0 * floor - 10.0
    hi = 0.5 * (found[count - 1].lam + found[count].lam)
    counted = None
    if check_completeness:
        for attempt in range(4):
            lams = [e.lam for e in found]
            inside = sum(1 for x in lams if lo < x < hi)
            counted = _count_or_none(spec, lams, lo, hi, opts, threads)
            if counted == inside:
                break
            if attempt == 3:
                exc = CompletenessMismatch(inside, counted, lo, hi)
                exc.eigenpairs = found[:count]
                raise exc
            dsig /= 2.0
            found = _dedupe(found + _scan(spec, lo, s_top ** 2, opts, refine_tol, dsig, threads,
                                          True), refine_tol)
            hi = 0.5 * (found[count - 1].lam + found[count].lam)
    result = found[:count]
    if return_scan:
        return ScanResult(result, lo, hi, counted)
    return result


# ---------------------------------------------------------------------------
# labels and eigenfunctions


def label_branches(eigs: list[Eigenpair], seeds: list[AsymptoticSeed],
                   window: float | None = None) -> list[Eigenpair]:
    """Greedy nearest-seed assignment in s.

    ``window`` defaults to half the local seed spacing.  Pairs are taken in
    order of distance; ties go to the lower branch.  Each seed and each
    eigenvalue is used at most once.
    """
    sp = np.array([sd.s_pred for sd in seeds])
    # coincident seeds from the two branches count once when measuring spacing
    order = np.unique(np.round(sp, 9))
    gaps = np.diff(order) if len(order) > 1 else np.array([np.inf])

    def local_window(k):
        if window is not None:
            return window
        j = int(np.searchsorted(order, sp[k]))
        nb = [gaps[i] for i in (j - 1, j) if 0 <= i < len(gaps)]
        return 0.5 * min(nb) if nb else np.inf

    cand = []
    for i, e in enumerate(eigs):
        if e.lam < 0:
            continue
        for k, sd in enumerate(seeds):
            dist = abs(e.s - sd.s_pred)
            if dist <= local_window(k):
                cand.append((dist, sd.branch, i, k))
    cand.sort()
    used_e, used_s, out = set(), set(), list(eigs)
    for dist, _, i, k in cand:
        if i in used_e or k in used_s:
            continue
        used_e.add(i)
        used_s.add(k)
        out[i] = dataclasses.replace(eigs[i], n_index=seeds[k].n, branch=seeds[k].branch)
    return out


def _normalize(sol: PiecewiseSolution) -> PiecewiseSolution:
    # unit max-norm; sign chosen so the extreme value is positive
    m = sol.max_norm()
    ys = np.concatenate([sol.left.y, sol.right.y])
    k = int(np.argmax(np.abs(ys)))
    return sol.scaled((1.0 if ys[k].real >= 0 else -1.0) / m)


def proportionality(spec: ProblemSpec, lam: float, opts: IntegratorOptions = DEFAULT_OPTIONS):
    """Scale-free Wronskian of phi and psi on each piece (at the piece midpoints)."""
    ph, ps = phi(spec, lam, opts), psi(spec, lam, opts)
    out = []
    for side, x in (("left", 0.5 * (spec.a + spec.c)), ("right", 0.5 * (spec.c + spec.b))):
        y1, p1 = ph.sample([x], side)
        y2, p2 = ps.sample([x], side)
        w = y1[0] * p2[0] - p1[0] * y2[0]
        n1 = max(np.max(np.abs(ph.piece(side).y)), np.max(np.abs(ph.piece(side).yp)))
        n2 = max(np.max(np.abs(ps.piece(side).y)), np.max(np.abs(ps.piece(side).yp)))
        out.append(abs(w) / (n1 * n2))
    return tuple(out)


def eigenfunction(spec: ProblemSpec, eig: Eigenpair | float,
                  opts: IntegratorOptions = DEFAULT_OPTIONS,
                  cert_tol: float = 1e-6) -> PiecewiseSolution:
    """phi at an eigenvalue, unit max-norm, with the phi/psi proportionality
    certificate enforced."""
    lam = eig.lam if isinstance(eig, Eigenpair) else float(eig)
    cert = proportionality(spec, lam, opts)
    if max(cert) >= cert_tol:
        raise NotAnEigenvalue(f"phi and psi are not proportional at lam={lam} ({max(cert):.3g})")
    if isinstance(eig, Eigenpair) and eig.eigenfunction is not None:
        return eig.eigenfunction
    return _normalize(phi(spec, lam, opts))


def certificate(spec: ProblemSpec, eig: Eigenpair) -> dict:
    ef = eig.eigenfunction if eig.eigenfunction is not None else eigenfunction(spec, eig)
    res = boundary_residuals(spec, ef)
    return {"conditions": np.abs(res) / ef.max_norm(refine=False),
            "proportionality": proportionality(spec, eig.lam)}
