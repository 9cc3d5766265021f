"""Characteristic function, Wronskians and an argument-principle zero counter.

``omega(lam) = d34 * W[phi1, psi1] = d12 * W[phi2, psi2]``; its zeros are the
eigenvalues.  Three evaluation routes are offered and must agree:

* ``via_psi_at_a``   ``d34 * (a11 psi1'(a) + a10 psi1(a))``   (production)
* ``via_phi_at_b``   ``d12 * (phi2(b)(a20 + lam a20p) - phi2'(b)(a21 + lam a21p))``
* ``via_wronskian_midpoint``  ``d34 * W[phi1, psi1]`` at the middle of [a, c)

The two boundary routes run entirely inside compiled kernels and are what the
spectrum code evaluates on grids and contours.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from numba import njit

from .errors import PieceMismatch, QuadratureInconclusive, StepLimitExceeded, ZeroOnContour
from .integrate import DEFAULT_OPTIONS, IntegratorOptions, _integrate, _replay
from .model import ProblemSpec, compute_determinants
from .solutions import PiecewiseSolution, phi, psi

PATHS = ("via_phi_at_b", "via_psi_at_a", "via_wronskian_midpoint")


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("TSL_THREADS", "1")))
    except ValueError:
        return 1


class CharSample(NamedTuple):
    lam: complex | float
    w: complex | float
    path: str


# ---------------------------------------------------------------------------
# kernel-ready problem data


@dataclass(frozen=True)
class _Packed:
    ql: np.ndarray
    qr: np.ndarray
    geom: np.ndarray     # a, c, b
    alpha: np.ndarray    # a10, a11, a20, a21, a20p, a21p
    fwd: np.ndarray      # 2x2 jump c- -> c+
    bwd: np.ndarray      # 2x2 jump c+ -> c-
    d12: float
    d34: float


@lru_cache(maxsize=64)
def _pack(spec: ProblemSpec) -> _Packed:
    beta = spec.beta_array
    m, p = beta[:, :2], beta[:, 2:]
    dets = compute_determinants(spec)
    return _Packed(
        ql=np.ascontiguousarray(spec.q.coeffs("left")),
        qr=np.ascontiguousarray(spec.q.coeffs("right")),
        geom=np.array([spec.a, spec.c, spec.b]),
        alpha=np.array([spec.alpha10, spec.alpha11, spec.alpha20, spec.alpha21,
                        spec.alpha20p, spec.alpha21p]),
        fwd=-np.linalg.solve(p, m),
        bwd=-np.linalg.solve(m, p),
        d12=dets.d12,
        d34=dets.d34,
    )


_EMPTY = np.empty(0)


@njit(cache=True, nogil=True)
def _omega_phi(ql, qr, geom, alpha, fwd, d12, lam, rtol, atol, max_steps):
    y0 = alpha[1] + 0.0 * lam
    p0 = -alpha[0] + 0.0 * lam
    xs, ys, ps, n, st = _integrate(ql, lam, geom[0], geom[1], y0, p0, rtol, atol,
                                   max_steps, _EMPTY, False)
    if st != 0:
        return 0.0 * lam, st
    y, p = ys[n - 1], ps[n - 1]
    y, p = fwd[0, 0] * y + fwd[0, 1] * p, fwd[1, 0] * y + fwd[1, 1] * p
    xs, ys, ps, n, st = _integrate(qr, lam, geom[1], geom[2], y, p, rtol, atol,
                                   max_steps, _EMPTY, False)
    y, p = ys[n - 1], ps[n - 1]
    w = d12 * (y * (alpha[2] + lam * alpha[4]) - p * (alpha[3] + lam * alpha[5]))
    return w, st


@njit(cache=True, nogil=True)
def _omega_psi(ql, qr, geom, alpha, bwd, d34, lam, rtol, atol, max_steps):
    y0 = alpha[3] + lam * alpha[5]
    p0 = alpha[2] + lam * alpha[4]
    xs, ys, ps, n, st = _integrate(qr, lam, geom[2], geom[1], y0, p0, rtol, atol,
                                   max_steps, _EMPTY, False)
    if st != 0:
        return 0.0 * lam, st
    y, p = ys[n - 1], ps[n - 1]
    y, p = bwd[0, 0] * y + bwd[0, 1] * p, bwd[1, 0] * y + bwd[1, 1] * p
    xs, ys, ps, n, st = _integrate(ql, lam, geom[1], geom[0], y, p, rtol, atol,
                                   max_steps, _EMPTY, False)
    y, p = ys[n - 1], ps[n - 1]
    return d34 * (alpha[1] * p + alpha[0] * y), st


@njit(cache=True, nogil=True)
def _omega_phi_many(ql, qr, geom, alpha, fwd, d12, lams, rtol, atol, max_steps):
    out = np.zeros(lams.shape[0]) * lams[0]
    status = 0
    for i in range(lams.shape[0]):
        w, st = _omega_phi(ql, qr, geom, alpha, fwd, d12, lams[i], rtol, atol, max_steps)
        out[i] = w
        if st != 0:
            status = st
    return out, status


@njit(cache=True, nogil=True)
def _omega_psi_many(ql, qr, geom, alpha, bwd, d34, lams, rtol, atol, max_steps):
    out = np.zeros(lams.shape[0]) * lams[0]
    status = 0
    for i in range(lams.shape[0]):
        w, st = _omega_psi(ql, qr, geom, alpha, bwd, d34, lams[i], rtol, atol, max_steps)
        out[i] = w
        if st != 0:
            status = st
    return out, status


@njit(cache=True, nogil=True)
def _omega_psi_deriv_many(ql, qr, geom, alpha, bwd, d34, lams, rtol, atol, max_steps):
    """omega and a central difference omega' for each lam.

    The three evaluations share the step grid accepted at the centre value,
    so the difference quotient sees no step-selection noise.
    """
    n_l = lams.shape[0]
    w = np.zeros(n_l) * lams[0]
    dw = np.zeros(n_l) * lams[0]
    status = 0
    for i in range(n_l):
        lam = lams[i]
        h = max(1e-6, 1e-8 * abs(lam))
        y0 = alpha[3] + lam * alpha[5]
        p0 = alpha[2] + lam * alpha[4]
        gr, ys, ps, n, st = _integrate(qr, lam, geom[2], geom[1], y0, p0, rtol, atol,
                                       max_steps, _EMPTY, True)
        if st != 0:
            status = st
            continue
        y, p = ys[n - 1], ps[n - 1]
        y, p = bwd[0, 0] * y + bwd[0, 1] * p, bwd[1, 0] * y + bwd[1, 1] * p
        gl, ys, ps, n, st = _integrate(ql, lam, geom[1], geom[0], y, p, rtol, atol,
                                       max_steps, _EMPTY, True)
        if st != 0:
            status = st
            continue
        w[i] = d34 * (alpha[1] * ps[n - 1] + alpha[0] * ys[n - 1])
        vals = np.zeros(2) * lam
        for j in range(2):
            lj = lam + h if j == 0 else lam - h
            y, p = _replay(qr, lj, gr, alpha[3] + lj * alpha[5], alpha[2] + lj * alpha[4])
            y, p = bwd[0, 0] * y + bwd[0, 1] * p, bwd[1, 0] * y + bwd[1, 1] * p
            y, p = _replay(ql, lj, gl, y, p)
            vals[j] = d34 * (alpha[1] * p + alpha[0] * y)
        dw[i] = (vals[0] - vals[1]) / (2.0 * h)
    return w, dw, status


def _prep_lams(lams):
    arr = np.atleast_1d(np.asarray(lams))
    if np.iscomplexobj(arr):
        return np.ascontiguousarray(arr, dtype=np.complex128)
    return np.ascontiguousarray(arr, dtype=np.float64)


def omega_many(spec: ProblemSpec, lams, opts: IntegratorOptions = DEFAULT_OPTIONS,
               path: str = "via_phi_at_b", threads: int | None = None) -> np.ndarray:
    """Vectorized characteristic function along one boundary route."""
    pk = _pack(spec)
    arr = _prep_lams(lams)
    if len(arr) == 0:
        return arr
    tail = (opts.rel_tol, opts.abs_tol, opts.max_steps)
    if path == "via_phi_at_b":
        kernel, head = _omega_phi_many, (pk.ql, pk.qr, pk.geom, pk.alpha, pk.fwd, pk.d12)
    elif path == "via_psi_at_a":
        kernel, head = _omega_psi_many, (pk.ql, pk.qr, pk.geom, pk.alpha, pk.bwd, pk.d34)
    else:
        raise ValueError(f"omega_many supports boundary routes only, got {path!r}")
    threads = threads or default_threads()
    chunks = [arr] if threads <= 1 or len(arr) < 2 * threads else np.array_split(arr, threads)
    if len(chunks) == 1:
        results = [kernel(*head, arr, *tail)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda ch: kernel(*head, ch, *tail), chunks))
    if any(st != 0 for _, st in results):
        raise StepLimitExceeded("integration failed while evaluating omega")
    return np.concatenate([w for w, _ in results])


def omega_and_derivative(spec: ProblemSpec, lams, opts: IntegratorOptions = DEFAULT_OPTIONS,
                         threads: int | None = None):
    pk = _pack(spec)
    arr = _prep_lams(lams)
    head = (pk.ql, pk.qr, pk.geom, pk.alpha, pk.bwd, pk.d34)
    tail = (opts.rel_tol, opts.abs_tol, opts.max_steps)
    threads = threads or default_threads()
    chunks = [arr] if threads <= 1 or len(arr) < 2 * threads else np.array_split(arr, threads)
    if len(chunks) == 1:
        results = [_omega_psi_deriv_many(*head, arr, *tail)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda ch: _omega_psi_deriv_many(*head, ch, *tail), chunks))
    if any(r[2] != 0 for r in results):
        raise StepLimitExceeded("integration failed while evaluating omega'")
    return (np.concatenate([r[0] for r in results]), np.concatenate([r[1] for r in results]))


# ---------------------------------------------------------------------------
# Wronskians and scalar entry points


def wronskian(sol_a: PiecewiseSolution, sol_b: PiecewiseSolution, x, side: str):
    """``y_a y_b' - y_a' y_b`` at ``x`` (scalar or array) on the given piece."""
    if sol_a.lam != sol_b.lam:
        raise PieceMismatch("solutions belong to different lam")
    ya, pa = sol_a.sample(x, side)
    yb, pb = sol_b.sample(x, side)
    w = ya * pb - pa * yb
    return w if np.ndim(x) else w[0]


def _scalar(v):
    v = complex(v)
    return v.real if v.imag == 0.0 else v


def charfun(spec: ProblemSpec, lam, opts: IntegratorOptions = DEFAULT_OPTIONS,
            check: bool = False):
    """``omega(lam) = d34 * W[phi1, psi1]`` evaluated at x = a.

    Since ``phi1(a) = a11`` and ``phi1'(a) = -a10`` this reduces to
    ``d34 * (a11 psi1'(a) + a10 psi1(a))``.  With ``check`` the right-piece
    value ``d12 * W[phi2, psi2]`` is computed too and relative agreement to
    1e-6 is asserted.
    """
    w = omega_many(spec, [lam], opts, "via_psi_at_a")[0]
    if check:
        d = compute_determinants(spec)
        ph, ps = phi(spec, lam, opts), psi(spec, lam, opts)
        xm = 0.5 * (spec.c + spec.b)
        w2 = d.d12 * wronskian(ph, ps, xm, "right")
        assert abs(w - w2) <= 1e-6 * max(abs(w), abs(w2), 1e-300), (w, w2)
    return _scalar(w)


def charfun_via_boundary(spec: ProblemSpec, lam, opts: IntegratorOptions = DEFAULT_OPTIONS,
                         path: str = "A"):
    """Single-shot routes: ``A`` uses phi only (at b), ``B`` uses psi only (at a)."""
    route = {"A": "via_phi_at_b", "B": "via_psi_at_a"}[path]
    return _scalar(omega_many(spec, [lam], opts, route)[0])


def charfun_sample(spec: ProblemSpec, lam, path: str,
                   opts: IntegratorOptions = DEFAULT_OPTIONS) -> CharSample:
    if path == "via_wronskian_midpoint":
        d = compute_determinants(spec)
        xm = 0.5 * (spec.a + spec.c)
        w = d.d34 * wronskian(phi(spec, lam, opts), psi(spec, lam, opts), xm, "left")
        return CharSample(lam, _scalar(w), path)
    return CharSample(lam, _scalar(omega_many(spec, [lam], opts, path)[0]), path)


# ---------------------------------------------------------------------------
# argument principle


class WindingResult(NamedTuple):
    count: int
    value: complex
    error: float
    n_points: int


def _rectangle(lo, hi, half, n_total):
    """Counter-clockwise rectangle split into four edges, corners shared."""
    w, h = hi - lo, 2 * half
    perim = 2 * (w + h)
    corners = [complex(lo, -half), complex(hi, -half), complex(hi, half),
               complex(lo, half), complex(lo, -half)]
    lengths = [w, h, w, h]
    edges = []
    for k in range(4):
        m = max(16, int(round(n_total * lengths[k] / perim)))
        m += m % 2  # even so that every other point is a valid coarse rule
        t = np.linspace(0.0, 1.0, m + 1)
        edges.append(corners[k] + t * (corners[k + 1] - corners[k]))
    return edges


def _trapezoid_edges(edges, f_edges, stride=1):
    total = 0.0 + 0.0j
    for z, f in zip(edges, f_edges):
        z, f = z[::stride], f[::stride]
        total += np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(z))
    return total / (2j * math.pi)


def winding_number(spec: ProblemSpec, re_range, im_half_width: float = 5.0,
                   n_contour_points: int | None = None,
                   opts: IntegratorOptions = DEFAULT_OPTIONS,
                   threads: int | None = None) -> WindingResult:
    """Number of zeros of omega inside ``re_range x [-h, h]`` by the
    argument principle, trapezoid rule on each edge.

    The error estimate is the larger of the distance to the nearest integer
    and the change against the rule on every other point.  Below 0.25 the
    count is accepted; otherwise the point count is doubled once.
    """
    lo, hi = map(float, re_range)
    if not lo < hi or im_half_width <= 0:
        raise ValueError("need lo < hi and im_half_width > 0")
    if n_contour_points is None:
        perim = 2 * (hi - lo) + 4 * im_half_width
        n_contour_points = int(min(60000, max(256, 10.0 * perim / im_half_width)))
    shift = 0.0
    for attempt in range(2):
        edges = _rectangle(lo - shift, hi + shift, im_half_width, n_contour_points)
        pts = np.concatenate(edges)
        w, dw = omega_and_derivative(spec, pts, opts, threads)
        mag = np.abs(w)
        # omega spans many decades along a long contour: compare with neighbours
        nb = np.maximum(np.roll(mag, 1), np.roll(mag, -1))
        if np.any(mag <= 1e-12 * nb) or not np.all(np.isfinite(w)):
            if attempt == 0:
                shift = 1e-3 * (hi - lo) + 1e-3
                continue
            raise ZeroOnContour(f"omega vanishes on the contour around [{lo}, {hi}]")
        ratio = dw / w
        f_edges, start = [], 0
        for z in edges:
            f_edges.append(ratio[start:start + len(z)])
            start += len(z)
        fine = _trapezoid_edges(edges, f_edges)
        coarse = _trapezoid_edges(edges, f_edges, stride=2)
        count = int(round(fine.real))
        err = max(abs(fine - count), abs(fine - coarse))
        if err < 0.25:
            return WindingResult(count, fine, float(err), len(pts))
        if attempt == 0:
            n_contour_points *= 2
    raise QuadratureInconclusive(
        f"winding number on [{lo}, {hi}] inconclusive (estimate {fine:.4g}, error {err:.3g})")


def count_zeros(spec: ProblemSpec, re_range, im_half_width: float = 5.0,
                n_contour_points: int | None = None,
                opts: IntegratorOptions = DEFAULT_OPTIONS, threads: int | None = None) -> int:
    return winding_number(spec, re_range, im_half_width, n_contour_points, opts, threads).count
