"""Adaptive initial-value integration of ``-y'' + q(x) y = lam y`` on one piece.

The first-order system ``(y, y')' = (y', (q - lam) y)`` is advanced with the
Dormand-Prince 8(5,3) embedded pair.  The kernel is compiled with numba and
works for real or complex ``lam``; it can

* land exactly on requested abscissae (``dense_output_points``), which is how
  downstream code gets interpolation-free states for quadrature and Wronskians;
* replay a previously accepted step grid without error control, which keeps
  finite differences in ``lam`` free of step-selection noise.

Between nodes :meth:`Trace.interp` gives a C1 cubic Hermite interpolant; it is
meant for plotting, not for high-accuracy work.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

from .errors import StepLimitExceeded, StraddlesTransmissionPoint
from .model import Potential, horner

_NS = _dop.N_STAGES
_A = np.ascontiguousarray(_dop.A[:_NS, :_NS], dtype=np.float64)
_B = np.ascontiguousarray(_dop.B, dtype=np.float64)
_C = np.ascontiguousarray(_dop.C[:_NS], dtype=np.float64)
_E3 = np.ascontiguousarray(_dop.E3, dtype=np.float64)
_E5 = np.ascontiguousarray(_dop.E5, dtype=np.float64)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0

OK, STEP_LIMIT, STEP_UNDERFLOW = 0, 1, 2


class StateVector(NamedTuple):
    y: complex | float
    yp: complex | float


@dataclass(frozen=True)
class IntegratorOptions:
    rel_tol: float = 1e-11
    abs_tol: float = 1e-13
    max_steps: int = 500_000
    dense_output_points: tuple[float, ...] | None = None

    def __post_init__(self):
        if not (0 < self.rel_tol < 1 and 0 < self.abs_tol < 1):
            raise ValueError("tolerances must lie in (0, 1)")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    def tightened(self, factor: float = 10.0) -> "IntegratorOptions":
        return IntegratorOptions(self.rel_tol / factor, self.abs_tol / factor,
                                 self.max_steps * 2, self.dense_output_points)


DEFAULT_OPTIONS = IntegratorOptions()


@dataclass(frozen=True)
class Trace:
    """Solution samples on one piece; ``xs`` strictly monotone."""

    xs: np.ndarray
    y: np.ndarray
    yp: np.ndarray
    lam: complex | float = 0.0
    q_coeffs: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        if len(self.xs) < 2 or len(self.xs) != len(self.y) or len(self.y) != len(self.yp):
            raise ValueError("trace needs >= 2 aligned samples")

    def __len__(self):
        return len(self.xs)

    @property
    def states(self) -> list[StateVector]:
        return [StateVector(a, b) for a, b in zip(self.y, self.yp)]

    @property
    def start(self) -> StateVector:
        return StateVector(self.y[0], self.yp[0])

    @property
    def end(self) -> StateVector:
        return StateVector(self.y[-1], self.yp[-1])

    @property
    def increasing(self) -> bool:
        return self.xs[-1] > self.xs[0]

    @property
    def lo(self) -> float:
        return float(min(self.xs[0], self.xs[-1]))

    @property
    def hi(self) -> float:
        return float(max(self.xs[0], self.xs[-1]))

    def ordered(self) -> "Trace":
        if self.increasing:
            return self
        return Trace(self.xs[::-1].copy(), self.y[::-1].copy(), self.yp[::-1].copy(),
                     self.lam, self.q_coeffs)

    def scaled(self, factor) -> "Trace":
        return Trace(self.xs, self.y * factor, self.yp * factor, self.lam, self.q_coeffs)

    def interp(self, x):
        """Cubic Hermite interpolation of ``(y, y')`` using ``y'' = (q - lam) y``."""
        tr = self.ordered()
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(x < tr.xs[0] - 1e-12) or np.any(x > tr.xs[-1] + 1e-12):
            raise ValueError("interpolation point outside the trace")
        idx = np.clip(np.searchsorted(tr.xs, x, side="right") - 1, 0, len(tr.xs) - 2)
        x0, x1 = tr.xs[idx], tr.xs[idx + 1]
        h = x1 - x0
        t = (x - x0) / h
        coeffs = np.asarray(self.q_coeffs)
        y0, y1 = tr.y[idx], tr.y[idx + 1]
        p0, p1 = tr.yp[idx], tr.yp[idx + 1]
        f0 = (horner(coeffs, x0) - self.lam) * y0
        f1 = (horner(coeffs, x1) - self.lam) * y1
        h00 = 2 * t**3 - 3 * t**2 + 1
        h10 = t**3 - 2 * t**2 + t
        h01 = -2 * t**3 + 3 * t**2
        h11 = t**3 - t**2
        y = h00 * y0 + h10 * h * p0 + h01 * y1 + h11 * h * p1
        yp = h00 * p0 + h10 * h * f0 + h01 * p1 + h11 * h * f1
        return y, yp


# ---------------------------------------------------------------------------
# compiled kernel


@njit(cache=True, nogil=True)
def _q(coeffs, x):
    acc = 0.0
    for i in range(coeffs.shape[0] - 1, -1, -1):
        acc = acc * x + coeffs[i]
    return acc


@njit(cache=True, nogil=True)
def _step(coeffs, lam, x, y, p, fp, h, ky, kp, rtol, atol):
    """One DOP853 step; returns (y_new, p_new, fp_new, error_norm)."""
    ky[0] = p
    kp[0] = fp
    for s in range(1, _NS):
        dy = 0.0 * y
        dp = 0.0 * p
        for j in range(s):
            dy += _A[s, j] * ky[j]
            dp += _A[s, j] * kp[j]
        ys = y + h * dy
        ky[s] = p + h * dp
        kp[s] = (_q(coeffs, x + _C[s] * h) - lam) * ys
    sy = 0.0 * y
    sp = 0.0 * p
    for j in range(_NS):
        sy += _B[j] * ky[j]
        sp += _B[j] * kp[j]
    yn = y + h * sy
    pn = p + h * sp
    fpn = (_q(coeffs, x + h) - lam) * yn
    ky[_NS] = pn
    kp[_NS] = fpn
    scy = atol + rtol * max(abs(y), abs(yn))
    scp = atol + rtol * max(abs(p), abs(pn))
    e5y = 0.0 * y
    e5p = 0.0 * p
    e3y = 0.0 * y
    e3p = 0.0 * p
    for j in range(_NS + 1):
        e5y += _E5[j] * ky[j]
        e5p += _E5[j] * kp[j]
        e3y += _E3[j] * ky[j]
        e3p += _E3[j] * kp[j]
    n5 = (abs(e5y) / scy) ** 2 + (abs(e5p) / scp) ** 2
    n3 = (abs(e3y) / scy) ** 2 + (abs(e3p) / scp) ** 2
    if n5 == 0.0 and n3 == 0.0:
        err = 0.0
    else:
        err = abs(h) * n5 / np.sqrt((n5 + 0.01 * n3) * 2.0)
    return yn, pn, fpn, err


@njit(cache=True, nogil=True)
def _grow(arr, n):
    out = np.zeros(2 * arr.shape[0]) * arr[0]
    out[:n] = arr[:n]
    return out


@njit(cache=True, nogil=True)
def _integrate(coeffs, lam, x0, x1, y0, p0, rtol, atol, max_steps, targets, record):
    """Adaptive integration from x0 to x1.

    ``targets`` must be sorted in the integration direction and lie strictly
    between x0 and x1; the integrator lands on each of them exactly.
    Returns ``(xs, ys, ps, n, status)``; with ``record`` false only the first
    and last nodes are stored.
    """
    d = 1.0 if x1 >= x0 else -1.0
    span = abs(x1 - x0)
    ky = np.zeros(_NS + 1) * y0
    kp = np.zeros(_NS + 1) * y0
    cap = 64 if record else 2
    xs = np.zeros(cap)
    ys = np.zeros(cap) * y0
    ps = np.zeros(cap) * y0
    xs[0] = x0
    ys[0] = y0
    ps[0] = p0
    n = 1
    x = x0
    y = y0
    p = p0
    if span == 0.0:
        return xs[:1], ys[:1], ps[:1], 1, 0
    fp = (_q(coeffs, x) - lam) * y
    freq = np.sqrt(abs(lam) + abs(_q(coeffs, x0))) + 1.0
    h_abs = min(span, 0.5 / freq)
    it = 0
    nt = targets.shape[0]
    ti = 0
    status = 0
    min_step = 1e-14 * max(1.0, abs(x0), abs(x1))
    while True:
        target = x1 if ti >= nt else targets[ti]
        dist = d * (target - x)
        clipped = False
        h_try = h_abs
        if h_try >= dist * (1.0 - 1e-12):
            h_try = dist
            clipped = True
        if h_try < min_step and not clipped:
            status = 2
            break
        it += 1
        if it > max_steps:
            status = 1
            break
        yn, pn, fpn, err = _step(coeffs, lam, x, y, p, fp, d * h_try, ky, kp, rtol, atol)
        if err <= 1.0:
            if err == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = min(_MAX_FACTOR, _SAFETY * err ** (-1.0 / 8.0))
            x = target if clipped else x + d * h_try
            y = yn
            p = pn
            fp = fpn
            new_h = h_try * factor
            if clipped:
                h_abs = max(h_abs, new_h)
            else:
                h_abs = new_h
            if record:
                if n >= xs.shape[0]:
                    xs = _grow(xs, n)
                    ys = _grow(ys, n)
                    ps = _grow(ps, n)
                xs[n] = x
                ys[n] = y
                ps[n] = p
                n += 1
            if clipped:
                if ti >= nt:
                    break
                ti += 1
        else:
            h_abs = h_try * max(_MIN_FACTOR, _SAFETY * err ** (-1.0 / 8.0))
    if not record:
        xs[1] = x
        ys[1] = y
        ps[1] = p
        n = 2
    return xs[:n], ys[:n], ps[:n], n, status


@njit(cache=True, nogil=True)
def _replay(coeffs, lam, grid, y0, p0):
    """Integrate along a fixed grid (no error control); returns final (y, p)."""
    ky = np.zeros(_NS + 1) * y0
    kp = np.zeros(_NS + 1) * y0
    y = y0
    p = p0
    fp = (_q(coeffs, grid[0]) - lam) * y
    for i in range(grid.shape[0] - 1):
        y, p, fp, _ = _step(coeffs, lam, grid[i], y, p, fp, grid[i + 1] - grid[i],
                            ky, kp, 1.0, 1.0)
    return y, p


# ---------------------------------------------------------------------------
# python wrappers


def _as_kernel_types(lam, y0, yp0):
    if any(isinstance(v, complex) or np.iscomplexobj(v) for v in (lam, y0, yp0)):
        return complex(lam), complex(y0), complex(yp0)
    return float(lam), float(y0), float(yp0)


def _check_status(status, x0, x1, opts):
    if status == STEP_LIMIT:
        raise StepLimitExceeded(
            f"more than {opts.max_steps} steps integrating from {x0} to {x1}")
    if status == STEP_UNDERFLOW:
        raise StepLimitExceeded(f"step size underflow integrating from {x0} to {x1}")


def propagate(coeffs, lam, x0, x1, y0, yp0, opts: IntegratorOptions = DEFAULT_OPTIONS,
              targets: Sequence[float] | None = None, record: bool = False):
    """Low-level entry: returns ``(xs, ys, yps)`` arrays.

    ``targets`` are clipped to the open interval and ordered along the
    direction of integration; duplicates are dropped.
    """
    lam, y0, yp0 = _as_kernel_types(lam, y0, yp0)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    if targets is None or len(targets) == 0:
        tg = np.empty(0)
    else:
        tg = np.unique(np.asarray(targets, dtype=float))
        lo, hi = min(x0, x1), max(x0, x1)
        tol = 1e-13 * max(1.0, abs(lo), abs(hi))
        tg = tg[(tg > lo + tol) & (tg < hi - tol)]
        if x1 < x0:
            tg = tg[::-1].copy()
        record = True
    xs, ys, ps, n, status = _integrate(coeffs, lam, float(x0), float(x1), y0, yp0,
                                       opts.rel_tol, opts.abs_tol, opts.max_steps,
                                       tg, record)
    _check_status(status, x0, x1, opts)
    return xs, ys, ps


def replay(coeffs, lam, grid, y0, yp0):
    lam, y0, yp0 = _as_kernel_types(lam, y0, yp0)
    return _replay(np.ascontiguousarray(coeffs, dtype=np.float64), lam,
                   np.ascontiguousarray(grid, dtype=np.float64), y0, yp0)


def integrate_ivp(q: Potential, lam, x0: float, x1: float, y0: StateVector,
                  opts: IntegratorOptions = DEFAULT_OPTIONS, *, side: str | None = None,
                  c: float | None = None) -> Trace:
    """Integrate from ``x0`` to ``x1`` (either direction) on one piece of ``q``.

    ``side`` selects the polynomial piece.  If ``c`` is given the interval
    must not contain it in its interior, and ``side`` may be inferred.
    """
    if x0 == x1:
        raise ValueError("x0 == x1")
    lo, hi = min(x0, x1), max(x0, x1)
    if c is not None:
        if lo < c < hi:
            raise StraddlesTransmissionPoint(f"[{lo}, {hi}] contains c={c}")
        if side is None:
            side = "left" if hi <= c else "right"
    if side is None:
        side = "left"
    coeffs = q.coeffs(side)
    xs, ys, ps = propagate(coeffs, lam, x0, x1, y0[0], y0[1], opts,
                           targets=opts.dense_output_points, record=True)
    return Trace(xs, ys, ps, lam, tuple(coeffs))
