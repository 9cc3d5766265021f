"""Problem description, transmission determinants, case tags and validation.

The problem is

    -y'' + q(x) y = lam y   on [a, c) U (c, b]

with a left condition ``a10 y(a) + a11 y'(a) = 0``, a right condition
``a20 y(b) - a21 y'(b) + lam (a20p y(b) - a21p y'(b)) = 0`` and two
transmission conditions at ``c``

    bm[i][0] y(c-) + bm[i][1] y'(c-) + bp[i][0] y(c+) + bp[i][1] y'(c+) = 0.

``beta`` stores row ``i`` as ``(bm[i][0], bm[i][1], bp[i][0], bp[i][1])``.

Determinant convention
----------------------
The minors ``d_kj`` in :class:`DeterminantSet` are taken from the 2x4 matrix
whose columns are ordered ``(bp[i][0], bp[i][1], bm[i][0], bm[i][1])``, i.e.
the ``c+`` block first (see :func:`minor_matrix`).  With this ordering the
closed-form jump maps

    y(c+)  =  (d23 y(c-) + d24 y'(c-)) / d12
    y'(c+) = -(d13 y(c-) + d14 y'(c-)) / d12

the Wronskian relation ``d12 * W[phi2, psi2] = d34 * W[phi1, psi1]`` and the
leading-order asymptotics all hold as written.  Taking minors of ``beta`` in
storage order instead swaps the roles ``d12 <-> d34`` and flips the sign of
``d13, d14, d23`` (``d24`` is unchanged); the jump formulas above then describe
the inverse map.  This was pinned down against the direct 2x2 linear solve in
:mod:`tsl.solutions`.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AtTransmissionPointWithoutSide,
    DegenerateBoundaryRow,
    OrderingViolation,
    PositivityViolation,
    ValidationError,
)

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Potential:
    """Piecewise polynomial potential, constant term first on each side."""

    left_coeffs: tuple[float, ...] = (0.0,)
    right_coeffs: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        left = tuple(float(v) for v in self.left_coeffs) or (0.0,)
        right = tuple(float(v) for v in self.right_coeffs) or (0.0,)
        object.__setattr__(self, "left_coeffs", left)
        object.__setattr__(self, "right_coeffs", right)

    @classmethod
    def zero(cls) -> "Potential":
        return cls((0.0,), (0.0,))

    @classmethod
    def constant(cls, value: float) -> "Potential":
        return cls((value,), (value,))

    def coeffs(self, side: str) -> np.ndarray:
        if side == "left":
            return np.asarray(self.left_coeffs, dtype=float)
        if side == "right":
            return np.asarray(self.right_coeffs, dtype=float)
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")

    @property
    def is_zero(self) -> bool:
        return not any(self.left_coeffs) and not any(self.right_coeffs)


@dataclass(frozen=True)
class ProblemSpec:
    a: float
    c: float
    b: float
    alpha10: float
    alpha11: float
    alpha20: float
    alpha21: float
    alpha20p: float
    alpha21p: float
    beta: tuple[tuple[float, float, float, float], tuple[float, float, float, float]]
    q: Potential = field(default_factory=Potential.zero)

    def __post_init__(self):
        rows = tuple(tuple(float(v) for v in row) for row in self.beta)
        if len(rows) != 2 or any(len(r) != 4 for r in rows):
            raise ValueError("beta must be a 2x4 matrix")
        object.__setattr__(self, "beta", rows)
        for name in ("a", "c", "b", "alpha10", "alpha11", "alpha20",
                     "alpha21", "alpha20p", "alpha21p"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def beta_array(self) -> np.ndarray:
        return np.array(self.beta, dtype=float)

    @property
    def minus_block(self) -> np.ndarray:
        """Coefficients multiplying ``(y(c-), y'(c-))``."""
        return self.beta_array[:, :2]

    @property
    def plus_block(self) -> np.ndarray:
        """Coefficients multiplying ``(y(c+), y'(c+))``."""
        return self.beta_array[:, 2:]

    @property
    def left_length(self) -> float:
        return self.c - self.a

    @property
    def right_length(self) -> float:
        return self.b - self.c

    def replace(self, **changes) -> "ProblemSpec":
        from dataclasses import replace

        return replace(self, **changes)

    # -- serialization -------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict) -> "ProblemSpec":
        alpha = data["alpha"]
        q = data.get("q", {})
        return cls(
            a=data["a"],
            c=data["c"],
            b=data["b"],
            alpha10=alpha.get("a10", 0.0),
            alpha11=alpha.get("a11", 0.0),
            alpha20=alpha.get("a20", 0.0),
            alpha21=alpha.get("a21", 0.0),
            alpha20p=alpha.get("a20p", 0.0),
            alpha21p=alpha.get("a21p", 0.0),
            beta=tuple(tuple(row) for row in data["beta"]),
            q=Potential(tuple(q.get("left", [0.0])), tuple(q.get("right", [0.0]))),
        )

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "c": self.c,
            "b": self.b,
            "alpha": {
                "a10": self.alpha10,
                "a11": self.alpha11,
                "a20": self.alpha20,
                "a21": self.alpha21,
                "a20p": self.alpha20p,
                "a21p": self.alpha21p,
            },
            "beta": [list(row) for row in self.beta],
            "q": {"left": list(self.q.left_coeffs), "right": list(self.q.right_coeffs)},
        }


def load_problem(path) -> ProblemSpec:
    """Read a problem file.  Raises ``json.JSONDecodeError``/``KeyError`` on bad input."""
    with open(path) as fh:
        data = json.load(fh)
    return ProblemSpec.from_dict(data)


def dump_problem(spec: ProblemSpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n")


# ---------------------------------------------------------------------------
# determinants


@dataclass(frozen=True)
class DeterminantSet:
    d0: float
    d12: float
    d13: float
    d14: float
    d23: float
    d24: float
    d34: float

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in ("d0", "d12", "d13", "d14", "d23", "d24", "d34")}

    @property
    def plucker(self) -> float:
        return self.d12 * self.d34 - self.d13 * self.d24 + self.d14 * self.d23


def minor_matrix(beta) -> np.ndarray:
    """2x4 matrix whose column minors are the transmission determinants."""
    beta = np.asarray(beta, dtype=float)
    return np.hstack([beta[:, 2:], beta[:, :2]])


def column_minors(matrix) -> dict[tuple[int, int], float]:
    """All six 2x2 column minors of a 2x4 matrix, 1-based keys."""
    m = np.asarray(matrix, dtype=float)
    out = {}
    for k in range(4):
        for j in range(k + 1, 4):
            out[(k + 1, j + 1)] = m[0, k] * m[1, j] - m[0, j] * m[1, k]
    return out


def compute_determinants(spec: ProblemSpec) -> DeterminantSet:
    minors = column_minors(minor_matrix(spec.beta))
    d0 = spec.alpha21 * spec.alpha20p - spec.alpha20 * spec.alpha21p
    dets = DeterminantSet(
        d0=d0,
        d12=minors[(1, 2)],
        d13=minors[(1, 3)],
        d14=minors[(1, 4)],
        d23=minors[(2, 3)],
        d24=minors[(2, 4)],
        d34=minors[(3, 4)],
    )
    terms = (dets.d12 * dets.d34, dets.d13 * dets.d24, dets.d14 * dets.d23)
    assert abs(dets.plucker) <= 8 * EPS * max(1.0, *map(abs, terms)), dets
    return dets


# ---------------------------------------------------------------------------
# case tags


class CaseTag(enum.Enum):
    I = "I"      # a21p != 0, a11 != 0
    II = "II"    # a21p != 0, a11 == 0
    III = "III"  # a21p == 0, a11 != 0
    IV = "IV"    # a21p == 0, a11 == 0

    def __str__(self):
        return self.value


def _is_zero(value: float, scale: float, zero_tol: float) -> bool:
    return abs(value) <= zero_tol * scale


def classify_case(spec: ProblemSpec, zero_tol: float = 1e-12) -> CaseTag:
    """Asymptotic regime from whether ``alpha21p`` and ``alpha11`` vanish.

    Zero tests are relative: ``alpha21p`` against the largest right-boundary
    coefficient, ``alpha11`` against the largest left one.
    """
    if zero_tol <= 0:
        raise ValueError("zero_tol must be positive")
    right = max(abs(spec.alpha20), abs(spec.alpha21), abs(spec.alpha20p), abs(spec.alpha21p))
    left = max(abs(spec.alpha10), abs(spec.alpha11))
    p_zero = _is_zero(spec.alpha21p, right or 1.0, zero_tol)
    l_zero = _is_zero(spec.alpha11, left or 1.0, zero_tol)
    if not p_zero:
        return CaseTag.II if l_zero else CaseTag.I
    return CaseTag.IV if l_zero else CaseTag.III


# ---------------------------------------------------------------------------
# validation


def check(spec: ProblemSpec, strict: bool = True) -> tuple[list[ValidationError], list[str]]:
    """Return ``(errors, warnings)`` without raising."""
    errors: list[ValidationError] = []
    warnings: list[str] = []
    vals = (spec.a, spec.c, spec.b, spec.alpha10, spec.alpha11, spec.alpha20,
            spec.alpha21, spec.alpha20p, spec.alpha21p, *np.ravel(spec.beta))
    if not all(math.isfinite(v) for v in vals):
        errors.append(ValidationError("non-finite coefficient"))
    if not (spec.a < spec.c < spec.b):
        errors.append(OrderingViolation(
            f"need a < c < b, got a={spec.a}, c={spec.c}, b={spec.b}"))
    if spec.alpha10 == 0 and spec.alpha11 == 0:
        errors.append(DegenerateBoundaryRow("left boundary row (a10, a11) is zero"))
    if (spec.alpha20 == 0 and spec.alpha21 == 0
            and spec.alpha20p == 0 and spec.alpha21p == 0):
        errors.append(DegenerateBoundaryRow("right boundary rows are both zero"))
    dets = compute_determinants(spec)
    for name, value in (("d0", dets.d0), ("d12", dets.d12), ("d34", dets.d34)):
        if not value > 0:
            exc = PositivityViolation(name, value)
            if strict:
                errors.append(exc)
            else:
                warnings.append(str(exc))
    return errors, warnings


def validate(spec: ProblemSpec, strict: bool = True) -> list[str]:
    """Raise the first violation found; return warnings otherwise.

    In permissive mode positivity violations become warnings, so that
    classical continuous problems (``d0 = 0``) can be run as oracles.
    """
    errors, warnings = check(spec, strict)
    if errors:
        raise errors[0]
    return warnings


# ---------------------------------------------------------------------------
# potential


def horner(coeffs, x):
    acc = 0.0 * x
    for cf in reversed(coeffs):
        acc = acc * x + cf
    return acc


def eval_q(q: Potential, x: float, side: str = "auto", c: float | None = None) -> float:
    """Evaluate the potential; ``side='auto'`` needs the transmission point ``c``."""
    if side == "auto":
        if c is None:
            raise ValueError("side='auto' requires the transmission point c")
        if x == c:
            raise AtTransmissionPointWithoutSide(
                "q is two-valued at c; pass side='left' or 'right'")
        side = "left" if x < c else "right"
    return float(horner(q.coeffs(side), x))


def sup_abs_q(spec: ProblemSpec, side: str | None = None, n: int = 513) -> float:
    """Max of |q| over one or both pieces (polynomial, sampled densely)."""
    sides = ("left", "right") if side is None else (side,)
    best = 0.0
    for sd in sides:
        lo, hi = (spec.a, spec.c) if sd == "left" else (spec.c, spec.b)
        xs = np.linspace(lo, hi, n)
        best = max(best, float(np.max(np.abs(horner(spec.q.coeffs(sd), xs)))))
    return best
