import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsl import (CaseTag, OrderingViolation, PositivityViolation, Potential, ProblemSpec,
                 classify_case, compute_determinants, eval_q, validate)
from tsl.errors import AtTransmissionPointWithoutSide, DegenerateBoundaryRow
from tsl.model import dump_problem, load_problem, sup_abs_q

from conftest import problem

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def test_p2_determinants_by_hand(p2):
    d = compute_determinants(p2)
    # beta = [[1, .5, -1, 0], [0, 1, 0, -2]]; minors of [plus | minus]
    assert (d.d12, d.d34, d.d24, d.d23, d.d14, d.d13) == (2.0, 1.0, 1.0, 2.0, -1.0, 0.0)
    assert d.d0 == 1.0
    assert classify_case(p2) is CaseTag.IV


def test_identity_transmission_determinants(classical):
    d = compute_determinants(classical)
    assert d.d12 == 1.0 and d.d34 == 1.0
    assert d.d13 == d.d24 == 0.0
    # identity: d14 and d23 carry the sign of the off-diagonal pairing
    assert abs(d.d14) == 1.0 and abs(d.d23) == 1.0


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=8, max_size=8))
def test_plucker_identity(vals):
    beta = (tuple(vals[:4]), tuple(vals[4:]))
    d = compute_determinants(ProblemSpec(0, 1, 2, 1, 0, 1, 0, 0, 0, beta))
    scale = max(1.0, abs(d.d12 * d.d34), abs(d.d13 * d.d24), abs(d.d14 * d.d23))
    assert abs(d.plucker) <= 1e-13 * scale


@settings(max_examples=100, deadline=None)
@given(finite, finite, finite, finite, st.floats(0.1, 10))
def test_case_is_scale_invariant(a10, a11, a20p, a21p, k):
    spec = ProblemSpec(0, 1, 2, a10 or 1.0, a11, 1.0, 0.5, a20p, a21p,
                       ((1, 0, -1, 0), (0, 1, 0, -1)))
    scaled = spec.replace(alpha10=k * spec.alpha10, alpha11=k * a11,
                          alpha20=k, alpha21=0.5 * k, alpha20p=k * a20p, alpha21p=k * a21p)
    assert classify_case(spec) is classify_case(scaled)


@pytest.mark.parametrize("a11,a21p,tag", [(1.3, 0.6, CaseTag.I), (0.0, 0.6, CaseTag.II),
                                          (1.3, 0.0, CaseTag.III), (0.0, 0.0, CaseTag.IV)])
def test_classify(a11, a21p, tag):
    spec = problem("case_i").replace(alpha11=a11, alpha21p=a21p)
    assert classify_case(spec) is tag


def test_classify_relative_zero():
    spec = problem("case_i").replace(alpha11=1e-15)
    assert classify_case(spec) is CaseTag.II
    with pytest.raises(ValueError):
        classify_case(spec, zero_tol=0)


def test_bundled_cases_match_names():
    for name, tag in (("case_i", "I"), ("case_ii", "II"), ("case_iii", "III"), ("case_iv", "IV")):
        assert str(classify_case(problem(name))) == tag


def test_validate_ordering():
    with pytest.raises(OrderingViolation):
        validate(problem("bad_order"))


def test_validate_classical_needs_permissive(classical):
    with pytest.raises(PositivityViolation, match="d0"):
        validate(classical)
    warnings = validate(classical, strict=False)
    assert any("d0" in w for w in warnings)


def test_validate_negative_d12(p2):
    flipped = p2.replace(beta=(p2.beta[1], p2.beta[0]))
    with pytest.raises(PositivityViolation):
        validate(flipped)


def test_validate_degenerate_rows(p2):
    with pytest.raises(DegenerateBoundaryRow):
        validate(p2.replace(alpha10=0.0, alpha11=0.0))


def test_bundled_problems_valid():
    for name in ("p2", "case_i", "case_ii", "case_iii", "case_iv", "negative_eigenvalue",
                 "identity_lambda"):
        validate(problem(name))


def test_round_trip_json(tmp_path):
    spec = problem("case_i")
    path = tmp_path / "x.json"
    dump_problem(spec, path)
    assert load_problem(path) == spec
    assert json.loads(path.read_text())["alpha"]["a21p"] == spec.alpha21p


def test_beta_shape():
    with pytest.raises(ValueError):
        ProblemSpec(0, 1, 2, 1, 0, 1, 0, 0, 0, ((1, 0, 0), (0, 1, 0)))


def test_eval_q_sides():
    spec = problem("case_i")
    assert eval_q(spec.q, 0.5, "left") == pytest.approx(1 + 2 * 0.5 - 0.25)
    assert eval_q(spec.q, 1.5, "right") == pytest.approx(0.5 - 0.3 * 1.5)
    assert eval_q(spec.q, 1.5, c=spec.c) == eval_q(spec.q, 1.5, "right")
    with pytest.raises(AtTransmissionPointWithoutSide):
        eval_q(spec.q, 1.0, c=spec.c)


def test_sup_abs_q():
    spec = problem("case_i")
    # left piece 1 + 2x - x^2 on [0, 1] peaks at x = 1 with value 2
    assert sup_abs_q(spec, "left") == pytest.approx(2.0, rel=1e-6)
    assert Potential.zero().is_zero
    assert math.isclose(sup_abs_q(problem("p2")), 0.0)


def test_potential_coeffs_are_arrays():
    q = Potential((1.0, 2.0), (3.0,))
    assert np.allclose(q.coeffs("left"), [1.0, 2.0])
    assert np.allclose(q.coeffs("right"), [3.0])
