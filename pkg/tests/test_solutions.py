import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsl import Potential, boundary_residuals, compute_determinants, phi, psi
from tsl.errors import PieceMismatch, SingularPlusBlock
from tsl.solutions import (integral_residual, jump_backward_closed_form,
                           jump_forward_closed_form, picard_phi2, picard_run,
                           picard_sup_q, picard_truncation_bound, transmission_backward,
                           transmission_forward, transmission_residuals)

from conftest import problem, random_instance

coef = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=150, deadline=None)
@given(st.lists(coef, min_size=8, max_size=8), coef, coef)
def test_transmission_round_trip(vals, y, yp):
    beta = np.array(vals).reshape(2, 4)
    if abs(np.linalg.det(beta[:, 2:])) < 0.05 or abs(np.linalg.det(beta[:, :2])) < 0.05:
        return
    spec = problem("p2").replace(beta=tuple(map(tuple, beta)))
    d = compute_determinants(spec)
    plus = transmission_forward(d, spec.beta, (y, yp))
    res = transmission_residuals(spec.beta, (y, yp), plus)
    scale = max(1.0, abs(y), abs(yp)) * max(1.0, np.abs(beta).max()) ** 2 / abs(d.d12)
    assert np.max(np.abs(res)) < 1e-12 * scale
    back = transmission_backward(d, spec.beta, plus)
    assert np.allclose(back, (y, yp), rtol=1e-11, atol=1e-11 * scale)


def test_closed_form_jumps_match_linear_solve(rng):
    for _ in range(20):
        spec = random_instance(rng)
        d = compute_determinants(spec)
        v = rng.normal(size=2)
        assert np.allclose(jump_forward_closed_form(d, v),
                           transmission_forward(d, spec.beta, v), rtol=1e-12, atol=1e-12)
        assert np.allclose(jump_backward_closed_form(d, v),
                           transmission_backward(d, spec.beta, v), rtol=1e-12, atol=1e-12)


def test_singular_plus_block(p2):
    spec = p2.replace(beta=((1, 0, 1, 1), (0, 1, 1, 1)))
    with pytest.raises(SingularPlusBlock):
        transmission_forward(compute_determinants(spec), spec.beta, (1.0, 0.0))


def test_phi_psi_satisfy_their_conditions(rng):
    for _ in range(5):
        spec = random_instance(rng)
        lam = rng.uniform(-5, 60)
        r_phi = boundary_residuals(spec, phi(spec, lam))
        r_psi = boundary_residuals(spec, psi(spec, lam))
        assert abs(r_phi[0]) < 1e-14 and np.all(np.abs(r_phi[2:]) < 1e-12)
        assert abs(r_psi[1]) < 1e-12 and np.all(np.abs(r_psi[2:]) < 1e-10)


def test_coupling_transmission_is_discontinuous(p2):
    sol = phi(p2, 3.0)
    assert abs(sol.state_minus.y - sol.state_plus.y) > 1e-3
    assert np.max(np.abs(transmission_residuals(p2.beta, sol.state_minus, sol.state_plus))) < 1e-13


def test_sample_needs_side_at_c(p2):
    sol = phi(p2, 3.0)
    with pytest.raises(PieceMismatch):
        sol.sample([0.5, 1.5])
    y, _ = sol.sample([1.0], "right")
    assert y[0] == pytest.approx(sol.state_plus.y, abs=1e-14)


def test_classical_phi_is_sine(classical):
    s = math.pi / 2
    sol = phi(classical, s * s)
    xs = np.linspace(1.1, 2.0, 5)
    y, _ = sol.sample(xs, "right")
    # phi(0) = a11 = 0, phi'(0) = -a10 = -1
    assert np.allclose(y, -np.sin(s * xs) / s, atol=1e-11)


@pytest.mark.parametrize("lam", [1.0, 10.0, 100.0, 5.0 + 2.0j])
def test_integral_residuals(lam):
    spec = problem("case_i")
    xs_l = np.linspace(spec.a, spec.c, 10)
    xs_r = np.linspace(spec.c, spec.b, 10)
    ph, ps = phi(spec, lam), psi(spec, lam)
    for which, sol, xs in (("phi1", ph, xs_l), ("phi2", ph, xs_r),
                           ("psi1", ps, xs_l), ("psi2", ps, xs_r)):
        for k in (0, 1):
            assert integral_residual(spec, sol, which, k, xs) < 1e-8


def test_integral_residual_kind_mismatch():
    spec = problem("case_i")
    with pytest.raises(PieceMismatch):
        integral_residual(spec, phi(spec, 2.0), "psi1", 0, [0.5])


@pytest.mark.parametrize("lam", [1.0, -7.0, 40.0])
def test_picard_agrees_with_shooting(lam):
    spec = problem("case_iii")
    tr = picard_phi2(spec, lam)
    ref = phi(spec, lam).right.ordered()
    assert tr.y[-1] == pytest.approx(ref.y[-1], rel=1e-8, abs=1e-10)
    assert tr.yp[-1] == pytest.approx(ref.yp[-1], rel=1e-8, abs=1e-9)


def test_picard_y0_matches_jump(p2):
    lam = 4.0
    left = phi(p2, lam).state_minus
    run = picard_run(p2, lam, 1, left)
    plus = transmission_forward(compute_determinants(p2), p2.beta, left)
    assert run.iterates[0][0] == pytest.approx(plus.y, abs=1e-14)
    assert run.derivs[0][0] == pytest.approx(plus.yp, abs=1e-14)


def _increments_within(spec, lam, n_terms, form):
    left = phi(spec, lam).state_minus
    run = picard_run(spec, lam, n_terms, left)
    q1 = picard_sup_q(spec)
    ok = True
    for n, inc in enumerate(run.increments(), start=1):
        bound = np.array([picard_truncation_bound(run.y0_max, q1, abs(lam), x, spec.c, n, form)
                          for x in run.xs])
        # increments below ~1e-12 Y are quadrature noise, not resolvable
        ok &= bool(np.all(inc <= bound + 1e-12 * run.y0_max))
    return ok


def test_additive_bound_fails_when_q_below_lambda_range():
    # sup|q - lam| = 2 > |lam| = 1: the additive bound is not a valid majorant
    spec = problem("p2").replace(q=Potential((0.0,), (-1.0,)), b=4.0)
    assert not _increments_within(spec, 1.0, 25, "additive")
    assert _increments_within(spec, 1.0, 25, "power")


@pytest.mark.parametrize("lam", [1.0, 10.0, 50.0])
def test_bound_holds_in_valid_regime(p2, lam):
    assert _increments_within(p2, lam, 25, "additive")
    spec = p2.replace(q=Potential((0.0,), (0.0, 2.5 / 1.6, -1 / 1.6)))
    assert _increments_within(spec, lam, 25, "additive")


def test_truncation_bound_values():
    b = picard_truncation_bound(2.0, 1.0, 3.0, 1.5, 1.0, 2)
    assert b == pytest.approx(2.0 * (1.0 + 9.0) * 0.5 ** 4 / 24)
    assert picard_truncation_bound(2.0, 1.0, 3.0, 1.0, 1.0, 2) == 0.0
    with pytest.raises(ValueError):
        picard_truncation_bound(1, 1, 1, 1, 0, 0)
