import math

import numpy as np
import pytest

from tsl import compute_determinants, phi, psi
from tsl.charfun import (charfun, charfun_sample, charfun_via_boundary, count_zeros,
                         omega_and_derivative, omega_many, winding_number, wronskian)
from tsl.errors import PieceMismatch

from conftest import problem, random_instance


def test_classical_closed_form(classical):
    # q = 0, Dirichlet at 0 and 2: omega = -sin(2 s) / s
    for lam in (0.7, 3.0, 20.0, 111.0):
        s = math.sqrt(lam)
        assert charfun(classical, lam) == pytest.approx(-math.sin(2 * s) / s, abs=1e-11)


@pytest.mark.parametrize("lam", [2.0, 37.5, -4.0, 10.0 + 3.0j])
def test_three_routes_agree(lam):
    spec = problem("case_i")
    ref = charfun(spec, lam)
    for path in ("via_phi_at_b", "via_psi_at_a", "via_wronskian_midpoint"):
        w = charfun_sample(spec, lam, path).w
        assert abs(w - ref) <= 1e-9 * max(1.0, abs(ref))
    assert abs(charfun_via_boundary(spec, lam, path="A") - ref) <= 1e-9 * max(1.0, abs(ref))


def test_check_flag():
    spec = problem("case_ii")
    assert charfun(spec, 12.0, check=True) == pytest.approx(charfun(spec, 12.0))


def test_conjugate_symmetry(rng):
    spec = random_instance(rng)
    for _ in range(5):
        lam = complex(rng.uniform(-20, 80), rng.uniform(0.5, 8))
        w1, w2 = omega_many(spec, [lam, lam.conjugate()])
        assert abs(w1 - np.conj(w2)) <= 1e-12 * max(1.0, abs(w1))


def test_real_lambda_gives_real_omega(p2):
    w = charfun(p2, 5.0)
    assert isinstance(w, float)


def test_wronskian_is_constant(rng):
    spec = random_instance(rng)
    lam = 17.0
    ph, ps = phi(spec, lam), psi(spec, lam)
    d = compute_determinants(spec)
    wl = wronskian(ph, ps, np.linspace(spec.a, spec.c, 7, endpoint=False), "left")
    wr = wronskian(ph, ps, np.linspace(spec.c, spec.b, 7)[1:], "right")
    assert np.ptp(wl) <= 1e-9 * np.max(np.abs(wl))
    assert np.ptp(wr) <= 1e-9 * np.max(np.abs(wr))
    assert d.d34 * wl[0] == pytest.approx(d.d12 * wr[0], rel=1e-9)


def test_wronskian_rejects_mixed_lambda(p2):
    with pytest.raises(PieceMismatch):
        wronskian(phi(p2, 1.0), psi(p2, 2.0), 0.5, "left")


def test_derivative_by_central_difference(p2):
    lams = np.array([3.0, 40.0, 7.0 + 2.0j])
    w, dw = omega_and_derivative(p2, lams)
    h = 1e-5
    fd = (omega_many(p2, lams + h, path="via_psi_at_a")
          - omega_many(p2, lams - h, path="via_psi_at_a")) / (2 * h)
    assert np.allclose(dw, fd, rtol=1e-5, atol=1e-7)
    assert np.allclose(w, omega_many(p2, lams, path="via_psi_at_a"), rtol=1e-12)


def test_threaded_is_deterministic(p2):
    lams = np.linspace(-5, 300, 400)
    a = omega_many(p2, lams, threads=1)
    b = omega_many(p2, lams, threads=4)
    assert np.array_equal(a, b)


def test_winding_counts_classical(classical):
    # roots (n pi / 2)^2: 2.47, 9.87, 22.2, 39.5
    res = winding_number(classical, (-10.0, 30.0))
    assert res.count == 3 and res.error < 0.25
    assert count_zeros(classical, (5.0, 45.0)) == 3


def test_winding_rejects_bad_range(classical):
    with pytest.raises(ValueError):
        winding_number(classical, (3.0, 1.0))


def test_unknown_path(p2):
    with pytest.raises(ValueError):
        omega_many(p2, [1.0], path="nope")
