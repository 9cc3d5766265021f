import math

import numpy as np
import pytest

from tsl import CaseTag
from tsl.errors import DegenerateLeadingCoefficient, LostBracket, NotAnEigenvalue
from tsl.spectrum import (AsymptoticSeed, Eigenpair, asymptotic_seeds, brackets_from_grid,
                          certificate, eigenfunction, eigenvalues, eigenvalues_in_range,
                          has_seeds, label_branches, lambda_floor, refine)

from conftest import problem, read_oracle


def test_classical_eigenvalues(classical):
    eigs = eigenvalues(classical, 10)
    exact = (np.arange(1, 11) * math.pi / 2) ** 2
    got = np.array([e.lam for e in eigs])
    assert np.max(np.abs(got - exact) / exact) < 1e-10


def test_p2_against_oracle(p2, p2_oracle):
    eigs = eigenvalues(p2, 11)
    assert np.allclose([e.lam for e in eigs], p2_oracle[:11], rtol=1e-9, atol=1e-9)


def test_negative_eigenvalue_found():
    spec = problem("negative_eigenvalue")
    oracle = read_oracle("negative_oracle.csv")
    assert lambda_floor(spec) < oracle[0]
    eigs = eigenvalues(spec, len(oracle))
    assert np.allclose([e.lam for e in eigs], oracle, rtol=1e-9, atol=1e-9)
    assert eigs[0].s_is_imaginary and eigs[0].s == pytest.approx(math.sqrt(-oracle[0]))


def test_range_scan_matches_count_scan(p2, p2_oracle):
    eigs = eigenvalues_in_range(p2, 3.0, 120.0, check_completeness=True)
    expect = p2_oracle[(p2_oracle >= 3.0) & (p2_oracle <= 120.0)]
    assert np.allclose([e.lam for e in eigs], expect, rtol=1e-9)


def test_resonant_pairs_are_split():
    # equal piece lengths in case IV: both branches share every seed
    spec = problem("case_iv")
    seeds = asymptotic_seeds(spec, 10, 14)
    assert len({round(sd.s_pred, 9) for sd in seeds}) < len(seeds)
    lo, hi = (seeds[0].s_pred - 1.0) ** 2, (seeds[-1].s_pred + 1.0) ** 2
    eigs = eigenvalues_in_range(spec, lo, hi, check_completeness=True)
    # every seed value in range carries one root per branch
    values = {round(sd.s_pred, 9) for sd in seeds}
    assert len(eigs) == 2 * len(values)
    gaps = np.diff([e.s for e in eigs])
    assert np.min(gaps) < 0.2 < np.max(gaps)


def test_residual_and_bracket(p2):
    for e in eigenvalues(p2, 5):
        assert e.residual < 1e-10
        assert e.bracket[0] <= e.lam <= e.bracket[1]


def test_seed_table_consistent_vs_literal():
    spec = problem("case_ii")
    (b1, b2) = asymptotic_seeds(spec, 5, 5)[:2]
    cons = {sd.branch: sd.s_pred for sd in asymptotic_seeds(spec, 5, 5)}
    lit = {sd.branch: sd.s_pred for sd in asymptotic_seeds(spec, 5, 5, convention="literal")}
    L1, L2 = spec.right_length, spec.left_length
    assert cons == pytest.approx({1: 4 * math.pi / L1, 2: 5.5 * math.pi / L2})
    assert lit == pytest.approx({1: 5.5 * math.pi / L1, 2: 4 * math.pi / L2})
    assert b1.case is CaseTag.II


@pytest.mark.parametrize("name,offs", [("case_i", (-2, 0)), ("case_iii", (0.5, -1)),
                                       ("case_iv", (-0.5, 0.5))])
def test_seed_offsets(name, offs):
    spec = problem(name)
    got = {sd.branch: sd.s_pred for sd in asymptotic_seeds(spec, 7, 7)}
    assert got[1] == pytest.approx((7 + offs[0]) * math.pi / spec.right_length)
    assert got[2] == pytest.approx((7 + offs[1]) * math.pi / spec.left_length)


def test_no_seeds_without_d24(classical):
    assert not has_seeds(classical)
    with pytest.raises(DegenerateLeadingCoefficient):
        asymptotic_seeds(classical, 1, 3)


def test_label_branches_window():
    seeds = [AsymptoticSeed(10.0, 1, 3, CaseTag.IV), AsymptoticSeed(11.0, 2, 3, CaseTag.IV)]
    eigs = [Eigenpair(10.1 ** 2, 0.0, (0, 0)), Eigenpair(10.6 ** 2, 0.0, (0, 0)),
            Eigenpair(-1.0, 0.0, (0, 0))]
    out = label_branches(eigs, seeds)
    assert (out[0].branch, out[0].n_index) == (1, 3)
    assert (out[1].branch, out[1].n_index) == (2, 3)
    # second eigenvalue loses seed 1 and is too far from seed 2 (window 0.5)
    crowd = label_branches([Eigenpair(10.1 ** 2, 0.0, (0, 0)),
                            Eigenpair(10.2 ** 2, 0.0, (0, 0))], seeds)
    assert crowd[0].branch == 1 and crowd[1].branch is None
    assert out[2].branch is None


def test_label_ties_go_to_lower_branch():
    seeds = [AsymptoticSeed(5.0, 2, 1, CaseTag.IV), AsymptoticSeed(5.0, 1, 1, CaseTag.IV)]
    out = label_branches([Eigenpair(25.0, 0.0, (0, 0))], seeds)
    assert out[0].branch == 1


def test_refine_lost_bracket(p2, p2_oracle):
    with pytest.raises(LostBracket):
        refine(p2, (10.0, 10.5))
    e = refine(p2, (p2_oracle[2] - 0.5, p2_oracle[2] + 0.5))
    assert e.lam == pytest.approx(p2_oracle[2], rel=1e-10)


def test_brackets_from_grid():
    grid = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
    vals = np.array([1.0, -1.0, -2.0, 0.0, 3.0])
    brs = brackets_from_grid(grid, vals)
    assert [(b.lo, b.hi) for b in brs][:1] == [(0.0, 1.0)]
    assert any(b.lo <= 3.0 <= b.hi for b in brs)


def test_eigenfunction_classical(classical):
    e = eigenvalues(classical, 1)[0]
    ef = eigenfunction(classical, e)
    xs = np.linspace(0.0, 0.9, 10)
    y, _ = ef.sample(xs, "left")
    assert np.allclose(y, np.sin(math.pi * xs / 2), atol=1e-9)
    assert ef.max_norm() == pytest.approx(1.0, abs=1e-12)


def test_eigenfunction_rejects_non_eigenvalue(p2):
    with pytest.raises(NotAnEigenvalue):
        eigenfunction(p2, 10.0)


def test_certificates(p2):
    for e in eigenvalues(p2, 6):
        cert = certificate(p2, e)
        assert np.max(cert["conditions"]) < 1e-8
        assert max(cert["proportionality"]) < 1e-6


def test_count_must_be_positive(p2):
    with pytest.raises(ValueError):
        eigenvalues(p2, 0)
