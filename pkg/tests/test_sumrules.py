import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opuc_sumrules import CircleMeasure, CoefficientSequence, DomainError, Tail
from opuc_sumrules.ensembles import gw, gw_equilibrium_alphas, hp
from opuc_sumrules.measures import TWO_PI
from opuc_sumrules.rates import H_d, H_gw, outlier_rate_hp
from opuc_sumrules.sumrules import (
    SumRuleCase,
    build_outlier_case,
    count_escaped_eigenvalues,
    gems_check_hp,
    gw_strong_rhs,
    probe_gw_gapped,
    run_batch,
    verify_gw_strong,
    verify_hp,
    verify_szego_verblunsky,
)

from strategies import disk, disk_lists


def plain(*vals):
    return CoefficientSequence("plain", np.array(vals, dtype=complex))


def near_equilibrium(d, offsets):
    gd = -d / (1 + d)
    return CoefficientSequence("deformed", gd + np.array(offsets, dtype=complex), Tail.constant(gd))


def test_uniform_sides_vanish():
    rep = verify_szego_verblunsky(plain(0.0))
    assert rep.lhs_total == pytest.approx(0.0, abs=1e-12)
    assert rep.rhs_total == 0.0
    assert rep.status == "verified"


def test_bernstein_szego_single_coefficient():
    rep = verify_szego_verblunsky(plain(0.6))
    assert rep.rhs_total == pytest.approx(-np.log(0.64), abs=1e-15)
    assert rep.lhs_total == pytest.approx(0.44629, abs=1e-5)
    assert rep.residual <= 1e-8


@settings(deadline=None, max_examples=10)
@given(disk_lists(1, 5, 0.8))
def test_random_bernstein_szego(vals):
    rep = verify_szego_verblunsky(plain(*vals))
    assert rep.residual <= 1e-6
    assert rep.rhs_total == pytest.approx(-np.sum(np.log(1 - np.abs(vals) ** 2)), abs=1e-12)


def test_finite_support_is_rhs_infinite():
    rep = verify_szego_verblunsky(plain(0.3, 1.0))
    assert rep.status in ("rhs_infinite", "lhs_infinite")
    assert math.isinf(rep.rhs_total)


def test_trivial_measure_is_rhs_infinite():
    rep = verify_szego_verblunsky(CoefficientSequence("plain", np.array([1.0 + 0j])))
    assert math.isinf(rep.rhs_total)


@settings(deadline=None, max_examples=8)
@given(disk_lists(1, 4, 0.7))
def test_hp_at_zero_is_szego(vals):
    seq = plain(*vals)
    a, b = verify_hp(seq, 0.0), verify_szego_verblunsky(seq)
    assert a.lhs_total == pytest.approx(b.lhs_total, abs=1e-12)
    assert a.rhs_total == pytest.approx(b.rhs_total, abs=1e-12)
    assert a.status == b.status


@pytest.mark.parametrize("d", [0.5, 1.0, 2.0])
def test_hp_equilibrium_sides_vanish(d):
    rep = verify_hp(near_equilibrium(d, [0.0]), d)
    assert rep.lhs_total == pytest.approx(0.0, abs=1e-10)
    assert rep.rhs_total == pytest.approx(0.0, abs=1e-14)


def test_hp_single_perturbation():
    rep = verify_hp(near_equilibrium(1.0, [0.03]), 1.0)
    assert not rep.outlier_minus and not rep.outlier_plus
    assert rep.lhs_total == rep.kl_term
    assert rep.rhs_total == pytest.approx(H_d(-0.47, 1.0), abs=1e-15)
    assert rep.residual <= 1e-4


@settings(deadline=None, max_examples=6)
@given(st.sampled_from([0.5, 1.0, 2.0]), st.lists(disk(0.05), min_size=1, max_size=5))
def test_hp_small_perturbations(d, offsets):
    rep = verify_hp(near_equilibrium(d, offsets), d)
    assert rep.status == "verified"
    assert rep.residual <= 1e-4


def test_hp_negative_d_rejected():
    with pytest.raises(DomainError):
        verify_hp(near_equilibrium(1.0, [0.0]), -1.0)


def test_hp_density_outside_arc_is_lhs_infinite():
    uniform = CircleMeasure(0.0, TWO_PI, lambda t: 1.0)
    assert verify_hp(uniform, 1.0).status == "lhs_infinite"


@pytest.fixture(scope="module")
def outlier_case():
    return build_outlier_case(1.0)


def test_outlier_case_has_one_escaped_eigenvalue(outlier_case):
    found = count_escaped_eigenvalues(outlier_case, hp(1.0).arc)
    assert len(found) == 1


def test_outlier_case_sum_rule(outlier_case):
    rep = verify_hp(outlier_case, 1.0, tol=1e-3)
    assert rep.status == "verified"
    assert len(rep.outlier_minus) + len(rep.outlier_plus) == 1
    (theta, rate), = rep.outlier_minus + rep.outlier_plus
    side = "minus" if rep.outlier_minus else "plus"
    assert rate == pytest.approx(outlier_rate_hp(theta, 1.0, side))
    assert rep.lhs_total == pytest.approx(rep.kl_term + rate, abs=1e-14)


def test_gw_trivial_sides_equal_constant():
    rep = verify_gw_strong(plain(0.0), 0.5)
    assert rep.lhs_total == pytest.approx(H_gw(0.5), abs=1e-10)
    assert rep.rhs_total == pytest.approx(H_gw(0.5), abs=1e-15)


def test_gw_one_half_coefficient():
    rep = verify_gw_strong(plain(-0.5), 1.0)
    assert rep.status == "verified"
    assert rep.residual <= 1e-6


def test_gw_sign_convention_pinned_by_equilibrium():
    alphas = np.array([gw_equilibrium_alphas(-1.0, k) for k in range(2000)])
    assert alphas[:3] == pytest.approx([-1 / 2, -1 / 3, -1 / 4], abs=1e-14)
    ref = gw(-1.0).measure()
    good = verify_gw_strong(CoefficientSequence("plain", alphas), 1.0, measure=ref)
    flipped = verify_gw_strong(CoefficientSequence("plain", -alphas), 1.0, measure=ref)
    assert good.lhs_total == pytest.approx(0.0, abs=1e-12)
    assert good.residual <= 1e-6
    assert flipped.residual > 0.5


@settings(deadline=None)
@given(disk_lists(1, 8, 0.9), st.floats(0.0, 1.0))
def test_gw_rhs_forms_agree(vals, g):
    forms = gw_strong_rhs(np.array(vals), g)
    assert forms["trace_form"] == pytest.approx(forms["difference_form"], abs=1e-12)


@settings(deadline=None, max_examples=8)
@given(disk_lists(1, 4, 0.7), st.sampled_from([0.5, 1.0]))
def test_gw_strong_on_bernstein_szego(vals, g):
    rep = verify_gw_strong(plain(*vals), g)
    assert rep.residual <= 1e-6
    assert rep.diagnostics["form_gap"] <= 1e-12


def test_gw_strong_rejects_coupling():
    with pytest.raises(DomainError):
        verify_gw_strong(plain(0.1), 1.5)


def test_gapped_probe_is_labeled():
    rep = probe_gw_gapped(gw(-2.0).measure(), -2.0)
    assert rep.label == "CONJECTURE"
    assert rep.status == "probe"
    assert rep.lhs_total == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DomainError):
        probe_gw_gapped(gw(-2.0).measure(), -0.5)


def test_gems_equilibrium():
    out = gems_check_hp(hp(1.0).measure(), 1.0)
    assert out["in_S1T"] and out["edge_sum_finite"] and out["szego_integral_finite"]
    assert out["coefficient_sum"] == pytest.approx(0.0, abs=1e-20)
    assert out["status"] == "consistent"


def test_gems_atoms_accumulating_at_edge():
    edge = hp(1.0).edge
    mu = hp(1.0).measure().with_atoms([(edge - 0.5 / j, 0.01) for j in range(1, 8)])
    out = gems_check_hp(mu, 1.0)
    assert out["in_S1T"] and out["edge_sum_finite"] and out["szego_integral_finite"]
    assert out["edge_sum"] == pytest.approx(sum((0.5 / j) ** 1.5 for j in range(1, 8)), abs=1e-12)
    assert out["status"] != "inconsistent"


def test_gems_atom_at_one_fails():
    out = gems_check_hp(hp(1.0).measure().with_atoms([(0.0, 0.05)]), 1.0)
    assert not out["edge_sum_finite"]
    assert out["coefficient_sum"] == math.inf
    assert out["status"] == "consistent"


def test_case_rule_compatibility():
    with pytest.raises(DomainError):
        SumRuleCase("gw_strong", 2.0, coefficients=plain(0.1))
    with pytest.raises(DomainError):
        SumRuleCase("gw_gapped_conjecture", -0.5, coefficients=plain(0.1))
    with pytest.raises(DomainError):
        SumRuleCase("hp", 1.0)
    assert SumRuleCase("hp", 1.0, coefficients=plain(0.1)).measure_source == "from_coefficients"


def test_batch_is_ordered_and_matches_serial():
    cases = [SumRuleCase("szego_verblunsky", coefficients=plain(a), case_id=f"c{i}") for i, a in enumerate([0.5, 0.1, 0.3])][::-1]
    out = run_batch(cases, jobs=2)
    assert list(out) == ["c0", "c1", "c2"]
    assert out["c0"].rhs_total == pytest.approx(-np.log(0.75), abs=1e-15)
    serial = run_batch(cases, jobs=1)
    assert [r.residual for r in out.values()] == [r.residual for r in serial.values()]
    with pytest.raises(DomainError):
        run_batch(cases + cases)
