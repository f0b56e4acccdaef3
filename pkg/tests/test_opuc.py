import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opuc_sumrules import CoefficientSequence, DomainError, Tail
from opuc_sumrules.ensembles import gw_equilibrium, hp
from opuc_sumrules.measures import TWO_PI
from opuc_sumrules.opuc import (
    SchurFunction,
    alphas_from_deformed,
    caratheodory_density,
    caratheodory_eval,
    cmv_assemble,
    cmv_trace,
    deformed_from_alphas,
    detect_atoms,
    measure_from_coefficients,
    moments_of_measure,
    orthogonal_polynomials,
    reversed_polynomial,
    schur_eval,
    spectral_measure_finite,
    szego_step,
    verblunsky_from_measure,
    verblunsky_from_moments,
)

from strategies import disk, disk_lists, unimodular


def test_free_step():
    phi, star = szego_step(np.ones(1), np.ones(1), 0.0)
    assert np.allclose(phi, [0, 1]) and np.allclose(star, [1, 0])


def test_half_step_expands_by_hand():
    phi, star = szego_step(np.ones(1), np.ones(1), -0.5)
    assert np.allclose(phi, [0.5, 1]) and np.allclose(star, [1, 0.5])


def test_step_outside_disk_fails():
    with pytest.raises(DomainError):
        szego_step(np.ones(1), np.ones(1), 1.5)


@settings(deadline=None)
@given(disk_lists(max_size=5))
def test_polynomials_are_monic_and_reverse_consistently(alphas):
    polys = orthogonal_polynomials(alphas)
    for k, phi in enumerate(polys):
        assert phi[-1] == pytest.approx(1.0)
        assert len(phi) == k + 1
    assert np.allclose(reversed_polynomial(reversed_polynomial(polys[-1])), polys[-1])


@settings(deadline=None)
@given(disk_lists(min_size=2, max_size=7), unimodular())
def test_moment_inversion_matches_gram_schmidt(head, last):
    alphas = np.append(head, last)
    mu = spectral_measure_finite(cmv_assemble(alphas))
    count = len(head)
    moments = np.array([moments_of_measure(mu, k) for k in range(count + 1)])
    got = verblunsky_from_moments(moments[1:], count).head
    # Gram-Schmidt oracle: alpha_k = -conj(phi_{k+1}(0))
    gram = lambda i, j: moments[j - i] if j >= i else np.conj(moments[i - j])  # noqa: E731
    oracle = []
    for k in range(1, count + 1):
        g = np.array([[gram(i, j) for j in range(k)] for i in range(k)])
        b = np.array([gram(i, k) for i in range(k)])
        coef = np.linalg.solve(g, b)
        oracle.append(-np.conj(-coef[0]))
    assert np.allclose(got, oracle, atol=1e-8)
    assert np.allclose(got, head, atol=1e-8)


def test_uniform_moments_give_zero_coefficients():
    assert np.allclose(verblunsky_from_moments(np.zeros(5), 5).head, 0)


@settings(deadline=None)
@given(st.sampled_from([0.3, 0.5, -0.4]))
def test_gw_first_coefficient_is_half_g(g):
    mu = gw_equilibrium(g)
    assert moments_of_measure(mu, 1) == pytest.approx(g / 2, abs=1e-10)
    assert moments_of_measure(mu, 2) == pytest.approx(0, abs=1e-10)
    assert verblunsky_from_measure(mu, 3).head[0] == pytest.approx(g / 2, abs=1e-8)


def test_deformed_two_step_example():
    seq = CoefficientSequence("plain", np.array([0.5j, 0.3]))
    gam = deformed_from_alphas(seq).head
    assert gam == pytest.approx(np.array([-0.5j, 0.18 - 0.24j]), abs=1e-14)
    back = alphas_from_deformed(CoefficientSequence("deformed", gam)).head
    assert back == pytest.approx(np.array([0.5j, 0.3]), abs=1e-14)


@settings(deadline=None)
@given(st.lists(st.floats(-0.9, 0.9), min_size=1, max_size=6))
def test_real_coefficients_are_their_own_deformation(vals):
    seq = CoefficientSequence("plain", np.array(vals))
    assert np.allclose(deformed_from_alphas(seq).head, vals)


@settings(deadline=None)
@given(disk_lists(max_size=8, radius=0.9))
def test_deformation_round_trip_keeps_moduli(alphas):
    seq = CoefficientSequence("plain", alphas)
    gam = deformed_from_alphas(seq)
    assert np.allclose(np.abs(gam.head), np.abs(alphas), atol=1e-14)
    assert np.allclose(alphas_from_deformed(gam).head, alphas, atol=1e-14)


@settings(deadline=None)
@given(disk_lists(max_size=8, radius=0.9))
def test_b_k_is_unimodular(alphas):
    for phi in orthogonal_polynomials(alphas):
        val = np.polyval(phi[::-1], 1.0)
        star = np.polyval(reversed_polynomial(phi)[::-1], 1.0)
        assert abs(val / star) == pytest.approx(1.0, abs=1e-10)


def test_two_by_two_cmv_swaps_basis():
    c = cmv_assemble(np.array([0.0, 1.0]))
    assert np.allclose(c.matrix, [[0, 1], [1, 0]])
    mu = spectral_measure_finite(c)
    atoms = sorted(mu.atoms)
    assert atoms[0] == pytest.approx((0.0, 0.5)) and atoms[1] == pytest.approx((np.pi, 0.5))


@settings(deadline=None)
@given(unimodular())
def test_one_by_one_cmv_is_conjugate(a):
    assert cmv_assemble(np.array([a])).matrix[0, 0] == pytest.approx(np.conj(a))


@settings(deadline=None)
@given(disk_lists(min_size=1, max_size=9, radius=0.9), unimodular())
def test_cmv_determinant_identity(head, last):
    alphas = np.append(head, last)
    c = cmv_assemble(alphas)
    assert c.unitarity_defect() < 1e-12
    gam = deformed_from_alphas(CoefficientSequence("plain", alphas)).head
    det = np.linalg.det(np.eye(len(alphas)) - c.matrix)
    assert abs(det - np.prod(1 - gam)) < 1e-11


@settings(deadline=None)
@given(disk_lists(min_size=1, max_size=9, radius=0.9), unimodular())
def test_cmv_trace_matches_matrix(head, last):
    alphas = np.append(head, last)
    assert cmv_trace(alphas) == pytest.approx(np.trace(cmv_assemble(alphas).matrix), abs=1e-12)


def test_cmv_rejects_open_disk_final_value():
    with pytest.raises(DomainError):
        cmv_assemble(np.array([0.2, 0.5]))


@settings(deadline=None)
@given(disk_lists(min_size=1, max_size=6, radius=0.8), unimodular())
def test_spectral_measure_moments_match_matrix_powers(head, last):
    c = cmv_assemble(np.append(head, last))
    mu = spectral_measure_finite(c)
    assert mu.atom_mass() == pytest.approx(1.0, abs=1e-12)
    for k in range(1, 4):
        assert moments_of_measure(mu, k) == pytest.approx(np.linalg.matrix_power(c.matrix, k)[0, 0], abs=1e-10)


@settings(deadline=None)
@given(disk(0.9), st.tuples(st.floats(0, 0.95), st.floats(0, TWO_PI)))
def test_single_parameter_schur_function_is_constant(a, z):
    f = SchurFunction(np.array([a]))
    assert schur_eval(f, z[0] * np.exp(1j * z[1])) == pytest.approx(a, abs=1e-14)


def test_geronimus_tail_value_at_origin():
    f = SchurFunction(np.array([], dtype=complex), "geronimus", -0.5)
    assert schur_eval(f, 0.0) == pytest.approx(-0.5, abs=1e-14)


@settings(deadline=None)
@given(disk_lists(max_size=4, radius=0.9), disk(0.9), st.tuples(st.floats(0, 0.99), st.floats(0, TWO_PI)))
def test_caratheodory_real_part_is_positive(head, c, z):
    f = SchurFunction(head, "geronimus", c)
    w = z[0] * np.exp(1j * z[1])
    assert abs(schur_eval(f, w)) <= 1 + 1e-12
    assert caratheodory_eval(f, w).real > 0


@settings(deadline=None)
@given(st.floats(0.0, TWO_PI))
def test_bernstein_szego_density(theta):
    f = SchurFunction(np.array([0.6]))
    exact = 0.64 / abs(1 - 0.6 * np.exp(1j * theta)) ** 2
    assert caratheodory_density(f, theta) == pytest.approx(exact, rel=1e-12)


@settings(deadline=None)
@given(st.floats(0.0, TWO_PI))
def test_geronimus_tail_reproduces_hp_equilibrium(theta):
    f = SchurFunction(np.array([], dtype=complex), "geronimus", -0.5)
    assert caratheodory_density(f, theta) == pytest.approx(hp(1.0).density(theta), abs=1e-8)


def test_radial_and_boundary_densities_agree():
    f = SchurFunction(np.array([0.3 + 0.2j, -0.4]), "geronimus", -0.5)
    for t in (1.5, 2.5, 4.0):
        assert caratheodory_density(f, t, method="radial") == pytest.approx(caratheodory_density(f, t), rel=1e-6)


def cmv_atom_oracle(seq, theta, n=800):
    """Weight of the truncated-CMV eigenvalue nearest ``theta`` (eigenvector decays off the arc)."""
    vals = np.append(seq.values(n - 1), 1.0)
    w, v = np.linalg.eig(cmv_assemble(vals).matrix)
    k = np.argmin(np.abs(w - np.exp(1j * theta)))
    return abs(v[0, k]) ** 2 / np.linalg.norm(v[:, k]) ** 2


@pytest.mark.parametrize("gamma0", [0.10183795 + 0.18888143j, 0.42486055 + 0.27288657j])
def test_outlier_atom_masses_match_cmv_eigenvectors(gamma0):
    d = 1.0 if abs(gamma0.real - 0.1) < 0.01 else 0.5
    seq = CoefficientSequence("deformed", np.array([gamma0]), Tail.constant(-d / (1 + d)))
    atoms = detect_atoms(SchurFunction.from_coefficients(seq))
    assert len(atoms) == 1
    theta, mass = atoms[0]
    assert mass == pytest.approx(cmv_atom_oracle(alphas_from_deformed(seq), theta), abs=1e-9)


def test_reconstructed_measure_has_unit_mass():
    seq = CoefficientSequence("deformed", np.array([0.10183795 + 0.18888143j]), Tail.constant(-0.5))
    mu = measure_from_coefficients(seq)
    assert mu.ac_mass() + mu.atom_mass() == pytest.approx(1.0, abs=1e-8)
