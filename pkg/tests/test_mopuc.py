import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opuc_sumrules import CircleMeasure, CoefficientSequence, DomainError, SingularInputError, Tail
from opuc_sumrules.ensembles import hp
from opuc_sumrules.measures import TWO_PI
from opuc_sumrules.mopuc import (
    H_dp,
    MatrixCoefficientSequence,
    MatrixMeasure,
    alphas_from_matrix_gammas,
    defects,
    deformed_matrix_gammas,
    ggt_assemble,
    ggt_trace,
    log_normalizer,
    matrix_bs_density,
    matrix_kl,
    matrix_orthogonal_polynomials,
    matrix_spectral_measure,
    matrix_szego_step,
    mobius_T,
    neretin_coeffs,
    neretin_contraction,
    polyval_matrix,
    sample_matrix_coefficient,
    sample_matrix_coeffs,
    verify_matrix_hp,
    verify_matrix_szego,
)
from opuc_sumrules.opuc import cmv_assemble, deformed_from_alphas, orthogonal_polynomials
from opuc_sumrules.rates import H_d, kl_divergence
from opuc_sumrules.sampling import RngStream, sample_cue_alphas
from opuc_sumrules.sumrules import verify_hp, verify_szego_verblunsky

from strategies import disk, disk_lists, haar_unitary, matrix_ball

UNIFORM = CircleMeasure(0.0, TWO_PI, lambda t: 1.0, name="uniform")


def dag(m):
    return np.conj(np.swapaxes(m, -1, -2))


def random_alphas(seed, n, p, radius=0.8):
    """``n - 1`` ball blocks followed by a Haar unitary block."""
    rng = np.random.default_rng(seed)
    out = np.empty((n, p, p), dtype=complex)
    for k in range(n - 1):
        z = rng.normal(size=(p, p)) + 1j * rng.normal(size=(p, p))
        out[k] = rng.uniform(0, radius) * z / np.linalg.norm(z, 2)
    q, r = np.linalg.qr(rng.normal(size=(p, p)) + 1j * rng.normal(size=(p, p)))
    out[-1] = q * (np.diag(r) / np.abs(np.diag(r)))
    return out


SEEDS = st.integers(0, 2**32 - 1)


@settings(deadline=None)
@given(st.sampled_from([1, 2, 3]).flatmap(lambda p: matrix_ball(p, 0.95)))
def test_defects_intertwine(alpha):
    rho_r, rho_l = defects(alpha)
    p = alpha.shape[0]
    assert rho_r @ rho_r == pytest.approx(np.eye(p) - alpha @ dag(alpha), abs=1e-13)
    assert rho_l @ rho_l == pytest.approx(np.eye(p) - dag(alpha) @ alpha, abs=1e-13)
    assert rho_r @ alpha == pytest.approx(alpha @ rho_l, abs=1e-13)


@settings(deadline=None, max_examples=200)
@given(matrix_ball(2, 0.9), haar_unitary(2))
def test_mobius_matches_defect_formula(alpha, u):
    rho_r, rho_l = defects(alpha)
    lhs = -alpha + rho_r @ np.linalg.inv(np.eye(2) - u @ dag(alpha)) @ u @ rho_l
    assert lhs == pytest.approx(mobius_T(alpha, u), abs=1e-12)


@settings(deadline=None, max_examples=200)
@given(matrix_ball(2, 0.9), haar_unitary(2))
def test_inversion_identity(alpha, u):
    assert np.linalg.inv(mobius_T(alpha, u)) == pytest.approx(mobius_T(dag(alpha), np.linalg.inv(u)), abs=1e-12)


@settings(deadline=None)
@given(matrix_ball(2, 0.9), matrix_ball(2, 0.9))
def test_mobius_inverse_and_zero(alpha, zeta):
    assert mobius_T(alpha, alpha) == pytest.approx(np.zeros((2, 2)), abs=1e-14)
    assert mobius_T(-alpha, mobius_T(alpha, zeta)) == pytest.approx(zeta, abs=1e-11)


@settings(deadline=None)
@given(disk(0.9), disk(0.99))
def test_mobius_scalar(a, z):
    val = mobius_T(np.array([[a]]), np.array([[z]]))[0, 0]
    assert val == pytest.approx((z - a) / (1 - np.conj(a) * z), abs=1e-13)


def test_mobius_rejects_boundary():
    with pytest.raises(SingularInputError):
        mobius_T(np.eye(2), np.zeros((2, 2)))


def test_szego_step_zero_alpha_shifts():
    left, right = matrix_szego_step(np.eye(2)[None], np.eye(2)[None], np.zeros((2, 2)))
    assert left == pytest.approx(np.array([np.zeros((2, 2)), np.eye(2)]))
    assert right == pytest.approx(left)


@settings(deadline=None)
@given(disk_lists(1, 5, 0.9))
def test_szego_scalar_reduction(alphas):
    left, right = matrix_orthogonal_polynomials(alphas[:, None, None])
    monic = orthogonal_polynomials(alphas)
    norms = np.concatenate([[1.0], np.cumprod(np.sqrt(1 - np.abs(alphas) ** 2))])
    for k, poly in enumerate(monic):
        assert left[k][:, 0, 0] == pytest.approx(poly / norms[k], abs=1e-12)
        assert right[k][:, 0, 0] == pytest.approx(poly / norms[k], abs=1e-12)


@settings(deadline=None)
@given(disk_lists(1, 4, 0.9), disk_lists(4, 4, 0.9))
def test_szego_diagonal_decouples(a, b):
    b = b[: a.size]
    diag = np.array([np.diag([x, y]) for x, y in zip(a, b)])
    left, _ = matrix_orthogonal_polynomials(diag)
    sa, sb = matrix_orthogonal_polynomials(a[:, None, None])[0], matrix_orthogonal_polynomials(b[:, None, None])[0]
    for k in range(a.size + 1):
        assert left[k][:, 0, 0] == pytest.approx(sa[k][:, 0, 0], abs=1e-12)
        assert left[k][:, 1, 1] == pytest.approx(sb[k][:, 0, 0], abs=1e-12)
        assert left[k][:, 0, 1] == pytest.approx(np.zeros(k + 1), abs=1e-14)


@settings(deadline=None, max_examples=10)
@given(SEEDS, st.integers(1, 3))
def test_polynomials_orthonormal_against_bernstein_szego(seed, n):
    alphas = random_alphas(seed, n + 1, 2, 0.7)[:n]
    left, right = matrix_orthogonal_polynomials(alphas)
    theta = TWO_PI * np.arange(512) / 512
    dens = matrix_bs_density(alphas, theta)
    z = np.exp(1j * theta)
    for i in range(n + 1):
        for j in range(n + 1):
            gram_r = np.mean(dag(polyval_matrix(right[i], z)) @ dens @ polyval_matrix(right[j], z), axis=0)
            gram_l = np.mean(polyval_matrix(left[i], z) @ dens @ dag(polyval_matrix(left[j], z)), axis=0)
            assert gram_r == pytest.approx(np.eye(2) * (i == j), abs=1e-10)
            assert gram_l == pytest.approx(np.eye(2) * (i == j), abs=1e-10)


@settings(deadline=None)
@given(SEEDS, st.integers(2, 5), st.integers(1, 3))
def test_deformed_round_trip_and_unitary_b(seed, n, p):
    seq = MatrixCoefficientSequence("plain", random_alphas(seed, n, p)[:-1])
    gam, bs, worst = deformed_matrix_gammas(seq, return_b=True)
    assert worst <= 1e-10
    assert bs[0] == pytest.approx(np.eye(p))
    back = alphas_from_matrix_gammas(gam)
    assert back.head == pytest.approx(seq.head, abs=1e-12)


@settings(deadline=None)
@given(disk_lists(1, 6, 0.9))
def test_deformed_scalar_reduction(alphas):
    gam = deformed_matrix_gammas(MatrixCoefficientSequence("plain", alphas[:, None, None]))
    ref = deformed_from_alphas(CoefficientSequence("plain", alphas))
    assert gam.head[:, 0, 0] == pytest.approx(ref.head, abs=1e-13)


def test_deformed_zero_and_fixed_point():
    zero = deformed_matrix_gammas(MatrixCoefficientSequence("plain", np.zeros((3, 2, 2))))
    assert zero.head == pytest.approx(np.zeros((3, 2, 2)))
    gd = -0.5 * np.eye(2)
    gam = alphas_from_matrix_gammas(MatrixCoefficientSequence("deformed", np.array([gd] * 4), "constant", gd))
    assert deformed_matrix_gammas(gam).head == pytest.approx(np.array([gd] * 4), abs=1e-13)


@settings(deadline=None)
@given(haar_unitary(6))
def test_neretin_projective(u):
    assert neretin_contraction(neretin_contraction(u, 2), 2) == pytest.approx(neretin_contraction(u, 4), abs=1e-10)
    out = neretin_contraction(u, 2)
    assert dag(out) @ out == pytest.approx(np.eye(4), abs=1e-11)
    assert abs(neretin_contraction(u, 5)[0, 0]) == pytest.approx(1.0, abs=1e-11)


@settings(deadline=None)
@given(haar_unitary(2), haar_unitary(3))
def test_neretin_block_diagonal(v, w):
    u = np.zeros((5, 5), dtype=complex)
    u[:2, :2], u[2:, 2:] = v, w
    assert neretin_contraction(u, 2) == pytest.approx(w, abs=1e-12)


@settings(deadline=None, max_examples=100)
@given(haar_unitary(6))
def test_neretin_determinant(u):
    cs = neretin_coeffs(u, 2)
    prod = np.prod([np.linalg.det(np.eye(2) - c) for c in cs])
    assert prod == pytest.approx(np.linalg.det(np.eye(6) - u), rel=1e-10)


@settings(deadline=None, max_examples=100)
@given(SEEDS, st.integers(1, 4), st.integers(1, 3))
def test_ggt_identifies_deformed_coefficients(seed, n, p):
    alphas = random_alphas(seed, n, p)
    g = ggt_assemble(alphas).matrix
    assert dag(g) @ g == pytest.approx(np.eye(n * p), abs=1e-12)
    cs = neretin_coeffs(g, p)
    gam = deformed_matrix_gammas(MatrixCoefficientSequence("plain", alphas))
    assert np.array(cs) == pytest.approx(gam.head, abs=1e-10)
    det = np.prod([np.linalg.det(np.eye(p) - c) for c in gam.head])
    assert det == pytest.approx(np.linalg.det(np.eye(n * p) - g), rel=1e-10, abs=1e-12)
    assert np.trace(g) == pytest.approx(ggt_trace(alphas), abs=1e-12)


def test_ggt_shift():
    alphas = np.array([np.zeros((2, 2)), np.zeros((2, 2)), np.eye(2)], dtype=complex)
    g = ggt_assemble(alphas).matrix
    expected = np.zeros((6, 6))
    expected[2:, :4] = np.eye(4)
    expected[:2, 4:] = np.eye(2)
    assert g == pytest.approx(expected)


def test_ggt_rejects_nonunitary_last_block():
    with pytest.raises(DomainError):
        ggt_assemble(np.array([0.5 * np.eye(2)]))


@settings(deadline=None)
@given(disk_lists(1, 6, 0.9), st.floats(0, TWO_PI))
def test_ggt_scalar_matches_cmv_spectrum(alphas, phase):
    full = np.concatenate([alphas, [np.exp(1j * phase)]])
    a = np.sort_complex(np.round(np.linalg.eigvals(ggt_assemble(full[:, None, None]).matrix), 10))
    b = np.sort_complex(np.round(np.linalg.eigvals(cmv_assemble(full).matrix), 10))
    assert a == pytest.approx(b, abs=1e-9)


@settings(deadline=None, max_examples=20)
@given(SEEDS, st.integers(2, 4))
def test_ggt_spectral_moments(seed, n):
    alphas = random_alphas(seed, n, 2)
    g = ggt_assemble(alphas)
    sigma = matrix_spectral_measure(g, 2)
    assert sigma.total() == pytest.approx(np.eye(2), abs=1e-12)
    assert sigma.moment(1) == pytest.approx(dag(alphas[0]), abs=1e-12)
    assert sigma.moment(3) == pytest.approx(np.linalg.matrix_power(g.matrix, 3)[:2, :2], abs=1e-12)


def test_hdp_values():
    assert H_dp(-0.5 * np.eye(2), 1.0) == pytest.approx(0.0, abs=1e-14)
    assert H_dp(np.diag([-0.5, 0.0]), 1.0) == pytest.approx(H_d(0.0, 1.0), abs=1e-14)
    assert H_dp(np.diag([-0.5, 0.0]), 1.0) == pytest.approx(0.52325, abs=1e-5)


@settings(deadline=None)
@given(disk(0.95), st.sampled_from([0.0, 0.5, 1.0, 2.0]))
def test_hdp_scalar_reduction(g, d):
    assert H_dp(np.array([[g]]), d) == pytest.approx(H_d(g, d), abs=1e-12)


@settings(deadline=None)
@given(disk_lists(3, 3, 0.95), st.sampled_from([0.5, 1.0, 2.0]))
def test_hdp_block_diagonal(gs, d):
    assert H_dp(np.diag(gs), d) == pytest.approx(sum(H_d(g, d) for g in gs), abs=1e-10)


@settings(deadline=None)
@given(matrix_ball(2, 0.95), st.sampled_from([0.5, 1.0, 2.0]))
def test_hdp_nonnegative(g, d):
    assert H_dp(g, d) >= -1e-12


def test_matrix_kl():
    ref = hp(1.0).measure()
    assert matrix_kl(ref, MatrixMeasure.quasi_scalar(ref, 2)) == pytest.approx(0.0, abs=1e-12)
    assert matrix_kl(UNIFORM, MatrixMeasure.quasi_scalar(UNIFORM, 3)) == pytest.approx(0.0, abs=1e-12)
    bs = CircleMeasure(0.0, TWO_PI, lambda t: 0.64 / abs(1 - 0.6 * np.exp(1j * t)) ** 2)
    pair = MatrixMeasure.block_diagonal([UNIFORM, bs])
    assert matrix_kl(UNIFORM, pair) == pytest.approx(kl_divergence(UNIFORM, UNIFORM) + kl_divergence(UNIFORM, bs), abs=1e-10)


def test_matrix_szego_trivial_and_general():
    zero = verify_matrix_szego(MatrixCoefficientSequence("plain", np.zeros((2, 2, 2))))
    assert zero.lhs_total == pytest.approx(0.0, abs=1e-12) and zero.rhs_total == 0.0
    alpha = np.array([[0.3, 0.4j], [0.0, -0.2]])
    alpha *= 0.5 / np.linalg.norm(alpha, 2)
    rep = verify_matrix_szego(MatrixCoefficientSequence("plain", alpha[None]), tol=1e-4)
    assert rep.rhs_total == pytest.approx(-np.linalg.slogdet(np.eye(2) - alpha @ dag(alpha))[1], abs=1e-15)
    assert rep.residual <= 1e-4


@settings(deadline=None, max_examples=4)
@given(disk_lists(1, 3, 0.8), disk_lists(1, 3, 0.8))
def test_matrix_szego_block_diagonal_sums(a, b):
    seq = MatrixCoefficientSequence.block_diagonal([CoefficientSequence("plain", a), CoefficientSequence("plain", b)])
    rep = verify_matrix_szego(seq)
    ra = verify_szego_verblunsky(CoefficientSequence("plain", a))
    rb = verify_szego_verblunsky(CoefficientSequence("plain", b))
    assert rep.lhs_total == pytest.approx(ra.lhs_total + rb.lhs_total, abs=1e-6)
    assert rep.rhs_total == pytest.approx(ra.rhs_total + rb.rhs_total, abs=1e-10)
    assert rep.residual <= 1e-6


@settings(deadline=None, max_examples=6)
@given(disk_lists(1, 4, 0.8))
def test_matrix_pipeline_scalar_reduction(alphas):
    seq = CoefficientSequence("plain", alphas)
    mat = verify_matrix_szego(MatrixCoefficientSequence("plain", alphas[:, None, None]))
    ref = verify_szego_verblunsky(seq)
    assert mat.lhs_total == pytest.approx(ref.lhs_total, abs=1e-12)
    assert mat.rhs_total == pytest.approx(ref.rhs_total, abs=1e-12)


def test_matrix_hp_equilibrium_and_blocks():
    gd = -0.5 * np.eye(2)
    eq = verify_matrix_hp(MatrixCoefficientSequence("deformed", np.array([gd]), "constant", gd), 2, 1.0)
    assert eq.lhs_total == pytest.approx(0.0, abs=1e-10)
    assert eq.rhs_total == pytest.approx(0.0, abs=1e-14)
    s1 = CoefficientSequence("deformed", np.array([-0.47]), Tail.constant(-0.5))
    s2 = CoefficientSequence("deformed", np.array([-0.5 + 0.02j, -0.52]), Tail.constant(-0.5))
    rep = verify_matrix_hp(MatrixCoefficientSequence.block_diagonal([s1, s2]), 2, 1.0)
    ra, rb = verify_hp(s1, 1.0), verify_hp(s2, 1.0)
    assert rep.residual <= 1e-4
    assert rep.lhs_total == pytest.approx(ra.lhs_total + rb.lhs_total, abs=1e-6)
    assert rep.rhs_total == pytest.approx(ra.rhs_total + rb.rhs_total, abs=1e-10)


def test_matrix_hp_scalar_reduction():
    seq = CoefficientSequence("deformed", np.array([-0.47, -0.5 + 0.03j]), Tail.constant(-0.5))
    mat = verify_matrix_hp(MatrixCoefficientSequence("deformed", seq.head[:, None, None], "constant", -0.5), 1, 1.0)
    ref = verify_hp(seq, 1.0)
    assert mat.lhs_total == pytest.approx(ref.lhs_total, abs=1e-12)
    assert mat.rhs_total == pytest.approx(ref.rhs_total, abs=1e-12)


def test_matrix_hp_zero_tail_is_infinite():
    rep = verify_matrix_hp(MatrixCoefficientSequence("plain", np.array([0.2 * np.eye(2)])), 2, 1.0)
    assert math.isinf(rep.lhs_total) and math.isinf(rep.rhs_total)


def test_log_normalizer_scalar_cue():
    for n in (5, 10, 40):
        for k in range(n - 1):
            assert log_normalizer(n, k, 1, 0.0) == pytest.approx(np.log((n - k - 1) / np.pi), abs=1e-12)
    with pytest.raises(DomainError):
        log_normalizer(5, 4, 1, 0.0)


def test_exact_matrix_draws_at_d_zero():
    draws = sample_matrix_coeffs(10, 2, 0.0, RngStream(3), reps=2000).coefficients
    tr = np.einsum("rij,rij->r", draws[:, 0], np.conj(draws[:, 0])).real
    assert abs(tr.mean() - 2 / 10) < 3 * tr.std() / np.sqrt(tr.size)
    last = draws[:, -1]
    assert dag(last) @ last == pytest.approx(np.broadcast_to(np.eye(2), last.shape), abs=1e-12)


def test_scalar_exact_draws_match_cue():
    from scipy import stats

    mat = sample_matrix_coeffs(12, 1, 0.0, RngStream(4), reps=3000).coefficients[:, 0, 0, 0]
    cue = sample_cue_alphas(12, RngStream(5), reps=3000).coefficients[:, 0]
    assert stats.ks_2samp(np.abs(mat), np.abs(cue)).pvalue > 0.01


def test_matrix_hp_first_block_concentrates():
    x, diag = sample_matrix_coefficient(0, 100, 2, 1.0, RngStream(6), size=400)
    assert 0.2 <= diag.acceptance <= 0.4
    target = -0.5 * np.eye(2)
    for i in range(2):
        for j in range(2):
            for part in (np.real, np.imag):
                vals = part(x[:, i, j])
                assert abs(vals.mean() - part(target[i, j])) < 3 * vals.std() / np.sqrt(vals.size)


def test_matrix_sampler_valid_blocks():
    draws = sample_matrix_coeffs(6, 2, 1.0, RngStream(7), reps=5).coefficients
    assert np.all(np.linalg.norm(draws[:, :-1], ord=2, axis=(-2, -1)) < 1)
    assert dag(draws[:, -1]) @ draws[:, -1] == pytest.approx(np.broadcast_to(np.eye(2), (5, 2, 2)), abs=1e-10)


def test_matrix_sequence_validation():
    with pytest.raises(DomainError):
        MatrixCoefficientSequence("plain", np.array([np.eye(2), 0.1 * np.eye(2)]))
    seq = MatrixCoefficientSequence("plain", np.array([np.diag([0.1, 0.2j])]))
    assert seq.is_block_diagonal()
    assert [s.head[0] for s in seq.diagonal_sequences()] == pytest.approx([0.1, 0.2j])
