import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from opuc_sumrules import DomainError
from opuc_sumrules.config import SamplerConfig
from opuc_sumrules.ensembles import gw, hp
from opuc_sumrules.opuc import cmv_assemble
from opuc_sumrules.sampling import (
    RngStream,
    eigenangles,
    empirical_esd_check,
    sample_cue_alphas,
    sample_gw_alphas,
    sample_hp_coefficient,
    sample_hp_gammas,
    sample_weights,
)

QUICK = SamplerConfig(burn_in=1000)


@settings(deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(0, 50), st.integers(1, 30))
def test_streams_are_reproducible(seed, stream, n):
    a = sample_cue_alphas(n, RngStream(seed, stream), reps=2).coefficients
    b = sample_cue_alphas(n, RngStream(seed, stream), reps=2).coefficients
    assert a.tobytes() == b.tobytes()


def test_streams_differ():
    a = sample_cue_alphas(10, RngStream(7, 0)).coefficients
    b = sample_cue_alphas(10, RngStream(7, 1)).coefficients
    assert not np.allclose(a, b)


def test_bad_stream_rejected():
    with pytest.raises(DomainError):
        RngStream(-1)
    with pytest.raises(DomainError):
        RngStream(1, algorithm="MT19937")


@settings(deadline=None)
@given(st.integers(1, 40), st.integers(0, 1000))
def test_cue_coefficients_are_valid(n, seed):
    a = sample_cue_alphas(n, RngStream(seed), reps=3).coefficients
    assert np.all(np.abs(a[:, :-1]) < 1)
    assert np.abs(a[:, -1]) == pytest.approx(np.ones(3), abs=1e-14)


def test_cue_first_coefficient_mean():
    a = sample_cue_alphas(50, RngStream(11), reps=2000).coefficients[:, 0]
    r2 = np.abs(a) ** 2
    assert abs(r2.mean() - 1 / 50) < 3 * r2.std() / np.sqrt(r2.size)


def test_cue_esd_is_uniform():
    assert empirical_esd_check(gw(0.0), 50, 200, RngStream(12))["ks_distance"] < 0.02


def test_weights_simplex():
    assert sample_weights(1, RngStream(0)) == pytest.approx([1.0])
    w = sample_weights(10, RngStream(1), reps=10_000)
    assert w.sum(axis=1) == pytest.approx(np.ones(10_000))
    se = w[:, 0].std() / 100
    assert np.all(np.abs(w.mean(axis=0) - 0.1) < 3 * se * 1.2)
    assert stats.kstest(w[:, 0], stats.beta(1, 9).cdf).pvalue > 0.01


def test_spectral_weights_are_dirichlet():
    gen = np.random.default_rng(5)
    draws = sample_cue_alphas(10, RngStream(5), reps=2000).coefficients
    picked = []
    for row in draws:
        _, vecs = np.linalg.eig(cmv_assemble(row).matrix)
        picked.append(abs(vecs[0, gen.integers(10)]) ** 2)
    assert stats.kstest(picked, stats.beta(1, 9).cdf).pvalue > 0.01


def test_hp_at_zero_matches_cue():
    hp0 = sample_hp_gammas(20, 0.0, RngStream(2024, 1), reps=5000).coefficients[:, 0]
    cue = sample_cue_alphas(20, RngStream(2024, 2), reps=5000).coefficients[:, 0]
    assert stats.ks_2samp(np.abs(hp0), np.abs(cue)).pvalue > 0.01


def test_hp_concentrates_at_equilibrium_coefficient():
    x, _ = sample_hp_coefficient(0, 100, 1.0, RngStream(31), size=400)
    se = np.std(x.real) / np.sqrt(x.size)
    assert abs(x.real.mean() + 0.5) < 3 * se
    assert abs(x.imag.mean()) < 3 * np.std(x.imag) / np.sqrt(x.size)


def test_hp_rejects_negative_d():
    with pytest.raises(DomainError):
        sample_hp_gammas(10, -1.0, RngStream(0))


@settings(deadline=None, max_examples=10)
@given(st.integers(2, 30), st.sampled_from([0.0, 0.1, 1.0]), st.integers(0, 100))
def test_hp_draws_are_valid(n, d, seed):
    g = sample_hp_gammas(n, d, RngStream(seed), reps=2, cfg=QUICK).coefficients
    assert np.all(np.abs(g[:, :-1]) < 1)
    assert np.abs(g[:, -1]) == pytest.approx(np.ones(2), abs=1e-12)


def test_gw_zero_is_exact_path():
    draws = sample_gw_alphas(20, 0.0, RngStream(3), reps=2)
    assert draws.diagnostics.method == "exact"
    assert draws.coefficients.tobytes() == sample_cue_alphas(20, RngStream(3), reps=2).coefficients.tobytes()


def test_gw_trace_mean():
    a = sample_gw_alphas(60, 0.5, RngStream(41), reps=100, cfg=QUICK).coefficients
    tr = (a[:, 0] - np.sum(a[:, 1:] * np.conj(a[:, :-1]), axis=1)).real / 60
    assert abs(tr.mean() - 0.25) < 3 * tr.std() / np.sqrt(tr.size)


def one_point_density(n, log_weight, points=8192):
    """Finite-n eigenvalue density for the weight ``exp(log_weight)`` by Arnoldi."""
    theta = 2 * np.pi * (np.arange(points) + 0.5) / points
    lw = log_weight(theta)
    w = np.exp(lw - lw.max())
    basis = np.zeros((points, n), dtype=complex)
    basis[:, 0] = np.sqrt(w / w.sum())
    for k in range(1, n):
        v = np.exp(1j * theta) * basis[:, k - 1]
        for _ in range(2):
            v -= basis[:, :k] @ (basis[:, :k].conj().T @ v)
        basis[:, k] = v / np.linalg.norm(v)
    return theta, np.sum(np.abs(basis) ** 2, axis=1) / n


def check_mean_cosine(n, log_weight, draws):
    theta, rho = one_point_density(n, log_weight)
    per_rep = np.cos(eigenangles(draws)).mean(axis=1)
    assert abs(per_rep.mean() - np.sum(rho * np.cos(theta))) < 3 * per_rep.std() / np.sqrt(per_rep.size)


@pytest.mark.parametrize("n, g", [(60, -2.0), (20, 0.5)])
def test_gw_matches_exact_density(n, g):
    draws = sample_gw_alphas(n, g, RngStream(45), reps=200, cfg=QUICK)
    check_mean_cosine(n, lambda t: n * g * np.cos(t), draws)


def test_hp_matches_exact_density():
    draws = sample_hp_gammas(60, 1.0, RngStream(46), reps=200)
    check_mean_cosine(60, lambda t: 60 * np.log(2 - 2 * np.cos(t)), draws)


def test_gw_gapped_support():
    angles = eigenangles(sample_gw_alphas(60, -2.0, RngStream(42), reps=40, cfg=QUICK)).ravel()
    lo, hi = gw(-2.0).arc
    assert np.mean((angles >= lo) & (angles <= hi)) > 0.99


def test_gw_diagnostics_in_target_band():
    diag = sample_gw_alphas(30, 1.0, RngStream(43), reps=20, cfg=QUICK).diagnostics
    assert diag.method == "metropolis"
    assert 0.2 <= diag.acceptance <= 0.4
    assert diag.thin >= 1


def test_hp_esd():
    out = empirical_esd_check(hp(1.0), 100, 20, RngStream(44))
    assert out["ks_distance"] < 0.05
    assert out["support_violation_rate"] < 0.05
