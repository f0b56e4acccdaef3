"""Random coefficients and spectral measures for the CUE, Hua-Pickrell and Gross-Witten ensembles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.optimize import minimize

from .config import DEFAULT, SamplerConfig
from .ensembles import EnsembleSpec
from .errors import DomainError
from .measures import TWO_PI, CoefficientSequence, wrap_angle
from .opuc import alphas_from_deformed, cmv_assemble

__all__ = [
    "RngStream",
    "Draws",
    "SampleDiagnostics",
    "sample_cue_alphas",
    "sample_hp_gammas",
    "sample_hp_coefficient",
    "sample_gw_alphas",
    "sample_weights",
    "eigenangles",
    "empirical_esd_check",
]


@dataclass(frozen=True)
class RngStream:
    """Named random stream: identical ``(seed, stream_id)`` pairs give identical draws."""

    seed: int
    stream_id: int = 0
    algorithm: str = "PCG64"

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.stream_id < 0:
            raise DomainError("stream_id must be non-negative")
        if self.algorithm != "PCG64":
            raise DomainError(f"unsupported bit generator {self.algorithm!r}")

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of the stream."""
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, index: int) -> "RngStream":
        """Stream for replicate ``index`` (independent by construction of the spawn key)."""
        return RngStream(self.seed, self.stream_id * 1_000_003 + index + 1, self.algorithm)


def _gen(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass
class SampleDiagnostics:
    method: str
    acceptance: float = 1.0
    autocorrelation_time: float = 1.0
    thin: int = 0
    burn_in: int = 0
    status: str = "ok"
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "acceptance": self.acceptance,
            "autocorrelation_time": self.autocorrelation_time,
            "thin": self.thin,
            "burn_in": self.burn_in,
            "status": self.status,
            "notes": list(self.notes),
        }


@dataclass
class Draws:
    """``reps`` independent coefficient sequences stored row-wise."""

    kind: str
    coefficients: np.ndarray
    diagnostics: SampleDiagnostics

    def __len__(self) -> int:
        return self.coefficients.shape[0]

    def sequence(self, i: int = 0) -> CoefficientSequence:
        return CoefficientSequence(self.kind, self.coefficients[i])

    def __iter__(self) -> Iterator[CoefficientSequence]:
        return (self.sequence(i) for i in range(len(self)))

    def plain(self) -> np.ndarray:
        """Rows converted to plain coefficients."""
        if self.kind == "plain":
            return self.coefficients
        return np.array([alphas_from_deformed(s).head for s in self])


# --------------------------------------------------------------------------
# exact draws


def _eta_draws(gen: np.random.Generator, exponent: np.ndarray, shape) -> np.ndarray:
    """Draws from ``eta_m`` on the disk, density prop. to ``(1 - |z|^2)^m``."""
    r2 = gen.beta(1.0, exponent + 1.0, size=shape)
    return np.sqrt(r2) * np.exp(1j * gen.uniform(0.0, TWO_PI, size=shape))


def sample_cue_alphas(n: int, rng, *, reps: int = 1) -> Draws:
    """Haar-unitary coefficients: ``|alpha_k|^2 ~ Beta(1, n-k-1)`` with uniform phase.

    The last coefficient is uniform on the circle.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    gen = _gen(rng)
    out = np.empty((reps, n), dtype=complex)
    if n > 1:
        m = (n - 2 - np.arange(n - 1)).astype(float)
        out[:, :-1] = _eta_draws(gen, m, (reps, n - 1))
    out[:, -1] = np.exp(1j * gen.uniform(0.0, TWO_PI, size=reps))
    return Draws("plain", out, SampleDiagnostics("exact"))


def sample_weights(n: int, rng, *, reps: int | None = None) -> np.ndarray:
    """Flat Dirichlet weights on the simplex."""
    if n < 1:
        raise DomainError("n must be at least 1")
    gen = _gen(rng)
    return gen.dirichlet(np.ones(n), size=reps)


# --------------------------------------------------------------------------
# Metropolis machinery


def _tune(step: np.ndarray, rate: np.ndarray, cfg: SamplerConfig) -> np.ndarray:
    lo, hi = cfg.target_acceptance
    step = np.where(rate > hi, step * 1.25, step)
    return np.where(rate < lo, step / 1.25, step)


def _integrated_time(trace: np.ndarray) -> float:
    """Integrated autocorrelation time of a (steps, chains) trace, Sokal window."""
    x = trace - trace.mean(axis=0)
    var = float(np.mean(x * x))
    if var <= 0.0:
        return 1.0
    steps = x.shape[0]
    tau = 1.0
    for lag in range(1, steps // 2):
        rho = float(np.mean(x[lag:] * x[:-lag])) / var
        tau += 2.0 * rho
        if rho < 0.05 or lag >= 5.0 * tau:
            break
    return max(tau, 1.0)


class _Chain:
    """Vectorized random-walk Metropolis over independent chains.

    ``logp(state, idx, values)`` returns the local log-density of the
    coordinates ``idx`` set to ``values`` with the rest of ``state`` fixed.
    Coordinates listed in ``circle`` live on the unit circle and move by a
    phase increment; the others move in the plane of the disk, and
    proposals leaving the disk are rejected.
    """

    def __init__(self, gen, state, logp, groups, circle, cfg: SamplerConfig):
        self.gen = gen
        self.state = state
        self.logp = logp
        self.groups = groups
        self.circle = circle
        self.cfg = cfg
        self.step = np.full(state.shape[1], 0.3)
        self.accepted = np.zeros(state.shape[1])
        self.tried = 0

    def sweep(self):
        reps = self.state.shape[0]
        for idx in self.groups:
            cur = self.state[:, idx]
            step = self.step[idx]
            noise = self.gen.standard_normal((reps, idx.size, 2))
            on_circle = self.circle[idx]
            prop = np.where(
                on_circle,
                cur * np.exp(1j * step * noise[..., 0]),
                cur + step * (noise[..., 0] + 1j * noise[..., 1]) / np.sqrt(2.0),
            )
            inside = on_circle | (np.abs(prop) < 1.0)
            safe = np.where(inside, prop, 0.0)
            delta = self.logp(self.state, idx, safe) - self.logp(self.state, idx, cur)
            accept = inside & (np.log(self.gen.uniform(size=delta.shape)) < delta)
            self.state[:, idx] = np.where(accept, prop, cur)
            self.accepted[idx] += accept.mean(axis=0)
        self.tried += 1

    def rates(self) -> np.ndarray:
        return self.accepted / max(self.tried, 1)

    def reset_counts(self):
        self.accepted[:] = 0.0
        self.tried = 0

    def run(self, statistic, notes: list[str]) -> SampleDiagnostics:
        cfg = self.cfg
        window = 100
        for i in range(cfg.burn_in):
            self.sweep()
            if (i + 1) % window == 0:
                self.step = _tune(self.step, self.rates(), cfg)
                self.reset_counts()
        self.reset_counts()
        pilot = max(200, 10 * window)
        trace = np.empty((pilot, self.state.shape[0]))
        for i in range(pilot):
            self.sweep()
            trace[i] = statistic(self.state)
        tau = _integrated_time(trace)
        thin = int(min(math.ceil(tau), cfg.max_thin))
        for _ in range(thin):
            self.sweep()
        rates = self.rates()
        status = "ok"
        if np.any(rates < 0.1) or np.any(rates > 0.6):
            status = "warning"
            notes.append("acceptance outside [0.1, 0.6] for some coordinate")
        if tau > cfg.max_thin:
            status = "warning"
            notes.append(f"autocorrelation time {tau:.1f} exceeds max_thin")
        return SampleDiagnostics(
            "metropolis", float(rates.mean()), float(tau), thin, cfg.burn_in, status, notes
        )


# --------------------------------------------------------------------------
# Hua-Pickrell


def _hp_logp(exponent: np.ndarray, delta: float):
    def logp(state, idx, vals):
        e = exponent[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            radial = np.where(e > 0, e * np.log1p(-np.minimum(np.abs(vals) ** 2, 1.0)), 0.0)
            return radial + 2.0 * delta * np.log(np.abs(1.0 - vals))

    return logp


def _hp_rejection(gen, m: float, delta: float, size: int, circle: bool, cap: int) -> np.ndarray | None:
    """Rejection from ``eta_m`` (or uniform on the circle) with acceptance ``|1-z|^{2 delta} / 4^delta``.

    Returns ``None`` when a pilot run accepts less than the configured floor.
    """

    def propose(k):
        if circle:
            return np.exp(1j * gen.uniform(0.0, TWO_PI, size=k))
        return _eta_draws(gen, np.full(k, m), k)

    def accept(z):
        log_ratio = 2.0 * delta * (np.log(np.abs(1.0 - z)) - np.log(2.0))
        return np.log(gen.uniform(size=z.size)) < log_ratio

    pilot = propose(4000)
    rate = float(np.mean(accept(pilot)))
    if rate < DEFAULT.sampler.rejection_floor:
        return None
    out: list[np.ndarray] = []
    have = 0
    batch = int(min(cap, max(256, 2 * size / rate)))
    while have < size:
        z = propose(batch)
        z = z[accept(z)]
        out.append(z)
        have += z.size
    return np.concatenate(out)[:size]


def sample_hp_gammas(n: int, d: float, rng, *, reps: int = 1, cfg: SamplerConfig | None = None) -> Draws:
    """Deformed coefficients of the Hua-Pickrell ensemble, ``delta = n d``.

    ``gamma_k`` has density prop. to ``(1-|z|^2)^{n-k-2} |1-z|^{2 delta}`` and
    ``gamma_{n-1}`` lives on the circle with density prop. to ``|1-z|^{2 delta}``;
    all are independent.  Each coordinate is drawn by rejection from the
    ``delta = 0`` law when that accepts often enough, otherwise by Metropolis.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    if d < 0:
        raise DomainError("Hua-Pickrell needs d >= 0")
    cfg = cfg or DEFAULT.sampler
    gen = _gen(rng)
    if d == 0:
        draws = sample_cue_alphas(n, gen, reps=reps)
        return Draws("deformed", draws.coefficients, SampleDiagnostics("exact"))
    delta = n * d
    exponent = (n - 2 - np.arange(n)).astype(float)
    exponent[-1] = 0.0
    out = np.empty((reps, n), dtype=complex)
    slow = []
    for k in range(n):
        col = _hp_rejection(gen, exponent[k], delta, reps, k == n - 1, cap=1 << 20)
        if col is None:
            slow.append(k)
        else:
            out[:, k] = col
    if not slow:
        return Draws("deformed", out, SampleDiagnostics("rejection"))
    idx = np.array(slow)
    circle = idx == n - 1
    state = np.where(circle, -1.0 + 0j, 0j)[None, :].repeat(reps, axis=0)
    logp_full = _hp_logp(exponent[idx], delta)
    chain = _Chain(gen, state, lambda s, i, v: logp_full(s, i, v), [np.arange(idx.size)], circle, cfg)
    notes = [f"metropolis for {idx.size} of {n} coordinates"]
    diag = chain.run(lambda s: s[:, 0].real, notes)
    diag.method = "rejection+metropolis" if idx.size < n else "metropolis"
    out[:, idx] = chain.state
    return Draws("deformed", out, diag)


def sample_hp_coefficient(k: int, n: int, d: float, rng, *, size: int, cfg: SamplerConfig | None = None):
    """``size`` draws of the single coefficient ``gamma_k`` of the size-``n`` Hua-Pickrell ensemble."""
    if not 0 <= k < n:
        raise DomainError("need 0 <= k < n")
    if d < 0:
        raise DomainError("Hua-Pickrell needs d >= 0")
    cfg = cfg or DEFAULT.sampler
    gen = _gen(rng)
    m = float(max(n - k - 2, 0))
    circle = k == n - 1
    col = _hp_rejection(gen, m, n * d, size, circle, cap=1 << 20)
    if col is not None:
        return col, SampleDiagnostics("rejection")
    state = np.full((size, 1), -1.0 + 0j if circle else 0j)
    logp = _hp_logp(np.array([m if not circle else 0.0]), n * d)
    chain = _Chain(gen, state, logp, [np.arange(1)], np.array([circle]), cfg)
    diag = chain.run(lambda s: s[:, 0].real, [])
    return chain.state[:, 0].copy(), diag


# --------------------------------------------------------------------------
# Gross-Witten


def _gw_logp(n: int, g: float):
    """Local log-density of ``exp(n g Re(alpha_0 - sum alpha_k conj(alpha_{k-1}))) prod eta_{n-k-2}``."""
    exponent = (n - 2 - np.arange(n)).astype(float)
    exponent[-1] = 0.0

    def logp(state, idx, vals):
        reps = state.shape[0]
        left = np.where(idx > 0, state[:, np.maximum(idx - 1, 0)], 0.0)
        right = np.where(idx < n - 1, state[:, np.minimum(idx + 1, n - 1)], 0.0)
        lin = np.where(idx == 0, vals, 0.0)
        coupling = n * g * (lin - vals * np.conj(left) - right * np.conj(vals)).real
        e = exponent[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            radial = np.where(e > 0, e * np.log1p(-np.minimum(np.abs(vals) ** 2, 1.0)), 0.0)
        return (coupling + radial).reshape(reps, idx.size)

    return logp


def _gw_mode(n: int, g: float) -> np.ndarray:
    """Maximizer of the Gross-Witten coefficient density, used as the chain start.

    Disk coordinates are ``alpha = u / sqrt(1 + |u|^2)`` with ``u`` free and
    the last coefficient is ``exp(i phi)``.
    """
    m = (n - 2 - np.arange(n - 1)).astype(float)

    def unpack(x):
        u = x[: n - 1] + 1j * x[n - 1 : 2 * n - 2]
        s = 1.0 / np.sqrt(1.0 + np.abs(u) ** 2)
        return u, s, np.concatenate([u * s, [np.exp(1j * x[-1])]])

    def neg(x):
        u, s, a = unpack(x)
        val = n * g * (a[0] - np.sum(a[1:] * np.conj(a[:-1]))).real
        val += np.sum(m * np.log(s * s))  # 1 - |alpha|^2 = s^2
        grad = -n * g * (np.concatenate([[0.0], a[:-1]]) + np.concatenate([a[1:], [0.0]]))
        grad[0] += n * g
        grad[:-1] -= 2.0 * m * a[:-1] / (s * s)
        gx, gy = grad[:-1].real, grad[:-1].imag
        ux, uy, s3 = u.real, u.imag, s ** 3
        dx = gx * (s - ux * ux * s3) - gy * ux * uy * s3
        dy = -gx * ux * uy * s3 + gy * (s - uy * uy * s3)
        dphi = (np.conj(grad[-1]) * 1j * a[-1]).real
        return -val, -np.concatenate([dx, dy, [dphi]])

    best = None
    for phi in (0.0, np.pi):
        x0 = np.zeros(2 * n - 1)
        x0[-1] = phi
        res = minimize(neg, x0, jac=True, method="L-BFGS-B")
        if best is None or res.fun < best.fun:
            best = res
    return unpack(best.x)[2]


def sample_gw_alphas(n: int, g: float, rng, *, reps: int = 1, cfg: SamplerConfig | None = None) -> Draws:
    """Verblunsky coefficients of the Gross-Witten ensemble ``exp(n g Re tr U) dU``.

    Their law is ``exp(n g Re(alpha_0 - sum_k alpha_k conj(alpha_{k-1}))) prod eta_{n-k-2}``
    with the last coefficient on the circle.  ``g = 0`` is the exact CUE
    path; otherwise independent checkerboard Metropolis chains (even then
    odd sites, which are conditionally independent) start at the density's
    mode and run past burn-in and a
    thinning interval equal to the measured autocorrelation time.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    cfg = cfg or DEFAULT.sampler
    gen = _gen(rng)
    if g == 0:
        return sample_cue_alphas(n, gen, reps=reps)
    start = np.repeat(_gw_mode(n, g)[None, :], reps, axis=0) if n > 1 else sample_cue_alphas(n, gen, reps=reps).coefficients.copy()
    circle = np.arange(n) == n - 1
    groups = [np.arange(0, n, 2), np.arange(1, n, 2)]
    groups = [grp for grp in groups if grp.size]
    chain = _Chain(gen, start, _gw_logp(n, g), groups, circle, cfg)

    def trace_re(state):
        a = state
        return (a[:, 0] - np.sum(a[:, 1:] * np.conj(a[:, :-1]), axis=1)).real

    diag = chain.run(trace_re, [])
    return Draws("plain", chain.state, diag)


# --------------------------------------------------------------------------
# spectral checks


def eigenangles(draws: Draws) -> np.ndarray:
    """Eigenangles in ``[0, 2 pi)`` of the CMV matrix of every draw, shape ``(reps, n)``."""
    plain = draws.plain()
    out = np.empty(plain.shape)
    for i, row in enumerate(plain):
        out[i] = np.sort(wrap_angle(np.angle(np.linalg.eigvals(cmv_assemble(row).matrix))))
    return out


def _equilibrium_cdf(ens: EnsembleSpec, points: int = 20001):
    grid = np.linspace(0.0, TWO_PI, points)
    dens = ens.density(grid)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))]) / TWO_PI
    cdf /= cdf[-1]
    return lambda t: np.interp(t, grid, cdf)


def _sampler_for(ens: EnsembleSpec):
    if ens.family == "hp":
        return lambda n, gen, reps: sample_hp_gammas(n, ens.param, gen, reps=reps)
    return lambda n, gen, reps: sample_gw_alphas(n, ens.param, gen, reps=reps)


def empirical_esd_check(ens: EnsembleSpec, n: int, reps: int, rng) -> dict:
    """Averaged empirical spectral distribution against the equilibrium measure.

    Returns the Kolmogorov distance between the pooled eigenangle CDF and
    the equilibrium CDF (both from angle 0), and the fraction of
    eigenvalues outside the support arc.
    """
    gen = _gen(rng)
    draws = _sampler_for(ens)(n, gen, reps)
    angles = np.sort(eigenangles(draws).reshape(-1))
    cdf = _equilibrium_cdf(ens)(angles)
    m = angles.size
    upper = np.arange(1, m + 1) / m
    lower = np.arange(0, m) / m
    ks = float(max(np.max(upper - cdf), np.max(cdf - lower)))
    lo, hi = ens.arc
    if hi - lo >= TWO_PI - 1e-12:
        outside = 0.0
    else:
        shifted = wrap_angle(angles - lo)
        outside = float(np.mean(shifted > hi - lo))
    return {
        "ks_distance": ks,
        "support_violation_rate": outside,
        "eigenvalues": m,
        "sampler": draws.diagnostics.to_dict(),
    }
