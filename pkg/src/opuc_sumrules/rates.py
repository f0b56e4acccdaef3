"""Rate functionals: energies, effective potentials, divergences, outlier and coefficient rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .config import DEFAULT, RateConfig
from .ensembles import EnsembleSpec, Potential, RealEnsembleSpec
from .errors import DomainError, InvalidMeasureError, KindError
from .measures import TWO_PI, CircleMeasure, CoefficientSequence, RealMeasure, wrap_angle
from .quadrature import integrate_arc, integrate_log_singular

__all__ = [
    "RateReport",
    "EffectivePotentialEval",
    "log_potential",
    "energy_functional",
    "effective_potential",
    "effective_potential_grid",
    "kl_divergence",
    "in_s1t",
    "outlier_rate_hp",
    "outlier_rate_hp_real",
    "outlier_rate_gw",
    "outlier_rate_gw_real",
    "outlier_rate",
    "H_d",
    "H_gw",
    "h_simon",
    "coefficient_rate_hp",
    "coefficient_rate_gw_probe",
    "spectral_rate",
    "kappa",
    "mass_defect_rate",
]

Status = Literal["verified", "tolerance_exceeded", "lhs_infinite", "rhs_infinite", "probe"]


def _num(x: float):
    """JSON-friendly float (infinities and NaN as strings)."""
    x = float(x)
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


@dataclass
class RateReport:
    """Both sides of a sum rule with every intermediate term."""

    rule: str = ""
    kl_term: float = 0.0
    outlier_plus: list[tuple[float, float]] = field(default_factory=list)
    outlier_minus: list[tuple[float, float]] = field(default_factory=list)
    lhs_total: float = 0.0
    rhs_terms: list[float] = field(default_factory=list)
    rhs_partial_sums: list[float] = field(default_factory=list)
    rhs_tail_bound: float = 0.0
    residual: float = math.nan
    status: Status = "verified"
    label: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def rhs_total(self) -> float:
        if not self.rhs_partial_sums:
            return 0.0
        return self.rhs_partial_sums[-1]

    def finalize(self, tol: float) -> "RateReport":
        """Fill ``residual`` and ``status`` from the two sides."""
        lhs, rhs = self.lhs_total, self.rhs_total
        lhs_inf, rhs_inf = not math.isfinite(lhs), not math.isfinite(rhs)
        if lhs_inf or rhs_inf:
            self.residual = 0.0 if (lhs_inf and rhs_inf) else math.inf
            self.status = "lhs_infinite" if lhs_inf else "rhs_infinite"
        else:
            self.residual = abs(lhs - rhs)
            self.status = "verified" if self.residual <= tol else "tolerance_exceeded"
        if self.label:
            self.status = "probe"
        self.diagnostics.setdefault("tolerance", tol)
        return self

    def to_dict(self) -> dict:
        def clean(obj):
            if isinstance(obj, dict):
                return {str(k): clean(v) for k, v in obj.items()}
            if isinstance(obj, (list, tuple)):
                return [clean(v) for v in obj]
            if isinstance(obj, (float, np.floating)):
                return _num(obj)
            if isinstance(obj, (np.integer,)):
                return int(obj)
            if isinstance(obj, complex):
                return [obj.real, obj.imag]
            return obj

        return clean(
            {
                "rule": self.rule,
                "label": self.label,
                "status": self.status,
                "kl_term": self.kl_term,
                "outlier_plus": self.outlier_plus,
                "outlier_minus": self.outlier_minus,
                "lhs_total": self.lhs_total,
                "rhs_terms": self.rhs_terms,
                "rhs_partial_sums": self.rhs_partial_sums,
                "rhs_total": self.rhs_total,
                "rhs_tail_bound": self.rhs_tail_bound,
                "residual": self.residual,
                "diagnostics": self.diagnostics,
            }
        )


# --------------------------------------------------------------------------
# logarithmic potential and energy


def _chord_log(theta: float, phi):
    """``log|e^{i theta} - e^{i phi}| = log|2 sin((theta - phi)/2)|``."""
    return np.log(np.abs(2.0 * np.sin(0.5 * (theta - phi))))


def log_potential(mu: CircleMeasure, theta: float, *, tol: float | None = None) -> float:
    """``U(theta) = int log|e^{i theta} - zeta| dmu_ac(zeta)`` (atoms excluded).

    The log singularity at ``zeta = e^{i theta}`` is handled by splitting at
    it and using logarithmic-weight quadrature on both panels; the smooth
    remainder ``log|2 sin(x/2)| - log|x|`` is integrated alongside.
    """
    if mu.density is None:
        return 0.0
    tol = 1e-11 if tol is None else tol
    theta = float(theta)
    dens = mu.density

    if mu.full_circle:
        def w(u):  # u = phi - theta in (0, 2pi)
            return dens(theta + u)

        def rem1(u):
            return w(u) * (np.log(2.0 * np.sin(0.5 * u) / u) if u > 1e-8 else 0.0)

        def rem2(u):
            v = TWO_PI - u
            return w(u) * (np.log(2.0 * np.sin(0.5 * u) / v) if v > 1e-8 else 0.0)

        val = integrate_log_singular(w, 0.0, np.pi, 0.0, tol=tol)
        val += integrate_log_singular(w, np.pi, TWO_PI, TWO_PI, tol=tol)
        val += integrate_arc(rem1, 0.0, np.pi, tol=tol) + integrate_arc(rem2, np.pi, TWO_PI, tol=tol)
        return val / TWO_PI

    lo, hi = mu.arc_lo, mu.arc_hi
    inside = bool(mu.in_arc(theta))
    th = lo + wrap_angle(theta - lo) if inside else theta
    if mu.sqrt_edges:
        c, h = 0.5 * (lo + hi), 0.5 * (hi - lo)

        def f(t):
            return dens(c + h * np.sin(t)) * h * np.cos(t)

        a, b = -0.5 * np.pi, 0.5 * np.pi
        if not inside:
            val = integrate_arc(lambda t: f(t) * _chord_log(th, c + h * np.sin(t)), a, b, tol=tol)
            return val / TWO_PI
        t0 = float(np.arcsin(np.clip((th - c) / h, -1.0, 1.0)))
        lim = np.log(max(h * abs(np.cos(t0)), 1e-300))

        def rem(t):
            dt = t - t0
            if abs(dt) < 1e-8:
                return f(t) * lim
            return f(t) * (_chord_log(th, c + h * np.sin(t)) - np.log(abs(dt)))

        val = integrate_log_singular(f, a, b, t0, tol=tol)
        val += integrate_arc(rem, a, b, points=[t0], tol=tol)
        return val / TWO_PI

    if not inside:
        return integrate_arc(lambda p: dens(p) * _chord_log(th, p), lo, hi, tol=tol) / TWO_PI

    def rem_plain(p):
        dp = p - th
        if abs(dp) < 1e-8:
            return 0.0
        return dens(p) * (_chord_log(th, p) - np.log(abs(dp)))

    val = integrate_log_singular(dens, lo, hi, th, tol=tol)
    val += integrate_arc(rem_plain, lo, hi, points=[th], tol=tol)
    return val / TWO_PI


def energy_functional(mu: CircleMeasure, potential: Potential, *, tol: float | None = None) -> float:
    """``int V dmu - iint log|z - w| dmu dmu`` by iterated quadrature.

    Measures with atoms have infinite logarithmic self-energy and give ``+inf``.
    """
    if mu.atoms:
        return math.inf
    if mu.density is None:
        raise InvalidMeasureError("energy needs an absolutely continuous part")
    tol = 1e-10 if tol is None else tol
    v_part = mu.integrate(lambda t: float(potential(t)), tol=tol)
    u_part = mu.integrate(lambda t: log_potential(mu, t, tol=0.1 * tol), tol=tol)
    return float(v_part - u_part)


# --------------------------------------------------------------------------
# effective potential


@dataclass(frozen=True)
class EffectivePotentialEval:
    """Effective potential on a grid, tagged with the evaluation route."""

    method: Literal["direct_double_integral", "closed_form_S"]
    thetas: np.ndarray
    values: np.ndarray


def _in_gap(theta: float, ens: EnsembleSpec) -> tuple[bool, float, float, float]:
    """Whether ``theta`` lies strictly in the gap; returns the lifted angle and gap ends."""
    g_lo, g_hi = ens.gap
    t = g_lo + wrap_angle(theta - g_lo)
    return (g_lo < t < g_hi), t, g_lo, g_hi


def _sqrt_chord(tau, a: float, b: float):
    """``|(e^{i tau} - e^{i a})(e^{i tau} - e^{i b})|^{1/2}``."""
    return 2.0 * np.sqrt(np.abs(np.sin(0.5 * (tau - a)) * np.sin(0.5 * (tau - b))))


def _closed_form_excess(t: float, ens: EnsembleSpec, tol: float) -> float:
    """``J - 2 xi`` at a lifted gap angle ``t`` via the offcriticality factor."""
    lo, hi = ens.arc
    g_lo, g_hi = ens.gap
    mid = 0.5 * (g_lo + g_hi)

    def integrand(tau):
        return 2.0 * abs(ens.offcriticality(tau)) * _sqrt_chord(tau, lo, hi)

    if t <= mid:
        return integrate_arc(integrand, g_lo, t, sqrt_edges=True, tol=tol)
    return integrate_arc(integrand, t, g_hi, sqrt_edges=True, tol=tol)


def effective_potential(
    theta: float,
    ens: EnsembleSpec,
    method: Literal["direct_double_integral", "closed_form_S"] = "direct_double_integral",
    *,
    tol: float | None = None,
) -> float:
    """``J(e^{i theta}) = V(e^{i theta}) - 2 int log|e^{i theta} - zeta| dmu_V``.

    ``closed_form_S`` returns ``2 xi`` on the support and, in the gap,
    ``2 xi + 2 int S(tau) |(e^{i tau}-e^{i a})(e^{i tau}-e^{i b})|^{1/2} dtau``
    integrated from the nearer side's edge (the gap is split at its midpoint).
    """
    tol = 1e-11 if tol is None else tol
    theta = float(theta)
    if ens.family == "hp" and ens.param > 0 and abs(np.sin(0.5 * theta)) < 1e-300:
        return math.inf
    if method == "direct_double_integral":
        mu = ens.measure()
        return float(ens.potential(theta)) - 2.0 * log_potential(mu, theta, tol=tol)
    if method != "closed_form_S":
        raise DomainError(f"unknown method {method!r}")
    two_xi = 2.0 * ens.robin
    if not ens.gapped:
        return two_xi
    inside, t, _, _ = _in_gap(theta, ens)
    if not inside:
        return two_xi
    return two_xi + _closed_form_excess(t, ens, tol)


def effective_potential_grid(thetas, ens: EnsembleSpec, method="direct_double_integral") -> EffectivePotentialEval:
    th = np.asarray(thetas, dtype=float)
    vals = np.array([effective_potential(t, ens, method) for t in th])
    return EffectivePotentialEval(method, th, vals)


# --------------------------------------------------------------------------
# divergence


def kl_divergence(
    ref: CircleMeasure, mu: CircleMeasure, *, tol: float | None = None, cfg: RateConfig | None = None
) -> float:
    """``K(ref | mu) = int log(d ref / d mu) d ref`` over the support of ``ref``.

    Only the absolutely continuous part of ``mu`` enters; its density must be
    positive on ``ref``'s support, and a value below ``cfg.density_floor`` at
    a quadrature node where ``ref`` has appreciable density gives ``+inf``.
    """
    cfg = cfg or DEFAULT.rates
    tol = 1e-10 if tol is None else tol
    if ref.density is None:
        raise InvalidMeasureError("reference measure needs a density")
    if mu.density is None:
        return math.inf
    flagged = []

    def integrand(t):
        r = ref.density(t)
        if r <= 0.0:
            return 0.0
        w = float(mu.density_at(t))
        if w < 0.0:
            raise InvalidMeasureError(f"negative density {w} at theta={t}")
        if w <= cfg.density_floor:
            if r > 1e-8:
                flagged.append(t)
            return 0.0
        return r * np.log(r / w)

    val = integrate_arc(integrand, ref.arc_lo, ref.arc_hi, sqrt_edges=ref.sqrt_edges, tol=tol)
    if flagged:
        return math.inf
    return float(val / TWO_PI)


def in_s1t(mu: CircleMeasure, lo: float, hi: float, *, slack: float = 1e-9) -> bool:
    """Whether the absolutely continuous part of ``mu`` lives on the arc ``[lo, hi]``.

    Atoms may sit anywhere: inside the arc they belong to the bulk, outside
    they are outliers.
    """
    if mu.density is None:
        return True
    if hi - lo >= TWO_PI - 1e-14:
        return True
    if mu.full_circle:
        return False
    start = lo + wrap_angle(mu.arc_lo - lo)
    if start > hi + slack and TWO_PI - (start - lo) > slack:
        return False
    start = start if start <= hi + slack else start - TWO_PI
    return start >= lo - slack and start + (mu.arc_hi - mu.arc_lo) <= hi + slack


# --------------------------------------------------------------------------
# outlier rates


def outlier_rate_hp(theta: float, d: float, side: Literal["plus", "minus"], *, tol: float = 1e-13) -> float:
    """Hua-Pickrell outlier rate.

    ``F^-(theta) = int_theta^{theta_d} (1+d) sqrt(s^2 - sin^2(phi/2)) / sin(phi/2) dphi``
    for ``0 < theta <= theta_d`` (``s = d/(1+d)``), ``F^+(theta) = F^-(2 pi - theta)``.
    Points on the wrong side or inside the support give ``+inf``, as does ``theta = 0``.
    """
    if d < 0:
        raise DomainError("Hua-Pickrell needs d >= 0")
    if d == 0:
        return math.inf
    s = d / (1.0 + d)
    edge = 2.0 * np.arcsin(s)
    t = float(wrap_angle(theta))
    if side == "plus":
        t = float(wrap_angle(TWO_PI - t)) if t > 0 else 0.0
    elif side != "minus":
        raise DomainError(f"unknown side {side!r}")
    if t <= 0.0 or t > edge + 1e-15:
        return math.inf
    if t >= edge:
        return 0.0

    def integrand(phi):
        sn = np.sin(0.5 * phi)
        return (1.0 + d) * np.sqrt(max(s * s - sn * sn, 0.0)) / sn

    return integrate_arc(integrand, t, edge, sqrt_edges=True, tol=tol)


def outlier_rate_hp_real(x: float, d: float, *, tol: float = 1e-13) -> float:
    """Modified Cauchy outlier rate ``int_p^{|x|} 2 d sqrt(y^2 - p^2) / (1 + y^2) dy``."""
    if d <= 0:
        return math.inf
    p = np.sqrt(1.0 + 2.0 * d) / d
    ax = abs(float(x))
    if ax < p - 1e-15:
        return math.inf
    if ax <= p:
        return 0.0
    coef = 2.0 / (np.sqrt(1.0 + p * p) - 1.0)
    return integrate_arc(lambda y: coef * np.sqrt(max(y * y - p * p, 0.0)) / (1.0 + y * y), p, ax, tol=tol)


def _acosh_primitive(u: float) -> float:
    """``4 int_1^u sqrt(v^2 - 1) dv = 2 [u sqrt(u^2-1) - log(u + sqrt(u^2-1))]``."""
    r = np.sqrt(max(u * u - 1.0, 0.0))
    return float(2.0 * (u * r - np.log(u + r)))


def outlier_rate_gw(
    theta: float, g: float, side: Literal["plus", "minus"], *, method: Literal["closed", "integral"] = "closed"
) -> float:
    """Gross-Witten outlier rate for ``g < -1`` (support ``[pi - theta_g, pi + theta_g]``).

    Closed form with ``u = sqrt|g| |cos(theta/2)|``; ``integral`` evaluates
    ``int_theta^{pi - theta_g} 2|g| sin(phi/2) sqrt(cos^2(phi/2) - 1/|g|) dphi``.
    """
    g = float(g)
    if abs(g) <= 1.0:
        raise DomainError("no outlier regime for |g| <= 1")
    if g > 1.0:
        raise DomainError("circle outliers are tabulated for g < -1; use outlier_rate")
    a = abs(g)
    edge = 2.0 * np.arcsin(1.0 / np.sqrt(a))
    t = float(wrap_angle(theta))
    if side == "plus":
        t = float(wrap_angle(TWO_PI - t))
    elif side != "minus":
        raise DomainError(f"unknown side {side!r}")
    lim = np.pi - edge
    if t > lim + 1e-15:
        return math.inf
    if t >= lim:
        return 0.0
    if method == "closed":
        return _acosh_primitive(np.sqrt(a) * np.cos(0.5 * t))

    def integrand(phi):
        c2 = np.cos(0.5 * phi) ** 2
        return 2.0 * a * np.sin(0.5 * phi) * np.sqrt(max(c2 - 1.0 / a, 0.0))

    return integrate_arc(integrand, t, lim, sqrt_edges=True, tol=1e-13)


def outlier_rate_gw_real(
    x: float, g: float, side: Literal["plus", "minus"] = "plus", *, method: Literal["closed", "integral"] = "closed"
) -> float:
    """Outlier rate of the Cayley image of Gross-Witten with coupling ``-g``, ``g > 1``.

    Closed form with ``u = |x| sqrt(g) / sqrt(1 + x^2)`` (``u = 1`` at ``x = m``).
    ``integral`` evaluates ``int_m^{|x|} 4 sqrt(1+m^2)/m^2 sqrt(y^2-m^2)/(1+y^2)^2 dy``.
    """
    g = float(g)
    if g <= 1.0:
        raise DomainError("no outlier regime for g <= 1")
    m = 1.0 / np.sqrt(g - 1.0)
    x = float(x)
    if (side == "plus" and x < m - 1e-15) or (side == "minus" and x > -m + 1e-15):
        return math.inf
    ax = abs(x)
    if ax <= m:
        return 0.0
    if method == "closed":
        return _acosh_primitive(ax * np.sqrt(g) / np.sqrt(1.0 + ax * ax))
    coef = 4.0 * np.sqrt(1.0 + m * m) / (m * m)
    return integrate_arc(
        lambda y: coef * np.sqrt(max(y * y - m * m, 0.0)) / (1.0 + y * y) ** 2, m, ax, tol=1e-13
    )


def outlier_rate(theta: float, ens: EnsembleSpec) -> tuple[str, float]:
    """Side label and rate for an atom at ``theta`` (edge atoms and bulk atoms give 0)."""
    if not ens.gapped:
        return "bulk", 0.0
    inside, t, g_lo, g_hi = _in_gap(theta, ens)
    if not inside:
        return "bulk", 0.0
    mid = 0.5 * (g_lo + g_hi)
    side = "plus" if t < mid else "minus"
    if ens.family == "hp":
        return side, outlier_rate_hp(theta, ens.param, side)
    if ens.param < -1.0:
        return side, outlier_rate_gw(theta, ens.param, side)
    return side, _closed_form_excess(t, ens, 1e-12)


# --------------------------------------------------------------------------
# coefficient rates


def H_d(gamma: complex, d: float) -> float:
    """``-log(1-|g|^2) - 2d log|1-g| + H_d(0)``, ``H_d(0) = (1+2d)log(1+2d) - 2(1+d)log(1+d)``."""
    gamma = complex(gamma)
    if d < 0:
        raise DomainError("Hua-Pickrell needs d >= 0")
    r2 = abs(gamma) ** 2
    if r2 > 1.0 + 1e-12:
        raise DomainError("|gamma| > 1")
    if r2 >= 1.0:
        return math.inf
    h0 = (1 + 2 * d) * np.log1p(2 * d) - 2 * (1 + d) * np.log1p(d)
    val = -np.log1p(-r2) - 2.0 * d * np.log(abs(1.0 - gamma)) + h0
    return float(val)


def H_gw(g: float) -> float:
    """``1 - sqrt(1-g^2) + log((1 + sqrt(1-g^2))/2)`` for ``|g| <= 1``."""
    if abs(g) > 1.0:
        raise DomainError("H(g) is defined for |g| <= 1")
    r = np.sqrt(1.0 - g * g)
    return float(1.0 - r + np.log(0.5 * (1.0 + r)))


def h_simon(alpha: complex) -> float:
    """``-log(1 - |alpha|^2) - |alpha|^2``."""
    r2 = abs(complex(alpha)) ** 2
    if r2 >= 1.0:
        return math.inf
    return float(-np.log1p(-r2) - r2)


def coefficient_rate_hp(
    gammas: CoefficientSequence, d: float, *, cfg: RateConfig | None = None
) -> tuple[list[float], float, list[float]]:
    """Partial sums of ``sum_k H_d(gamma_k)``, a tail bound and the individual terms.

    The tail bound is 0 when the tail is the constant ``gamma_d`` (each tail
    term vanishes), ``+inf`` for any other constant or zero tail with
    ``H_d(tail) > 0``, and for tail ``none`` an envelope estimate built from
    the last ``cfg.tail_window`` head terms.
    """
    if gammas.kind != "deformed":
        raise KindError("coefficient_rate_hp needs deformed coefficients; convert explicitly")
    cfg = cfg or DEFAULT.rates
    terms = [max(0.0, H_d(g, d)) for g in gammas.head]
    partial = list(np.cumsum(terms)) if terms else [0.0]
    partial = [float(p) for p in partial]
    gd = -d / (1.0 + d)
    tail = gammas.tail
    if gammas.is_trivial:
        bound = 0.0
    elif tail.type in ("zero", "constant"):
        bound = 0.0 if H_d(tail.value, d) <= 1e-15 else math.inf
    else:
        window = np.asarray(gammas.head[-cfg.tail_window :])
        upper = (1 + d) ** 3 / (1 + 2 * d)
        bound = float(upper * np.sum(np.abs(window - gd) ** 2)) if window.size else math.inf
    return partial, bound, terms


def _trace_functional(alphas: np.ndarray) -> float:
    """``Re(alpha_0 - sum_{k>=1} alpha_k conj(alpha_{k-1}))``."""
    a = np.asarray(alphas, dtype=complex)
    if a.size == 0:
        return 0.0
    return float((a[0] - np.sum(a[1:] * np.conj(a[:-1]))).real)


def coefficient_rate_gw_probe(alphas: CoefficientSequence, g: float) -> float:
    """Conjectured coefficient rate
    ``H(g) - g Re(alpha_0 - sum alpha_k conj(alpha_{k-1})) - sum log(1 - |alpha_k|^2)``.

    Reported as a conjecture only.  Constant nonzero tails make the series
    diverge and give ``+inf``.
    """
    if alphas.kind != "plain":
        raise KindError("the Gross-Witten probe needs plain coefficients")
    if alphas.is_trivial:
        return math.inf
    tail = alphas.tail
    if tail.type == "constant" and abs(tail.value) > 0:
        c = tail.value
        per_term = g * abs(c) ** 2 - np.log1p(-abs(c) ** 2)
        if abs(per_term) > 1e-15:
            return math.inf
    a = np.asarray(alphas.head, dtype=complex)
    return float(H_gw(g) - g * _trace_functional(a) - np.sum(np.log1p(-np.abs(a) ** 2)))


# --------------------------------------------------------------------------
# assembled spectral side


def spectral_rate(mu: CircleMeasure, ens: EnsembleSpec, *, tol: float | None = None) -> RateReport:
    """``K(mu_V | mu) + sum F^+ + sum F^-`` (``+inf`` outside ``S_1^T`` of the support arc)."""
    report = RateReport(rule=f"spectral:{ens.family}")
    ref = ens.measure()
    lo, hi = ens.arc
    report.diagnostics["arc"] = [lo, hi]
    if not in_s1t(mu, lo, hi):
        report.kl_term = math.inf
        report.lhs_total = math.inf
        report.status = "lhs_infinite"
        report.diagnostics["reason"] = "absolutely continuous part leaves the support arc"
        return report
    report.kl_term = kl_divergence(ref, mu, tol=tol)
    for t, w in mu.atoms:
        side, rate = outlier_rate(t, ens)
        if side == "plus":
            report.outlier_plus.append((t, rate))
        elif side == "minus":
            report.outlier_minus.append((t, rate))
    total = report.kl_term + sum(r for _, r in report.outlier_plus) + sum(r for _, r in report.outlier_minus)
    report.lhs_total = total
    report.status = "verified" if math.isfinite(total) else "lhs_infinite"
    report.diagnostics["atoms"] = [list(a) for a in mu.atoms]
    return report


def kappa(ens: EnsembleSpec) -> float:
    """Mass-defect cost ``J(1) - 2 xi``: ``+inf`` for Hua-Pickrell (``V(1) = inf``)."""
    if ens.family == "hp":
        return math.inf if ens.param > 0 else 0.0
    if not ens.gapped:
        return 0.0
    return effective_potential(0.0, ens, "closed_form_S") - 2.0 * ens.robin


def mass_defect_rate(mu: RealMeasure, ens: EnsembleSpec | RealEnsembleSpec) -> float:
    """``kappa * 1{mu(R) < 1}`` for a sub-probability on the line."""
    circle = ens.circle if isinstance(ens, RealEnsembleSpec) else ens
    if mu.total_mass >= 1.0 - 1e-12:
        return 0.0
    return kappa(circle)
