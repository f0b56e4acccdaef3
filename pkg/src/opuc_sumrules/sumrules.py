"""Sum-rule verification: independent spectral and coefficient sides, residuals, probes."""

from __future__ import annotations

import math
import os
import pickle
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .config import DEFAULT, AtomConfig
from .ensembles import gw, hp
from .errors import DomainError, InvalidMeasureError
from .measures import TWO_PI, CircleMeasure, CoefficientSequence, Tail, wrap_angle
from .opuc import (
    alphas_from_deformed,
    cmv_assemble,
    deformed_from_alphas,
    measure_from_coefficients,
    verblunsky_from_measure,
)
from .rates import (
    RateReport,
    H_gw,
    _trace_functional,
    coefficient_rate_hp,
    in_s1t,
    kl_divergence,
    spectral_rate,
)

__all__ = [
    "SumRuleCase",
    "verify_szego_verblunsky",
    "verify_hp",
    "verify_gw_strong",
    "gw_strong_rhs",
    "probe_gw_gapped",
    "gems_check_hp",
    "build_outlier_case",
    "count_escaped_eigenvalues",
    "run_case",
    "run_batch",
]

Spec = CoefficientSequence | CircleMeasure

DENSITY_COUNT = 60


@dataclass(frozen=True)
class SumRuleCase:
    """One verification job."""

    rule: Literal["szego_verblunsky", "hp", "gw_strong", "gw_gapped_conjecture"]
    param: float = 0.0
    coefficients: CoefficientSequence | None = None
    measure: CircleMeasure | None = None
    tol: float = 1e-6
    case_id: str = ""

    def __post_init__(self):
        if self.coefficients is None and self.measure is None:
            raise DomainError("a case needs coefficients or a measure")
        if self.rule == "gw_strong" and not 0.0 <= self.param <= 1.0:
            raise DomainError("gw_strong needs 0 <= g <= 1")
        if self.rule == "gw_gapped_conjecture" and not self.param < -1.0:
            raise DomainError("gw_gapped_conjecture needs g < -1")
        if self.rule == "hp" and self.param < 0:
            raise DomainError("hp needs d >= 0")
        if self.rule not in ("szego_verblunsky", "hp", "gw_strong", "gw_gapped_conjecture"):
            raise DomainError(f"unknown rule {self.rule!r}")

    @property
    def measure_source(self) -> str:
        return "from_coefficients" if self.coefficients is not None else "from_density_spec"


# --------------------------------------------------------------------------
# shared plumbing


def _as_plain(seq: CoefficientSequence) -> CoefficientSequence:
    return alphas_from_deformed(seq) if seq.kind == "deformed" else seq


def _resolve(spec: Spec, measure: CircleMeasure | None, cfg: AtomConfig | None, find_atoms: bool = True):
    """Split a spec into (coefficients or None, measure, measure_source)."""
    if isinstance(spec, CircleMeasure):
        return None, spec, "from_density_spec"
    if measure is not None:
        return spec, measure, "from_coefficients"
    if spec.is_trivial or spec.tail.type == "none":
        return spec, None, "from_coefficients"
    return spec, measure_from_coefficients(spec, cfg=cfg, find_atoms=find_atoms), "from_coefficients"


def _coefficients_of(measure: CircleMeasure, count: int) -> CoefficientSequence:
    return verblunsky_from_measure(measure, count)


# --------------------------------------------------------------------------
# Szego-Verblunsky


def verify_szego_verblunsky(
    spec: Spec,
    *,
    measure: CircleMeasure | None = None,
    tol: float = 1e-6,
    count: int = DENSITY_COUNT,
    cfg: AtomConfig | None = None,
) -> RateReport:
    """``K(uniform | mu) = -sum log(1 - |alpha_k|^2)``.

    The left side integrates ``-log w`` for the reconstructed density; the
    right side sums the coefficient series.
    """
    report = RateReport(rule="szego_verblunsky")
    coeffs, mu, source = _resolve(spec, measure, cfg, find_atoms=False)
    report.diagnostics["measure_source"] = source
    if coeffs is None:
        coeffs = _coefficients_of(mu, count)
    a = np.abs(np.asarray(coeffs.head))
    if coeffs.is_trivial:
        report.rhs_terms = [float(-np.log1p(-x * x)) if x < 1 else math.inf for x in a]
        report.rhs_partial_sums = [math.inf]
        report.rhs_tail_bound = 0.0
        report.lhs_total = report.kl_term = math.inf
        report.diagnostics["reason"] = "finitely supported measure"
        return report.finalize(tol)
    terms = [float(-np.log1p(-x * x)) for x in a]
    report.rhs_terms = terms
    report.rhs_partial_sums = [float(v) for v in np.cumsum(terms)] if terms else [0.0]
    tail = coeffs.tail
    if tail.type == "constant" and abs(tail.value) > 0:
        report.rhs_tail_bound = math.inf
        report.rhs_partial_sums.append(math.inf)
    elif tail.type == "none":
        window = np.asarray(terms[-DEFAULT.rates.tail_window :])
        report.rhs_tail_bound = float(np.sum(window)) if window.size else 0.0
    if mu is None:
        raise DomainError("the left side needs a measure for tail 'none' coefficients")
    uniform = CircleMeasure(0.0, TWO_PI, lambda t: 1.0, name="uniform")
    report.kl_term = kl_divergence(uniform, mu)
    report.lhs_total = report.kl_term
    return report.finalize(tol)


# --------------------------------------------------------------------------
# Hua-Pickrell


def verify_hp(
    spec: Spec,
    d: float,
    *,
    measure: CircleMeasure | None = None,
    tol: float = 1e-4,
    count: int = DENSITY_COUNT,
    cfg: AtomConfig | None = None,
) -> RateReport:
    """``K(HP_d | mu) + sum F^+ + sum F^- = sum_k H_d(gamma_k)``.

    Coefficient input is reconstructed through its Schur function (atoms
    detected by truncated CMV, masses by radial limits).  ``d = 0`` is the
    Szego-Verblunsky rule and runs the same code path.
    """
    if d < 0:
        raise DomainError("Hua-Pickrell needs d >= 0")
    if d == 0:
        rep = verify_szego_verblunsky(spec, measure=measure, tol=tol, count=count, cfg=cfg)
        rep.diagnostics["reduced_from"] = "hp(d=0)"
        return rep
    report = RateReport(rule="hp")
    coeffs, mu, source = _resolve(spec, measure, cfg)
    report.diagnostics["measure_source"] = source
    report.diagnostics["d"] = d
    if coeffs is None:
        coeffs = _coefficients_of(mu, count)
    gammas = coeffs if coeffs.kind == "deformed" else deformed_from_alphas(coeffs)
    partial, bound, terms = coefficient_rate_hp(gammas, d)
    report.rhs_terms = terms
    report.rhs_partial_sums = partial if math.isfinite(bound) else partial + [math.inf]
    report.rhs_tail_bound = bound
    if mu is None:
        report.lhs_total = report.kl_term = math.inf
        report.diagnostics["reason"] = "finitely supported measure"
        return report.finalize(tol)
    lhs = spectral_rate(mu, hp(d))
    report.kl_term = lhs.kl_term
    report.outlier_plus = lhs.outlier_plus
    report.outlier_minus = lhs.outlier_minus
    report.lhs_total = lhs.lhs_total
    report.diagnostics.update(lhs.diagnostics)
    report.diagnostics["mass_check"] = float(mu.ac_mass() + mu.atom_mass()) if mu.density else mu.atom_mass()
    return report.finalize(tol)


# --------------------------------------------------------------------------
# Gross-Witten, ungapped


def gw_strong_rhs(alphas: np.ndarray, g: float, *, closed: bool = True) -> dict:
    """Both coefficient-side expressions for ``K(GW_{-g} | mu)``.

    ``closed=True`` means the sequence ends with zeros after ``alphas``, so
    the difference series includes the final jump ``|alpha_{N-1}|^2``.
    """
    a = np.asarray(alphas, dtype=complex)
    h = H_gw(g)
    if a.size == 0:
        return {"difference_form": h, "trace_form": h, "terms": [h]}
    ext = np.concatenate([a, [0.0]]) if closed else a
    diffs = 0.5 * g * np.abs(np.diff(ext)) ** 2
    local = -np.log1p(-np.abs(a) ** 2) - g * np.abs(a) ** 2
    head = h + g * (a[0].real + 0.5 * abs(a[0]) ** 2)
    terms = [float(head + local[0])]
    for k in range(1, ext.size):
        terms.append(float(diffs[k - 1] + (local[k] if k < a.size else 0.0)))
    diff_form = float(np.sum(terms))
    trace_form = float(h + g * _trace_functional(a) - np.sum(np.log1p(-np.abs(a) ** 2)))
    if not closed:
        # the trace form telescopes only with the boundary term of the last coefficient
        trace_form += 0.5 * g * abs(a[-1]) ** 2
    return {"difference_form": diff_form, "trace_form": trace_form, "terms": terms}


def verify_gw_strong(
    spec: Spec,
    g: float,
    *,
    measure: CircleMeasure | None = None,
    tol: float = 1e-6,
    count: int = DENSITY_COUNT,
    cfg: AtomConfig | None = None,
) -> RateReport:
    """``K(GW_{-g} | mu) = H(g) + g(Re a_0 + |a_0|^2/2 + sum |a_k - a_{k-1}|^2/2) + sum(-log(1-|a_k|^2) - g|a_k|^2)``.

    The trace form ``H(g) + g Re(a_0 - sum a_k conj(a_{k-1})) - sum log(1-|a_k|^2)``
    is evaluated alongside and their difference reported.
    """
    if not 0.0 <= g <= 1.0:
        raise DomainError("gw_strong needs 0 <= g <= 1")
    report = RateReport(rule="gw_strong")
    coeffs, mu, source = _resolve(spec, measure, cfg, find_atoms=False)
    report.diagnostics["measure_source"] = source
    report.diagnostics["g"] = g
    if coeffs is None:
        coeffs = _coefficients_of(mu, count)
    coeffs = _as_plain(coeffs)
    if coeffs.is_trivial:
        report.rhs_partial_sums = [math.inf]
        report.lhs_total = report.kl_term = math.inf
        return report.finalize(tol)
    closed = coeffs.tail.type == "zero"
    rhs = gw_strong_rhs(coeffs.head, g, closed=closed)
    report.rhs_terms = rhs["terms"]
    report.rhs_partial_sums = [float(v) for v in np.cumsum(rhs["terms"])]
    if coeffs.tail.type == "constant" and abs(coeffs.tail.value) > 0:
        report.rhs_partial_sums.append(math.inf)
        report.rhs_tail_bound = math.inf
    report.diagnostics["trace_form"] = rhs["trace_form"]
    report.diagnostics["difference_form"] = rhs["difference_form"]
    report.diagnostics["form_gap"] = abs(rhs["trace_form"] - rhs["difference_form"])
    if mu is None:
        raise DomainError("the left side needs a measure for tail 'none' coefficients")
    report.kl_term = kl_divergence(gw(-g).measure(), mu)
    report.lhs_total = report.kl_term
    return report.finalize(tol)


# --------------------------------------------------------------------------
# Gross-Witten, gapped (conjecture)


def probe_gw_gapped(
    spec: Spec,
    g: float,
    *,
    measure: CircleMeasure | None = None,
    count: int = 40,
    cfg: AtomConfig | None = None,
) -> RateReport:
    """Both sides of the conjectured gapped Gross-Witten sum rule, never asserted.

    The constant ``H(g)`` has no real value for ``|g| > 1``, so the right side
    is reported without it; the per-term drift of its partial sums is
    recorded in the diagnostics.
    """
    if not g < -1.0:
        raise DomainError("the gapped probe needs g < -1")
    report = RateReport(rule="gw_gapped", label="CONJECTURE")
    coeffs, mu, source = _resolve(spec, measure, cfg)
    report.diagnostics["measure_source"] = source
    report.diagnostics["g"] = g
    report.diagnostics["H"] = None
    if coeffs is None:
        coeffs = _coefficients_of(mu, count)
    a = np.asarray(_as_plain(coeffs).head, dtype=complex)
    prev = np.concatenate([[0.0], a[:-1]])
    cross = a * np.conj(prev)
    cross[0] = -a[0]  # Re(alpha_0) enters with the opposite sign
    terms = (g * cross.real - np.log1p(-np.abs(a) ** 2)).tolist()
    report.rhs_terms = terms
    report.rhs_partial_sums = [float(v) for v in np.cumsum(terms)] if terms else [0.0]
    window = np.asarray(terms[-DEFAULT.rates.tail_window :])
    report.diagnostics["per_term_drift"] = float(np.mean(window)) if window.size else 0.0
    if mu is not None:
        lhs = spectral_rate(mu, gw(g))
        report.kl_term = lhs.kl_term
        report.outlier_plus, report.outlier_minus = lhs.outlier_plus, lhs.outlier_minus
        report.lhs_total = lhs.lhs_total
        report.diagnostics["lhs_status"] = lhs.status
    else:
        report.lhs_total = math.inf
    report.finalize(math.inf)
    report.status = "probe"
    return report


# --------------------------------------------------------------------------
# gems


def _edge_sum_status(distances: np.ndarray) -> tuple[float, str]:
    """Sum of ``dist^{3/2}`` and a convergence verdict for a (truncated) outlier sequence."""
    if distances.size == 0:
        return 0.0, "finite"
    terms = np.sort(distances ** 1.5)[::-1]
    total = float(np.sum(terms))
    if terms.size < 10:
        return total, "finite"
    j = np.arange(1, terms.size + 1)
    tail = slice(terms.size // 2, None)
    slope = -np.polyfit(np.log(j[tail]), np.log(terms[tail]), 1)[0]
    if slope > 1.05:
        return total, "finite"
    if slope < 0.95:
        return math.inf, "infinite"
    return total, "inconclusive"


def _coefficient_sum_status(dev: np.ndarray, tail: Tail, d: float) -> tuple[float, str]:
    """``sum |gamma_k - gamma_d|^2`` with a verdict on the truncated tail.

    Exhausted tails (all late terms below 1e-10) and power-law decay faster
    than ``k^{-1.5}`` count as finite; late terms that have not dropped to
    half their early level count as divergent; anything else is left open.
    """
    gd = -d / (1.0 + d)
    total = float(np.sum(dev)) if dev.size else 0.0
    if tail.type in ("zero", "constant"):
        if abs(tail.value - gd) > 1e-12:
            return math.inf, "infinite"
        return total, "finite"
    if dev.size < 20:
        return total, "inconclusive"
    half = dev.size // 2
    early, late = dev[:half], dev[half:]
    if late.max() < 1e-10:
        return total, "finite"
    if late.mean() > 1e-3 and late.mean() > 0.5 * early.mean():
        return math.inf, "infinite"
    k = np.arange(half, dev.size) + 1.0
    keep = late > 1e-300
    slope = -np.polyfit(np.log(k[keep]), np.log(late[keep]), 1)[0] if keep.sum() > 2 else 0.0
    if slope > 1.5:
        return total, "finite"
    return total, "inconclusive"


def gems_check_hp(mu: CircleMeasure, d: float, *, count: int = 40, coefficients: CoefficientSequence | None = None) -> dict:
    """Finiteness conditions of the Hua-Pickrell gem against ``sum |gamma_k - gamma_d|^2``.

    Returns ``in_S1T``, ``edge_sum_finite``, ``szego_integral_finite``,
    ``coefficient_sum`` (``inf`` when the partial sums keep growing) and
    a ``status`` of ``consistent``, ``inconsistent`` or ``inconclusive``.
    """
    ens = hp(d)
    lo, hi = ens.arc
    edge = ens.edge
    member = in_s1t(mu, lo, hi)
    minus, plus = [], []
    for t, _ in mu.atoms:
        t = float(wrap_angle(t))
        if t < lo:
            minus.append(t)
        elif t > hi:
            plus.append(t)
    edge_ok = not (minus and min(minus) <= 0.0)
    dist = np.array([edge - t for t in minus] + [t - (TWO_PI - edge) for t in plus])
    edge_sum, verdict = _edge_sum_status(dist)
    if not edge_ok:
        verdict = "infinite"
    edge_finite = verdict == "finite"

    ref = ens.measure()
    if mu.density is None or not member:
        szego = -math.inf
    else:
        floored = []

        def log_density(t):
            w = float(mu.density_at(t))
            if w <= DEFAULT.rates.density_floor:
                floored.append(t)
                return 0.0
            return float(np.log(w))

        szego = ref.integrate(log_density)
        szego = -math.inf if floored else szego
    szego_finite = math.isfinite(szego)

    if coefficients is None:
        try:
            coefficients = verblunsky_from_measure(mu, count)
        except (DomainError, InvalidMeasureError) as exc:  # breakdown means no verdict
            return {
                "in_S1T": bool(member), "edge_sum_finite": edge_finite, "szego_integral_finite": szego_finite,
                "coefficient_sum": math.nan, "status": "inconclusive", "reason": str(exc),
            }
    gam = coefficients if coefficients.kind == "deformed" else deformed_from_alphas(coefficients)
    dev = np.abs(np.asarray(gam.head) - (-d / (1 + d))) ** 2
    coef_sum, coef_verdict = _coefficient_sum_status(dev, gam.tail, d)
    if verdict == "inconclusive" or coef_verdict == "inconclusive":
        status = "inconclusive"
    else:
        conditions = bool(member) and edge_finite and szego_finite
        status = "consistent" if conditions == (coef_verdict == "finite") else "inconsistent"
    return {
        "in_S1T": bool(member),
        "edge_sum_finite": edge_finite,
        "edge_sum": edge_sum,
        "szego_integral_finite": szego_finite,
        "szego_integral": szego,
        "coefficient_sum": coef_sum,
        "status": status,
    }


# --------------------------------------------------------------------------
# outlier construction


def count_escaped_eigenvalues(
    seq: CoefficientSequence, arc: tuple[float, float], *, margin: float = 0.05, n: int = 512
) -> list[float]:
    """Eigenangles of the truncated CMV matrix lying outside ``arc`` by more than ``margin``.

    Only eigenvalues that persist (within ``margin/2``) under a change of
    the unimodular closing coefficient are kept.
    """
    plain = _as_plain(seq)
    body = plain.values(n - 1)
    lo, hi = arc

    def escaped(beta: complex) -> np.ndarray:
        ev = np.linalg.eigvals(cmv_assemble(np.concatenate([body, [beta]])).matrix)
        th = wrap_angle(np.angle(ev))
        return th[(th < lo - margin) | (th > hi + margin)]

    first, second = escaped(1.0), escaped(-1.0)
    keep = []
    for t in first:
        if second.size and np.min(np.abs(np.angle(np.exp(1j * (second - t))))) < 0.5 * margin:
            keep.append(float(t))
    return sorted(keep)


def build_outlier_case(
    d: float,
    *,
    target: complex = 0.9 * np.exp(0.15j * np.pi),
    margin: float = 0.05,
    n: int = 512,
    iters: int = 20,
) -> CoefficientSequence:
    """Deformed sequence with one perturbed coefficient producing exactly one outlier.

    ``gamma_0 = gamma_d + t (target - gamma_d)`` and the rest equal ``gamma_d``;
    ``t`` is bisected to the smallest value at which one truncated-CMV
    eigenvalue leaves the support arc by more than ``margin``.
    """
    gd = -d / (1.0 + d)
    arc = hp(d).arc

    def make(t: float) -> CoefficientSequence:
        return CoefficientSequence("deformed", [gd + t * (target - gd)], Tail.constant(gd))

    lo_t, hi_t = 0.0, 1.0
    if not count_escaped_eigenvalues(make(hi_t), arc, margin=margin, n=n):
        raise DomainError("target direction produces no outlier")
    for _ in range(iters):
        mid = 0.5 * (lo_t + hi_t)
        if count_escaped_eigenvalues(make(mid), arc, margin=margin, n=n):
            hi_t = mid
        else:
            lo_t = mid
    seq = make(hi_t)
    found = count_escaped_eigenvalues(seq, arc, margin=margin, n=n)
    if len(found) != 1:
        raise DomainError(f"bisection ended with {len(found)} escaped eigenvalues")
    return seq


# --------------------------------------------------------------------------
# batch runner


def run_case(case: SumRuleCase) -> tuple[str, RateReport]:
    spec = case.coefficients if case.coefficients is not None else case.measure
    extra = {"measure": case.measure} if case.coefficients is not None else {}
    if case.rule == "szego_verblunsky":
        rep = verify_szego_verblunsky(spec, tol=case.tol, **extra)
    elif case.rule == "hp":
        rep = verify_hp(spec, case.param, tol=case.tol, **extra)
    elif case.rule == "gw_strong":
        rep = verify_gw_strong(spec, case.param, tol=case.tol, **extra)
    else:
        rep = probe_gw_gapped(spec, case.param, **extra)
    rep.diagnostics["case_id"] = case.case_id
    return case.case_id, rep


def run_batch(cases: Sequence[SumRuleCase], jobs: int | None = None) -> dict[str, RateReport]:
    """Run independent cases, in worker processes when ``jobs > 1``.

    ``OPUC_SUMRULES_JOBS`` overrides ``jobs``.  Cases that cannot be pickled
    run in-process.  Results are keyed and
    ordered by case id, so the merge is deterministic.
    """
    env = os.environ.get("OPUC_SUMRULES_JOBS")
    if env:
        jobs = int(env)
    jobs = jobs or 1
    ids = [c.case_id for c in cases]
    if len(set(ids)) != len(ids):
        raise DomainError("case ids must be unique")
    if jobs > 1:
        try:
            pickle.dumps(list(cases))
        except (pickle.PicklingError, AttributeError, TypeError):
            jobs = 1  # density specs hold closures; run them in-process
    if jobs <= 1 or len(cases) <= 1:
        results = [run_case(c) for c in cases]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_case, cases))
    return dict(sorted(results, key=lambda kv: kv[0]))
