"""Scalar OPUC machinery.

Szego recursion, plain/deformed coefficient transforms, CMV matrices,
Schur and Caratheodory functions, spectral measures and moments.

Conventions
-----------
* Polynomials are ascending coefficient vectors: ``p[k]`` multiplies ``z**k``.
* ``alpha_k = -conj(phi_{k+1}(0))`` for the monic orthogonal polynomials.
* Moments are ``m_k = int z**k dmu``; for the CMV pair ``(C, e_1)`` this is
  ``<e_1, C^k e_1>``, so ``m_1 = conj(alpha_0)``.
* The CMV trace is ``tr C = conj(alpha_0) - sum_{k>=1} alpha_{k-1} conj(alpha_k)``,
  equivalently ``-sum_k conj(alpha_k) alpha_{k-1}`` with ``alpha_{-1} = -1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg
from scipy import optimize

from .config import DEFAULT, AtomConfig
from .errors import DetectionError, DomainError, InvalidMeasureError, SingularInputError
from .measures import TWO_PI, UNIT_TOL, CircleMeasure, CoefficientSequence, Tail, wrap_angle

MAX_DEGREE = 4096

__all__ = [
    "szego_step",
    "reversed_polynomial",
    "orthogonal_polynomials",
    "verblunsky_from_moments",
    "verblunsky_from_measure",
    "discretize_measure",
    "deformed_from_alphas",
    "alphas_from_deformed",
    "BandedUnitary",
    "cmv_assemble",
    "cmv_trace",
    "spectral_measure_finite",
    "SchurFunction",
    "schur_eval",
    "schur_boundary",
    "caratheodory_eval",
    "caratheodory_density",
    "atom_mass",
    "detect_atoms",
    "measure_from_coefficients",
    "moments_of_measure",
    "geronimus_arc",
]


# --------------------------------------------------------------------------
# polynomials


def reversed_polynomial(phi: np.ndarray) -> np.ndarray:
    """``z^k conj(phi(1/conj z))`` for ``phi`` of formal degree ``k``."""
    return np.conj(np.asarray(phi, dtype=complex)[::-1])


def szego_step(phi, phi_star, alpha: complex) -> tuple[np.ndarray, np.ndarray]:
    """One step of the Szego recursion.

    Returns ``(z phi - conj(alpha) phi_star, phi_star - alpha z phi)``.
    """
    alpha = complex(alpha)
    if abs(alpha) > 1.0 + UNIT_TOL:
        raise DomainError(f"|alpha| = {abs(alpha):.3g} > 1")
    phi = np.asarray(phi, dtype=complex)
    phi_star = np.asarray(phi_star, dtype=complex)
    if phi.shape != phi_star.shape:
        raise DomainError("phi and phi_star must share a degree")
    if phi.size > MAX_DEGREE:
        raise DomainError(f"degree cap {MAX_DEGREE} exceeded")
    z_phi = np.concatenate([[0.0], phi])
    star = np.concatenate([phi_star, [0.0]])
    return z_phi - np.conj(alpha) * star, star - alpha * z_phi


def orthogonal_polynomials(alphas) -> list[np.ndarray]:
    """Monic ``phi_0 .. phi_n`` generated by the coefficients ``alphas``."""
    phi = np.ones(1, dtype=complex)
    star = np.ones(1, dtype=complex)
    out = [phi]
    for a in np.asarray(alphas, dtype=complex):
        phi, star = szego_step(phi, star, a)
        out.append(phi)
    return out


# --------------------------------------------------------------------------
# moments -> coefficients


def verblunsky_from_moments(moments, count: int, *, m0: float = 1.0) -> CoefficientSequence:
    """Coefficients ``alpha_0 .. alpha_{count-1}`` from ``m_1 .. m_count``.

    Runs the Szego recursion with ``conj(alpha_k) = int z phi_k dmu / ||phi_k||^2``
    (orthogonality of ``phi_{k+1}`` to the constants).
    """
    m = np.asarray(moments, dtype=complex).reshape(-1)
    if count > m.size:
        raise DomainError(f"{count} coefficients need {count} moments, got {m.size}")
    mom = np.concatenate([[m0], m[:count]])
    phi = np.ones(1, dtype=complex)
    star = np.ones(1, dtype=complex)
    norm = float(m0)
    out = np.empty(count, dtype=complex)
    for k in range(count):
        if norm <= 0.0:
            raise InvalidMeasureError("moment matrix is not positive definite")
        s = np.dot(phi, mom[1 : k + 2])
        alpha = np.conj(s / norm)
        if abs(alpha) >= 1.0:
            raise InvalidMeasureError(
                f"|alpha_{k}| = {abs(alpha):.6g} >= 1: trivial or invalid moment data"
            )
        out[k] = alpha
        phi, star = szego_step(phi, star, alpha)
        norm *= 1.0 - abs(alpha) ** 2
    return CoefficientSequence("plain", out, Tail("none"))


def discretize_measure(mu: CircleMeasure, nodes: int = 1024) -> tuple[np.ndarray, np.ndarray]:
    """Angles and weights of a discrete measure matching ``mu``'s low moments.

    The density part uses Gauss-Legendre nodes (after the sine map when the
    density has square-root edges) or equispaced nodes on the full circle,
    where the trapezoid rule is spectrally accurate; atoms are appended.
    """
    angles: list[np.ndarray] = []
    weights: list[np.ndarray] = []
    if mu.density is not None:
        if mu.full_circle:
            th = mu.arc_lo + TWO_PI * (np.arange(nodes) + 0.5) / nodes
            w = np.array([mu.density(t) for t in th]) / nodes
        else:
            x, gw = np.polynomial.legendre.leggauss(nodes)
            lo, hi = mu.arc_lo, mu.arc_hi
            c, h = 0.5 * (lo + hi), 0.5 * (hi - lo)
            if mu.sqrt_edges:
                t = 0.5 * np.pi * x
                th = c + h * np.sin(t)
                jac = 0.5 * np.pi * h * np.cos(t)
            else:
                th = c + h * x
                jac = np.full_like(x, h)
            w = gw * jac * np.array([mu.density(v) for v in th]) / TWO_PI
        angles.append(th)
        weights.append(w)
    if mu.atoms:
        angles.append(np.array([t for t, _ in mu.atoms]))
        weights.append(np.array([m for _, m in mu.atoms]))
    return np.concatenate(angles), np.concatenate(weights)


def verblunsky_from_measure(mu: CircleMeasure, count: int, *, nodes: int = 1024) -> CoefficientSequence:
    """Coefficients of ``mu`` from Arnoldi on a discretisation of ``L^2(mu)``.

    With ``D = diag(z_j)`` and start vector ``sqrt(w_j)``, twice-orthogonalised
    Arnoldi produces the orthonormal polynomials and the GGT Hessenberg
    matrix, whose first row is ``rho_0 ... rho_{k-1} conj(alpha_k)`` and whose
    subdiagonal is ``rho_k``.  This avoids the ill-conditioned Toeplitz route.
    """
    th, w = discretize_measure(mu, nodes)
    w = w / np.sum(w)
    if count >= np.count_nonzero(w > 0):
        raise DomainError("not enough support points for the requested count")
    z = np.exp(1j * th)
    q = np.zeros((z.size, count + 1), dtype=complex)
    q[:, 0] = np.sqrt(w)
    out = np.empty(count, dtype=complex)
    rho_prod = 1.0
    for k in range(count):
        v = z * q[:, k]
        top = np.vdot(q[:, 0], v)
        for _ in range(2):
            coef = q[:, : k + 1].conj().T @ v
            v = v - q[:, : k + 1] @ coef
        rho = np.linalg.norm(v)
        out[k] = np.conj(top / rho_prod)
        if abs(out[k]) >= 1.0:
            raise InvalidMeasureError(f"|alpha_{k}| >= 1 in the discretised recursion")
        q[:, k + 1] = v / rho
        rho_prod *= rho
    return CoefficientSequence("plain", out, Tail("none"))


# --------------------------------------------------------------------------
# plain <-> deformed


def _phase_step(gamma: complex) -> complex:
    den = 1.0 - gamma
    if abs(den) < 1e-15:
        raise SingularInputError("deformed coefficient equal to 1")
    return (1.0 - np.conj(gamma)) / den


def deformed_from_alphas(alphas: CoefficientSequence) -> CoefficientSequence:
    """``gamma_k = conj(alpha_k) prod_{j<k} (1 - conj(gamma_j)) / (1 - gamma_j)``."""
    if alphas.kind != "plain":
        raise DomainError("expected plain coefficients")
    phase = 1.0 + 0j
    gam = np.empty(len(alphas), dtype=complex)
    for k, a in enumerate(alphas.head):
        gam[k] = np.conj(a) * phase
        if k < len(alphas) - 1 or not alphas.is_trivial:
            phase *= _phase_step(gam[k])
    tail = alphas.tail
    if alphas.is_trivial or tail.type == "zero":
        new_tail = Tail("zero") if tail.type != "none" else Tail("none")
    elif tail.type == "constant":
        g = np.conj(tail.value) * phase
        # the tail stays constant only when it does not rotate the phase further
        new_tail = Tail.constant(g.real) if abs(g.imag) <= 1e-14 else Tail("none")
    else:
        new_tail = Tail("none")
    return CoefficientSequence("deformed", gam, new_tail)


def alphas_from_deformed(gammas: CoefficientSequence) -> CoefficientSequence:
    """Exact inverse of :func:`deformed_from_alphas`."""
    if gammas.kind != "deformed":
        raise DomainError("expected deformed coefficients")
    phase = 1.0 + 0j
    al = np.empty(len(gammas), dtype=complex)
    for k, g in enumerate(gammas.head):
        al[k] = np.conj(g / phase)
        if k < len(gammas) - 1 or not gammas.is_trivial:
            phase *= _phase_step(g)
    tail = gammas.tail
    if gammas.is_trivial or tail.type == "zero":
        new_tail = Tail("zero") if tail.type != "none" else Tail("none")
    elif tail.type == "constant" and abs(tail.value.imag) <= 1e-14:
        # a real constant gamma leaves the phase fixed, so alpha is constant too
        new_tail = Tail.constant(np.conj(tail.value / phase))
    else:
        new_tail = Tail("none")
    return CoefficientSequence("plain", al, new_tail)


# --------------------------------------------------------------------------
# CMV


@dataclass(frozen=True)
class BandedUnitary:
    """Finite CMV or block GGT matrix.

    Stored densely; ``lower`` and ``upper`` record the band structure
    (``upper = -1`` means unbounded, as for GGT).
    """

    matrix: np.ndarray
    kind: Literal["cmv", "ggt"] = "cmv"
    block: int = 1
    lower: int = 2
    upper: int = 2

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def unitarity_defect(self) -> float:
        m = self.matrix
        return float(np.linalg.norm(m.conj().T @ m - np.eye(m.shape[0])))

    def bands(self) -> np.ndarray:
        """Diagonal-ordered storage ``ab[u + i - j, j] = a[i, j]`` (LAPACK layout)."""
        n = self.n
        u = self.upper if self.upper >= 0 else n - 1
        lo = self.lower
        ab = np.zeros((u + lo + 1, n), dtype=complex)
        for i in range(n):
            for j in range(max(0, i - lo), min(n, i + u + 1)):
                ab[u + i - j, j] = self.matrix[i, j]
        return ab


def _theta_block(a: complex) -> np.ndarray:
    rho = np.sqrt(max(0.0, 1.0 - abs(a) ** 2))
    return np.array([[np.conj(a), rho], [rho, -a]], dtype=complex)


def cmv_assemble(alphas: CoefficientSequence | np.ndarray, n: int | None = None) -> BandedUnitary:
    """Finite CMV matrix ``C = L M`` from ``alpha_0 .. alpha_{n-1}``, ``|alpha_{n-1}| = 1``.

    ``L`` holds the 2x2 blocks of the even coefficients, ``M`` the identity
    corner and the odd ones; the final block is the 1x1 ``[conj(alpha_{n-1})]``.
    """
    if isinstance(alphas, CoefficientSequence):
        if alphas.kind != "plain":
            raise DomainError("cmv_assemble needs plain coefficients")
        vals = alphas.values(n if n is not None else len(alphas))
    else:
        vals = np.asarray(alphas, dtype=complex)
        if n is not None:
            vals = vals[:n]
    n = vals.size
    if n == 0:
        raise DomainError("need at least one coefficient")
    if abs(abs(vals[-1]) - 1.0) > 1e-12:
        raise DomainError("invalid final coefficient: |alpha_{n-1}| must be 1")
    if n > 1 and np.any(np.abs(vals[:-1]) >= 1.0):
        raise DomainError("alpha_0 .. alpha_{n-2} must lie in the open disk")
    big_l = np.zeros((n, n), dtype=complex)
    big_m = np.zeros((n, n), dtype=complex)
    big_m[0, 0] = 1.0
    for k, a in enumerate(vals):
        block = _theta_block(a) if k < n - 1 else np.array([[np.conj(a)]])
        target = big_l if k % 2 == 0 else big_m
        s = block.shape[0]
        target[k : k + s, k : k + s] = block
    return BandedUnitary(big_l @ big_m, "cmv", 1, 2, 2)


def cmv_trace(alphas) -> complex:
    """``conj(alpha_0) - sum_{k>=1} alpha_{k-1} conj(alpha_k)``."""
    a = np.asarray(alphas, dtype=complex)
    return complex(np.conj(a[0]) - np.sum(a[:-1] * np.conj(a[1:])))


def spectral_measure_finite(cmv: BandedUnitary | np.ndarray, block: int = 1) -> CircleMeasure:
    """Spectral measure of ``(C, e_1)``: atoms at eigenangles, weights ``|<psi_k, e_1>|^2``.

    The complex Schur form of a normal matrix is diagonal with a unitary
    basis, which keeps eigenvectors orthonormal under near-degeneracy.
    """
    mat = cmv.matrix if isinstance(cmv, BandedUnitary) else np.asarray(cmv, dtype=complex)
    tri, z = scipy.linalg.schur(mat, output="complex")
    lam = np.diag(tri)
    w = np.sum(np.abs(z[:block, :]) ** 2, axis=0)
    theta = wrap_angle(np.angle(lam))
    # merge numerically coincident eigenvalues
    order = np.argsort(theta)
    atoms: list[list[float]] = []
    for i in order:
        if atoms and abs(theta[i] - atoms[-1][0]) < 1e-12:
            atoms[-1][1] += w[i]
        else:
            atoms.append([float(theta[i]), float(w[i])])
    atoms = [(t, wt) for t, wt in atoms if wt > 1e-300]
    return CircleMeasure(0.0, TWO_PI, None, tuple(atoms), total_mass=min(1.0, sum(wt for _, wt in atoms)))


# --------------------------------------------------------------------------
# Schur / Caratheodory


@dataclass(frozen=True)
class SchurFunction:
    """Schur function of a head of plain coefficients followed by a closed-form tail."""

    head_alphas: np.ndarray
    tail: Literal["zero", "geronimus"] = "zero"
    tail_value: complex = 0j

    def __post_init__(self):
        head = np.array(self.head_alphas, dtype=complex).reshape(-1)
        if np.any(np.abs(head) >= 1.0):
            raise DomainError("Schur parameters must lie in the open disk")
        head.setflags(write=False)
        object.__setattr__(self, "head_alphas", head)
        if self.tail not in ("zero", "geronimus"):
            raise DomainError(f"unknown tail {self.tail!r}")
        if self.tail == "geronimus" and abs(self.tail_value) >= 1.0:
            raise DomainError("Geronimus parameter must lie in the open disk")
        if self.tail == "zero" or self.tail_value == 0:
            object.__setattr__(self, "tail", "zero")
            object.__setattr__(self, "tail_value", 0j)
        else:
            object.__setattr__(self, "tail_value", complex(self.tail_value))

    @classmethod
    def from_coefficients(cls, seq: CoefficientSequence) -> "SchurFunction":
        if seq.kind == "deformed":
            seq = alphas_from_deformed(seq)
        if seq.is_trivial:
            raise DomainError("trivial sequence: the measure is finitely supported")
        if seq.tail.type == "none":
            raise DomainError("tail 'none' has no closed-form Schur function")
        if seq.tail.type == "zero":
            return cls(seq.head, "zero")
        return cls(seq.head, "geronimus", seq.tail.value)

    @property
    def arc(self) -> tuple[float, float]:
        """Support arc of the absolutely continuous part."""
        if self.tail == "zero":
            return 0.0, TWO_PI
        return geronimus_arc(abs(self.tail_value))


def geronimus_arc(modulus: float) -> tuple[float, float]:
    """``[2 arcsin|c|, 2 pi - 2 arcsin|c|]`` for constant coefficients of modulus ``|c|``."""
    edge = 2.0 * np.arcsin(modulus)
    return float(edge), float(TWO_PI - edge)


def _mobius_inv(a: complex, zeta):
    """``T_{-a}(zeta) = (zeta + a) / (1 + conj(a) zeta)``."""
    return (zeta + a) / (1.0 + np.conj(a) * zeta)


def _tail_roots(c: complex, z):
    """Both roots of ``conj(c) z f^2 + (1 - z) f - c = 0`` (cancellation-free form)."""
    qa = np.conj(c) * z
    qb = 1.0 - z
    disc = np.sqrt(qb * qb + 4.0 * qa * c)
    disc = np.where((np.conj(qb) * disc).real >= 0.0, disc, -disc)
    q = -0.5 * (qb + disc)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        small = -c / q
        large = q / qa
    return small, large


def _tail_interior(f: SchurFunction, z):
    z = np.asarray(z, dtype=complex)
    if f.tail == "zero":
        return np.zeros_like(z)
    c = f.tail_value
    r1, r2 = _tail_roots(c, z)
    out = np.where(np.abs(r1) <= np.abs(r2), r1, r2)
    return np.where(np.abs(z) < 1e-12, c, out)


def _backward(f: SchurFunction, z, tail_values):
    g = tail_values
    for a in f.head_alphas[::-1]:
        g = _mobius_inv(a, z * g)
    return g


def schur_eval(f: SchurFunction, z):
    """``f(z)`` for ``|z| < 1`` by backward recursion ``f_j = T_{-alpha_j}(z f_{j+1})``."""
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) >= 1.0):
        raise DomainError("schur_eval needs |z| < 1; boundary values use radial limits")
    out = _backward(f, z, _tail_interior(f, z))
    return out if out.ndim else complex(out)


def schur_boundary(f: SchurFunction, theta):
    """Boundary values ``f(e^{i theta})`` of the closed-form tail, continued from inside.

    On the support arc the inner root has modulus < 1; in the gap both
    roots are unimodular and the one nearest the interior value is kept.
    """
    theta = np.asarray(theta, dtype=float)
    z = np.exp(1j * theta)
    if f.tail == "zero":
        tail = np.zeros_like(z)
    else:
        r1, r2 = _tail_roots(f.tail_value, z)
        inner = _tail_interior(f, (1.0 - 1e-7) * z)
        tail = np.where(np.abs(r1 - inner) <= np.abs(r2 - inner), r1, r2)
        # strictly inside the support the inner root is the one of smaller modulus
        on_arc = np.abs(np.sin(theta / 2.0)) > abs(f.tail_value) + 1e-9
        tail = np.where(on_arc, np.where(np.abs(r1) <= np.abs(r2), r1, r2), tail)
    out = _backward(f, z, tail)
    return out if out.ndim else complex(out)


def caratheodory_eval(f: SchurFunction, z):
    """``F(z) = (1 + z f(z)) / (1 - z f(z))`` inside the disk."""
    z = np.asarray(z, dtype=complex)
    u = z * schur_eval(f, z)
    return (1.0 + u) / (1.0 - u)


def _richardson(h: np.ndarray, v: np.ndarray, order: int) -> complex:
    """Polynomial extrapolation of ``v(h)`` to ``h = 0`` from the last ``order`` samples."""
    h = h[-order:]
    v = np.asarray(v[-order:], dtype=complex)
    tab = list(v)
    for lvl in range(1, order):
        tab = [
            (h[i] * tab[i + 1] - h[i + lvl] * tab[i]) / (h[i] - h[i + lvl])
            for i in range(len(tab) - 1)
        ]
    return complex(tab[0])


def _radial_limit(f: SchurFunction, theta: float, kernel, cfg: AtomConfig) -> complex:
    j0, j1 = cfg.radial_levels
    h = 2.0 ** -np.arange(j0, j1 + 1, dtype=float)
    z = (1.0 - h) * np.exp(1j * theta)
    vals = kernel(h, caratheodory_eval(f, z))
    if not np.all(np.isfinite(vals)):
        raise DetectionError(f"radial sequence not finite at theta={theta:.6g}")
    est = _richardson(h, vals, cfg.richardson_order)
    alt = _richardson(h[:-1], vals[:-1], cfg.richardson_order)
    scale = max(1.0, abs(est))
    if abs(est - alt) > 1e-5 * scale:
        raise DetectionError(
            f"radial limit unstable at theta={theta:.6g}: {est} vs {alt}"
        )
    return est


def caratheodory_density(
    f: SchurFunction,
    theta,
    *,
    method: Literal["boundary", "radial"] = "boundary",
    cfg: AtomConfig | None = None,
):
    """Density of the measure w.r.t. ``dtheta / 2pi``.

    ``boundary`` evaluates the closed-form boundary value of ``f`` and
    returns ``(1 - |u|^2) / |1 - u|^2`` with ``u = e^{i theta} f``; this is
    the exact radial limit of ``Re F``.  ``radial`` extrapolates
    ``Re F(r e^{i theta})`` along ``r_j = 1 - 2^{-j}``.
    """
    cfg = cfg or DEFAULT.atoms
    if method == "radial":
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        vals = [
            _radial_limit(f, float(t), lambda h, F: F.real, cfg).real for t in th
        ]
        out = np.maximum(np.array(vals), 0.0)
        return out if np.ndim(theta) else float(out[0])
    theta_arr = np.asarray(theta, dtype=float)
    u = np.exp(1j * theta_arr) * schur_boundary(f, theta_arr)
    num = 1.0 - np.abs(u) ** 2
    den = np.abs(1.0 - u) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = np.where(num > 1e-13, num / den, 0.0)
    if f.tail == "geronimus":
        lo, hi = f.arc
        inside = (wrap_angle(theta_arr) > lo) & (wrap_angle(theta_arr) < hi)
        dens = np.where(inside, dens, 0.0)
    dens = np.maximum(dens, 0.0)
    return dens if dens.ndim else float(dens)


def atom_mass(f: SchurFunction, theta: float, cfg: AtomConfig | None = None) -> float:
    """``lim_{r -> 1} (1 - r)/2 F(r e^{i theta})`` via Richardson extrapolation."""
    cfg = cfg or DEFAULT.atoms
    est = _radial_limit(f, float(theta), lambda h, F: 0.5 * h * F, cfg)
    return max(0.0, float(est.real))


def _gap_phase(f: SchurFunction, theta: float) -> float:
    return float(np.angle(np.exp(1j * theta) * schur_boundary(f, theta)))


def detect_atoms(
    f: SchurFunction, cfg: AtomConfig | None = None
) -> tuple[tuple[float, float], ...]:
    """Atoms of the measure of ``f`` (only possible in the gap of a Geronimus tail).

    Candidates are eigenvalues of truncated CMV matrices outside the arc by
    more than ``2 pi / N``; they must persist under two different unimodular
    closing coefficients (spurious paraorthogonal zeros move).  Locations
    are refined on the boundary equation ``e^{i theta} f(e^{i theta}) = 1``,
    which is also scanned directly so that atoms closer to an edge than the
    CMV resolution are not lost.  Masses come from radial limits.
    """
    cfg = cfg or DEFAULT.atoms
    if f.tail == "zero":
        return ()
    n = cfg.truncation
    lo, hi = f.arc
    head = np.asarray(f.head_alphas)
    body = np.concatenate([head, np.full(max(0, n - 1 - head.size), f.tail_value)])[: n - 1]
    margin = TWO_PI / n

    def outside(beta: complex) -> np.ndarray:
        vals = np.concatenate([body, [beta]])
        ev = np.linalg.eigvals(cmv_assemble(vals).matrix)
        th = wrap_angle(np.angle(ev))
        return th[(th < lo - margin) | (th > hi + margin)]

    first, second = outside(1.0), outside(-1.0)
    locations = list(_gap_roots(f, cfg.gap_grid))
    for cand in first:
        if second.size == 0:
            break
        dist = np.abs(np.angle(np.exp(1j * (second - cand))))
        if dist.min() > 2.0 * margin:
            continue
        locations.append(_refine_atom(f, float(cand), lo, hi, 4.0 * margin))
    found: list[tuple[float, float]] = []
    for loc in locations:
        if any(abs(np.angle(np.exp(1j * (loc - t)))) < 1e-9 for t, _ in found):
            continue
        mass = atom_mass(f, loc, cfg)
        if mass > cfg.min_mass:
            found.append((loc, mass))
    return tuple(sorted(found))


def _gap_roots(f: SchurFunction, points: int) -> list[float]:
    """Solutions of ``e^{i theta} f(e^{i theta}) = 1`` in the gap.

    The gap is sampled on a grid clustered at both edges; sign changes of
    the phase that are not branch jumps are polished with ``brentq``.
    """
    lo, hi = f.arc
    width = lo + TWO_PI - hi
    x = np.linspace(0.0, 1.0, points + 2)[1:-1]
    grid = hi + 0.5 * width * (1.0 - np.cos(np.pi * x))
    phase = np.angle(np.exp(1j * grid) * schur_boundary(f, grid))
    roots = []
    for i in np.flatnonzero(np.sign(phase[:-1]) * np.sign(phase[1:]) <= 0):
        if abs(phase[i] - phase[i + 1]) >= np.pi:
            continue
        a, b = grid[i], grid[i + 1]
        if phase[i] == 0.0:
            roots.append(float(wrap_angle(a)))
            continue
        root = optimize.brentq(lambda t: _gap_phase(f, t), a, b, xtol=1e-14, rtol=1e-15)
        roots.append(float(wrap_angle(root)))
    return roots


def _refine_atom(f: SchurFunction, cand: float, lo: float, hi: float, width: float) -> float:
    # work in a chart centred on the gap so the bracket never straddles 0
    def phase(x: float) -> float:
        return _gap_phase(f, x)

    a = cand - width
    b = cand + width
    # keep the bracket inside the gap (lo is the upper end of the gap's first half)
    gap_lo, gap_hi = hi - TWO_PI, lo
    if cand > np.pi:
        a, b = max(a, hi), min(b, TWO_PI + lo)
    else:
        a, b = max(a, gap_lo), min(b, gap_hi)
    try:
        fa, fb = phase(a), phase(b)
        if fa * fb < 0 and abs(fa - fb) < np.pi:
            return float(wrap_angle(optimize.brentq(phase, a, b, xtol=1e-14, rtol=1e-15)))
    except (ValueError, DetectionError):
        pass
    res = optimize.minimize_scalar(
        lambda x: abs(phase(x)), bounds=(a, b), method="bounded", options={"xatol": 1e-13}
    )
    return float(wrap_angle(res.x))


def measure_from_coefficients(
    seq: CoefficientSequence, *, cfg: AtomConfig | None = None, find_atoms: bool = True
) -> CircleMeasure:
    """Reconstruct the measure with the given coefficients (plain or deformed)."""
    f = SchurFunction.from_coefficients(seq)
    lo, hi = f.arc
    atoms = detect_atoms(f, cfg) if find_atoms else ()
    return CircleMeasure(
        lo,
        hi,
        lambda t, _f=f: float(caratheodory_density(_f, t)),
        atoms,
        total_mass=1.0,
        sqrt_edges=f.tail == "geronimus",
        name="schur",
    )


# --------------------------------------------------------------------------
# moments


def moments_of_measure(mu: CircleMeasure, k: int) -> complex:
    """``int z^k dmu`` (density part by quadrature, atoms summed)."""
    if k < 0:
        raise DomainError("k must be nonnegative")
    if k == 0:
        return complex(mu.total_mass)
    re = mu.integrate(lambda t: np.cos(k * t))
    im = mu.integrate(lambda t: np.sin(k * t))
    atom_part = sum(w * np.exp(1j * k * t) for t, w in mu.atoms)
    return complex(re + 1j * im + atom_part)
