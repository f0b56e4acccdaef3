"""Matrix orthogonal polynomials on the unit circle.

Matrix Szego recursion, Schur-type Moebius maps, deformed matrix
coefficients, Neretin contractions, block GGT matrices, the matrix rate
``H_{d,p}``, matrix measures and the matrix sum rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np
from scipy.special import gammaln

from .config import DEFAULT, SamplerConfig
from .ensembles import hp
from .errors import DomainError, InvalidMeasureError, SingularInputError
from .measures import TWO_PI, CircleMeasure, CoefficientSequence, Tail
from .opuc import BandedUnitary, measure_from_coefficients
from .quadrature import integrate_arc
from .rates import H_d, RateReport, kl_divergence, spectral_rate
from .sampling import SampleDiagnostics, _gen, _integrated_time

__all__ = [
    "MatrixCoefficientSequence",
    "MatrixMeasure",
    "defects",
    "matrix_szego_step",
    "matrix_orthogonal_polynomials",
    "matrix_reversed",
    "mobius_T",
    "deformed_matrix_gammas",
    "alphas_from_matrix_gammas",
    "neretin_contraction",
    "neretin_coeffs",
    "ggt_assemble",
    "ggt_trace",
    "matrix_spectral_measure",
    "matrix_schur_eval",
    "matrix_bs_density",
    "H_dp",
    "matrix_kl",
    "verify_matrix_szego",
    "verify_matrix_hp",
    "sample_matrix_coeffs",
    "sample_matrix_coefficient",
    "log_normalizer",
]

BALL_TOL = 1e-12


def _dag(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def _sigma_max(m: np.ndarray) -> np.ndarray:
    return np.linalg.norm(m, ord=2, axis=(-2, -1))


def _psd_sqrt(h: np.ndarray) -> np.ndarray:
    """Square root of a Hermitian PSD matrix (eigenvalues clamped at 0)."""
    w, v = np.linalg.eigh(0.5 * (h + _dag(h)))
    w = np.where(w < 0.0, 0.0, w)
    return (v * np.sqrt(w)[..., None, :]) @ _dag(v)


def defects(alpha: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(rho^R, rho^L) = ((1 - a a^+)^{1/2}, (1 - a^+ a)^{1/2})``."""
    a = np.asarray(alpha, dtype=complex)
    eye = np.eye(a.shape[-1])
    return _psd_sqrt(eye - a @ _dag(a)), _psd_sqrt(eye - _dag(a) @ a)


# --------------------------------------------------------------------------
# sequences


@dataclass(frozen=True)
class MatrixCoefficientSequence:
    """Head of ``p x p`` plain or deformed coefficients plus a tail.

    ``tail_type`` is ``zero``, ``constant`` (the matrix ``tail_value``
    repeated) or ``none``.
    """

    kind: Literal["plain", "deformed"]
    head: np.ndarray
    tail_type: Literal["zero", "constant", "none"] = "zero"
    tail_value: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("plain", "deformed"):
            raise DomainError(f"unknown coefficient kind {self.kind!r}")
        head = np.array(self.head, dtype=complex)
        if head.ndim == 2:
            head = head[None]
        if head.ndim != 3 or head.shape[1] != head.shape[2]:
            raise DomainError("head must have shape (n, p, p)")
        head.setflags(write=False)
        object.__setattr__(self, "head", head)
        s = _sigma_max(head) if head.size else np.zeros(0)
        if np.any(s > 1.0 + BALL_TOL):
            raise DomainError("coefficients must lie in the closed matrix ball")
        if s.size > 1 and np.any(s[:-1] >= 1.0 - BALL_TOL):
            raise DomainError("only the final head block may touch the ball boundary")
        p = head.shape[1]
        if self.tail_type not in ("zero", "constant", "none"):
            raise DomainError(f"unknown tail type {self.tail_type!r}")
        if self.tail_type == "constant":
            val = np.asarray(self.tail_value, dtype=complex)
            val = val * np.eye(p) if val.ndim == 0 else val.reshape(p, p)
            if _sigma_max(val) >= 1.0:
                raise DomainError("constant tail must lie in the open ball")
        else:
            val = np.zeros((p, p), dtype=complex)
        val.setflags(write=False)
        object.__setattr__(self, "tail_value", val)

    @property
    def p(self) -> int:
        return self.head.shape[1]

    def __len__(self) -> int:
        return self.head.shape[0]

    @property
    def is_trivial(self) -> bool:
        """Final head block unitary (finitely supported matrix measure)."""
        if len(self) == 0:
            return False
        last = self.head[-1]
        return bool(np.linalg.norm(_dag(last) @ last - np.eye(self.p)) < 1e-10)

    def values(self, n: int) -> np.ndarray:
        if n <= len(self):
            return np.array(self.head[:n])
        if self.tail_type == "none":
            raise DomainError("tail 'none' cannot be extended")
        ext = np.broadcast_to(self.tail_value, (n - len(self), self.p, self.p))
        return np.concatenate([self.head, ext])

    def is_block_diagonal(self, tol: float = 1e-14) -> bool:
        mats = np.concatenate([self.head, self.tail_value[None]])
        off = mats - np.einsum("kii->ki", mats)[..., None] * np.eye(self.p)
        return bool(np.all(np.abs(off) <= tol))

    def diagonal_sequences(self) -> list[CoefficientSequence]:
        """Scalar sequences along the diagonal of a block-diagonal sequence."""
        if not self.is_block_diagonal():
            raise DomainError("sequence is not block diagonal")
        out = []
        for i in range(self.p):
            tail = {
                "zero": Tail(),
                "none": Tail("none"),
                "constant": Tail.constant(complex(self.tail_value[i, i])),
            }[self.tail_type]
            if self.tail_type == "constant" and tail.value == 0:
                tail = Tail()
            out.append(CoefficientSequence(self.kind, self.head[:, i, i], tail))
        return out

    @classmethod
    def block_diagonal(cls, seqs: Sequence[CoefficientSequence]) -> "MatrixCoefficientSequence":
        """Diagonal matrices built entrywise from scalar sequences of one kind.

        Shorter heads are extended by their own tails; sequences with tail
        ``none`` must all have the same length.
        """
        kinds = {s.kind for s in seqs}
        lengths = {len(s) for s in seqs}
        tails = {s.tail.type for s in seqs}
        if len(kinds) != 1:
            raise DomainError("scalar sequences must share kind")
        if "none" in tails and (len(tails) != 1 or len(lengths) != 1):
            raise DomainError("tail 'none' sequences must share length and tail type")
        n, p = max(lengths), len(seqs)
        head = np.zeros((n, p, p), dtype=complex)
        for i, s in enumerate(seqs):
            head[:, i, i] = s.values(n)
        ttype = "none" if "none" in tails else ("constant" if "constant" in tails else "zero")
        tval = np.diag([s.tail.value for s in seqs]) if ttype == "constant" else None
        return cls(kinds.pop(), head, ttype, tval)

    def to_dict(self) -> dict:
        def enc(m):
            return [[[z.real, z.imag] for z in row] for row in m]

        return {
            "kind": self.kind,
            "p": self.p,
            "head": [enc(m) for m in self.head],
            "tail": {"type": self.tail_type, "value": enc(self.tail_value)},
        }


# --------------------------------------------------------------------------
# Szego recursion


def matrix_reversed(poly: np.ndarray) -> np.ndarray:
    """``P^*(z) = z^k P(1/conj z)^+`` on coefficient arrays of shape ``(k+1, p, p)``."""
    return _dag(poly[::-1])


def _shift(poly: np.ndarray) -> np.ndarray:
    p = poly.shape[-1]
    return np.concatenate([np.zeros((1, p, p), dtype=complex), poly])


def _pad(poly: np.ndarray, size: int) -> np.ndarray:
    p = poly.shape[-1]
    return np.concatenate([poly, np.zeros((size - poly.shape[0], p, p), dtype=complex)])


def matrix_szego_step(phi_l: np.ndarray, phi_r: np.ndarray, alpha: np.ndarray):
    """One step of the left/right matrix Szego recursion.

    ``rho^L phi^L_{k+1} = z phi^L_k - alpha^+ (phi^R_k)^*`` and
    ``phi^R_{k+1} rho^R = z phi^R_k - (phi^L_k)^* alpha^+``; polynomials are
    coefficient arrays ``(degree + 1, p, p)`` in increasing powers.
    """
    alpha = np.asarray(alpha, dtype=complex)
    if _sigma_max(alpha) >= 1.0 - BALL_TOL:
        raise SingularInputError("defect matrix is singular (alpha on the ball boundary)")
    rho_r, rho_l = defects(alpha)
    size = phi_l.shape[0] + 1
    ad = _dag(alpha)
    left = _shift(phi_l) - ad @ _pad(matrix_reversed(phi_r), size)
    right = _shift(phi_r) - _pad(matrix_reversed(phi_l), size) @ ad
    return np.linalg.solve(rho_l, left), np.linalg.solve(rho_r.T, np.swapaxes(right, -1, -2)).swapaxes(-1, -2)


def matrix_orthogonal_polynomials(alphas: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Left and right orthonormal polynomials ``phi_0 .. phi_n`` for coefficients ``alpha_0 .. alpha_{n-1}``."""
    alphas = np.asarray(alphas, dtype=complex)
    p = alphas.shape[-1]
    left = [np.eye(p, dtype=complex)[None]]
    right = [np.eye(p, dtype=complex)[None]]
    for a in alphas:
        nl, nr = matrix_szego_step(left[-1], right[-1], a)
        left.append(nl)
        right.append(nr)
    return left, right


def polyval_matrix(poly: np.ndarray, z) -> np.ndarray:
    """Evaluate a matrix polynomial at the points ``z`` (shape ``z.shape + (p, p)``)."""
    z = np.asarray(z, dtype=complex)
    powers = z[..., None] ** np.arange(poly.shape[0])
    return np.einsum("...j,jab->...ab", powers, poly)


# --------------------------------------------------------------------------
# Moebius maps and deformed coefficients


def mobius_T(alpha: np.ndarray, zeta: np.ndarray) -> np.ndarray:
    """``T_alpha(zeta) = (rho^R)^{-1} (zeta - alpha) (1 - alpha^+ zeta)^{-1} rho^L``."""
    alpha = np.asarray(alpha, dtype=complex)
    zeta = np.asarray(zeta, dtype=complex)
    eye = np.eye(alpha.shape[-1])
    if np.any(_sigma_max(alpha) >= 1.0 - BALL_TOL):
        raise SingularInputError("T_alpha needs alpha strictly inside the ball")
    rho_r, rho_l = defects(alpha)
    den = eye - _dag(alpha) @ zeta
    if np.any(np.abs(np.linalg.det(den)) < 1e-300) or np.any(np.linalg.cond(den) > 1e14):
        raise SingularInputError("1 - alpha^+ zeta is singular")
    mid = (zeta - alpha) @ np.linalg.inv(den)
    return np.linalg.solve(rho_r, mid @ rho_l)


def deformed_matrix_gammas(
    alphas: MatrixCoefficientSequence, *, return_b: bool = False, unitary_tol: float = 1e-10
):
    """``gamma_k = b_k^{-1} alpha_k^+`` with ``b_0 = 1`` and ``b_{j+1} = T_{alpha_j^+}(b_j)``.

    A constant plain tail is carried only when it is a fixed point of the
    recursion; otherwise the tail becomes ``none``.  ``return_b`` also
    returns the unitaries ``b_0 .. b_n`` and the largest unitarity defect.
    """
    if alphas.kind != "plain":
        raise DomainError("deformed_matrix_gammas needs plain coefficients")
    p = alphas.p
    b = np.eye(p, dtype=complex)
    bs = [b]
    gam = np.empty_like(np.asarray(alphas.head))
    worst = 0.0
    for k, a in enumerate(alphas.head):
        gam[k] = np.linalg.solve(b, _dag(a))
        if k + 1 < len(alphas) or not alphas.is_trivial:
            b = mobius_T(_dag(a), b)
            worst = max(worst, float(np.linalg.norm(_dag(b) @ b - np.eye(p))))
            bs.append(b)
    if worst > unitary_tol:
        raise InvalidMeasureError(f"b_j lost unitarity (defect {worst:.2e})")
    tail_type, tail_val = alphas.tail_type, None
    if tail_type == "constant":
        c = alphas.tail_value
        g = np.linalg.solve(b, _dag(c))
        if np.linalg.norm(mobius_T(_dag(c), b) - b) < 1e-12:
            tail_val = g
        else:
            tail_type = "none"
    out = MatrixCoefficientSequence("deformed", gam, tail_type, tail_val)
    return (out, bs, worst) if return_b else out


def alphas_from_matrix_gammas(gammas: MatrixCoefficientSequence) -> MatrixCoefficientSequence:
    """Inverse of :func:`deformed_matrix_gammas`: ``alpha_k = (b_k gamma_k)^+``."""
    if gammas.kind != "deformed":
        raise DomainError("alphas_from_matrix_gammas needs deformed coefficients")
    p = gammas.p
    b = np.eye(p, dtype=complex)
    out = np.empty_like(np.asarray(gammas.head))
    for k, g in enumerate(gammas.head):
        out[k] = _dag(b @ g)
        if k + 1 < len(gammas) or not gammas.is_trivial:
            b = mobius_T(_dag(out[k]), b)
    tail_type, tail_val = gammas.tail_type, None
    if tail_type == "constant":
        c = _dag(b @ gammas.tail_value)
        if np.linalg.norm(mobius_T(_dag(c), b) - b) < 1e-12:
            tail_val = c
        else:
            tail_type = "none"
    return MatrixCoefficientSequence("plain", out, tail_type, tail_val)


# --------------------------------------------------------------------------
# Neretin contractions and GGT


def neretin_contraction(u: np.ndarray, m: int) -> np.ndarray:
    """``Xi^m(U) = D + C (I - A)^{-1} B`` for the ``m x m`` upper-left block ``A``."""
    u = np.asarray(u, dtype=complex)
    n = u.shape[0]
    if not 0 < m < n:
        raise DomainError("need 0 < m < N")
    a, b, c, d = u[:m, :m], u[:m, m:], u[m:, :m], u[m:, m:]
    lhs = np.eye(m) - a
    if np.linalg.cond(lhs) > 1e13:
        raise SingularInputError("I - A is singular")
    return d + c @ np.linalg.solve(lhs, b)


def neretin_coeffs(u: np.ndarray, p: int) -> list[np.ndarray]:
    """``c_0 = [U]_p`` and ``c_r = [Xi^{rp}(U)]_p`` for ``r = 1 .. n-1``."""
    u = np.asarray(u, dtype=complex)
    big = u.shape[0]
    if big % p:
        raise DomainError("matrix size must be a multiple of p")
    out = [u[:p, :p].copy()]
    cur = u
    for _ in range(1, big // p):
        cur = neretin_contraction(cur, p)
        out.append(cur[:p, :p].copy())
    return out


def ggt_assemble(alphas: MatrixCoefficientSequence | np.ndarray, n: int | None = None) -> BandedUnitary:
    """Block GGT matrix of ``alpha_0 .. alpha_{n-1}`` (the last block unitary).

    Blocks: ``(0, j) = rho_0^L .. rho_{j-1}^L alpha_j^+``,
    ``(i, j) = -alpha_{i-1} rho_i^L .. rho_{j-1}^L alpha_j^+`` for ``1 <= i <= j``,
    ``(j+1, j) = rho_j^R``, zero below.
    """
    if isinstance(alphas, MatrixCoefficientSequence):
        if alphas.kind != "plain":
            raise DomainError("ggt_assemble needs plain coefficients")
        a = alphas.values(n if n is not None else len(alphas))
    else:
        a = np.asarray(alphas, dtype=complex)
        if n is not None:
            a = a[:n]
    nb, p = a.shape[0], a.shape[1]
    last = a[-1]
    if np.linalg.norm(_dag(last) @ last - np.eye(p)) > 1e-10:
        raise DomainError("final GGT block must be unitary")
    if nb > 1 and np.any(_sigma_max(a[:-1]) >= 1.0 - BALL_TOL):
        raise DomainError("interior GGT blocks must lie strictly inside the ball")
    rr, rl = zip(*(defects(x) for x in a)) if nb else ((), ())
    g = np.zeros((nb * p, nb * p), dtype=complex)

    def blk(i, j):
        return g[i * p : (i + 1) * p, j * p : (j + 1) * p]

    for j in range(nb):
        aj = _dag(a[j])
        prod = np.eye(p, dtype=complex)  # rho_i^L .. rho_{j-1}^L, built from the right
        for i in range(j, -1, -1):
            if i == 0:
                blk(0, j)[:] = prod @ aj
            else:
                blk(i, j)[:] = -a[i - 1] @ prod @ aj
                prod = rl[i - 1] @ prod
        if j + 1 < nb:
            blk(j + 1, j)[:] = rr[j]
    return BandedUnitary(g, kind="ggt", block=p, lower=p, upper=-1)


def ggt_trace(alphas: np.ndarray) -> complex:
    """``tr(alpha_0^+) - sum_k tr(alpha_{k-1} alpha_k^+)``."""
    a = np.asarray(alphas, dtype=complex)
    if a.shape[0] == 0:
        return 0j
    val = np.trace(_dag(a[0]))
    for k in range(1, a.shape[0]):
        val -= np.trace(a[k - 1] @ _dag(a[k]))
    return complex(val)


# --------------------------------------------------------------------------
# matrix measures


@dataclass(frozen=True)
class MatrixMeasure:
    """``p x p`` matrix measure: PSD density on an arc (w.r.t. ``dtheta / 2pi``) plus PSD atoms."""

    p: int
    arc_lo: float = 0.0
    arc_hi: float = TWO_PI
    density: Callable[[float], np.ndarray] | None = None
    atoms: tuple[tuple[float, np.ndarray], ...] = ()
    sqrt_edges: bool = False
    blocks: tuple[CircleMeasure, ...] | None = None
    name: str = ""

    def __post_init__(self):
        atoms = []
        for t, w in self.atoms:
            w = np.asarray(w, dtype=complex).reshape(self.p, self.p)
            if np.linalg.norm(w - _dag(w)) > 1e-10:
                raise InvalidMeasureError("atom weights must be Hermitian")
            if np.min(np.linalg.eigvalsh(0.5 * (w + _dag(w)))) < -1e-10:
                raise InvalidMeasureError("atom weights must be PSD")
            atoms.append((float(np.mod(t, TWO_PI)), w))
        object.__setattr__(self, "atoms", tuple(atoms))

    @classmethod
    def block_diagonal(cls, measures: Sequence[CircleMeasure]) -> "MatrixMeasure":
        """``diag(mu_1, .., mu_p)``: arcs are merged to the smallest common arc."""
        measures = tuple(measures)
        lo = min(m.arc_lo for m in measures)
        hi = max(m.arc_hi for m in measures)
        p = len(measures)
        atoms: dict[float, np.ndarray] = {}
        for i, m in enumerate(measures):
            for t, w in m.atoms:
                atoms.setdefault(t, np.zeros((p, p), dtype=complex))[i, i] += w

        def density(t, _ms=measures):
            return np.diag([float(m.density_at(t)) for m in _ms]).astype(complex)

        has_density = any(m.density is not None for m in measures)
        return cls(
            p, lo, hi, density if has_density else None, tuple(atoms.items()),
            sqrt_edges=all(m.sqrt_edges for m in measures), blocks=measures, name="block_diagonal",
        )

    @classmethod
    def quasi_scalar(cls, mu: CircleMeasure, p: int) -> "MatrixMeasure":
        """``1 . mu``."""
        return cls.block_diagonal([mu] * p)

    def density_at(self, theta: float) -> np.ndarray:
        if self.density is None:
            return np.zeros((self.p, self.p), dtype=complex)
        return np.asarray(self.density(float(theta)), dtype=complex)

    def total(self, *, tol: float = 1e-11) -> np.ndarray:
        """``Sigma(T)``."""
        out = sum((w for _, w in self.atoms), np.zeros((self.p, self.p), dtype=complex))
        if self.density is not None:
            for i in range(self.p):
                for j in range(i, self.p):
                    re = integrate_arc(lambda t: self.density_at(t)[i, j].real, self.arc_lo, self.arc_hi,
                                       sqrt_edges=self.sqrt_edges, tol=tol) / TWO_PI
                    im = 0.0
                    if i != j:
                        im = integrate_arc(lambda t: self.density_at(t)[i, j].imag, self.arc_lo, self.arc_hi,
                                           sqrt_edges=self.sqrt_edges, tol=tol) / TWO_PI
                    out[i, j] += re + 1j * im
                    if i != j:
                        out[j, i] += re - 1j * im
        return out

    def moment(self, k: int, *, tol: float = 1e-11) -> np.ndarray:
        """``int z^k dSigma``."""
        out = sum((np.exp(1j * k * t) * w for t, w in self.atoms), np.zeros((self.p, self.p), dtype=complex))
        if self.density is not None:
            for i in range(self.p):
                for j in range(self.p):
                    def part(t, f):
                        return f(np.exp(1j * k * t) * self.density_at(t)[i, j])

                    re = integrate_arc(lambda t: part(t, np.real), self.arc_lo, self.arc_hi,
                                       sqrt_edges=self.sqrt_edges, tol=tol)
                    im = integrate_arc(lambda t: part(t, np.imag), self.arc_lo, self.arc_hi,
                                       sqrt_edges=self.sqrt_edges, tol=tol)
                    out[i, j] += (re + 1j * im) / TWO_PI
        return out


def matrix_spectral_measure(u: BandedUnitary | np.ndarray, p: int) -> MatrixMeasure:
    """``Sigma = sum_k W_k delta_{lambda_k}`` with ``W_k`` built from the first ``p`` eigenvector coordinates."""
    mat = u.matrix if isinstance(u, BandedUnitary) else np.asarray(u, dtype=complex)
    from scipy.linalg import schur

    t, z = schur(mat, output="complex")
    ev = np.diag(t)
    head = z[:p, :]
    atoms = []
    for k in range(ev.size):
        v = head[:, k : k + 1]
        atoms.append((float(np.mod(np.angle(ev[k]), TWO_PI)), v @ _dag(v)))
    return MatrixMeasure(p, atoms=tuple(atoms), name="finite")


# --------------------------------------------------------------------------
# Schur functions of the matrix Bernstein-Szego class


def matrix_schur_eval(alphas: np.ndarray, z) -> np.ndarray:
    """``f_0(z)`` for coefficients ``alpha_0 .. alpha_{n-1}`` followed by zeros.

    Backward recursion ``f_j = T_{-alpha_j}(z f_{j+1})`` from ``f_n = 0``;
    valid on the closed disk since every block lies strictly inside the ball.
    """
    a = np.asarray(alphas, dtype=complex)
    z = np.asarray(z, dtype=complex)
    p = a.shape[-1]
    f = np.zeros(z.shape + (p, p), dtype=complex)
    zz = z[..., None, None]
    for k in range(a.shape[0] - 1, -1, -1):
        f = mobius_T(-a[k], zz * f)
    return f


def matrix_bs_density(alphas: np.ndarray, theta) -> np.ndarray:
    """Density ``Re F(e^{i theta})`` of the matrix Bernstein-Szego measure (w.r.t. ``dtheta / 2pi``).

    With ``u = e^{i theta} f_0`` and ``F = (1 - u)^{-1} (1 + u)``,
    ``Re F = (1 - u)^{-1} (1 - u u^+) (1 - u)^{-+}``.
    """
    theta = np.asarray(theta, dtype=float)
    z = np.exp(1j * theta)
    u = z[..., None, None] * matrix_schur_eval(alphas, z)
    p = u.shape[-1]
    eye = np.eye(p)
    inv = np.linalg.inv(eye - u)
    return inv @ (eye - u @ _dag(u)) @ _dag(inv)


# --------------------------------------------------------------------------
# rates


def H_dp(gamma: np.ndarray, d: float) -> float:
    """``-log det(1 - g g^+) - d log det((1 - g)(1 - g)^+) + p H_d(0)``."""
    g = np.asarray(gamma, dtype=complex)
    if d < 0:
        raise DomainError("Hua-Pickrell needs d >= 0")
    p = g.shape[-1]
    s = _sigma_max(g)
    if s > 1.0 + BALL_TOL:
        raise DomainError("gamma outside the matrix ball")
    if s >= 1.0 - 1e-15:
        return math.inf
    eye = np.eye(p)
    _, ld1 = np.linalg.slogdet(eye - g @ _dag(g))
    det2 = abs(np.linalg.det(eye - g)) ** 2
    if det2 == 0.0:
        return math.inf
    return float(-ld1 - d * np.log(det2) + p * H_d(0.0, d))


def matrix_kl(ref: CircleMeasure, sigma: MatrixMeasure, *, tol: float = 1e-10) -> float:
    """``-int log det h d ref`` where ``h = d Sigma_ac / d ref``.

    Block-diagonal measures are split into scalar divergences (the
    determinant factorises); otherwise the log-determinant of the density
    is integrated directly.
    """
    if ref.density is None:
        raise InvalidMeasureError("reference measure needs a density")
    if sigma.blocks is not None:
        return float(sum(kl_divergence(ref, m, tol=tol) for m in sigma.blocks))
    if sigma.density is None:
        return math.inf
    p = sigma.p
    flagged = []

    def integrand(t):
        r = ref.density(t)
        if r <= 0.0:
            return 0.0
        sign, logdet = np.linalg.slogdet(sigma.density_at(t))
        if sign.real <= 0 or not np.isfinite(logdet):
            if r > 1e-8:
                flagged.append(t)
            return 0.0
        return r * (p * np.log(r) - logdet)

    val = integrate_arc(integrand, ref.arc_lo, ref.arc_hi, sqrt_edges=ref.sqrt_edges, tol=tol)
    return math.inf if flagged else float(val / TWO_PI)


def _uniform() -> CircleMeasure:
    return CircleMeasure(0.0, TWO_PI, lambda t: 1.0, name="uniform")


def _bs_measure(alphas: np.ndarray) -> MatrixMeasure:
    a = np.array(alphas, dtype=complex)
    return MatrixMeasure(a.shape[-1], 0.0, TWO_PI, lambda t, _a=a: matrix_bs_density(_a, t), name="bernstein_szego")


def _matrix_measure_of(seq: MatrixCoefficientSequence, *, find_atoms: bool) -> MatrixMeasure:
    """Matrix measure of a sequence: block-diagonal via scalar reconstruction, zero tail via Schur."""
    if seq.is_block_diagonal():
        blocks = [measure_from_coefficients(s, find_atoms=find_atoms) for s in seq.diagonal_sequences()]
        return MatrixMeasure.block_diagonal(blocks)
    if seq.kind == "plain" and seq.tail_type == "zero":
        return _bs_measure(seq.head)
    if seq.kind == "deformed" and seq.tail_type == "zero" and np.allclose(seq.head, 0):
        return _bs_measure(seq.head)
    raise DomainError(
        "matrix measures are reconstructed for block-diagonal sequences and plain zero tails only"
    )


# --------------------------------------------------------------------------
# sum rules


def verify_matrix_szego(
    spec: MatrixCoefficientSequence | MatrixMeasure, p: int | None = None, *, tol: float = 1e-6,
    count: int = 60,
) -> RateReport:
    """``K(1 . UNIF | Sigma) = sum_k -log det(1 - alpha_k alpha_k^+)``."""
    report = RateReport(rule="matrix_szego")
    if isinstance(spec, MatrixMeasure):
        if spec.blocks is None:
            raise DomainError("density specs must be block diagonal")
        from .opuc import verblunsky_from_measure

        seq = MatrixCoefficientSequence.block_diagonal(
            [verblunsky_from_measure(m, count) for m in spec.blocks]
        )
        sigma = spec
        report.diagnostics["measure_source"] = "from_density_spec"
    else:
        seq = spec if spec.kind == "plain" else alphas_from_matrix_gammas(spec)
        sigma = None
        report.diagnostics["measure_source"] = "from_coefficients"
    if p is not None and seq.p != p:
        raise DomainError(f"coefficients have p={seq.p}, expected {p}")
    report.diagnostics["p"] = seq.p
    eye = np.eye(seq.p)
    if seq.is_trivial:
        report.lhs_total = report.kl_term = math.inf
        report.rhs_partial_sums = [math.inf]
        return report.finalize(tol)
    terms = [float(-np.linalg.slogdet(eye - a @ _dag(a))[1]) for a in seq.head]
    report.rhs_terms = terms
    report.rhs_partial_sums = [float(v) for v in np.cumsum(terms)] if terms else [0.0]
    if seq.tail_type == "constant" and np.linalg.norm(seq.tail_value) > 0:
        report.rhs_partial_sums.append(math.inf)
        report.rhs_tail_bound = math.inf
    if sigma is None:
        sigma = _matrix_measure_of(seq, find_atoms=False)
    report.kl_term = matrix_kl(_uniform(), sigma)
    report.lhs_total = report.kl_term
    return report.finalize(tol)


def verify_matrix_hp(
    spec: MatrixCoefficientSequence | MatrixMeasure, p: int | None = None, d: float = 0.0, *,
    tol: float = 1e-4, count: int = 60,
) -> RateReport:
    """``K(1 . HP_d | Sigma) + sum F^+ + sum F^- = sum_k H_{d,p}(gamma_k)``.

    The spectral side is assembled from block-diagonal families (each
    diagonal measure reconstructed by the scalar Schur machinery), or for
    plain zero tails from the matrix Bernstein-Szego density, which is
    positive on the whole circle and hence outside the Hua-Pickrell class
    when ``d > 0``.
    """
    if d < 0:
        raise DomainError("Hua-Pickrell needs d >= 0")
    if d == 0:
        rep = verify_matrix_szego(spec, p, tol=tol, count=count)
        rep.diagnostics["reduced_from"] = "matrix_hp(d=0)"
        return rep
    report = RateReport(rule="matrix_hp")
    if isinstance(spec, MatrixMeasure):
        if spec.blocks is None:
            raise DomainError("density specs must be block diagonal")
        from .opuc import verblunsky_from_measure

        gam = deformed_matrix_gammas(
            MatrixCoefficientSequence.block_diagonal([verblunsky_from_measure(m, count) for m in spec.blocks])
        )
        sigma = spec
        report.diagnostics["measure_source"] = "from_density_spec"
    else:
        gam = spec if spec.kind == "deformed" else deformed_matrix_gammas(spec)
        sigma = None
        report.diagnostics["measure_source"] = "from_coefficients"
    if p is not None and gam.p != p:
        raise DomainError(f"coefficients have p={gam.p}, expected {p}")
    report.diagnostics.update({"p": gam.p, "d": d})
    terms = [max(0.0, H_dp(g, d)) for g in gam.head]
    report.rhs_terms = terms
    report.rhs_partial_sums = [float(v) for v in np.cumsum(terms)] if terms else [0.0]
    gd = -d / (1.0 + d)
    if gam.tail_type == "constant":
        tail_rate = H_dp(gam.tail_value, d)
        if tail_rate > 1e-15:
            report.rhs_partial_sums.append(math.inf)
            report.rhs_tail_bound = math.inf
    elif gam.tail_type == "zero" and not gam.is_trivial:
        report.rhs_partial_sums.append(math.inf)
        report.rhs_tail_bound = math.inf
    report.diagnostics["gamma_d"] = gd
    if sigma is None:
        if gam.is_block_diagonal():
            sigma = MatrixMeasure.block_diagonal(
                [measure_from_coefficients(s) for s in gam.diagonal_sequences()]
            )
        else:
            plain = alphas_from_matrix_gammas(gam)
            if plain.tail_type != "zero":
                raise DomainError(
                    "non-block-diagonal Hua-Pickrell cases need a zero plain tail"
                )
            sigma = _bs_measure(plain.head)
    ens = hp(d)
    if sigma.blocks is not None:
        parts = [spectral_rate(m, ens) for m in sigma.blocks]
        report.kl_term = float(sum(r.kl_term for r in parts))
        for r in parts:
            report.outlier_plus.extend(r.outlier_plus)
            report.outlier_minus.extend(r.outlier_minus)
        report.lhs_total = float(sum(r.lhs_total for r in parts))
        report.diagnostics["block_lhs"] = [r.lhs_total for r in parts]
    else:
        lo, hi = ens.arc
        gap_point = 0.0  # the gap of the Hua-Pickrell arc always contains angle 0
        w = sigma.density_at(gap_point)
        if sigma.arc_hi - sigma.arc_lo >= TWO_PI - 1e-12 and np.max(np.linalg.eigvalsh(w)) > 1e-12:
            report.kl_term = report.lhs_total = math.inf
            report.diagnostics["reason"] = "absolutely continuous part leaves the support arc"
        else:
            report.kl_term = matrix_kl(ens.measure(), sigma)
            report.lhs_total = report.kl_term
    return report.finalize(tol)


# --------------------------------------------------------------------------
# sampling


def log_normalizer(n: int, k: int, p: int, delta: float) -> float:
    """``log K_{n,k}^{(delta)}`` for real ``delta`` (``N = n p``)."""
    if not 0 <= k <= n - 2:
        raise DomainError("need 0 <= k <= n - 2")
    if delta < 0:
        raise DomainError("need delta >= 0")
    big = n * p
    j = np.arange(1, p + 1)
    a = big - (k + 1) * p + j
    b = big - (k + 2) * p + j
    val = 2.0 * gammaln(a + delta) - gammaln(b) - gammaln(a + 2.0 * delta)
    return float(-p * p * np.log(np.pi) + np.sum(val))


def _haar(gen: np.random.Generator, m: int, size: tuple) -> np.ndarray:
    """Haar unitaries via QR of complex Ginibre matrices with phase correction."""
    z = (gen.standard_normal(size + (m, m)) + 1j * gen.standard_normal(size + (m, m))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    ph = np.diagonal(r, axis1=-2, axis2=-1)
    ph = ph / np.abs(ph)
    return q * ph[..., None, :]


def _hp_ball_logp(delta: float, exponent: np.ndarray, circle: np.ndarray):
    """``2 delta log|det(1 - g)| + exponent log det(1 - g g^+)``; no radial factor on unitary blocks."""

    def logp(g):
        eye = np.eye(g.shape[-1])
        with np.errstate(divide="ignore", invalid="ignore"):
            sign, ld = np.linalg.slogdet(eye - g @ _dag(g))
            ld = np.where(sign.real > 0, ld, -np.inf)
            radial = np.where(circle, 0.0, np.where(exponent > 0, exponent * ld, np.where(np.isfinite(ld), 0.0, -np.inf)))
            return radial + 2.0 * delta * np.log(np.abs(np.linalg.det(eye - g)))

    return logp


def _matrix_chain(gen, state, logp, circle: np.ndarray, cfg: SamplerConfig) -> SampleDiagnostics:
    """Random-walk Metropolis over independent ``p x p`` blocks (ball or unitary)."""
    p = state.shape[-1]
    shape = state.shape[:-2]
    step = np.full(shape[-1], 0.2 / np.sqrt(p))
    lo, hi = cfg.target_acceptance
    cur_lp = logp(state)
    acc = np.zeros(shape[-1])
    tried = 0

    def sweep():
        nonlocal cur_lp, tried
        noise = (gen.standard_normal(state.shape) + 1j * gen.standard_normal(state.shape)) / np.sqrt(2.0)
        s = step[:, None, None]
        w, v = np.linalg.eigh(0.5 * (noise + _dag(noise)))
        rot = (v * np.exp(1j * step[:, None] * w)[..., None, :]) @ _dag(v)
        prop = np.where(circle[:, None, None], state @ rot, state + s * noise)
        inside = circle[None, :] | (_sigma_max(prop) < 1.0)
        lp = np.where(inside, logp(np.where(inside[..., None, None], prop, 0.0)), -np.inf)
        accept = inside & (np.log(gen.uniform(size=lp.shape)) < lp - cur_lp)
        state[:] = np.where(accept[..., None, None], prop, state)
        cur_lp = np.where(accept, lp, cur_lp)
        acc[:] += accept.reshape(-1, shape[-1]).mean(axis=0)
        tried += 1

    for i in range(cfg.burn_in):
        sweep()
        if (i + 1) % 100 == 0:
            rate = acc / tried
            step[:] = np.where(rate > hi, step * 1.25, np.where(rate < lo, step / 1.25, step))
            acc[:] = 0.0
            tried = 0
    acc[:] = 0.0
    tried = 0
    pilot = 500
    trace = np.empty((pilot,) + shape[:-1])
    for i in range(pilot):
        sweep()
        trace[i] = np.trace(state[..., 0, :, :], axis1=-2, axis2=-1).real
    tau = _integrated_time(trace.reshape(pilot, -1))
    thin = int(min(math.ceil(tau), cfg.max_thin))
    for _ in range(thin):
        sweep()
    rates = acc / max(tried, 1)
    status = "ok" if np.all((rates > 0.1) & (rates < 0.6)) and tau <= cfg.max_thin else "warning"
    return SampleDiagnostics("metropolis", float(rates.mean()), float(tau), thin, cfg.burn_in, status)


@dataclass
class MatrixDraws:
    kind: str
    coefficients: np.ndarray  # (reps, n, p, p)
    diagnostics: SampleDiagnostics

    def sequence(self, i: int = 0) -> MatrixCoefficientSequence:
        return MatrixCoefficientSequence(self.kind, self.coefficients[i])


def sample_matrix_coeffs(
    n: int, p: int, d: float, rng, *, reps: int = 1, cfg: SamplerConfig | None = None
) -> MatrixDraws:
    """Deformed matrix coefficients of the Hua-Pickrell ensemble on ``U(np)``, ``delta = n p d``.

    ``gamma_k`` has density prop. to ``|det(1 - g)|^{2 delta} det(1 - g g^+)^{(n-k-2)p}``
    on the ball, the last block is Hua-Pickrell on ``U(p)``.  For ``d = 0`` the
    blocks are drawn exactly as ``p x p`` corners of Haar unitaries of size
    ``(n-k) p``; otherwise by Metropolis.
    """
    if n < 1 or p < 1:
        raise DomainError("need n, p >= 1")
    if d < 0:
        raise DomainError("Hua-Pickrell needs d >= 0")
    cfg = cfg or DEFAULT.sampler
    gen = _gen(rng)
    out = np.empty((reps, n, p, p), dtype=complex)
    if d == 0:
        for k in range(n - 1):
            out[:, k] = _haar(gen, (n - k) * p, (reps,))[..., :p, :p]
        out[:, n - 1] = _haar(gen, p, (reps,))
        kind = "deformed"
        return MatrixDraws(kind, out, SampleDiagnostics("exact"))
    delta = n * p * d
    exponent = ((n - 2 - np.arange(n)) * p).astype(float)
    exponent[-1] = 0.0
    circle = np.arange(n) == n - 1
    gd = -d / (1.0 + d)
    state = np.broadcast_to(gd * np.eye(p, dtype=complex), (reps, n, p, p)).copy()
    state[:, -1] = -np.eye(p)
    diag = _matrix_chain(gen, state, _hp_ball_logp(delta, exponent, circle), circle, cfg)
    return MatrixDraws("deformed", state, diag)


def sample_matrix_coefficient(
    k: int, n: int, p: int, d: float, rng, *, size: int, cfg: SamplerConfig | None = None
) -> tuple[np.ndarray, SampleDiagnostics]:
    """``size`` draws of the single block ``gamma_k`` (``k <= n - 2``)."""
    if not 0 <= k <= n - 2:
        raise DomainError("need 0 <= k <= n - 2")
    cfg = cfg or DEFAULT.sampler
    gen = _gen(rng)
    if d == 0:
        return _haar(gen, (n - k) * p, (size,))[..., :p, :p], SampleDiagnostics("exact")
    gd = -d / (1.0 + d)
    state = np.broadcast_to(gd * np.eye(p, dtype=complex), (size, 1, p, p)).copy()
    circle = np.array([False])
    logp = _hp_ball_logp(n * p * d, np.array([float((n - k - 2) * p)]), circle)
    diag = _matrix_chain(gen, state, logp, circle, cfg)
    return state[:, 0], diag
