"""Gross-Witten and Hua-Pickrell ensembles: equilibria, constants, Cayley transfer.

Circle potentials (angles ``theta``, ``z = e^{i theta}``):

* Gross-Witten ``V_g(z) = -g Re z``;
* Hua-Pickrell ``V_d(z) = -2 d log|1 - z|``.

All densities returned here are with respect to ``dtheta / 2pi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .errors import DomainError
from .measures import TWO_PI, CircleMeasure, RealMeasure

__all__ = [
    "Potential",
    "EnsembleSpec",
    "RealEnsembleSpec",
    "gw",
    "hp",
    "gw_equilibrium",
    "hp_equilibrium",
    "gw_constants",
    "hp_constants",
    "gw_equilibrium_alphas",
    "real_ensembles",
    "POINT_AT_INFINITY",
    "cayley_point",
    "cayley_inverse",
    "cayley_angle_to_real",
    "cayley_real_to_angle",
    "cayley_pushforward",
    "potential_transfer",
    "geronimus_jacobi",
]


# --------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class Potential:
    """Potential on the circle or the line, with an explicit additive constant.

    ``value(t) = func(t) + offset``.  Keeping the constant separate makes
    the normalisation of transferred potentials visible.
    """

    func: Callable[[np.ndarray], np.ndarray]
    offset: float = 0.0
    domain: Literal["circle", "real"] = "circle"
    label: str = ""

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return self.func(t) + self.offset

    def shifted(self, c: float) -> "Potential":
        return Potential(self.func, self.offset + c, self.domain, self.label)


def _gw_potential(g: float) -> Potential:
    return Potential(lambda t, _g=g: -_g * np.cos(t), 0.0, "circle", f"gw(g={g})")


def _hp_potential(d: float) -> Potential:
    def func(t, _d=d):
        with np.errstate(divide="ignore"):
            return -2.0 * _d * np.log(np.abs(2.0 * np.sin(0.5 * t)))

    return Potential(func, 0.0, "circle", f"hp(d={d})")


# --------------------------------------------------------------------------
# closed forms


def gw_constants(g: float, *, variational: bool = False) -> tuple[float, float]:
    """Free energy and modified Robin constant ``(F, xi)`` of Gross-Witten.

    For ``|g| <= 1`` the default returns the tabulated pair ``(g^2/2, g^2/4)``;
    ``variational=True`` returns the values of the energy functional and
    of half the effective potential at the equilibrium, ``(-g^2/4, 0)``.
    In the gapped phase both conventions coincide and depend on ``|g|`` only.
    """
    g = float(g)
    a = abs(g)
    if a <= 1.0:
        return (-g * g / 4.0, 0.0) if variational else (g * g / 2.0, g * g / 4.0)
    return -a + 0.5 * np.log(a) + 0.75, 0.5 * (np.log(a) - a + 1.0)


def hp_constants(d: float) -> tuple[float, float]:
    """``(F, xi)`` for Hua-Pickrell with ``delta = n d``."""
    d = float(d)
    if d < 0:
        raise DomainError("Hua-Pickrell needs d >= 0")
    xlogx = 0.0 if d == 0 else d * d * np.log(d)
    f = (
        (1 + d) ** 2 * np.log1p(d)
        + xlogx
        - 0.5 * (1 + 2 * d) ** 2 * np.log1p(2 * d)
        + 2 * d * d * np.log(2.0)
    )
    xi = (1 + d) * np.log1p(d) - 0.5 * (1 + 2 * d) * np.log1p(2 * d)
    return float(f), float(xi)


def gw_equilibrium_alphas(g: float, k: int) -> float:
    """Verblunsky coefficient ``alpha_k`` of the ungapped Gross-Witten equilibrium.

    ``|g| < 1``: ``-(x_+ - x_-) / (x_+^{k+2} - x_-^{k+2})`` with
    ``x_pm = -1/g pm sqrt(1/g^2 - 1)``, evaluated in the overflow-free form
    ``(x_+ - x_-) x_-^{-(k+2)} / (1 - (x_+/x_-)^{k+2})``.

    ``|g| = 1``: ``-(-g)^{k+1} / (k+2)``, which is the ``g -> pm 1`` limit of
    the first branch and reproduces ``alpha_0 = m_1 = g/2``.
    """
    g = float(g)
    if k < 0:
        raise DomainError("k must be nonnegative")
    if abs(g) > 1.0:
        raise DomainError("no closed form for the gapped phase |g| > 1")
    if g == 0.0:
        return 0.0
    if abs(g) == 1.0:
        return -((-g) ** (k + 1)) / (k + 2)
    root = np.sqrt(1.0 / (g * g) - 1.0)
    xp, xm = -1.0 / g + root, -1.0 / g - root
    if abs(xp) > abs(xm):
        xp, xm = xm, xp
    n = k + 2
    return float((xp - xm) * xm ** (-n) / (1.0 - (xp / xm) ** n))


def geronimus_jacobi(d: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Jacobi parameters ``(a_1..a_n, b_1..b_n)`` of the Hua-Pickrell equilibrium.

    These belong to the image of the circle measure under ``x = z + 1/z``
    (Geronimus relations with constant real ``alpha = gamma_d``), with
    ``a_1 = sqrt(2(1+2d)/(1+d)^3)``, ``a_k = (1+2d)/(1+d)^2``,
    ``b_1 = -2d/(1+d)``, ``b_k = -2d^2/(1+d)^2``.
    """
    if d < 0:
        raise DomainError("Hua-Pickrell needs d >= 0")
    a = np.full(n, (1 + 2 * d) / (1 + d) ** 2)
    b = np.full(n, -2 * d * d / (1 + d) ** 2)
    a[0] = np.sqrt(2 * (1 + 2 * d) / (1 + d) ** 3)
    b[0] = -2 * d / (1 + d)
    return a, b


# --------------------------------------------------------------------------
# ensemble descriptors


@dataclass(frozen=True)
class EnsembleSpec:
    """Gross-Witten (``family='gw'``, parameter g) or Hua-Pickrell (``'hp'``, d)."""

    family: Literal["gw", "hp"]
    param: float

    def __post_init__(self):
        if self.family not in ("gw", "hp"):
            raise DomainError(f"unknown family {self.family!r}")
        object.__setattr__(self, "param", float(self.param))
        if self.family == "hp" and self.param < 0:
            raise DomainError("Hua-Pickrell needs d >= 0")

    # -- geometry
    @property
    def gapped(self) -> bool:
        if self.family == "hp":
            return self.param > 0
        return abs(self.param) > 1.0

    @property
    def edge(self) -> float:
        """``theta_d`` (HP) or ``theta_g`` (GW); 0 when the support is the circle."""
        p = self.param
        if self.family == "hp":
            return float(2.0 * np.arcsin(p / (1.0 + p)))
        if abs(p) <= 1.0:
            return 0.0
        return float(2.0 * np.arcsin(1.0 / np.sqrt(abs(p))))

    @property
    def arc(self) -> tuple[float, float]:
        """Support arc; GW with ``g > 1`` uses ``[-theta_g, theta_g]``."""
        if not self.gapped:
            return 0.0, TWO_PI
        e = self.edge
        if self.family == "hp":
            return e, TWO_PI - e
        if self.param > 1.0:
            return -e, e
        return np.pi - e, np.pi + e

    @property
    def gap(self) -> tuple[float, float]:
        """Complementary open arc, expressed with ``lo < hi``."""
        lo, hi = self.arc
        return hi, lo + TWO_PI

    # -- constants
    @property
    def constants(self) -> tuple[float, float]:
        """``(F, xi)`` consistent with the energy functional and effective potential."""
        if self.family == "hp":
            return hp_constants(self.param)
        return gw_constants(self.param, variational=True)

    @property
    def free_energy(self) -> float:
        return self.constants[0]

    @property
    def robin(self) -> float:
        return self.constants[1]

    # -- functions
    @property
    def potential(self) -> Potential:
        if self.family == "hp":
            return _hp_potential(self.param)
        return _gw_potential(self.param)

    @property
    def potential_at_one(self) -> float:
        """``V(1)``: finite for GW, ``+inf`` for HP with ``d > 0``."""
        if self.family == "hp":
            return np.inf if self.param > 0 else 0.0
        return -self.param

    def density(self, theta):
        """Equilibrium density w.r.t. ``dtheta / 2pi`` (vectorised)."""
        t = np.asarray(theta, dtype=float)
        p = self.param
        if not self.gapped:
            out = 1.0 + p * np.cos(t) if self.family == "gw" else np.ones_like(t)
            return out if out.ndim else float(out)
        half = 0.5 * t
        if self.family == "hp":
            s2 = (p / (1.0 + p)) ** 2
            sn = np.abs(np.sin(half))
            rad = np.maximum(sn * sn - s2, 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(rad > 0, (1.0 + p) * np.sqrt(rad) / np.where(sn > 0, sn, 1.0), 0.0)
        elif p > 1.0:
            rad = np.maximum(1.0 / p - np.sin(half) ** 2, 0.0)
            out = 2.0 * p * np.abs(np.cos(half)) * np.sqrt(rad)
        else:
            a = abs(p)
            rad = np.maximum(np.sin(half) ** 2 - (1.0 - 1.0 / a), 0.0)
            out = 2.0 * a * np.abs(np.sin(half)) * np.sqrt(rad)
        return out if out.ndim else float(out)

    def offcriticality(self, theta):
        """Factor ``S`` with ``density = 2 S |sqrt((e^{it}-e^{ia-})(e^{it}-e^{ia+}))|`` on the arc.

        ``|(e^{it}-e^{ia})(e^{it}-e^{ib})| = 4 |sin((t-a)/2) sin((t-b)/2)|``.
        """
        if not self.gapped:
            raise DomainError("offcriticality factor only defined in the one-cut gapped regime")
        t = np.asarray(theta, dtype=float)
        p = self.param
        if self.family == "hp":
            out = (1.0 + p) / (4.0 * np.abs(np.sin(0.5 * t)))
        elif p > 1.0:
            out = 0.5 * p * np.cos(0.5 * np.angle(np.exp(1j * t)))
        else:
            out = 0.5 * abs(p) * np.abs(np.sin(0.5 * t))
        return out if out.ndim else float(out)

    def measure(self) -> CircleMeasure:
        lo, hi = self.arc
        name = f"{self.family}({self.param:g})"
        return CircleMeasure(
            lo, hi, lambda t, _s=self: float(_s.density(t)), (), 1.0,
            sqrt_edges=self.gapped, name=name,
        )

    def to_dict(self) -> dict:
        lo, hi = self.arc
        f, xi = self.constants
        out = {
            "family": self.family,
            "param": self.param,
            "edge": self.edge,
            "arc": [lo, hi],
            "F": f,
            "xi": xi,
        }
        if self.family == "gw":
            out["F_tabulated"], out["xi_tabulated"] = gw_constants(self.param)
        return out


def gw(g: float) -> EnsembleSpec:
    return EnsembleSpec("gw", g)


def hp(d: float) -> EnsembleSpec:
    return EnsembleSpec("hp", d)


def gw_equilibrium(g: float) -> CircleMeasure:
    """Equilibrium measure of ``V_g = -g Re z``."""
    return gw(g).measure()


def hp_equilibrium(d: float) -> CircleMeasure:
    """Equilibrium measure of ``V_d = -2d log|1-z|`` (uniform for ``d = 0``)."""
    return hp(d).measure()


# --------------------------------------------------------------------------
# Cayley transform


class _PointAtInfinity:
    """Symbolic image of ``z = 1`` under the Cayley transform."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "POINT_AT_INFINITY"

    def __reduce__(self):
        return (_PointAtInfinity, ())


POINT_AT_INFINITY = _PointAtInfinity()


def cayley_point(z: complex):
    """``tau(z) = i (1 + z) / (1 - z)``; returns :data:`POINT_AT_INFINITY` at ``z = 1``."""
    z = complex(z)
    if abs(z - 1.0) < 1e-15:
        return POINT_AT_INFINITY
    val = 1j * (1.0 + z) / (1.0 - z)
    if abs(abs(z) - 1.0) < 1e-12:
        return float(val.real)
    return val


def cayley_inverse(x):
    """``tau^{-1}(x) = (x - i) / (x + i)``; the point at infinity maps to 1."""
    if x is POINT_AT_INFINITY:
        return 1.0 + 0j
    x = np.asarray(x, dtype=complex)
    out = (x - 1j) / (x + 1j)
    return out if out.ndim else complex(out)


def cayley_angle_to_real(theta):
    """``x = -cot(theta/2)``, the real image of ``e^{i theta}``, ``theta`` in ``(0, 2pi)``."""
    t = np.asarray(theta, dtype=float)
    out = -np.cos(0.5 * t) / np.sin(0.5 * t)
    return out if out.ndim else float(out)


def cayley_real_to_angle(x):
    """Inverse of :func:`cayley_angle_to_real`, valued in ``(0, 2pi)``."""
    x = np.asarray(x, dtype=float)
    out = np.pi + 2.0 * np.arctan(x)
    return out if out.ndim else float(out)


def cayley_pushforward(mu: CircleMeasure) -> RealMeasure:
    """Image of ``mu`` under ``tau``; an atom at ``z = 1`` is dropped.

    Uses ``dtheta = 2 dx / (1 + x^2)``, so a density ``w`` w.r.t.
    ``dtheta/2pi`` becomes ``w(theta(x)) / (pi (1 + x^2))`` w.r.t. ``dx``.
    """
    atoms = tuple(
        (float(cayley_angle_to_real(t)), w) for t, w in mu.atoms if abs(np.sin(0.5 * t)) > 1e-15
    )
    dropped = sum(w for t, w in mu.atoms if abs(np.sin(0.5 * t)) <= 1e-15)

    if mu.density is None:
        dens = None
        support = (-np.inf, np.inf)
    else:
        def dens(x, _mu=mu):
            t = cayley_real_to_angle(x)
            return float(_mu.density_at(t)) / (np.pi * (1.0 + x * x))

        if mu.full_circle or mu.in_arc(0.0):
            support = (-np.inf, np.inf)
        else:
            lo = mu.arc_lo % TWO_PI
            support = (float(cayley_angle_to_real(lo)), float(cayley_angle_to_real(lo + mu.arc_hi - mu.arc_lo)))
    return RealMeasure(
        support, dens, atoms, total_mass=mu.total_mass - dropped,
        sqrt_edges=mu.sqrt_edges, name=f"cayley({mu.name})",
    )


def potential_transfer(circle: Potential) -> Potential:
    """Real-line potential ``V(x) = V_circle(tau^{-1}(x)) + log(1 + x^2)``."""
    if circle.domain != "circle":
        raise DomainError("expected a circle potential")

    def func(x, _c=circle):
        t = cayley_real_to_angle(x)
        return _c.func(t) + np.log1p(np.asarray(x, dtype=float) ** 2)

    return Potential(func, circle.offset, "real", f"transfer({circle.label})")


# --------------------------------------------------------------------------
# real-line ensembles


@dataclass(frozen=True)
class RealEnsembleSpec:
    """Cayley images of the circle ensembles.

    ``family='gwreal'`` is the image of Gross-Witten with coupling ``-g``,
    potential ``g (x^2-1)/(x^2+1) + log(1+x^2)``; ``family='hpreal'`` is the
    modified Cauchy ensemble with potential ``(1+d) log(1+x^2)``.
    """

    family: Literal["gwreal", "hpreal"]
    param: float
    circle: EnsembleSpec = field(init=False, repr=False)

    def __post_init__(self):
        p = float(self.param)
        object.__setattr__(self, "param", p)
        if self.family == "gwreal":
            if p < 0:
                raise DomainError("real Gross-Witten branch needs g >= 0")
            object.__setattr__(self, "circle", gw(-p))
        elif self.family == "hpreal":
            if p < 0:
                raise DomainError("Hua-Pickrell needs d >= 0")
            object.__setattr__(self, "circle", hp(p))
        else:
            raise DomainError(f"unknown family {self.family!r}")

    @property
    def endpoint(self) -> float:
        """``m`` (GW, ``m^2 = 1/(g-1)``) or ``p`` (HP, ``p^2 = (1+2d)/d^2``); ``inf`` if unbounded."""
        p = self.param
        if self.family == "gwreal":
            return float(1.0 / np.sqrt(p - 1.0)) if p > 1.0 else np.inf
        return float(np.sqrt(1.0 + 2.0 * p) / p) if p > 0 else np.inf

    @property
    def potential(self) -> Potential:
        p = self.param
        if self.family == "gwreal":
            return Potential(lambda x, _g=p: _g * (x * x - 1.0) / (x * x + 1.0) + np.log1p(x * x),
                             0.0, "real", f"gwreal({p})")
        return Potential(lambda x, _d=p: (1.0 + _d) * np.log1p(x * x), 0.0, "real", f"hpreal({p})")

    @property
    def transfer_offset(self) -> float:
        """Constant ``c`` with ``potential = potential_transfer(circle potential) + c``."""
        return 2.0 * self.param * np.log(2.0) if self.family == "hpreal" else 0.0

    def density(self, x):
        """Equilibrium density w.r.t. ``dx``, from the displayed closed forms."""
        x = np.asarray(x, dtype=float)
        p = self.param
        if self.family == "gwreal":
            if p <= 1.0:
                out = ((1.0 - p) * x * x + 1.0 + p) / (np.pi * (x * x + 1.0) ** 2)
            else:
                m2 = 1.0 / (p - 1.0)
                rad = np.sqrt(np.maximum(m2 - x * x, 0.0))
                out = 2.0 * np.sqrt(1.0 + m2) / (np.pi * m2) * rad / (1.0 + x * x) ** 2
        else:
            if p == 0:
                out = 1.0 / (np.pi * (1.0 + x * x))
            else:
                p2 = (1.0 + 2.0 * p) / (p * p)
                rad = np.sqrt(np.maximum(p2 - x * x, 0.0))
                out = rad / (np.pi * (np.sqrt(1.0 + p2) - 1.0) * (1.0 + x * x))
        return out if out.ndim else float(out)

    @property
    def constants(self) -> tuple[float, float] | None:
        """Tabulated ``(F~, xi~)`` for the modified Cauchy ensemble (``None`` for GW)."""
        if self.family != "hpreal":
            return None
        d = self.param
        if d == 0:
            return -np.log(2.0), -np.log(2.0)
        f = (
            (1 + d) ** 2 * np.log1p(d)
            + d * d * np.log(d)
            - 0.5 * (1 + 2 * d) ** 2 * np.log1p(2 * d)
            + (2 * d * d - 1) * np.log(2.0)
        )
        xi = (d + 0.5) * np.log1p(2 * d) - d * np.log(d) - (1 + 2 * d) * np.log(2.0)
        return float(f), float(xi)

    def transferred_energy(self) -> float:
        """Energy of the equilibrium for ``potential_transfer(circle potential)``.

        From ``|tau(z) - tau(w)| = 2|z - w| / (|1-z||1-w|)`` and
        ``1 + tau(z)^2 = 4/|1-z|^2`` the real energy equals the circle
        energy plus ``log 2``.
        """
        return self.circle.free_energy + np.log(2.0)

    def jacobi(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        if self.family != "hpreal":
            raise DomainError("Jacobi parameters are tabulated for Hua-Pickrell only")
        return geronimus_jacobi(self.param, n)

    def measure(self) -> RealMeasure:
        e = self.endpoint
        return RealMeasure((-e, e), lambda x, _s=self: float(_s.density(x)), (), 1.0,
                           sqrt_edges=np.isfinite(e), name=self.family)


def real_ensembles(family: str, param: float) -> RealEnsembleSpec:
    """Descriptor for ``family`` in ``{'gwreal', 'hpreal'}``."""
    return RealEnsembleSpec(family, param)
