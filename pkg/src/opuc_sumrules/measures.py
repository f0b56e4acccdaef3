"""Value types: circle measures, real-line sub-probabilities, coefficient sequences."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .errors import DomainError, InvalidMeasureError
from .quadrature import integrate_arc

TWO_PI = 2.0 * np.pi
UNIT_TOL = 1e-12

__all__ = [
    "Tail",
    "CoefficientSequence",
    "CircleMeasure",
    "RealMeasure",
    "wrap_angle",
]


def wrap_angle(theta):
    """Reduce angles to ``[0, 2*pi)``."""
    w = np.mod(theta, TWO_PI)
    return np.where(w >= TWO_PI, 0.0, w) if np.ndim(w) else (0.0 if w >= TWO_PI else float(w))


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=complex).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Tail:
    """What follows the explicit head: nothing, zeros, or a repeated constant."""

    type: Literal["zero", "constant", "none"] = "zero"
    value: complex = 0j

    def __post_init__(self):
        if self.type not in ("zero", "constant", "none"):
            raise DomainError(f"unknown tail type {self.type!r}")
        object.__setattr__(self, "value", complex(self.value))
        if self.type == "constant" and abs(self.value) >= 1.0:
            raise DomainError("constant tail must lie in the open unit disk")
        if self.type == "zero":
            object.__setattr__(self, "value", 0j)

    @classmethod
    def constant(cls, c: complex) -> "Tail":
        return cls("constant", c)

    def to_dict(self) -> dict:
        return {"type": self.type, "value": [self.value.real, self.value.imag]}


@dataclass(frozen=True)
class CoefficientSequence:
    """Head of plain (``alpha``) or deformed (``gamma``) coefficients plus a tail."""

    kind: Literal["plain", "deformed"]
    head: np.ndarray
    tail: Tail = field(default_factory=Tail)

    def __post_init__(self):
        if self.kind not in ("plain", "deformed"):
            raise DomainError(f"unknown coefficient kind {self.kind!r}")
        head = _frozen(self.head)
        object.__setattr__(self, "head", head)
        mod = np.abs(head)
        if np.any(mod > 1.0 + UNIT_TOL):
            raise DomainError("coefficients must lie in the closed unit disk")
        if head.size > 1 and np.any(mod[:-1] >= 1.0 - UNIT_TOL):
            raise DomainError("only the final head value may be unimodular")

    @property
    def is_trivial(self) -> bool:
        """True when the last head value is unimodular (finitely supported measure)."""
        return self.head.size > 0 and abs(abs(self.head[-1]) - 1.0) <= UNIT_TOL

    def __len__(self) -> int:
        return int(self.head.size)

    def values(self, n: int) -> np.ndarray:
        """First ``n`` coefficients, extending the head by the tail."""
        if n <= self.head.size:
            return np.array(self.head[:n])
        if self.is_trivial:
            raise DomainError("a trivial sequence has no coefficients past its unimodular value")
        if self.tail.type == "none":
            raise DomainError("tail 'none' cannot be extended")
        ext = np.full(n - self.head.size, self.tail.value, dtype=complex)
        return np.concatenate([self.head, ext])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "head": [[z.real, z.imag] for z in self.head],
            "tail": self.tail.to_dict(),
        }


@dataclass(frozen=True)
class CircleMeasure:
    """Density on an arc plus finitely many atoms.

    The density is taken with respect to ``dtheta / (2 pi)``.  The arc is
    ``[arc_lo, arc_hi]`` with ``arc_hi - arc_lo <= 2 pi``; ``arc_lo`` may be
    negative so that arcs through the angle 0 stay contiguous.
    """

    arc_lo: float
    arc_hi: float
    density: Callable[[float], float] | None = None
    atoms: tuple[tuple[float, float], ...] = ()
    total_mass: float = 1.0
    sqrt_edges: bool = False
    name: str = ""

    def __post_init__(self):
        if not self.arc_hi > self.arc_lo or self.arc_hi - self.arc_lo > TWO_PI + 1e-12:
            raise DomainError("arc must satisfy lo < hi <= lo + 2 pi")
        atoms = tuple((float(wrap_angle(t)), float(w)) for t, w in self.atoms)
        if any(w <= 0.0 for _, w in atoms):
            raise InvalidMeasureError("atom weights must be positive")
        angles = sorted(t for t, _ in atoms)
        if any(abs(b - a) < 1e-14 for a, b in zip(angles[:-1], angles[1:])):
            raise InvalidMeasureError("atom angles must be distinct")
        object.__setattr__(self, "atoms", atoms)
        if not 0.0 < self.total_mass <= 1.0 + 1e-9:
            raise InvalidMeasureError("total mass must lie in (0, 1]")

    @property
    def full_circle(self) -> bool:
        return self.arc_hi - self.arc_lo >= TWO_PI - 1e-14

    def in_arc(self, theta, *, closed: bool = True):
        """Whether angles lie in the support arc (modulo 2 pi)."""
        shifted = wrap_angle(np.asarray(theta, dtype=float) - self.arc_lo)
        width = self.arc_hi - self.arc_lo
        if self.full_circle:
            return np.ones_like(shifted, dtype=bool)
        if closed:
            return (shifted <= width + 1e-14) | (shifted >= TWO_PI - 1e-14)
        return (shifted > 1e-14) & (shifted < width - 1e-14)

    def density_at(self, theta) -> np.ndarray:
        """Density evaluated at arbitrary angles (zero off the arc)."""
        theta = np.asarray(theta, dtype=float)
        if self.density is None:
            return np.zeros_like(theta)
        out = np.zeros(theta.shape)
        flat, res = theta.reshape(-1), out.reshape(-1)
        mask = self.in_arc(flat)
        for i in np.flatnonzero(mask):
            t = self.arc_lo + wrap_angle(flat[i] - self.arc_lo)
            res[i] = self.density(float(t))
        return out

    def integrate(self, func: Callable[[float], float], *, points=None, tol=None) -> float:
        """``int func(theta) w(theta) dtheta / 2pi`` over the arc (atoms excluded)."""
        if self.density is None:
            return 0.0
        val = integrate_arc(
            lambda t: func(t) * self.density(t),
            self.arc_lo,
            self.arc_hi,
            sqrt_edges=self.sqrt_edges,
            points=points,
            tol=tol,
        )
        return val / TWO_PI

    def ac_mass(self) -> float:
        return self.integrate(lambda t: 1.0)

    def atom_mass(self) -> float:
        return float(sum(w for _, w in self.atoms))

    def is_member_s1t(self) -> bool:
        """No atom strictly inside the open support arc."""
        return not any(bool(self.in_arc(t, closed=False)) for t, _ in self.atoms)

    def with_atoms(self, atoms, *, rescale: bool = True) -> "CircleMeasure":
        """Same density (scaled to keep total mass 1) with a new atom list."""
        atoms = tuple(atoms)
        extra = float(sum(w for _, w in atoms))
        if rescale and self.density is not None:
            scale = 1.0 - extra
            if scale <= 0.0:
                raise InvalidMeasureError("atoms exceed unit mass")
            dens = self.density
            density = lambda t, _d=dens, _s=scale: _s * _d(t)  # noqa: E731
        else:
            density = self.density
        return CircleMeasure(
            self.arc_lo, self.arc_hi, density, atoms,
            total_mass=min(1.0, self.total_mass if not rescale else 1.0),
            sqrt_edges=self.sqrt_edges, name=self.name,
        )


@dataclass(frozen=True)
class RealMeasure:
    """Sub-probability on the real line: density w.r.t. ``dx`` plus atoms."""

    support: tuple[float, float]
    density: Callable[[float], float] | None
    atoms: tuple[tuple[float, float], ...] = ()
    total_mass: float = 1.0
    sqrt_edges: bool = False
    name: str = ""

    def density_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.density is None:
            return np.zeros_like(x)
        lo, hi = self.support
        vals = np.array([self.density(float(v)) if lo <= v <= hi else 0.0 for v in x.reshape(-1)])
        return vals.reshape(x.shape)
