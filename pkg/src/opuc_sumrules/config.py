"""Tunable numerical settings, grouped by concern."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field


@dataclass(frozen=True)
class QuadratureConfig:
    """Adaptive Gauss-Kronrod settings."""

    tol: float = 1e-10
    limit: int = 400


@dataclass(frozen=True)
class AtomConfig:
    """Atom detection: truncated CMV location, radial-limit quantification."""

    truncation: int = 512
    radial_levels: tuple[int, int] = (8, 20)
    richardson_order: int = 4
    min_mass: float = 1e-12
    gap_grid: int = 4000


@dataclass(frozen=True)
class RateConfig:
    """Thresholds used by the spectral-side rate functionals."""

    density_floor: float = 1e-300
    tail_window: int = 20


@dataclass(frozen=True)
class SamplerConfig:
    """Metropolis tuning for the coefficient samplers."""

    burn_in: int = 5000
    target_acceptance: tuple[float, float] = (0.25, 0.35)
    rejection_floor: float = 1e-4
    max_thin: int = 200


@dataclass(frozen=True)
class Settings:
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    atoms: AtomConfig = field(default_factory=AtomConfig)
    rates: RateConfig = field(default_factory=RateConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT = Settings()
