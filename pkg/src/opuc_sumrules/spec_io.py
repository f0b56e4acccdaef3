"""JSON measure and coefficient specs.

Scalar coefficient spec::

    {"verblunsky": {"kind": "plain", "head": [[re, im], ...],
                    "tail": {"type": "zero" | "constant", "value": [re, im]}}}

Matrix specs add ``"p"`` and give every head entry (and a constant tail) as
a ``p x p`` array of ``[re, im]`` pairs.  A tail value may also be a single
``[re, im]`` pair, read as that multiple of the identity.

Density spec::

    {"atoms": [{"theta": t, "w": w}, ...],
     "density": {"type": "named", "name": "hp" | "gw" | "uniform", "param": x}
              | {"type": "grid", "thetas": [...], "values": [...]}}

Atom weights are absolute; the density is rescaled so the total mass is 1.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np
from scipy.integrate import trapezoid

from .ensembles import gw, hp
from .errors import DomainError
from .measures import TWO_PI, CircleMeasure, CoefficientSequence, Tail
from .mopuc import MatrixCoefficientSequence

__all__ = ["load_spec", "parse_spec", "parse_matrix_spec", "dump_json"]


def _complex(pair) -> complex:
    if isinstance(pair, (int, float)):
        return complex(pair)
    if len(pair) != 2:
        raise DomainError(f"complex numbers are [re, im] pairs, got {pair!r}")
    return complex(float(pair[0]), float(pair[1]))


def _matrix(rows, p: int) -> np.ndarray:
    arr = np.array([[_complex(x) for x in row] for row in rows], dtype=complex)
    if arr.shape != (p, p):
        raise DomainError(f"expected a {p}x{p} array, got shape {arr.shape}")
    return arr


def _scalar_coefficients(block: dict) -> CoefficientSequence:
    kind = block.get("kind", "plain")
    head = np.array([_complex(x) for x in block.get("head", [])], dtype=complex)
    tail = block.get("tail", {"type": "zero"})
    ttype = tail.get("type", "zero")
    if ttype == "constant":
        return CoefficientSequence(kind, head, Tail.constant(_complex(tail.get("value", [0, 0]))))
    return CoefficientSequence(kind, head, Tail(ttype))


def parse_matrix_spec(data: dict, p: int | None = None) -> MatrixCoefficientSequence:
    """Matrix coefficient spec (``p x p`` head entries)."""
    block = data.get("verblunsky", data)
    p = int(block.get("p", p or 0))
    if p < 1:
        raise DomainError("matrix specs need p >= 1")
    head_raw = block.get("head", [])
    if p == 1 and head_raw and not isinstance(head_raw[0][0], list):
        head = np.array([[[_complex(x)]] for x in head_raw], dtype=complex)
    else:
        head = np.array([_matrix(m, p) for m in head_raw], dtype=complex).reshape(-1, p, p)
    tail = block.get("tail", {"type": "zero"})
    ttype = tail.get("type", "zero")
    value = None
    if ttype == "constant":
        raw = tail.get("value", [0, 0])
        value = _matrix(raw, p) if isinstance(raw[0], list) else _complex(raw) * np.eye(p)
    return MatrixCoefficientSequence(block.get("kind", "plain"), head, ttype, value)


def _density_measure(data: dict) -> CircleMeasure:
    dens = data.get("density")
    atoms = [(float(a["theta"]), float(a["w"])) for a in data.get("atoms", [])]
    if dens is None:
        if not atoms:
            raise DomainError("density spec needs a density or atoms")
        return CircleMeasure(0.0, TWO_PI, None, tuple(atoms), total_mass=1.0)
    kind = dens.get("type")
    if kind == "named":
        name = dens.get("name")
        param = float(dens.get("param", 0.0))
        if name == "hp":
            base = hp(param).measure()
        elif name == "gw":
            base = gw(param).measure()
        elif name == "uniform":
            base = CircleMeasure(0.0, TWO_PI, lambda t: 1.0, name="uniform")
        else:
            raise DomainError(f"unknown named density {name!r}")
    elif kind == "grid":
        thetas = np.asarray(dens["thetas"], dtype=float)
        values = np.asarray(dens["values"], dtype=float)
        if thetas.shape != values.shape or thetas.size < 2 or np.any(np.diff(thetas) <= 0):
            raise DomainError("grid density needs increasing thetas and matching values")
        if np.any(values < 0):
            raise DomainError("grid density must be nonnegative")
        mass = trapezoid(values, thetas) / TWO_PI
        if mass <= 0:
            raise DomainError("grid density has zero mass")
        scaled = values / mass
        base = CircleMeasure(
            float(thetas[0]), float(thetas[-1]),
            lambda t, _x=thetas, _y=scaled: float(np.interp(t, _x, _y)), name="grid",
        )
    else:
        raise DomainError(f"unknown density type {kind!r}")
    return base.with_atoms(atoms) if atoms else base


def parse_spec(data: dict[str, Any]) -> CoefficientSequence | MatrixCoefficientSequence | CircleMeasure:
    """Coefficient or density spec to the matching object."""
    if not isinstance(data, dict):
        raise DomainError("spec must be a JSON object")
    if "verblunsky" in data:
        block = data["verblunsky"]
        if "p" in block:
            return parse_matrix_spec(data)
        return _scalar_coefficients(block)
    if "density" in data or "atoms" in data:
        return _density_measure(data)
    raise DomainError("spec needs a 'verblunsky' block or 'density'/'atoms'")


def load_spec(path: str | Path):
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DomainError(f"{path}: invalid JSON ({exc})") from exc
    return parse_spec(data)


def dump_json(obj: Any) -> str:
    """Deterministic JSON (sorted keys, non-finite numbers as strings)."""

    def clean(x):
        if isinstance(x, dict):
            return {str(k): clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        if isinstance(x, np.ndarray):
            return clean(x.tolist())
        if isinstance(x, (np.floating, float)):
            x = float(x)
            return x if np.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
        if isinstance(x, np.integer):
            return int(x)
        if isinstance(x, (complex, np.complexfloating)):
            return [clean(x.real), clean(x.imag)]
        return x

    return json.dumps(clean(obj), sort_keys=True, indent=2)
