"""Command-line entry point.

Exit codes: 0 when every check in the run passes (probes always pass),
1 on a numeric failure (a report is still written), 2 on usage errors.
"""

from __future__ import annotations

import csv
import io
import os
import subprocess
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import DEFAULT
from .ensembles import gw, hp
from .errors import DomainError, InvalidMeasureError, KindError, OpucError
from .measures import CircleMeasure, CoefficientSequence
from .mopuc import MatrixCoefficientSequence, MatrixMeasure, verify_matrix_hp, verify_matrix_szego
from .opuc import deformed_from_alphas, measure_from_coefficients
from .rates import RateReport, spectral_rate
from .sampling import RngStream, sample_cue_alphas, sample_gw_alphas, sample_hp_gammas
from .spec_io import dump_json, load_spec, parse_matrix_spec
from .sumrules import SumRuleCase, gems_check_hp, run_batch

RULES = {"sv": "szego_verblunsky", "hp": "hp", "gw-strong": "gw_strong", "gw-gapped": "gw_gapped_conjecture"}


@dataclass
class RunConfig:
    """What a single invocation does and where its report goes."""

    command: str
    parameters: dict = field(default_factory=dict)
    tol: float = 1e-6
    seed: int = 0
    out: str | None = None
    format: str = "json"
    jobs: int = 1


def version_string() -> str:
    """``git describe`` of the source tree, falling back to the package version."""
    try:
        res = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5, check=False,
        )
        if res.returncode == 0 and res.stdout.strip():
            return f"{__version__}+{res.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _envelope(cfg: RunConfig, body: dict) -> dict:
    return {
        "version": version_string(),
        "config": asdict(cfg),
        "settings": DEFAULT.to_dict(),
        "tolerances": {"tol": cfg.tol, "quadrature": DEFAULT.quad.tol},
        **body,
    }


def _flatten(prefix: str, obj, rows: list):
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else str(k), obj[k], rows)
    elif isinstance(obj, (list, tuple)) and obj and all(isinstance(x, (dict, list, tuple)) for x in obj):
        for i, x in enumerate(obj):
            _flatten(f"{prefix}[{i}]", x, rows)
    elif isinstance(obj, (list, tuple)):
        rows.append((prefix, " ".join(str(x) for x in obj)))
    else:
        rows.append((prefix, obj))


def _emit(cfg: RunConfig, body: dict, table: list[list] | None = None, header: list[str] | None = None):
    """Write the report: JSON canonical, CSV as a flat projection (or ``table`` when given)."""
    if cfg.format == "json":
        text = dump_json(_envelope(cfg, body)) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if table is not None:
            writer.writerow(header)
            writer.writerows(table)
        else:
            rows: list = []
            _flatten("", _envelope(cfg, body), rows)
            writer.writerow(["key", "value"])
            writer.writerows(rows)
        text = buf.getvalue()
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


def _cfg(ctx: click.Context, command: str, params: dict, fmt: str | None = None) -> RunConfig:
    g = ctx.obj
    return RunConfig(command, params, g["tol"], g["seed"], g["out"], fmt or g["format"], g["jobs"])


def _load(path: str):
    try:
        return load_spec(path)
    except FileNotFoundError as exc:
        raise click.UsageError(f"cannot read spec {path!r}") from exc
    except OpucError as exc:
        raise click.UsageError(str(exc)) from exc


def _guard(fn):
    """Invalid input becomes a usage error; numeric breakdowns exit 1 with a report."""

    def wrapper(ctx, *args, **kwargs):
        try:
            return fn(ctx, *args, **kwargs)
        except (DomainError, KindError, InvalidMeasureError) as exc:
            raise click.UsageError(str(exc)) from exc
        except OpucError as exc:
            cfg = _cfg(ctx, fn.__name__, kwargs)
            _emit(cfg, {"error": {"type": type(exc).__name__, "message": str(exc)}})
            ctx.exit(1)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--tol", type=float, default=1e-6, show_default=True, help="Residual tolerance.")
@click.option("--seed", type=click.IntRange(0, 2**63), default=0, show_default=True, help="Random seed.")
@click.option("--out", "out", type=click.Path(dir_okay=False, writable=True), default=None, help="Report file (default stdout).")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
@click.option("--jobs", type=click.IntRange(1), default=1, show_default=True, help="Worker processes (OPUC_SUMRULES_JOBS overrides).")
@click.version_option(__version__, prog_name="opuc-sumrules")
@click.pass_context
def app(ctx, tol, seed, out, fmt, jobs):
    """Numerical verification of OPUC sum rules."""
    env = os.environ.get("OPUC_SUMRULES_JOBS")
    if env:
        try:
            jobs = max(1, int(env))
        except ValueError as exc:
            raise click.UsageError("OPUC_SUMRULES_JOBS must be an integer") from exc
    ctx.obj = {"tol": tol, "seed": seed, "out": out, "format": fmt, "jobs": jobs}


# --------------------------------------------------------------------------


@app.command()
@click.option("--family", type=click.Choice(["hp", "gw"]), required=True)
@click.option("--param", type=float, required=True, help="d for hp, g for gw.")
@click.option("--grid", type=click.IntRange(2), default=201, show_default=True)
@click.option("--out", "fmt", type=click.Choice(["json", "csv"]), default=None, help="Output format.")
@click.pass_context
@_guard
def equilibrium(ctx, family, param, grid, fmt):
    """Equilibrium density table and its constants."""
    ens = hp(param) if family == "hp" else gw(param)
    cfg = _cfg(ctx, "equilibrium", {"family": family, "param": param, "grid": grid}, fmt)
    thetas = np.linspace(0.0, 2.0 * np.pi, grid)
    dens = np.asarray(ens.density(thetas), dtype=float)
    d = ens.to_dict()
    constants = {"F": d["F"], "xi": d["xi"], "edge": d["edge"]}
    body = {"ensemble": d, "constants": constants, "table": [[float(t), float(v)] for t, v in zip(thetas, dens)]}
    _emit(cfg, body, [[repr(float(t)), repr(float(v))] for t, v in zip(thetas, dens)], ["theta", "density"])


def _report_exit(reports: dict[str, RateReport]) -> int:
    ok = all(r.status in ("verified", "probe") for r in reports.values())
    return 0 if ok else 1


@app.command()
@click.option("--rule", type=click.Choice(list(RULES)), required=True)
@click.option("--param", type=float, default=0.0, show_default=True, help="d (hp) or g (gw rules).")
@click.option("--measure", "measures", type=click.Path(exists=True, dir_okay=False), multiple=True, required=True,
              help="Spec file; repeat for a batch.")
@click.option("--tol", "local_tol", type=float, default=None, help="Overrides the global tolerance.")
@click.option("--report", "fmt", type=click.Choice(["json", "csv"]), default=None)
@click.pass_context
@_guard
def verify(ctx, rule, param, measures, local_tol, fmt):
    """Check a scalar sum rule on one or more spec files."""
    if local_tol is not None:
        ctx.obj["tol"] = local_tol
    cfg = _cfg(ctx, "verify", {"rule": rule, "param": param, "measures": list(measures)}, fmt)
    cases = []
    for i, path in enumerate(measures):
        spec = _load(path)
        if isinstance(spec, MatrixCoefficientSequence):
            raise click.UsageError(f"{path}: matrix spec; use matrix-verify")
        kw = {"coefficients": spec} if isinstance(spec, CoefficientSequence) else {"measure": spec}
        cases.append(SumRuleCase(RULES[rule], param, tol=cfg.tol, case_id=f"{i:04d}:{Path(path).name}", **kw))
    reports = run_batch(cases, cfg.jobs)
    body = {"reports": {k: r.to_dict() for k, r in reports.items()}}
    if len(reports) == 1:
        body = {"report": next(iter(reports.values())).to_dict()}
    _emit(cfg, body)
    ctx.exit(_report_exit(reports))


@app.command("matrix-verify")
@click.option("--p", "p", type=click.IntRange(1), required=True)
@click.option("--rule", type=click.Choice(["szego", "hp"]), required=True)
@click.option("--d", "d", type=click.FloatRange(0.0), default=0.0, show_default=True)
@click.option("--coeffs", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--report", "fmt", type=click.Choice(["json", "csv"]), default=None)
@click.pass_context
@_guard
def matrix_verify(ctx, p, rule, d, coeffs, fmt):
    """Check the matrix Szego or Hua-Pickrell sum rule."""
    import json

    cfg = _cfg(ctx, "matrix-verify", {"p": p, "rule": rule, "d": d, "coeffs": coeffs}, fmt)
    with open(coeffs, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise click.UsageError(f"{coeffs}: invalid JSON ({exc})") from exc
    if isinstance(data, dict) and "verblunsky" in data:
        spec = parse_matrix_spec(data, p)
    else:
        scalar = _load(coeffs)
        spec = MatrixMeasure.quasi_scalar(scalar, p)
    if rule == "szego":
        rep = verify_matrix_szego(spec, p, tol=cfg.tol)
    else:
        rep = verify_matrix_hp(spec, p, d, tol=cfg.tol)
    _emit(cfg, {"report": rep.to_dict()})
    ctx.exit(_report_exit({"": rep}))


@app.command()
@click.option("--family", type=click.Choice(["hp", "gw"]), default="hp", show_default=True)
@click.option("--d", "param", type=float, default=None, help="Hua-Pickrell d (alias of --param).")
@click.option("--param", "param2", type=float, default=None)
@click.option("--measure", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--report", "fmt", type=click.Choice(["json", "csv"]), default=None)
@click.pass_context
@_guard
def rate(ctx, family, param, param2, measure, fmt):
    """Spectral rate K(mu_V | mu) + outlier terms of a measure."""
    value = param if param is not None else param2
    if value is None:
        raise click.UsageError("give --d or --param")
    cfg = _cfg(ctx, "rate", {"family": family, "param": value, "measure": measure}, fmt)
    spec = _load(measure)
    if isinstance(spec, MatrixCoefficientSequence):
        raise click.UsageError("rate takes scalar specs")
    mu = spec if isinstance(spec, CircleMeasure) else measure_from_coefficients(spec)
    rep = spectral_rate(mu, hp(value) if family == "hp" else gw(value))
    _emit(cfg, {"report": rep.to_dict()})


@app.command()
@click.option("--ensemble", type=click.Choice(["cue", "hp", "gw"]), required=True)
@click.option("--n", "n", type=click.IntRange(2), required=True)
@click.option("--param", type=float, default=0.0, show_default=True)
@click.option("--reps", type=click.IntRange(1), default=1, show_default=True)
@click.option("--seed", "local_seed", type=click.IntRange(0, 2**63), default=None)
@click.option("--esd", is_flag=True, help="Emit the averaged eigenangle histogram instead of draws.")
@click.option("--bins", type=click.IntRange(1), default=64, show_default=True)
@click.option("--out", "fmt", type=click.Choice(["json", "csv"]), default=None, help="Output format.")
@click.pass_context
@_guard
def sample(ctx, ensemble, n, param, reps, local_seed, esd, bins, fmt):
    """Coefficient draws or an averaged spectral histogram."""
    if local_seed is not None:
        ctx.obj["seed"] = local_seed
    cfg = _cfg(ctx, "sample", {"ensemble": ensemble, "n": n, "param": param, "reps": reps, "esd": esd}, fmt)
    gen = RngStream(cfg.seed).generator()
    if esd:
        from .sampling import eigenangles

        ens = {"cue": hp(0.0), "hp": hp(param), "gw": gw(param)}[ensemble]
        draws = {"cue": lambda: sample_cue_alphas(n, gen, reps=reps),
                 "hp": lambda: sample_hp_gammas(n, param, gen, reps=reps),
                 "gw": lambda: sample_gw_alphas(n, param, gen, reps=reps)}[ensemble]()
        ang = eigenangles(draws).reshape(-1)
        hist, edges = np.histogram(ang, bins=bins, range=(0.0, 2.0 * np.pi), density=True)
        hist = hist * 2.0 * np.pi  # density w.r.t. dtheta / 2pi
        table = [[repr(float(a)), repr(float(b)), repr(float(h))] for a, b, h in zip(edges[:-1], edges[1:], hist)]
        body = {"histogram": {"edges": edges, "density": hist}, "sampler": draws.diagnostics.to_dict(),
                "equilibrium": ens.to_dict()}
        _emit(cfg, body, table, ["lo", "hi", "density"])
        return
    if ensemble == "cue":
        draws = sample_cue_alphas(n, gen, reps=reps)
    elif ensemble == "hp":
        draws = sample_hp_gammas(n, param, gen, reps=reps)
    else:
        draws = sample_gw_alphas(n, param, gen, reps=reps)
    coef = draws.coefficients
    table = [[r, k, draws.kind, repr(float(coef[r, k].real)), repr(float(coef[r, k].imag))]
             for r in range(coef.shape[0]) for k in range(coef.shape[1])]
    body = {"kind": draws.kind, "coefficients": [[[z.real, z.imag] for z in row] for row in coef],
            "sampler": draws.diagnostics.to_dict()}
    _emit(cfg, body, table, ["rep", "k", "kind", "re", "im"])


@app.command()
@click.option("--d", "d", type=click.FloatRange(0.0, min_open=True), required=True)
@click.option("--measure", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--count", type=click.IntRange(5), default=40, show_default=True)
@click.option("--report", "fmt", type=click.Choice(["json", "csv"]), default=None)
@click.pass_context
@_guard
def gems(ctx, d, measure, count, fmt):
    """Compare the spectral and coefficient finiteness conditions of the Hua-Pickrell gem."""
    cfg = _cfg(ctx, "gems", {"d": d, "measure": measure, "count": count}, fmt)
    spec = _load(measure)
    if isinstance(spec, MatrixCoefficientSequence):
        raise click.UsageError("gems takes scalar specs")
    if isinstance(spec, CircleMeasure):
        res = gems_check_hp(spec, d, count=count)
    else:
        gam = spec if spec.kind == "deformed" else deformed_from_alphas(spec)
        res = gems_check_hp(measure_from_coefficients(spec), d, count=count, coefficients=gam)
    _emit(cfg, {"gems": res})
    ctx.exit(1 if res["status"] == "inconsistent" else 0)


def main(argv: list[str] | None = None) -> int:
    """Console entry point; returns the exit code."""
    try:
        rv = app.main(args=argv, prog_name="opuc-sumrules", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.Abort:
        return 1
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except OpucError as exc:
        click.echo(f"numeric failure: {exc}", err=True)
        return 1
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(main())
