"""Command-line driver: config parsing, run orchestration, CSV output.

Configuration is flat ``key = value`` text with ``#`` comments; every key
has a matching command-line flag that overrides the file value.  Three
modes exist: ``run`` writes the final solution as CSV, ``audit``
additionally writes per-step realizability statistics, and ``converge``
runs a grid-refinement study and writes the error/rate table.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .closures import get_closure
from .errors import ParseError, SolverError, ValidationError
from .harness import (
    PRESET_NAMES,
    build_preset,
    convergence_study,
    init_state,
    preset_boundary,
    source_mode_for,
)
from .moments import margins, maxwellian_moments
from .scheme import NGHOST, BoundaryConditions, GridState, SourceMode, evolve

_SQRT3 = math.sqrt(3.0)

_MODES = ("run", "converge", "audit")
_CLOSURES = ("eqmom", "hyqmom")
_SOURCE_KINDS = ("collisionless", "explicit", "semi_implicit")
_BC_OVERRIDES = ("periodic", "outflow")

DEFAULT_RESOLUTIONS = (40, 80, 160, 320, 640, 1280)
DEFAULT_REF_NX = 10240


@dataclass(frozen=True)
class RunConfig:
    """Validated run settings; optional fields default at use time."""

    mode: str = "run"
    closure: str = ""
    preset: str | None = None
    ic: tuple | None = None  # ("maxwellian", rho, U, theta)
    domain: tuple | None = None
    nx: int | None = None
    cfl: float = 0.5
    tau: float | None = None
    source_mode: str | None = None
    semi_implicit_eval: str = "post"
    a: float = 2.0
    end_time: float | None = None
    bc: str | None = None
    out: str | None = None
    resolutions: tuple = DEFAULT_RESOLUTIONS
    ref_nx: int = DEFAULT_REF_NX


def _parse_float(key, raw, where):
    if raw.lower() in ("inf", "infinity"):
        return math.inf
    try:
        return float(raw)
    except ValueError:
        raise ParseError(f"{where}: key '{key}' needs a number, got '{raw}'") from None


def _parse_int(key, raw, where):
    try:
        return int(raw)
    except ValueError:
        raise ParseError(f"{where}: key '{key}' needs an integer, got '{raw}'") from None


def _parse_choice(key, raw, where, choices):
    if raw not in choices:
        raise ParseError(
            f"{where}: key '{key}' must be one of {', '.join(choices)}, got '{raw}'"
        )
    return raw


def _parse_int_list(key, raw, where):
    try:
        return tuple(int(part.strip()) for part in raw.split(",") if part.strip())
    except ValueError:
        raise ParseError(f"{where}: key '{key}' needs comma-separated integers") from None


def _parse_ic(key, raw, where):
    head, _, rest = raw.partition(":")
    if head.strip() != "maxwellian":
        raise ParseError(f"{where}: key '{key}' supports 'maxwellian:rho,U,theta'")
    try:
        rho, u, theta = (float(p) for p in rest.split(","))
    except ValueError:
        raise ParseError(f"{where}: key '{key}' needs 'maxwellian:rho,U,theta'") from None
    return ("maxwellian", rho, u, theta)


def _parse_domain(key, raw, where):
    try:
        lo, hi = (float(p) for p in raw.split(","))
    except ValueError:
        raise ParseError(f"{where}: key '{key}' needs 'x_lo,x_hi'") from None
    return (lo, hi)


_CONVERTERS = {
    "mode": lambda k, v, w: _parse_choice(k, v, w, _MODES),
    "closure": lambda k, v, w: _parse_choice(k, v, w, _CLOSURES),
    "preset": lambda k, v, w: _parse_choice(k, v, w, PRESET_NAMES),
    "ic": _parse_ic,
    "domain": _parse_domain,
    "nx": _parse_int,
    "cfl": _parse_float,
    "tau": _parse_float,
    "source_mode": lambda k, v, w: _parse_choice(k, v, w, _SOURCE_KINDS),
    "semi_implicit_eval": lambda k, v, w: _parse_choice(k, v, w, ("post", "level_n")),
    "a": _parse_float,
    "end_time": _parse_float,
    "bc": lambda k, v, w: _parse_choice(k, v, w, _BC_OVERRIDES),
    "out": lambda k, v, w: v,
    "resolutions": _parse_int_list,
    "ref_nx": _parse_int,
}


def _parse_entries(text: str) -> dict:
    """Parse flat key = value lines into {key: (raw_value, where)}."""
    entries = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError(f"line {lineno}: expected 'key = value'")
        key = key.strip()
        value = value.strip()
        if key not in _CONVERTERS:
            raise ParseError(f"line {lineno}: unknown key '{key}'")
        if key in entries:
            raise ParseError(f"line {lineno}: duplicate key '{key}'")
        if not value:
            raise ParseError(f"line {lineno}: key '{key}' has no value")
        entries[key] = (value, f"line {lineno}")
    return entries


def _build_config(entries: dict) -> RunConfig:
    values = {}
    for key, (raw, where) in entries.items():
        values[key] = _CONVERTERS[key](key, raw, where)
    cfg = RunConfig(
        mode=values.get("mode", "run"),
        closure=values.get("closure", ""),
        preset=values.get("preset"),
        ic=values.get("ic"),
        domain=values.get("domain"),
        nx=values.get("nx"),
        cfl=values.get("cfl", 0.5),
        tau=values.get("tau"),
        source_mode=values.get("source_mode"),
        semi_implicit_eval=values.get("semi_implicit_eval", "post"),
        a=values.get("a", 2.0),
        end_time=values.get("end_time"),
        bc=values.get("bc"),
        out=values.get("out"),
        resolutions=values.get("resolutions", DEFAULT_RESOLUTIONS),
        ref_nx=values.get("ref_nx", DEFAULT_REF_NX),
    )
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.closure not in _CLOSURES:
        raise ValidationError("closure must be set to 'eqmom' or 'hyqmom'")
    if not 0.0 < cfg.cfl <= 0.5:
        raise ValidationError(
            f"cfl = {cfg.cfl} violates the realizability bound cfl <= 0.5"
        )
    if cfg.closure == "eqmom" and not cfg.a > _SQRT3:
        raise ValidationError(
            f"a = {cfg.a} violates the wave-speed requirement a > sqrt(3)"
        )
    if cfg.tau is not None and cfg.tau <= 0.0:
        raise ValidationError("tau must be positive (or 'inf')")
    if cfg.source_mode is not None and cfg.tau is not None:
        collision_free = cfg.source_mode == "collisionless"
        if collision_free != math.isinf(cfg.tau):
            raise ValidationError(
                "source_mode and tau disagree: collisionless requires tau = inf"
            )
    if cfg.mode == "converge":
        if cfg.preset is None and cfg.ic is not None:
            raise ValidationError("converge mode works on presets only")
        for nx in cfg.resolutions:
            if nx < 4:
                raise ValidationError("resolutions must be at least 4 cells")
            if cfg.ref_nx % nx != 0:
                raise ValidationError(
                    f"ref_nx = {cfg.ref_nx} is not divisible by resolution {nx}"
                )
    else:
        if (cfg.preset is None) == (cfg.ic is None):
            raise ValidationError("exactly one of preset or ic is required")
        if cfg.nx is None:
            raise ValidationError("nx is required")
        if cfg.nx < 4:
            raise ValidationError("nx must be at least 4")
        if cfg.ic is not None and cfg.end_time is None:
            raise ValidationError("end_time is required with a custom ic")


def parse_config(text: str) -> RunConfig:
    """Parse and validate flat key = value configuration text."""
    return _build_config(_parse_entries(text))


# ---------------------------------------------------------------------------
# Orchestration


def _fmt(x: float) -> str:
    """Shortest round-trip decimal (at most 17 significant digits)."""
    return repr(float(x))


def _custom_state(cfg: RunConfig):
    _, rho, u, theta = cfg.ic
    lo, hi = cfg.domain if cfg.domain is not None else (-1.0, 1.0)
    dx = (hi - lo) / cfg.nx
    M = np.repeat(maxwellian_moments(rho, u, theta)[:, None], cfg.nx, axis=1)
    cells = np.empty((5, cfg.nx + 2 * NGHOST))
    cells[:, NGHOST:-NGHOST] = M
    cells[:, :NGHOST] = M[:, :1]
    cells[:, -NGHOST:] = M[:, -1:]
    return GridState(dx=dx, x_lo=lo, cells=cells, time=0.0)


def _resolve_mode(cfg: RunConfig, default_tau: float) -> SourceMode:
    tau = cfg.tau if cfg.tau is not None else default_tau
    kind = cfg.source_mode
    if kind is None:
        kind = "collisionless" if math.isinf(tau) else "semi_implicit"
    if kind == "collisionless":
        return SourceMode.collisionless()
    if kind == "explicit":
        return SourceMode.explicit_bgk(tau)
    return SourceMode.semi_implicit_bgk(tau, cfg.semi_implicit_eval)


def _setup(cfg: RunConfig, closure):
    if cfg.preset is not None:
        preset = build_preset(cfg.preset)
        state = init_state(preset, closure, cfg.nx)
        bc = preset_boundary(preset, closure)
        mode = _resolve_mode(cfg, preset.tau_options[0])
        t_end = cfg.end_time if cfg.end_time is not None else preset.end_time
    else:
        state = _custom_state(cfg)
        bc = BoundaryConditions.periodic()
        mode = _resolve_mode(cfg, math.inf)
        t_end = cfg.end_time
    if cfg.bc == "periodic":
        bc = BoundaryConditions.periodic()
    elif cfg.bc == "outflow":
        bc = BoundaryConditions.outflow()
    return state, bc, mode, t_end


def _write_solution(path: Path, state: GridState, closure) -> None:
    M = state.interior
    W = closure.invert(M)
    m5 = np.asarray(closure.m5(W, M), dtype=float)
    prim = closure.primitives(W)
    mg = margins(M)
    header = (
        ["x", "M0", "M1", "M2", "M3", "M4", "M5bar"]
        + list(closure.primitive_names)
        + ["e_margin", "z_margin"]
    )
    x = state.centers()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(state.n_cells):
            row = [x[i], *M[:, i], m5[i], *prim[:, i], mg.e[i], mg.z[i]]
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_audit(path: Path, stats) -> None:
    header = ["step", "time", "dt", "min_m0", "min_e", "min_z", "theta_min", "n_limited"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for r in stats.records:
            row = [
                str(r.step),
                _fmt(r.time),
                _fmt(r.dt),
                _fmt(r.min_m0),
                _fmt(r.min_e),
                _fmt(r.min_z),
                _fmt(r.theta_min),
                str(r.n_limited),
            ]
            fh.write(",".join(row) + "\n")


def _write_rates(path: Path, rows) -> None:
    moments_cols = ("M0", "M1", "M2")
    header = ["nx"]
    for norm in ("e1", "e2"):
        for name in moments_cols:
            header.append(f"{norm}_{name}")
            header.append(f"rate_{norm}_{name}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [str(row.nx)]
            for errs, rates in ((row.e1, row.rate1), (row.e2, row.rate2)):
                for k in range(3):
                    cells.append(_fmt(errs[k]))
                    cells.append("" if rates is None else _fmt(rates[k]))
            fh.write(",".join(cells) + "\n")


def run(cfg: RunConfig) -> int:
    """Execute a validated configuration; returns the process exit status."""
    closure = get_closure(cfg.closure, cfg.a)
    if cfg.mode == "converge":
        preset = build_preset(cfg.preset if cfg.preset is not None else "smooth")
        rows = convergence_study(
            preset,
            closure,
            cfg.resolutions,
            cfg.ref_nx,
            cfl=cfg.cfl,
            tau=cfg.tau,
            source_kind=cfg.source_mode,
        )
        out = Path(cfg.out) if cfg.out else Path("rates.csv")
        _write_rates(out, rows)
        print(f"wrote {out}")
        return 0

    state, bc, mode, t_end = _setup(cfg, closure)
    final, stats = evolve(state, closure, mode, bc, t_end=t_end, cfl=cfg.cfl)
    out = Path(cfg.out) if cfg.out else Path("solution.csv")
    _write_solution(out, final, closure)
    print(f"wrote {out} ({final.n_cells} cells, {stats.n_steps} steps)")
    if cfg.mode == "audit":
        audit_path = out.with_suffix(".audit.csv")
        _write_audit(audit_path, stats)
        print(f"wrote {audit_path}")
    return 0


def _build_arg_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fivemoment",
        description="Realizability-preserving 1D five-moment finite-volume solver",
    )
    p.add_argument("--config", type=Path, help="flat key = value configuration file")
    for key in _CONVERTERS:
        flag = "--" + key.replace("_", "-")
        p.add_argument(flag, dest=key, help=f"override config key '{key}'")
    return p


def main(argv=None) -> int:
    args = _build_arg_parser().parse_args(argv)
    try:
        if args.config is not None:
            entries = _parse_entries(args.config.read_text(encoding="utf-8"))
        else:
            entries = {}
        for key in _CONVERTERS:
            value = getattr(args, key)
            if value is not None:
                entries[key] = (value, f"flag --{key.replace('_', '-')}")
        cfg = _build_config(entries)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except SolverError as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
