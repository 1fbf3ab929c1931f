"""Benchmark presets, initial conditions, error norms and convergence studies.

The presets cover one smooth accuracy test and four discontinuous
benchmarks (a Riemann problem, a shock tube, a shock/entropy-wave
interaction, and a double rarefaction with near-vacuum regions).  Initial
conditions are sampled at cell centers and pushed through the closure's
forward moment map; the Riemann problem prescribes raw moments directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .closures import EqmomParams, HyqmomParams, eqmom_forward, hyqmom_forward
from .errors import IndivisibleRatio, LengthMismatch, NotRealizable, UnknownPreset
from .moments import DEFAULT_REL_MARGIN, is_strictly_realizable
from .scheme import NGHOST, BoundaryConditions, GridState, SourceMode, evolve

PRESET_NAMES = ("smooth", "riemann", "shock_tube", "shu_osher", "double_rarefaction")


@dataclass(frozen=True)
class Preset:
    """A benchmark configuration: domain, end time, boundaries, and ICs.

    eqmom_ic / hyqmom_ic map an array of positions to closure primitives;
    moment_ic prescribes raw moments and is used for both closures.
    tau_options lists the relaxation times the benchmark is defined for,
    with the first entry the default.
    """

    name: str
    x_lo: float
    x_hi: float
    end_time: float
    bc_kind: str  # "periodic" | "outflow" | "inflow_outflow"
    tau_options: tuple
    eqmom_ic: Callable[[np.ndarray], EqmomParams] | None = None
    hyqmom_ic: Callable[[np.ndarray], HyqmomParams] | None = None
    moment_ic: Callable[[np.ndarray], np.ndarray] | None = None


def _smooth_eqmom(x):
    return EqmomParams(
        rho1=1.0 + 0.2 * np.sin(np.pi * x),
        v1=np.ones_like(x),
        rho2=1.0 + 0.2 * np.cos(np.pi * x),
        v2=-np.ones_like(x),
        sigma=np.ones_like(x),
    )


def _smooth_hyqmom(x):
    return HyqmomParams(
        rho1=1.0 + 0.2 * np.sin(np.pi * x),
        rho2=1.0 + 0.2 * np.cos(np.pi * x),
        rho3=1.0 + 0.2 * np.sin(np.pi * x),
        v1=np.ones_like(x),
        v2=np.ones_like(x),
        v3=-np.ones_like(x),
    )


def _riemann_moments(x):
    left = np.array([1.0, 1.0, 4.0 / 3.0, 2.0, 10.0 / 3.0])
    right = np.array([1.0, -1.0, 4.0 / 3.0, -2.0, 10.0 / 3.0])
    return np.where(x < 0.0, left[:, None], right[:, None])


def _step(x, split, left, right):
    return np.where(x < split, left, right)


def _shock_tube_eqmom(x):
    return EqmomParams(
        rho1=_step(x, 0.0, 0.35, 0.09),
        v1=np.full_like(x, -1.5),
        rho2=_step(x, 0.0, 0.65, 0.01),
        v2=np.full_like(x, 2.0),
        sigma=np.full_like(x, 0.8),
    )


def _shock_tube_hyqmom(x):
    return HyqmomParams(
        rho1=_step(x, 0.0, 0.2, 0.05),
        rho2=_step(x, 0.0, 0.35, 0.01),
        rho3=_step(x, 0.0, 0.45, 0.04),
        v1=np.full_like(x, -1.5),
        v2=np.full_like(x, -1.0),
        v3=np.full_like(x, 2.0),
    )


def _shu_osher_eqmom(x):
    wave = np.sin(5.0 * x)
    return EqmomParams(
        rho1=_step(x, -4.0, 1.0, 1.0 + 0.1 * wave),
        v1=_step(x, -4.0, 2.5, -0.5),
        rho2=_step(x, -4.0, 1.0, 1.0 + 0.2 * wave),
        v2=_step(x, -4.0, 1.0, 2.0),
        sigma=np.full_like(x, 0.5),
    )


def _shu_osher_hyqmom(x):
    wave = np.sin(5.0 * x)
    return HyqmomParams(
        rho1=_step(x, -4.0, 1.0, 1.0 + 0.1 * wave),
        rho2=_step(x, -4.0, 1.0, 1.0 + 0.2 * wave),
        rho3=_step(x, -4.0, 1.0, 1.0 + 0.3 * wave),
        v1=_step(x, -4.0, 2.5, -0.5),
        v2=np.zeros_like(x),
        v3=_step(x, -4.0, 1.0, 2.0),
    )


def _double_rarefaction_eqmom(x):
    return EqmomParams(
        rho1=np.full_like(x, 0.5),
        v1=_step(x, 0.0, -5.0, -1.0),
        rho2=np.full_like(x, 0.5),
        v2=_step(x, 0.0, 1.0, 5.0),
        sigma=np.ones_like(x),
    )


def _double_rarefaction_hyqmom(x):
    return HyqmomParams(
        rho1=np.full_like(x, 0.05),
        rho2=np.full_like(x, 0.9),
        rho3=np.full_like(x, 0.05),
        v1=_step(x, 0.0, -5.0, -1.0),
        v2=_step(x, 0.0, -2.0, 2.0),
        v3=_step(x, 0.0, 1.0, 5.0),
    )


_PRESETS = {
    "smooth": Preset(
        name="smooth",
        x_lo=-1.0,
        x_hi=1.0,
        end_time=0.01,
        bc_kind="periodic",
        tau_options=(0.1,),
        eqmom_ic=_smooth_eqmom,
        hyqmom_ic=_smooth_hyqmom,
    ),
    "riemann": Preset(
        name="riemann",
        x_lo=-1.0,
        x_hi=1.0,
        end_time=0.1,
        bc_kind="outflow",
        tau_options=(math.inf, 0.05),
        moment_ic=_riemann_moments,
    ),
    "shock_tube": Preset(
        name="shock_tube",
        x_lo=-1.0,
        x_hi=1.0,
        end_time=0.2,
        bc_kind="outflow",
        tau_options=(math.inf, 0.05),
        eqmom_ic=_shock_tube_eqmom,
        hyqmom_ic=_shock_tube_hyqmom,
    ),
    "shu_osher": Preset(
        name="shu_osher",
        x_lo=-5.0,
        x_hi=5.0,
        end_time=1.0,
        bc_kind="inflow_outflow",
        tau_options=(math.inf, 0.05),
        eqmom_ic=_shu_osher_eqmom,
        hyqmom_ic=_shu_osher_hyqmom,
    ),
    "double_rarefaction": Preset(
        name="double_rarefaction",
        x_lo=-1.0,
        x_hi=1.0,
        end_time=0.12,
        bc_kind="outflow",
        tau_options=(math.inf, 0.05),
        eqmom_ic=_double_rarefaction_eqmom,
        hyqmom_ic=_double_rarefaction_hyqmom,
    ),
}


def build_preset(name: str) -> Preset:
    """Look up a benchmark preset by name."""
    try:
        return _PRESETS[name]
    except KeyError:
        raise UnknownPreset(
            f"unknown preset '{name}'; choose from {', '.join(PRESET_NAMES)}"
        ) from None


def initial_moments(preset: Preset, closure, x: np.ndarray) -> np.ndarray:
    """Raw initial moments at positions x for the given closure."""
    if preset.moment_ic is not None:
        return preset.moment_ic(np.asarray(x, dtype=float))
    x = np.asarray(x, dtype=float)
    if closure.name == "eqmom":
        if preset.eqmom_ic is None:
            raise UnknownPreset(f"preset '{preset.name}' has no eqmom initial data")
        return eqmom_forward(preset.eqmom_ic(x))
    if preset.hyqmom_ic is None:
        raise UnknownPreset(f"preset '{preset.name}' has no hyqmom initial data")
    # The preset's middle node is a free parameter of a raw three-delta
    # mixture here; the mean-velocity pinning applies only to inversion.
    return hyqmom_forward(preset.hyqmom_ic(x))


def init_state(preset: Preset, closure, n_cells: int) -> GridState:
    """Sample the preset's IC at cell centers and build a grid state."""
    if n_cells < 4:
        raise ValueError("need at least 4 cells")
    dx = (preset.x_hi - preset.x_lo) / n_cells
    x = preset.x_lo + (np.arange(n_cells) + 0.5) * dx
    M = initial_moments(preset, closure, x)
    ok = is_strictly_realizable(M, DEFAULT_REL_MARGIN)
    if not np.all(ok):
        i = int(np.argmax(~ok))
        raise NotRealizable(
            f"initial condition not strictly realizable at x = {x[i]:.6g}"
        )
    cells = np.empty((5, n_cells + 2 * NGHOST))
    cells[:, NGHOST:-NGHOST] = M
    cells[:, :NGHOST] = M[:, :1]
    cells[:, -NGHOST:] = M[:, -1:]
    return GridState(dx=dx, x_lo=preset.x_lo, cells=cells, time=0.0)


def preset_boundary(preset: Preset, closure) -> BoundaryConditions:
    """Boundary conditions for a preset, with inflow values from its IC."""
    if preset.bc_kind == "periodic":
        return BoundaryConditions.periodic()
    if preset.bc_kind == "outflow":
        return BoundaryConditions.outflow()
    left = initial_moments(preset, closure, np.array([preset.x_lo]))[:, 0]
    return BoundaryConditions.inflow_outflow(left)


def source_mode_for(preset: Preset, tau: float | None = None, kind: str | None = None) -> SourceMode:
    """Source mode for a preset run; tau defaults to the preset's first option.

    Finite tau defaults to the semi-implicit treatment, which inherits the
    collisionless CFL.
    """
    t = preset.tau_options[0] if tau is None else tau
    if kind is None:
        kind = "collisionless" if math.isinf(t) else "semi_implicit"
    if kind == "collisionless":
        return SourceMode.collisionless()
    if kind == "explicit":
        return SourceMode.explicit_bgk(t)
    return SourceMode.semi_implicit_bgk(t)


@dataclass(frozen=True)
class ErrorReport:
    """Per-moment discrete error norms between a solution and a reference.

    e1 is the mean absolute cell difference; e2 is sqrt(sum of squared
    differences) divided by the cell count (note the prefactor sits
    outside the square root).
    """

    e1: np.ndarray
    e2: np.ndarray


def error_norms(sol, ref) -> ErrorReport:
    """Discrete error norms of sol against ref, both of shape (5, n)."""
    sol = np.asarray(sol, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if sol.shape != ref.shape:
        raise LengthMismatch(f"shape mismatch: {sol.shape} vs {ref.shape}")
    n = sol.shape[-1]
    diff = sol - ref
    e1 = np.sum(np.abs(diff), axis=-1) / n
    e2 = np.sqrt(np.sum(diff * diff, axis=-1)) / n
    return ErrorReport(e1=e1, e2=e2)


def restrict_reference(fine, ratio: int) -> np.ndarray:
    """Block-average a fine solution onto a grid coarser by an integer ratio."""
    arr = fine.interior if isinstance(fine, GridState) else np.asarray(fine, dtype=float)
    n = arr.shape[-1]
    if ratio < 1 or n % ratio != 0:
        raise IndivisibleRatio(f"{n} fine cells do not tile blocks of {ratio}")
    coarse = arr.reshape(arr.shape[:-1] + (n // ratio, ratio))
    return coarse.mean(axis=-1)


@dataclass
class ConvergenceRow:
    nx: int
    e1: np.ndarray
    e2: np.ndarray
    rate1: np.ndarray | None = None
    rate2: np.ndarray | None = None


def convergence_study(
    preset: Preset,
    closure,
    resolutions: Sequence[int],
    ref_resolution: int,
    cfl: float = 0.5,
    tau: float | None = None,
    source_kind: str | None = None,
):
    """Self-convergence study against a fine-grid reference run.

    Solves the preset at each resolution and at ref_resolution, restricts
    the reference by block averaging, and reports e1/e2 per moment with
    rates log(e_coarse/e_fine) / log(nx_fine/nx_coarse) between successive
    rows.
    """
    resolutions = sorted(int(n) for n in resolutions)
    for nx in resolutions:
        if ref_resolution % nx != 0:
            raise IndivisibleRatio(f"reference {ref_resolution} not divisible by {nx}")
    mode = source_mode_for(preset, tau, source_kind)
    bc = preset_boundary(preset, closure)

    def solve(nx):
        state = init_state(preset, closure, nx)
        final, _ = evolve(state, closure, mode, bc, t_end=preset.end_time, cfl=cfl)
        return final

    ref = solve(ref_resolution)
    rows = []
    for nx in resolutions:
        sol = solve(nx)
        restricted = restrict_reference(ref, ref_resolution // nx)
        rep = error_norms(sol.interior, restricted)
        rows.append(ConvergenceRow(nx=nx, e1=rep.e1, e2=rep.e2))
    for prev, cur in zip(rows, rows[1:]):
        factor = math.log(cur.nx / prev.nx)
        with np.errstate(divide="ignore", invalid="ignore"):
            cur.rate1 = np.log(prev.e1 / cur.e1) / factor
            cur.rate2 = np.log(prev.e2 / cur.e2) / factor
    return rows
