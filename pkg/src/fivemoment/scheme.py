"""Realizability-preserving finite-volume scheme on a uniform 1D grid.

Pipeline per stage: fill ghost cells, reconstruct linear face values with
the van Albada limiter, scale slopes back toward the cell average until
both face states are strictly realizable, evaluate the HLL flux with
closure-specific signal speeds, then update with one of three source
treatments (none, explicit BGK with a realizability-radius time-step
restriction, or semi-implicit BGK under the collisionless CFL).  Every
accepted state passes a cheap Hankel-minor audit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .closures import WaveSpeedPair, flux_vector
from .errors import (
    CellAvgNotRealizable,
    NonpositiveTheta,
    NotRealizable,
    RealizabilityLost,
    ZeroDensity,
    ZeroSpread,
)
from .moments import leading_minors, maxwellian_moments, realizable_within

#: Ghost cells per side; two are needed for slopes at the outermost faces.
NGHOST = 2

#: van Albada regularization: epsilon = 3 * dx on both one-sided slopes.
SLOPE_EPS_FACTOR = 3.0

#: Face limiter bisection: tolerance on theta and iteration cap.
LIMITER_TOL = 1e-12
LIMITER_MAX_ITERS = 60

#: Post-update audit tolerance on the Hankel minors (relative).
AUDIT_TOL = 1e-10

#: Safety factor enforcing the strict inequality of the explicit-source
#: time-step bound.
EXPLICIT_SAFETY = 0.999

_MAX_DT_RETRIES = 8


# ---------------------------------------------------------------------------
# Grid and configuration types


@dataclass
class GridState:
    """Cell-averaged moments on a uniform grid with two ghost cells per side.

    cells has shape (5, n_cells + 2*NGHOST); ghost columns are scratch
    storage refreshed from the boundary conditions before every stage.
    """

    dx: float
    x_lo: float
    cells: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=float)
        if self.dx <= 0.0:
            raise ValueError("dx must be positive")
        if self.cells.shape[0] != 5 or self.cells.shape[1] < 4 + 2 * NGHOST:
            raise ValueError("cells must have shape (5, n) with n_cells >= 4")

    @property
    def n_cells(self) -> int:
        return self.cells.shape[1] - 2 * NGHOST

    @property
    def interior(self) -> np.ndarray:
        return self.cells[:, NGHOST:-NGHOST]

    def centers(self) -> np.ndarray:
        return self.x_lo + (np.arange(self.n_cells) + 0.5) * self.dx

    def copy(self) -> "GridState":
        return GridState(dx=self.dx, x_lo=self.x_lo, cells=self.cells.copy(), time=self.time)


@dataclass(frozen=True)
class BoundarySpec:
    """One side of the domain: periodic, outflow, or fixed inflow moments."""

    kind: str
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("periodic", "outflow", "inflow"):
            raise ValueError(f"unknown boundary kind '{self.kind}'")
        if self.kind == "inflow":
            v = np.asarray(self.values, dtype=float)
            if v.shape != (5,):
                raise ValueError("inflow boundary needs a 5-vector of moments")
            object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class BoundaryConditions:
    left: BoundarySpec
    right: BoundarySpec

    def __post_init__(self):
        if (self.left.kind == "periodic") != (self.right.kind == "periodic"):
            raise ValueError("periodic boundaries must be used on both sides")

    @classmethod
    def periodic(cls):
        return cls(BoundarySpec("periodic"), BoundarySpec("periodic"))

    @classmethod
    def outflow(cls):
        return cls(BoundarySpec("outflow"), BoundarySpec("outflow"))

    @classmethod
    def inflow_outflow(cls, left_values):
        return cls(BoundarySpec("inflow", left_values), BoundarySpec("outflow"))


@dataclass(frozen=True)
class SourceMode:
    """Collision treatment: none, explicit BGK, or semi-implicit BGK.

    maxwellian_eval selects where the semi-implicit equilibrium moments
    are taken: "post" uses the post-convection state, which makes the
    relaxation conserve M0..M2 exactly; "level_n" uses the pre-step cell
    averages.
    """

    kind: str
    tau: float = math.inf
    maxwellian_eval: str = "post"

    def __post_init__(self):
        if self.kind not in ("collisionless", "explicit", "semi_implicit"):
            raise ValueError(f"unknown source mode '{self.kind}'")
        if (self.kind == "collisionless") != math.isinf(self.tau):
            raise ValueError("collisionless mode requires tau = inf and vice versa")
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")
        if self.maxwellian_eval not in ("post", "level_n"):
            raise ValueError("maxwellian_eval must be 'post' or 'level_n'")

    @classmethod
    def collisionless(cls):
        return cls("collisionless", math.inf)

    @classmethod
    def explicit_bgk(cls, tau: float):
        return cls("explicit", tau)

    @classmethod
    def semi_implicit_bgk(cls, tau: float, maxwellian_eval: str = "post"):
        return cls("semi_implicit", tau, maxwellian_eval)


@dataclass
class FaceStates:
    """Per-interface reconstructed states and combined signal speeds."""

    minus: np.ndarray
    plus: np.ndarray
    speed_minus: np.ndarray
    speed_plus: np.ndarray


# ---------------------------------------------------------------------------
# Boundary conditions and reconstruction


def apply_bc(state: GridState, bc: BoundaryConditions) -> None:
    """Fill both ghost layers in place."""
    c = state.cells
    n = state.n_cells
    if bc.left.kind == "periodic":
        c[:, :NGHOST] = c[:, n : n + NGHOST]
        c[:, n + NGHOST :] = c[:, NGHOST : 2 * NGHOST]
        return
    if bc.left.kind == "outflow":
        c[:, :NGHOST] = c[:, NGHOST : NGHOST + 1]
    else:
        c[:, :NGHOST] = bc.left.values[:, None]
    if bc.right.kind == "outflow":
        c[:, n + NGHOST :] = c[:, n + NGHOST - 1 : n + NGHOST]
    else:
        c[:, n + NGHOST :] = bc.right.values[:, None]


def van_albada_slope(left, center, right, dx: float) -> np.ndarray:
    """Componentwise van Albada slope from three consecutive cell averages.

    Uses the one-sided divided differences dl, dr and the smooth blend
    ((dr^2 + eps) dl + (dl^2 + eps) dr) / (dl^2 + dr^2 + 2 eps) with
    eps = 3 * dx.  Equal one-sided slopes pass through unchanged; opposite
    slopes cancel exactly.
    """
    left = np.asarray(left, dtype=float)
    center = np.asarray(center, dtype=float)
    right = np.asarray(right, dtype=float)
    dl = (center - left) / dx
    dr = (right - center) / dx
    eps = SLOPE_EPS_FACTOR * dx
    num = (dr * dr + eps) * dl + (dl * dl + eps) * dr
    den = dl * dl + dr * dr + 2.0 * eps
    return num / den


def reconstruct_faces(state: GridState):
    """Linear face values for every cell with at least one neighbor layer.

    Returns (face_lo, face_hi, avg) of shape (5, n_cells + 2): face_lo is
    the value at the cell's left face, face_hi at its right face, avg the
    cell average.  The identity avg = (face_lo + face_hi) / 2 holds
    exactly.  Ghost cells must be filled beforehand.
    """
    c = state.cells
    slope = van_albada_slope(c[:, :-2], c[:, 1:-1], c[:, 2:], state.dx)
    half = 0.5 * state.dx * slope
    avg = c[:, 1:-1]
    return avg - half, avg + half, avg


# ---------------------------------------------------------------------------
# Realizability limiter


def _margin_values(M):
    """(m0, e, z) with safe divisions; garbage values where m0 <= 0."""
    m0 = M[0]
    safe = np.where(m0 > 0.0, m0, 1.0)
    u = M[1] / safe
    m2 = M[2] / safe
    m3 = M[3] / safe
    m4 = M[4] / safe
    e = m2 - u * u
    q = m3 - u * (3.0 * m2 - 2.0 * u * u)
    eta = m4 - u * (4.0 * m3 - u * (6.0 * m2 - 3.0 * u * u))
    pos = e > 0.0
    z = np.where(pos, eta - e * e - q * q / np.where(pos, e, 1.0), -np.inf)
    return m0, e, z


def _strictly_ok(M):
    """Strict interior test with zero extra margin (m0, e, z > 0)."""
    m0, e, z = _margin_values(M)
    return (m0 > 0.0) & (e > 0.0) & (z > 0.0)


def realizability_limit(face_minus, face_plus, cell_avg):
    """Scale face deviations toward the cell average until both faces are
    strictly realizable.

    Returns (theta, limited_minus, limited_plus) where theta in [0, 1] is
    the per-cell scaling factor: theta = 1 when the raw faces already lie
    in the interior, otherwise the largest admissible value found by
    bisection (tolerance 1e-12, at most 60 iterations), taken as the
    minimum over the two faces.  Cell averages must themselves be
    realizable; averages on the boundary of the moment set get theta = 0.
    """
    face_minus = np.asarray(face_minus, dtype=float)
    face_plus = np.asarray(face_plus, dtype=float)
    cell_avg = np.asarray(cell_avg, dtype=float)

    avg_ok = _strictly_ok(cell_avg)
    if not np.all(avg_ok):
        tolerable = realizable_within(cell_avg, AUDIT_TOL)
        if not np.all(tolerable):
            i = int(np.argmax(np.atleast_1d(~tolerable)))
            col = cell_avg if cell_avg.ndim == 1 else cell_avg[:, i]
            raise CellAvgNotRealizable(
                f"cell average outside the moment set at index {i}: M = {col.tolist()}"
            )

    d_minus = face_minus - cell_avg
    d_plus = face_plus - cell_avg
    theta = np.ones(cell_avg.shape[1:], dtype=float)

    ok_now = _strictly_ok(face_minus) & _strictly_ok(face_plus)
    need = ~ok_now & avg_ok
    theta = np.where(avg_ok, theta, 0.0)

    if np.any(need):
        idx = np.nonzero(need)[0] if theta.ndim else None
        if idx is None:
            theta_val = _bisect_theta(
                cell_avg[:, None], d_minus[:, None], d_plus[:, None]
            )[0]
            theta = np.asarray(theta_val)
        else:
            theta_sub = _bisect_theta(
                cell_avg[:, idx], d_minus[:, idx], d_plus[:, idx]
            )
            theta[idx] = theta_sub

    lim_minus = cell_avg + theta * d_minus
    lim_plus = cell_avg + theta * d_plus

    # One downward nudge if rounding pushed a limited face back out.
    redo = ~(_strictly_ok(lim_minus) & _strictly_ok(lim_plus)) & (theta > 0.0)
    if np.any(redo):
        theta = np.where(redo, np.maximum(theta - LIMITER_TOL, 0.0), theta)
        lim_minus = cell_avg + theta * d_minus
        lim_plus = cell_avg + theta * d_plus
    return theta, lim_minus, lim_plus


def _bisect_theta(avg, d_minus, d_plus):
    """Largest theta in [0, 1] keeping both faces strictly realizable.

    The admissible set is an interval [0, theta_max) by convexity of the
    moment space, so a single bisection against the joint predicate finds
    min(theta-, theta+).  The returned value always satisfies the
    predicate (lo starts at 0, which reproduces the cell average).
    """
    lo = np.zeros(avg.shape[1], dtype=float)
    hi = np.ones(avg.shape[1], dtype=float)
    for _ in range(LIMITER_MAX_ITERS):
        if np.max(hi - lo) <= LIMITER_TOL:
            break
        mid = 0.5 * (lo + hi)
        ok = _strictly_ok(avg + mid * d_minus) & _strictly_ok(avg + mid * d_plus)
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return lo


# ---------------------------------------------------------------------------
# Fluxes and sources


def hll_flux(M_minus, M_plus, closure):
    """HLL flux between reconstructed interface states.

    The interface signal speeds are the outer hull of the per-side bounds;
    the flux is (d+ F(M-) - d- F(M+) + d+ d- (M+ - M-)) / (d+ - d-), which
    reduces to pure upwinding when all speeds have one sign.  Returns
    (flux, WaveSpeedPair) with the speeds also used for the CFL bound.
    """
    M_minus = np.asarray(M_minus, dtype=float)
    M_plus = np.asarray(M_plus, dtype=float)
    Wm = closure.invert(M_minus)
    Wp = closure.invert(M_plus)
    Mm = closure.consistent_moments(Wm, M_minus)
    Mp = closure.consistent_moments(Wp, M_plus)
    sm = closure.wave_speeds(Wm)
    sp = closure.wave_speeds(Wp)
    plus = np.maximum(sm.plus, sp.plus)
    minus = np.minimum(sm.minus, sp.minus)
    Fm = flux_vector(closure, Mm, Wm)
    Fp = flux_vector(closure, Mp, Wp)
    spread = plus - minus
    flux = (plus * Fm - minus * Fp + (plus * minus) * (Mp - Mm)) / spread
    return flux, WaveSpeedPair(minus=minus, plus=plus)


def bgk_source(M, tau: float) -> np.ndarray:
    """BGK relaxation source (0, 0, 0, (rho*D3 - M3)/tau, (rho*D4 - M4)/tau).

    D3 and D4 are the Maxwellian moments at the state's own density, mean
    velocity and temperature, so the first three components vanish
    identically.  tau = inf returns the zero vector.
    """
    M = np.asarray(M, dtype=float)
    S = np.zeros_like(M)
    if math.isinf(tau):
        return S
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    rho = M[0]
    if np.any(rho <= 0.0):
        raise ZeroDensity("BGK source needs positive density")
    u = M[1] / rho
    theta = M[2] / rho - u * u
    if np.any(theta <= 0.0):
        raise NonpositiveTheta("BGK source needs positive temperature")
    eq = maxwellian_moments(rho, u, theta)
    S[3] = (eq[3] - M[3]) / tau
    S[4] = (eq[4] - M[4]) / tau
    return S


def mu_star(M, S):
    """Largest step mu keeping M + mu*S realizable (the realizability radius).

    With S supported on the last two components, the variance margin of
    M + mu*S is constant and the determinant margin is the quadratic
    a0 mu^2 + a1 mu + a2 with a0 = -M0 S3^2 <= 0, a2 = det H(M) > 0.  The
    radius is the unique positive root, -a2/a1 when a0 = 0 and a1 < 0,
    and +inf when the source cannot reach the boundary.
    """
    M = np.asarray(M, dtype=float)
    S = np.asarray(S, dtype=float)
    m0, m1, m2, m3, _ = M
    s3, s4 = S[3], S[4]
    d1, d2, a2 = leading_minors(M)
    good = (d1 > 0.0) & (d2 > 0.0) & (a2 > 0.0)
    if not np.all(good):
        raise NotRealizable("realizability radius needs a strictly realizable state")
    a0 = -m0 * s3 * s3
    a1 = 2.0 * s3 * (m1 * m2 - m0 * m3) + s4 * d2
    quad = a0 < 0.0
    disc = np.sqrt(a1 * a1 - 4.0 * a0 * a2)
    safe_a0 = np.where(quad, a0, -1.0)
    # Pick the cancellation-free form of the positive quadratic root.
    root_q = np.where(
        a1 >= 0.0,
        (a1 + disc) / (-2.0 * safe_a0),
        2.0 * a2 / np.where(disc - a1 > 0.0, disc - a1, 1.0),
    )
    safe_a1 = np.where(a1 < 0.0, a1, -1.0)
    root_l = np.where(a1 < 0.0, -a2 / safe_a1, np.inf)
    return np.where(quad, root_q, root_l)


def cfl_dt(faces: FaceStates, dx: float, mode: SourceMode, cfl: float, mu_min: float = math.inf) -> float:
    """Admissible time step for the current face states.

    Collisionless and semi-implicit modes use dt = cfl * dx / max spread.
    The explicit mode couples the convective spread with the smallest
    realizability radius, dt = safety * cfl / (max_spread/dx + 1/mu_min),
    with a 0.999 safety factor enforcing the strict inequality.
    """
    if not 0.0 < cfl <= 0.5:
        raise ValueError("cfl must lie in (0, 0.5]")
    spread = float(np.max(faces.speed_plus - faces.speed_minus))
    if spread <= 0.0:
        raise ZeroSpread("interface signal speeds have zero spread")
    if mode.kind == "explicit":
        denom = spread / dx + (0.0 if math.isinf(mu_min) else 1.0 / mu_min)
        return EXPLICIT_SAFETY * cfl / denom
    return cfl * dx / spread


# ---------------------------------------------------------------------------
# Stage assembly and time stepping


@dataclass
class _Stage:
    faces: FaceStates
    flux: np.ndarray
    theta: np.ndarray
    src_lo: np.ndarray | None = None
    src_hi: np.ndarray | None = None
    mu_min: float = math.inf


def prepare_stage(state: GridState, closure, mode: SourceMode, bc: BoundaryConditions) -> _Stage:
    """Fill ghosts, reconstruct, limit, and evaluate fluxes for one stage."""
    apply_bc(state, bc)
    lo, hi, avg = reconstruct_faces(state)
    theta, lo, hi = realizability_limit(lo, hi, avg)
    minus = hi[:, :-1]
    plus = lo[:, 1:]
    flux, speeds = hll_flux(minus, plus, closure)
    faces = FaceStates(minus=minus, plus=plus, speed_minus=speeds.minus, speed_plus=speeds.plus)
    stage = _Stage(faces=faces, flux=flux, theta=theta)
    if mode.kind == "explicit":
        in_lo = lo[:, 1:-1]
        in_hi = hi[:, 1:-1]
        stage.src_lo = bgk_source(in_lo, mode.tau)
        stage.src_hi = bgk_source(in_hi, mode.tau)
        mu = np.minimum(mu_star(in_lo, stage.src_lo), mu_star(in_hi, stage.src_hi))
        stage.mu_min = float(np.min(mu))
    return stage


def _audit(state: GridState):
    """Verify every interior cell stayed realizable; return margin minima."""
    inner = state.interior
    ok = realizable_within(inner, AUDIT_TOL)
    if not np.all(ok):
        i = int(np.argmax(~ok))
        d1, d2, d3 = leading_minors(inner[:, i])
        raise RealizabilityLost(
            f"cell {i} at t = {state.time:.6g} left the moment set: "
            f"M = {inner[:, i].tolist()}, minors = ({d1:.3e}, {d2:.3e}, {d3:.3e})"
        )
    m0, e, z = _margin_values(inner)
    return float(np.min(m0)), float(np.min(e)), float(np.min(z))


def _apply_stage(state: GridState, stage: _Stage, dt: float, mode: SourceMode) -> GridState:
    lam = dt / state.dx
    inner = state.interior
    new = inner - lam * (stage.flux[:, 1:] - stage.flux[:, :-1])
    if mode.kind == "explicit":
        new = new + (0.5 * dt) * (stage.src_lo + stage.src_hi)
    elif mode.kind == "semi_implicit":
        lam_t = dt / mode.tau
        base = new if mode.maxwellian_eval == "post" else inner
        rho = base[0]
        if np.any(rho <= 0.0):
            i = int(np.argmax(rho <= 0.0))
            raise RealizabilityLost(
                f"nonpositive density {rho[i]:.6g} in cell {i} before relaxation"
            )
        u = base[1] / rho
        theta = np.maximum(base[2] / rho - u * u, 0.0)
        eq = maxwellian_moments(rho, u, theta)
        new = (new + lam_t * eq) / (1.0 + lam_t)
    cells = state.cells.copy()
    cells[:, NGHOST:-NGHOST] = new
    out = GridState(dx=state.dx, x_lo=state.x_lo, cells=cells, time=state.time + dt)
    _audit(out)
    return out


def forward_euler_step(state: GridState, dt: float, closure, mode: SourceMode, bc: BoundaryConditions) -> GridState:
    """One forward Euler update; dt must satisfy the applicable CFL bound."""
    stage = prepare_stage(state, closure, mode, bc)
    return _apply_stage(state, stage, dt, mode)


def ssp_rk2_step(state: GridState, dt: float, closure, mode: SourceMode, bc: BoundaryConditions) -> GridState:
    """Heun step: the average of the input state and two chained Euler steps.

    Realizability carries over from the Euler stages by convexity of the
    moment set.
    """
    s1 = forward_euler_step(state, dt, closure, mode, bc)
    s2 = forward_euler_step(s1, dt, closure, mode, bc)
    cells = 0.5 * (state.cells + s2.cells)
    out = GridState(dx=state.dx, x_lo=state.x_lo, cells=cells, time=state.time + dt)
    _audit(out)
    return out


def euler_step_at_cfl(state: GridState, closure, mode: SourceMode, bc: BoundaryConditions, cfl: float = 0.5):
    """One Euler step with dt taken exactly at the CFL bound; returns (state, dt)."""
    stage = prepare_stage(state, closure, mode, bc)
    dt = cfl_dt(stage.faces, state.dx, mode, cfl, stage.mu_min)
    return _apply_stage(state, stage, dt, mode), dt


@dataclass
class StepRecord:
    step: int
    time: float
    dt: float
    theta_min: float
    n_limited: int
    min_m0: float
    min_e: float
    min_z: float


@dataclass
class RunStats:
    records: list = field(default_factory=list)

    def append(self, rec: StepRecord):
        self.records.append(rec)

    @property
    def n_steps(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def evolve(
    state: GridState,
    closure,
    mode: SourceMode,
    bc: BoundaryConditions,
    t_end: float | None = None,
    cfl: float = 0.5,
    max_steps: int | None = None,
    on_step=None,
):
    """March the state with SSP-RK2 until t_end or for max_steps steps.

    The time step is recomputed from each stage's own face speeds and the
    step uses the minimum over stages: if the second stage demands a
    smaller dt than the first allowed, the step is redone at the smaller
    value.  Returns (final_state, RunStats).
    """
    if t_end is None and max_steps is None:
        raise ValueError("need t_end or max_steps")
    stats = RunStats()
    step = 0
    t_tol = 1e-12 * max(1.0, abs(t_end)) if t_end is not None else 0.0
    while True:
        if t_end is not None and state.time >= t_end - t_tol:
            break
        if max_steps is not None and step >= max_steps:
            break
        st1 = prepare_stage(state, closure, mode, bc)
        dt = cfl_dt(st1.faces, state.dx, mode, cfl, st1.mu_min)
        if t_end is not None:
            dt = min(dt, t_end - state.time)
        mid = None
        st2 = None
        for _ in range(_MAX_DT_RETRIES):
            mid = _apply_stage(state, st1, dt, mode)
            st2 = prepare_stage(mid, closure, mode, bc)
            dt2 = cfl_dt(st2.faces, state.dx, mode, cfl, st2.mu_min)
            if dt <= dt2 * (1.0 + 1e-12):
                break
            dt = min(dt2, t_end - state.time) if t_end is not None else dt2
        fin = _apply_stage(mid, st2, dt, mode)
        cells = 0.5 * (state.cells + fin.cells)
        state = GridState(dx=state.dx, x_lo=state.x_lo, cells=cells, time=state.time + dt)
        min_m0, min_e, min_z = _audit(state)
        theta_min = float(min(np.min(st1.theta), np.min(st2.theta)))
        n_limited = int(np.sum(st1.theta < 1.0) + np.sum(st2.theta < 1.0))
        step += 1
        rec = StepRecord(
            step=step,
            time=state.time,
            dt=dt,
            theta_min=theta_min,
            n_limited=n_limited,
            min_m0=min_m0,
            min_e=min_e,
            min_z=min_z,
        )
        stats.append(rec)
        if on_step is not None:
            on_step(state, rec)
    return state, stats
