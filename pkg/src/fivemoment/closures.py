"""Moment inversion, fifth-moment closure, and signal-speed bounds.

Two closures are provided for the five-moment system.  The Gaussian
closure (EQMOM) represents the distribution as two Gaussians with a common
standard deviation; inversion requires a bracketed root solve for the
shared variance.  The three-point closure (HyQMOM) uses three Dirac nodes
with the middle node pinned at the mean velocity and inverts in closed
form.  All functions accept moment arrays of shape (5,) or (5, n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ExcludedSet, InvalidA, NotRealizable, RootFindFailure
from .moments import margins

Scalars = Union[float, np.ndarray]

#: Default wave-speed constant for the Gaussian closure; any value above
#: sqrt(3) keeps the shifted flux states inside the moment space.
DEFAULT_WAVE_CONST = 2.0

_SQRT3 = math.sqrt(3.0)

# Standardized skewness below which a state is treated as symmetric, and
# the kurtosis excess past the Gaussian value 3 that is still projected
# onto the single-Gaussian limit instead of failing.  Scheme updates leave
# small super-Gaussian residue (observed ~1e-3) at the edge of numerical
# fans where the skewness vanishes; such states have no usable two-node
# representation and any Gaussian-mixture code must absorb them.
_SYMMETRY_TOL = 1e-10
_EXCESS_TOL = 5e-2

# Node-offset cap: a two-node solution whose mean-relative node offset
# zeta exceeds this many standard deviations is numerically degenerate
# (weight ~ 1/zeta'^2, signal speeds ~ zeta'); it is projected like the
# symmetric case.  Physical states keep zeta' below ~separation/sigma.
_NODE_OFFSET_CAP = 100.0

_ROOT_BISECTIONS = 48
_ROOT_NEWTON_STEPS = 2

# Delta-skeleton variance below this fraction of e collapses both nodes
# onto the mean (single-Gaussian limit).
_COLLAPSE_REL = 1e-14

# HyQMOM: variance threshold for the single-node limit, relative slack on
# the realizability inequality eta' >= 1 + q'^2.
_DEGENERATE_REL = 1e-14
_HYQ_REALIZABILITY_TOL = 1e-10

# Widening applied when all three delta nodes sit exactly at v = 0, so the
# flux denominator delta+ - delta- stays positive.
_ZERO_SPREAD_WIDEN = 1e-12


@dataclass(frozen=True)
class EqmomParams:
    """Primitive variables of the two-node Gaussian closure."""

    rho1: Scalars
    v1: Scalars
    rho2: Scalars
    v2: Scalars
    sigma: Scalars


@dataclass(frozen=True)
class HyqmomParams:
    """Primitive variables of the three-point closure."""

    rho1: Scalars
    rho2: Scalars
    rho3: Scalars
    v1: Scalars
    v2: Scalars
    v3: Scalars


@dataclass(frozen=True)
class WaveSpeedPair:
    """Signal speed bounds with minus <= 0 <= plus and minus < plus."""

    minus: Scalars
    plus: Scalars


def _as_batch(M):
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        return M[:, None], True
    return M, False


def _maybe_scalar(values, scalar):
    if scalar:
        return tuple(float(np.asarray(v).reshape(())) for v in values)
    return values


# ---------------------------------------------------------------------------
# Gaussian (EQMOM) closure


def eqmom_forward(W: EqmomParams) -> np.ndarray:
    """Moments of a two-node shared-sigma Gaussian mixture."""
    r1 = np.asarray(W.rho1, dtype=float)
    r2 = np.asarray(W.rho2, dtype=float)
    v1 = np.asarray(W.v1, dtype=float)
    v2 = np.asarray(W.v2, dtype=float)
    s2 = np.asarray(W.sigma, dtype=float) ** 2
    m0 = r1 + r2
    m1 = r1 * v1 + r2 * v2
    m2 = r1 * v1 ** 2 + r2 * v2 ** 2 + s2 * m0
    m3 = r1 * v1 ** 3 + r2 * v2 ** 3 + 3.0 * s2 * m1
    m4 = r1 * v1 ** 4 + r2 * v2 ** 4 + 6.0 * s2 * m2 - 3.0 * s2 * s2 * m0
    return np.stack(np.broadcast_arrays(m0, m1, m2, m3, m4))


def eqmom_m5(W: EqmomParams, M) -> Scalars:
    """Closure value for the unresolved fifth moment of the Gaussian mixture.

    Equals rho1*v1^5 + rho2*v2^5 + 10*M3*sigma^2 - 15*sigma^4*M1, which is
    the exact fifth moment of the mixture (the sigma^4 power follows from
    the Gaussian moment recurrence).
    """
    M = np.asarray(M, dtype=float)
    s2 = np.asarray(W.sigma, dtype=float) ** 2
    return (
        np.asarray(W.rho1, dtype=float) * np.asarray(W.v1, dtype=float) ** 5
        + np.asarray(W.rho2, dtype=float) * np.asarray(W.v2, dtype=float) ** 5
        + 10.0 * s2 * M[3]
        - 15.0 * s2 * s2 * M[1]
    )


def _variance_cubic(s, e, eta, ez):
    # G(s) = -2 s^3 + 6 e s^2 - (3 e^2 + eta) s + e*z, expanded so that a
    # two-atom skeleton with variance e - s matches the deconvolved fourth
    # moment exactly when G(s) = 0.
    return ((-2.0 * s + 6.0 * e) * s - (3.0 * e * e + eta)) * s + ez


def _variance_cubic_deriv(s, e, eta):
    return (-6.0 * s + 12.0 * e) * s - (3.0 * e * e + eta)


def _smallest_variance_root(e, eta, ez):
    """Smallest root of the variance cubic on (0, e].

    G(0) = e*z > 0 and G is monotone decreasing up to its first critical
    point (which exists only for eta < 3 e^2), so bracketing the interval
    up to that point isolates the first downward crossing: the smallest
    root.  For eta >= 3 e^2 the cubic is globally decreasing and the root
    is unique on (0, e].
    """
    crit = 3.0 * e * e - eta
    hi = np.where(crit > 0.0, e - np.sqrt(np.maximum(crit, 0.0) / 6.0), e)
    g_hi = _variance_cubic(hi, e, eta, ez)
    widen = g_hi > 0.0
    if np.any(widen):
        hi = np.where(widen, e, hi)
        g_hi = np.where(widen, _variance_cubic(hi, e, eta, ez), g_hi)
    # A residual positive value means the q^2 term sits below rounding
    # noise; the root is then indistinguishable from s = hi.
    settled = g_hi > 0.0

    lo = np.zeros_like(e)
    hi_b = hi.copy() if isinstance(hi, np.ndarray) else np.asarray(hi, dtype=float)
    for _ in range(_ROOT_BISECTIONS):
        mid = 0.5 * (lo + hi_b)
        pos = _variance_cubic(mid, e, eta, ez) > 0.0
        lo = np.where(pos, mid, lo)
        hi_b = np.where(pos, hi_b, mid)
    s = 0.5 * (lo + hi_b)
    for _ in range(_ROOT_NEWTON_STEPS):
        g = _variance_cubic(s, e, eta, ez)
        dg = _variance_cubic_deriv(s, e, eta)
        step = np.where(dg != 0.0, g / np.where(dg != 0.0, dg, 1.0), 0.0)
        cand = s - step
        inside = (cand >= lo) & (cand <= hi_b)
        s = np.where(inside, cand, s)
    s = np.where(settled, hi, s)
    if not np.all(np.isfinite(s)):
        raise RootFindFailure("variance root search produced non-finite values")
    return s


def eqmom_invert(M) -> EqmomParams:
    """Recover two-node Gaussian parameters from a strictly realizable M.

    The shared variance is the smallest root of a cubic bracketed on
    (0, e]; the remaining two-node quadrature is closed form.  States with
    vanishing skewness are symmetric: their variance root is analytic and
    the nodes split symmetrically about the mean (collapsing onto it in
    the single-Gaussian limit).  Zero skewness combined with kurtosis
    above the Gaussian value has no two-node representation and raises
    ExcludedSet.
    """
    M_arr, scalar = _as_batch(M)
    mg = margins(M_arr)
    m0, e, q, eta = mg.m0, mg.e, mg.q, mg.eta
    ez = e * eta - e ** 3 - q * q  # equals e*z without the sentinel
    bad = ~((m0 > 0.0) & (e > 0.0) & (ez > 0.0))
    if np.any(bad):
        i = int(np.argmax(bad))
        raise NotRealizable(
            f"moment vector not strictly realizable at index {i}: "
            f"m0={m0[i]:.6g}, e={e[i]:.6g}, e*z={ez[i]:.6g}"
        )

    u = M_arr[1] / m0
    std_skew = q / (e * np.sqrt(e))
    std_kurt = eta / (e * e)

    s_gen = _smallest_variance_root(e, eta, ez)
    c2_gen = np.maximum(e - s_gen, 0.0)
    zeta_gen = q / np.where(c2_gen > 0.0, 2.0 * c2_gen, 1.0)
    extreme = (c2_gen <= 0.0) | (zeta_gen * zeta_gen > _NODE_OFFSET_CAP ** 2 * e)
    symmetric = (np.abs(std_skew) <= _SYMMETRY_TOL) | extreme
    excluded = symmetric & (std_kurt > 3.0 + _EXCESS_TOL)
    if np.any(excluded):
        i = int(np.argmax(excluded))
        raise ExcludedSet(
            f"no two-node Gaussian representation at index {i}: "
            f"skewness {std_skew[i]:.3g} with standardized kurtosis "
            f"{std_kurt[i]:.6g} > 3"
        )

    s_sym = e - np.sqrt(np.maximum(3.0 * e * e - eta, 0.0) / 2.0)
    s = np.where(symmetric, s_sym, s_gen)
    s = np.clip(s, 0.0, e)

    c2 = e - s  # variance of the two-atom skeleton
    collapse = c2 <= _COLLAPSE_REL * e
    c2 = np.where(collapse, 0.0, c2)
    zeta = np.where(
        symmetric | collapse, 0.0, q / np.where(c2 > 0.0, 2.0 * c2, 1.0)
    )
    r = np.sqrt(zeta * zeta + c2)
    r_safe = np.where(r > 0.0, r, 1.0)
    rho1 = np.where(collapse, 0.5 * m0, m0 * (zeta + r) / (2.0 * r_safe))
    rho2 = np.where(collapse, 0.5 * m0, m0 * (r - zeta) / (2.0 * r_safe))
    v1 = np.where(collapse, u, u + zeta - r)
    v2 = np.where(collapse, u, u + zeta + r)
    sigma = np.sqrt(s)

    rho1, v1, rho2, v2, sigma = _maybe_scalar((rho1, v1, rho2, v2, sigma), scalar)
    return EqmomParams(rho1=rho1, v1=v1, rho2=rho2, v2=v2, sigma=sigma)


def eqmom_wave_speeds(W: EqmomParams, a: float = DEFAULT_WAVE_CONST) -> WaveSpeedPair:
    """Signal speed bounds max{v_i + a*sigma, 0} and min{v_i - a*sigma, 0}."""
    _check_wave_const(a)
    v1 = np.asarray(W.v1, dtype=float)
    v2 = np.asarray(W.v2, dtype=float)
    reach = a * np.asarray(W.sigma, dtype=float)
    plus = np.maximum(np.maximum(v1, v2) + reach, 0.0)
    minus = np.minimum(np.minimum(v1, v2) - reach, 0.0)
    return WaveSpeedPair(minus=minus, plus=plus)


def _check_wave_const(a: float) -> None:
    if not a > _SQRT3:
        raise InvalidA(f"wave-speed constant a = {a} must exceed sqrt(3)")


# ---------------------------------------------------------------------------
# Three-point (HyQMOM) closure


def hyqmom_forward(W: HyqmomParams) -> np.ndarray:
    """Moments of a three-node Dirac mixture: sum_i rho_i * (1, v_i, ..., v_i^4)."""
    rho = [np.asarray(r, dtype=float) for r in (W.rho1, W.rho2, W.rho3)]
    v = [np.asarray(x, dtype=float) for x in (W.v1, W.v2, W.v3)]
    rows = []
    for k in range(5):
        rows.append(sum(r * x ** k for r, x in zip(rho, v)))
    return np.stack(np.broadcast_arrays(*rows))


def hyqmom_m5(W: HyqmomParams) -> Scalars:
    """Closure value for the fifth moment: sum_i rho_i * v_i^5."""
    total = 0.0
    for r, x in zip((W.rho1, W.rho2, W.rho3), (W.v1, W.v2, W.v3)):
        total = total + np.asarray(r, dtype=float) * np.asarray(x, dtype=float) ** 5
    return total


def hyqmom_invert(M) -> HyqmomParams:
    """Closed-form three-node inversion with the middle node at the mean.

    In standardized variables the outer abscissas are the roots of
    x^2 - q'x + (q'^2 - eta') with q' and eta' the standardized third and
    fourth central moments; the middle weight is 1 - 1/(eta' - q'^2).
    States with vanishing variance return all mass on a single node at the
    mean velocity.
    """
    M_arr, scalar = _as_batch(M)
    mg = margins(M_arr)
    m0, c2, c3, c4 = mg.m0, mg.e, mg.q, mg.eta
    if np.any(~(m0 > 0.0)):
        i = int(np.argmax(~(m0 > 0.0)))
        raise NotRealizable(f"m0 must be positive, got {m0[i]:.6g} at index {i}")
    u = M_arr[1] / m0

    degenerate = c2 <= _DEGENERATE_REL * (1.0 + u * u)
    c2s = np.where(degenerate, 1.0, c2)
    if np.any(~degenerate & (c2 <= 0.0)):
        i = int(np.argmax(~degenerate & (c2 <= 0.0)))
        raise NotRealizable(f"negative variance {c2[i]:.6g} at index {i}")
    sq = np.sqrt(c2s)
    qs = c3 / (c2s * sq)
    es = c4 / (c2s * c2s)
    slack = es - qs * qs - 1.0  # standardized z; >= 0 for realizable states
    bad = ~degenerate & (slack < -_HYQ_REALIZABILITY_TOL * (1.0 + np.abs(es)))
    if np.any(bad):
        i = int(np.argmax(bad))
        raise NotRealizable(
            f"kurtosis below realizable bound at index {i}: "
            f"eta'={es[i]:.6g} < 1 + q'^2 = {1.0 + qs[i] ** 2:.6g}"
        )

    span = np.sqrt(np.maximum(4.0 * es - 3.0 * qs * qs, 0.0))
    x1 = 0.5 * (qs - span)
    x3 = 0.5 * (qs + span)
    d1 = np.where(degenerate, 1.0, span * (-x1))
    d3 = np.where(degenerate, 1.0, span * x3)
    w1 = np.where(degenerate, 0.0, 1.0 / d1)
    w3 = np.where(degenerate, 0.0, 1.0 / d3)
    w2 = np.where(degenerate, 1.0, 1.0 - w1 - w3)
    w2 = np.maximum(w2, 0.0)  # clip rounding residue at the two-atom boundary

    rho1 = m0 * w1
    rho2 = m0 * w2
    rho3 = m0 * w3
    v1 = np.where(degenerate, u, u + x1 * sq)
    v2 = u
    v3 = np.where(degenerate, u, u + x3 * sq)

    rho1, rho2, rho3, v1, v2, v3 = _maybe_scalar(
        (rho1, rho2, rho3, v1, v2, v3), scalar
    )
    return HyqmomParams(rho1=rho1, rho2=rho2, rho3=rho3, v1=v1, v2=v2, v3=v3)


def hyqmom_wave_speeds(W: HyqmomParams) -> WaveSpeedPair:
    """Signal speed bounds max{v_i, 0} and min{v_i, 0} over the three nodes.

    If all nodes sit exactly at v = 0 the pair is widened to +-1e-12 so
    the flux denominator plus - minus never vanishes.
    """
    v1 = np.asarray(W.v1, dtype=float)
    v2 = np.asarray(W.v2, dtype=float)
    v3 = np.asarray(W.v3, dtype=float)
    vmax = np.maximum(np.maximum(v1, v2), v3)
    vmin = np.minimum(np.minimum(v1, v2), v3)
    plus = np.maximum(vmax, 0.0)
    minus = np.minimum(vmin, 0.0)
    stuck = (plus == 0.0) & (minus == 0.0)
    plus = np.where(stuck, _ZERO_SPREAD_WIDEN, plus)
    minus = np.where(stuck, -_ZERO_SPREAD_WIDEN, minus)
    return WaveSpeedPair(minus=minus, plus=plus)


# ---------------------------------------------------------------------------
# Closure objects used by the scheme


class EqmomClosure:
    """Two-node Gaussian closure bundled with its wave-speed constant."""

    name = "eqmom"
    primitive_names = ("rho1", "v1", "rho2", "v2", "sigma")

    def __init__(self, a: float = DEFAULT_WAVE_CONST):
        _check_wave_const(a)
        self.a = a

    def forward(self, W):
        return eqmom_forward(W)

    def invert(self, M):
        return eqmom_invert(M)

    def m5(self, W, M):
        return eqmom_m5(W, M)

    def wave_speeds(self, W):
        return eqmom_wave_speeds(W, self.a)

    def consistent_moments(self, W, M):
        # Re-evaluating the forward map removes the inversion residual so
        # the flux sees a moment vector exactly consistent with W.
        return eqmom_forward(W)

    def primitives(self, W):
        return np.stack(
            np.broadcast_arrays(W.rho1, W.v1, W.rho2, W.v2, W.sigma)
        ).astype(float)


class HyqmomClosure:
    """Three-point closure; inversion is closed form and exact."""

    name = "hyqmom"
    primitive_names = ("rho1", "rho2", "rho3", "v1", "v2", "v3")

    def __init__(self, a: float | None = None):
        # The wave-speed bound needs no tunable constant here; the
        # argument is accepted for interface symmetry and ignored.
        self.a = a

    def forward(self, W):
        return hyqmom_forward(W)

    def invert(self, M):
        return hyqmom_invert(M)

    def m5(self, W, M=None):
        return hyqmom_m5(W)

    def wave_speeds(self, W):
        return hyqmom_wave_speeds(W)

    def consistent_moments(self, W, M):
        return np.asarray(M, dtype=float)

    def primitives(self, W):
        return np.stack(
            np.broadcast_arrays(W.rho1, W.rho2, W.rho3, W.v1, W.v2, W.v3)
        ).astype(float)


def wave_speeds(closure, W) -> WaveSpeedPair:
    """Signal speed bounds for a closure instance and its primitives."""
    return closure.wave_speeds(W)


def flux_vector(closure, M, W) -> np.ndarray:
    """Physical flux (M1, M2, M3, M4, m5) for a consistent (M, W) pair."""
    M = np.asarray(M, dtype=float)
    m5 = np.asarray(closure.m5(W, M), dtype=float)
    return np.concatenate([M[1:5], m5[None]], axis=0)


def get_closure(name: str, a: float = DEFAULT_WAVE_CONST):
    """Build a closure instance from its name ("eqmom" or "hyqmom")."""
    if name == "eqmom":
        return EqmomClosure(a)
    if name == "hyqmom":
        return HyqmomClosure()
    raise ValueError(f"unknown closure '{name}'")
