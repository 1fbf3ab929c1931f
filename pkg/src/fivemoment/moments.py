"""Moment vectors, Hankel realizability margins, and Maxwellian moments.

The transported state is the vector of velocity moments (M0..M4) of a 1D
number density function, stored as an array of shape (5,) or (5, n).  All
functions here are pure and broadcast over the trailing axis, so the same
code serves single states and whole grids.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import NegativeInput, ZeroDensity

Scalars = Union[float, np.ndarray]

#: Default relative margin for strict-realizability checks.
DEFAULT_REL_MARGIN = 1e-13

_HANKEL_ROWS = np.array([[0, 1, 2], [1, 2, 3], [2, 3, 4]])


def hankel(v) -> np.ndarray:
    """Arrange a 5-vector into the symmetric 3x3 Hankel matrix.

    Rows are (v0 v1 v2), (v1 v2 v3), (v2 v3 v4).  Batched input of shape
    (5, n) yields shape (3, 3, n).
    """
    v = np.asarray(v, dtype=float)
    return v[_HANKEL_ROWS]


def leading_minors(M):
    """Leading principal minors (d1, d2, d3) of the Hankel matrix of M.

    d3 is det H(M) = M0*M2*M4 - M0*M3^2 - M1^2*M4 + 2*M1*M2*M3 - M2^3;
    for positive variance it factors as M0^3 * e * z.
    """
    M = np.asarray(M, dtype=float)
    m0, m1, m2, m3, m4 = M
    d1 = m0
    d2 = m0 * m2 - m1 * m1
    d3 = m0 * m2 * m4 - m0 * m3 * m3 - m1 * m1 * m4 + 2.0 * m1 * m2 * m3 - m2 ** 3
    return d1, d2, d3


@dataclass(frozen=True)
class RealizabilityMargins:
    """Realizability margins of a moment vector (scalars or per-cell arrays).

    e, q and eta are the central second, third and fourth moments of the
    unit-mass distribution; z = eta - e^2 - q^2/e is the Schur complement
    that controls positive definiteness of the Hankel matrix.  Strict
    realizability is equivalent to m0 > 0, e > 0 and z > 0.  When e <= 0
    the ratio q^2/e is undefined and z is reported as -inf so comparisons
    stay total.
    """

    m0: Scalars
    e: Scalars
    q: Scalars
    eta: Scalars
    z: Scalars


def margins(M) -> RealizabilityMargins:
    """Compute the realizability margins of one or many moment vectors.

    Raises ZeroDensity if any M0 vanishes.
    """
    M = np.asarray(M, dtype=float)
    m0 = M[0]
    if np.any(m0 == 0.0):
        raise ZeroDensity("margins are undefined for M0 = 0")
    u = M[1] / m0
    m2 = M[2] / m0
    m3 = M[3] / m0
    m4 = M[4] / m0
    e = m2 - u * u
    q = m3 - u * (3.0 * m2 - 2.0 * u * u)
    eta = m4 - u * (4.0 * m3 - u * (6.0 * m2 - 3.0 * u * u))
    pos = e > 0.0
    z = np.where(pos, eta - e * e - q * q / np.where(pos, e, 1.0), -np.inf)
    return RealizabilityMargins(m0=m0, e=e, q=q, eta=eta, z=z)


def is_strictly_realizable(M, rel_margin: float = DEFAULT_REL_MARGIN):
    """True where M lies in the interior of the moment space.

    The three defining inequalities are tested with a floating-point
    margin relative to a per-quantity scale: m0 against
    rel_margin*(1+|m0|), e against rel_margin*(1+|M2/M0|) and z against
    rel_margin*(1+|eta|).  With rel_margin = 0 the test is the exact
    strict inequality.  Never raises; non-finite input compares False.
    """
    if rel_margin < 0:
        raise ValueError("rel_margin must be nonnegative")
    M = np.asarray(M, dtype=float)
    m0 = M[0]
    safe_m0 = np.where(m0 > 0.0, m0, 1.0)
    u = M[1] / safe_m0
    m2 = M[2] / safe_m0
    m3 = M[3] / safe_m0
    m4 = M[4] / safe_m0
    e = m2 - u * u
    q = m3 - u * (3.0 * m2 - 2.0 * u * u)
    eta = m4 - u * (4.0 * m3 - u * (6.0 * m2 - 3.0 * u * u))
    pos = e > 0.0
    z = np.where(pos, eta - e * e - q * q / np.where(pos, e, 1.0), -np.inf)
    ok = m0 > rel_margin * (1.0 + np.abs(m0))
    ok &= e > rel_margin * (1.0 + np.abs(m2))
    ok &= z > rel_margin * (1.0 + np.abs(eta))
    return ok


def maxwellian_moments(rho, U, theta) -> np.ndarray:
    """Moments (M0..M4) of a Maxwellian with density rho, mean U, temperature theta.

    Returns rho * (1, U, U^2+theta, U^3+3*U*theta, U^4+6*U^2*theta+3*theta^2).
    The result is strictly realizable when rho > 0 and theta > 0; theta = 0
    gives the Dirac limit on the boundary of the moment space.
    """
    rho = np.asarray(rho, dtype=float)
    U = np.asarray(U, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(rho < 0.0):
        raise NegativeInput("density must be nonnegative")
    if np.any(theta < 0.0):
        raise NegativeInput("temperature must be nonnegative")
    u2 = U * U
    shape = np.broadcast(rho, U, theta).shape
    rows = [
        np.broadcast_to(np.ones(()), shape),
        np.broadcast_to(U, shape),
        np.broadcast_to(u2 + theta, shape),
        np.broadcast_to(U * (u2 + 3.0 * theta), shape),
        np.broadcast_to(u2 * u2 + 6.0 * u2 * theta + 3.0 * theta * theta, shape),
    ]
    return rho * np.stack(rows)


def state_scale(M):
    """Magnitude scale of a moment vector: max(1, |M0|, ..., |M4|)."""
    M = np.asarray(M, dtype=float)
    return np.maximum(np.max(np.abs(M), axis=0), 1.0)


def realizable_within(M, tol: float = 1e-10):
    """True where M is realizable up to a relative tolerance on the minors.

    Checks d_k >= -tol * scale^k for the three leading Hankel minors with
    scale = state_scale(M), and that all entries are finite.  This is the
    cheap audit used after each scheme update; boundary states (Dirac
    mixtures) pass, clear violations do not.
    """
    M = np.asarray(M, dtype=float)
    d1, d2, d3 = leading_minors(M)
    s = state_scale(M)
    ok = np.all(np.isfinite(M), axis=0)
    ok &= d1 >= -tol * s
    ok &= d2 >= -tol * s * s
    ok &= d3 >= -tol * s * s * s
    return ok
