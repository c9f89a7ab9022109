"""Certified single-descent neighborhood of the self-distance profile.

Along a unit direction T, the profile f(t) = ||p - p(. - tT)||^2 rises from
0 with slope bounded below by a cubic whose coefficients are pairwise sums:

    alpha_1 = sum cc q (2a - 4 b^2)
    alpha_3 = sum cc q (-(8/3) b^4 + 8 b^2 a - 2 a^2)
    alpha_4 = -1.37 sum |cc| q exp(b^2/a) a^{5/2}

(a, b, q as in :mod:`atomreg.distance`; cc the coefficient product).  When
alpha_1 > 0, the certified radius delta_T is the only positive root of

    |alpha_4| t^3 - alpha_3 t^2 - alpha_1 = 0,

and f is strictly increasing on (0, delta_T].  Cauchy-Schwarz gives
b^2 <= a c, so the alpha_4 summand exp(b^2/a - c) never exceeds 1; it is
evaluated as a single exponent to avoid overflow.

The boundary estimate sweeps directions (mirror-symmetric: delta is even in
T, so only half the circle is computed), and the "true" boundary scans the
analytic derivative densely and bisects the first sign change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .atoms import Pattern, smooth_pattern
from .distance import SelfPairs

__all__ = [
    "AlphaCoefficients",
    "SidenEstimate",
    "alpha_coefficients",
    "delta_T",
    "siden_boundary",
    "siden_area",
    "true_siden_boundary",
]


@dataclass(frozen=True)
class AlphaCoefficients:
    """Cubic lower-bound coefficients along one direction; alpha4 < 0."""

    alpha1: float
    alpha3: float
    alpha4: float
    direction: tuple[float, float]


def _alpha_arrays(sp: SelfPairs, directions: np.ndarray):
    """(alpha1, alpha3, alpha4) for each row of a (M, 2) direction array."""
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    a = 0.5 * np.einsum("mi,nij,mj->nm", dirs, sp.inv, dirs)  # (N, M)
    b = 0.5 * np.einsum("mi,nij,nj->nm", dirs, sp.inv, sp.dtau)
    ccq = (sp.cc * sp.q)[:, None]
    alpha1 = np.sum(ccq * (2.0 * a - 4.0 * b * b), axis=0)
    alpha3 = np.sum(
        ccq * (-(8.0 / 3.0) * b**4 + 8.0 * b * b * a - 2.0 * a * a), axis=0
    )
    # q = amp0 * exp(-c); fold exp(b^2/a) into the same exponent.
    expo = np.exp(np.minimum(b * b / a - sp.c[:, None], 0.0))
    alpha4 = -1.37 * np.sum(
        (np.abs(sp.cc) * sp.amp0)[:, None] * expo * a**2.5, axis=0
    )
    return alpha1, alpha3, alpha4


def alpha_coefficients(p: Pattern, direction: Sequence[float]) -> AlphaCoefficients:
    """Cubic coefficients of the slope lower bound along one unit direction."""
    tx, ty = float(direction[0]), float(direction[1])
    if abs(math.hypot(tx, ty) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector")
    a1, a3, a4 = _alpha_arrays(SelfPairs(p), np.array([[tx, ty]]))
    return AlphaCoefficients(float(a1[0]), float(a3[0]), float(a4[0]), (tx, ty))


def _positive_root(alpha1: float, alpha3: float, alpha4: float) -> float:
    """Only positive root of |alpha4| t^3 - alpha3 t^2 - alpha1, alpha1 > 0.

    The sign pattern (+, -, -) of the coefficients admits exactly one
    positive root; bracket by doubling from 1, then bisect.
    """
    a4 = abs(alpha4)

    def g(t: float) -> float:
        return a4 * t**3 - alpha3 * t * t - alpha1

    hi = 1.0
    while g(hi) < 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise ArithmeticError("root bracketing diverged")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return 0.5 * (lo + hi)


def delta_T(p: Pattern, direction: Sequence[float]) -> float:
    """Certified descent radius along one direction; 0 when the slope lower
    bound is non-positive at the origin (degenerate direction)."""
    alpha = alpha_coefficients(p, direction)
    if alpha.alpha1 <= 0.0:
        return 0.0
    return _positive_root(alpha.alpha1, alpha.alpha3, alpha.alpha4)


@dataclass(frozen=True, eq=False)
class SidenEstimate:
    """Sampled boundary of the certified region.

    directions is (n, 2) in increasing angular order (second half mirrors
    the first); deltas holds the radius per direction; degenerate marks
    directions where the estimate collapsed to 0.  rho records the smoothing
    applied before estimation (0 = unsmoothed pattern).
    """

    directions: np.ndarray
    deltas: np.ndarray
    rho: float

    @property
    def degenerate(self) -> np.ndarray:
        return self.deltas == 0.0

    @property
    def r_min(self) -> float:
        return float(np.min(self.deltas))


def siden_boundary(p: Pattern, n_directions: int = 128, rho: float = 0.0) -> SidenEstimate:
    """Estimate the certified-region boundary over n_directions directions.

    n_directions must be even and at least 4.  The pattern is smoothed by
    rho first.  Radii are computed on half the circle and mirrored.
    """
    if n_directions < 4 or n_directions % 2 != 0:
        raise ValueError("n_directions must be even and >= 4")
    ps = smooth_pattern(p, rho)
    half = n_directions // 2
    angles = np.pi * np.arange(half) / half
    dirs_half = np.column_stack([np.cos(angles), np.sin(angles)])
    a1, a3, a4 = _alpha_arrays(SelfPairs(ps), dirs_half)
    deltas_half = np.zeros(half)
    for i in range(half):
        if a1[i] > 0.0:
            deltas_half[i] = _positive_root(a1[i], a3[i], a4[i])
    directions = np.vstack([dirs_half, -dirs_half])
    deltas = np.concatenate([deltas_half, deltas_half])
    return SidenEstimate(directions, deltas, float(rho))


def siden_area(est: SidenEstimate) -> float:
    """Shoelace area of the polygon through the boundary samples."""
    pts = est.deltas[:, None] * est.directions
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)))


def true_siden_boundary(
    p: Pattern, direction: Sequence[float], t_max: float
) -> Optional[float]:
    """First t in (0, t_max] where the analytic df/dt reaches <= 0.

    Dense scan with step t_max/2000, then bisection of the bracketing
    interval to 1e-8.  Returns None when the derivative stays positive on
    the whole range, and 0.0 when it is already non-positive at the first
    scan point with a non-positive initial slope bound.
    """
    if t_max <= 0.0:
        raise ValueError("t_max must be positive")
    sp = SelfPairs(p)
    ts = np.linspace(t_max / 2000.0, t_max, 2000)
    df = sp.derivative(direction, ts)
    idx = np.nonzero(df <= 0.0)[0]
    if idx.size == 0:
        return None
    i = int(idx[0])
    if i == 0:
        lo = t_max / 2.0e6
        if sp.derivative(direction, np.array([lo]))[0] <= 0.0:
            return 0.0
    else:
        lo = float(ts[i - 1])
    hi = float(ts[i])
    while hi - lo > 1e-8:
        mid = 0.5 * (lo + hi)
        if sp.derivative(direction, np.array([mid]))[0] > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
