"""Translation-distance functions between patterns, in closed form.

For a pattern p and a unit direction T, the self-distance profile is

    f(t) = || p - p(. - t T) ||^2.

Every pair (j, k) of atoms contributes through three scalars computed from
the averaged covariance Sigma_jk = (cov_j + cov_k)/2 and the center offset
dtau = tau_k - tau_j:

    a = T^T Sigma^{-1} T / 2        (> 0)
    b = T^T Sigma^{-1} dtau / 2
    c = dtau^T Sigma^{-1} dtau / 2  (>= 0)
    q = pi |sigma_j| |sigma_k| exp(-c) / sqrt(det Sigma)

and the derivative of f is the pairwise sum of

    s_jk(t) = exp(-(a t^2 + 2 b t)) (a t + b) + exp(-(a t^2 - 2 b t)) (a t - b)

weighted by c_j c_k q.  The second derivative uses the analytic s_jk'.

The general two-pattern distance ``pattern_distance(p, q, u)`` is the
squared L2 distance between p translated by u and q, so when q is p
translated by u*, the minimizer over u is u* itself.  Its gradient is
assembled from the directional derivatives along the two canonical axes,
each in closed form (``distance_gradient``).

Exponents more negative than the double-precision underflow threshold
(about -745) evaluate to exactly 0; far-apart pairs drop out silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .atoms import Atom, Pattern, pattern_inner_product, _pair_geometry
from .errors import NumericalError

__all__ = [
    "Translation",
    "PairTerms",
    "pair_terms",
    "pattern_distance",
    "distance_derivative",
    "distance_second_derivative",
    "distance_gradient",
    "derivative_profile",
    "second_derivative_profile",
    "SelfPairs",
    "CrossTerms",
]

_COND_LIMIT = 1e14


@dataclass(frozen=True)
class Translation:
    """Polar form of a plane translation: magnitude t >= 0, unit direction."""

    t: float
    direction: tuple[float, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "t", float(self.t))
        d = (float(self.direction[0]), float(self.direction[1]))
        object.__setattr__(self, "direction", d)
        if self.t < 0.0:
            raise ValueError("translation magnitude must be non-negative")
        if abs(math.hypot(*d) - 1.0) > 1e-12:
            raise ValueError(f"direction must be a unit vector, got {d}")

    @classmethod
    def from_vector(cls, u: Sequence[float]) -> "Translation":
        """Polar decomposition of a raw 2-vector; the zero vector maps to
        t = 0 with direction (1, 0)."""
        ux, uy = float(u[0]), float(u[1])
        t = math.hypot(ux, uy)
        if t == 0.0:
            return cls(0.0, (1.0, 0.0))
        return cls(t, (ux / t, uy / t))

    @property
    def vector(self) -> np.ndarray:
        return self.t * np.array(self.direction)


def as_translation(u) -> Translation:
    """Coerce a Translation or raw 2-vector to a Translation."""
    if isinstance(u, Translation):
        return u
    return Translation.from_vector(u)


@dataclass(frozen=True, eq=False)
class PairTerms:
    """The (a, b, c, q) scalars of one atom pair along one direction."""

    sigma_jk: np.ndarray
    a: float
    b: float
    c: float
    q: float
    direction: tuple[float, float]


def pair_terms(atom_j: Atom, atom_k: Atom, direction: Sequence[float]) -> PairTerms:
    """Closed-form pair scalars for one (j, k) atom pair along T.

    Raises NumericalError when the averaged covariance is numerically
    singular, reporting its condition number.
    """
    tx, ty = float(direction[0]), float(direction[1])
    if abs(math.hypot(tx, ty) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector")
    sigma = 0.5 * (atom_j.covariance + atom_k.covariance)
    eigvals = np.linalg.eigvalsh(sigma)
    if eigvals[0] <= 0.0 or eigvals[1] / eigvals[0] > _COND_LIMIT:
        cond = math.inf if eigvals[0] <= 0.0 else eigvals[1] / eigvals[0]
        raise NumericalError(
            f"averaged covariance numerically singular (condition number {cond:.3e})"
        )
    det = sigma[0, 0] * sigma[1, 1] - sigma[0, 1] * sigma[1, 0]
    inv = np.array(
        [[sigma[1, 1], -sigma[0, 1]], [-sigma[1, 0], sigma[0, 0]]]
    ) / det
    tvec = np.array([tx, ty])
    dtau = np.array(atom_k.tau) - np.array(atom_j.tau)
    a = 0.5 * float(tvec @ inv @ tvec)
    b = 0.5 * float(tvec @ inv @ dtau)
    c = 0.5 * float(dtau @ inv @ dtau)
    amp = (
        math.pi
        * (atom_j.sigma[0] * atom_j.sigma[1] * atom_k.sigma[0] * atom_k.sigma[1])
        / math.sqrt(det)
    )
    q = amp * math.exp(max(-c, -745.0))
    return PairTerms(sigma, a, b, c, q, (tx, ty))


class SelfPairs:
    """Precomputed pairwise data for one pattern's self-distance profile.

    Holds coefficient products, inverse averaged covariances, center offsets
    and the direction-independent amplitude q_base = pi|s_j||s_k|/sqrt(det),
    so that derivative profiles along many directions and t values reduce to
    array arithmetic.
    """

    def __init__(self, p: Pattern):
        amp_half, inv, dtau, _ = _pair_geometry(p, p)
        self.cc = np.outer(p.coeffs, p.coeffs).reshape(-1)
        self.inv = inv
        self.dtau = dtau
        self.c = 0.5 * np.einsum("ni,nij,nj->n", dtau, inv, dtau)
        # amp_half carries the inner-product 1/2; q in the derivative sums
        # does not, hence the factor 2.
        self.amp0 = 2.0 * amp_half
        self.q = self.amp0 * np.exp(np.maximum(-self.c, -745.0))
        self.norm_sq = pattern_inner_product(p, p)

    def ab(self, direction: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        """Per-pair (a, b) along one unit direction."""
        t = np.asarray(direction, dtype=float)
        a = 0.5 * np.einsum("i,nij,j->n", t, self.inv, t)
        b = 0.5 * np.einsum("i,nij,nj->n", t, self.inv, self.dtau)
        return a, b

    def derivative(self, direction: Sequence[float], ts: np.ndarray) -> np.ndarray:
        """df(tT)/dt at each t in ts."""
        a, b = self.ab(direction)
        t = np.asarray(ts, dtype=float)[None, :]
        a_, b_ = a[:, None], b[:, None]
        e_plus = np.exp(np.maximum(-(a_ * t * t + 2.0 * b_ * t), -745.0))
        e_minus = np.exp(np.maximum(-(a_ * t * t - 2.0 * b_ * t), -745.0))
        s = e_plus * (a_ * t + b_) + e_minus * (a_ * t - b_)
        return (self.cc * self.q) @ s

    def second_derivative(self, direction: Sequence[float], ts: np.ndarray) -> np.ndarray:
        """d2f(tT)/dt2 at each t in ts, from the analytic s_jk'."""
        a, b = self.ab(direction)
        t = np.asarray(ts, dtype=float)[None, :]
        a_, b_ = a[:, None], b[:, None]
        e_plus = np.exp(np.maximum(-(a_ * t * t + 2.0 * b_ * t), -745.0))
        e_minus = np.exp(np.maximum(-(a_ * t * t - 2.0 * b_ * t), -745.0))
        sp = e_plus * (a_ - 2.0 * (a_ * t + b_) ** 2) + e_minus * (
            a_ - 2.0 * (a_ * t - b_) ** 2
        )
        return (self.cc * self.q) @ sp


class CrossTerms:
    """Precomputed pairwise data for || p(. - u) - q ||^2 as a function of u.

    Used by the registration layer to evaluate the objective over many grid
    points and its gradient during descent without re-deriving pair
    geometry.
    """

    def __init__(self, p: Pattern, q: Pattern):
        amp_half, inv, dtau, _ = _pair_geometry(p, q)
        self.camp = np.outer(p.coeffs, q.coeffs).reshape(-1) * amp_half
        self.inv = inv
        self.dtau = dtau
        self.const = pattern_inner_product(p, p) + pattern_inner_product(q, q)

    def cross(self, us: np.ndarray) -> np.ndarray:
        """<p(. - u), q> for each row u of us (M, 2)."""
        us = np.atleast_2d(np.asarray(us, dtype=float))
        d = self.dtau[None, :, :] - us[:, None, :]  # (M, N, 2)
        quad = np.einsum("mni,nij,mnj->mn", d, self.inv, d)
        return np.exp(np.maximum(-0.5 * quad, -745.0)) @ self.camp

    def value(self, u: Sequence[float]) -> float:
        return float(self.const - 2.0 * self.cross(np.asarray(u))[0])

    def values(self, us: np.ndarray) -> np.ndarray:
        return self.const - 2.0 * self.cross(us)

    def gradient(self, u: Sequence[float]) -> np.ndarray:
        """Gradient of the squared distance at u; component i is the
        directional derivative along canonical axis e_i, each from the same
        closed form as the pair inner product."""
        d = self.dtau - np.asarray(u, dtype=float)[None, :]  # (N, 2)
        sd = np.einsum("nij,nj->ni", self.inv, d)
        quad = np.einsum("ni,ni->n", d, sd)
        w = self.camp * np.exp(np.maximum(-0.5 * quad, -745.0))
        return -2.0 * (w @ sd)


def pattern_distance(p: Pattern, q: Pattern, u) -> float:
    """Squared L2 distance between p translated by u and q.

    With q = translate_pattern(p, u*) this vanishes at u = u*; with q = p it
    is the self-profile f(tT) evaluated at u = tT.
    """
    u = as_translation(u)
    return CrossTerms(p, q).value(u.vector)


def distance_derivative(p: Pattern, u) -> float:
    """df(tT)/dt for the self-distance profile of p at u = tT.

    Exactly 0 at t = 0 (the pairwise sum is antisymmetric there).
    """
    u = as_translation(u)
    return float(SelfPairs(p).derivative(u.direction, np.array([u.t]))[0])


def distance_second_derivative(p: Pattern, u) -> float:
    """d2f(tT)/dt2 for the self-distance profile of p at u = tT."""
    u = as_translation(u)
    return float(SelfPairs(p).second_derivative(u.direction, np.array([u.t]))[0])


def distance_gradient(p: Pattern, q: Pattern, u: Sequence[float]) -> np.ndarray:
    """Gradient of u -> pattern_distance(p, q, u) at a raw 2-vector u."""
    return CrossTerms(p, q).gradient(np.asarray(u, dtype=float))


def derivative_profile(p: Pattern, direction: Sequence[float], ts: np.ndarray) -> np.ndarray:
    """Vectorized df(tT)/dt over an array of magnitudes."""
    return SelfPairs(p).derivative(direction, ts)


def second_derivative_profile(
    p: Pattern, direction: Sequence[float], ts: np.ndarray
) -> np.ndarray:
    """Vectorized d2f(tT)/dt2 over an array of magnitudes."""
    return SelfPairs(p).second_derivative(direction, ts)
