"""Gaussian-atom image model.

A pattern is a finite weighted sum of anisotropic Gaussian atoms on the
plane.  Each atom is the mother bump exp(-X.X) pushed through a rotation
``psi``, per-axis scales ``sigma`` and a shift ``tau``:

    atom(X) = exp(-(X - tau)^T R diag(1/sx^2, 1/sy^2) R^T (X - tau))

with R the rotation by psi.  All pairwise L2 quantities used elsewhere in
the package (distances, identifiability radii, noise bounds) reduce to the
closed-form inner product of two such atoms, implemented here.

Conventions: atom coefficients live on the Pattern/Atom, not in the atom
shape function; ``atom_inner_product`` is coefficient-free, and the
pattern-level products weight it by coeff pairs.  Zero-coefficient atoms
are legal (noise fields with eta = 0 and empty matching-pursuit results
produce them).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Atom",
    "Pattern",
    "RasterImage",
    "atom_inner_product",
    "pattern_inner_product",
    "pattern_norm",
    "smooth_pattern",
    "translate_pattern",
    "evaluate_pattern",
    "evaluate_at_points",
    "rotation_matrix",
]

TWO_PI = 2.0 * math.pi


def rotation_matrix(psi: float) -> np.ndarray:
    """2x2 rotation by angle psi (counter-clockwise)."""
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Atom:
    """One Gaussian bump: coefficient, orientation, center and axis scales.

    psi is stored reduced to [0, 2*pi); sigma components must be positive.
    """

    coeff: float
    psi: float
    tau: tuple[float, float]
    sigma: tuple[float, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "coeff", float(self.coeff))
        object.__setattr__(self, "psi", float(self.psi) % TWO_PI)
        tau = (float(self.tau[0]), float(self.tau[1]))
        sigma = (float(self.sigma[0]), float(self.sigma[1]))
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "sigma", sigma)
        if not all(map(math.isfinite, (self.coeff, self.psi) + tau + sigma)):
            raise ValueError("atom parameters must be finite")
        if sigma[0] <= 0.0 or sigma[1] <= 0.0:
            raise ValueError(f"atom scales must be positive, got {sigma}")

    @property
    def covariance(self) -> np.ndarray:
        """R diag(sx^2, sy^2) R^T; the exponent is -(X-tau)^T cov^{-1} (X-tau)."""
        rot = rotation_matrix(self.psi)
        return rot @ np.diag([self.sigma[0] ** 2, self.sigma[1] ** 2]) @ rot.T


@dataclass(frozen=True)
class Pattern:
    """Weighted atom sum.  At least one atom; coefficients may all be zero."""

    atoms: tuple[Atom, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "atoms", tuple(self.atoms))
        if len(self.atoms) == 0:
            raise ValueError("a pattern needs at least one atom")

    def __len__(self) -> int:
        return len(self.atoms)

    @classmethod
    def from_arrays(
        cls,
        coeffs: Iterable[float],
        psis: Iterable[float],
        taus: Iterable[Sequence[float]],
        sigmas: Iterable[Sequence[float]],
    ) -> "Pattern":
        atoms = tuple(
            Atom(c, p, (t[0], t[1]), (s[0], s[1]))
            for c, p, t, s in zip(coeffs, psis, taus, sigmas)
        )
        return cls(atoms)

    # Array views are cached: patterns are immutable and the pairwise maths
    # downstream is all numpy.
    @cached_property
    def coeffs(self) -> np.ndarray:
        return np.array([a.coeff for a in self.atoms])

    @cached_property
    def psis(self) -> np.ndarray:
        return np.array([a.psi for a in self.atoms])

    @cached_property
    def taus(self) -> np.ndarray:
        return np.array([a.tau for a in self.atoms])

    @cached_property
    def sigmas(self) -> np.ndarray:
        return np.array([a.sigma for a in self.atoms])

    @cached_property
    def covariances(self) -> np.ndarray:
        """(K, 2, 2) stack of per-atom covariance matrices."""
        c, s = np.cos(self.psis), np.sin(self.psis)
        rots = np.empty((len(self), 2, 2))
        rots[:, 0, 0] = c
        rots[:, 0, 1] = -s
        rots[:, 1, 0] = s
        rots[:, 1, 1] = c
        diag = np.zeros((len(self), 2, 2))
        diag[:, 0, 0] = self.sigmas[:, 0] ** 2
        diag[:, 1, 1] = self.sigmas[:, 1] ** 2
        return rots @ diag @ np.transpose(rots, (0, 2, 1))


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Sampled image on a square domain [-extent, extent]^2.

    pixels is (height, width), row-major, with the top row holding the
    largest y; pixel values are samples at pixel centers.
    """

    width: int
    height: int
    extent: float
    pixels: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "pixels", np.asarray(self.pixels, dtype=float))
        if self.width < 1 or self.height < 1:
            raise ValueError("raster dimensions must be positive")
        if self.extent <= 0.0:
            raise ValueError("raster extent must be positive")
        if self.pixels.shape != (self.height, self.width):
            raise ValueError(
                f"pixel array shape {self.pixels.shape} does not match "
                f"(height, width) = {(self.height, self.width)}"
            )

    def pixel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """(xs of the width columns, ys of the height rows, top row first)."""
        dx = 2.0 * self.extent / self.width
        dy = 2.0 * self.extent / self.height
        xs = -self.extent + dx * (np.arange(self.width) + 0.5)
        ys = self.extent - dy * (np.arange(self.height) + 0.5)
        return xs, ys


def _pair_geometry(p: "Pattern", q: "Pattern"):
    """Flattened pairwise data for <atom_j of p, atom_k of q> products.

    Returns (amp, inv_sigma, dtau, det) with shapes (N,), (N, 2, 2), (N, 2),
    (N,), N = len(p) * len(q):
      amp  = pi |sigma_j| |sigma_k| / (2 sqrt det(Sigma_jk))
      Sigma_jk = (cov_j + cov_k) / 2
      dtau = tau_k - tau_j
    Coefficients are not included.
    """
    cov = 0.5 * (p.covariances[:, None] + q.covariances[None, :])  # (Kp, Kq, 2, 2)
    det = cov[..., 0, 0] * cov[..., 1, 1] - cov[..., 0, 1] * cov[..., 1, 0]
    inv = np.empty_like(cov)
    inv[..., 0, 0] = cov[..., 1, 1]
    inv[..., 1, 1] = cov[..., 0, 0]
    inv[..., 0, 1] = -cov[..., 0, 1]
    inv[..., 1, 0] = -cov[..., 1, 0]
    inv /= det[..., None, None]
    prod_p = p.sigmas[:, 0] * p.sigmas[:, 1]
    prod_q = q.sigmas[:, 0] * q.sigmas[:, 1]
    amp = math.pi * prod_p[:, None] * prod_q[None, :] / (2.0 * np.sqrt(det))
    dtau = q.taus[None, :, :] - p.taus[:, None, :]
    n = len(p) * len(q)
    return (
        amp.reshape(n),
        inv.reshape(n, 2, 2),
        dtau.reshape(n, 2),
        det.reshape(n),
    )


def atom_inner_product(a: Atom, b: Atom) -> float:
    """L2 inner product of the two atom shape functions (coefficients excluded).

    Closed form: pi |sigma_a| |sigma_b| / (2 sqrt det(Sigma)) *
    exp(-(tau_b - tau_a)^T Sigma^{-1} (tau_b - tau_a) / 2) with
    Sigma = (cov_a + cov_b)/2.
    """
    cov = 0.5 * (a.covariance + b.covariance)
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
    d = np.array(b.tau) - np.array(a.tau)
    quad = (
        d[0] * (cov[1, 1] * d[0] - cov[0, 1] * d[1])
        + d[1] * (cov[0, 0] * d[1] - cov[1, 0] * d[0])
    ) / det
    amp = (
        math.pi
        * (a.sigma[0] * a.sigma[1] * b.sigma[0] * b.sigma[1])
        / (2.0 * math.sqrt(det))
    )
    return amp * math.exp(max(-0.5 * quad, -745.0))


def pattern_inner_product(p: Pattern, q: Pattern) -> float:
    """<p, q> = sum_jk c_j c_k <atom_j, atom_k>, evaluated in closed form."""
    amp, inv, dtau, _ = _pair_geometry(p, q)
    quad = np.einsum("ni,nij,nj->n", dtau, inv, dtau)
    cc = np.outer(p.coeffs, q.coeffs).reshape(-1)
    return float(np.sum(cc * amp * np.exp(-0.5 * quad)))


def pattern_norm(p: Pattern) -> float:
    """L2 norm of the pattern."""
    return math.sqrt(max(pattern_inner_product(p, p), 0.0))


def smooth_pattern(p: Pattern, rho: float) -> Pattern:
    """Convolve with the unit-mass isotropic Gaussian kernel of size rho.

    The kernel is exp(-|X|^2/rho^2) / (pi rho^2).  Convolution acts on each
    atom in its own principal frame (the kernel is isotropic, so it commutes
    with the atom's rotation): per-axis scales become sqrt(sigma^2 + rho^2)
    and the coefficient picks up sx*sy / sqrt((sx^2+rho^2)(sy^2+rho^2)).
    rho = 0 returns the pattern unchanged.  Smoothing is a semigroup in
    rho^2: smoothing by rho1 then rho2 equals smoothing by
    sqrt(rho1^2 + rho2^2) exactly, at the parameter level.
    """
    if rho < 0.0:
        raise ValueError("smoothing size must be non-negative")
    if rho == 0.0:
        return p
    r2 = rho * rho
    atoms = []
    for a in p.atoms:
        sx2 = a.sigma[0] ** 2 + r2
        sy2 = a.sigma[1] ** 2 + r2
        gain = a.sigma[0] * a.sigma[1] / math.sqrt(sx2 * sy2)
        atoms.append(
            Atom(a.coeff * gain, a.psi, a.tau, (math.sqrt(sx2), math.sqrt(sy2)))
        )
    return Pattern(tuple(atoms))


def translate_pattern(p: Pattern, u: Sequence[float]) -> Pattern:
    """Shift every atom center by u; the result is p(. - u)."""
    ux, uy = float(u[0]), float(u[1])
    return Pattern(
        tuple(
            Atom(a.coeff, a.psi, (a.tau[0] + ux, a.tau[1] + uy), a.sigma)
            for a in p.atoms
        )
    )


def evaluate_at_points(p: Pattern, points: np.ndarray) -> np.ndarray:
    """Pattern values at an (N, 2) array of plane points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    values = np.zeros(pts.shape[0])
    cov = p.covariances
    for k, atom in enumerate(p.atoms):
        if atom.coeff == 0.0:
            continue
        det = cov[k, 0, 0] * cov[k, 1, 1] - cov[k, 0, 1] * cov[k, 1, 0]
        inv = np.array(
            [[cov[k, 1, 1], -cov[k, 0, 1]], [-cov[k, 1, 0], cov[k, 0, 0]]]
        ) / det
        d = pts - np.array(atom.tau)
        quad = np.einsum("ni,ij,nj->n", d, inv, d)
        values += atom.coeff * np.exp(-quad)
    return values


def evaluate_pattern(p: Pattern, width: int, height: int, extent: float) -> RasterImage:
    """Sample the pattern at pixel centers of a width x height raster.

    The domain is [-extent, extent]^2; row 0 holds the largest y.
    """
    img = RasterImage(width, height, extent, np.zeros((height, width)))
    xs, ys = img.pixel_centers()
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    pixels = evaluate_at_points(p, pts).reshape(height, width)
    return RasterImage(width, height, extent, pixels)
