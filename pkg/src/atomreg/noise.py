"""Noise models for target patterns.

Two families are supported:

* ``gaussian-analytic``: a random field of L small isotropic atoms of scale
  epsilon, centers uniform on the box [-b, b]^2 and coefficients i.i.d.
  N(0, eta^2).  This is the model behind the probabilistic error bounds;
  its mean squared norm is (pi/2) L eta^2 epsilon^2.
* ``generic``: an arbitrary fixed pattern z with prescribed norm nu, either
  correlated with the reference (built from a subset of its atoms) or
  drawn independently.

Smoothing a gaussian-analytic field by rho keeps the model closed: atom
scale grows to sqrt(epsilon^2 + rho^2) and the coefficient deviation
shrinks by epsilon^2 / (epsilon^2 + rho^2).

All sampling is replayable: draws are a pure function of (spec, seed), and
the draw order is fixed (atom centers first, row-major (x, y) per atom,
then coefficients via Box-Muller).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .atoms import Atom, Pattern, RasterImage, pattern_norm
from .errors import ConfigError
from .rng import normals, stream

__all__ = [
    "GAUSSIAN_ANALYTIC",
    "GENERIC",
    "NoiseSpec",
    "NoiseDraw",
    "sample_gaussian_field",
    "add_digital_noise",
    "make_generic_noise",
    "smoothed_noise_params",
]

GAUSSIAN_ANALYTIC = "gaussian-analytic"
GENERIC = "generic"


@dataclass(frozen=True)
class NoiseSpec:
    """Noise model parameters.

    kind selects the family; L/epsilon/eta/b parameterize the analytic
    Gaussian field, nu is the norm budget of a generic pattern.  b is the
    half-width of the box the noise-atom centers are drawn from.
    """

    kind: str = GAUSSIAN_ANALYTIC
    L: int = 750
    epsilon: float = 0.1
    eta: float = 0.0
    b: float = 4.0
    nu: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in (GAUSSIAN_ANALYTIC, GENERIC):
            raise ConfigError(f"unknown noise kind {self.kind!r}")
        if self.L < 1:
            raise ConfigError("noise.L must be at least 1")
        if self.epsilon <= 0.0:
            raise ConfigError("noise.epsilon must be positive")
        if self.eta < 0.0 or self.nu < 0.0:
            raise ConfigError("noise.eta and noise.nu must be non-negative")
        if self.b <= 0.0:
            raise ConfigError("noise.b must be positive")


@dataclass(frozen=True, eq=False)
class NoiseDraw:
    """One realized noise pattern together with its provenance."""

    pattern: Pattern
    spec: NoiseSpec
    seed: int


def sample_gaussian_field(spec: NoiseSpec, seed: int) -> NoiseDraw:
    """Draw one analytic Gaussian noise field.

    Uses stream(seed): first 2L uniforms for the centers (per atom x then
    y), then L Box-Muller normals scaled by eta.  eta = 0 yields a
    zero-coefficient pattern.
    """
    gen = stream(seed)
    centers = gen.uniform(-spec.b, spec.b, size=(spec.L, 2))
    coeffs = normals(gen, spec.L, scale=spec.eta)
    atoms = tuple(
        Atom(coeffs[l], 0.0, (centers[l, 0], centers[l, 1]), (spec.epsilon, spec.epsilon))
        for l in range(spec.L)
    )
    return NoiseDraw(Pattern(atoms), spec, seed)


def mean_deviation_level(spec: NoiseSpec) -> float:
    """Expected squared norm of the analytic field: (pi/2) L eta^2 eps^2."""
    return 0.5 * math.pi * spec.L * spec.eta**2 * spec.epsilon**2


def add_digital_noise(img: RasterImage, eta: float, seed: int) -> RasterImage:
    """Add i.i.d. N(0, eta^2) pixel noise (Box-Muller, row-major order)."""
    if eta < 0.0:
        raise ValueError("eta must be non-negative")
    gen = stream(seed)
    noise = normals(gen, img.width * img.height, scale=eta).reshape(
        img.height, img.width
    )
    return RasterImage(img.width, img.height, img.extent, img.pixels + noise)


def make_generic_noise(
    p: Pattern,
    mode: str,
    n_atoms: int,
    target_nu: float,
    seed: int,
) -> Pattern:
    """Build a generic noise pattern z with ||z|| = target_nu.

    mode "correlated-subset" keeps a random sorted subset of n_atoms atoms
    of p with their coefficients; mode "random-atoms" draws fresh atoms
    with parameters uniform over p's parameter ranges.  In both modes the
    coefficients are rescaled to hit the target norm (within 1e-10);
    target_nu = 0 yields the zero pattern on the same atoms.
    """
    if n_atoms < 1:
        raise ValueError("n_atoms must be at least 1")
    if target_nu < 0.0:
        raise ValueError("target_nu must be non-negative")
    gen = stream(seed)
    if mode == "correlated-subset":
        if n_atoms > len(p):
            raise ValueError(
                f"subset size {n_atoms} exceeds the pattern's {len(p)} atoms"
            )
        idx = np.sort(gen.choice(len(p), size=n_atoms, replace=False))
        atoms = tuple(p.atoms[int(i)] for i in idx)
    elif mode == "random-atoms":
        tau_lo, tau_hi = p.taus.min(axis=0), p.taus.max(axis=0)
        sig_lo, sig_hi = p.sigmas.min(), p.sigmas.max()
        coeffs = gen.uniform(-1.0, 1.0, n_atoms)
        psis = gen.uniform(0.0, 2.0 * math.pi, n_atoms)
        taus = gen.uniform(tau_lo, tau_hi, size=(n_atoms, 2))
        sigmas = gen.uniform(sig_lo, sig_hi, size=(n_atoms, 2))
        atoms = tuple(
            Atom(coeffs[i], psis[i], (taus[i, 0], taus[i, 1]), (sigmas[i, 0], sigmas[i, 1]))
            for i in range(n_atoms)
        )
    else:
        raise ConfigError(f"unknown generic noise mode {mode!r}")
    z = Pattern(atoms)
    if target_nu == 0.0:
        return Pattern(tuple(Atom(0.0, a.psi, a.tau, a.sigma) for a in atoms))
    norm = pattern_norm(z)
    if norm == 0.0:
        raise ValueError("cannot rescale a zero-norm pattern to a positive norm")
    scale = target_nu / norm
    return Pattern(tuple(Atom(a.coeff * scale, a.psi, a.tau, a.sigma) for a in atoms))


def smoothed_noise_params(spec: NoiseSpec, rho: float) -> NoiseSpec:
    """Parameters of the analytic field after smoothing by rho.

    epsilon grows to sqrt(epsilon^2 + rho^2) and eta shrinks by
    epsilon^2 / (epsilon^2 + rho^2); the other fields are unchanged.
    """
    if rho < 0.0:
        raise ValueError("rho must be non-negative")
    if rho == 0.0:
        return spec
    e2 = spec.epsilon**2
    return replace(
        spec,
        epsilon=math.sqrt(e2 + rho * rho),
        eta=spec.eta * e2 / (e2 + rho * rho),
    )
