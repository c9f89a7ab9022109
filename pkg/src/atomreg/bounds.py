"""Registration-accuracy bounds.

Everything here feeds one goal: given a pattern p and a noise description,
certify how far noise can move the global minimum of the distance profile.

The chain of constants, all in closed form over atom pairs:

* (r0_lb, r2_lb, r3_lb): coefficients of the cubic lower bound
  d2f/dt2 >= r0_lb + r2_lb t^2 + r3_lb t^3 on a ball around the origin.
  r0_lb is the smallest eigenvalue of the distance Hessian at 0.
* tbar0: the radius where that cubic is still safely positive,
  sqrt(r0 / (2|r2| + 2^{2/3} r0^{1/3} |r3|^{2/3})).
* C_var_dh, C_var_h2: uniform variance bounds (over the tbar0-ball) for the
  deviation-function increment and its second derivative under the analytic
  Gaussian noise field; variance <= C * eta^2.
* eta0 / R_t0: admissible noise deviation and the Chebyshev error bound at
  confidence 1 - 2/s^2 (s > sqrt(2)).
* nu0 / R_u0 and the correlation-aware variant: deterministic bounds for an
  arbitrary noise pattern of norm nu.

Per-atom noise constants (noise scale eps): Phi_k is the inverse of the
atom covariance inflated by eps^2 * I, alpha_k/beta_k its extreme
eigenvalues, and kappa_k = pi |sigma_k| eps^2 / sqrt((sx^2+eps^2)(sy^2+eps^2))
the peak inner product with one noise atom.  These are cached per (pattern,
epsilon): patterns are immutable and the same pattern is interrogated many
times during sweeps.

The eta-above-threshold case is not an error: the report simply carries
eta0 and omits R_t0 with a diagnostic note.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.special import erf

from .atoms import Pattern, pattern_norm
from .distance import SelfPairs, CrossTerms
from .errors import NumericalError
from .noise import NoiseSpec
from .siden import _alpha_arrays  # reused for the sharpened variance search

__all__ = [
    "BoundReport",
    "BOUND_CSV_COLUMNS",
    "second_derivative_constants",
    "tbar0",
    "var_dh_constant",
    "var_h2_constant",
    "var_h2_sharpened",
    "gaussian_bound",
    "second_derivative_norm_bound",
    "generic_bound",
    "correlation_bound",
    "uncorrelated_bound",
]

_SQRT2 = math.sqrt(2.0)


@lru_cache(maxsize=256)
def _atom_noise_constants(p: Pattern, epsilon: float):
    """(kappa, alpha, beta) arrays for the atoms of p at noise scale eps.

    alpha/beta are the extreme eigenvalues of Phi_k; rotations do not move
    eigenvalues, so they are 1 / (max(sigma)^2 + eps^2) and
    1 / (min(sigma)^2 + eps^2).
    """
    e2 = epsilon * epsilon
    sx2 = p.sigmas[:, 0] ** 2
    sy2 = p.sigmas[:, 1] ** 2
    kappa = (
        math.pi
        * p.sigmas[:, 0]
        * p.sigmas[:, 1]
        * e2
        / np.sqrt((sx2 + e2) * (sy2 + e2))
    )
    alpha = 1.0 / (np.maximum(sx2, sy2) + e2)
    beta = 1.0 / (np.minimum(sx2, sy2) + e2)
    return kappa, alpha, beta


def second_derivative_constants(p: Pattern) -> tuple[float, float, float]:
    """(r0_lb, r2_lb, r3_lb) of the cubic lower bound for d2f/dt2.

    r0_lb is the smallest eigenvalue of the Hessian-at-zero matrix

        R0 = sum cc q (Sigma^{-1} - Sigma^{-1} dtau dtau^T Sigma^{-1});

    it must be positive, otherwise the pattern has a direction of vanishing
    curvature and no descent radius can be certified (NumericalError).
    r2_lb <= 0 and r3_lb < 0 come from pairwise eigenvalue bounds.
    """
    sp = SelfPairs(p)
    sd = np.einsum("nij,nj->ni", sp.inv, sp.dtau)  # Sigma^{-1} dtau
    outer = sd[:, :, None] * sd[:, None, :]
    r0_mat = np.einsum("n,nij->ij", sp.cc * sp.q, sp.inv - outer)
    eigs = np.linalg.eigvalsh(0.5 * (r0_mat + r0_mat.T))
    r0 = float(eigs[0])
    if r0 <= 0.0:
        raise NumericalError(
            f"distance Hessian at the origin is not positive definite "
            f"(smallest eigenvalue {r0:.3e}); cannot certify a descent radius"
        )
    # 2x2 symmetric eigenvalues of Sigma^{-1} per pair.
    tr = sp.inv[:, 0, 0] + sp.inv[:, 1, 1]
    det = sp.inv[:, 0, 0] * sp.inv[:, 1, 1] - sp.inv[:, 0, 1] * sp.inv[:, 1, 0]
    disc = np.sqrt(np.maximum(tr * tr / 4.0 - det, 0.0))
    lam_max = tr / 2.0 + disc
    lam_min = tr / 2.0 - disc
    lam_r2 = np.einsum("ni,ni->n", sd, sd)  # rank-1, largest eigenvalue
    a_hi2 = lam_max**2 / 4.0
    a_lo2 = lam_min**2 / 4.0
    b_hi2a = lam_r2 * lam_max / 8.0
    b_hi4 = lam_r2**2 / 16.0
    ccq = sp.cc * sp.q
    pos = sp.cc > 0.0
    neg = sp.cc < 0.0
    r2p = float(
        np.sum(ccq[pos] * (-8.0 * b_hi4[pos] - 6.0 * a_hi2[pos]))
        + np.sum(ccq[neg] * (24.0 * b_hi2a[neg] - 6.0 * a_lo2[neg]))
    )
    r2 = min(r2p, 0.0)
    r3 = -float(np.sum((5.46 / 2**2.5) * np.abs(sp.cc) * sp.amp0 * lam_max**2.5))
    return r0, r2, r3


def tbar0(r0: float, r2: float, r3: float) -> float:
    """Radius on which the cubic curvature bound is exploited."""
    if r0 <= 0.0:
        raise ValueError("r0 must be positive")
    return math.sqrt(r0 / (2.0 * abs(r2) + 2 ** (2.0 / 3.0) * r0 ** (1.0 / 3.0) * abs(r3) ** (2.0 / 3.0)))


def _pairwise_box_terms(p: Pattern, spec: NoiseSpec, t0: float):
    """Appendix-style pairwise envelope terms over the noise box [-b, b]^2.

    Returns (B_lo, B_hi, C_lo, C_hi, D_lo, D_hi) as (K, K) arrays:
    the lower/upper envelopes of the three Gaussian-moment integrals that
    build the variance bounds.  'lo' uses the larger eigenvalue beta
    (fastest decay), 'hi' the smaller eigenvalue alpha.
    """
    _, alpha, beta = _atom_noise_constants(p, spec.epsilon)
    b = spec.b
    tau = p.taus
    dta = tau[None, :, :] - tau[:, None, :]  # tau_k - tau_j, (K, K, 2)
    d2 = np.sum(dta * dta, axis=2)

    bj = beta[:, None]
    bk = beta[None, :]
    bsum = bj + bk
    bprod = bj * bk
    aj = alpha[:, None]
    ak = alpha[None, :]
    asum = aj + ak
    aprod = aj * ak

    def fold_axes(fn):
        return fn(0) + fn(1)

    # frak-b: (beta_j+beta_k) (b + t0 + |weighted mean|)^2, per axis.
    def frak_b(axis):
        w = (bj * tau[:, None, axis] + bk * tau[None, :, axis]) / bsum
        return bsum * (b + t0 + np.abs(w)) ** 2

    # frak-c: offset uses t0 beta_j / (beta_j+beta_k) (order-sensitive).
    def frak_c(axis):
        w = (bj * tau[:, None, axis] + bk * tau[None, :, axis]) / bsum
        return bsum * (b + t0 * bj / bsum + np.abs(w)) ** 2

    def frak_d(axis):
        return (bprod / bsum) * (t0 + np.abs(dta[:, :, axis])) ** 2

    def d_integral(lam_j, lam_k):
        """Product over axes of the erf-windowed Gaussian moment."""
        s = lam_j + lam_k
        out = np.ones_like(s)
        for axis in (0, 1):
            tj = tau[:, None, axis]
            tk = tau[None, :, axis]
            h = -(lam_j * tj + lam_k * tk) / s
            g = (lam_j * tj**2 + lam_k * tk**2) / s
            rs = np.sqrt(s)
            out = out * (
                (math.sqrt(math.pi) / (4.0 * b))
                / rs
                * np.exp(-s * (g - h * h))
                * (erf(rs * (b + h)) - erf(rs * (-b + h)))
            )
        return out

    b_lo = np.exp(-fold_axes(frak_b) - bprod * d2 / bsum)
    b_hi = math.pi / (4.0 * b * b * asum) * np.exp(-aprod * d2 / asum)
    c_lo = np.exp(-fold_axes(frak_c) - fold_axes(frak_d))
    c_hi = math.pi / (4.0 * b * b * asum)
    d_lo = d_integral(bj, bk)
    d_hi = d_integral(aj, ak)
    return b_lo, b_hi, c_lo, c_hi, d_lo, d_hi


def var_dh_constant(p: Pattern, spec: NoiseSpec, t0: float) -> float:
    """Uniform variance-bound constant for the deviation increment:
    Var(h(0) - h(tT)) <= C * eta^2 on the ball of radius t0."""
    kappa, _, _ = _atom_noise_constants(p, spec.epsilon)
    b_lo, b_hi, c_lo, c_hi, d_lo, d_hi = _pairwise_box_terms(p, spec, t0)
    c_bar = b_hi - 2.0 * c_lo + d_hi
    d_lb = b_lo - 2.0 * c_hi + d_lo
    w = np.outer(p.coeffs * kappa, p.coeffs * kappa)
    cc = np.outer(p.coeffs, p.coeffs)
    total = np.sum(w[cc > 0] * c_bar[cc > 0]) + np.sum(w[cc < 0] * d_lb[cc < 0])
    return 4.0 * spec.L * float(total)


def var_h2_constant(p: Pattern, spec: NoiseSpec, t0: float) -> float:
    """Uniform variance-bound constant for the deviation's second
    derivative: Var(h''(tT)) <= C * eta^2 on the ball of radius t0."""
    kappa, alpha, beta = _atom_noise_constants(p, spec.epsilon)
    b = spec.b
    l_bar = ((3**0.75 + 3**1.25) * math.exp(-math.sqrt(3.0) / 2.0) / 16.0
             + 3.0 * math.sqrt(math.pi) / 2**4.5) / alpha**2.5
    m_bar = np.sqrt(math.pi / (2.0 * alpha))
    n_bar = (math.exp(-0.5) / 4.0 + math.sqrt(math.pi) / 2**2.5) / alpha**1.5
    e_hh = beta**4 / (4.0 * b * b) * (2.0 * l_bar * m_bar + 2.0 * n_bar**2)
    f_hh = m_bar**2 / (4.0 * b * b)
    b_lo, b_hi, _, _, _, _ = _pairwise_box_terms(p, spec, t0)
    bj, bk = beta[:, None], beta[None, :]
    e_bar = 16.0 * np.sqrt(np.outer(e_hh, e_hh)) + 4.0 * bj * bk * b_hi
    f_lb = (
        -8.0 * bk * np.sqrt(e_hh[:, None] * f_hh[None, :])
        - 8.0 * bj * np.sqrt(f_hh[:, None] * e_hh[None, :])
        + 4.0 * np.outer(alpha, alpha) * b_lo
    )
    w = np.outer(p.coeffs * kappa, p.coeffs * kappa)
    cc = np.outer(p.coeffs, p.coeffs)
    total = np.sum(w[cc > 0] * e_bar[cc > 0]) + np.sum(w[cc < 0] * f_lb[cc < 0])
    return 4.0 * spec.L * float(total)


def var_h2_sharpened(
    p: Pattern,
    spec: NoiseSpec,
    t0: float,
    n_t: int = 17,
    n_directions: int = 32,
    n_quad: int = 64,
) -> float:
    """Numeric maximum of Var(h''(tT)) / eta^2 over the t0-ball.

    Not a certified constant: the exact per-noise-atom variance
    4 L E_delta[(d^2/dt^2 <p, atom(delta + tT)>)^2] is integrated over the
    center box by Gauss-Legendre and maximized on a (t, T) grid.  Use for
    plotting/diagnostics; the certified path is ``var_h2_constant``.
    """
    kappa, _, _ = _atom_noise_constants(p, spec.epsilon)
    e2 = spec.epsilon**2
    # Phi_k matrices (full, rotation included).
    cov = p.covariances + e2 * np.eye(2)
    det = cov[:, 0, 0] * cov[:, 1, 1] - cov[:, 0, 1] * cov[:, 1, 0]
    phi = np.empty_like(cov)
    phi[:, 0, 0] = cov[:, 1, 1]
    phi[:, 1, 1] = cov[:, 0, 0]
    phi[:, 0, 1] = -cov[:, 0, 1]
    phi[:, 1, 0] = -cov[:, 1, 0]
    phi /= det[:, None, None]

    nodes, weights = np.polynomial.legendre.leggauss(n_quad)
    xs = spec.b * nodes
    wq = spec.b * weights
    gx, gy = np.meshgrid(xs, xs)
    deltas = np.column_stack([gx.ravel(), gy.ravel()])  # (Nq, 2)
    wgrid = np.outer(wq, wq).ravel()

    angles = np.pi * np.arange(n_directions) / n_directions
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    ts = np.linspace(0.0, t0, n_t)

    best = 0.0
    for T in dirs:
        a_k = np.einsum("i,kij,j->k", T, phi, T)  # (K,)
        for t in ts:
            mu = deltas[None, :, :] + t * T[None, None, :] - p.taus[:, None, :]
            quad = np.einsum("kni,kij,knj->kn", mu, phi, mu)
            bterm = np.einsum("i,kij,knj->kn", T, phi, mu)
            g = np.exp(np.maximum(-quad, -745.0))
            second = (4.0 * bterm**2 - 2.0 * a_k[:, None]) * g
            j2 = (p.coeffs * kappa) @ second  # (Nq,)
            integral = float(np.sum(wgrid * j2 * j2)) / (4.0 * spec.b**2)
            val = 4.0 * spec.L * integral
            if val > best:
                best = val
    return best


_DEF_DIAG = ""


@dataclass(frozen=True)
class BoundReport:
    """All bound constants for one (pattern, noise) pair.

    Gaussian-model fields are always set; generic-model fields are None
    unless the generic analysis was run.  rt0 is None when eta exceeds
    eta0 (see rt0_diagnostic), ru0/qu0 are None when nu exceeds their
    admissible thresholds.
    """

    r0_lb: float
    r2_lb: float
    r3_lb: float
    tbar0: float
    s: float
    probability: float
    c_var_dh: float
    c_var_h2: float
    eta: float
    eta0: float
    rt0: Optional[float]
    two_sided: bool
    rt0_diagnostic: str = _DEF_DIAG
    rp: Optional[float] = None
    rp2: Optional[float] = None
    nu: Optional[float] = None
    nu0: Optional[float] = None
    ru0: Optional[float] = None
    rpz: Optional[float] = None
    qu0: Optional[float] = None

    def to_text(self) -> str:
        """Flat key = value block, one constant per line."""
        lines = []
        for key in BOUND_CSV_COLUMNS:
            value = getattr(self, _FIELD_OF[key])
            if value is None:
                continue
            if isinstance(value, bool):
                lines.append(f"{key} = {str(value).lower()}")
            else:
                lines.append(f"{key} = {value!r}")
        if self.rt0_diagnostic:
            lines.append(f"# {self.rt0_diagnostic}")
        return "\n".join(lines) + "\n"

    def to_csv_row(self) -> str:
        """One CSV row in BOUND_CSV_COLUMNS order; None becomes empty."""
        cells = []
        for key in BOUND_CSV_COLUMNS:
            value = getattr(self, _FIELD_OF[key])
            if value is None:
                cells.append("")
            elif isinstance(value, bool):
                cells.append(str(value).lower())
            else:
                cells.append(repr(value))
        return ",".join(cells)


# Column order of the one-row CSV serialization (documented contract).
BOUND_CSV_COLUMNS = (
    "r0",
    "r2",
    "r3",
    "tbar0",
    "s",
    "probability",
    "C_var_dh",
    "C_var_h2",
    "eta",
    "eta0",
    "rt0",
    "two_sided",
    "rp",
    "rp2",
    "nu",
    "nu0",
    "ru0",
    "rpz",
    "qu0",
)

_FIELD_OF = {
    "r0": "r0_lb",
    "r2": "r2_lb",
    "r3": "r3_lb",
    "tbar0": "tbar0",
    "s": "s",
    "probability": "probability",
    "C_var_dh": "c_var_dh",
    "C_var_h2": "c_var_h2",
    "eta": "eta",
    "eta0": "eta0",
    "rt0": "rt0",
    "two_sided": "two_sided",
    "rp": "rp",
    "rp2": "rp2",
    "nu": "nu",
    "nu0": "nu0",
    "ru0": "ru0",
    "rpz": "rpz",
    "qu0": "qu0",
}


def gaussian_bound(
    p: Pattern,
    spec: NoiseSpec,
    s: float = 2.0,
    two_sided: bool = False,
    sharpened: bool = False,
) -> BoundReport:
    """Probabilistic error bound for the analytic Gaussian noise model.

    With confidence 1 - 2/s^2 (s > sqrt(2)) and eta <= eta0, the global
    minimum moves by less than rt0.  two_sided adapts the constants to
    noise on both images (sqrt(2) inflation of the deviation terms).
    sharpened swaps the certified variance constant of h'' for the numeric
    maximum (plotting paths); the admissibility threshold moves with it.
    """
    if s <= _SQRT2:
        raise ValueError("confidence parameter s must exceed sqrt(2)")
    r0, r2, r3 = second_derivative_constants(p)
    t0 = tbar0(r0, r2, r3)
    c_dh = var_dh_constant(p, spec, t0)
    c_h2 = (
        var_h2_sharpened(p, spec, t0) if sharpened else var_h2_constant(p, spec, t0)
    )
    c_dh_s = math.sqrt(max(c_dh, 0.0))
    c_h2_s = math.sqrt(max(c_h2, 0.0))
    lift = _SQRT2 if two_sided else 1.0
    eta0 = t0 * t0 * r0 / (2.0 * lift * s * c_dh_s + lift * t0 * t0 * s * c_h2_s)
    eta = spec.eta
    rt0 = None
    diag = _DEF_DIAG
    if eta <= eta0:
        denom = r0 - lift * s * c_h2_s * eta
        rt0 = math.sqrt(2.0 * lift * s * c_dh_s * eta / denom)
    else:
        diag = (
            f"eta = {eta:.6g} exceeds the admissible level eta0 = {eta0:.6g}; "
            "no error bound is certified at this noise deviation"
        )
    return BoundReport(
        r0_lb=r0,
        r2_lb=r2,
        r3_lb=r3,
        tbar0=t0,
        s=s,
        probability=1.0 - 2.0 / (s * s),
        c_var_dh=c_dh,
        c_var_h2=c_h2,
        eta=eta,
        eta0=eta0,
        rt0=rt0,
        two_sided=two_sided,
        rt0_diagnostic=diag,
    )


def second_derivative_norm_bound(
    p: Pattern, n_directions: int = 64, margin: float = 1.05
) -> float:
    """Upper bound for || d^2 p(. + tT) / dt^2 || over all translations.

    The squared norm is the pairwise sum cc (q/2)(12 a^2 - 48 a b^2 +
    16 b^4); translation leaves it unchanged, so the supremum over t is the
    value at any t and only the direction sweep matters.  The sampled
    maximum over n_directions half-circle directions is inflated by
    ``margin`` to cover the directions in between.
    """
    sp = SelfPairs(p)
    angles = np.pi * np.arange(n_directions) / n_directions
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    a = 0.5 * np.einsum("mi,nij,mj->nm", dirs, sp.inv, dirs)
    b = 0.5 * np.einsum("mi,nij,nj->nm", dirs, sp.inv, sp.dtau)
    ccq = (sp.cc * sp.q)[:, None]
    norm_sq = np.sum(
        ccq * 0.5 * (12.0 * a * a - 48.0 * a * b * b + 16.0 * b**4), axis=0
    )
    return margin * math.sqrt(float(np.max(norm_sq)))


def generic_bound(
    p: Pattern,
    nu: float,
    two_sided: bool = False,
    rp2: Optional[float] = None,
) -> BoundReport:
    """Deterministic error bound for an arbitrary noise pattern of norm nu.

    two_sided doubles the effective noise norm (noise on both images).
    rp2 may be passed in to reuse a precomputed second-derivative norm
    bound.
    """
    r0, r2, r3 = second_derivative_constants(p)
    t0 = tbar0(r0, r2, r3)
    rp = pattern_norm(p)
    if rp2 is None:
        rp2 = second_derivative_norm_bound(p)
    k = 2.0 if two_sided else 1.0
    nu0 = t0 * t0 * r0 / (8.0 * k * rp + 2.0 * k * rp2 * t0 * t0)
    ru0 = None
    diag = _DEF_DIAG
    if nu <= nu0:
        ru0 = math.sqrt(8.0 * k * rp * nu / (r0 - 2.0 * k * rp2 * nu))
    else:
        diag = (
            f"nu = {nu:.6g} exceeds the admissible norm nu0 = {nu0:.6g}; "
            "no error bound is certified at this noise norm"
        )
    return BoundReport(
        r0_lb=r0,
        r2_lb=r2,
        r3_lb=r3,
        tbar0=t0,
        s=math.nan,
        probability=1.0,
        c_var_dh=math.nan,
        c_var_h2=math.nan,
        eta=math.nan,
        eta0=math.nan,
        rt0=None,
        two_sided=two_sided,
        rt0_diagnostic=diag,
        rp=rp,
        rp2=rp2,
        nu=nu,
        nu0=nu0,
        ru0=ru0,
    )


def correlation_bound(
    p: Pattern,
    z: Pattern,
    t_max: float,
    n_t: int = 200,
    n_directions: int = 64,
    margin: float = 1.02,
) -> float:
    """Uniform bound on |<p(. + tT), z>| over all translations up to t_max.

    Dense polar grid, two local refinement passes around the maximizer,
    then a small safety margin for the continuum in between.
    """
    if t_max <= 0.0:
        raise ValueError("t_max must be positive")
    ct = CrossTerms(p, z)
    angles = 2.0 * np.pi * np.arange(n_directions) / n_directions
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    ts = np.linspace(0.0, t_max, n_t)
    # p(X + tT) shifts atom centers by -tT, i.e. cross at u = -tT; the grid
    # covers the full circle so the sign is absorbed.
    us = (ts[:, None, None] * dirs[None, :, :]).reshape(-1, 2)
    vals = np.abs(ct.cross(us))
    best_idx = int(np.argmax(vals))
    best_u = us[best_idx]
    best = float(vals[best_idx])
    step = t_max / (n_t - 1)
    for _ in range(2):
        offs = np.linspace(-step, step, 11)
        ox, oy = np.meshgrid(offs, offs)
        cand = best_u[None, :] + np.column_stack([ox.ravel(), oy.ravel()])
        vals = np.abs(ct.cross(cand))
        i = int(np.argmax(vals))
        if float(vals[i]) > best:
            best = float(vals[i])
            best_u = cand[i]
        step /= 5.0
    return margin * best


def uncorrelated_bound(
    p: Pattern,
    nu: float,
    rpz: float,
    rp2: Optional[float] = None,
) -> tuple[float, Optional[float]]:
    """(nu0, Qu0) for a noise pattern with small manifold correlation rpz.

    Requires rpz < tbar0^2 r0 / 8; raises NumericalError naming the
    threshold otherwise.  Qu0 is None when nu exceeds nu0.
    """
    r0, r2, r3 = second_derivative_constants(p)
    t0 = tbar0(r0, r2, r3)
    threshold = t0 * t0 * r0 / 8.0
    if rpz >= threshold:
        raise NumericalError(
            f"correlation bound rpz = {rpz:.6g} is not below the admissible "
            f"threshold tbar0^2 r0 / 8 = {threshold:.6g}"
        )
    if rp2 is None:
        rp2 = second_derivative_norm_bound(p)
    nu0 = (t0 * t0 * r0 - 8.0 * rpz) / (2.0 * rp2 * t0 * t0)
    qu0 = None
    if nu <= nu0:
        qu0 = math.sqrt(8.0 * rpz / (r0 - 2.0 * rp2 * nu))
    return nu0, qu0
