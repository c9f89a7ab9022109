"""Translation estimation between Gaussian-atom patterns.

Three levels of machinery:

* ``descend``: gradient descent with Armijo backtracking on the squared
  distance u -> ||p(. - u) - q||^2, all evaluations in closed form.
* ``build_grid`` + ``two_stage_register``: a coarse translation grid whose
  cells are small enough that the best grid node falls inside the
  single-extremum neighborhood of the (smoothed) distance, followed by a
  descent from that node.  The grid is square with spacing sqrt(2) r_min
  where r_min is the smallest certified neighborhood radius over sampled
  directions; the farthest any plane point can be from a node is then
  exactly r_min.
* ``plan_schedule`` + ``multiscale_register``: a coarse-to-fine smoothing
  schedule.  Stage one registers on heavily smoothed copies with the grid;
  each later stage descends on less-smoothed copies starting from the
  previous estimate.

Noise enters only through ``plan_schedule``: the schedule shrinks the
filter size as fast as the noise-dependent accuracy guarantee allows,
falling back to halving when the closed-form rule gives no valid radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .atoms import Pattern, smooth_pattern
from .distance import CrossTerms
from .errors import ConfigError, NumericalError
from .noise import GAUSSIAN_ANALYTIC, GENERIC, NoiseSpec
from .siden import siden_boundary

__all__ = [
    "RegistrationResult",
    "TranslationGrid",
    "REGISTRATION_CSV_COLUMNS",
    "registration_csv_row",
    "descend",
    "build_grid",
    "two_stage_register",
    "plan_schedule",
    "multiscale_register",
]

_RHO_FLOOR = 0.1  # smallest first-stage filter size the planner will emit


@dataclass(frozen=True)
class RegistrationResult:
    """Estimated translation and bookkeeping for one registration run.

    translation estimates u* in q ~ p translated by u*; distance_value is
    the (non-negative) objective at the estimate, on the smoothed pair for
    smoothed runs; stage_trace records (rho, estimate) per stage.
    """

    translation: np.ndarray
    distance_value: float
    iterations: int
    converged: bool
    stage_trace: tuple = ()

    def __post_init__(self):
        object.__setattr__(
            self, "translation", np.asarray(self.translation, dtype=float)
        )
        if self.distance_value < 0.0:
            raise ValueError("distance_value must be non-negative")


@dataclass(frozen=True)
class TranslationGrid:
    """Square coarse-search grid covering [-t_range, t_range]^2.

    Every point of the search square lies within r_cover of some node,
    and r_cover does not exceed the certified neighborhood radius that
    generated the grid.
    """

    spacing: np.ndarray  # (2,) cell side per axis (equal for the square grid)
    points: np.ndarray  # (n, 2), row-major in (row, col)
    rho: float
    r_cover: float


REGISTRATION_CSV_COLUMNS = (
    "seed",
    "rho",
    "eta_or_nu",
    "true_tx",
    "true_ty",
    "est_tx",
    "est_ty",
    "error",
    "iterations",
    "converged",
)


def registration_csv_row(
    seed: int,
    rho: float,
    eta_or_nu: float,
    true_u: Sequence[float],
    result: RegistrationResult,
) -> str:
    """One CSV row in REGISTRATION_CSV_COLUMNS order (repr-exact floats)."""
    tu = np.asarray(true_u, dtype=float)
    err = float(np.hypot(tu[0] - result.translation[0], tu[1] - result.translation[1]))
    cells = [
        str(int(seed)),
        repr(float(rho)),
        repr(float(eta_or_nu)),
        repr(float(tu[0])),
        repr(float(tu[1])),
        repr(float(result.translation[0])),
        repr(float(result.translation[1])),
        repr(err),
        str(int(result.iterations)),
        str(bool(result.converged)).lower(),
    ]
    return ",".join(cells)


def descend(
    p: Pattern,
    q: Pattern,
    init: Sequence[float],
    max_iters: int = 500,
    grad_tol: float = 1e-8,
    armijo: float = 1e-4,
    shrink: float = 0.5,
    init_step: float = 1.0,
) -> RegistrationResult:
    """Gradient descent on u -> ||p translated by u - q||^2.

    The trial step is the Barzilai-Borwein quotient s.s / s.y of the last
    accepted move (init_step on the first iteration or when the local
    curvature s.y is not positive), then backtracking: accept the first
    step with value <= current - armijo * step * |grad|^2.  The curvature
    step matters on smoothed patterns whose minimum sits in a bent valley,
    where a plain fixed-step descent zigzags for thousands of iterations.
    Stops when the gradient norm falls under grad_tol (converged) or at
    max_iters / a failed line search (converged=False, never an
    exception).  The gradient is the pair of directional derivatives
    along the canonical axes.
    """
    ct = CrossTerms(p, q)
    u = np.asarray(init, dtype=float).copy()
    if u.shape != (2,):
        raise ConfigError("init must be a 2-vector")
    value = ct.value(u)
    converged = False
    iterations = 0
    prev_u = None
    prev_grad = None
    for _ in range(max_iters):
        grad = ct.gradient(u)
        grad_sq = float(grad @ grad)
        grad_norm = math.sqrt(grad_sq)
        if grad_norm <= grad_tol:
            converged = True
            break
        step = init_step
        if prev_grad is not None:
            s = u - prev_u
            y = grad - prev_grad
            sy = float(s @ y)
            if sy > 0.0:
                # cap so a near-flat stretch cannot launch the line search
                # from an absurd trial step
                step = min(float(s @ s) / sy, 1e3)
        accepted = False
        while step > 1e-18:
            cand = u - step * grad
            cand_value = ct.value(cand)
            if cand_value <= value - armijo * step * grad_sq:
                accepted = True
                break
            step *= shrink
        if not accepted:
            # Near the minimum the objective decrease drowns in rounding
            # (it is a difference of O(|p|^2) terms) while the gradient is
            # still resolvable; accept a non-increasing step that shrinks
            # the gradient instead.
            step = init_step
            while step > 1e-18:
                cand = u - step * grad
                cand_value = ct.value(cand)
                cand_grad = ct.gradient(cand)
                if cand_value <= value and float(
                    cand_grad @ cand_grad
                ) < grad_sq * (1.0 - 1e-9):
                    accepted = True
                    break
                step *= shrink
        if not accepted:
            break
        prev_u = u
        prev_grad = grad
        u = cand
        value = cand_value
        iterations += 1
    else:
        converged = math.sqrt(float(ct.gradient(u) @ ct.gradient(u))) <= grad_tol
    return RegistrationResult(
        translation=u,
        distance_value=max(value, 0.0),
        iterations=iterations,
        converged=converged,
    )


def build_grid(
    p: Pattern, rho: float, t_range: float, n_directions: int = 128
) -> TranslationGrid:
    """Covering grid for the search square, sized by the certified radius.

    r_min is the smallest single-extremum radius of p smoothed by rho over
    the sampled directions; the square grid of spacing sqrt(2) r_min then
    covers the plane with balls of radius r_min.  A degenerate estimate
    (zero radius along some direction) cannot support a covering grid.
    """
    if t_range <= 0.0:
        raise ConfigError("t_range must be positive")
    est = siden_boundary(p, n_directions=n_directions, rho=rho)
    if bool(np.any(est.degenerate)):
        raise NumericalError(
            "single-extremum estimate is degenerate (zero radius along "
            "some direction); no covering grid exists at this filter size"
        )
    r_min = est.r_min
    s = math.sqrt(2.0) * r_min
    n_side = max(int(math.ceil(2.0 * t_range / s)), 1)
    offsets = (np.arange(n_side) - (n_side - 1) / 2.0) * s
    gx, gy = np.meshgrid(offsets, offsets)  # row-major: y slow, x fast
    points = np.column_stack([gx.ravel(), gy.ravel()])
    return TranslationGrid(
        spacing=np.array([s, s]),
        points=points,
        rho=float(rho),
        r_cover=min(s / math.sqrt(2.0), r_min),
    )


def two_stage_register(
    p: Pattern,
    q: Pattern,
    rho: float,
    t_range: float,
    n_directions: int = 128,
    **descend_opts,
) -> RegistrationResult:
    """Coarse grid search plus descent refinement at one filter size.

    Both patterns are smoothed by rho; the grid node with the smallest
    distance (ties: lowest row-major index) seeds the descent.  The
    translation estimate applies unchanged to the unsmoothed pair.
    """
    grid = build_grid(p, rho, t_range, n_directions=n_directions)
    ps = smooth_pattern(p, rho)
    qs = smooth_pattern(q, rho)
    ct = CrossTerms(ps, qs)
    # The grid scan allocates (nodes, atom pairs, 2) scratch; chunk it so
    # noisy targets with hundreds of atoms stay within tens of megabytes.
    # Strict < keeps the lowest-index tie rule of a whole-grid argmin.
    n_pairs = max(len(ct.camp), 1)
    chunk = max(1, 4_000_000 // n_pairs)
    best = 0
    best_value = math.inf
    for start in range(0, len(grid.points), chunk):
        vals = ct.values(grid.points[start : start + chunk])
        i = int(np.argmin(vals))
        if vals[i] < best_value:
            best_value = float(vals[i])
            best = start + i
    result = descend(ps, qs, grid.points[best], **descend_opts)
    return RegistrationResult(
        translation=result.translation,
        distance_value=result.distance_value,
        iterations=result.iterations,
        converged=result.converged,
        stage_trace=((float(rho), result.translation),),
    )


def plan_schedule(
    t_star_hint: float,
    noise: NoiseSpec,
    n_stages: int,
    rho_min: float = 0.0,
) -> list[float]:
    """Coarse-to-fine filter sizes for multiscale registration.

    The first size makes the certified neighborhood swallow the expected
    translation magnitude: rho_1 = max(sqrt(t*^2 - 1), 0.1).  Each later
    size is the largest the noise-dependent accuracy guarantee of the
    previous stage allows:

        analytic Gaussian noise: sqrt(eta rho^3 / (1 - eta rho) - 1)
        generic noise of norm nu: sqrt((nu / (1 - nu)) (1 + rho^2) - 1)

    Whenever the rule is undefined (radicand <= 0) or fails to shrink, the
    stage halves the previous size instead.  The last size is lifted to
    rho_min if it fell below it; the lift is skipped when it would break
    the strict decrease.
    """
    if t_star_hint <= 0.0:
        raise ConfigError("t_star_hint must be positive")
    if n_stages < 1:
        raise ConfigError("n_stages must be at least 1")
    if rho_min < 0.0:
        raise ConfigError("rho_min must be non-negative")
    radicand = t_star_hint * t_star_hint - 1.0
    rho1 = max(math.sqrt(radicand) if radicand > 0.0 else 0.0, _RHO_FLOOR)
    schedule = [rho1]
    for _ in range(1, n_stages):
        prev = schedule[-1]
        cand: Optional[float] = None
        if noise.kind == GAUSSIAN_ANALYTIC and noise.eta > 0.0:
            denom = 1.0 - noise.eta * prev
            if denom > 0.0:
                radicand = noise.eta * prev**3 / denom - 1.0
                if radicand > 0.0:
                    cand = math.sqrt(radicand)
        elif noise.kind == GENERIC and 0.0 < noise.nu < 1.0:
            radicand = noise.nu / (1.0 - noise.nu) * (1.0 + prev * prev) - 1.0
            if radicand > 0.0:
                cand = math.sqrt(radicand)
        if cand is None or cand >= prev:
            cand = prev / 2.0
        schedule.append(cand)
    if n_stages == 1:
        schedule[-1] = max(schedule[-1], rho_min)
    elif schedule[-1] < rho_min < schedule[-2]:
        schedule[-1] = rho_min
    return schedule


def multiscale_register(
    p: Pattern,
    q: Pattern,
    schedule: Sequence[float],
    t_range: float,
    n_directions: int = 128,
    **descend_opts,
) -> RegistrationResult:
    """Run the schedule: grid + descent at the coarsest size, then descents
    at each finer size starting from the previous estimate.

    iterations accumulates over stages; converged and distance_value are
    the final stage's.  A one-element schedule reduces exactly to
    ``two_stage_register``.
    """
    if len(schedule) == 0:
        raise ConfigError("schedule must be nonempty")
    rhos = [float(r) for r in schedule]
    if any(b >= a for a, b in zip(rhos, rhos[1:])):
        raise ConfigError("schedule must be strictly decreasing")
    if rhos[-1] < 0.0:
        raise ConfigError("filter sizes must be non-negative")
    first = two_stage_register(
        p, q, rhos[0], t_range, n_directions=n_directions, **descend_opts
    )
    trace = list(first.stage_trace)
    u = first.translation
    total_iterations = first.iterations
    result = first
    for rho in rhos[1:]:
        ps = smooth_pattern(p, rho)
        qs = smooth_pattern(q, rho)
        result = descend(ps, qs, u, **descend_opts)
        u = result.translation
        total_iterations += result.iterations
        trace.append((rho, u))
    return RegistrationResult(
        translation=u,
        distance_value=result.distance_value,
        iterations=total_iterations,
        converged=result.converged,
        stage_trace=tuple(trace),
    )
