"""Seeded experiment sweeps emitting deterministic CSV artifacts.

Every sweep is a pure function of its configuration.  Trial i draws all
of its randomness from the Philox stream (root seed, i); aggregation
walks trials in index order regardless of the worker count; rows are
sorted before writing and floats serialized with repr.  Re-running any
sweep with the same configuration therefore reproduces the output file
byte for byte.

Defaults are desk-scale (each subcommand finishes in minutes on one
core).  The heavier protocols from the experiment write-ups, such as the
750-atom noise field or 300-trial descent-region sweeps, are reached by
raising the same keys in a config file.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Optional

import numpy as np

from .atoms import Pattern, pattern_norm, smooth_pattern, translate_pattern
from .bounds import (
    BOUND_CSV_COLUMNS,
    BoundReport,
    correlation_bound,
    gaussian_bound,
    generic_bound,
    second_derivative_norm_bound,
    uncorrelated_bound,
)
from .errors import ConfigError
from .ingestion import load_pattern
from .noise import (
    GAUSSIAN_ANALYTIC,
    NoiseSpec,
    make_generic_noise,
    sample_gaussian_field,
    smoothed_noise_params,
)
from .registration import build_grid, registration_csv_row, two_stage_register
from .rng import stream
from .siden import delta_T, true_siden_boundary
from .synthetic import (
    digit_like_pattern,
    face_like_pattern,
    random_direction,
    random_pattern,
    random_translation,
)

__all__ = [
    "SweepConfig",
    "SweepResult",
    "SUBCOMMAND_DEFAULTS",
    "default_config",
    "parse_config_text",
    "apply_overrides",
    "format_config",
    "resolve_pattern",
    "run_siden_sweep",
    "run_error_sweep",
    "run_grid_count",
    "run_bounds_report",
    "bound_report_csv",
]

_SQRT2 = math.sqrt(2.0)
_PATTERN_SOURCES = ("random", "face-like", "digit-like", "file")
_NOISE_KINDS = ("gaussian", "correlated", "uncorrelated")
_GENERIC_MODE = {"correlated": "correlated-subset", "uncorrelated": "random-atoms"}


@dataclass(frozen=True)
class SweepConfig:
    """Flat key=value configuration shared by all sweep subcommands.

    Scalar eta / nu / rho feed the single-point bounds report; the _list
    variants drive sweeps.  Unused keys are ignored by each runner.
    """

    pattern: str = "random"
    pattern_file: str = ""
    n_atoms: int = 20
    coeff_min: float = -1.0
    coeff_max: float = 1.0
    tau_min: float = -4.0
    tau_max: float = 4.0
    sigma_min: float = 0.3
    sigma_max: float = 2.0
    rho_list: tuple = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
    eta_list: tuple = (0.0, 0.005, 0.01, 0.02)
    nu_list: tuple = (0.0, 0.02, 0.05, 0.1)
    noise: str = "gaussian"
    noise_atoms: int = 5
    trials: int = 50
    targets: int = 20
    seed: int = 0
    t_range: float = 4.0
    L: int = 750
    epsilon: float = 0.1
    b: float = 4.0
    s: float = 2.0
    two_sided: bool = False
    sharpened: bool = False
    grad_tol: float = 1e-6
    n_directions: int = 128
    eta: float = 0.02
    nu: float = 0.05
    rho: float = 0.0
    threads: int = 1
    out: str = ""
    per_run_out: str = ""

    def __post_init__(self):
        if self.pattern not in _PATTERN_SOURCES:
            raise ConfigError(
                f"pattern must be one of {_PATTERN_SOURCES}, got {self.pattern!r}"
            )
        if self.noise not in _NOISE_KINDS:
            raise ConfigError(
                f"noise must be one of {_NOISE_KINDS}, got {self.noise!r}"
            )
        if self.trials < 1 or self.targets < 1:
            raise ConfigError("trials and targets must be at least 1")
        if self.n_atoms < 1 or self.noise_atoms < 1:
            raise ConfigError("atom counts must be at least 1")
        if not self.rho_list:
            raise ConfigError("rho_list must be nonempty")
        if any(r < 0.0 for r in self.rho_list):
            raise ConfigError("rho values must be non-negative")
        if self.t_range <= 0.0:
            raise ConfigError("t_range must be positive")
        if self.L < 1 or self.epsilon <= 0.0 or self.b <= 0.0:
            raise ConfigError("noise field needs L >= 1, epsilon > 0, b > 0")
        if self.s <= _SQRT2:
            raise ConfigError("confidence parameter s must exceed sqrt(2)")
        if self.grad_tol <= 0.0:
            raise ConfigError("grad_tol must be positive")
        if self.n_directions < 1:
            raise ConfigError("n_directions must be at least 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.eta < 0.0 or self.nu < 0.0 or self.rho < 0.0:
            raise ConfigError("eta, nu, and rho must be non-negative")


SUBCOMMAND_DEFAULTS = {
    "siden-sweep": {"trials": 300, "n_atoms": 40, "out": "siden_sweep.csv"},
    "error-sweep": {
        "trials": 10,
        "targets": 10,
        "L": 200,
        "rho_list": (0.0, 1.0, 2.0, 3.0),
        "out": "error_sweep.csv",
    },
    "grid-count": {"out": "grid_count.csv"},
    "bounds": {"out": "bounds_report.csv"},
}

_FIELDS = {f.name: f for f in dataclasses.fields(SweepConfig)}


def default_config(subcommand: str) -> SweepConfig:
    if subcommand not in SUBCOMMAND_DEFAULTS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    return SweepConfig(**SUBCOMMAND_DEFAULTS[subcommand])


def _parse_value(name: str, text: str):
    if name not in _FIELDS:
        raise ConfigError(
            f"unknown config key {name!r} (valid keys: {', '.join(_FIELDS)})"
        )
    default = _FIELDS[name].default
    text = text.strip()
    try:
        if isinstance(default, bool):
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"expected true/false, got {text!r}")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(float(tok) for tok in text.split(",") if tok.strip())
        return text
    except ValueError as exc:
        raise ConfigError(f"config key {name}: {exc}") from None


def parse_config_text(text: str) -> dict:
    """key = value lines; '#' comments and blank lines ignored."""
    mapping = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        mapping[key.strip()] = value.strip()
    return mapping


def apply_overrides(cfg: SweepConfig, mapping: dict) -> SweepConfig:
    """New config with the string-valued mapping parsed on top of cfg."""
    parsed = {k: _parse_value(k, v) for k, v in mapping.items()}
    return dataclasses.replace(cfg, **parsed)


def format_config(cfg: SweepConfig) -> str:
    """key = value lines that parse back to an identical config."""
    lines = []
    for f in dataclasses.fields(SweepConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            text = str(value).lower()
        elif isinstance(value, tuple):
            text = ",".join(repr(float(v)) for v in value)
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# result container

def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


@dataclass(frozen=True)
class SweepResult:
    header: tuple
    rows: tuple

    def to_csv(self) -> str:
        lines = [",".join(self.header)]
        lines.extend(",".join(_cell(v) for v in row) for row in self.rows)
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv())

    def column(self, name: str) -> list:
        i = self.header.index(name)
        return [row[i] for row in self.rows]


# ---------------------------------------------------------------------------
# shared helpers

def resolve_pattern(cfg: SweepConfig) -> Optional[Pattern]:
    """The fixed pattern for non-random sources; None when each trial
    draws its own."""
    if cfg.pattern == "random":
        return None
    if cfg.pattern == "face-like":
        return face_like_pattern()
    if cfg.pattern == "digit-like":
        return digit_like_pattern()
    if not cfg.pattern_file:
        raise ConfigError("pattern = file requires pattern_file")
    return load_pattern(cfg.pattern_file)


def _trial_pattern(cfg: SweepConfig, fixed: Optional[Pattern], gen) -> Pattern:
    if fixed is not None:
        return fixed
    return random_pattern(
        gen,
        n_atoms=cfg.n_atoms,
        coeff_range=(cfg.coeff_min, cfg.coeff_max),
        tau_range=(cfg.tau_min, cfg.tau_max),
        sigma_range=(cfg.sigma_min, cfg.sigma_max),
    )


def _map_trials(fn, cfg: SweepConfig):
    if cfg.threads <= 1:
        return [fn(i) for i in range(cfg.trials)]
    with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(fn, range(cfg.trials)))


# ---------------------------------------------------------------------------
# descent-region sweep

def _siden_trial(cfg: SweepConfig, fixed: Optional[Pattern], i: int):
    gen = stream(cfg.seed, i)
    p = _trial_pattern(cfg, fixed, gen)
    direction = random_direction(gen)
    scan_max = 2.0 * cfg.t_range
    deltas = []
    omegas = []
    for rho in cfg.rho_list:
        sp = smooth_pattern(p, rho) if rho > 0.0 else p
        deltas.append(delta_T(sp, direction))
        omegas.append(true_siden_boundary(sp, direction, scan_max))
    return deltas, omegas


def run_siden_sweep(cfg: SweepConfig) -> SweepResult:
    """Certified vs numerically located descent radius across filter sizes.

    Columns: rho, mean_delta_hat, mean_omega_hat, n_valid.  A trial is
    valid when the analytic slope has a zero-crossing at every rho; the
    omega mean runs over valid trials only (empty cell when there are
    none) and the delta mean follows the same subset unless it is empty,
    in which case all trials contribute (the certified radius always
    exists).
    """
    fixed = resolve_pattern(cfg)
    results = _map_trials(partial(_siden_trial, cfg, fixed), cfg)
    valid = [all(o is not None for o in omegas) for _, omegas in results]
    n_valid = sum(valid)
    rows = []
    for k, rho in enumerate(cfg.rho_list):
        if n_valid > 0:
            mean_delta = float(
                np.mean([res[0][k] for res, ok in zip(results, valid) if ok])
            )
            mean_omega = float(
                np.mean([res[1][k] for res, ok in zip(results, valid) if ok])
            )
        else:
            mean_delta = float(np.mean([res[0][k] for res in results]))
            mean_omega = None
        rows.append((float(rho), mean_delta, mean_omega, n_valid))
    rows.sort(key=lambda r: r[0])
    return SweepResult(("rho", "mean_delta_hat", "mean_omega_hat", "n_valid"), tuple(rows))


# ---------------------------------------------------------------------------
# registration error sweep

def _error_trial(cfg: SweepConfig, fixed: Optional[Pattern], levels, i: int):
    gen = stream(cfg.seed, i)
    p = _trial_pattern(cfg, fixed, gen)
    targets = [random_translation(gen, cfg.t_range) for _ in range(cfg.targets)]
    noise_seeds = [int(gen.integers(2 ** 62)) for _ in range(cfg.targets)]
    gaussian = cfg.noise == "gaussian"

    partials = []
    per_run = []
    for rho in cfg.rho_list:
        sp = smooth_pattern(p, rho) if rho > 0.0 else p
        rp2 = None if gaussian else second_derivative_norm_bound(sp)
        for level in levels:
            if gaussian:
                base_spec = NoiseSpec(
                    GAUSSIAN_ANALYTIC, L=cfg.L, epsilon=cfg.epsilon,
                    eta=float(level), b=cfg.b,
                )
                rep = gaussian_bound(
                    sp, smoothed_noise_params(base_spec, rho),
                    s=cfg.s, two_sided=cfg.two_sided,
                )
                shared_bound = rep.rt0
            sum_err = 0.0
            n_bound = 0
            sum_bound = 0.0
            n_violation = 0
            for j in range(cfg.targets):
                if gaussian:
                    z = sample_gaussian_field(base_spec, noise_seeds[j]).pattern
                    bound = shared_bound
                else:
                    z = make_generic_noise(
                        p, _GENERIC_MODE[cfg.noise], cfg.noise_atoms,
                        float(level), noise_seeds[j],
                    )
                    zs = smooth_pattern(z, rho) if rho > 0.0 else z
                    bound = generic_bound(
                        sp, pattern_norm(zs), two_sided=cfg.two_sided, rp2=rp2
                    ).ru0
                q = Pattern(translate_pattern(p, targets[j]).atoms + z.atoms)
                res = two_stage_register(
                    p, q, rho, cfg.t_range,
                    n_directions=cfg.n_directions, grad_tol=cfg.grad_tol,
                )
                err = float(
                    np.hypot(
                        res.translation[0] - targets[j][0],
                        res.translation[1] - targets[j][1],
                    )
                )
                sum_err += err
                if bound is not None:
                    n_bound += 1
                    sum_bound += bound
                    # Allowance for the descent tolerance so an exactly
                    # zero bound (eta = 0) does not flag solver residue.
                    if err > bound + 1e-6:
                        n_violation += 1
                if cfg.per_run_out:
                    per_run.append(
                        (
                            float(rho), float(level), i, j,
                            registration_csv_row(i, rho, level, targets[j], res),
                        )
                    )
            partials.append((sum_err, n_bound, sum_bound, n_violation))
    return partials, per_run


def run_error_sweep(cfg: SweepConfig) -> SweepResult:
    """Mean registration error and certified bound per (rho, noise level).

    Columns: rho, eta (or nu for generic noise), mean_error, mean_bound,
    bound_violation_rate.  The bound columns average over the trials whose
    noise level is admissible; with no admissible trial the cells stay
    empty.  per_run_out additionally logs every registration run.
    """
    gaussian = cfg.noise == "gaussian"
    levels = cfg.eta_list if gaussian else cfg.nu_list
    if not levels:
        key = "eta_list" if gaussian else "nu_list"
        raise ConfigError(f"{key} must be nonempty for an error sweep")
    if any(v < 0.0 for v in levels):
        raise ConfigError("noise levels must be non-negative")
    fixed = resolve_pattern(cfg)
    results = _map_trials(partial(_error_trial, cfg, fixed, levels), cfg)

    n_runs = cfg.trials * cfg.targets
    rows = []
    row_keys = [(float(r), float(lv)) for r in cfg.rho_list for lv in levels]
    for idx, (rho, level) in enumerate(row_keys):
        sum_err = sum(res[0][idx][0] for res in results)
        n_bound = sum(res[0][idx][1] for res in results)
        sum_bound = sum(res[0][idx][2] for res in results)
        n_violation = sum(res[0][idx][3] for res in results)
        mean_bound = sum_bound / n_bound if n_bound else None
        rate = n_violation / n_bound if n_bound else None
        rows.append((rho, level, sum_err / n_runs, mean_bound, rate))
    rows.sort(key=lambda r: (r[0], r[1]))

    if cfg.per_run_out:
        log = []
        for res in results:
            log.extend(res[1])
        log.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
        header = (
            "seed,rho,eta_or_nu,true_tx,true_ty,est_tx,est_ty,error,"
            "iterations,converged"
        )
        Path(cfg.per_run_out).write_text(
            "\n".join([header] + [r[4] for r in log]) + "\n"
        )

    level_name = "eta" if gaussian else "nu"
    return SweepResult(
        ("rho", level_name, "mean_error", "mean_bound", "bound_violation_rate"),
        tuple(rows),
    )


# ---------------------------------------------------------------------------
# grid size sweep

def run_grid_count(cfg: SweepConfig) -> SweepResult:
    """Coarse-grid node count per filter size.

    Columns: rho, grid_points, product where product = count (1 + rho^2);
    a flat product column is the advertised decay rate of the grid.
    """
    fixed = resolve_pattern(cfg)
    p = fixed if fixed is not None else _trial_pattern(cfg, None, stream(cfg.seed, 0))
    rows = []
    for rho in cfg.rho_list:
        grid = build_grid(p, rho, cfg.t_range, n_directions=cfg.n_directions)
        count = len(grid.points)
        rows.append((float(rho), count, count * (1.0 + rho * rho)))
    rows.sort(key=lambda r: r[0])
    return SweepResult(("rho", "grid_points", "product"), tuple(rows))


# ---------------------------------------------------------------------------
# bounds report

def run_bounds_report(cfg: SweepConfig) -> BoundReport:
    """Every certified constant for one pattern / noise configuration.

    noise = gaussian uses (eta, L, epsilon, b); correlated / uncorrelated
    build a generic noise pattern of norm nu.  rho > 0 reports on the
    smoothed pattern with the matching smoothed noise parameters.
    """
    gen = stream(cfg.seed, 0)
    base = resolve_pattern(cfg)
    if base is None:
        base = _trial_pattern(cfg, None, gen)
    p = smooth_pattern(base, cfg.rho) if cfg.rho > 0.0 else base
    if cfg.noise == "gaussian":
        spec = NoiseSpec(
            GAUSSIAN_ANALYTIC, L=cfg.L, epsilon=cfg.epsilon, eta=cfg.eta, b=cfg.b
        )
        if cfg.rho > 0.0:
            spec = smoothed_noise_params(spec, cfg.rho)
        return gaussian_bound(
            p, spec, s=cfg.s, two_sided=cfg.two_sided, sharpened=cfg.sharpened
        )
    z = make_generic_noise(
        base, _GENERIC_MODE[cfg.noise], cfg.noise_atoms, cfg.nu,
        int(gen.integers(2 ** 62)),
    )
    if cfg.rho > 0.0:
        z = smooth_pattern(z, cfg.rho)
    nu_hat = pattern_norm(z)
    rep = generic_bound(p, nu_hat, two_sided=cfg.two_sided)
    if cfg.noise == "uncorrelated":
        rpz = correlation_bound(p, z, t_max=2.0 * cfg.t_range)
        _, qu0 = uncorrelated_bound(p, nu_hat, rpz, rp2=rep.rp2)
        rep = dataclasses.replace(rep, rpz=rpz, qu0=qu0)
    return rep


def bound_report_csv(rep: BoundReport) -> str:
    return ",".join(BOUND_CSV_COLUMNS) + "\n" + rep.to_csv_row() + "\n"
