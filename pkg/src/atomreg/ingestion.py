"""Raster I/O and greedy decomposition of rasters into atom patterns.

Rasters travel as P2/P5 PGM (8-bit, values scaled to [0, 1]; 16-bit
accepted on load) or headerless CSV (full-precision floats).  Patterns
travel as CSV with the header ``coeff,psi,tau_x,tau_y,sigma_x,sigma_y``.

Matching pursuit correlates the residual against a finite dictionary of
rasterized atoms by direct dot products.  Scores are |<r, phi>| / |phi|
in pixel space; the pixel-area factor cancels in the ratio and in the
coefficient <r, phi> / |phi|^2, so no area normalization is needed.
Selection scans the dictionary in batches sized to a memory budget; when
the whole rasterized dictionary fits, it is cached (float32) across
iterations.  The selected atom's raster is recomputed in float64 for the
coefficient and residual update, so the returned pattern reproduces the
accumulated model to near machine precision.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .atoms import Atom, Pattern, RasterImage
from .errors import ConfigError

__all__ = [
    "DictionarySpec",
    "default_dictionary",
    "dictionary_atoms",
    "load_raster",
    "save_raster",
    "load_pattern",
    "save_pattern",
    "matching_pursuit",
]

PATTERN_CSV_HEADER = "coeff,psi,tau_x,tau_y,sigma_x,sigma_y"


# ---------------------------------------------------------------------------
# raster I/O

def load_raster(path, format: str | None = None, extent: float = 1.0) -> RasterImage:
    """Read a PGM (P2/P5 grayscale) or headerless-CSV raster.

    format defaults from the file suffix.  PGM values are divided by the
    file's maxval; CSV values are taken verbatim.
    """
    path = Path(path)
    fmt = format or ("pgm" if path.suffix.lower() == ".pgm" else "csv")
    if fmt == "pgm":
        return _load_pgm(path, extent)
    if fmt == "csv":
        return _load_csv(path, extent)
    raise ConfigError(f"unknown raster format {fmt!r} (expected pgm or csv)")


def _load_pgm(path: Path, extent: float) -> RasterImage:
    data = path.read_bytes()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ConfigError(
            f"{path}: not a grayscale PGM (magic {magic!r}; P3/P6 color "
            "images are not supported)"
        )
    # Header: three decimal tokens after the magic, '#' comments allowed.
    pos = 2
    tokens = []
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ConfigError(f"{path}: truncated PGM header")
        tok = data[start:pos]
        if not tok.isdigit():
            raise ConfigError(f"{path}: malformed PGM header token {tok!r}")
        tokens.append(int(tok))
    width, height, maxval = tokens
    if width < 1 or height < 1 or not 1 <= maxval <= 65535:
        raise ConfigError(f"{path}: invalid PGM dimensions {width}x{height}/{maxval}")
    if magic == b"P2":
        body = data[pos:].split()
        if len(body) != width * height:
            raise ConfigError(
                f"{path}: expected {width * height} pixels, found {len(body)}"
            )
        values = np.array([int(tok) for tok in body], dtype=np.int64)
    else:
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = data[pos : pos + width * height * dtype.itemsize]
        if len(raw) != width * height * dtype.itemsize:
            raise ConfigError(f"{path}: truncated P5 pixel data")
        values = np.frombuffer(raw, dtype=dtype).astype(np.int64)
    if values.min() < 0 or values.max() > maxval:
        raise ConfigError(f"{path}: pixel value outside [0, {maxval}]")
    pixels = values.astype(float).reshape(height, width) / maxval
    return RasterImage(width, height, extent, pixels)


def _load_csv(path: Path, extent: float) -> RasterImage:
    rows = []
    width = None
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        cells = [c for c in re.split(r"[,\s]+", line.strip()) if c]
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ConfigError(
                f"{path}:{lineno}: row has {len(cells)} columns, expected {width}"
            )
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise ConfigError(f"{path}: empty raster file")
    pixels = np.array(rows, dtype=float)
    return RasterImage(pixels.shape[1], pixels.shape[0], extent, pixels)


def save_raster(img: RasterImage, path, format: str | None = None) -> None:
    """Write PGM (binary P5, 8-bit, values clipped to [0, 1]) or CSV
    (repr-exact floats)."""
    path = Path(path)
    fmt = format or ("pgm" if path.suffix.lower() == ".pgm" else "csv")
    if fmt == "pgm":
        quant = np.rint(np.clip(img.pixels, 0.0, 1.0) * 255.0).astype("u1")
        header = f"P5\n{img.width} {img.height}\n255\n".encode()
        path.write_bytes(header + quant.tobytes())
    elif fmt == "csv":
        lines = [
            ",".join(repr(float(v)) for v in row) for row in img.pixels
        ]
        path.write_text("\n".join(lines) + "\n")
    else:
        raise ConfigError(f"unknown raster format {fmt!r} (expected pgm or csv)")


# ---------------------------------------------------------------------------
# pattern I/O

def save_pattern(p: Pattern, path) -> None:
    lines = [PATTERN_CSV_HEADER]
    for a in p.atoms:
        lines.append(
            ",".join(
                repr(float(v))
                for v in (a.coeff, a.psi, a.tau[0], a.tau[1], a.sigma[0], a.sigma[1])
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def load_pattern(path) -> Pattern:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != PATTERN_CSV_HEADER:
        raise ConfigError(f"{path}: missing pattern header {PATTERN_CSV_HEADER!r}")
    atoms = []
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != 6:
            raise ConfigError(f"{path}:{lineno}: expected 6 columns")
        try:
            c, psi, tx, ty, sx, sy = (float(v) for v in cells)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
        atoms.append(Atom(c, psi, (tx, ty), (sx, sy)))
    if not atoms:
        raise ConfigError(f"{path}: pattern file has no atoms")
    return Pattern(tuple(atoms))


# ---------------------------------------------------------------------------
# dictionary

@dataclass(frozen=True)
class DictionarySpec:
    """Finite sampling grids for atom parameters.

    psi_steps are orientations in [0, pi); tau_steps are center
    coordinates shared by both axes; sigma_values are axis scales (all
    pairs are formed).  Redundant entries (isotropic atoms at every
    orientation; axis-swapped duplicates whose quarter-turn counterpart
    exists in psi_steps) are removed during enumeration.
    """

    psi_steps: tuple
    tau_steps: tuple
    sigma_values: tuple

    def __post_init__(self):
        object.__setattr__(self, "psi_steps", tuple(float(v) for v in self.psi_steps))
        object.__setattr__(self, "tau_steps", tuple(float(v) for v in self.tau_steps))
        object.__setattr__(
            self, "sigma_values", tuple(float(v) for v in self.sigma_values)
        )
        if not self.psi_steps or not self.tau_steps or not self.sigma_values:
            raise ConfigError("dictionary grids must be nonempty")
        if any(s <= 0.0 for s in self.sigma_values):
            raise ConfigError("dictionary sigma values must be positive")


_SIGMA_FRACTIONS = (0.05, 0.1, 0.2, 0.4, 0.8, 1.2)


def default_dictionary(
    img: RasterImage,
    psi_count: int = 8,
    tau_subsample: int = 2,
    sigma_fractions: Sequence[float] = _SIGMA_FRACTIONS,
) -> DictionarySpec:
    """Grids spanning the image: orientations k pi / psi_count, centers on
    every tau_subsample-th pixel center, scales as fractions of extent."""
    psis = tuple(math.pi * k / psi_count for k in range(psi_count))
    xs, ys = img.pixel_centers()
    taus = xs[::tau_subsample]
    if img.height != img.width:
        taus = np.unique(np.concatenate([taus, ys[::tau_subsample]]))
    sigmas = tuple(f * img.extent for f in sigma_fractions)
    return DictionarySpec(psis, taus, sigmas)


def dictionary_atoms(spec: DictionarySpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(psis, taus, sigmas) arrays for the deduplicated dictionary.

    Enumeration order (slow to fast): psi, tau_x, tau_y, sigma_x,
    sigma_y — ties in matching pursuit resolve to the lowest index in
    this order.
    """
    combos = []
    psis = spec.psi_steps
    for psi in psis:
        for sx in spec.sigma_values:
            for sy in spec.sigma_values:
                if sx == sy and psi != psis[0]:
                    continue  # isotropic: rotation is a no-op
                if sx < sy:
                    twin = (psi + math.pi / 2.0) % math.pi
                    if any(abs(twin - q) % math.pi < 1e-12 for q in psis):
                        continue  # axis-swapped duplicate exists
                combos.append((psi, sx, sy))
    n_tau = len(spec.tau_steps)
    taus_1d = np.asarray(spec.tau_steps)
    n = len(combos) * n_tau * n_tau
    psi_arr = np.empty(n)
    tau_arr = np.empty((n, 2))
    sig_arr = np.empty((n, 2))
    i = 0
    for psi, sx, sy in combos:
        block = n_tau * n_tau
        gx, gy = np.meshgrid(taus_1d, taus_1d, indexing="ij")  # tau_x slow
        psi_arr[i : i + block] = psi
        tau_arr[i : i + block, 0] = gx.ravel()
        tau_arr[i : i + block, 1] = gy.ravel()
        sig_arr[i : i + block, 0] = sx
        sig_arr[i : i + block, 1] = sy
        i += block
    return psi_arr, tau_arr, sig_arr


def _quad_coefficients(psis, sigmas):
    """Per-atom (A, B, C) of the exponent quadratic A dx^2 + 2B dx dy + C dy^2."""
    cos = np.cos(psis)
    sin = np.sin(psis)
    ix = 1.0 / sigmas[:, 0] ** 2
    iy = 1.0 / sigmas[:, 1] ** 2
    a = cos * cos * ix + sin * sin * iy
    c = sin * sin * ix + cos * cos * iy
    b = cos * sin * (ix - iy)
    return a, b, c


def _raster_block(points, psis, taus, sigmas, dtype):
    """(n_atoms, n_pixels) rasterized atom values."""
    a, b, c = _quad_coefficients(psis, sigmas)
    dx = points[None, :, 0] - taus[:, 0, None]
    dy = points[None, :, 1] - taus[:, 1, None]
    quad = a[:, None] * dx * dx + 2.0 * b[:, None] * dx * dy + c[:, None] * dy * dy
    return np.exp(np.maximum(-quad, -745.0)).astype(dtype, copy=False)


def matching_pursuit(
    img: RasterImage,
    spec: DictionarySpec,
    n_atoms: int,
    cache_budget_mb: float = 512.0,
) -> Pattern:
    """Greedy decomposition: repeatedly pick the dictionary atom with the
    largest normalized correlation against the residual and subtract its
    projection.

    A degenerate (all-zero) residual yields zero-coefficient atoms; the
    pattern still has n_atoms entries so downstream shapes stay fixed.
    """
    if n_atoms < 1:
        raise ConfigError("n_atoms must be at least 1")
    psis, taus, sigmas = dictionary_atoms(spec)
    n_dict = len(psis)
    xs, ys = img.pixel_centers()
    gx, gy = np.meshgrid(xs, ys)
    points = np.column_stack([gx.ravel(), gy.ravel()])
    n_px = len(points)
    residual = img.pixels.astype(float).ravel().copy()

    cache_bytes = n_dict * n_px * 4
    use_cache = cache_bytes <= cache_budget_mb * 1e6
    batch = max(1, int(cache_budget_mb * 1e6 / (n_px * 4)))
    cached = None
    norms = None
    if use_cache:
        cached = _raster_block(points, psis, taus, sigmas, np.float32)
        norms = np.sqrt(np.einsum("ij,ij->i", cached, cached, dtype=np.float64))

    chosen = []
    model = np.zeros(n_px)
    for _ in range(n_atoms):
        if use_cache:
            dots = cached @ residual.astype(np.float32)
            scores = np.abs(dots) / np.maximum(norms, 1e-300)
            best = int(np.argmax(scores))
        else:
            best = 0
            best_score = -1.0
            for start in range(0, n_dict, batch):
                stop = min(start + batch, n_dict)
                block = _raster_block(
                    points, psis[start:stop], taus[start:stop], sigmas[start:stop],
                    np.float32,
                )
                bn = np.sqrt(np.einsum("ij,ij->i", block, block, dtype=np.float64))
                sc = np.abs(block @ residual.astype(np.float32)) / np.maximum(
                    bn, 1e-300
                )
                i = int(np.argmax(sc))
                if sc[i] > best_score:
                    best_score = float(sc[i])
                    best = start + i
        phi = _raster_block(
            points, psis[best : best + 1], taus[best : best + 1],
            sigmas[best : best + 1], np.float64,
        )[0]
        norm_sq = float(phi @ phi)
        coeff = float(phi @ residual) / norm_sq if norm_sq > 0.0 else 0.0
        residual -= coeff * phi
        model += coeff * phi
        chosen.append(
            Atom(
                coeff,
                float(psis[best]),
                (float(taus[best, 0]), float(taus[best, 1])),
                (float(sigmas[best, 0]), float(sigmas[best, 1])),
            )
        )
    return Pattern(tuple(chosen))
