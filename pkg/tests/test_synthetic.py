"""Pattern generators: parameter ranges, draw order, fixed shapes."""

import math

import numpy as np
import pytest

from atomreg.synthetic import (
    digit_like_pattern,
    digit_like_raster,
    face_like_pattern,
    face_like_raster,
    random_direction,
    random_pattern,
    random_translation,
)


def test_random_pattern_ranges():
    gen = np.random.default_rng(41)
    p = random_pattern(gen, 200)
    assert len(p) == 200
    assert p.coeffs.min() >= -1.0 and p.coeffs.max() <= 1.0
    assert p.psis.min() >= 0.0 and p.psis.max() < math.pi
    assert np.abs(p.taus).max() <= 4.0
    assert p.sigmas.min() >= 0.3 and p.sigmas.max() <= 2.0
    # custom ranges are honored
    q = random_pattern(gen, 50, coeff_range=(0.5, 1.0),
                       tau_range=(-1.0, 1.0), sigma_range=(0.9, 1.1))
    assert q.coeffs.min() >= 0.5
    assert np.abs(q.taus).max() <= 1.0
    assert q.sigmas.min() >= 0.9 and q.sigmas.max() <= 1.1
    with pytest.raises(ValueError):
        random_pattern(gen, 0)


def test_random_pattern_replayable():
    a = random_pattern(np.random.default_rng(7), 10)
    b = random_pattern(np.random.default_rng(7), 10)
    assert a.atoms == b.atoms


def test_random_direction_and_translation():
    gen = np.random.default_rng(42)
    for _ in range(20):
        d = random_direction(gen)
        assert abs(np.hypot(*d) - 1.0) < 1e-12
    us = np.array([random_translation(gen, 4.0) for _ in range(200)])
    assert np.abs(us).max() <= 4.0
    # both halves of both axes get hit
    assert (us > 0).any(axis=0).all() and (us < 0).any(axis=0).all()


def test_fixed_patterns_shape():
    for p in (face_like_pattern(), digit_like_pattern()):
        assert len(p) == 5
        assert p.sigmas.min() >= 0.55
        assert np.abs(p.taus).max() <= 1.0
    face = face_like_pattern()
    assert face.atoms == face_like_pattern().atoms
    # a face has dark features on a bright head
    assert face.coeffs[0] > 0 and (face.coeffs[1:] < 0).all()
    digit = digit_like_pattern()
    assert (digit.coeffs > 0).all()


def test_fixed_rasters():
    face = face_like_raster()
    assert face.pixels.shape == (64, 64) and face.extent == 1.0
    digit = digit_like_raster(32, 48)
    assert digit.pixels.shape == (48, 32)
    assert digit.pixels.max() > 0.5
