"""Noise models: replayability, moments, generic construction, smoothing."""

import math

import numpy as np
import pytest

from atomreg.atoms import Pattern, RasterImage, pattern_norm, smooth_pattern
from atomreg.errors import ConfigError
from atomreg.noise import (
    GAUSSIAN_ANALYTIC,
    GENERIC,
    NoiseSpec,
    add_digital_noise,
    make_generic_noise,
    mean_deviation_level,
    sample_gaussian_field,
    smoothed_noise_params,
)
from conftest import draw_pattern
from oracles import noise_gram


def test_spec_validation():
    with pytest.raises(ConfigError):
        NoiseSpec(kind="pink")
    with pytest.raises(ConfigError):
        NoiseSpec(L=0)
    with pytest.raises(ConfigError):
        NoiseSpec(epsilon=0.0)
    with pytest.raises(ConfigError):
        NoiseSpec(eta=-0.1)
    with pytest.raises(ConfigError):
        NoiseSpec(b=0.0)
    assert NoiseSpec().kind == GAUSSIAN_ANALYTIC
    assert NoiseSpec(kind=GENERIC, nu=0.2).nu == 0.2


def test_gaussian_field_shape_and_replay():
    spec = NoiseSpec(L=40, epsilon=0.1, eta=0.05, b=4.0)
    d1 = sample_gaussian_field(spec, 123)
    d2 = sample_gaussian_field(spec, 123)
    assert d1.pattern.atoms == d2.pattern.atoms
    assert d1.seed == 123 and d1.spec is spec
    assert len(d1.pattern) == 40
    for a in d1.pattern.atoms:
        assert a.sigma == (0.1, 0.1)
        assert -4.0 <= a.tau[0] <= 4.0 and -4.0 <= a.tau[1] <= 4.0
    other = sample_gaussian_field(spec, 124)
    assert other.pattern.atoms != d1.pattern.atoms


def test_gaussian_field_eta_scaling():
    """Same seed at two eta levels gives the same centers and linearly
    scaled coefficients, which is what makes error curves monotone
    comparisons meaningful."""
    lo = sample_gaussian_field(NoiseSpec(L=30, eta=0.01), 7).pattern
    hi = sample_gaussian_field(NoiseSpec(L=30, eta=0.03), 7).pattern
    assert np.allclose(hi.taus, lo.taus)
    assert np.allclose(hi.coeffs, 3.0 * lo.coeffs, rtol=1e-12)
    zero = sample_gaussian_field(NoiseSpec(L=30, eta=0.0), 7).pattern
    assert np.all(zero.coeffs == 0.0)


def test_mean_deviation_level_monte_carlo():
    """E ||w||^2 = (pi/2) L eta^2 eps^2, checked both against the Gram
    identity E c^T G c = eta^2 tr G and against raw sampling."""
    spec = NoiseSpec(L=25, epsilon=0.15, eta=0.04, b=2.0)
    want = mean_deviation_level(spec)
    assert np.isclose(want, 0.5 * math.pi * 25 * 0.04**2 * 0.15**2, rtol=1e-14)

    sq = []
    traces = []
    for seed in range(300):
        w = sample_gaussian_field(spec, seed).pattern
        sq.append(pattern_norm(w) ** 2)
        if seed < 20:
            g = noise_gram(w.taus, spec.epsilon)
            traces.append(spec.eta**2 * np.trace(g))
    assert np.isclose(np.mean(traces), want, rtol=1e-12)
    mean = float(np.mean(sq))
    se = float(np.std(sq) / math.sqrt(len(sq)))
    assert abs(mean - want) < 4.0 * se


def test_digital_noise_statistics():
    img = RasterImage(32, 32, 1.0, np.zeros((32, 32)))
    noisy = add_digital_noise(img, 0.5, 99)
    again = add_digital_noise(img, 0.5, 99)
    assert np.array_equal(noisy.pixels, again.pixels)
    assert abs(noisy.pixels.std() - 0.5) < 0.05
    assert abs(noisy.pixels.mean()) < 0.05
    same = add_digital_noise(img, 0.0, 99)
    assert np.array_equal(same.pixels, img.pixels)
    with pytest.raises(ValueError):
        add_digital_noise(img, -1.0, 0)


def test_generic_correlated_subset():
    gen = np.random.default_rng(22)
    p = draw_pattern(gen, 12)
    z = make_generic_noise(p, "correlated-subset", 5, 0.3, seed=3)
    assert len(z) == 5
    assert abs(pattern_norm(z) - 0.3) < 1e-10
    # geometry must come from p's atoms, in p's order
    source = [(a.psi, a.tau, a.sigma) for a in p.atoms]
    picked = [(a.psi, a.tau, a.sigma) for a in z.atoms]
    positions = [source.index(g) for g in picked]
    assert positions == sorted(positions)
    assert len(set(positions)) == 5
    with pytest.raises(ValueError):
        make_generic_noise(p, "correlated-subset", 13, 0.1, seed=0)


def test_generic_random_atoms():
    gen = np.random.default_rng(23)
    p = draw_pattern(gen, 10)
    z = make_generic_noise(p, "random-atoms", 6, 0.12, seed=5)
    assert len(z) == 6
    assert abs(pattern_norm(z) - 0.12) < 1e-10
    tau_lo, tau_hi = p.taus.min(axis=0), p.taus.max(axis=0)
    for a in z.atoms:
        assert tau_lo[0] <= a.tau[0] <= tau_hi[0]
        assert tau_lo[1] <= a.tau[1] <= tau_hi[1]
        assert p.sigmas.min() <= a.sigma[0] <= p.sigmas.max()
    z2 = make_generic_noise(p, "random-atoms", 6, 0.12, seed=5)
    assert z.atoms == z2.atoms


def test_generic_zero_and_errors():
    gen = np.random.default_rng(24)
    p = draw_pattern(gen, 8)
    z0 = make_generic_noise(p, "correlated-subset", 4, 0.0, seed=1)
    assert all(a.coeff == 0.0 for a in z0.atoms)
    with pytest.raises(ConfigError):
        make_generic_noise(p, "pink", 4, 0.1, seed=0)
    with pytest.raises(ValueError):
        make_generic_noise(p, "random-atoms", 0, 0.1, seed=0)
    with pytest.raises(ValueError):
        make_generic_noise(p, "random-atoms", 4, -0.1, seed=0)


def test_smoothed_noise_params():
    spec = NoiseSpec(L=100, epsilon=0.1, eta=0.02, b=4.0)
    assert smoothed_noise_params(spec, 0.0) is spec
    sm = smoothed_noise_params(spec, 1.0)
    assert np.isclose(sm.epsilon, math.sqrt(1.01), rtol=1e-14)
    assert np.isclose(sm.eta, 0.02 * 0.01 / 1.01, rtol=1e-14)
    assert sm.L == 100 and sm.b == 4.0
    with pytest.raises(ValueError):
        smoothed_noise_params(spec, -0.5)


def test_smoothing_commutes_with_sampling():
    """smooth(sample(spec, s)) and sample(smoothed_params, s) consume the
    same uniforms, so they agree atom by atom."""
    spec = NoiseSpec(L=20, epsilon=0.1, eta=0.05)
    rho = 0.7
    a = smooth_pattern(sample_gaussian_field(spec, 42).pattern, rho)
    b = sample_gaussian_field(smoothed_noise_params(spec, rho), 42).pattern
    assert np.allclose(a.coeffs, b.coeffs, rtol=1e-13)
    assert np.allclose(a.sigmas, b.sigmas, rtol=1e-13)
    assert np.allclose(a.taus, b.taus)
