"""Raster and pattern files, dictionary enumeration, matching pursuit."""

import math

import numpy as np
import pytest

from atomreg.atoms import Atom, Pattern, RasterImage, evaluate_pattern
from atomreg.errors import ConfigError
from atomreg.ingestion import (
    DictionarySpec,
    default_dictionary,
    dictionary_atoms,
    load_pattern,
    load_raster,
    matching_pursuit,
    save_pattern,
    save_raster,
)
from conftest import draw_pattern


def test_pgm_binary_round_trip(tmp_path):
    gen = np.random.default_rng(36)
    img = RasterImage(7, 5, 1.0, gen.uniform(0.0, 1.0, size=(5, 7)))
    path = tmp_path / "img.pgm"
    save_raster(img, path)
    back = load_raster(path)
    assert back.width == 7 and back.height == 5
    # 8-bit quantization: half a level of rounding error
    assert np.abs(back.pixels - img.pixels).max() <= 0.5 / 255.0 + 1e-12
    assert back.extent == 1.0
    wide = load_raster(path, extent=3.0)
    assert wide.extent == 3.0


def test_pgm_ascii_comments_and_16bit(tmp_path):
    path = tmp_path / "a.pgm"
    path.write_text("P2\n# a comment\n3 2\n# another\n10\n0 1 2\n3 4 10\n")
    img = load_raster(path)
    assert img.pixels.shape == (2, 3)
    assert np.allclose(img.pixels, np.array([[0, 1, 2], [3, 4, 10]]) / 10.0)

    deep = tmp_path / "b.pgm"
    vals = np.array([[0, 300], [65535, 1000]], dtype=">u2")
    deep.write_bytes(b"P5\n2 2\n65535\n" + vals.tobytes())
    img16 = load_raster(deep)
    assert np.allclose(img16.pixels, vals.astype(float) / 65535.0)


def test_pgm_error_paths(tmp_path):
    cases = {
        "color.pgm": b"P6\n2 2\n255\n" + bytes(12),
        "trunc.pgm": b"P5\n4 4\n255\n" + bytes(5),
        "header.pgm": b"P2\n3\n",
        "count.pgm": b"P2\n2 2\n255\n1 2 3\n",
        "range.pgm": b"P2\n2 2\n100\n1 2 3 200\n",
        "badtok.pgm": b"P2\n2 x\n255\n1 2 3 4\n",
        "dims.pgm": b"P2\n0 2\n255\n",
    }
    for name, blob in cases.items():
        path = tmp_path / name
        path.write_bytes(blob)
        with pytest.raises(ConfigError):
            load_raster(path)


def test_csv_raster_round_trip(tmp_path):
    gen = np.random.default_rng(37)
    img = RasterImage(4, 3, 2.0, gen.normal(size=(3, 4)))
    path = tmp_path / "img.csv"
    save_raster(img, path)
    back = load_raster(path, extent=2.0)
    assert np.array_equal(back.pixels, img.pixels)

    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1,2,3\n4,5\n")
    with pytest.raises(ConfigError):
        load_raster(ragged)
    empty = tmp_path / "empty.csv"
    empty.write_text("\n")
    with pytest.raises(ConfigError):
        load_raster(empty)
    with pytest.raises(ConfigError):
        load_raster(tmp_path / "img.csv", format="tiff")


def test_pattern_file_round_trip(tmp_path):
    gen = np.random.default_rng(38)
    p = draw_pattern(gen, 6)
    path = tmp_path / "p.csv"
    save_pattern(p, path)
    assert load_pattern(path).atoms == p.atoms

    noheader = tmp_path / "no.csv"
    noheader.write_text("1.0,0.0,0.0,0.0,1.0,1.0\n")
    with pytest.raises(ConfigError):
        load_pattern(noheader)
    short = tmp_path / "short.csv"
    short.write_text("coeff,psi,tau_x,tau_y,sigma_x,sigma_y\n1.0,0.0,0.0\n")
    with pytest.raises(ConfigError):
        load_pattern(short)
    headeronly = tmp_path / "h.csv"
    headeronly.write_text("coeff,psi,tau_x,tau_y,sigma_x,sigma_y\n")
    with pytest.raises(ConfigError):
        load_pattern(headeronly)


def test_dictionary_spec_validation():
    with pytest.raises(ConfigError):
        DictionarySpec((), (0.0,), (1.0,))
    with pytest.raises(ConfigError):
        DictionarySpec((0.0,), (0.0,), (0.0,))
    spec = DictionarySpec((0.0,), (0.0, 1.0), (0.5, 1.0))
    assert spec.tau_steps == (0.0, 1.0)


def test_default_dictionary_structure():
    img = RasterImage(16, 16, 1.0, np.zeros((16, 16)))
    spec = default_dictionary(img, psi_count=4, tau_subsample=4)
    assert len(spec.psi_steps) == 4
    assert np.isclose(spec.psi_steps[1], math.pi / 4.0)
    assert len(spec.tau_steps) == 4
    assert np.allclose(spec.sigma_values,
                       [0.05, 0.1, 0.2, 0.4, 0.8, 1.2])


def test_dictionary_dedup_rules():
    # 2 orientations, 2 scales: isotropic pairs keep one orientation, and
    # the sx < sy combos vanish because the quarter-turn twin is present
    spec = DictionarySpec((0.0, math.pi / 2.0), (0.0,), (0.5, 1.0))
    psis, taus, sigmas = dictionary_atoms(spec)
    combos = {(p, s[0], s[1]) for p, s in zip(psis, sigmas)}
    assert combos == {
        (0.0, 0.5, 0.5),
        (0.0, 1.0, 1.0),
        (0.0, 1.0, 0.5),
        (math.pi / 2.0, 1.0, 0.5),
    }
    # without the twin orientation both axis orders must survive
    solo = DictionarySpec((0.3,), (0.0,), (0.5, 1.0))
    psis2, _, sigmas2 = dictionary_atoms(solo)
    combos2 = {(p, s[0], s[1]) for p, s in zip(psis2, sigmas2)}
    assert combos2 == {(0.3, 0.5, 0.5), (0.3, 1.0, 1.0),
                       (0.3, 0.5, 1.0), (0.3, 1.0, 0.5)}


def test_dictionary_enumeration_order():
    spec = DictionarySpec((0.0,), (-1.0, 1.0), (1.0,))
    psis, taus, sigmas = dictionary_atoms(spec)
    assert len(psis) == 4
    # tau_x varies slower than tau_y
    assert taus[:, 0].tolist() == [-1.0, -1.0, 1.0, 1.0]
    assert taus[:, 1].tolist() == [-1.0, 1.0, -1.0, 1.0]


def test_matching_pursuit_exact_single_atom():
    """An image that IS one dictionary atom is recovered exactly and the
    residual update leaves nothing behind."""
    spec = DictionarySpec(
        (0.0, math.pi / 4.0), (-0.5, 0.0, 0.5), (0.2, 0.4)
    )
    target = Atom(0.8, math.pi / 4.0, (0.5, -0.5), (0.4, 0.2))
    img = evaluate_pattern(Pattern((target,)), 24, 24, 1.0)
    got = matching_pursuit(img, spec, n_atoms=2)
    first = got.atoms[0]
    assert first.psi == math.pi / 4.0
    assert first.tau == (0.5, -0.5)
    assert first.sigma == (0.4, 0.2)
    assert np.isclose(first.coeff, 0.8, rtol=1e-6)
    assert abs(got.atoms[1].coeff) < 1e-6


def test_matching_pursuit_residual_decreases():
    gen = np.random.default_rng(39)
    p = draw_pattern(gen, 3, tau_scale=0.5, sigma_lo=0.15, sigma_hi=0.5)
    img = evaluate_pattern(p, 32, 32, 1.0)
    spec = default_dictionary(img, psi_count=4, tau_subsample=4)
    energies = []
    for n in (1, 3, 6):
        fit = matching_pursuit(img, spec, n_atoms=n)
        model = evaluate_pattern(fit, 32, 32, 1.0)
        energies.append(float(((img.pixels - model.pixels) ** 2).sum()))
    assert energies[0] >= energies[1] >= energies[2]
    assert energies[2] < 0.5 * float((img.pixels**2).sum())


def test_matching_pursuit_streaming_matches_cache():
    gen = np.random.default_rng(40)
    p = draw_pattern(gen, 2, tau_scale=0.5, sigma_lo=0.2, sigma_hi=0.5)
    img = evaluate_pattern(p, 16, 16, 1.0)
    spec = default_dictionary(img, psi_count=2, tau_subsample=4)
    cached = matching_pursuit(img, spec, n_atoms=4)
    # budget far below the dictionary size forces the batched path
    streamed = matching_pursuit(img, spec, n_atoms=4, cache_budget_mb=0.01)
    assert cached.atoms == streamed.atoms


def test_matching_pursuit_zero_image():
    img = RasterImage(8, 8, 1.0, np.zeros((8, 8)))
    spec = DictionarySpec((0.0,), (0.0,), (0.3,))
    got = matching_pursuit(img, spec, n_atoms=3)
    assert len(got) == 3
    assert all(a.coeff == 0.0 for a in got.atoms)
    with pytest.raises(ConfigError):
        matching_pursuit(img, spec, n_atoms=0)
