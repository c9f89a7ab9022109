"""Sweep configuration plumbing and the CSV-producing runners."""

import math

import numpy as np
import pytest

from atomreg.atoms import Atom, Pattern
from atomreg.bounds import BOUND_CSV_COLUMNS, gaussian_bound
from atomreg.errors import ConfigError
from atomreg.experiments import (
    SUBCOMMAND_DEFAULTS,
    SweepConfig,
    apply_overrides,
    bound_report_csv,
    default_config,
    format_config,
    parse_config_text,
    resolve_pattern,
    run_bounds_report,
    run_error_sweep,
    run_grid_count,
    run_siden_sweep,
)
from atomreg.ingestion import save_pattern
from atomreg.noise import NoiseSpec
from atomreg.synthetic import face_like_pattern

UNIT = Pattern((Atom(1.0, 0.0, (0.0, 0.0), (1.0, 1.0)),))


@pytest.fixture
def unit_file(tmp_path):
    path = tmp_path / "unit.csv"
    save_pattern(UNIT, path)
    return str(path)


def test_default_configs():
    for name, overrides in SUBCOMMAND_DEFAULTS.items():
        cfg = default_config(name)
        for key, value in overrides.items():
            assert getattr(cfg, key) == value
    assert default_config("siden-sweep").trials == 300
    with pytest.raises(ConfigError):
        default_config("frobnicate")


def test_config_text_round_trip():
    cfg = default_config("error-sweep")
    text = format_config(cfg)
    back = apply_overrides(SweepConfig(), parse_config_text(text))
    assert back == cfg
    # overrides survive a second round trip too
    tweaked = apply_overrides(cfg, {"eta_list": "0.0,0.5", "two_sided": "true",
                                    "trials": "3", "pattern": "face-like"})
    assert tweaked.eta_list == (0.0, 0.5)
    assert tweaked.two_sided is True
    again = apply_overrides(SweepConfig(), parse_config_text(format_config(tweaked)))
    assert again == tweaked


def test_config_parsing_errors():
    with pytest.raises(ConfigError):
        parse_config_text("trials 3")
    assert parse_config_text("# only a comment\n\n") == {}
    assert parse_config_text("trials = 3  # inline") == {"trials": "3"}
    with pytest.raises(ConfigError):
        apply_overrides(SweepConfig(), {"no_such_key": "1"})
    with pytest.raises(ConfigError):
        apply_overrides(SweepConfig(), {"trials": "three"})
    with pytest.raises(ConfigError):
        apply_overrides(SweepConfig(), {"two_sided": "maybe"})


def test_config_validation():
    with pytest.raises(ConfigError):
        SweepConfig(trials=0)
    with pytest.raises(ConfigError):
        SweepConfig(pattern="photo")
    with pytest.raises(ConfigError):
        SweepConfig(noise="pink")
    with pytest.raises(ConfigError):
        SweepConfig(rho_list=())
    with pytest.raises(ConfigError):
        SweepConfig(rho_list=(-1.0,))
    with pytest.raises(ConfigError):
        SweepConfig(s=1.0)
    with pytest.raises(ConfigError):
        SweepConfig(threads=0)
    with pytest.raises(ConfigError):
        SweepConfig(seed=-1)


def test_resolve_pattern(unit_file):
    assert resolve_pattern(SweepConfig()) is None
    assert resolve_pattern(SweepConfig(pattern="face-like")).atoms == \
        face_like_pattern().atoms
    with pytest.raises(ConfigError):
        resolve_pattern(SweepConfig(pattern="file"))
    loaded = resolve_pattern(SweepConfig(pattern="file", pattern_file=unit_file))
    assert loaded.atoms == UNIT.atoms


def test_siden_sweep_small():
    cfg = SweepConfig(trials=4, n_atoms=6, rho_list=(0.0, 1.0, 2.0), seed=3)
    res = run_siden_sweep(cfg)
    assert res.header == ("rho", "mean_delta_hat", "mean_omega_hat", "n_valid")
    rhos = res.column("rho")
    assert rhos == sorted(rhos) == [0.0, 1.0, 2.0]
    n_valid = set(res.column("n_valid"))
    assert len(n_valid) == 1 and 0 <= n_valid.pop() <= 4
    deltas = res.column("mean_delta_hat")
    omegas = res.column("mean_omega_hat")
    for d, o in zip(deltas, omegas):
        assert d > 0.0
        if o is not None:
            assert d <= o
    # the certified radius grows with the filter size on average
    assert deltas == sorted(deltas)


def test_siden_sweep_single_atom_pattern(unit_file):
    """The unit atom has no zero-crossing: no valid trial, empty omega
    cells, and the delta column falls back to the all-trial mean."""
    cfg = SweepConfig(pattern="file", pattern_file=unit_file, trials=2,
                      rho_list=(0.0, 1.0))
    res = run_siden_sweep(cfg)
    assert res.column("n_valid") == [0, 0]
    assert res.column("mean_omega_hat") == [None, None]
    deltas = res.column("mean_delta_hat")
    assert np.isclose(deltas[0], 1.1358598034237648, atol=1e-9)
    assert np.isclose(deltas[1], deltas[0] * math.sqrt(2.0), atol=1e-9)
    lines = res.to_csv().splitlines()
    assert lines[1].split(",")[2] == ""


def test_error_sweep_gaussian_small():
    # grad_tol well under the 1e-6 violation allowance so the eta = 0 rows
    # measure the solver floor, not the stopping rule
    cfg = SweepConfig(
        trials=2, targets=2, n_atoms=5, rho_list=(1.0,),
        eta_list=(0.0, 0.01), L=30, seed=1, grad_tol=1e-8,
    )
    res = run_error_sweep(cfg)
    assert res.header == ("rho", "eta", "mean_error", "mean_bound",
                          "bound_violation_rate")
    assert res.column("rho") == [1.0, 1.0]
    assert res.column("eta") == [0.0, 0.01]
    err0, err1 = res.column("mean_error")
    assert err0 < 1e-5
    bound0, bound1 = res.column("mean_bound")
    assert bound0 == 0.0 and bound1 > 0.0
    assert res.column("bound_violation_rate") == [0.0, 0.0]


def test_error_sweep_per_run_log(tmp_path):
    log = tmp_path / "runs.csv"
    cfg = SweepConfig(
        trials=2, targets=2, n_atoms=4, rho_list=(1.0, 2.0),
        eta_list=(0.0,), L=20, seed=5, per_run_out=str(log),
    )
    run_error_sweep(cfg)
    lines = log.read_text().splitlines()
    assert lines[0] == ("seed,rho,eta_or_nu,true_tx,true_ty,est_tx,est_ty,"
                        "error,iterations,converged")
    assert len(lines) == 1 + 2 * 2 * 2
    keys = [tuple(float(line.split(",")[i]) for i in (1, 2, 0)) for line in lines[1:]]
    assert keys == sorted(keys)


def test_error_sweep_generic_modes(unit_file):
    cfg = SweepConfig(
        pattern="file", pattern_file=unit_file, noise="uncorrelated",
        trials=2, targets=2, noise_atoms=3, rho_list=(0.0,),
        nu_list=(0.02,), seed=2,
    )
    res = run_error_sweep(cfg)
    assert res.header[1] == "nu"
    assert res.column("mean_bound")[0] > 0.0
    assert res.column("bound_violation_rate") == [0.0]
    # inadmissible norm: bound cells stay empty
    loud = run_error_sweep(
        SweepConfig(
            pattern="file", pattern_file=unit_file, noise="correlated",
            trials=1, targets=1, noise_atoms=1, rho_list=(0.0,),
            nu_list=(5.0,), seed=2,
        )
    )
    assert loud.column("mean_bound") == [None]
    assert loud.column("bound_violation_rate") == [None]
    with pytest.raises(ConfigError):
        run_error_sweep(SweepConfig(eta_list=()))
    with pytest.raises(ConfigError):
        run_error_sweep(SweepConfig(eta_list=(-0.1,), trials=1, targets=1))


def test_threaded_trials_match_serial():
    base = dict(trials=3, n_atoms=5, rho_list=(0.0, 1.0), seed=11)
    serial = run_siden_sweep(SweepConfig(**base))
    threaded = run_siden_sweep(SweepConfig(threads=2, **base))
    assert serial.to_csv() == threaded.to_csv()


def test_rerun_is_byte_identical():
    cfg = SweepConfig(trials=2, targets=2, n_atoms=4, rho_list=(1.0,),
                      eta_list=(0.01,), L=20, seed=9)
    assert run_error_sweep(cfg).to_csv() == run_error_sweep(cfg).to_csv()


def test_grid_count_runs():
    cfg = SweepConfig(pattern="face-like", rho_list=(0.0, 1.0, 2.0, 3.0),
                      t_range=4.0)
    res = run_grid_count(cfg)
    assert res.header == ("rho", "grid_points", "product")
    counts = res.column("grid_points")
    assert counts == sorted(counts, reverse=True)
    assert all(isinstance(c, int) and c >= 1 for c in counts)
    for (rho, count, product) in res.rows:
        assert np.isclose(product, count * (1.0 + rho * rho), rtol=1e-14)


def test_bounds_report_gaussian(unit_file):
    cfg = SweepConfig(pattern="file", pattern_file=unit_file, L=100,
                      epsilon=0.1, eta=0.02, b=4.0)
    rep = run_bounds_report(cfg)
    direct = gaussian_bound(UNIT, NoiseSpec(L=100, epsilon=0.1, eta=0.02, b=4.0))
    assert rep == direct
    # smoothing changes the pattern and the noise spec together
    smoothed = run_bounds_report(
        SweepConfig(pattern="file", pattern_file=unit_file, rho=1.0)
    )
    assert smoothed.r0_lb < rep.r0_lb
    csv = bound_report_csv(rep)
    lines = csv.splitlines()
    assert lines[0] == ",".join(BOUND_CSV_COLUMNS)
    assert len(lines) == 2


def test_bounds_report_generic_modes():
    base = dict(n_atoms=10, nu=0.005, seed=4)
    cor = run_bounds_report(SweepConfig(noise="correlated", noise_atoms=3, **base))
    assert cor.nu0 is not None and cor.ru0 is not None
    assert cor.rpz is None and cor.qu0 is None
    unc = run_bounds_report(SweepConfig(noise="uncorrelated", noise_atoms=3, **base))
    assert unc.rpz is not None and unc.rpz > 0.0
    assert unc.qu0 is not None and unc.qu0 <= unc.ru0
