import numpy as np
import pytest

from oracles import gaussian_transmitted_mass
from tunnelrace.grids import build_grid
from tunnelrace.observables import LocalizationDetectorSpec, Smearing, TimeDetectorSpec
from tunnelrace.potentials import random_barrier, sample_function, square_barrier
from tunnelrace.race import (GaussianRecipe, RaceConfigError, RaceError, analyze_report, case_rng, make_config,
                             random_config, run_race, run_race_I, run_race_II, run_race_III)

ZERO = sample_function(lambda x: 0 * x, 0.0, 1.0, 8)
SQUARE = square_barrier(0, 1, 4)
# quad of the closed-form |T|^2 against the Gaussian momentum density (frozen)
SQUARE_PLATEAU = 0.09137925885752295


def test_zero_potential_gives_identical_curves():
    for approach in ("I", "II"):
        r = run_race(make_config(approach, ZERO, GaussianRecipe(1.0, 0.05)))
        for pan in r.panels:
            np.testing.assert_allclose(pan.tunneled.cumulative, pan.free.cumulative, rtol=0, atol=1e-14)
        assert abs(r.max_violation) <= 1e-12 and r.passed
    r = run_race(make_config("III", ZERO, GaussianRecipe(1.0, 0.1), times=(10.0,), n=4096))
    assert r.health["cross_check_l2"] < 1e-12
    assert abs(r.max_violation) <= 1e-12


def test_square_barrier_plateau_and_verdict():
    r = run_race_I(make_config("I", SQUARE, GaussianRecipe(1.0, 0.05)))
    assert gaussian_transmitted_mass(4, 1, 1.0, 0.05) == pytest.approx(SQUARE_PLATEAU, rel=1e-12)
    assert r.health["plateau_tunneled"] == pytest.approx(SQUARE_PLATEAU, abs=1e-6)
    assert r.health["plateau_expected"] == pytest.approx(SQUARE_PLATEAU, abs=1e-6)
    assert r.verdict == "PASS" and r.max_violation <= 1e-8
    assert not r.warnings


def test_random_barrier_smeared_localization():
    p = random_barrier(np.random.default_rng(7), 0.0, 4.0)
    d = LocalizationDetectorSpec("smeared", Smearing("gaussian", 0.5))
    r = run_race_II(make_config("II", p, GaussianRecipe(1.2, 0.1), d))
    assert r.verdict == "PASS" and r.max_violation <= 1e-6
    assert r.health["reflected_residual"] < 1e-3
    assert r.health["large_t_margin_dk"] >= 10.0
    assert not r.warnings


def test_short_time_warns_but_runs():
    d = LocalizationDetectorSpec("smeared", Smearing("gaussian", 0.5))
    r = run_race_II(make_config("II", SQUARE, GaussianRecipe(1.0, 0.1), d, times=(20.0,)))
    assert any("heuristic" in w for w in r.warnings)


def test_square_barrier_approach_III():
    r = run_race_III(make_config("III", SQUARE, GaussianRecipe(1.0, 0.1), times=(30.0,), n=4096))
    assert r.verdict == "PASS" and r.max_violation <= 1e-6
    assert r.health["cross_check_l2"] <= 1e-4
    assert r.health["verdicts_agree"]
    assert r.config.grid.k_max <= 40.0 + 1e-9


def test_hartman_thick_barrier():
    r = run_race_I(make_config("I", square_barrier(0, 8, 4), GaussianRecipe(1.0, 0.05)))
    h = r.hartman
    assert r.passed and h.peak_advance > 0 and h.hartman_observed and h.inequality_held
    assert h.cumulative_deficit_at_free_peak > 0
    free = analyze_report(run_race_I(make_config("I", ZERO, GaussianRecipe(1.0, 0.05))))
    dt = float(np.diff(r.config.tgrid).mean())
    assert abs(free.peak_advance) <= dt


def test_density_can_exceed_free_pointwise():
    # early arrivals of the transmitted packet beat the free density while the cumulative stays below
    r = run_race_I(make_config("I", square_barrier(0, 8, 4), GaussianRecipe(1.0, 0.05)))
    tu, fr = r.tunneled, r.free
    assert r.hartman.density_exceeds_free == bool(np.any(tu.density > fr.density + 1e-12 * fr.density.max()))
    assert np.all(tu.cumulative <= fr.cumulative + 1e-8)


def test_analyze_needs_approach_I():
    r = run_race(make_config("II", ZERO, GaussianRecipe(1.0, 0.05)))
    with pytest.raises(RaceError):
        analyze_report(r)


def test_config_errors():
    s = GaussianRecipe(1.0, 0.05)
    with pytest.raises(RaceConfigError, match="approach"):
        make_config("IV", SQUARE, s)
    with pytest.raises(RaceConfigError, match="time detector"):
        make_config("I", SQUARE, s, LocalizationDetectorSpec())
    with pytest.raises(RaceConfigError, match="outside grid"):
        make_config("I", square_barrier(500, 1, 4), s, grid=build_grid(-200, 200, 4096))
    with pytest.raises(RaceConfigError, match="tunnel"):
        make_config("I", square_barrier(0, 2, -40), s)
    with pytest.raises(RaceConfigError, match="a >= x1"):
        make_config("III", SQUARE, GaussianRecipe(1.0, 0.1), agrid=[0.5, 2.0], times=(10.0,))
    with pytest.raises(RaceConfigError, match="positive"):
        make_config("III", SQUARE, GaussianRecipe(1.0, 0.1), times=(0.0,))
    with pytest.raises(RaceConfigError, match="sharp"):
        make_config("III", SQUARE, GaussianRecipe(1.0, 0.1), LocalizationDetectorSpec("smeared", Smearing("gaussian", 1)))
    with pytest.raises(RaceConfigError, match="k0"):
        GaussianRecipe(-1.0, 0.1)
    with pytest.raises(RaceConfigError, match="increase n"):
        make_config("I", SQUARE, GaussianRecipe(1.0, 0.05), n=64)


def test_reports_are_deterministic():
    a = run_race(random_config(42, 3, "II"))
    b = run_race(random_config(42, 3, "II"))
    assert a.to_dict() == b.to_dict()
    assert a.config.digest() == b.config.digest()
    assert case_rng(42, 3).integers(2**63) == case_rng(42, 3).integers(2**63)
    assert case_rng(42, 3).integers(2**63) != case_rng(42, 4).integers(2**63)


def test_report_rows_and_columns():
    r = run_race(make_config("I", SQUARE, GaussianRecipe(1.0, 0.05), TimeDetectorSpec("canonical", 1.0)))
    rows = list(r.rows())
    assert len(rows) == len(r.config.tgrid) and len(rows[0]) == len(r.columns)
    d = r.to_dict()
    assert d["verdict"] == "PASS" and d["provenance"]["config_sha256"] == r.config.digest()
    assert d["hartman"]["peak_time_free"] > 0
