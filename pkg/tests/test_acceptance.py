"""Acceptance suite: one PASS/FAIL line per criterion, then a hard assert."""
import json
import time

import numpy as np
import pytest

from conftest import record
from oracles import free_gaussian_tail, rk4_transmission, square_barrier_T2
from tunnelrace.cli import main
from tunnelrace.grids import build_grid, gaussian_packet
from tunnelrace.observables import KernelColumn, LocalizationDetectorSpec, Smearing, negative_momentum_escape, rotation_kernel
from tunnelrace.opcheck import Symbol, build_model, covariant_inequality_check, hardy_defect_spectrum
from tunnelrace.potentials import random_barrier, square_barrier
from tunnelrace.race import (GaussianRecipe, case_rng, make_config, random_config, run_race, run_race_I,
                             standard_time_detectors)
from tunnelrace.scattering import halfplane_bound_check, transmission_amplitude, transmission_curve

SEED = 42
EPS = np.finfo(float).eps


def sweep_barriers(n=50):
    return [random_barrier(case_rng(SEED, i), 0.0, 4.0) for i in range(n)]


def test_c01_c02_unitarity_reciprocity_conjugation():
    k = np.linspace(0, 5, 2049)[1:]
    t0 = time.perf_counter()
    unit = recip = conj = 0.0
    for p in sweep_barriers():
        c = transmission_curve(p, k)
        unit = max(unit, float(np.max(c.unitarity_defects())))
        recip = max(recip, c.reciprocity_defect)
        conj = max(conj, float(np.max(np.abs(transmission_amplitude(p, -k) - np.conj(transmission_amplitude(p, k))))))
    secs = time.perf_counter() - t0
    ok1 = record(1, "S-matrix unitarity", unit <= 1e-10 and secs < 30, f"max|SS*-I|={unit:.2e} in {secs:.1f}s")
    ok2 = record(2, "reciprocity and conjugation", recip <= 1e-10 and conj <= 1e-12,
                 f"max|Tl-Tr|={recip:.2e} max|T(-k)-conj T(k)|={conj:.2e}")
    assert ok1 and ok2


def test_c03_square_barrier_oracles():
    k = np.linspace(0, 2, 102)[1:-1]
    assert len(k) == 100
    p = square_barrier(0, 1, 4)
    T = transmission_amplitude(p, k)
    closed = float(np.max(np.abs(np.abs(T) ** 2 - square_barrier_T2(4, 1, k))))
    ode = float(np.max([abs(abs(T[i]) ** 2 - abs(rk4_transmission([(1.0, 4.0)], 0.0, kk)) ** 2) for i, kk in enumerate(k)]))
    assert record(3, "square-barrier oracle", closed <= 1e-10 and ode <= 1e-6,
                  f"closed form {closed:.2e}, RK4 {ode:.2e}")


def test_c04_halfplane_bound():
    worst, bad, n = 0.0, 0, 0
    for p in [square_barrier(0, 1, 4)] + sweep_barriers(10):
        r = halfplane_bound_check(p, (0.0, 5.0, 0.0, 3.0), samples=10_000)
        worst, bad, n = max(worst, r.max_value), bad + r.violations, n + r.samples
    assert record(4, "half-plane bound", worst <= 1 + 1e-10 and bad == 0, f"max|T|={worst:.12f} over {n} samples")


@pytest.mark.slow
def test_c05_approach_I_sweep():
    t0 = time.perf_counter()
    worst, plateau, fails = 0.0, 0.0, []
    for i in range(25):
        for d in standard_time_detectors(0.0):
            r = run_race_I(random_config(SEED, i, "I", d, n=4096))
            worst = max(worst, r.max_violation)
            if r.verdict != "PASS":
                fails.append((i, d.kind))
            if d.kind == "canonical":
                plateau = max(plateau, abs(r.health["plateau_tunneled"] - r.health["plateau_expected"]))
    secs = time.perf_counter() - t0
    ok = not fails and worst <= 1e-8 and plateau <= 1e-6 and secs < 120
    assert record(5, "main inequality, approach I", ok,
                  f"worst violation {worst:.2e}, plateau error {plateau:.2e}, {secs:.0f}s, failures {fails}")


@pytest.mark.slow
def test_c06_approaches_II_and_III_sweep():
    worst2, worst3, fails = 0.0, 0.0, []
    for i in range(25):
        for sigma in (0.2, 1.0):
            d = LocalizationDetectorSpec("smeared", Smearing("gaussian", sigma))
            r = run_race(random_config(SEED, i, "II", d))
            worst2 = max(worst2, r.max_violation)
            if r.verdict != "PASS":
                fails.append(("II", i, sigma))
        # propagator cross-check is criterion 7; here the verdict path only
        c = random_config(SEED, i, "III", times=(10.0, 30.0), cross_check=False)
        assert list(c.agrid) == [c.potential.x1, c.potential.x1 + 5, c.potential.x1 + 20]
        r = run_race(c)
        worst3 = max(worst3, r.max_violation)
        if r.verdict != "PASS":
            fails.append(("III", i))
    assert record(6, "main inequality, approaches II and III", not fails and max(worst2, worst3) <= 1e-6,
                  f"worst II {worst2:.2e}, worst III {worst3:.2e}, failures {fails}")


@pytest.mark.slow
def test_c07_propagator_identity():
    disc = []
    for i in range(10):
        r = run_race(random_config(SEED, i, "III", n=8192))
        disc.append(r.health["cross_check_l2"])
    # refinement on fixed bounds: doubling n doubles k_max; halving the phase halves dt
    floor = 1e-10
    refine = []
    for i in (0, 3):
        g = random_config(SEED, i, "III", n=8192).grid
        d = {}
        for n, ph in ((4096, 1.0), (8192, 1.0), (8192, 0.5)):
            c = random_config(SEED, i, "III", n=n, times=(10.0,), phase=ph, eps_disc=1.0,
                              grid=build_grid(g.x_min, g.x_max, n))
            d[n, ph] = run_race(c).health["cross_check_l2"]
        refine.append((d[8192, 1.0] < d[4096, 1.0]) and d[8192, 0.5] <= max(d[8192, 1.0], floor))
        refine.append(d)
    ok = max(disc) <= 1e-4 and all(refine[0::2])
    detail = f"max L2 {max(disc):.2e}; refinement " + "; ".join(
        ", ".join(f"n={n} phase={ph}: {v:.2e}" for (n, ph), v in d.items()) for d in refine[1::2])
    assert record(7, "propagator identity", ok, detail)


def test_c08_hartman_shape():
    r = run_race_I(make_config("I", square_barrier(0, 8, 4), GaussianRecipe(1.0, 0.05)))
    h = r.hartman
    below = bool(np.all(r.tunneled.cumulative <= r.free.cumulative + r.config.theta))
    assert record(8, "Hartman-effect shape", h.peak_advance > 0 and below and r.passed,
                  f"peak advance {h.peak_advance:.3f}, deficit at free peak {h.cumulative_deficit_at_free_peak:.3e}")


def test_c09_discrete_hardy_lemma():
    g = Symbol.transmission(square_barrier(0, 1, 4))
    defects = {d: hardy_defect_spectrum(build_model(d, g)) for d in (256, 512, 1024)}
    improving = all(defects[2 * d].defect <= max(defects[d].defect, 64 * 2 * d * EPS) for d in (256, 512))
    anti = hardy_defect_spectrum(build_model(256, Symbol.shift(-16))).lambda_min
    ok = defects[1024].lambda_min >= -1e-8 and improving and anti < -0.05
    assert record(9, "Hardy lemma, discrete", ok,
                  "lambda_min " + ", ".join(f"{d}: {s.lambda_min:.2e}" for d, s in defects.items())
                  + f"; anti-Hardy {anti:.3f}")


def test_c10_covariant_inequality():
    g = Symbol.transmission(square_barrier(0, 1, 4))
    shifts = [-12, -3, 4, 9, 25]
    lam, spread = [], []
    for det in ((KernelColumn("constant"),), rotation_kernel(1.0)):
        r = covariant_inequality_check(build_model(512, g, detector=det), shifts)
        lam.append(r.lambda_min)
        spread.append(r.spectrum_spread)
    assert record(10, "covariant inequality, discrete", min(lam) >= -1e-8 and max(spread) <= 1e-12,
                  f"lambda_min {min(lam):.2e}, spectrum spread {max(spread):.2e}")


def test_c11_negative_momentum_escape():
    s = gaussian_packet(build_grid(-300, 100, 4096), 10.0, -1.0, 0.1)
    t = np.array([0.0, 10.0, 25.0, 50.0])
    esc = negative_momentum_escape(s, LocalizationDetectorSpec("smeared", Smearing("gaussian", 1.0)), 0.0, t)
    err = float(np.max(np.abs(esc - free_gaussian_tail(0.0, t, 10.0, -1.0, 0.1, 1.0))))
    assert record(11, "negative-momentum escape", esc[-1] < 1e-3 and err <= 1e-4,
                  f"P(t=50)={esc[-1]:.2e}, oracle error {err:.2e}")


@pytest.mark.slow
def test_c12_sweep_determinism(tmp_path):
    blobs = []
    for name in ("first", "second"):
        code = main(["sweep", "--cases", "25", "--seed", "42", "--out", str(tmp_path / name)])
        blobs.append((code, (tmp_path / name / "sweep.json").read_bytes()))
    agg = json.loads(blobs[0][1])
    ok = blobs[0][1] == blobs[1][1] and blobs[0][0] == 0
    assert record(12, "sweep determinism", ok,
                  f"{len(blobs[0][1])} bytes, identical={blobs[0][1] == blobs[1][1]}, verdict {agg['verdict']}")
