import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import rk4_transmission, square_barrier_T2
from tunnelrace.potentials import PotentialSpec, random_barrier, sample_function, square_barrier
from tunnelrace.scattering import (ScatteringError, curve_for_grid, halfplane_bound_check, smatrix_at,
                                   total_transfer, transmission_amplitude, transmission_curve)

ZERO = sample_function(lambda x: 0 * x, 0.0, 1.0, 8)

# closed-form square barrier V0 = 4, L = 1 (oracles.square_barrier_T2), frozen
SQUARE_T2 = {0.5: 0.01992818430147894, 1.0: 0.0909668503958455, 1.5: 0.24452751863335082,
             2.0: 0.5, 2.5: 0.7794103753058016, 3.0: 0.9478493940782681}
# full amplitude from the RK4 oracle at k = 1 (phase convention: exp(ikx) both sides)
SQUARE_T_K1 = 0.022262788445603518 - 0.30078433909779023j


def test_free_segment_matrix():
    k, L = 1.7, 2.5
    m = total_transfer(PotentialSpec(0.0, ((L, 0.0),)), k)
    want = [[np.cos(k * L), np.sin(k * L) / k], [-k * np.sin(k * L), np.cos(k * L)]]
    np.testing.assert_allclose(m, want, atol=1e-14)
    np.testing.assert_allclose(total_transfer(PotentialSpec(0.0, ((1.0, 0.0),)), 0.0), [[1, 1], [0, 1]], atol=0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-6.0, 6.0), st.floats(0.0, 3.0))
def test_transfer_determinant_is_one(seed, re, im):
    p = random_barrier(np.random.default_rng(seed))
    m = total_transfer(p, complex(re, im))
    # entries grow like exp(|Im k| L); the defect is judged against that cancellation scale
    scale = max(abs(m[0, 0] * m[1, 1]) + abs(m[0, 1] * m[1, 0]), 1.0)
    assert abs(np.linalg.det(m) - 1) <= 1e-12 * scale


def test_determinant_of_the_standard_barrier():
    k = np.concatenate([np.linspace(0, 6, 61), np.linspace(-3, 3, 13) + 0.5j])
    assert np.max(np.abs(np.linalg.det(total_transfer(square_barrier(0, 1, 4), k)) - 1)) < 1e-12


def test_segment_refinement_leaves_T_unchanged():
    k = np.linspace(0.01, 5, 500)
    halves = PotentialSpec(0.0, ((0.5, 4.0), (0.5, 4.0)))
    quarters = PotentialSpec(0.0, ((0.25, 4.0),) * 4)
    base = transmission_amplitude(square_barrier(0, 1, 4), k)
    for q in (halves, quarters):
        assert np.max(np.abs(transmission_amplitude(q, k) - base)) < 1e-12


def test_zero_potential_is_transparent():
    pt = smatrix_at(ZERO, 1.3)
    assert abs(pt.T - 1) < 1e-14 and abs(pt.R_l) < 1e-15 and abs(pt.R_r) < 1e-15
    c = transmission_curve(ZERO, np.linspace(0.1, 5, 50))
    np.testing.assert_allclose(c.T, 1.0, atol=1e-14)
    assert np.all(np.abs(transmission_amplitude(ZERO, 1j + np.linspace(-3, 3, 7))) == 1)


def test_square_barrier_against_frozen_oracles():
    p = square_barrier(0, 1, 4)
    ks = np.array(sorted(SQUARE_T2))
    T = transmission_amplitude(p, ks)
    np.testing.assert_allclose(np.abs(T) ** 2, [SQUARE_T2[k] for k in ks], rtol=0, atol=1e-12)
    assert abs(transmission_amplitude(p, 1.0) - SQUARE_T_K1) < 1e-10
    # the oracles still produce the frozen numbers
    np.testing.assert_allclose(square_barrier_T2(4, 1, ks), [SQUARE_T2[k] for k in ks], atol=1e-15)
    assert abs(rk4_transmission([(1.0, 4.0)], 0.0, 1.0) - SQUARE_T_K1) < 1e-12


def test_multi_segment_against_rk4():
    segs = [(0.4, 2.0), (0.3, 0.0), (0.8, 5.5)]
    p = PotentialSpec(-0.7, tuple(segs))
    for k in (0.3, 1.1, 2.9):
        assert abs(transmission_amplitude(p, k) - rk4_transmission(segs, -0.7, k)) < 1e-8


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_unitarity_and_reciprocity(seed):
    p = random_barrier(np.random.default_rng(seed))
    c = transmission_curve(p, np.linspace(0.01, 5, 200))
    assert np.max(c.unitarity_defects()) < 1e-10
    np.testing.assert_allclose(np.abs(c.T) ** 2 + np.abs(c.R_l) ** 2, 1.0, atol=1e-10)
    assert c.reciprocity_defect < 1e-10
    np.testing.assert_allclose(c.T, transmission_amplitude(p, c.k), atol=1e-10)


def test_conjugation_symmetry():
    p = random_barrier(np.random.default_rng(3))
    k = np.linspace(0.01, 5, 300)
    assert np.max(np.abs(transmission_amplitude(p, -k) - np.conj(transmission_amplitude(p, k)))) < 1e-12
    c = transmission_curve(p, k)
    assert np.max(np.abs(c.multiplier(-k) - np.conj(c.T))) == 0


def test_high_energy_approach_to_one():
    p = square_barrier(0, 1, 4)
    k = np.linspace(20, 200, 400)
    a = np.abs(transmission_amplitude(p, k))
    gap = 1 - a
    assert np.all(gap >= -1e-14)
    assert gap[-1] < 1e-4
    # the closed-form envelope 1 - |T|**2 <= V0**2 / (4 E (E - V0))
    assert np.all(1 - a**2 <= 16 / (4 * k**2 * (k**2 - 4)) + 1e-14)


def test_halfplane_bound():
    assert halfplane_bound_check(ZERO).max_value == pytest.approx(1.0, abs=1e-15)
    r = halfplane_bound_check(square_barrier(0, 1, 4))
    assert r.samples >= 10_000 and r.violations == 0 and r.max_value <= 1 + 1e-10
    with pytest.raises(ScatteringError):
        halfplane_bound_check(ZERO, rect=(0, 1, -1, 1))


def test_curve_grid_rules():
    p = square_barrier(0, 1, 4)
    with pytest.raises(ScatteringError):
        transmission_curve(p, [0.0, 1.0])
    with pytest.raises(ScatteringError):
        transmission_curve(p, [2.0, 1.0])
    c = curve_for_grid(p, np.array([-2.0, -1.0, 0.0, 1.0, 2.0]))
    np.testing.assert_array_equal(c.k, [1.0, 2.0])
    with pytest.raises(ScatteringError):
        c.multiplier(np.array([5.0]), mass=np.array([1.0]))
    assert len(c.continuity_violations()) == 0
    with pytest.raises(ScatteringError):
        smatrix_at(p, 0.0)


def test_curve_csv(tmp_path):
    c = transmission_curve(square_barrier(0, 1, 4), [0.5, 1.0])
    c.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].startswith("k,re_T,im_T,abs_T2")
    assert float(lines[2].split(",")[3]) == pytest.approx(SQUARE_T2[1.0], abs=1e-15)
