import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import fd_bound_states, square_well_bound_states
from tunnelrace.grids import build_grid
from tunnelrace.potentials import (PotentialError, PotentialSpec, count_bound_states, potential_from_dict,
                                   random_barrier, sample_function, square_barrier, validate_tunnel)


def test_square_barrier_constructor():
    p = square_barrier(0, 1, 4)
    assert p.segments == ((1.0, 4.0),)
    assert (p.x0, p.x1) == (0.0, 1.0)
    thick = square_barrier(0, 8, 4)
    assert thick.x1 == 8.0
    with pytest.raises(PotentialError):
        square_barrier(0, -1, 4)


def test_sample_function():
    p = sample_function(lambda x: 4 * np.sin(np.pi * x) ** 2, 0, 1, 512)
    assert len(p.segments) == 512
    assert np.max(p.heights) <= 4.0
    z = sample_function(lambda x: 0 * x, 0, 1, 8)
    assert z.is_zero
    with pytest.raises(PotentialError):
        sample_function(lambda x: x, 0, 1, 0)


def test_pointwise_values():
    p = PotentialSpec(0.0, ((1.0, 2.0), (0.5, 3.0)))
    np.testing.assert_array_equal(p(np.array([-0.1, 0.5, 1.2, 1.6])), [0, 2, 3, 0])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_random_barrier_shape(seed):
    p = random_barrier(np.random.default_rng(seed), 0.0, 4.0)
    assert p.x0 == 0.0 and p.x1 == pytest.approx(4.0, abs=1e-12)
    assert np.all(p.heights >= 0) and np.max(p.heights) <= 4.0
    assert 1 <= int(np.sum(p.heights > 0)) <= 8


def test_cell_average_preserves_integral():
    g = build_grid(-10, 10, 1024)
    p = PotentialSpec(0.013, ((0.71, 2.0), (1.3, 0.5)))
    assert np.sum(p.cell_average(g)) * g.dx == pytest.approx(0.71 * 2 + 1.3 * 0.5, rel=1e-12)


def test_spectral_values_converge_to_the_step():
    p = square_barrier(-0.3, 1.0, 4.0)
    errs = []
    for n in (512, 2048, 8192):
        g = build_grid(-10, 10, n)
        v = p.spectral_values(g)
        # integral is exact: the zero mode is kept
        assert np.sum(v) * g.dx == pytest.approx(4.0, rel=1e-12)
        away = np.abs(g.x - (-0.3)) > 0.5
        away &= np.abs(g.x - 0.7) > 0.5
        errs.append(np.max(np.abs(v[away] - p(g.x)[away])))
    assert errs[2] < errs[1] < errs[0]


def test_grid_values_rejects_unknown_method():
    with pytest.raises(PotentialError):
        square_barrier(0, 1, 1).grid_values(build_grid(-5, 5, 64), "linear")


def test_from_dict():
    assert potential_from_dict({"type": "square", "x0": 0, "width": 1, "height": 4}).segments == ((1.0, 4.0),)
    seg = potential_from_dict({"type": "segments", "x0": 1, "segments": [[0.5, 1], [0.5, 2]]})
    assert seg.x1 == 2.0
    smp = potential_from_dict({"type": "sampled", "x0": 0, "x1": 1, "m": 16,
                               "function": {"name": "sin2", "amplitude": 4}})
    assert len(smp.segments) == 16
    with pytest.raises(PotentialError, match="width"):
        potential_from_dict({"type": "square", "x0": 0, "height": 4})
    with pytest.raises(PotentialError, match="unknown"):
        potential_from_dict({"type": "spline"})


def test_validate_tunnel_examples():
    box = build_grid(-20, 20, 2048)
    ok = validate_tunnel(square_barrier(0, 1, 4), box)
    assert ok.passed and ok.positive and ok.bound_states == 0
    free = validate_tunnel(sample_function(lambda x: 0 * x, 0, 1, 8), box)
    assert free.passed and free.bound_states == 0
    well = validate_tunnel(square_barrier(0, 1, -4), box)
    assert not well.passed and well.bound_states >= 1


@pytest.mark.parametrize("depth, width", [(4, 1), (40, 2), (100, 1.5)])
def test_bound_state_count_matches_well_oracle(depth, width):
    # frozen: formula and dense finite differences agree on these cases
    expected = square_well_bound_states(depth, width)
    assert expected == fd_bound_states(depth, width)
    box = build_grid(-20, 20, 4096)
    count, lowest = count_bound_states(square_barrier(-width / 2, width, -depth), box, 1e-8)
    assert count == expected
    assert -depth < lowest < 0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_verdict_survives_segment_splitting(seed):
    rng = np.random.default_rng(seed)
    segs = tuple((float(w), float(h)) for w, h in zip(rng.uniform(0.2, 1.0, 3), rng.uniform(-6, 4, 3)))
    p = PotentialSpec(-1.0, segs)
    split = PotentialSpec(-1.0, tuple(piece for w, h in segs for piece in ((w / 2, h), (w / 2, h))))
    box = build_grid(-20, 20, 2048)
    assert validate_tunnel(p, box).passed == validate_tunnel(split, box).passed


def test_nonnegative_potentials_never_bind():
    box = build_grid(-20, 20, 2048)
    for seed in range(5):
        assert count_bound_states(random_barrier(np.random.default_rng(seed)), box, 1e-8)[0] == 0
