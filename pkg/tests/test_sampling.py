import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfcv.sampling import (
    MAX_SOBOL_DIM,
    SeedPlan,
    random_fidelity,
    snap_to_levels,
    sobol_points,
    sobol_unit,
    stream_seed,
    uniform_points,
)

UNIT2 = np.array([[0.0, 1.0], [0.0, 1.0]])


def gray_code_radical_inverse(i, bits=32):
    """One-dimensional Sobol point ``i`` (van der Corput in Gray-code order)."""
    g = i ^ (i >> 1)
    return sum(((g >> k) & 1) * 2.0 ** -(k + 1) for k in range(bits))


def l2_star_discrepancy(P):
    """Warnock's closed form for the L2 star discrepancy on the unit cube."""
    n, d = P.shape
    a = 3.0**-d
    b = np.sum(np.prod(1.0 - P**2, axis=1)) * 2.0 ** (1 - d) / n
    c = np.sum(np.prod(1.0 - np.maximum(P[:, None, :], P[None, :, :]), axis=2)) / n**2
    return np.sqrt(a - b + c)


def test_unscrambled_sequence_matches_radical_inverse():
    u = sobol_unit(1, 8, scramble=False)[:, 0]
    ref = [gray_code_radical_inverse(i) for i in range(8)]
    np.testing.assert_array_equal(u, ref)
    np.testing.assert_array_equal(u[1:4], [0.5, 0.75, 0.25])


def test_sobol_beats_uniform_discrepancy():
    sob = [l2_star_discrepancy(sobol_points(256, UNIT2, seed=k)) for k in range(20)]
    uni = [l2_star_discrepancy(uniform_points(256, UNIT2, np.random.default_rng(k))) for k in range(20)]
    assert np.median(sob) < np.median(uni)


def test_sobol_box_mapping_and_determinism():
    box = np.array([[-4.0, 7.0], [-3.0, 8.0], [0.0, 1.0]])
    a = sobol_points(100, box, seed=3)
    assert np.all(a >= box[:, 0]) and np.all(a <= box[:, 1])
    np.testing.assert_array_equal(a, sobol_points(100, box, seed=3))
    assert not np.array_equal(a, sobol_points(100, box, seed=4))


def test_sobol_dimension_bound():
    with pytest.raises(ValueError):
        sobol_unit(MAX_SOBOL_DIM + 1, 4)


def test_uniform_points_examples():
    rng = np.random.default_rng(0)
    assert uniform_points(0, UNIT2, rng).shape == (0, 2)
    P = uniform_points(20000, UNIT2, rng)
    sigma = np.sqrt(1 / 12 / len(P))
    assert np.all(np.abs(P.mean(axis=0) - 0.5) < 3 * sigma)
    np.testing.assert_array_equal(
        uniform_points(5, UNIT2, np.random.default_rng(9)),
        uniform_points(5, UNIT2, np.random.default_rng(9)),
    )


@pytest.mark.parametrize("box", [[[0.0, 0.0]], [[1.0, 0.0]], [0.0, 1.0]])
def test_degenerate_box_rejected(box):
    with pytest.raises(ValueError):
        uniform_points(3, box, np.random.default_rng(0))


def test_random_fidelity_examples():
    rng = np.random.default_rng(1)
    assert random_fidelity((1.0,), rng) == 1.0
    draws = random_fidelity((0.0, 0.5, 1.0), rng, size=3000)
    sigma = np.sqrt((1 / 3) * (2 / 3) / 3000)
    for v in (0.0, 0.5, 1.0):
        assert abs(np.mean(draws == v) - 1 / 3) < 3 * sigma
    cont = random_fidelity(None, rng, size=5000)
    assert abs(cont.mean() - 0.5) < 3 * np.sqrt(1 / 12 / 5000)


def test_snap_to_levels_equal_probability():
    u = sobol_unit(1, 300, seed=7)[:, 0]
    s = snap_to_levels(u, (0.0, 0.5, 1.0))
    assert set(np.unique(s)) <= {0.0, 0.5, 1.0}
    assert abs(np.mean(s == 1.0) - 1 / 3) <= 0.05
    np.testing.assert_array_equal(snap_to_levels([0.0, 0.34, 0.67, 1.0], (0.0, 0.5, 1.0)), [0.0, 0.5, 1.0, 1.0])


def test_stream_independence():
    assert stream_seed(1, 0, "seed") != stream_seed(1, 0, "test")
    assert stream_seed(1, 0, "seed") != stream_seed(1, 1, "seed")
    assert stream_seed(1, 0, "outer", 3) == stream_seed(1, 0, 2, 3)


def test_seed_plan_defaults_and_streams():
    box = np.array([[-4.0, 7.0], [-3.0, 8.0]])
    plan = SeedPlan(5, box)
    assert (plan.n_seed, plan.n_test) == (20, 60)
    X, S = plan.seed_design()
    assert X.shape == (20, 2) and S.shape == (20,)
    assert np.all((S >= 0) & (S <= 1))
    T = plan.test_points()
    assert T.shape == (60, 2)
    # More seeds leave the test set untouched.
    bigger = SeedPlan(5, box, n_seed=40)
    np.testing.assert_array_equal(bigger.test_points(), T)
    np.testing.assert_array_equal(bigger.seed_design()[0][:20], X)
    other = SeedPlan(5, box, repetition=1)
    assert not np.array_equal(other.test_points(), T)
    with pytest.raises(ValueError):
        SeedPlan(5, box, n_seed=1)
    with pytest.raises(ValueError):
        SeedPlan(5, box, n_test=0)


def test_seed_plan_discrete_levels():
    plan = SeedPlan(2, np.array([[0.0, 1.0]] * 3), fidelity_space=(0.0, 0.5, 1.0))
    _, S = plan.seed_design()
    assert set(np.unique(S)) <= {0.0, 0.5, 1.0}


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), count=st.integers(0, 64), d=st.integers(1, 8))
def test_generators_are_pure(seed, count, d):
    box = np.column_stack([np.zeros(d), np.arange(1, d + 1, dtype=float)])
    np.testing.assert_array_equal(sobol_points(count, box, seed), sobol_points(count, box, seed))
    np.testing.assert_array_equal(
        uniform_points(count, box, np.random.default_rng(seed)),
        uniform_points(count, box, np.random.default_rng(seed)),
    )
