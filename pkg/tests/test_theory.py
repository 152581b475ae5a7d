import math

import numpy as np
import pytest

from rbvf.rbvf import CentroidReadout, rbf_interpolate
from rbvf.theory import (
    GAP_CSV_COLUMNS,
    GapReport,
    GridTooLarge,
    analyze_gap_decay,
    build_ufa_approximator,
    estimate_lipschitz,
    evaluation_grid,
    gap_upper_bound,
    gap_vs_beta,
    grid_interpolate,
    lipschitz_bound,
    plateau_deviation,
    readout_gap,
    ufa_beta0,
    ufa_error,
    verify_gap_1d,
)
from rbvf.verify import GAP_DECAY_BOX, GAP_DECAY_LOCATIONS, GAP_DECAY_VALUES, random_1d_fixtures


def test_two_centroid_gap_vanishes():
    r = CentroidReadout(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]), 1.0)
    rep = verify_gap_1d(r, [-1.0], [2.0], 100_000)
    assert abs(rep.gap) <= 1e-6
    assert rep.centroid_max == pytest.approx(1 / (1 + math.exp(-1)), abs=1e-15)
    assert abs(rep.gap) <= rep.tolerance


def test_single_centroid_gap_exactly_zero():
    rep = verify_gap_1d(CentroidReadout(np.array([[0.4]]), np.array([-1.3]), 2.0), [-2.0], [2.0], 1000)
    assert rep.gap == 0.0


def test_verify_gap_1d_rejects_bad_input():
    with pytest.raises(ValueError):
        verify_gap_1d(CentroidReadout(np.zeros((2, 2)), np.zeros(2), 1.0), [-1, -1], [1, 1])
    with pytest.raises(ValueError):
        verify_gap_1d(CentroidReadout(np.zeros((2, 1)), np.zeros(2), 0.0), [-1], [1])


def test_random_1d_fixtures_small_sample():
    for r in random_1d_fixtures(8, seed=11):
        rep = verify_gap_1d(r, [-2.0], [2.0], 20_000)
        assert abs(rep.gap) <= rep.tolerance
        assert rep.tolerance <= 1e-6


def test_fixture_ranges():
    fx = random_1d_fixtures(50)
    assert all(2 <= len(r.values) <= 20 and 0.1 <= r.beta <= 3 for r in fx)
    assert all(np.all(np.abs(r.locations) <= 2) and np.all(np.abs(r.values) <= 2) for r in fx)


def test_plateau_deviation_small():
    for r in random_1d_fixtures(10, seed=3):
        assert plateau_deviation(r.locations, r.values, r.beta) <= 1e-10


def test_gap_strictly_decreasing_on_fixture():
    reps = gap_vs_beta(GAP_DECAY_LOCATIONS, GAP_DECAY_VALUES, [0.25, 1.0, 1.5, 2.0], *GAP_DECAY_BOX, 150)
    gaps = [r.gap for r in reps]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_gap_sign_and_bounding():
    rng = np.random.default_rng(0)
    for _ in range(10):
        loc, val = rng.uniform(-1, 1, size=(4, 2)), rng.normal(size=4)
        rep = readout_gap(loc, val, float(rng.uniform(0.2, 4)), [-1, -1], [1, 1], 80)
        assert rep.gap >= -rep.tolerance
        assert rep.grid_max <= val.max() + 1e-12


def test_gap_upper_bound_chain():
    # one clearly best centroid, the others far away
    loc = np.array([[0.0, 0.0], [2.5, 0.0], [0.0, -2.5], [-2.0, 2.0]])
    val = np.array([1.0, 0.2, -0.5, 0.1])
    for beta in (0.5, 1.0, 2.0, 4.0):
        rep = readout_gap(loc, val, beta, [-3, -3], [3, 3], 150)
        assert rep.gap <= gap_upper_bound(loc, val, beta) + rep.tolerance


def test_gap_upper_bound_value():
    loc = np.array([[0.0], [1.0], [3.0]])
    val = np.array([2.0, 1.0, 0.0])
    expected = 2.0 * (1 / (1 + math.exp(1.5)) + 1 / (1 + math.exp(4.5)))
    assert gap_upper_bound(loc, val, 1.5) == pytest.approx(expected, rel=1e-14)


def test_equal_values_zero_gap():
    loc = np.random.default_rng(1).uniform(-1, 1, size=(3, 2))
    for rep in gap_vs_beta(loc, np.full(3, 0.7), [0.25, 1.0, 8.0], [-1, -1], [1, 1], 40):
        assert abs(rep.gap) <= 1e-15


def test_lipschitz_bound_holds():
    rng = np.random.default_rng(2)
    loc, val, beta = rng.uniform(-1, 1, size=(5, 2)), rng.normal(size=5), 1.7
    lb = lipschitz_bound(val, beta)
    a = rng.uniform(-1, 1, size=(500, 2))
    b = a + rng.normal(scale=1e-2, size=a.shape)
    dq = np.abs(rbf_interpolate(loc, val, a, beta) - rbf_interpolate(loc, val, b, beta))
    assert np.all(dq <= lb * np.linalg.norm(a - b, axis=1) + 1e-14)


def _rep(beta, gap, tol=1e-6):
    return GapReport(beta, gap, 0.0, gap, 10, 2, 3, tol)


def test_analyze_gap_decay():
    good = analyze_gap_decay([_rep(2.0, 1e-3), _rep(0.5, 1e-1), _rep(1.0, 1e-2), _rep(4.0, 0.0)])
    assert good.nonnegative and good.non_increasing
    assert good.n_fit == 3 and good.slope < 0
    bad = analyze_gap_decay([_rep(0.5, 1e-2), _rep(1.0, 1e-1)])
    assert not bad.non_increasing
    neg = analyze_gap_decay([_rep(1.0, -1e-3)])
    assert not neg.nonnegative and neg.slope is None


def test_gap_report_row():
    assert list(_rep(1.0, 0.5).row()) == GAP_CSV_COLUMNS


def test_ufa_constant_target_exact():
    c = build_ufa_approximator(lambda a: np.full(len(a), 2.0), [-1, -1], [1, 1], 0.1, lipschitz=0.0)
    assert c.n_centroids == 4 and c.beta0 == 0.0
    for beta in (0.0, 1.0, 50.0):
        assert ufa_error(c, beta, 31) <= 1e-14


def test_ufa_1d_linear_spacing():
    c = build_ufa_approximator(lambda a: a[:, 0], [0.0], [1.0], 0.4, lipschitz=1.0)
    assert c.spacing[0] <= 0.2 + 1e-15
    assert c.n_centroids >= 6
    assert c.radius <= 0.4 / 4 + 1e-15
    for m in (1, 2, 4):
        assert ufa_error(c, m * c.beta0, 2001) <= 0.4


def test_ufa_linear_2d():
    f = lambda a: 0.5 * a[:, 0] - 0.3 * a[:, 1] + 0.2  # noqa: E731
    c = build_ufa_approximator(f, [-3, -3], [3, 3], 0.5, lipschitz=math.hypot(0.5, 0.3))
    assert c.radius <= 0.5 / (4 * c.lipschitz) + 1e-12
    assert c.beta0 > 0
    for m in (1, 2, 4):
        assert ufa_error(c, m * c.beta0, 101) <= 0.5


def test_ufa_error_at_centroids_large_beta():
    f = lambda a: np.sin(a[:, 0]) * a[:, 1]  # noqa: E731
    c = build_ufa_approximator(f, [-1, -1], [1, 1], 0.5)
    assert np.abs(c(c.centroids, 1e3) - c.values).max() <= 1e-6


def test_ufa_error_beta_zero_is_mean():
    f = lambda a: a[:, 0] ** 2  # noqa: E731
    c = build_ufa_approximator(f, [-1.0], [1.0], 0.5, lipschitz=2.0)
    pts = evaluation_grid(c.low, c.high, 201)
    assert ufa_error(c, 0.0, 201) == pytest.approx(np.abs(f(pts) - c.values.mean()).max(), abs=1e-14)


def test_windowed_matches_dense():
    f = lambda a: np.cos(a[:, 0]) + a[:, 1]  # noqa: E731
    c = build_ufa_approximator(f, [-2, -2], [2, 2], 0.25)
    q = np.random.default_rng(3).uniform(-2, 2, size=(300, 2))
    for beta in (c.beta0, 4 * c.beta0):
        assert np.abs(grid_interpolate(c, q, beta) - rbf_interpolate(c.centroids, c.values, q, beta)).max() <= 1e-12


def test_sampled_mu_not_below_analytic():
    f = lambda a: a[:, 0] * a[:, 1]  # noqa: E731
    c = build_ufa_approximator(f, [-1, -1], [1, 1], 0.5, mu_samples=20_000)
    assert c.mu >= c.mu_analytic - 1e-12 > 0
    a = build_ufa_approximator(f, [-1, -1], [1, 1], 0.5, mu_method="analytic")
    assert a.mu == a.mu_analytic and a.beta0 >= c.beta0


def test_estimate_lipschitz_linear():
    f = lambda a: 0.5 * a[:, 0] - 0.3 * a[:, 1]  # noqa: E731
    assert estimate_lipschitz(f, [-1, -1], [1, 1]) == pytest.approx(math.hypot(0.5, 0.3), rel=1e-12)


def test_ufa_beta0_formula():
    assert ufa_beta0(0.5, 100, 2.0, 0.1) == pytest.approx(-math.log(0.5 / 1600) / 0.1)
    assert ufa_beta0(0.5, 100, 0.0, 0.1) == 0.0


def test_ufa_grid_cap():
    with pytest.raises(GridTooLarge):
        build_ufa_approximator(lambda a: a[:, 0], [0, 0], [1, 1], 1e-3, lipschitz=1.0, max_centroids=1000)


def test_ufa_rejects_bad_arguments():
    with pytest.raises(ValueError):
        build_ufa_approximator(lambda a: a[:, 0], [0.0], [1.0], 0.0, lipschitz=1.0)
    with pytest.raises(ValueError):
        build_ufa_approximator(lambda a: a[:, 0], [1.0], [0.0], 0.1, lipschitz=1.0)
    c = build_ufa_approximator(lambda a: a[:, 0], [0.0], [1.0], 0.4, lipschitz=1.0)
    with pytest.raises(ValueError):
        ufa_error(c, -1.0)


def test_estimate_lipschitz_regression_target():
    from rbvf.regression import target_function

    est = estimate_lipschitz(target_function, [-3, -3], [3, 3])
    # random point pairs give lower bounds on the constant
    rng = np.random.default_rng(4)
    a, b = rng.uniform(-3, 3, size=(2, 20000, 2))
    ratio = np.abs(target_function(a) - target_function(b)) / np.linalg.norm(a - b, axis=1)
    assert ratio.max() <= est * 1.001
