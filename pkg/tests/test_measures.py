import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from meanfield_ldp.errors import (
    IncompatibleSpaceError,
    InvalidArgumentError,
    InvalidOrderError,
    UnsupportedDimensionError,
)
from meanfield_ldp.measures import (
    EmpiricalMeasure,
    best_shift,
    center,
    is_centered,
    max_matching_within,
    prohorov_1d,
    quotient_distance,
    translate,
    wasserstein_1d,
)

# dyadic rationals: sums and differences are exact in floating point
dyadic = st.integers(-2**10, 2**10).map(lambda k: k / 64.0)


def atoms(n):
    return st.lists(dyadic, min_size=n, max_size=n)


def sizes_and_atoms(max_n=6):
    return st.integers(1, max_n).flatmap(lambda n: st.tuples(atoms(n), atoms(n), atoms(n)))


# ---------------------------------------------------------------- construction


def test_configuration_rejects_non_finite():
    with pytest.raises(InvalidArgumentError):
        EmpiricalMeasure.from_points([0.0, np.nan])
    with pytest.raises(InvalidArgumentError):
        EmpiricalMeasure.from_points([])


def test_weights_equal_and_sum_to_one():
    m = EmpiricalMeasure.from_points([3.0, 1.0, 2.0])
    assert np.all(m.weights == 1 / 3)
    assert m.weights.sum() == pytest.approx(1.0, abs=1e-15)


def test_cdf_right_continuous_with_limits():
    m = EmpiricalMeasure.from_points([0.0, 1.0, 1.0, 3.0])
    assert m.cdf(-1e300) == 0.0
    assert m.cdf(1e300) == 1.0
    assert m.cdf(1.0) == 0.75
    assert m.cdf(np.nextafter(1.0, 0.0)) == 0.25


# ---------------------------------------------------------------- translation and centering


def test_translate_follows_pushforward_convention():
    # integral f d(tau_y mu) = integral f(x + y) d mu
    m = EmpiricalMeasure.from_points([0.0, 2.0])
    assert np.array_equal(translate(m, 0.0).points, [0.0, 2.0])
    assert np.array_equal(translate(m, 1.0).points, [1.0, 3.0])
    f = np.cos
    assert translate(m, 0.7).integrate(f) == pytest.approx(m.integrate(lambda x: f(x + 0.7)), abs=1e-15)


def test_translate_inverse():
    m = EmpiricalMeasure.from_points([-1.0, 1.0])
    assert np.array_equal(translate(translate(m, -3.0), 3.0).points, m.points)


def test_translate_dimension_mismatch():
    m = EmpiricalMeasure.from_points([[0.0, 1.0], [1.0, 2.0]])
    with pytest.raises(IncompatibleSpaceError):
        translate(m, [1.0])


@pytest.mark.parametrize("x, expected", [([0, 2], [-1, 1]), ([1, 2, 3], [-1, 0, 1]), ([-1, 1], [-1, 1])])
def test_center_examples(x, expected):
    assert np.array_equal(center(np.array(x, dtype=float)), expected)


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20), st.floats(-1e3, 1e3))
def test_center_idempotent_and_translation_free(x, y):
    c = center(np.array(x))
    assert is_centered(c)
    assert np.allclose(center(c), c, atol=1e-9)
    assert np.allclose(center(np.array(x) + y), c, atol=1e-9)


def test_center_commutes_with_empirical_map():
    x = np.array([[0.0, 1.0], [2.0, 5.0], [4.0, 0.0]])
    assert np.allclose(EmpiricalMeasure(x).centered().atoms, center(x))


# ---------------------------------------------------------------- Wasserstein


def test_wasserstein_examples():
    assert wasserstein_1d([0.0], [1.0]) == 1.0
    assert wasserstein_1d([-1.0, 1.0], [0.0, 2.0]) == pytest.approx(1.0, abs=1e-15)
    m = EmpiricalMeasure.from_points([0.3, -2.0, 5.0])
    for p in (1, 1.5, 2, 3):
        assert wasserstein_1d(m, m, p) == 0.0


def test_wasserstein_against_scipy_unequal_sizes():
    rng = np.random.default_rng(4)
    for _ in range(20):
        x, z = rng.normal(size=rng.integers(1, 9)), rng.normal(size=rng.integers(1, 9))
        assert wasserstein_1d(x, z) == pytest.approx(stats.wasserstein_distance(x, z), abs=1e-12)


@given(st.integers(1, 12).flatmap(lambda n: st.tuples(
    st.lists(st.floats(-50, 50), min_size=n, max_size=n), st.lists(st.floats(-50, 50), min_size=n, max_size=n))))
def test_w1_cdf_integral_equals_sorted_matching(pair):
    x, z = map(np.array, pair)
    sorted_cost = np.mean(np.abs(np.sort(x) - np.sort(z)))
    assert wasserstein_1d(x, z, 1) == pytest.approx(sorted_cost, abs=1e-12 * max(1.0, sorted_cost))


def test_wasserstein_quantile_route_matches_sorted_route():
    # duplicating every atom leaves the measure unchanged
    rng = np.random.default_rng(1)
    x, z = rng.normal(size=5), rng.normal(size=5)
    for p in (1.5, 2.0, 3.0):
        assert wasserstein_1d(x, np.repeat(z, 2), p) == pytest.approx(wasserstein_1d(x, z, p), abs=1e-12)


def test_wasserstein_errors():
    with pytest.raises(InvalidOrderError):
        wasserstein_1d([0.0], [1.0], 0.5)
    with pytest.raises(UnsupportedDimensionError):
        wasserstein_1d([[0.0, 1.0]], [[1.0, 0.0]])


# ---------------------------------------------------------------- Prohorov


def prohorov_bruteforce(x, z):
    """Definition-level oracle: minimum over permutations and candidate levels."""
    n = len(x)
    levels = sorted({abs(a - b) for a in x for b in z} | {k / n for k in range(n + 1)})
    best = 1.0
    for perm in itertools.permutations(range(n)):
        d = np.abs(np.array(x) - np.array(z)[list(perm)])
        for eps in levels:
            if np.sum(d > eps + 1e-12) / n <= eps + 1e-12:
                best = min(best, eps)
                break
    return best


@pytest.mark.parametrize("a, expected", [(0.3, 0.3), (5.0, 1.0), (1.0, 1.0), (0.0, 0.0)])
def test_prohorov_two_dirac_oracle(a, expected):
    assert prohorov_1d([0.0], [a]) == pytest.approx(expected, abs=1e-15)


def test_prohorov_matches_permutation_bruteforce():
    rng = np.random.default_rng(7)
    for n in (2, 3, 4, 5):
        for _ in range(15):
            x, z = rng.normal(size=n) * rng.uniform(0.1, 3), rng.normal(size=n)
            assert prohorov_1d(x, z) == pytest.approx(prohorov_bruteforce(x, z), abs=1e-12)


def test_greedy_matching_agrees_with_hopcroft_karp():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(2, 30))
        x, z = rng.normal(size=n), rng.normal(size=n) + rng.normal()
        eps = prohorov_1d(x, z)
        assert n - max_matching_within(x, z, eps) <= eps * n + 1e-9
        below = np.nextafter(eps, 0) - 1e-9
        if below > 0:
            assert n - max_matching_within(x, z, below) > below * n


def test_prohorov_unequal_counts_unsupported():
    with pytest.raises(InvalidArgumentError):
        prohorov_1d([0.0], [0.0, 1.0])


@settings(max_examples=200)
@given(sizes_and_atoms(), dyadic)
def test_prohorov_translation_invariance_exact(triple, y):
    x, z, _ = map(np.array, triple)
    assert prohorov_1d(x + y, z + y) == prohorov_1d(x, z)


@settings(max_examples=100)
@given(sizes_and_atoms())
def test_prohorov_metric_axioms(triple):
    x, z, w = map(np.array, triple)
    dxz = prohorov_1d(x, z)
    assert 0.0 <= dxz <= 1.0
    assert dxz == prohorov_1d(z, x)
    assert dxz <= prohorov_1d(x, w) + prohorov_1d(w, z) + 1e-9


# ---------------------------------------------------------------- quotient distances


def test_quotient_examples():
    assert quotient_distance([-1.0, 1.0], [4.0, 6.0], "wasserstein-2") == pytest.approx(0.0, abs=1e-15)
    assert quotient_distance([-1.0, 1.0], [-2.0, 2.0], "wasserstein-1") == pytest.approx(1.0, abs=1e-12)
    assert quotient_distance([-1.0, 1.0], [-2.0, 2.0], "prohorov") == pytest.approx(0.5, abs=1e-12)


def test_quotient_w1_dense_grid_oracle():
    x, z = np.array([-1.0, 1.0]), np.array([-2.0, 2.0])
    grid = np.linspace(-3, 3, 60001)
    dense = min(wasserstein_1d(x, z + y) for y in grid)
    assert quotient_distance(x, z, "wasserstein-1") == pytest.approx(dense, abs=1e-9)


def test_best_shift_returns_the_minimiser():
    rng = np.random.default_rng(5)
    x, z = rng.normal(size=6), rng.normal(size=6) + 3.0
    for base in ("prohorov", "wasserstein-1", "wasserstein-2", "wasserstein-1.5"):
        y, v = best_shift(x, z, base)
        assert isinstance(y, float) and isinstance(v, float)
        p = float(base.split("-")[1]) if "-" in base else None
        direct = prohorov_1d(x, z + y) if base == "prohorov" else wasserstein_1d(x, z + y, p)
        assert direct == pytest.approx(v, abs=1e-9)


def test_quotient_general_order_against_grid():
    rng = np.random.default_rng(11)
    x, z = rng.normal(size=5), rng.normal(size=7) * 2 + 1
    grid = np.linspace(-6, 6, 24001)
    dense = min(wasserstein_1d(x, z + y, 3.0) for y in grid)
    q = quotient_distance(x, z, "wasserstein-3")
    assert q <= dense + 1e-9
    assert q == pytest.approx(dense, abs=1e-5)


def test_quotient_prohorov_against_shift_grid():
    rng = np.random.default_rng(2)
    for _ in range(10):
        x, z = rng.normal(size=4), rng.normal(size=4) * 1.5
        grid = np.linspace(-5, 5, 4001)
        dense = min(prohorov_1d(x, z + y) for y in grid)
        q = quotient_distance(x, z)
        assert q <= dense + 1e-12


@settings(max_examples=60)
@given(sizes_and_atoms(5), dyadic)
def test_quotient_metric_properties(triple, y):
    x, z, w = map(np.array, triple)
    for base in ("prohorov", "wasserstein-1", "wasserstein-2"):
        dxz = quotient_distance(x, z, base)
        assert dxz == pytest.approx(quotient_distance(z, x, base), abs=1e-9)
        assert dxz <= quotient_distance(x, w, base) + quotient_distance(w, z, base) + 1e-9
        assert quotient_distance(x, x + y, base) < 1e-9
        base_value = prohorov_1d(x, z) if base == "prohorov" else wasserstein_1d(x, z, float(base[-1]))
        assert dxz <= base_value + 1e-12


def test_quotient_rejects_higher_dimension():
    with pytest.raises(UnsupportedDimensionError):
        quotient_distance([[0.0, 1.0]], [[1.0, 0.0]])
    with pytest.raises(InvalidArgumentError):
        quotient_distance([0.0], [0.0], "hausdorff")
