import math

import numpy as np
import pytest
from scipy import integrate, stats

from meanfield_ldp.confining import ConfiningSpec, z_eta
from meanfield_ldp.densities import (
    GridDensity,
    default_grid,
    energy_of_density,
    entropy,
    fokker_planck_residual,
    free_energy,
    logistic_density,
    minimize_free_energy_mv,
    rate,
    rate_gap,
    relative_entropy,
    stationary_rb,
)
from meanfield_ldp.errors import ConvergenceError, IncompatibleSpaceError, InvalidArgumentError
from meanfield_ldp.models import MvModel, mv_polynomial, mv_quadratic, rb_logistic_flux, rb_polynomial

GRID = (-40.0, 40.0, 16000)


@pytest.fixture(scope="module")
def logistic_eq():
    return stationary_rb(rb_logistic_flux(), GRID)


def gaussian(var=1.0, mean=0.0, grid=GRID):
    return GridDensity.from_function(lambda x: stats.norm.pdf(x, mean, math.sqrt(var)), *grid)


# ---------------------------------------------------------------- construction


def test_grid_density_invariants():
    with pytest.raises(InvalidArgumentError):
        GridDensity(0.0, 1.0, np.array([0.5, 0.5]))
    with pytest.raises(InvalidArgumentError):
        GridDensity(0.0, 1.0, np.array([2.0, 0.0, -0.1]) * 1.0)
    p = GridDensity.from_values(0.0, 2.0, np.ones(8))
    assert p.values.sum() * p.dx == pytest.approx(1.0, abs=1e-12)
    assert p.cdf[-1] == pytest.approx(1 - 1 / 16)


def test_default_grid_widens_with_temperature():
    assert default_grid(2.0) == GRID
    a, b, m = default_grid(8.0)
    assert b == pytest.approx(148.0) and (b - a) / m == pytest.approx(0.005)


# ---------------------------------------------------------------- entropy


def test_entropy_uniform():
    assert entropy(GridDensity.from_values(0.0, 1.0, np.ones(37))) == pytest.approx(0.0, abs=1e-15)
    assert entropy(GridDensity.from_values(0.0, 2.0, np.ones(10))) == pytest.approx(-math.log(2), abs=1e-14)


def test_entropy_logistic():
    p = GridDensity.from_function(logistic_density, *GRID)
    assert entropy(p) == pytest.approx(-2.0, abs=1e-4)


def test_relative_entropy_basic():
    p = gaussian()
    assert relative_entropy(p, p) == 0.0
    q = GridDensity.from_values(-40, 40, np.where(p.x > 0, 1.0, 0.0))
    assert relative_entropy(p, q) == math.inf
    with pytest.raises(IncompatibleSpaceError):
        relative_entropy(p, gaussian(grid=(-40, 40, 8000)))


SMALL = (-20.0, 20.0, 8000)


def _nu_eta(spec, grid=SMALL):
    # exact cell values exp(-2V/sigma^2)/z, not renormalised on the grid
    a, b, m = grid
    x = a + (b - a) / m * (np.arange(m) + 0.5)
    return GridDensity(a, b, np.exp(-spec.rate * np.abs(x) ** spec.ell) / z_eta(spec))


@pytest.mark.parametrize("seed", range(20))
def test_relative_entropy_identity_with_confining_reference(seed):
    rng = np.random.default_rng(seed)
    # 2 eta / sigma^2 <= 1 keeps the reference above underflow on the grid
    spec = ConfiningSpec(float(rng.uniform(0.2, 1)), 2.0, 1, float(rng.uniform(2, 4)))
    k = rng.integers(1, 4)
    w, mu, sd = rng.dirichlet(np.ones(k)), rng.normal(0, 2, k), rng.uniform(0.4, 2, k)
    p = GridDensity.from_function(lambda x: sum(wi * stats.norm.pdf(x, m, s) for wi, m, s in zip(w, mu, sd)), *SMALL)
    nu = _nu_eta(spec)
    lhs = relative_entropy(p, nu)
    V = p.expect(lambda x: spec.eta * np.abs(x) ** spec.ell)
    rhs = entropy(p) + 2.0 / spec.sigma2 * V + math.log(z_eta(spec))
    assert lhs - rhs == pytest.approx(0.0, abs=1e-7)


def test_gibbs_inequality_random_pairs():
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = GridDensity.from_values(-5, 5, rng.random(200))
        q = GridDensity.from_values(-5, 5, rng.random(200) + 1e-3)
        assert relative_entropy(p, q) >= -1e-10


# ---------------------------------------------------------------- energies


def test_rb_energy_of_logistic():
    p = GridDensity.from_function(logistic_density, *GRID)
    assert energy_of_density(p, rb_logistic_flux()) == pytest.approx(1.0, abs=1e-4)


def test_mv_quadratic_energy_is_second_moment():
    p = gaussian(0.7)
    coarse = gaussian(0.7, grid=(-10, 10, 800))
    direct = 0.5 * np.sum((coarse.x[:, None] - coarse.x[None, :]) ** 2 * np.outer(coarse.values, coarse.values)) \
        * coarse.dx ** 2
    assert energy_of_density(coarse, mv_quadratic()) == pytest.approx(direct, rel=1e-12)
    assert energy_of_density(p, mv_quadratic()) == pytest.approx(0.7, rel=1e-10)


def test_generic_kernel_energy_matches_double_sum():
    model = mv_polynomial({2: 1.0, 3: 0.25})
    p = gaussian(0.5, 0.3, grid=(-8, 8, 640))
    W = model.potential((p.x[:, None] - p.x[None, :])[..., None])
    direct = 0.5 * np.sum(W * np.outer(p.values, p.values)) * p.dx ** 2
    assert energy_of_density(p, model) == pytest.approx(direct, rel=1e-10)


def test_hot_cell_energy_is_zero():
    v = np.zeros(101)
    v[50] = 1.0
    p = GridDensity.from_values(-1, 1, v)
    assert energy_of_density(p, mv_quadratic()) == pytest.approx(0.0, abs=1e-15)


def test_free_energy_of_logistic():
    p = GridDensity.from_function(logistic_density, *GRID)
    assert free_energy(p, rb_logistic_flux()) == pytest.approx(-1.0, abs=2e-4)


def test_free_energy_translation_invariant():
    p = gaussian(1.3)
    for model in (rb_logistic_flux(), mv_quadratic(), mv_polynomial({3: 1.0})):
        if model.family == "mv" and model.kernel != "quadratic":
            p = gaussian(1.3, grid=(-20, 20, 4000))
        f0 = free_energy(p, model)
        for k in (-300, 17, 400):
            assert free_energy(p.shifted_cells(k), model) == pytest.approx(f0, abs=1e-6)


def _entropy_error(m):
    f = lambda x: np.exp(x) / (math.e - 1)
    exact = integrate.quad(lambda x: f(x) * np.log(f(x)), 0, 1, epsabs=1e-15)[0]
    dx = 1 / m
    p = GridDensity(0.0, 1.0, f(dx * (np.arange(m) + 0.5)) / (np.sum(f(dx * (np.arange(m) + 0.5))) * dx))
    return entropy(p) - exact


def _energy_error(m):
    # density 2x on [0, 1], B(u) = u(1 - u), F = x^2: int x^2 (1 - x^2) = 1/3 - 1/5
    dx = 1 / m
    x = dx * (np.arange(m) + 0.5)
    p = GridDensity(0.0, 1.0, 2 * x / (np.sum(2 * x) * dx))
    return energy_of_density(p, rb_logistic_flux()) - (1 / 3 - 1 / 5)


@pytest.mark.parametrize("err", [_entropy_error, _energy_error])
def test_second_order_convergence(err):
    e1, e2 = err(100), err(200)
    assert 3.5 <= e1 / e2 <= 4.5


# ---------------------------------------------------------------- stationary density


def test_stationary_logistic(logistic_eq):
    p = logistic_eq
    assert np.max(np.abs(p.values - logistic_density(p.x))) < 1e-6
    assert abs(p.mean()) < 1e-10
    assert fokker_planck_residual(p, rb_logistic_flux()) < 1e-6


@pytest.mark.parametrize("sigma2, grid", [(0.5, (-10.0, 10.0, 32000)), (4.0, default_grid(4.0))])
def test_stationary_logistic_rescales_with_temperature(sigma2, grid):
    # the logistic steepens like 2/sigma^2, so the cold case needs finer cells
    p = stationary_rb(rb_logistic_flux(sigma2=sigma2), grid)
    assert np.max(np.abs(p.values - logistic_density(p.x, 2 / sigma2))) < 1e-6


def test_logistic_is_fixed_point_of_the_map():
    # substitution oracle: int_0^x (1 - 2F) = -2 log cosh(x/2), so exp(...) is proportional to the logistic
    x = np.linspace(-20, 20, 401)
    F = 1 / (1 + np.exp(-x))
    closed = np.exp(-2 * np.log(np.cosh(x / 2)))
    quad = np.array([np.exp(integrate.quad(lambda s: 1 - 2 / (1 + np.exp(-s)), 0, t)[0]) for t in x])
    assert np.allclose(quad, closed, rtol=1e-10)
    assert np.allclose(closed / 4, F * (1 - F), rtol=1e-12)


def test_stationary_non_convergence_reported():
    with pytest.raises(ConvergenceError) as info:
        stationary_rb(rb_logistic_flux(), GRID, max_iter=2)
    assert info.value.iterations == 2


def test_stationary_polynomial_flux_is_zero_of_rate():
    model = rb_polynomial([0, 1.5, -1.0, -0.5])
    coarse = fokker_planck_residual(stationary_rb(model, (-40.0, 40.0, 8000)), model)
    mid = fokker_planck_residual(stationary_rb(model, GRID), model)
    p = stationary_rb(model, (-30.0, 30.0, 24000))
    fine = fokker_planck_residual(p, model)
    assert 3.5 <= coarse / mid <= 4.5 and 3.5 <= mid / fine <= 4.5
    assert fine < 1e-6
    F = free_energy(p, model)
    assert rate(p, model, F) == 0.0
    assert rate(GridDensity.from_function(logistic_density, *GRID), model, F) > 0


# ---------------------------------------------------------------- MV minimisation


def test_mv_quadratic_minimiser_is_gaussian():
    p, F = minimize_free_energy_mv(mv_quadratic(), GRID)
    var = p.expect(lambda x: x * x)
    assert var == pytest.approx(0.5, abs=1e-6)
    # closed form: minimiser exp(-x^2)/sqrt(pi), S = -(1/2) log(pi e), W = 1/2
    exact = -0.5 * math.log(math.pi * math.e) + 0.5
    assert F == pytest.approx(exact, abs=1e-5)
    assert p.meta["variation_spread"] < 1e-6


def test_mv_zero_interaction_gives_uniform():
    zero = MvModel(lambda r: np.zeros(r.shape[:-1]), np.zeros_like, 2.0, 0.0, 2.0, name="mv:zero")
    p, F = minimize_free_energy_mv(zero, (-1.0, 1.0, 200))
    assert np.allclose(p.values, 0.5, atol=1e-6)
    assert F == pytest.approx(-math.log(2), abs=1e-6)


# ---------------------------------------------------------------- rate functions


def test_rate_zero_at_stationary(logistic_eq):
    model = rb_logistic_flux()
    F_star = free_energy(logistic_eq, model)
    assert F_star == pytest.approx(-1.0, abs=1e-6)
    assert rate(logistic_eq, model, F_star) < 1e-6
    assert rate(logistic_eq.shifted_cells(200), model, F_star) < 1e-6


def test_rate_of_standard_normal_two_quadratures():
    model = rb_logistic_flux()
    # cell width 0.0025: the midpoint CDF error is dx^2/24 times the density slope
    grid_value = rate(gaussian(grid=(-40.0, 40.0, 32000)), model, -1.0)
    S = integrate.quad(lambda x: stats.norm.pdf(x) * stats.norm.logpdf(x), -40, 40, epsabs=1e-13, limit=200)[0]
    E = integrate.quad(lambda x: stats.norm.cdf(x) * stats.norm.sf(x), -40, 40, epsabs=1e-13, limit=200)[0]
    closed = -0.5 * math.log(2 * math.pi * math.e) + 1 / math.sqrt(math.pi) + 1.0
    assert S + E + 1.0 == pytest.approx(closed, abs=1e-9)
    assert grid_value == pytest.approx(closed, abs=1e-6)
    assert grid_value > 0


def test_rate_guard():
    with pytest.raises(InvalidArgumentError):
        rate(gaussian(), rb_logistic_flux(), 10.0)


def test_rate_gap_decomposition(logistic_eq):
    model = rb_logistic_flux()
    F_star = free_energy(logistic_eq, model)
    parts = rate_gap(logistic_eq, model, logistic_eq)
    assert parts["relative_entropy_part"] == 0.0 and parts["gamma_part"] == 0.0
    shifted = logistic_eq.shifted_cells(200)
    parts = rate_gap(shifted, model, logistic_eq)
    assert parts["total"] == pytest.approx(rate(shifted, model, F_star), abs=1e-5)
    assert parts["gamma_part"] <= 1e-10


def test_rate_gap_random_densities(logistic_eq):
    model = rb_logistic_flux()
    F_star = free_energy(logistic_eq, model)
    rng = np.random.default_rng(8)
    for _ in range(5):
        p = gaussian(float(rng.uniform(0.5, 3)), float(rng.normal()))
        parts = rate_gap(p, model, logistic_eq)
        assert parts["total"] == pytest.approx(rate(p, model, F_star), abs=1e-5)
        assert parts["gamma_part"] <= 1e-10
