"""Density calculus on a uniform one-dimensional grid.

Cells have width dx = (b - a)/m and values are sampled at the cell centres;
integrals use the midpoint rule. The CDF at the centre of cell i is
sum_{j<i} p_j dx + p_i dx / 2.

Functionals:

    entropy           S[p] = int p log p
    free energy       F[p] = S[p] + (2/sigma^2) W[p]
    rate              I[p] = F[p] - F_star
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve

from .errors import ConvergenceError, IncompatibleSpaceError, InvalidArgumentError

__all__ = [
    "GridDensity",
    "DEFAULT_GRID",
    "default_grid",
    "entropy",
    "relative_entropy",
    "energy_of_density",
    "free_energy",
    "stationary_rb",
    "fokker_planck_residual",
    "minimize_free_energy_mv",
    "rate",
    "rate_gap",
    "logistic_density",
]

log = logging.getLogger(__name__)

DEFAULT_GRID = (-40.0, 40.0, 16000)
_DEFAULT_DX = 80.0 / 16000


def default_grid(sigma2: float = 2.0):
    """[-L, L] with cell width 0.005; L = max(40, 18.5 sigma^2).

    Stationary RB densities decay like exp(-2|x|/sigma^2) times the minimal
    Lax slope, so this keeps the mass beyond the boundary below ~1e-16 for the
    logistic flux at any temperature.
    """
    half = max(40.0, 18.5 * sigma2)
    return (-half, half, int(round(2 * half / _DEFAULT_DX)))


@dataclass(frozen=True)
class GridDensity:
    """Probability density on [a, b] split into m equal cells.

    Attributes:
        a, b: domain endpoints.
        values: density at the m cell centres (units 1/length).
        meta: free-form metadata carried into serialization (sigma2, model id).
    """

    a: float
    b: float
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).copy()
        if v.ndim != 1 or v.size < 1:
            raise InvalidArgumentError("values must be a nonempty 1D array")
        if not self.b > self.a:
            raise InvalidArgumentError("need b > a")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise InvalidArgumentError("density values must be finite and nonnegative")
        mass = v.sum() * (self.b - self.a) / v.size
        if abs(mass - 1.0) > 1e-10:
            raise InvalidArgumentError(f"density has mass {mass!r}, expected 1 within 1e-10")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, a, b, values, meta=None) -> "GridDensity":
        """Normalise nonnegative ``values`` to unit mass."""
        v = np.asarray(values, dtype=float)
        dx = (b - a) / v.size
        return cls(a, b, v / (v.sum() * dx), dict(meta or {}))

    @classmethod
    def from_function(cls, f, a=DEFAULT_GRID[0], b=DEFAULT_GRID[1], m=DEFAULT_GRID[2], meta=None):
        dx = (b - a) / m
        return cls.from_values(a, b, f(a + dx * (np.arange(m) + 0.5)), meta)

    @classmethod
    def from_log_values(cls, a, b, logv, meta=None):
        logv = np.asarray(logv, dtype=float)
        dx = (b - a) / logv.size
        return cls(a, b, np.exp(logv - special.logsumexp(logv) - np.log(dx)), dict(meta or {}))

    @property
    def m(self) -> int:
        return self.values.size

    @property
    def dx(self) -> float:
        return (self.b - self.a) / self.m

    @property
    def x(self) -> np.ndarray:
        return self.a + self.dx * (np.arange(self.m) + 0.5)

    @property
    def cdf(self) -> np.ndarray:
        """CDF at cell centres."""
        w = self.values * self.dx
        return np.cumsum(w) - w / 2

    def mean(self) -> float:
        return float(np.sum(self.x * self.values) * self.dx)

    def expect(self, f) -> float:
        return float(np.sum(f(self.x) * self.values) * self.dx)

    def quantile(self, u):
        """Quantile function by linear interpolation of the centre CDF."""
        F = self.cdf
        keep = np.concatenate(([True], np.diff(F) > 0))
        return np.interp(u, F[keep], self.x[keep])

    def same_grid(self, other) -> bool:
        return self.m == other.m and self.a == other.a and self.b == other.b

    def shifted_cells(self, k: int) -> "GridDensity":
        """Translate by k whole cells (mass pushed off the grid must be negligible)."""
        v = np.roll(self.values, k)
        if k > 0:
            v[:k] = 0.0
        elif k < 0:
            v[k:] = 0.0
        return GridDensity.from_values(self.a, self.b, v, self.meta)


def logistic_density(x, rate: float = 1.0):
    """Logistic density with scale 1/rate, written to avoid overflow."""
    z = -rate * np.abs(np.asarray(x, dtype=float))
    e = np.exp(z)
    return rate * e / (1.0 + e) ** 2


def _check_grids(p, q):
    if not p.same_grid(q):
        raise IncompatibleSpaceError("densities live on different grids")


def entropy(p: GridDensity) -> float:
    """Midpoint rule for int p log p, with 0 log 0 = 0."""
    v = p.values
    pos = v > 0
    return float(np.sum(v[pos] * np.log(v[pos])) * p.dx)


def relative_entropy(p: GridDensity, q: GridDensity) -> float:
    """int p log(p/q); ``inf`` when p charges a cell where q vanishes."""
    _check_grids(p, q)
    pv, qv = p.values, q.values
    pos = pv > 0
    if np.any(pos & (qv <= 0)):
        return float("inf")
    return float(np.sum(pv[pos] * (np.log(pv[pos]) - np.log(qv[pos]))) * p.dx)


def _interaction_field(p: GridDensity, model) -> np.ndarray:
    """(W * p)(x_i) = sum_j W(x_i - x_j) p_j dx on the grid."""
    m, dx = p.m, p.dx
    if model.kernel == "quadratic":
        x = p.x
        m1 = np.sum(x * p.values) * dx
        m2 = np.sum(x * x * p.values) * dx
        return x * x - 2 * m1 * x + m2
    lags = dx * np.arange(-(m - 1), m)
    kern = model.potential(lags[:, None])
    return fftconvolve(p.values, kern, mode="full")[m - 1: 2 * m - 1] * dx


def energy_of_density(p: GridDensity, model) -> float:
    """Interaction energy of a grid density.

    MV: (1/2) sum_ij W(x_i - x_j) p_i p_j dx^2.  RB: sum_i B(F_i) dx.
    """
    if model.family == "rb":
        return float(np.sum(model.flux(p.cdf)) * p.dx)
    if getattr(model, "d", 1) != 1:
        raise InvalidArgumentError("grid densities are one-dimensional")
    return float(0.5 * np.sum(_interaction_field(p, model) * p.values) * p.dx)


def free_energy(p: GridDensity, model) -> float:
    return entropy(p) + 2.0 / model.sigma2 * energy_of_density(p, model)


def _grid_args(grid, sigma2=2.0):
    if grid is None:
        return default_grid(sigma2)
    a, b, m = grid
    if not b > a or int(m) < 2:
        raise InvalidArgumentError("grid must be (a, b, m) with b > a and m >= 2")
    return float(a), float(b), int(m)


def _gaussian_start(a, b, m, meta):
    dx = (b - a) / m
    x = a + dx * (np.arange(m) + 0.5)
    return GridDensity.from_log_values(a, b, -x * x / 2, meta)


def _recenter_log(x, logv, dx):
    """Translate log-density samples so that the density has mean zero."""
    w = np.exp(logv - logv.max())
    mu = float(np.sum(x * w) / np.sum(w))
    if abs(mu) < 1e-15:
        return logv
    return CubicSpline(x, logv, extrapolate=True)(x + mu)


def _rb_map(p: GridDensity, model, x):
    """Log of the fixed-point map exp((2/sigma^2) int_0^x b(F_p)), before normalisation."""
    g = (2.0 / model.sigma2) * model.flux_derivative(p.cdf)
    phi = np.concatenate(([0.0], np.cumsum((g[1:] + g[:-1]) / 2.0) * p.dx))
    i0 = int(np.argmin(np.abs(x)))
    return phi - phi[i0]


def stationary_rb(model, grid=None, omega: float = 0.5, tol: float = 1e-10,
                  max_iter: int = 10_000, initial: GridDensity | None = None) -> GridDensity:
    """Stationary density of the RB mean-field limit by damped fixed-point iteration.

    p <- (1 - omega) p + omega T(p), T(p) = exp((2/sigma^2) int_0^x b(F_p)) / z,
    with T(p) recentred to mean zero each time.

    Raises:
        ConvergenceError: sup-norm update still above ``tol`` after ``max_iter``.
    """
    if model.family != "rb":
        raise InvalidArgumentError("stationary_rb needs a rank-based model")
    if not 0 < omega <= 1:
        raise InvalidArgumentError("omega must lie in (0, 1]")
    a, b, m = _grid_args(grid, model.sigma2)
    meta = {"sigma2": model.sigma2, "model": model.name}
    if initial is None:
        # start from the Gaussian with unit variance
        p = _gaussian_start(a, b, m, meta)
    else:
        p = initial
    x = p.x
    diff = float("inf")
    for it in range(1, max_iter + 1):
        logt = _recenter_log(x, _rb_map(p, model, x), p.dx)
        t = GridDensity.from_log_values(a, b, logt).values
        new = (1.0 - omega) * p.values + omega * t
        diff = float(np.max(np.abs(new - p.values)))
        p = GridDensity.from_values(a, b, new, meta)
        if diff < tol:
            log.debug("stationary_rb converged in %d iterations", it)
            break
    else:
        raise ConvergenceError(f"fixed point not reached after {max_iter} iterations (last change {diff:.3e})",
                               residual=diff, iterations=max_iter)
    logp = _recenter_log(x, np.log(np.maximum(p.values, 1e-320)), p.dx)
    out = GridDensity.from_log_values(a, b, logp, meta)
    out.meta["iterations"] = it
    return out


def _d1_fourth_order(f, dx):
    g = np.gradient(f, dx)
    g[2:-2] = (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / (12.0 * dx)
    return g


def fokker_planck_residual(p: GridDensity, model) -> float:
    """Grid L^1 norm of (sigma^2/2) p'' - (b(F) p)' (fourth-order central differences)."""
    flux = 0.5 * model.sigma2 * _d1_fourth_order(p.values, p.dx) - model.flux_derivative(p.cdf) * p.values
    return float(np.sum(np.abs(_d1_fourth_order(flux, p.dx))) * p.dx)


def _variation(logp, p: GridDensity, model):
    return logp + 1.0 + 2.0 / model.sigma2 * _interaction_field(p, model)


def minimize_free_energy_mv(model, grid=None, step: float = 0.5, tol: float = 1e-6,
                            max_iter: int = 5000, support_floor: float = 1e-12):
    """Minimise the MV free energy over grid densities by mirror descent.

    Each iteration updates the log-weights by ``-step * (dF/dp - mean)`` with
    dF/dp = log p + 1 + (2/sigma^2) W * p, renormalises and recentres. Stops
    when dF/dp is constant to ``tol`` on cells with p > support_floor * max p.

    Returns:
        (density, free-energy value)
    """
    if model.family != "mv":
        raise InvalidArgumentError("minimize_free_energy_mv needs an MV model")
    a, b, m = _grid_args(grid, model.sigma2)
    meta = {"sigma2": model.sigma2, "model": model.name}
    p = _gaussian_start(a, b, m, meta)
    x, dx = p.x, p.dx
    logp = -x * x / 2
    logp = logp - special.logsumexp(logp) - np.log(dx)
    spread = float("inf")
    for it in range(1, max_iter + 1):
        field_ = _variation(logp, p, model)
        sup = p.values > support_floor * p.values.max()
        spread = float(np.ptp(field_[sup]))
        if spread < tol:
            break
        logp = logp - step * (field_ - np.mean(field_[sup]))
        logp = _recenter_log(x, logp, dx)
        logp = logp - special.logsumexp(logp) - np.log(dx)
        p = GridDensity(a, b, np.exp(logp), meta)
    else:
        raise ConvergenceError(f"mirror descent did not converge in {max_iter} iterations (spread {spread:.3e})",
                               residual=spread, iterations=max_iter)
    p.meta.update(iterations=it, variation_spread=spread)
    return p, free_energy(p, model)


def rate(p: GridDensity, model, F_star: float, guard: float = 1e-8) -> float:
    """F[p] - F_star, floored at zero inside the discretisation guard.

    Raises:
        InvalidArgumentError: F[p] lies below F_star by more than ``guard``.
    """
    v = free_energy(p, model) - F_star
    if v < -guard:
        raise InvalidArgumentError(f"free energy below F_star by {-v:.3e}; F_star is not a minimum")
    return max(v, 0.0)


def gamma_integrand(model, u, v):
    """Gamma(u, v) = B(u) - B(v) - b(v)(u - v)."""
    return model.flux(u) - model.flux(v) - model.flux_derivative(v) * (u - v)


def rate_gap(p: GridDensity, model, p_inf: GridDensity) -> dict:
    """Split the RB rate of ``p`` into a relative-entropy part and a Gamma part.

    Returns:
        dict with ``relative_entropy_part`` = R[p | p_inf] and ``gamma_part`` =
        (2/sigma^2) int Gamma(F_p, F_inf) dx, plus their ``total``.
    """
    _check_grids(p, p_inf)
    rel = relative_entropy(p, p_inf)
    gam = 2.0 / model.sigma2 * float(np.sum(gamma_integrand(model, p.cdf, p_inf.cdf)) * p.dx)
    return {"relative_entropy_part": rel, "gamma_part": gam, "total": rel + gam}
