"""Confining potential eta |x|^l, its normalizer and the shift-integrated potential.

The shift-integrated potential of a centered configuration x~ is defined by

    exp(-(2n/sigma^2) hat_v(x~)) = int_{R^d} exp(-(2 eta/sigma^2) sum_i |x~_i + zeta|^l) dzeta,

i.e. the confinement V_n(x) = (eta/n) sum_i |x_i|^l integrated over the
common translation zeta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special
from scipy.optimize import minimize_scalar

from .errors import InvalidArgumentError, InvalidOrderError, UnsupportedDimensionError
from .measures import EmpiricalMeasure, as_configuration

__all__ = [
    "ConfiningSpec",
    "z_eta",
    "hat_v",
    "hat_v_quadrature",
    "hat_v_batch",
    "hat_v_bounds",
    "vartheta",
]

# neglected tail below exp(-_TAIL_LOG) relative to the integrand peak (~1e-16)
_TAIL_LOG = 37.0


@dataclass(frozen=True)
class ConfiningSpec:
    """Strength eta, growth index l, dimension d and temperature sigma^2."""

    eta: float
    ell: float
    d: int = 1
    sigma2: float = 2.0

    def __post_init__(self):
        if not self.eta > 0:
            raise InvalidArgumentError("eta must be positive")
        if not self.ell >= 1:
            raise InvalidOrderError("growth index l must be >= 1")
        if self.d < 1 or self.sigma2 <= 0:
            raise InvalidArgumentError("need d >= 1 and sigma2 > 0")

    @property
    def rate(self) -> float:
        """Coefficient c in exp(-c |x|^l) = exp(-2 V(x) / sigma^2)."""
        return 2.0 * self.eta / self.sigma2

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        r = np.abs(x) if self.d == 1 and x.ndim <= 1 else np.sqrt(np.sum(x**2, axis=-1))
        return self.eta * r**self.ell


def z_eta(spec: ConfiningSpec) -> float:
    """int_{R^d} exp(-2 eta |x|^l / sigma^2) dx."""
    c, ell, d = spec.rate, spec.ell, spec.d
    if d == 1 and ell == 1:
        return spec.sigma2 / spec.eta
    if d == 1 and ell == 2:
        return float(np.sqrt(np.pi * spec.sigma2 / (2.0 * spec.eta)))
    # radial quadrature on [0, R]; beyond R the integrand is below exp(-_TAIL_LOG) of its peak
    r_peak = ((d - 1) / (c * ell)) ** (1.0 / ell) if d > 1 else 0.0
    R = max(r_peak, 1.0) * 2.0 + ((_TAIL_LOG + (d - 1) * 4.0) / c) ** (1.0 / ell)
    radial, _ = integrate.quad(lambda r: r ** (d - 1) * np.exp(-c * r**ell), 0.0, R,
                               epsrel=1e-12, epsabs=0.0, limit=200,
                               points=[r_peak] if 0 < r_peak < R else None)
    sphere = 2.0 * np.pi ** (d / 2.0) / special.gamma(d / 2.0)
    return float(sphere * radial)


def _centered_input(x, spec):
    c = as_configuration(x)
    if c.shape[1] != spec.d:
        raise UnsupportedDimensionError(f"configuration in R^{c.shape[1]} but spec in R^{spec.d}")
    return c


def _hat_v_quadratic(c, spec):
    n, d = c.shape
    s = float(np.sum(c**2))
    return spec.eta * s / n - spec.sigma2 * d / (4.0 * n) * np.log(np.pi * spec.sigma2 / (2.0 * spec.eta * n))


def _log_integral_abs(a, c):
    """log int exp(-c sum_i |zeta - a_i|) dzeta, exactly, by piecewise exponentials."""
    a = np.sort(a)
    n = a.size
    # g(a_k) at the breakpoints
    g = -c * np.abs(a[:, None] - a[None, :]).sum(axis=1)
    logs = [g[0] - np.log(c * n), g[-1] - np.log(c * n)]
    for k in range(1, n):
        L, R = a[k - 1], a[k]
        w = R - L
        if w <= 0:
            continue
        s = -c * (2 * k - n)
        if s > 0:
            logs.append(g[k] + np.log(-np.expm1(-s * w) / s))
        elif s < 0:
            logs.append(g[k - 1] + np.log(-np.expm1(s * w) / -s))
        else:
            logs.append(g[k - 1] + np.log(w))
    return float(special.logsumexp(logs))


def _log_integral_quad(x, c, ell):
    """log int exp(-c sum_i |x_i + zeta|^l) dzeta by adaptive quadrature (d = 1)."""

    def phi(z):
        return c * np.sum(np.abs(x + z) ** ell)

    lo, hi = float(-x.max()), float(-x.min())
    res = minimize_scalar(phi, bounds=(lo - 1e-12, hi + 1e-12), method="bounded",
                          options={"xatol": 1e-12})
    z0, p0 = float(res.x), float(res.fun)
    half = max(hi - lo, 1.0)
    while phi(z0 - half) - p0 < _TAIL_LOG or phi(z0 + half) - p0 < _TAIL_LOG:
        half *= 2.0
    pts = sorted(set(np.clip(-x, z0 - half, z0 + half).tolist()) | {z0})
    val, _ = integrate.quad(lambda z: np.exp(-(phi(z) - p0)), z0 - half, z0 + half,
                            epsrel=1e-12, epsabs=0.0, limit=500, points=pts[:100])
    return -p0 + np.log(val)


def hat_v(x, spec: ConfiningSpec) -> float:
    """Shift-integrated confining potential of a centered configuration.

    Closed form for l = 2 (any d), exact piecewise-exponential integration for
    l = 1 in d = 1, adaptive quadrature for other l in d = 1.
    """
    c = _centered_input(x, spec)
    n = c.shape[0]
    if spec.ell == 2:
        return float(_hat_v_quadratic(c, spec))
    if spec.d != 1:
        raise UnsupportedDimensionError("hat_v for l != 2 is implemented in d = 1 only")
    if spec.ell == 1:
        logI = _log_integral_abs(-c[:, 0], spec.rate)
    else:
        logI = _log_integral_quad(c[:, 0], spec.rate, spec.ell)
    return float(-spec.sigma2 / (2.0 * n) * logI)


def hat_v_batch(X, spec: ConfiningSpec, chunk: int = 2048) -> np.ndarray:
    """hat_v for a batch of centered configurations of shape (N, n, d) or (N, n).

    Vectorized for l = 2 and for l = 1 in d = 1; other cases loop over :func:`hat_v`.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[:, :, None]
    N, n, d = X.shape
    if d != spec.d:
        raise UnsupportedDimensionError(f"configurations in R^{d} but spec in R^{spec.d}")
    if spec.ell == 2:
        s = np.sum(X**2, axis=(1, 2))
        return spec.eta * s / n - spec.sigma2 * d / (4.0 * n) * np.log(np.pi * spec.sigma2 / (2.0 * spec.eta * n))
    if spec.ell != 1 or d != 1:
        return np.array([hat_v(x, spec) for x in X])
    c = spec.rate
    out = np.empty(N)
    k = np.arange(1, n)
    slope = -c * (2 * k - n)
    for s0 in range(0, N, chunk):
        a = np.sort(-X[s0:s0 + chunk, :, 0], axis=1)
        g = -c * np.abs(a[:, :, None] - a[:, None, :]).sum(axis=2)
        w = np.diff(a, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            # piece on [a_{k-1}, a_k]: exponential with log-slope `slope`, anchored at its maximum end
            sw = np.abs(slope)[None, :] * w
            pos = slope > 0
            anchor = np.where(pos[None, :], g[:, 1:], g[:, :-1])
            term = np.where(slope[None, :] == 0, np.log(w),
                            np.log(-np.expm1(-sw)) - np.log(np.abs(np.where(slope == 0, 1.0, slope)))[None, :])
            pieces = np.where(w > 0, anchor + term, -np.inf)
        tails = np.stack([g[:, 0], g[:, -1]], axis=1) - np.log(c * n)
        out[s0:s0 + chunk] = special.logsumexp(np.concatenate([tails, pieces], axis=1), axis=1)
    return -spec.sigma2 / (2.0 * n) * out


def hat_v_quadrature(x, spec: ConfiningSpec) -> float:
    """Generic quadrature route for hat_v (d = 1), independent of the closed forms."""
    c = _centered_input(x, spec)
    if spec.d != 1:
        raise UnsupportedDimensionError("quadrature route is one-dimensional")
    n = c.shape[0]
    return float(-spec.sigma2 / (2.0 * n) * _log_integral_quad(c[:, 0], spec.rate, spec.ell))


def hat_v_bounds(x, spec: ConfiningSpec):
    """Two-sided bounds (lower, upper) on hat_v valid for every centered configuration."""
    c = _centered_input(x, spec)
    n, d = c.shape
    ell, s2 = spec.ell, spec.sigma2
    z = z_eta(spec)
    lower = s2 / (2 * n) * np.log(n ** (d / ell) / z)
    moment = float(np.sum(np.sqrt(np.sum(c**2, axis=1)) ** ell))
    k = 2.0 ** (ell - 1)
    upper = k * spec.eta / n * moment + s2 / (2 * n) * np.log((k * n) ** (d / ell) / z)
    return float(lower), float(upper)


def vartheta(m, ell: float) -> float:
    """inf_y int |x + y|^l dm(x) for an empirical measure on R.

    l = 2 uses the variance, l = 1 the deviation from the lower median, other
    orders a bounded scalar search over [-max x, -min x], where the convex
    objective attains its minimum.
    """
    if not ell >= 1:
        raise InvalidOrderError(f"order must be >= 1, got {ell}")
    m = m if isinstance(m, EmpiricalMeasure) else EmpiricalMeasure.from_points(m)
    x = m.points
    if ell == 2:
        return float(np.mean((x - x.mean()) ** 2))
    if ell == 1:
        return float(np.mean(np.abs(x - m.median())))
    if np.ptp(x) == 0:
        return 0.0
    f = lambda y: float(np.mean(np.abs(x + y) ** ell))
    res = minimize_scalar(f, bounds=(-x.max(), -x.min()), method="bounded",
                          options={"xatol": 1e-12 * max(1.0, float(np.max(np.abs(x))))})
    return float(min(res.fun, np.mean(np.abs(x - x.mean()) ** ell)))
