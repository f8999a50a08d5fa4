"""Rank-based models read as equity markets.

Particle i is the log-capitalisation of company i. Its market weight is
exp(x_i) / sum_j exp(x_j), and the capital distribution curve plots
log weight against log rank. Typical curves come from quantiles of the
stationary density; atypical ones are compared with an i.i.d. surrogate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .densities import rate_gap
from .errors import InvalidArgumentError, UnsupportedDimensionError
from .ldp_harness import EventSpec, equilibrium, sanov_compare, tilted_density
from .sampler import SamplerConfig

__all__ = [
    "MarketState",
    "CapitalCurve",
    "market_weights",
    "capital_curve",
    "typical_curve",
    "sample_curves",
    "empirical_curve",
    "atypicality_report",
]


@dataclass(frozen=True)
class MarketState:
    """Log-capitalisations and the market weights they induce."""

    log_caps: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class CapitalCurve:
    """Points (log rank, log weight), weights sorted in decreasing order."""

    log_rank: np.ndarray
    log_weight: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return self.log_rank.size

    def sup_distance(self, other: "CapitalCurve") -> float:
        if len(self) != len(other):
            raise InvalidArgumentError("curves have different lengths")
        return float(np.max(np.abs(self.log_weight - other.log_weight)))


def market_weights(c) -> MarketState:
    """Softmax of positions with max-subtraction.

    Subtracting the maximum first makes the result bit-identical under a
    common shift whenever the shifted differences x_i - max x are exact.
    """
    x = np.asarray(c, dtype=float)
    if x.ndim == 2:
        if x.shape[1] != 1:
            raise UnsupportedDimensionError("market weights need d = 1")
        x = x[:, 0]
    if x.ndim != 1 or x.size == 0 or not np.all(np.isfinite(x)):
        raise InvalidArgumentError("positions must be a nonempty finite vector")
    e = np.exp(x - x.max())
    return MarketState(x.copy(), e / e.sum())


def capital_curve(ms) -> CapitalCurve:
    """Sort weights descending and emit (log m, log mu_[m]) for m = 1..n."""
    w = ms.weights if isinstance(ms, MarketState) else np.asarray(ms, dtype=float)
    if np.any(w <= 0):
        raise AssertionError("market weights must be positive")
    srt = np.sort(w)[::-1]
    return CapitalCurve(np.log(np.arange(1, w.size + 1, dtype=float)), np.log(srt))


def _levels(n: int, offsets: str) -> np.ndarray:
    if n < 1:
        raise InvalidArgumentError("n must be positive")
    if offsets == "midpoint":
        return (np.arange(1, n + 1) - 0.5) / n
    if offsets == "plotting":
        return np.arange(1, n + 1) / (n + 1.0)
    raise InvalidArgumentError(f"offsets must be 'midpoint' or 'plotting', got {offsets!r}")


def typical_curve(model, n: int, offsets: str = "midpoint", eq=None) -> CapitalCurve:
    """Curve of the stationary quantiles at (k - 1/2)/n (or k/(n+1)), k = 1..n.

    This is the n -> infinity shape sampled at n points, without any
    rescaling.
    """
    u = _levels(n, offsets)
    eq = eq or equilibrium(model)
    q = eq.density.quantile(u)
    curve = capital_curve(market_weights(q))
    curve.meta.update(model=model.name, sigma2=model.sigma2, offsets=offsets)
    return curve


def sample_curves(samples) -> np.ndarray:
    """Log-weight curves (sorted descending) of each configuration, shape (N, n)."""
    X = np.asarray(samples, dtype=float)
    if X.ndim == 3:
        X = X[:, :, 0]
    e = np.exp(X - X.max(axis=1, keepdims=True))
    logw = np.log(e / e.sum(axis=1, keepdims=True))
    return -np.sort(-logw, axis=1)


def empirical_curve(samples, offsets: str = "midpoint") -> CapitalCurve:
    """Sample analogue of :func:`typical_curve`.

    The stationary quantiles are replaced by quantiles of all centred
    positions pooled across the configurations in ``samples`` (shape
    (N, n) or (N, n, 1)). Averaging the sorted curves of individual
    configurations instead gives a curve shifted by the fluctuations of
    log sum_j exp(x_j), which are large because exp(x) is heavy tailed under
    the logistic law.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim == 3:
        if X.shape[2] != 1:
            raise UnsupportedDimensionError("capital curves need d = 1")
        X = X[:, :, 0]
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidArgumentError("samples must have shape (N, n) with N >= 1")
    X = X - X.mean(axis=1, keepdims=True)
    q = np.quantile(X.ravel(), _levels(X.shape[1], offsets))
    curve = capital_curve(market_weights(q))
    curve.meta.update(samples=int(X.shape[0]), offsets=offsets)
    return curve


def atypicality_report(model, event: EventSpec, n_list, chains: int,
                       cfg: SamplerConfig | None = None, eq=None) -> dict:
    """Paired Gibbs versus i.i.d. estimates plus the Gamma certificate.

    The certificate is ``gamma_part`` of :func:`rate_gap`, evaluated on the
    tilted family used for the rate reference (theta = 0.1, 0.3, 0.5). For concave flux it is
    non-positive, which is the rate-level statement that the i.i.d.
    surrogate underestimates the probability of an atypical curve.
    """
    if model.family != "rb":
        raise InvalidArgumentError("atypicality reports are defined for rank-based models")
    eq = eq or equilibrium(model)
    comp = sanov_compare(model, event, n_list, chains, cfg, eq=eq)
    p = eq.density
    certificates = [rate_gap(tilted_density(p, event, model, th), model, p)["gamma_part"]
                    for th in (0.1, 0.3, 0.5)]
    largest = comp.interacting.rows[-1].n
    return {
        "model": model.name,
        "sigma2": model.sigma2,
        "event": event.to_dict(),
        "probabilities": [
            {"n": a.n, "gibbs": a.p_hat, "gibbs_ci": [a.p_lower, a.p_upper],
             "iid": b.p_hat, "iid_ci": [b.p_lower, b.p_upper]}
            for a, b in zip(comp.interacting.rows, comp.surrogate.rows)
        ],
        "slopes": _paired_slopes(comp),
        "ordering_consistent_at_largest_n": comp.ordering_consistent(largest),
        "gamma_certificate": max(certificates),
    }


def _paired_slopes(comp) -> list:
    return [{"n": a.n, "gibbs": a.slope, "gibbs_ci": [a.slope_lower, a.slope_upper],
             "iid": b.slope, "iid_ci": [b.slope_lower, b.slope_upper]}
            for a, b in zip(comp.interacting.rows, comp.surrogate.rows)]
