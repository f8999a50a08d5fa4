"""Desk-scale checks of the large deviation behaviour of the centered Gibbs measure.

Contents:

* :class:`EventSpec` describes an event {statistic >= threshold} on centred
  empirical measures. Every statistic in the catalogue is translation
  invariant, so evaluating it on the centred representative is the same as
  evaluating it on the quotient class.
* :func:`estimate_ldp_curve` gives Monte Carlo estimates of -(1/n) log P(event)
  across n, with Wilson intervals.
* :func:`rate_infimum` is a reference value from exponential tilts of the
  equilibrium density. It is an upper bound for the true infimum of the rate
  over the event.
* :func:`verify_tilting` checks the exponential tilting identity between the
  Gibbs measures with and without confinement at n = 2 by quadrature.
* :func:`exp_moment_diag` gives exponential moments of the shift-integrated
  potential under the confined measure.
* :func:`sanov_compare` compares the interacting system with i.i.d. draws
  from the equilibrium density.
* :func:`knn_entropy` is a nearest-neighbour estimate of int p log p from samples.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import integrate, optimize, spatial, special, stats

from .confining import ConfiningSpec, hat_v, hat_v_batch
from .densities import (GridDensity, free_energy, minimize_free_energy_mv,
                        stationary_rb)
from .errors import ConvergenceError, InsufficientDataError, InvalidArgumentError
from .models import energy
from .sampler import SampleSet, SamplerConfig, run_chains

log = logging.getLogger(__name__)

__all__ = [
    "EventSpec",
    "LdpRow",
    "LdpEstimate",
    "Equilibrium",
    "equilibrium",
    "estimate_ldp_curve",
    "ldp_from_statistics",
    "rate_infimum",
    "tilted_density",
    "TiltingReport",
    "verify_tilting",
    "exp_moment_diag",
    "SanovComparison",
    "sanov_compare",
    "iid_surrogate",
    "knn_entropy",
    "DEFAULT_INTERVALS",
]

EVENT_KINDS = ("vartheta_at_least", "w1_to_stationary_at_least", "mean_abs_at_least")


# --------------------------------------------------------------------------- equilibrium


@dataclass(frozen=True)
class Equilibrium:
    """Mean-field equilibrium density and Gibbs' free energy F_star = F[density]."""

    density: GridDensity
    F_star: float


def equilibrium(model, grid=None) -> Equilibrium:
    """Stationary density (RB) or free-energy minimiser (MV) with its free energy."""
    if model.family == "rb":
        p = stationary_rb(model, grid)
        return Equilibrium(p, free_energy(p, model))
    p, F = minimize_free_energy_mv(model, grid)
    return Equilibrium(p, F)


# --------------------------------------------------------------------------- events


def _vartheta_batch(X, ell):
    """inf_y mean_i |x_i + y|^l for each row of X (shape (N, n))."""
    if ell == 2:
        return X.var(axis=1)
    if ell == 1:
        med = np.sort(X, axis=1)[:, (X.shape[1] - 1) // 2]
        return np.mean(np.abs(X - med[:, None]), axis=1)
    out = np.empty(X.shape[0])
    for i, x in enumerate(X):
        res = optimize.minimize_scalar(lambda y: np.mean(np.abs(x + y) ** ell),
                                       bounds=(-x.max(), -x.min()), method="bounded",
                                       options={"xatol": 1e-12})
        out[i] = res.fun
    return out


def _w1_to_density_batch(X, p: GridDensity):
    """W1 between each centred row of X and the grid density p: int |F_n - F_p| dx.

    Uses the grid of p (cell edges) for F_p and integrates exactly between
    the grid edges and atoms.
    """
    edges = p.a + p.dx * np.arange(p.m + 1)
    Fp = np.concatenate(([0.0], np.cumsum(p.values) * p.dx))
    out = np.empty(X.shape[0])
    n = X.shape[1]
    for i, x in enumerate(np.sort(X, axis=1)):
        knots = np.union1d(edges, np.clip(x, edges[0], edges[-1]))
        Fk = np.interp(knots, edges, Fp)
        Fn = np.searchsorted(x, knots, side="right") / n
        # on each interval F_n is constant (left value), F_p linear
        a0, a1 = Fk[:-1] - Fn[:-1], Fk[1:] - Fn[:-1]
        w = np.diff(knots)
        same = a0 * a1 >= 0
        seg = np.where(same, 0.5 * np.abs(a0 + a1),
                       0.5 * (a0 * a0 + a1 * a1) / np.maximum(np.abs(a1 - a0), 1e-300))
        out[i] = np.sum(seg * w)
        # atoms outside the grid (mass of p there is below the grid tolerance)
        out[i] += np.sum(np.maximum(edges[0] - x, 0.0) + np.maximum(x - edges[-1], 0.0)) / n
    return out


@dataclass(frozen=True)
class EventSpec:
    """Event {statistic(centred empirical measure) >= threshold}.

    Kinds:
        ``vartheta_at_least``: inf_y int |x + y|^ell dmu >= threshold (needs ``ell``).
        ``w1_to_stationary_at_least``: W1(mu~, equilibrium density) >= threshold.
        ``mean_abs_at_least``: mean |x~_i| >= threshold.
    """

    kind: str
    threshold: float
    ell: float | None = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise InvalidArgumentError(f"unknown event kind {self.kind!r}; expected one of {EVENT_KINDS}")
        if self.kind == "vartheta_at_least" and (self.ell is None or self.ell < 1):
            raise InvalidArgumentError("vartheta events need ell >= 1")
        if not math.isfinite(self.threshold):
            raise InvalidArgumentError("threshold must be finite")

    @classmethod
    def mean_abs_at_least(cls, a: float) -> "EventSpec":
        return cls("mean_abs_at_least", float(a))

    @classmethod
    def vartheta_at_least(cls, ell: float, a: float) -> "EventSpec":
        return cls("vartheta_at_least", float(a), float(ell))

    @classmethod
    def w1_to_stationary_at_least(cls, r: float) -> "EventSpec":
        return cls("w1_to_stationary_at_least", float(r))

    def statistic(self, X, reference: GridDensity | None = None) -> np.ndarray:
        """Statistic of each configuration (rows of X, shape (N, n) or (N, n, 1))."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 3:
            if X.shape[2] != 1:
                raise InvalidArgumentError("events are defined for d = 1")
            X = X[:, :, 0]
        if X.ndim == 1:
            X = X[None, :]
        X = X - X.mean(axis=1, keepdims=True)
        if self.kind == "mean_abs_at_least":
            return np.mean(np.abs(X), axis=1)
        if self.kind == "vartheta_at_least":
            return _vartheta_batch(X, self.ell)
        if reference is None:
            raise InvalidArgumentError("W1 events need the equilibrium density as reference")
        return _w1_to_density_batch(X, reference)

    def indicator(self, X, reference=None) -> np.ndarray:
        return self.statistic(X, reference) >= self.threshold

    def density_statistic(self, p: GridDensity, reference: GridDensity | None = None) -> float:
        """The same statistic evaluated on a (centred) grid density."""
        x = p.x - p.mean()
        if self.kind == "mean_abs_at_least":
            return float(np.sum(np.abs(x) * p.values) * p.dx)
        if self.kind == "vartheta_at_least":
            ell = self.ell
            res = optimize.minimize_scalar(lambda y: np.sum(np.abs(x + y) ** ell * p.values) * p.dx,
                                           bounds=(float(-x[-1]), float(-x[0])), method="bounded",
                                           options={"xatol": 1e-12})
            return float(min(res.fun, np.sum(np.abs(x) ** ell * p.values) * p.dx))
        if reference is None:
            raise InvalidArgumentError("W1 events need the equilibrium density as reference")
        if not p.same_grid(reference):
            raise InvalidArgumentError("densities must share a grid")
        return float(np.sum(np.abs(p.cdf - reference.cdf)) * p.dx)

    def to_dict(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------------------- LDP curve


@dataclass(frozen=True)
class LdpRow:
    """One row of an LDP table.

    ``slope`` is -(1/n) log p_hat; with zero hits it is ``None`` and
    ``slope_lower`` is the bound implied by the upper Wilson limit.
    """

    n: int
    hits: int
    total: int
    p_hat: float
    slope: float | None
    slope_lower: float
    slope_upper: float
    p_lower: float
    p_upper: float

    @property
    def bound_only(self) -> bool:
        return self.hits == 0


def _row(n, hits, total, confidence=0.95):
    ci = stats.binomtest(int(hits), int(total)).proportion_ci(confidence_level=confidence, method="wilson")
    lo, hi = float(ci.low), float(ci.high)
    p = hits / total

    def slope_of(q):
        return float("inf") if q <= 0 else max(-math.log(q) / n, 0.0)

    return LdpRow(int(n), int(hits), int(total), p, slope_of(p) if hits else None,
                  slope_of(hi), slope_of(lo), lo, hi)


@dataclass
class LdpEstimate:
    """Table of slope estimates across n plus the tilted-family reference."""

    event: EventSpec
    rows: list
    reference: float | None = None
    reference_kind: str = "tilted-family upper bound on the rate infimum"
    meta: dict = field(default_factory=dict)

    def row(self, n: int) -> LdpRow:
        for r in self.rows:
            if r.n == n:
                return r
        raise KeyError(n)

    def nondecreasing_within_intervals(self) -> bool:
        """Each slope interval reaches the lower end of the previous one."""
        return all(b.slope_upper >= a.slope_lower for a, b in zip(self.rows, self.rows[1:]))

    def relative_error_to_reference(self, n: int | None = None) -> float | None:
        r = self.rows[-1] if n is None else self.row(n)
        if self.reference is None or r.slope is None or self.reference == 0:
            return None
        return abs(r.slope - self.reference) / self.reference

    def to_records(self) -> list:
        return [asdict(r) for r in self.rows]

    def summary(self) -> dict:
        return {"event": self.event.to_dict(), "reference": self.reference,
                "reference_kind": self.reference_kind,
                "nondecreasing_within_intervals": self.nondecreasing_within_intervals(),
                "relative_error_at_largest_n": self.relative_error_to_reference(),
                "rows": self.to_records(), "meta": self.meta}


def ldp_from_statistics(event: EventSpec, stats_by_n: dict, reference=None, meta=None) -> LdpEstimate:
    """Build an :class:`LdpEstimate` from precomputed statistic values per n."""
    rows = []
    for n in sorted(stats_by_n):
        s = np.asarray(stats_by_n[n])
        rows.append(_row(n, int(np.sum(s >= event.threshold)), s.size))
    return LdpEstimate(event, rows, reference, meta=dict(meta or {}))


def _seed_for_n(seed: int, n: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(n)]).generate_state(1, dtype=np.uint64)[0])


def _final_configurations(model, cfg, n, chains):
    c = replace(cfg, n=n, d=1, chains=chains, total_samples=1, thin=1, seed=_seed_for_n(cfg.seed, n))
    samples, _, _ = run_chains(model, c)
    return samples[-1, :, :, 0]


def estimate_ldp_curve(model, event: EventSpec, n_list, chains_per_n: int,
                       cfg: SamplerConfig | None = None, eq: Equilibrium | None = None,
                       with_reference: bool = True) -> LdpEstimate:
    """Probability of ``event`` under the centered Gibbs measure for each n.

    Each of the ``chains_per_n`` chains is run for ``cfg.burn_in`` steps and
    contributes its final configuration. The seed for size n is derived from
    ``cfg.seed`` and n, so rows do not depend on the order of ``n_list``.
    """
    cfg = cfg or SamplerConfig(n=2)
    if any(int(n) < 2 for n in n_list):
        raise InvalidArgumentError("every n must be >= 2")
    if chains_per_n < 1:
        raise InvalidArgumentError("chains_per_n must be positive")
    need_eq = with_reference or event.kind == "w1_to_stationary_at_least"
    eq = eq or (equilibrium(model) if need_eq else None)
    ref_density = eq.density if eq is not None else None
    if eq is not None:
        typical = event.density_statistic(eq.density, ref_density)
        if event.threshold <= typical:
            log.warning("threshold %.6g is not above the equilibrium value %.6g; the event is typical",
                        event.threshold, typical)
    stats_by_n = {}
    for n in sorted(int(k) for k in n_list):
        X = _final_configurations(model, cfg, n, chains_per_n)
        stats_by_n[n] = event.statistic(X, ref_density)
    reference = rate_infimum(model, event, eq=eq) if with_reference else None
    meta = {"sampler": cfg.to_dict(), "chains_per_n": chains_per_n, "law": "gibbs",
            "model": model.name, "sigma2": model.sigma2}
    return ldp_from_statistics(event, stats_by_n, reference, meta)


# --------------------------------------------------------------------------- rate reference


def _tilt(p: GridDensity, g, theta):
    return GridDensity.from_log_values(p.a, p.b, np.log(np.maximum(p.values, 1e-300)) + theta * g)


def _tilt_kernel(event: EventSpec, x, growth_index: float):
    if event.kind == "vartheta_at_least":
        # equilibrium tails decay like exp(-c |x|^growth); a steeper tilt is not integrable
        return np.abs(x) ** min(event.ell, growth_index)
    if event.kind in ("mean_abs_at_least", "w1_to_stationary_at_least"):
        return np.abs(x)
    raise NotImplementedError(f"no tilted family for event kind {event.kind!r}")


def tilted_density(p: GridDensity, event: EventSpec, model, theta: float) -> GridDensity:
    """Member p_theta ~ p exp(theta g) of the family used by :func:`rate_infimum`."""
    return _tilt(p, _tilt_kernel(event, p.x, float(model.growth_index)), theta)


def rate_infimum(model, event: EventSpec, grid=None, eq: Equilibrium | None = None,
                 tail_mass: float = 1e-10) -> float:
    """min over the tilted family p_theta ~ p_eq exp(theta g) of F[p_theta] - F_star.

    g is |x| for mean-abs and W1 events and |x|^min(ell, growth index) for
    vartheta events. The
    statistic increases with theta, so the family minimum is attained where
    the constraint is active; theta is found by a bracketing root search. The
    result is an upper bound for the infimum of the rate over the event.

    Raises:
        NotImplementedError: event kind outside the catalogue.
        ConvergenceError: the threshold needs a tilt whose mass reaches the
            grid boundary (widen the grid).
    """
    eq = eq or equilibrium(model, grid)
    p = eq.density
    g = _tilt_kernel(event, p.x, float(model.growth_index))
    base = event.density_statistic(p, p)
    if event.threshold <= base:
        return 0.0

    def excess(theta):
        return event.density_statistic(_tilt(p, g, theta), p) - event.threshold

    hi = 0.05
    while excess(hi) < 0:
        hi *= 2.0
        if hi > 1e6:
            raise ConvergenceError("no tilt reaches the threshold", residual=excess(hi), iterations=0)
    theta = optimize.brentq(excess, 0.0, hi, xtol=1e-13, rtol=1e-13)
    q = _tilt(p, g, theta)
    edge = (q.values[:8].sum() + q.values[-8:].sum()) * q.dx
    if edge > tail_mass:
        raise ConvergenceError(f"tilted density has mass {edge:.2e} at the grid boundary; widen the grid",
                               residual=edge, iterations=0)
    return max(free_energy(q, model) - eq.F_star, 0.0)


# --------------------------------------------------------------------------- tilting identity

DEFAULT_INTERVALS = ((0.0, math.inf), (1.0, 3.0), (0.0, 0.5), (0.5, 1.0), (2.0, 5.0),
                     (3.0, math.inf), (0.1, 0.2), (1.0, 1.0))


@dataclass
class TiltingReport:
    """Both sides of the tilting identity for interval events on the gap."""

    eta: float
    ell: float
    sigma2: float
    ratio: float
    rows: list
    max_residual: float

    def to_dict(self) -> dict:
        return asdict(self)


def _gap_energy(model, s):
    return float(energy(np.array([[-s / 2.0], [s / 2.0]]), model))


def _quad(f, a, b, what):
    val, err, info = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-13, limit=500, full_output=1)[:3]
    if err > 1e-10 * max(abs(val), 1e-300) and err > 1e-300:
        raise ConvergenceError(f"quadrature for {what} on [{a}, {b}] reached error {err:.2e} "
                               f"after {info['neval']} evaluations", residual=err, iterations=info["neval"])
    return val


def _piecewise_quad(f, u, v, what, breaks=(1.0, 4.0, 16.0, 64.0)):
    """Integral over [u, v] split at fixed points so quad sees smooth pieces."""
    pts = [u] + [b for b in breaks if u < b < v] + [v]
    return sum(_quad(f, a, b, what) for a, b in zip(pts, pts[1:]))


def verify_tilting(model, eta: float, sigma2: float | None = None, ell: float = 2.0,
                   intervals=DEFAULT_INTERVALS, n: int = 2) -> TiltingReport:
    """Check P(B) = (Z_eta/Z) int 1_B exp((2n/s2) V_hat) dP_eta at n = 2 by quadrature.

    For n = 2 and d = 1 a centred configuration is (-s/2, s/2) and both
    energies depend on s only through the gap |s| (and are even in s), so
    every integral is one-dimensional over s >= 0. Each side is computed
    from its own quadratures: the left from the Gibbs density, the right from
    the confined density, the shift-integrated potential and the two
    normalisers.
    """
    if n != 2 or getattr(model, "d", 1) != 1:
        raise InvalidArgumentError("the quadrature check is implemented for n = 2, d = 1")
    if sigma2 is not None:
        model = model.with_sigma2(sigma2)
    s2 = model.sigma2
    spec = ConfiningSpec(eta, ell, 1, s2)
    beta = 2.0 * n / s2

    def gibbs(s):
        return math.exp(-beta * _gap_energy(model, s))

    def vhat(s):
        return hat_v(np.array([-s / 2.0, s / 2.0]), spec)

    def confined(s):
        return math.exp(-beta * (_gap_energy(model, s) + vhat(s)))

    def reweighted(s):
        # 1_B exp(beta V_hat) times the confined density, combined in the exponent
        v = vhat(s)
        return math.exp(-beta * (_gap_energy(model, s) + v) + beta * v)

    Z = _piecewise_quad(gibbs, 0.0, math.inf, "Z")
    Z_eta = _piecewise_quad(confined, 0.0, math.inf, "Z_eta")
    ratio = Z_eta / Z
    rows, worst = [], 0.0
    for u, v in intervals:
        if v < u:
            raise InvalidArgumentError(f"empty interval [{u}, {v}] must have u <= v")
        if v == u:
            lhs = rhs = 0.0
        else:
            lhs = _piecewise_quad(gibbs, u, v, "left side") / Z
            rhs = ratio * _piecewise_quad(reweighted, u, v, "right side") / Z_eta
        res = abs(lhs - rhs) / max(abs(lhs), abs(rhs)) if max(abs(lhs), abs(rhs)) > 0 else 0.0
        worst = max(worst, res)
        rows.append({"u": u, "v": v, "lhs": lhs, "rhs": rhs, "residual": res})
    return TiltingReport(float(eta), float(ell), s2, ratio, rows, worst)


# --------------------------------------------------------------------------- exponential moments


def _log_mean_exp(a):
    return float(special.logsumexp(a) - math.log(a.size))


def _n2_exp_moment(model, spec: ConfiningSpec, q: float) -> float:
    """(1/2) log of int exp((4q/s2) V_hat) dP_eta at n = 2, by quadrature."""
    beta = 4.0 / spec.sigma2

    def w(s):
        return _gap_energy(model, s)

    def v(s):
        return hat_v(np.array([-s / 2.0, s / 2.0]), spec)

    num = _piecewise_quad(lambda s: math.exp(-beta * (w(s) + v(s)) + q * beta * v(s)), 0.0, math.inf, "moment")
    den = _piecewise_quad(lambda s: math.exp(-beta * (w(s) + v(s))), 0.0, math.inf, "Z_eta")
    return 0.5 * math.log(num / den)


def exp_moment_diag(model, samples_by_n: dict, etas, q: float = 1.0, ell: float = 2.0,
                    blocks: int = 20, min_samples: int = 100) -> list:
    """Table of (eta, n, (1/n) log I_eta_n, stderr) with I_eta_n = int exp((2nq/s2) V_hat) dP_eta.

    Samples of the unconfined Gibbs measure are reweighted:
    I = E[exp((2n(q-1)/s2) V_hat)] / E[exp(-(2n/s2) V_hat)]. At n = 2 the
    value comes from quadrature and the standard error is zero.

    Args:
        samples_by_n: mapping n -> SampleSet or array of shape (N, n[, 1]).
    """
    if q < 1:
        raise InvalidArgumentError("q must be >= 1")
    s2 = model.sigma2
    table = []
    for n in sorted(samples_by_n):
        X = samples_by_n[n]
        X = X.samples if isinstance(X, SampleSet) else np.asarray(X, dtype=float)
        if X.ndim == 2:
            X = X[:, :, None]
        for eta in etas:
            spec = ConfiningSpec(float(eta), ell, X.shape[2] if X.size else 1, s2)
            if n == 2 and X.shape[2] == 1:
                table.append({"eta": float(eta), "n": 2, "value": _n2_exp_moment(model, spec, q),
                              "stderr": 0.0, "method": "quadrature"})
                continue
            if X.shape[0] < min_samples:
                raise InsufficientDataError(f"n={n}: {X.shape[0]} samples, need at least {min_samples}")
            v = hat_v_batch(X, spec)
            a = 2.0 * n * (q - 1.0) / s2 * v
            b = -2.0 * n / s2 * v

            def stat(idx):
                return (_log_mean_exp(a[idx]) - _log_mean_exp(b[idx])) / n

            full = stat(slice(None))
            edges = np.linspace(0, v.size, min(blocks, v.size) + 1).astype(int)
            reps = np.array([stat(np.r_[0:lo, hi:v.size]) for lo, hi in zip(edges[:-1], edges[1:])])
            k = reps.size
            se = float(np.sqrt((k - 1) / k * np.sum((reps - reps.mean()) ** 2)))
            table.append({"eta": float(eta), "n": int(n), "value": full, "stderr": se,
                          "method": "reweighting"})
    return table


# --------------------------------------------------------------------------- Sanov surrogate


def iid_surrogate(p: GridDensity, n: int, draws: int, seed: int) -> np.ndarray:
    """``draws`` centred configurations of n i.i.d. points from p (inverse CDF sampling)."""
    rng = np.random.default_rng(seed)
    X = p.quantile(rng.random((draws, n)))
    return X - X.mean(axis=1, keepdims=True)


@dataclass
class SanovComparison:
    """Paired slope estimates under the Gibbs measure and the i.i.d. surrogate."""

    interacting: LdpEstimate
    surrogate: LdpEstimate

    def ordering_consistent(self, n: int | None = None) -> bool:
        """Interacting slope does not exceed the surrogate slope beyond the intervals."""
        a = self.interacting.rows[-1] if n is None else self.interacting.row(n)
        b = self.surrogate.rows[-1] if n is None else self.surrogate.row(n)
        return a.slope_lower <= b.slope_upper

    def summary(self) -> dict:
        return {"interacting": self.interacting.summary(), "surrogate": self.surrogate.summary(),
                "ordering_consistent": self.ordering_consistent()}


def sanov_compare(model, event: EventSpec, n_list, chains: int, cfg: SamplerConfig | None = None,
                  eq: Equilibrium | None = None) -> SanovComparison:
    """Run the LDP estimate under the Gibbs measure and under centred i.i.d. draws."""
    if model.family != "rb":
        raise InvalidArgumentError("the Sanov comparison is defined for rank-based models")
    cfg = cfg or SamplerConfig(n=2)
    eq = eq or equilibrium(model)
    inter = estimate_ldp_curve(model, event, n_list, chains, cfg, eq=eq, with_reference=False)
    stats_by_n = {int(n): event.statistic(iid_surrogate(eq.density, int(n), chains,
                                                        _seed_for_n(cfg.seed + 1, int(n))), eq.density)
                  for n in n_list}
    sur = ldp_from_statistics(event, stats_by_n, meta={"law": "iid", "chains_per_n": chains,
                                                       "model": model.name, "sigma2": model.sigma2})
    return SanovComparison(inter, sur)


# --------------------------------------------------------------------------- entropy estimate


def knn_entropy(samples, k: int = 1) -> float:
    """Kozachenko-Leonenko estimate of int p log p (the negative differential entropy).

    Args:
        samples: array of shape (N,) or (N, d); duplicate points are not allowed.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    N, d = x.shape
    if N <= k:
        raise InsufficientDataError(f"need more than k={k} samples")
    r = spatial.cKDTree(x).query(x, k=k + 1)[0][:, k]
    if np.any(r <= 0):
        raise InvalidArgumentError("duplicate samples make the nearest-neighbour distance zero")
    log_vd = d / 2.0 * math.log(math.pi) - special.gammaln(d / 2.0 + 1.0)
    h = special.digamma(N) - special.digamma(k) + log_vd + d * float(np.mean(np.log(r)))
    return -float(h)
