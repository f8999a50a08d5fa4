"""Empirical measures, translations and the one-dimensional metrics.

Translations follow the push-forward convention

    integral f d(tau_y mu) = integral f(x + y) d mu(x),

so ``translate(m, y)`` moves every atom by ``+y`` and centering is the
translation by minus the mean.

All metric routines are exact in d = 1: Wasserstein distances come from the
quantile coupling, the Prohorov distance from a bipartite matching test over a
finite candidate set, and the quotient (translation-orbit) distances from
closed forms, convex line searches or an exact candidate enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import (
    IncompatibleSpaceError,
    InvalidArgumentError,
    InvalidOrderError,
    UnsupportedDimensionError,
)

__all__ = [
    "EmpiricalMeasure",
    "as_configuration",
    "center",
    "is_centered",
    "translate",
    "wasserstein_1d",
    "prohorov_1d",
    "quotient_distance",
    "best_shift",
    "max_matching_within",
]

# absolute slack for closed-ball membership tests in the matching routines
_MATCH_SLACK = 1e-12


def as_configuration(points) -> np.ndarray:
    """Validate ``points`` and return a float array of shape (n, d).

    A 1D input of length n is read as n particles on the real line.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise InvalidArgumentError(f"configuration must have shape (n, d) with n, d >= 1, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("configuration has non-finite coordinates")
    return x


def center(points) -> np.ndarray:
    """Subtract the per-dimension mean (orthogonal projection onto sum-zero configurations).

    The output has the same shape as the input.
    """
    x = np.asarray(points, dtype=float)
    c = as_configuration(x)
    c = c - c.mean(axis=0, keepdims=True)
    return c.reshape(x.shape)


def is_centered(points, atol_per_particle=1e-12) -> bool:
    c = as_configuration(points)
    n = c.shape[0]
    return bool(np.all(np.abs(c.sum(axis=0)) <= atol_per_particle * n))


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Equal-weight atomic measure (1/n) sum_i delta_{x_i} on R^d.

    Attributes:
        atoms: array of shape (n, d).
    """

    atoms: np.ndarray

    def __post_init__(self):
        a = as_configuration(self.atoms).copy()
        a.setflags(write=False)
        object.__setattr__(self, "atoms", a)

    @classmethod
    def from_points(cls, points) -> "EmpiricalMeasure":
        return cls(as_configuration(points))

    @property
    def n(self) -> int:
        return self.atoms.shape[0]

    @property
    def d(self) -> int:
        return self.atoms.shape[1]

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.n, 1.0 / self.n)

    @property
    def points(self) -> np.ndarray:
        """Atoms as a flat array (d = 1 only)."""
        self._require_1d()
        return self.atoms[:, 0]

    def mean(self) -> np.ndarray:
        return self.atoms.mean(axis=0)

    def translate(self, y) -> "EmpiricalMeasure":
        return translate(self, y)

    def centered(self) -> "EmpiricalMeasure":
        return EmpiricalMeasure(center(self.atoms))

    def integrate(self, f) -> float:
        """Integral of ``f`` (vectorised over rows of shape (n, d)) against the measure."""
        return float(np.mean(f(self.atoms)))

    def cdf(self, x):
        """Right-continuous CDF, F(x) = #{i : x_i <= x} / n (d = 1)."""
        pts = np.sort(self.points)
        return np.searchsorted(pts, np.asarray(x, dtype=float), side="right") / self.n

    def quantile(self, u):
        """Left-continuous generalized inverse of the CDF on (0, 1]."""
        pts = np.sort(self.points)
        u = np.asarray(u, dtype=float)
        k = np.clip(np.ceil(u * self.n - 1e-12).astype(int) - 1, 0, self.n - 1)
        return pts[k]

    def median(self) -> float:
        """Lower median."""
        pts = np.sort(self.points)
        return float(pts[(self.n - 1) // 2])

    def _require_1d(self):
        if self.d != 1:
            raise UnsupportedDimensionError(f"operation implemented for d = 1 only, got d = {self.d}")


def _as_measure(m) -> EmpiricalMeasure:
    return m if isinstance(m, EmpiricalMeasure) else EmpiricalMeasure.from_points(m)


def translate(m, y) -> EmpiricalMeasure:
    """Push ``m`` forward by x -> x + y."""
    m = _as_measure(m)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (m.d,):
        raise IncompatibleSpaceError(f"shift of shape {y.shape} incompatible with measure in R^{m.d}")
    return EmpiricalMeasure(m.atoms + y[None, :])


# --------------------------------------------------------------------------
# Wasserstein


def _check_order(p):
    if not p >= 1:
        raise InvalidOrderError(f"Wasserstein order must be >= 1, got {p}")


def _w1_cdf_integral(x, z) -> float:
    """Integral of |F_x - F_z| over the merged breakpoints."""
    xs, zs = np.sort(x), np.sort(z)
    grid = np.union1d(xs, zs)
    if grid.size < 2:
        return 0.0
    fx = np.searchsorted(xs, grid[:-1], side="right") / xs.size
    fz = np.searchsorted(zs, grid[:-1], side="right") / zs.size
    return float(np.sum(np.abs(fx - fz) * np.diff(grid)))


def _wp_sorted(x, z, p) -> float:
    d = np.abs(np.sort(x) - np.sort(z))
    return float(np.mean(d**p) ** (1.0 / p))


def _wp_quantile(x, z, p) -> float:
    """L^p distance of quantile functions, exact for step quantiles."""
    xs, zs = np.sort(x), np.sort(z)
    u = np.union1d(np.arange(1, xs.size + 1) / xs.size, np.arange(1, zs.size + 1) / zs.size)
    u = u[u > 0]
    du = np.diff(np.concatenate(([0.0], u)))
    mid = u - du / 2
    qx = xs[np.minimum((mid * xs.size).astype(int), xs.size - 1)]
    qz = zs[np.minimum((mid * zs.size).astype(int), zs.size - 1)]
    return float(np.sum(du * np.abs(qx - qz) ** p) ** (1.0 / p))


def wasserstein_1d(m1, m2, p: float = 1.0) -> float:
    """Wasserstein distance of order ``p`` between two empirical measures on R.

    For p = 1 this is the L^1 distance between the two CDFs; otherwise the
    sorted-matching cost when the atom counts agree and the quantile L^p
    distance when they do not.
    """
    _check_order(p)
    m1, m2 = _as_measure(m1), _as_measure(m2)
    m1._require_1d()
    m2._require_1d()
    if p == 1:
        return _w1_cdf_integral(m1.points, m2.points)
    if m1.n == m2.n:
        return _wp_sorted(m1.points, m2.points, p)
    return _wp_quantile(m1.points, m2.points, p)


# --------------------------------------------------------------------------
# Prohorov


def _greedy_matching(xs, zs, eps) -> int:
    """Maximum matching between sorted ``xs`` and ``zs`` using pairs at distance <= eps."""
    i = j = count = 0
    lim = eps + _MATCH_SLACK
    while i < xs.size and j < zs.size:
        diff = xs[i] - zs[j]
        if abs(diff) <= lim:
            count += 1
            i += 1
            j += 1
        elif diff < 0:
            i += 1
        else:
            j += 1
    return count


def _greedy_matching_shifts(xs, zs, shifts, eps) -> np.ndarray:
    """Vectorised greedy matching of ``xs`` against ``zs + s`` for every shift s."""
    n1, n2 = xs.size, zs.size
    s = np.asarray(shifts, dtype=float)
    i = np.zeros(s.shape, dtype=int)
    j = np.zeros(s.shape, dtype=int)
    count = np.zeros(s.shape, dtype=int)
    lim = eps + _MATCH_SLACK
    for _ in range(n1 + n2):
        live = (i < n1) & (j < n2)
        if not live.any():
            break
        diff = xs[np.minimum(i, n1 - 1)] - zs[np.minimum(j, n2 - 1)] - s
        hit = live & (np.abs(diff) <= lim)
        adv_i = live & (hit | (diff < 0))
        adv_j = live & (hit | (diff > 0))
        count += hit
        i += adv_i
        j += adv_j
    return count


def max_matching_within(x, z, eps) -> int:
    """Maximum bipartite matching (Hopcroft-Karp) between atoms at distance <= eps.

    Independent of the sorted greedy routine; used as a cross-check.
    """
    x = np.asarray(x, dtype=float).reshape(-1, 1) if np.ndim(x) == 1 else np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float).reshape(-1, 1) if np.ndim(z) == 1 else np.asarray(z, dtype=float)
    dist = np.linalg.norm(x[:, None, :] - z[None, :, :], axis=-1)
    graph = csr_matrix((dist <= eps + _MATCH_SLACK).astype(np.int8))
    match = maximum_bipartite_matching(graph, perm_type="column")
    return int(np.sum(match >= 0))


def _feasible(n, matched, eps) -> bool:
    # mass left on pairs at distance > eps is (n - matched)/n; need it <= eps
    return n - matched <= eps * n + 1e-9


def _prohorov_sorted(xs, zs) -> float:
    n = xs.size
    cands = np.unique(np.concatenate((np.abs(xs[:, None] - zs[None, :]).ravel(), np.arange(n + 1) / n)))
    cands = cands[cands <= 1.0]
    lo, hi = 0, cands.size - 1  # cands[hi] == 1 is always feasible
    while lo < hi:
        mid = (lo + hi) // 2
        if _feasible(n, _greedy_matching(xs, zs, cands[mid]), cands[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(cands[lo])


def prohorov_1d(m1, m2) -> float:
    """Prohorov distance between equal-size empirical measures on R.

    Smallest eps such that some coupling puts mass <= eps on pairs at
    distance >= eps. For equal weights the optimal couplings are
    permutations, so feasibility at level eps is a matching problem and the
    answer lies in {|x_i - z_j|} U {k/n}.
    """
    m1, m2 = _as_measure(m1), _as_measure(m2)
    m1._require_1d()
    m2._require_1d()
    if m1.n != m2.n:
        raise InvalidArgumentError("prohorov_1d supports equal atom counts only")
    return _prohorov_sorted(np.sort(m1.points), np.sort(m2.points))


# --------------------------------------------------------------------------
# quotient metrics


def _parse_base(base, p):
    if base == "prohorov":
        return "prohorov", None
    if base.startswith("wasserstein"):
        order = float(base.split("-", 1)[1]) if "-" in base and base.split("-", 1)[1] != "p" else float(p)
        _check_order(order)
        return "wasserstein", order
    raise InvalidArgumentError(f"unknown base metric {base!r}")


def _golden(f, a, b, tol=1e-9):
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = (a + b) / 2
    return x, f(x)


def _bracket(m1, m2):
    half = np.ptp(m1.points) + np.ptp(m2.points) + 1.0
    mid = m1.median() - m2.median()
    return mid - half, mid + half


def _quotient_prohorov(xs, zs):
    n = xs.size
    a = (xs[:, None] - zs[None, :]).ravel()
    if a.size**2 <= 4_000_000:
        pair = np.abs(a[:, None] - a[None, :]).ravel() / 2
        cands = np.unique(np.concatenate((pair, np.arange(n + 1) / n)))
        cands = cands[cands <= 1.0]
    else:
        cands = None

    def check(eps):
        matched = _greedy_matching_shifts(xs, zs, a - eps, eps)
        k = int(np.argmax(matched))
        return _feasible(n, matched[k], eps), a[k] - eps

    if cands is not None:
        lo, hi = 0, cands.size - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if check(cands[mid])[0]:
                hi = mid
            else:
                lo = mid + 1
        eps = float(cands[lo])
    else:
        lo_e, hi_e = 0.0, 1.0
        while hi_e - lo_e > 1e-13:
            mid = (lo_e + hi_e) / 2
            if check(mid)[0]:
                hi_e = mid
            else:
                lo_e = mid
        eps = hi_e
    return check(eps)[1], eps


def best_shift(m1, m2, base: str = "prohorov", p: float = 1.0):
    """Return ``(y, value)`` minimising base(m1, translate(m2, y)) over y in R.

    Args:
        base: ``"prohorov"``, ``"wasserstein-<p>"`` or ``"wasserstein"`` with ``p``.
    """
    m1, m2 = _as_measure(m1), _as_measure(m2)
    m1._require_1d()
    m2._require_1d()
    kind, order = _parse_base(base, p)
    xs, zs = np.sort(m1.points), np.sort(m2.points)
    if kind == "prohorov":
        if m1.n != m2.n:
            raise InvalidArgumentError("quotient Prohorov distance supports equal atom counts only")
        y, eps = _quotient_prohorov(xs, zs)
        return float(y), float(eps)
    if order == 2:
        y = float(xs.mean() - zs.mean())
        return y, wasserstein_1d(m1, translate(m2, y), 2)
    if order == 1 and m1.n == m2.n:
        d = xs - zs
        y = float(np.sort(d)[(d.size - 1) // 2])
        return y, float(np.mean(np.abs(d - y)))

    # convex in y: coarse grid then golden section on the neighbouring cells
    def cost(y):
        return wasserstein_1d(m1, EmpiricalMeasure(m2.atoms + y), order)

    lo, hi = _bracket(m1, m2)
    grid = np.linspace(lo, hi, 65)
    vals = np.array([cost(y) for y in grid])
    k = int(np.argmin(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    y, v = _golden(cost, a, b)
    if vals[k] < v:
        y, v = grid[k], vals[k]
    return float(y), float(v)


def quotient_distance(m1, m2, base: str = "prohorov", p: float = 1.0) -> float:
    """Distance between the translation orbits of ``m1`` and ``m2``."""
    return best_shift(m1, m2, base, p)[1]

