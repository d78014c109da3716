"""Error bounds, threshold rules, sufficient sizes and Bayes-risk lower bounds.

All logarithms are natural.  Upper bounds are returned as computed, so they
may exceed 1; wrap them in :func:`clamped_risk_bound` for a probability.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError

_CHUNK = 1 << 20


def _positive(**kw):
    for name, v in kw.items():
        if not (v > 0 and math.isfinite(v)):
            raise DomainError(f"{name} must be positive and finite, got {v}")


def _check_sizes(lo, hi, total, names=("min_size", "max_size")):
    if not (1 <= lo <= hi <= total - 1):
        raise DomainError(f"need 1 <= {names[0]} <= {names[1]} <= {total - 1}, got {lo}, {hi}")


def type1_bound_line(n: int, t: float, K: float, min_size: int, max_size: int) -> float:
    """Union bound on the false-alarm probability of the line-network scan.

    Sums (n - i + 1) exp(-t^2 i (n - i) / (8 K^2 n)) over i in [min_size, max_size]
    in the log domain, in chunks so very large n stays within memory.
    """
    _positive(t=t, K=K)
    _check_sizes(min_size, max_size, n)
    parts = []
    for lo in range(min_size, max_size + 1, _CHUNK):
        i = np.arange(lo, min(lo + _CHUNK, max_size + 1), dtype=float)
        parts.append(logsumexp(np.log(n - i + 1) - t * t * i * (n - i) / (8.0 * K * K * n)))
    return float(math.exp(logsumexp(parts)))


def type2_bound(n_total: int, t: float, K: float, mmd2: float, size: int) -> float:
    """Miss-probability bound when the anomaly has ``size`` of ``n_total`` nodes.

    ``n_total`` is n for lines and rings, n^2 for disks, n^r for rectangles.
    """
    _positive(K=K)
    if not t < mmd2:
        raise DomainError(f"type II bound requires threshold t < MMD^2[p,q] (got t={t}, MMD^2={mmd2})")
    if not 2 <= size <= n_total - 2:
        raise DomainError(f"need 2 <= size <= {n_total - 2}, got {size}")
    return math.exp(-((mmd2 - t) ** 2) * size * (n_total - size) / (8.0 * n_total * K * K))


def _exp_bound(log_count: float, t: float, K: float, lo: int, hi: int, total: int) -> float:
    m = min(lo * (total - lo), hi * (total - hi))
    return math.exp(log_count - 2.0 * t * t * m / (16.0 * total * K * K))


def type1_bound_ring(n: int, t: float, K: float, min_size: int, max_size: int) -> float:
    _positive(t=t, K=K)
    _check_sizes(min_size, max_size, n)
    return _exp_bound(2.0 * math.log(n), t, K, min_size, max_size, n)


def type1_bound_disk(n: int, t: float, K: float, d_min: int, d_max: int) -> float:
    _positive(t=t, K=K)
    _check_sizes(d_min, d_max, n * n, ("d_min", "d_max"))
    return _exp_bound(3.0 * math.log(n), t, K, d_min, d_max, n * n)


def type1_bound_rect(n: int, r: int, t: float, K: float, s_min: int, s_max: int) -> float:
    _positive(t=t, K=K)
    if r < 1:
        raise DomainError(f"lattice dimension r must be >= 1, got {r}")
    _check_sizes(s_min, s_max, n ** r, ("s_min", "s_max"))
    return _exp_bound(2.0 * r * math.log(n), t, K, s_min, s_max, n ** r)


def clamped_risk_bound(value: float) -> float:
    return min(1.0, value)


# --- sufficient conditions ----------------------------------------------------

def _size_constant(t, K, eta, kind, r):
    _positive(t=t, K=K, eta=eta)
    if kind in ("line", "ring"):
        factor = 16.0
    elif kind in ("disk", "lattice2d"):
        factor = 24.0
    elif kind in ("rectangle", "lattice"):
        factor = 16.0 * r
    else:
        raise DomainError(f"unknown geometry kind {kind!r}")
    return factor * K * K * (1.0 + eta) / (t * t)


def sufficient_min_size(t: float, K: float, eta: float, n: float, geometry_kind: str = "line", r: int = 1) -> float:
    """Smallest candidate size the consistency conditions ask for, C log n."""
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    return _size_constant(t, K, eta, geometry_kind, r) * math.log(n)


def sufficient_max_size(t: float, K: float, eta: float, n: float, geometry_kind: str = "line",
                        r: int = 1, k_iter: int = 2) -> float:
    """Largest candidate size allowed by the consistency conditions.

    Lines leave a gap of C times the ``k_iter``-fold iterated log of n; rings,
    disks and rectangles leave a gap of C log n from the node count.
    """
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    c = _size_constant(t, K, eta, geometry_kind, r)
    if geometry_kind == "line":
        return n - c * iterated_log(n, k_iter)
    total = {"ring": n, "disk": n * n, "lattice2d": n * n}.get(geometry_kind, n ** r)
    return total - c * math.log(n)


def iterated_log(n: float, k: int) -> float:
    """Natural log applied ``k`` times."""
    if k < 1:
        raise DomainError(f"iteration depth must be >= 1, got {k}")
    x = float(n)
    for depth in range(k):
        if x <= 0:
            raise DomainError(f"n={n} too small for {k} nested logs (iterate {depth} is {x})")
        x = math.log(x)
    return x


def threshold_known(mmd2: float, delta: float) -> float:
    """Threshold (1 - delta) MMD^2 for when the population MMD^2 is known."""
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    _positive(mmd2=mmd2)
    return (1.0 - delta) * mmd2


def threshold_unknown(n: float, c: float = 1.0) -> float:
    """Vanishing threshold c / log(log n); any sequence tending to 0 would do."""
    _positive(c=c)
    if not n > math.e:
        raise DomainError(f"vanishing threshold needs n > e so that log log n > 0, got {n}")
    return c / iterated_log(n, 2)


# --- overlap variable and Bayes-risk lower bound ------------------------------

def _check_overlap_args(n, k, geometry_kind):
    if geometry_kind == "line":
        if not (1 <= k and 2 * k < n):
            raise DomainError(f"line overlap table is defined only for 1 <= k < n/2 (got n={n}, k={k})")
    elif geometry_kind == "ring":
        if not (1 <= k and 2 * k <= n):
            raise DomainError(f"ring overlap table is defined only for 1 <= k <= n/2 (got n={n}, k={k})")
    else:
        raise DomainError(f"overlap distribution is defined for line or ring, not {geometry_kind!r}")


def overlap_distribution(n: int, k: int, geometry_kind: str = "line", exact: bool = False):
    """P(Z = z) for z = 0..k, Z the overlap of two independent uniform length-k intervals.

    With ``exact=True`` the probabilities are :class:`fractions.Fraction`.
    """
    _check_overlap_args(n, k, geometry_kind)
    probs = [Fraction(0)] * (k + 1)
    if geometry_kind == "line":
        m = n - k + 1
        for i in range(1, k):
            probs[i] = Fraction(2 * (n - 2 * k + 1 + i), m * m)
        probs[k] = Fraction(1, m)
    else:
        for i in range(1, k):
            probs[i] = Fraction(2, n)
        probs[k] = Fraction(1, n)
    probs[0] = 1 - sum(probs[1:])
    if exact:
        return probs
    return np.array([float(p) for p in probs])


def overlap_mgf_excess(n: int, k: int, mu: float, geometry_kind: str = "line") -> float:
    """E exp(mu^2 Z) - 1, accumulated as sum P(Z=z) (exp(mu^2 z) - 1) to avoid cancellation."""
    probs = overlap_distribution(n, k, geometry_kind)
    z = np.arange(k + 1)
    return float(np.sum(probs * np.expm1(mu * mu * z)))


def bayes_risk_lower_bound(n: int, k: int, mu: float, geometry_kind: str = "line") -> float:
    """Lower bound max(0, 1 - sqrt(E exp(mu^2 Z) - 1) / 2) on the Bayes risk."""
    excess = overlap_mgf_excess(n, k, mu, geometry_kind)
    return max(0.0, 1.0 - 0.5 * math.sqrt(max(excess, 0.0)))
