"""Unbiased MMD^2 estimation and the Gram-matrix cache behind the fast scan."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import ConfigurationError, InsufficientSamplesError, ResourceError
from .geometry import Geometry, ModularRange, NodeSet, node_indices
from .kernels import KernelSpec, kernel_matrix

# (N+1)^2 doubles for the 2-D prefix table; 6000 nodes is ~290 MB
MAX_PREFIX_NODES = 6000
MAX_GRAM_NODES = 20000


@dataclass(frozen=True)
class SampleField:
    """One scalar observation per node, in the geometry's node order."""

    values: np.ndarray
    geometry: Optional[Geometry] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("sample field contains non-finite values")
        if self.geometry is not None and v.size != self.geometry.node_count:
            raise ConfigurationError(
                f"node count mismatch: field has {v.size} values, geometry expects {self.geometry.node_count}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


def mmd_u2(X, Y, spec: KernelSpec) -> float:
    """Unbiased estimate of MMD^2 between sample sets ``X`` (n >= 2) and ``Y`` (m >= 2)."""
    X = np.asarray(X, dtype=float).ravel()
    Y = np.asarray(Y, dtype=float).ravel()
    n, m = X.size, Y.size
    if n < 2 or m < 2:
        raise InsufficientSamplesError(f"unbiased MMD^2 needs at least 2 samples per set, got {n} and {m}")
    kxx = kernel_matrix(spec, X)
    kyy = kernel_matrix(spec, Y)
    kxy = kernel_matrix(spec, X, Y)
    return float((kxx.sum() - np.trace(kxx)) / (n * (n - 1))
                 + (kyy.sum() - np.trace(kyy)) / (m * (m - 1))
                 - 2.0 * kxy.sum() / (n * m))


# --- population MMD^2 for Gaussians and Gaussian mixtures ---------------------

def expected_kernel(spec: KernelSpec, mean1: float, var1: float, mean2: float, var2: float) -> float:
    """E k(x, y) for independent x ~ N(mean1, var1), y ~ N(mean2, var2)."""
    if spec.family == "constant":
        return spec.value
    d = mean1 - mean2
    if spec.family == "gaussian":
        s2 = spec.bandwidth ** 2
        tot = s2 + var1 + var2
        return math.sqrt(s2 / tot) * math.exp(-d * d / (2.0 * tot))
    # x - y ~ N(d, v); E exp(-|D|/b) split at D = 0
    v = var1 + var2
    b = spec.bandwidth
    sd = math.sqrt(v)
    c = math.exp(v / (2.0 * b * b))
    return c * (math.exp(-d / b) * ndtr(d / sd - sd / b) + math.exp(d / b) * ndtr(-d / sd - sd / b))


def mmd2_mixtures(p: Sequence, q: Sequence, spec: KernelSpec) -> float:
    """Population MMD^2 between Gaussian mixtures given as ``[(weight, mean, var), ...]``."""

    def cross(a, b):
        return sum(wa * wb * expected_kernel(spec, ma, va, mb, vb) for wa, ma, va in a for wb, mb, vb in b)

    return max(0.0, cross(p, p) - 2.0 * cross(p, q) + cross(q, q))


def mmd2_gaussian_pair(mean_p: float, var_p: float, mean_q: float, var_q: float, sigma: float) -> float:
    """Population MMD^2 between N(mean_p, var_p) and N(mean_q, var_q) under a Gaussian kernel."""
    if var_p <= 0 or var_q <= 0 or sigma <= 0:
        raise ConfigurationError("variances and sigma must be positive")
    spec = KernelSpec("gaussian", sigma)
    return mmd2_mixtures([(1.0, mean_p, var_p)], [(1.0, mean_q, var_q)], spec)


# --- Gram cache ---------------------------------------------------------------

@dataclass(frozen=True)
class GramCache:
    gram: np.ndarray
    row_sums: np.ndarray
    diag_prefix: np.ndarray  # length N+1, diag_prefix[i] = sum_{j<i} gram[j, j]
    row_prefix: np.ndarray  # length N+1, row_prefix[i] = sum_{j<i} row_sums[j]
    total: float
    prefix2d: Optional[np.ndarray] = field(default=None, repr=False)  # (N+1, N+1)

    @property
    def size(self) -> int:
        return self.row_sums.size

    @property
    def trace(self) -> float:
        return float(self.diag_prefix[-1])


def build_gram_cache(samples: SampleField | np.ndarray, spec: KernelSpec, with_prefix2d: bool = True,
                     max_prefix_nodes: int = MAX_PREFIX_NODES) -> GramCache:
    values = samples.values if isinstance(samples, SampleField) else np.asarray(samples, dtype=float).ravel()
    N = values.size
    if N > MAX_GRAM_NODES:
        raise ResourceError(f"{N} nodes exceeds the Gram-matrix cap of {MAX_GRAM_NODES}")
    if with_prefix2d and N > max_prefix_nodes:
        raise ResourceError(f"{N} nodes exceeds the 2-D prefix table cap of {max_prefix_nodes}")
    gram = kernel_matrix(spec, values)
    row_sums = gram.sum(axis=1)
    diag_prefix = np.concatenate(([0.0], np.cumsum(np.diag(gram))))
    row_prefix = np.concatenate(([0.0], np.cumsum(row_sums)))
    prefix2d = None
    if with_prefix2d:
        prefix2d = np.zeros((N + 1, N + 1))
        np.cumsum(gram, axis=0, out=prefix2d[1:, 1:])
        np.cumsum(prefix2d[1:, 1:], axis=1, out=prefix2d[1:, 1:])
    for a in (gram, row_sums, diag_prefix, row_prefix) + ((prefix2d,) if prefix2d is not None else ()):
        a.setflags(write=False)
    return GramCache(gram, row_sums, diag_prefix, row_prefix, float(row_prefix[-1]), prefix2d)


def _split_stat(cache: GramCache, a, s_in, diag_in, rows_in):
    """MMD_u^2 from the inside-block sum, inside diagonal sum and inside row-sum total."""
    N = cache.size
    b = N - a
    s_cross = rows_in - s_in
    s_out = cache.total - 2.0 * rows_in + s_in
    diag_out = cache.trace - diag_in
    return ((s_in - diag_in) / (a * (a - 1.0))
            + (s_out - diag_out) / (b * (b - 1.0))
            - 2.0 * s_cross / (a * b))


def _virtual(cache: GramCache, i):
    # index i on the doubled sequence 0..2N splits into i = q*N + r
    N = cache.size
    q, r = np.divmod(i, N)
    return q, r


def interval_stats(cache: GramCache, starts, lengths) -> np.ndarray:
    """Vectorized MMD_u^2 for contiguous (possibly wrapping) intervals.

    Intervals are read on the doubled node sequence, so ``start + length``
    may run past N for ring intervals; the 2N x 2N table is never formed.
    """
    if cache.prefix2d is None:
        raise ConfigurationError("interval queries need a cache built with with_prefix2d=True")
    starts = np.asarray(starts, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.int64)
    N = cache.size
    if np.any(lengths < 2) or np.any(N - lengths < 2):
        raise InsufficientSamplesError("every interval and its complement need at least 2 nodes")
    ends = starts + lengths
    P, T, Rp, Dp = cache.prefix2d, cache.total, cache.row_prefix, cache.diag_prefix
    qs, rs = _virtual(cache, starts)
    qe, re = _virtual(cache, ends)

    def pv(qi, ri, qj, rj):
        return qi * qj * T + qi * Rp[rj] + qj * Rp[ri] + P[ri, rj]

    s_in = pv(qe, re, qe, re) - pv(qs, rs, qe, re) - pv(qe, re, qs, rs) + pv(qs, rs, qs, rs)
    rows_in = (qe - qs) * T + Rp[re] - Rp[rs]
    diag_in = (qe - qs) * cache.trace + Dp[re] - Dp[rs]
    return _split_stat(cache, lengths.astype(float), s_in, diag_in, rows_in)


def membership_stats(cache: GramCache, members: np.ndarray) -> np.ndarray:
    """MMD_u^2 for each row of a 0/1 membership matrix (candidates x nodes)."""
    M = np.asarray(members, dtype=float)
    a = M.sum(axis=1)
    N = cache.size
    if np.any(a < 2) or np.any(N - a < 2):
        raise InsufficientSamplesError("every candidate and its complement need at least 2 nodes")
    s_in = np.einsum("cj,cj->c", M @ cache.gram, M)
    rows_in = M @ cache.row_sums
    diag_in = M @ np.diag(cache.gram)
    return _split_stat(cache, a, s_in, diag_in, rows_in)


def subset_mmd_u2(cache: GramCache, inside: NodeSet) -> float:
    """MMD_u^2 between the nodes in ``inside`` and all other nodes.

    Contiguous and modular ranges use O(1) prefix-sum lookups; explicit index
    lists sum their inside block directly.
    """
    N = cache.size
    if isinstance(inside, range) and inside.step == 1 and cache.prefix2d is not None:
        return float(interval_stats(cache, [inside.start], [len(inside)])[0])
    if isinstance(inside, ModularRange) and cache.prefix2d is not None:
        if inside.modulus != N:
            raise ConfigurationError(f"modular range over {inside.modulus} nodes used with a {N}-node cache")
        return float(interval_stats(cache, [inside.start % N], [inside.length])[0])
    idx = node_indices(inside)
    a = idx.size
    if a < 2 or N - a < 2:
        raise InsufficientSamplesError(f"split {a}/{N - a} leaves fewer than 2 nodes on one side")
    if np.unique(idx).size != a:
        raise ConfigurationError("inside node set has repeated indices")
    s_in = cache.gram[np.ix_(idx, idx)].sum()
    rows_in = cache.row_sums[idx].sum()
    diag_in = np.diag(cache.gram)[idx].sum()
    return float(_split_stat(cache, float(a), s_in, diag_in, rows_in))


def complement(inside: NodeSet, N: int) -> np.ndarray:
    mask = np.ones(N, dtype=bool)
    mask[node_indices(inside)] = False
    return np.flatnonzero(mask)
