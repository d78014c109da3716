"""The MMD scan test over a family of candidate structures."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError
from .geometry import (
    Candidate, Geometry, SizeBounds, candidate_arrays, candidate_nodes, enumerate_candidates,
    node_indices,
)
from .kernels import KernelSpec
from .mmd import GramCache, SampleField, build_gram_cache, interval_stats, membership_stats

H0 = "H0"
H1 = "H1"

# rows of the membership matrix processed per block for disks and rectangles
_MEMBERSHIP_CHUNK = 2048


@dataclass
class ScanResult:
    max_stat: float
    argmax: Candidate
    decision: str
    threshold: float
    n_candidates: int
    per_candidate: Optional[List[Tuple[Candidate, float]]] = None

    def to_dict(self) -> dict:
        from .geometry import candidate_to_dict

        return {
            "decision": self.decision,
            "max_stat": self.max_stat,
            "threshold": self.threshold,
            "n_candidates": self.n_candidates,
            "argmax": candidate_to_dict(self.argmax),
        }


class CandidatePlan:
    """Candidates of one (geometry, bounds) pair, laid out for batched statistics.

    Building the plan once and reusing it across many fields is what makes the
    Monte-Carlo harness cheap: only the Gram cache changes between trials.
    """

    def __init__(self, geom: Geometry, bounds: SizeBounds, strict: bool = True):
        bounds.check(geom)
        if strict:
            if bounds.min_size < 2 or bounds.max_size > geom.node_count - 2:
                raise ConfigurationError(
                    f"bounds [{bounds.min_size}, {bounds.max_size}] include candidates whose inside or outside "
                    f"has fewer than 2 nodes; unbiased MMD^2 is undefined there (valid sizes are "
                    f"2..{geom.node_count - 2})")
        else:
            bounds = bounds.clip_for_split(geom)
        self.geometry = geom
        self.bounds = bounds
        self.candidates: List[Candidate] = list(enumerate_candidates(geom, bounds))
        if not self.candidates:
            raise ConfigurationError(
                f"empty candidate set for {geom.kind} n={geom.n} with sizes [{bounds.min_size}, {bounds.max_size}]")
        self.sizes = np.fromiter((c.size for c in self.candidates), dtype=np.int64, count=len(self.candidates))
        if geom.kind in ("line", "ring"):
            self.starts, self.lengths = candidate_arrays(self.candidates)
            self._members = None
        else:
            self.starts = self.lengths = None
            self._members = self._membership_blocks()
        # enumeration is size-ordered, so each size occupies one contiguous block
        change = np.flatnonzero(np.diff(self.sizes)) + 1
        self.group_starts = np.concatenate(([0], change))
        self.group_sizes = self.sizes[self.group_starts]

    def __len__(self):
        return len(self.candidates)

    @property
    def uses_prefix(self) -> bool:
        return self._members is None

    def _membership_blocks(self):
        N = self.geometry.node_count
        blocks = []
        for lo in range(0, len(self.candidates), _MEMBERSHIP_CHUNK):
            chunk = self.candidates[lo:lo + _MEMBERSHIP_CHUNK]
            M = np.zeros((len(chunk), N))
            for row, c in enumerate(chunk):
                M[row, node_indices(candidate_nodes(c, self.geometry))] = 1.0
            blocks.append(M)
        return blocks

    def stats(self, cache: GramCache) -> np.ndarray:
        """MMD_u^2 of every candidate, in enumeration order."""
        if cache.size != self.geometry.node_count:
            raise ConfigurationError(
                f"node count mismatch: cache has {cache.size} nodes, geometry expects {self.geometry.node_count}")
        if self._members is None:
            return interval_stats(cache, self.starts, self.lengths)
        return np.concatenate([membership_stats(cache, M) for M in self._members])

    def size_maxima(self, stats: np.ndarray) -> np.ndarray:
        """Largest statistic among candidates of each distinct size (aligned with ``group_sizes``)."""
        return np.maximum.reduceat(stats, self.group_starts)

    def member_matrix(self) -> np.ndarray:
        """0/1 candidate-by-node matrix (built on demand for intervals)."""
        if self._members is not None:
            return np.concatenate(self._members)
        N = self.geometry.node_count
        offsets = np.arange(N)[None, :]
        cols = (self.starts[:, None] + offsets) % N
        inside = offsets < self.lengths[:, None]
        rows = np.broadcast_to(np.arange(len(self))[:, None], cols.shape)
        out = np.zeros((len(self), N))
        out[rows[inside], cols[inside]] = 1.0
        return out


def _cache_for(field: SampleField | np.ndarray, plan: CandidatePlan, spec: KernelSpec) -> GramCache:
    values = field.values if isinstance(field, SampleField) else np.asarray(field, dtype=float).ravel()
    if values.size != plan.geometry.node_count:
        raise ConfigurationError(
            f"node count mismatch: field has {values.size} values, geometry expects {plan.geometry.node_count}")
    return build_gram_cache(values, spec, with_prefix2d=plan.uses_prefix)


def decide(max_stat: float, threshold: float) -> str:
    return H1 if max_stat >= threshold else H0


def scan(field, geom: Geometry, bounds: SizeBounds, spec: KernelSpec, threshold: float, *,
         keep_stats: bool = False, strict: bool = True, plan: CandidatePlan | None = None) -> ScanResult:
    """Maximize subset MMD_u^2 over all candidates and compare with ``threshold``.

    Ties at the maximum go to the first candidate in enumeration order, and a
    maximum equal to the threshold decides H1.  With ``strict=False`` the
    bounds are clipped to sizes that leave two or more nodes on both sides.
    """
    if not math.isfinite(threshold):
        raise ConfigurationError(f"threshold must be finite, got {threshold}")
    plan = plan or CandidatePlan(geom, bounds, strict=strict)
    stats = plan.stats(_cache_for(field, plan, spec))
    i = int(np.argmax(stats))
    max_stat = float(stats[i])
    per = list(zip(plan.candidates, stats.tolist())) if keep_stats else None
    return ScanResult(max_stat, plan.candidates[i], decide(max_stat, threshold), float(threshold), len(plan), per)


def scan_all_stats(field, geom: Geometry, bounds: SizeBounds, spec: KernelSpec, *,
                   strict: bool = True) -> List[Tuple[Candidate, float]]:
    plan = CandidatePlan(geom, bounds, strict=strict)
    stats = plan.stats(_cache_for(field, plan, spec))
    return list(zip(plan.candidates, stats.tolist()))


def naive_scan_stats(values: Sequence[float], geom: Geometry, bounds: SizeBounds, spec: KernelSpec,
                     strict: bool = True) -> np.ndarray:
    """Reference path: recompute mmd_u2 from scratch for every candidate split."""
    from .mmd import complement, mmd_u2

    plan = CandidatePlan(geom, bounds, strict=strict)
    values = np.asarray(values, dtype=float)
    N = values.size
    out = np.empty(len(plan))
    for j, c in enumerate(plan.candidates):
        inside = node_indices(candidate_nodes(c, geom))
        out[j] = mmd_u2(values[inside], values[complement(inside, N)], spec)
    return out
