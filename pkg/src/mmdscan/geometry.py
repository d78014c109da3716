"""Network geometries and their candidate anomalous structures.

Node indexing: line and ring nodes are ``0..n-1``; lattices are flattened
row-major, so node ``(i, j)`` of a 2-D lattice is ``i * n + j`` and a point of
an r-D lattice is its mixed-radix number with the first coordinate most
significant.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import ConfigurationError

KINDS = ("line", "ring", "lattice2d", "lattice")


@dataclass(frozen=True)
class Geometry:
    """Network shape.

    ``lattice2d`` carries disks as candidates, ``lattice`` (any dimension
    ``r``) carries axis-aligned rectangles.
    """

    kind: str
    n: int
    r: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown geometry kind {self.kind!r}; expected one of {KINDS}")
        if int(self.n) != self.n or self.n < 2:
            raise ConfigurationError(f"geometry needs integer n >= 2, got {self.n}")
        if int(self.r) != self.r or self.r < 1:
            raise ConfigurationError(f"lattice dimension must be an integer >= 1, got {self.r}")
        if self.kind in ("line", "ring") and self.r != 1:
            raise ConfigurationError(f"{self.kind} geometry is one-dimensional (r=1)")
        if self.kind == "lattice2d" and self.r != 2:
            object.__setattr__(self, "r", 2)

    @property
    def node_count(self) -> int:
        return self.n ** self.r

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.r

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "n": self.n}
        if self.kind == "lattice":
            d["r"] = self.r
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Geometry":
        kind = str(d["kind"]).lower()
        r = int(d.get("r", 2 if kind == "lattice2d" else 1))
        return cls(kind, int(d["n"]), r)


def line(n: int) -> Geometry:
    return Geometry("line", n)


def ring(n: int) -> Geometry:
    return Geometry("ring", n)


def lattice2d(n: int) -> Geometry:
    return Geometry("lattice2d", n, 2)


def lattice(n: int, r: int) -> Geometry:
    return Geometry("lattice", n, r)


@dataclass(frozen=True)
class SizeBounds:
    min_size: int
    max_size: int

    def __post_init__(self):
        if self.min_size < 1 or self.max_size < self.min_size:
            raise ConfigurationError(
                f"size bounds need 1 <= min_size <= max_size, got [{self.min_size}, {self.max_size}]")

    def check(self, geom: Geometry) -> "SizeBounds":
        if self.max_size > geom.node_count - 1:
            raise ConfigurationError(
                f"max_size {self.max_size} exceeds node_count - 1 = {geom.node_count - 1}; "
                "the anomaly may never cover the whole network")
        return self

    def clip_for_split(self, geom: Geometry) -> "SizeBounds":
        """Restrict to sizes leaving at least two nodes on each side of the split."""
        lo, hi = max(self.min_size, 2), min(self.max_size, geom.node_count - 2)
        if lo > hi:
            raise ConfigurationError(
                f"no candidate size in [{self.min_size}, {self.max_size}] leaves >= 2 nodes on both sides "
                f"of a {geom.node_count}-node network")
        return SizeBounds(lo, hi)


# --- candidates ------------------------------------------------------------

@dataclass(frozen=True, order=True)
class LineInterval:
    start: int
    length: int

    @property
    def size(self) -> int:
        return self.length

    def describe(self) -> str:
        return f"interval start={self.start} length={self.length}"


@dataclass(frozen=True, order=True)
class RingInterval:
    start: int
    length: int

    @property
    def size(self) -> int:
        return self.length

    def describe(self) -> str:
        return f"ring-interval start={self.start} length={self.length}"


@dataclass(frozen=True, order=True)
class Disk:
    row: int
    col: int
    radius: int

    @property
    def size(self) -> int:
        return disk_size(self.radius)

    def describe(self) -> str:
        return f"disk center=({self.row},{self.col}) radius={self.radius}"


@dataclass(frozen=True, order=True)
class Rectangle:
    # ((start, length), ...) per dimension
    intervals: tuple

    @property
    def size(self) -> int:
        return math.prod(length for _, length in self.intervals)

    def describe(self) -> str:
        parts = " x ".join(f"[{s},{s + k - 1}]" for s, k in self.intervals)
        return f"rectangle {parts}"


Candidate = Union[LineInterval, RingInterval, Disk, Rectangle]


@dataclass(frozen=True)
class ModularRange:
    """``length`` consecutive ring nodes starting at ``start``, wrapping mod ``modulus``."""

    start: int
    length: int
    modulus: int

    def indices(self) -> np.ndarray:
        return (self.start + np.arange(self.length)) % self.modulus

    def __len__(self):
        return self.length


NodeSet = Union[range, ModularRange, np.ndarray]


def candidate_to_dict(c: Candidate) -> dict:
    if isinstance(c, LineInterval):
        return {"type": "line_interval", "start": c.start, "length": c.length}
    if isinstance(c, RingInterval):
        return {"type": "ring_interval", "start": c.start, "length": c.length}
    if isinstance(c, Disk):
        return {"type": "disk", "row": c.row, "col": c.col, "radius": c.radius}
    return {"type": "rectangle", "intervals": [list(iv) for iv in c.intervals]}


# --- disks -------------------------------------------------------------------

def disk_offsets(radius: int) -> np.ndarray:
    """Integer offsets (di, dj) with di^2 + dj^2 <= radius^2, row-major order."""
    d = np.arange(-radius, radius + 1)
    di, dj = np.meshgrid(d, d, indexing="ij")
    keep = di * di + dj * dj <= radius * radius
    return np.stack([di[keep], dj[keep]], axis=1)


def disk_size(radius: int) -> int:
    """Number of lattice points within Euclidean distance ``radius`` of a node."""
    r2 = radius * radius
    return sum(2 * math.isqrt(r2 - i * i) + 1 for i in range(-radius, radius + 1))


def _disk_radii(geom: Geometry, bounds: SizeBounds) -> list:
    radii = []
    rho = 0
    while 2 * rho + 1 <= geom.n:
        size = disk_size(rho)
        if size > bounds.max_size:
            break
        if size >= bounds.min_size:
            radii.append(rho)
        rho += 1
    return radii


# --- rectangles --------------------------------------------------------------

def _length_tuples(n: int, r: int, lo: int, hi: int):
    """All r-tuples of side lengths in [1, n] whose product lies in [lo, hi]."""
    out = []

    def rec(prefix, prod):
        if len(prefix) == r:
            if prod >= lo:
                out.append(tuple(prefix))
            return
        for k in range(1, n + 1):
            if prod * k > hi:
                break
            rec(prefix + [k], prod * k)

    rec([], 1)
    return out


def _validate(geom: Geometry, bounds: SizeBounds) -> None:
    bounds.check(geom)


def enumerate_candidates(geom: Geometry, bounds: SizeBounds) -> Iterator[Candidate]:
    """Yield every candidate structure once, ordered by size then position."""
    _validate(geom, bounds)
    n = geom.n
    if geom.kind == "line":
        for k in range(bounds.min_size, bounds.max_size + 1):
            for s in range(n - k + 1):
                yield LineInterval(s, k)
    elif geom.kind == "ring":
        for k in range(bounds.min_size, bounds.max_size + 1):
            for s in range(n):
                yield RingInterval(s, k)
    elif geom.kind == "lattice2d":
        # disk sizes strictly increase with the radius, so radius order is size order
        for rho in _disk_radii(geom, bounds):
            for a in range(rho, n - rho):
                for b in range(rho, n - rho):
                    yield Disk(a, b, rho)
    else:
        tuples = _length_tuples(n, geom.r, bounds.min_size, bounds.max_size)
        tuples.sort(key=lambda ls: (math.prod(ls), ls))
        for size, group in itertools.groupby(tuples, key=math.prod):
            rects = []
            for ls in group:
                for starts in itertools.product(*(range(n - k + 1) for k in ls)):
                    rects.append(Rectangle(tuple(zip(starts, ls))))
            rects.sort()
            yield from rects


def count_candidates(geom: Geometry, bounds: SizeBounds) -> int:
    """Number of candidates, computed without enumerating them."""
    _validate(geom, bounds)
    n = geom.n
    lo, hi = bounds.min_size, bounds.max_size
    if geom.kind == "line":
        return sum(n - k + 1 for k in range(lo, min(hi, n) + 1))
    if geom.kind == "ring":
        return n * (min(hi, n) - lo + 1) if lo <= n else 0
    if geom.kind == "lattice2d":
        return sum((n - 2 * rho) ** 2 for rho in _disk_radii(geom, bounds))
    return sum(math.prod(n - k + 1 for k in ls) for ls in _length_tuples(n, geom.r, lo, hi))


def sample_rectangles(geom: Geometry, bounds: SizeBounds, count: int, rng: np.random.Generator) -> list:
    """Draw ``count`` rectangles uniformly (with replacement) from the candidate family.

    For large lattices the full family has O(n^(2r)) members; this picks a
    side-length tuple with probability proportional to its number of
    placements, then a uniform placement.
    """
    if geom.kind != "lattice":
        raise ConfigurationError("sampled mode is only available for rectangle (lattice) geometries")
    _validate(geom, bounds)
    tuples = _length_tuples(geom.n, geom.r, bounds.min_size, bounds.max_size)
    if not tuples:
        raise ConfigurationError("empty candidate set")
    weights = np.array([math.prod(geom.n - k + 1 for k in ls) for ls in tuples], dtype=float)
    picks = rng.choice(len(tuples), size=count, p=weights / weights.sum())
    out = []
    for i in picks:
        ls = tuples[i]
        starts = [int(rng.integers(0, geom.n - k + 1)) for k in ls]
        out.append(Rectangle(tuple(zip(starts, ls))))
    return out


def candidate_nodes(c: Candidate, geom: Geometry) -> NodeSet:
    """Node indices covered by a candidate.

    Line intervals give a ``range``, ring intervals a :class:`ModularRange`,
    disks and rectangles a sorted integer array.
    """
    n = geom.n
    if isinstance(c, LineInterval):
        return range(c.start, c.start + c.length)
    if isinstance(c, RingInterval):
        return ModularRange(c.start, c.length, n)
    if isinstance(c, Disk):
        off = disk_offsets(c.radius)
        return np.sort((c.row + off[:, 0]) * n + (c.col + off[:, 1]))
    grids = np.meshgrid(*(np.arange(s, s + k) for s, k in c.intervals), indexing="ij")
    idx = np.ravel_multi_index(tuple(g.ravel() for g in grids), geom.shape)
    return np.sort(idx)


def node_indices(nodes: NodeSet) -> np.ndarray:
    if isinstance(nodes, range):
        return np.arange(nodes.start, nodes.stop)
    if isinstance(nodes, ModularRange):
        return nodes.indices()
    return np.asarray(nodes, dtype=np.intp)


def candidate_arrays(candidates: Sequence[Candidate]):
    """(starts, lengths) arrays for a sequence of line or ring intervals."""
    starts = np.fromiter((c.start for c in candidates), dtype=np.int64, count=len(candidates))
    lengths = np.fromiter((c.length for c in candidates), dtype=np.int64, count=len(candidates))
    return starts, lengths


def canonical_candidate(geom: Geometry, size: int) -> Candidate:
    """The candidate of a given size used for worst-case placement.

    Intervals start at node 0; disks and rectangles sit at the lattice origin
    corner.  Raises if no candidate has exactly this size.
    """
    if geom.kind == "line":
        return LineInterval(0, size)
    if geom.kind == "ring":
        return RingInterval(0, size)
    if geom.kind == "lattice2d":
        for rho in range(geom.n // 2 + 1):
            if disk_size(rho) == size and 2 * rho + 1 <= geom.n:
                return Disk(rho, rho, rho)
        raise ConfigurationError(f"no disk has exactly {size} nodes in a {geom.n}x{geom.n} lattice")
    ls = _length_tuples(geom.n, geom.r, size, size)
    if not ls:
        raise ConfigurationError(f"no rectangle has exactly {size} nodes")
    # most balanced shape: smallest largest side
    best = min(ls, key=lambda t: (max(t), t))
    return Rectangle(tuple((0, k) for k in best))
