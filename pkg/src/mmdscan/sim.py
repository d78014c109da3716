"""Monte-Carlo estimation of the minimax risk, plus t-test and Smirnov scan baselines.

Every random field comes from its own Philox stream keyed by
``(seed, stream, trial, *candidate)``, so a given trial of a given hypothesis
is the same field no matter which grid point, worker or call order asks for
it.  Risk grids exploit this: one field is scanned once over the union of all
grid bounds, and each grid point reduces the per-size maxima over its own
size range.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats as sps

from .errors import ConfigurationError, ResourceError
from .geometry import (
    Candidate, Disk, Geometry, LineInterval, Rectangle, RingInterval, SizeBounds, candidate_nodes,
    canonical_candidate, count_candidates, node_indices,
)
from .kernels import KernelSpec
from .mmd import SampleField, build_gram_cache, mmd2_mixtures
from .scan import H0, H1, CandidatePlan, decide
from .theory import threshold_known, threshold_unknown

log = logging.getLogger(__name__)

STREAM_H0, STREAM_H1, STREAM_PLACE, STREAM_CALIBRATE = 0, 1, 2, 3
PLACEMENTS = ("worst_case", "random_uniform", "exhaustive")
DETECTORS = ("mmd", "ttest", "smirnov")
THRESHOLD_RULES = ("fixed", "known_mmd", "vanishing", "null_quantile")
Z95 = 1.959963984540054


# --- distributions ------------------------------------------------------------

@dataclass(frozen=True)
class DistSpec:
    """A Gaussian or a finite Gaussian mixture, as ``((weight, mean, var), ...)``."""

    components: tuple

    def __post_init__(self):
        comps = tuple((float(w), float(m), float(v)) for w, m, v in self.components)
        if not comps:
            raise ConfigurationError("distribution needs at least one component")
        if any(v <= 0 for _, _, v in comps):
            raise ConfigurationError("component variances must be positive")
        if any(w <= 0 for w, _, _ in comps):
            raise ConfigurationError("mixture weights must be positive")
        if abs(sum(w for w, _, _ in comps) - 1.0) > 1e-12:
            raise ConfigurationError("mixture weights must sum to 1")
        object.__setattr__(self, "components", comps)

    @classmethod
    def gaussian(cls, mean: float, var: float) -> "DistSpec":
        return cls(((1.0, mean, var),))

    @classmethod
    def mixture(cls, components) -> "DistSpec":
        return cls(tuple(components))

    @property
    def is_gaussian(self) -> bool:
        return len(self.components) == 1

    @property
    def mean(self) -> float:
        return sum(w * m for w, m, _ in self.components)

    @property
    def var(self) -> float:
        mu = self.mean
        return sum(w * (v + (m - mu) ** 2) for w, m, v in self.components)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.is_gaussian:
            _, m, v = self.components[0]
            return rng.normal(m, math.sqrt(v), size)
        w = np.array([c[0] for c in self.components])
        means = np.array([c[1] for c in self.components])
        sds = np.sqrt([c[2] for c in self.components])
        pick = rng.choice(len(w), size=size, p=w)
        return rng.normal(means[pick], sds[pick])

    def to_dict(self) -> dict:
        if self.is_gaussian:
            _, m, v = self.components[0]
            return {"family": "gaussian", "mean": m, "var": v}
        return {"family": "mixture", "components": [list(c) for c in self.components]}

    @classmethod
    def from_dict(cls, d: dict) -> "DistSpec":
        fam = str(d.get("family", "gaussian")).lower()
        if fam == "gaussian":
            return cls.gaussian(float(d.get("mean", 0.0)), float(d.get("var", 1.0)))
        if fam == "mixture":
            return cls.mixture(d["components"])
        raise ConfigurationError(f"unknown distribution family {fam!r}")


@dataclass(frozen=True)
class ThresholdRule:
    """How the scan threshold is chosen.

    ``fixed`` uses ``value`` as t; ``known_mmd`` uses (1 - value) MMD^2[p, q];
    ``vanishing`` uses value / log log N; ``null_quantile`` uses the empirical
    (1 - value) quantile of the null maximum statistic from an independent set
    of calibration fields.
    """

    rule: str = "known_mmd"
    value: float = 0.5

    def __post_init__(self):
        if self.rule not in THRESHOLD_RULES:
            raise ConfigurationError(f"unknown threshold rule {self.rule!r}; expected one of {THRESHOLD_RULES}")
        if not math.isfinite(self.value):
            raise ConfigurationError("threshold parameter must be finite")
        if self.rule in ("known_mmd", "null_quantile") and not 0 < self.value < 1:
            raise ConfigurationError(f"{self.rule} parameter must lie in (0, 1), got {self.value}")
        if self.rule == "vanishing" and self.value <= 0:
            raise ConfigurationError("vanishing-threshold constant must be positive")

    def label(self) -> str:
        key = {"fixed": "t", "known_mmd": "delta", "vanishing": "c", "null_quantile": "alpha"}[self.rule]
        return f"{self.rule}({key}={self.value!r})"

    def to_dict(self) -> dict:
        return {"rule": self.rule, "value": self.value}

    @classmethod
    def from_dict(cls, d: dict) -> "ThresholdRule":
        return cls(str(d.get("rule", "known_mmd")), float(d.get("value", 0.5)))


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: Geometry
    bounds: SizeBounds
    kernel: KernelSpec = field(default_factory=KernelSpec)
    p: DistSpec = field(default_factory=lambda: DistSpec.gaussian(0.0, 1.0))
    q: DistSpec = field(default_factory=lambda: DistSpec.gaussian(1.0, 1.0))
    threshold: ThresholdRule = field(default_factory=ThresholdRule)
    trials: int = 500
    seed: int = 0
    placement: str = "worst_case"
    detector: str = "mmd"
    level: float = 0.05  # family-wise level of the baseline scans
    calibration_trials: int = 1000
    exhaustive_budget: int = 2000
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        if self.placement not in PLACEMENTS:
            raise ConfigurationError(f"unknown placement {self.placement!r}; expected one of {PLACEMENTS}")
        if self.detector not in DETECTORS:
            raise ConfigurationError(f"unknown detector {self.detector!r}; expected one of {DETECTORS}")
        if not 0 < self.level < 1:
            raise ConfigurationError("baseline level must lie in (0, 1)")
        self.bounds.check(self.geometry)

    def to_dict(self) -> dict:
        return {
            "geometry": {**self.geometry.to_dict(), "min_size": self.bounds.min_size,
                         "max_size": self.bounds.max_size},
            "kernel": self.kernel.to_dict(),
            "p": self.p.to_dict(),
            "q": self.q.to_dict(),
            "threshold": self.threshold.to_dict(),
            "trials": self.trials,
            "seed": self.seed,
            "placement": self.placement,
            "detector": self.detector,
            "level": self.level,
            "calibration_trials": self.calibration_trials,
            "exhaustive_budget": self.exhaustive_budget,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        g = d["geometry"]
        kw = {}
        for key in ("trials", "seed", "calibration_trials", "exhaustive_budget", "workers"):
            if key in d:
                kw[key] = int(d[key])
        for key in ("placement", "detector"):
            if key in d:
                kw[key] = str(d[key]).lower()
        if "level" in d:
            kw["level"] = float(d["level"])
        return cls(
            geometry=Geometry.from_dict(g),
            bounds=SizeBounds(int(g["min_size"]), int(g["max_size"])),
            kernel=KernelSpec.from_dict(d.get("kernel", {})),
            p=DistSpec.from_dict(d.get("p", {"family": "gaussian", "mean": 0, "var": 1})),
            q=DistSpec.from_dict(d.get("q", {"family": "gaussian", "mean": 1, "var": 1})),
            threshold=ThresholdRule.from_dict(d.get("threshold", {})),
            **kw,
        )


def load_config(path) -> Tuple[ExperimentConfig, dict]:
    """Read a JSON experiment file; returns the config and the raw document (for grid/extra keys)."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"{path}: cannot open: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    try:
        return ExperimentConfig.from_dict(doc), doc
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"{path}: missing or malformed field: {exc}") from None


# --- random fields ------------------------------------------------------------

def candidate_key(c: Optional[Candidate]) -> tuple:
    if c is None:
        return ()
    if isinstance(c, (LineInterval, RingInterval)):
        return (c.start, c.length)
    if isinstance(c, Disk):
        return (c.row, c.col, c.radius)
    return tuple(v for iv in c.intervals for v in iv)


def stream(seed: int, kind: int, trial: int, *key: int) -> np.random.Generator:
    """Counter-based generator for one (seed, stream kind, trial, key) tuple."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, kind, trial, *key])))


def sample_field(config: ExperimentConfig, hypothesis: str = H0, candidate: Optional[Candidate] = None,
                 *, trial: int = 0, rng: Optional[np.random.Generator] = None) -> SampleField:
    """Draw one field: all nodes from p under H0; nodes of ``candidate`` from q under H1."""
    geom = config.geometry
    if hypothesis == H1 and candidate is None:
        raise ConfigurationError("an H1 field needs the anomalous candidate")
    if rng is None:
        kind = STREAM_H0 if hypothesis == H0 else STREAM_H1
        rng = stream(config.seed, kind, trial, *candidate_key(candidate if hypothesis == H1 else None))
    values = config.p.sample(rng, geom.node_count)
    if hypothesis == H1:
        inside = node_indices(candidate_nodes(candidate, geom))
        values[inside] = config.q.sample(rng, inside.size)
    return SampleField(values, geom)


# --- confidence intervals -----------------------------------------------------

def wilson_interval(successes: int, n: int, z: float = Z95) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def wilson_half_width(successes: int, n: int) -> float:
    lo, hi = wilson_interval(successes, n)
    return (hi - lo) / 2.0


@dataclass(frozen=True)
class RiskEstimate:
    """Monte-Carlo minimax-risk estimate.

    ``type2_worst`` is the worst miss rate over the placements tried; under
    ``random_uniform`` placement it is the average miss rate instead, and
    ``placement`` says which.  Half-widths are 95% Wilson half-widths.
    """

    type1: float
    type2_worst: float
    hw1: float
    hw2: float
    trials_used: int
    type2_trials: int
    threshold: float
    placement: str = "worst_case"
    worst_candidate: Optional[Candidate] = None

    @property
    def risk(self) -> float:
        return self.type1 + self.type2_worst

    @property
    def half_width(self) -> Tuple[float, float]:
        return self.hw1, self.hw2

    @property
    def normalized_risk(self) -> float:
        return self.risk / 2.0


# --- baselines ----------------------------------------------------------------

def _group_moments(values: np.ndarray, M: np.ndarray):
    a = M.sum(axis=1)
    b = values.size - a
    s1, s2 = M @ values, M @ (values * values)
    t1, t2 = values.sum(), float(values @ values)
    m_in, m_out = s1 / a, (t1 - s1) / b
    v_in = np.maximum(s2 - a * m_in * m_in, 0.0) / (a - 1)
    v_out = np.maximum((t2 - s2) - b * m_out * m_out, 0.0) / (b - 1)
    return a, b, m_in, m_out, v_in, v_out


def welch_pvalues(values: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Two-sided Welch t-test p-value for each candidate row of ``M`` against its complement."""
    a, b, m_in, m_out, v_in, v_out = _group_moments(values, M)
    se2 = v_in / a + v_out / b
    diff = m_in - m_out
    scale = np.maximum(np.abs(m_in), np.abs(m_out)) + 1.0
    flat = se2 <= (1e-14 * scale) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        tstat = diff / np.sqrt(se2)
        df = se2 ** 2 / ((v_in / a) ** 2 / (a - 1) + (v_out / b) ** 2 / (b - 1))
        p = 2.0 * sps.t.sf(np.abs(tstat), df)
    # zero spread on both sides: equal means are indistinguishable, unequal ones certain
    p = np.where(flat, np.where(np.abs(diff) <= 1e-12 * scale, 1.0, 0.0), p)
    return p


def smirnov_statistics(values: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Two-sample Kolmogorov-Smirnov distance D for each candidate row of ``M``."""
    order = np.argsort(values, kind="stable")
    xs = values[order]
    Ms = M[:, order]
    a = Ms.sum(axis=1)
    b = values.size - a
    cin = np.cumsum(Ms, axis=1) / a[:, None]
    cout = np.cumsum(1.0 - Ms, axis=1) / b[:, None]
    # ECDFs only jump at the end of each run of tied values
    ends = np.append(xs[1:] != xs[:-1], True)
    return np.abs(cin[:, ends] - cout[:, ends]).max(axis=1)


def smirnov_sf(D, a, b) -> np.ndarray:
    """``kstwo`` tail probability with effective sample size ab/(a+b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return sps.kstwo.sf(D, np.round(a * b / (a + b)))


def smirnov_pvalues(values: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Two-sample Kolmogorov-Smirnov p-values (``kstwo`` approximation with n = ab/(a+b))."""
    a = M.sum(axis=1)
    return smirnov_sf(smirnov_statistics(values, M), a, values.size - a)


def _baseline_pvalues(kind: str, values: np.ndarray, M: np.ndarray) -> np.ndarray:
    return welch_pvalues(values, M) if kind == "ttest" else smirnov_pvalues(values, M)


@dataclass
class BaselineResult:
    decision: str
    min_pvalue: float
    critical: float
    n_tested: int
    n_skipped: int


def baseline_scan(kind: str, field, geom: Geometry, bounds: SizeBounds, level: float = 0.05) -> BaselineResult:
    """Bonferroni-corrected scan of a per-candidate two-sample test.

    Candidates with fewer than two nodes inside or outside are skipped and
    counted; H1 iff some candidate's p-value falls below level / (tested count).
    """
    if kind not in ("ttest", "smirnov"):
        raise ConfigurationError(f"unknown baseline {kind!r}")
    values = field.values if isinstance(field, SampleField) else np.asarray(field, dtype=float).ravel()
    total = count_candidates(geom, bounds)
    plan = CandidatePlan(geom, bounds, strict=False)
    skipped = total - len(plan)
    if skipped:
        log.warning("%s scan skipped %d candidates with fewer than 2 samples on a side", kind, skipped)
    p = _baseline_pvalues(kind, values, plan.member_matrix())
    crit = level / len(plan)
    pmin = float(p.min())
    return BaselineResult(H1 if pmin < crit else H0, pmin, crit, len(plan), skipped)


def ttest_scan(field, geom: Geometry, bounds: SizeBounds, level: float = 0.05) -> str:
    return baseline_scan("ttest", field, geom, bounds, level).decision


def smirnov_scan(field, geom: Geometry, bounds: SizeBounds, level: float = 0.05) -> str:
    return baseline_scan("smirnov", field, geom, bounds, level).decision


# --- risk estimation ----------------------------------------------------------

class _Profiler:
    """Per-size summary of one field over a shared candidate plan.

    For the MMD detector the summary is the largest statistic of each size;
    for baselines it is the smallest p-value of each size.
    """

    def __init__(self, config: ExperimentConfig, plan: CandidatePlan):
        self.config = config
        self.plan = plan
        self._members = plan.member_matrix() if config.detector != "mmd" else None

    def __call__(self, values: np.ndarray) -> np.ndarray:
        if self.config.detector == "mmd":
            cache = build_gram_cache(values, self.config.kernel, with_prefix2d=self.plan.uses_prefix)
            return self.plan.size_maxima(self.plan.stats(cache))
        if self.config.detector == "smirnov":
            # the p-value falls as D grows for a fixed size, so only the largest D per size matters
            dmax = np.maximum.reduceat(smirnov_statistics(values, self._members), self.plan.group_starts)
            sizes = self.plan.group_sizes
            return smirnov_sf(dmax, sizes, values.size - sizes)
        p = welch_pvalues(values, self._members)
        return np.minimum.reduceat(p, self.plan.group_starts)


def _profiles_chunk(args):
    config, union, kind, cand, trials = args
    prof = _Profiler(config, CandidatePlan(config.geometry, union, strict=False))
    return _run_trials(config, prof, kind, cand, trials)


def _run_trials(config, prof, kind, cand, trials):
    out = []
    for trial in trials:
        if kind == STREAM_H0:
            f = sample_field(config, H0, trial=trial)
        elif kind == STREAM_CALIBRATE:
            f = sample_field(config, H0, rng=stream(config.seed, STREAM_CALIBRATE, trial))
        else:
            f = sample_field(config, H1, cand, trial=trial)
        out.append(prof(f.values))
    return np.array(out)


@dataclass
class _Point:
    bounds: SizeBounds  # after clipping to valid splits
    requested: SizeBounds
    groups: slice
    n_candidates: int
    threshold: float = float("nan")
    truths: List[Candidate] = field(default_factory=list)


class RiskGrid:
    """Risk estimates for several (min_size, max_size) pairs sharing one configuration.

    Pairs come either as the product ``min_sizes x max_sizes`` (row-major) or
    as an explicit ``pairs`` list.
    """

    def __init__(self, config: ExperimentConfig, min_sizes: Sequence[int] = (), max_sizes: Sequence[int] = (),
                 pairs: Optional[Sequence[Tuple[int, int]]] = None):
        self.config = config
        geom = config.geometry
        if pairs is None:
            pairs = [(a, b) for a in min_sizes for b in max_sizes]
        if not pairs:
            raise ConfigurationError("risk grid needs at least one (min_size, max_size) pair")
        requested = [SizeBounds(int(a), int(b)) for a, b in pairs]
        for rb in requested:
            rb.check(geom)
        self.union = SizeBounds(min(b.min_size for b in requested),
                                max(b.max_size for b in requested)).clip_for_split(geom)
        self.plan = CandidatePlan(geom, self.union, strict=False)
        self.profiler = _Profiler(config, self.plan)
        self._cache: Dict[tuple, np.ndarray] = {}
        gsizes = self.plan.group_sizes
        counts = np.diff(np.append(self.plan.group_starts, len(self.plan)))
        self.points: List[_Point] = []
        for rb in requested:
            cb = rb.clip_for_split(geom)
            lo = int(np.searchsorted(gsizes, cb.min_size, side="left"))
            hi = int(np.searchsorted(gsizes, cb.max_size, side="right"))
            if lo >= hi:
                raise ConfigurationError(f"empty candidate set for sizes [{rb.min_size}, {rb.max_size}]")
            self.points.append(_Point(cb, rb, slice(lo, hi), int(counts[lo:hi].sum())))

    # profiles are cached per (stream, candidate) so grid points share fields
    def _profiles(self, kind: int, cand: Optional[Candidate], n_trials: int) -> np.ndarray:
        key = (kind, candidate_key(cand), n_trials)
        if key not in self._cache:
            trials = range(n_trials)
            workers = max(1, self.config.workers)
            if workers == 1:
                arr = _run_trials(self.config, self.profiler, kind, cand, trials)
            else:
                chunks = [list(trials)[i::workers] for i in range(workers)]
                with ProcessPoolExecutor(workers) as ex:
                    parts = list(ex.map(_profiles_chunk,
                                        [(self.config, self.union, kind, cand, ch) for ch in chunks]))
                arr = np.empty((n_trials, len(self.plan.group_sizes)))
                for ch, part in zip(chunks, parts):
                    arr[ch] = part
            self._cache[key] = arr
        return self._cache[key]

    def _reduce(self, prof: np.ndarray, pt: _Point) -> np.ndarray:
        block = prof[..., pt.groups]
        return block.max(axis=-1) if self.config.detector == "mmd" else block.min(axis=-1)

    def _rejects(self, summary: np.ndarray, pt: _Point) -> np.ndarray:
        if self.config.detector == "mmd":
            return summary >= pt.threshold
        return summary < pt.threshold

    def _threshold(self, pt: _Point) -> float:
        cfg = self.config
        if cfg.detector != "mmd":
            return cfg.level / pt.n_candidates
        rule = cfg.threshold
        if rule.rule == "fixed":
            return rule.value
        if rule.rule == "known_mmd":
            return threshold_known(population_mmd2(cfg), rule.value)
        if rule.rule == "vanishing":
            return threshold_unknown(cfg.geometry.node_count, rule.value)
        null = self._reduce(self._profiles(STREAM_CALIBRATE, None, cfg.calibration_trials), pt)
        return float(np.quantile(null, 1.0 - rule.value, method="higher"))

    def _worst_size(self, pt: _Point) -> int:
        gs = self.plan.group_sizes[pt.groups]
        N = self.config.geometry.node_count
        lo, hi = int(gs[0]), int(gs[-1])
        return lo if lo * (N - lo) <= hi * (N - hi) else hi

    def estimates(self) -> List[Tuple[SizeBounds, RiskEstimate]]:
        cfg = self.config
        out = []
        for pt in self.points:
            pt.threshold = self._threshold(pt)
            h0 = self._rejects(self._reduce(self._profiles(STREAM_H0, None, cfg.trials), pt), pt)
            k1 = int(h0.sum())
            worst_cand, k2, n2 = self._type2(pt)
            out.append((pt.requested, RiskEstimate(
                type1=k1 / cfg.trials, type2_worst=k2 / n2,
                hw1=wilson_half_width(k1, cfg.trials), hw2=wilson_half_width(k2, n2),
                trials_used=cfg.trials, type2_trials=n2, threshold=pt.threshold,
                placement=cfg.placement, worst_candidate=worst_cand)))
        return out

    def _type2(self, pt: _Point):
        cfg = self.config
        geom = cfg.geometry
        if cfg.placement == "worst_case":
            cand = canonical_candidate(geom, self._worst_size(pt))
            miss = ~self._rejects(self._reduce(self._profiles(STREAM_H1, cand, cfg.trials), pt), pt)
            return cand, int(miss.sum()), cfg.trials
        lo_g, hi_g = pt.groups.start, pt.groups.stop
        first = int(self.plan.group_starts[lo_g])
        last = int(self.plan.group_starts[hi_g]) if hi_g < len(self.plan.group_starts) else len(self.plan)
        cands = self.plan.candidates[first:last]
        if cfg.placement == "exhaustive":
            if len(cands) > cfg.exhaustive_budget:
                raise ResourceError(
                    f"exhaustive placement needs {len(cands)} x {cfg.trials} H1 fields, over the budget of "
                    f"{cfg.exhaustive_budget} candidates; use worst_case placement")
            worst = (None, -1)
            for c in cands:
                miss = int((~self._rejects(self._reduce(self._profiles(STREAM_H1, c, cfg.trials), pt), pt)).sum())
                if miss > worst[1]:
                    worst = (c, miss)
            return worst[0], worst[1], cfg.trials
        # random_uniform: average miss rate, one fresh placement per trial
        misses = 0
        for trial in range(cfg.trials):
            rng = stream(cfg.seed, STREAM_PLACE, trial, pt.requested.min_size, pt.requested.max_size)
            c = cands[int(rng.integers(len(cands)))]
            f = sample_field(cfg, H1, c, trial=trial)
            summary = self._reduce(self.profiler(f.values), pt)
            misses += int(not self._rejects(np.asarray(summary), pt))
        return None, misses, cfg.trials


def population_mmd2(config: ExperimentConfig) -> float:
    return mmd2_mixtures(config.p.components, config.q.components, config.kernel)


def estimate_risk(config: ExperimentConfig) -> RiskEstimate:
    """Type I error, worst-case type II error and their sum for one configuration."""
    b = config.bounds
    return RiskGrid(config, [b.min_size], [b.max_size]).estimates()[0][1]


def risk_grid(config: ExperimentConfig, min_sizes: Sequence[int], max_sizes: Sequence[int]):
    """Estimates for every (min_size, max_size) pair, row-major over ``min_sizes``."""
    return RiskGrid(config, min_sizes, max_sizes).estimates()


# --- result rows --------------------------------------------------------------

RESULT_COLUMNS = ("geometry", "n", "min_size", "max_size", "threshold_rule", "t", "trials",
                  "type1", "type2_worst", "risk", "hw1", "hw2", "seed")


def result_row(config: ExperimentConfig, bounds: SizeBounds, est: RiskEstimate) -> dict:
    rule = config.threshold.label() if config.detector == "mmd" else f"{config.detector}(level={config.level!r})"
    return {
        "geometry": config.geometry.kind if config.geometry.kind != "lattice" else f"lattice{config.geometry.r}",
        "n": config.geometry.n,
        "min_size": bounds.min_size,
        "max_size": bounds.max_size,
        "threshold_rule": rule,
        "t": est.threshold,
        "trials": est.trials_used,
        "type1": est.type1,
        "type2_worst": est.type2_worst,
        "risk": est.risk,
        "hw1": est.hw1,
        "hw2": est.hw2,
        "seed": config.seed,
    }


def with_detector(config: ExperimentConfig, detector: str) -> ExperimentConfig:
    return replace(config, detector=detector)
