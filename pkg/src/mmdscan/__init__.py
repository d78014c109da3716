"""Kernel MMD scan statistics for detecting anomalous intervals, disks and rectangles in networks."""

__version__ = "0.1.0"

from .errors import ConfigurationError, DomainError, InsufficientSamplesError, MMDScanError, ResourceError
from .geometry import Geometry, SizeBounds, candidate_nodes, count_candidates, enumerate_candidates
from .kernels import KernelSpec, kernel_eval
from .mmd import GramCache, SampleField, build_gram_cache, mmd2_gaussian_pair, mmd_u2, subset_mmd_u2
from .scan import ScanResult, scan, scan_all_stats

__all__ = [
    "ConfigurationError", "DomainError", "InsufficientSamplesError", "MMDScanError", "ResourceError",
    "Geometry", "SizeBounds", "candidate_nodes", "count_candidates", "enumerate_candidates",
    "KernelSpec", "kernel_eval",
    "GramCache", "SampleField", "build_gram_cache", "mmd2_gaussian_pair", "mmd_u2", "subset_mmd_u2",
    "ScanResult", "scan", "scan_all_stats",
]
