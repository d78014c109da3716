"""Bounded kernels on scalar samples."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

FAMILIES = ("gaussian", "laplacian", "constant")


@dataclass(frozen=True)
class KernelSpec:
    """A bounded positive-definite kernel.

    ``bandwidth`` is sigma for the Gaussian kernel exp(-(x-y)^2 / (2 sigma^2))
    and the scale for the Laplacian kernel exp(-|x-y| / sigma).  The constant
    kernel ignores it and always returns ``value``.
    """

    family: str = "gaussian"
    bandwidth: float = 1.0
    value: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if self.family != "constant":
            if not np.isfinite(self.bandwidth) or self.bandwidth <= 0:
                raise ConfigurationError(f"kernel bandwidth must be positive, got {self.bandwidth}")
        elif not np.isfinite(self.value) or self.value <= 0:
            raise ConfigurationError(f"constant kernel value must be positive, got {self.value}")

    @property
    def bound(self) -> float:
        """Uniform upper bound K on kernel values."""
        return self.value if self.family == "constant" else 1.0

    def to_dict(self) -> dict:
        d = {"family": self.family, "bandwidth": self.bandwidth}
        if self.family == "constant":
            d["value"] = self.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(family=str(d.get("family", "gaussian")).lower(),
                   bandwidth=float(d.get("bandwidth", 1.0)),
                   value=float(d.get("value", 1.0)))


def gaussian(bandwidth: float = 1.0) -> KernelSpec:
    return KernelSpec("gaussian", bandwidth)


def laplacian(bandwidth: float = 1.0) -> KernelSpec:
    return KernelSpec("laplacian", bandwidth)


def constant(value: float = 1.0) -> KernelSpec:
    return KernelSpec("constant", value=value)


def kernel_eval(spec: KernelSpec, x: float, y: float) -> float:
    """Evaluate ``k(x, y)`` for two scalars."""
    return float(kernel_matrix(spec, np.asarray([x], dtype=float), np.asarray([y], dtype=float))[0, 0])


def kernel_matrix(spec: KernelSpec, x, y=None) -> np.ndarray:
    """Matrix ``K[i, j] = k(x[i], y[j])``; ``y`` defaults to ``x``."""
    x = np.asarray(x, dtype=float).ravel()
    y = x if y is None else np.asarray(y, dtype=float).ravel()
    if spec.family == "constant":
        return np.full((x.size, y.size), spec.value)
    d = np.subtract.outer(x, y)
    if spec.family == "gaussian":
        return np.exp(-(d * d) / (2.0 * spec.bandwidth ** 2))
    return np.exp(-np.abs(d) / spec.bandwidth)
