"""Uniform amplitude quantization with step 1/m.

Cell ``i`` is the half-open interval ``[(i - 1/2)/m, (i + 1/2)/m)``, so
``i = floor(1/2 + m*x)`` and a value on a cell boundary belongs to the
upper cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .pmf import EmpiricalPmf

_INDEX_LIMIT = 2.0**62


@dataclass(frozen=True)
class QuantIndex:
    i: int
    m: float

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("m must be positive")

    @property
    def cell(self) -> tuple:
        return ((self.i - 0.5) / self.m, (self.i + 0.5) / self.m)


def quantize(x: float, m: float) -> QuantIndex:
    if not math.isfinite(x):
        raise ValueError(f"cannot quantize non-finite value {x!r}")
    return QuantIndex(int(quantize_array(np.array([x]), m)[0]), m)


def dequantize(q: QuantIndex) -> float:
    return q.i / q.m


def quantize_array(xs, m: float) -> np.ndarray:
    """Vectorized cell indices as int64."""
    if not m > 0:
        raise ValueError("m must be positive")
    xs = np.asarray(xs, dtype=np.float64)
    f = np.floor(0.5 + m * xs)
    if not np.all(np.isfinite(f)):
        raise ValueError("cannot quantize non-finite values")
    if f.size and np.max(np.abs(f)) >= _INDEX_LIMIT:
        raise OverflowError("quantization index exceeds the int64-safe range")
    return f.astype(np.int64)


def quantize_block(xs, m: float) -> tuple:
    """Indices of a block (order preserved) and their histogram."""
    idx = quantize_array(xs, m)
    return idx, EmpiricalPmf.from_indices(idx)


def _abs_power_antiderivative(x, alpha):
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.abs(x) ** (alpha + 1) / (alpha + 1)


@dataclass(frozen=True)
class StepDensity:
    """Piecewise-constant density ``m * P[i]`` on cells ``lo .. lo+len(probs)-1``."""

    m: float
    lo: int
    probs: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", probs)
        if np.any(probs < 0):
            raise ValueError("cell probabilities must be nonnegative")
        if abs(probs.sum() + self.tail_mass - 1.0) > 1e-12:
            raise ValueError(f"window mass {probs.sum()} + tail {self.tail_mass} != 1")

    @property
    def hi(self) -> int:
        return self.lo + self.probs.size - 1

    def pdf(self, x):
        idx = quantize_array(x, self.m) - self.lo
        inside = (idx >= 0) & (idx < self.probs.size)
        out = np.zeros(np.shape(idx))
        out[inside] = self.m * self.probs[idx[inside]]
        return out

    def integral(self) -> float:
        return float(self.probs.sum() + self.tail_mass)

    def differential_entropy(self) -> float:
        """Exact entropy of the window part, in nats."""
        p = self.probs[self.probs > 0]
        return float(-(p * np.log(self.m * p)).sum())

    def abs_moment(self, alpha: float) -> float:
        """E|X~|^alpha, integrating |x|^alpha exactly over each cell."""
        i = np.arange(self.lo, self.hi + 1, dtype=np.float64)
        left = _abs_power_antiderivative((i - 0.5) / self.m, alpha)
        right = _abs_power_antiderivative((i + 0.5) / self.m, alpha)
        return float((self.probs * self.m * (right - left)).sum())

    def cell_masses(self) -> dict:
        return {self.lo + k: float(p) for k, p in enumerate(self.probs) if p > 0}


PmfLike = Union[EmpiricalPmf, Mapping[int, float]]


def step_density_from_pmf(pmf: PmfLike, m: float) -> StepDensity:
    """The density q(x) = m * P[i] on cell i.

    Exact probability mappings must sum to 1 within 1e-12.
    """
    if isinstance(pmf, EmpiricalPmf):
        if pmf.total == 0:
            raise ValueError("empty pmf")
        idx, probs = pmf.indices, pmf.probabilities()
    else:
        items = sorted((int(k), float(v)) for k, v in dict(pmf).items())
        if not items:
            raise ValueError("empty pmf")
        idx = np.array([k for k, _ in items], dtype=np.int64)
        probs = np.array([v for _, v in items])
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"pmf is not normalized (sums to {probs.sum()!r})")
    lo, hi = int(idx[0]), int(idx[-1])
    if hi - lo > 50_000_000:
        raise ValueError("pmf spans too many cells for a dense step density")
    dense = np.zeros(hi - lo + 1)
    dense[idx - lo] = probs
    return StepDensity(float(m), lo, dense)


def quantize_density(grid, m: float) -> StepDensity:
    """Cell masses of a tabulated density (linear interpolant between nodes)."""
    xs = grid.x
    lo = int(math.floor(0.5 + m * xs[0]))
    hi = int(math.floor(0.5 + m * xs[-1]))
    edges = (np.arange(lo, hi + 2) - 0.5) / m
    cdf = grid.cdf(edges)
    probs = np.clip(np.diff(cdf), 0.0, None)
    window = float(probs.sum())
    probs = probs * ((1.0 - grid.tail_mass) / window) if window > 0 else probs
    return StepDensity(float(m), lo, probs, tail_mass=grid.tail_mass)


def quantized_moment_bounds(alpha: float, m: float, abs_moment: float, tail_prob: float) -> tuple:
    """Envelope ``(lower, upper)`` for E|X~_m|^alpha when m >= 4.

    ``abs_moment`` is E|X|^alpha and ``tail_prob`` is P(|X| > 1/sqrt(m)).
    """
    if m < 4:
        raise ValueError("the envelope needs m >= 4")
    r = 1 / math.sqrt(m)
    lower = tail_prob * math.exp(-2 * alpha * r) * abs_moment
    upper = (2 * r) ** alpha + math.exp(alpha * r) * abs_moment
    return lower, upper
