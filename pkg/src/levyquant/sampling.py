"""Exact samplers for the window integrals X_i^(n) of white Lévy noise.

Every sampler takes either an ``RngStream`` (a fresh generator is built
from it, so the same stream always yields the same draws) or a live
``numpy.random.Generator`` whose state is advanced.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from scipy import stats

from .noise_models import (GaussianLK, ModelSpec, PoissonParams, StableParams, Sum,
                           model_from_dict, model_to_dict)


@dataclass(frozen=True)
class RngStream:
    """Reproducible, mutually independent random streams.

    Streams are addressed by ``(seed, stream_id, *path)`` and realized with
    the counter-based Philox generator keyed through ``SeedSequence``
    spawn keys, so distinct addresses give independent sequences.
    """

    seed: int
    stream_id: int = 0
    path: tuple = ()

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def child(self, k: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self.path + (int(k),))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,) + self.path)
        return np.random.Generator(np.random.Philox(ss))


RngLike = Union[RngStream, np.random.Generator]


def _gen(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or Generator, got {type(rng).__name__}")


@dataclass(frozen=True)
class IncrementSpec:
    model: ModelSpec
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")


def shift_b_n(p: StableParams, n: int) -> float:
    """Shift b_n with X_1^(n) = (X_0 - b_n) / n**(1/alpha) in distribution."""
    if p.alpha == 1:
        return 2 / math.pi * p.sigma * p.beta * math.log(n)
    return p.mu * (1 - n ** (1 / p.alpha) / n)


def _cms(alpha: float, beta: float, gen: np.random.Generator, size) -> np.ndarray:
    """Chambers–Mallows–Stuck draw of a unit-scale, zero-shift stable law."""
    u = gen.uniform(-math.pi / 2, math.pi / 2, size)
    w = gen.standard_exponential(size)
    if alpha == 1:
        half = math.pi / 2 + beta * u
        return 2 / math.pi * (half * np.tan(u) - beta * np.log(math.pi / 2 * w * np.cos(u) / half))
    zeta = -beta * math.tan(math.pi * alpha / 2) if alpha != 2 else 0.0
    xi = math.atan(-zeta) / alpha
    scale = (1 + zeta * zeta) ** (1 / (2 * alpha))
    a = alpha * (u + xi)
    return (scale * np.sin(a) / np.cos(u) ** (1 / alpha)
            * (np.cos(u - a) / w) ** ((1 - alpha) / alpha))


def sample_stable_x0(p: StableParams, rng: RngLike, size=None) -> np.ndarray:
    """Draws of X_0 with characteristic exponent ``stable_exponent(p, .)``."""
    x = _cms(p.alpha, p.beta, _gen(rng), size)
    if p.alpha == 1:
        return p.sigma * x + 2 / math.pi * p.beta * p.sigma * math.log(p.sigma) + p.mu
    return p.sigma * x + p.mu


def sample_stable_increment(p: StableParams, n: int, rng: RngLike, size=None) -> np.ndarray:
    x0 = sample_stable_x0(p, rng, size)
    return (x0 - shift_b_n(p, n)) / n ** (1 / p.alpha)


def sample_poisson_increment(p: PoissonParams, n: int, rng: RngLike, size=None) -> np.ndarray:
    """Compound-Poisson window integrals; empty windows are exactly 0.0."""
    gen = _gen(rng)
    count = 1 if size is None else int(size)
    k = gen.poisson(p.rate / n, count)
    jumps = p.amplitude.sample(gen, int(k.sum()))
    owner = np.repeat(np.arange(count), k)
    # bincount leaves empty windows at exactly 0.0
    out = np.bincount(owner, weights=jumps, minlength=count).astype(np.float64)
    return out[0] if size is None else out


def _positive_poisson(rate: float, gen: np.random.Generator, count: int) -> np.ndarray:
    """Poisson(rate) counts conditioned on being at least 1, by table inversion."""
    kmax = 1
    while stats.poisson.sf(kmax, rate) > 1e-17:
        kmax += 1
    cdf = stats.poisson.cdf(np.arange(kmax + 1), rate)
    u = gen.uniform(math.exp(-rate), 1.0, count)
    return np.clip(np.searchsorted(cdf, u, side="right"), 1, kmax)


def sample_poisson_jump_windows(p: PoissonParams, n: int, rng: RngLike, size: int) -> np.ndarray:
    """Window integrals conditioned on at least one jump in the window.

    Together with the exact no-jump probability ``exp(-rate/n)`` these give
    the full increment law.
    """
    gen = _gen(rng)
    k = _positive_poisson(p.rate / n, gen, int(size))
    jumps = p.amplitude.sample(gen, int(k.sum()))
    owner = np.repeat(np.arange(int(size)), k)
    return np.bincount(owner, weights=jumps, minlength=int(size)).astype(np.float64)


def sample_gaussian_increment(g: GaussianLK, n: int, rng: RngLike, size=None) -> np.ndarray:
    z = _gen(rng).standard_normal(size)
    return g.mu / n + g.sigma / math.sqrt(n) * z


def sample_increments(spec: IncrementSpec, count: int, rng: RngLike) -> np.ndarray:
    """``count`` iid draws of X_1^(n) for ``spec.model``."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    gen = _gen(rng)
    model, n = spec.model, spec.n
    if isinstance(model, StableParams):
        return sample_stable_increment(model, n, gen, count)
    if isinstance(model, PoissonParams):
        return sample_poisson_increment(model, n, gen, count)
    if isinstance(model, GaussianLK):
        return sample_gaussian_increment(model, n, gen, count)
    if isinstance(model, Sum):
        stable = sample_stable_increment(model.stable, n, gen, count)
        return stable + sample_poisson_increment(model.poisson, n, gen, count)
    raise TypeError(f"not a model: {model!r}")


def sample_x0(model: ModelSpec, count: int, rng: RngLike) -> np.ndarray:
    """Direct draws of X_0 (the unit-window integral)."""
    return sample_increments(IncrementSpec(model, 1), count, rng)


def dump_stream(path, values, model: ModelSpec, n: int, seed: int, stream_id: int = 0) -> Path:
    """Write little-endian float64 values plus a ``.json`` sidecar."""
    path = Path(path)
    values = np.asarray(values, dtype="<f8")
    values.tofile(path)
    sidecar = {"model": model_to_dict(model), "n": int(n), "seed": int(seed),
               "stream_id": int(stream_id), "count": int(values.size), "dtype": "<f8"}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return path


def load_stream(path):
    """Inverse of ``dump_stream``: returns ``(values, model, sidecar)``."""
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    values = np.fromfile(path, dtype="<f8")
    if values.size != meta["count"]:
        raise ValueError(f"{path}: expected {meta['count']} values, found {values.size}")
    return values, model_from_dict(meta["model"]), meta
