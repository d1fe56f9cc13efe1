"""Discrete entropy estimation and closed-form entropy relations.

Grid-density tools live in ``levyquant.density`` and are re-exported here.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .density import (DensityGrid, DensityInversionError, cf_to_density,
                      compound_density_An, differential_entropy, jump_count_weights,
                      tv_distance)
from .noise_models import ACClassParams, ModelSpec, PoissonParams
from .pmf import EmpiricalPmf
from .quantization import quantize_array
from .sampling import (IncrementSpec, RngLike, RngStream, sample_increments,
                       sample_poisson_jump_windows)

__all__ = [
    "Correction", "EntropyEstimate", "UndersamplingWarning", "plugin_entropy",
    "exact_entropy", "histogram_Hmn", "estimate_Hmn", "entropy_from_histogram",
    "entropy_with_atom", "Estimator",
    "entropy_continuity_bound", "continuity_constants", "renyi_quantized_prediction",
    "binary_entropy", "DensityGrid", "DensityInversionError", "cf_to_density",
    "compound_density_An", "differential_entropy", "jump_count_weights", "tv_distance",
]

SHARD_SIZE = 1 << 20
UNDERSAMPLING_RATIO = 0.1


class UndersamplingWarning(RuntimeWarning):
    pass


class Correction(enum.Enum):
    NONE = "none"
    MILLER_MADOW = "miller_madow"


class Estimator(enum.Enum):
    """How increments are drawn for ``estimate_Hmn``.

    ``PLAIN`` samples iid increments.  ``CONDITIONED`` (Poisson models
    only) samples windows holding at least one jump and mixes their
    histogram with the exact no-jump mass ``exp(-rate/n)``; the estimand is
    unchanged while the variance no longer grows with the share of empty
    windows.
    """

    PLAIN = "plain"
    CONDITIONED = "conditioned"


@dataclass(frozen=True)
class EntropyEstimate:
    """Entropy in nats with a delta-method standard error."""

    value: float
    std_error: float
    bias_corrected: bool
    observed_support: int
    sample_count: int = 0

    def __post_init__(self):
        if not math.isfinite(self.std_error) or self.std_error < 0:
            raise ValueError("std_error must be finite and nonnegative")

    def scaled(self, factor: float) -> "EntropyEstimate":
        return EntropyEstimate(self.value * factor, self.std_error * abs(factor),
                               self.bias_corrected, self.observed_support, self.sample_count)

    def to_json(self, **provenance) -> str:
        doc = asdict(self)
        doc.update(provenance)
        return json.dumps(doc, sort_keys=True, default=str)


def exact_entropy(probs) -> float:
    """Shannon entropy of a probability vector, in nats (0 log 0 = 0)."""
    p = np.asarray(probs, dtype=np.float64)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def binary_entropy(d: float) -> float:
    if d <= 0 or d >= 1:
        return 0.0
    return -d * math.log(d) - (1 - d) * math.log1p(-d)


def plugin_entropy(pmf: EmpiricalPmf, correction: Correction = Correction.NONE) -> EntropyEstimate:
    """Plug-in entropy of a histogram, optionally Miller–Madow corrected.

    The standard error is ``sqrt((sum p log^2 p - H^2) / N)``.
    """
    n = pmf.total
    if n < 1:
        raise ValueError("cannot estimate entropy of an empty histogram")
    p = pmf.probabilities()
    logp = np.log(p)
    h = float(-(p * logp).sum())
    var = float((p * (logp + h) ** 2).sum())
    k = pmf.support
    corrected = correction == Correction.MILLER_MADOW
    if corrected:
        h += (k - 1) / (2 * n)
    return EntropyEstimate(h, math.sqrt(var / n), corrected, k, n)


def draw_shard(model: ModelSpec, n: int, size: int, rng: RngLike,
               estimator: Estimator = Estimator.PLAIN) -> np.ndarray:
    if estimator == Estimator.CONDITIONED:
        if not isinstance(model, PoissonParams):
            raise ValueError("the conditioned estimator needs a Poisson model")
        return sample_poisson_jump_windows(model, n, rng, size)
    return sample_increments(IncrementSpec(model, n), size, rng)


def histogram_Hmn(model: ModelSpec, m: float, n: int, sample_count: int, rng: RngLike,
                  shard_size: int = SHARD_SIZE, estimator: Estimator = Estimator.PLAIN) -> EmpiricalPmf:
    """Histogram of ``[X_1^(n)]_m`` over ``sample_count`` draws.

    With an ``RngStream``, shard ``k`` draws from ``rng.child(k)``, so the
    histogram depends only on the stream and ``shard_size``.  With the
    conditioned estimator the draws are jump windows only.
    """
    hist = EmpiricalPmf.empty()
    done, k = 0, 0
    gen = None if isinstance(rng, RngStream) else rng
    while done < sample_count:
        size = min(shard_size, sample_count - done)
        src = rng.child(k) if gen is None else gen
        x = draw_shard(model, n, size, src, estimator)
        hist = hist.merge(EmpiricalPmf.from_indices(quantize_array(x, m)))
        done += size
        k += 1
    return hist


def entropy_with_atom(hist: EmpiricalPmf, atom: float,
                      correction: Correction = Correction.NONE) -> EntropyEstimate:
    """Plug-in entropy of ``atom * delta_0 + (1 - atom) * Q`` with Q estimated by ``hist``.

    The Miller–Madow term and the delta-method error are those of the Q
    part, scaled by ``1 - atom``.
    """
    n = hist.total
    if n < 1:
        raise ValueError("cannot estimate entropy of an empty histogram")
    q = hist.probabilities()
    P = (1 - atom) * q
    z = int(np.searchsorted(hist.indices, 0))
    extra = 0.0
    if z < hist.support and hist.indices[z] == 0:
        P[z] += atom
    elif atom > 0:
        extra = -atom * math.log(atom)
    logP = np.log(P)
    h = float(-(P * logP).sum()) + extra
    mean = float((q * logP).sum())
    var = float((q * (logP - mean) ** 2).sum())
    corrected = correction == Correction.MILLER_MADOW
    if corrected:
        h += (1 - atom) * (hist.support - 1) / (2 * n)
    return EntropyEstimate(h, (1 - atom) * math.sqrt(var / n), corrected, hist.support, n)


def entropy_from_histogram(hist: EmpiricalPmf, n: int,
                           correction: Correction = Correction.MILLER_MADOW,
                           atom: Optional[float] = None) -> EntropyEstimate:
    """``n`` times the plug-in entropy, warning when the histogram is undersampled.

    ``atom`` is the exact mass at index 0 missing from a conditioned histogram.
    """
    est = plugin_entropy(hist, correction) if atom is None else entropy_with_atom(hist, atom, correction)
    if est.observed_support / est.sample_count > UNDERSAMPLING_RATIO:
        warnings.warn(f"{est.observed_support} occupied cells for {est.sample_count} samples; "
                      "plug-in bias may exceed tolerance", UndersamplingWarning, stacklevel=3)
    return est.scaled(n)


def no_jump_mass(model: ModelSpec, n: int) -> float:
    return math.exp(-model.rate / n)


def estimate_Hmn(model: ModelSpec, m: float, n: int, sample_count: int, rng: RngLike,
                 correction: Correction = Correction.MILLER_MADOW,
                 shard_size: int = SHARD_SIZE,
                 estimator: Estimator = Estimator.PLAIN) -> EntropyEstimate:
    """Monte-Carlo estimate of ``H_{m,n} = n * H([X_1^(n)]_m)``."""
    if sample_count < 1:
        raise ValueError("sample_count must be positive")
    hist = histogram_Hmn(model, m, n, sample_count, rng, shard_size, estimator)
    atom = no_jump_mass(model, n) if estimator == Estimator.CONDITIONED else None
    return entropy_from_histogram(hist, n, correction, atom)


def continuity_constants(cls: ACClassParams) -> tuple:
    """The pair (c1, c2) of the entropy continuity bound for an AC class."""
    a, ell, v = cls.alpha, cls.ell, cls.v
    c1 = (abs(math.log(2 * a * v)) / a + abs(math.log(ell * math.e)) + math.log(math.e / 2)
          + math.log(2 * math.gamma(1 + 1 / a)) + 1 / a + 1)
    c2 = 1 / a + 2
    return c1, c2


def entropy_continuity_bound(D: float, cls: ACClassParams) -> float:
    """Upper bound ``c1*D + c2*D*log(1/D)`` on |h(p) - h(q)| when ||p - q||_1 = D."""
    if not D > 0:
        raise ValueError("D must be positive")
    if D > 2:
        raise ValueError("an L1 distance between densities cannot exceed 2")
    c1, c2 = continuity_constants(cls)
    return c1 * D + c2 * D * math.log(1 / D)


def renyi_quantized_prediction(d: float, h_c: float, H_D: float, m: float) -> float:
    """Predicted ``H([X]_m)`` for a mixture with continuous weight ``d``."""
    if not 0 <= d <= 1:
        raise ValueError("d must lie in [0, 1]")
    return d * math.log(m) + d * h_c + (1 - d) * H_D + binary_entropy(d)
