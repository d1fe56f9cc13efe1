"""Closed-form rate predictions, admissible schedules and model comparisons.

For a continuous or discrete-continuous increment law the quantized rate
behaves as ``H_{m,n} ~ kappa(n) * (log m + zeta(n))``; the residual
``H_{m,n}/kappa(n) - log m - zeta(n)`` is what vanishes along admissible
``(n, m)`` schedules.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence

import numpy as np
from scipy import integrate

from .density import differential_entropy, stable_density
from .entropy_engine import Correction, EntropyEstimate, Estimator, estimate_Hmn
from .noise_models import (GaussianLK, LevyTriplet, ModelSpec, PoissonParams, StableParams, Sum,
                           X0Classification, classify_model, classify_x0, decompose_finite,
                           is_degenerate)
from .sampling import RngLike


def kappa(model, n: float) -> float:
    """Normalizer of the diverging rate term."""
    if isinstance(model, LevyTriplet):
        cls = classify_x0(model)
        if cls == X0Classification.DISCRETE_CONTINUOUS:
            model = decompose_finite(model)[0]
    else:
        cls = classify_model(model)
    if cls == X0Classification.CONTINUOUS:
        return float(n)
    if cls == X0Classification.DISCRETE:
        return 1.0
    if cls == X0Classification.DISCRETE_CONTINUOUS:
        ad = model.amplitude.discrete_fraction
        return -n * math.expm1(-(model.rate / n) * (1 - ad))
    raise ValueError(f"kappa is undefined for classification {cls.name}")


@functools.lru_cache(maxsize=64)
def _unit_stable_entropy(alpha: float, beta: float) -> float:
    if alpha == 2:
        return 0.5 * math.log(4 * math.pi * math.e)
    grid = stable_density(StableParams(alpha, beta, 1.0, 0.0))
    return float(differential_entropy(grid, "power", alpha))


def stable_entropy(p: StableParams) -> float:
    """h(X_0) in nats; closed form at alpha = 2, numerical inversion otherwise."""
    return _unit_stable_entropy(float(p.alpha), float(p.beta)) + math.log(p.sigma)


def _as_stable(model) -> StableParams:
    if isinstance(model, GaussianLK):
        return StableParams(2.0, 0.0, model.sigma / math.sqrt(2), model.mu)
    if isinstance(model, Sum):
        return model.stable
    if isinstance(model, StableParams):
        return model
    raise TypeError(f"not a stable-type model: {model!r}")


def zeta_stable(p, n: float) -> float:
    """h(X_0) - log(n)/alpha; Gaussian models go through the variance-matched alpha = 2 law."""
    s = _as_stable(p)
    return stable_entropy(s) - math.log(n) / s.alpha


def amplitude_entropy(p: PoissonParams) -> float:
    amp = p.amplitude
    if not amp.is_continuous:
        raise ValueError("amplitude law is not absolutely continuous")
    if amp.entropy is not None:
        return amp.entropy
    if amp.pdf is None:
        raise ValueError("amplitude law has neither a closed-form entropy nor a density")
    lo, hi = amp.support

    def integrand(x):
        v = float(amp.pdf(np.array([x]))[0])
        return -v * math.log(v) if v > 0 else 0.0

    return integrate.quad(integrand, lo, hi, limit=400)[0]


def zeta_poisson(p: PoissonParams, n: float) -> float:
    return math.log(n) + amplitude_entropy(p) - math.log(p.rate) + 1


def zeta(model: ModelSpec, n: float) -> float:
    if is_degenerate(model):
        return 0.0
    if isinstance(model, (StableParams, GaussianLK, Sum)):
        return zeta_stable(model, n)
    if isinstance(model, PoissonParams):
        if not model.amplitude.is_continuous:
            raise ValueError("no closed-form zeta for Poisson noise with atomic amplitudes")
        return zeta_poisson(model, n)
    raise TypeError(f"not a model: {model!r}")


def predicted_Hmn(model: ModelSpec, m: float, n: float) -> float:
    if is_degenerate(model):
        return 0.0
    return kappa(model, n) * (math.log(m) + zeta(model, n))


def epi_upper_bound(h_x0: float, n: float) -> float:
    """Upper bound on h(X_1^(n)) for continuous models."""
    return h_x0 - 0.5 * math.log(n)


def fit_log_envelope(ns: Sequence[float], zetas: Sequence[float]) -> tuple:
    """Tightest ``(c1, c2)`` with ``c1 log n <= zeta(n) <= c2 log n`` over points with n > 1."""
    pairs = [(math.log(n), z) for n, z in zip(ns, zetas) if n > 1]
    if not pairs:
        raise ValueError("need at least one point with n > 1")
    ratios = [z / ln for ln, z in pairs]
    return min(ratios), max(ratios)


def _growth(model: ModelSpec):
    """(kind, alpha) for the growth condition on m(n)."""
    if isinstance(model, PoissonParams):
        return "poisson", None
    return "stable", _as_stable(model).alpha


def growth_floor(model: ModelSpec, n: float) -> float:
    kind, alpha = _growth(model)
    if kind == "stable":
        return n ** (1 / alpha) * math.log(n + 1)
    return math.log(n + 1) ** 2


@dataclass(frozen=True)
class Schedule:
    """``(n, m)`` pairs with nondecreasing ``n``."""

    pairs: tuple

    def __post_init__(self):
        pairs = tuple((int(n), float(m)) for n, m in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        if any(n < 1 or not m > 0 for n, m in pairs):
            raise ValueError("need n >= 1 and m > 0")
        if any(b[0] < a[0] for a, b in zip(pairs, pairs[1:])):
            raise ValueError("n must be nondecreasing")

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)

    @property
    def ns(self) -> list:
        return [n for n, _ in self.pairs]

    @property
    def ms(self) -> list:
        return [m for _, m in self.pairs]


def m_schedule(model: ModelSpec, n_list: Iterable[int], granularity: int = 1) -> Schedule:
    """Power-of-two ``m(n)`` meeting the model's growth condition.

    The raw floor (times ``granularity``, rounded up to an integer) is
    rounded to the nearest power of two in the log domain.  Stable-type
    schedules then double ``m`` as needed so ``m / n**(1/alpha)`` is
    strictly increasing.
    """
    kind, alpha = _growth(model)
    pairs, prev = [], None
    for n in n_list:
        raw = math.ceil(growth_floor(model, n)) * granularity
        m = 2 ** round(math.log2(max(raw, 1)))
        if kind == "stable" and prev is not None:
            while m / n ** (1 / alpha) <= prev:
                m *= 2
        if kind == "poisson" and pairs:
            m = max(m, pairs[-1][1])
        if kind == "stable":
            prev = m / n ** (1 / alpha)
        pairs.append((n, m))
    return Schedule(tuple(pairs))


def is_admissible(model: ModelSpec, schedule: Schedule) -> bool:
    """Every point sits no further than a factor sqrt(2) below the growth floor."""
    return all(m * math.sqrt(2) >= growth_floor(model, n) for n, m in schedule)


@dataclass(frozen=True)
class AsymptoticReport:
    m: float
    n: int
    empirical_H: EntropyEstimate
    kappa: float
    zeta: float
    log_m_term: float
    residual: float
    predicted: float

    @property
    def normalized_stderr(self) -> float:
        return self.empirical_H.std_error / self.kappa

    def row(self) -> dict:
        return {"n": self.n, "m": self.m, "H_emp": self.empirical_H.value, "H_pred": self.predicted,
                "kappa": self.kappa, "zeta": self.zeta, "residual": self.residual,
                "stderr": self.empirical_H.std_error}


def make_report(model: ModelSpec, m: float, n: int, est: EntropyEstimate) -> AsymptoticReport:
    """Attach the closed-form terms to an entropy estimate."""
    k = kappa(model, n)
    try:
        z = zeta(model, n)
    except ValueError:
        z = math.nan
    log_m = math.log(m)
    if classify_model(model) == X0Classification.DISCRETE:
        residual, pred = est.value - z, z
    else:
        residual, pred = est.value / k - log_m - z, k * (log_m + z)
    return AsymptoticReport(m, n, est, k, z, log_m, residual, pred)


def convergence_reports(model: ModelSpec, schedule: Schedule, sample_count: int, rng: RngLike,
                        correction: Correction = Correction.MILLER_MADOW,
                        estimator: Estimator = Estimator.PLAIN) -> List[AsymptoticReport]:
    """One report per schedule point, all points reusing ``rng`` (common random numbers)."""
    return [make_report(model, m, n, estimate_Hmn(model, m, n, sample_count, rng, correction,
                                                  estimator=estimator))
            for n, m in schedule]


@dataclass(frozen=True)
class ComparisonRow:
    n: int
    m: float
    H_x: EntropyEstimate
    H_y: EntropyEstimate

    @property
    def ratio(self) -> float:
        return self.H_x.value / self.H_y.value if self.H_y.value != 0 else math.nan

    @property
    def difference(self) -> float:
        return self.H_x.value - self.H_y.value


@dataclass(frozen=True)
class TrendStats:
    """Monotonicity verdicts over the last half of a schedule (at least two points)."""

    tail_start: int
    ratio_decreasing: bool
    ratio_increasing: bool
    difference_decreasing: bool
    difference_negative: bool
    final_ratio: float
    final_difference: float


def _strict(values, sign) -> bool:
    return all(sign * (b - a) > 0 for a, b in zip(values, values[1:]))


def trend_stats(rows: Sequence[ComparisonRow]) -> TrendStats:
    if not rows:
        raise ValueError("no comparison rows")
    start = min(len(rows) // 2, max(0, len(rows) - 2))
    tail = rows[start:]
    ratios = [r.ratio for r in tail]
    diffs = [r.difference for r in tail]
    return TrendStats(start, _strict(ratios, -1), _strict(ratios, 1), _strict(diffs, -1),
                      all(d < 0 for d in diffs), rows[-1].ratio, rows[-1].difference)


@dataclass(frozen=True)
class Comparison:
    rows: tuple
    trend: TrendStats = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "trend", trend_stats(self.rows))


def compare_models(model_x: ModelSpec, model_y: ModelSpec, schedule: Schedule, sample_count: int,
                   rng: RngLike, correction: Correction = Correction.MILLER_MADOW,
                   estimator: Estimator = Estimator.PLAIN) -> Comparison:
    """Rate ratio and difference of two models along a joint schedule.

    Both models and every point draw from the same stream, so identical
    models give identical estimates.
    """
    def est(model, m, n):
        return estimate_Hmn(model, m, n, sample_count, rng, correction, estimator=estimator)

    rows = tuple(ComparisonRow(n, m, est(model_x, m, n), est(model_y, m, n)) for n, m in schedule)
    return Comparison(rows)
