"""White Lévy noise parametrizations.

Models are immutable dataclasses.  ``ModelSpec`` is the union of the four
simulatable families; each serializes to a JSON object with a ``"kind"``
discriminator (see ``model_to_dict``).
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import integrate

from . import amplitude as amp
from .amplitude import AmplitudeLaw


class X0Classification(enum.Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"
    DISCRETE_CONTINUOUS = "discrete-continuous"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class LevyMeasure:
    """Finite Lévy measure: atoms plus an absolutely continuous part.

    ``ac_law`` is a normalized continuous law and ``ac_mass`` its total
    mass, so the AC density is ``ac_mass * ac_law.pdf``.  A continuous
    singular part cannot be represented; passing ``cs_mass != 0`` raises.
    """

    atoms: tuple = ()
    ac_law: Optional[AmplitudeLaw] = None
    ac_mass: float = 0.0
    cs_mass: float = 0.0

    def __post_init__(self):
        if self.cs_mass != 0:
            raise ValueError("continuous-singular Lévy measures are not supported")
        atoms = tuple((float(a), float(w)) for a, w in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        locs = [a for a, _ in atoms]
        if any(a == 0 or not math.isfinite(a) for a in locs):
            raise ValueError("atom locations must be finite and nonzero")
        if len(set(locs)) != len(locs):
            raise ValueError("atom locations must be distinct")
        if any(not (w > 0 and math.isfinite(w)) for _, w in atoms):
            raise ValueError("atom masses must be finite and positive")
        if not (self.ac_mass >= 0 and math.isfinite(self.ac_mass)):
            raise ValueError("ac_mass must be finite and nonnegative")
        if self.ac_mass > 0:
            if self.ac_law is None or not self.ac_law.is_continuous:
                raise ValueError("a positive ac_mass needs a continuous ac_law")

    @property
    def discrete_mass(self) -> float:
        return float(sum(w for _, w in self.atoms))

    @property
    def total_mass(self) -> float:
        return self.discrete_mass + self.ac_mass

    def scaled(self, factor: float) -> "LevyMeasure":
        return LevyMeasure(tuple((a, w * factor) for a, w in self.atoms),
                           self.ac_law, self.ac_mass * factor)


@dataclass(frozen=True)
class LevyTriplet:
    mu: float = 0.0
    sigma: float = 0.0
    measure: LevyMeasure = field(default_factory=LevyMeasure)

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError("sigma must be nonnegative")

    def scaled(self, t: float) -> "LevyTriplet":
        """Triplet of the integral over a window of length ``t``."""
        return LevyTriplet(self.mu * t, self.sigma * math.sqrt(t), self.measure.scaled(t))


@dataclass(frozen=True)
class ACClassParams:
    """Bounds defining the (alpha, ell, v)-AC density class."""

    alpha: float
    ell: float
    v: float

    def __post_init__(self):
        for name in ("alpha", "ell", "v"):
            val = getattr(self, name)
            if not (val > 0 and math.isfinite(val)):
                raise ValueError(f"{name} must be positive and finite")


@dataclass(frozen=True)
class StableParams:
    alpha: float
    beta: float = 0.0
    sigma: float = 1.0
    mu: float = 0.0

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise ValueError("alpha must lie in (0, 2]")
        if not -1 <= self.beta <= 1:
            raise ValueError("beta must lie in [-1, 1]")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.alpha == 2 and self.beta != 0:
            object.__setattr__(self, "beta", 0.0)


@dataclass(frozen=True)
class PoissonParams:
    """Impulsive Poisson noise: jumps at rate ``rate`` with law ``amplitude``.

    ``theta_moment`` optionally certifies a finite moment as
    ``(theta, E|A|^theta)``.
    """

    rate: float
    amplitude: AmplitudeLaw
    theta_moment: Optional[tuple] = None

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError("rate must be positive and finite")


@dataclass(frozen=True)
class GaussianLK:
    """Gaussian noise in Lévy–Khintchine form: variance sigma**2 per unit time.

    Not the same as ``StableParams(alpha=2, sigma=s)``, whose variance is
    ``2 * s**2``.
    """

    sigma: float
    mu: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class Sum:
    """Independent stable plus impulsive Poisson noise."""

    stable: StableParams
    poisson: PoissonParams


Stable = StableParams
ImpulsivePoisson = PoissonParams
ModelSpec = Union[StableParams, PoissonParams, GaussianLK, Sum]


# -- exponents ---------------------------------------------------------------

def stable_exponent(p: StableParams, omega):
    """Characteristic exponent f(w) with E exp(jwX0) = exp(f(w))."""
    w = np.asarray(omega, dtype=np.float64)
    aw = np.abs(w)
    if p.alpha == 1:
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.where(aw > 0, -2 / math.pi * np.log(np.where(aw > 0, aw, 1.0)), 0.0)
    else:
        phi = math.tan(math.pi * p.alpha / 2) if p.alpha != 2 else 0.0
    val = 1j * w * p.mu - p.sigma**p.alpha * aw**p.alpha * (1 - 1j * p.beta * np.sign(w) * phi)
    val = np.where(w == 0, 0.0, val)
    return val[()] if val.ndim == 0 else val


def poisson_exponent(p: PoissonParams, omega):
    if p.amplitude.cf is None:
        raise ValueError("amplitude law has no characteristic function")
    val = p.rate * (p.amplitude.characteristic(omega) - 1)
    return val[()] if np.ndim(val) == 0 else val


def gaussian_exponent(g: GaussianLK, omega):
    w = np.asarray(omega, dtype=np.float64)
    val = -0.5 * g.sigma**2 * w**2 + 1j * g.mu * w
    return val[()] if val.ndim == 0 else val


def _truncated_first_moment(law: AmplitudeLaw) -> float:
    """Integral of a * pdf(a) over the open interval (-1, 1)."""
    val, _ = integrate.quad(lambda a: a * law.pdf(a), -1.0, 1.0, limit=200, points=[0.0])
    return val


def levy_khintchine_exponent(t: LevyTriplet, omega):
    """Lévy–Khintchine exponent of a finite-measure triplet, by direct quadrature."""
    w = np.atleast_1d(np.asarray(omega, dtype=np.float64))
    out = -0.5 * t.sigma**2 * w**2 + 1j * t.mu * w
    for a, mass in t.measure.atoms:
        small = 1.0 if abs(a) < 1 else 0.0
        out = out + mass * (np.exp(1j * w * a) - 1 - 1j * w * a * small)
    law = t.measure.ac_law
    if t.measure.ac_mass > 0:
        lo, hi = law.support if law.support else (-np.inf, np.inf)
        vals = []
        for wk in w:
            def integrand(a, part):
                z = np.exp(1j * wk * a) - 1 - (1j * wk * a if abs(a) < 1 else 0)
                return (z.real if part == 0 else z.imag) * law.pdf(a)
            pts = None
            if np.isfinite(lo) and np.isfinite(hi):
                pts = [x for x in (-1.0, 0.0, 1.0) if lo < x < hi] or None
            re, _ = integrate.quad(integrand, lo, hi, args=(0,), limit=400, points=pts)
            im, _ = integrate.quad(integrand, lo, hi, args=(1,), limit=400, points=pts)
            vals.append(re + 1j * im)
        out = out + t.measure.ac_mass * np.asarray(vals)
    return out[0] if np.ndim(omega) == 0 else out


# -- classification and decomposition ----------------------------------------

def classify_x0(triplet: LevyTriplet) -> X0Classification:
    """Type of X0 = integral of the noise over [0, 1)."""
    if triplet.measure.cs_mass:
        raise ValueError("continuous-singular Lévy measures are not supported")
    if triplet.sigma > 0:
        return X0Classification.CONTINUOUS
    # every representable measure is finite
    if triplet.measure.ac_mass == 0:
        return X0Classification.DISCRETE
    if triplet.measure.ac_mass > 0:
        return X0Classification.DISCRETE_CONTINUOUS
    return X0Classification.UNDETERMINED


def discrete_fraction(measure: LevyMeasure) -> float:
    total = measure.total_mass
    if total <= 0:
        raise ValueError("measure has zero mass")
    return measure.discrete_mass / total


def decompose_finite(triplet: LevyTriplet) -> tuple:
    """Split a finite, Gaussian-free triplet into Poisson noise plus drift.

    Returns ``(PoissonParams, mu_prime)``.  The drift compensation integrates
    over the open interval (-1, 1), matching the indicator in the
    Lévy–Khintchine exponent.
    """
    if triplet.sigma > 0:
        raise ValueError("decomposition requires sigma == 0")
    m = triplet.measure
    lam = m.total_mass
    if lam <= 0:
        raise ValueError("measure has zero mass")
    parts, weights = [], []
    if m.atoms:
        locs = [a for a, _ in m.atoms]
        parts.append(amp.discrete(locs, [w / m.discrete_mass for _, w in m.atoms]))
        weights.append(m.discrete_mass / lam)
    if m.ac_mass > 0:
        parts.append(m.ac_law)
        weights.append(m.ac_mass / lam)
    law = parts[0] if len(parts) == 1 else amp.mixture(parts, weights)

    compensator = sum(a * w for a, w in m.atoms if abs(a) < 1)
    if m.ac_mass > 0:
        compensator += m.ac_mass * _truncated_first_moment(m.ac_law)
    return PoissonParams(lam, law), triplet.mu - compensator


def poisson_triplet(p: PoissonParams) -> LevyTriplet:
    """Triplet (mu, 0, rate * F_A) whose exponent equals the Poisson exponent."""
    law = p.amplitude
    atoms = tuple((a, p.rate * w) for a, w in law.atoms if a != 0)
    cont_mass = 1.0 - law.discrete_fraction
    ac_law = None
    if cont_mass > 1e-15:
        if law.pdf is None:
            raise ValueError("amplitude law has a continuous part but no density")
        ac_law = amp.custom(pdf=lambda x: law.pdf(x) / cont_mass, support=law.support)
    mu = sum(a * w for a, w in atoms if abs(a) < 1)
    if ac_law is not None:
        mu += p.rate * cont_mass * _truncated_first_moment(ac_law)
    measure = LevyMeasure(atoms, ac_law, p.rate * cont_mass if ac_law else 0.0)
    return LevyTriplet(mu, 0.0, measure)


def is_degenerate(model: ModelSpec) -> bool:
    """True for Poisson noise whose jumps are all exactly zero."""
    return isinstance(model, PoissonParams) and model.amplitude.atoms == ((0.0, 1.0),)


def classify_model(model: ModelSpec) -> X0Classification:
    if isinstance(model, (StableParams, GaussianLK, Sum)):
        return X0Classification.CONTINUOUS
    if isinstance(model, PoissonParams):
        if model.amplitude.is_discrete:
            return X0Classification.DISCRETE
        return X0Classification.DISCRETE_CONTINUOUS
    raise TypeError(f"not a model: {model!r}")


# -- serialization -----------------------------------------------------------

def model_to_dict(model: ModelSpec) -> dict:
    if isinstance(model, StableParams):
        return {"kind": "stable", "alpha": model.alpha, "beta": model.beta,
                "sigma": model.sigma, "mu": model.mu}
    if isinstance(model, PoissonParams):
        d = {"kind": "poisson", "rate": model.rate, "amplitude": model.amplitude.to_dict()}
        if model.theta_moment is not None:
            d["theta_moment"] = list(model.theta_moment)
        return d
    if isinstance(model, GaussianLK):
        return {"kind": "gaussian", "sigma": model.sigma, "mu": model.mu}
    if isinstance(model, Sum):
        return {"kind": "sum", "stable": model_to_dict(model.stable),
                "poisson": model_to_dict(model.poisson)}
    raise TypeError(f"not a model: {model!r}")


def model_from_dict(d: dict) -> ModelSpec:
    kind = d.get("kind")
    if kind == "stable":
        return StableParams(float(d["alpha"]), float(d.get("beta", 0.0)),
                            float(d.get("sigma", 1.0)), float(d.get("mu", 0.0)))
    if kind == "poisson":
        tm = d.get("theta_moment")
        return PoissonParams(float(d["rate"]), amp.from_dict(d["amplitude"]),
                             tuple(tm) if tm is not None else None)
    if kind == "gaussian":
        return GaussianLK(float(d["sigma"]), float(d.get("mu", 0.0)))
    if kind == "sum":
        return Sum(model_from_dict(d["stable"]), model_from_dict(d["poisson"]))
    if kind == "degenerate":
        return PoissonParams(1.0, amp.point(0.0))
    raise ValueError(f"unknown model kind {kind!r}")


def model_to_json(model: ModelSpec) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True)


def model_from_json(text: str) -> ModelSpec:
    return model_from_dict(json.loads(text))


def model_hash(model: ModelSpec) -> str:
    return hashlib.sha256(model_to_json(model).encode()).hexdigest()[:16]
