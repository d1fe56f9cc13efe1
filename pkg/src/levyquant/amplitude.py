"""Amplitude laws for impulsive Poisson noise.

A law bundles whatever is known about a jump amplitude: a sampler for
simulation, an optional density for the continuous part, an optional list
of atoms, and an optional characteristic function.  Built-in laws also
serialize to plain dicts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

Sampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class AmplitudeLaw:
    """Probability law of one jump amplitude.

    ``pdf`` is the (sub-)density of the absolutely continuous part and
    ``atoms`` lists ``(location, probability)`` for the discrete part, so
    that ``sum(prob) + integral(pdf) == 1``.
    """

    kind: str
    params: dict = field(default_factory=dict)
    sampler: Optional[Sampler] = field(default=None, compare=False, repr=False)
    pdf: Optional[Callable] = field(default=None, compare=False, repr=False)
    cf: Optional[Callable] = field(default=None, compare=False, repr=False)
    atoms: tuple = ()
    # closed-form differential entropy of the normalized continuous part
    entropy: Optional[float] = None
    # interval holding (essentially) all continuous mass, for tabulation
    support: Optional[tuple] = None

    def __post_init__(self):
        for loc, prob in self.atoms:
            if not (np.isfinite(loc) and prob > 0):
                raise ValueError(f"invalid atom ({loc}, {prob})")
        if self.discrete_fraction > 1 + 1e-12:
            raise ValueError("atom probabilities exceed 1")

    @property
    def discrete_fraction(self) -> float:
        return float(sum(p for _, p in self.atoms))

    @property
    def is_discrete(self) -> bool:
        return self.discrete_fraction >= 1 - 1e-12

    @property
    def is_continuous(self) -> bool:
        return not self.atoms and self.pdf is not None

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        if self.sampler is None:
            raise ValueError(f"amplitude law {self.kind!r} has no sampler")
        return np.asarray(self.sampler(gen, size), dtype=np.float64)

    def characteristic(self, omega):
        if self.cf is None:
            raise ValueError(f"amplitude law {self.kind!r} has no characteristic function")
        return self.cf(np.asarray(omega, dtype=np.float64))

    def abs_moment(self, theta: float) -> float:
        """E|A|^theta, by quadrature over the continuous part."""
        total = sum(p * abs(loc) ** theta for loc, p in self.atoms)
        if self.pdf is not None:
            lo, hi = self.support if self.support else (-np.inf, np.inf)
            val, _ = integrate.quad(lambda a: abs(a) ** theta * self.pdf(a), lo, hi,
                                    limit=200, points=[0.0] if lo < 0 < hi else None)
            total += val
        return float(total)

    def to_dict(self) -> dict:
        if self.kind == "custom":
            raise ValueError("custom amplitude laws are not serializable")
        out = {"kind": self.kind}
        out.update(self.params)
        return out


def point(value: float) -> AmplitudeLaw:
    value = float(value)
    return AmplitudeLaw(
        kind="point",
        params={"value": value},
        sampler=lambda gen, size: np.full(size, value),
        cf=lambda w: np.exp(1j * w * value),
        atoms=((value, 1.0),),
    )


def discrete(locations: Sequence[float], probs: Sequence[float]) -> AmplitudeLaw:
    locs = np.asarray(locations, dtype=np.float64)
    ps = np.asarray(probs, dtype=np.float64)
    if locs.shape != ps.shape or locs.ndim != 1 or len(locs) == 0:
        raise ValueError("locations and probs must be equal-length 1-d sequences")
    if abs(ps.sum() - 1.0) > 1e-12:
        raise ValueError(f"probabilities sum to {ps.sum()}, expected 1")
    if len(np.unique(locs)) != len(locs):
        raise ValueError("atom locations must be distinct")
    return AmplitudeLaw(
        kind="discrete",
        params={"locations": locs.tolist(), "probs": ps.tolist()},
        sampler=lambda gen, size: gen.choice(locs, size=size, p=ps),
        cf=lambda w: np.exp(1j * np.multiply.outer(w, locs)) @ ps,
        atoms=tuple(zip(locs.tolist(), ps.tolist())),
    )


def uniform(low: float = 0.0, high: float = 1.0) -> AmplitudeLaw:
    low, high = float(low), float(high)
    if not high > low:
        raise ValueError("uniform law needs high > low")
    width = high - low

    def pdf(x):
        x = np.asarray(x, dtype=np.float64)
        return np.where((x >= low) & (x < high), 1.0 / width, 0.0)

    def cf(w):
        w = np.asarray(w, dtype=np.float64)
        small = np.abs(w * width) < 1e-8
        safe = np.where(small, 1.0, w)
        val = (np.exp(1j * safe * high) - np.exp(1j * safe * low)) / (1j * safe * width)
        # second-order expansion about w = 0
        mid = np.exp(1j * w * (low + high) / 2)
        return np.where(small, mid * (1 - (w * width) ** 2 / 24), val)

    return AmplitudeLaw(
        kind="uniform",
        params={"low": low, "high": high},
        sampler=lambda gen, size: low + width * gen.random(size),
        pdf=pdf,
        cf=cf,
        entropy=math.log(width),
        support=(low, high),
    )


def normal(loc: float = 0.0, scale: float = 1.0) -> AmplitudeLaw:
    loc, scale = float(loc), float(scale)
    if not scale > 0:
        raise ValueError("normal law needs scale > 0")
    return AmplitudeLaw(
        kind="normal",
        params={"loc": loc, "scale": scale},
        sampler=lambda gen, size: loc + scale * gen.standard_normal(size),
        pdf=lambda x: np.exp(-0.5 * ((np.asarray(x) - loc) / scale) ** 2) / (scale * math.sqrt(2 * math.pi)),
        cf=lambda w: np.exp(1j * w * loc - 0.5 * (scale * w) ** 2),
        entropy=0.5 * math.log(2 * math.pi * math.e * scale**2),
        support=(loc - 40 * scale, loc + 40 * scale),
    )


def mixture(components: Sequence[AmplitudeLaw], weights: Sequence[float]) -> AmplitudeLaw:
    """Finite mixture; at most one component may carry a continuous part."""
    comps = list(components)
    ws = np.asarray(weights, dtype=np.float64)
    if len(comps) != len(ws) or len(comps) == 0:
        raise ValueError("need one weight per component")
    if np.any(ws <= 0) or abs(ws.sum() - 1.0) > 1e-12:
        raise ValueError("mixture weights must be positive and sum to 1")

    atoms: dict = {}
    for c, w in zip(comps, ws):
        for loc, p in c.atoms:
            atoms[loc] = atoms.get(loc, 0.0) + w * p
    cont = [(c, w) for c, w in zip(comps, ws) if c.pdf is not None]

    pdf = None
    entropy = None
    support = None
    if cont:
        def pdf(x):
            return sum(w * c.pdf(x) for c, w in cont)
        if len(cont) == 1 and cont[0][0].is_continuous:
            entropy = cont[0][0].entropy
        lows = [c.support[0] for c, _ in cont if c.support]
        highs = [c.support[1] for c, _ in cont if c.support]
        if len(lows) == len(cont):
            support = (min(lows), max(highs))

    cf = None
    if all(c.cf is not None for c in comps):
        def cf(w):
            return sum(wt * c.cf(w) for c, wt in zip(comps, ws))

    samplers_ok = all(c.sampler is not None for c in comps)

    def sampler(gen, size):
        which = gen.choice(len(comps), size=size, p=ws)
        out = np.empty(size)
        for k, c in enumerate(comps):
            sel = which == k
            out[sel] = c.sample(gen, int(sel.sum()))
        return out

    return AmplitudeLaw(
        kind="mixture",
        params={"components": [c.to_dict() for c in comps], "weights": ws.tolist()},
        sampler=sampler if samplers_ok else None,
        pdf=pdf,
        cf=cf,
        atoms=tuple(sorted(atoms.items())),
        entropy=entropy,
        support=support,
    )


def custom(sampler: Optional[Sampler] = None, pdf=None, cf=None, atoms=(),
           entropy=None, support=None) -> AmplitudeLaw:
    """Wrap user-supplied handles.  Not serializable."""
    return AmplitudeLaw(kind="custom", sampler=sampler, pdf=pdf, cf=cf,
                        atoms=tuple(atoms), entropy=entropy, support=support)


def from_dict(d: dict) -> AmplitudeLaw:
    d = dict(d)
    kind = d.pop("kind")
    if kind == "point":
        return point(d["value"])
    if kind == "discrete":
        return discrete(d["locations"], d["probs"])
    if kind == "uniform":
        return uniform(d.get("low", 0.0), d.get("high", 1.0))
    if kind == "normal":
        return normal(d.get("loc", 0.0), d.get("scale", 1.0))
    if kind == "mixture":
        return mixture([from_dict(c) for c in d["components"]], d["weights"])
    raise ValueError(f"unknown amplitude kind {kind!r}")
