"""Tabulated densities on uniform grids.

Covers characteristic-function inversion, differential entropy by
quadrature, total-variation distance and the compound-Poisson jump
density.  Grid integrals use the trapezoid rule.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import signal, stats

MASS_TOL = 1e-8


class DensityInversionError(RuntimeError):
    """Characteristic-function inversion could not meet its accuracy checks."""


def _trapz(v, dx) -> float:
    if v.size < 2:
        return 0.0
    return float(dx * (v.sum() - 0.5 * (v[0] + v[-1])))


@dataclass(frozen=True)
class DensityGrid:
    """Density values at ``x0 + k*dx`` plus the mass declared outside the grid."""

    x0: float
    dx: float
    values: np.ndarray
    tail_mass: float = 0.0
    clamped_mass: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if not self.dx > 0:
            raise ValueError("dx must be positive")
        if v.ndim != 1 or v.size < 2:
            raise ValueError("need at least two grid values")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("density values must be finite and nonnegative")
        if not 0 <= self.tail_mass <= 1:
            raise ValueError("tail mass must lie in [0, 1]")
        total = self.mass() + self.tail_mass
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"grid mass {self.mass()!r} + tail {self.tail_mass!r} != 1")

    @classmethod
    def tabulate(cls, pdf: Callable, lo: float, hi: float, points: int,
                 tail_mass: Optional[float] = None) -> "DensityGrid":
        """Sample ``pdf`` on ``points`` nodes spanning ``[lo, hi]``.

        Without ``tail_mass`` the deficit ``1 - mass`` is declared as tail
        (a small excess is normalized away).  With ``tail_mass`` the values
        are rescaled so the grid carries exactly ``1 - tail_mass``.
        """
        xs = np.linspace(lo, hi, points)
        dx = (hi - lo) / (points - 1)
        v = np.asarray(pdf(xs), dtype=np.float64)
        mass = _trapz(v, dx)
        if tail_mass is None:
            if mass > 1.0:
                return cls(lo, dx, v / mass, 0.0)
            return cls(lo, dx, v, max(0.0, 1.0 - mass))
        return cls(lo, dx, v * ((1.0 - tail_mass) / mass), tail_mass)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.values.size)

    @property
    def x_end(self) -> float:
        return self.x0 + self.dx * (self.values.size - 1)

    def mass(self) -> float:
        return _trapz(self.values, self.dx)

    def sup(self) -> float:
        return float(self.values.max())

    def pdf(self, x):
        return np.interp(x, self.x, self.values, left=0.0, right=0.0)

    def cdf(self, x):
        """Integral of the piecewise-linear interpolant from ``x0`` to ``x``."""
        x = np.asarray(x, dtype=np.float64)
        v = self.values
        cum = np.concatenate([[0.0], np.cumsum(0.5 * self.dx * (v[1:] + v[:-1]))])
        t = np.clip((x - self.x0) / self.dx, 0.0, v.size - 1)
        k = np.minimum(np.floor(t).astype(np.int64), v.size - 2)
        frac = (t - k) * self.dx
        slope = (v[k + 1] - v[k]) / self.dx
        return cum[k] + frac * v[k] + 0.5 * slope * frac**2

    def abs_moment(self, alpha: float) -> float:
        return _trapz(np.abs(self.x) ** alpha * self.values, self.dx)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\r\n")
            writer.writerow(["x", "p"])
            for xv, pv in zip(self.x.tolist(), self.values.tolist()):
                writer.writerow([repr(xv), repr(pv)])


def cf_to_density(cf: Callable, window: tuple, grid_points: int, pad: int = 4,
                  tail_limit: float = 1e-4, clamp_limit: float = 1e-6) -> DensityGrid:
    """Invert a characteristic function on ``grid_points`` nodes over ``window``.

    The inversion integral is evaluated with the trapezoid rule on a
    frequency grid of spacing ``2*pi / (pad * grid_points * dx)`` via one
    FFT; the implied periodization has period ``pad`` times the window, so
    mass outside the window is not folded back onto it.  Negative Gibbs
    lobes are clamped to zero.

    Raises ``DensityInversionError`` if the clamped mass exceeds
    ``clamp_limit`` or the estimated mass outside the window exceeds
    ``tail_limit``.
    """
    lo, hi = map(float, window)
    if not hi > lo or grid_points < 2:
        raise ValueError("need hi > lo and at least two grid points")
    dx = (hi - lo) / (grid_points - 1)
    nfft = 1 << int(math.ceil(math.log2(pad * grid_points)))
    omega = 2 * math.pi * np.fft.fftfreq(nfft, d=dx)
    phi = np.asarray(cf(omega), dtype=np.complex128)
    spectrum = phi * np.exp(-1j * omega * lo)
    p = np.fft.fft(spectrum)[:grid_points].real / (nfft * dx)

    neg = np.minimum(p, 0.0)
    clamped = -_trapz(neg, dx)
    if clamped > clamp_limit:
        raise DensityInversionError(f"clamped negative mass {clamped:.3g} exceeds {clamp_limit:g}")
    p = np.maximum(p, 0.0)
    mass = _trapz(p, dx)
    tail = 1.0 - mass
    if tail > tail_limit:
        raise DensityInversionError(f"mass outside window {tail:.3g} exceeds {tail_limit:g}")
    if tail < 0:
        p = p / mass
        tail = 0.0
    return DensityGrid(lo, dx, p, tail, clamped)


def _tail_entropy(grid: DensityGrid, tail: str, tail_index: Optional[float]) -> float:
    """Entropy carried by the declared tail mass.

    The tail mass is split between the two sides in proportion to the edge
    densities.  Each side of mass t with edge density p contributes
    ``t*log(1/p) + t*k``: ``k = 1`` models an exponential tail and
    ``k = (1 + a)/a`` a power tail with density ~ |x|**-(1+a); both are the
    exact entropies of those tail shapes matched to (t, p).
    """
    tau = grid.tail_mass
    if tau < 1e-12:
        return 0.0
    edges = np.array([grid.values[0], grid.values[-1]])
    if edges.sum() <= 0:
        raise ValueError("tail mass declared but both edge densities are zero")
    if tail == "exponential":
        k = 1.0
    elif tail == "power":
        if not tail_index or tail_index <= 0:
            raise ValueError("power tail needs a positive tail_index")
        k = (1 + tail_index) / tail_index
    else:
        raise ValueError(f"unknown tail model {tail!r}")
    out = 0.0
    for pe in edges:
        if pe > 0:
            t = tau * pe / edges.sum()
            out += t * (math.log(1 / pe) + k)
    return out


def differential_entropy(p, tail: str = "exponential", tail_index: Optional[float] = None) -> float:
    """Differential entropy in nats.

    Step densities are integrated exactly; grids by the trapezoid rule on
    ``-p log p`` (with ``0 log 0 = 0``) plus the tail term described in
    ``_tail_entropy``.
    """
    if hasattr(p, "differential_entropy") and not isinstance(p, DensityGrid):
        return p.differential_entropy()
    v = p.values
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(v > 0, -v * np.log(np.where(v > 0, v, 1.0)), 0.0)
    return _trapz(integrand, p.dx) + _tail_entropy(p, tail, tail_index)


def _align(p: DensityGrid, q: DensityGrid, resample: bool):
    same_dx = abs(p.dx - q.dx) <= 1e-12 * max(p.dx, q.dx)
    if same_dx:
        shift = (q.x0 - p.x0) / p.dx
        if abs(shift - round(shift)) <= 1e-9:
            lo = min(p.x0, q.x0)
            size = int(round((max(p.x_end, q.x_end) - lo) / p.dx)) + 1
            out = []
            for g in (p, q):
                off = int(round((g.x0 - lo) / p.dx))
                arr = np.zeros(size)
                arr[off:off + g.values.size] = g.values
                out.append(arr)
            return out[0], out[1], p.dx
    if not resample:
        raise ValueError("grids are not aligned; pass resample=True to interpolate")
    dx = min(p.dx, q.dx)
    lo, hi = min(p.x0, q.x0), max(p.x_end, q.x_end)
    xs = np.linspace(lo, hi, int(math.ceil((hi - lo) / dx)) + 1)
    return p.pdf(xs), q.pdf(xs), xs[1] - xs[0]


def tv_distance(p, q, resample: bool = False) -> float:
    """L1 distance between two densities (in [0, 2])."""
    if not isinstance(p, DensityGrid):
        if p.m != q.m:
            raise ValueError("step densities must share the same m")
        lo, hi = min(p.lo, q.lo), max(p.hi, q.hi)
        a = np.zeros(hi - lo + 1)
        b = np.zeros(hi - lo + 1)
        a[p.lo - lo:p.hi - lo + 1] = p.probs
        b[q.lo - lo:q.hi - lo + 1] = q.probs
        return float(min(2.0, np.abs(a - b).sum() + abs(p.tail_mass - q.tail_mass)))
    a, b, dx = _align(p, q, resample)
    return float(min(2.0, _trapz(np.abs(a - b), dx) + abs(p.tail_mass - q.tail_mass)))


def _conv(a: np.ndarray, b: np.ndarray, dx: float) -> np.ndarray:
    """Grid convolution with trapezoid end weights on the first factor."""
    w = a.copy()
    w[0] *= 0.5
    w[-1] *= 0.5
    return np.maximum(signal.fftconvolve(w, b) * dx, 0.0)


def jump_count_weights(ratio: float, k_max: int) -> np.ndarray:
    """Weights ratio**k / k! / (e**ratio - 1) for k = 1..k_max."""
    k = np.arange(1, k_max + 1)
    logw = k * math.log(ratio) - np.array([math.lgamma(i + 1) for i in k])
    return np.exp(logw) / math.expm1(ratio)


def _truncated_tail(ratio: float, k: int) -> float:
    """Mass of the jump-count weights beyond ``k``."""
    return float(stats.poisson.sf(k, ratio) / -math.expm1(-ratio))


def compound_density_An(p_A: DensityGrid, rate: float, n: int, k_max: Optional[int] = None,
                        tol: float = 1e-10) -> DensityGrid:
    """Density of the sum of K >= 1 iid amplitudes, K ~ Poisson(rate/n) given K >= 1.

    Self-convolutions are computed spectrally with zero padding.  Each
    k-fold density is renormalized; the weight beyond ``k_max`` is
    reported as the result's ``tail_mass``.
    """
    if p_A.tail_mass > 1e-9:
        raise ValueError("amplitude grid must carry all of its mass")
    ratio = rate / n
    if not ratio > 0:
        raise ValueError("rate/n must be positive")
    if k_max is None:
        k_max = 1
        while _truncated_tail(ratio, k_max) >= tol:
            k_max += 1
    elif _truncated_tail(ratio, k_max) >= tol:
        raise ValueError(f"k_max={k_max} leaves {_truncated_tail(ratio, k_max):.3g} >= {tol:g}")
    trunc = _truncated_tail(ratio, k_max)

    dx = p_A.dx
    i0 = p_A.x0 / dx
    if abs(i0 - round(i0)) > 1e-9:
        raise ValueError("amplitude grid origin must lie on the lattice dx*Z")
    i0 = int(round(i0))
    i1 = i0 + p_A.values.size - 1
    out_lo = min(i0, k_max * i0)
    out_hi = max(i1, k_max * i1)
    out = np.zeros(out_hi - out_lo + 1)

    weights = jump_count_weights(ratio, k_max)
    base = p_A.values / _trapz(p_A.values, dx)
    power = base
    for k in range(1, k_max + 1):
        if k > 1:
            power = _conv(power, base, dx)
            power = power / _trapz(power, dx)
        off = k * i0 - out_lo
        out[off:off + power.size] += weights[k - 1] * power

    values = out * ((1.0 - trunc) / _trapz(out, dx))
    return DensityGrid(out_lo * dx, dx, values, trunc)


def stable_tail_constant(alpha: float) -> float:
    """C with P(|X| > x) ~ 2C x**-alpha for a unit symmetric stable law."""
    return math.gamma(alpha) * math.sin(math.pi * alpha / 2) / math.pi


def stable_density(p, tail_target: float = 1e-4, max_points: int = 1 << 22) -> DensityGrid:
    """Density of a stable X_0 on a window sized to leave about ``tail_target`` outside."""
    from .noise_models import stable_exponent

    if p.alpha == 2:
        half = 40.0 * p.sigma
    else:
        half = max(50.0, (2 * stable_tail_constant(p.alpha) / tail_target) ** (1 / p.alpha)) * p.sigma
    centre = p.mu
    dx = min(p.sigma / 100, 2 * half / 2**16)
    points = min(max_points, int(math.ceil(2 * half / dx)) + 1)
    return cf_to_density(lambda w: np.exp(stable_exponent(p, w)), (centre - half, centre + half),
                         points, tail_limit=max(1e-4, 2 * tail_target))
