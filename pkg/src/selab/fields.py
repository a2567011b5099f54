"""Stationary scalar fields indexed by lattice sites.

A field assigns one real value to every site of Z^d as a pure function of
(spec, seed, site): values are computed lazily from a site-keyed hash, so a
trajectory can sample the field anywhere without materializing a box, and
revisits always see the same value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from . import rng


def _coords(sites) -> np.ndarray:
    c = np.asarray(sites, dtype=np.int64)
    if c.ndim == 1:
        c = c[:, None]
    return c


@dataclass(frozen=True)
class UniformField:
    """I.i.d. Uniform[0, 1) values."""

    def site_values(self, seed: int, sites) -> np.ndarray:
        return rng.site_uniforms(seed, _coords(sites))

    def cdf(self, s) -> np.ndarray:
        return np.clip(np.asarray(s, dtype=np.float64), 0.0, 1.0)

    def covariance(self, lag: Sequence[int]) -> float:
        return 1.0 / 12.0 if all(c == 0 for c in lag) else 0.0

    def mixing_bound(self, lag: Sequence[int]) -> float:
        return 0.25 if all(c == 0 for c in lag) else 0.0

    @property
    def bound(self) -> float | None:
        return 1.0

    @property
    def variance(self) -> float:
        return 1.0 / 12.0


@dataclass(frozen=True)
class GaussianField:
    """I.i.d. Gaussian values with the given mean and standard deviation."""

    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def site_values(self, seed: int, sites) -> np.ndarray:
        u = rng.site_uniforms(seed, _coords(sites))
        # keep inverse-cdf input strictly inside (0, 1)
        u = np.clip(u, 2.0**-53, 1.0 - 2.0**-53)
        return self.mu + self.sigma * ndtri(u)

    def cdf(self, s) -> np.ndarray:
        return ndtr((np.asarray(s, dtype=np.float64) - self.mu) / self.sigma)

    def covariance(self, lag: Sequence[int]) -> float:
        return self.sigma**2 if all(c == 0 for c in lag) else 0.0

    def mixing_bound(self, lag: Sequence[int]) -> float:
        return 0.25 if all(c == 0 for c in lag) else 0.0

    @property
    def bound(self) -> float | None:
        return None

    @property
    def variance(self) -> float:
        return self.sigma**2


@dataclass(frozen=True)
class DiscreteField:
    """I.i.d. values drawn from a finite real-valued law."""

    atoms: tuple[tuple[float, float], ...]  # (value, probability)

    def __init__(self, atoms):
        atoms = tuple((float(v), float(p)) for v, p in atoms)
        if not atoms:
            raise ValueError("need at least one atom")
        if any(p < 0 for _, p in atoms):
            raise ValueError("probabilities must be nonnegative")
        if abs(sum(p for _, p in atoms) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")
        if len({v for v, _ in atoms}) != len(atoms):
            raise ValueError("duplicate atom values")
        object.__setattr__(self, "atoms", atoms)

    def site_values(self, seed: int, sites) -> np.ndarray:
        u = rng.site_uniforms(seed, _coords(sites))
        cum = np.cumsum([p for _, p in self.atoms])
        cum[-1] = 1.0
        vals = np.array([v for v, _ in self.atoms])
        return vals[np.searchsorted(cum, u, side="right")]

    def cdf(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        out = np.zeros_like(s)
        for v, p in self.atoms:
            out = out + p * (s >= v)
        return out

    @property
    def mean(self) -> float:
        return sum(v * p for v, p in self.atoms)

    def covariance(self, lag: Sequence[int]) -> float:
        if not all(c == 0 for c in lag):
            return 0.0
        m = self.mean
        return sum(p * (v - m) ** 2 for v, p in self.atoms)

    def mixing_bound(self, lag: Sequence[int]) -> float:
        return 0.25 if all(c == 0 for c in lag) else 0.0

    @property
    def bound(self) -> float | None:
        return max(abs(v) for v, _ in self.atoms)

    @property
    def variance(self) -> float:
        return self.covariance((0,))


@dataclass(frozen=True)
class MovingAverageField:
    """Finite moving average of i.i.d. Gaussian innovations along axis 0.

    X(site) = sum_j weights[j] * xi(site + j * e_1), with xi i.i.d. centered
    Gaussian of standard deviation ``sigma``.  Nonnegative weights keep the
    field positively associated; the marginal is Gaussian with variance
    sigma^2 * sum weights^2 and the covariance is supported on lags along
    axis 0 within the window.
    """

    weights: tuple[float, ...]
    sigma: float = 1.0

    def __init__(self, weights, sigma=1.0):
        weights = tuple(float(w) for w in weights)
        if not weights:
            raise ValueError("need at least one weight")
        if any(w < 0 for w in weights):
            raise ValueError("weights must be nonnegative")
        if sum(weights) <= 0:
            raise ValueError("weights must not be all zero")
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "sigma", float(sigma))

    @property
    def window(self) -> int:
        return len(self.weights) - 1

    def _innovations(self, seed: int, coords: np.ndarray) -> np.ndarray:
        u = rng.site_uniforms(rng.derive(seed, "innovations"), coords)
        u = np.clip(u, 2.0**-53, 1.0 - 2.0**-53)
        return self.sigma * ndtri(u)

    def site_values(self, seed: int, sites) -> np.ndarray:
        coords = _coords(sites)
        out = np.zeros(coords.shape[0])
        shifted = coords.copy()
        for j, w in enumerate(self.weights):
            shifted[:, 0] = coords[:, 0] + j
            out += w * self._innovations(seed, shifted)
        return out

    @property
    def variance(self) -> float:
        return self.sigma**2 * sum(w * w for w in self.weights)

    def cdf(self, s) -> np.ndarray:
        return ndtr(np.asarray(s, dtype=np.float64) / math.sqrt(self.variance))

    def covariance(self, lag: Sequence[int]) -> float:
        lag = tuple(int(c) for c in lag)
        if any(c != 0 for c in lag[1:]):
            return 0.0
        h = abs(lag[0])
        if h > self.window:
            return 0.0
        w = self.weights
        return self.sigma**2 * sum(w[j] * w[j + h] for j in range(len(w) - h))

    def mixing_bound(self, lag: Sequence[int]) -> float:
        return 0.0 if self.covariance(lag) == 0.0 else 0.25

    @property
    def bound(self) -> float | None:
        return None


FieldSpec = UniformField | GaussianField | DiscreteField | MovingAverageField
