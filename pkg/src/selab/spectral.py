"""Fourier-side quantities: occupation kernels, characteristic functions,
return-probability series and the transient variance prediction.

The return-probability series is evaluated exactly on a discrete Fourier
grid: for a step law with support radius r, P(Z_k = l) is a trigonometric
polynomial of degree <= k r, so averaging psi(t)^k e^{-2 pi i <l, t>} over
the rank-G product grid reproduces the convolution power exactly whenever
G > k r + |l|_inf (no aliasing).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import rng, sources
from .ledger import LocalTimeLedger
from .sources import RandomWalkSource, StepDistribution, classify

Site = tuple[int, ...]


def kernel_eval(coords: np.ndarray, counts: np.ndarray,
                t_points: np.ndarray) -> np.ndarray:
    """K_n(t) = |sum_sites N(site) e^{2 pi i <site, t>}|^2 on given points."""
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim == 1:
        coords = coords[:, None]
    t_points = np.asarray(t_points, dtype=np.float64)
    if t_points.ndim == 1:
        t_points = t_points[:, None]
    phase = np.exp(2j * np.pi * (t_points @ coords.T))
    amp = phase @ counts.astype(np.float64)
    return np.abs(amp) ** 2


def kernel_from_ledger(ledger: LocalTimeLedger, t_points) -> np.ndarray:
    coords = np.array(list(ledger.counts.keys()), dtype=np.int64)
    counts = np.fromiter(ledger.counts.values(), dtype=np.int64,
                         count=len(ledger.counts))
    return kernel_eval(coords, counts, np.atleast_2d(np.asarray(t_points,
                                                                dtype=np.float64)))


def kernel_grid_mean(ledger: LocalTimeLedger, q: int) -> float:
    """Mean of K_n over the rank-q grid {0, 1/q, ..., (q-1)/q}^d.

    Equals V_n exactly as soon as q exceeds the diameter of the visited
    range in every coordinate (Parseval for the discrete torus).
    """
    axes = [np.arange(q) / q] * ledger.d
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return float(kernel_from_ledger(ledger, pts).mean())


def _pack_with_strides(coords: np.ndarray, margin: int) -> tuple[np.ndarray, list[int]]:
    lo = coords.min(axis=0) - margin
    hi = coords.max(axis=0) + margin
    widths = [int(h - l) + 1 for l, h in zip(lo, hi)]
    bits = sum(max(1, w - 1).bit_length() for w in widths)
    if bits > 62:
        raise OverflowError("site spread too large to pack")
    d = coords.shape[1]
    strides = [1] * d
    for j in range(d - 2, -1, -1):
        strides[j] = strides[j + 1] * widths[j + 1]
    key = np.zeros(coords.shape[0], dtype=np.int64)
    for j in range(d):
        key += (coords[:, j] - int(lo[j])) * strides[j]
    return key, strides


def lag_correlation(coords: np.ndarray, counts: np.ndarray,
                    lag: Sequence[int]) -> int:
    """sum_r N(r + lag) N(r) over the visited range."""
    coords = np.asarray(coords, dtype=np.int64)
    if coords.ndim == 1:
        coords = coords[:, None]
    lag = tuple(int(c) for c in lag)
    margin = max((abs(c) for c in lag), default=0)
    key, strides = _pack_with_strides(coords, margin)
    order = np.argsort(key)
    key_s, cnt_s = key[order], counts[order]
    offset = sum(c * s for c, s in zip(lag, strides))
    shifted = key_s + offset
    idx = np.searchsorted(key_s, shifted)
    idx_c = np.clip(idx, 0, key_s.size - 1)
    match = key_s[idx_c] == shifted
    return int(np.sum(cnt_s[match] * cnt_s[idx_c[match]]))


def quadratic_form(ledger: LocalTimeLedger, field) -> float:
    """sum_lags cov(lag) * sum_r N(r + lag) N(r), the exact sampling
    variance numerator of sum N(site) X(site) for the fixed ledger."""
    coords = np.array(list(ledger.counts.keys()), dtype=np.int64)
    counts = np.fromiter(ledger.counts.values(), dtype=np.int64,
                         count=len(ledger.counts))
    return _quadratic_form_arrays(coords, counts, field, ledger.d)


def _field_lags(field, d: int) -> list[Site]:
    window = getattr(field, "window", 0)
    lags = []
    for h in range(-window, window + 1):
        lag = [0] * d
        lag[0] = h
        lags.append(tuple(lag))
    return lags


def _quadratic_form_arrays(coords, counts, field, d: int) -> float:
    total = 0.0
    for lag in _field_lags(field, d):
        c = field.covariance(lag)
        if c != 0.0:
            total += c * lag_correlation(coords, counts, lag)
    return total


def psi(dist: StepDistribution, t: Sequence[float]) -> complex:
    """Characteristic function psi(t) = sum_a p_a e^{2 pi i <a, t>}."""
    t = np.asarray(t, dtype=np.float64)
    sup = dist.support().astype(np.float64)
    return complex(np.sum(dist.probs() * np.exp(2j * np.pi * (sup @ t))))


def phi(dist: StepDistribution, t: Sequence[float]) -> float:
    """Re[(1 + psi) / (1 - psi)], with the value 0 at t = 0 by convention.

    Raises when psi(t) = 1 at a nonzero grid point, which signals a
    periodic (non-aperiodic) law.
    """
    t = np.asarray(t, dtype=np.float64)
    if np.all(np.mod(t, 1.0) == 0.0):
        return 0.0
    z = psi(dist, t)
    if abs(1 - z) < 1e-12:
        raise ValueError(f"psi(t) = 1 at t = {tuple(t)}: law is not aperiodic")
    return ((1 + z) / (1 - z)).real


def phi_lambda(dist: StepDistribution, t: Sequence[float], lam: float) -> float:
    """(1 - lam^2 |psi|^2) / |1 - lam psi|^2 for 0 < lam < 1."""
    if not 0 < lam < 1:
        raise ValueError("lam must be in (0, 1)")
    z = psi(dist, t)
    return (1 - lam**2 * abs(z) ** 2) / abs(1 - lam * z) ** 2


@dataclass(frozen=True)
class ReturnSeries:
    """P(Z_k = l) for k = 0..kmax at the requested lags (and their
    negatives), with geometric tail extrapolation from the last terms."""

    kmax: int
    lags: tuple[Site, ...]
    probs: np.ndarray  # shape (len(lags), kmax + 1)
    tails: np.ndarray  # per-lag tail estimate for sum_{k > kmax}

    def _row(self, lag: Site) -> int:
        return self.lags.index(tuple(lag))

    def partial_sum(self, lag: Site, with_tail: bool = True) -> float:
        i = self._row(lag)
        s = float(self.probs[i, 1:].sum())
        return s + (float(self.tails[i]) if with_tail else 0.0)

    def i_value(self, lag: Site, with_tail: bool = True) -> float:
        """I(l) = -1{l=0} + sum_{k>=0} [P(Z_k=l) + P(Z_k=-l)], truncated."""
        lag = tuple(lag)
        neg = tuple(-c for c in lag)
        i, j = self._row(lag), self._row(neg)
        s = float(self.probs[i].sum() + self.probs[j].sum())
        if with_tail:
            s += float(self.tails[i] + self.tails[j])
        if all(c == 0 for c in lag):
            s -= 1.0
        return s


def _geometric_tail(p: np.ndarray) -> float:
    """Extrapolate sum_{k > kmax} from the last ~10 nonzero terms."""
    # ignore grid round-off: exact zeros come back as ~1e-17
    nz = np.flatnonzero(p[1:] > 1e-13) + 1
    if nz.size < 3:
        return 0.0
    ks = nz[-10:]
    vals = p[ks]
    slope = np.polyfit(ks.astype(np.float64), np.log(vals), 1)[0]
    rho_step = math.exp(slope)
    if rho_step >= 1.0:
        return math.inf
    gap = int(round(np.diff(ks).mean()))
    gap = max(gap, 1)
    r = rho_step**gap
    return float(vals[-1] * r / (1 - r))


def return_series(dist: StepDistribution, kmax: int,
                  lags: Sequence[Sequence[int]] = ((0,),)) -> ReturnSeries:
    """Exact convolution-power probabilities via the discrete Fourier grid.

    The grid has rank G = 2 * kmax * radius + 1 along every axis, large
    enough that no convolution mass aliases for k <= kmax and the requested
    lags.  Lags along later axes are grouped so the grid is swept once.
    """
    d = dist.d
    want: list[Site] = []
    for lag in lags:
        lag = tuple(int(c) for c in lag)
        if len(lag) != d:
            raise ValueError("lag dimension mismatch")
        for cand in (lag, tuple(-c for c in lag)):
            if cand not in want:
                want.append(cand)
    radius = max(dist.radius(), 1)
    if any(abs(c) > kmax * radius for lag in want for c in lag):
        raise ValueError("lag outside the reachable range for kmax")
    g = 2 * kmax * radius + 1

    support = dist.support()
    probs = dist.probs()
    symmetric = dist.is_symmetric()

    # group the requested lags by their coordinates on axes 1..d-1
    rest_groups: list[tuple[tuple[int, ...], list[int]]] = []
    lag_group = []
    for li, lag in enumerate(want):
        rest = lag[1:]
        for gi, (r, members) in enumerate(rest_groups):
            if r == rest:
                members.append(li)
                lag_group.append(gi)
                break
        else:
            rest_groups.append((rest, [li]))
            lag_group.append(len(rest_groups) - 1)

    # per-slice coordinates on axes 1..d-1
    if d > 1:
        axes = [np.arange(g)] * (d - 1)
        mesh = np.meshgrid(*axes, indexing="ij")
        rest_coords = np.stack([m.ravel() for m in mesh], axis=1)  # (g^(d-1), d-1)
    else:
        rest_coords = np.zeros((1, 0), dtype=np.int64)
    slice_size = rest_coords.shape[0]

    # atom phases on the slice (independent of the axis-0 grid index)
    atom_rest = np.empty((len(support), slice_size), dtype=np.complex128)
    for ai, a in enumerate(support):
        phase = np.zeros(slice_size)
        for j in range(1, d):
            phase = phase + a[j] * rest_coords[:, j - 1]
        atom_rest[ai] = np.exp(2j * np.pi * phase / g)

    group_weights = []
    for rest, _ in rest_groups:
        if all(c == 0 for c in rest):
            group_weights.append(None)  # weight identically 1
        else:
            phase = np.zeros(slice_size)
            for j, c in enumerate(rest):
                phase = phase + c * rest_coords[:, j]
            group_weights.append(np.exp(-2j * np.pi * phase / g))

    half = symmetric
    i1_range = range(g // 2 + 1) if half else range(g)
    n_groups = len(rest_groups)
    sums = np.zeros((n_groups, kmax + 1, g), dtype=np.complex128)
    for i1 in i1_range:
        slice_psi = np.zeros(slice_size, dtype=np.complex128)
        for ai, a in enumerate(support):
            slice_psi += probs[ai] * np.exp(2j * np.pi * a[0] * i1 / g) * atom_rest[ai]
        if symmetric:
            slice_psi = slice_psi.real.astype(np.float64)
        w = np.ones_like(slice_psi)
        for gi in range(n_groups):
            gw = group_weights[gi]
            sums[gi, 0, i1] = w.sum() if gw is None else (w * gw).sum()
        for k in range(1, kmax + 1):
            w = w * slice_psi
            for gi in range(n_groups):
                gw = group_weights[gi]
                sums[gi, k, i1] = w.sum() if gw is None else (w * gw).sum()
    if half:
        for i1 in range(g // 2 + 1, g):
            sums[:, :, i1] = np.conj(sums[:, :, g - i1])

    i1_grid = np.arange(g)
    out = np.empty((len(want), kmax + 1))
    for li, lag in enumerate(want):
        gi = lag_group[li]
        w1 = np.exp(-2j * np.pi * lag[0] * i1_grid / g)
        vals = (sums[gi] @ w1).real / g**d
        out[li] = np.clip(vals, 0.0, 1.0)

    tails = np.array([_geometric_tail(out[li]) for li in range(len(want))])
    return ReturnSeries(kmax=kmax, lags=tuple(want), probs=out, tails=tails)


@dataclass(frozen=True)
class TransientVarianceReport:
    mc_estimate: float
    mc_stderr: float
    series_prediction: float
    tail_bound: float
    defect_estimate: float
    positive: bool
    n: int
    replicates: int

    def record(self) -> dict:
        return {
            "mc_estimate": self.mc_estimate,
            "mc_stderr": self.mc_stderr,
            "series_prediction": self.series_prediction,
            "tail_bound": self.tail_bound,
            "defect_estimate": self.defect_estimate,
            "positive": self.positive,
        }


def transient_variance_report(dist: StepDistribution, field, n: int,
                              replicates: int, seed_base: int,
                              kmax: int = 200,
                              series: ReturnSeries | None = None
                              ) -> TransientVarianceReport:
    """Two independent routes to lim V_n(field)/n for a transient walk.

    Route (a): Monte Carlo over walk realizations of the exact quadratic
    form (field covariance contracted against lag correlations of the
    local times), divided by n.  Route (b): the return-probability series
    sum_lags cov(lag) I(lag).  The defect estimate is (a) - (b).
    """
    cls = classify(dist)
    if cls.recurrence != "transient":
        raise ValueError(f"law is {cls.recurrence}, need transient")
    d = dist.d
    lags = _field_lags(field, d)
    if series is None:
        series = return_series(dist, kmax, lags)
    prediction = 0.0
    tail_bound = 0.0
    for lag in lags:
        c = field.covariance(lag)
        if c == 0.0:
            continue
        prediction += c * series.i_value(lag, with_tail=True)
        neg = tuple(-x for x in lag)
        tail_bound += abs(c) * float(series.tails[series.lags.index(lag)]
                                     + series.tails[series.lags.index(neg)])
    vals = np.empty(replicates)
    for rep in range(replicates):
        cfg = RandomWalkSource(dist, rng.derive(seed_base, "walk", rep))
        coords = sources.generate(cfg, n)
        key, _ = _pack_with_strides(coords, 0)
        _, inv, cnt = np.unique(key, return_inverse=True, return_counts=True)
        first = np.zeros(cnt.size, dtype=np.int64)
        first[inv[::-1]] = np.arange(n - 1, -1, -1)
        uniq_coords = coords[first]
        vals[rep] = _quadratic_form_arrays(uniq_coords, cnt, field, d) / n
    mc = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(replicates))
    return TransientVarianceReport(
        mc_estimate=mc, mc_stderr=stderr, series_prediction=prediction,
        tail_bound=tail_bound, defect_estimate=mc - prediction,
        positive=prediction > 0, n=n, replicates=replicates)
