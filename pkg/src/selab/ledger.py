"""Streaming occupation statistics for integer lattice trajectories.

For a sequence z_0, z_1, ... of sites in Z^d the ledger tracks, after n
steps, the local times N_n(site), the maximal local time M_n, the number of
self-intersections V_n = sum N_n(site)^2, and the cardinality of the visited
range -- all updated in O(1) per step:

    V_n = V_{n-1} + 2 * N_{n-1}(z_n) + 1
    M_n = max(M_{n-1}, N_{n-1}(z_n) + 1)

It also accumulates the series sum_k M_k / k^2, whose convergence is one of
the sufficient conditions checked by :func:`condition_report`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

Site = tuple[int, ...]

_INT64_MIN = -(1 << 63)
_INT64_MAX = (1 << 63) - 1

CSV_HEADER = ("n", "M", "V", "range", "m2_over_v", "pqd_partial_sum")


class LocalTimeLedger:
    """Exact streaming bookkeeping of local times along a trajectory."""

    __slots__ = ("d", "n", "counts", "max_count", "self_intersections",
                 "range_card", "_pqd_sum", "_pqd_comp")

    def __init__(self, d: int):
        if d < 1:
            raise ValueError("dimension must be >= 1")
        self.d = d
        self.n = 0
        self.counts: dict[Site, int] = {}
        self.max_count = 0
        self.self_intersections = 0
        self.range_card = 0
        self._pqd_sum = 0.0
        self._pqd_comp = 0.0  # Kahan compensation

    def record(self, site: Sequence[int]) -> None:
        site = tuple(site)
        if len(site) != self.d:
            raise ValueError(f"site has {len(site)} coordinates, expected {self.d}")
        for c in site:
            if not (_INT64_MIN <= c <= _INT64_MAX):
                raise OverflowError(f"coordinate {c} does not fit in int64")
        c = self.counts.get(site, 0)
        if c == 0:
            self.range_card += 1
        self.counts[site] = c + 1
        self.self_intersections += 2 * c + 1
        if c + 1 > self.max_count:
            self.max_count = c + 1
        self.n += 1
        # compensated accumulation of M_n / n^2
        term = self.max_count / (self.n * self.n) - self._pqd_comp
        total = self._pqd_sum + term
        self._pqd_comp = (total - self._pqd_sum) - term
        self._pqd_sum = total

    def record_many(self, sites: Iterable[Sequence[int]]) -> None:
        for s in sites:
            self.record(s)

    @classmethod
    def from_trajectory(cls, sites: Sequence[Sequence[int]] | np.ndarray
                        ) -> "LocalTimeLedger":
        """Bulk constructor; same final state as record_many, much faster."""
        coords = _as_coords(sites)
        led = cls(coords.shape[1])
        stats = trajectory_stats(coords)
        from collections import Counter
        led.counts = dict(Counter(map(tuple, coords.tolist())))
        led.n = coords.shape[0]
        led.max_count = int(stats.m[-1])
        led.self_intersections = int(stats.v[-1])
        led.range_card = int(stats.range_card[-1])
        led._pqd_sum = float(stats.pqd[-1])
        led.rescan()
        return led

    @property
    def pqd_partial_sum(self) -> float:
        return self._pqd_sum

    @property
    def m2_over_v(self) -> float:
        if self.n == 0:
            raise ValueError("empty ledger")
        return self.max_count**2 / self.self_intersections

    def checkpoint(self) -> tuple[int, int, int, float]:
        """(n, M, V, pqd_partial_sum) -- the condition-report row."""
        return (self.n, self.max_count, self.self_intersections, self._pqd_sum)

    def snapshot_row(self) -> tuple[int, int, int, int, float, float]:
        """One CSV row: n, M, V, range, m2_over_v, pqd_partial_sum."""
        return (self.n, self.max_count, self.self_intersections,
                self.range_card, self.m2_over_v, self._pqd_sum)

    def rescan(self) -> None:
        """Recompute every statistic from the stored counts; raise on drift."""
        v = sum(c * c for c in self.counts.values())
        m = max(self.counts.values(), default=0)
        n = sum(self.counts.values())
        if (v, m, n, len(self.counts)) != (
                self.self_intersections, self.max_count, self.n, self.range_card):
            raise AssertionError("ledger self-check failed: streaming state "
                                 "disagrees with a full rescan of the counts")


def _as_coords(sites: Sequence[Sequence[int]] | np.ndarray) -> np.ndarray:
    coords = np.asarray(sites, dtype=np.int64)
    if coords.ndim == 1:
        coords = coords[:, None]
    return coords


def pack_sites(coords: np.ndarray, margin: int = 0) -> np.ndarray:
    """Injectively pack (n, d) int64 coordinates into a single int64 key.

    ``margin`` widens each axis so that keys of sites shifted by up to
    ``margin`` in every coordinate are still computed with the same strides
    (packing is affine, so a lattice shift becomes a constant key offset).
    """
    coords = _as_coords(coords)
    lo = coords.min(axis=0).astype(object) - margin
    hi = coords.max(axis=0).astype(object) + margin
    widths = [int(h - l) + 1 for l, h in zip(lo, hi)]
    bits = sum(max(1, w - 1).bit_length() for w in widths)
    if bits > 62:
        raise OverflowError("site spread too large to pack into int64 keys")
    key = np.zeros(coords.shape[0], dtype=np.int64)
    for j in range(coords.shape[1]):
        key = key * widths[j] + (coords[:, j] - int(lo[j]))
    return key


def brute_force_stats(sites: Sequence[Sequence[int]] | np.ndarray,
                      block: int = 4096) -> tuple[int, int, dict[Site, int]]:
    """Independent O(n^2) oracle for (V_n, M_n, local-time table).

    V is obtained by counting ordered coincident pairs (i, j) with
    z_i == z_j, not from the ledger recursion.
    """
    coords = _as_coords(sites)
    n = coords.shape[0]
    key = pack_sites(coords)
    v = 0
    for start in range(0, n, block):
        chunk = key[start:start + block]
        v += int(np.count_nonzero(chunk[:, None] == key[None, :]))
    counts: dict[Site, int] = {}
    for row in coords:
        t = tuple(int(x) for x in row)
        counts[t] = counts.get(t, 0) + 1
    m = max(counts.values(), default=0)
    return v, m, counts


@dataclass(frozen=True)
class TrajectoryStats:
    """Per-step occupation statistics for a whole trajectory at once."""

    occupation: np.ndarray  # occupation[k] = N_{k+1}(z_k), count incl. step k
    v: np.ndarray           # V_1..V_n
    m: np.ndarray           # M_1..M_n
    range_card: np.ndarray
    pqd: np.ndarray         # partial sums of M_k / k^2

    def row(self, n: int) -> tuple[int, int, int, int, float, float]:
        i = n - 1
        return (n, int(self.m[i]), int(self.v[i]), int(self.range_card[i]),
                float(self.m[i]) ** 2 / float(self.v[i]), float(self.pqd[i]))


def trajectory_stats(sites: Sequence[Sequence[int]] | np.ndarray) -> TrajectoryStats:
    """Vectorized equivalent of replaying the trajectory through a ledger.

    occupation ranks come from a stable sort of the site keys: within each
    group of equal sites the k-th visit (in trajectory order) gets rank k.
    """
    coords = _as_coords(sites)
    n = coords.shape[0]
    key = pack_sites(coords)
    order = np.argsort(key, kind="stable")
    sorted_key = key[order]
    new_group = np.empty(n, dtype=bool)
    new_group[0] = True
    np.not_equal(sorted_key[1:], sorted_key[:-1], out=new_group[1:])
    group_start = np.maximum.accumulate(np.where(new_group, np.arange(n), 0))
    rank_sorted = np.arange(n) - group_start + 1
    occ = np.empty(n, dtype=np.int64)
    occ[order] = rank_sorted
    v = np.cumsum(2 * occ - 1)
    m = np.maximum.accumulate(occ)
    rng = np.cumsum(occ == 1)
    k = np.arange(1, n + 1, dtype=np.float64)
    pqd = np.cumsum(m / (k * k))
    return TrajectoryStats(occ, v, m, rng, pqd)


def subset_lower_bound(ledger: LocalTimeLedger,
                       subset: Iterable[Sequence[int]]) -> Fraction:
    """Cauchy-Schwarz lower bound (sum of local times on A)^2 / |A| <= V."""
    sites = {tuple(s) for s in subset}
    if not sites:
        raise ValueError("subset must be nonempty")
    for s in sites:
        if len(s) != ledger.d:
            raise ValueError("subset site dimension mismatch")
    hits = sum(ledger.counts.get(s, 0) for s in sites)
    return Fraction(hits * hits, len(sites))


def range_lower_bound(ledger: LocalTimeLedger) -> Fraction:
    """n^2 / |range| <= V (the subset bound applied to the visited range)."""
    if ledger.n == 0:
        raise ValueError("empty ledger")
    return Fraction(ledger.n * ledger.n, ledger.range_card)


@dataclass(frozen=True)
class DispersionBound:
    """Lower bound on V_n for one-dimensional sequences from their spread.

    ``bound`` maximizes (1 - lam^-2)^2 n^2 / (2 lam sigma + 1) over the
    sampled multipliers; ``stated_constant`` and ``proof_constant`` are the
    two classical constants (n^2 / (9 sigma) vs (9/80) n^2 / sigma) implied
    at lam = 2 for sigma >= 1.
    """

    n: int
    mean: float
    sigma: float
    bound: float
    best_lambda: float
    stated_constant: float = 1.0 / 9.0
    proof_constant: float = 9.0 / 80.0

    LAMBDAS = (1.5, 2.0, 3.0, 4.0)


def dispersion_bound(sites: Sequence[Sequence[int]] | np.ndarray) -> DispersionBound:
    coords = _as_coords(sites)
    if coords.shape[1] != 1:
        raise ValueError("dispersion bound applies to one-dimensional sequences")
    z = coords[:, 0].astype(np.float64)
    n = z.size
    if n == 0:
        raise ValueError("empty trajectory")
    mean = float(z.mean())
    sigma = float(np.sqrt(np.mean((z - mean) ** 2)))
    best, best_lam = -math.inf, None
    for lam in DispersionBound.LAMBDAS:
        val = (1 - lam**-2) ** 2 * n * n / (2 * lam * sigma + 1)
        if val > best:
            best, best_lam = val, lam
    return DispersionBound(n=n, mean=mean, sigma=sigma, bound=best,
                           best_lambda=best_lam)


@dataclass(frozen=True)
class ConditionReport:
    """Diagnostics deciding which limit theorems the trajectory supports."""

    beta_fit: float      # LS slope of log(n^2/V) against log(log n)
    fclt_flag: bool      # M^2/V strictly decreasing at the end and small
    pqd_flag: bool       # sum M_k/k^2 increments shrinking geometrically
    final_m2_over_v: float
    zeta_note: str


def condition_report(checkpoints: Sequence[tuple[int, int, int, float]]
                     ) -> ConditionReport:
    """Evaluate sufficient-condition diagnostics from ledger checkpoints.

    Each checkpoint is (n, M, V, pqd_partial_sum); at least three are
    required, with strictly increasing n and the first n >= 16 so that
    log(log n) is comfortably positive.
    """
    if len(checkpoints) < 3:
        raise ValueError("need at least 3 checkpoints")
    ns = [c[0] for c in checkpoints]
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("checkpoint sizes must be strictly increasing")
    if ns[0] < 16:
        raise ValueError("first checkpoint must have n >= 16")

    x = np.array([math.log(math.log(n)) for n, _, _, _ in checkpoints])
    y = np.array([math.log(n * n / v) for n, _, v, _ in checkpoints])
    slope = float(np.polyfit(x, y, 1)[0])

    ratios = [m * m / v for _, m, v, _ in checkpoints[-3:]]
    fclt = ratios[0] > ratios[1] > ratios[2] and ratios[2] < 0.1

    sums = [c[3] for c in checkpoints[-3:]]
    d1, d2 = sums[1] - sums[0], sums[2] - sums[1]
    if d1 < 0 or d2 < 0:
        raise ValueError("pqd partial sums must be nondecreasing")
    pqd = (d2 == 0.0) or (d1 > 0 and d2 / d1 < 0.9)

    if slope > 2:
        note = "n^2/V grows faster than (log n)^2: strong clustering decay"
    elif slope > 1:
        note = "n^2/V grows faster than log n"
    else:
        note = "n^2/V growth below log n: weak-dependence criteria may fail"

    final = checkpoints[-1]
    return ConditionReport(beta_fit=slope, fclt_flag=fclt, pqd_flag=pqd,
                           final_m2_over_v=final[1] ** 2 / final[2],
                           zeta_note=note)
