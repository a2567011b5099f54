"""Generators of stationary site sequences on Z^d.

Every source is a frozen configuration; realizations are pure functions of
(config, seed), produced either step by step (:func:`stream`) or in bulk as
an (n, d) int64 array (:func:`generate`).  Bulk and streaming generation
consume the same uniforms in the same order, so they agree bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import rng

Site = tuple[int, ...]


def _check_probs(probs: Sequence[float]) -> None:
    if any(p < 0 for p in probs):
        raise ValueError("probabilities must be nonnegative")
    if abs(sum(probs) - 1.0) > 1e-12:
        raise ValueError(f"probabilities sum to {sum(probs)}, expected 1")


@dataclass(frozen=True)
class StepDistribution:
    """Finitely supported probability law on Z^d.

    Atom order is preserved as given: sampling inverts the cumulative
    probabilities in that order, so two laws with the same atom list produce
    identical draws from identical uniform streams.
    """

    atoms: tuple[tuple[Site, float], ...]

    def __init__(self, atoms: Iterable[tuple[Sequence[int], float]]):
        atoms = tuple((tuple(int(c) for c in a), float(p)) for a, p in atoms)
        if not atoms:
            raise ValueError("need at least one atom")
        d = len(atoms[0][0])
        if any(len(a) != d for a, _ in atoms):
            raise ValueError("all atoms must have the same dimension")
        if len({a for a, _ in atoms}) != len(atoms):
            raise ValueError("duplicate atoms")
        _check_probs([p for _, p in atoms])
        object.__setattr__(self, "atoms", atoms)

    @property
    def d(self) -> int:
        return len(self.atoms[0][0])

    def support(self) -> np.ndarray:
        return np.array([a for a, _ in self.atoms], dtype=np.int64)

    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms])

    def mean(self) -> np.ndarray:
        return self.probs() @ self.support().astype(np.float64)

    def covariance(self) -> np.ndarray:
        x = self.support().astype(np.float64) - self.mean()
        return (x * self.probs()[:, None]).T @ x

    def radius(self) -> int:
        return int(np.abs(self.support()).max())

    def is_symmetric(self) -> bool:
        table = dict(self.atoms)
        return all(table.get(tuple(-c for c in a)) == p for a, p in self.atoms)

    def sample_indices(self, u: np.ndarray) -> np.ndarray:
        cum = np.cumsum(self.probs())
        cum[-1] = 1.0
        return np.searchsorted(cum, u, side="right")


def simple_walk(d: int) -> StepDistribution:
    """Nearest-neighbour law: +-e_i each with probability 1/(2d)."""
    atoms = []
    for i in range(d):
        for s in (1, -1):
            a = [0] * d
            a[i] = s
            atoms.append((tuple(a), 1.0 / (2 * d)))
    return StepDistribution(atoms)


@dataclass(frozen=True)
class Classification:
    recurrence: str  # "recurrent" | "transient" | "deterministic-excluded"
    aperiodic: bool


def _extgcd(a: int, b: int) -> tuple[int, int, int]:
    if b == 0:
        return (abs(a), (1 if a >= 0 else -1), 0)
    g, s, t = _extgcd(b, a % b)
    return (g, t, s - (a // b) * t)


def _lattice_is_full(vectors: list[list[int]], d: int) -> bool:
    """Whether a set of integer vectors generates all of Z^d.

    Builds a triangular basis by unimodular row operations; the lattice is
    full iff every pivot exists and the diagonal product is +-1.
    """
    basis: list[list[int] | None] = [None] * d
    for v in vectors:
        v = list(v)
        for j in range(d):
            if v[j] == 0:
                continue
            b = basis[j]
            if b is None:
                basis[j] = v
                break
            g, s, t = _extgcd(b[j], v[j])
            new_b = [s * bi + t * vi for bi, vi in zip(b, v)]
            v = [(b[j] // g) * vi - (v[j] // g) * bi for bi, vi in zip(b, v)]
            basis[j] = new_b
    det = 1
    for j in range(d):
        if basis[j] is None:
            return False
        det *= basis[j][j]
    return abs(det) == 1


def classify(dist: StepDistribution) -> Classification:
    """Recurrence/aperiodicity classification of the random walk with law mu.

    The walk is ruled out as degenerate when the law is a single atom;
    aperiodic means the differences of the support generate Z^d together
    with the support translated to the origin (walk not confined to a coset
    of a proper sublattice); a centered aperiodic walk is recurrent iff
    d <= 2, and any walk with nonzero mean in d >= 1 is transient.
    """
    atoms = [(a, p) for a, p in dist.atoms if p > 0]
    d = dist.d
    if len(atoms) == 1:
        return Classification("deterministic-excluded", False)
    support = [a for a, _ in atoms]
    diffs = [[x - y for x, y in zip(a, support[0])] for a in support[1:]]
    aperiodic = _lattice_is_full(diffs + [list(support[0])], d)
    mean = dist.mean()
    centered = bool(np.all(np.abs(mean) < 1e-15))
    if centered and d <= 2:
        rec = "recurrent"
    else:
        rec = "transient"
    return Classification(rec, aperiodic)


# ---------------------------------------------------------------------------
# source configurations


@dataclass(frozen=True)
class RandomWalkSource:
    """z_k = zeta_0 + ... + zeta_k with i.i.d. steps of the given law."""
    dist: StepDistribution
    seed: int

    @property
    def d(self) -> int:
        return self.dist.d


@dataclass(frozen=True)
class CoboundarySource:
    """z_k = psi_k - psi_0 with psi_j i.i.d. of the given law (z_0 = 0).

    Bounded realization: the sequence never leaves support - support.
    """
    law: StepDistribution
    seed: int

    @property
    def d(self) -> int:
        return self.law.d


@dataclass(frozen=True)
class WindowFunctional:
    """z_k = sum_{j<=k} g(xi_j, ..., xi_{j+r-1}) over an i.i.d. symbol stream.

    ``table`` must assign a Z^d increment to every word of length r over the
    alphabet.  With r = 1 and g the identity this is exactly a random walk.
    """
    inner: tuple[tuple[int, float], ...]  # alphabet symbol -> probability
    r: int
    table: tuple[tuple[tuple[int, ...], Site], ...]
    seed: int

    def __init__(self, inner, r, table, seed):
        inner = tuple((int(a), float(p)) for a, p in inner)
        _check_probs([p for _, p in inner])
        table = tuple((tuple(int(x) for x in w), tuple(int(c) for c in s))
                      for w, s in (table.items() if isinstance(table, dict) else table))
        if r < 1:
            raise ValueError("window length must be >= 1")
        words = {w for w, _ in table}
        alphabet = [a for a, _ in inner]
        need = len(alphabet) ** r
        if len(words) != len(table):
            raise ValueError("duplicate words in table")
        if len(words) != need:
            raise ValueError(f"table must cover all {need} words of length {r}")
        d = len(table[0][1])
        if any(len(s) != d for _, s in table):
            raise ValueError("table outputs must share one dimension")
        object.__setattr__(self, "inner", inner)
        object.__setattr__(self, "r", int(r))
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "seed", seed)

    @property
    def d(self) -> int:
        return len(self.table[0][1])


@dataclass(frozen=True)
class ExplicitSource:
    """Replays a fixed finite site list; generation past the end errors."""
    sites: tuple[Site, ...]

    def __init__(self, sites):
        sites = tuple(tuple(int(c) for c in s) for s in sites)
        if not sites:
            raise ValueError("explicit source needs at least one site")
        if any(len(s) != len(sites[0]) for s in sites):
            raise ValueError("sites must share one dimension")
        object.__setattr__(self, "sites", sites)

    @property
    def d(self) -> int:
        return len(self.sites[0])


SourceConfig = (RandomWalkSource | CoboundarySource | WindowFunctional |
                ExplicitSource)


def _inner_cum(inner: tuple[tuple[int, float], ...]) -> np.ndarray:
    cum = np.cumsum([p for _, p in inner])
    cum[-1] = 1.0
    return cum


def generate(config, n: int) -> np.ndarray:
    """First n sites of the realization as an (n, d) int64 array."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(config, RandomWalkSource):
        u = rng.uniforms(config.seed, n)
        idx = config.dist.sample_indices(u)
        steps = config.dist.support()[idx]
        return np.cumsum(steps, axis=0)
    if isinstance(config, CoboundarySource):
        u = rng.uniforms(config.seed, n)
        idx = config.law.sample_indices(u)
        psi = config.law.support()[idx]
        return psi - psi[0]
    if isinstance(config, WindowFunctional):
        u = rng.uniforms(config.seed, n + config.r - 1)
        cum = _inner_cum(config.inner)
        sym_idx = np.searchsorted(cum, u, side="right")
        # map every length-r window of symbol indices to its increment
        word_index: dict[tuple[int, ...], int] = {}
        symbols = [a for a, _ in config.inner]
        sym_pos = {a: i for i, a in enumerate(symbols)}
        outputs = np.empty((len(config.table), config.d), dtype=np.int64)
        for i, (w, s) in enumerate(config.table):
            word_index[tuple(sym_pos[x] for x in w)] = i
            outputs[i] = s
        base = len(symbols)
        code = np.zeros(n, dtype=np.int64)
        for j in range(config.r):
            code = code * base + sym_idx[j:j + n]
        lut = np.empty(base ** config.r, dtype=np.int64)
        for w, i in word_index.items():
            c = 0
            for x in w:
                c = c * base + x
            lut[c] = i
        steps = outputs[lut[code]]
        return np.cumsum(steps, axis=0)
    if isinstance(config, ExplicitSource):
        if n > len(config.sites):
            raise ValueError(f"explicit source exhausted: has {len(config.sites)} "
                             f"sites, {n} requested")
        return np.array(config.sites[:n], dtype=np.int64)
    # rotation-driven sources live in selab.rotation; duck-type on generate()
    gen = getattr(config, "generate", None)
    if gen is not None:
        return gen(n)
    raise TypeError(f"unknown source config {type(config).__name__}")


def _pick(cum: np.ndarray, u: float) -> int:
    return int(np.searchsorted(cum, u, side="right"))


def stream(config) -> Iterator[Site]:
    """Yield the realization site by site (unbounded where the law allows).

    Consumes the same uniform stream as :func:`generate`, so the first n
    yields equal ``generate(config, n)`` exactly.
    """
    if isinstance(config, ExplicitSource):
        yield from config.sites
        return
    if isinstance(config, RandomWalkSource):
        cum = np.cumsum(config.dist.probs())
        cum[-1] = 1.0
        support = config.dist.support()
        pos = [0] * config.d
        k = 0
        while True:
            a = support[_pick(cum, rng.uniform_at(config.seed, k))]
            pos = [p + int(x) for p, x in zip(pos, a)]
            yield tuple(pos)
            k += 1
    elif isinstance(config, CoboundarySource):
        cum = np.cumsum(config.law.probs())
        cum[-1] = 1.0
        support = config.law.support()
        psi0 = support[_pick(cum, rng.uniform_at(config.seed, 0))]
        yield tuple(0 for _ in range(config.d))
        k = 1
        while True:
            psi = support[_pick(cum, rng.uniform_at(config.seed, k))]
            yield tuple(int(a - b) for a, b in zip(psi, psi0))
            k += 1
    elif isinstance(config, WindowFunctional):
        cum = _inner_cum(config.inner)
        symbols = [a for a, _ in config.inner]
        table = {w: s for w, s in config.table}
        window = [symbols[_pick(cum, rng.uniform_at(config.seed, j))]
                  for j in range(config.r - 1)]
        pos = [0] * config.d
        k = 0
        while True:
            window.append(symbols[_pick(cum, rng.uniform_at(config.seed,
                                                            k + config.r - 1))])
            step = table[tuple(window)]
            window.pop(0)
            pos = [p + c for p, c in zip(pos, step)]
            yield tuple(pos)
            k += 1
    else:
        it = getattr(config, "stream", None)
        if it is None:
            raise TypeError(f"unknown source config {type(config).__name__}")
        yield from it()
