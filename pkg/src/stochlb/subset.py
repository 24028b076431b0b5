"""p-moment subset selection through a linear-optimisation oracle.

Maximise E(sum_j V_j x_j)^p over a region P of 0/1 vectors given only an
(approximate) oracle for non-negative linear objectives over P. For a guess
G of the optimal p-moment, each item gets the weight nu_{eps}(V_j) at the
scale eps = G / e^(1/alpha); a guess is accepted when the oracle finds a
set of total weight at least 1, which certifies E S^p >= (eps/10)^p.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dist import DiscreteDist, check_p, l_function, raw_moment
from .errors import StochLBError
from .moments import sum_moment_exact

SEARCH_REL_TOL = 1e-3
MAX_HALVINGS = 200


class RegionError(StochLBError, ValueError):
    """Empty or inconsistent feasible region."""


@dataclass(frozen=True)
class LinOptOracle:
    """``maximize(c)`` returns a 0/1 vector in the region with
    <c, x> >= max / alpha."""

    maximize: Callable[[np.ndarray], np.ndarray]
    alpha: float = 1.0
    name: str = "oracle"

    def __post_init__(self):
        if not self.alpha >= 1:
            raise ValueError("oracle approximation factor must be >= 1")

    def __call__(self, c) -> np.ndarray:
        return np.asarray(self.maximize(np.asarray(c, dtype=float)), dtype=int)


@dataclass(frozen=True)
class SelectionInstance:
    V: tuple[DiscreteDist, ...]
    region: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "V", tuple(self.V))
        if not self.V:
            raise RegionError("need at least one item")

    @property
    def n(self) -> int:
        return len(self.V)


def exact_oracle_explicit(region: Sequence[Sequence[int]]) -> LinOptOracle:
    """Scan an explicit list of 0/1 vectors; first maximiser wins."""
    vecs = np.asarray(region, dtype=int)
    if vecs.ndim != 2 or len(vecs) == 0:
        raise RegionError("explicit region must be a non-empty list of 0/1 vectors")
    if not np.isin(vecs, (0, 1)).all():
        raise RegionError("explicit region entries must be 0 or 1")

    def maximize(c):
        return vecs[int(np.argmax(vecs @ c))].copy()

    return LinOptOracle(maximize, 1.0, "explicit")


def oracle_cardinality(n: int, k: int) -> LinOptOracle:
    """Top-k items by weight, lowest index first among equals."""
    if not 0 <= k <= n:
        raise RegionError(f"cardinality bound k={k} must lie in [0, n={n}]")

    def maximize(c):
        x = np.zeros(n, dtype=int)
        x[np.argsort(-c, kind="stable")[:k]] = 1
        return x

    return LinOptOracle(maximize, 1.0, f"cardinality(k={k})")


def oracle_matroid(n: int, rank: Callable[[frozenset], int]) -> LinOptOracle:
    """Matroid greedy over the independence system defined by ``rank``.

    Items are scanned by weight (descending, ties by index) and kept while
    the rank of the kept set grows by one. Zero-weight items are skipped.
    Each call checks the rank values it touches for the matroid rank axioms
    it can see (r(empty) = 0 and unit increments).
    """
    if rank(frozenset()) != 0:
        raise RegionError("rank oracle: r(empty set) must be 0")

    def maximize(c):
        kept: set[int] = set()
        r_kept = 0
        for j in np.argsort(-c, kind="stable"):
            if c[j] <= 0:
                break
            r_new = rank(frozenset(kept | {int(j)}))
            if r_new not in (r_kept, r_kept + 1):
                raise RegionError(f"rank oracle inconsistent: adding item {j} moved rank from {r_kept} to {r_new}")
            if r_new == r_kept + 1:
                kept.add(int(j))
                r_kept = r_new
        x = np.zeros(n, dtype=int)
        x[sorted(kept)] = 1
        return x

    return LinOptOracle(maximize, 1.0, "matroid")


def partition_rank(blocks: Sequence[Sequence[int]], caps: Sequence[int]) -> Callable[[frozenset], int]:
    """Rank function of a partition matroid: at most caps[b] items from block b."""
    block_of = {j: b for b, items in enumerate(blocks) for j in items}

    def rank(S: frozenset) -> int:
        counts: dict[int, int] = {}
        for j in S:
            counts[block_of[j]] = counts.get(block_of[j], 0) + 1
        return sum(min(c, caps[b]) for b, c in counts.items())

    return rank


def oracle_from_region(n: int, region: dict) -> LinOptOracle:
    """Build the exact oracle for a region descriptor.

    ``{"type": "explicit", "sets": [[0,1,...], ...]}``,
    ``{"type": "cardinality", "k": 3}`` or
    ``{"type": "partition", "blocks": [[0,1],[2,3]], "caps": [1,1]}``.
    """
    kind = region.get("type")
    if kind == "explicit":
        sets = region.get("sets")
        if not isinstance(sets, list) or any(len(s) != n for s in sets):
            raise RegionError(f"$.sets: expected a list of 0/1 vectors of length n={n}")
        return exact_oracle_explicit(sets)
    if kind == "cardinality":
        return oracle_cardinality(n, int(region.get("k", -1)))
    if kind == "partition":
        blocks, caps = region.get("blocks"), region.get("caps")
        if not isinstance(blocks, list) or not isinstance(caps, list) or len(blocks) != len(caps):
            raise RegionError("$.blocks / $.caps: expected equal-length lists")
        items = sorted(j for b in blocks for j in b)
        if items != list(range(n)):
            raise RegionError(f"$.blocks: must partition the items 0..{n - 1}")
        return oracle_matroid(n, partition_rank(blocks, caps))
    raise RegionError(f"$.type: unknown region type {kind!r}")


def p_moment(V: Sequence[DiscreteDist], x, p: float) -> float:
    """Exact E(sum_{j: x_j = 1} V_j)^p."""
    return sum_moment_exact([V[j] for j in np.flatnonzero(x)], p)


@dataclass
class SelectReport:
    x: list[int]
    G: float
    eps_bar: float
    guarantee: float
    weight: float
    degenerate: bool = False
    probes: list[dict] = field(default_factory=list)
    monotone: bool = True

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _weights(V, eps, p) -> np.ndarray:
    return np.array([l_function(d, eps, p) for d in V])


def select(inst: SelectionInstance, p: float, oracle: LinOptOracle, rel_tol: float = SEARCH_REL_TOL):
    """Return ``(x, report)``.

    ``report.guarantee`` is G/(10 e^(1/alpha)), a lower bound on the
    p-moment (not its p-th power) of the returned set.
    """
    p = check_p(p)
    V = inst.V
    shrink = math.exp(1.0 / oracle.alpha)
    upper = math.fsum(raw_moment(d, p) ** (1.0 / p) for d in V)
    if upper <= 0:
        x = oracle(np.zeros(inst.n))
        return x, SelectReport(list(map(int, x)), 0.0, 0.0, 0.0, 0.0, degenerate=True)
    report = SelectReport([], 0.0, 0.0, 0.0, 0.0)

    def probe(G):
        eps = G / shrink
        c = _weights(V, eps, p)
        x = oracle(c)
        w = float(c @ x)
        report.probes.append({"G": G, "weight": w, "accepted": w >= 1.0})
        return w >= 1.0, x, w

    # lower bracket: the heaviest single moment, halved until accepted
    G_lo = max(raw_moment(d, p) ** (1.0 / p) for d in V)
    for _ in range(MAX_HALVINGS):
        ok, x_lo, w_lo = probe(G_lo)
        if ok:
            break
        G_lo /= 2.0
    else:
        # every set in the region is (almost surely) zero, so any answer is optimal
        report.x, report.degenerate = list(map(int, x_lo)), True
        report.weight = w_lo
        return x_lo, report
    G_hi = max(upper, G_lo)
    ok, x_hi, w_hi = probe(G_hi)
    if ok:
        G_lo, x_lo, w_lo = G_hi, x_hi, w_hi
    else:
        while G_hi > G_lo * (1.0 + rel_tol):
            G = math.sqrt(G_lo * G_hi)
            ok, x, w = probe(G)
            if ok:
                G_lo, x_lo, w_lo = G, x, w
            else:
                G_hi = G
    accepted = sorted(pr["G"] for pr in report.probes if pr["accepted"])
    rejected = [pr["G"] for pr in report.probes if not pr["accepted"]]
    report.monotone = not (accepted and rejected and min(rejected) < accepted[-1])
    report.x = list(map(int, x_lo))
    report.G = G_lo
    report.eps_bar = G_lo / shrink
    report.guarantee = G_lo / (10.0 * shrink)
    report.weight = w_lo
    return x_lo, report


def brute_force_subset(V: Sequence[DiscreteDist], region_vectors, p: float) -> tuple[np.ndarray, float]:
    """Best p-th moment over an explicit list (first maximiser wins)."""
    best, best_val = None, -math.inf
    for x in region_vectors:
        val = p_moment(V, x, p)
        if val > best_val:
            best, best_val = np.asarray(x, dtype=int), val
    return best, best_val


def enumerate_region(n: int, oracle_region: dict) -> list[np.ndarray]:
    """All 0/1 vectors in a region descriptor (for small n)."""
    kind = oracle_region.get("type")
    if kind == "explicit":
        return [np.asarray(s, dtype=int) for s in oracle_region["sets"]]
    out = []
    for bits in itertools.product((0, 1), repeat=n):
        x = np.array(bits, dtype=int)
        if kind == "cardinality" and x.sum() <= oracle_region["k"]:
            out.append(x)
        elif kind == "partition":
            rank = partition_rank(oracle_region["blocks"], oracle_region["caps"])
            if rank(frozenset(np.flatnonzero(x).tolist())) == x.sum():
                out.append(x)
    return out
