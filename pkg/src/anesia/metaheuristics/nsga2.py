"""NSGA-II over discrete bid encodings."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..domain import Bid, Domain


@dataclass(frozen=True)
class Nsga2Params:
    population: int = 4
    generations: int = 2
    mutation_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("NSGA-II population must be at least 2")
        if self.generations < 1:
            raise ValueError("NSGA-II needs at least one generation")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must lie in [0, 1]")

    @classmethod
    def for_domain(cls, size: int, preset: str = "fraction", seed: int = 0) -> Nsga2Params:
        """``fraction``: 2% of |Ω| (floored at 4), 2 generations; ``fixed``: 100 x 25."""
        if preset == "fraction":
            return cls(max(4, math.ceil(0.02 * size - 1e-9)), 2, 0.1, seed)
        if preset == "fixed":
            return cls(100, 25, 0.1, seed)
        raise ValueError(f"unknown NSGA-II preset {preset!r}")


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """Pareto dominance for maximization: no worse anywhere, strictly better somewhere."""
    better = False
    for x, y in zip(a, b):
        if x < y:
            return False
        if x > y:
            better = True
    return better


def _dominance_matrix(points: np.ndarray) -> np.ndarray:
    ge = (points[:, None, :] >= points[None, :, :]).all(axis=2)
    gt = (points[:, None, :] > points[None, :, :]).any(axis=2)
    return ge & gt


def fast_nondominated_sort(points) -> list[list[int]]:
    """Partition point indices into successive nondominated fronts."""
    pts = np.asarray(points, dtype=float)
    if len(pts) == 0:
        return []
    dom = _dominance_matrix(pts.reshape(len(pts), -1))
    counts = dom.sum(axis=0)  # how many points dominate each point
    fronts = []
    current = [int(i) for i in np.flatnonzero(counts == 0)]
    while current:
        fronts.append(current)
        nxt = []
        for p in current:
            for q in np.flatnonzero(dom[p]):
                counts[q] -= 1
                if counts[q] == 0:
                    nxt.append(int(q))
        current = sorted(nxt)
    return fronts


def crowding_distance(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    n, m = pts.shape
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for k in range(m):
        order = np.argsort(pts[:, k], kind="stable")
        span = pts[order[-1], k] - pts[order[0], k]
        dist[order[0]] = dist[order[-1]] = np.inf
        if span == 0:
            continue
        gaps = (pts[order[2:], k] - pts[order[:-2], k]) / span
        dist[order[1:-1]] += gaps
    return dist


def nondominated(entries: list[tuple[Bid, tuple[float, float]]]) -> list[tuple[Bid, tuple[float, float]]]:
    if not entries:
        return []
    front = fast_nondominated_sort([obj for _, obj in entries])[0]
    return [entries[i] for i in sorted(front)]


def nsga2(
    evaluate: Callable[[Bid], tuple[float, float]],
    domain: Domain,
    params: Nsga2Params,
    initial: Sequence[Bid] = (),
) -> list[tuple[Bid, tuple[float, float]]]:
    """Approximate the Pareto set of ``evaluate`` over the domain's outcomes.

    Bids are integer vectors of value indices. Offspring come from binary
    tournaments on (front rank, crowding), uniform per-issue crossover and
    per-issue reset mutation. ``initial`` bids, if given, seed the first
    population. Returns the nondominated subset of every bid evaluated, in
    lexicographic bid order.
    """
    rng = np.random.default_rng(params.seed)
    shape = np.asarray(domain.shape)
    n = len(shape)
    archive: dict[Bid, tuple[float, float]] = {}

    def score(bid: Bid) -> tuple[float, float]:
        if bid not in archive:
            archive[bid] = tuple(float(v) for v in evaluate(bid))
        return archive[bid]

    def random_bid() -> Bid:
        return tuple(int(c) for c in rng.integers(0, shape))

    pop: list[Bid] = []
    for bid in initial:
        bid = domain.validate_bid(bid)
        if bid not in pop and len(pop) < params.population:
            pop.append(bid)
    attempts = 0
    while len(pop) < params.population:
        bid = random_bid()
        attempts += 1
        if bid not in pop or attempts > 20 * params.population:
            pop.append(bid)
    for bid in pop:
        score(bid)

    def rank_and_crowd(bids: list[Bid]) -> tuple[np.ndarray, np.ndarray, list[list[int]]]:
        objs = np.array([archive[b] for b in bids])
        fronts = fast_nondominated_sort(objs)
        rank = np.empty(len(bids), dtype=int)
        crowd = np.empty(len(bids))
        for r, front in enumerate(fronts):
            rank[front] = r
            crowd[front] = crowding_distance(objs[front])
        return rank, crowd, fronts

    for _ in range(params.generations):
        rank, crowd, _ = rank_and_crowd(pop)

        def tournament() -> Bid:
            a, b = rng.integers(0, len(pop), size=2)
            if (rank[a], -crowd[a]) <= (rank[b], -crowd[b]):
                return pop[a]
            return pop[b]

        children: list[Bid] = []
        while len(children) < params.population:
            first = tournament()
            second = tournament()
            for _ in range(3):
                if second != first:
                    break
                second = tournament()
            p1, p2 = np.asarray(first), np.asarray(second)
            mask = rng.random(n) < 0.5
            child = np.where(mask, p1, p2)
            mutate = rng.random(n) < params.mutation_rate
            if mutate.any():
                child = np.where(mutate, rng.integers(0, shape), child)
            child = tuple(int(c) for c in child)
            # spend evaluations on unseen bids while any remain
            tries = 0
            while (child in archive or child in children) and tries < 10 and len(archive) < domain.size:
                child = np.asarray(child)
                flip = rng.integers(n)
                child[flip] = rng.integers(shape[flip])
                child = tuple(int(c) for c in child)
                tries += 1
            children.append(child)
        for bid in children:
            score(bid)

        merged = list(dict.fromkeys(pop + children))
        rank, crowd, fronts = rank_and_crowd(merged)
        survivors: list[int] = []
        for front in fronts:
            if len(survivors) + len(front) <= params.population:
                survivors.extend(front)
                continue
            room = params.population - len(survivors)
            by_crowd = sorted(front, key=lambda i: (-crowd[i], i))
            survivors.extend(by_crowd[:room])
            break
        pop = [merged[i] for i in survivors]
        while len(pop) < params.population:  # duplicates collapsed the pool
            pop.append(random_bid())
            score(pop[-1])

    return nondominated(sorted(archive.items()))
