"""Pareto fronts over (own, opponent) utility, IGD, and TOPSIS bid selection."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .domain import Bid, Domain
from .metaheuristics import Nsga2Params, dominates, nsga2, topsis

log = logging.getLogger(__name__)

BRUTE_FORCE_CAP = 2_000_000

__all__ = [
    "BudgetError",
    "ParetoFront",
    "dominates",
    "brute_force_front",
    "approximate_front",
    "igd",
    "select_bid",
    "weighted_sum_bids",
]


class BudgetError(RuntimeError):
    pass


class BatchUtility(Protocol):
    def batch(self, bids: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class ParetoFront:
    entries: tuple[tuple[Bid, float, float], ...]

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def bids(self) -> list[Bid]:
        return [e[0] for e in self.entries]

    @property
    def points(self) -> np.ndarray:
        return np.array([(e[1], e[2]) for e in self.entries], dtype=float).reshape(-1, 2)

    def to_dict(self) -> dict:
        return {"front": [{"bid": list(b), "own": u, "opponent": o} for b, u, o in self.entries]}


def _front_mask(points: np.ndarray) -> np.ndarray:
    """Nondominated mask via a sort-and-sweep over the first objective."""
    n = len(points)
    keep = np.zeros(n, dtype=bool)
    order = np.lexsort((-points[:, 1], -points[:, 0]))
    best_o = -np.inf
    k = 0
    while k < n:
        u = points[order[k], 0]
        end = k
        while end < n and points[order[end], 0] == u:
            end += 1
        group = order[k:end]
        gmax = points[group, 1].max()
        if gmax > best_o:
            keep[group[points[group, 1] == gmax]] = True
            best_o = gmax
        k = end
    return keep


def brute_force_front(u_user: BatchUtility, u_opp: BatchUtility, domain: Domain, cap: int = BRUTE_FORCE_CAP) -> ParetoFront:
    """Exact nondominated set over every outcome."""
    if domain.size > cap:
        raise BudgetError(f"|Ω|={domain.size} exceeds brute-force cap {cap}")
    outcomes = domain.outcome_array()
    pts = np.stack([u_user.batch(outcomes), u_opp.batch(outcomes)], axis=1)
    mask = _front_mask(pts)
    entries = tuple(
        (tuple(int(c) for c in outcomes[i]), float(pts[i, 0]), float(pts[i, 1]))
        for i in np.flatnonzero(mask)
    )
    return ParetoFront(entries)


def _tables(u) -> list[np.ndarray] | None:
    if hasattr(u, "score_tables") and hasattr(u, "weights"):
        return [w * t for w, t in zip(u.weights, u.score_tables())]
    if hasattr(u, "evaluations"):
        return [w * np.asarray(ev) for w, ev in zip(u.weights, u.evaluations)]
    return None


def weighted_sum_bids(u_user, u_opp, count: int, resolution: int = 201) -> list[Bid]:
    """Up to ``count`` distinct maximizers of λ·U_user + (1-λ)·U_opp, spread over λ.

    Both utilities must be linear additive, so each maximizer is found issue
    by issue and is a supported Pareto point. Returns an empty list otherwise.
    """
    tu, to = _tables(u_user), _tables(u_opp)
    if tu is None or to is None or count < 1:
        return []
    found: list[Bid] = []
    for lam in np.linspace(1.0, 0.0, resolution):
        bid = tuple(int(np.argmax(lam * a + (1 - lam) * b)) for a, b in zip(tu, to))
        if bid not in found:
            found.append(bid)
    if len(found) <= count:
        return found
    picks = np.unique(np.round(np.linspace(0, len(found) - 1, count)).astype(int))
    return [found[i] for i in picks]


def approximate_front(
    u_user: BatchUtility,
    u_opp: BatchUtility,
    domain: Domain,
    params: Nsga2Params,
    seed_weighted: bool = True,
) -> ParetoFront:
    """NSGA-II estimate of the front.

    With ``seed_weighted`` the first population holds weighted-sum optima of
    the two models (when they are linear additive); the rest is random.
    """
    def evaluate(bid: Bid) -> tuple[float, float]:
        arr = np.asarray([bid])
        return float(u_user.batch(arr)[0]), float(u_opp.batch(arr)[0])

    seeds = weighted_sum_bids(u_user, u_opp, params.population) if seed_weighted else []
    found = nsga2(evaluate, domain, params, initial=seeds)
    return ParetoFront(tuple((bid, obj[0], obj[1]) for bid, obj in found))


def igd(approx: ParetoFront | np.ndarray, truth: ParetoFront | np.ndarray) -> float:
    """Mean distance from each reference point to its nearest approximate point."""
    a = approx.points if isinstance(approx, ParetoFront) else np.asarray(approx, dtype=float).reshape(-1, 2)
    t = truth.points if isinstance(truth, ParetoFront) else np.asarray(truth, dtype=float).reshape(-1, 2)
    if len(t) == 0:
        raise ValueError("reference front is empty")
    if len(a) == 0:
        log.warning("IGD of an empty approximation is infinite")
        return math.inf
    dist = np.sqrt(((t[:, None, :] - a[None, :, :]) ** 2).sum(axis=2))
    return float(dist.min(axis=1).mean())


def select_bid(front: ParetoFront, own_weight: float) -> Bid:
    """TOPSIS pick over the front with weights (own_weight, 1 - own_weight)."""
    if len(front) == 0:
        raise ValueError("cannot select from an empty front")
    w = min(1.0, max(0.0, float(own_weight)))
    pts = front.points.copy()
    # a criterion that is zero everywhere cannot separate alternatives
    pts[:, (pts == 0).all(axis=0)] = 1.0
    ranking, _ = topsis(pts, (w, 1.0 - w))
    return front.entries[ranking[0]][0]
