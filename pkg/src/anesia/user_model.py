"""Estimating a user's utility from a partial bid ranking, and scoring estimates."""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .domain import Domain, DomainError, LinearAdditiveUtility, PartialPreferenceProfile
from .metaheuristics import FaParams, Firefly

log = logging.getLogger(__name__)

TIE_TOL = 1e-12
WEIGHT_FLOOR = 0.01


@dataclass(frozen=True)
class EstimationReport:
    estimated: LinearAdditiveUtility
    rho_on_B: float
    evaluations_used: int

    def to_dict(self) -> dict:
        return {
            "estimated": self.estimated.to_dict(),
            "rho_on_B": self.rho_on_B,
            "evaluations_used": self.evaluations_used,
        }


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt((a * a).sum() * (b * b).sum())
    if denom == 0:
        return 0.0
    return float(np.clip((a * b).sum() / denom, -1.0, 1.0))


def spearman_rho(ranking_a: Sequence[float], ranking_b: Sequence[float]) -> float:
    """Spearman correlation of two rankings (or score lists), ties at average rank.

    A constant ranking carries no order information; rho is reported as 0.
    """
    a = np.asarray(ranking_a, dtype=float)
    b = np.asarray(ranking_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"rankings differ in length: {a.shape} vs {b.shape}")
    if a.ndim != 1 or len(a) < 2:
        raise ValueError("need two rankings of equal length >= 2")
    return _pearson(rankdata(a), rankdata(b))


class _Codec:
    """Maps FA vectors to linear additive utilities for one domain shape."""

    def __init__(self, shape: Sequence[int]):
        self.shape = tuple(shape)
        self.n = len(self.shape)
        self.offsets = np.concatenate([[0], np.cumsum(self.shape)])
        self.dim = self.n + int(self.offsets[-1])
        self.bounds = [(WEIGHT_FLOOR, 1.0)] * self.n + [(0.0, 1.0)] * int(self.offsets[-1])

    def tables(self, x: np.ndarray) -> list[np.ndarray]:
        genes = x[: self.n]
        weights = genes / genes.sum()
        out = []
        for i in range(self.n):
            ev = x[self.n + self.offsets[i] : self.n + self.offsets[i + 1]]
            top = ev.max()
            ev = ev / top if top > 0 else np.ones_like(ev)
            out.append(weights[i] * ev)
        return out

    def decode(self, x: np.ndarray) -> LinearAdditiveUtility:
        genes = x[: self.n]
        evs = [x[self.n + self.offsets[i] : self.n + self.offsets[i + 1]] for i in range(self.n)]
        return LinearAdditiveUtility.from_raw(genes, evs)

    def encode(self, u: LinearAdditiveUtility) -> np.ndarray:
        w = np.clip(np.asarray(u.weights) / max(u.weights), WEIGHT_FLOOR, 1.0)
        return np.concatenate([w] + [np.asarray(ev) for ev in u.evaluations])


def profile_fitness(tables: list[np.ndarray], bids: np.ndarray, target_ranks: np.ndarray) -> float:
    values = np.zeros(len(bids))
    for i, table in enumerate(tables):
        values += table[bids[:, i]]
    return _pearson(rankdata(np.round(values, 12)), target_ranks)


def estimate_user_model(
    domain: Domain, profile: PartialPreferenceProfile, fa: FaParams = FaParams()
) -> EstimationReport:
    """Fit weights and value evaluations so the induced order of B matches the profile."""
    return _estimate_cached(domain, profile, fa)


@functools.lru_cache(maxsize=256)
def _estimate_cached(domain: Domain, profile: PartialPreferenceProfile, fa: FaParams) -> EstimationReport:
    if len(profile) < 2:
        raise DomainError("estimation needs at least two ranked bids")
    bids = profile.as_array()
    for bid in profile.bids:
        domain.validate_bid(bid)
    codec = _Codec(domain.shape)
    target = np.arange(len(bids), dtype=float) + 1.0

    def fitness(x: np.ndarray) -> float:
        return profile_fitness(codec.tables(x), bids, target)

    search = Firefly(fitness, codec.bounds, fa)
    best, rho = search.run()
    if rho == 0.0:
        log.warning("profile of %d bids gave no ranking signal; rho reported as 0", len(bids))
    return EstimationReport(codec.decode(best), float(rho), search.evaluations)


def _strict_order(values: np.ndarray, i: slice) -> np.ndarray:
    diff = values[i, None] - values[None, :]
    return np.where(diff > TIE_TOL, 1, np.where(diff < -TIE_TOL, -1, 0))


def ordinal_accuracy(
    estimated: LinearAdditiveUtility, truth: LinearAdditiveUtility, domain: Domain, chunk: int = 512
) -> float:
    """Share of outcome pairs strictly ordered by ``truth`` that ``estimated`` orders the same way."""
    if domain.size < 2:
        raise DomainError("ordinal accuracy needs at least two outcomes")
    outcomes = domain.outcome_array()
    true_vals = truth.batch(outcomes)
    est_vals = estimated.batch(outcomes)
    agree = total = 0
    for start in range(0, len(outcomes), chunk):
        rows = slice(start, min(start + chunk, len(outcomes)))
        st = _strict_order(true_vals, rows)
        se = _strict_order(est_vals, rows)
        strict = st != 0
        total += int(strict.sum())
        agree += int((strict & (st == se)).sum())
    if total == 0:
        return 1.0
    return agree / total


def cardinal_inaccuracy(
    estimated: LinearAdditiveUtility, truth: LinearAdditiveUtility, domain: Domain | None = None
) -> float:
    """Summed absolute difference of weighted value ratings over every issue value."""
    if estimated.shape != truth.shape:
        raise DomainError("utilities describe different domains")
    if domain is not None and truth.shape != domain.shape:
        raise DomainError("utilities do not match the domain")
    return float(np.abs(estimated.slot_values() - truth.slot_values()).sum())
