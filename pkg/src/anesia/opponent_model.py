"""Frequency-based estimate of the opponent's utility from the bids it makes."""

from __future__ import annotations

from collections import Counter
from typing import Sequence

import numpy as np

from .domain import Bid, Domain, LinearAdditiveUtility


class FrequencyModel:
    """Value frequencies give value scores; stability across windows gives issue weights.

    Every ``window`` bids (once two full windows exist) the modal value of
    each issue is compared between the last two disjoint windows. Issues the
    opponent kept fixed gain ``delta`` weight before renormalization.
    """

    def __init__(self, domain: Domain, window: int = 10, delta: float = 0.1, auto_update: bool = True):
        if window < 1:
            raise ValueError("window must be at least 1")
        self.domain = domain
        self.window = window
        self.delta = delta
        self.auto_update = auto_update
        self.counts = [np.zeros(k, dtype=np.int64) for k in domain.shape]
        self.weights = np.full(domain.n_issues, 1.0 / domain.n_issues)
        self.history: list[Bid] = []
        self.version = 0

    def observe(self, bid: Sequence[int]) -> FrequencyModel:
        bid = self.domain.validate_bid(bid)
        for i, c in enumerate(bid):
            self.counts[i][c] += 1
        self.history.append(bid)
        if self.auto_update and len(self.history) % self.window == 0:
            self.update_weights()
        return self

    def value_score(self, issue: int, value: int) -> float:
        counts = self.counts[issue]
        top = counts.max()
        if top == 0:
            return 1.0
        return float(counts[value] / top)

    def score_tables(self) -> list[np.ndarray]:
        out = []
        for counts in self.counts:
            top = counts.max()
            out.append(np.ones(len(counts)) if top == 0 else counts / top)
        return out

    def _modes(self, bids: list[Bid]) -> list[int]:
        modes = []
        for i in range(self.domain.n_issues):
            tally = Counter(b[i] for b in bids)
            best = max(tally.values())
            modes.append(min(v for v, c in tally.items() if c == best))
        return modes

    def update_weights(self) -> FrequencyModel:
        w = self.window
        if len(self.history) < 2 * w:
            return self
        before = self._modes(self.history[-2 * w : -w])
        after = self._modes(self.history[-w:])
        stable = np.array([a == b for a, b in zip(before, after)], dtype=float)
        if stable.any():
            weights = self.weights + self.delta * stable
            self.weights = weights / weights.sum()
            self.version += 1
        return self

    def utility(self, bid: Sequence[int]) -> float:
        return float(sum(w * self.value_score(i, c) for i, (w, c) in enumerate(zip(self.weights, bid))))

    def batch(self, bids: np.ndarray) -> np.ndarray:
        bids = np.asarray(bids, dtype=np.int64)
        total = np.zeros(len(bids))
        for i, table in enumerate(self.score_tables()):
            total += self.weights[i] * table[bids[:, i]]
        return total

    def as_utility(self) -> LinearAdditiveUtility:
        weights = tuple(float(w) for w in self.weights)
        weights = weights[:-1] + (1.0 - sum(weights[:-1]),)
        return LinearAdditiveUtility(weights, tuple(tuple(t) for t in self.score_tables()))


def observe(model: FrequencyModel, bid: Sequence[int]) -> FrequencyModel:
    return model.observe(bid)


def estimate_value_score(model: FrequencyModel, issue: int, value: int) -> float:
    return model.value_score(issue, value)


def update_weights(model: FrequencyModel) -> FrequencyModel:
    return model.update_weights()


def estimate_opponent_utility(model: FrequencyModel, bid: Sequence[int]) -> float:
    return model.utility(bid)
