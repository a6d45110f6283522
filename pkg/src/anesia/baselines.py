"""Scripted and time-dependent opponents, also used as teachers for pretraining."""

from __future__ import annotations

import numpy as np

from .domain import Bid, LinearAdditiveUtility, OutcomeTable
from .metaheuristics import FaParams
from .opponent_model import FrequencyModel
from .protocol import Accept, Action, Negotiator, Offer, PartyInfo
from .user_model import estimate_user_model

FLOOR = 0.3
ESTIMATION_FA = FaParams(population=20, generations=200, seed=0)


def own_utility(info: PartyInfo, fa: FaParams = ESTIMATION_FA) -> LinearAdditiveUtility:
    """The true utility when revealed, otherwise an estimate from the partial profile."""
    if info.utility is not None:
        return info.utility
    if info.profile is None:
        raise ValueError("agent has neither a utility nor a partial profile")
    return estimate_user_model(info.domain, info.profile, fa).estimated


def concession_target(t: float, e: float, u_min: float, u_max: float) -> float:
    """u_max - (u_max - u_min)·t^(1/e)."""
    return u_max - (u_max - u_min) * t ** (1.0 / e)


class UtilityAgent(Negotiator):
    """Shared setup: own utility table and reservation-aware floor."""

    fa = ESTIMATION_FA

    def prepare(self, info: PartyInfo, rng: np.random.Generator) -> None:
        super().prepare(info, rng)
        self.utility = own_utility(info, self.fa)
        self.table = OutcomeTable(info.domain, self.utility)
        self.u_min = max(info.config.reservation, FLOOR)

    def value(self, bid: Bid) -> float:
        return self.table.utility_of(bid)


class TimeDependentAgent(UtilityAgent):
    def __init__(self, e: float, name: str | None = None):
        if not e > 0:
            raise ValueError("concession exponent must be positive")
        self.e = float(e)
        self.name = name or ("boulware" if e < 1 else "conceder")

    def target(self, t: float) -> float:
        return concession_target(t, self.e, self.u_min, self.table.max_utility)

    def respond(self, offer: Bid | None, t: float) -> Action:
        target = self.target(t)
        if offer is not None and self.value(offer) >= target:
            return Accept()
        return Offer(self.table.at_least(target))


def Boulware(e: float = 0.2, name: str = "boulware") -> TimeDependentAgent:
    if not e < 1:
        raise ValueError("a Boulware agent needs e < 1")
    return TimeDependentAgent(e, name)


def Conceder(e: float = 2.0, name: str = "conceder") -> TimeDependentAgent:
    if not e > 1:
        raise ValueError("a Conceder agent needs e > 1")
    return TimeDependentAgent(e, name)


class Hardliner(UtilityAgent):
    def __init__(self, u_bar: float = 1.0, name: str = "hardliner"):
        if not 0.0 <= u_bar <= 1.0:
            raise ValueError("hardliner threshold must lie in [0, 1]")
        self.u_bar = float(u_bar)
        self.name = name

    def respond(self, offer: Bid | None, t: float) -> Action:
        if offer is not None and self.value(offer) >= self.u_bar:
            return Accept()
        return Offer(self.table.best)


class RandomAgent(UtilityAgent):
    name = "random"

    def __init__(self, name: str = "random"):
        self.name = name

    def respond(self, offer: Bid | None, t: float) -> Action:
        if offer is not None and self.value(offer) >= self.info.config.reservation:
            return Accept()
        return Offer(tuple(int(c) for c in self.rng.integers(0, self.table.shape)))


class FrequencyTeacher(UtilityAgent):
    """Linear concession; among bids above the target it offers the one the opponent model likes most."""

    def __init__(self, window: int = 10, e: float = 1.0, name: str = "teacher"):
        if window < 1:
            raise ValueError("window must be positive")
        self.window = int(window)
        self.e = float(e)
        self.name = name

    def prepare(self, info: PartyInfo, rng: np.random.Generator) -> None:
        super().prepare(info, rng)
        self.model = FrequencyModel(info.domain, window=self.window)
        self.thresholds: list[tuple[float, float]] = []

    def target(self, t: float) -> float:
        return concession_target(t, self.e, self.u_min, self.table.max_utility)

    def next_bid(self, target: float) -> Bid:
        pool = self.table.indices_at_least(target)
        if len(pool) == 0:
            return self.table.best
        opp = self.model.batch(self.table.outcomes[pool])
        own = self.table.values[pool]
        k = np.lexsort((-own, -opp))[0]
        return self.table.bid(int(pool[k]))

    def respond(self, offer: Bid | None, t: float) -> Action:
        target = self.target(t)
        self.thresholds.append((t, target))
        if offer is not None:
            self.model.observe(offer)
        bid = self.next_bid(target)
        if offer is not None and self.value(offer) >= min(target, self.value(bid)):
            return Accept()
        return Offer(bid)


class AcceptAll(Negotiator):
    """Accepts any pending offer; opens with a uniformly random bid."""

    def __init__(self, name: str = "accept_all"):
        self.name = name

    def respond(self, offer: Bid | None, t: float) -> Action:
        if offer is not None:
            return Accept()
        return Offer(tuple(int(c) for c in self.rng.integers(0, self.info.domain.shape)))


class NeverAccept(UtilityAgent):
    """Repeats its best bid and never accepts."""

    def __init__(self, name: str = "never_accept"):
        self.name = name

    def respond(self, offer: Bid | None, t: float) -> Action:
        return Offer(self.table.best)
