"""The ANESIA negotiator: estimated user model, opponent model, Pareto bidding,
strategy template and a DDPG threshold, plus helpers to train and evaluate it."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .baselines import ESTIMATION_FA, FrequencyTeacher, own_utility
from .domain import Bid, OutcomeTable, SessionConfig
from .drl import Agreed, DdpgModel, Experience, Otherwise, Received, compute_reward, featurize
from .generator import Scenario
from .metaheuristics import FaParams, Nsga2Params
from .opponent_model import FrequencyModel
from .pareto import ParetoFront, approximate_front
from .protocol import Accept, Action, AgentState, Negotiator, Offer, PartyInfo, agent_state_update, run_session
from .strategy import (
    BiddingContext,
    ConcreteStrategy,
    LearningResult,
    StrategyTemplate,
    accept_decision,
    default_strategy,
    search_template,
    next_bid,
)


class AnesiaAgent(Negotiator):
    """Executes a concrete strategy; with ``learn`` it also feeds experiences to the DDPG model."""

    def __init__(
        self,
        strategy: ConcreteStrategy | None = None,
        model: DdpgModel | None = None,
        *,
        learn: bool = False,
        fa: FaParams = ESTIMATION_FA,
        nsga_preset: str = "fraction",
        window: int = 10,
        name: str = "anesia",
    ):
        self.strategy = strategy or default_strategy()
        self.model = model or DdpgModel(seed=0)
        self.learn = learn
        self.fa = fa
        self.nsga_preset = nsga_preset
        self.window = window
        self.name = name

    def prepare(self, info: PartyInfo, rng: np.random.Generator) -> None:
        super().prepare(info, rng)
        self.utility = own_utility(info, self.fa)
        self.table = OutcomeTable(info.domain, self.utility)
        self.opponent = FrequencyModel(info.domain, window=self.window)
        self.state = AgentState.initial(info)
        self.opp_us: list[float] = []
        self.last_opp: Bid | None = None
        self._front: ParetoFront | None = None
        self._front_version = -1
        self._last: tuple[np.ndarray, float] | None = None
        self.fronts_computed = 0

    def front(self) -> ParetoFront:
        """NSGA-II front of (own, opponent) estimates, rebuilt only when opponent weights change."""
        if self._front is None or self._front_version != self.opponent.version:
            domain = self.info.domain
            params = Nsga2Params.for_domain(domain.size, self.nsga_preset, seed=int(self.rng.integers(2**31)))
            self._front = approximate_front(self.utility, self.opponent.as_utility(), domain, params)
            self._front_version = self.opponent.version
            self.fronts_computed += 1
        return self._front

    def _record(self, reward: float, features: np.ndarray, terminal: bool) -> None:
        if self._last is None:
            return
        s, a = self._last
        self.model.remember(Experience(s, a, reward, features, terminal))
        self.model.train_step()

    def respond(self, offer: Bid | None, t: float) -> Action:
        d = self.info.config.agent_discount
        if offer is not None:
            u = self.table.utility_of(offer)
            self.opp_us.append(u)
            self.opponent.observe(offer)
            self.last_opp = offer
            self.state = agent_state_update(self.state, u, t)
        else:
            self.state = replace(self.state, t=t)
        features = featurize(self.state)
        if self.learn:
            if offer is not None:
                self._record(compute_reward(Received(self.opp_us[-1]), t, d), features, False)
            u_bar = self.model.explore(features, self.rng)
            self._last = (features, u_bar)
        else:
            u_bar = self.model.threshold(features)
        ctx = BiddingContext(
            own=self.table,
            opponent=self.opponent,
            front=self.front,
            last_opponent_bid=self.last_opp,
            u_min=self.info.config.reservation,
            weights=self.utility.weights,
        )
        bid = next_bid(self.strategy, self.state, ctx, u_bar, self.rng)
        if offer is not None and accept_decision(
            self.strategy, self.state, self.opp_us[-1], self.table.utility_of(bid), self.opp_us, u_bar
        ):
            return Accept()
        return Offer(bid)

    def finish(self, agreement: Bid | None, t: float) -> None:
        if not self.learn or self._last is None:
            return
        d = self.info.config.agent_discount
        if agreement is not None:
            reward = compute_reward(Agreed(self.table.utility_of(agreement)), t, d)
        else:
            reward = compute_reward(Otherwise(), t, d)
        self._record(reward, self._last[0], True)
        self._last = None


AgentFactory = Callable[[], Negotiator]


@dataclass(frozen=True)
class TrainingMatrix:
    """Scenarios x opponents x sides x repeats, each session with a fixed seed."""

    scenarios: Sequence[Scenario]
    opponents: Sequence[AgentFactory]
    config: SessionConfig = SessionConfig(deadline_rounds=200)
    repeats: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.scenarios or not self.opponents or self.repeats < 1:
            raise ValueError("training matrix is empty")

    def cells(self):
        k = 0
        for si, scenario in enumerate(self.scenarios):
            for oi, opponent in enumerate(self.opponents):
                for side in (0, 1):
                    for r in range(self.repeats):
                        seed = int(np.random.SeedSequence([self.seed, si, oi, side, r]).generate_state(1)[0])
                        yield k, scenario, opponent, side, seed
                        k += 1

    def mean_utility(self, make_agent: AgentFactory) -> float:
        """Mean settled true utility of the agent under test over every cell."""
        total, n = 0.0, 0
        for _, scenario, opponent, side, seed in self.cells():
            agents = [make_agent(), opponent()]
            if side == 1:
                agents.reverse()
            log = run_session(
                agents[0],
                agents[1],
                self.config,
                seed,
                domain=scenario.domain,
                utilities=scenario.utilities,
                reveal_utilities=True,
            )
            total += log.utilities[side]
            n += 1
        return total / n


def learn_template_params(
    template: StrategyTemplate,
    opponents: Sequence[AgentFactory],
    scenarios: Sequence[Scenario],
    fa: FaParams,
    *,
    config: SessionConfig = SessionConfig(deadline_rounds=200),
    repeats: int = 1,
    seed: int = 0,
    model: DdpgModel | None = None,
) -> LearningResult:
    """Fit template genes against true utilities over a seeded training matrix."""
    matrix = TrainingMatrix(tuple(scenarios), tuple(opponents), config, repeats, seed)
    model = model or DdpgModel(seed=seed)

    def fitness(strategy: ConcreteStrategy) -> float:
        return matrix.mean_utility(lambda: AnesiaAgent(strategy, model))

    return search_template(template, fitness, fa)


def teacher_dataset(
    scenarios: Sequence[Scenario],
    opponents: Sequence[AgentFactory],
    config: SessionConfig = SessionConfig(deadline_rounds=200),
    seed: int = 0,
    window: int = 10,
) -> list[tuple[np.ndarray, float]]:
    """(features, threshold) pairs logged from a frequency-model teacher."""
    data: list[tuple[np.ndarray, float]] = []
    for si, scenario in enumerate(scenarios):
        for oi, opponent in enumerate(opponents):
            for side in (0, 1):
                teacher = _LoggingTeacher(window)
                agents = [teacher, opponent()]
                if side == 1:
                    agents.reverse()
                sseed = int(np.random.SeedSequence([seed, si, oi, side]).generate_state(1)[0])
                run_session(
                    agents[0], agents[1], config, sseed,
                    domain=scenario.domain, utilities=scenario.utilities, reveal_utilities=True,
                )
                data.extend(teacher.samples)
    return data


class _LoggingTeacher(FrequencyTeacher):
    """Frequency teacher that records its state features and concession target each turn."""

    def __init__(self, window: int = 10):
        super().__init__(window=window, name="teacher")

    def prepare(self, info: PartyInfo, rng: np.random.Generator) -> None:
        super().prepare(info, rng)
        self.state = AgentState.initial(info)
        self.samples: list[tuple[np.ndarray, float]] = []

    def respond(self, offer: Bid | None, t: float) -> Action:
        if offer is not None:
            self.state = agent_state_update(self.state, self.value(offer), t)
        else:
            self.state = replace(self.state, t=t)
        self.samples.append((featurize(self.state), self.target(t)))
        return super().respond(offer, t)


def train_rl(
    model: DdpgModel,
    scenarios: Sequence[Scenario],
    opponents: Sequence[AgentFactory],
    sessions: int,
    strategy: ConcreteStrategy | None = None,
    config: SessionConfig = SessionConfig(deadline_rounds=200),
    seed: int = 0,
) -> list[float]:
    """Play ``sessions`` learning sessions, cycling over scenarios and opponents; returns settled utilities."""
    if not scenarios or not opponents:
        raise ValueError("training matrix is empty")
    results = []
    for k in range(sessions):
        scenario = scenarios[k % len(scenarios)]
        opponent = opponents[(k // len(scenarios)) % len(opponents)]
        side = (k // (len(scenarios) * len(opponents))) % 2
        agents = [AnesiaAgent(strategy, model, learn=True), opponent()]
        if side:
            agents.reverse()
        sseed = int(np.random.SeedSequence([seed, k]).generate_state(1)[0])
        log = run_session(
            agents[0], agents[1], config, sseed,
            domain=scenario.domain, utilities=scenario.utilities, reveal_utilities=True,
        )
        results.append(log.utilities[side])
    return results
