"""Alternating-offers session driver."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .domain import (
    Bid,
    Domain,
    LinearAdditiveUtility,
    PartialPreferenceProfile,
    SessionConfig,
    discounted_utility,
)


class ProtocolViolation(RuntimeError):
    def __init__(self, actor: str, round_: int, message: str):
        super().__init__(f"{actor} at round {round_}: {message}")
        self.actor = actor
        self.round = round_


@dataclass(frozen=True)
class Offer:
    bid: Bid


@dataclass(frozen=True)
class Accept:
    pass


Action = Offer | Accept


@dataclass(frozen=True)
class PartyInfo:
    """What an agent is told before a session starts.

    ``utility`` is the true utility and is only filled in for agents that are
    allowed to see it (training, or tournaments without uncertainty).
    """

    domain: Domain
    config: SessionConfig
    profile: PartialPreferenceProfile | None = None
    utility: LinearAdditiveUtility | None = None

    @property
    def b_count(self) -> int:
        return len(self.profile) if self.profile is not None else self.domain.size


class Negotiator:
    """Base class for anything that can sit at the table."""

    name = "negotiator"

    def prepare(self, info: PartyInfo, rng: np.random.Generator) -> None:
        self.info = info
        self.rng = rng

    def respond(self, offer: Bid | None, t: float) -> Action:
        raise NotImplementedError

    def finish(self, agreement: Bid | None, t: float) -> None:
        """Called once when the session ends; default does nothing."""


@dataclass(frozen=True)
class AgentState:
    """Running statistics of estimated utility over opponent bids, plus static context."""

    o_best: float = 0.0
    o_avg: float = 0.0
    o_sd: float = 0.0
    b_count: int = 0
    discount: float = 1.0
    reservation: float = 0.0
    omega_size: int = 1
    n_issues: int = 1
    t: float = 0.0
    n_bids: int = 0
    m2: float = 0.0

    @classmethod
    def initial(cls, info: PartyInfo) -> AgentState:
        return cls(
            b_count=info.b_count,
            discount=info.config.discount,
            reservation=info.config.reservation,
            omega_size=info.domain.size,
            n_issues=info.domain.n_issues,
        )


def agent_state_update(prev: AgentState, opponent_bid_utility: float, t: float) -> AgentState:
    """Fold one more opponent bid into the running max, mean and population σ."""
    x = float(opponent_bid_utility)
    n = prev.n_bids + 1
    delta = x - prev.o_avg
    mean = prev.o_avg + delta / n
    m2 = prev.m2 + delta * (x - mean)
    best = x if prev.n_bids == 0 else max(prev.o_best, x)
    return replace(
        prev, o_best=best, o_avg=mean, o_sd=math.sqrt(max(m2, 0.0) / n), n_bids=n, m2=m2, t=t
    )


@dataclass(frozen=True)
class Turn:
    round: int
    actor: str
    action: str
    bid: Bid | None
    t: float

    def to_dict(self) -> dict:
        return {
            "type": "turn",
            "round": self.round,
            "actor": self.actor,
            "action": self.action,
            "bid": list(self.bid) if self.bid is not None else None,
            "t": self.t,
        }


@dataclass(frozen=True)
class Agreement:
    bid: Bid
    round: int


@dataclass(frozen=True)
class Failure:
    round: int


Outcome = Agreement | Failure


@dataclass
class SessionLog:
    domain: str
    agents: tuple[str, str]
    config: SessionConfig
    seed: int
    turns: list[Turn] = field(default_factory=list)
    outcome: Outcome | None = None
    utilities: tuple[float, float] = (0.0, 0.0)
    true_utilities: tuple[dict, dict] | None = None

    @property
    def agreed(self) -> bool:
        return isinstance(self.outcome, Agreement)

    def records(self) -> list[dict]:
        header = {
            "type": "session",
            "domain": self.domain,
            "agents": list(self.agents),
            "seed": self.seed,
            "config": {
                "deadline_rounds": self.config.deadline_rounds,
                "reservation": self.config.reservation,
                "discount": self.config.discount,
                "agent_discount": self.config.agent_discount,
            },
        }
        if self.true_utilities is not None:
            header["utilities"] = list(self.true_utilities)
        out = [header] + [turn.to_dict() for turn in self.turns]
        settlement = {
            "type": "settlement",
            "outcome": "agreement" if self.agreed else "failure",
            "round": self.outcome.round if self.outcome is not None else None,
            "bid": list(self.outcome.bid) if self.agreed else None,
            "utilities": list(self.utilities),
        }
        return out + [settlement]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in self.records())

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> SessionLog:
        records = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not records or records[0].get("type") != "session":
            raise ValueError("session log must start with a session header")
        head, settle_rec = records[0], records[-1]
        if settle_rec.get("type") != "settlement":
            raise ValueError("session log must end with a settlement record")
        log = cls(
            domain=head["domain"],
            agents=tuple(head["agents"]),
            config=SessionConfig(**head["config"]),
            seed=head["seed"],
            true_utilities=tuple(head["utilities"]) if "utilities" in head else None,
        )
        for rec in records[1:-1]:
            bid = tuple(rec["bid"]) if rec["bid"] is not None else None
            log.turns.append(Turn(rec["round"], rec["actor"], rec["action"], bid, rec["t"]))
        if settle_rec["outcome"] == "agreement":
            log.outcome = Agreement(tuple(settle_rec["bid"]), settle_rec["round"])
        else:
            log.outcome = Failure(settle_rec["round"])
        log.utilities = tuple(settle_rec["utilities"])
        return log

    @classmethod
    def load(cls, path: str | Path) -> SessionLog:
        return cls.from_jsonl(Path(path).read_text())


def settle(
    outcome: Outcome,
    config: SessionConfig,
    true_utilities: Sequence[LinearAdditiveUtility],
) -> tuple[float, float]:
    """Discounted utility of the agreement per side, or the reservation value on failure."""
    if isinstance(outcome, Agreement):
        t = config.time(outcome.round)
        ua, ub = (discounted_utility(u(outcome.bid), t, config.discount) for u in true_utilities)
        return ua, ub
    return config.reservation, config.reservation


def run_session(
    agent_a: Negotiator,
    agent_b: Negotiator,
    config: SessionConfig,
    seed: int,
    *,
    domain: Domain,
    utilities: Sequence[LinearAdditiveUtility],
    profiles: Sequence[PartialPreferenceProfile | None] = (None, None),
    reveal_utilities: bool = False,
) -> SessionLog:
    """Play one alternating-offers negotiation; ``agent_a`` opens.

    Each agent receives its own partial profile; the true utilities are used
    for settlement and are handed to the agents only with ``reveal_utilities``.
    """
    agents = (agent_a, agent_b)
    labels = ("A", "B")
    streams = np.random.SeedSequence(seed).spawn(2)
    for side, agent in enumerate(agents):
        info = PartyInfo(
            domain=domain,
            config=config,
            profile=profiles[side],
            utility=utilities[side] if reveal_utilities else None,
        )
        agent.prepare(info, np.random.default_rng(streams[side]))

    log = SessionLog(
        domain=domain.name,
        agents=(agent_a.name, agent_b.name),
        config=config,
        seed=seed,
        true_utilities=tuple(u.to_dict() for u in utilities),
    )
    pending: Bid | None = None
    outcome: Outcome | None = None
    for round_ in range(1, config.deadline_rounds + 1):
        side = (round_ - 1) % 2
        agent, label = agents[side], labels[side]
        t = config.time(round_)
        action = agent.respond(pending, t)
        if isinstance(action, Accept):
            if pending is None:
                raise ProtocolViolation(label, round_, "accept without a pending offer")
            log.turns.append(Turn(round_, label, "accept", pending, t))
            outcome = Agreement(pending, round_)
            break
        if not isinstance(action, Offer):
            raise ProtocolViolation(label, round_, f"unknown action {action!r}")
        try:
            bid = domain.validate_bid(action.bid)
        except ValueError as exc:
            raise ProtocolViolation(label, round_, str(exc)) from exc
        log.turns.append(Turn(round_, label, "offer", bid, t))
        pending = bid
    if outcome is None:
        outcome = Failure(config.deadline_rounds)

    log.outcome = outcome
    log.utilities = settle(outcome, config, utilities)
    end_t = config.time(outcome.round)
    agreed_bid = outcome.bid if isinstance(outcome, Agreement) else None
    for agent in agents:
        agent.finish(agreed_bid, end_t)
    return log


def check_log(log: SessionLog) -> None:
    """Raise AssertionError if a log breaks alternation, deadline or accept rules."""
    accepts = 0
    for i, turn in enumerate(log.turns):
        assert turn.round == i + 1, "rounds must be consecutive"
        assert turn.round <= log.config.deadline_rounds, "round past the deadline"
        if i:
            assert turn.actor != log.turns[i - 1].actor, "actors must alternate"
        if turn.action == "accept":
            accepts += 1
            assert i == len(log.turns) - 1, "accept must end the session"
            assert i > 0, "first action must be an offer"
    assert accepts <= 1


def replay_settlement(log: SessionLog, utilities: Iterable[LinearAdditiveUtility]) -> tuple[float, float]:
    return settle(log.outcome, log.config, tuple(utilities))
