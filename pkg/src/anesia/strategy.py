"""Phase-structured acceptance and bidding strategies built from tactic libraries."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .domain import Bid, OutcomeTable
from .metaheuristics import FaParams, Firefly
from .opponent_model import FrequencyModel
from .pareto import ParetoFront, select_bid
from .protocol import AgentState

MIN_PHASE = 0.05


# -- tactics --------------------------------------------------------------------


@dataclass(frozen=True)
class NextOwnBidUtility:
    kind = "next_own"


@dataclass(frozen=True)
class Quantile:
    a: float = -0.5
    b: float = 1.2
    kind = "quantile"

    def level(self, t: float) -> float:
        return min(1.0, max(0.0, self.a * t + self.b))


@dataclass(frozen=True)
class DrlThreshold:
    kind = "drl"


@dataclass(frozen=True)
class FixedThreshold:
    u: float = 0.8
    kind = "fixed"

    def __post_init__(self):
        if not 0.0 <= self.u <= 1.0:
            raise ValueError(f"fixed threshold {self.u} outside [0, 1]")


@dataclass(frozen=True)
class Boulware:
    e: float = 0.2
    kind = "boulware"

    def __post_init__(self):
        if not 0.0 < self.e <= 1.0:
            raise ValueError(f"Boulware exponent {self.e} outside (0, 1]")


@dataclass(frozen=True)
class ParetoSelect:
    a: float = -0.5
    b: float = 1.0
    kind = "pareto"

    def weight(self, t: float) -> float:
        return min(1.0, max(0.0, self.a * t + self.b))


@dataclass(frozen=True)
class OpponentGreedy:
    kind = "opponent_greedy"


@dataclass(frozen=True)
class RandomAbove:
    kind = "random_above"


AcceptanceTactic = NextOwnBidUtility | Quantile | DrlThreshold | FixedThreshold
BiddingTactic = Boulware | ParetoSelect | OpponentGreedy | RandomAbove

ACCEPTANCE_TACTICS: dict[str, type] = {
    "next_own": NextOwnBidUtility,
    "quantile": Quantile,
    "drl": DrlThreshold,
    "fixed": FixedThreshold,
}
BIDDING_TACTICS: dict[str, type] = {
    "boulware": Boulware,
    "pareto": ParetoSelect,
    "opponent_greedy": OpponentGreedy,
    "random_above": RandomAbove,
}

# learnable parameter ranges per tactic kind
PARAM_BOXES: dict[str, dict[str, tuple[float, float]]] = {
    "next_own": {},
    "quantile": {"a": (-1.0, 1.0), "b": (0.0, 1.5)},
    "drl": {},
    "fixed": {"u": (0.0, 1.0)},
    "boulware": {"e": (0.05, 1.0)},
    "pareto": {"a": (-1.0, 1.0), "b": (0.0, 1.0)},
    "opponent_greedy": {},
    "random_above": {},
}


def tactic_params(tactic) -> dict[str, float]:
    return {name: getattr(tactic, name) for name in PARAM_BOXES[tactic.kind]}


def make_tactic(kind: str, **params):
    registry = ACCEPTANCE_TACTICS if kind in ACCEPTANCE_TACTICS else BIDDING_TACTICS
    if kind not in registry:
        raise ValueError(f"unknown tactic {kind!r}")
    return registry[kind](**params)


# -- concrete strategies --------------------------------------------------------


@dataclass(frozen=True)
class AcceptancePhase:
    start: float
    end: float
    tactics: tuple[AcceptanceTactic, ...]


@dataclass(frozen=True)
class BiddingPhase:
    start: float
    end: float
    tactic: BiddingTactic


def _check_partition(phases) -> None:
    if not phases:
        raise ValueError("a strategy needs at least one phase")
    if phases[0].start != 0.0 or phases[-1].end != 1.0:
        raise ValueError("phases must cover [0, 1]")
    for p, q in zip(phases, phases[1:]):
        if p.end != q.start:
            raise ValueError("phases must be contiguous")
    if any(p.end <= p.start for p in phases):
        raise ValueError("phase boundaries must be strictly increasing")


def _phase_index(phases, t: float) -> int:
    for i, phase in enumerate(phases):
        if t < phase.end:
            return i
    return len(phases) - 1


@dataclass(frozen=True)
class ConcreteStrategy:
    acceptance: tuple[AcceptancePhase, ...]
    bidding: tuple[BiddingPhase, ...]

    def __post_init__(self):
        _check_partition(self.acceptance)
        _check_partition(self.bidding)
        for phase in self.acceptance:
            if not phase.tactics:
                raise ValueError("every acceptance phase needs an enabled tactic")

    def acceptance_phase(self, t: float) -> AcceptancePhase:
        return self.acceptance[_phase_index(self.acceptance, t)]

    def bidding_phase(self, t: float) -> BiddingPhase:
        return self.bidding[_phase_index(self.bidding, t)]

    def uses(self, kind: str) -> bool:
        kinds = {tac.kind for p in self.acceptance for tac in p.tactics}
        kinds |= {p.tactic.kind for p in self.bidding}
        return kind in kinds

    def to_dict(self) -> dict:
        return {
            "acceptance": [
                {
                    "start": p.start,
                    "end": p.end,
                    "tactics": [{"kind": tac.kind, **tactic_params(tac)} for tac in p.tactics],
                }
                for p in self.acceptance
            ],
            "bidding": [
                {"start": p.start, "end": p.end, "tactic": {"kind": p.tactic.kind, **tactic_params(p.tactic)}}
                for p in self.bidding
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> ConcreteStrategy:
        def tactic(raw: dict):
            raw = dict(raw)
            return make_tactic(raw.pop("kind"), **raw)

        acceptance = tuple(
            AcceptancePhase(float(p["start"]), float(p["end"]), tuple(tactic(t) for t in p["tactics"]))
            for p in data["acceptance"]
        )
        bidding = tuple(
            BiddingPhase(float(p["start"]), float(p["end"]), tactic(p["tactic"])) for p in data["bidding"]
        )
        return cls(acceptance, bidding)


def acceptance_threshold(
    tactic: AcceptanceTactic, t: float, own_next_bid_u: float, opp_history_us: Sequence[float], u_bar: float
) -> float:
    if isinstance(tactic, NextOwnBidUtility):
        return own_next_bid_u
    if isinstance(tactic, Quantile):
        if len(opp_history_us) == 0:
            return 1.0
        return float(np.quantile(np.asarray(opp_history_us, dtype=float), tactic.level(t)))
    if isinstance(tactic, DrlThreshold):
        return u_bar
    if isinstance(tactic, FixedThreshold):
        return tactic.u
    raise TypeError(f"not an acceptance tactic: {tactic!r}")


def accept_decision(
    strategy: ConcreteStrategy,
    state: AgentState,
    opp_bid_u: float,
    own_next_bid_u: float,
    opp_history_us: Sequence[float],
    u_bar: float,
) -> bool:
    """Accept iff the offer clears the threshold of every tactic enabled in the current phase."""
    phase = strategy.acceptance_phase(state.t)
    return all(
        opp_bid_u >= acceptance_threshold(tac, state.t, own_next_bid_u, opp_history_us, u_bar)
        for tac in phase.tactics
    )


def boulware_target(t: float, e: float, u_min: float, u_max: float) -> float:
    return u_min + (u_max - u_min) * (1.0 - t ** (1.0 / e))


@dataclass
class BiddingContext:
    """What the bidding tactics may consult on a turn."""

    own: OutcomeTable
    opponent: FrequencyModel | None = None
    front: ParetoFront | Callable[[], ParetoFront] | None = None
    last_opponent_bid: Bid | None = None
    u_min: float = 0.0
    weights: Sequence[float] = field(default_factory=tuple)

    def pareto_front(self) -> ParetoFront:
        if callable(self.front):
            return self.front()
        if self.front is None:
            raise ValueError("no Pareto front available")
        return self.front


def next_bid(strategy: ConcreteStrategy, state: AgentState, ctx: BiddingContext, u_bar: float, rng: np.random.Generator) -> Bid:
    """Bid produced by the tactic of the current bidding phase."""
    t = state.t
    tactic = strategy.bidding_phase(t).tactic
    own = ctx.own
    if isinstance(tactic, Boulware):
        target = boulware_target(t, tactic.e, ctx.u_min, own.max_utility)
        return own.at_least(target)
    if isinstance(tactic, ParetoSelect):
        return select_bid(ctx.pareto_front(), tactic.weight(t))
    if isinstance(tactic, OpponentGreedy):
        if ctx.last_opponent_bid is None:
            return own.best
        bid = list(ctx.last_opponent_bid)
        weights = np.asarray(ctx.weights if len(ctx.weights) else np.ones(len(bid)))
        issue = int(np.argmin(weights))
        bid[issue] = int(rng.integers(own.shape[issue]))
        return tuple(bid)
    if isinstance(tactic, RandomAbove):
        pool = own.indices_at_least(u_bar)
        if len(pool) == 0:
            return own.best
        return own.bid(int(rng.choice(pool)))
    raise TypeError(f"not a bidding tactic: {tactic!r}")


# -- rendering --------------------------------------------------------------------

_OFFER = "Û(ω^o_t) ≥ "


def _render_acceptance_tactic(tac: AcceptanceTactic) -> str:
    if isinstance(tac, NextOwnBidUtility):
        return "Û(ω_t)"
    if isinstance(tac, Quantile):
        return f"Q_Û(Ω^o_t)({tac.a!r}·t + {tac.b!r})"
    if isinstance(tac, DrlThreshold):
        return "ū_t"
    return f"ū({tac.u!r})"


def _render_bidding_tactic(tac: BiddingTactic) -> str:
    if isinstance(tac, Boulware):
        return f"b_Boulware(e={tac.e!r})"
    if isinstance(tac, ParetoSelect):
        return f"PS({tac.a!r}·t + {tac.b!r})"
    if isinstance(tac, OpponentGreedy):
        return "b_opp(ω^o_t)"
    return "ω ~ U(Ω≥ū_t)"


def _interval(start: float, end: float) -> str:
    close = "]" if end == 1.0 else ")"
    return f"t ∈ [{start!r}, {end!r}{close}"


def render_strategy(strategy: ConcreteStrategy) -> str:
    assert all(p.tactics for p in strategy.acceptance), "acceptance phase without tactics"
    assert strategy.bidding, "strategy without bidding phases"
    lines = ["acceptance:"]
    for p in strategy.acceptance:
        conj = " ∧ ".join(_render_acceptance_tactic(t) for t in p.tactics)
        lines.append(f"  {_interval(p.start, p.end)} → {_OFFER}{conj}")
    lines.append("bidding:")
    for p in strategy.bidding:
        tac = p.tactic
        body = _render_bidding_tactic(tac) if isinstance(tac, RandomAbove) else f"ω = {_render_bidding_tactic(tac)}"
        lines.append(f"  {_interval(p.start, p.end)} → {body}")
    return "\n".join(lines) + "\n"


_NUM = r"(-?[0-9.eE+-]+|inf|nan)"
_INTERVAL_RE = re.compile(rf"^\s*t ∈ \[{_NUM}, {_NUM}[)\]] → (.*)$")


def _parse_acceptance_tactic(text: str) -> AcceptanceTactic:
    text = text.strip()
    if text == "Û(ω_t)":
        return NextOwnBidUtility()
    if text == "ū_t":
        return DrlThreshold()
    m = re.fullmatch(rf"Q_Û\(Ω\^o_t\)\({_NUM}·t \+ {_NUM}\)", text)
    if m:
        return Quantile(float(m.group(1)), float(m.group(2)))
    m = re.fullmatch(rf"ū\({_NUM}\)", text)
    if m:
        return FixedThreshold(float(m.group(1)))
    raise ValueError(f"unrecognised acceptance tactic {text!r}")


def _parse_bidding_tactic(text: str) -> BiddingTactic:
    text = text.strip()
    if text == "ω ~ U(Ω≥ū_t)":
        return RandomAbove()
    if not text.startswith("ω = "):
        raise ValueError(f"unrecognised bidding tactic {text!r}")
    text = text[len("ω = ") :]
    if text == "b_opp(ω^o_t)":
        return OpponentGreedy()
    m = re.fullmatch(rf"b_Boulware\(e={_NUM}\)", text)
    if m:
        return Boulware(float(m.group(1)))
    m = re.fullmatch(rf"PS\({_NUM}·t \+ {_NUM}\)", text)
    if m:
        return ParetoSelect(float(m.group(1)), float(m.group(2)))
    raise ValueError(f"unrecognised bidding tactic {text!r}")


def parse_strategy(text: str) -> ConcreteStrategy:
    section = None
    acceptance: list[AcceptancePhase] = []
    bidding: list[BiddingPhase] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.strip() in ("acceptance:", "bidding:"):
            section = line.strip()[:-1]
            continue
        m = _INTERVAL_RE.match(line)
        if not m or section is None:
            raise ValueError(f"cannot parse strategy line {line!r}")
        start, end, body = float(m.group(1)), float(m.group(2)), m.group(3)
        if section == "acceptance":
            if not body.startswith(_OFFER):
                raise ValueError(f"acceptance line must start with {_OFFER!r}: {line!r}")
            parts = body[len(_OFFER) :].split(" ∧ ")
            acceptance.append(AcceptancePhase(start, end, tuple(_parse_acceptance_tactic(p) for p in parts)))
        else:
            bidding.append(BiddingPhase(start, end, _parse_bidding_tactic(body)))
    return ConcreteStrategy(tuple(acceptance), tuple(bidding))


# -- templates ----------------------------------------------------------------------


@dataclass(frozen=True)
class StrategyTemplate:
    """Learnable schema: per phase a duration gene, a choice gene per candidate tactic,
    and that tactic's parameter genes. All genes live in [0, 1]."""

    acceptance: tuple[tuple[str, ...], ...] = (tuple(ACCEPTANCE_TACTICS),) * 4
    bidding: tuple[tuple[str, ...], ...] = (tuple(BIDDING_TACTICS),) * 4

    def __post_init__(self):
        if not self.acceptance or not self.bidding:
            raise ValueError("a template needs at least one phase of each kind")
        for cands in self.acceptance:
            if not cands or any(k not in ACCEPTANCE_TACTICS for k in cands):
                raise ValueError(f"bad acceptance candidates {cands}")
        for cands in self.bidding:
            if not cands or any(k not in BIDDING_TACTICS for k in cands):
                raise ValueError(f"bad bidding candidates {cands}")
        if MIN_PHASE * max(len(self.acceptance), len(self.bidding)) >= 1.0:
            raise ValueError("too many phases for the minimum phase duration")

    @classmethod
    def single(cls, acceptance: Sequence[str], bidding: Sequence[str]) -> StrategyTemplate:
        return cls((tuple(acceptance),), (tuple(bidding),))

    def _block_size(self, phases) -> int:
        return len(phases) + sum(1 + len(PARAM_BOXES[k]) for cands in phases for k in cands)

    @property
    def dim(self) -> int:
        return self._block_size(self.acceptance) + self._block_size(self.bidding)

    @property
    def is_fixed(self) -> bool:
        """True when every gene vector decodes to the same strategy."""
        phases = self.acceptance + self.bidding
        return (
            len(self.acceptance) == 1
            and len(self.bidding) == 1
            and all(len(c) == 1 for c in phases)
            and all(not PARAM_BOXES[k] for c in phases for k in c)
        )

    @staticmethod
    def _boundaries(genes: np.ndarray) -> list[float]:
        n = len(genes)
        z = np.exp(3.0 * (genes - genes.max()))
        durations = MIN_PHASE + (1.0 - MIN_PHASE * n) * z / z.sum()
        bounds = [0.0]
        for d in durations[:-1]:
            bounds.append(min(1.0, bounds[-1] + float(d)))
        bounds.append(1.0)
        return bounds

    def _decode_block(self, phases, x: np.ndarray, accept: bool):
        n = len(phases)
        bounds = self._boundaries(x[:n])
        k = n
        out = []
        for i, cands in enumerate(phases):
            choices, tactics = [], []
            for kind in cands:
                choices.append(x[k])
                k += 1
                params = {}
                for name, (lo, hi) in PARAM_BOXES[kind].items():
                    params[name] = float(lo + (hi - lo) * np.clip(x[k], 0.0, 1.0))
                    k += 1
                tactics.append(make_tactic(kind, **params))
            choices = np.asarray(choices)
            if accept:
                enabled = [tac for tac, c in zip(tactics, choices) if c >= 0.5]
                if not enabled:
                    enabled = [tactics[int(np.argmax(choices))]]
                out.append(AcceptancePhase(bounds[i], bounds[i + 1], tuple(enabled)))
            else:
                out.append(BiddingPhase(bounds[i], bounds[i + 1], tactics[int(np.argmax(choices))]))
        return out, k

    def decode(self, x: Sequence[float]) -> ConcreteStrategy:
        x = np.asarray(x, dtype=float)
        if len(x) != self.dim:
            raise ValueError(f"expected {self.dim} genes, got {len(x)}")
        acceptance, k = self._decode_block(self.acceptance, x, True)
        bidding, _ = self._decode_block(self.bidding, x[k:], False)
        return ConcreteStrategy(tuple(acceptance), tuple(bidding))

    def default_vector(self) -> np.ndarray:
        """Equal phases; accept on next-own-bid utility, bid Boulware, default parameters."""
        genes: list[float] = []
        for phases, preferred in ((self.acceptance, "next_own"), (self.bidding, "boulware")):
            genes += [0.5] * len(phases)
            for cands in phases:
                pick = preferred if preferred in cands else cands[0]
                for kind in cands:
                    genes.append(1.0 if kind == pick else 0.0)
                    default = make_tactic(kind)
                    for name, (lo, hi) in PARAM_BOXES[kind].items():
                        genes.append((getattr(default, name) - lo) / (hi - lo))
        return np.asarray(genes)

    def default_strategy(self) -> ConcreteStrategy:
        return self.decode(self.default_vector())


def default_strategy() -> ConcreteStrategy:
    return StrategyTemplate().default_strategy()


@dataclass
class LearningResult:
    strategy: ConcreteStrategy
    fitness: float
    default_fitness: float
    evaluations: int
    history: list[float]


def search_template(
    template: StrategyTemplate,
    fitness: Callable[[ConcreteStrategy], float],
    fa: FaParams,
) -> LearningResult:
    """Search template genes with FA; ``fitness`` scores a decoded strategy.

    The default strategy seeds the swarm, so the result never scores below it.
    """
    default = template.default_strategy()
    if template.is_fixed:
        return LearningResult(default, math.nan, math.nan, 0, [])
    cache: dict[ConcreteStrategy, float] = {}

    def objective(x: np.ndarray) -> float:
        strategy = template.decode(x)
        if strategy not in cache:
            cache[strategy] = float(fitness(strategy))
        return cache[strategy]

    search = Firefly(objective, [(0.0, 1.0)] * template.dim, fa, initial=[template.default_vector()])
    best, value = search.run()
    return LearningResult(template.decode(best), value, cache[default], search.evaluations, search.history)
