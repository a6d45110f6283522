"""Config-driven round-robin tournaments and the agent/domain registries they use."""

from __future__ import annotations

import functools
import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import baselines
from .agent import AnesiaAgent
from .domain import (
    SessionConfig,
    load_domain,
    load_profile,
    sample_partial_profile,
)
from .drl import DdpgModel
from .generator import PRESETS, Scenario, gen_domain, opposition, preset
from .metaheuristics import FaParams
from .metrics import MetricsRow, compute_metrics, metrics_csv, true_front_oracle
from .protocol import Negotiator, SessionLog, run_session
from .strategy import ConcreteStrategy, default_strategy

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


# -- registries -----------------------------------------------------------------

AGENT_KINDS = ("boulware", "conceder", "hardliner", "random", "teacher", "accept_all", "never_accept", "anesia")


def _fa(spec: dict | None, default: FaParams = baselines.ESTIMATION_FA) -> FaParams:
    if not spec:
        return default
    return FaParams(**{**default.__dict__, **spec})


@functools.lru_cache(maxsize=32)
def _load_model(path: str) -> DdpgModel:
    return DdpgModel.load(path)


@functools.lru_cache(maxsize=32)
def _load_strategy(path: str) -> ConcreteStrategy:
    return load_strategy(path)


def load_strategy(path: str | Path) -> ConcreteStrategy:
    data = json.loads(Path(path).read_text())
    return ConcreteStrategy.from_dict(data.get("strategy", data))


def build_agent(spec: dict, base_dir: str | Path = ".") -> Negotiator:
    """Instantiate a fresh agent from a roster entry such as ``{"kind": "boulware", "e": 0.2}``."""
    kind = spec.get("kind")
    name = spec.get("name", kind)
    base = Path(base_dir)
    if kind == "boulware":
        agent = baselines.Boulware(spec.get("e", 0.2), name)
    elif kind == "conceder":
        agent = baselines.Conceder(spec.get("e", 2.0), name)
    elif kind == "hardliner":
        agent = baselines.Hardliner(spec.get("u", 1.0), name)
    elif kind == "random":
        agent = baselines.RandomAgent(name)
    elif kind == "teacher":
        agent = baselines.FrequencyTeacher(spec.get("window", 10), name=name)
    elif kind == "accept_all":
        return baselines.AcceptAll(name)
    elif kind == "never_accept":
        agent = baselines.NeverAccept(name)
    elif kind == "anesia":
        strategy = spec.get("strategy", "default")
        if isinstance(strategy, dict):
            strategy = ConcreteStrategy.from_dict(strategy)
        elif strategy == "default":
            strategy = default_strategy()
        else:
            strategy = _load_strategy(str((base / strategy).resolve()))
        model = _load_model(str((base / spec["model"]).resolve())) if spec.get("model") else DdpgModel(seed=0)
        return AnesiaAgent(
            strategy,
            model,
            fa=_fa(spec.get("fa")),
            nsga_preset=spec.get("nsga_preset", "fraction"),
            window=spec.get("window", 10),
            name=name,
        )
    else:
        raise ConfigError(f"unknown agent kind {kind!r}; expected one of {', '.join(AGENT_KINDS)}")
    if spec.get("fa"):
        agent.fa = _fa(spec["fa"])
    return agent


def build_scenario(spec: dict, base_dir: str | Path = ".", config: SessionConfig = SessionConfig()) -> Scenario:
    """A domain entry: ``{"preset": name, "seed": s}``, ``{"issues": [...], "opposition": band, "seed": s}``
    or ``{"domain": path, "profiles": [path_a, path_b]}``."""
    base = Path(base_dir)
    kwargs = {"reservation": config.reservation, "discount": config.discount}
    if "preset" in spec:
        if spec["preset"] not in PRESETS:
            raise ConfigError(f"unknown domain preset {spec['preset']!r}")
        return preset(spec["preset"], spec.get("seed", 0), **kwargs)
    if "issues" in spec:
        return gen_domain(spec["issues"], spec.get("opposition", "medium"), spec.get("seed", 0), spec.get("name"), **kwargs)
    if "domain" in spec:
        domain = load_domain(base / spec["domain"])
        paths = spec.get("profiles")
        if not paths or len(paths) != 2:
            raise ConfigError("a file-based domain needs two profile paths")
        pa, pb = (load_profile(base / p, domain) for p in paths)
        return Scenario(domain, (pa, pb), opposition(pa.utility, pb.utility, domain))
    raise ConfigError(f"cannot interpret domain entry {spec!r}")


# -- configuration ------------------------------------------------------------------


@dataclass(frozen=True)
class TournamentConfig:
    agents: tuple[dict, ...]
    domains: tuple[dict, ...]
    profiles: tuple[float, ...] = (0.1,)
    repeats: int = 1
    session: SessionConfig = SessionConfig(deadline_rounds=200)
    seed: int = 0
    uncertainty: bool = True
    workers: int = 1
    base_dir: str = "."

    def __post_init__(self):
        names = [a.get("name", a.get("kind")) for a in self.agents]
        if len(names) < 2:
            raise ConfigError("a tournament needs at least two agents")
        if len(set(names)) != len(names):
            raise ConfigError(f"agent names must be unique: {names}")
        for a in self.agents:
            if a.get("kind") not in AGENT_KINDS:
                raise ConfigError(f"unknown agent kind {a.get('kind')!r}")
        if not self.domains:
            raise ConfigError("a tournament needs at least one domain")
        if not self.profiles or any(not 0 < f <= 1 for f in self.profiles):
            raise ConfigError("profiles must be |B| fractions in (0, 1]")
        if self.repeats < 1:
            raise ConfigError("repeats must be positive")

    @property
    def names(self) -> list[str]:
        return [a.get("name", a.get("kind")) for a in self.agents]

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | Path = ".", seed: int | None = None) -> TournamentConfig:
        known = {"agents", "domains", "profiles", "repeats", "deadline", "reservation", "discount",
                 "agent_discount", "seed", "uncertainty", "workers", "estimation"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown tournament config keys: {sorted(unknown)}")
        estimation = data.get("estimation")
        agents = tuple({**({"fa": estimation} if estimation else {}), **a} for a in data.get("agents", []))
        session = SessionConfig(
            deadline_rounds=data.get("deadline", 200),
            reservation=data.get("reservation", 0.0),
            discount=data.get("discount", 1.0),
            agent_discount=data.get("agent_discount", 0.9),
        )
        return cls(
            agents=agents,
            domains=tuple(data.get("domains", [])),
            profiles=tuple(float(f) for f in data.get("profiles", [0.1])),
            repeats=int(data.get("repeats", 1)),
            session=session,
            seed=int(data.get("seed", 0) if seed is None else seed),
            uncertainty=bool(data.get("uncertainty", True)),
            workers=int(data.get("workers", 1)),
            base_dir=str(base_dir),
        )

    @classmethod
    def load(cls, path: str | Path, seed: int | None = None) -> TournamentConfig:
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), path.parent, seed)


def session_count(n_agents: int, n_domains: int, repeats: int, n_profiles: int, sides: int = 2) -> int:
    """n(n-1)/2 pairs, both sides, every domain, repeat and profile size."""
    return n_agents * (n_agents - 1) // 2 * sides * n_domains * repeats * n_profiles


def session_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([master, index]).generate_state(1, np.uint64)[0])


def profile_seed(master: int, domain_index: int, side: int, fraction_index: int) -> int:
    return int(np.random.SeedSequence([master, 1, domain_index, side, fraction_index]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class SessionPlan:
    index: int
    agent_a: int
    agent_b: int
    domain: int
    repeat: int
    fraction: int
    seed: int


def plan_sessions(config: TournamentConfig) -> list[SessionPlan]:
    """Every session of the round robin in a fixed order, each with its own seed."""
    plans = []
    k = 0
    for i, j in itertools.combinations(range(len(config.agents)), 2):
        for a, b in ((i, j), (j, i)):
            for d in range(len(config.domains)):
                for r in range(config.repeats):
                    for f in range(len(config.profiles)):
                        plans.append(SessionPlan(k, a, b, d, r, f, session_seed(config.seed, k)))
                        k += 1
    expected = session_count(len(config.agents), len(config.domains), config.repeats, len(config.profiles))
    assert len(plans) == expected, (len(plans), expected)
    return plans


@dataclass(frozen=True)
class _Job:
    plan: SessionPlan
    specs: tuple[dict, dict]
    scenario: Scenario
    partials: tuple
    session: SessionConfig
    reveal: bool
    base_dir: str


def _play(job: _Job) -> str:
    agent_a = build_agent(job.specs[0], job.base_dir)
    agent_b = build_agent(job.specs[1], job.base_dir)
    result = run_session(
        agent_a,
        agent_b,
        job.session,
        job.plan.seed,
        domain=job.scenario.domain,
        utilities=job.scenario.utilities,
        profiles=job.partials,
        reveal_utilities=job.reveal,
    )
    return result.to_jsonl()


@dataclass
class TournamentResult:
    config: TournamentConfig
    plans: list[SessionPlan]
    logs: list[SessionLog]
    aggregate: dict[str, MetricsRow]
    pairs: dict[str, dict[str, MetricsRow]]

    def summary(self) -> dict:
        cfg = self.config
        return {
            "seed": cfg.seed,
            "sessions": len(self.logs),
            "formula": {
                "n": len(cfg.agents),
                "x": 2,
                "y": len(cfg.domains),
                "z": cfg.repeats,
                "w": len(cfg.profiles),
                "total": session_count(len(cfg.agents), len(cfg.domains), cfg.repeats, len(cfg.profiles)),
            },
            "aggregate": [row.to_dict() for row in self.aggregate.values()],
            "pairs": {pair: [row.to_dict() for row in rows.values()] for pair, rows in self.pairs.items()},
        }

    def write(self, out: str | Path) -> None:
        out = Path(out)
        (out / "sessions").mkdir(parents=True, exist_ok=True)
        for plan, slog in zip(self.plans, self.logs):
            slog.save(out / "sessions" / f"{plan.index:05d}.jsonl")
        (out / "results.csv").write_text(metrics_csv(self.aggregate.values()))
        (out / "summary.json").write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")


def _pair_key(log_: SessionLog) -> str:
    return " vs ".join(sorted(log_.agents))


def run_tournament(config: TournamentConfig) -> TournamentResult:
    scenarios = [build_scenario(d, config.base_dir, config.session) for d in config.domains]
    partials: dict[tuple[int, int, int], object] = {}
    if config.uncertainty:
        for d, scenario in enumerate(scenarios):
            for side in (0, 1):
                for f, fraction in enumerate(config.profiles):
                    partials[d, side, f] = sample_partial_profile(
                        scenario.utilities[side], scenario.domain, fraction, profile_seed(config.seed, d, side, f)
                    )
    plans = plan_sessions(config)
    jobs = [
        _Job(
            plan=p,
            specs=(config.agents[p.agent_a], config.agents[p.agent_b]),
            scenario=scenarios[p.domain],
            partials=(partials.get((p.domain, 0, p.fraction)), partials.get((p.domain, 1, p.fraction))),
            session=config.session,
            reveal=not config.uncertainty,
            base_dir=config.base_dir,
        )
        for p in plans
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            texts = list(pool.map(_play, jobs, chunksize=max(1, len(jobs) // (4 * config.workers))))
    else:
        texts = [_play(job) for job in jobs]
    logs = [SessionLog.from_jsonl(t) for t in texts]
    expected = session_count(len(config.agents), len(config.domains), config.repeats, len(config.profiles))
    assert len(logs) == expected, f"played {len(logs)} sessions, formula gives {expected}"

    oracle = true_front_oracle()
    aggregate = compute_metrics(logs, oracle)
    by_pair: dict[str, list[SessionLog]] = {}
    for slog in logs:
        by_pair.setdefault(_pair_key(slog), []).append(slog)
    pairs = {pair: compute_metrics(group, oracle) for pair, group in sorted(by_pair.items())}
    return TournamentResult(config, plans, logs, aggregate, pairs)


def scenarios_from(specs: Sequence[dict], base_dir: str | Path = ".", session: SessionConfig = SessionConfig()) -> list[Scenario]:
    return [build_scenario(s, base_dir, session) for s in specs]

