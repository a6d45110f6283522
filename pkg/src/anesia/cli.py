"""Command-line entry point: ``anesia <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .domain import (
    SessionConfig,
    load_domain,
    load_partial_profile,
    load_profile,
    sample_partial_profile,
    save_domain,
    save_partial_profile,
    save_profile,
    Profile,
)
from .metaheuristics import FaParams, Nsga2Params
from .opponent_model import FrequencyModel

log = logging.getLogger("anesia")


def _write_json(data, out: str | None) -> None:
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _fa_args(p: argparse.ArgumentParser, population: int = 20, generations: int = 200) -> None:
    p.add_argument("--population", type=int, default=population, help="FA swarm size")
    p.add_argument("--generations", type=int, default=generations, help="FA generations")


def _fa_from(args, seed: int | None = None) -> FaParams:
    return FaParams(population=args.population, generations=args.generations, seed=args.seed if seed is None else seed)


# -- subcommands -------------------------------------------------------------------


def cmd_gen_domain(args) -> int:
    from .generator import gen_domain, preset

    if args.preset:
        scenario = preset(args.preset, args.seed, reservation=args.reservation, discount=args.discount)
    else:
        scenario = gen_domain(args.issues, args.opposition, args.seed, args.name,
                              reservation=args.reservation, discount=args.discount)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_domain(scenario.domain, out / "domain.json")
    save_profile(scenario.profiles[0], out / "profile_a.json")
    save_profile(scenario.profiles[1], out / "profile_b.json")
    _write_json({"domain": scenario.domain.name, "size": scenario.domain.size,
                 "shape": list(scenario.domain.shape), "opposition": scenario.opposition}, None)
    return 0


def cmd_estimate(args) -> int:
    from .user_model import cardinal_inaccuracy, estimate_user_model, ordinal_accuracy

    domain = load_domain(args.domain)
    truth = load_profile(args.profile, domain) if args.profile else None
    if args.partial:
        partial = load_partial_profile(args.partial, domain)
    elif truth is not None:
        partial = sample_partial_profile(truth.utility, domain, args.fraction, args.seed)
    else:
        raise ValueError("need --partial or --profile to obtain ranked bids")
    report = estimate_user_model(domain, partial, _fa_from(args))
    result = report.to_dict()
    result["bids"] = len(partial)
    if truth is not None:
        result["oa"] = ordinal_accuracy(report.estimated, truth.utility, domain)
        result["ci"] = cardinal_inaccuracy(report.estimated, truth.utility)
    if args.out:
        reservation = truth.reservation if truth else 0.0
        discount = truth.discount if truth else 1.0
        save_profile(Profile(domain.name, report.estimated, reservation, discount), args.out)
    if args.save_partial:
        save_partial_profile(partial, args.save_partial)
    _write_json(result, None)
    return 0


def cmd_pareto(args) -> int:
    from .pareto import BRUTE_FORCE_CAP, approximate_front, brute_force_front, igd

    domain = load_domain(args.domain)
    own = load_profile(args.profile, domain).utility
    if args.opponent_uniform:
        opp = FrequencyModel(domain).as_utility()
    else:
        opp = load_profile(args.opponent_profile, domain).utility
    params = Nsga2Params.for_domain(domain.size, args.preset, seed=args.seed)
    front = approximate_front(own, opp, domain, params)
    result = {**front.to_dict(), "nsga2": params.__dict__, "size": domain.size}
    if domain.size <= BRUTE_FORCE_CAP:
        truth = brute_force_front(own, opp, domain)
        result["true_front"] = truth.to_dict()["front"]
        result["igd"] = igd(front, truth)
    _write_json(result, args.out)
    return 0


def _training(path: str, seed: int):
    from .tournament import build_agent, scenarios_from

    path = Path(path)
    cfg = json.loads(path.read_text())
    session = SessionConfig(
        deadline_rounds=cfg.get("deadline", 200),
        reservation=cfg.get("reservation", 0.0),
        discount=cfg.get("discount", 1.0),
        agent_discount=cfg.get("agent_discount", 0.9),
    )
    scenarios = scenarios_from(cfg.get("domains", []), path.parent, session)
    specs = cfg.get("opponents", [])
    opponents = [lambda s=s: build_agent(s, path.parent) for s in specs]
    if not scenarios or not opponents:
        raise ValueError("training config needs domains and opponents")
    return cfg, session, scenarios, opponents


def cmd_learn_template(args) -> int:
    from .agent import learn_template_params
    from .strategy import StrategyTemplate, render_strategy

    cfg, session, scenarios, opponents = _training(args.config, args.seed)
    template = StrategyTemplate()
    if "template" in cfg:
        t = cfg["template"]
        template = StrategyTemplate(tuple(map(tuple, t["acceptance"])), tuple(map(tuple, t["bidding"])))
    fa = FaParams(**{"population": 10, "generations": 10, **cfg.get("fa", {}), "seed": args.seed})
    result = learn_template_params(template, opponents, scenarios, fa, config=session,
                                   repeats=cfg.get("repeats", 1), seed=args.seed)
    _write_json({
        "strategy": result.strategy.to_dict(),
        "text": render_strategy(result.strategy),
        "fitness": result.fitness,
        "default_fitness": result.default_fitness,
        "evaluations": result.evaluations,
    }, args.out)
    return 0


def cmd_pretrain(args) -> int:
    from .agent import teacher_dataset
    from .drl import DdpgModel, pretrain_supervised

    cfg, session, scenarios, opponents = _training(args.config, args.seed)
    data = teacher_dataset(scenarios, opponents, session, seed=args.seed)
    model = DdpgModel.load(args.model) if args.model else DdpgModel(seed=args.seed)
    curve = pretrain_supervised(model, data, args.epochs or cfg.get("epochs", 20), seed=args.seed)
    model.save(args.out)
    _write_json({"samples": len(data), "loss": curve}, None)
    return 0


def cmd_train_rl(args) -> int:
    from .agent import train_rl
    from .drl import DdpgModel
    from .tournament import load_strategy

    cfg, session, scenarios, opponents = _training(args.config, args.seed)
    model = DdpgModel.load(args.model) if args.model else DdpgModel(seed=args.seed)
    strategy = load_strategy(args.strategy) if args.strategy else None
    sessions = args.sessions or cfg.get("sessions", 50)
    utilities = train_rl(model, scenarios, opponents, sessions, strategy, session, args.seed)
    model.save(args.out)
    _write_json({"sessions": sessions, "mean_utility": sum(utilities) / len(utilities),
                 "replay": len(model.replay)}, None)
    return 0


def _agent_spec(text: str) -> dict:
    return json.loads(text) if text.lstrip().startswith("{") else {"kind": text}


def cmd_run(args) -> int:
    from .protocol import run_session
    from .tournament import build_agent, profile_seed

    domain = load_domain(args.domain)
    profiles = (load_profile(args.profile_a, domain), load_profile(args.profile_b, domain))
    config = SessionConfig(args.deadline, profiles[0].reservation, profiles[0].discount)
    partials = (None, None)
    if args.fraction:
        partials = tuple(
            sample_partial_profile(p.utility, domain, args.fraction, profile_seed(args.seed, 0, side, 0))
            for side, p in enumerate(profiles)
        )
    agents = [build_agent(_agent_spec(s)) for s in (args.agent_a, args.agent_b)]
    session = run_session(agents[0], agents[1], config, args.seed, domain=domain,
                          utilities=[p.utility for p in profiles], profiles=partials,
                          reveal_utilities=not args.fraction)
    if args.out:
        session.save(args.out)
    else:
        sys.stdout.write(session.to_jsonl())
    return 0


def cmd_tournament(args) -> int:
    from .metrics import metrics_csv
    from .tournament import TournamentConfig, run_tournament

    config = TournamentConfig.load(args.config, seed=args.seed)
    if args.workers:
        config = TournamentConfig(**{**config.__dict__, "workers": args.workers})
    result = run_tournament(config)
    result.write(args.out)
    sys.stdout.write(metrics_csv(result.aggregate.values()))
    return 0


def _logs(paths: list[str]):
    from .protocol import SessionLog

    files: list[Path] = []
    for p in map(Path, paths):
        files.extend(sorted(p.rglob("*.jsonl")) if p.is_dir() else [p])
    if not files:
        raise ValueError("no session logs found")
    return [SessionLog.load(f) for f in files]


def cmd_metrics(args) -> int:
    from .metrics import compute_metrics, metrics_csv

    text = metrics_csv(compute_metrics(_logs(args.logs)).values())
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_replay(args) -> int:
    from .metrics import compute_metrics, log_utilities
    from .protocol import check_log, replay_settlement

    [session] = _logs([args.log])
    check_log(session)
    recomputed = replay_settlement(session, log_utilities(session))
    ok = all(abs(a - b) <= 1e-12 for a, b in zip(recomputed, session.utilities))
    rows = compute_metrics([session])
    _write_json({
        "settlement_verified": ok,
        "recorded": list(session.utilities),
        "recomputed": list(recomputed),
        "metrics": [row.to_dict() for row in rows.values()],
    }, None)
    return 0 if ok else 1


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    from .generator import BANDS, PRESETS

    parser = argparse.ArgumentParser(prog="anesia", description="Negotiation agents under preference uncertainty")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-domain", help="synthesize a domain and two opposing profiles")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--issues", type=int, nargs="+", help="value count per issue")
    src.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--opposition", choices=list(BANDS), default="medium")
    p.add_argument("--name")
    p.add_argument("--reservation", type=float, default=0.0)
    p.add_argument("--discount", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="directory for domain.json, profile_a.json, profile_b.json")
    p.set_defaults(func=cmd_gen_domain)

    p = sub.add_parser("estimate-user-model", help="fit a utility to a ranked partial profile")
    p.add_argument("--domain", required=True)
    p.add_argument("--profile", help="true profile; used to sample bids and score the estimate")
    p.add_argument("--partial", help="ranked bids file")
    p.add_argument("--fraction", type=float, default=0.1)
    p.add_argument("--save-partial")
    _fa_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the estimated profile here")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("pareto", help="approximate the Pareto front with NSGA-II")
    p.add_argument("--domain", required=True)
    p.add_argument("--profile", required=True)
    opp = p.add_mutually_exclusive_group(required=True)
    opp.add_argument("--opponent-profile")
    opp.add_argument("--opponent-uniform", action="store_true", help="fresh frequency model as opponent")
    p.add_argument("--preset", choices=["fraction", "fixed"], default="fraction")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_pareto)

    for name, func, helptext in (
        ("learn-template", cmd_learn_template, "learn strategy template parameters"),
        ("pretrain", cmd_pretrain, "supervised pretraining of the threshold actor"),
        ("train-rl", cmd_train_rl, "DDPG training through negotiation sessions"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="training config JSON")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True)
        if name != "learn-template":
            p.add_argument("--model", help="checkpoint to start from")
        if name == "pretrain":
            p.add_argument("--epochs", type=int)
        if name == "train-rl":
            p.add_argument("--sessions", type=int)
            p.add_argument("--strategy", help="strategy JSON")
        p.set_defaults(func=func)

    p = sub.add_parser("run", help="play one session")
    p.add_argument("--domain", required=True)
    p.add_argument("--profile-a", required=True)
    p.add_argument("--profile-b", required=True)
    p.add_argument("--agent-a", default="anesia", help="agent kind or JSON spec")
    p.add_argument("--agent-b", default="boulware")
    p.add_argument("--fraction", type=float, help="|B| fraction; omit to reveal true utilities")
    p.add_argument("--deadline", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("tournament", help="round-robin tournament from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", default="tournament-out")
    p.set_defaults(func=cmd_tournament)

    p = sub.add_parser("metrics", help="aggregate metrics from session logs")
    p.add_argument("--logs", nargs="+", required=True, help="log files or directories")
    p.add_argument("--seed", type=int, default=0, help="unused; accepted for uniformity")
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("replay", help="re-verify a session log's settlement")
    p.add_argument("--log", required=True)
    p.add_argument("--seed", type=int, default=0, help="unused; accepted for uniformity")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, RuntimeError, AssertionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
