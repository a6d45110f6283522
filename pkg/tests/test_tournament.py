from __future__ import annotations

import json

import numpy as np
import pytest

from anesia import cli
from anesia.generator import BANDS, PRESETS, GenerationError, gen_domain, opposition, preset
from anesia.drl import DdpgModel
from anesia.protocol import SessionLog
from anesia.tournament import (
    ConfigError,
    TournamentConfig,
    build_agent,
    load_strategy,
    plan_sessions,
    run_tournament,
    session_count,
)

FOUR = [{"kind": "boulware"}, {"kind": "conceder"}, {"kind": "hardliner", "u": 0.9}, {"kind": "random"}]


def small_config(**kw) -> TournamentConfig:
    data = {
        "agents": [{"kind": "boulware"}, {"kind": "conceder"}, {"kind": "teacher"}],
        "domains": [{"issues": [3, 3], "opposition": "medium", "seed": 1}],
        "profiles": [0.3],
        "deadline": 30,
        "estimation": {"population": 6, "generations": 10},
    }
    data.update(kw)
    return TournamentConfig.from_dict(data, seed=7)


def test_session_count_examples():
    assert session_count(4, 3, 20, 2) == 1440
    assert session_count(2, 1, 1, 1) == 2


def test_plan_matches_formula_and_seeds_unique():
    cfg = TournamentConfig(
        agents=tuple(FOUR),
        domains=tuple({"preset": p} for p in ("flight", "outfit", "itex")),
        profiles=(0.1, 0.2),
        repeats=20,
    )
    plans = plan_sessions(cfg)
    assert len(plans) == 1440
    assert len({p.seed for p in plans}) == 1440
    assert [p.index for p in plans] == list(range(1440))
    roles = {(p.agent_a, p.agent_b) for p in plans}
    assert all((b, a) in roles for a, b in roles)


def test_two_agent_tournament():
    cfg = TournamentConfig.from_dict(
        {"agents": [{"kind": "boulware"}, {"kind": "conceder"}], "domains": [{"issues": [4, 3]}], "uncertainty": False}
    )
    result = run_tournament(cfg)
    assert len(result.logs) == 2
    assert [log.agents for log in result.logs] == [("boulware", "conceder"), ("conceder", "boulware")]
    assert result.summary()["formula"]["total"] == 2


def test_rerun_identical_bytes(tmp_path):
    for name in ("a", "b"):
        run_tournament(small_config()).write(tmp_path / name)
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()
    a_logs = sorted((tmp_path / "a" / "sessions").iterdir())
    b_logs = sorted((tmp_path / "b" / "sessions").iterdir())
    assert len(a_logs) == 6
    assert [p.read_bytes() for p in a_logs] == [p.read_bytes() for p in b_logs]


def test_parallel_matches_serial():
    serial = run_tournament(small_config())
    parallel = run_tournament(TournamentConfig(**{**small_config().__dict__, "workers": 2}))
    assert [l.to_jsonl() for l in serial.logs] == [l.to_jsonl() for l in parallel.logs]


def test_summary_pairs():
    result = run_tournament(small_config())
    summary = result.summary()
    assert summary["sessions"] == 6
    assert sorted(summary["pairs"]) == ["boulware vs conceder", "boulware vs teacher", "conceder vs teacher"]
    assert {row["agent"] for row in summary["aggregate"]} == {"boulware", "conceder", "teacher"}


def test_config_errors():
    with pytest.raises(ConfigError):
        TournamentConfig.from_dict({"agents": [{"kind": "boulware"}, {"kind": "nonsense"}], "domains": [{"issues": [2]}]})
    with pytest.raises(ConfigError):
        TournamentConfig.from_dict({"agents": [{"kind": "boulware"}, {"kind": "boulware"}], "domains": [{"issues": [2]}]})
    with pytest.raises(ConfigError):
        TournamentConfig.from_dict({"agents": FOUR, "domains": [{"issues": [2]}], "color": "blue"})
    with pytest.raises(ConfigError):
        TournamentConfig.from_dict({"agents": FOUR, "domains": []})
    with pytest.raises(ConfigError):
        TournamentConfig.from_dict({"agents": FOUR, "domains": [{"issues": [2]}], "profiles": [0.0]})
    bad_domain = TournamentConfig.from_dict({"agents": FOUR, "domains": [{"preset": "atlantis"}]})
    with pytest.raises(ConfigError):
        run_tournament(bad_domain)
    with pytest.raises(ConfigError):
        build_agent({"kind": "telepath"})


# -- generator ----------------------------------------------------------------------------


@pytest.mark.parametrize("band", list(BANDS))
@pytest.mark.parametrize("counts", [(3, 4), (4, 4, 3), (2, 2, 2, 2)])
def test_generated_opposition_in_band(band, counts):
    sc = gen_domain(counts, band, seed=3)
    lo, hi = BANDS[band]
    assert lo <= sc.opposition < hi
    assert sc.opposition == pytest.approx(opposition(*sc.utilities, sc.domain))
    assert sc.domain.size == int(np.prod(counts))


def test_presets_mirror_reference_sizes():
    sizes = sorted(int(np.prod(shape)) for shape, _ in PRESETS.values())
    assert sizes == [48, 128, 180, 420, 1600, 3520, 3600, 15625]
    bands = [band for _, band in PRESETS.values()]
    assert (bands.count("high"), bands.count("medium"), bands.count("low")) == (2, 3, 3)
    sc = preset("flight", seed=2)
    lo, hi = BANDS[PRESETS["flight"][1]]
    assert lo <= sc.opposition < hi


def test_single_issue_high_opposition_reverses_order():
    sc = gen_domain((2,), "high", seed=0)
    assert sc.opposition == pytest.approx(1.0)  # the most any pair of normalized profiles can reach
    sc = gen_domain((5,), "high", seed=4)
    ea, eb = (u.evaluations[0] for u in sc.utilities)
    assert list(np.argsort(ea)) == list(np.argsort(eb))[::-1]


def test_generator_errors():
    with pytest.raises(GenerationError):
        gen_domain((3, 3), "extreme", seed=0)
    with pytest.raises(GenerationError):
        gen_domain((0, 3), "low", seed=0)
    with pytest.raises(GenerationError):
        gen_domain((1,), "high", seed=0, max_tries=5)  # one outcome: both sides get 1.0


# -- CLI ----------------------------------------------------------------------------------


def test_cli_end_to_end(tmp_path, capsys):
    d = tmp_path / "dom"
    assert cli.main(["gen-domain", "--issues", "3", "4", "--opposition", "low", "--seed", "2", "--out", str(d)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["size"] == 12

    front = tmp_path / "front.json"
    args = ["pareto", "--domain", str(d / "domain.json"), "--profile", str(d / "profile_a.json")]
    assert cli.main(args + ["--opponent-profile", str(d / "profile_b.json"), "--out", str(front)]) == 0
    assert json.loads(front.read_text())["igd"] >= 0.0
    assert cli.main(args + ["--opponent-uniform", "--out", str(front)]) == 0

    assert cli.main(["estimate-user-model", "--domain", str(d / "domain.json"), "--profile",
                     str(d / "profile_a.json"), "--fraction", "0.5", "--population", "6",
                     "--generations", "10"]) == 0
    assert -1.0 <= json.loads(capsys.readouterr().out)["oa"] <= 1.0

    log_path = tmp_path / "s.jsonl"
    assert cli.main(["run", "--domain", str(d / "domain.json"), "--profile-a", str(d / "profile_a.json"),
                     "--profile-b", str(d / "profile_b.json"), "--agent-a", "conceder", "--agent-b", "boulware",
                     "--deadline", "40", "--out", str(log_path)]) == 0
    capsys.readouterr()
    assert cli.main(["replay", "--log", str(log_path)]) == 0
    assert json.loads(capsys.readouterr().out)["settlement_verified"] is True

    tampered = SessionLog.load(log_path)
    tampered.utilities = (tampered.utilities[0] + 0.1, tampered.utilities[1])
    tampered.save(log_path)
    assert cli.main(["replay", "--log", str(log_path)]) == 1


def test_cli_tournament_and_metrics(tmp_path, capsys):
    cfg = tmp_path / "t.json"
    cfg.write_text(json.dumps({
        "agents": [{"kind": "boulware"}, {"kind": "hardliner", "u": 0.8}],
        "domains": [{"issues": [3, 2], "seed": 1}],
        "uncertainty": False,
        "deadline": 20,
    }))
    out = tmp_path / "out"
    assert cli.main(["tournament", "--config", str(cfg), "--seed", "7", "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert (out / "results.csv").read_text() == printed
    assert len(list((out / "sessions").glob("*.jsonl"))) == 2
    assert json.loads((out / "summary.json").read_text())["seed"] == 7
    assert cli.main(["metrics", "--logs", str(out / "sessions")]) == 0
    assert capsys.readouterr().out == printed


def test_cli_training_commands(tmp_path, capsys):
    cfg = tmp_path / "train.json"
    cfg.write_text(json.dumps({
        "domains": [{"issues": [3, 2], "seed": 1}],
        "opponents": [{"kind": "conceder"}],
        "deadline": 20,
        "fa": {"population": 3, "generations": 2},
        "template": {"acceptance": [["fixed", "next_own"]], "bidding": [["boulware"]]},
        "epochs": 2,
        "sessions": 3,
    }))
    strategy = tmp_path / "strategy.json"
    model = tmp_path / "model.json"
    assert cli.main(["learn-template", "--config", str(cfg), "--out", str(strategy)]) == 0
    learned = json.loads(strategy.read_text())
    assert learned["fitness"] >= learned["default_fitness"]
    assert cli.main(["pretrain", "--config", str(cfg), "--out", str(model)]) == 0
    assert cli.main(["train-rl", "--config", str(cfg), "--model", str(model), "--strategy", str(strategy),
                     "--out", str(model)]) == 0
    trained = DdpgModel.load(model)
    assert trained.parameters_finite() and 0.0 <= trained.threshold(np.zeros(9)) <= 1.0
    assert load_strategy(strategy).uses("boulware")


def test_cli_exit_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as err:
        cli.main(["tournament"])
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        cli.main(["no-such-command"])
    assert err.value.code == 2
    assert cli.main(["replay", "--log", str(tmp_path / "missing.jsonl")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"agents": [{"kind": "boulware"}], "domains": []}))
    assert cli.main(["tournament", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
