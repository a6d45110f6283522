"""Tournament metrics per agent: agreement rate, rounds, Pareto distance and utilities."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .domain import Domain, LinearAdditiveUtility, utility_from_dict
from .pareto import brute_force_front
from .protocol import SessionLog

METRICS = ("R_avg", "P_avg", "U_soc", "U_ind_total", "U_ind_s", "S_pct")


@dataclass(frozen=True)
class Stat:
    mean: float
    sd: float

    @classmethod
    def of(cls, values: Sequence[float]) -> Stat:
        if len(values) == 0:
            return cls(math.nan, math.nan)
        arr = np.asarray(values, dtype=float)
        return cls(float(arr.mean()), float(arr.std()))

    def format(self, digits: int = 4) -> str:
        return f"{self.mean:.{digits}f}±{self.sd:.{digits}f}"


@dataclass(frozen=True)
class MetricsRow:
    agent: str
    sessions: int
    agreements: int
    R_avg: Stat
    P_avg: Stat
    U_soc: Stat
    U_ind_total: Stat
    U_ind_s: Stat
    S_pct: Stat

    def to_dict(self) -> dict:
        out: dict = {"agent": self.agent, "sessions": self.sessions, "agreements": self.agreements}
        for name in METRICS:
            stat = getattr(self, name)
            out[name] = {"mean": _json_float(stat.mean), "sd": _json_float(stat.sd)}
        return out


def _json_float(x: float) -> float | None:
    return None if math.isnan(x) else x


ParetoOracle = Callable[[SessionLog], np.ndarray]


def true_front_oracle() -> ParetoOracle:
    """Brute-force true-utility front per distinct pair of utilities in the logs (memoized)."""
    cache: dict[str, np.ndarray] = {}

    def oracle(log: SessionLog) -> np.ndarray:
        if log.true_utilities is None:
            raise ValueError("log lacks true utilities; cannot place agreements against the front")
        key = json.dumps(log.true_utilities, sort_keys=True)
        if key not in cache:
            ua, ub = log_utilities(log)
            domain = Domain.from_counts(ua.shape, log.domain)
            cache[key] = brute_force_front(ua, ub, domain).points
        return cache[key]

    return oracle


def log_utilities(log: SessionLog) -> tuple[LinearAdditiveUtility, LinearAdditiveUtility]:
    if log.true_utilities is None:
        raise ValueError("log lacks true utilities")
    return utility_from_dict(log.true_utilities[0]), utility_from_dict(log.true_utilities[1])


def compute_metrics(
    logs: Iterable[SessionLog],
    pareto_oracle: ParetoOracle | None = None,
    key: Callable[[SessionLog, int], str] | None = None,
) -> dict[str, MetricsRow]:
    """Six metrics per agent over every session it took part in, on either side.

    ``key`` maps (log, side) to the row label; by default the agent name.
    """
    logs = list(logs)
    if not logs:
        raise ValueError("no sessions to aggregate")
    oracle = pareto_oracle or true_front_oracle()
    key = key or (lambda log, side: log.agents[side])
    per: dict[str, dict[str, list[float]]] = {}
    for log in logs:
        distance = soc = None
        if log.agreed:
            ua, ub = log_utilities(log)
            point = np.array([ua(log.outcome.bid), ub(log.outcome.bid)])
            front = oracle(log)
            distance = float(np.sqrt(((front - point) ** 2).sum(axis=1)).min())
            soc = float(sum(log.utilities))
        for side in (0, 1):
            acc = per.setdefault(key(log, side), {m: [] for m in (*METRICS, "agreed")})
            acc["U_ind_total"].append(float(log.utilities[side]))
            acc["S_pct"].append(1.0 if log.agreed else 0.0)
            if log.agreed:
                acc["U_ind_s"].append(float(log.utilities[side]))
                acc["R_avg"].append(float(log.outcome.round))
                acc["P_avg"].append(distance)
                acc["U_soc"].append(soc)
    rows = {}
    for name in sorted(per):
        acc = per[name]
        rows[name] = MetricsRow(
            agent=name,
            sessions=len(acc["U_ind_total"]),
            agreements=int(sum(acc["S_pct"])),
            **{m: Stat.of(acc[m]) for m in METRICS},
        )
    return rows


def metrics_csv(rows: Iterable[MetricsRow], digits: int = 4) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["agent", "sessions", "agreements", *METRICS])
    for row in rows:
        writer.writerow(
            [row.agent, row.sessions, row.agreements, *(getattr(row, m).format(digits) for m in METRICS)]
        )
    return buf.getvalue()
