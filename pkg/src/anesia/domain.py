"""Discrete multi-issue domains, bids, linear additive utilities and partial profiles."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

Bid = tuple[int, ...]
"""A bid is one value index per issue, in issue order."""


class DomainError(ValueError):
    """Malformed domain, utility or profile."""


class InvalidBidError(DomainError):
    pass


class ParseError(DomainError):
    def __init__(self, path: str | Path, field_name: str, message: str, line: int | None = None):
        where = f"{path}" + (f":{line}" if line is not None else "")
        super().__init__(f"{where}: field {field_name!r}: {message}")
        self.path = str(path)
        self.field = field_name
        self.line = line


@dataclass(frozen=True)
class Issue:
    name: str
    values: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise DomainError(f"issue {self.name!r} has no values")
        if len(set(self.values)) != len(self.values):
            raise DomainError(f"issue {self.name!r} has duplicate value labels")


@dataclass(frozen=True)
class Domain:
    name: str
    issues: tuple[Issue, ...]

    def __post_init__(self):
        object.__setattr__(self, "issues", tuple(self.issues))
        if not self.issues:
            raise DomainError("a domain needs at least one issue")
        names = [issue.name for issue in self.issues]
        if len(set(names)) != len(names):
            raise DomainError(f"duplicate issue names in domain {self.name!r}")

    @classmethod
    def from_counts(cls, counts: Sequence[int], name: str = "synthetic") -> Domain:
        """Build a domain with generic labels from per-issue value counts."""
        issues = [
            Issue(f"i{i}", tuple(f"v{j}" for j in range(k))) for i, k in enumerate(counts)
        ]
        return cls(name, tuple(issues))

    @property
    def n_issues(self) -> int:
        return len(self.issues)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(issue.values) for issue in self.issues)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def validate_bid(self, bid: Sequence[int]) -> Bid:
        bid = tuple(int(c) for c in bid)
        if len(bid) != self.n_issues:
            raise InvalidBidError(
                f"bid has {len(bid)} choices, domain {self.name!r} has {self.n_issues} issues"
            )
        for i, (c, k) in enumerate(zip(bid, self.shape)):
            if not 0 <= c < k:
                raise InvalidBidError(f"choice {c} out of range for issue {i} with {k} values")
        return bid

    def outcome_array(self) -> np.ndarray:
        """All outcomes as an (|Ω|, n) integer array in lexicographic order."""
        grids = np.meshgrid(*[np.arange(k) for k in self.shape], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "issues": [{"name": i.name, "values": list(i.values)} for i in self.issues],
        }


def enumerate_outcomes(domain: Domain) -> Iterator[Bid]:
    """Yield every bid of the domain in lexicographic index order."""
    return itertools.product(*[range(k) for k in domain.shape])


@dataclass(frozen=True)
class LinearAdditiveUtility:
    """U(ω) = Σ w_i · e_i(ω_i) with Σ w = 1 and each e_i normalized to peak at 1."""

    weights: tuple[float, ...]
    evaluations: tuple[tuple[float, ...], ...]
    _tables: tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        weights = tuple(float(w) for w in self.weights)
        evaluations = tuple(tuple(float(v) for v in ev) for ev in self.evaluations)
        if len(weights) != len(evaluations):
            raise DomainError("weights and evaluations disagree on issue count")
        if any(not w > 0 for w in weights):
            raise DomainError("every issue weight must be positive")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise DomainError(f"weights sum to {sum(weights)!r}, expected 1")
        for i, ev in enumerate(evaluations):
            if not ev:
                raise DomainError(f"issue {i} has no evaluations")
            if any(not 0.0 <= v <= 1.0 for v in ev):
                raise DomainError(f"issue {i} evaluations must lie in [0, 1]")
            if not math.isclose(max(ev), 1.0, abs_tol=1e-9):
                raise DomainError(f"issue {i} evaluations must reach 1")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "evaluations", evaluations)
        tables = tuple(w * np.asarray(ev) for w, ev in zip(weights, evaluations))
        object.__setattr__(self, "_tables", tables)

    @classmethod
    def from_raw(cls, weights: Sequence[float], evaluations: Sequence[Sequence[float]]) -> LinearAdditiveUtility:
        """Normalize arbitrary positive weights and nonnegative evaluations."""
        w = np.asarray(weights, dtype=float)
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise DomainError("raw weights must be positive and finite")
        w = w / w.sum()
        evs = []
        for ev in evaluations:
            ev = np.clip(np.asarray(ev, dtype=float), 0.0, None)
            top = ev.max()
            evs.append(tuple(ev / top) if top > 0 else tuple(np.ones_like(ev)))
        # exact renormalization so the sum check holds after float division
        w = tuple(float(x) for x in w)
        w = w[:-1] + (1.0 - math.fsum(w[:-1]),)
        return cls(w, tuple(evs))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(ev) for ev in self.evaluations)

    def slot_values(self) -> np.ndarray:
        """Flat vector of w_i · e_i(v) over every issue value."""
        return np.concatenate(self._tables)

    def __call__(self, bid: Sequence[int]) -> float:
        return utility(self, bid)

    def batch(self, bids: np.ndarray) -> np.ndarray:
        """Utilities of an (m, n) array of bids."""
        bids = np.asarray(bids, dtype=np.int64)
        if bids.ndim != 2 or bids.shape[1] != len(self.weights):
            raise InvalidBidError("bid array has the wrong number of issues")
        total = np.zeros(len(bids))
        for i, table in enumerate(self._tables):
            total += table[bids[:, i]]
        return total

    def best_bid(self) -> Bid:
        return tuple(int(np.argmax(ev)) for ev in self.evaluations)

    def to_dict(self) -> dict:
        return {"weights": list(self.weights), "evaluations": [list(ev) for ev in self.evaluations]}


def utility(u: LinearAdditiveUtility, bid: Sequence[int]) -> float:
    if len(bid) != len(u.weights):
        raise InvalidBidError(f"bid has {len(bid)} choices, utility has {len(u.weights)} issues")
    total = 0.0
    for i, c in enumerate(bid):
        ev = u.evaluations[i]
        if not 0 <= c < len(ev):
            raise InvalidBidError(f"choice {c} out of range for issue {i}")
        total += u.weights[i] * ev[c]
    return total


def discounted_utility(u_value: float, t: float, d: float) -> float:
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"time {t} outside [0, 1]")
    if not 0.0 < d <= 1.0:
        raise DomainError(f"discount {d} outside (0, 1]")
    return u_value * d**t


@dataclass(frozen=True)
class PartialPreferenceProfile:
    """Bids known to the agent, in ascending order of preference."""

    bids: tuple[Bid, ...]
    source_fraction: float = 0.0

    def __post_init__(self):
        bids = tuple(tuple(int(c) for c in b) for b in self.bids)
        if len(set(bids)) != len(bids):
            raise DomainError("partial profile contains duplicate bids")
        object.__setattr__(self, "bids", bids)

    def __len__(self) -> int:
        return len(self.bids)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.bids, dtype=np.int64).reshape(len(self.bids), -1)


def rank_order(u: LinearAdditiveUtility, bids: np.ndarray) -> np.ndarray:
    """Indices sorting ``bids`` ascending by ``u``, ties broken lexicographically."""
    values = u.batch(bids)
    keys = [bids[:, i] for i in reversed(range(bids.shape[1]))] + [values]
    return np.lexsort(keys)


def sample_partial_profile(
    u_true: LinearAdditiveUtility, domain: Domain, fraction: float, seed: int
) -> PartialPreferenceProfile:
    count = math.ceil(fraction * domain.size - 1e-9)
    if count < 2:
        raise DomainError(
            f"fraction {fraction} of |Ω|={domain.size} yields {count} bids; need at least 2"
        )
    count = min(count, domain.size)
    rng = np.random.default_rng(seed)
    picks = np.sort(rng.choice(domain.size, size=count, replace=False))
    bids = np.stack(np.unravel_index(picks, domain.shape), axis=1)
    order = rank_order(u_true, bids)
    return PartialPreferenceProfile(tuple(map(tuple, bids[order].tolist())), fraction)


@dataclass(frozen=True)
class SessionConfig:
    deadline_rounds: int = 2000
    reservation: float = 0.0
    discount: float = 1.0
    agent_discount: float = 0.9

    def __post_init__(self):
        if self.deadline_rounds < 1:
            raise DomainError("deadline_rounds must be positive")
        if not 0.0 <= self.reservation < 1.0:
            raise DomainError("reservation must lie in [0, 1)")
        if not 0.0 < self.discount <= 1.0:
            raise DomainError("discount must lie in (0, 1]")
        if not 0.0 < self.agent_discount <= 1.0:
            raise DomainError("agent_discount must lie in (0, 1]")

    def time(self, round_: int) -> float:
        return min(1.0, round_ / self.deadline_rounds)


# -- file formats ---------------------------------------------------------


def _read_json(path: str | Path) -> dict:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(path, "<json>", exc.msg, exc.lineno) from exc
    if not isinstance(data, dict):
        raise ParseError(path, "<root>", "expected a JSON object")
    return data


def domain_from_dict(data: dict, path: str | Path = "<dict>") -> Domain:
    if not isinstance(data.get("name"), str):
        raise ParseError(path, "name", "missing or not a string")
    raw_issues = data.get("issues")
    if not isinstance(raw_issues, list) or not raw_issues:
        raise ParseError(path, "issues", "expected a nonempty list")
    issues = []
    for i, raw in enumerate(raw_issues):
        if not isinstance(raw, dict) or not isinstance(raw.get("name"), str):
            raise ParseError(path, f"issues[{i}].name", "missing or not a string")
        values = raw.get("values")
        if not isinstance(values, list) or not values:
            raise ParseError(path, f"issues[{i}].values", "expected a nonempty list")
        try:
            issues.append(Issue(raw["name"], tuple(str(v) for v in values)))
        except DomainError as exc:
            raise ParseError(path, f"issues[{i}]", str(exc)) from exc
    try:
        return Domain(data["name"], tuple(issues))
    except DomainError as exc:
        raise ParseError(path, "issues", str(exc)) from exc


def load_domain(path: str | Path) -> Domain:
    return domain_from_dict(_read_json(path), path)


def save_domain(domain: Domain, path: str | Path) -> None:
    Path(path).write_text(json.dumps(domain.to_dict(), indent=2) + "\n")


def utility_from_dict(data: dict, path: str | Path = "<dict>") -> LinearAdditiveUtility:
    try:
        weights = [float(w) for w in data["weights"]]
        evaluations = [[float(v) for v in ev] for ev in data["evaluations"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(path, "utility", f"malformed weights/evaluations ({exc})") from exc
    total = math.fsum(weights)
    if abs(total - 1.0) > 1e-6:
        raise ParseError(path, "utility.weights", f"weights sum to {total}, expected 1")
    if total != 1.0:
        weights = [w / total for w in weights]
        weights[-1] = 1.0 - math.fsum(weights[:-1])
    try:
        return LinearAdditiveUtility(tuple(weights), tuple(map(tuple, evaluations)))
    except DomainError as exc:
        raise ParseError(path, "utility", str(exc)) from exc


@dataclass(frozen=True)
class Profile:
    """A party's private preferences within a domain."""

    domain: str
    utility: LinearAdditiveUtility
    reservation: float = 0.0
    discount: float = 1.0

    def to_dict(self) -> dict:
        return {
            "domain": self.domain,
            "utility": self.utility.to_dict(),
            "reservation": self.reservation,
            "discount": self.discount,
        }


def load_profile(path: str | Path, domain: Domain | None = None) -> Profile:
    data = _read_json(path)
    if "utility" not in data or not isinstance(data["utility"], dict):
        raise ParseError(path, "utility", "missing")
    u = utility_from_dict(data["utility"], path)
    if domain is not None and u.shape != domain.shape:
        raise ParseError(path, "utility.evaluations", f"shape {u.shape} != domain shape {domain.shape}")
    return Profile(
        str(data.get("domain", "")),
        u,
        float(data.get("reservation", 0.0)),
        float(data.get("discount", 1.0)),
    )


def save_profile(profile: Profile, path: str | Path) -> None:
    Path(path).write_text(json.dumps(profile.to_dict(), indent=2) + "\n")


def load_partial_profile(path: str | Path, domain: Domain | None = None) -> PartialPreferenceProfile:
    data = _read_json(path)
    bids = data.get("bids")
    if not isinstance(bids, list):
        raise ParseError(path, "bids", "expected a list of bids")
    out = []
    for i, raw in enumerate(bids):
        try:
            bid = tuple(int(c) for c in raw)
            if domain is not None:
                bid = domain.validate_bid(bid)
        except (TypeError, ValueError) as exc:
            raise ParseError(path, f"bids[{i}]", str(exc)) from exc
        out.append(bid)
    try:
        return PartialPreferenceProfile(tuple(out), float(data.get("fraction", 0.0)))
    except DomainError as exc:
        raise ParseError(path, "bids", str(exc)) from exc


def save_partial_profile(profile: PartialPreferenceProfile, path: str | Path) -> None:
    data = {"bids": [list(b) for b in profile.bids], "fraction": profile.source_fraction}
    Path(path).write_text(json.dumps(data) + "\n")


class OutcomeTable:
    """Every outcome of a domain with its utility under one model, sorted for target lookups."""

    def __init__(self, domain: Domain, u) -> None:
        self.domain = domain
        self.shape = domain.shape
        self.outcomes = domain.outcome_array()
        self.values = np.asarray(u.batch(self.outcomes), dtype=float)
        # ascending utility, lexicographic order within ties
        self.order = np.lexsort((np.arange(len(self.values)), self.values))
        self.sorted_values = self.values[self.order]
        self.max_utility = float(self.sorted_values[-1])
        self.min_utility = float(self.sorted_values[0])
        best = self.order[np.searchsorted(self.sorted_values, self.max_utility, side="left")]
        self.best = self.bid(int(best))

    def bid(self, index: int) -> Bid:
        return tuple(int(c) for c in self.outcomes[index])

    def at_least(self, target: float) -> Bid:
        """Bid with the smallest utility not below ``target``; the best bid if none reaches it."""
        k = int(np.searchsorted(self.sorted_values, target - 1e-12, side="left"))
        if k >= len(self.order):
            return self.best
        return self.bid(int(self.order[k]))

    def indices_at_least(self, threshold: float) -> np.ndarray:
        k = int(np.searchsorted(self.sorted_values, threshold - 1e-12, side="left"))
        return np.sort(self.order[k:])

    def utility_of(self, bid: Sequence[int]) -> float:
        return float(self.values[np.ravel_multi_index(tuple(bid), self.shape)])
