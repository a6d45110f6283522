"""Synthetic domains with two opposing linear additive profiles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import Domain, DomainError, LinearAdditiveUtility, Profile

BANDS = {"low": (0.0, 0.2), "medium": (0.2, 0.4), "high": (0.4, math.sqrt(2))}

# shapes echoing well-known negotiation domains, by outcome count
PRESETS: dict[str, tuple[tuple[int, ...], str]] = {
    "flight": ((4, 4, 3), "medium"),
    "outfit": ((4, 4, 4, 2), "low"),
    "itex": ((5, 4, 3, 3), "high"),
    "airport": ((7, 6, 10), "medium"),
    "grocery": ((5, 5, 4, 4, 4), "low"),
    "fitness": ((5, 4, 4, 4, 11), "high"),
    "camera": ((5, 5, 4, 3, 3, 4), "medium"),
    "energy": ((5, 5, 5, 5, 5, 5), "low"),
}


class GenerationError(DomainError):
    pass


@dataclass(frozen=True)
class Scenario:
    domain: Domain
    profiles: tuple[Profile, Profile]
    opposition: float

    @property
    def utilities(self) -> tuple[LinearAdditiveUtility, LinearAdditiveUtility]:
        return self.profiles[0].utility, self.profiles[1].utility


def opposition(u_a: LinearAdditiveUtility, u_b: LinearAdditiveUtility, domain: Domain) -> float:
    """Smallest distance from any outcome's utility pair to the joint ideal (1, 1)."""
    outcomes = domain.outcome_array()
    a, b = u_a.batch(outcomes), u_b.batch(outcomes)
    return float(np.sqrt((1 - a) ** 2 + (1 - b) ** 2).min())


def _mix(ev_a: np.ndarray, corr: float, rng: np.random.Generator) -> np.ndarray:
    noise = rng.random(len(ev_a))
    if corr >= 0:
        ev = corr * (1.0 - ev_a) + (1.0 - corr) * noise
    else:
        ev = -corr * ev_a + (1.0 + corr) * noise
    if ev.max() <= 0:
        return np.ones_like(ev)
    return ev / ev.max()


def _random_evaluations(k: int, rng: np.random.Generator) -> np.ndarray:
    if k == 1:
        return np.ones(1)
    ev = rng.random(k)
    ev[rng.integers(k)] = 1.0
    ev[rng.choice([i for i in range(k) if ev[i] < 1.0])] = 0.0
    return ev


def gen_domain(
    counts: Sequence[int],
    opposition_band: str = "medium",
    seed: int = 0,
    name: str | None = None,
    reservation: float = 0.0,
    discount: float = 1.0,
    max_tries: int = 400,
) -> Scenario:
    """Draw a domain and two profiles whose opposition lies in the requested band.

    Profile B's value evaluations are a blend of A's reversed evaluations and
    noise; the blend correlation is nudged until the enumerated opposition
    falls in the band (low < 0.2 <= medium < 0.4 <= high).
    """
    if opposition_band not in BANDS:
        raise GenerationError(f"unknown opposition band {opposition_band!r}")
    if any(k < 1 for k in counts):
        raise GenerationError("every issue needs at least one value")
    lo, hi = BANDS[opposition_band]
    domain = Domain.from_counts(counts, name or f"gen-{'x'.join(map(str, counts))}-{opposition_band}-{seed}")
    rng = np.random.default_rng(seed)
    corr = {"low": -0.4, "medium": 0.55, "high": 1.0}[opposition_band]
    for _ in range(max_tries):
        ev_a = [_random_evaluations(k, rng) for k in counts]
        ev_b = [_mix(ev, corr, rng) if len(ev) > 1 else np.ones(1) for ev in ev_a]
        u_a = LinearAdditiveUtility.from_raw(rng.random(len(counts)) + 0.1, ev_a)
        u_b = LinearAdditiveUtility.from_raw(rng.random(len(counts)) + 0.1, ev_b)
        opp = opposition(u_a, u_b, domain)
        if lo <= opp < hi:
            profiles = (
                Profile(domain.name, u_a, reservation, discount),
                Profile(domain.name, u_b, reservation, discount),
            )
            return Scenario(domain, profiles, opp)
        step = 0.05 * rng.random()
        corr = float(np.clip(corr + (step if opp < lo else -step), -1.0, 1.0))
    raise GenerationError(
        f"could not reach {opposition_band} opposition for shape {tuple(counts)} in {max_tries} tries"
    )


def preset(name: str, seed: int = 0, **kwargs) -> Scenario:
    shape, band = PRESETS[name]
    return gen_domain(shape, band, seed, name=f"{name}-{seed}", **kwargs)
