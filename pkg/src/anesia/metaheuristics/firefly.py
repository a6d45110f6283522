"""Firefly Algorithm for box-constrained maximization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class OptimizerError(RuntimeError):
    pass


@dataclass(frozen=True)
class FaParams:
    population: int = 20
    generations: int = 200
    beta0: float = 1.0
    gamma: float = 0.01
    alpha: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("FA population must be at least 2")
        if self.generations < 1:
            raise ValueError("FA needs at least one generation")
        if not (self.beta0 > 0 and self.gamma > 0 and self.alpha > 0):
            raise ValueError("beta0, gamma and alpha must be positive")


class Firefly:
    """Maximize ``objective`` over the box ``bounds``.

    Each generation the swarm is ranked by brightness; every firefly moves
    towards the previous positions of all brighter ones,

        x_i += beta0 * exp(-gamma * r^2) * (x_j - x_i) + alpha_g * (u - 0.5) * (hi - lo)

    and is then re-evaluated. ``alpha_g`` shrinks linearly to a tenth of its
    initial value. The best point ever evaluated is kept and re-inserted in
    place of the dimmest firefly, so best fitness never decreases.
    """

    def __init__(
        self,
        objective: Callable[[np.ndarray], float],
        bounds: Sequence[tuple[float, float]],
        params: FaParams,
        initial: Sequence[Sequence[float]] | None = None,
    ):
        self.objective = objective
        self.bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
        if np.any(self.bounds[:, 0] >= self.bounds[:, 1]):
            raise OptimizerError("every bound needs lo < hi")
        self.params = params
        self.initial = [] if initial is None else [np.asarray(x, dtype=float) for x in initial]
        self.history: list[float] = []
        self.evaluations = 0
        self.best: np.ndarray | None = None
        self.best_fitness = -np.inf

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def _evaluate(self, x: np.ndarray) -> float:
        value = float(self.objective(x))
        self.evaluations += 1
        if not np.isfinite(value):
            raise OptimizerError(f"objective returned {value} at {x.tolist()}")
        if value > self.best_fitness:
            self.best_fitness = value
            self.best = x.copy()
        return value

    def run(self) -> tuple[np.ndarray, float]:
        p = self.params
        rng = np.random.default_rng(p.seed)
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        scale = hi - lo

        swarm = rng.uniform(lo, hi, size=(p.population, self.dim))
        for k, x in enumerate(self.initial[: p.population]):
            swarm[k] = np.clip(x, lo, hi)
        light = np.array([self._evaluate(x) for x in swarm])

        for g in range(p.generations):
            frac = g / (p.generations - 1) if p.generations > 1 else 1.0
            alpha = p.alpha * (1.0 - 0.9 * frac)
            order = np.argsort(-light, kind="stable")
            swarm, light = swarm[order], light[order]
            old = swarm.copy()
            moved = swarm.copy()
            for i in range(p.population):
                xi = moved[i]
                for j in range(p.population):
                    if light[j] > light[i]:
                        r2 = float(np.sum((xi - old[j]) ** 2))
                        beta = p.beta0 * np.exp(-p.gamma * r2)
                        xi = xi + beta * (old[j] - xi) + alpha * (rng.random(self.dim) - 0.5) * scale
                if i == 0:
                    # brightest firefly only walks randomly
                    xi = xi + alpha * (rng.random(self.dim) - 0.5) * scale
                moved[i] = np.clip(xi, lo, hi)
            swarm = moved
            light = np.array([self._evaluate(x) for x in swarm])
            if self.best_fitness > light.max():
                worst = int(np.argmin(light))
                swarm[worst], light[worst] = self.best, self.best_fitness
            self.history.append(self.best_fitness)
        return self.best.copy(), self.best_fitness


def firefly_optimize(
    objective: Callable[[np.ndarray], float],
    dim: int,
    bounds: Sequence[tuple[float, float]] | tuple[float, float],
    params: FaParams,
    initial: Sequence[Sequence[float]] | None = None,
) -> tuple[np.ndarray, float]:
    """Return the best vector found and its fitness.

    ``bounds`` is either one (lo, hi) pair applied to every coordinate or a
    per-coordinate list.
    """
    b = np.asarray(bounds, dtype=float)
    if b.shape == (2,):
        b = np.tile(b, (dim, 1))
    if b.shape != (dim, 2):
        raise OptimizerError(f"bounds shape {b.shape} does not match dim {dim}")
    return Firefly(objective, b, params, initial).run()
