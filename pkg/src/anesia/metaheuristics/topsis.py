"""TOPSIS ranking over benefit criteria."""

from __future__ import annotations

from typing import Sequence

import numpy as np


class DegenerateCriterionError(ValueError):
    pass


def topsis(alternatives, weights: Sequence[float]) -> tuple[list[int], np.ndarray]:
    """Rank alternatives by relative closeness to the ideal point.

    Columns are vector-normalized, weighted, and compared against the
    column-wise best (ideal) and worst (anti-ideal) values. Returns the
    best-first ranking, ties broken by lower index, and the closeness scores.
    A lone alternative, or alternatives that coincide with both reference
    points, get closeness 1.
    """
    x = np.asarray(alternatives, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("alternatives must be a nonempty m x k matrix")
    w = np.asarray(weights, dtype=float)
    if w.shape != (x.shape[1],):
        raise ValueError("need one weight per criterion")
    norms = np.sqrt((x**2).sum(axis=0))
    if np.any(norms == 0):
        bad = int(np.flatnonzero(norms == 0)[0])
        raise DegenerateCriterionError(f"criterion column {bad} is all zeros")
    v = x / norms * w
    ideal, anti = v.max(axis=0), v.min(axis=0)
    d_plus = np.sqrt(((v - ideal) ** 2).sum(axis=1))
    d_minus = np.sqrt(((v - anti) ** 2).sum(axis=1))
    denom = d_plus + d_minus
    closeness = np.ones(len(x))
    nz = denom > 0
    closeness[nz] = d_minus[nz] / denom[nz]
    ranking = np.lexsort((np.arange(len(x)), -closeness))
    return [int(i) for i in ranking], closeness
