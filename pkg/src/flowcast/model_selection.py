"""Kernel width selection by k-fold cross validation over a log-spaced grid.

For each candidate width a sparse greedy interpolant is trained on k-1 folds
and scored by mean squared prediction error on the held-out fold (mean over
points and output components, then over folds). Widths whose training or
evaluation fails anywhere get an infinite score instead of aborting the
search. Ties are broken toward the smallest width.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .greedy import SelectionRule, TrainConfig, TrainingSet, train

__all__ = [
    "CvConfig",
    "CvResult",
    "CrossValidationError",
    "epsilon_grid",
    "kfold_split",
    "select_best",
    "select_epsilon",
]


class CrossValidationError(Exception):
    """Raised when no candidate width produces a finite validation score."""


@dataclass(frozen=True)
class CvConfig:
    """Grid and protocol parameters for the width search.

    ``max_centers`` caps the per-fold greedy runs (further capped by the
    fold's training size); keeping it well below the data size bounds the
    cost of scoring widths that would otherwise select every point.
    """

    epsilon_min: float = 1e-4
    epsilon_max: float = 1e2
    grid_size: int = 50
    folds: int = 5
    seed: int = 0
    rule: SelectionRule = SelectionRule.F_GREEDY
    tolerance: float = 1e-12
    max_centers: int | None = 400
    jobs: int = 1

    def __post_init__(self):
        if not (0 < self.epsilon_min <= self.epsilon_max) or not np.isfinite(self.epsilon_max):
            raise ValueError(
                f"need 0 < epsilon_min <= epsilon_max < inf, got "
                f"[{self.epsilon_min!r}, {self.epsilon_max!r}]"
            )
        if self.grid_size < 1:
            raise ValueError(f"grid_size must be >= 1, got {self.grid_size!r}")
        if self.folds < 2:
            raise ValueError(f"folds must be >= 2, got {self.folds!r}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {self.jobs!r}")


@dataclass(frozen=True)
class CvResult:
    """Chosen width plus the full grid/score curve for inspection."""

    epsilon: float
    grid: np.ndarray
    scores: np.ndarray
    best_index: int


def epsilon_grid(epsilon_min: float, epsilon_max: float, grid_size: int) -> np.ndarray:
    """Ascending log-spaced width candidates, endpoints included."""
    return np.logspace(np.log10(epsilon_min), np.log10(epsilon_max), grid_size)


def kfold_split(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Deal a seeded permutation of range(n) round-robin into ``folds`` index arrays."""
    if n < folds:
        raise ValueError(f"cannot split {n} points into {folds} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return [perm[i::folds] for i in range(folds)]


def select_best(grid: np.ndarray, scores: np.ndarray) -> int:
    """Index of the lowest score; on ties the smallest width wins."""
    scores = np.asarray(scores, dtype=float)
    if not np.any(np.isfinite(scores)):
        raise CrossValidationError(
            "every candidate width failed validation (all scores non-finite)"
        )
    return int(np.argmin(scores))


def _score_one(data: TrainingSet, split: list[np.ndarray], eps: float, cfg: CvConfig) -> float:
    fold_scores = []
    for fold in split:
        mask = np.ones(data.size, dtype=bool)
        mask[fold] = False
        cap = int(mask.sum()) if cfg.max_centers is None else min(int(mask.sum()), cfg.max_centers)
        try:
            model = train(
                TrainingSet(data.inputs[mask], data.targets[mask]),
                TrainConfig(eps, rule=cfg.rule, tolerance=cfg.tolerance, max_centers=cap),
            )
            pred = model(data.inputs[fold])
            fold_scores.append(float(np.mean((pred - data.targets[fold]) ** 2)))
        except Exception:
            # Extreme widths routinely break down numerically; score them out
            # of the running rather than aborting the whole search.
            return np.inf
    return float(np.mean(fold_scores))


def select_epsilon(data: TrainingSet, cfg: CvConfig | None = None) -> CvResult:
    """Cross-validate kernel widths on ``data`` and return the winner.

    Raises CrossValidationError when no width attains a finite score.
    """
    cfg = cfg or CvConfig()
    grid = epsilon_grid(cfg.epsilon_min, cfg.epsilon_max, cfg.grid_size)
    split = kfold_split(data.size, cfg.folds, cfg.seed)
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            scores = list(pool.map(lambda e: _score_one(data, split, e, cfg), grid))
    else:
        scores = [_score_one(data, split, e, cfg) for e in grid]
    scores = np.asarray(scores)
    best = select_best(grid, scores)
    return CvResult(epsilon=float(grid[best]), grid=grid, scores=scores, best_index=best)
