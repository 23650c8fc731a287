"""Auxiliary-problem solver: restarted random search with space shrinkage.

Each restart samples a batch of admissible candidates, keeps the best, then
shrinks every coordinate's candidate set around that incumbent and samples
again inside the focused space. The best point over all restarts and shrink
levels is returned. Ties are broken toward the lexicographically smallest
vector so results are independent of evaluation order.

Candidate streams are keyed by (seed, restart, level, row): growing the
per-level budget extends each batch without disturbing earlier rows, and
adding restarts leaves existing restarts untouched. Budget monotonicity is
therefore exact over the restart axis, and over the points axis whenever the
shrink path is fixed (in particular with shrink_iters = 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .space import (
    DiscreteSet,
    ThresholdSpace,
    count_admissible,
    enumerate_admissible,
    sample_admissible,
)


@dataclass(frozen=True)
class FocusConfig:
    points_per_iter: int = 1000
    shrink_iters: int = 5
    restarts: int = 3
    seed: int = 0

    def __post_init__(self):
        if min(self.points_per_iter, self.shrink_iters, self.restarts) < 1:
            raise ValueError("all focus-search budgets must be >= 1")


@dataclass(eq=False)
class FocusResult:
    x: np.ndarray
    score: float
    candidates: np.ndarray  # unique scored candidates, best first
    scores: np.ndarray


def shrink(space: ThresholdSpace, center: np.ndarray, level: int) -> ThresholdSpace:
    """Halve the candidate span of every coordinate around the center.

    Discrete mode keeps the members within half the current index span,
    centered on the center's member (at least the center itself survives).
    Continuous mode halves the interval width around the center, clipped to
    the current bounds. `level` is the 1-based shrink step, informational.
    """
    center = np.asarray(center, dtype=np.float64)
    report = space.validate(center)
    if not report.admissible:
        raise ValueError("shrink center must be admissible in the given space")

    def focused(s: DiscreteSet, v: float) -> DiscreteSet:
        if space.mode == "discrete":
            n = len(s)
            c = s.index_of(v)
            radius = max(0.5, (n - 1) / 4.0)
            lo = int(np.ceil(c - radius))
            hi = int(np.floor(c + radius))
            return DiscreteSet(s.values[max(lo, 0) : min(hi, n - 1) + 1])
        width = s.max - s.min
        lo = max(s.min, v - width / 4.0)
        hi = min(s.max, v + width / 4.0)
        return DiscreteSet([lo] if lo == hi else [lo, hi])

    lower = tuple(focused(space.lower_sets[j], center[j]) for j in range(space.tau))
    upper = tuple(
        focused(space.upper_sets[j], center[j + space.tau]) for j in range(space.tau)
    )
    return space.with_sets(lower, upper)


def _lex_smaller(a: np.ndarray, b: np.ndarray) -> bool:
    for va, vb in zip(a, b):
        if va != vb:
            return va < vb
    return False


def _batch_best(candidates: np.ndarray, scores: np.ndarray) -> int:
    best = int(np.argmax(scores))
    top = np.nonzero(scores == scores[best])[0]
    for i in top:
        if _lex_smaller(candidates[i], candidates[best]):
            best = int(i)
    return best


def maximize(score_fn, space: ThresholdSpace, config: FocusConfig) -> FocusResult:
    """Maximize score_fn over the admissible set.

    score_fn takes an (m, d) array of candidates and returns m scores. When
    the discrete admissible set is no larger than points_per_iter the search
    scores it exhaustively instead of sampling.
    """
    if space.mode == "discrete" and count_admissible(space) <= config.points_per_iter:
        cands = enumerate_admissible(space, ceiling=config.points_per_iter)
        scores = np.asarray(score_fn(cands), dtype=np.float64)
        best = _batch_best(cands, scores)
        order = np.argsort(-scores, kind="stable")
        return FocusResult(
            x=cands[best].copy(),
            score=float(scores[best]),
            candidates=cands[order],
            scores=scores[order],
        )

    best_x: np.ndarray | None = None
    best_score = -np.inf
    all_cands: list[np.ndarray] = []
    all_scores: list[np.ndarray] = []

    for r in range(config.restarts):
        focused_space = space
        restart_x: np.ndarray | None = None
        restart_score = -np.inf
        for level in range(config.shrink_iters):
            cands = sample_admissible(
                focused_space, config.points_per_iter, (config.seed, r, level)
            )
            if restart_x is not None:
                # carry the incumbent so a shrink step can never lose it
                cands = np.vstack([cands, restart_x])
            scores = np.asarray(score_fn(cands), dtype=np.float64)
            all_cands.append(cands)
            all_scores.append(scores)
            i = _batch_best(cands, scores)
            if scores[i] > restart_score or (
                scores[i] == restart_score
                and restart_x is not None
                and _lex_smaller(cands[i], restart_x)
            ):
                restart_score = float(scores[i])
                restart_x = cands[i].copy()
            if level + 1 < config.shrink_iters:
                focused_space = shrink(focused_space, restart_x, level + 1)
        if restart_score > best_score or (
            restart_score == best_score
            and best_x is not None
            and _lex_smaller(restart_x, best_x)
        ):
            best_score = restart_score
            best_x = restart_x

    cands = np.vstack(all_cands)
    scores = np.concatenate(all_scores)
    uniq, first = np.unique(cands, axis=0, return_index=True)
    uniq_scores = scores[first]
    order = np.argsort(-uniq_scores, kind="stable")
    return FocusResult(
        x=best_x.copy(),
        score=best_score,
        candidates=uniq[order],
        scores=uniq_scores[order],
    )
