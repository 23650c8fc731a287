"""Sequential optimization loop: design, fit, propose, evaluate, repeat.

One run evaluates exactly init_design_size + budget points. Both surrogate
models are refit after every evaluation. Proposals come from focus-search
over the acquisition score; when a proposal repeats an already evaluated
vector the best-scoring unevaluated candidate from the focus-search
population is substituted (the setting is noise-free, so re-evaluating buys
nothing).

Infeasible outcomes are handled in one of two modes:

* "classifier" (default): infeasible points are excluded from the regression
  set and a feasibility forest weights the acquisition score;
* "penalty": infeasible points enter the regression set with a fixed penalty
  objective (by default twice the worst feasible cost of the initial design,
  frozen as soon as a feasible observation exists).

Until the first feasible observation exists there is no incumbent, so
improvement-based scores are undefined; proposals then fall back to the
feasibility probability alone.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .acquisition import AcqConfig, IncumbentState, score_batch
from .focus import FocusConfig, maximize
from .forest import (
    ForestHyper,
    ForestModel,
    FeasibilityModel,
    ModelUnavailableError,
    Observation,
    fit_classifier,
    fit_regressor,
    fit_regressor_xy,
)
from .space import ThresholdSpace, lhs_sample

Evaluator = Callable[[np.ndarray], Observation]

CONSTRAINT_MODES = ("classifier", "penalty")

# seed-stream tags; every random decision in a run derives from (seed, tag, n)
_TAG_INIT = 0
_TAG_FOCUS = 1
_TAG_REGRESSOR = 2
_TAG_CLASSIFIER = 3


def derive_seed(*parts: int) -> int:
    """Stable non-negative integer sub-seed for a tuple of tags."""
    return int(np.random.SeedSequence(parts).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class RunConfig:
    init_design_size: int = 10
    budget: int = 200
    acquisition: AcqConfig = field(default_factory=AcqConfig)
    regressor: ForestHyper = field(default_factory=ForestHyper)
    classifier: ForestHyper = field(default_factory=lambda: ForestHyper(min_leaf=1))
    focus: FocusConfig = field(default_factory=FocusConfig)
    seed: int = 0
    constraint_mode: str = "classifier"
    penalty: float | None = None

    def __post_init__(self):
        if self.init_design_size < 2:
            raise ValueError("the initial design needs at least two points")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.constraint_mode not in CONSTRAINT_MODES:
            raise ValueError(f"constraint_mode must be one of {CONSTRAINT_MODES}")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


@dataclass(eq=False)
class TraceEntry:
    index: int
    proposer: str  # "init" | "acquisition"
    x: np.ndarray
    feasible: bool
    y: float | None
    best_seen: float | None


@dataclass(eq=False)
class RunTrace:
    entries: list[TraceEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def observations(self) -> list[Observation]:
        return [Observation(e.x, e.feasible, e.y) for e in self.entries]

    def append(self, proposer: str, obs: Observation) -> TraceEntry:
        prev = self.entries[-1].best_seen if self.entries else None
        best = prev
        if obs.feasible and (best is None or obs.y < best):
            best = obs.y
        entry = TraceEntry(len(self.entries), proposer, obs.x, obs.feasible, obs.y, best)
        self.entries.append(entry)
        return entry


def best_seen(trace: RunTrace, n: int) -> float | None:
    """Lowest feasible objective among the first n evaluations, or None."""
    if not 1 <= n <= len(trace.entries):
        raise ValueError(f"n must be in 1..{len(trace.entries)}")
    return trace.entries[n - 1].best_seen


@dataclass(eq=False)
class _Models:
    regressor: ForestModel | None
    classifier: FeasibilityModel | None


def _fit_models(trace: RunTrace, config: RunConfig, n: int,
                penalty_value: float | None) -> _Models:
    obs = trace.observations
    reg = None
    clf = None
    if config.constraint_mode == "classifier":
        try:
            reg = fit_regressor(obs, config.regressor, derive_seed(config.seed, _TAG_REGRESSOR, n))
        except ModelUnavailableError:
            reg = None
        clf = fit_classifier(obs, config.classifier, derive_seed(config.seed, _TAG_CLASSIFIER, n))
    else:
        X = np.asarray([o.x for o in obs])
        y = np.asarray(
            [o.y if o.feasible else penalty_value for o in obs], dtype=np.float64
        )
        try:
            reg = fit_regressor_xy(X, y, config.regressor,
                                   derive_seed(config.seed, _TAG_REGRESSOR, n))
        except ModelUnavailableError:
            reg = None
    return _Models(regressor=reg, classifier=clf)


def propose_next(trace: RunTrace, models: _Models, space: ThresholdSpace,
                 config: RunConfig, focus_seed: int) -> np.ndarray:
    """Maximize the acquisition score; substitute exact duplicates."""
    incumbent = IncumbentState(trace.entries[-1].best_seen if trace.entries else None)
    needs_incumbent = config.acquisition.kind in ("ei", "aei")

    if models.regressor is not None and not (needs_incumbent and incumbent.y_plus is None):
        reg = models.regressor

        def score_fn(X):
            return score_batch(reg, models.classifier, X, config.acquisition, incumbent)

    elif models.classifier is not None:
        clf = models.classifier

        def score_fn(X):
            return clf.prob_batch(X)

    else:

        def score_fn(X):
            return np.zeros(np.atleast_2d(X).shape[0])

    focus_config = replace(config.focus, seed=focus_seed)
    result = maximize(score_fn, space, focus_config)

    evaluated = {e.x.tobytes() for e in trace.entries}
    if result.x.tobytes() not in evaluated:
        return result.x
    for cand in result.candidates:
        if cand.tobytes() not in evaluated:
            return cand.copy()
    return result.x  # admissible set exhausted; duplicate is harmless (no noise)


def _initial_penalty(trace: RunTrace, config: RunConfig) -> float | None:
    if config.penalty is not None:
        return config.penalty
    feasible_ys = [e.y for e in trace.entries if e.feasible]
    if not feasible_ys:
        return None
    return 2.0 * max(feasible_ys)


def run(space: ThresholdSpace, evaluator: Evaluator, config: RunConfig,
        initial_design: Sequence[np.ndarray] | None = None) -> RunTrace:
    """Execute a full SMBO run; deterministic given config and evaluator."""
    trace = RunTrace()

    if initial_design is None:
        design = lhs_sample(space, config.init_design_size,
                            (config.seed, _TAG_INIT))
    else:
        design = [np.asarray(x, dtype=np.float64) for x in initial_design]
    for x in design:
        if not space.is_admissible(x):
            raise ValueError("initial design contains an inadmissible vector")
        trace.append("init", evaluator(x))

    # the penalty level is frozen at the first refit where it is computable
    penalty_value = _initial_penalty(trace, config) if config.constraint_mode == "penalty" else None

    for n in range(1, config.budget + 1):
        if config.constraint_mode == "penalty" and penalty_value is None:
            penalty_value = _initial_penalty(trace, config)
        if config.constraint_mode == "penalty" and penalty_value is None:
            # nothing feasible yet: all-equal placeholder keeps targets flat
            models = _fit_models(trace, config, n, penalty_value=1.0)
        else:
            models = _fit_models(trace, config, n, penalty_value)
        x = propose_next(trace, models, space, config,
                         derive_seed(config.seed, _TAG_FOCUS, n))
        trace.append("acquisition", evaluator(x))

    return trace


def write_trace_csv(trace: RunTrace, path, d: int | None = None) -> None:
    """Persist a run as CSV with 6-significant-digit numeric formatting."""
    if d is None:
        d = trace.entries[0].x.size if trace.entries else 0
    header = ["eval_index", "proposer"] + [f"x_{i}" for i in range(d)] + [
        "feasible", "y", "best_seen"]
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for e in trace.entries:
            row = [e.index, e.proposer]
            row += [f"{v:.6g}" for v in e.x]
            row.append("true" if e.feasible else "false")
            row.append("" if e.y is None else f"{e.y:.6g}")
            row.append("" if e.best_seen is None else f"{e.best_seen:.6g}")
            writer.writerow(row)
    tmp.replace(path)


def read_trace_csv(path) -> RunTrace:
    trace = RunTrace()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        xcols = [i for i, name in enumerate(header) if name.startswith("x_")]
        if not xcols or header[:2] != ["eval_index", "proposer"]:
            raise ValueError(f"{path}: not a run trace file")
        for row in reader:
            x = np.array([float(row[i]) for i in xcols])
            feasible = row[header.index("feasible")] == "true"
            y_raw = row[header.index("y")]
            best_raw = row[header.index("best_seen")]
            trace.entries.append(
                TraceEntry(
                    index=int(row[0]),
                    proposer=row[1],
                    x=x,
                    feasible=feasible,
                    y=float(y_raw) if y_raw else None,
                    best_seen=float(best_raw) if best_raw else None,
                )
            )
    return trace
