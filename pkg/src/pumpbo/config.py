"""Experiment configuration: one JSON document with four sections.

``network`` names a bundled network ("tiny", "desk") or a JSON file path;
``space`` defines the threshold sets; ``smbo`` holds per-run settings and
``experiment`` the protocol (acquisitions, replications, seeding, output).
Every default stated here can be overridden from the file.

Threshold sets accept min/max/step and, alternatively, min/step/count; when
both max and count are present they must agree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .acquisition import ACQUISITION_KINDS, AcqConfig
from .focus import FocusConfig
from .forest import ForestHyper
from .loop import RunConfig
from .space import DiscreteSet, ThresholdSpace


class ConfigError(ValueError):
    """Invalid configuration; `key` names the offending entry."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key {key!r}: {message}")


def _require(doc: dict, key: str, context: str):
    if key not in doc:
        raise ConfigError(f"{context}.{key}", "missing required entry")
    return doc[key]


def parse_set(doc: dict, context: str) -> DiscreteSet:
    if "min" not in doc or "step" not in doc:
        raise ConfigError(context, "a threshold set needs at least min and step")
    vmin = float(doc["min"])
    step = float(doc["step"])
    count = doc.get("count")
    vmax = doc.get("max")
    if vmax is None and count is None:
        raise ConfigError(context, "give either max or count")
    if count is not None:
        derived_max = vmin + (int(count) - 1) * step
        if vmax is not None and abs(float(vmax) - derived_max) > 1e-9:
            raise ConfigError(
                context, f"max={vmax} disagrees with count={count} (implies max={derived_max})"
            )
        vmax = derived_max
    try:
        return DiscreteSet.from_range(vmin, float(vmax), step)
    except ValueError as exc:
        raise ConfigError(context, str(exc))


def parse_space(doc: dict) -> ThresholdSpace:
    mode = doc.get("mode", "discrete")
    if mode not in ("discrete", "continuous"):
        raise ConfigError("space.mode", f"unknown mode {mode!r}")
    if "pairs" in doc:
        lower = tuple(parse_set(p["lower"], f"space.pairs[{j}].lower")
                      for j, p in enumerate(doc["pairs"]))
        upper = tuple(parse_set(p["upper"], f"space.pairs[{j}].upper")
                      for j, p in enumerate(doc["pairs"]))
    else:
        tau = int(_require(doc, "tau", "space"))
        if tau < 1:
            raise ConfigError("space.tau", "must be >= 1")
        lo = parse_set(_require(doc, "lower", "space"), "space.lower")
        up = parse_set(_require(doc, "upper", "space"), "space.upper")
        lower = tuple(lo for _ in range(tau))
        upper = tuple(up for _ in range(tau))
    try:
        return ThresholdSpace(lower, upper, mode)
    except ValueError as exc:
        raise ConfigError("space", str(exc))


def parse_run_template(doc: dict) -> RunConfig:
    """RunConfig from the smbo section; acquisition kind and seed filled later."""
    forest_doc = doc.get("forest", {})
    clf_doc = doc.get("classifier_forest", {})
    try:
        regressor = ForestHyper(
            n_trees=int(forest_doc.get("n_trees", 300)),
            max_features=forest_doc.get("max_features"),
            min_leaf=int(forest_doc.get("min_leaf", 5)),
            bootstrap=bool(forest_doc.get("bootstrap", True)),
        )
        classifier = ForestHyper(
            n_trees=int(clf_doc.get("n_trees", regressor.n_trees)),
            max_features=clf_doc.get("max_features"),
            min_leaf=int(clf_doc.get("min_leaf", 1)),
            bootstrap=bool(clf_doc.get("bootstrap", True)),
        )
        focus_doc = doc.get("focus", {})
        focus = FocusConfig(
            points_per_iter=int(focus_doc.get("points_per_iter", 1000)),
            shrink_iters=int(focus_doc.get("shrink_iters", 5)),
            restarts=int(focus_doc.get("restarts", 3)),
        )
        acquisition = AcqConfig(
            kind=doc.get("acquisition", "ei"),
            beta=float(doc.get("beta", 1.0)),
            sigma_eps=float(doc.get("sigma_eps", 0.0)),
            feasibility_weighting=bool(doc.get("feasibility_weighting", True)),
        )
        return RunConfig(
            init_design_size=int(doc.get("init_design_size", 10)),
            budget=int(doc.get("budget", 200)),
            acquisition=acquisition,
            regressor=regressor,
            classifier=classifier,
            focus=focus,
            constraint_mode=doc.get("constraint_mode", "classifier"),
            penalty=doc.get("penalty"),
        )
    except ValueError as exc:
        raise ConfigError("smbo", str(exc))


@dataclass(eq=False)
class ExperimentConfig:
    network: str | dict
    space: ThresholdSpace
    run_template: RunConfig
    acquisitions: list[str] = field(default_factory=lambda: ["ei", "aei", "lcb"])
    replications: int = 20
    shared_initial_design: bool = True
    seed: int = 0
    baseline_cost: float | None = None
    out_dir: Path = Path("results")
    enumeration_ceiling: int = 10**6
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        network = _require(doc, "network", "")
        space = parse_space(_require(doc, "space", ""))
        template = parse_run_template(doc.get("smbo", {}))
        exp = doc.get("experiment", {})
        acquisitions = list(exp.get("acquisitions", ["ei", "aei", "lcb"]))
        for kind in acquisitions:
            if kind not in ACQUISITION_KINDS:
                raise ConfigError("experiment.acquisitions", f"unknown acquisition {kind!r}")
        if not acquisitions:
            raise ConfigError("experiment.acquisitions", "need at least one acquisition")
        replications = int(exp.get("replications", 20))
        if replications < 1:
            raise ConfigError("experiment.replications", "must be >= 1")
        seed = int(exp.get("seed", 0))
        if seed < 0:
            raise ConfigError("experiment.seed", "must be >= 0")
        baseline = exp.get("baseline_cost")
        return cls(
            network=network,
            space=space,
            run_template=template,
            acquisitions=acquisitions,
            replications=replications,
            shared_initial_design=bool(exp.get("shared_initial_design", True)),
            seed=seed,
            baseline_cost=None if baseline is None else float(baseline),
            out_dir=Path(exp.get("out_dir", "results")),
            enumeration_ceiling=int(exp.get("enumeration_ceiling", 10**6)),
            raw=doc,
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(str(path), f"not valid JSON: {exc}")
        return cls.from_dict(doc)
