import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pumpbo.hydrosim import load_network
from pumpbo.space import DiscreteSet, ThresholdSpace


def tiny_space(mode="discrete"):
    lower = DiscreteSet.from_range(22.0, 25.0, 0.5)
    upper = DiscreteSet.from_range(24.0, 28.0, 0.5)
    return ThresholdSpace((lower,) * 2, (upper,) * 2, mode)


def desk_space(mode="discrete"):
    lower = DiscreteSet.from_range(21.0, 32.0, 0.5)
    upper = DiscreteSet.from_range(26.0, 44.0, 0.5)
    return ThresholdSpace((lower,) * 10, (upper,) * 10, mode)


@pytest.fixture(scope="session")
def tiny_net():
    return load_network("tiny")


@pytest.fixture(scope="session")
def desk_net():
    return load_network("desk")


@pytest.fixture(scope="session")
def tiny_doc():
    from importlib import resources

    return json.loads(resources.files("pumpbo.data").joinpath("tiny.json").read_text())


@pytest.fixture(scope="session")
def desk_doc():
    from importlib import resources

    return json.loads(resources.files("pumpbo.data").joinpath("desk.json").read_text())


@pytest.fixture(scope="session")
def tiny_oracle_table(tiny_net):
    """Exhaustive (x, feasible, cost) table of the tiny problem."""
    from pumpbo.hydrosim import evaluate
    from pumpbo.space import enumerate_admissible

    space = tiny_space()
    grid = enumerate_admissible(space)
    feasible = np.zeros(len(grid), dtype=bool)
    costs = np.full(len(grid), np.nan)
    for i, x in enumerate(grid):
        obs = evaluate(tiny_net, x, space)
        feasible[i] = obs.feasible
        if obs.feasible:
            costs[i] = obs.y
    return grid, feasible, costs
