"""Time-stepped mass-balance simulator of a small pumped water network.

This is the expensive black box of the optimization problem: given a vector
of pressure thresholds it plays the hysteresis switching rule over a daily
horizon, integrates tank levels, accumulates tariffed pump energy cost, and
reports hydraulic feasibility. Pressures come from a linear surrogate

    pressure(p) = base_head(p) + level_gain(p) * level(tank(p))
                  - demand_gain(p) * total_demand + sum_q coupling[p, q] * on(q)

so a pump's pressure also moves when other pumps switch, which is what makes
the objective genuinely coupled across threshold pairs.

Within one step the order is fixed: pressures are computed from start-of-step
levels and end-of-previous-step statuses, then every pump applies the
switching rule in pump-index order, then tank levels integrate over the step
and cost accrues for pumps that are on. A run is infeasible at the first step
where a tank leaves its bounds or any pressure drops below the service
minimum; the returned series is truncated there and the energy cost is
withheld (the objective is undefined on infeasible vectors).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .forest import Observation
from .space import ThresholdSpace

BUILTIN_NETWORKS = ("tiny", "desk")


class InadmissibleVectorError(ValueError):
    """The optimizer submitted a vector violating the analytic constraints."""


class NetworkDefinitionError(ValueError):
    """Network description violates a structural invariant."""


@dataclass(frozen=True)
class Tank:
    name: str
    area: float           # m^2
    level_min: float      # m
    level_max: float      # m
    level_init: float     # m


@dataclass(frozen=True)
class Pump:
    name: str
    flow: float           # m^3/h delivered while on
    power: float          # kW drawn while on
    tank: int             # index of the fed tank
    day_pair: int         # threshold pair used inside the day window
    night_pair: int       # threshold pair used outside it
    base_head: float      # m
    level_gain: float
    demand_gain: float    # m per m^3/h of network demand
    initial_on: bool = False


@dataclass(frozen=True)
class Clock:
    dt: float = 1.0           # hours per step
    horizon: int = 24         # steps
    day_start: float = 6.0    # day window [day_start, day_end) in clock hours
    day_end: float = 23.0
    start_hour: float = 0.0

    def hour(self, step: int) -> float:
        return (self.start_hour + step * self.dt) % 24.0

    def is_day(self, step: int) -> bool:
        return self.day_start <= self.hour(step) < self.day_end


@dataclass(frozen=True)
class FailureRecord:
    kind: str      # "tank_underflow" | "tank_overflow" | "pressure_below_service"
    step: int
    subject: str   # tank or pump name


@dataclass(eq=False)
class SimulationResult:
    feasible: bool
    energy_cost: float | None
    failures: list[FailureRecord]
    statuses: np.ndarray    # (steps, n_pumps) bool, end-of-step
    pressures: np.ndarray   # (steps, n_pumps)
    levels: np.ndarray      # (steps, n_tanks), end-of-step
    step_costs: np.ndarray  # (steps,)


@dataclass(eq=False)
class NetworkModel:
    name: str
    tanks: list[Tank]
    pumps: list[Pump]
    coupling: np.ndarray          # (n_pumps, n_pumps), meters added when q is on
    demand: np.ndarray            # (n_tanks, horizon) m^3/h
    tariff: np.ndarray            # (horizon,) currency per kWh
    clock: Clock = field(default_factory=Clock)
    service_pressure_min: float = 0.0
    require_final_at_least_initial: bool = False

    def __post_init__(self):
        self.coupling = np.asarray(self.coupling, dtype=np.float64)
        self.demand = np.asarray(self.demand, dtype=np.float64)
        self.tariff = np.asarray(self.tariff, dtype=np.float64)
        nt, np_ = len(self.tanks), len(self.pumps)
        if nt == 0 or np_ == 0:
            raise NetworkDefinitionError("need at least one tank and one pump")
        for t in self.tanks:
            if t.area <= 0:
                raise NetworkDefinitionError(f"tank {t.name}: area must be positive")
            if not t.level_min < t.level_max:
                raise NetworkDefinitionError(f"tank {t.name}: level_min must be below level_max")
            if not t.level_min <= t.level_init <= t.level_max:
                raise NetworkDefinitionError(f"tank {t.name}: initial level out of bounds")
        pair_ids = set()
        for p in self.pumps:
            if p.flow < 0 or p.power < 0:
                raise NetworkDefinitionError(f"pump {p.name}: flow and power must be >= 0")
            if not 0 <= p.tank < nt:
                raise NetworkDefinitionError(f"pump {p.name}: unknown tank index {p.tank}")
            if p.day_pair < 0 or p.night_pair < 0:
                raise NetworkDefinitionError(f"pump {p.name}: pair ids must be >= 0")
            pair_ids.update((p.day_pair, p.night_pair))
        if pair_ids != set(range(len(pair_ids))):
            raise NetworkDefinitionError("threshold pair ids must cover 0..n_pairs-1")
        if self.coupling.shape != (np_, np_):
            raise NetworkDefinitionError("coupling matrix must be n_pumps x n_pumps")
        if self.demand.shape != (nt, self.clock.horizon):
            raise NetworkDefinitionError("demand must be n_tanks x horizon")
        if self.tariff.shape != (self.clock.horizon,):
            raise NetworkDefinitionError("tariff must have one entry per step")

    @property
    def n_pairs(self) -> int:
        return max(max(p.day_pair, p.night_pair) for p in self.pumps) + 1


def control_step(pressure: float, is_on: bool, lower: float, upper: float) -> bool:
    """Hysteresis switching rule with strict comparisons.

    Switch on when the pressure is below the lower threshold and the pump is
    off; switch off when it is above the upper threshold and the pump is on;
    keep the current status inside the dead band.
    """
    if lower > upper:
        raise ValueError("lower threshold must not exceed the upper one")
    if not is_on and pressure < lower:
        return True
    if is_on and pressure > upper:
        return False
    return is_on


def pressure_at(
    net: NetworkModel, pump_index: int, levels: np.ndarray, total_demand: float,
    statuses: np.ndarray,
) -> float:
    p = net.pumps[pump_index]
    base = p.base_head + p.level_gain * levels[p.tank] - p.demand_gain * total_demand
    return float(base + net.coupling[pump_index] @ statuses)


def _pressures(net: NetworkModel, levels: np.ndarray, total_demand: float,
               statuses: np.ndarray) -> np.ndarray:
    base = np.array(
        [
            p.base_head + p.level_gain * levels[p.tank] - p.demand_gain * total_demand
            for p in net.pumps
        ]
    )
    return base + net.coupling @ statuses.astype(np.float64)


def simulate(net: NetworkModel, x: np.ndarray, space: ThresholdSpace) -> SimulationResult:
    """Run the full horizon under the switching rule defined by x."""
    x = np.asarray(x, dtype=np.float64)
    report = space.validate(x)
    if not report.admissible:
        raise InadmissibleVectorError(
            f"vector violates c1 at {report.c1_violations} / c2 at pairs {report.c2_violations}"
        )
    if space.tau != net.n_pairs:
        raise NetworkDefinitionError(
            f"network uses {net.n_pairs} threshold pairs but the space has {space.tau}"
        )

    horizon = net.clock.horizon
    n_pumps = len(net.pumps)
    n_tanks = len(net.tanks)
    tau = space.tau

    on = np.array([p.initial_on for p in net.pumps], dtype=bool)
    levels = np.array([t.level_init for t in net.tanks], dtype=np.float64)
    areas = np.array([t.area for t in net.tanks], dtype=np.float64)
    lmin = np.array([t.level_min for t in net.tanks], dtype=np.float64)
    lmax = np.array([t.level_max for t in net.tanks], dtype=np.float64)
    flows = np.array([p.flow for p in net.pumps], dtype=np.float64)
    powers = np.array([p.power for p in net.pumps], dtype=np.float64)
    tank_of = np.array([p.tank for p in net.pumps], dtype=np.int64)

    statuses = np.zeros((horizon, n_pumps), dtype=bool)
    pressures = np.zeros((horizon, n_pumps), dtype=np.float64)
    level_series = np.zeros((horizon, n_tanks), dtype=np.float64)
    step_costs = np.zeros(horizon, dtype=np.float64)

    failures: list[FailureRecord] = []
    cost = 0.0
    steps_done = 0

    for k in range(horizon):
        demand_k = net.demand[:, k]
        total_demand = float(demand_k.sum())
        press = _pressures(net, levels, total_demand, on)

        new_on = on.copy()
        for i, p in enumerate(net.pumps):
            pair = p.day_pair if net.clock.is_day(k) else p.night_pair
            new_on[i] = control_step(press[i], bool(on[i]), x[pair], x[pair + tau])
        on = new_on

        inflow = np.zeros(n_tanks, dtype=np.float64)
        np.add.at(inflow, tank_of[on], flows[on])
        levels = levels + net.clock.dt / areas * (inflow - demand_k)

        step_cost = float(powers[on].sum() * net.tariff[k] * net.clock.dt)
        cost += step_cost

        statuses[k] = on
        pressures[k] = press
        level_series[k] = levels
        step_costs[k] = step_cost
        steps_done = k + 1

        for t in range(n_tanks):
            if levels[t] < lmin[t]:
                failures.append(FailureRecord("tank_underflow", k, net.tanks[t].name))
            elif levels[t] > lmax[t]:
                failures.append(FailureRecord("tank_overflow", k, net.tanks[t].name))
        for i in range(n_pumps):
            if press[i] < net.service_pressure_min:
                failures.append(
                    FailureRecord("pressure_below_service", k, net.pumps[i].name)
                )
        if failures:
            break

    if not failures and net.require_final_at_least_initial:
        for t in range(n_tanks):
            if levels[t] < net.tanks[t].level_init:
                failures.append(
                    FailureRecord("final_level_below_initial", horizon - 1, net.tanks[t].name)
                )

    feasible = not failures
    return SimulationResult(
        feasible=feasible,
        energy_cost=cost if feasible else None,
        failures=failures,
        statuses=statuses[:steps_done],
        pressures=pressures[:steps_done],
        levels=level_series[:steps_done],
        step_costs=step_costs[:steps_done],
    )


def evaluate(net: NetworkModel, x: np.ndarray, space: ThresholdSpace) -> Observation:
    """Wrap a simulation run into an optimizer observation."""
    result = simulate(net, x, space)
    return Observation(x=np.asarray(x, dtype=np.float64), feasible=result.feasible,
                       y=result.energy_cost)


def write_timeseries_csv(result: SimulationResult, net: NetworkModel, path) -> None:
    """Step-by-step CSV: statuses, pressures, levels and cost per step."""
    header = (
        ["step", "hour"]
        + [f"on_{p.name}" for p in net.pumps]
        + [f"pressure_{p.name}" for p in net.pumps]
        + [f"level_{t.name}" for t in net.tanks]
        + ["step_cost"]
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(result.statuses.shape[0]):
            row = [k, f"{net.clock.hour(k):g}"]
            row += ["true" if v else "false" for v in result.statuses[k]]
            row += [f"{v:.6g}" for v in result.pressures[k]]
            row += [f"{v:.6g}" for v in result.levels[k]]
            row.append(f"{result.step_costs[k]:.6g}")
            writer.writerow(row)


def network_from_dict(doc: dict) -> NetworkModel:
    tank_names = [t["name"] for t in doc["tanks"]]
    tanks = [
        Tank(t["name"], float(t["area"]), float(t["level_min"]), float(t["level_max"]),
             float(t["level_init"]))
        for t in doc["tanks"]
    ]
    pumps = []
    for p in doc["pumps"]:
        try:
            tank_idx = tank_names.index(p["tank"])
        except ValueError:
            raise NetworkDefinitionError(f"pump {p['name']}: unknown tank {p['tank']!r}")
        pumps.append(
            Pump(
                name=p["name"],
                flow=float(p["flow"]),
                power=float(p["power"]),
                tank=tank_idx,
                day_pair=int(p["day_pair"]),
                night_pair=int(p["night_pair"]),
                base_head=float(p["base_head"]),
                level_gain=float(p["level_gain"]),
                demand_gain=float(p["demand_gain"]),
                initial_on=bool(p.get("initial_on", False)),
            )
        )
    clock_doc = doc.get("clock", {})
    clock = Clock(
        dt=float(clock_doc.get("dt", 1.0)),
        horizon=int(clock_doc.get("horizon", 24)),
        day_start=float(clock_doc.get("day_start", 6.0)),
        day_end=float(clock_doc.get("day_end", 23.0)),
        start_hour=float(clock_doc.get("start_hour", 0.0)),
    )
    demand = np.array([doc["demand"][name] for name in tank_names], dtype=np.float64)
    return NetworkModel(
        name=doc.get("name", "network"),
        tanks=tanks,
        pumps=pumps,
        coupling=np.asarray(doc["coupling"], dtype=np.float64),
        demand=demand,
        tariff=np.asarray(doc["tariff"], dtype=np.float64),
        clock=clock,
        service_pressure_min=float(doc.get("service_pressure_min", 0.0)),
        require_final_at_least_initial=bool(doc.get("require_final_at_least_initial", False)),
    )


def load_network(source) -> NetworkModel:
    """Load a network from a bundled name, a JSON file path, or a dict."""
    if isinstance(source, dict):
        return network_from_dict(source)
    if isinstance(source, str) and source in BUILTIN_NETWORKS:
        text = resources.files("pumpbo.data").joinpath(f"{source}.json").read_text()
        return network_from_dict(json.loads(text))
    path = Path(source)
    if not path.exists():
        raise NetworkDefinitionError(
            f"network {source!r} is neither a bundled name {BUILTIN_NETWORKS} nor a file"
        )
    return network_from_dict(json.loads(path.read_text(encoding="utf-8")))
