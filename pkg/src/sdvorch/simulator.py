"""Discrete-time replay of a scenario under the baseline or optimized policy.

Each scenario state has a transition phase (containers stopping and
starting, during which flows of not-yet-started apps produce no samples)
followed by its steady phase. Contention inside a phase is stationary, so
one contention solve per phase is replicated over the phase's ticks.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels
from .errors import ScenarioMismatchError
from .model import FEASIBILITY_TOL, Assignment, Instance, Scenario
from .serialize import config_hash, dumps, instance_hash, scenario_hash, write_text
from .solver import solve_greedy


class Policy(str, enum.Enum):
    BASELINE = "baseline"
    OPTIMIZED = "optimized"


@dataclass(frozen=True)
class SimConfig:
    tick_s: float = 1.0
    container_start_s: float = 2.0
    container_stop_s: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (self.tick_s > 0 and self.container_start_s > 0 and self.container_stop_s > 0):
            raise ValueError("tick and container delays must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TickResult:
    """Contention outcome for one tick; flow arrays cover every flow of the instance."""

    active: np.ndarray
    observed: np.ndarray
    cpu_demand: np.ndarray
    cpu_used: np.ndarray
    mem_used: np.ndarray
    link_load: np.ndarray

    def health(self, target: np.ndarray) -> np.ndarray:
        out = np.full(len(target), np.nan)
        out[self.active] = 100.0 * (self.observed[self.active] / target[self.active])
        return out


@dataclass
class StateRecord:
    index: int
    start_tick: int
    gap_ticks: int
    duration_ticks: int
    requested: tuple[str, ...]
    assignment: Assignment
    starts: dict[str, int]
    stops: dict[str, int]
    container_time_s: float
    solve_time_s: Optional[float] = None

    @property
    def transition_time_s(self) -> float:
        return self.container_time_s + (self.solve_time_s or 0.0)

    @property
    def end_tick(self) -> int:
        return self.start_tick + self.gap_ticks + self.duration_ticks


@dataclass
class MetricsLog:
    """Per-tick samples in columnar form plus per-state records.

    Missing flow samples (transition gaps) carry ``observed = NaN``.
    """

    policy: str
    flow_ids: tuple[str, ...]
    flow_ecu: tuple[str, ...]
    ecu_ids: tuple[str, ...]
    flow_tick: np.ndarray
    flow_state: np.ndarray
    flow_idx: np.ndarray
    flow_target: np.ndarray
    flow_observed: np.ndarray
    ecu_tick: np.ndarray
    ecu_state: np.ndarray
    ecu_idx: np.ndarray
    ecu_cpu: np.ndarray
    ecu_cpu_demand: np.ndarray
    ecu_mem: np.ndarray
    cpu_capacity: np.ndarray
    states: list[StateRecord] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def flow_health(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return 100.0 * (self.flow_observed / self.flow_target)

    @property
    def n_ticks(self) -> int:
        return self.states[-1].end_tick if self.states else 0


def _levels_for(inst: Instance, policy: Policy, requested, capacity):
    c = inst.compiled
    if policy is Policy.BASELINE:
        levels = np.zeros(c.n_apps, dtype=np.int32)
        for a in requested:
            levels[c.pos[a]] = 1
        return levels, None
    sol = solve_greedy(inst, requested, capacity)
    return c.levels_array(sol.assignment), sol.solve_time


def _step_levels(inst: Instance, levels: np.ndarray) -> TickResult:
    c = inst.compiled
    idx = inst.index
    cap = inst.capacity_vector
    usage = np.zeros(c.r)
    for i in np.flatnonzero(levels):
        usage += c.req[c.mode_pos(int(i), int(levels[i]))]
    ne = idx.n_ecus
    cpu_demand = usage[0:2 * ne:2].copy()
    mem = usage[1:2 * ne:2].copy()
    cpu_cap = cap[0:2 * ne:2].copy()
    link_cap = cap[2 * ne:].copy()
    active = c.active_flows(levels)
    observed, load = kernels.contention(
        c.flow_target, c.flow_src_ecu, c.flow_up, c.flow_down, active.astype(np.uint8),
        cpu_demand, cpu_cap, link_cap, FEASIBILITY_TOL)
    return TickResult(active, observed, cpu_demand, np.minimum(cpu_demand, cpu_cap), mem, load)


def step_tick(inst: Instance, assignment: Assignment, cfg: Optional[SimConfig] = None) -> TickResult:
    """Contention for one tick with ``assignment`` running (feasibility not required).

    CPU: an ECU demanding more than its capacity slows every flow it sends by
    ``capacity / demand``. Links: a link offered more than its capacity
    scales all its flows by ``capacity / offered``; a cross-ECU flow gets the
    smaller factor of its uplink and downlink.
    """
    return _step_levels(inst, inst.compiled.levels_array(assignment))


def _check_scenario(inst: Instance, scenario: Scenario) -> str:
    h = instance_hash(inst)
    if scenario.instance_hash and scenario.instance_hash != h:
        raise ScenarioMismatchError(
            f"scenario was generated for instance {scenario.instance_hash}, not {h}")
    for n, st in enumerate(scenario.states):
        unknown = [a for a in st.requested if a not in inst.app_map]
        if unknown:
            raise ScenarioMismatchError(f"state {n} requests unknown apps {unknown}")
    return h


class _Columns:
    def __init__(self):
        self.f = {k: [] for k in ("tick", "state", "idx", "target", "observed")}
        self.e = {k: [] for k in ("tick", "state", "idx", "cpu", "demand", "mem")}

    def add_phase(self, first_tick, n_ticks, state, res: TickResult, target, missing):
        if n_ticks <= 0:
            return
        live = np.flatnonzero(res.active | missing)
        obs = np.where(missing[live], np.nan, res.observed[live])
        ticks = np.arange(first_tick, first_tick + n_ticks)
        nf = len(live)
        self.f["tick"].append(np.repeat(ticks, nf))
        self.f["state"].append(np.full(nf * n_ticks, state))
        self.f["idx"].append(np.tile(live, n_ticks))
        self.f["target"].append(np.tile(target[live], n_ticks))
        self.f["observed"].append(np.tile(obs, n_ticks))
        ne = len(res.cpu_demand)
        self.e["tick"].append(np.repeat(ticks, ne))
        self.e["state"].append(np.full(ne * n_ticks, state))
        self.e["idx"].append(np.tile(np.arange(ne), n_ticks))
        self.e["cpu"].append(np.tile(res.cpu_used, n_ticks))
        self.e["demand"].append(np.tile(res.cpu_demand, n_ticks))
        self.e["mem"].append(np.tile(res.mem_used, n_ticks))

    @staticmethod
    def _cat(parts, dtype):
        return np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype=dtype)


def run_scenario(inst: Instance, scenario: Scenario, policy, cfg: Optional[SimConfig] = None,
                 ) -> MetricsLog:
    cfg = cfg or SimConfig()
    policy = Policy(policy)
    ihash = _check_scenario(inst, scenario)
    c = inst.compiled
    cap = inst.capacity_vector
    hosts = [inst.topology.ecu_ids[h] for h in c.host]
    cols = _Columns()
    states = []
    prev = np.zeros(c.n_apps, dtype=np.int32)
    tick = 0
    for s, st in enumerate(scenario.states):
        new, solve_time = _levels_for(inst, policy, st.requested, cap)
        starts = {e: 0 for e in inst.topology.ecu_ids}
        stops = dict(starts)
        for i in np.flatnonzero(prev != new):
            if prev[i]:
                stops[hosts[i]] += 1
            if new[i]:
                starts[hosts[i]] += 1
        container = max((stops[e] * cfg.container_stop_s + starts[e] * cfg.container_start_s
                         for e in starts), default=0.0)
        gap = int(math.ceil(container / cfg.tick_s - 1e-9))
        steady = max(1, int(round(st.duration_s / cfg.tick_s)))

        running = np.where(prev == new, new, 0).astype(np.int32)
        res = _step_levels(inst, running)
        pending = c.active_flows(new) & ~res.active
        cols.add_phase(tick, gap, s, res, c.flow_target, pending)
        res = _step_levels(inst, new)
        cols.add_phase(tick + gap, steady, s, res, c.flow_target, np.zeros_like(res.active))

        states.append(StateRecord(s, tick, gap, steady, tuple(st.requested),
                                  c.assignment(new), starts, stops, float(container),
                                  solve_time))
        tick += gap + steady
        prev = new

    f, e = cols.f, cols.e
    ne = inst.index.n_ecus
    return MetricsLog(
        policy=policy.value,
        flow_ids=c.flow_ids,
        flow_ecu=tuple(inst.topology.ecu_ids[x] for x in c.flow_src_ecu),
        ecu_ids=tuple(inst.topology.ecu_ids),
        flow_tick=_Columns._cat(f["tick"], np.int64),
        flow_state=_Columns._cat(f["state"], np.int64),
        flow_idx=_Columns._cat(f["idx"], np.int64),
        flow_target=_Columns._cat(f["target"], np.float64),
        flow_observed=_Columns._cat(f["observed"], np.float64),
        ecu_tick=_Columns._cat(e["tick"], np.int64),
        ecu_state=_Columns._cat(e["state"], np.int64),
        ecu_idx=_Columns._cat(e["idx"], np.int64),
        ecu_cpu=_Columns._cat(e["cpu"], np.float64),
        ecu_cpu_demand=_Columns._cat(e["demand"], np.float64),
        ecu_mem=_Columns._cat(e["mem"], np.float64),
        cpu_capacity=cap[0:2 * ne:2].copy(),
        states=states,
        meta={
            "policy": policy.value,
            "instance_hash": ihash,
            "scenario_hash": scenario_hash(scenario),
            "config_hash": config_hash(cfg.to_dict()),
            "instance_seed": inst.meta.get("seed"),
            "scenario_seed": scenario.seed,
            "sim_config": cfg.to_dict(),
        },
    )


# -- files ----------------------------------------------------------------------

METRICS_FORMAT = "sdvorch-metrics/1"
TICK_COLUMNS = ("tick", "state", "flow_id", "target", "observed", "health",
                "ecu", "cpu", "cpu_demand", "mem")


def _num(x: float) -> str:
    return "" if x != x else f"{x:.6f}"


def ticks_csv(log: MetricsLog) -> str:
    """Flat per-tick table: flow rows (flow_id set) then ECU rows for every tick."""
    head = (f"# policy={log.policy} instance={log.meta.get('instance_hash')} "
            f"scenario={log.meta.get('scenario_hash')} seed={log.meta.get('scenario_seed')} "
            f"config={log.meta.get('config_hash')}")
    lines = [head, ",".join(TICK_COLUMNS)]
    health = log.flow_health
    nf, ne = len(log.flow_tick), len(log.ecu_tick)
    i = j = 0
    while i < nf or j < ne:
        t = min(log.flow_tick[i] if i < nf else np.iinfo(np.int64).max,
                log.ecu_tick[j] if j < ne else np.iinfo(np.int64).max)
        while i < nf and log.flow_tick[i] == t:
            f = int(log.flow_idx[i])
            lines.append(f"{t},{log.flow_state[i]},{log.flow_ids[f]},{_num(log.flow_target[i])},"
                         f"{_num(log.flow_observed[i])},{_num(health[i])},{log.flow_ecu[f]},,,")
            i += 1
        while j < ne and log.ecu_tick[j] == t:
            e = int(log.ecu_idx[j])
            lines.append(f"{t},{log.ecu_state[j]},,,,,{log.ecu_ids[e]},{_num(log.ecu_cpu[j])},"
                         f"{_num(log.ecu_cpu_demand[j])},{_num(log.ecu_mem[j])}")
            j += 1
    return "\n".join(lines) + "\n"


def log_to_dict(log: MetricsLog) -> dict:
    """Everything but the samples and timings (those live in the CSV and timing files)."""
    return {
        "format": METRICS_FORMAT,
        "meta": log.meta,
        "policy": log.policy,
        "flow_ids": list(log.flow_ids),
        "flow_ecu": list(log.flow_ecu),
        "ecu_ids": list(log.ecu_ids),
        "cpu_capacity": log.cpu_capacity,
        "states": [
            {"index": s.index, "start_tick": s.start_tick, "gap_ticks": s.gap_ticks,
             "duration_ticks": s.duration_ticks, "requested": list(s.requested),
             "assignment": dict(s.assignment.levels), "starts": s.starts, "stops": s.stops,
             "container_time_s": s.container_time_s}
            for s in log.states
        ],
    }


def timing_to_dict(log: MetricsLog) -> dict:
    return {
        "policy": log.policy,
        "states": [{"index": s.index, "solve_time_s": s.solve_time_s,
                    "transition_time_s": s.transition_time_s} for s in log.states],
    }


def save_log(log: MetricsLog, prefix) -> dict:
    """Write ``<prefix>.log.json``, ``<prefix>.ticks.csv`` and ``<prefix>.timing.json``."""
    prefix = Path(prefix)
    paths = {
        "log": prefix.with_name(prefix.name + ".log.json"),
        "ticks": prefix.with_name(prefix.name + ".ticks.csv"),
        "timing": prefix.with_name(prefix.name + ".timing.json"),
    }
    write_text(paths["log"], dumps(log_to_dict(log)))
    write_text(paths["ticks"], ticks_csv(log))
    write_text(paths["timing"], dumps(timing_to_dict(log)))
    return paths


def load_log(prefix) -> MetricsLog:
    prefix = Path(prefix)
    doc = json.loads(prefix.with_name(prefix.name + ".log.json").read_text())
    if doc.get("format") != METRICS_FORMAT:
        raise ValueError(f"not a metrics log: format={doc.get('format')!r}")
    timing_path = prefix.with_name(prefix.name + ".timing.json")
    solve = {}
    if timing_path.exists():
        solve = {s["index"]: s["solve_time_s"] for s in json.loads(timing_path.read_text())["states"]}
    flow_pos = {f: i for i, f in enumerate(doc["flow_ids"])}
    ecu_pos = {e: i for i, e in enumerate(doc["ecu_ids"])}
    fl = {k: [] for k in ("tick", "state", "idx", "target", "observed")}
    ec = {k: [] for k in ("tick", "state", "idx", "cpu", "demand", "mem")}
    num = lambda s: float(s) if s else math.nan  # noqa: E731
    with open(prefix.with_name(prefix.name + ".ticks.csv"), newline="") as fh:
        rows = csv.reader(line for line in fh if not line.startswith("#"))
        next(rows)
        for row in rows:
            if row[2]:
                for k, v in zip(fl, (int(row[0]), int(row[1]), flow_pos[row[2]],
                                     num(row[3]), num(row[4]))):
                    fl[k].append(v)
            else:
                for k, v in zip(ec, (int(row[0]), int(row[1]), ecu_pos[row[6]],
                                     num(row[7]), num(row[8]), num(row[9]))):
                    ec[k].append(v)
    states = [
        StateRecord(s["index"], s["start_tick"], s["gap_ticks"], s["duration_ticks"],
                    tuple(s["requested"]), Assignment(s["assignment"]), s["starts"], s["stops"],
                    s["container_time_s"], solve.get(s["index"]))
        for s in doc["states"]
    ]
    arr = np.array
    return MetricsLog(
        doc["policy"], tuple(doc["flow_ids"]), tuple(doc["flow_ecu"]), tuple(doc["ecu_ids"]),
        arr(fl["tick"], dtype=np.int64), arr(fl["state"], dtype=np.int64),
        arr(fl["idx"], dtype=np.int64), arr(fl["target"], dtype=float),
        arr(fl["observed"], dtype=float),
        arr(ec["tick"], dtype=np.int64), arr(ec["state"], dtype=np.int64),
        arr(ec["idx"], dtype=np.int64), arr(ec["cpu"], dtype=float),
        arr(ec["demand"], dtype=float), arr(ec["mem"], dtype=float),
        arr(doc["cpu_capacity"], dtype=float), states, doc["meta"])
