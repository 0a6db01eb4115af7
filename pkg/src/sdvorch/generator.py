"""Seeded random instances and scenarios.

Applications get a random number of modes, a random acyclic app-level
dependency graph is grown edge by edge, every app edge is expanded into
non-crossing mode edges, and every mode edge carries a few flows. All draws
come from one ``numpy.random.Generator`` in a fixed order, so a seed fully
determines the result.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import GenerationError
from .model import (
    Application, Flow, Instance, ModeRef, ModeSpec, Scenario, ScenarioState, Topology,
    dependency_closure,
)

# name -> (apps, max modes, app-graph density)
PRESETS = {
    "XS": (10, 1, 0.05),
    "S": (20, 3, 0.05),
    "M": (30, 4, 0.10),
    "L": (50, 5, 0.15),
    "XL": (100, 5, 0.20),
}

# CPU percent an ECU spends per Mbps sent or received by its apps.
TRAFFIC_CPU_PCT_PER_MBPS = 0.5

RngLike = Union[int, Sequence[int], np.random.Generator, None]


def make_rng(seed: RngLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class GenParams:
    n_apps: int
    m_max: int = 5
    density: float = 0.1
    cpu_pct: tuple[float, float] = (0.0, 10.0)
    mem_mb: tuple[float, float] = (0.0, 200.0)
    modes: tuple[int, int] = (1, 0)  # upper bound 0 means m_max
    flows_per_dep_edge: tuple[int, int] = (1, 5)
    flow_mbps: tuple[float, float] = (0.1, 2.0)
    n_ecus: int = 4
    link_mbps: float = 10.0
    ecu_cpu: float = 100.0
    ecu_mem_mb: float = 8000.0
    traffic_cpu_pct_per_mbps: float = TRAFFIC_CPU_PCT_PER_MBPS
    seed: int = 0

    def __post_init__(self):
        if self.modes[1] == 0:
            object.__setattr__(self, "modes", (self.modes[0], self.m_max))
        problems = []
        if self.n_apps < 1:
            problems.append("n_apps must be >= 1")
        if self.m_max < 1:
            problems.append("m_max must be >= 1")
        if not 0.0 <= self.density <= 1.0:
            problems.append(f"density {self.density} outside [0, 1]")
        if self.n_ecus < 1:
            problems.append("n_ecus must be >= 1")
        if not self.link_mbps > 0:
            problems.append("link_mbps must be positive")
        if not (self.ecu_cpu > 0 and self.ecu_mem_mb > 0):
            problems.append("ECU capacities must be positive")
        if self.traffic_cpu_pct_per_mbps < 0:
            problems.append("traffic_cpu_pct_per_mbps must be >= 0")
        for name in ("cpu_pct", "mem_mb", "flow_mbps"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi:
                problems.append(f"{name} range {(lo, hi)} is invalid")
        if not self.flow_mbps[0] > 0:
            problems.append("flow bandwidth must be positive")
        lo, hi = self.modes
        if not 1 <= lo <= hi <= self.m_max:
            problems.append(f"modes range {self.modes} is invalid for m_max={self.m_max}")
        lo, hi = self.flows_per_dep_edge
        if not 1 <= lo <= hi:
            problems.append(f"flows_per_dep_edge range {(lo, hi)} is invalid")
        if problems:
            raise ValueError("; ".join(problems))

    @classmethod
    def preset(cls, name: str, seed: int = 0, **overrides) -> "GenParams":
        try:
            n, m, d = PRESETS[name.upper()]
        except KeyError:
            raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
        return cls(**{"n_apps": n, "m_max": m, "density": d, "seed": seed, **overrides})

    def to_dict(self) -> dict:
        return asdict(self)


def target_edge_count(n: int, density: float) -> int:
    return int(math.floor(density * n * (n - 1) / 2 + 1e-9))


def _reaches(adj: list[set[int]], src: int, dst: int) -> bool:
    stack, seen = [src], {src}
    while stack:
        u = stack.pop()
        if u == dst:
            return True
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return False


def gen_app_graph(n: int, density: float, rng: RngLike) -> list[tuple[int, int]]:
    """Random DAG over ``n`` apps with ``floor(density * n(n-1)/2)`` edges.

    Edge ``(i, k)`` means app ``i`` depends on app ``k``. Edges are added
    between random ordered pairs; an edge that closes a cycle is removed
    again right away.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"density {density} outside [0, 1]")
    rng = make_rng(rng)
    target = target_edge_count(n, density)
    adj: list[set[int]] = [set() for _ in range(n)]
    edges: list[tuple[int, int]] = []
    budget = 100 * n * n
    attempts = 0
    while len(edges) < target:
        if attempts >= budget:
            raise GenerationError(
                f"reached {len(edges)}/{target} edges after {attempts} attempts")
        attempts += 1
        i = int(rng.integers(n))
        k = int(rng.integers(n - 1))
        if k >= i:
            k += 1
        if k in adj[i]:
            continue
        adj[i].add(k)
        edges.append((i, k))
        if _reaches(adj, k, i):
            adj[i].discard(k)
            edges.pop()
    return edges


def gen_mode_edges(app_edges: Sequence[tuple[int, int]], n_modes: Sequence[int],
                   rng: RngLike) -> list[tuple[int, int, int, int]]:
    """Expand app edges into non-crossing mode edges ``(i, j, k, l)``: ``i@j`` needs ``k@l``."""
    rng = make_rng(rng)
    out = []
    for i, k in app_edges:
        mi, mk = int(n_modes[i]), int(n_modes[k])
        c = int(rng.integers(1, min(mi, mk) + 1))
        js = np.sort(rng.choice(mi, size=c, replace=False)) + 1
        ls = np.sort(rng.choice(mk, size=c, replace=False)) + 1
        out.extend((i, int(j), k, int(l)) for j, l in zip(js, ls))
    return out


def gen_flows(mode_edges: Sequence[tuple[int, int, int, int]], rng: RngLike,
              count: tuple[int, int] = (1, 5),
              mbps: tuple[float, float] = (0.1, 2.0)) -> list[tuple[int, int, int, int, float]]:
    """Flows ``(i, j, k, l, target_mbps)`` from the depending mode to its provider."""
    rng = make_rng(rng)
    out = []
    for i, j, k, l in mode_edges:
        n = int(rng.integers(count[0], count[1] + 1))
        for rate in rng.uniform(mbps[0], mbps[1], size=n):
            out.append((i, j, k, l, min(max(float(rate), mbps[0]), mbps[1])))
    return out


def _axil_ladder(m: int, rng: np.random.Generator) -> np.ndarray:
    while True:
        draws = 1.0 - rng.random(m)  # (0, 1]
        if len(np.unique(draws)) == m:
            return np.sort(draws)[::-1]


def app_ids_for(n: int) -> list[str]:
    width = max(3, len(str(n - 1)))
    return [f"app{i:0{width}d}" for i in range(n)]


def gen_instance(p: GenParams) -> Instance:
    rng = make_rng(p.seed)
    n = p.n_apps
    ids = app_ids_for(n)
    ecus = [f"ecu{e}" for e in range(p.n_ecus)]
    n_modes = rng.integers(p.modes[0], p.modes[1] + 1, size=n)
    app_edges = gen_app_graph(n, p.density, rng)
    mode_edges = gen_mode_edges(app_edges, n_modes, rng)
    flows = gen_flows(mode_edges, rng, p.flows_per_dep_edge, p.flow_mbps)

    deps: dict[tuple[int, int], list[ModeRef]] = {}
    for i, j, k, l in mode_edges:
        deps.setdefault((i, j), []).append(ModeRef(ids[k], l))
    mode_flows: dict[tuple[int, int], list[Flow]] = {}
    for f_no, (i, j, k, l, mbps) in enumerate(flows):
        mode_flows.setdefault((i, j), []).append(
            Flow(f"f{f_no:05d}", ModeRef(ids[i], j), ModeRef(ids[k], l), mbps))

    apps = []
    for i in range(n):
        m = int(n_modes[i])
        # nominal must need the most: running max from the most degraded level up
        cpu = np.maximum.accumulate(rng.uniform(*p.cpu_pct, size=m)[::-1])[::-1]
        mem = np.maximum.accumulate(rng.uniform(*p.mem_mb, size=m)[::-1])[::-1]
        axil = _axil_ladder(m, rng)
        host = ecus[int(rng.integers(p.n_ecus))]
        modes = tuple(
            ModeSpec(ids[i], j, float(axil[j - 1]), float(cpu[j - 1]), float(mem[j - 1]),
                     tuple(deps.get((i, j), ())), tuple(mode_flows.get((i, j), ())))
            for j in range(1, m + 1))
        apps.append(Application(ids[i], host, modes))

    topo = Topology.star(p.n_ecus, p.link_mbps, p.traffic_cpu_pct_per_mbps, ecus)
    meta = {"seed": p.seed, "params": p.to_dict()}
    return Instance.build(topo, apps, ecu_cpu=p.ecu_cpu, ecu_mem_mb=p.ecu_mem_mb, meta=meta)


def scenario_seed(seed: int) -> list[int]:
    """Stream used for the scenario belonging to an instance generated from ``seed``."""
    return [seed, 1]


def gen_scenario(inst: Instance, n_states: int, rng: RngLike = None,
                 duration_s: tuple[int, int] = (10, 60), p_include: float = 0.5,
                 seed: Optional[int] = None) -> Scenario:
    """Random dependency-closed app subsets with integer durations."""
    from .serialize import instance_hash

    if n_states < 1:
        raise ValueError("n_states must be >= 1")
    if seed is None:
        seed = int(inst.meta.get("seed", 0)) if rng is None else 0
    gen = make_rng(scenario_seed(seed) if rng is None else rng)
    ids = sorted(a.app_id for a in inst.apps)
    states = []
    for _ in range(n_states):
        drawn = [a for a, keep in zip(ids, gen.random(len(ids)) < p_include) if keep]
        dur = int(gen.integers(duration_s[0], duration_s[1] + 1))
        states.append(ScenarioState(tuple(dependency_closure(inst, drawn)), dur))
    return Scenario(seed, tuple(states), instance_hash(inst))
