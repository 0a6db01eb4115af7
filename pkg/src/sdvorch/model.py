"""Problem-domain types, instance validation and resource accounting.

Resources are laid out in one dense vector per instance::

    [cpu(e0), mem(e0), cpu(e1), mem(e1), ..., bw(link0), bw(link1), ...]

CPU is in percent of one ECU, memory in MB and bandwidth in Mbps. Links
follow the topology order (uplink then downlink for every ECU in a star).

Requirement vectors of a mode are cumulative towards the nominal mode: the
flow set of level ``j`` is every flow attached to levels ``j..m``, so the
nominal mode always needs at least as much as any degraded one.
"""

from __future__ import annotations

import graphlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple, Optional

import numpy as np

from .errors import OrchestrationError, UnknownModeError

UPLINK = "uplink"
DOWNLINK = "downlink"

DEFAULT_ECU_CPU = 100.0
DEFAULT_ECU_MEM_MB = 8000.0
DEFAULT_LINK_MBPS = 10.0
FEASIBILITY_TOL = 1e-9


class ModeRef(NamedTuple):
    app_id: str
    level: int


@dataclass(frozen=True)
class DirectedLink:
    id: str
    endpoint_ecu: str
    direction: str
    be_capacity: float


@dataclass(frozen=True)
class Topology:
    """ECUs attached to a single switch.

    ``traffic_cpu_pct_per_mbps`` is the CPU share (percent) an ECU spends
    per Mbps it sends or receives. It is 0 unless set explicitly.
    """

    ecu_ids: tuple[str, ...]
    links: tuple[DirectedLink, ...]
    traffic_cpu_pct_per_mbps: float = 0.0

    @classmethod
    def star(
        cls,
        n_ecus: int = 4,
        link_mbps: float = DEFAULT_LINK_MBPS,
        traffic_cpu_pct_per_mbps: float = 0.0,
        ecu_ids: Optional[Iterable[str]] = None,
    ) -> "Topology":
        ids = tuple(ecu_ids) if ecu_ids is not None else tuple(f"ecu{i}" for i in range(n_ecus))
        links = []
        for e in ids:
            links.append(DirectedLink(f"{e}-up", e, UPLINK, float(link_mbps)))
            links.append(DirectedLink(f"{e}-down", e, DOWNLINK, float(link_mbps)))
        return cls(ids, tuple(links), float(traffic_cpu_pct_per_mbps))

    def link_for(self, ecu: str, direction: str) -> int:
        for i, link in enumerate(self.links):
            if link.endpoint_ecu == ecu and link.direction == direction:
                return i
        raise KeyError(f"no {direction} for {ecu}")


class ResourceIndex:
    """Maps resource names to positions in a :data:`ResourceVector`."""

    def __init__(self, topology: Topology):
        self.ecu_ids = topology.ecu_ids
        self.link_ids = tuple(link.id for link in topology.links)
        self._ecu = {e: i for i, e in enumerate(self.ecu_ids)}
        self._link = {l: i for i, l in enumerate(self.link_ids)}
        self.n_ecus = len(self.ecu_ids)
        self.size = 2 * self.n_ecus + len(self.link_ids)

    def cpu(self, ecu: str) -> int:
        return 2 * self._ecu[ecu]

    def mem(self, ecu: str) -> int:
        return 2 * self._ecu[ecu] + 1

    def bw(self, link_id: str) -> int:
        return 2 * self.n_ecus + self._link[link_id]

    def bw_at(self, link_pos: int) -> int:
        return 2 * self.n_ecus + link_pos

    def names(self) -> list[str]:
        out = []
        for e in self.ecu_ids:
            out += [f"cpu:{e}", f"mem:{e}"]
        out += [f"bw:{l}" for l in self.link_ids]
        return out


# A ResourceVector is a float64 numpy array of length ResourceIndex.size.
ResourceVector = np.ndarray


@dataclass(frozen=True)
class Flow:
    flow_id: str
    src: ModeRef
    dst: ModeRef
    target_mbps: float


@dataclass(frozen=True)
class ModeSpec:
    app_id: str
    level: int
    axil: float
    cpu_pct: float
    mem_mb: float
    deps: tuple[ModeRef, ...] = ()
    flows: tuple[Flow, ...] = ()


@dataclass(frozen=True)
class Application:
    app_id: str
    host_ecu: str
    modes: tuple[ModeSpec, ...]

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def mode(self, level: int) -> ModeSpec:
        if not 1 <= level <= len(self.modes):
            raise UnknownModeError(f"{self.app_id} has no level {level}")
        return self.modes[level - 1]


@dataclass(frozen=True)
class Assignment:
    """Activation level per application; apps not listed are Off."""

    levels: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        active = {a: int(l) for a, l in sorted(self.levels.items()) if l is not None}
        object.__setattr__(self, "levels", active)

    def get(self, app_id: str) -> Optional[int]:
        return self.levels.get(app_id)

    def is_active(self, app_id: str) -> bool:
        return app_id in self.levels

    def __len__(self):
        return len(self.levels)

    def union(self, other: "Assignment") -> "Assignment":
        overlap = set(self.levels) & set(other.levels)
        if overlap:
            raise ValueError(f"assignments overlap on {sorted(overlap)}")
        return Assignment({**self.levels, **other.levels})


class CompiledInstance:
    """Flat array view of an instance, shared by solvers and the simulator.

    Apps are indexed in sorted ``app_id`` order. Mode ``(i, j)`` lives at
    flat position ``mode_offset[i] + j - 1``.
    """

    def __init__(self, inst: "Instance"):
        idx = inst.index
        apps = sorted(inst.apps, key=lambda a: a.app_id)
        self.app_ids = tuple(a.app_id for a in apps)
        self.pos = {a: i for i, a in enumerate(self.app_ids)}
        n = len(apps)
        self.n_apps = n
        self.r = idx.size
        self.n_levels = np.array([a.n_modes for a in apps], dtype=np.int32)
        self.mode_offset = np.zeros(n + 1, dtype=np.int32)
        self.mode_offset[1:] = np.cumsum(self.n_levels)
        n_modes = int(self.mode_offset[-1])
        ecu_pos = {e: i for i, e in enumerate(inst.topology.ecu_ids)}
        self.host = np.array([ecu_pos[a.host_ecu] for a in apps], dtype=np.int32)

        self.axil = np.zeros(n_modes)
        self.req = np.zeros((n_modes, self.r))
        dep_ptr = [0]
        dep_app: list[int] = []
        dep_level: list[int] = []
        for i, app in enumerate(apps):
            off = int(self.mode_offset[i])
            for mode in app.modes:
                self.axil[off + mode.level - 1] = mode.axil
                for d in mode.deps:
                    dep_app.append(self.pos[d.app_id])
                    dep_level.append(d.level)
                dep_ptr.append(len(dep_app))
            self.req[off:off + app.n_modes] = _cumulative_requirements(inst, app)
        self.dep_ptr = np.array(dep_ptr, dtype=np.int32)
        self.dep_app = np.array(dep_app, dtype=np.int32)
        self.dep_level = np.array(dep_level, dtype=np.int32)

        # dependents before providers
        graph = {i: set() for i in range(n)}
        for i in range(n):
            lo, hi = self.dep_ptr[self.mode_offset[i]], self.dep_ptr[self.mode_offset[i + 1]]
            graph[i].update(int(k) for k in self.dep_app[lo:hi])
        try:
            order = list(graphlib.TopologicalSorter(graph).static_order())
        except graphlib.CycleError as exc:
            raise OrchestrationError(f"app dependency graph has a cycle: {exc.args[1]}") from None
        self.topo_rank = np.empty(n, dtype=np.int32)
        for rank, i in enumerate(reversed(order)):
            self.topo_rank[i] = rank

        flows = []
        for i, app in enumerate(apps):
            for mode in app.modes:
                for f in mode.flows:
                    flows.append((i, mode.level, f))
        self.flow_ids = tuple(f.flow_id for _, _, f in flows)
        self.flow_src_app = np.array([i for i, _, _ in flows], dtype=np.int32)
        self.flow_level = np.array([lv for _, lv, _ in flows], dtype=np.int32)
        self.flow_dst_app = np.array([self.pos[f.dst.app_id] for _, _, f in flows], dtype=np.int32)
        self.flow_target = np.array([f.target_mbps for _, _, f in flows], dtype=np.float64)
        self.flow_src_ecu = self.host[self.flow_src_app] if flows else np.zeros(0, dtype=np.int32)
        self.flow_dst_ecu = self.host[self.flow_dst_app] if flows else np.zeros(0, dtype=np.int32)
        topo = inst.topology
        up = {ecu_pos[l.endpoint_ecu]: k for k, l in enumerate(topo.links) if l.direction == UPLINK}
        down = {ecu_pos[l.endpoint_ecu]: k for k, l in enumerate(topo.links) if l.direction == DOWNLINK}
        cross = self.flow_src_ecu != self.flow_dst_ecu
        self.flow_up = np.array(
            [up[s] if c else -1 for s, c in zip(self.flow_src_ecu, cross)], dtype=np.int32)
        self.flow_down = np.array(
            [down[d] if c else -1 for d, c in zip(self.flow_dst_ecu, cross)], dtype=np.int32)

    def mode_pos(self, i: int, level: int) -> int:
        return int(self.mode_offset[i]) + level - 1

    def levels_array(self, a: Assignment) -> np.ndarray:
        out = np.zeros(self.n_apps, dtype=np.int32)
        for app_id, level in a.levels.items():
            out[self.pos[app_id]] = level
        return out

    def assignment(self, levels: np.ndarray) -> Assignment:
        return Assignment({self.app_ids[i]: int(l) for i, l in enumerate(levels) if l > 0})

    def active_flows(self, levels: np.ndarray) -> np.ndarray:
        """Boolean mask of flows emitted under per-app ``levels``."""
        src_level = levels[self.flow_src_app]
        return (src_level > 0) & (src_level <= self.flow_level)


@dataclass(frozen=True)
class Instance:
    topology: Topology
    apps: tuple[Application, ...]
    capacity: tuple[float, ...]
    max_capacity: tuple[float, ...]
    meta: Mapping = field(default_factory=dict, compare=False)

    @classmethod
    def build(cls, topology: Topology, apps: Iterable[Application],
              capacity: Optional[Iterable[float]] = None,
              ecu_cpu: float = DEFAULT_ECU_CPU, ecu_mem_mb: float = DEFAULT_ECU_MEM_MB,
              meta: Optional[Mapping] = None) -> "Instance":
        """Instance whose max capacity defaults to the per-ECU capacities and link budgets."""
        rmax = default_capacity(topology, ecu_cpu, ecu_mem_mb)
        cap = tuple(float(x) for x in capacity) if capacity is not None else rmax
        return cls(topology, tuple(apps), cap, rmax, dict(meta or {}))

    @cached_property
    def index(self) -> ResourceIndex:
        return ResourceIndex(self.topology)

    @cached_property
    def app_map(self) -> dict[str, Application]:
        return {a.app_id: a for a in self.apps}

    @cached_property
    def compiled(self) -> CompiledInstance:
        return CompiledInstance(self)

    @property
    def capacity_vector(self) -> ResourceVector:
        return np.array(self.capacity, dtype=np.float64)

    @property
    def max_capacity_vector(self) -> ResourceVector:
        return np.array(self.max_capacity, dtype=np.float64)

    def app(self, app_id: str) -> Application:
        try:
            return self.app_map[app_id]
        except KeyError:
            raise UnknownModeError(f"unknown app {app_id!r}") from None

    def app_edges(self) -> set[tuple[str, str]]:
        """App-level dependency edges (depender, provider)."""
        return {(m.app_id, d.app_id) for a in self.apps for m in a.modes for d in m.deps}

    def with_capacity(self, capacity: Iterable[float]) -> "Instance":
        return Instance(self.topology, self.apps, tuple(float(x) for x in capacity),
                        self.max_capacity, self.meta)


def default_capacity(topology: Topology, ecu_cpu: float = DEFAULT_ECU_CPU,
                     ecu_mem_mb: float = DEFAULT_ECU_MEM_MB) -> tuple[float, ...]:
    out = []
    for _ in topology.ecu_ids:
        out += [float(ecu_cpu), float(ecu_mem_mb)]
    out += [float(l.be_capacity) for l in topology.links]
    return tuple(out)


def _flow_load(inst: Instance, app: Application, flow: Flow, vec: np.ndarray) -> None:
    idx = inst.index
    topo = inst.topology
    src_ecu = app.host_ecu
    dst_ecu = inst.app(flow.dst.app_id).host_ecu
    mbps = flow.target_mbps
    if src_ecu != dst_ecu:
        vec[idx.bw_at(topo.link_for(src_ecu, UPLINK))] += mbps
        vec[idx.bw_at(topo.link_for(dst_ecu, DOWNLINK))] += mbps
    k = topo.traffic_cpu_pct_per_mbps
    if k:
        vec[idx.cpu(src_ecu)] += k * mbps
        vec[idx.cpu(dst_ecu)] += k * mbps


def _cumulative_requirements(inst: Instance, app: Application) -> np.ndarray:
    """Rows ``0..m-1`` hold the requirement vectors of levels ``1..m``."""
    idx = inst.index
    out = np.zeros((app.n_modes, idx.size))
    acc = np.zeros(idx.size)
    for mode in reversed(app.modes):
        for flow in mode.flows:
            _flow_load(inst, app, flow, acc)
        row = acc.copy()
        row[idx.cpu(app.host_ecu)] += mode.cpu_pct
        row[idx.mem(app.host_ecu)] += mode.mem_mb
        out[mode.level - 1] = row
    return out


def mode_requirements(inst: Instance, app_id: str, level: int) -> ResourceVector:
    """Full resource requirement vector of ``app_id`` running at ``level``."""
    app = inst.app(app_id)
    app.mode(level)
    c = inst.compiled
    out = c.req[c.mode_pos(c.pos[app_id], level)].copy()
    out.flags.writeable = False
    return out


def assignment_usage(inst: Instance, a: Assignment) -> ResourceVector:
    c = inst.compiled
    usage = np.zeros(c.r)
    for app_id, level in a.levels.items():
        inst.app(app_id).mode(level)
        usage += c.req[c.mode_pos(c.pos[app_id], level)]
    return usage


def dependencies_satisfied(inst: Instance, a: Assignment) -> tuple[bool, list[str]]:
    """Check every active mode's own dependency list.

    A dependency on ``(k, l)`` is met when ``k`` runs at level ``l`` or at a
    more capable (lower) level.
    """
    problems = []
    for app_id, level in a.levels.items():
        for dep in inst.app(app_id).mode(level).deps:
            have = a.get(dep.app_id)
            if have is None:
                problems.append(f"{app_id}@{level} needs {dep.app_id}@{dep.level}, which is off")
            elif have > dep.level:
                problems.append(
                    f"{app_id}@{level} needs {dep.app_id}@<={dep.level}, runs at {have}")
    return not problems, problems


def total_axil(inst: Instance, a: Assignment) -> float:
    total = 0.0
    for app_id, level in a.levels.items():
        total += inst.app(app_id).mode(level).axil
    return total


def fits(usage: np.ndarray, capacity: np.ndarray, tol: float = FEASIBILITY_TOL) -> bool:
    return bool(np.all(usage <= capacity + tol))


# -- validation -----------------------------------------------------------------

class Violation(NamedTuple):
    kind: str
    detail: str

    def __str__(self):
        return f"{self.kind}: {self.detail}"


@dataclass
class ValidationReport:
    violations: list[Violation]

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def __bool__(self):
        return self.ok


def validate_instance(inst: Instance) -> ValidationReport:
    """Collect every violated structural invariant of ``inst``."""
    out: list[Violation] = []
    add = lambda kind, detail: out.append(Violation(kind, detail))  # noqa: E731

    topo = inst.topology
    ecus = set(topo.ecu_ids)
    if len(ecus) != len(topo.ecu_ids):
        add("topology", "duplicate ECU ids")
    if len(topo.links) != 2 * len(topo.ecu_ids):
        add("topology", f"{len(topo.links)} links for {len(topo.ecu_ids)} ECUs")
    for e in topo.ecu_ids:
        dirs = sorted(l.direction for l in topo.links if l.endpoint_ecu == e)
        if dirs != [DOWNLINK, UPLINK]:
            add("topology", f"{e} needs exactly one uplink and one downlink, has {dirs}")
    for l in topo.links:
        if l.endpoint_ecu not in ecus:
            add("topology", f"link {l.id} attached to unknown ECU {l.endpoint_ecu}")
        if not l.be_capacity > 0:
            add("topology", f"link {l.id} capacity {l.be_capacity} is not positive")
    if topo.traffic_cpu_pct_per_mbps < 0:
        add("topology", "negative traffic CPU cost")

    r = 2 * len(topo.ecu_ids) + len(topo.links)
    for name, vec in (("capacity", inst.capacity), ("max_capacity", inst.max_capacity)):
        if len(vec) != r:
            add("capacity", f"{name} has length {len(vec)}, expected {r}")
        elif any(x < 0 for x in vec):
            add("capacity", f"{name} has negative components")
    if len(inst.capacity) == len(inst.max_capacity):
        if any(c > m for c, m in zip(inst.capacity, inst.max_capacity)):
            add("capacity", "capacity exceeds max_capacity")

    ids = [a.app_id for a in inst.apps]
    if len(set(ids)) != len(ids):
        add("reference", "duplicate app ids")
    levels_of = {a.app_id: a.n_modes for a in inst.apps}
    refs_ok = True
    for app in inst.apps:
        if app.host_ecu not in ecus:
            add("reference", f"{app.app_id} hosted on unknown ECU {app.host_ecu}")
            refs_ok = False
        if app.n_modes < 1:
            add("modes", f"{app.app_id} has no modes")
            refs_ok = False
        if [m.level for m in app.modes] != list(range(1, app.n_modes + 1)):
            add("modes", f"{app.app_id} levels are not contiguous from 1")
            refs_ok = False
        for m in app.modes:
            if m.app_id != app.app_id:
                add("reference", f"mode {m.app_id}@{m.level} listed under {app.app_id}")
            if not m.axil > 0:
                add("axil", f"{app.app_id}@{m.level} axil {m.axil} is not positive")
            if m.cpu_pct < 0 or m.mem_mb < 0:
                add("requirements", f"{app.app_id}@{m.level} has negative requirements")
            for d in m.deps:
                if d.app_id == app.app_id:
                    add("reference", f"{app.app_id}@{m.level} depends on its own app")
                    refs_ok = False
                elif not 1 <= d.level <= levels_of.get(d.app_id, 0):
                    add("reference", f"{app.app_id}@{m.level} depends on missing {d.app_id}@{d.level}")
                    refs_ok = False
            for f in m.flows:
                if f.src != (app.app_id, m.level):
                    add("reference", f"flow {f.flow_id} source {f.src} is not its owning mode")
                if f.dst.app_id == app.app_id:
                    add("reference", f"flow {f.flow_id} stays within {app.app_id}")
                elif not 1 <= f.dst.level <= levels_of.get(f.dst.app_id, 0):
                    add("reference", f"flow {f.flow_id} targets missing {f.dst.app_id}@{f.dst.level}")
                    refs_ok = False
                if not f.target_mbps > 0:
                    add("flows", f"flow {f.flow_id} target {f.target_mbps} is not positive")
        for hi, lo in zip(app.modes, app.modes[1:]):
            if not hi.axil > lo.axil:
                add("axil", f"{app.app_id} axil not strictly decreasing at level {lo.level}")

    # mode-level and app-level graphs
    mode_graph = {(m.app_id, m.level): {tuple(d) for d in m.deps} for a in inst.apps for m in a.modes}
    try:
        graphlib.TopologicalSorter(mode_graph).prepare()
    except graphlib.CycleError as exc:
        add("mode-cycle", " -> ".join(f"{a}@{l}" for a, l in exc.args[1]))
    app_graph: dict[str, set[str]] = {a: set() for a in ids}
    for src, dst in inst.app_edges():
        app_graph.setdefault(src, set()).add(dst)
    try:
        graphlib.TopologicalSorter(app_graph).prepare()
    except graphlib.CycleError as exc:
        add("app-cycle", " -> ".join(exc.args[1]))

    pair_edges: dict[tuple[str, str], list[tuple[int, int]]] = {}
    for a in inst.apps:
        for m in a.modes:
            for d in m.deps:
                pair_edges.setdefault((a.app_id, d.app_id), []).append((m.level, d.level))
    for (i, k), edges in sorted(pair_edges.items()):
        for j1, l1 in edges:
            for j2, l2 in edges:
                if j1 < j2 and l1 > l2:
                    add("crossing", f"crossing mode edges {i}@{j1}->{k}@{l1} and {i}@{j2}->{k}@{l2}")

    if refs_ok and not any(v.kind in ("topology", "capacity") for v in out):
        for app in inst.apps:
            reqs = _cumulative_requirements(inst, app)
            for j in range(app.n_modes - 1):
                if np.any(reqs[j] < reqs[j + 1]):
                    add("requirements",
                        f"{app.app_id}@{j + 1} requires less than {app.app_id}@{j + 2}")
    return ValidationReport(out)


def dependency_closure(inst: Instance, apps) -> set[str]:
    """``apps`` plus every app reachable over app-level dependency edges."""
    provides: dict[str, set[str]] = {}
    for src, dst in inst.app_edges():
        provides.setdefault(src, set()).add(dst)
    out = set(apps)
    stack = list(out)
    while stack:
        for k in provides.get(stack.pop(), ()):
            if k not in out:
                out.add(k)
                stack.append(k)
    return out


# -- scenarios ------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioState:
    requested: tuple[str, ...]
    duration_s: int

    def __post_init__(self):
        object.__setattr__(self, "requested", tuple(sorted(self.requested)))


@dataclass(frozen=True)
class Scenario:
    """Ordered vehicle states; ``instance_hash`` ties it to one instance."""

    seed: int
    states: tuple[ScenarioState, ...]
    instance_hash: str = ""
