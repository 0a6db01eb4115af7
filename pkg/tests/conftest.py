import numpy as np
import pytest

from sdvorch.model import Application, Flow, Instance, ModeRef, ModeSpec, Topology


def app(app_id, host, *modes):
    """``modes`` are ``(axil, cpu, mem, deps, flows)`` tuples for levels 1..m.

    ``deps`` is a list of ``(app_id, level)``; ``flows`` is a list of
    ``(flow_id, dst_app, dst_level, mbps)``.
    """
    specs = []
    for j, m in enumerate(modes, 1):
        axil, cpu, mem = m[:3]
        deps = tuple(ModeRef(a, l) for a, l in (m[3] if len(m) > 3 else ()))
        flows = tuple(Flow(fid, ModeRef(app_id, j), ModeRef(d, dl), mbps)
                      for fid, d, dl, mbps in (m[4] if len(m) > 4 else ()))
        specs.append(ModeSpec(app_id, j, axil, cpu, mem, deps, flows))
    return Application(app_id, host, tuple(specs))


def build(apps, n_ecus=1, ecu_cpu=100.0, ecu_mem_mb=8000.0, link_mbps=10.0, traffic=0.0):
    topo = Topology.star(n_ecus, link_mbps, traffic)
    return Instance.build(topo, apps, ecu_cpu=ecu_cpu, ecu_mem_mb=ecu_mem_mb)


@pytest.fixture
def two_app():
    """One ECU with 10 CPU; A: (cpu 6, axil 5) / (cpu 2, axil 2); B: (cpu 5, axil 4) / (cpu 3, axil 1)."""
    return build([
        app("A", "ecu0", (5.0, 6.0, 0.0), (2.0, 2.0, 0.0)),
        app("B", "ecu0", (4.0, 5.0, 0.0), (1.0, 3.0, 0.0)),
    ], ecu_cpu=10.0)


def brute_force_best(inst, requested, capacity=None):
    """Best total AXIL by plain enumeration of every level combination (independent oracle)."""
    import itertools

    from sdvorch.model import (
        Assignment, assignment_usage, dependencies_satisfied, dependency_closure, fits, total_axil,
    )

    cap = inst.capacity_vector if capacity is None else np.asarray(capacity, dtype=float)
    requested = set(requested)
    apps = sorted(dependency_closure(inst, requested))
    best, best_a = 0.0, Assignment({})
    ranges = [range(inst.app(a).n_modes + 1) for a in apps]
    for combo in itertools.product(*ranges):
        a = Assignment({x: l for x, l in zip(apps, combo) if l})
        if not fits(assignment_usage(inst, a), cap):
            continue
        if not dependencies_satisfied(inst, a)[0]:
            continue
        needed = {d.app_id for x, l in a.levels.items()
                  for m in inst.app(x).modes[l - 1:] for d in m.deps}
        if any(x not in requested and x not in needed for x in a.levels):
            continue
        v = total_axil(inst, a)
        if v > best + 1e-9:
            best, best_a = v, a
    return best, best_a


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
