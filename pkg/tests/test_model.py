import numpy as np
import pytest

from conftest import app, build
from sdvorch.errors import UnknownModeError
from sdvorch.model import (
    Application, Assignment, Instance, ModeRef, ModeSpec, Topology, assignment_usage,
    dependencies_satisfied, dependency_closure, mode_requirements, total_axil, validate_instance,
)


def test_star_topology_links():
    t = Topology.star(4)
    assert len(t.links) == 8
    assert [l.id for l in t.links[:2]] == ["ecu0-up", "ecu0-down"]
    assert all(l.be_capacity == 10 for l in t.links)


def test_resource_index_layout():
    inst = build([app("A", "ecu1", (1.0, 5.0, 100.0))], n_ecus=2)
    assert inst.index.names() == ["cpu:ecu0", "mem:ecu0", "cpu:ecu1", "mem:ecu1",
                                  "bw:ecu0-up", "bw:ecu0-down", "bw:ecu1-up", "bw:ecu1-down"]


def test_requirements_without_flows():
    inst = build([app("A", "ecu1", (1.0, 5.0, 100.0))], n_ecus=2)
    v = mode_requirements(inst, "A", 1)
    idx = inst.index
    assert v[idx.cpu("ecu1")] == 5 and v[idx.mem("ecu1")] == 100
    assert v.sum() == 105


def test_cross_ecu_flow_uses_uplink_and_downlink():
    inst = build([
        app("A", "ecu1", (1.0, 1.0, 0.0, [("B", 1)], [("f0", "B", 1, 2.0)])),
        app("B", "ecu2", (1.0, 1.0, 0.0)),
    ], n_ecus=3)
    v = mode_requirements(inst, "A", 1)
    idx = inst.index
    assert v[idx.bw("ecu1-up")] == 2 and v[idx.bw("ecu2-down")] == 2
    assert v[idx.size - 6:].sum() == 4


def test_same_ecu_flow_uses_no_links():
    inst = build([
        app("A", "ecu0", (1.0, 1.0, 0.0, [("B", 1)], [("f0", "B", 1, 2.0)])),
        app("B", "ecu0", (1.0, 1.0, 0.0)),
    ], n_ecus=2)
    v = mode_requirements(inst, "A", 1)
    assert v[4:].sum() == 0


def test_traffic_cpu_cost_charged_at_both_ends():
    inst = build([
        app("A", "ecu0", (1.0, 1.0, 0.0, [("B", 1)], [("f0", "B", 1, 2.0)])),
        app("B", "ecu1", (1.0, 1.0, 0.0)),
    ], n_ecus=2, traffic=0.5)
    v = mode_requirements(inst, "A", 1)
    assert v[inst.index.cpu("ecu0")] == 2.0  # own 1 + 0.5 * 2
    assert v[inst.index.cpu("ecu1")] == 1.0


def test_flow_sets_accumulate_toward_nominal():
    inst = build([
        app("A", "ecu0", (2.0, 1.0, 0.0, [("B", 1)], [("f0", "B", 1, 1.0)]),
            (1.0, 1.0, 0.0, [("B", 1)], [("f1", "B", 1, 0.5)])),
        app("B", "ecu1", (1.0, 1.0, 0.0)),
    ], n_ecus=2)
    up = inst.index.bw("ecu0-up")
    assert mode_requirements(inst, "A", 2)[up] == 0.5
    assert mode_requirements(inst, "A", 1)[up] == 1.5


def test_unknown_mode():
    inst = build([app("A", "ecu0", (1.0, 1.0, 0.0))])
    with pytest.raises(UnknownModeError):
        mode_requirements(inst, "A", 2)
    with pytest.raises(UnknownModeError):
        mode_requirements(inst, "Z", 1)


def test_usage_is_additive():
    inst = build([app("A", "ecu0", (1.0, 3.0, 10.0)), app("B", "ecu0", (1.0, 4.0, 20.0))])
    a, b = Assignment({"A": 1}), Assignment({"B": 1})
    assert np.array_equal(assignment_usage(inst, Assignment({})), np.zeros(inst.index.size))
    assert np.array_equal(assignment_usage(inst, a), mode_requirements(inst, "A", 1))
    both = assignment_usage(inst, a.union(b))
    assert both[0] == 7
    assert np.allclose(both, assignment_usage(inst, a) + assignment_usage(inst, b))


def test_union_rejects_overlap():
    with pytest.raises(ValueError):
        Assignment({"A": 1}).union(Assignment({"A": 2}))


@pytest.fixture
def dep_inst():
    return build([
        app("A", "ecu0", (2.0, 1.0, 0.0, [("B", 2)])),
        app("B", "ecu0", (2.0, 1.0, 0.0), (1.0, 1.0, 0.0)),
    ])


@pytest.mark.parametrize("levels, ok", [
    ({"A": 1, "B": 2}, True),
    ({"A": 1}, False),
    ({"A": 1, "B": 1}, True),  # more capable provider is fine
    ({"B": 2}, True),
])
def test_dependencies(dep_inst, levels, ok):
    good, problems = dependencies_satisfied(dep_inst, Assignment(levels))
    assert good is ok
    assert bool(problems) is not ok


def test_total_axil(dep_inst):
    assert total_axil(dep_inst, Assignment({"A": 1, "B": 2})) == 3.0


def test_well_formed_instance_validates(two_app):
    assert validate_instance(two_app).ok


def test_mode_cycle_detected():
    inst = build([
        app("A", "ecu0", (1.0, 1.0, 0.0, [("B", 1)])),
        app("B", "ecu0", (1.0, 1.0, 0.0, [("A", 1)])),
    ])
    kinds = validate_instance(inst).kinds()
    assert "mode-cycle" in kinds and "app-cycle" in kinds


def test_crossing_edges_detected():
    inst = build([
        app("A", "ecu0", (2.0, 1.0, 0.0, [("B", 2)]), (1.0, 1.0, 0.0, [("B", 1)])),
        app("B", "ecu0", (2.0, 1.0, 0.0), (1.0, 1.0, 0.0)),
    ])
    report = validate_instance(inst)
    assert report.kinds() == {"crossing"}
    assert "crossing mode edges" in report.violations[0].detail


def test_non_monotone_axil_and_requirements():
    inst = build([app("A", "ecu0", (1.0, 1.0, 0.0), (2.0, 3.0, 0.0))])
    assert validate_instance(inst).kinds() == {"axil", "requirements"}


def test_reference_errors():
    inst = build([
        app("A", "ecu9", (1.0, 1.0, 0.0, [("Z", 1)])),
        app("B", "ecu0", (1.0, 1.0, 0.0, [("B", 1)])),
    ])
    assert "reference" in validate_instance(inst).kinds()


def test_capacity_above_max_reported(two_app):
    bad = Instance(two_app.topology, two_app.apps,
                   tuple(x * 2 for x in two_app.capacity), two_app.max_capacity)
    assert "capacity" in validate_instance(bad).kinds()


def test_dependency_closure():
    inst = build([
        app("A", "ecu0", (1.0, 1.0, 0.0, [("B", 1)])),
        app("B", "ecu0", (1.0, 1.0, 0.0, [("C", 1)])),
        app("C", "ecu0", (1.0, 1.0, 0.0)),
        app("D", "ecu0", (1.0, 1.0, 0.0)),
    ])
    assert dependency_closure(inst, ["A"]) == {"A", "B", "C"}
    assert dependency_closure(inst, []) == set()


def test_more_capable_provider_never_breaks_a_dependent():
    # exhaustive over small generated instances: raising any app to a more
    # capable level keeps every satisfied assignment satisfied
    import itertools

    from sdvorch.generator import GenParams, gen_instance

    checked = 0
    for seed in range(40):
        inst = gen_instance(GenParams(n_apps=4, m_max=3, density=0.5, seed=seed))
        ids = sorted(inst.app_map)
        for combo in itertools.product(*[range(inst.app(a).n_modes + 1) for a in ids]):
            a = Assignment({x: l for x, l in zip(ids, combo) if l})
            if not dependencies_satisfied(inst, a)[0]:
                continue
            for x, l in a.levels.items():
                for better in range(1, l):
                    up = Assignment({**a.levels, x: better})
                    # only x's own list changed; the others still see x at a level <= before
                    others_ok = all(
                        not p.startswith(f"{y}@") for p in dependencies_satisfied(inst, up)[1]
                        for y in ids if y != x)
                    assert others_ok
                    checked += 1
    assert checked > 1000
