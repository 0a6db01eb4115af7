import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdvorch.errors import GenerationError
from sdvorch.generator import (
    PRESETS, GenParams, gen_app_graph, gen_flows, gen_instance, gen_mode_edges, gen_scenario,
    target_edge_count,
)
from sdvorch.model import dependency_closure, validate_instance
from sdvorch.serialize import dumps_instance, dumps_scenario


def _acyclic(n, edges):
    import graphlib
    g = {i: set() for i in range(n)}
    for a, b in edges:
        g[a].add(b)
    try:
        list(graphlib.TopologicalSorter(g).static_order())
        return True
    except graphlib.CycleError:
        return False


@pytest.mark.parametrize("n, d, expected", [(10, 0.05, 2), (2, 1.0, 1), (1, 0.7, 0),
                                            (30, 0.10, 43), (100, 0.20, 990)])
def test_edge_count_floor(n, d, expected):
    assert target_edge_count(n, d) == expected
    edges = gen_app_graph(n, d, 0)
    assert len(edges) == expected
    assert len(set(edges)) == len(edges)
    assert _acyclic(n, edges)


def test_full_density_three_apps():
    # a DAG on 3 nodes can hold all 3 unordered pairs
    assert len(gen_app_graph(3, 1.0, 0)) == 3


def test_graph_rejects_bad_args():
    with pytest.raises(ValueError):
        gen_app_graph(0, 0.1, 0)
    with pytest.raises(ValueError):
        gen_app_graph(5, 1.5, 0)


def test_mode_edges_single_modes():
    assert gen_mode_edges([(0, 1)], [1, 1], 0) == [(0, 1, 1, 1)]


def test_mode_edges_all_levels_pair_in_order():
    for seed in range(50):
        edges = gen_mode_edges([(0, 1)], [3, 3], seed)
        if len(edges) == 3:
            assert edges == [(0, 1, 1, 1), (0, 2, 1, 2), (0, 3, 1, 3)]
            return
    pytest.fail("never drew c=3 in 50 seeds")


@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_mode_edges_never_cross(mi, mk, seed):
    edges = gen_mode_edges([(0, 1)], [mi, mk], seed)
    assert 1 <= len(edges) <= min(mi, mk)
    for (_, j1, _, l1), (_, j2, _, l2) in zip(edges, edges[1:]):
        assert j1 < j2 and l1 < l2


def test_flows():
    assert gen_flows([], 0) == []
    flows = gen_flows([(0, 1, 1, 1)] * 200, 3)
    assert all(0.1 <= f[4] <= 2.0 for f in flows)
    assert 200 <= len(flows) <= 1000
    rates = np.array([f[4] for f in flows])
    assert 0.8 < rates.mean() < 1.3


@pytest.mark.parametrize("name", list(PRESETS))
def test_presets(name):
    n, m, d = PRESETS[name]
    inst = gen_instance(GenParams.preset(name, seed=3))
    assert len(inst.apps) == n
    assert all(1 <= a.n_modes <= m for a in inst.apps)
    assert len(inst.app_edges()) == target_edge_count(n, d)
    assert validate_instance(inst).ok


def test_preset_table():
    assert PRESETS == {"XS": (10, 1, 0.05), "S": (20, 3, 0.05), "M": (30, 4, 0.10),
                       "L": (50, 5, 0.15), "XL": (100, 5, 0.20)}


def test_ranges_respected():
    inst = gen_instance(GenParams.preset("L", seed=11))
    for a in inst.apps:
        axil = [m.axil for m in a.modes]
        assert all(0 < x <= 1 for x in axil)
        assert all(x > y for x, y in zip(axil, axil[1:]))
        for m in a.modes:
            assert 0 <= m.cpu_pct <= 10 and 0 <= m.mem_mb <= 200
            assert all(0.1 <= f.target_mbps <= 2.0 for f in m.flows)
    assert list(inst.capacity)[:2] == [100.0, 8000.0]
    assert list(inst.capacity)[-1] == 10.0


def test_deterministic():
    p = GenParams.preset("M", seed=7)
    a, b = gen_instance(p), gen_instance(p)
    assert dumps_instance(a) == dumps_instance(b)
    assert dumps_scenario(gen_scenario(a, 6)) == dumps_scenario(gen_scenario(b, 6))
    assert dumps_instance(gen_instance(GenParams.preset("M", seed=8))) != dumps_instance(a)


@pytest.mark.parametrize("kw", [{"density": 1.5}, {"n_apps": 0}, {"modes": (3, 2)},
                                {"flow_mbps": (0.0, 1.0)}, {"cpu_pct": (5.0, 1.0)}])
def test_bad_params(kw):
    with pytest.raises(ValueError):
        GenParams(**{"n_apps": 5, **kw})


def test_unknown_preset():
    with pytest.raises(ValueError):
        GenParams.preset("XXL")


def test_validate_accepts_generator_output_over_many_seeds():
    # small instances keep this fast; structure checks do not depend on size
    for seed in range(1000):
        p = GenParams(n_apps=8, m_max=4, density=0.3, seed=seed)
        assert validate_instance(gen_instance(p)).ok, seed


def test_scenario_states_are_closed():
    inst = gen_instance(GenParams.preset("M", seed=5))
    sc = gen_scenario(inst, 6)
    assert len(sc.states) == 6
    for s in sc.states:
        assert set(s.requested) == dependency_closure(inst, s.requested)
        assert 10 <= s.duration_s <= 60
        assert list(s.requested) == sorted(s.requested)


def test_scenario_closure_pulls_provider():
    inst = gen_instance(GenParams(n_apps=2, m_max=1, density=1.0, seed=0))
    (src, dst), = inst.app_edges()
    sc = gen_scenario(inst, 40, p_include=0.5)
    for s in sc.states:
        if src in s.requested:
            assert dst in s.requested
    assert any(len(s.requested) == 0 for s in sc.states)


def test_generation_error_when_budget_runs_out(monkeypatch):
    import sdvorch.generator as g
    monkeypatch.setattr(g, "_reaches", lambda adj, a, b: True)  # every edge closes a cycle
    with pytest.raises(GenerationError):
        g.gen_app_graph(4, 0.5, 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.floats(0, 0.5), st.integers(0, 10**6))
def test_random_params_validate(n, d, seed):
    assert validate_instance(gen_instance(GenParams(n_apps=n, m_max=3, density=d, seed=seed))).ok
