import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import app, brute_force_best, build
from sdvorch.errors import InvalidRequestError, SearchSpaceError
from sdvorch.generator import GenParams, gen_instance
from sdvorch.model import Assignment, assignment_usage, dependencies_satisfied, fits, total_axil
from sdvorch.solver import explain, format_explain, replay, search_space, solve_exact, solve_greedy


def check_solution(inst, sol, capacity=None):
    cap = inst.capacity_vector if capacity is None else capacity
    assert np.allclose(sol.usage, assignment_usage(inst, sol.assignment))
    assert fits(sol.usage, cap)
    assert dependencies_satisfied(inst, sol.assignment)[0]
    assert sol.total_axil == pytest.approx(total_axil(inst, sol.assignment))


def test_empty_request(two_app):
    for solve in (solve_greedy, solve_exact):
        sol = solve(two_app, [])
        assert len(sol.assignment) == 0 and sol.total_axil == 0
    assert explain(solve_greedy(two_app, [])) == []


def test_worked_example_greedy(two_app):
    sol = solve_greedy(two_app, ["A", "B"])
    assert sol.assignment == Assignment({"A": 1, "B": 2})
    assert sol.total_axil == 6
    assert sol.usage[0] == 9
    steps = explain(sol)
    assert [(s.app_id, s.target_level) for s in steps] == [("A", 2), ("A", 1), ("B", 2)]
    assert [s.efficiency for s in steps] == pytest.approx([10.0, 6.0, 4.0 / 3.0])
    assert [s.delta_axil for s in steps] == [2.0, 3.0, 1.0]
    assert replay(steps) == sol.assignment
    assert "A -> 2" in format_explain(steps)


def test_worked_example_oracle(two_app):
    best, _ = brute_force_best(two_app, ["A", "B"])
    assert best == 6
    # the optimum is attained twice
    for levels in ({"A": 1, "B": 2}, {"A": 2, "B": 1}):
        a = Assignment(levels)
        assert total_axil(two_app, a) == 6 and fits(assignment_usage(two_app, a), two_app.capacity_vector)
    sol = solve_exact(two_app, ["A", "B"])
    assert sol.total_axil == 6
    assert sol.assignment == Assignment({"A": 1, "B": 2})


def test_closure_too_big_leaves_app_off():
    inst = build([
        app("A", "ecu0", (5.0, 3.0, 0.0, [("B", 1)])),
        app("B", "ecu0", (1.0, 8.0, 0.0)),
    ], ecu_cpu=10.0)
    sol = solve_greedy(inst, ["A", "B"])
    assert sol.assignment == Assignment({"B": 1})
    check_solution(inst, sol)


def test_closure_pulls_provider():
    inst = build([
        app("A", "ecu0", (5.0, 3.0, 0.0, [("B", 1)])),
        app("B", "ecu0", (1.0, 2.0, 0.0)),
    ], ecu_cpu=10.0)
    sol = solve_greedy(inst, ["A"])
    assert sol.assignment == Assignment({"A": 1, "B": 1})
    assert explain(sol)[0].closure == (("A", 1), ("B", 1))
    gated = solve_greedy(inst, ["A"], closure=False)
    assert len(gated.assignment) == 0


def test_gated_mode_waits_for_provider():
    inst = build([
        app("A", "ecu0", (5.0, 3.0, 0.0, [("B", 1)])),
        app("B", "ecu0", (1.0, 2.0, 0.0)),
    ], ecu_cpu=10.0)
    sol = solve_greedy(inst, ["A", "B"], closure=False)
    assert sol.assignment == Assignment({"A": 1, "B": 1})


def test_tie_goes_to_lower_app_id():
    inst = build([app(x, "ecu0", (1.0, 6.0, 0.0)) for x in ("B", "A")], ecu_cpu=10.0)
    sol = solve_greedy(inst, ["A", "B"])
    assert sol.assignment == Assignment({"A": 1})


def test_zero_cost_wins():
    inst = build([app("A", "ecu0", (0.5, 0.0, 0.0)), app("B", "ecu0", (9.0, 1.0, 0.0))])
    steps = explain(solve_greedy(inst))
    assert steps[0].app_id == "A" and steps[0].efficiency == float("inf")


def test_exhausted_component_blocks_positive_demand():
    inst = build([app("A", "ecu0", (1.0, 1.0, 0.0))])
    cap = inst.capacity_vector.copy()
    cap[0] = 0.0
    assert len(solve_greedy(inst, capacity=cap).assignment) == 0


def test_single_app_exact():
    inst = build([app("A", "ecu0", (1.0, 1.0, 0.0))])
    assert solve_exact(inst).assignment == Assignment({"A": 1})


def test_exact_guard():
    inst = gen_instance(GenParams.preset("XL", seed=1))
    assert search_space(inst, [a.app_id for a in inst.apps]) > 10**7
    with pytest.raises(SearchSpaceError):
        solve_exact(inst)


def test_exact_includes_providers_of_request():
    inst = build([
        app("A", "ecu0", (5.0, 3.0, 0.0, [("B", 1)])),
        app("B", "ecu0", (1.0, 2.0, 0.0)),
    ], ecu_cpu=10.0)
    assert solve_exact(inst, ["A"]).assignment == Assignment({"A": 1, "B": 1})


@pytest.mark.parametrize("req, cap", [
    (["nope"], None),
    (None, [1.0]),
    (None, "neg"),
    (None, "over"),
    (None, "nan"),
])
def test_invalid_requests(two_app, req, cap):
    if cap == "neg":
        cap = -two_app.capacity_vector
    elif cap == "over":
        cap = two_app.capacity_vector * 2
    elif cap == "nan":
        cap = two_app.capacity_vector * np.nan
    with pytest.raises(InvalidRequestError):
        solve_greedy(two_app, req, cap)


def _case(seed, preset="S"):
    rng = np.random.default_rng([seed, 99])
    inst = gen_instance(GenParams.preset(preset, seed=seed))
    ids = [a.app_id for a in inst.apps]
    req = [a for a in ids if rng.random() < 0.6]
    cap = inst.max_capacity_vector * rng.uniform(0.3, 1.0)
    return inst, req, cap


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10**6), st.sampled_from(["XS", "S", "M"]))
def test_greedy_properties(seed, preset):
    inst, req, cap = _case(seed, preset)
    sol = solve_greedy(inst, req, cap)
    check_solution(inst, sol, cap)
    assert sol.iterations <= sum(inst.app(a).n_modes + 1 for a in inst.app_map)
    # monotone progress
    levels = {}
    prev = 0.0
    for step in sol.trace:
        assert step.delta_axil >= 0
        levels.update(dict(step.closure))
        cur = total_axil(inst, Assignment(levels))
        assert cur >= prev - 1e-12
        prev = cur
    assert replay(sol.trace) == sol.assignment
    # determinism
    again = solve_greedy(inst, req, cap)
    assert again.assignment == sol.assignment and again.trace == sol.trace


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([0.25, 3.0, 1024.0]))
def test_choice_is_scale_invariant(seed, c):
    from sdvorch.model import Application, Instance, ModeSpec
    inst, req, cap = _case(seed)
    scaled = Instance(inst.topology, tuple(
        Application(a.app_id, a.host_ecu, tuple(
            ModeSpec(m.app_id, m.level, m.axil * c, m.cpu_pct, m.mem_mb, m.deps, m.flows)
            for m in a.modes)) for a in inst.apps), inst.capacity, inst.max_capacity)
    assert solve_greedy(scaled, req, cap).assignment == solve_greedy(inst, req, cap).assignment


def _small(seed):
    rng = np.random.default_rng([seed, 7])
    n = int(rng.integers(2, 9))
    p = GenParams(n_apps=n, m_max=3, density=float(rng.uniform(0, 0.2)),
                  cpu_pct=(0.0, 40.0), seed=seed)
    inst = gen_instance(p)
    cap = inst.max_capacity_vector * rng.uniform(0.3, 1.0)
    req = [a.app_id for a in inst.apps if rng.random() < 0.7]
    return inst, req, cap


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_exact_matches_brute_force(seed):
    inst, req, cap = _small(seed)
    if search_space(inst, [a.app_id for a in inst.apps]) > 20000:
        return
    best, _ = brute_force_best(inst, req, cap)
    sol = solve_exact(inst, req, cap)
    check_solution(inst, sol, cap)
    assert sol.total_axil == pytest.approx(best, abs=1e-9)
    assert solve_greedy(inst, req, cap).total_axil <= sol.total_axil + 1e-9


def test_exact_does_not_run_unneeded_provider():
    # B is only a provider of A; A cannot fit, so B must stay Off even though it would fit
    inst = build([
        app("A", "ecu0", (5.0, 9.0, 0.0, [("B", 1)])),
        app("B", "ecu0", (1.0, 2.0, 0.0)),
    ], ecu_cpu=10.0)
    assert len(solve_exact(inst, ["A"]).assignment) == 0
    assert len(solve_greedy(inst, ["A"]).assignment) == 0
    assert brute_force_best(inst, ["A"])[0] == 0


def test_provider_kept_after_dependent_upgrade():
    # A@2 needs B; A@1 does not, but A@1 still emits A@2's flows, so B keeps running
    inst = build([
        app("A", "ecu0", (3.0, 2.0, 0.0), (1.0, 1.0, 0.0, [("B", 1)])),
        app("B", "ecu0", (0.5, 1.0, 0.0)),
    ], ecu_cpu=10.0)
    g = solve_greedy(inst, ["A"])
    assert g.assignment == Assignment({"A": 1, "B": 1})
    assert solve_exact(inst, ["A"]).total_axil == g.total_axil == 3.5


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6))
def test_greedy_bounded_by_exact_under_tight_capacity(seed):
    rng = np.random.default_rng([seed, 3])
    inst = gen_instance(GenParams(n_apps=int(rng.integers(2, 8)), m_max=3, density=0.3, seed=seed))
    cap = inst.max_capacity_vector * rng.uniform(0.02, 0.2)
    req = [a.app_id for a in inst.apps if rng.random() < 0.5]
    g, x = solve_greedy(inst, req, cap), solve_exact(inst, req, cap)
    assert g.total_axil <= x.total_axil + 1e-9
    if search_space(inst, [a.app_id for a in inst.apps]) <= 5000:
        assert x.total_axil == pytest.approx(brute_force_best(inst, req, cap)[0], abs=1e-9)
