"""Runtime mode selection: the greedy efficiency ladder and an exhaustive oracle.

The greedy starts with every app Off and repeatedly applies the most
efficient single-step upgrade. Each requested app offers one candidate, its
next rung on ``Off -> m -> m-1 -> ... -> 1``, together with the minimal set
of provider upgrades its new mode needs. Efficiency is the AXIL gain divided
by the resource cost, where the cost of a vector requirement ``d`` against
remaining capacity ``rem`` is ``sum(d[k] / rem[k] for d[k] > 0)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import kernels
from .errors import InvalidRequestError, SearchSpaceError
from .model import (
    FEASIBILITY_TOL, Assignment, Instance, assignment_usage, dependency_closure, total_axil,
)

EXACT_GUARD = 10**7


@dataclass(frozen=True)
class Candidate:
    """One applied greedy step: ``app_id`` moved to ``target_level`` plus its closure."""

    app_id: str
    target_level: int
    closure: tuple[tuple[str, int], ...]
    delta_axil: float
    delta_usage: np.ndarray = field(compare=False, repr=False)
    cost: float = 0.0
    efficiency: float = math.inf


@dataclass
class Solution:
    assignment: Assignment
    total_axil: float
    usage: np.ndarray
    solve_time: float
    iterations: int
    method: str = "greedy"
    requested: tuple[str, ...] = ()
    trace: tuple[Candidate, ...] = ()


def _check_request(inst: Instance, requested: Optional[Iterable[str]],
                   capacity) -> tuple[tuple[str, ...], np.ndarray]:
    if requested is None:
        req = tuple(sorted(a.app_id for a in inst.apps))
    else:
        req = tuple(sorted(set(requested)))
        unknown = [a for a in req if a not in inst.app_map]
        if unknown:
            raise InvalidRequestError(f"unknown apps requested: {unknown}")
    cap = inst.capacity_vector if capacity is None else np.array(capacity, dtype=np.float64)
    rmax = inst.max_capacity_vector
    if cap.shape != rmax.shape:
        raise InvalidRequestError(f"capacity has {cap.size} components, expected {rmax.size}")
    if np.any(~np.isfinite(cap)) or np.any(cap < 0):
        raise InvalidRequestError("capacity must be finite and non-negative")
    if np.any(cap > rmax + FEASIBILITY_TOL):
        raise InvalidRequestError("capacity exceeds max_capacity")
    return req, cap


def _finish(inst: Instance, levels, requested, elapsed, iterations, method, trace=()) -> Solution:
    a = inst.compiled.assignment(levels)
    return Solution(a, total_axil(inst, a), assignment_usage(inst, a), elapsed, iterations,
                    method, requested, tuple(trace))


def solve_greedy(inst: Instance, requested: Optional[Iterable[str]] = None, capacity=None,
                 closure: bool = True) -> Solution:
    """Select modes for ``requested`` apps (all apps when None) within ``capacity``.

    With ``closure=False`` a candidate whose dependencies are not already
    met is skipped instead of pulling its providers along.
    """
    t0 = time.perf_counter()
    req, cap = _check_request(inst, requested, capacity)
    c = inst.compiled
    mask = np.zeros(c.n_apps, dtype=np.uint8)
    for a in req:
        mask[c.pos[a]] = 1
    levels, raw = kernels.greedy(c.n_levels, c.mode_offset, c.axil, c.req, c.dep_ptr, c.dep_app,
                                 c.dep_level, c.topo_rank, mask, cap, closure, FEASIBILITY_TOL)
    elapsed = time.perf_counter() - t0
    return _finish(inst, levels, req, elapsed, len(raw), "greedy", _trace(c, raw))


def _trace(c, raw) -> list[Candidate]:
    levels = np.zeros(c.n_apps, dtype=np.int32)
    out = []
    for i, target, closure, dax, cost, eff in raw:
        delta = np.zeros(c.r)
        for a, l in closure:
            delta += c.req[c.mode_pos(a, l)]
            if levels[a]:
                delta -= c.req[c.mode_pos(a, int(levels[a]))]
            levels[a] = l
        out.append(Candidate(c.app_ids[i], int(target),
                             tuple((c.app_ids[a], int(l)) for a, l in closure),
                             float(dax), delta, float(cost), float(eff)))
    return out


def search_space(inst: Instance, apps: Iterable[str]) -> int:
    return math.prod(inst.app(a).n_modes + 1 for a in apps)


def solve_exact(inst: Instance, requested: Optional[Iterable[str]] = None, capacity=None,
                guard: int = EXACT_GUARD) -> Solution:
    """Best total AXIL over every level combination of the requested apps and their providers.

    A provider that was not requested may only run while some running app
    needs it from its active level or a more degraded one, since those
    levels' flows stay active.

    Among equally good assignments the one that is most capable in app_id
    order wins (levels compared nominal-first, Off last).
    """
    t0 = time.perf_counter()
    req, cap = _check_request(inst, requested, capacity)
    relevant = sorted(dependency_closure(inst, req))
    size = search_space(inst, relevant)
    if size > guard:
        raise SearchSpaceError(
            f"exhaustive search over {len(relevant)} apps needs {size} assignments "
            f"(guard {guard}); shrink the instance or the request")
    c = inst.compiled
    order = np.array([c.pos[a] for a in relevant], dtype=np.int32)
    mask = np.zeros(c.n_apps, dtype=np.uint8)
    for a in req:
        mask[c.pos[a]] = 1
    levels, _, nodes = kernels.exact(c.n_levels, c.mode_offset, c.axil, c.req, c.dep_ptr,
                                     c.dep_app, c.dep_level, order, cap, FEASIBILITY_TOL, mask)
    elapsed = time.perf_counter() - t0
    return _finish(inst, levels, req, elapsed, nodes, "exact")


def explain(solution: Solution, inst: Optional[Instance] = None) -> list[Candidate]:
    """Iteration-by-iteration upgrade log of a greedy solution."""
    return list(solution.trace)


def replay(steps: Iterable[Candidate]) -> Assignment:
    levels: dict[str, int] = {}
    for step in steps:
        levels.update(dict(step.closure))
    return Assignment(levels)


def format_explain(steps: Iterable[Candidate]) -> str:
    lines = []
    for n, s in enumerate(steps, 1):
        pulled = ", ".join(f"{a}@{l}" for a, l in s.closure[1:])
        extra = f" (+ {pulled})" if pulled else ""
        lines.append(f"{n:3d}. {s.app_id} -> {s.target_level}{extra}  "
                     f"dAXIL={s.delta_axil:.4f} cost={s.cost:.4g} eff={s.efficiency:.4g}")
    return "\n".join(lines)
