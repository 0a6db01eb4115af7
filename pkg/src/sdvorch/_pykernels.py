"""Pure-Python kernels. ``_ckernels.pyx`` mirrors these operation for operation.

Both backends must return bit-identical results, so every floating-point
sum here runs in a fixed sequential order (resource components left to
right, closure members in pop order, flows in index order). Keep the two
files in step when changing either.

Shared flat layout (see ``model.CompiledInstance``): app ``i`` level ``j`` is
mode row ``mode_offset[i] + j - 1`` of ``axil``/``req``; its dependencies are
``dep_app/dep_level[dep_ptr[row]:dep_ptr[row + 1]]``. A level of 0 means Off.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

INF = math.inf


def _closure(i, target, levels, mode_offset, dep_ptr, dep_app, dep_level, topo_rank,
             use_closure):
    """Minimal upgrade set that lets app ``i`` run at ``target``.

    Returns ``(order, need, touched)``; ``order`` is None when eligibility
    gating blocks the candidate. ``touched`` lists every app whose level the
    result depends on. Apps are expanded in topological rank order
    (dependents first) so each app is expanded once, at its final level.
    """
    need = {i: target}
    touched = {i}
    heap = [(int(topo_rank[i]), i)]
    order = []
    while heap:
        _, a = heapq.heappop(heap)
        order.append(a)
        row = int(mode_offset[a]) + need[a] - 1
        for p in range(int(dep_ptr[row]), int(dep_ptr[row + 1])):
            k = int(dep_app[p])
            l = int(dep_level[p])
            touched.add(k)
            if k in need:
                if l < need[k]:
                    need[k] = l
                continue
            cur = int(levels[k])
            if cur != 0 and cur <= l:
                continue
            if not use_closure:
                return None, None, touched
            need[k] = l
            heapq.heappush(heap, (int(topo_rank[k]), k))
    return order, need, touched


def greedy(n_levels, mode_offset, axil, req, dep_ptr, dep_app, dep_level, topo_rank,
           requested, capacity, use_closure=True, tol=1e-9):
    """Efficiency-driven upgrade ladder.

    Returns ``(levels, trace)``; every trace entry is
    ``(app, target, [(app, level), ...], delta_axil, cost, efficiency)``.
    """
    n = len(n_levels)
    r = len(capacity)
    capacity = np.asarray(capacity, dtype=np.float64)
    levels = np.zeros(n, dtype=np.int32)
    considered = np.asarray(requested, dtype=bool).copy()
    usage = np.zeros(r)
    cache: dict[int, tuple] = {}
    trace = []

    while True:
        cands = []
        for i in np.flatnonzero(considered).tolist():
            cur = int(levels[i])
            if cur == 1:
                continue
            cand = cache.get(i)
            if cand is None:
                target = int(n_levels[i]) if cur == 0 else cur - 1
                order, need, touched = _closure(i, target, levels, mode_offset, dep_ptr, dep_app,
                                                dep_level, topo_rank, use_closure)
                if order is None:
                    cand = (i, target, None, touched, 0.0, None)
                else:
                    dax = 0.0
                    dvec = np.zeros(r)
                    for a in order:
                        new_row = int(mode_offset[a]) + need[a] - 1
                        old = int(levels[a])
                        if old == 0:
                            dax += axil[new_row] - 0.0
                            dvec += req[new_row]
                        else:
                            old_row = int(mode_offset[a]) + old - 1
                            dax += axil[new_row] - axil[old_row]
                            dvec += req[new_row] - req[old_row]
                    cand = (i, target, [(a, need[a]) for a in order], touched, float(dax), dvec)
                cache[i] = cand
            if cand[2] is not None:
                cands.append(cand)
        if not cands:
            break

        dmat = np.array([c[5] for c in cands])
        feasible = np.all(usage + dmat <= capacity + tol, axis=1)
        remaining = capacity - usage
        cost = np.zeros(len(cands))
        for k in range(r):
            col = dmat[:, k]
            pos = col > 0
            if not pos.any():
                continue
            if remaining[k] > 0:
                cost[pos] += col[pos] / remaining[k]
            else:
                cost[pos] = INF

        best = -1
        best_eff = best_dax = 0.0
        for c_idx in np.flatnonzero(feasible).tolist():
            dax = cands[c_idx][4]
            cst = cost[c_idx]
            eff = INF if cst == 0.0 else dax / cst
            if best < 0 or eff > best_eff or (eff == best_eff and dax > best_dax):
                best, best_eff, best_dax = c_idx, eff, dax
        if best < 0:
            break

        i, target, closure, _, dax, dvec = cands[best]
        changed = set()
        for a, l in closure:
            levels[a] = l
            considered[a] = True
            changed.add(a)
        usage += dvec
        trace.append((i, target, list(closure), dax, float(cost[best]), float(best_eff)))
        cache = {a: c for a, c in cache.items() if a not in changed and not (c[3] & changed)}

    return levels, trace


def exact(n_levels, mode_offset, axil, req, dep_ptr, dep_app, dep_level, order, capacity,
          tol=1e-9, requested=None):
    """Depth-first enumeration of every level combination of the apps in ``order``.

    Apps outside ``requested`` (default: all of ``order``) may only run
    while another running app needs them from its active level or any more
    degraded one (the same levels whose flows it still emits).
    Levels are tried 1..m then Off; a later leaf replaces the incumbent only
    when strictly better, so ties resolve to the lexicographically most
    capable assignment in ``order``. Returns ``(levels, best_total, nodes)``.
    """
    n = len(n_levels)
    r = len(capacity)
    capacity = np.asarray(capacity, dtype=np.float64)
    order = [int(a) for a in order]
    p = len(order)
    pos = {a: t for t, a in enumerate(order)}

    back = {a: [] for a in order}      # deps of (a, j) on apps placed earlier
    incoming = {a: [] for a in order}  # earlier (b, jb) that need a at <= l
    wanted = {a: [] for a in order}    # every (b, jb) that needs a
    for a in order:
        for j in range(1, int(n_levels[a]) + 1):
            row = int(mode_offset[a]) + j - 1
            for q in range(int(dep_ptr[row]), int(dep_ptr[row + 1])):
                k, l = int(dep_app[q]), int(dep_level[q])
                if k not in pos:
                    raise ValueError(f"dependency on app {k} outside the search set")
                wanted[k].append((a, j))
                if pos[k] < pos[a]:
                    back[a].append((j, k, l))
                else:
                    incoming[k].append((a, j, l))
    if requested is None:
        extra = []
    else:
        extra = [a for a in order if not requested[a]]

    smax = [0.0] * (p + 1)
    for t in range(p - 1, -1, -1):
        smax[t] = smax[t + 1] + axil[int(mode_offset[order[t]])]
    obj_tol = tol * max(1.0, smax[0])

    levels = np.zeros(n, dtype=np.int32)
    usage = np.zeros((p + 1, r))
    state = {"best": -1.0, "levels": levels.copy(), "nodes": 0}

    def rec(t, total):
        state["nodes"] += 1
        if t == p:
            for a in extra:
                if levels[a] and not any(0 < levels[b] <= jb for b, jb in wanted[a]):
                    return
            if total > state["best"] + obj_tol:
                state["best"] = total
                state["levels"] = levels.copy()
            return
        if state["best"] >= 0 and total + smax[t] <= state["best"] + obj_tol:
            return
        a = order[t]
        m = int(n_levels[a])
        for j in list(range(1, m + 1)) + [0]:
            ok = True
            for b, jb, l in incoming[a]:
                if levels[b] == jb and (j == 0 or j > l):
                    ok = False
                    break
            if not ok:
                continue
            if j == 0:
                usage[t + 1] = usage[t]
                rec(t + 1, total)
                continue
            for jj, k, l in back[a]:
                if jj == j and (levels[k] == 0 or levels[k] > l):
                    ok = False
                    break
            if not ok:
                continue
            row = int(mode_offset[a]) + j - 1
            nxt = usage[t] + req[row]
            if np.any(nxt > capacity + tol):
                continue
            usage[t + 1] = nxt
            levels[a] = j
            rec(t + 1, total + axil[row])
            levels[a] = 0

    rec(0, 0.0)
    return state["levels"], float(max(state["best"], 0.0)), state["nodes"]


def contention(target, src_ecu, up, down, active, cpu_demand, cpu_cap, link_cap, tol=1e-9):
    """Two-stage proportional throttling: CPU of the sender, then shared links.

    Returns ``(observed, link_load)`` where ``link_load`` is the offered
    traffic per link before link scaling. Inactive flows observe 0.
    """
    nf = len(target)
    cpu_factor = np.ones(len(cpu_demand))
    for e in range(len(cpu_demand)):
        if cpu_demand[e] > cpu_cap[e] + tol:
            cpu_factor[e] = cpu_cap[e] / cpu_demand[e]
    offered = np.zeros(nf)
    load = np.zeros(len(link_cap))
    for f in range(nf):
        if active[f]:
            offered[f] = target[f] * cpu_factor[src_ecu[f]]
            if up[f] >= 0:
                load[up[f]] += offered[f]
                load[down[f]] += offered[f]
    link_factor = np.ones(len(link_cap))
    for k in range(len(link_cap)):
        if load[k] > link_cap[k] + tol:
            link_factor[k] = link_cap[k] / load[k]
    observed = np.zeros(nf)
    for f in range(nf):
        if active[f]:
            if up[f] >= 0:
                observed[f] = offered[f] * min(link_factor[up[f]], link_factor[down[f]])
            else:
                observed[f] = offered[f]
    return observed, load
