# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
# distutils: language = c++
"""Compiled kernels; operation-for-operation mirror of ``_pykernels``.

Floating-point sums follow the same sequential order as the Python
reference so both backends return identical bits. No fast-math.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY
from libcpp.vector cimport vector
from libcpp.queue cimport priority_queue

cnp.import_array()


def greedy(const int[::1] n_levels, const int[::1] mode_offset, const double[::1] axil,
           const double[:, ::1] req, const int[::1] dep_ptr, const int[::1] dep_app,
           const int[::1] dep_level, const int[::1] topo_rank, requested,
           const double[::1] capacity, bint use_closure=True, double tol=1e-9):
    cdef Py_ssize_t n = n_levels.shape[0]
    cdef Py_ssize_t r = capacity.shape[0]
    cdef int[::1] levels = np.zeros(n, dtype=np.int32)
    cdef unsigned char[::1] considered = np.ascontiguousarray(requested, dtype=np.uint8).copy()
    cdef double[::1] usage = np.zeros(r)
    cdef double[::1] remaining = np.zeros(r)
    cdef double[::1] dvec = np.zeros(r)
    cdef double[::1] best_dvec = np.zeros(r)
    cdef int[::1] need = np.zeros(n, dtype=np.int32)
    cdef int[::1] inv_rank = np.zeros(n, dtype=np.int32)
    cdef vector[int] members, order, best_order, best_levels
    cdef priority_queue[int] pq
    cdef Py_ssize_t i, k, p, row, old_row
    cdef int cur, target, a, l, rk, best_i, best_target, blocked, feasible
    cdef double dax, cost, eff, best_eff, best_dax, best_cost, d
    trace = []

    for i in range(n):
        inv_rank[topo_rank[i]] = <int>i

    while True:
        for k in range(r):
            remaining[k] = capacity[k] - usage[k]
        best_i = -1
        best_eff = 0.0
        best_dax = 0.0
        best_cost = 0.0
        best_target = 0
        for i in range(n):
            if not considered[i]:
                continue
            cur = levels[i]
            if cur == 1:
                continue
            target = n_levels[i] if cur == 0 else cur - 1

            # closure, dependents first
            members.clear()
            order.clear()
            while not pq.empty():
                pq.pop()
            need[i] = target
            members.push_back(<int>i)
            pq.push(-topo_rank[i])
            blocked = 0
            while not pq.empty():
                rk = -pq.top()
                pq.pop()
                a = inv_rank[rk]
                order.push_back(a)
                row = mode_offset[a] + need[a] - 1
                for p in range(dep_ptr[row], dep_ptr[row + 1]):
                    k = dep_app[p]
                    l = dep_level[p]
                    if need[k] != 0:
                        if l < need[k]:
                            need[k] = l
                        continue
                    if levels[k] != 0 and levels[k] <= l:
                        continue
                    if not use_closure:
                        blocked = 1
                        break
                    need[k] = l
                    members.push_back(<int>k)
                    pq.push(-topo_rank[k])
                if blocked:
                    break

            if not blocked:
                dax = 0.0
                for k in range(r):
                    dvec[k] = 0.0
                for p in range(<Py_ssize_t>order.size()):
                    a = order[p]
                    row = mode_offset[a] + need[a] - 1
                    if levels[a] == 0:
                        dax += axil[row] - 0.0
                        for k in range(r):
                            dvec[k] += req[row, k]
                    else:
                        old_row = mode_offset[a] + levels[a] - 1
                        dax += axil[row] - axil[old_row]
                        for k in range(r):
                            dvec[k] += req[row, k] - req[old_row, k]
                feasible = 1
                for k in range(r):
                    if not (usage[k] + dvec[k] <= capacity[k] + tol):
                        feasible = 0
                        break
                if feasible:
                    cost = 0.0
                    for k in range(r):
                        d = dvec[k]
                        if d > 0:
                            if remaining[k] > 0:
                                cost += d / remaining[k]
                            else:
                                cost = INFINITY
                    eff = INFINITY if cost == 0.0 else dax / cost
                    if best_i < 0 or eff > best_eff or (eff == best_eff and dax > best_dax):
                        best_i = <int>i
                        best_target = target
                        best_eff = eff
                        best_dax = dax
                        best_cost = cost
                        best_order.clear()
                        best_levels.clear()
                        for p in range(<Py_ssize_t>order.size()):
                            best_order.push_back(order[p])
                            best_levels.push_back(need[order[p]])
                        for k in range(r):
                            best_dvec[k] = dvec[k]

            for p in range(<Py_ssize_t>members.size()):
                need[members[p]] = 0

        if best_i < 0:
            break
        closure = []
        for p in range(<Py_ssize_t>best_order.size()):
            a = best_order[p]
            levels[a] = best_levels[p]
            considered[a] = 1
            closure.append((a, best_levels[p]))
        for k in range(r):
            usage[k] += best_dvec[k]
        trace.append((best_i, best_target, closure, best_dax, best_cost, best_eff))

    return np.asarray(levels), trace


cdef class _Exact:
    cdef const int[::1] n_levels
    cdef const int[::1] mode_offset
    cdef const double[::1] axil
    cdef const double[:, ::1] req
    cdef const double[::1] capacity
    cdef int[::1] order
    cdef int[::1] back_ptr, back_j, back_k, back_l
    cdef int[::1] in_ptr, in_b, in_j, in_l
    cdef int[::1] extra, want_ptr, want_b, want_j
    cdef double[::1] smax
    cdef double[:, ::1] usage
    cdef int[::1] levels
    cdef public object best_levels
    cdef public double best
    cdef public long nodes
    cdef double tol, obj_tol
    cdef Py_ssize_t p, r

    def __init__(self, n_levels, mode_offset, axil, req, capacity, order, back, incoming, smax,
                 extra, wanted, double tol, double obj_tol):
        self.n_levels = n_levels
        self.mode_offset = mode_offset
        self.axil = axil
        self.req = req
        self.capacity = capacity
        self.order = np.asarray(order, dtype=np.int32)
        self.p = len(order)
        self.r = capacity.shape[0]
        self.back_ptr, self.back_j, self.back_k, self.back_l = _csr(back, order, 3)
        self.in_ptr, self.in_b, self.in_j, self.in_l = _csr(incoming, order, 3)
        self.extra = np.asarray(extra, dtype=np.int32)
        self.want_ptr, self.want_b, self.want_j = _csr(wanted, extra, 2)
        self.smax = np.asarray(smax, dtype=np.float64)
        self.usage = np.zeros((self.p + 1, self.r))
        self.levels = np.zeros(len(n_levels), dtype=np.int32)
        self.best_levels = np.zeros(len(n_levels), dtype=np.int32)
        self.best = -1.0
        self.nodes = 0
        self.tol = tol
        self.obj_tol = obj_tol

    cdef void rec(self, Py_ssize_t t, double total):
        cdef Py_ssize_t q, k, row
        cdef int a, m, j, jj, ok
        cdef double nxt
        self.nodes += 1
        if t == self.p:
            for q in range(self.extra.shape[0]):
                a = self.extra[q]
                if self.levels[a] == 0:
                    continue
                ok = 0
                for k in range(self.want_ptr[q], self.want_ptr[q + 1]):
                    if 0 < self.levels[self.want_b[k]] <= self.want_j[k]:
                        ok = 1
                        break
                if not ok:
                    return
            if total > self.best + self.obj_tol:
                self.best = total
                self.best_levels = np.asarray(self.levels).copy()
            return
        if self.best >= 0 and total + self.smax[t] <= self.best + self.obj_tol:
            return
        a = self.order[t]
        m = self.n_levels[a]
        for jj in range(1, m + 2):
            j = 0 if jj == m + 1 else jj
            ok = 1
            for q in range(self.in_ptr[t], self.in_ptr[t + 1]):
                if self.levels[self.in_b[q]] == self.in_j[q] and (j == 0 or j > self.in_l[q]):
                    ok = 0
                    break
            if not ok:
                continue
            if j == 0:
                for k in range(self.r):
                    self.usage[t + 1, k] = self.usage[t, k]
                self.rec(t + 1, total)
                continue
            for q in range(self.back_ptr[t], self.back_ptr[t + 1]):
                if self.back_j[q] == j and (self.levels[self.back_k[q]] == 0
                                            or self.levels[self.back_k[q]] > self.back_l[q]):
                    ok = 0
                    break
            if not ok:
                continue
            row = self.mode_offset[a] + j - 1
            for k in range(self.r):
                nxt = self.usage[t, k] + self.req[row, k]
                if nxt > self.capacity[k] + self.tol:
                    ok = 0
                    break
                self.usage[t + 1, k] = nxt
            if not ok:
                continue
            self.levels[a] = j
            self.rec(t + 1, total + self.axil[row])
            self.levels[a] = 0

    def run(self):
        self.rec(0, 0.0)


def _csr(table, order, width):
    ptr = [0]
    cols = [[] for _ in range(width)]
    for a in order:
        for entry in table[a]:
            for c in range(width):
                cols[c].append(entry[c])
        ptr.append(len(cols[0]))
    return (np.asarray(ptr, dtype=np.int32),) + tuple(np.asarray(c, dtype=np.int32) for c in cols)


def exact(n_levels, mode_offset, axil, req, dep_ptr, dep_app, dep_level, order, capacity,
          double tol=1e-9, requested=None):
    order = [int(a) for a in order]
    p = len(order)
    pos = {a: t for t, a in enumerate(order)}
    back = {a: [] for a in order}
    incoming = {a: [] for a in order}
    wanted = {a: [] for a in order}
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
    extra = [] if requested is None else [a for a in order if not requested[a]]
    smax = [0.0] * (p + 1)
    for t in range(p - 1, -1, -1):
        smax[t] = smax[t + 1] + axil[int(mode_offset[order[t]])]
    obj_tol = tol * max(1.0, smax[0])
    search = _Exact(n_levels, mode_offset, axil, req, np.ascontiguousarray(capacity, dtype=np.float64),
                    order, back, incoming, smax, extra, wanted, tol, obj_tol)
    search.run()
    return search.best_levels, float(max(search.best, 0.0)), int(search.nodes)


def contention(const double[::1] target, const int[::1] src_ecu, const int[::1] up,
               const int[::1] down, const unsigned char[::1] active,
               const double[::1] cpu_demand, const double[::1] cpu_cap,
               const double[::1] link_cap, double tol=1e-9):
    cdef Py_ssize_t nf = target.shape[0]
    cdef Py_ssize_t ne = cpu_demand.shape[0]
    cdef Py_ssize_t nl = link_cap.shape[0]
    cdef Py_ssize_t e, f, k
    cdef double lf
    cdef double[::1] cpu_factor = np.ones(ne)
    cdef double[::1] offered = np.zeros(nf)
    cdef double[::1] load = np.zeros(nl)
    cdef double[::1] link_factor = np.ones(nl)
    cdef double[::1] observed = np.zeros(nf)
    for e in range(ne):
        if cpu_demand[e] > cpu_cap[e] + tol:
            cpu_factor[e] = cpu_cap[e] / cpu_demand[e]
    for f in range(nf):
        if active[f]:
            offered[f] = target[f] * cpu_factor[src_ecu[f]]
            if up[f] >= 0:
                load[up[f]] += offered[f]
                load[down[f]] += offered[f]
    for k in range(nl):
        if load[k] > link_cap[k] + tol:
            link_factor[k] = link_cap[k] / load[k]
    for f in range(nf):
        if active[f]:
            if up[f] >= 0:
                lf = link_factor[up[f]]
                if link_factor[down[f]] < lf:
                    lf = link_factor[down[f]]
                observed[f] = offered[f] * lf
            else:
                observed[f] = offered[f]
    return np.asarray(observed), np.asarray(load)
