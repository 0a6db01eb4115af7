"""Compiled vs pure-Python kernels on the same inputs.

    python benchmarks/bench_backends.py --repeats 5 --seed 1

Every timed call is also checked for identical output across backends.
"""

import argparse
import statistics
import time

import numpy as np

from sdvorch import kernels
from sdvorch.generator import GenParams, gen_instance
from sdvorch.model import FEASIBILITY_TOL


def _greedy_args(inst):
    c = inst.compiled
    mask = np.ones(c.n_apps, dtype=np.uint8)
    return (c.n_levels, c.mode_offset, c.axil, c.req, c.dep_ptr, c.dep_app, c.dep_level,
            c.topo_rank, mask, inst.capacity_vector, True, FEASIBILITY_TOL)


def _exact_args(inst):
    c = inst.compiled
    order = np.arange(c.n_apps, dtype=np.int32)
    return (c.n_levels, c.mode_offset, c.axil, c.req, c.dep_ptr, c.dep_app, c.dep_level,
            order, inst.capacity_vector, FEASIBILITY_TOL)


def _contention_args(inst):
    c = inst.compiled
    levels = np.ones(c.n_apps, dtype=np.int32)
    usage = c.req[c.mode_offset[:c.n_apps]].sum(axis=0)
    ne = inst.index.n_ecus
    cap = inst.capacity_vector
    return (c.flow_target, c.flow_src_ecu, c.flow_up, c.flow_down,
            c.active_flows(levels).astype(np.uint8), usage[0:2 * ne:2].copy(),
            cap[0:2 * ne:2].copy(), cap[2 * ne:].copy(), FEASIBILITY_TOL)


def _time(fn, args, repeats):
    out, times = None, []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def _same(a, b):
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    if isinstance(a, (tuple, list)):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    return a == b


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    backends = kernels.available()
    if "cython" not in backends:
        print("compiled extension not built; only the Python kernels are available")
    cases = [("greedy", p, GenParams.preset(p, seed=args.seed), _greedy_args)
             for p in ("XS", "S", "M", "L", "XL")]
    cases.append(("exact", "8 apps", GenParams(n_apps=8, m_max=3, density=0.2, seed=args.seed),
                  _exact_args))
    cases += [("contention", p, GenParams.preset(p, seed=args.seed), _contention_args)
              for p in ("M", "XL")]

    names = list(backends)
    print(f"{'kernel':<11} {'instance':<7} " + " ".join(f"{n + ' ms':>11}" for n in names)
          + f" {'speedup':>8} {'same':>5}")
    for kernel, label, params, make_args in cases:
        inst = gen_instance(params)
        a = make_args(inst)
        res = {n: _time(getattr(mod, kernel), a, args.repeats) for n, mod in backends.items()}
        outs = [r[1] for r in res.values()]
        same = all(_same(outs[0], o) for o in outs[1:])
        speed = (f"{res['python'][0] / res['cython'][0]:8.1f}x" if "cython" in res else f"{'-':>8}")
        print(f"{kernel:<11} {label:<7} " + " ".join(f"{1000 * res[n][0]:>11.3f}" for n in names)
              + f" {speed} {str(same):>5}")


if __name__ == "__main__":
    main()
