"""Health summaries, baseline-vs-optimized comparison and plot-ready series.

Quartiles use linear interpolation between closest ranks (numpy's default
``percentile`` method): for sorted samples ``x[0..n-1]`` the q-quantile sits
at fractional rank ``q * (n - 1)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ScenarioMismatchError
from .serialize import dumps, write_text
from .simulator import MetricsLog

SATURATION_PCT = 99.5


def quartiles(samples) -> Optional[tuple[float, float, float]]:
    """``(q1, median, q3)`` of the finite samples, or None when there are none."""
    x = np.asarray(samples, dtype=np.float64)
    x = x[np.isfinite(x)]
    if x.size == 0:
        return None
    q1, med, q3 = np.percentile(x, [25.0, 50.0, 75.0])
    return float(q1), float(med), float(q3)


@dataclass
class HealthSummary:
    median_pct: Optional[float]
    q1_pct: Optional[float]
    q3_pct: Optional[float]
    n_samples: int
    n_missing: int
    per_state: list[dict] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return self.n_samples == 0

    def to_dict(self) -> dict:
        return asdict(self)


def _summary(health: np.ndarray) -> tuple[Optional[float], Optional[float], Optional[float], int, int]:
    missing = int(np.count_nonzero(~np.isfinite(health)))
    q = quartiles(health)
    n = health.size - missing
    if q is None:
        return None, None, None, n, missing
    return q[1], q[0], q[2], n, missing


def summarize_health(log: MetricsLog) -> HealthSummary:
    """Quartiles over every per-flow per-tick health sample; gap samples are counted, not used."""
    health = log.flow_health
    med, q1, q3, n, missing = _summary(health)
    per_state = []
    for st in log.states:
        sel = log.flow_state == st.index
        s_med, s_q1, s_q3, s_n, s_missing = _summary(health[sel])
        per_state.append({"state": st.index, "median_pct": s_med, "q1_pct": s_q1,
                          "q3_pct": s_q3, "n_samples": s_n, "n_missing": s_missing})
    return HealthSummary(med, q1, q3, n, missing, per_state)


def saturation_ticks(log: MetricsLog, threshold_pct: float = SATURATION_PCT) -> int:
    """Ticks on which some ECU uses at least ``threshold_pct`` of its CPU."""
    if log.ecu_tick.size == 0:
        return 0
    pct = 100.0 * log.ecu_cpu / log.cpu_capacity[log.ecu_idx]
    return int(np.unique(log.ecu_tick[pct >= threshold_pct]).size)


def overload_ticks(log: MetricsLog, tol: float = 1e-9) -> int:
    """Ticks on which some ECU demands more CPU than it has."""
    if log.ecu_tick.size == 0:
        return 0
    over = log.ecu_cpu_demand > log.cpu_capacity[log.ecu_idx] + tol
    return int(np.unique(log.ecu_tick[over]).size)


@dataclass
class RunSide:
    policy: str
    health: HealthSummary
    saturation_ticks: int
    overload_ticks: int
    peak_cpu_pct: float
    mean_cpu_pct: float
    peak_mem_mb: float
    n_ticks: int
    container_time_s: float
    solve_time_s: float

    @property
    def transition_time_s(self) -> float:
        return self.container_time_s + self.solve_time_s

    def to_dict(self, include_timing: bool = False) -> dict:
        d = asdict(self)
        if not include_timing:
            d.pop("solve_time_s")
        else:
            d["transition_time_s"] = self.transition_time_s
        return d


def run_side(log: MetricsLog) -> RunSide:
    pct = (100.0 * log.ecu_cpu / log.cpu_capacity[log.ecu_idx]) if log.ecu_tick.size else np.zeros(1)
    return RunSide(
        policy=log.policy,
        health=summarize_health(log),
        saturation_ticks=saturation_ticks(log),
        overload_ticks=overload_ticks(log),
        peak_cpu_pct=float(pct.max()),
        mean_cpu_pct=float(pct.mean()),
        peak_mem_mb=float(log.ecu_mem.max()) if log.ecu_mem.size else 0.0,
        n_ticks=log.n_ticks,
        container_time_s=float(sum(s.container_time_s for s in log.states)),
        solve_time_s=float(sum(s.solve_time_s or 0.0 for s in log.states)),
    )


def _delta(a, b):
    return None if a is None or b is None else b - a


@dataclass
class RunComparison:
    baseline: RunSide
    optimized: RunSide
    baseline_log: MetricsLog = field(repr=False)
    optimized_log: MetricsLog = field(repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def deltas(self) -> dict:
        """Optimized minus baseline."""
        b, o = self.baseline, self.optimized
        return {
            "median_pct": _delta(b.health.median_pct, o.health.median_pct),
            "q1_pct": _delta(b.health.q1_pct, o.health.q1_pct),
            "q3_pct": _delta(b.health.q3_pct, o.health.q3_pct),
            "saturation_ticks": o.saturation_ticks - b.saturation_ticks,
            "peak_cpu_pct": o.peak_cpu_pct - b.peak_cpu_pct,
            "container_time_s": o.container_time_s - b.container_time_s,
            "transition_time_s": o.transition_time_s - b.transition_time_s,
        }

    def to_dict(self, include_timing: bool = False) -> dict:
        deltas = self.deltas
        if not include_timing:
            deltas.pop("transition_time_s")
        return {
            "meta": self.meta,
            "baseline": self.baseline.to_dict(include_timing),
            "optimized": self.optimized.to_dict(include_timing),
            "deltas": deltas,
        }


def compare_runs(baseline_log: MetricsLog, optimized_log: MetricsLog) -> RunComparison:
    """Side-by-side summary of two runs of the same instance, scenario and config."""
    for key in ("instance_hash", "scenario_hash", "config_hash"):
        a, b = baseline_log.meta.get(key), optimized_log.meta.get(key)
        if a != b:
            raise ScenarioMismatchError(f"runs differ in {key}: {a} vs {b}")
    m = baseline_log.meta
    meta = {k: m.get(k) for k in ("instance_hash", "scenario_hash", "config_hash",
                                   "instance_seed", "scenario_seed", "sim_config")}
    return RunComparison(run_side(baseline_log), run_side(optimized_log),
                         baseline_log, optimized_log, meta)


def format_comparison(cmp: RunComparison) -> str:
    def f(x, spec=".2f"):
        return "-" if x is None else format(x, spec)

    rows = [("", "baseline", "optimized", "delta")]
    b, o, d = cmp.baseline, cmp.optimized, cmp.deltas
    rows.append(("median health %", f(b.health.median_pct), f(o.health.median_pct), f(d["median_pct"])))
    rows.append(("Q1 health %", f(b.health.q1_pct), f(o.health.q1_pct), f(d["q1_pct"])))
    rows.append(("Q3 health %", f(b.health.q3_pct), f(o.health.q3_pct), f(d["q3_pct"])))
    rows.append(("samples", str(b.health.n_samples), str(o.health.n_samples), ""))
    rows.append(("missing samples", str(b.health.n_missing), str(o.health.n_missing), ""))
    rows.append(("saturated ticks", str(b.saturation_ticks), str(o.saturation_ticks),
                 str(d["saturation_ticks"])))
    rows.append(("peak cpu %", f(b.peak_cpu_pct), f(o.peak_cpu_pct), f(d["peak_cpu_pct"])))
    rows.append(("container time s", f(b.container_time_s, ".1f"), f(o.container_time_s, ".1f"),
                 f(d["container_time_s"], ".1f")))
    rows.append(("transition time s", f(b.transition_time_s, ".3f"), f(o.transition_time_s, ".3f"),
                 f(d["transition_time_s"], ".3f")))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    return "\n".join("  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths)))
                     for r in rows)


# -- plot series ----------------------------------------------------------------

HEALTH_BAND_COLUMNS = ("policy", "tick", "state", "n", "q1", "median", "q3")
ECU_USAGE_COLUMNS = ("policy", "tick", "ecu", "cpu", "cpu_demand", "mem")
MODE_CHOICE_COLUMNS = ("policy", "state", "start_tick", "gap_ticks", "end_tick", "app_id", "level")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "" if x != x else f"{x:.6f}"
    return str(x)


def _table(header: str, columns, rows) -> str:
    lines = [header, ",".join(columns)]
    lines.extend(",".join(_fmt(v) for v in r) for r in rows)
    return "\n".join(lines) + "\n"


def _health_rows(log: MetricsLog):
    health = log.flow_health
    if log.flow_tick.size == 0:
        return
    order = np.argsort(log.flow_tick, kind="stable")
    ticks = log.flow_tick[order]
    starts = np.flatnonzero(np.r_[True, ticks[1:] != ticks[:-1]])
    ends = np.r_[starts[1:], ticks.size]
    for a, b in zip(starts, ends):
        idx = order[a:b]
        q = quartiles(health[idx])
        n = int(np.count_nonzero(np.isfinite(health[idx])))
        q1, med, q3 = q if q is not None else (None, None, None)
        yield (log.policy, int(ticks[a]), int(log.flow_state[idx[0]]), n, q1, med, q3)


def _ecu_rows(log: MetricsLog):
    for j in range(log.ecu_tick.size):
        yield (log.policy, int(log.ecu_tick[j]), log.ecu_ids[int(log.ecu_idx[j])],
               float(log.ecu_cpu[j]), float(log.ecu_cpu_demand[j]), float(log.ecu_mem[j]))


def _mode_rows(log: MetricsLog):
    for st in log.states:
        for app, level in st.assignment.levels.items():
            yield (log.policy, st.index, st.start_tick, st.gap_ticks, st.end_tick, app, level)


def emit_plot_series(cmp: Optional[RunComparison], out_dir) -> dict[str, Path]:
    """Write ``health_band.csv``, ``ecu_usage.csv`` and ``mode_choices.csv`` under ``out_dir``.

    ``None`` writes the three files with headers only.
    """
    out = Path(out_dir)
    logs = [] if cmp is None else [cmp.baseline_log, cmp.optimized_log]
    meta = {} if cmp is None else cmp.meta
    header = (f"# instance={meta.get('instance_hash')} scenario={meta.get('scenario_hash')} "
              f"instance_seed={meta.get('instance_seed')} scenario_seed={meta.get('scenario_seed')} "
              f"config={meta.get('config_hash')}")
    paths = {
        "health_band": out / "health_band.csv",
        "ecu_usage": out / "ecu_usage.csv",
        "mode_choices": out / "mode_choices.csv",
    }
    write_text(paths["health_band"], _table(header, HEALTH_BAND_COLUMNS,
                                            [r for lg in logs for r in _health_rows(lg)]))
    write_text(paths["ecu_usage"], _table(header, ECU_USAGE_COLUMNS,
                                          [r for lg in logs for r in _ecu_rows(lg)]))
    write_text(paths["mode_choices"], _table(header, MODE_CHOICE_COLUMNS,
                                             [r for lg in logs for r in _mode_rows(lg)]))
    return paths


def save_comparison(cmp: RunComparison, path) -> Path:
    """Summary document without timings; timings go next to it as ``*.timing.json``."""
    path = Path(path)
    write_text(path, dumps(cmp.to_dict(include_timing=False)))
    timing = {"baseline": {"solve_time_s": cmp.baseline.solve_time_s,
                           "transition_time_s": cmp.baseline.transition_time_s},
              "optimized": {"solve_time_s": cmp.optimized.solve_time_s,
                            "transition_time_s": cmp.optimized.transition_time_s}}
    write_text(path.with_name(path.stem + ".timing.json"), dumps(timing))
    return path
