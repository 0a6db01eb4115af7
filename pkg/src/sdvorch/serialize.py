"""JSON documents for instances, manifests, scenarios and solutions.

All writers emit keys in a fixed order and floats with ``repr`` precision, so
``loads(dumps(x)) == x`` holds exactly and equal objects serialize to equal
bytes. Document layouts are described in the README.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np

from .model import (
    Application, Assignment, DirectedLink, Flow, Instance, ModeRef, ModeSpec,
    Scenario, ScenarioState, Topology,
)

INSTANCE_FORMAT = "sdvorch-instance/1"
MANIFEST_FORMAT = "sdvorch-manifest/1"
SCENARIO_FORMAT = "sdvorch-scenario/1"
SOLUTION_FORMAT = "sdvorch-solution/1"


def _plain(x: Any) -> Any:
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, Mapping):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def dumps(doc: Mapping) -> str:
    return json.dumps(_plain(doc), indent=1, ensure_ascii=True, allow_nan=False) + "\n"


def digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def config_hash(cfg: Mapping) -> str:
    return digest(json.dumps(_plain(cfg), sort_keys=True, separators=(",", ":")))


def write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# -- instance -------------------------------------------------------------------

def _mode_to_dict(m: ModeSpec) -> dict:
    return {
        "level": m.level,
        "axil": m.axil,
        "cpu_pct": m.cpu_pct,
        "mem_mb": m.mem_mb,
        "deps": [[d.app_id, d.level] for d in m.deps],
        "flows": [{"flow_id": f.flow_id, "dst": [f.dst.app_id, f.dst.level],
                   "target_mbps": f.target_mbps} for f in m.flows],
    }


def _app_to_dict(a: Application) -> dict:
    return {"app_id": a.app_id, "host_ecu": a.host_ecu, "modes": [_mode_to_dict(m) for m in a.modes]}


def instance_to_dict(inst: Instance) -> dict:
    topo = inst.topology
    return {
        "format": INSTANCE_FORMAT,
        "meta": dict(inst.meta),
        "topology": {
            "ecus": list(topo.ecu_ids),
            "links": [{"id": l.id, "ecu": l.endpoint_ecu, "direction": l.direction,
                       "be_capacity": l.be_capacity} for l in topo.links],
            "traffic_cpu_pct_per_mbps": topo.traffic_cpu_pct_per_mbps,
        },
        "resources": inst.index.names(),
        "capacity": list(inst.capacity),
        "max_capacity": list(inst.max_capacity),
        "apps": [_app_to_dict(a) for a in inst.apps],
    }


def _app_from_dict(d: Mapping) -> Application:
    app_id = d["app_id"]
    modes = []
    for m in d["modes"]:
        level = int(m["level"])
        flows = tuple(
            Flow(f["flow_id"], ModeRef(app_id, level), ModeRef(f["dst"][0], int(f["dst"][1])),
                 float(f["target_mbps"]))
            for f in m.get("flows", ()))
        modes.append(ModeSpec(app_id, level, float(m["axil"]), float(m["cpu_pct"]),
                              float(m["mem_mb"]),
                              tuple(ModeRef(a, int(l)) for a, l in m.get("deps", ())), flows))
    return Application(app_id, d["host_ecu"], tuple(modes))


def instance_from_dict(d: Mapping) -> Instance:
    if d.get("format") != INSTANCE_FORMAT:
        raise ValueError(f"not an instance document: format={d.get('format')!r}")
    t = d["topology"]
    topo = Topology(
        tuple(t["ecus"]),
        tuple(DirectedLink(l["id"], l["ecu"], l["direction"], float(l["be_capacity"]))
              for l in t["links"]),
        float(t.get("traffic_cpu_pct_per_mbps", 0.0)),
    )
    return Instance(
        topo,
        tuple(_app_from_dict(a) for a in d["apps"]),
        tuple(float(x) for x in d["capacity"]),
        tuple(float(x) for x in d["max_capacity"]),
        dict(d.get("meta", {})),
    )


def dumps_instance(inst: Instance) -> str:
    return dumps(instance_to_dict(inst))


def loads_instance(text: str) -> Instance:
    return instance_from_dict(json.loads(text))


def instance_hash(inst: Instance) -> str:
    return digest(dumps_instance(inst))


def save_instance(inst: Instance, path) -> None:
    write_text(path, dumps_instance(inst))


def load_instance(path) -> Instance:
    return loads_instance(Path(path).read_text())


def manifest(inst: Instance, app_id: str) -> dict:
    """Per-application view: what one container needs to run any of its modes."""
    app = inst.app(app_id)
    hosts = {a.app_id: a.host_ecu for a in inst.apps}
    doc = {"format": MANIFEST_FORMAT, "meta": dict(inst.meta), **_app_to_dict(app)}
    for m in doc["modes"]:
        for f in m["flows"]:
            f["dst_ecu"] = hosts[f["dst"][0]]
    return doc


# -- scenario -------------------------------------------------------------------

def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "format": SCENARIO_FORMAT,
        "seed": sc.seed,
        "instance_hash": sc.instance_hash,
        "states": [{"requested": list(s.requested), "duration_s": s.duration_s} for s in sc.states],
    }


def scenario_from_dict(d: Mapping) -> Scenario:
    if d.get("format") != SCENARIO_FORMAT:
        raise ValueError(f"not a scenario document: format={d.get('format')!r}")
    return Scenario(
        d["seed"],
        tuple(ScenarioState(tuple(s["requested"]), int(s["duration_s"])) for s in d["states"]),
        d.get("instance_hash", ""),
    )


def dumps_scenario(sc: Scenario) -> str:
    return dumps(scenario_to_dict(sc))


def scenario_hash(sc: Scenario) -> str:
    return digest(dumps_scenario(sc))


def save_scenario(sc: Scenario, path) -> None:
    write_text(path, dumps_scenario(sc))


def load_scenario(path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text()))


# -- assignment / solution ------------------------------------------------------

def assignment_to_dict(inst: Instance, a: Assignment) -> dict:
    return {app.app_id: a.get(app.app_id) for app in sorted(inst.apps, key=lambda x: x.app_id)}


def assignment_from_dict(d: Mapping) -> Assignment:
    return Assignment({k: v for k, v in d.items() if v is not None})


def solution_to_dict(inst: Instance, sol, include_timing: bool = False,
                     meta: Optional[Mapping] = None) -> dict:
    doc = {
        "format": SOLUTION_FORMAT,
        "meta": dict(meta or {}),
        "method": sol.method,
        "requested": list(sol.requested),
        "assignment": assignment_to_dict(inst, sol.assignment),
        "total_axil": sol.total_axil,
        "usage": dict(zip(inst.index.names(), sol.usage.tolist())),
        "iterations": sol.iterations,
    }
    if include_timing:
        doc["timing"] = {"solve_time_s": sol.solve_time}
    return doc


def dumps_solution(inst: Instance, sol, include_timing: bool = False,
                   meta: Optional[Mapping] = None) -> str:
    return dumps(solution_to_dict(inst, sol, include_timing, meta))
