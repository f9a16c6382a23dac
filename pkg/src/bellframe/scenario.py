"""JSON scenario files: validation, normalization and conversion to :class:`Scenario`.

Layout (SI units, unit-suffixed keys)::

    {
      "state":    {"kind": "singlet"} | {"kind": "raw", "amplitudes": [...]},
      "model":    {"kind": "standard_qm" | "preferred_frame" | "trigger_device_frame"
                           | "choice_device_frame" | "per_frame_state_vector"
                           | "lhv_deterministic_sign" | "lhv_detection_loophole", ...},
      "settings": {"a_rad": ..., "a_prime_rad": ..., "b_rad": ..., "b_prime_rad": ...},
      "geometry": {"separation_m": ..., "timing_jitter_s": ..., "alignment_uncertainty_m": ...,
                   "stations": {"A": {"choice":  {"velocity_mps": [vx, vy, vz], "time_s": t},
                                      "trigger": {"velocity_mps": [...], "time_s": t}},
                                "B": {...}}},
      "efficiency": {"A": ..., "B": ...},
      "trials": N,
      "seed": S
    }

Station A sits at ``x = -separation/2`` and B at ``x = +separation/2`` with
the source at the origin; ``time_s`` is the lab time of the event relative
to the nominal detection time.  Unknown keys are rejected.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

from .bell import SettingQuad
from .engine import Scenario
from .lhv import LhvKind, LhvModel
from .models import CollapseKind, CollapseModel, StationGeometry
from .qstate import make_state
from .spacetime import C, Frame, SpacetimeEvent

__all__ = [
    "ScenarioError",
    "ScenarioFile",
    "parse_scenario",
    "load_scenario_file",
    "bundled_scenarios",
    "bundled_path",
]

TOP_KEYS = ("state", "model", "settings", "geometry", "efficiency", "trials", "seed")
MODEL_KEYS = {
    "standard_qm": (),
    "preferred_frame": ("v_qi_c", "frame_velocity_mps"),
    "trigger_device_frame": (),
    "choice_device_frame": (),
    "per_frame_state_vector": ("moving_station",),
    "lhv_deterministic_sign": (),
    "lhv_detection_loophole": ("tau",),
}
SETTING_KEYS = ("a_rad", "a_prime_rad", "b_rad", "b_prime_rad")
GEOMETRY_KEYS = ("separation_m", "timing_jitter_s", "alignment_uncertainty_m", "stations")


class ScenarioError(ValueError):
    """Invalid scenario document; the message names the offending key."""


def _fail(path: str, msg: str):
    raise ScenarioError(f"{path}: {msg}")


def _check_keys(obj, allowed, path, required=()):
    if not isinstance(obj, dict):
        _fail(path, "expected an object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        _fail(path, f"unknown key(s) {', '.join(unknown)}")
    missing = [k for k in required if k not in obj]
    if missing:
        _fail(path, f"missing key(s) {', '.join(missing)}")


def _number(value, path, *, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        _fail(path, "must be finite")
    if positive and value <= 0:
        _fail(path, "must be positive")
    if nonneg and value < 0:
        _fail(path, "must be non-negative")
    return value


def _vector(value, path):
    if not isinstance(value, list) or len(value) != 3:
        _fail(path, "expected a 3-vector")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _int(value, path, lo, hi):
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, f"expected an integer, got {value!r}")
    if not lo <= value <= hi:
        _fail(path, f"must lie in [{lo}, {hi}]")
    return value


def _normalize_state(obj):
    _check_keys(obj, ("kind", "amplitudes"), "state", ("kind",))
    kind = obj["kind"]
    if kind in ("singlet", "phi_plus"):
        if "amplitudes" in obj:
            _fail("state.amplitudes", f"not used by kind {kind!r}")
        return {"kind": kind}
    if kind != "raw":
        _fail("state.kind", f"unknown state kind {kind!r}")
    amps = obj.get("amplitudes")
    if not isinstance(amps, list) or len(amps) != 4:
        _fail("state.amplitudes", "expected 4 amplitudes")
    out = []
    for i, a in enumerate(amps):
        p = f"state.amplitudes[{i}]"
        if isinstance(a, list):
            if len(a) != 2:
                _fail(p, "complex amplitudes are [re, im] pairs")
            out.append([_number(a[0], p), _number(a[1], p)])
        else:
            out.append(_number(a, p))
    return {"kind": "raw", "amplitudes": out}


def _normalize_model(obj):
    if not isinstance(obj, dict) or "kind" not in obj:
        _fail("model", "expected an object with a 'kind'")
    kind = obj["kind"]
    if kind not in MODEL_KEYS:
        _fail("model.kind", f"unknown model kind {kind!r}")
    _check_keys(obj, ("kind",) + MODEL_KEYS[kind], "model")
    out = {"kind": kind}
    if kind == "preferred_frame":
        if "v_qi_c" not in obj:
            _fail("model", "missing key v_qi_c")
        v = _number(obj["v_qi_c"], "model.v_qi_c")
        if v <= 1:
            _fail("model.v_qi_c", "must exceed 1")
        out["v_qi_c"] = v
        out["frame_velocity_mps"] = _vector(obj.get("frame_velocity_mps", [0, 0, 0]),
                                            "model.frame_velocity_mps")
    elif kind == "per_frame_state_vector" and "moving_station" in obj:
        if obj["moving_station"] not in ("A", "B"):
            _fail("model.moving_station", "must be 'A' or 'B'")
        out["moving_station"] = obj["moving_station"]
    elif kind == "lhv_detection_loophole":
        tau = _number(obj.get("tau", 0.0), "model.tau", nonneg=True)
        if tau > 1:
            _fail("model.tau", "must lie in [0, 1]")
        out["tau"] = tau
    return out


def _normalize_device(obj, path):
    obj = {} if obj is None else obj
    _check_keys(obj, ("velocity_mps", "time_s"), path)
    vel = _vector(obj.get("velocity_mps", [0, 0, 0]), f"{path}.velocity_mps")
    if math.hypot(*vel) >= C:
        _fail(f"{path}.velocity_mps", "speed must be below c")
    return {"velocity_mps": vel, "time_s": _number(obj.get("time_s", 0.0), f"{path}.time_s")}


def _normalize_geometry(obj):
    _check_keys(obj, GEOMETRY_KEYS, "geometry", ("separation_m",))
    out = {
        "separation_m": _number(obj["separation_m"], "geometry.separation_m", positive=True),
        "timing_jitter_s": _number(obj.get("timing_jitter_s", 0.0),
                                   "geometry.timing_jitter_s", nonneg=True),
        "alignment_uncertainty_m": _number(obj.get("alignment_uncertainty_m", 0.0),
                                           "geometry.alignment_uncertainty_m", nonneg=True),
    }
    stations = obj.get("stations", {})
    _check_keys(stations, ("A", "B"), "geometry.stations")
    out["stations"] = {}
    for name in ("A", "B"):
        st = stations.get(name, {})
        path = f"geometry.stations.{name}"
        _check_keys(st, ("choice", "trigger"), path)
        choice = _normalize_device(st.get("choice"), f"{path}.choice")
        trigger = _normalize_device(st.get("trigger"), f"{path}.trigger")
        if trigger["time_s"] < choice["time_s"]:
            _fail(path, "trigger event must not precede the choice event")
        out["stations"][name] = {"choice": choice, "trigger": trigger}
    return out


def _normalize(doc: Any) -> dict:
    _check_keys(doc, TOP_KEYS, "scenario", TOP_KEYS)
    settings = doc["settings"]
    _check_keys(settings, SETTING_KEYS, "settings", SETTING_KEYS)
    eff = doc["efficiency"]
    _check_keys(eff, ("A", "B"), "efficiency", ("A", "B"))
    efficiency = {}
    for k in ("A", "B"):
        e = _number(eff[k], f"efficiency.{k}")
        if not 0 < e <= 1:
            _fail(f"efficiency.{k}", "must lie in (0, 1]")
        efficiency[k] = e
    state = _normalize_state(doc["state"])
    try:
        _state_from(state)
    except ValueError as exc:
        _fail("state", str(exc))
    return {
        "state": state,
        "model": _normalize_model(doc["model"]),
        "settings": {k: _number(settings[k], f"settings.{k}") for k in SETTING_KEYS},
        "geometry": _normalize_geometry(doc["geometry"]),
        "efficiency": efficiency,
        "trials": _int(doc["trials"], "trials", 1, 10**12),
        "seed": _int(doc["seed"], "seed", 0, 2**64 - 1),
    }


def _state_from(state):
    if state["kind"] != "raw":
        return make_state(state["kind"])
    amps = [complex(a[0], a[1]) if isinstance(a, list) else a for a in state["amplitudes"]]
    return make_state("raw", amps)


def _model_from(model):
    kind = model["kind"]
    if kind == "lhv_deterministic_sign":
        return LhvModel(LhvKind.DETERMINISTIC_SIGN)
    if kind == "lhv_detection_loophole":
        return LhvModel(LhvKind.DETECTION_LOOPHOLE, model["tau"])
    if kind == "preferred_frame":
        return CollapseModel(CollapseKind.PREFERRED_FRAME,
                             Frame(tuple(model["frame_velocity_mps"])), model["v_qi_c"])
    return CollapseModel(CollapseKind(kind.upper()),
                         moving_station=model.get("moving_station"))


@dataclass(frozen=True)
class ScenarioFile:
    """A validated, normalized scenario document."""

    data: dict

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"

    def with_overrides(self, trials: int | None = None, seed: int | None = None) -> "ScenarioFile":
        data = copy.deepcopy(self.data)
        if trials is not None:
            data["trials"] = _int(trials, "trials", 1, 10**12)
        if seed is not None:
            data["seed"] = _int(seed, "seed", 0, 2**64 - 1)
        return ScenarioFile(data)

    def stations(self) -> tuple[StationGeometry, StationGeometry]:
        geo = self.data["geometry"]
        half = 0.5 * geo["separation_m"]
        align = geo["alignment_uncertainty_m"] / C
        out = []
        for name, x in (("A", -half), ("B", half)):
            st = geo["stations"][name]
            pos = (x, 0.0, 0.0)
            out.append(StationGeometry(
                choice_event=SpacetimeEvent(st["choice"]["time_s"], pos),
                trigger_event=SpacetimeEvent(st["trigger"]["time_s"], pos),
                choice_frame=Frame(tuple(st["choice"]["velocity_mps"])),
                trigger_frame=Frame(tuple(st["trigger"]["velocity_mps"])),
                alignment_uncertainty=align,
                timing_jitter=geo["timing_jitter_s"],
            ))
        return out[0], out[1]

    def build(self) -> Scenario:
        d = self.data
        s = d["settings"]
        station_a, station_b = self.stations()
        return Scenario(
            state=_state_from(d["state"]),
            model=_model_from(d["model"]),
            quad=SettingQuad(s["a_rad"], s["a_prime_rad"], s["b_rad"], s["b_prime_rad"]),
            station_a=station_a,
            station_b=station_b,
            efficiency=(d["efficiency"]["A"], d["efficiency"]["B"]),
            trials=d["trials"],
            seed=d["seed"],
        )


def parse_scenario(text: str) -> ScenarioFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return ScenarioFile(_normalize(doc))


def bundled_scenarios() -> list[str]:
    root = resources.files("bellframe") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_path(name: str):
    name = name[:-5] if name.endswith(".json") else name
    if name not in bundled_scenarios():
        raise FileNotFoundError(name)
    return resources.files("bellframe") / "scenarios" / f"{name}.json"


def load_scenario_file(path: str | Path) -> ScenarioFile:
    """Read a scenario from ``path``, falling back to a bundled scenario name."""
    p = Path(path)
    if p.is_file():
        text = p.read_text(encoding="utf-8")
    else:
        try:
            text = bundled_path(str(path)).read_text(encoding="utf-8")
        except FileNotFoundError:
            raise FileNotFoundError(f"scenario file not found: {path}") from None
    try:
        return parse_scenario(text)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from None
