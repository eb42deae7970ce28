"""Scenario config files (TOML).

Layout::

    [model]         kind = "iadm" | "idm", plus that model's parameters
    [platoon]       n_followers, initial_positions, initial_speeds, duration, dt,
                    length, sensor_range, comm_range
    [schedule]      optional initial_speed, then [[schedule.segments]] tables
                    with duration and either hold = <speed> or
                    ramp = {accel = .., target_speed = ..}
    [link]          delay_steps, drop_probability, seed
    [perturbation]  optional: start, delta_speed, hold

Position and speed lists start with the scripted vehicle (id 0).
"""

import hashlib
import re
import sys
from dataclasses import asdict
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from cavsim.errors import ConfigError
from cavsim.iadm import IadmParams
from cavsim.idm import IdmParams
from cavsim.perception import LinkConfig, SensingSpec
from cavsim.sim import Hold, LeadSchedule, Perturbation, Ramp, ScenarioConfig, Segment

BUNDLED = ("table1_iadm", "table1_idm", "stability_iadm")

_MODEL_KEYS = {
    "iadm": ("a_max", "b_max", "s0", "k", "v_freeflow"),
    "idm": ("a_max", "b_max", "s0", "T", "delta", "v_freeflow"),
}
_PLATOON_KEYS = ("n_followers", "initial_positions", "initial_speeds", "duration", "dt",
                 "length", "sensor_range", "comm_range")
_SECTIONS = ("model", "platoon", "schedule", "link", "perturbation")


class _Locator:
    """Maps ``section.key`` names back to source lines for error messages."""

    _header = re.compile(r"^\s*\[\[?\s*([A-Za-z0-9_.]+)\s*\]\]?")
    _key = re.compile(r"^\s*([A-Za-z0-9_]+)\s*=")

    def __init__(self, text: str):
        self.lines = {}
        section = ""
        for n, line in enumerate(text.splitlines(), 1):
            m = self._header.match(line)
            if m:
                section = m.group(1)
                self.lines.setdefault(section, n)
                continue
            m = self._key.match(line)
            if m:
                self.lines.setdefault(f"{section}.{m.group(1)}" if section else m.group(1), n)

    def line(self, dotted: str):
        while dotted:
            if dotted in self.lines:
                return self.lines[dotted]
            dotted = dotted.rpartition(".")[0]
        return None

    def guess(self, message: str):
        """Line of the first config key named at the start of ``message``."""
        word = re.match(r"[A-Za-z_][A-Za-z0-9_]*", message)
        if not word:
            return None
        for dotted, n in self.lines.items():
            if dotted.rpartition(".")[2] == word.group(0):
                return n
        return None


def _take(table: dict, key: str, where: str, kind=float, required=True, default=None):
    if key not in table:
        if required:
            raise ConfigError(f"missing key {where}.{key}", key=where)
        return default
    value = table[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}.{key} must be a number, got {value!r}", key=f"{where}.{key}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}.{key} must be an integer, got {value!r}", key=f"{where}.{key}")
        return value
    if kind is list:
        if not isinstance(value, list) or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
            raise ConfigError(f"{where}.{key} must be a list of numbers", key=f"{where}.{key}")
        return [float(x) for x in value]
    return value


def _unknown(table: dict, allowed, where: str):
    for key in table:
        if key not in allowed:
            raise ConfigError(f"unknown key {where}.{key}", key=f"{where}.{key}")


def _parse_segment(raw, i):
    where = f"schedule.segments.{i}"
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be a table", key="schedule")
    _unknown(raw, ("duration", "hold", "ramp"), where)
    duration = _take(raw, "duration", where)
    if ("hold" in raw) == ("ramp" in raw):
        raise ConfigError(f"{where} needs exactly one of hold or ramp", key=where)
    if "hold" in raw:
        return Segment(duration, Hold(_take(raw, "hold", where)))
    ramp = raw["ramp"]
    if not isinstance(ramp, dict):
        raise ConfigError(f"{where}.ramp must be a table with accel and target_speed", key=f"{where}.ramp")
    _unknown(ramp, ("accel", "target_speed"), f"{where}.ramp")
    return Segment(duration, Ramp(_take(ramp, "accel", f"{where}.ramp"),
                                  _take(ramp, "target_speed", f"{where}.ramp")))


def from_dict(doc: dict) -> ScenarioConfig:
    _unknown(doc, _SECTIONS, "<top>")
    for name in ("model", "platoon", "schedule", "link"):
        if not isinstance(doc.get(name), dict):
            raise ConfigError(f"missing section [{name}]", key=name)

    platoon = doc["platoon"]
    _unknown(platoon, _PLATOON_KEYS, "platoon")
    dt = _take(platoon, "dt", "platoon", default=0.1, required=False)

    model_doc = doc["model"]
    kind = model_doc.get("kind")
    if kind not in _MODEL_KEYS:
        raise ConfigError(f"model.kind must be 'iadm' or 'idm', got {kind!r}", key="model.kind")
    keys = _MODEL_KEYS[kind]
    _unknown(model_doc, ("kind", "dt") + keys, "model")
    if "dt" in model_doc and _take(model_doc, "dt", "model") != dt:
        raise ConfigError("model.dt must match platoon.dt", key="model.dt")
    params = {k: _take(model_doc, k, "model") for k in keys}
    model = (IadmParams if kind == "iadm" else IdmParams)(dt=dt, **params)

    sched = doc["schedule"]
    _unknown(sched, ("initial_speed", "segments"), "schedule")
    raw_segments = sched.get("segments", [])
    if not isinstance(raw_segments, list):
        raise ConfigError("schedule.segments must be an array of tables", key="schedule.segments")
    schedule = LeadSchedule(tuple(_parse_segment(s, i) for i, s in enumerate(raw_segments)),
                            _take(sched, "initial_speed", "schedule", required=False))

    link_doc = doc["link"]
    _unknown(link_doc, ("delay_steps", "drop_probability", "seed"), "link")
    link = LinkConfig(_take(link_doc, "delay_steps", "link", int),
                      _take(link_doc, "drop_probability", "link"),
                      _take(link_doc, "seed", "link", int, required=False, default=0))

    perturbation = None
    if "perturbation" in doc:
        p = doc["perturbation"]
        _unknown(p, ("start", "delta_speed", "hold"), "perturbation")
        perturbation = Perturbation(_take(p, "start", "perturbation"),
                                    _take(p, "delta_speed", "perturbation"),
                                    _take(p, "hold", "perturbation"))

    sensing = SensingSpec(_take(platoon, "sensor_range", "platoon", required=False, default=120.0),
                          _take(platoon, "comm_range", "platoon", required=False, default=300.0))
    return ScenarioConfig(
        model=model,
        schedule=schedule,
        initial_positions=tuple(_take(platoon, "initial_positions", "platoon", list)),
        initial_speeds=tuple(_take(platoon, "initial_speeds", "platoon", list)),
        n_followers=_take(platoon, "n_followers", "platoon", int),
        duration=_take(platoon, "duration", "platoon"),
        dt=dt,
        link=link,
        perturbation=perturbation,
        sensing=sensing,
        length=_take(platoon, "length", "platoon", required=False, default=5.0),
    )


def to_dict(config: ScenarioConfig) -> dict:
    model = asdict(config.model)
    kind = "iadm" if config.model_name == "IADM" else "idm"
    model_doc = {"kind": kind}
    model_doc.update({k: model[k] for k in _MODEL_KEYS[kind]})
    segments = []
    for seg in config.schedule.segments:
        if isinstance(seg.mode, Hold):
            segments.append({"duration": seg.duration, "hold": seg.mode.speed})
        else:
            segments.append({"duration": seg.duration,
                             "ramp": {"accel": seg.mode.accel, "target_speed": seg.mode.target_speed}})
    doc = {
        "model": model_doc,
        "platoon": {
            "n_followers": config.n_followers,
            "initial_positions": list(config.initial_positions),
            "initial_speeds": list(config.initial_speeds),
            "duration": config.duration,
            "dt": config.dt,
            "length": config.length,
            "sensor_range": config.sensing.sensor_range,
            "comm_range": config.sensing.comm_range,
        },
        "schedule": {"initial_speed": config.schedule.initial_speed, "segments": segments},
        "link": asdict(config.link),
    }
    if config.perturbation is not None:
        doc["perturbation"] = asdict(config.perturbation)
    return doc


def loads(text: str, path: str = "<config>") -> ScenarioConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"parse error: {exc}", line=int(m.group(1)) if m else None, path=path) from None
    try:
        return from_dict(doc)
    except (ConfigError, ValueError) as exc:
        key = getattr(exc, "key", None)
        message = exc.message if isinstance(exc, ConfigError) else str(exc)
        locator = _Locator(text)
        line = locator.line(key) if key else locator.guess(message)
        raise ConfigError(message, line=line, path=path, key=key) from None


def dumps(config: ScenarioConfig) -> str:
    return tomli_w.dumps(to_dict(config))


def resolve(name_or_path) -> Path:
    """Path to a config file; bare bundled names like ``table1_iadm`` are accepted."""
    path = Path(name_or_path)
    if path.exists():
        return path
    if str(name_or_path) in BUNDLED:
        return Path(str(resources.files("cavsim") / "configs" / f"{name_or_path}.toml"))
    return path


def load(name_or_path) -> ScenarioConfig:
    path = resolve(name_or_path)
    return loads(path.read_text(encoding="utf-8"), str(path))


def config_hash(config: ScenarioConfig) -> str:
    return hashlib.sha256(dumps(config).encode("utf-8")).hexdigest()
