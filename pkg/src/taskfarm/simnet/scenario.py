"""Scenario description and its JSON file format.

A scenario file fully determines a simulation, seeds included::

    {
      "name": "crash-one",
      "m": 8, "n": 4,
      "image_count": 3, "image_size": 64, "image_seed": 7,
      "compute": {"base": 10, "multipliers": {"2": 3}, "jitter": 0},
      "latency": {"default": 1, "channels": {"worker->collector": 2}},
      "threshold": 3,
      "alarm_policy": "log",
      "straggler_policy": "discard",
      "worker_fn": "invert",
      "stop_at": null,
      "faults": [
        {"type": "crash", "worker": 1, "at": 25},
        {"type": "slowdown", "worker": 2, "factor": "5/2", "from": 0, "until": 90},
        {"type": "rejoin", "worker": 1, "at": 120}
      ],
      "seed": 42
    }

Only ``m``, ``n``, ``image_count`` and ``image_size`` are required.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Any, Optional, Union

from ..errors import FarmError

CHANNELS = (
    "farmer->dispatcher", "dispatcher->farmer",
    "dispatcher->worker", "worker->dispatcher",
    "worker->collector", "collector->dispatcher",
    "dispatcher->collector",
)
ALARM_POLICIES = ("log", "ignore", "halt")
STRAGGLER_POLICIES = ("discard", "error")
WORKER_FUNCTIONS = ("invert", "digest")


class ScenarioError(FarmError, ValueError):
    """Invalid scenario; ``where`` names the offending field or file position."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where
        self.message = message


@dataclass(frozen=True)
class Crash:
    worker: int
    at: int


@dataclass(frozen=True)
class Slowdown:
    worker: int
    factor: Fraction
    start: int = 0
    until: Optional[int] = None


@dataclass(frozen=True)
class Rejoin:
    worker: int
    at: int


FaultSpec = Union[Crash, Slowdown, Rejoin]


@dataclass(frozen=True)
class ComputeModel:
    base: int = 10
    multipliers: dict[int, Fraction] = field(default_factory=dict)
    jitter: int = 0

    def __hash__(self):
        return hash((self.base, tuple(sorted(self.multipliers.items())), self.jitter))


@dataclass(frozen=True)
class LatencyModel:
    default: int = 1
    channels: dict[str, int] = field(default_factory=dict)

    def __hash__(self):
        return hash((self.default, tuple(sorted(self.channels.items()))))

    def between(self, channel: str) -> int:
        return self.channels.get(channel, self.default)


@dataclass(frozen=True)
class Scenario:
    m: int
    n: int
    image_count: int
    image_size: int
    name: str = "scenario"
    image_seed: int = 0
    compute: ComputeModel = ComputeModel()
    latency: LatencyModel = LatencyModel()
    threshold: int = 3
    alarm_policy: str = "log"
    straggler_policy: str = "discard"
    worker_fn: str = "invert"
    stop_at: Optional[int] = None
    faults: tuple[FaultSpec, ...] = ()
    seed: int = 0
    max_events: int = 5_000_000

    def __post_init__(self):
        validate(self)

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["compute"]["multipliers"] = {str(j): str(f) for j, f in self.compute.multipliers.items()}
        d["faults"] = [_fault_to_dict(f) for f in self.faults]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _fault_to_dict(f: FaultSpec) -> dict[str, Any]:
    if isinstance(f, Crash):
        return {"type": "crash", "worker": f.worker, "at": f.at}
    if isinstance(f, Rejoin):
        return {"type": "rejoin", "worker": f.worker, "at": f.at}
    return {"type": "slowdown", "worker": f.worker, "factor": str(f.factor),
            "from": f.start, "until": f.until}


def validate(sc: Scenario) -> None:
    def need(cond, where, message):
        if not cond:
            raise ScenarioError(where, message)

    need(sc.m >= 1, "m", f"must be >= 1, got {sc.m}")
    need(sc.n >= 0, "n", f"must be >= 0, got {sc.n}")
    need(sc.n <= 8191, "n", "at most 8191 workers are addressable")
    need(sc.image_count >= 0, "image_count", "must be >= 0")
    need(sc.image_size >= sc.m, "image_size", f"must be >= m={sc.m}")
    need(sc.image_size % sc.m == 0, "image_size",
         f"{sc.image_size} is not divisible by m={sc.m}")
    need(sc.threshold >= 0, "threshold", "must be >= 0")
    need(sc.alarm_policy in ALARM_POLICIES, "alarm_policy",
         f"expected one of {', '.join(ALARM_POLICIES)}")
    need(sc.straggler_policy in STRAGGLER_POLICIES, "straggler_policy",
         f"expected one of {', '.join(STRAGGLER_POLICIES)}")
    need(sc.worker_fn in WORKER_FUNCTIONS, "worker_fn",
         f"expected one of {', '.join(WORKER_FUNCTIONS)}")
    need(sc.stop_at is None or sc.stop_at >= 0, "stop_at", "must be >= 0")
    need(sc.max_events > 0, "max_events", "must be positive")
    need(sc.compute.base >= 1, "compute.base", "must be >= 1")
    need(sc.compute.jitter >= 0, "compute.jitter", "must be >= 0")
    for j, mult in sc.compute.multipliers.items():
        need(1 <= j <= sc.n, f"compute.multipliers.{j}", f"no worker {j} (n={sc.n})")
        need(mult > 0, f"compute.multipliers.{j}", "must be positive")
    need(sc.latency.default >= 1, "latency.default", "must be >= 1")
    for name, ticks in sc.latency.channels.items():
        need(name in CHANNELS, f"latency.channels.{name}", "unknown channel")
        need(ticks >= 1, f"latency.channels.{name}", "must be >= 1")

    crashed: dict[int, Optional[int]] = {}
    timeline = sorted(
        (f for f in sc.faults if not isinstance(f, Slowdown)),
        key=lambda f: f.at)
    for i, f in enumerate(sc.faults):
        where = f"faults[{i}]"
        need(1 <= f.worker <= sc.n, f"{where}.worker", f"worker {f.worker} exceeds n={sc.n}")
        if isinstance(f, Slowdown):
            need(f.factor >= 1, f"{where}.factor", f"must be >= 1, got {f.factor}")
            need(f.start >= 0, f"{where}.from", "must be >= 0")
            need(f.until is None or f.until > f.start, f"{where}.until", "must be after 'from'")
        else:
            need(f.at >= 0, f"{where}.at", "must be >= 0")
    for f in timeline:
        where = f"faults[{sc.faults.index(f)}]"
        if isinstance(f, Crash):
            need(crashed.get(f.worker) is None, where, f"worker {f.worker} is already crashed")
            crashed[f.worker] = f.at
        else:
            at = crashed.get(f.worker)
            need(at is not None and f.at > at, where,
                 f"rejoin of worker {f.worker} needs an earlier crash")
            crashed[f.worker] = None


# -- loading ----------------------------------------------------------------

_TOP_KEYS = {
    "name", "m", "n", "image_count", "image_size", "image_seed", "compute", "latency",
    "threshold", "alarm_policy", "straggler_policy", "worker_fn", "stop_at", "faults",
    "seed", "max_events",
}


def _int(value, where, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(where, f"expected an integer, got {value!r}")
    return value


def _fraction(value, where):
    if isinstance(value, bool):
        raise ScenarioError(where, f"expected a number, got {value!r}")
    try:
        if isinstance(value, float):
            return Fraction(str(value))
        return Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ScenarioError(where, f"expected a number or 'p/q', got {value!r}") from None


def _mapping(value, where):
    if not isinstance(value, dict):
        raise ScenarioError(where, f"expected an object, got {type(value).__name__}")
    return value


def _reject_unknown(d, allowed, where):
    extra = sorted(set(d) - set(allowed))
    if extra:
        prefix = f"{where}." if where else ""
        raise ScenarioError(f"{prefix}{extra[0]}", "unknown field")


def _fault(d, where) -> FaultSpec:
    _mapping(d, where)
    kind = d.get("type")
    if kind == "crash":
        _reject_unknown(d, {"type", "worker", "at"}, where)
        return Crash(_int(d.get("worker"), f"{where}.worker"), _int(d.get("at"), f"{where}.at"))
    if kind == "rejoin":
        _reject_unknown(d, {"type", "worker", "at"}, where)
        return Rejoin(_int(d.get("worker"), f"{where}.worker"), _int(d.get("at"), f"{where}.at"))
    if kind == "slowdown":
        _reject_unknown(d, {"type", "worker", "factor", "from", "until"}, where)
        return Slowdown(
            _int(d.get("worker"), f"{where}.worker"),
            _fraction(d.get("factor"), f"{where}.factor"),
            _int(d.get("from", 0), f"{where}.from"),
            _int(d.get("until"), f"{where}.until", allow_none=True),
        )
    raise ScenarioError(f"{where}.type", f"expected crash, slowdown or rejoin, got {kind!r}")


def scenario_from_dict(d: dict[str, Any]) -> Scenario:
    _mapping(d, "<root>")
    _reject_unknown(d, _TOP_KEYS, "")
    for key in ("m", "n", "image_count", "image_size"):
        if key not in d:
            raise ScenarioError(key, "required field missing")
    kwargs: dict[str, Any] = {}
    for key in ("m", "n", "image_count", "image_size", "image_seed", "threshold",
                "seed", "max_events"):
        if key in d:
            kwargs[key] = _int(d[key], key)
    if "stop_at" in d:
        kwargs["stop_at"] = _int(d["stop_at"], "stop_at", allow_none=True)
    for key in ("name", "alarm_policy", "straggler_policy", "worker_fn"):
        if key in d:
            if not isinstance(d[key], str):
                raise ScenarioError(key, f"expected a string, got {d[key]!r}")
            kwargs[key] = d[key]
    if "compute" in d:
        c = _mapping(d["compute"], "compute")
        _reject_unknown(c, {"base", "multipliers", "jitter"}, "compute")
        mults = {}
        for j, v in _mapping(c.get("multipliers", {}), "compute.multipliers").items():
            where = f"compute.multipliers.{j}"
            try:
                jj = int(j)
            except ValueError:
                raise ScenarioError(where, "worker key must be an integer") from None
            mults[jj] = _fraction(v, where)
        kwargs["compute"] = ComputeModel(
            base=_int(c.get("base", 10), "compute.base"),
            multipliers=mults,
            jitter=_int(c.get("jitter", 0), "compute.jitter"),
        )
    if "latency" in d:
        lat = _mapping(d["latency"], "latency")
        _reject_unknown(lat, {"default", "channels"}, "latency")
        channels = {name: _int(v, f"latency.channels.{name}")
                    for name, v in _mapping(lat.get("channels", {}), "latency.channels").items()}
        kwargs["latency"] = LatencyModel(_int(lat.get("default", 1), "latency.default"), channels)
    if "faults" in d:
        if not isinstance(d["faults"], list):
            raise ScenarioError("faults", "expected a list")
        kwargs["faults"] = tuple(_fault(f, f"faults[{i}]") for i, f in enumerate(d["faults"]))
    return Scenario(**kwargs)


def parse_scenario(text: str) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno} column {exc.colno}", exc.msg) from None
    return scenario_from_dict(data)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
