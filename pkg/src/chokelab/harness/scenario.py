"""Experiment descriptions and their JSON form."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ScenarioError
from ..simcore import DropOrder, RedParams
from ..traffic import UdpSchedule


@dataclass(frozen=True)
class TcpParams:
    """TCP population settings.

    Per-flow two-way base latency is drawn uniformly from
    ``base_rtt * [1 - rtt_spread, 1 + rtt_spread]``; start times uniformly
    from ``[0, start_spread]``.
    """

    base_rtt: float = 0.002
    rtt_spread: float = 0.1
    start_spread: float = 2.0
    initial_ssthresh: float = 64.0
    min_rto: float = 0.2

    def __post_init__(self):
        if self.base_rtt <= 0 or not 0 <= self.rtt_spread < 1:
            raise ScenarioError("base_rtt must be > 0 and rtt_spread in [0, 1)")
        if self.start_spread < 0 or self.initial_ssthresh < 1 or self.min_rto <= 0:
            raise ScenarioError("invalid TCP parameters")


@dataclass(frozen=True)
class Scenario:
    N: int = 100
    C: float = 2500.0
    capacity: int = 1000
    red: RedParams = field(default_factory=RedParams)
    drop_order: DropOrder = DropOrder.CHOKE_THEN_RED
    udp: UdpSchedule = field(default_factory=UdpSchedule)
    duration: float = 25.0
    warmup: float = 5.0
    window: float = 0.001
    replications: int = 1
    base_seed: int = 1
    tcp: TcpParams = field(default_factory=TcpParams)
    name: str = ""

    def __post_init__(self):
        if self.N < 0:
            raise ScenarioError("N must be >= 0")
        if self.C <= 0 or self.capacity < 1:
            raise ScenarioError("C and capacity must be positive")
        if not self.duration > self.warmup >= 0:
            raise ScenarioError("need duration > warmup >= 0")
        if self.window <= 0:
            raise ScenarioError("window must be positive")
        if self.replications < 1:
            raise ScenarioError("replications must be >= 1")
        object.__setattr__(self, "drop_order", DropOrder(self.drop_order))

    @property
    def n_windows(self) -> int:
        return int(round(self.duration / self.window))

    def with_(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        d["red"] = dataclasses.asdict(self.red)
        d["tcp"] = dataclasses.asdict(self.tcp)
        d["drop_order"] = self.drop_order.value
        d["udp"] = {"segments": [list(s) for s in self.udp.segments]}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if not isinstance(d, dict):
            raise ScenarioError("scenario must be a JSON object")
        _reject_unknown(d, {f.name for f in dataclasses.fields(cls)}, "scenario")
        kw = dict(d)
        try:
            if "red" in kw:
                _reject_unknown(kw["red"], {f.name for f in dataclasses.fields(RedParams)}, "red")
                kw["red"] = RedParams(**kw["red"])
            if "tcp" in kw:
                _reject_unknown(kw["tcp"], {f.name for f in dataclasses.fields(TcpParams)}, "tcp")
                kw["tcp"] = TcpParams(**kw["tcp"])
            if "udp" in kw:
                udp = kw["udp"]
                if isinstance(udp, dict):
                    _reject_unknown(udp, {"segments"}, "udp")
                    segs = udp.get("segments", [])
                else:
                    segs = udp
                kw["udp"] = UdpSchedule(tuple(tuple(s) for s in segs))
            if "drop_order" in kw:
                kw["drop_order"] = DropOrder(kw["drop_order"])
            return cls(**kw)
        except ScenarioError:
            raise
        except (TypeError, ValueError) as exc:
            raise ScenarioError(str(exc)) from exc


def _reject_unknown(d: dict, allowed: set, where: str) -> None:
    if not isinstance(d, dict):
        raise ScenarioError(f"{where} must be a JSON object")
    extra = set(d) - allowed
    if extra:
        raise ScenarioError(f"unknown key(s) in {where}: {sorted(extra)}")


def load_scenarios(path: str | Path) -> list[Scenario]:
    """Read one scenario object, or a list of them, from a JSON file."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: {exc}") from exc
    docs = doc if isinstance(doc, list) else [doc]
    return [Scenario.from_dict(d) for d in docs]


def dump_scenario(s: Scenario) -> str:
    return json.dumps(s.to_dict(), indent=2, sort_keys=True)
