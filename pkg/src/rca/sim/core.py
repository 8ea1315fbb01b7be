"""Pure simulation core: deterministic state machines per device item.

The core is transport-free: callers drive it with a clock (real or
simulated) and ship the emitted (topic, value, timestamp) telemetry
however they like. Identical (scenario, clock schedule) inputs produce
identical publish sequences.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from typing import Optional

from ..domain import Command, ItemKind, validate_value
from .scenario import BehaviorSpec, HomeSpec, SimScenario

_ARGS_RE = re.compile(r"\(([^)]*)\)")


def _format_value(kind: ItemKind, number: float) -> str:
    if kind is ItemKind.DIMMER:
        return str(int(round(number)))
    if kind is ItemKind.TEMPERATURE:
        return "%.1f" % number
    if kind is ItemKind.COLOR:
        return "(%.1f,0.25,1.0)" % (number % 360)
    return str(number)


class _Generator:
    """One scripted or stochastic value source."""

    def __init__(self, spec: BehaviorSpec, kind: ItemKind, initial: str):
        self.kind = kind
        self.spec = spec.generator
        self.rng = random.Random(spec.seed)
        self.count = 0
        if self.spec.startswith(("ramp", "randomwalk")):
            lo, hi, step = (float(x) for x in
                            _ARGS_RE.search(self.spec).group(1).split(","))
            self.lo, self.hi, self.step = lo, hi, step
            self.level = lo if self.spec.startswith("ramp") else (lo + hi) / 2
        self.last = initial

    def next_value(self) -> str:
        if self.spec == "toggle":
            self.last = "OFF" if self.last == "ON" else "ON"
            return self.last
        if self.spec == "counter":
            self.count += 1
            return "t%d" % self.count
        if self.spec.startswith("ramp"):
            self.level += self.step
            if self.level > self.hi:
                self.level = self.lo
            return _format_value(self.kind, self.level)
        # randomwalk
        self.level += self.rng.gauss(0, self.step)
        self.level = min(max(self.level, self.lo), self.hi)
        return _format_value(self.kind, self.level)


@dataclass
class Emission:
    homeId: str
    itemId: str
    value: str
    timestamp: int


class HomeSim:
    def __init__(self, spec: HomeSpec, start_ms: int):
        self.spec = spec
        self.home_id = spec.homeId
        self.kinds = {i.itemId: i.kind for i in spec.items}
        self.values = {i.itemId: i.initialValue for i in spec.items}
        self._gens: dict[str, _Generator] = {}
        self._due: dict[str, int] = {}
        self._period: dict[str, int] = {}
        for behavior in spec.behaviors:
            kind = self.kinds[behavior.itemId]
            self._gens[behavior.itemId] = _Generator(
                behavior, kind, self.values[behavior.itemId])
            self._due[behavior.itemId] = start_ms + behavior.periodMs
            self._period[behavior.itemId] = behavior.periodMs

    def initial_emissions(self, now_ms: int) -> list[Emission]:
        return [Emission(self.home_id, item.itemId, item.initialValue, now_ms)
                for item in self.spec.items]

    def next_due_ms(self) -> Optional[int]:
        return min(self._due.values()) if self._due else None

    def advance(self, now_ms: int) -> list[Emission]:
        """Emit every behavior tick due at or before now, in deterministic
        (due, itemId) order."""
        out = []
        while True:
            pending = sorted((due, item_id) for item_id, due in self._due.items()
                             if due <= now_ms)
            if not pending:
                return out
            for due, item_id in pending:
                value = self._gens[item_id].next_value()
                self.values[item_id] = value
                out.append(Emission(self.home_id, item_id, value, due))
                self._due[item_id] = due + self._period[item_id]

    def apply_command(self, command: Command, now_ms: int) -> Optional[Emission]:
        """Execute a received command: set the item value and emit the echo
        telemetry. Unknown items and invalid values are ignored."""
        if command.homeId != self.home_id:
            return None
        kind = self.kinds.get(command.itemId)
        if kind is None or not validate_value(kind, command.value):
            return None
        self.values[command.itemId] = command.value
        return Emission(self.home_id, command.itemId, command.value, now_ms)


class ScenarioSim:
    def __init__(self, scenario: SimScenario, start_ms: int = 0):
        self.homes = [HomeSim(spec, start_ms) for spec in scenario.homes]
        self.by_id = {h.home_id: h for h in self.homes}

    def initial_emissions(self, now_ms: int) -> list[Emission]:
        out = []
        for home in self.homes:
            out.extend(home.initial_emissions(now_ms))
        return out

    def advance(self, now_ms: int) -> list[Emission]:
        out = []
        for home in self.homes:
            out.extend(home.advance(now_ms))
        out.sort(key=lambda e: (e.timestamp, e.homeId, e.itemId))
        return out

    def next_due_ms(self) -> Optional[int]:
        dues = [d for d in (h.next_due_ms() for h in self.homes) if d is not None]
        return min(dues) if dues else None
