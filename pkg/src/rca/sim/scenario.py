"""Simulation scenarios: households, items, and scripted behaviors.

Generator spec language: "toggle", "ramp(min,max,step)",
"randomwalk(min,max,stddev)", "counter". Behaviors are seeded so a
scenario replays to the same message sequence every time.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field

from ..domain import ItemKind, validate_value
from ..errors import RcaError


class BadScenario(RcaError):
    pass


@dataclass(frozen=True)
class ItemSpec:
    itemId: str
    kind: ItemKind
    initialValue: str


@dataclass(frozen=True)
class BehaviorSpec:
    itemId: str
    periodMs: int
    generator: str
    seed: int = 0


@dataclass(frozen=True)
class HomeSpec:
    homeId: str
    items: tuple[ItemSpec, ...]
    behaviors: tuple[BehaviorSpec, ...] = ()
    label: str = ""
    commandDelayMs: int = 0


@dataclass(frozen=True)
class SimScenario:
    homes: tuple[HomeSpec, ...]

    def to_json(self) -> dict:
        return {"homes": [
            {"homeId": h.homeId, "label": h.label,
             "commandDelayMs": h.commandDelayMs,
             "items": [{"itemId": i.itemId, "kind": i.kind.value,
                        "initialValue": i.initialValue} for i in h.items],
             "behaviors": [{"itemId": b.itemId, "periodMs": b.periodMs,
                            "generator": b.generator, "seed": b.seed}
                           for b in h.behaviors]}
            for h in self.homes]}


_GEN_RE = re.compile(r"^(toggle|counter|ramp\(([^)]*)\)|randomwalk\(([^)]*)\))$")


def _check_generator(spec: str):
    m = _GEN_RE.match(spec)
    if not m:
        raise BadScenario("unknown generator %r" % spec)
    args = m.group(2) or m.group(3)
    if args is not None:
        parts = args.split(",")
        if len(parts) != 3:
            raise BadScenario("generator %r needs 3 arguments" % spec)
        try:
            [float(p) for p in parts]
        except ValueError:
            raise BadScenario("non-numeric argument in %r" % spec)


def scenario_from_json(data: dict) -> SimScenario:
    try:
        homes = []
        seen_homes = set()
        for h in data["homes"]:
            home_id = h["homeId"]
            if home_id in seen_homes:
                raise BadScenario("duplicate homeId %r" % home_id)
            seen_homes.add(home_id)
            items = []
            item_ids = set()
            for i in h.get("items", []):
                kind = ItemKind(i["kind"])
                initial = str(i["initialValue"])
                if not validate_value(kind, initial):
                    raise BadScenario("initial value %r invalid for %s"
                                      % (initial, kind.value))
                if i["itemId"] in item_ids:
                    raise BadScenario("duplicate itemId %r" % i["itemId"])
                item_ids.add(i["itemId"])
                items.append(ItemSpec(itemId=i["itemId"], kind=kind,
                                      initialValue=initial))
            behaviors = []
            for b in h.get("behaviors", []):
                if b["itemId"] not in item_ids:
                    raise BadScenario("behavior for unknown item %r" % b["itemId"])
                period = int(b["periodMs"])
                if period <= 0:
                    raise BadScenario("periodMs must be positive")
                _check_generator(str(b["generator"]))
                behaviors.append(BehaviorSpec(itemId=b["itemId"], periodMs=period,
                                              generator=str(b["generator"]),
                                              seed=int(b.get("seed", 0))))
            homes.append(HomeSpec(homeId=home_id, items=tuple(items),
                                  behaviors=tuple(behaviors),
                                  label=h.get("label", ""),
                                  commandDelayMs=int(h.get("commandDelayMs", 0))))
        if not homes:
            raise BadScenario("scenario has no homes")
        return SimScenario(homes=tuple(homes))
    except BadScenario:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise BadScenario("malformed scenario: %s" % exc)


def load_scenario(path: str) -> SimScenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, ValueError) as exc:
        raise BadScenario("cannot read scenario %s: %s" % (path, exc))
    return scenario_from_json(data)


_KIND_CYCLE = [ItemKind.SWITCH, ItemKind.DIMMER, ItemKind.COLOR,
               ItemKind.TEMPERATURE, ItemKind.TEXT]

_KIND_DEFAULTS = {
    ItemKind.SWITCH: ("ON", "toggle"),
    ItemKind.DIMMER: ("0", "ramp(0,100,5)"),
    ItemKind.COLOR: ("(210.0,0.25,1.0)", "randomwalk(0,359,10)"),
    ItemKind.TEMPERATURE: ("21.0", "randomwalk(15,30,0.5)"),
    ItemKind.TEXT: ("t0", "counter"),
}


def _derive_seed(seed: int, home_id: str, item_id: str) -> int:
    # hash() is salted per process; derive stable per-item seeds instead.
    digest = hashlib.sha256(("%d:%s:%s" % (seed, home_id, item_id)).encode()).digest()
    return int.from_bytes(digest[:4], "big")


def generate_fleet(n_homes: int, items_per_home: int, seed: int,
                   period_ms: int = 2000) -> SimScenario:
    """Deterministic fleet: homeIds h0001.., item kinds cycling, behaviors
    seeded from (seed, homeId, itemId)."""
    if n_homes < 1 or items_per_home < 1:
        raise BadScenario("need at least one home and one item per home")
    width = max(4, len(str(n_homes)))
    homes = []
    for hi in range(1, n_homes + 1):
        home_id = "h%0*d" % (width, hi)
        items = []
        behaviors = []
        for ii in range(items_per_home):
            kind = _KIND_CYCLE[ii % len(_KIND_CYCLE)]
            initial, generator = _KIND_DEFAULTS[kind]
            item_id = "%s%d" % (kind.value.lower(), ii)
            items.append(ItemSpec(itemId=item_id, kind=kind, initialValue=initial))
            behaviors.append(BehaviorSpec(
                itemId=item_id, periodMs=period_ms, generator=generator,
                seed=_derive_seed(seed, home_id, item_id)))
        homes.append(HomeSpec(homeId=home_id, items=tuple(items),
                              behaviors=tuple(behaviors), label="Fleet %s" % home_id))
    return SimScenario(homes=tuple(homes))
