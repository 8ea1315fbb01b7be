"""Shared domain model: homes, device items, states, commands, access keys.

Pure data and pure functions; everything here is immutable after
construction and JSON-serializable with the exact field names used on the
wire by every service.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import MalformedIdentifier


class ItemKind(str, Enum):
    SWITCH = "Switch"
    DIMMER = "Dimmer"
    COLOR = "Color"
    TEMPERATURE = "Temperature"
    TEXT = "Text"


class AccessMode(str, Enum):
    READ = "Read"
    WRITE = "Write"


# homeId must embed as a single topic segment and a single URL path segment.
_HOME_ID_RE = re.compile(r"^[A-Za-z0-9_-]+$")
# itemId may contain '/' (it spans the remaining topic segments).
_ITEM_ID_RE = re.compile(r"^[A-Za-z0-9_/-]+$")

_INT_RE = re.compile(r"^[0-9]{1,3}$")
_NUM_RE = r"-?[0-9]+(?:\.[0-9]+)?"
_COLOR_RE = re.compile(r"^\((%s),(%s),(%s)\)$" % (_NUM_RE, _NUM_RE, _NUM_RE))
_TEMP_RE = re.compile(r"^%s$" % _NUM_RE)


@dataclass(frozen=True)
class DeviceState:
    """One telemetry sample: value at a point in time, with the ingestion
    sequence number that orders samples sharing a timestamp."""

    timestamp: int
    value: str
    seq: int = 0

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError("timestamp must be >= 0")

    def to_json(self) -> dict:
        return {"timestamp": self.timestamp, "value": self.value, "seq": self.seq}


@dataclass
class DeviceItem:
    itemId: str
    kind: ItemKind
    label: str = ""
    states: list[DeviceState] = field(default_factory=list)

    def __post_init__(self):
        if not _ITEM_ID_RE.match(self.itemId):
            raise MalformedIdentifier("bad itemId: %r" % self.itemId)


@dataclass
class SmartHome:
    homeId: str
    label: str = ""
    items: dict[str, DeviceItem] = field(default_factory=dict)

    def __post_init__(self):
        if not _HOME_ID_RE.match(self.homeId):
            raise MalformedIdentifier("bad homeId: %r" % self.homeId)


@dataclass(frozen=True)
class Command:
    """A descriptive instruction targeting one device item in one household."""

    homeId: str
    itemId: str
    value: str
    issuedBy: str
    issuedAt: int
    commandId: str
    label: Optional[str] = None

    def to_json(self) -> dict:
        out = {
            "homeId": self.homeId,
            "itemId": self.itemId,
            "value": self.value,
            "issuedBy": self.issuedBy,
            "issuedAt": self.issuedAt,
            "commandId": self.commandId,
        }
        if self.label is not None:
            out["label"] = self.label
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Command":
        return cls(
            homeId=str(data["homeId"]),
            itemId=str(data["itemId"]),
            value=str(data["value"]),
            issuedBy=str(data["issuedBy"]),
            issuedAt=int(data["issuedAt"]),
            commandId=str(data["commandId"]),
            label=data.get("label"),
        )


def current_state(item: DeviceItem) -> Optional[DeviceState]:
    """Latest state: highest timestamp, ties broken by ingestion seq
    (last received wins). None for an empty history."""
    if not item.states:
        return None
    return max(item.states, key=lambda s: (s.timestamp, s.seq))


def validate_value(kind: ItemKind, value: str) -> bool:
    """Kind-scoped value grammar. Total: returns False, never raises."""
    if not isinstance(value, str):
        return False
    if kind is ItemKind.SWITCH:
        return value in ("ON", "OFF")
    if kind is ItemKind.DIMMER:
        return bool(_INT_RE.match(value)) and 0 <= int(value) <= 100
    if kind is ItemKind.COLOR:
        m = _COLOR_RE.match(value)
        if not m:
            return False
        h, s, v = (float(g) for g in m.groups())
        return 0 <= h < 360 and 0 <= s <= 1 and 0 <= v <= 1
    if kind is ItemKind.TEMPERATURE:
        if not _TEMP_RE.match(value):
            return False
        return -50.0 <= float(value) <= 150.0
    if kind is ItemKind.TEXT:
        return len(value.encode("utf-8", errors="surrogateescape")) <= 1024
    return False


def access_item_for(home_id: str, item_id: Optional[str] = None) -> str:
    """Canonical access key: "home/{homeId}" or "home/{homeId}/item/{itemId}"."""
    if not home_id or not _HOME_ID_RE.match(home_id):
        raise MalformedIdentifier("bad homeId: %r" % home_id)
    if item_id is None:
        return "home/%s" % home_id
    if not _ITEM_ID_RE.match(item_id):
        raise MalformedIdentifier("bad itemId: %r" % item_id)
    return "home/%s/item/%s" % (home_id, item_id)


def parse_access_item(key: str) -> tuple[str, Optional[str]]:
    """Inverse of access_item_for; raises MalformedIdentifier otherwise."""
    if not key.startswith("home/"):
        raise MalformedIdentifier("bad access item: %r" % key)
    rest = key[len("home/"):]
    if "/" not in rest:
        access_item_for(rest)
        return rest, None
    home_id, sep, tail = rest.partition("/item/")
    if not sep or not tail:
        raise MalformedIdentifier("bad access item: %r" % key)
    access_item_for(home_id, tail)
    return home_id, tail


def home_key_of(key: str) -> str:
    """Enclosing home-level key of any well-formed access item key."""
    home_id, _ = parse_access_item(key)
    return "home/%s" % home_id
