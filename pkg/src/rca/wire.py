"""Platform topic scheme and telemetry payload helpers.

Telemetry:  rca/state/{homeId}/{itemId}   payload {"value": str, "timestamp": int}
Commands:   rca/command/{homeId}          payload = JSON Command record
"""

from __future__ import annotations

import json
from typing import Optional

STATE_PREFIX = "rca/state"
COMMAND_PREFIX = "rca/command"
STATE_FILTER = STATE_PREFIX + "/#"


def state_topic(home_id: str, item_id: str) -> str:
    return "%s/%s/%s" % (STATE_PREFIX, home_id, item_id)


def command_topic(home_id: str) -> str:
    return "%s/%s" % (COMMAND_PREFIX, home_id)


def command_filter(home_id: str) -> str:
    return command_topic(home_id)


def parse_state_topic(topic: str) -> Optional[tuple[str, str]]:
    """(homeId, itemId) or None if the topic is not a telemetry topic.
    itemId spans all remaining segments (itemIds may contain '/')."""
    parts = topic.split("/")
    if len(parts) < 4 or parts[0] != "rca" or parts[1] != "state":
        return None
    home_id = parts[2]
    item_id = "/".join(parts[3:])
    if not home_id or not item_id:
        return None
    return home_id, item_id


def state_payload(value: str, timestamp: int, kind: Optional[str] = None) -> bytes:
    body = {"value": value, "timestamp": timestamp}
    if kind is not None:
        body["kind"] = kind
    return json.dumps(body, separators=(",", ":")).encode()
