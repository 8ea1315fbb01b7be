"""Telemetry state store: per-home, per-item capped histories.

Unknown homes and items are auto-created on first telemetry. Malformed
payloads are counted and dead-lettered, never fatal. Histories are capped
(oldest by (timestamp, seq) evicted first) and journaled with periodic
snapshots for replay on restart.
"""

from __future__ import annotations

import json
import logging
import os
import queue
import threading
from typing import Optional

from ..clock import Clock, SYSTEM_CLOCK
from ..domain import (DeviceItem, DeviceState, ItemKind, SmartHome,
                      current_state, validate_value)
from ..errors import MalformedIdentifier
from ..journal import Journal
from ..wire import parse_state_topic

log = logging.getLogger("rca.history")

DEFAULT_HISTORY_CAP = 10_000
SNAPSHOT_AFTER_RECORDS = 200_000


class StateStore:
    def __init__(self, cap: int = DEFAULT_HISTORY_CAP,
                 journal_path: Optional[str] = None,
                 dead_letter_path: Optional[str] = None,
                 clock: Clock = SYSTEM_CLOCK):
        self.cap = cap
        self.clock = clock
        self.homes: dict[str, SmartHome] = {}
        self.accepted = 0
        self.dead_letter = 0
        self._seq = 0
        self._lock = threading.RLock()
        self._listeners: dict[tuple[str, str], list[queue.Queue]] = {}
        self._current: dict[tuple[str, str], DeviceState] = {}
        self._since_snapshot = 0
        self._journal_path = journal_path
        self._snapshot_path = journal_path + ".snap" if journal_path else None
        self._dead_letter = Journal(dead_letter_path)
        if self._snapshot_path and os.path.exists(self._snapshot_path):
            self._load_snapshot()
        self._journal = Journal(journal_path)
        if journal_path:
            for rec in Journal(journal_path).replay():
                self._apply(rec)

    # -- persistence -------------------------------------------------------

    def _apply(self, rec: dict):
        try:
            self._append(rec["h"], rec["i"], rec["v"], int(rec["t"]),
                         kind=rec.get("k"), seq=int(rec["s"]), journal=False)
        except (KeyError, ValueError, MalformedIdentifier):
            pass

    def _load_snapshot(self):
        try:
            with open(self._snapshot_path, "r", encoding="utf-8") as fh:
                snap = json.load(fh)
        except (OSError, ValueError):
            log.warning("unreadable snapshot %s, starting empty", self._snapshot_path)
            return
        self._seq = int(snap.get("seq", 0))
        self.accepted = int(snap.get("accepted", 0))
        for home in snap.get("homes", []):
            for item in home.get("items", []):
                for st in item.get("states", []):
                    self._append(home["homeId"], item["itemId"], st["value"],
                                 int(st["timestamp"]), kind=item.get("kind"),
                                 seq=int(st["seq"]), journal=False, count=False)

    def save_snapshot(self):
        if not self._snapshot_path:
            return
        with self._lock:
            snap = {
                "seq": self._seq,
                "accepted": self.accepted,
                "homes": [
                    {"homeId": home.homeId, "label": home.label,
                     "items": [
                         {"itemId": item.itemId, "kind": item.kind.value,
                          "label": item.label,
                          "states": [s.to_json() for s in item.states]}
                         for item in home.items.values()]}
                    for home in self.homes.values()],
            }
            tmp = self._snapshot_path + ".tmp"
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(snap, fh)
            os.replace(tmp, self._snapshot_path)
            self._journal.reset()
            self._since_snapshot = 0

    # -- ingestion ---------------------------------------------------------

    def ingest_raw(self, topic: str, payload: bytes) -> bool:
        """One telemetry message off the wire. False means dead-lettered."""
        parsed = parse_state_topic(topic)
        if parsed is None:
            return self._reject(topic, payload, "bad topic")
        home_id, item_id = parsed
        try:
            body = json.loads(payload.decode("utf-8"))
            value = body["value"]
            timestamp = body["timestamp"]
            if not isinstance(value, str) or not isinstance(timestamp, int) or timestamp < 0:
                raise ValueError("bad field types")
            kind = body.get("kind")
        except (ValueError, KeyError, UnicodeDecodeError) as exc:
            return self._reject(topic, payload, str(exc))
        try:
            self.ingest(home_id, item_id, value, timestamp, kind=kind)
        except (MalformedIdentifier, ValueError) as exc:
            return self._reject(topic, payload, str(exc))
        return True

    def _reject(self, topic: str, payload: bytes, reason: str) -> bool:
        self.dead_letter += 1
        self._dead_letter.append({"topic": topic,
                                  "payload": payload[:512].decode("utf-8", "replace"),
                                  "reason": reason, "at": self.clock.now_ms()})
        return False

    def ingest(self, home_id: str, item_id: str, value: str, timestamp: int,
               kind: Optional[str] = None):
        """Validated append; raises on malformed identifiers or values."""
        state = self._append(home_id, item_id, value, timestamp, kind=kind)
        for q in self._listeners.get((home_id, item_id), []):
            try:
                q.put_nowait(state)
            except queue.Full:
                pass

    def _append(self, home_id: str, item_id: str, value: str, timestamp: int,
                kind: Optional[str] = None, seq: Optional[int] = None,
                journal: bool = True, count: bool = True) -> DeviceState:
        with self._lock:
            home = self.homes.get(home_id)
            if home is None:
                home = SmartHome(homeId=home_id, label=home_id)
                self.homes[home_id] = home
            item = home.items.get(item_id)
            if item is None:
                item_kind = ItemKind(kind) if kind else ItemKind.TEXT
                item = DeviceItem(itemId=item_id, kind=item_kind, label=item_id)
                home.items[item_id] = item
            if not validate_value(item.kind, value):
                raise ValueError("value %r invalid for kind %s" % (value, item.kind.value))
            if seq is None:
                self._seq += 1
                seq = self._seq
            else:
                self._seq = max(self._seq, seq)
            state = DeviceState(timestamp=timestamp, value=value, seq=seq)
            item.states.append(state)
            key = (home_id, item_id)
            cur = self._current.get(key)
            if cur is None or (state.timestamp, state.seq) > (cur.timestamp, cur.seq):
                self._current[key] = state
            if len(item.states) > self.cap:
                low = min(range(len(item.states)),
                          key=lambda idx: (item.states[idx].timestamp, item.states[idx].seq))
                del item.states[low]
            if count:
                self.accepted += 1
            if journal:
                self._journal.append({"h": home_id, "i": item_id, "v": value,
                                      "t": timestamp, "s": seq, "k": item.kind.value})
                self._since_snapshot += 1
            return state

    def maybe_snapshot(self):
        if self._since_snapshot >= SNAPSHOT_AFTER_RECORDS:
            self.save_snapshot()

    # -- queries -----------------------------------------------------------

    def get_home(self, home_id: str) -> Optional[SmartHome]:
        with self._lock:
            return self.homes.get(home_id)

    def current(self, home_id: str, item_id: str) -> Optional[DeviceState]:
        with self._lock:
            fast = self._current.get((home_id, item_id))
            if fast is not None:
                return fast
            home = self.homes.get(home_id)
            if home is None or item_id not in home.items:
                return None
            return current_state(home.items[item_id])

    def item_history(self, home_id: str, item_id: str, from_ts: int, to_ts: int,
                     limit: int) -> Optional[list[DeviceState]]:
        with self._lock:
            home = self.homes.get(home_id)
            if home is None:
                return None
            item = home.items.get(item_id)
            if item is None:
                return None
            selected = [s for s in item.states if from_ts <= s.timestamp <= to_ts]
        selected.sort(key=lambda s: (s.timestamp, s.seq))
        return selected[-limit:] if limit else selected

    def list_home_ids(self) -> list[str]:
        with self._lock:
            return list(self.homes.keys())

    # -- live listeners ----------------------------------------------------

    def subscribe(self, home_id: str, item_id: str) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=256)
        with self._lock:
            self._listeners.setdefault((home_id, item_id), []).append(q)
        return q

    def unsubscribe(self, home_id: str, item_id: str, q: queue.Queue):
        with self._lock:
            listeners = self._listeners.get((home_id, item_id), [])
            if q in listeners:
                listeners.remove(q)

    def close(self):
        self._journal.close()
        self._dead_letter.close()
