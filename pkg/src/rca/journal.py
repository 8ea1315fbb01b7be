"""Append-only JSON-lines journal with startup replay."""

from __future__ import annotations

import json
import os
import threading
from typing import Iterator, Optional


class Journal:
    def __init__(self, path: Optional[str], flush_every: int = 64):
        self.path = path
        self.flush_every = flush_every
        self._lock = threading.Lock()
        self._pending = 0
        self._fh = None
        if path:
            os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
            self._fh = open(path, "a", encoding="utf-8")

    def replay(self) -> Iterator[dict]:
        """Yield every previously journaled record; skips corrupt tail lines."""
        if not self.path or not os.path.exists(self.path):
            return
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    yield json.loads(line)
                except ValueError:
                    continue

    def append(self, record: dict):
        if self._fh is None:
            return
        line = json.dumps(record, separators=(",", ":"))
        with self._lock:
            self._fh.write(line + "\n")
            self._pending += 1
            if self._pending >= self.flush_every:
                self._fh.flush()
                self._pending = 0

    def flush(self):
        with self._lock:
            if self._fh is not None:
                self._fh.flush()
                self._pending = 0

    def reset(self):
        """Truncate after a snapshot has captured the journaled state."""
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = open(self.path, "w", encoding="utf-8")
                self._pending = 0

    def close(self):
        with self._lock:
            if self._fh is not None:
                self._fh.flush()
                self._fh.close()
                self._fh = None
