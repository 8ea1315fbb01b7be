"""Shared service process runner: bind, announce to discovery, block."""

from __future__ import annotations

import threading

from .httpkit import Service


def run_service(service: Service):
    service.start()
    announce = getattr(service, "announce", None)
    if announce:
        announce()
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        service.stop()
