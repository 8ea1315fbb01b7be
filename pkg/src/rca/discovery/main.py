"""Discovery service entry point: python -m rca.discovery.main"""

from __future__ import annotations

import argparse
import logging

from .registry import DEFAULT_SWEEP_INTERVAL_S, DEFAULT_TTL_MS
from .service import create_service


def main(argv=None):
    parser = argparse.ArgumentParser(prog="rca-discovery")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=7000)
    parser.add_argument("--ttl-ms", type=int, default=DEFAULT_TTL_MS)
    parser.add_argument("--sweep-interval", type=float, default=DEFAULT_SWEEP_INTERVAL_S)
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    service = create_service(host=args.host, port=args.port, ttl_ms=args.ttl_ms,
                             sweep_interval_s=args.sweep_interval)
    service.serve_forever()


if __name__ == "__main__":
    main()
