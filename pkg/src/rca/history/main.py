"""History service entry point: python -m rca.history.main"""

from __future__ import annotations

import argparse
import logging
import os

from ..runtime import run_service
from .service import create_service


def main(argv=None):
    parser = argparse.ArgumentParser(prog="rca-history")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=7003)
    parser.add_argument("--secret", default=os.environ.get("RCA_TOKEN_SECRET"))
    parser.add_argument("--broker-host", default="127.0.0.1")
    parser.add_argument("--broker-port", type=int, default=1883)
    parser.add_argument("--discovery-url", default=os.environ.get("RCA_DISCOVERY_URL"))
    parser.add_argument("--journal", default=os.environ.get("RCA_HISTORY_JOURNAL"))
    parser.add_argument("--dead-letter", default=os.environ.get("RCA_DEAD_LETTER"))
    parser.add_argument("--history-cap", type=int, default=10_000)
    parser.add_argument("--instance-id")
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    if not args.secret:
        parser.error("--secret or RCA_TOKEN_SECRET required")
    if not args.discovery_url:
        parser.error("--discovery-url or RCA_DISCOVERY_URL required")
    service = create_service(secret=args.secret, host=args.host, port=args.port,
                             broker_host=args.broker_host, broker_port=args.broker_port,
                             discovery_url=args.discovery_url,
                             journal_path=args.journal,
                             dead_letter_path=args.dead_letter,
                             history_cap=args.history_cap,
                             instance_id=args.instance_id)
    run_service(service)


if __name__ == "__main__":
    main()
