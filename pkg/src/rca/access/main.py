"""Access-control service entry point: python -m rca.access.main"""

from __future__ import annotations

import argparse
import logging
import os

from ..runtime import run_service
from .service import create_service


def main(argv=None):
    parser = argparse.ArgumentParser(prog="rca-access")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=7002)
    parser.add_argument("--secret", default=os.environ.get("RCA_TOKEN_SECRET"))
    parser.add_argument("--journal", default=os.environ.get("RCA_GRANT_JOURNAL"))
    parser.add_argument("--discovery-url", default=os.environ.get("RCA_DISCOVERY_URL"))
    parser.add_argument("--no-verify-users", action="store_true")
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    if not args.secret:
        parser.error("--secret or RCA_TOKEN_SECRET required")
    service = create_service(secret=args.secret, host=args.host, port=args.port,
                             journal_path=args.journal,
                             discovery_url=args.discovery_url,
                             verify_users=not args.no_verify_users)
    run_service(service)


if __name__ == "__main__":
    main()
