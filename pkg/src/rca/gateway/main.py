"""Gateway entry point: python -m rca.gateway.main"""

from __future__ import annotations

import argparse
import json
import logging
import os

from ..runtime import run_service
from .service import create_service, routes_from_config


def main(argv=None):
    parser = argparse.ArgumentParser(prog="rca-gateway")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    parser.add_argument("--secret", default=os.environ.get("RCA_TOKEN_SECRET"))
    parser.add_argument("--discovery-url", default=os.environ.get("RCA_DISCOVERY_URL"))
    parser.add_argument("--config", help="JSON config with a routes list")
    parser.add_argument("--ui-dir", default=os.environ.get("RCA_UI_DIR"))
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    if not args.secret:
        parser.error("--secret or RCA_TOKEN_SECRET required")
    if not args.discovery_url:
        parser.error("--discovery-url or RCA_DISCOVERY_URL required")
    routes = None
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
        if "routes" in cfg:
            routes = routes_from_config(cfg["routes"])
    service = create_service(secret=args.secret, discovery_url=args.discovery_url,
                             host=args.host, port=args.port, routes=routes,
                             ui_dir=args.ui_dir)
    run_service(service)


if __name__ == "__main__":
    main()
