"""Security service entry point: python -m rca.security.main"""

from __future__ import annotations

import argparse
import logging
import os

from .service import create_service
from .tokens import DEFAULT_LIFETIME_S


def main(argv=None):
    parser = argparse.ArgumentParser(prog="rca-security")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=7001)
    parser.add_argument("--secret", default=os.environ.get("RCA_TOKEN_SECRET"))
    parser.add_argument("--journal", default=os.environ.get("RCA_USER_JOURNAL"))
    parser.add_argument("--token-lifetime", type=int, default=DEFAULT_LIFETIME_S)
    parser.add_argument("--pbkdf2-iterations", type=int,
                        default=int(os.environ.get("RCA_PBKDF2_ITERATIONS") or 0) or None)
    parser.add_argument("--bootstrap-admin-user",
                        default=os.environ.get("RCA_BOOTSTRAP_ADMIN_USER"))
    parser.add_argument("--bootstrap-admin-password",
                        default=os.environ.get("RCA_BOOTSTRAP_ADMIN_PASSWORD"))
    parser.add_argument("--discovery-url", default=os.environ.get("RCA_DISCOVERY_URL"))
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    if not args.secret:
        parser.error("--secret or RCA_TOKEN_SECRET required")
    bootstrap = None
    if args.bootstrap_admin_user and args.bootstrap_admin_password:
        bootstrap = (args.bootstrap_admin_user, args.bootstrap_admin_password)
    service = create_service(secret=args.secret, host=args.host, port=args.port,
                             journal_path=args.journal,
                             token_lifetime_s=args.token_lifetime,
                             pbkdf2_iterations=args.pbkdf2_iterations,
                             bootstrap_admin=bootstrap,
                             discovery_url=args.discovery_url)
    from ..runtime import run_service
    run_service(service)


if __name__ == "__main__":
    main()
