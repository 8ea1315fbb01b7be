"""Standalone broker entry point: python -m rca.mqtt.main"""

from __future__ import annotations

import argparse
import asyncio
import logging

from .broker import Broker


def main(argv=None):
    parser = argparse.ArgumentParser(prog="rca-broker")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=1883)
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")

    async def run():
        broker = Broker(args.host, args.port)
        await broker.start()
        await asyncio.Event().wait()

    try:
        asyncio.run(run())
    except KeyboardInterrupt:
        pass


if __name__ == "__main__":
    main()
