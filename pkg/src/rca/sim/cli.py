"""Simulator CLI: run a scenario against a broker, or generate a fleet."""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import sys

from .runner import run_until_interrupted
from .scenario import BadScenario, generate_fleet, load_scenario


def main(argv=None):
    parser = argparse.ArgumentParser(prog="simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario against a broker")
    run_p.add_argument("--scenario", required=True)
    run_p.add_argument("--broker", default="127.0.0.1:1883", metavar="HOST:PORT")
    run_p.add_argument("--verbose", action="store_true")

    gen_p = sub.add_parser("gen", help="generate a deterministic fleet scenario")
    gen_p.add_argument("--homes", type=int, required=True)
    gen_p.add_argument("--items", type=int, required=True)
    gen_p.add_argument("--seed", type=int, default=0)
    gen_p.add_argument("--period-ms", type=int, default=2000)
    gen_p.add_argument("-o", "--output", help="output file (default stdout)")

    args = parser.parse_args(argv)

    if args.command == "gen":
        try:
            scenario = generate_fleet(args.homes, args.items, args.seed,
                                      period_ms=args.period_ms)
        except BadScenario as exc:
            print("error: %s" % exc, file=sys.stderr)
            return 3
        text = json.dumps(scenario.to_json(), indent=2)
        if args.output:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        else:
            print(text)
        return 0

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        scenario = load_scenario(args.scenario)
    except BadScenario as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 3
    host, _, port = args.broker.partition(":")
    try:
        asyncio.run(run_until_interrupted(scenario, host, int(port or 1883)))
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
