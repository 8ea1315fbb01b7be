"""Stack CLI: bring the platform up or down, inject and heal faults.

State (child pids, ports) is persisted to a JSON file so later invocations
can act on a running stack.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile

from .stack import Stack, StackError, load_profile

DEFAULT_STATE = os.path.join(tempfile.gettempdir(), "rca-stack.json")


def _save_state(stack: Stack, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(stack.state(), fh, indent=2)


def _load_stack(path: str) -> Stack:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return Stack.attach(json.load(fh))
    except (OSError, ValueError) as exc:
        raise StackError("cannot read stack state %s: %s" % (path, exc))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="rca-stack")
    parser.add_argument("--state", default=DEFAULT_STATE,
                        help="stack state file (default %s)" % DEFAULT_STATE)
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    up_p = sub.add_parser("up", help="start every component and wait for readiness")
    up_p.add_argument("--profile", required=True)
    up_p.add_argument("--workdir", help="journals and logs directory")
    up_p.add_argument("--timeout", type=float, default=60.0)

    sub.add_parser("down", help="stop all components")

    fault_p = sub.add_parser("fault", help="inject a fault into a component")
    fault_p.add_argument("target", help="service name or service:instance")
    fault_p.add_argument("--kind", choices=["kill", "pause"], default="kill")

    heal_p = sub.add_parser("heal", help="restart or resume a faulted component")
    heal_p.add_argument("target")

    sub.add_parser("status", help="show component liveness")

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        if args.command == "up":
            profile = load_profile(args.profile)
            workdir = args.workdir or tempfile.mkdtemp(prefix="rca-stack-")
            stack = Stack(profile, workdir)
            stack.up(timeout_s=args.timeout)
            _save_state(stack, args.state)
            print("stack up: gateway %s (workdir %s)" % (stack.gateway_url, workdir))
            return 0

        stack = _load_stack(args.state)
        if args.command == "down":
            stack.down()
            try:
                os.remove(args.state)
            except OSError:
                pass
            print("stack down")
        elif args.command == "fault":
            stack.fault(args.target, kind=args.kind)
            _save_state(stack, args.state)
            print("fault %s injected into %s" % (args.kind, args.target))
        elif args.command == "heal":
            stack.heal(args.target)
            _save_state(stack, args.state)
            print("healed %s" % args.target)
        elif args.command == "status":
            for label, proc in sorted(stack.procs.items()):
                state = "paused" if proc.paused else \
                    ("up" if proc.alive() else "down")
                print("%-20s pid=%-7d port=%-5d %s"
                      % (label, proc.popen.pid, proc.spec.port, state))
    except StackError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
