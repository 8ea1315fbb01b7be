"""Stack supervisor: brings the whole platform up as child processes.

A profile (JSON) names the components, their ports and instance counts.
Startup follows the dependency order broker, discovery, security, then the
remaining services, then the gateway; readiness is confirmed by health
probes plus the expected discovery registrations. Faults can be injected
per instance (kill, pause) and healed, which is how the failure-isolation
demos and tests drive the system.
"""

from __future__ import annotations

import json
import logging
import os
import signal
import socket
import subprocess
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

import requests

log = logging.getLogger("rca.harness")

# Services that register themselves with discovery.
_ANNOUNCING = ("security", "accesscontrol", "history", "remotecontrol")

# Startup order; instances of the same service start together.
_ORDER = ("broker", "discovery", "security", "accesscontrol", "history",
          "remotecontrol", "gateway")

DEFAULT_PORTS = {"broker": 1883, "discovery": 7000, "security": 7001,
                 "accesscontrol": 7002, "history": 7003, "remotecontrol": 7004,
                 "gateway": 8080}


class StackError(Exception):
    pass


@dataclass
class ProcSpec:
    service: str
    instance: int
    argv: list
    port: int
    env: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        return "%s:%d" % (self.service, self.instance)


class Proc:
    def __init__(self, spec: ProcSpec, popen: subprocess.Popen):
        self.spec = spec
        self.popen = popen
        self.paused = False

    def alive(self) -> bool:
        return self.popen.poll() is None


def load_profile(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


class Stack:
    """One running platform instance built from a profile."""

    def __init__(self, profile: dict, workdir: str,
                 host: str = "127.0.0.1", log_output: bool = False):
        if "secret" not in profile:
            raise StackError("profile needs a 'secret'")
        self.profile = profile
        self.workdir = workdir
        self.host = host
        self.log_output = log_output
        self.secret = profile["secret"]
        self.procs: dict[str, Proc] = {}
        os.makedirs(workdir, exist_ok=True)

    # -- profile plumbing --------------------------------------------------

    def _cfg(self, service: str) -> dict:
        return self.profile.get(service) or {}

    def _port(self, service: str, instance: int = 0) -> int:
        base = self._cfg(service).get("port", DEFAULT_PORTS[service])
        return base + instance

    def _instances(self, service: str) -> int:
        return int(self._cfg(service).get("instances", 1))

    @property
    def discovery_url(self) -> str:
        return "http://%s:%d" % (self.host, self._port("discovery"))

    @property
    def broker_port(self) -> int:
        return self._port("broker")

    @property
    def gateway_url(self) -> str:
        return "http://%s:%d" % (self.host, self._port("gateway"))

    def _base_env(self) -> dict:
        env = dict(os.environ)
        env["RCA_TOKEN_SECRET"] = self.secret
        env["RCA_DISCOVERY_URL"] = self.discovery_url
        env.update({str(k): str(v) for k, v in
                    (self.profile.get("env") or {}).items()})
        return env

    def _spec(self, service: str, instance: int) -> ProcSpec:
        cfg = self._cfg(service)
        port = self._port(service, instance)
        py = sys.executable
        common = ["--host", self.host, "--port", str(port)]
        extra_env: dict = {}
        if service == "broker":
            argv = [py, "-m", "rca.mqtt.main"] + common
        elif service == "discovery":
            argv = [py, "-m", "rca.discovery.main"] + common
            if "ttlMs" in cfg:
                argv += ["--ttl-ms", str(cfg["ttlMs"])]
            if "sweepInterval" in cfg:
                argv += ["--sweep-interval", str(cfg["sweepInterval"])]
        elif service == "security":
            argv = [py, "-m", "rca.security.main"] + common
            argv += ["--journal", self._journal(service, instance, "users")]
            if "pbkdf2Iterations" in cfg:
                argv += ["--pbkdf2-iterations", str(cfg["pbkdf2Iterations"])]
            admin = cfg.get("bootstrapAdmin")
            if admin:
                extra_env["RCA_BOOTSTRAP_ADMIN_USER"] = admin["username"]
                extra_env["RCA_BOOTSTRAP_ADMIN_PASSWORD"] = admin["password"]
        elif service == "accesscontrol":
            argv = [py, "-m", "rca.access.main"] + common
            argv += ["--journal", self._journal(service, instance, "grants")]
        elif service == "history":
            argv = [py, "-m", "rca.history.main"] + common
            argv += ["--broker-host", self.host,
                     "--broker-port", str(self.broker_port),
                     "--journal", self._journal(service, instance, "states"),
                     "--instance-id", "history-%d" % instance]
        elif service == "remotecontrol":
            argv = [py, "-m", "rca.control.main"] + common
            argv += ["--broker-host", self.host,
                     "--broker-port", str(self.broker_port),
                     "--journal", self._journal(service, instance, "commands")]
        elif service == "gateway":
            argv = [py, "-m", "rca.gateway.main"] + common
            if cfg.get("uiDir"):
                argv += ["--ui-dir", cfg["uiDir"]]
        else:
            raise StackError("unknown service %r" % service)
        return ProcSpec(service=service, instance=instance, argv=argv,
                        port=port, env=extra_env)

    def _journal(self, service: str, instance: int, stem: str) -> str:
        return os.path.join(self.workdir, "%s-%d-%s.jsonl" % (service, instance, stem))

    # -- lifecycle ---------------------------------------------------------

    def _spawn(self, spec: ProcSpec) -> Proc:
        env = self._base_env()
        env.update(spec.env)
        if self.log_output:
            out = None
        else:
            out = open(os.path.join(self.workdir, "%s-%d.log"
                                    % (spec.service, spec.instance)), "ab")
        popen = subprocess.Popen(spec.argv, env=env, stdout=out, stderr=out,
                                 start_new_session=True)
        if out is not None:
            out.close()
        proc = Proc(spec, popen)
        self.procs[spec.label] = proc
        log.info("started %s pid=%d port=%d", spec.label, popen.pid, spec.port)
        return proc

    def up(self, timeout_s: float = 30.0):
        deadline = time.monotonic() + timeout_s
        for service in _ORDER:
            if service not in DEFAULT_PORTS:
                continue
            if self._cfg(service).get("enabled", True) is False:
                continue
            for instance in range(self._instances(service)):
                spec = self._spec(service, instance)
                self._spawn(spec)
            for instance in range(self._instances(service)):
                self._await_ready(service, instance, deadline)
        self._await_registrations(deadline)

    def down(self):
        for proc in reversed(list(self.procs.values())):
            self._terminate(proc)
        self.procs.clear()

    def _terminate(self, proc: Proc):
        if not proc.alive():
            return
        if proc.paused:
            self._signal(proc, signal.SIGCONT)
        proc.popen.terminate()
        try:
            proc.popen.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.popen.kill()
            proc.popen.wait(timeout=5)

    # -- readiness ---------------------------------------------------------

    def _await_ready(self, service: str, instance: int, deadline: float):
        port = self._port(service, instance)
        label = "%s:%d" % (service, instance)
        while time.monotonic() < deadline:
            proc = self.procs.get(label)
            if proc is not None and not proc.alive():
                raise StackError("%s exited during startup (rc=%s)"
                                 % (label, proc.popen.returncode))
            if service == "broker":
                if self._tcp_up(port):
                    return
            else:
                try:
                    if requests.get("http://%s:%d/health" % (self.host, port),
                                    timeout=1.0).status_code == 200:
                        return
                except requests.RequestException:
                    pass
            time.sleep(0.05)
        raise StackError("timeout waiting for %s" % label)

    def _tcp_up(self, port: int) -> bool:
        try:
            with socket.create_connection((self.host, port), timeout=1.0):
                return True
        except OSError:
            return False

    def _await_registrations(self, deadline: float):
        expected = {s: self._instances(s) for s in _ANNOUNCING
                    if self._cfg(s).get("enabled", True) is not False}
        while time.monotonic() < deadline:
            try:
                services = requests.get("%s/registry/services" % self.discovery_url,
                                        timeout=1.0).json()
            except requests.RequestException:
                services = {}
            if all(len(services.get(name, [])) >= count
                   for name, count in expected.items()):
                return
            time.sleep(0.1)
        raise StackError("timeout waiting for discovery registrations: "
                         "have %s, want %s"
                         % ({k: len(v) for k, v in services.items()}, expected))

    # -- fault injection ---------------------------------------------------

    def _targets(self, target: str) -> list[Proc]:
        if ":" in target:
            proc = self.procs.get(target)
            if proc is None:
                raise StackError("unknown target %r" % target)
            return [proc]
        matched = [p for p in self.procs.values() if p.spec.service == target]
        if not matched:
            raise StackError("unknown target %r" % target)
        return matched

    def _signal(self, proc: Proc, sig: int):
        try:
            os.kill(proc.popen.pid, sig)
        except ProcessLookupError:
            pass

    def fault(self, target: str, kind: str = "kill"):
        """kill: hard-stop the process. pause: SIGSTOP it (hangs, port stays
        bound) to exercise timeout paths rather than connection refusal."""
        for proc in self._targets(target):
            if kind == "kill":
                proc.popen.kill()
                proc.popen.wait(timeout=5)
                log.info("killed %s", proc.spec.label)
            elif kind == "pause":
                self._signal(proc, signal.SIGSTOP)
                proc.paused = True
                log.info("paused %s", proc.spec.label)
            else:
                raise StackError("unknown fault kind %r" % kind)

    def heal(self, target: str, timeout_s: float = 30.0):
        """Resume paused instances; respawn dead ones and wait for health."""
        deadline = time.monotonic() + timeout_s
        for proc in self._targets(target):
            if proc.paused:
                self._signal(proc, signal.SIGCONT)
                proc.paused = False
                log.info("resumed %s", proc.spec.label)
            elif not proc.alive():
                self._spawn(proc.spec)
                self._await_ready(proc.spec.service, proc.spec.instance, deadline)
                log.info("respawned %s", proc.spec.label)

    # -- persistence for the CLI ------------------------------------------

    def state(self) -> dict:
        return {"profile": self.profile, "workdir": self.workdir,
                "host": self.host,
                "processes": [{"service": p.spec.service,
                               "instance": p.spec.instance,
                               "argv": p.spec.argv, "port": p.spec.port,
                               "env": p.spec.env, "pid": p.popen.pid,
                               "paused": p.paused}
                              for p in self.procs.values()]}

    @classmethod
    def attach(cls, state: dict) -> "Stack":
        """Rebuild a Stack from a saved state file, adopting live pids."""
        stack = cls(state["profile"], state["workdir"], host=state["host"])
        for entry in state["processes"]:
            spec = ProcSpec(service=entry["service"], instance=entry["instance"],
                            argv=entry["argv"], port=entry["port"],
                            env=entry.get("env", {}))
            popen = _AdoptedProcess(entry["pid"])
            proc = Proc(spec, popen)
            proc.paused = entry.get("paused", False)
            stack.procs[spec.label] = proc
        return stack


class _AdoptedProcess:
    """Minimal Popen stand-in for pids adopted from a state file."""

    def __init__(self, pid: int):
        self.pid = pid
        self.returncode: Optional[int] = None

    def poll(self):
        if self.returncode is not None:
            return self.returncode
        try:
            os.kill(self.pid, 0)
            return None
        except ProcessLookupError:
            self.returncode = -1
            return self.returncode

    def terminate(self):
        try:
            os.kill(self.pid, signal.SIGTERM)
        except ProcessLookupError:
            self.returncode = -1

    def kill(self):
        try:
            os.kill(self.pid, signal.SIGKILL)
        except ProcessLookupError:
            self.returncode = -1

    def wait(self, timeout=None):
        deadline = None if timeout is None else time.monotonic() + timeout
        while self.poll() is None:
            if deadline is not None and time.monotonic() > deadline:
                raise subprocess.TimeoutExpired("pid %d" % self.pid, timeout)
            time.sleep(0.05)
        return self.returncode
