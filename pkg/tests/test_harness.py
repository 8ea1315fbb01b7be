"""Process supervisor: startup ordering, readiness, and fault injection."""

import socket

import pytest
import requests

from rca.harness.stack import DEFAULT_PORTS, Stack, StackError

from util import free_port


def small_profile():
    """Broker + discovery + security only: quick to boot, no broker traffic
    dependencies."""
    return {
        "secret": "harness-secret",
        "broker": {"port": free_port()},
        "discovery": {"port": free_port()},
        "security": {"port": free_port(), "pbkdf2Iterations": 200,
                     "bootstrapAdmin": {"username": "admin",
                                        "password": "admin-pass-1"}},
        "accesscontrol": {"enabled": False},
        "history": {"enabled": False},
        "remotecontrol": {"enabled": False},
        "gateway": {"enabled": False},
    }


@pytest.fixture()
def stack3(tmp_path):
    stack = Stack(small_profile(), workdir=str(tmp_path))
    try:
        stack.up(timeout_s=30)
        yield stack
    finally:
        stack.down()


def _health(url):
    return requests.get(url + "/health", timeout=2)


class TestLifecycle:
    def test_up_reaches_readiness(self, stack3):
        assert _health(stack3.discovery_url).status_code == 200
        security_url = "http://127.0.0.1:%d" % stack3._port("security")
        assert _health(security_url).status_code == 200
        # security announced itself
        services = requests.get(stack3.discovery_url + "/registry/services",
                                timeout=2).json()
        assert len(services["security"]) == 1
        # the broker accepts TCP connections
        with socket.create_connection(("127.0.0.1", stack3.broker_port),
                                      timeout=2):
            pass

    def test_bootstrap_admin_usable(self, stack3):
        security_url = "http://127.0.0.1:%d" % stack3._port("security")
        resp = requests.post(security_url + "/auth/token",
                             json={"username": "admin",
                                   "password": "admin-pass-1"}, timeout=5)
        assert resp.status_code == 200

    def test_down_releases_ports(self, tmp_path):
        profile = small_profile()
        stack = Stack(profile, workdir=str(tmp_path))
        stack.up(timeout_s=30)
        stack.down()
        for service in ("discovery", "security"):
            with pytest.raises(OSError):
                socket.create_connection(
                    ("127.0.0.1", profile[service]["port"]), timeout=0.5)
        # ports are reusable immediately
        again = Stack(profile, workdir=str(tmp_path))
        again.up(timeout_s=30)
        again.down()

    def test_port_conflict_names_the_culprit(self, tmp_path):
        profile = small_profile()
        squatter = socket.socket()
        squatter.bind(("127.0.0.1", profile["security"]["port"]))
        squatter.listen(1)
        stack = Stack(profile, workdir=str(tmp_path))
        try:
            with pytest.raises(StackError, match="security"):
                stack.up(timeout_s=8)
        finally:
            stack.down()
            squatter.close()

    def test_profile_without_secret_rejected(self, tmp_path):
        with pytest.raises(StackError, match="secret"):
            Stack({"broker": {}}, workdir=str(tmp_path))


class TestFaults:
    def test_kill_and_heal_respawns(self, stack3):
        security_url = "http://127.0.0.1:%d" % stack3._port("security")
        stack3.fault("security", kind="kill")
        with pytest.raises(requests.RequestException):
            _health(security_url)
        stack3.heal("security", timeout_s=20)
        assert _health(security_url).status_code == 200

    def test_pause_keeps_port_bound_then_resume(self, stack3):
        security_url = "http://127.0.0.1:%d" % stack3._port("security")
        stack3.fault("security", kind="pause")
        # connection is accepted by the kernel but the process won't answer
        with pytest.raises(requests.RequestException):
            requests.get(security_url + "/health", timeout=1)
        stack3.heal("security")
        assert _health(security_url).status_code == 200

    def test_unknown_target_rejected(self, stack3):
        with pytest.raises(StackError):
            stack3.fault("nosuchservice")
        with pytest.raises(StackError):
            stack3.fault("security:9")

    def test_state_round_trip_attach(self, stack3):
        adopted = Stack.attach(stack3.state())
        labels = set(adopted.procs)
        assert {"broker:0", "discovery:0", "security:0"} <= labels
        assert all(p.alive() for p in adopted.procs.values())


def test_default_ports_cover_all_services():
    assert set(DEFAULT_PORTS) == {"broker", "discovery", "security",
                                  "accesscontrol", "history", "remotecontrol",
                                  "gateway"}
