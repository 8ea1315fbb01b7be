"""Lease registry semantics and the discovery HTTP surface."""

import pytest
import requests

from rca.clock import ManualClock
from rca.discovery.registry import (MalformedRegistration, Registry,
                                    UnknownInstance)
from rca.discovery.service import create_service


@pytest.fixture()
def clock():
    return ManualClock(start_ms=1_000_000)


@pytest.fixture()
def registry(clock):
    return Registry(ttl_ms=30_000, clock=clock)


class TestRegister:
    def test_new_lease(self, registry, clock):
        reg = registry.register("history", "i1", "http://127.0.0.1:7003")
        assert reg.leaseExpiry == clock.now_ms() + 30_000

    def test_re_register_renews(self, registry, clock):
        registry.register("history", "i1", "http://h:1")
        clock.advance_ms(10_000)
        renewed = registry.register("history", "i1", "http://h:2")
        assert renewed.leaseExpiry == clock.now_ms() + 30_000
        assert renewed.baseUrl == "http://h:2"
        assert len(registry.resolve("history")) == 1

    @pytest.mark.parametrize("name,iid,url", [
        ("", "i1", "http://h:1"),
        ("Bad Name", "i1", "http://h:1"),
        ("history", "", "http://h:1"),
        ("history", "i1", "not-a-url"),
    ])
    def test_malformed(self, registry, name, iid, url):
        with pytest.raises(MalformedRegistration):
            registry.register(name, iid, url)


class TestHeartbeat:
    def test_live_lease_strictly_extends(self, registry, clock):
        reg = registry.register("history", "i1", "http://h:1")
        first = reg.leaseExpiry
        clock.advance_ms(5_000)
        assert registry.heartbeat("history", "i1") == first + 5_000

    def test_after_eviction(self, registry, clock):
        registry.register("history", "i1", "http://h:1")
        clock.advance_ms(30_001)
        with pytest.raises(UnknownInstance):
            registry.heartbeat("history", "i1")

    def test_never_registered(self, registry):
        with pytest.raises(UnknownInstance):
            registry.heartbeat("history", "ghost")


class TestResolve:
    def test_two_instances_in_registration_order(self, registry):
        registry.register("history", "i1", "http://h:1")
        registry.register("history", "i2", "http://h:2")
        assert [r.instanceId for r in registry.resolve("history")] == ["i1", "i2"]

    def test_unknown_service_empty(self, registry):
        assert registry.resolve("nosuch") == []

    def test_expired_lease_filtered(self, registry, clock):
        registry.register("history", "i1", "http://h:1")
        clock.advance_ms(20_000)
        registry.register("history", "i2", "http://h:2")
        clock.advance_ms(10_001)  # i1 now past its lease, i2 still live
        assert [r.instanceId for r in registry.resolve("history")] == ["i2"]


class TestEvict:
    def test_nothing_expired(self, registry, clock):
        registry.register("history", "i1", "http://h:1")
        assert registry.evict(clock.now_ms()) == []

    def test_one_expired(self, registry, clock):
        registry.register("history", "i1", "http://h:1")
        clock.advance_ms(15_000)
        registry.register("security", "s1", "http://s:1")
        evicted = registry.evict(clock.now_ms() + 15_001)
        assert evicted == [("history", "i1")]
        assert registry.resolve("history") == []
        assert len(registry.resolve("security")) == 1

    def test_all_expired(self, registry, clock):
        registry.register("a", "i1", "http://h:1")
        registry.register("b", "i2", "http://h:2")
        assert set(registry.evict(clock.now_ms() + 30_001)) == {("a", "i1"),
                                                                ("b", "i2")}
        assert registry.all_services() == {}


class TestHttpSurface:
    @pytest.fixture()
    def svc(self):
        service = create_service(port=0, ttl_ms=30_000, sweep_interval_s=60)
        service.start()
        yield service
        service.stop()

    def test_register_resolve_roundtrip(self, svc):
        resp = requests.post(svc.base_url + "/registry/register",
                             json={"serviceName": "history", "instanceId": "i1",
                                   "baseUrl": "http://127.0.0.1:7003"}, timeout=5)
        assert resp.status_code == 200
        assert resp.json()["leaseExpiry"] > 0
        listed = requests.get(svc.base_url + "/registry/services/history",
                              timeout=5).json()
        assert [r["instanceId"] for r in listed] == ["i1"]
        everything = requests.get(svc.base_url + "/registry/services",
                                  timeout=5).json()
        assert set(everything) == {"history"}

    def test_heartbeat_unknown_is_404(self, svc):
        resp = requests.post(svc.base_url + "/registry/heartbeat/history/ghost",
                             timeout=5)
        assert resp.status_code == 404
        assert resp.json()["error"] == "unknown-instance"

    def test_malformed_registration_400(self, svc):
        resp = requests.post(svc.base_url + "/registry/register",
                             json={"serviceName": "x", "instanceId": "i",
                                   "baseUrl": "nope"}, timeout=5)
        assert resp.status_code == 400
        assert resp.json()["error"] == "malformed-registration"
