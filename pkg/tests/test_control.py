"""Command dispatch: validation, authorization before effect, and the log."""

import json
import urllib.parse

import pytest
import requests

from rca.control.service import create_service
from rca.resilience import DownstreamError
from rca.security.tokens import issue_token
from rca.wire import command_topic

SECRET = "unit-secret"


class _FakeResponse:
    def __init__(self, status_code, body):
        self.status_code = status_code
        self._body = body
        self.text = json.dumps(body)

    def json(self):
        return self._body


class _FakeSvcClient:
    """Canned catalog and grant answers, no network."""

    def __init__(self):
        self.items = {}    # (home, item) -> kind string
        self.grants = set()  # (user, accessItem, mode)
        self.fail = set()  # targets that raise DownstreamError

    def call(self, target, method, path, **kw):
        if target in self.fail:
            raise DownstreamError("%s is down" % target)
        if target == "history":
            _, _, rest = path.partition("/catalog/")
            home, _, item = rest.partition("/")
            kind = self.items.get((home, item))
            if kind is None:
                return _FakeResponse(200, {"exists": False})
            return _FakeResponse(200, {"exists": True, "kind": kind,
                                       "label": item})
        if target == "accesscontrol":
            query = urllib.parse.parse_qs(urllib.parse.urlparse(path).query)
            user, item, mode = (query["user"][0], query["item"][0],
                                query["mode"][0])
            allowed = (user, item, mode) in self.grants
            if not allowed and "/item/" in item:
                home_key = item.split("/item/")[0]
                allowed = (user, home_key, mode) in self.grants
            return _FakeResponse(200,
                                 {"decision": "allow" if allowed else "deny"})
        raise AssertionError("unexpected target %r" % target)


class _SpyPublisher:
    def __init__(self):
        self.published = []  # (topic, payload bytes)

    def __call__(self, topic, payload):
        self.published.append((topic, payload))


@pytest.fixture()
def rig():
    backend = _FakeSvcClient()
    spy = _SpyPublisher()
    service = create_service(secret=SECRET, port=0, publisher=spy,
                             svc_client=backend)
    service.start()
    backend.items[("h1", "lamp")] = "Switch"
    backend.items[("h1", "blinds/left")] = "Dimmer"
    yield service, backend, spy
    service.stop()


def _headers(subject="mia"):
    return {"Authorization": "Bearer %s"
            % issue_token(SECRET, subject, ("caregiver",))}


def _send(service, home, item, value, subject="mia", label=None):
    body = {"value": value}
    if label is not None:
        body["label"] = label
    return requests.post(
        service.base_url + "/control/homes/%s/items/%s/command" % (home, item),
        json=body, headers=_headers(subject), timeout=5)


class TestSendCommand:
    def test_granted_command_is_published(self, rig):
        service, backend, spy = rig
        backend.grants.add(("mia", "home/h1/item/lamp", "Write"))
        resp = _send(service, "h1", "lamp", "ON", label="lamp on")
        assert resp.status_code == 200
        assert resp.json()["status"] == "dispatched"
        assert [t for t, _ in spy.published] == [command_topic("h1")]
        wire = json.loads(spy.published[0][1])
        assert wire["itemId"] == "lamp" and wire["value"] == "ON"
        assert wire["issuedBy"] == "mia" and wire["label"] == "lamp on"
        assert wire["commandId"] == resp.json()["commandId"]

    def test_denied_command_never_reaches_broker(self, rig):
        service, backend, spy = rig
        resp = _send(service, "h1", "lamp", "ON")
        assert resp.status_code == 403
        assert spy.published == []
        assert len(service.command_log) == 0

    def test_home_level_write_grant_suffices(self, rig):
        service, backend, spy = rig
        backend.grants.add(("mia", "home/h1", "Write"))
        assert _send(service, "h1", "lamp", "OFF").status_code == 200

    def test_item_id_may_span_segments(self, rig):
        service, backend, spy = rig
        backend.grants.add(("mia", "home/h1/item/blinds/left", "Write"))
        assert _send(service, "h1", "blinds/left", "40").status_code == 200
        assert json.loads(spy.published[0][1])["itemId"] == "blinds/left"

    def test_unknown_item_404_before_authorization(self, rig):
        service, backend, spy = rig
        resp = _send(service, "h1", "ghost", "ON")
        assert resp.status_code == 404
        assert resp.json()["error"] == "unknown-item"
        assert spy.published == []

    def test_invalid_value_for_kind_400(self, rig):
        service, backend, spy = rig
        backend.grants.add(("mia", "home/h1", "Write"))
        resp = _send(service, "h1", "lamp", "DIM")
        assert resp.status_code == 400
        assert resp.json()["error"] == "invalid-value"
        assert spy.published == []

    def test_read_grant_does_not_authorize_commands(self, rig):
        service, backend, spy = rig
        backend.grants.add(("mia", "home/h1", "Read"))
        assert _send(service, "h1", "lamp", "ON").status_code == 403
        assert spy.published == []

    def test_catalog_outage_maps_to_503(self, rig):
        service, backend, spy = rig
        backend.fail.add("history")
        resp = _send(service, "h1", "lamp", "ON")
        assert resp.status_code == 503
        assert resp.json()["error"] == "history-unavailable"

    def test_access_outage_maps_to_503_and_no_publish(self, rig):
        service, backend, spy = rig
        backend.fail.add("accesscontrol")
        resp = _send(service, "h1", "lamp", "ON")
        assert resp.status_code == 503
        assert spy.published == []

    def test_missing_token_401(self, rig):
        service, _, _ = rig
        resp = requests.post(
            service.base_url + "/control/homes/h1/items/lamp/command",
            json={"value": "ON"}, timeout=5)
        assert resp.status_code == 401


class TestCommandLog:
    def test_newest_first_with_limit(self, rig):
        service, backend, spy = rig
        backend.grants.add(("mia", "home/h1", "Write"))
        backend.grants.add(("mia", "home/h1", "Read"))
        for value in ("ON", "OFF", "ON"):
            _send(service, "h1", "lamp", value)
        resp = requests.get(service.base_url + "/control/homes/h1/commands",
                            headers=_headers(), timeout=5)
        values = [c["value"] for c in resp.json()]
        assert values == ["ON", "OFF", "ON"][::-1]
        limited = requests.get(service.base_url + "/control/homes/h1/commands",
                               params={"limit": 1}, headers=_headers(),
                               timeout=5).json()
        assert len(limited) == 1 and limited[0]["value"] == "ON"

    def test_log_scoped_to_home(self, rig):
        service, backend, spy = rig
        backend.items[("h2", "lamp")] = "Switch"
        for home in ("h1", "h2"):
            backend.grants.add(("mia", "home/%s" % home, "Write"))
            backend.grants.add(("mia", "home/%s" % home, "Read"))
            _send(service, home, "lamp", "ON")
        resp = requests.get(service.base_url + "/control/homes/h2/commands",
                            headers=_headers(), timeout=5)
        assert [c["homeId"] for c in resp.json()] == ["h2"]

    def test_log_requires_home_read(self, rig):
        service, backend, spy = rig
        backend.grants.add(("mia", "home/h1", "Write"))
        resp = requests.get(service.base_url + "/control/homes/h1/commands",
                            headers=_headers(), timeout=5)
        assert resp.status_code == 403
