"""Gateway routing, authentication enforcement, and proxy behavior."""

import json
import threading

import pytest
import requests

from util import InProcStack, mint

# Representative external routes; every one except login must demand a token.
_PROTECTED = [
    ("GET", "/api/history/homes"),
    ("GET", "/api/history/homes/h1"),
    ("GET", "/api/history/homes/h1/items/lamp/history"),
    ("POST", "/api/control/homes/h1/items/lamp/command"),
    ("GET", "/api/control/homes/h1/commands"),
    ("POST", "/api/access/grants"),
    ("DELETE", "/api/access/grants"),
    ("GET", "/api/access/check"),
    ("GET", "/api/access/grants/mia"),
    ("GET", "/api/access/audit"),
    ("POST", "/api/users"),
    ("PUT", "/api/users/mia/password"),
    ("POST", "/api/auth/validate"),
    ("GET", "/api/status"),
]


@pytest.mark.parametrize("method,path", _PROTECTED)
def test_every_route_but_login_requires_token(stack, method, path):
    resp = stack.api(method, path)
    assert resp.status_code == 401
    assert resp.json()["error"] in ("missing-token", "invalid-token")


def test_invalid_token_rejected_at_the_gateway(stack):
    before = stack.history.store.accepted + stack.history.store.dead_letter
    resp = stack.api("GET", "/api/history/homes", token="garbage.token.here")
    assert resp.status_code == 401
    # the request never reached history
    assert stack.history.store.accepted + stack.history.store.dead_letter == before


def test_login_is_anonymous_and_yields_token(stack):
    token = stack.admin_token()
    assert token.count(".") == 2


def test_pass_through_history_read(stack):
    stack.create_user("gw-mia", "gw-mia-pass1")
    stack.grant("gw-mia", "home/gwh1", "Read")
    stack.publish_state("gwh1", "lamp", "ON", 100, kind="Switch")
    token = stack.login("gw-mia", "gw-mia-pass1")
    body = stack.api("GET", "/api/history/homes/gwh1", token=token).json()
    assert body["homeId"] == "gwh1"
    assert body["items"][0]["currentState"]["value"] == "ON"


def test_query_string_relayed(stack):
    stack.grant("admin", "home/gwh2", "Read")
    for t in (1, 2, 3):
        stack.publish_state("gwh2", "therm", "2%d.0" % t, t, kind="Temperature")
    token = stack.admin_token()
    body = stack.api("GET", "/api/history/homes/gwh2/items/therm/history",
                     token=token, params={"from": 2, "to": 3}).json()
    assert [s["timestamp"] for s in body["states"]] == [2, 3]


def test_unknown_prefix_404(stack):
    resp = stack.api("GET", "/api/nope/things", token=stack.admin_token())
    assert resp.status_code == 404
    assert resp.json()["error"] == "unknown-route"


def test_oversized_body_413(stack):
    resp = requests.post(
        stack.gateway_url + "/api/auth/token",
        data=b"x" * (1024 * 1024 + 1),
        headers={"Content-Type": "application/json"}, timeout=10)
    assert resp.status_code == 413


def test_downstream_errors_relayed_verbatim(stack):
    token = stack.admin_token()
    resp = stack.api("GET", "/api/history/homes/no-grant-home", token=token)
    assert resp.status_code == 403  # history's own decision, untouched


def test_status_lists_registered_services(stack):
    body = stack.api("GET", "/api/status", token=stack.admin_token()).json()
    assert {"security", "accesscontrol", "history", "remotecontrol"} <= set(body)
    assert body["history"][0]["baseUrl"].startswith("http://127.0.0.1:")


def test_command_round_trip_via_gateway(stack):
    stack.create_user("gw-leo", "gw-leo-pass1")
    stack.grant("gw-leo", "home/gwh3", "Write")
    stack.publish_state("gwh3", "lamp", "OFF", 1, kind="Switch")
    token = stack.login("gw-leo", "gw-leo-pass1")
    resp = stack.api("POST", "/api/control/homes/gwh3/items/lamp/command",
                     token=token, json={"value": "ON"})
    assert resp.status_code == 200
    assert resp.json()["status"] == "dispatched"
    # authorization used the relayed identity, not the gateway's
    audit = stack.api("GET", "/api/access/audit",
                      token=stack.admin_token()).json()
    checks = [e for e in audit if e.get("item") == "home/gwh3/item/lamp"]
    assert checks and checks[-1]["subject"] == "gw-leo"


def test_event_stream_proxied(stack):
    stack.grant("admin", "home/gwh4", "Read")
    stack.publish_state("gwh4", "lamp", "ON", 1, kind="Switch")
    resp = stack.api("GET", "/api/history/homes/gwh4/items/lamp/events",
                     token=stack.admin_token(), stream=True,
                     timeout=(5, 10))
    assert resp.status_code == 200
    assert resp.headers["Content-Type"].startswith("text/event-stream")
    lines = resp.iter_lines()
    first = next(l for l in lines if l)
    assert json.loads(first[len(b"data: "):])["value"] == "ON"

    threading.Timer(
        0.2, lambda: stack.publish_state("gwh4", "lamp", "OFF", 2)).start()
    second = next(l for l in lines if l and l.startswith(b"data:"))
    assert json.loads(second[len(b"data: "):])["value"] == "OFF"
    resp.close()


def test_stream_with_invalid_token_401(stack):
    resp = stack.api("GET", "/api/history/homes/gwh4/items/lamp/events",
                     token="bad.bad.bad", stream=True)
    assert resp.status_code == 401


def test_root_redirects_to_ui(stack):
    resp = requests.get(stack.gateway_url + "/", allow_redirects=False,
                        timeout=5)
    assert resp.status_code == 302
    assert resp.headers["Location"] == "/ui"


@pytest.fixture(scope="module")
def pair():
    stack = InProcStack(history_instances=2)
    yield stack
    stack.close()


class TestRoundRobin:
    def test_reads_alternate_across_instances(self, pair):
        # Skew one store so the two instances report distinct counters,
        # then watch /stats answers alternate between them.
        pair.historys[0].store.ingest("rr-skew", "x", "one", 1)
        token = pair.admin_token()
        seen = {pair.api("GET", "/api/history/stats", token=token)
                .json()["accepted"] for _ in range(6)}
        assert len(seen) == 2

    def test_ui_404_when_unconfigured(self, pair):
        resp = requests.get(pair.gateway_url + "/ui", timeout=5)
        assert resp.status_code == 404


@pytest.fixture(scope="module")
def ui_gateway(tmp_path_factory):
    ui_dir = tmp_path_factory.mktemp("ui")
    (ui_dir / "index.html").write_text("<!doctype html><title>shell</title>")
    (ui_dir / "app.js").write_text("console.log('hi');")
    from rca.gateway.service import create_service as create_gateway
    from util import SECRET
    gw = create_gateway(secret=SECRET, discovery_url="http://127.0.0.1:9",
                        port=0, ui_dir=str(ui_dir))
    gw.start()
    yield gw
    gw.stop()


class TestStaticUi:
    def test_shell_and_assets_served_without_token(self, ui_gateway):
        resp = requests.get(ui_gateway.base_url + "/ui", timeout=5)
        assert resp.status_code == 200
        assert "shell" in resp.text
        asset = requests.get(ui_gateway.base_url + "/ui/app.js", timeout=5)
        assert asset.status_code == 200
        assert "javascript" in asset.headers["Content-Type"]

    def test_unknown_paths_fall_back_to_the_shell(self, ui_gateway):
        resp = requests.get(ui_gateway.base_url + "/ui/home/h1", timeout=5)
        assert resp.status_code == 200
        assert "shell" in resp.text

    def test_path_traversal_is_blocked(self, ui_gateway):
        resp = requests.get(ui_gateway.base_url + "/ui/" +
                            "%2e%2e/" * 6 + "etc/passwd", timeout=5)
        assert resp.status_code in (200, 404)
        assert "root:" not in resp.text
