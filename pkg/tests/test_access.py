"""Grant store semantics (vs a brute-force scan oracle) and the HTTP surface."""

import pytest
import requests
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from rca.access.service import create_service
from rca.access.store import GrantStore
from rca.domain import AccessMode
from rca.errors import MalformedIdentifier
from rca.security.tokens import issue_token

SECRET = "unit-secret"

_USERS = ["mia", "leo", "zoe"]
_HOMES = ["h1", "h2"]
_ITEMS = ["lamp", "door", "thermo"]
_KEYS = ["home/%s" % h for h in _HOMES] + \
        ["home/%s/item/%s" % (h, i) for h in _HOMES for i in _ITEMS]
_MODES = [AccessMode.READ, AccessMode.WRITE]


def scan_oracle(grants, user, key, mode):
    """Brute-force: an exact grant, or a home-level grant enclosing the key."""
    if (user, key, mode) in grants:
        return True
    if "/item/" in key:
        home_key = key.split("/item/")[0]
        return (user, home_key, mode) in grants
    return False


_GRANT = st.tuples(st.sampled_from(_USERS), st.sampled_from(_KEYS),
                   st.sampled_from(_MODES))


class TestGrantStore:
    def test_default_deny(self):
        store = GrantStore()
        assert not store.check("mia", "home/h1", AccessMode.READ)
        assert not store.check("mia", "home/h1/item/lamp", AccessMode.WRITE)

    def test_grant_then_check(self):
        store = GrantStore()
        store.grant("admin", "mia", "home/h1", AccessMode.READ)
        assert store.check("mia", "home/h1", AccessMode.READ)

    def test_home_grant_covers_items(self):
        store = GrantStore()
        store.grant("admin", "mia", "home/h1", AccessMode.WRITE)
        assert store.check("mia", "home/h1/item/lamp", AccessMode.WRITE)
        assert store.check("mia", "home/h1/item/any/depth", AccessMode.WRITE)
        assert not store.check("mia", "home/h2/item/lamp", AccessMode.WRITE)

    def test_write_does_not_imply_read(self):
        store = GrantStore()
        store.grant("admin", "mia", "home/h1", AccessMode.WRITE)
        assert not store.check("mia", "home/h1", AccessMode.READ)
        assert not store.check("mia", "home/h1/item/lamp", AccessMode.READ)

    def test_item_grant_does_not_widen_to_home(self):
        store = GrantStore()
        store.grant("admin", "mia", "home/h1/item/lamp", AccessMode.READ)
        assert not store.check("mia", "home/h1", AccessMode.READ)
        assert not store.check("mia", "home/h1/item/door", AccessMode.READ)

    def test_grant_idempotent(self):
        store = GrantStore()
        first = store.grant("admin", "mia", "home/h1", AccessMode.READ)
        second = store.grant("admin", "mia", "home/h1", AccessMode.READ)
        assert first == second
        assert len(store.grants_for("mia")) == 1

    def test_revoke_idempotent_and_effective(self):
        store = GrantStore()
        store.grant("admin", "mia", "home/h1", AccessMode.READ)
        store.revoke("admin", "mia", "home/h1", AccessMode.READ)
        assert not store.check("mia", "home/h1", AccessMode.READ)
        store.revoke("admin", "mia", "home/h1", AccessMode.READ)  # no-op

    def test_malformed_key_rejected(self):
        store = GrantStore()
        with pytest.raises(MalformedIdentifier):
            store.grant("admin", "mia", "house/h1", AccessMode.READ)
        with pytest.raises(MalformedIdentifier):
            store.check("mia", "nonsense", AccessMode.READ)

    def test_journal_replay(self, tmp_path):
        path = str(tmp_path / "grants.jsonl")
        store = GrantStore(journal_path=path)
        store.grant("admin", "mia", "home/h1", AccessMode.READ)
        store.grant("admin", "mia", "home/h2", AccessMode.WRITE)
        store.revoke("admin", "mia", "home/h2", AccessMode.WRITE)
        store.close()
        reborn = GrantStore(journal_path=path)
        assert reborn.check("mia", "home/h1", AccessMode.READ)
        assert not reborn.check("mia", "home/h2", AccessMode.WRITE)

    @given(st.lists(_GRANT, max_size=12, unique=True),
           st.sampled_from(_USERS), st.sampled_from(_KEYS),
           st.sampled_from(_MODES))
    @settings(max_examples=400)
    def test_coverage_matches_scan_oracle(self, grants, user, key, mode):
        store = GrantStore()
        for g_user, g_key, g_mode in grants:
            store.grant("admin", g_user, g_key, g_mode)
        assert store.check(user, key, mode) == scan_oracle(set(grants), user,
                                                           key, mode)

    @given(st.lists(_GRANT, max_size=10, unique=True), _GRANT)
    @settings(max_examples=200)
    def test_grant_revoke_restores_check_function(self, grants, extra):
        assume(extra not in grants)  # a pre-existing grant would be removed
        store = GrantStore()
        for g in grants:
            store.grant("admin", g[0], g[1], g[2])
        before = {(u, k, m): store.check(u, k, m)
                  for u in _USERS for k in _KEYS for m in _MODES}
        store.grant("admin", extra[0], extra[1], extra[2])
        store.revoke("admin", extra[0], extra[1], extra[2])
        after = {(u, k, m): store.check(u, k, m)
                 for u in _USERS for k in _KEYS for m in _MODES}
        assert before == after

    def test_grants_for_sorted(self):
        store = GrantStore()
        store.grant("admin", "mia", "home/h2", AccessMode.WRITE)
        store.grant("admin", "mia", "home/h1", AccessMode.READ)
        store.grant("admin", "mia", "home/h1/item/lamp", AccessMode.READ)
        keys = [(g.accessItem, g.mode.value) for g in store.grants_for("mia")]
        assert keys == sorted(keys)


@pytest.fixture(scope="module")
def svc():
    service = create_service(secret=SECRET, port=0, verify_users=False)
    service.start()
    yield service
    service.stop()


def _headers(subject, roles=("caregiver",)):
    return {"Authorization": "Bearer %s"
            % issue_token(SECRET, subject, roles)}


def _grant(svc, username, item, mode, headers=None):
    return requests.post(svc.base_url + "/access/grants",
                         json={"username": username, "accessItem": item,
                               "mode": mode},
                         headers=headers or _headers("root", ("admin",)),
                         timeout=5)


class TestHttpSurface:
    def test_admin_grant_and_check(self, svc):
        assert _grant(svc, "mia", "home/g1", "Read").status_code == 200
        resp = requests.get(svc.base_url + "/access/check",
                            params={"user": "mia", "item": "home/g1/item/lamp",
                                    "mode": "Read"},
                            headers=_headers("mia"), timeout=5)
        assert resp.json() == {"decision": "allow"}

    def test_non_admin_grant_forbidden(self, svc):
        resp = _grant(svc, "mia", "home/g2", "Read", headers=_headers("mia"))
        assert resp.status_code == 403

    def test_non_admin_revoke_forbidden(self, svc):
        resp = requests.delete(svc.base_url + "/access/grants",
                               json={"username": "mia", "accessItem": "home/g1",
                                     "mode": "Read"},
                               headers=_headers("mia"), timeout=5)
        assert resp.status_code == 403

    def test_revoke_flips_decision(self, svc):
        _grant(svc, "leo", "home/g3", "Write")
        requests.delete(svc.base_url + "/access/grants",
                        json={"username": "leo", "accessItem": "home/g3",
                              "mode": "Write"},
                        headers=_headers("root", ("admin",)), timeout=5)
        resp = requests.get(svc.base_url + "/access/check",
                            params={"user": "leo", "item": "home/g3",
                                    "mode": "Write"},
                            headers=_headers("leo"), timeout=5)
        assert resp.json() == {"decision": "deny"}

    def test_list_own_grants_only(self, svc):
        _grant(svc, "zoe", "home/g4", "Read")
        own = requests.get(svc.base_url + "/access/grants/zoe",
                           headers=_headers("zoe"), timeout=5)
        assert own.status_code == 200
        assert {g["accessItem"] for g in own.json()} == {"home/g4"}
        other = requests.get(svc.base_url + "/access/grants/zoe",
                             headers=_headers("mia"), timeout=5)
        assert other.status_code == 403
        as_admin = requests.get(svc.base_url + "/access/grants/zoe",
                                headers=_headers("root", ("admin",)), timeout=5)
        assert as_admin.status_code == 200
        assert as_admin.json() == own.json()

    def test_malformed_mode_400(self, svc):
        resp = _grant(svc, "mia", "home/g5", "Execute")
        assert resp.status_code == 400
        assert resp.json()["error"] == "malformed-mode"

    def test_malformed_item_400(self, svc):
        resp = _grant(svc, "mia", "house/5", "Read")
        assert resp.status_code == 400
        assert resp.json()["error"] == "malformed-access-item"

    def test_no_token_401(self, svc):
        resp = requests.get(svc.base_url + "/access/check",
                            params={"item": "home/g1", "mode": "Read"},
                            timeout=5)
        assert resp.status_code == 401

    def test_audit_records_validated_subject(self, svc):
        _grant(svc, "mia", "home/g6", "Read")
        requests.get(svc.base_url + "/access/check",
                     params={"user": "mia", "item": "home/g6", "mode": "Read"},
                     headers=_headers("mia"), timeout=5)
        audit = requests.get(svc.base_url + "/access/audit",
                             headers=_headers("root", ("admin",)), timeout=5)
        assert audit.status_code == 200
        entries = audit.json()
        checks = [e for e in entries if e["operation"] == "check"
                  and e.get("item") == "home/g6"]
        assert checks and checks[-1]["subject"] == "mia"
        assert checks[-1]["decision"] == "allow"
        denied = requests.get(svc.base_url + "/access/audit",
                              headers=_headers("mia"), timeout=5)
        assert denied.status_code == 403
