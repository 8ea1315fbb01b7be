"""Operator CLI: every subcommand maps 1:1 to a gateway endpoint.

All traffic goes through the gateway; the CLI is an external caller. The
bearer token is cached in an owner-only credentials file after login and
never printed.

Exit codes: 1 HTTP error, 2 connectivity failure, 3 malformed local input.
"""

from __future__ import annotations

import argparse
import getpass
import json
import os
import stat
import sys
import time

import requests

DEFAULT_CREDENTIALS = os.path.join(os.path.expanduser("~"), ".config", "rca",
                                   "credentials.json")


class CliError(Exception):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


def _credentials_path() -> str:
    return os.environ.get("RCA_CREDENTIALS") or DEFAULT_CREDENTIALS


def _load_credentials() -> dict:
    try:
        with open(_credentials_path(), "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, ValueError):
        return {}


def _save_credentials(creds: dict):
    path = _credentials_path()
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(creds, fh)
    os.chmod(path, stat.S_IRUSR | stat.S_IWUSR)


def _gateway(args) -> str:
    url = args.gateway or os.environ.get("RCA_GATEWAY") \
        or _load_credentials().get("gateway")
    if not url:
        raise CliError("no gateway configured (--gateway or RCA_GATEWAY)", 3)
    return url.rstrip("/")


def _token() -> str:
    creds = _load_credentials()
    token = creds.get("token")
    if not token:
        raise CliError("not logged in; run: rca auth login <username>", 1)
    if creds.get("expiresAt", 0) <= int(time.time() * 1000):
        raise CliError("session expired; run: rca auth login <username>", 1)
    return token


def _request(args, method: str, path: str, body=None, auth: bool = True,
             params=None) -> requests.Response:
    headers = {}
    if auth:
        headers["Authorization"] = "Bearer %s" % _token()
    try:
        resp = requests.request(method, _gateway(args) + path, json=body,
                                headers=headers, params=params, timeout=10)
    except requests.RequestException as exc:
        raise CliError("cannot reach gateway: %s" % exc, 2)
    if resp.status_code == 401 and auth:
        raise CliError("unauthorized (token rejected); re-login with: "
                       "rca auth login <username>", 1)
    if resp.status_code >= 400:
        try:
            info = resp.json()
            message = "%s: %s" % (info.get("error", resp.status_code),
                                  info.get("message", ""))
        except ValueError:
            message = "HTTP %d" % resp.status_code
        raise CliError(message, 1)
    return resp


def _emit(args, data, table_rows=None, headers=None):
    if args.json:
        print(json.dumps(data, indent=2, sort_keys=True))
        return
    if table_rows is None:
        print(json.dumps(data, indent=2, sort_keys=True))
        return
    rows = [[str(cell) for cell in row] for row in table_rows]
    if headers:
        rows.insert(0, list(headers))
    if not rows:
        print("(none)")
        return
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    for idx, row in enumerate(rows):
        print("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
        if headers and idx == 0:
            print("  ".join("-" * w for w in widths))


def _read_password(args, prompt: str = "Password: ") -> str:
    if getattr(args, "password", None):
        return args.password
    if getattr(args, "password_stdin", False):
        return sys.stdin.readline().rstrip("\n")
    return getpass.getpass(prompt)


# -- subcommand handlers ----------------------------------------------------

def cmd_auth_login(args):
    password = _read_password(args)
    try:
        resp = requests.post(_gateway(args) + "/api/auth/token",
                             json={"username": args.username, "password": password},
                             timeout=10)
    except requests.RequestException as exc:
        raise CliError("cannot reach gateway: %s" % exc, 2)
    if resp.status_code != 200:
        raise CliError("login failed: %s" % resp.json().get("message", ""), 1)
    body = resp.json()
    _save_credentials({"gateway": _gateway(args), "token": body["token"],
                       "expiresAt": body["expiresAt"], "username": args.username})
    _emit(args, {"loggedIn": args.username, "expiresAt": body["expiresAt"]},
          [["logged in as", args.username]])


def cmd_auth_logout(args):
    try:
        os.remove(_credentials_path())
    except OSError:
        pass
    _emit(args, {"loggedOut": True}, [["logged out"]])


def cmd_users_add(args):
    password = _read_password(args, "New user password: ")
    roles = [r.strip() for r in args.roles.split(",") if r.strip()]
    if not roles:
        raise CliError("at least one role required", 3)
    resp = _request(args, "POST", "/api/users",
                    {"username": args.username, "password": password, "roles": roles})
    body = resp.json()
    _emit(args, body, [[body["username"], ",".join(body["roles"])]],
          headers=("user", "roles"))


def cmd_users_passwd(args):
    password = _read_password(args, "New password: ")
    resp = _request(args, "PUT", "/api/users/%s/password" % args.username,
                    {"password": password})
    _emit(args, resp.json(), [["password changed for", args.username]])


def _mode_arg(raw: str) -> str:
    mode = raw.capitalize()
    if mode not in ("Read", "Write"):
        raise CliError("mode must be read or write", 3)
    return mode


def cmd_grants_add(args):
    resp = _request(args, "POST", "/api/access/grants",
                    {"username": args.username, "accessItem": args.item,
                     "mode": _mode_arg(args.mode)})
    body = resp.json()
    _emit(args, body, [[body["username"], body["accessItem"], body["mode"]]],
          headers=("user", "item", "mode"))


def cmd_grants_revoke(args):
    _request(args, "DELETE", "/api/access/grants",
             {"username": args.username, "accessItem": args.item,
              "mode": _mode_arg(args.mode)})
    _emit(args, {"revoked": True}, [["revoked"]])


def cmd_grants_list(args):
    body = _request(args, "GET", "/api/access/grants/%s" % args.username).json()
    _emit(args, body, [[g["accessItem"], g["mode"], g["grantedBy"]] for g in body],
          headers=("item", "mode", "granted by"))


def cmd_homes_list(args):
    body = _request(args, "GET", "/api/history/homes").json()
    _emit(args, body, [[h["homeId"], h["label"], h["itemCount"]] for h in body],
          headers=("home", "label", "items"))


def cmd_homes_show(args):
    body = _request(args, "GET", "/api/history/homes/%s" % args.home_id).json()
    rows = []
    for item in body["items"]:
        state = item.get("currentState") or {}
        rows.append([item["itemId"], item["kind"],
                     state.get("value", "-"), state.get("timestamp", "-")])
    _emit(args, body, rows, headers=("item", "kind", "value", "timestamp"))


def cmd_homes_history(args):
    params = {}
    if args.from_ts is not None:
        params["from"] = args.from_ts
    if args.to_ts is not None:
        params["to"] = args.to_ts
    if args.limit is not None:
        params["limit"] = args.limit
    body = _request(args, "GET", "/api/history/homes/%s/items/%s/history"
                    % (args.home_id, args.item_id), params=params).json()
    _emit(args, body, [[s["timestamp"], s["value"]] for s in body["states"]],
          headers=("timestamp", "value"))


def cmd_command_send(args):
    payload = {"value": args.value}
    if args.label:
        payload["label"] = args.label
    body = _request(args, "POST", "/api/control/homes/%s/items/%s/command"
                    % (args.home_id, args.item_id), payload).json()
    _emit(args, body, [[body["commandId"], body["status"]]],
          headers=("command", "status"))


def cmd_command_log(args):
    params = {"limit": args.limit} if args.limit else None
    body = _request(args, "GET", "/api/control/homes/%s/commands" % args.home_id,
                    params=params).json()
    _emit(args, body,
          [[c["commandId"][:12], c["itemId"], c["value"], c["issuedBy"]] for c in body],
          headers=("command", "item", "value", "issued by"))


def cmd_status(args):
    body = _request(args, "GET", "/api/status").json()
    rows = [[name, len(instances),
             ";".join(i["baseUrl"] for i in instances)]
            for name, instances in sorted(body.items())]
    _emit(args, body, rows, headers=("service", "instances", "addresses"))


# -- argument wiring --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rca")
    parser.add_argument("--gateway", help="gateway base URL (env RCA_GATEWAY)")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command", required=True)

    auth = sub.add_parser("auth").add_subparsers(dest="sub", required=True)
    login = auth.add_parser("login")
    login.add_argument("username")
    login.add_argument("--password")
    login.add_argument("--password-stdin", action="store_true")
    login.set_defaults(func=cmd_auth_login)
    auth.add_parser("logout").set_defaults(func=cmd_auth_logout)

    users = sub.add_parser("users").add_subparsers(dest="sub", required=True)
    add = users.add_parser("add")
    add.add_argument("username")
    add.add_argument("--roles", required=True, help="comma-separated roles")
    add.add_argument("--password")
    add.add_argument("--password-stdin", action="store_true")
    add.set_defaults(func=cmd_users_add)
    passwd = users.add_parser("passwd")
    passwd.add_argument("username")
    passwd.add_argument("--password")
    passwd.add_argument("--password-stdin", action="store_true")
    passwd.set_defaults(func=cmd_users_passwd)

    grants = sub.add_parser("grants").add_subparsers(dest="sub", required=True)
    gadd = grants.add_parser("add")
    gadd.add_argument("username")
    gadd.add_argument("item")
    gadd.add_argument("mode")
    gadd.set_defaults(func=cmd_grants_add)
    grevoke = grants.add_parser("revoke")
    grevoke.add_argument("username")
    grevoke.add_argument("item")
    grevoke.add_argument("mode")
    grevoke.set_defaults(func=cmd_grants_revoke)
    glist = grants.add_parser("list")
    glist.add_argument("username")
    glist.set_defaults(func=cmd_grants_list)

    homes = sub.add_parser("homes").add_subparsers(dest="sub", required=True)
    homes.add_parser("list").set_defaults(func=cmd_homes_list)
    show = homes.add_parser("show")
    show.add_argument("home_id")
    show.set_defaults(func=cmd_homes_show)
    history = homes.add_parser("history")
    history.add_argument("home_id")
    history.add_argument("item_id")
    history.add_argument("--from", dest="from_ts", type=int)
    history.add_argument("--to", dest="to_ts", type=int)
    history.add_argument("--limit", type=int)
    history.set_defaults(func=cmd_homes_history)

    command = sub.add_parser("command").add_subparsers(dest="sub", required=True)
    send = command.add_parser("send")
    send.add_argument("home_id")
    send.add_argument("item_id")
    send.add_argument("value")
    send.add_argument("--label")
    send.set_defaults(func=cmd_command_send)
    clog = command.add_parser("log")
    clog.add_argument("home_id")
    clog.add_argument("--limit", type=int)
    clog.set_defaults(func=cmd_command_log)

    sub.add_parser("status").set_defaults(func=cmd_status)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except CliError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
