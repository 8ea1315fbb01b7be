/**
 * Application shell: hash-routed single-page app for caregivers and
 * admins. Views are plain render functions into #app; every view cleans
 * up its streams and timers when the route changes.
 */

import { ApiClient, GatewayError } from "./api.js";
import type { HomeItem, StateEvent } from "./api.js";
import { Backoff } from "./backoff.js";
import { CommandTracker } from "./confirm.js";
import { formatValue, hsvToCss, parseColor, validateValue } from "./format.js";
import type { ItemKind } from "./format.js";
import { canWrite } from "./grants.js";
import type { Grant } from "./grants.js";

const api = new ApiClient();
const tracker = new CommandTracker();
const cleanups: Array<() => void> = [];

function cleanup(): void {
  while (cleanups.length) cleanups.pop()!();
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, attrs: Record<string, string> = {}, ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  node.append(...children);
  return node;
}

function app(): HTMLElement {
  return document.getElementById("app")!;
}

// -- toasts ------------------------------------------------------------------

function toast(message: string, kind: "info" | "error" = "error"): void {
  const box = document.getElementById("toasts")!;
  const item = el("div", { class: `toast toast-${kind}` }, message);
  box.append(item);
  setTimeout(() => item.remove(), 5000);
}

function describe(err: unknown): string {
  if (err instanceof GatewayError) return `${err.code}: ${err.message}`;
  return err instanceof Error ? err.message : String(err);
}

// -- navigation --------------------------------------------------------------

function go(hash: string): void {
  if (location.hash === hash) render();
  else location.hash = hash;
}

api.onUnauthorized = () => go("#/login");

function navBar(): HTMLElement {
  const nav = el("nav", {},
    el("a", { href: "#/homes" }, "Homes"));
  if (api.isAdmin) nav.append(el("a", { href: "#/grants" }, "Access"));
  const user = el("span", { class: "nav-user" }, api.username ?? "");
  const out = el("button", { class: "link" }, "Log out");
  out.onclick = () => { api.logout(); go("#/login"); };
  nav.append(el("span", { class: "nav-right" }, user, out));
  return nav;
}

// -- login view --------------------------------------------------------------

function loginView(): void {
  const user = el("input", { placeholder: "username", autocomplete: "username" });
  const pass = el("input", { placeholder: "password", type: "password",
    autocomplete: "current-password" });
  const button = el("button", {}, "Sign in");
  const form = el("form", { class: "login" },
    el("h1", {}, "Remote Care"), user, pass, button);
  form.onsubmit = async (ev) => {
    ev.preventDefault();
    button.toggleAttribute("disabled", true);
    try {
      await api.login(user.value.trim(), pass.value);
      go("#/homes");
    } catch (err) {
      toast(describe(err));
    } finally {
      button.toggleAttribute("disabled", false);
    }
  };
  app().replaceChildren(form);
  user.focus();
}

// -- homes view --------------------------------------------------------------

async function homesView(): Promise<void> {
  const list = el("div", { class: "cards" });
  app().replaceChildren(navBar(), el("h1", {}, "Homes"), list);
  try {
    const homes = await api.listHomes();
    if (!homes.length) {
      list.append(el("p", { class: "empty" }, "No homes are shared with you."));
    }
    for (const home of homes) {
      const card = el("a", { class: "card", href: `#/home/${home.homeId}` },
        el("h2", {}, home.label || home.homeId),
        el("p", {}, `${home.itemCount} device${home.itemCount === 1 ? "" : "s"}`));
      list.append(card);
    }
  } catch (err) {
    toast(describe(err));
  }
}

// -- home detail view --------------------------------------------------------

const MAX_STREAMS = 6;
const POLL_INTERVAL_MS = 5_000;
const STATUS_TICK_MS = 1_000;

interface Row {
  item: HomeItem;
  value: HTMLElement;
  status: HTMLElement;
  swatch: HTMLElement | null;
}

function renderState(row: Row): void {
  const state = row.item.currentState;
  row.value.textContent = formatValue(row.item.kind, state ? state.value : null);
  if (row.swatch) {
    const hsv = state ? parseColor(state.value) : null;
    row.swatch.style.background = hsv ? hsvToCss(hsv) : "transparent";
  }
}

function renderStatus(row: Row, homeId: string): void {
  const status = tracker.status(homeId, row.item.itemId, Date.now());
  row.status.textContent = status === "idle" ? "" : status;
  row.status.className = `status status-${status}`;
}

function sendCommand(homeId: string, row: Row, value: string): void {
  if (!validateValue(row.item.kind, value)) {
    toast(`"${value}" is not a valid ${row.item.kind} value`);
    return;
  }
  tracker.commandSent(homeId, row.item.itemId, value, Date.now());
  renderStatus(row, homeId);
  api.sendCommand(homeId, row.item.itemId, value).catch((err) => {
    tracker.clear(homeId, row.item.itemId);
    renderStatus(row, homeId);
    toast(describe(err));
  });
}

function controlsFor(homeId: string, row: Row, writable: boolean): HTMLElement {
  const box = el("div", { class: "controls" });
  const disable = (node: HTMLElement) => {
    if (!writable) node.toggleAttribute("disabled", true);
    return node;
  };
  const send = (value: string) => sendCommand(homeId, row, value);
  switch (row.item.kind) {
    case "Switch": {
      for (const value of ["ON", "OFF"]) {
        const b = disable(el("button", {}, value));
        b.onclick = () => send(value);
        box.append(b);
      }
      break;
    }
    case "Dimmer": {
      const slider = disable(el("input",
        { type: "range", min: "0", max: "100", step: "1" })) as HTMLInputElement;
      const current = row.item.currentState?.value;
      if (current && validateValue("Dimmer", current)) slider.value = current;
      slider.onchange = () => send(String(Math.round(Number(slider.value))));
      box.append(slider);
      break;
    }
    case "Color": {
      const picker = disable(el("input", { type: "color" })) as HTMLInputElement;
      picker.onchange = () => {
        const hex = picker.value;
        const r = parseInt(hex.slice(1, 3), 16) / 255;
        const g = parseInt(hex.slice(3, 5), 16) / 255;
        const b = parseInt(hex.slice(5, 7), 16) / 255;
        const max = Math.max(r, g, b), min = Math.min(r, g, b), d = max - min;
        let h = 0;
        if (d > 0) {
          if (max === r) h = 60 * (((g - b) / d) % 6);
          else if (max === g) h = 60 * ((b - r) / d + 2);
          else h = 60 * ((r - g) / d + 4);
        }
        h = (h + 360) % 360;
        const s = max === 0 ? 0 : d / max;
        const round3 = (x: number) => Math.round(x * 1000) / 1000;
        send(`(${Math.round(h)},${round3(s)},${round3(max)})`);
      };
      box.append(picker);
      break;
    }
    case "Temperature": {
      const input = disable(el("input",
        { type: "number", step: "0.5", min: "-50", max: "150",
          class: "num" })) as HTMLInputElement;
      const b = disable(el("button", {}, "Set"));
      b.onclick = () => send(input.value.trim());
      box.append(input, b);
      break;
    }
    case "Text": {
      const input = disable(el("input", { class: "text" })) as HTMLInputElement;
      const b = disable(el("button", {}, "Send"));
      b.onclick = () => send(input.value);
      box.append(input, b);
      break;
    }
  }
  return box;
}

function historyChart(kind: ItemKind,
                      states: { timestamp: number; value: string }[]): HTMLElement {
  const numeric = states
    .filter((s) => validateValue(kind, s.value))
    .map((s) => ({ t: s.timestamp, y: Number(s.value) }))
    .filter((p) => Number.isFinite(p.y));
  if ((kind !== "Dimmer" && kind !== "Temperature") || numeric.length < 2) {
    const list = el("ul", { class: "history-list" });
    for (const s of [...states].reverse().slice(0, 20)) {
      list.append(el("li", {},
        `${new Date(s.timestamp).toLocaleTimeString()} — ${s.value}`));
    }
    return states.length ? list : el("p", { class: "empty" }, "No history yet.");
  }
  const W = 560, H = 140, PAD = 8;
  const ts = numeric.map((p) => p.t), ys = numeric.map((p) => p.y);
  const t0 = Math.min(...ts), t1 = Math.max(...ts);
  const y0 = Math.min(...ys), y1 = Math.max(...ys);
  const x = (t: number) =>
    PAD + (t1 === t0 ? 0 : ((t - t0) / (t1 - t0)) * (W - 2 * PAD));
  const y = (v: number) =>
    H - PAD - (y1 === y0 ? 0 : ((v - y0) / (y1 - y0)) * (H - 2 * PAD));
  const points = numeric.map((p) => `${x(p.t).toFixed(1)},${y(p.y).toFixed(1)}`);
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", `0 0 ${W} ${H}`);
  svg.setAttribute("class", "chart");
  const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
  line.setAttribute("points", points.join(" "));
  line.setAttribute("fill", "none");
  line.setAttribute("stroke", "currentColor");
  line.setAttribute("stroke-width", "1.5");
  svg.append(line);
  const wrap = el("div", { class: "chart-wrap" });
  wrap.append(svg,
    el("div", { class: "chart-range" }, `${y0} … ${y1}`));
  return wrap;
}

async function homeView(homeId: string): Promise<void> {
  let grants: Grant[] = [];
  let home;
  try {
    [home, grants] = await Promise.all([api.getHome(homeId), api.myGrants()]);
  } catch (err) {
    toast(describe(err));
    app().replaceChildren(navBar(),
      el("p", { class: "empty" }, "Cannot load this home."));
    return;
  }

  const table = el("div", { class: "items" });
  const rows = new Map<string, Row>();
  app().replaceChildren(navBar(),
    el("h1", {}, home.label || home.homeId), table);

  for (const item of home.items) {
    const value = el("span", { class: "value" });
    const status = el("span", { class: "status" });
    const swatch = item.kind === "Color"
      ? el("span", { class: "swatch" }) : null;
    const row: Row = { item, value, status, swatch };
    rows.set(item.itemId, row);
    renderState(row);

    const writable = canWrite(grants, homeId, item.itemId);
    const histBtn = el("button", { class: "link" }, "History");
    const histPanel = el("div", { class: "history hidden" });
    histBtn.onclick = async () => {
      if (!histPanel.classList.toggle("hidden")) {
        try {
          const out = await api.itemHistory(homeId, item.itemId);
          histPanel.replaceChildren(historyChart(item.kind, out.states));
        } catch (err) {
          toast(describe(err));
        }
      }
    };
    const line = el("div", { class: "item-row" },
      el("span", { class: "item-name" },
        item.label || item.itemId,
        el("small", {}, ` ${item.kind}`)),
      ...(swatch ? [swatch] : []),
      value, status,
      controlsFor(homeId, row, writable),
      histBtn);
    table.append(line, histPanel);
  }

  // Live updates: one stream per item (capped), plus periodic polling as
  // the fallback for anything the streams miss.
  const onEvent = (ev: StateEvent) => {
    const row = rows.get(ev.itemId);
    if (!row) return;
    const cur = row.item.currentState;
    if (!cur || ev.timestamp > cur.timestamp ||
        (ev.timestamp === cur.timestamp && ev.seq > cur.seq)) {
      row.item.currentState = { timestamp: ev.timestamp, value: ev.value, seq: ev.seq };
      renderState(row);
    }
    tracker.telemetry(homeId, ev.itemId, ev.value, Date.now());
    renderStatus(row, homeId);
  };

  for (const item of home.items.slice(0, MAX_STREAMS)) {
    const backoff = new Backoff();
    let stopped = false;
    let abort = () => {};
    const connect = () => {
      if (stopped) return;
      abort = api.streamItem(homeId, item.itemId, {
        onEvent,
        onOpen: () => backoff.reset(),
        onClose: () => {
          if (!stopped) setTimeout(connect, backoff.nextDelayMs());
        },
      });
    };
    connect();
    cleanups.push(() => { stopped = true; abort(); });
  }

  const poll = setInterval(async () => {
    try {
      const fresh = await api.getHome(homeId);
      for (const item of fresh.items) {
        const row = rows.get(item.itemId);
        if (row && item.currentState) {
          onEvent({ homeId, itemId: item.itemId, ...item.currentState });
        }
      }
    } catch {
      /* transient poll failure: streams and the next poll cover it */
    }
  }, POLL_INTERVAL_MS);
  const tick = setInterval(() => {
    for (const row of rows.values()) renderStatus(row, homeId);
  }, STATUS_TICK_MS);
  cleanups.push(() => { clearInterval(poll); clearInterval(tick); });
}

// -- grants admin view -------------------------------------------------------

async function grantsView(): Promise<void> {
  const userIn = el("input", { placeholder: "username" });
  const itemIn = el("input", { placeholder: "access item, e.g. home/h1" });
  const modeIn = el("select", {},
    el("option", {}, "Read"), el("option", {}, "Write"));
  const grantBtn = el("button", {}, "Grant");
  const revokeBtn = el("button", { class: "secondary" }, "Revoke");
  const listing = el("div", { class: "grant-list" });

  const refresh = async () => {
    const name = userIn.value.trim();
    if (!name) return;
    try {
      const grants = await api.grantsFor(name);
      listing.replaceChildren(
        el("h3", {}, `Grants for ${name}`),
        ...(grants.length
          ? grants.map((g) =>
            el("div", { class: "grant" }, `${g.mode} on ${g.accessItem}`))
          : [el("p", { class: "empty" }, "No grants.")]));
    } catch (err) {
      toast(describe(err));
    }
  };

  const change = (fn: () => Promise<unknown>) => async () => {
    try {
      await fn();
      toast("Saved", "info");
      await refresh();
    } catch (err) {
      toast(describe(err));
    }
  };
  grantBtn.onclick = change(() => api.grant(
    userIn.value.trim(), itemIn.value.trim(),
    modeIn.value as "Read" | "Write"));
  revokeBtn.onclick = change(() => api.revoke(
    userIn.value.trim(), itemIn.value.trim(),
    modeIn.value as "Read" | "Write"));
  userIn.onchange = refresh;

  const newUser = el("input", { placeholder: "new username" });
  const newPass = el("input", { placeholder: "password", type: "password" });
  const createBtn = el("button", {}, "Create caregiver");
  createBtn.onclick = change(() =>
    api.createUser(newUser.value.trim(), newPass.value, ["caregiver"]));

  app().replaceChildren(navBar(),
    el("h1", {}, "Access management"),
    el("section", {}, el("h2", {}, "Users"), newUser, newPass, createBtn),
    el("section", {}, el("h2", {}, "Grants"),
      userIn, itemIn, modeIn, grantBtn, revokeBtn, listing));
}

// -- router ------------------------------------------------------------------

function render(): void {
  cleanup();
  const hash = location.hash || "#/homes";
  if (!api.loggedIn() && hash !== "#/login") {
    go("#/login");
    return;
  }
  const home = /^#\/home\/([A-Za-z0-9_-]+)$/.exec(hash);
  if (hash === "#/login") loginView();
  else if (home) void homeView(home[1]);
  else if (hash === "#/grants") void grantsView();
  else void homesView();
}

window.addEventListener("hashchange", render);
render();
