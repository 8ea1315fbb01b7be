/**
 * Gateway client. All traffic goes through /api/** on the origin that
 * served the app; the bearer token lives in sessionStorage only and is
 * sent exclusively as an Authorization header — never in a URL.
 */

import type { ItemKind } from "./format.js";
import type { AccessMode, Grant } from "./grants.js";

const TOKEN_KEY = "rca.token";
const USER_KEY = "rca.user";
const ROLES_KEY = "rca.roles";

export class GatewayError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export interface HomeSummary {
  homeId: string;
  label: string;
  itemCount: number;
}

export interface ItemState {
  timestamp: number;
  value: string;
  seq: number;
}

export interface HomeItem {
  itemId: string;
  kind: ItemKind;
  label: string;
  currentState: ItemState | null;
}

export interface HomeDetail {
  homeId: string;
  label: string;
  items: HomeItem[];
}

export interface StateEvent extends ItemState {
  homeId: string;
  itemId: string;
}

export interface CommandRecord {
  homeId: string;
  itemId: string;
  value: string;
  issuedBy: string;
  issuedAt: number;
  commandId: string;
  label?: string | null;
}

export class ApiClient {
  /** Invoked on any 401 so the shell can route to the login view. */
  onUnauthorized: () => void = () => {};

  constructor(private base: string = "") {}

  get token(): string | null {
    return sessionStorage.getItem(TOKEN_KEY);
  }

  get username(): string | null {
    return sessionStorage.getItem(USER_KEY);
  }

  get isAdmin(): boolean {
    return (sessionStorage.getItem(ROLES_KEY) ?? "").split(",").includes("admin");
  }

  loggedIn(): boolean {
    return this.token !== null;
  }

  logout(): void {
    sessionStorage.removeItem(TOKEN_KEY);
    sessionStorage.removeItem(USER_KEY);
    sessionStorage.removeItem(ROLES_KEY);
  }

  private async request<T>(
    method: string, path: string, body?: unknown,
  ): Promise<T> {
    const headers: Record<string, string> = {};
    const token = this.token;
    if (token) headers["Authorization"] = `Bearer ${token}`;
    if (body !== undefined) headers["Content-Type"] = "application/json";
    const resp = await fetch(this.base + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (resp.status === 401) {
      this.logout();
      this.onUnauthorized();
    }
    if (!resp.ok) {
      let code = "error";
      let message = `${resp.status}`;
      try {
        const payload = await resp.json();
        code = payload.error ?? code;
        message = payload.message ?? message;
      } catch {
        /* non-JSON error body */
      }
      throw new GatewayError(resp.status, code, message);
    }
    return (await resp.json()) as T;
  }

  async login(username: string, password: string): Promise<void> {
    const out = await this.request<{ token: string }>(
      "POST", "/api/auth/token", { username, password });
    sessionStorage.setItem(TOKEN_KEY, out.token);
    sessionStorage.setItem(USER_KEY, username);
    const principal = await this.request<{ roles: string[] }>(
      "POST", "/api/auth/validate", { token: out.token });
    sessionStorage.setItem(ROLES_KEY, principal.roles.join(","));
  }

  listHomes(): Promise<HomeSummary[]> {
    return this.request("GET", "/api/history/homes");
  }

  getHome(homeId: string): Promise<HomeDetail> {
    return this.request("GET", `/api/history/homes/${encodeURIComponent(homeId)}`);
  }

  itemHistory(
    homeId: string, itemId: string, limit = 200,
  ): Promise<{ states: ItemState[] }> {
    return this.request(
      "GET",
      `/api/history/homes/${encodeURIComponent(homeId)}/items/${itemId}` +
        `/history?limit=${limit}`);
  }

  sendCommand(
    homeId: string, itemId: string, value: string,
  ): Promise<{ commandId: string }> {
    return this.request(
      "POST",
      `/api/control/homes/${encodeURIComponent(homeId)}/items/${itemId}/command`,
      { value, label: "caregiver-ui" });
  }

  commandLog(homeId: string, limit = 20): Promise<CommandRecord[]> {
    return this.request(
      "GET",
      `/api/control/homes/${encodeURIComponent(homeId)}/commands?limit=${limit}`);
  }

  myGrants(): Promise<Grant[]> {
    const user = this.username ?? "";
    return this.request("GET", `/api/access/grants/${encodeURIComponent(user)}`);
  }

  grantsFor(username: string): Promise<Grant[]> {
    return this.request("GET", `/api/access/grants/${encodeURIComponent(username)}`);
  }

  grant(username: string, accessItem: string, mode: AccessMode): Promise<Grant> {
    return this.request("POST", "/api/access/grants",
      { username, accessItem, mode });
  }

  revoke(username: string, accessItem: string, mode: AccessMode): Promise<void> {
    return this.request("DELETE", "/api/access/grants",
      { username, accessItem, mode });
  }

  createUser(username: string, password: string, roles: string[]): Promise<void> {
    return this.request("POST", "/api/users", { username, password, roles });
  }

  /**
   * Opens the live state stream for one item. Returns an abort function.
   * The caller receives each event plus open/error notifications so it can
   * drive reconnect backoff and the polling fallback.
   */
  streamItem(
    homeId: string, itemId: string,
    handlers: {
      onEvent: (ev: StateEvent) => void;
      onOpen?: () => void;
      onClose?: () => void;
    },
  ): () => void {
    const controller = new AbortController();
    const token = this.token;
    const run = async () => {
      const resp = await fetch(
        this.base +
          `/api/history/homes/${encodeURIComponent(homeId)}/items/${itemId}/events`,
        {
          headers: {
            Accept: "text/event-stream",
            ...(token ? { Authorization: `Bearer ${token}` } : {}),
          },
          signal: controller.signal,
        });
      if (resp.status === 401) {
        this.logout();
        this.onUnauthorized();
        return;
      }
      if (!resp.ok || !resp.body) throw new GatewayError(resp.status, "stream", "stream failed");
      handlers.onOpen?.();
      const { SseParser } = await import("./sse.js");
      const parser = new SseParser();
      const decoder = new TextDecoder();
      const reader = resp.body.getReader();
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        for (const data of parser.feed(decoder.decode(value, { stream: true }))) {
          try {
            handlers.onEvent(JSON.parse(data) as StateEvent);
          } catch {
            /* malformed frame: skip */
          }
        }
      }
    };
    run().catch(() => {}).finally(() => handlers.onClose?.());
    return () => controller.abort();
  }
}
