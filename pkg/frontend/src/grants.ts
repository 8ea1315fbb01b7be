/**
 * Client-side mirror of the access-control decision rule, used only to
 * decide which controls to render enabled. The server re-checks every
 * request; this module must agree with it so the UI never offers an
 * action that would be denied.
 *
 * Rules: default deny; a grant on "home/{homeId}" covers every item in
 * that home; Write does not imply Read.
 */

export type AccessMode = "Read" | "Write";

export interface Grant {
  username: string;
  accessItem: string;
  mode: AccessMode;
}

export function accessItemFor(homeId: string, itemId?: string): string {
  return itemId === undefined ? `home/${homeId}` : `home/${homeId}/item/${itemId}`;
}

function has(grants: Grant[], item: string, mode: AccessMode): boolean {
  return grants.some((g) => g.accessItem === item && g.mode === mode);
}

export function allowed(
  grants: Grant[], homeId: string, itemId: string | undefined, mode: AccessMode,
): boolean {
  if (has(grants, accessItemFor(homeId), mode)) return true;
  return itemId !== undefined && has(grants, accessItemFor(homeId, itemId), mode);
}

export function canRead(grants: Grant[], homeId: string, itemId?: string): boolean {
  return allowed(grants, homeId, itemId, "Read");
}

export function canWrite(grants: Grant[], homeId: string, itemId?: string): boolean {
  return allowed(grants, homeId, itemId, "Write");
}
