/**
 * Pure helpers for the permission form's pending state.
 *
 * These only reshape the tuple being edited; nothing here decides what a
 * sub-user would actually see (that answer always comes from the gateway's
 * preview endpoint).
 */

import type { ListGrant, PermissionTupleWire, StoredList } from "./types";

export type FlagField =
  | "read_contacts"
  | "read_contacts_keyword"
  | "send_contacts"
  | "read_noncontacts"
  | "read_noncontacts_keyword"
  | "send_noncontacts"
  | "delete_allowed"
  | "mark_unread_allowed"
  | "spoof_owner_view";

export const FLAG_LABELS: Record<FlagField, string> = {
  read_contacts: "Read mail from contacts",
  read_contacts_keyword: "Read contact mail matching keywords",
  send_contacts: "Send / reply to contacts",
  read_noncontacts: "Read mail from non-contacts",
  read_noncontacts_keyword: "Read non-contact mail matching keywords",
  send_noncontacts: "Send / reply to non-contacts",
  delete_allowed: "Delete messages",
  mark_unread_allowed: "Mark messages unread",
  spoof_owner_view: "Disguise as the owner's own mailbox",
};

/** The two list pools: a read-granting list whitelists its members, a
 * read-denying one blacklists them. */
export type Pool = "granting" | "denying";

export function emptyTuple(): PermissionTupleWire {
  return {
    read_contacts: false,
    read_contacts_keyword: false,
    contact_keywords: [],
    send_contacts: false,
    read_noncontacts: false,
    read_noncontacts_keyword: false,
    noncontact_keywords: [],
    send_noncontacts: false,
    delete_allowed: false,
    mark_unread_allowed: false,
    spoof_owner_view: false,
    lists: [],
  };
}

export function cloneTuple(tuple: PermissionTupleWire): PermissionTupleWire {
  return {
    ...tuple,
    contact_keywords: [...tuple.contact_keywords],
    noncontact_keywords: [...tuple.noncontact_keywords],
    lists: tuple.lists.map((grant) => ({ ...grant, keywords: [...grant.keywords] })),
  };
}

export function setFlag(
  tuple: PermissionTupleWire,
  field: FlagField,
  value: boolean,
): PermissionTupleWire {
  return { ...cloneTuple(tuple), [field]: value };
}

export function setKeywords(
  tuple: PermissionTupleWire,
  which: "contact" | "noncontact",
  keywords: string[],
): PermissionTupleWire {
  const cleaned = normalizeKeywords(keywords);
  const next = cloneTuple(tuple);
  if (which === "contact") next.contact_keywords = cleaned;
  else next.noncontact_keywords = cleaned;
  return next;
}

export function parseKeywordInput(raw: string): string[] {
  return normalizeKeywords(raw.split(","));
}

function normalizeKeywords(keywords: string[]): string[] {
  const seen = new Set<string>();
  for (const keyword of keywords) {
    const cleaned = keyword.trim().toLowerCase();
    if (cleaned) seen.add(cleaned);
  }
  return [...seen].sort();
}

export function poolOf(grant: ListGrant): Pool {
  return grant.read ? "granting" : "denying";
}

/** Reference an account list in the pending tuple.  New references land in
 * the denying pool with no keywords — the stored account default. */
export function referenceList(
  tuple: PermissionTupleWire,
  list: StoredList,
): PermissionTupleWire {
  if (tuple.lists.some((grant) => grant.name === list.name)) return tuple;
  const next = cloneTuple(tuple);
  next.lists.push({
    name: list.name,
    read: list.read,
    send: list.send,
    keywords: [...list.keywords],
  });
  return next;
}

export function dropList(tuple: PermissionTupleWire, name: string): PermissionTupleWire {
  const next = cloneTuple(tuple);
  next.lists = next.lists.filter((grant) => grant.name !== name);
  return next;
}

/** Moving a list between pools flips exactly its read flag. */
export function moveToPool(
  tuple: PermissionTupleWire,
  name: string,
  pool: Pool,
): PermissionTupleWire {
  const next = cloneTuple(tuple);
  for (const grant of next.lists) {
    if (grant.name === name) grant.read = pool === "granting";
  }
  return next;
}

export function setListGrant(
  tuple: PermissionTupleWire,
  name: string,
  patch: Partial<Pick<ListGrant, "read" | "send" | "keywords">>,
): PermissionTupleWire {
  const next = cloneTuple(tuple);
  for (const grant of next.lists) {
    if (grant.name !== name) continue;
    if (patch.read !== undefined) grant.read = patch.read;
    if (patch.send !== undefined) grant.send = patch.send;
    if (patch.keywords !== undefined) grant.keywords = normalizeKeywords(patch.keywords);
  }
  return next;
}

/** Names of referenced lists still carrying the all-zero default — the trap
 * worth a warning badge, since such a list silently denies everything. */
export function allZeroLists(tuple: PermissionTupleWire): string[] {
  return tuple.lists
    .filter((grant) => !grant.read && !grant.send && grant.keywords.length === 0)
    .map((grant) => grant.name);
}

/** Strip read-only fields before a PUT. */
export function toWritePayload(tuple: PermissionTupleWire): PermissionTupleWire {
  const clean = cloneTuple(tuple);
  clean.lists = clean.lists.map(({ name, read, send, keywords }) => ({
    name,
    read,
    send,
    keywords,
  }));
  return clean;
}
