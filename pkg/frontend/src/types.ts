/** Wire types for the gateway's JSON API. */

export interface ListGrant {
  name: string;
  read: boolean;
  send: boolean;
  keywords: string[];
  /** Present on stored tuples; ignored on writes (the server joins members). */
  members?: string[];
}

export interface PermissionTupleWire {
  read_contacts: boolean;
  read_contacts_keyword: boolean;
  contact_keywords: string[];
  send_contacts: boolean;
  read_noncontacts: boolean;
  read_noncontacts_keyword: boolean;
  noncontact_keywords: string[];
  send_noncontacts: boolean;
  delete_allowed: boolean;
  mark_unread_allowed: boolean;
  spoof_owner_view: boolean;
  lists: ListGrant[];
}

export interface MessageSummary {
  id: string;
  sender: string;
  subject: string;
  timestamp: string;
  unread: boolean;
}

export interface AdvertisedCapabilities {
  can_read: boolean;
  compose: boolean;
  delete: boolean;
  mark_unread: boolean;
  owner_features: boolean;
}

export interface EffectiveCapabilities {
  can_read: boolean;
  compose: "real" | "dummy" | "absent";
  delete: "real" | "absent";
  mark_unread: "real" | "absent";
  owner_features: boolean;
}

export interface SessionInfo {
  token: string;
  role_kind: "owner" | "subuser";
  capabilities: AdvertisedCapabilities;
}

export interface SubUserRecord {
  name: string;
  created_at: string;
  permissions: PermissionTupleWire;
}

export interface StoredList {
  name: string;
  members: string[];
  read: boolean;
  send: boolean;
  keywords: string[];
}

export interface PreviewResponse {
  subuser: string;
  capabilities: EffectiveCapabilities;
  messages: MessageSummary[];
}

export interface MailboxResponse {
  role: string;
  role_kind: "owner" | "subuser";
  capabilities: AdvertisedCapabilities;
  messages: MessageSummary[];
}

export interface ActivityEvent {
  timestamp: string;
  seq: number;
  role: string;
  action: string;
  target: string;
  outcome: string;
}
