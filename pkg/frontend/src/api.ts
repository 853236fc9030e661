/**
 * Typed client for the gateway API.  Every console feature goes through
 * this class; the console itself never evaluates policy locally.
 */

import type {
  ActivityEvent,
  MailboxResponse,
  PermissionTupleWire,
  PreviewResponse,
  SessionInfo,
  StoredList,
  SubUserRecord,
} from "./types";

export class GatewayError extends Error {
  readonly status: number;
  readonly code: string;
  readonly detail: Record<string, unknown>;

  constructor(status: number, body: Record<string, unknown>) {
    super(String(body.message ?? body.error ?? `HTTP ${status}`));
    this.status = status;
    this.code = String(body.error ?? "Error");
    this.detail = body;
  }
}

export class GatewayClient {
  readonly baseUrl: string;
  private token: string | null = null;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  get authenticated(): boolean {
    return this.token !== null;
  }

  useToken(token: string | null): void {
    this.token = token;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    if (body !== undefined) headers["Content-Type"] = "application/json";
    const response = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
      redirect: "manual",
    });
    if (!response.ok) {
      let payload: Record<string, unknown> = {};
      try {
        payload = (await response.json()) as Record<string, unknown>;
      } catch {
        payload = { error: "Error", message: response.statusText };
      }
      throw new GatewayError(response.status, payload);
    }
    return (await response.json()) as T;
  }

  async login(email: string, password: string): Promise<SessionInfo> {
    const session = await this.request<SessionInfo>("POST", "/session", {
      email,
      password,
    });
    this.token = session.token;
    return session;
  }

  logout(): void {
    this.token = null;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  mailbox(): Promise<MailboxResponse> {
    return this.request("GET", "/mailbox");
  }

  async listSubusers(): Promise<SubUserRecord[]> {
    const body = await this.request<{ subusers: SubUserRecord[] }>(
      "GET",
      "/config/subusers",
    );
    return body.subusers;
  }

  putSubuser(
    name: string,
    payload: { password?: string; permissions?: PermissionTupleWire },
  ): Promise<SubUserRecord> {
    return this.request("PUT", `/config/subusers/${encodeURIComponent(name)}`, payload);
  }

  deleteSubuser(name: string): Promise<{ deleted: string }> {
    return this.request("DELETE", `/config/subusers/${encodeURIComponent(name)}`);
  }

  async listLists(): Promise<StoredList[]> {
    const body = await this.request<{ lists: StoredList[] }>("GET", "/config/lists");
    return body.lists;
  }

  putList(
    name: string,
    payload: { members: string[]; read?: boolean; send?: boolean; keywords?: string[] },
  ): Promise<StoredList> {
    return this.request("PUT", `/config/lists/${encodeURIComponent(name)}`, payload);
  }

  deleteList(name: string): Promise<{ deleted: string }> {
    return this.request("DELETE", `/config/lists/${encodeURIComponent(name)}`);
  }

  importContacts(addresses: string[]): Promise<{ added: number }> {
    return this.request("POST", "/contacts/import", { addresses });
  }

  async contacts(): Promise<string[]> {
    const body = await this.request<{ contacts: string[] }>("GET", "/contacts");
    return body.contacts;
  }

  async generatePassword(): Promise<string> {
    const body = await this.request<{ password: string }>("POST", "/config/passwords");
    return body.password;
  }

  previewSaved(subuser: string): Promise<PreviewResponse> {
    return this.request("GET", `/preview?subuser=${encodeURIComponent(subuser)}`);
  }

  previewPending(
    permissions: PermissionTupleWire,
    name?: string,
  ): Promise<PreviewResponse> {
    return this.request("POST", "/preview", { permissions, name });
  }

  async activity(filter?: { role?: string; since?: string; until?: string }): Promise<
    ActivityEvent[]
  > {
    const params = new URLSearchParams();
    if (filter?.role) params.set("role", filter.role);
    if (filter?.since) params.set("since", filter.since);
    if (filter?.until) params.set("until", filter.until);
    const suffix = params.size ? `?${params.toString()}` : "";
    const body = await this.request<{ events: ActivityEvent[] }>(
      "GET",
      `/activity${suffix}`,
    );
    return body.events;
  }
}
