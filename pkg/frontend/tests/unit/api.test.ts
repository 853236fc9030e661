import { afterEach, describe, expect, it, vi } from "vitest";

import { GatewayClient, GatewayError } from "../../src/api";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("gateway client", () => {
  afterEach(() => vi.unstubAllGlobals());

  it("attaches the bearer token after login", async () => {
    const seen: { url: string; init: RequestInit }[] = [];
    vi.stubGlobal("fetch", vi.fn(async (url: string, init: RequestInit) => {
      seen.push({ url, init });
      if (url.endsWith("/session")) {
        return jsonResponse(200, {
          token: "tok-123",
          role_kind: "owner",
          capabilities: {},
        });
      }
      return jsonResponse(200, { subusers: [] });
    }));

    const client = new GatewayClient("http://gw.test/");
    await client.login("bob@example.com", "pw");
    await client.listSubusers();

    expect(seen[0].url).toBe("http://gw.test/session");
    const headers = seen[1].init.headers as Record<string, string>;
    expect(headers["Authorization"]).toBe("Bearer tok-123");
  });

  it("turns error bodies into GatewayError with code and status", async () => {
    vi.stubGlobal("fetch", vi.fn(async () =>
      jsonResponse(409, { error: "DuplicatePassword", message: "already in use" }),
    ));
    const client = new GatewayClient("http://gw.test");
    const failure = await client
      .putSubuser("Amy", { password: "x" })
      .then(() => null, (e: unknown) => e);
    expect(failure).toBeInstanceOf(GatewayError);
    expect((failure as GatewayError).status).toBe(409);
    expect((failure as GatewayError).code).toBe("DuplicatePassword");
  });

  it("posts pending tuples to the preview endpoint", async () => {
    const bodies: unknown[] = [];
    vi.stubGlobal("fetch", vi.fn(async (_url: string, init: RequestInit) => {
      bodies.push(JSON.parse(String(init.body)));
      return jsonResponse(200, { subuser: "(pending)", capabilities: {}, messages: [] });
    }));
    const client = new GatewayClient("http://gw.test");
    const tuple = {
      read_contacts: true,
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
    await client.previewPending(tuple, "Amy");
    expect(bodies[0]).toEqual({ permissions: tuple, name: "Amy" });
  });
});
