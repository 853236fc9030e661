/**
 * Duplicate-password UX, end to end: saving a sub-user under a password that
 * already unlocks another role must show an inline error and write nothing.
 */

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { GatewayClient } from "../../src/api";
import { renderEditor } from "../../src/views/editor";
import {
  OWNER_EMAIL,
  OWNER_PASSWORD,
  RunningGateway,
  TASK_PASSWORDS,
  installTaskRoles,
  startGateway,
  waitFor,
} from "./harness";

let gateway: RunningGateway;
let owner: GatewayClient;

beforeAll(async () => {
  gateway = await startGateway();
  owner = new GatewayClient(gateway.baseUrl);
  await owner.login(OWNER_EMAIL, OWNER_PASSWORD);
  await installTaskRoles(owner);
});

afterAll(() => gateway?.stop());

describe("duplicate-password handling in the editor", () => {
  it("shows an inline error and performs no write", async () => {
    const namesBefore = (await owner.listSubusers()).map((s) => s.name);

    const editor = renderEditor({
      client: owner,
      existing: null,
      accountLists: await owner.listLists(),
      previewDebounceMs: 10,
    });
    document.body.append(editor.element);

    (editor.element.querySelector(".subuser-name") as HTMLInputElement).value = "Copycat";
    (editor.element.querySelector(".subuser-password") as HTMLInputElement).value =
      TASK_PASSWORDS["Amy"];
    (editor.element.querySelector(".save-subuser") as HTMLButtonElement).click();

    const errorBox = editor.element.querySelector(".inline-error") as HTMLElement;
    await waitFor(() => !errorBox.hidden);
    expect(errorBox.textContent).toMatch(/password already unlocks another role/);

    const namesAfter = (await owner.listSubusers()).map((s) => s.name);
    expect(namesAfter).toEqual(namesBefore);
    editor.element.remove();
  });

  it("saves cleanly with a generated password, shown once and then wiped", async () => {
    let saved = false;
    const editor = renderEditor({
      client: owner,
      existing: null,
      accountLists: await owner.listLists(),
      previewDebounceMs: 10,
      onSaved: () => {
        saved = true;
      },
    });
    document.body.append(editor.element);

    (editor.element.querySelector(".subuser-name") as HTMLInputElement).value = "Copycat";
    (editor.element.querySelector(".generate-password") as HTMLButtonElement).click();
    const shownOnce = editor.element.querySelector(".generated-password") as HTMLElement;
    await waitFor(() => (shownOnce.textContent ?? "").length >= 16);
    const password = shownOnce.textContent!;
    expect(
      (editor.element.querySelector(".subuser-password") as HTMLInputElement).value,
    ).toBe(password);

    (editor.element.querySelector(".save-subuser") as HTMLButtonElement).click();
    await waitFor(() => saved);

    // after the save, no secret material remains anywhere in the editor
    expect(shownOnce.textContent).toBe("");
    expect(editor.element.innerHTML).not.toContain(password);

    const names = (await owner.listSubusers()).map((s) => s.name);
    expect(names).toContain("Copycat");

    const probe = new GatewayClient(gateway.baseUrl);
    const session = await probe.login(OWNER_EMAIL, password);
    expect(session.role_kind).toBe("subuser");
    editor.element.remove();
  });
});
