/**
 * Account list editor: named address pools shared by every sub-user tuple.
 * Saving an empty member set is blocked client-side and rejected server-side.
 */

import { GatewayClient, GatewayError } from "../api";
import { el } from "../dom";
import type { StoredList } from "../types";

export interface ListsOptions {
  client: GatewayClient;
  lists: StoredList[];
  onChanged: () => void;
}

export function parseMembers(raw: string): string[] {
  return [...new Set(raw.split(/[\s,;]+/).map((m) => m.trim()).filter(Boolean))];
}

export function renderListManager(options: ListsOptions): HTMLElement {
  const root = el("section", { class: "list-manager" }, el("h2", {}, "Lists"));
  for (const list of options.lists) {
    root.append(
      el(
        "div",
        { class: "list-row", "data-list": list.name },
        el("strong", {}, list.name),
        el("span", {}, ` ${list.members.length} member(s)`),
        el(
          "button",
          {
            type: "button",
            class: "delete-list",
            onclick: async () => {
              await options.client.deleteList(list.name);
              options.onChanged();
            },
          },
          "Delete",
        ),
      ),
    );
  }

  const nameInput = el("input", { class: "list-name-input", placeholder: "list name" }) as HTMLInputElement;
  const membersInput = el("textarea", {
    class: "list-members-input",
    placeholder: "addresses, comma or newline separated",
  }) as HTMLTextAreaElement;
  const errorBox = el("p", { class: "inline-error", role: "alert" });
  errorBox.hidden = true;

  const saveButton = el(
    "button",
    {
      type: "button",
      class: "save-list",
      onclick: async () => {
        errorBox.hidden = true;
        const name = nameInput.value.trim();
        const members = parseMembers(membersInput.value);
        if (!name) {
          errorBox.textContent = "a list needs a name";
          errorBox.hidden = false;
          return;
        }
        if (members.length === 0) {
          errorBox.textContent = "a list needs at least one member address";
          errorBox.hidden = false;
          return;
        }
        try {
          await options.client.putList(name, { members });
          options.onChanged();
        } catch (error) {
          errorBox.textContent =
            error instanceof GatewayError ? `${error.code}: ${error.message}` : String(error);
          errorBox.hidden = false;
        }
      },
    },
    "Save list",
  );

  root.append(
    el("div", { class: "list-form" }, nameInput, membersInput, saveButton, errorBox),
  );
  return root;
}
