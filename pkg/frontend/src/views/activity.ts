/** Account activity: the owner's audit trail, newest last, filterable by role. */

import { GatewayClient } from "../api";
import { clear, el } from "../dom";

export function renderActivity(client: GatewayClient): HTMLElement {
  const root = el("section", { class: "activity" }, el("h2", {}, "Account activity"));
  const roleFilter = el("input", { class: "activity-role", placeholder: "filter by role" }) as HTMLInputElement;
  const table = el("table", { class: "activity-table" });

  async function refresh(): Promise<void> {
    const events = await client.activity(
      roleFilter.value.trim() ? { role: roleFilter.value.trim() } : undefined,
    );
    clear(table);
    for (const event of events) {
      table.append(
        el(
          "tr",
          { class: "activity-row" },
          el("td", {}, event.timestamp),
          el("td", {}, event.role),
          el("td", {}, event.action),
          el("td", {}, event.target),
          el("td", {}, event.outcome),
        ),
      );
    }
  }

  roleFilter.addEventListener("change", () => void refresh());
  root.append(
    roleFilter,
    el("button", { type: "button", class: "activity-refresh", onclick: () => void refresh() }, "Refresh"),
    table,
  );
  void refresh();
  return root;
}
