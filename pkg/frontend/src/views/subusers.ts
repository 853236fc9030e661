/**
 * Sub-user overview: one row per role with Edit and Delete right on the row,
 * so revoking access never requires hunting through a settings page.
 */

import { GatewayClient } from "../api";
import { el } from "../dom";
import type { SubUserRecord } from "../types";

export interface OverviewOptions {
  client: GatewayClient;
  subusers: SubUserRecord[];
  onEdit: (record: SubUserRecord) => void;
  onCreate: () => void;
  onChanged: () => void;
}

export function renderSubuserOverview(options: OverviewOptions): HTMLElement {
  const root = el("section", { class: "subuser-overview" }, el("h2", {}, "Sub-users"));
  const table = el("table", { class: "subuser-table" });
  for (const record of options.subusers) {
    table.append(
      el(
        "tr",
        { class: "subuser-row", "data-name": record.name },
        el("td", {}, record.name),
        el("td", {}, new Date(record.created_at).toLocaleString()),
        el(
          "td",
          {},
          el(
            "button",
            {
              type: "button",
              class: "edit-subuser",
              onclick: () => options.onEdit(record),
            },
            "Edit",
          ),
          el(
            "button",
            {
              type: "button",
              class: "delete-subuser-row",
              onclick: async () => {
                await options.client.deleteSubuser(record.name);
                options.onChanged();
              },
            },
            "Delete",
          ),
        ),
      ),
    );
  }
  root.append(
    table,
    el(
      "button",
      { type: "button", class: "new-subuser", onclick: () => options.onCreate() },
      "New sub-user",
    ),
  );
  return root;
}
