/** Console bootstrap: login, then tabs for sub-users, lists, and activity. */

import { GatewayClient } from "./api";
import { clear, el } from "./dom";
import { renderActivity } from "./views/activity";
import { renderEditor } from "./views/editor";
import { renderListManager } from "./views/lists";
import { renderLogin } from "./views/login";
import { renderSubuserOverview } from "./views/subusers";
import "./style.css";

const gatewayUrl =
  new URLSearchParams(window.location.search).get("gateway") ?? "http://127.0.0.1:8080";
const client = new GatewayClient(gatewayUrl);
const outlet = document.getElementById("app")!;

type Tab = "subusers" | "lists" | "activity";

async function showConsole(tab: Tab = "subusers"): Promise<void> {
  clear(outlet);
  const nav = el(
    "nav",
    { class: "tabs" },
    ...(["subusers", "lists", "activity"] as Tab[]).map((name) =>
      el(
        "button",
        { type: "button", class: name === tab ? "tab active" : "tab", onclick: () => void showConsole(name) },
        name,
      ),
    ),
  );
  outlet.append(nav);

  if (tab === "subusers") {
    const [subusers, lists] = await Promise.all([client.listSubusers(), client.listLists()]);
    const overview = renderSubuserOverview({
      client,
      subusers,
      onChanged: () => void showConsole("subusers"),
      onCreate: () => {
        clear(outlet);
        outlet.append(
          nav,
          renderEditor({
            client,
            existing: null,
            accountLists: lists,
            onSaved: () => void showConsole("subusers"),
          }).element,
        );
      },
      onEdit: (record) => {
        clear(outlet);
        outlet.append(
          nav,
          renderEditor({
            client,
            existing: record,
            accountLists: lists,
            onSaved: () => void showConsole("subusers"),
            onDeleted: () => void showConsole("subusers"),
          }).element,
        );
      },
    });
    outlet.append(overview);
  } else if (tab === "lists") {
    const lists = await client.listLists();
    outlet.append(
      renderListManager({ client, lists, onChanged: () => void showConsole("lists") }),
    );
  } else {
    outlet.append(renderActivity(client));
  }
}

function boot(): void {
  clear(outlet);
  outlet.append(
    el("h1", {}, "mailshade console"),
    renderLogin(client, () => void showConsole()),
  );
}

boot();
