/**
 * The sub-user editor: every permission flag as a control, keyword fields,
 * the whitelist/blacklist pools, a generate-password button, and the live
 * preview pane that re-queries the gateway on every change.
 *
 * Save errors (duplicate password, invalid tuple) surface inline and leave
 * the form state untouched.
 */

import { GatewayClient, GatewayError } from "../api";
import { clear, el } from "../dom";
import { PreviewController, PreviewState } from "../preview";
import {
  FLAG_LABELS,
  FlagField,
  Pool,
  allZeroLists,
  cloneTuple,
  dropList,
  emptyTuple,
  moveToPool,
  parseKeywordInput,
  poolOf,
  referenceList,
  setFlag,
  setKeywords,
  setListGrant,
  toWritePayload,
} from "../tupleForm";
import type { PermissionTupleWire, StoredList, SubUserRecord } from "../types";

export interface EditorOptions {
  client: GatewayClient;
  /** Existing sub-user to edit, or null to create a new one. */
  existing: SubUserRecord | null;
  /** The account's list pool (for referencing). */
  accountLists: StoredList[];
  onSaved?: (record: SubUserRecord) => void;
  onDeleted?: (name: string) => void;
  previewDebounceMs?: number;
}

export interface EditorHandle {
  element: HTMLElement;
  /** Current pending tuple (a copy). */
  pending(): PermissionTupleWire;
}

export function renderEditor(options: EditorOptions): EditorHandle {
  const { client, existing, accountLists } = options;
  let tuple: PermissionTupleWire = existing
    ? cloneTuple(existing.permissions)
    : emptyTuple();

  const root = el("section", { class: "editor" });
  const heading = el("h2", {}, existing ? `Edit ${existing.name}` : "New sub-user");
  const nameInput = el("input", {
    class: "subuser-name",
    placeholder: "name",
    value: existing?.name ?? "",
  }) as HTMLInputElement;
  if (existing) nameInput.disabled = true;

  const passwordInput = el("input", {
    class: "subuser-password",
    type: "password",
    placeholder: existing ? "leave empty to keep password" : "password",
  }) as HTMLInputElement;
  const generatedOutput = el("code", { class: "generated-password" });
  const generateButton = el(
    "button",
    {
      class: "generate-password",
      type: "button",
      onclick: async () => {
        const password = await client.generatePassword();
        passwordInput.value = password;
        // shown exactly once; it is never rendered again after save
        generatedOutput.textContent = password;
      },
    },
    "Generate",
  );

  const errorBox = el("p", { class: "inline-error", role: "alert" });
  errorBox.hidden = true;

  const previewPane = el("div", { class: "preview-pane" });
  const previewStatus = el("p", { class: "preview-status" });
  const previewError = el("p", { class: "preview-error", role: "alert" });
  previewError.hidden = true;

  const preview = new PreviewController(
    client,
    (state) => renderPreview(state),
    options.previewDebounceMs ?? 250,
  );

  function renderPreview(state: PreviewState): void {
    clear(previewPane);
    previewError.hidden = true;
    if (state.status === "loading") {
      previewStatus.textContent = "refreshing preview…";
      return;
    }
    if (state.status === "error") {
      previewStatus.textContent = "";
      previewError.textContent = `${state.code}: ${state.message}`;
      previewError.hidden = false;
      return;
    }
    if (state.status !== "ready") return;
    previewStatus.textContent = `${state.response.messages.length} message(s) visible`;
    for (const message of state.response.messages) {
      previewPane.append(
        el(
          "div",
          { class: "preview-row", "data-id": message.id },
          el("span", { class: "preview-sender" }, message.sender),
          el("span", { class: "preview-subject" }, message.subject),
        ),
      );
    }
  }

  function update(next: PermissionTupleWire): void {
    tuple = next;
    redrawPools();
    redrawBadges();
    preview.schedule(toWritePayload(tuple), nameInput.value || undefined);
  }

  // -- flag checkboxes --

  const flagBoxes = new Map<FlagField, HTMLInputElement>();
  const flagList = el("div", { class: "flags" });
  (Object.keys(FLAG_LABELS) as FlagField[]).forEach((field) => {
    const box = el("input", {
      type: "checkbox",
      class: `flag-${field}`,
      onchange: () => update(setFlag(tuple, field, box.checked)),
    }) as HTMLInputElement;
    box.checked = tuple[field];
    flagBoxes.set(field, box);
    flagList.append(el("label", { class: "flag-row" }, box, FLAG_LABELS[field]));
  });

  // -- keyword inputs --

  function keywordInput(which: "contact" | "noncontact", initial: string[]) {
    const input = el("input", {
      class: `keywords-${which}`,
      placeholder: "comma-separated keywords",
      value: initial.join(", "),
      oninput: () => {
        const keywords = parseKeywordInput(input.value);
        let next = setKeywords(tuple, which, keywords);
        const flag: FlagField =
          which === "contact" ? "read_contacts_keyword" : "read_noncontacts_keyword";
        // typing keywords implies wanting the keyword grant on
        if (keywords.length > 0 && !next[flag]) {
          next = setFlag(next, flag, true);
          flagBoxes.get(flag)!.checked = true;
        }
        update(next);
      },
    }) as HTMLInputElement;
    return input;
  }

  const contactKeywords = keywordInput("contact", tuple.contact_keywords);
  const noncontactKeywords = keywordInput("noncontact", tuple.noncontact_keywords);

  // -- list pools --

  const grantingPool = el("div", { class: "pool pool-granting", "data-pool": "granting" });
  const denyingPool = el("div", { class: "pool pool-denying", "data-pool": "denying" });
  const availableBox = el("div", { class: "available-lists" });
  const badgeBox = el("p", { class: "pool-warnings" });

  for (const pool of [grantingPool, denyingPool]) {
    pool.addEventListener("dragover", (event) => event.preventDefault());
    pool.addEventListener("drop", (event) => {
      event.preventDefault();
      const name = (event as DragEvent).dataTransfer?.getData("text/list-name");
      if (name) update(moveToPool(tuple, name, pool.dataset.pool as Pool));
    });
  }

  function listChip(name: string): HTMLElement {
    const grant = tuple.lists.find((entry) => entry.name === name)!;
    const here = poolOf(grant);
    const other: Pool = here === "granting" ? "denying" : "granting";
    const chip = el(
      "div",
      { class: "list-chip", "data-list": name, draggable: "true" },
      el("span", { class: "list-name" }, name),
      el("input", {
        class: "list-keywords",
        placeholder: "keywords",
        value: grant.keywords.join(", "),
        onchange: (event) =>
          update(
            setListGrant(tuple, name, {
              keywords: parseKeywordInput((event.target as HTMLInputElement).value),
            }),
          ),
      }),
      el(
        "label",
        { class: "list-send" },
        (() => {
          const sendBox = el("input", {
            type: "checkbox",
            class: "list-send-box",
            onchange: (event) =>
              update(
                setListGrant(tuple, name, {
                  send: (event.target as HTMLInputElement).checked,
                }),
              ),
          }) as HTMLInputElement;
          sendBox.checked = grant.send;
          return sendBox;
        })(),
        "send",
      ),
      el(
        "button",
        {
          type: "button",
          class: "move-list",
          onclick: () => update(moveToPool(tuple, name, other)),
        },
        here === "granting" ? "→ blacklist" : "→ whitelist",
      ),
      el(
        "button",
        { type: "button", class: "remove-list", onclick: () => update(dropList(tuple, name)) },
        "remove",
      ),
    );
    chip.addEventListener("dragstart", (event) => {
      (event as DragEvent).dataTransfer?.setData("text/list-name", name);
    });
    return chip;
  }

  function redrawPools(): void {
    clear(grantingPool);
    clear(denyingPool);
    grantingPool.append(el("h4", {}, "Whitelist (read granted)"));
    denyingPool.append(el("h4", {}, "Blacklist (read denied)"));
    for (const grant of tuple.lists) {
      (poolOf(grant) === "granting" ? grantingPool : denyingPool).append(
        listChip(grant.name),
      );
    }
    clear(availableBox);
    for (const list of accountLists) {
      if (tuple.lists.some((grant) => grant.name === list.name)) continue;
      availableBox.append(
        el(
          "button",
          {
            type: "button",
            class: "reference-list",
            "data-list": list.name,
            onclick: () => update(referenceList(tuple, list)),
          },
          `+ ${list.name}`,
        ),
      );
    }
  }

  function redrawBadges(): void {
    const zeroes = allZeroLists(tuple);
    badgeBox.textContent = zeroes.length
      ? `all-zero default: ${zeroes.join(", ")} — members are fully blocked`
      : "";
    badgeBox.className = zeroes.length ? "pool-warnings badge-warning" : "pool-warnings";
  }

  // -- save / delete --

  const saveButton = el(
    "button",
    {
      type: "button",
      class: "save-subuser",
      onclick: async () => {
        errorBox.hidden = true;
        const name = nameInput.value.trim();
        if (!name) {
          errorBox.textContent = "a sub-user needs a name";
          errorBox.hidden = false;
          return;
        }
        const payload: { password?: string; permissions: PermissionTupleWire } = {
          permissions: toWritePayload(tuple),
        };
        if (passwordInput.value) payload.password = passwordInput.value;
        try {
          const record = await client.putSubuser(name, payload);
          generatedOutput.textContent = "";
          passwordInput.value = "";
          options.onSaved?.(record);
        } catch (error) {
          if (error instanceof GatewayError) {
            errorBox.textContent =
              error.code === "DuplicatePassword"
                ? "that password already unlocks another role — pick a different one"
                : `${error.code}: ${error.message}`;
          } else {
            errorBox.textContent = String(error);
          }
          errorBox.hidden = false;
        }
      },
    },
    "Save",
  );

  const deleteButton = existing
    ? el(
        "button",
        {
          type: "button",
          class: "delete-subuser",
          onclick: async () => {
            await client.deleteSubuser(existing.name);
            options.onDeleted?.(existing.name);
          },
        },
        "Delete",
      )
    : null;

  root.append(
    heading,
    el("div", { class: "identity" }, nameInput, passwordInput, generateButton, generatedOutput),
    errorBox,
    flagList,
    el("div", { class: "keyword-fields" },
      el("label", {}, "Contact keywords ", contactKeywords),
      el("label", {}, "Non-contact keywords ", noncontactKeywords),
    ),
    el("div", { class: "pools" }, grantingPool, denyingPool),
    availableBox,
    badgeBox,
    el("div", { class: "actions" }, saveButton, deleteButton),
    el("aside", { class: "preview" },
      el("h3", {}, "Live preview"),
      previewStatus,
      previewError,
      previewPane,
    ),
  );

  redrawPools();
  redrawBadges();
  if (existing) {
    void preview.showSaved(existing.name);
  } else {
    preview.schedule(toWritePayload(tuple));
  }

  return { element: root, pending: () => cloneTuple(tuple) };
}
