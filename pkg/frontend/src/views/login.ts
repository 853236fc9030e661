/** Owner login form; sub-user credentials are turned away with a notice. */

import { GatewayClient, GatewayError } from "../api";
import { el } from "../dom";

export function renderLogin(client: GatewayClient, onOwner: () => void): HTMLElement {
  const email = el("input", { class: "login-email", placeholder: "account email" }) as HTMLInputElement;
  const password = el("input", {
    class: "login-password",
    type: "password",
    placeholder: "owner password",
  }) as HTMLInputElement;
  const errorBox = el("p", { class: "inline-error", role: "alert" });
  errorBox.hidden = true;

  const submit = el(
    "button",
    {
      type: "button",
      class: "login-submit",
      onclick: async () => {
        errorBox.hidden = true;
        try {
          const session = await client.login(email.value.trim(), password.value);
          if (session.role_kind !== "owner") {
            client.logout();
            errorBox.textContent = "this console is for the account owner";
            errorBox.hidden = false;
            return;
          }
          onOwner();
        } catch (error) {
          errorBox.textContent =
            error instanceof GatewayError ? "login failed" : String(error);
          errorBox.hidden = false;
        }
      },
    },
    "Sign in",
  );

  return el(
    "section",
    { class: "login" },
    el("h2", {}, "Owner sign-in"),
    email,
    password,
    submit,
    errorBox,
  );
}
