/**
 * Debounced live-preview driver for the sub-user editor.
 *
 * Every control change schedules a POST /preview with the pending tuple; the
 * pane shows exactly what the gateway returns.  Responses are sequence
 * checked, so a slow early request can never overwrite a newer answer.
 */

import { GatewayClient, GatewayError } from "./api";
import type { PermissionTupleWire, PreviewResponse } from "./types";

export type PreviewState =
  | { status: "idle" }
  | { status: "loading" }
  | { status: "ready"; response: PreviewResponse }
  | { status: "error"; code: string; message: string };

export class PreviewController {
  private readonly client: GatewayClient;
  private readonly onUpdate: (state: PreviewState) => void;
  private readonly debounceMs: number;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private sequence = 0;

  constructor(
    client: GatewayClient,
    onUpdate: (state: PreviewState) => void,
    debounceMs = 250,
  ) {
    this.client = client;
    this.onUpdate = onUpdate;
    this.debounceMs = debounceMs;
  }

  /** Schedule a preview of the pending (possibly unsaved) tuple. */
  schedule(permissions: PermissionTupleWire, name?: string): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.onUpdate({ status: "loading" });
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.fire(permissions, name);
    }, this.debounceMs);
  }

  /** Preview immediately (used on first render of a saved sub-user). */
  async showSaved(name: string): Promise<void> {
    const ticket = ++this.sequence;
    this.onUpdate({ status: "loading" });
    try {
      const response = await this.client.previewSaved(name);
      if (ticket === this.sequence) this.onUpdate({ status: "ready", response });
    } catch (error) {
      this.fail(ticket, error);
    }
  }

  private async fire(permissions: PermissionTupleWire, name?: string): Promise<void> {
    const ticket = ++this.sequence;
    try {
      const response = await this.client.previewPending(permissions, name);
      if (ticket === this.sequence) this.onUpdate({ status: "ready", response });
    } catch (error) {
      this.fail(ticket, error);
    }
  }

  private fail(ticket: number, error: unknown): void {
    if (ticket !== this.sequence) return;
    if (error instanceof GatewayError) {
      this.onUpdate({ status: "error", code: error.code, message: error.message });
    } else {
      this.onUpdate({ status: "error", code: "NetworkError", message: String(error) });
    }
  }
}
