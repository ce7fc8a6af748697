import type { Store } from "./state";
import type { UiCommand } from "./types";

/** WebSocket client with automatic reconnect; the session survives drops. */
export class BridgeClient {
  private ws: WebSocket | null = null;
  private url: string;
  private store: Store;
  private retryMs = 500;
  private closed = false;

  constructor(url: string, store: Store) {
    this.url = url;
    this.store = store;
  }

  connect(): void {
    if (this.closed) return;
    this.store.setStatus("connecting");
    const ws = new WebSocket(this.url);
    this.ws = ws;

    ws.onopen = () => {
      this.retryMs = 500;
      this.store.setStatus("connected");
    };
    ws.onmessage = (ev) => {
      if (typeof ev.data === "string") this.store.applyRaw(ev.data);
    };
    ws.onerror = () => {
      // onclose follows; nothing to do here
    };
    ws.onclose = () => {
      this.store.setStatus("disconnected");
      if (!this.closed) {
        setTimeout(() => this.connect(), this.retryMs);
        this.retryMs = Math.min(this.retryMs * 2, 5000);
      }
    };
  }

  send(cmd: UiCommand): boolean {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(JSON.stringify(cmd));
      return true;
    }
    return false;
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
