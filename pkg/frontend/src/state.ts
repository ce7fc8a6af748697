import type { ScenePayload, ServerFrame } from "./types";

export type LinkStatus = "connecting" | "connected" | "disconnected";

export interface UiError {
  at: number;
  reason: string;
  detail?: string;
}

/**
 * Client store. The rendered view is exactly the last scene_state frame;
 * nothing is predicted client-side, so a reconnect plus one frame fully
 * restores the view.
 */
export class Store {
  status: LinkStatus = "connecting";
  scene: ScenePayload | null = null;
  lastSeq = 0;
  errors: UiError[] = [];
  private listeners: Array<() => void> = [];

  subscribe(fn: () => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  setStatus(status: LinkStatus): void {
    this.status = status;
    this.emit();
  }

  /** Apply one raw frame from the socket; bad frames are recorded, not fatal. */
  applyRaw(raw: string): void {
    let frame: ServerFrame;
    try {
      frame = JSON.parse(raw) as ServerFrame;
    } catch {
      this.errors.push({ at: Date.now(), reason: "unparseable_frame" });
      this.emit();
      return;
    }
    if (frame && frame.type === "scene_state" && frame.payload) {
      this.scene = frame.payload;
      this.lastSeq = frame.seq;
    } else if (frame && frame.type === "error") {
      this.errors.push({ at: Date.now(), reason: frame.reason, detail: frame.detail });
      if (this.errors.length > 20) this.errors.shift();
    } else {
      this.errors.push({ at: Date.now(), reason: "unknown_frame" });
    }
    this.emit();
  }
}
