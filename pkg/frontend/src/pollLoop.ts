// The poll loop: one request in flight at a time, the next scheduled for
// whenever the server asked (next_poll_ms). Failures back off exponentially,
// capped at 5 s, and raise a stale flag the UI shows as a banner; the cursor
// survives, so a reconnect replays every missed message in order. Each
// response also feeds the clock estimator.

import type { ServerClock } from "./clock";
import type { ApiClient, AuctionView, PollResponse, StreamMessage } from "./wire";

const BACKOFF_START_MS = 500;
const BACKOFF_CAP_MS = 5_000;

// Opaque: browser and node timer ids differ and the loop never looks inside.
type TimerHandle = unknown;

export interface PollLoopOptions {
  api: ApiClient;
  token: string;
  auctionId: string;
  clock: ServerClock;
  onView?: (view: AuctionView) => void;
  onMessage?: (msg: StreamMessage) => void;
  onStale?: (stale: boolean) => void;
  localNow?: () => number;
  setTimer?: (fn: () => void, ms: number) => TimerHandle;
  clearTimer?: (t: TimerHandle) => void;
}

export class PollLoop {
  cursor = 0;
  stale = false;
  lastView: AuctionView | null = null;

  private backoff = BACKOFF_START_MS;
  private timer: TimerHandle | null = null;
  private running = false;
  private inFlight = false;

  constructor(private readonly opts: PollLoopOptions) {}

  // A few back-to-back polls before pacing starts, so the clock estimator
  // completes its burst phase right away instead of over the first seconds.
  async start(primeSamples = 8): Promise<void> {
    this.running = true;
    let nextMs: number | null = null;
    for (let i = 0; i < primeSamples && this.running; i++) {
      nextMs = await this.pollOnce();
    }
    if (this.running) {
      if (nextMs !== null) {
        this.schedule(nextMs);
      } else {
        this.loop();
      }
    }
  }

  stop(): void {
    this.running = false;
    if (this.timer !== null) {
      const clear = this.opts.clearTimer ?? (clearTimeout as (t: TimerHandle) => void);
      clear(this.timer);
      this.timer = null;
    }
  }

  private schedule(ms: number): void {
    if (!this.running) return;
    const set = this.opts.setTimer ?? setTimeout;
    this.timer = set(() => {
      this.timer = null;
      this.loop();
    }, ms);
  }

  private loop(): void {
    void this.pollOnce().then((nextMs) => {
      if (nextMs !== null) this.schedule(nextMs);
    });
  }

  // Resolves to the delay before the next poll, or null when stopped.
  private async pollOnce(): Promise<number | null> {
    if (this.inFlight) return null;
    this.inFlight = true;
    const now = this.opts.localNow ?? Date.now;
    const t0 = now();
    let body: PollResponse;
    try {
      body = await this.opts.api.poll(this.opts.token, this.opts.auctionId, this.cursor);
    } catch {
      this.inFlight = false;
      if (!this.stale) {
        this.stale = true;
        this.opts.onStale?.(true);
      }
      const wait = this.backoff;
      this.backoff = Math.min(BACKOFF_CAP_MS, this.backoff * 2);
      return this.running ? wait : null;
    }
    const t2 = now();
    this.inFlight = false;
    this.opts.clock.feed(t0, body.server_time, t2);
    if (this.stale) {
      this.stale = false;
      this.opts.onStale?.(false);
    }
    this.backoff = BACKOFF_START_MS;
    this.cursor = body.new_cursor;
    this.lastView = body.view;
    for (const msg of body.messages) {
      this.opts.onMessage?.(msg);
    }
    this.opts.onView?.(body.view);
    return this.running ? body.next_poll_ms : null;
  }
}
