// Client-side clock offset estimation.
//
// Every poll yields a timestamp triple: local send time t0, the server's
// stamp ts, local receive time t2. Assuming symmetric legs, ts corresponds
// to the local midpoint, so offset = ts - (t0 + t2) / 2 (integer ms, toward
// zero). The first eight samples form a burst from which the minimum-RTT
// sample wins; after that, a sample whose round trip is within 25 ms of the
// current one nudges the estimate by a quarter step. All later countdown
// rendering goes through serverNow(); the local clock is never used alone.

export class TimesyncError extends Error {
  constructor(readonly code: string) {
    super(code);
  }
}

function halfTowardZero(x: number): number {
  return x >= 0 ? Math.floor(x / 2) : -Math.floor(-x / 2);
}

export function sampleOffset(t0: number, ts: number, t2: number): { offset: number; rtt: number } {
  if (t2 < t0) {
    throw new TimesyncError("NegativeRtt");
  }
  return { offset: ts - halfTowardZero(t0 + t2), rtt: t2 - t0 };
}

export interface OffsetEstimate {
  offsetMs: number;
  rttMs: number;
  sampleCount: number;
}

export class OffsetEstimator {
  private burst: Array<{ rtt: number; offset: number }> = [];
  private offset: number | null = null;
  private rtt: number | null = null;
  private count = 0;

  constructor(
    readonly burstSize = 8,
    readonly rttSlackMs = 25,
  ) {}

  addSample(t0: number, ts: number, t2: number): void {
    const { offset, rtt } = sampleOffset(t0, ts, t2);
    this.count += 1;
    if (this.offset === null) {
      this.burst.push({ rtt, offset });
      if (this.burst.length >= this.burstSize) {
        const best = this.burst.reduce((a, b) =>
          b.rtt < a.rtt || (b.rtt === a.rtt && Math.abs(b.offset) < Math.abs(a.offset)) ? b : a,
        );
        this.offset = best.offset;
        this.rtt = best.rtt;
        this.burst = [];
      }
      return;
    }
    if (rtt <= (this.rtt as number) + this.rttSlackMs) {
      this.offset = halfTowardZero(halfTowardZero(3 * this.offset + offset));
      this.rtt = rtt;
    }
  }

  get ready(): boolean {
    return this.offset !== null;
  }

  get sampleCount(): number {
    return this.count;
  }

  current(): OffsetEstimate {
    if (this.offset !== null) {
      return { offsetMs: this.offset, rttMs: this.rtt as number, sampleCount: this.count };
    }
    if (this.burst.length === 0) {
      throw new TimesyncError("EmptySamples");
    }
    const best = this.burst.reduce((a, b) =>
      b.rtt < a.rtt || (b.rtt === a.rtt && Math.abs(b.offset) < Math.abs(a.offset)) ? b : a,
    );
    return { offsetMs: best.offset, rttMs: best.rtt, sampleCount: this.count };
  }
}

// The authoritative clock as this client best knows it.
export class ServerClock {
  readonly estimator = new OffsetEstimator();

  constructor(private readonly localNow: () => number = Date.now) {}

  get synced(): boolean {
    return this.estimator.sampleCount > 0;
  }

  feed(t0: number, ts: number, t2: number): void {
    this.estimator.addSample(t0, ts, t2);
  }

  now(): number {
    return this.localNow() + this.estimator.current().offsetMs;
  }
}
