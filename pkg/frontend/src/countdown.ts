// Countdown rendering: remaining time against a server-side deadline,
// judged by the synced clock, ticking locally between polls.

import type { ServerClock } from "./clock";

export function remainingMs(endServerTime: number, serverNow: number): number {
  return Math.max(0, endServerTime - serverNow);
}

// Tenth-of-a-second precision below a minute, where it matters; m:ss and
// h:mm:ss above.
export function formatCountdown(ms: number): string {
  if (ms < 60_000) {
    return (ms / 1000).toFixed(1) + "s";
  }
  const totalSeconds = Math.floor(ms / 1000);
  const seconds = totalSeconds % 60;
  const minutes = Math.floor(totalSeconds / 60) % 60;
  const hours = Math.floor(totalSeconds / 3600);
  const mm = String(minutes).padStart(2, "0");
  const ss = String(seconds).padStart(2, "0");
  return hours > 0 ? `${hours}:${mm}:${ss}` : `${minutes}:${ss}`;
}

export interface CountdownHandle {
  stop(): void;
}

// Repaints `el` every 100 ms from the synced clock. Until the first sample
// arrives there is no authoritative time, so the element says so instead of
// guessing from the local clock.
export function startCountdown(
  el: HTMLElement,
  clock: ServerClock,
  getEnd: () => number,
  intervalMs = 100,
): CountdownHandle {
  const repaint = () => {
    if (!clock.synced) {
      el.textContent = "syncing…";
      return;
    }
    const left = remainingMs(getEnd(), clock.now());
    el.textContent = formatCountdown(left);
    el.dataset.remainingMs = String(left);
  };
  repaint();
  const timer = setInterval(repaint, intervalMs);
  return {
    stop() {
      clearInterval(timer);
    },
  };
}
