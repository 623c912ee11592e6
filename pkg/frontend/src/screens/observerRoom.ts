// The observer's room. Everything on this screen is copied from the
// observer view and message stream, which carry percent strings instead of
// amounts and pseudonyms instead of names; nothing is derived or joined
// client-side, so the screen cannot show more than the server sent.

import type { ServerClock } from "../clock";
import { startCountdown, type CountdownHandle } from "../countdown";
import type { AuctionView, StreamMessage } from "../wire";
import { clear, el } from "./dom";
import { formatEntry, formatMessage } from "./format";

export interface ObserverRoom {
  root: HTMLElement;
  countdownEl: HTMLElement;
  renderView(view: AuctionView): void;
  onMessage(msg: StreamMessage): void;
  setStale(stale: boolean): void;
  stop(): void;
}

export function createObserverRoom(
  container: HTMLElement,
  opts: { clock: ServerClock },
): ObserverRoom {
  const title = el("h2", {}, "…");
  const phaseBadge = el("span", { class: "phase" });
  const countdownEl = el("span", { class: "countdown" });
  const staleBanner = el("div", { class: "stale-banner hidden" }, "connection lost, data may be stale");
  const ladders = el("div", { class: "ladders" });
  const feed = el("ul", { class: "feed" });

  const root = el(
    "div",
    { class: "room observer-room" },
    staleBanner,
    title,
    el("div", { class: "status-line" }, phaseBadge, " · ends in ", countdownEl),
    ladders,
    el("h3", {}, "Activity"),
    feed,
  );
  container.append(root);

  let view: AuctionView | null = null;
  let countdown: CountdownHandle | null = null;

  return {
    root,
    countdownEl,
    renderView(next: AuctionView): void {
      view = next;
      title.textContent = next.title;
      phaseBadge.textContent = next.phase;
      if (countdown === null) {
        countdown = startCountdown(countdownEl, opts.clock, () => view?.current_end ?? 0);
      }
      clear(ladders);
      for (const slot of Object.values(next.slots)) {
        const list = el("ol", { class: "ladder" });
        for (const entry of slot.entries) {
          list.append(el("li", {}, formatEntry(entry)));
        }
        ladders.append(
          el(
            "section",
            {},
            el("h3", {}, `${slot.description} (${slot.bid_count} bids)`),
            list,
          ),
        );
      }
    },
    onMessage(msg: StreamMessage): void {
      feed.append(el("li", {}, formatMessage(msg)));
    },
    setStale(stale: boolean): void {
      staleBanner.classList.toggle("hidden", !stale);
    },
    stop(): void {
      countdown?.stop();
      countdown = null;
    },
  };
}
