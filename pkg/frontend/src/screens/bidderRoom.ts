// The bidder's room: countdown, own rank, anonymized ladder, bid entry.
//
// Two rules with teeth live here. The bid button is enabled only while the
// auction is open or in extension AND no closing announcement has reached
// this client; the instant a closing_announced message is processed the
// button goes dead, before any rerender. And the tick-improvement check is
// mirrored client-side as a warning only; the server stays authoritative,
// so the reply's reason code is rendered verbatim when it disagrees.

import type { ServerClock } from "../clock";
import { startCountdown, type CountdownHandle } from "../countdown";
import type { AuctionView, BidReply, Money, SlotView, StreamMessage } from "../wire";
import { clear, el } from "./dom";
import { formatEntry, formatMessage, formatMoney } from "./format";

const BIDDABLE_PHASES = new Set(["open", "extension"]);

export interface BidderRoomOptions {
  clock: ServerClock;
  submitBid: (slotId: string, amount: number) => Promise<BidReply>;
}

export interface BidderRoom {
  root: HTMLElement;
  bidButton: HTMLButtonElement;
  countdownEl: HTMLElement;
  renderView(view: AuctionView): void;
  onMessage(msg: StreamMessage): void;
  setStale(stale: boolean): void;
  stop(): void;
}

export function tickWarning(
  format: string,
  tickSize: number,
  ownBest: Money | null,
  amount: number,
): string | null {
  if (!Number.isInteger(amount) || amount <= 0) {
    return "bid must be a positive whole amount";
  }
  if (ownBest === null) {
    return null;
  }
  if (format === "reverse") {
    const limit = ownBest.amount - tickSize;
    if (amount > limit) {
      return `must undercut your ${formatMoney(ownBest)} by at least ${tickSize}`;
    }
  } else {
    const limit = ownBest.amount + tickSize;
    if (amount < limit) {
      return `must raise your ${formatMoney(ownBest)} by at least ${tickSize}`;
    }
  }
  return null;
}

function ownBestIn(slot: SlotView): Money | null {
  for (const entry of slot.entries) {
    if (entry.own && typeof entry.value !== "string") {
      return entry.value;
    }
  }
  return null;
}

export function createBidderRoom(container: HTMLElement, opts: BidderRoomOptions): BidderRoom {
  const title = el("h2", {}, "…");
  const phaseBadge = el("span", { class: "phase" });
  const countdownEl = el("span", { class: "countdown" });
  const staleBanner = el("div", { class: "stale-banner hidden" }, "connection lost, data may be stale");
  const ladders = el("div", { class: "ladders" });
  const rankLine = el("div", { class: "rank" });
  const feed = el("ul", { class: "feed" });

  const slotSelect = el("select", { class: "slot" });
  const amountInput = el("input", { type: "number", min: "1", step: "1" });
  const bidButton = el("button", { type: "button", disabled: "" }, "Place bid");
  const warning = el("div", { class: "warning" });
  const result = el("div", { class: "bid-result" });

  const root = el(
    "div",
    { class: "room bidder-room" },
    staleBanner,
    title,
    el("div", { class: "status-line" }, phaseBadge, " · ends in ", countdownEl),
    rankLine,
    ladders,
    el("div", { class: "bid-form" }, slotSelect, amountInput, bidButton, warning, result),
    el("h3", {}, "Activity"),
    feed,
  );
  container.append(root);

  let view: AuctionView | null = null;
  let closingSeen = false;
  let countdown: CountdownHandle | null = null;

  const refreshButton = () => {
    const biddable = view !== null && BIDDABLE_PHASES.has(view.phase) && !closingSeen;
    bidButton.disabled = !biddable;
  };

  const currentSlot = (): SlotView | null => {
    if (view === null) return null;
    return view.slots[slotSelect.value] ?? Object.values(view.slots)[0] ?? null;
  };

  const refreshWarning = () => {
    const slot = currentSlot();
    if (view === null || slot === null || amountInput.value === "") {
      warning.textContent = "";
      return;
    }
    const problem = tickWarning(
      view.format,
      view.tick_size ?? 1,
      ownBestIn(slot),
      Number(amountInput.value),
    );
    warning.textContent = problem ?? "";
  };
  amountInput.addEventListener("input", refreshWarning);
  slotSelect.addEventListener("change", refreshWarning);

  bidButton.addEventListener("click", () => {
    const slot = currentSlot();
    if (slot === null || amountInput.value === "") return;
    const amount = Number(amountInput.value);
    bidButton.disabled = true;
    void opts
      .submitBid(slot.slot_id, amount)
      .then((reply) => {
        result.textContent = reply.accepted
          ? `accepted, rank ${reply.rank}`
          : `rejected: ${reply.reason}`;
      })
      .catch((err: unknown) => {
        result.textContent = `failed: ${err instanceof Error ? err.message : String(err)}`;
      })
      .finally(refreshButton);
  });

  return {
    root,
    bidButton,
    countdownEl,
    renderView(next: AuctionView): void {
      view = next;
      title.textContent = next.title;
      phaseBadge.textContent = next.phase;
      if (countdown === null) {
        countdown = startCountdown(countdownEl, opts.clock, () => view?.current_end ?? 0);
      }

      const keep = slotSelect.value;
      clear(slotSelect);
      for (const slotId of Object.keys(next.slots)) {
        slotSelect.append(el("option", { value: slotId }, slotId));
      }
      if (keep && next.slots[keep]) slotSelect.value = keep;

      clear(ladders);
      const rankBits: string[] = [];
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
        if (slot.own_rank !== undefined) {
          const rank = slot.own_rank === null ? "no bid yet" : `rank ${slot.own_rank}`;
          rankBits.push(`${slot.slot_id}: ${rank} of ${slot.competitor_count} bidders`);
        }
      }
      rankLine.textContent = rankBits.join(" · ");
      refreshButton();
      refreshWarning();
    },
    onMessage(msg: StreamMessage): void {
      if (msg.kind === "closing_announced" || msg.kind === "closed" || msg.kind === "auction_cancelled") {
        closingSeen = true;
        bidButton.disabled = true;
      }
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
