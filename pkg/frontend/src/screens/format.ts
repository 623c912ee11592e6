// Display formatting for ladder values and stream messages. A ladder value
// is either Money (auctioneer, bidder, originator views) or an opaque
// percent string (observer view); the observer branch passes the string
// through untouched so nothing the server redacted can reappear here.

import type { LadderEntry, Money, StreamMessage } from "../wire";

export function formatMoney(m: Money): string {
  return `${m.amount.toLocaleString("en-US")} ${m.currency}`;
}

export function formatValue(value: Money | string): string {
  return typeof value === "string" ? value : formatMoney(value);
}

export function formatEntry(entry: LadderEntry): string {
  const own = entry.own ? " (you)" : "";
  return `${entry.label}${own}: ${formatValue(entry.value)}`;
}

function clockStamp(serverTime: number): string {
  const s = Math.floor(serverTime / 1000);
  return `[${s}s]`;
}

// One feed line per stream message, built only from what the redacted
// payload actually carries.
export function formatMessage(msg: StreamMessage): string {
  const p = msg.payload;
  const stamp = clockStamp(msg.server_time);
  switch (msg.kind) {
    case "bid_placed": {
      const value = typeof p.percent === "string" ? p.percent : formatValue(p.amount as Money);
      return `${stamp} bid by ${String(p.bidder_label)}: ${value}`;
    }
    case "state_changed":
      return `${stamp} auction is now ${String(p.phase)}`;
    case "extension_granted":
      return `${stamp} extended to ${String(p.new_end)}`;
    case "closing_announced":
      return `${stamp} closing announced`;
    case "closed":
      return `${stamp} closed`;
    case "participant_banned":
      return `${stamp} banned: ${String(p.person_id ?? p.person_label ?? "a participant")}`;
    case "participant_admitted":
      return `${stamp} admitted: ${String(p.person_id ?? p.person_label ?? "a participant")}`;
    case "auction_cancelled":
      return `${stamp} auction cancelled`;
    case "auction_prolonged":
      return `${stamp} prolonged to ${String(p.new_end)}`;
    default:
      return `${stamp} ${msg.kind}`;
  }
}
