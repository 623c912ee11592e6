// The lobby: every auction this account is rostered on, with a join button.

import type { AuctionRow } from "../wire";
import { clear, el } from "./dom";

export interface Lobby {
  root: HTMLElement;
  render(rows: AuctionRow[]): void;
}

export function createLobby(
  container: HTMLElement,
  opts: { onJoin: (row: AuctionRow) => void; onSetup?: () => void },
): Lobby {
  const body = el("tbody");
  const root = el(
    "div",
    { class: "lobby" },
    el("h2", {}, "Auctions"),
    el(
      "table",
      {},
      el(
        "thead",
        {},
        el("tr", {}, ...["auction", "format", "phase", "your role", ""].map((h) => el("th", {}, h))),
      ),
      body,
    ),
  );
  if (opts.onSetup) {
    const setupButton = el("button", { type: "button" }, "New auction…");
    setupButton.addEventListener("click", () => opts.onSetup?.());
    root.append(setupButton);
  }
  container.append(root);
  return {
    root,
    render(rows: AuctionRow[]): void {
      clear(body);
      for (const row of rows) {
        const join = el("button", { type: "button" }, "Join");
        join.addEventListener("click", () => opts.onJoin(row));
        body.append(
          el(
            "tr",
            { "data-auction": row.auction_id },
            el("td", {}, row.title),
            el("td", {}, row.format),
            el("td", {}, row.phase),
            el("td", {}, row.role),
            el("td", {}, join),
          ),
        );
      }
    },
  };
}
