// The auctioneer's console: the same ladder the bidders see but with
// identities resolved through the view's identity map, a participant status
// table, and the ban / prolong / cancel controls. Every action is a server
// call; rejections surface verbatim as reason codes.

import type { ServerClock } from "../clock";
import { startCountdown, type CountdownHandle } from "../countdown";
import type { AdminStatus, AuctionView, StreamMessage } from "../wire";
import { clear, el } from "./dom";
import { formatMessage, formatValue } from "./format";

export interface ConsoleActions {
  ban(personId: string): Promise<unknown>;
  admit(personId: string): Promise<unknown>;
  prolong(deltaMs: number): Promise<unknown>;
  cancel(): Promise<unknown>;
}

export interface AuctioneerConsole {
  root: HTMLElement;
  countdownEl: HTMLElement;
  renderView(view: AuctionView): void;
  renderParticipants(status: AdminStatus): void;
  onMessage(msg: StreamMessage): void;
  setStale(stale: boolean): void;
  stop(): void;
}

export function createAuctioneerConsole(
  container: HTMLElement,
  opts: { clock: ServerClock; actions: ConsoleActions },
): AuctioneerConsole {
  const title = el("h2", {}, "…");
  const phaseBadge = el("span", { class: "phase" });
  const countdownEl = el("span", { class: "countdown" });
  const staleBanner = el("div", { class: "stale-banner hidden" }, "connection lost, data may be stale");
  const ladders = el("div", { class: "ladders" });
  const participantsBody = el("tbody");
  const feed = el("ul", { class: "feed" });
  const actionResult = el("div", { class: "action-result" });

  const prolongInput = el("input", { type: "number", value: "60000", step: "1000" });
  const prolongButton = el("button", { type: "button" }, "Prolong");
  const cancelButton = el("button", { type: "button" }, "Cancel auction");

  const report = (p: Promise<unknown>) =>
    p
      .then(() => {
        actionResult.textContent = "ok";
      })
      .catch((err: unknown) => {
        actionResult.textContent = err instanceof Error ? err.message : String(err);
      });

  prolongButton.addEventListener("click", () => {
    void report(opts.actions.prolong(Number(prolongInput.value)));
  });
  cancelButton.addEventListener("click", () => {
    void report(opts.actions.cancel());
  });

  const root = el(
    "div",
    { class: "room auctioneer-console" },
    staleBanner,
    title,
    el("div", { class: "status-line" }, phaseBadge, " · ends in ", countdownEl),
    ladders,
    el("h3", {}, "Participants"),
    el(
      "table",
      { class: "participants" },
      el(
        "thead",
        {},
        el(
          "tr",
          {},
          ...["person", "company", "role", "pseudonym", "status", ""].map((h) => el("th", {}, h)),
        ),
      ),
      participantsBody,
    ),
    el("div", { class: "controls" }, prolongInput, prolongButton, cancelButton, actionResult),
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
      const identities = next.identity_map ?? {};
      for (const slot of Object.values(next.slots)) {
        const list = el("ol", { class: "ladder" });
        for (const entry of slot.entries) {
          const who = identities[entry.label];
          const name = who ? ` = ${who.name} (${who.company_id ?? "?"})` : "";
          list.append(el("li", {}, `${entry.label}${name}: ${formatValue(entry.value)}`));
        }
        ladders.append(
          el("section", {}, el("h3", {}, `${slot.description} (${slot.bid_count} bids)`), list),
        );
      }
    },
    renderParticipants(status: AdminStatus): void {
      clear(participantsBody);
      for (const row of status.participants) {
        const state = row.banned
          ? "banned"
          : row.admitted
            ? "admitted"
            : row.contract_signed
              ? "awaiting admission"
              : row.invited
                ? "invited"
                : "not invited";
        const cell = el("td");
        if (row.role === "bidder" && !row.banned) {
          if (!row.admitted) {
            const admitBtn = el("button", { type: "button" }, "Admit");
            admitBtn.addEventListener("click", () => {
              void report(opts.actions.admit(row.person_id));
            });
            cell.append(admitBtn);
          }
          const banBtn = el("button", { type: "button" }, "Ban");
          banBtn.addEventListener("click", () => {
            void report(opts.actions.ban(row.person_id));
          });
          cell.append(banBtn);
        }
        participantsBody.append(
          el(
            "tr",
            { "data-person": row.person_id, "data-state": state },
            el("td", {}, `${row.name} (${row.person_id})`),
            el("td", {}, row.company_id ?? ""),
            el("td", {}, row.role),
            el("td", {}, row.pseudonym ?? ""),
            el("td", {}, state),
            cell,
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
