// @vitest-environment happy-dom
//
// Login, lobby, wizard payload building, auctioneer console rendering, and
// feed formatting.

import { beforeEach, describe, expect, test } from "vitest";
import { ServerClock } from "../src/clock";
import { createAuctioneerConsole } from "../src/screens/auctioneerConsole";
import { formatMessage, formatMoney } from "../src/screens/format";
import { createLobby } from "../src/screens/lobby";
import { createLogin } from "../src/screens/login";
import { buildCreatePayload } from "../src/screens/setupWizard";
import type { AdminStatus, AuctionRow, AuctionView } from "../src/wire";

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("login", () => {
  test("submits credentials and shows rejection codes verbatim", () => {
    const calls: Array<[string, string]> = [];
    const screen = createLogin(document.body, {
      onSubmit: (u, p) => calls.push([u, p]),
    });
    (document.querySelector("input[type=text]") as HTMLInputElement).value = "ann";
    (document.querySelector("input[type=password]") as HTMLInputElement).value = "ann-pw";
    screen.root.dispatchEvent(new Event("submit"));
    expect(calls).toEqual([["ann", "ann-pw"]]);
    screen.showError("BadCredentials");
    expect((document.querySelector(".error") as HTMLElement).textContent).toBe("BadCredentials");
  });
});

describe("lobby", () => {
  test("lists rostered auctions and joins on click", () => {
    const joined: AuctionRow[] = [];
    const lobby = createLobby(document.body, { onJoin: (r) => joined.push(r) });
    const row: AuctionRow = {
      auction_id: "a1",
      title: "Spring steel",
      format: "reverse",
      phase: "open",
      role: "bidder",
      start_time: 0,
      current_end: 1,
    };
    lobby.render([row]);
    expect(document.body.textContent).toContain("Spring steel");
    (document.querySelector("tr[data-auction=a1] button") as HTMLButtonElement).click();
    expect(joined).toEqual([row]);
  });
});

describe("wizard payload", () => {
  test("builds the creation payload from form values", () => {
    const payload = buildCreatePayload({
      auctionId: "a9",
      title: "Bulk paper",
      format: "reverse",
      currency: "EUR",
      startInMs: 60_000,
      serverNow: 1_000_000,
      mainDurationMs: 600_000,
      hardCapMs: 1_200_000,
      extensionScheduleMs: "180000, 120000,60000",
      closingGraceMs: 3_000,
      tickSize: 100,
      historicAmount: 20_000,
      slotId: "s1",
      slotDescription: "pallets",
      participants: [
        "ann, auctioneer, host, ann-pw",
        "b1, bidder, co-1, b1-pw, admit",
        "b2, bidder, co-2, b2-pw",
        "",
      ].join("\n"),
    });
    const config = payload.config as Record<string, unknown>;
    expect(config.start_time).toBe(1_060_000);
    expect(config.extension_schedule_ms).toEqual([180_000, 120_000, 60_000]);
    expect(config.historic_value).toEqual({ amount: 20_000, currency: "EUR" });
    expect(payload.participants).toEqual([
      { person_id: "ann", role: "auctioneer", company_id: "host", password: "ann-pw" },
      { person_id: "b1", role: "bidder", company_id: "co-1", password: "b1-pw", admitted: true },
      { person_id: "b2", role: "bidder", company_id: "co-2", password: "b2-pw" },
    ]);
  });

  test("omits the reference amount when left blank", () => {
    const payload = buildCreatePayload({
      auctionId: "a9",
      title: "t",
      format: "english",
      currency: "USD",
      startInMs: 0,
      serverNow: 5,
      mainDurationMs: 1,
      hardCapMs: 2,
      extensionScheduleMs: "1",
      closingGraceMs: 1,
      tickSize: 1,
      historicAmount: null,
      slotId: "s1",
      slotDescription: "d",
      participants: "",
    });
    expect((payload.config as Record<string, unknown>).historic_value).toBeUndefined();
    expect(payload.participants).toEqual([]);
  });
});

describe("auctioneer console", () => {
  const view: AuctionView = {
    auction_id: "a1",
    title: "Spring steel",
    format: "reverse",
    viewer_role: "auctioneer",
    phase: "open",
    extension_count: 0,
    current_end: 600_000,
    server_time: 10_000,
    slots: {
      s1: {
        slot_id: "s1",
        description: "coil",
        quantity: 1,
        unit: "t",
        bid_count: 1,
        entries: [{ label: "Bidder-1", value: { amount: 9_500, currency: "EUR" } }],
      },
    },
    identity_map: {
      "Bidder-1": { person_id: "b1", name: "Bea", company_id: "co-1" },
    },
  };

  const status: AdminStatus = {
    server_time: 10_000,
    auction_id: "a1",
    phase: "open",
    current_end: 600_000,
    hard_cap_at: 1_200_000,
    extension_count: 0,
    participants: [
      {
        person_id: "b1",
        name: "Bea",
        company_id: "co-1",
        role: "bidder",
        slot_id: null,
        invited: true,
        contract_signed: true,
        password_delivered: true,
        admitted: true,
        banned: false,
        pseudonym: "Bidder-1",
      },
      {
        person_id: "b3",
        name: "Bo",
        company_id: "co-3",
        role: "bidder",
        slot_id: null,
        invited: true,
        contract_signed: true,
        password_delivered: true,
        admitted: false,
        banned: false,
        pseudonym: null,
      },
    ],
  };

  test("resolves identities on the ladder and renders the status table", () => {
    const console_ = createAuctioneerConsole(document.body, {
      clock: new ServerClock(),
      actions: {
        ban: () => Promise.resolve({}),
        admit: () => Promise.resolve({}),
        prolong: () => Promise.resolve({}),
        cancel: () => Promise.resolve({}),
      },
    });
    console_.renderView(view);
    expect(document.body.textContent).toContain("Bidder-1 = Bea (co-1): 9,500 EUR");
    console_.renderParticipants(status);
    const admitted = document.querySelector("tr[data-person=b1]") as HTMLElement;
    const waiting = document.querySelector("tr[data-person=b3]") as HTMLElement;
    expect(admitted.dataset.state).toBe("admitted");
    expect(waiting.dataset.state).toBe("awaiting admission");
    expect(waiting.textContent).toContain("Admit");
  });

  test("control buttons fire the wire actions and surface errors verbatim", async () => {
    const actions: string[] = [];
    const console_ = createAuctioneerConsole(document.body, {
      clock: new ServerClock(),
      actions: {
        ban: (p) => {
          actions.push(`ban:${p}`);
          return Promise.resolve({});
        },
        admit: () => Promise.resolve({}),
        prolong: (ms) => {
          actions.push(`prolong:${ms}`);
          return Promise.reject(new Error("AlreadyClosed"));
        },
        cancel: () => {
          actions.push("cancel");
          return Promise.resolve({});
        },
      },
    });
    console_.renderParticipants(status);
    (document.querySelector("tr[data-person=b1] button") as HTMLButtonElement).click();
    const buttons = Array.from(document.querySelectorAll(".controls button")) as HTMLButtonElement[];
    (buttons[0] as HTMLButtonElement).click(); // prolong, default 60000
    await new Promise((r) => setTimeout(r));
    expect(actions).toEqual(["ban:b1", "prolong:60000"]);
    expect((document.querySelector(".action-result") as HTMLElement).textContent).toBe(
      "AlreadyClosed",
    );
  });
});

describe("feed formatting", () => {
  test("renders percent passthrough and money consistently", () => {
    expect(formatMoney({ amount: 1_234_567, currency: "EUR" })).toBe("1,234,567 EUR");
    expect(
      formatMessage({
        seq: 3,
        kind: "bid_placed",
        payload: { bidder_label: "Bidder-2", percent: "46.50%", slot_id: "s1" },
        server_time: 6_500,
      }),
    ).toBe("[6s] bid by Bidder-2: 46.50%");
    expect(
      formatMessage({
        seq: 4,
        kind: "bid_placed",
        payload: {
          bidder_label: "Bidder-2",
          amount: { amount: 9_300, currency: "EUR" },
          slot_id: "s1",
        },
        server_time: 6_500,
      }),
    ).toBe("[6s] bid by Bidder-2: 9,300 EUR");
    expect(
      formatMessage({
        seq: 9,
        kind: "participant_banned",
        payload: { person_label: null, voided_seqs: [] },
        server_time: 50_000,
      }),
    ).toBe("[50s] banned: a participant");
  });
});
