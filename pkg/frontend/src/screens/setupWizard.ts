// Setup wizard: compose an auction definition and its participant roster.
// The payload builder is pure so the translation from form fields to the
// wire shape is testable without a DOM.

import { el } from "./dom";

export interface WizardValues {
  auctionId: string;
  title: string;
  format: string;
  currency: string;
  startInMs: number;
  serverNow: number;
  mainDurationMs: number;
  hardCapMs: number;
  extensionScheduleMs: string; // comma-separated
  closingGraceMs: number;
  tickSize: number;
  historicAmount: number | null;
  slotId: string;
  slotDescription: string;
  // one per line: person_id, role, company_id, password [, admit]
  participants: string;
}

export function buildCreatePayload(v: WizardValues): Record<string, unknown> {
  const schedule = v.extensionScheduleMs
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map(Number);
  const participants = v.participants
    .split("\n")
    .map((line) => line.trim())
    .filter((line) => line.length > 0)
    .map((line) => {
      const [personId, role, companyId, password, admit] = line.split(",").map((s) => s.trim());
      const row: Record<string, unknown> = {
        person_id: personId,
        role,
        company_id: companyId,
        password,
      };
      if (role === "bidder" && admit === "admit") {
        row.admitted = true;
      }
      return row;
    });
  const config: Record<string, unknown> = {
    auction_id: v.auctionId,
    title: v.title,
    format: v.format,
    currency: v.currency,
    start_time: v.serverNow + v.startInMs,
    main_duration_ms: v.mainDurationMs,
    hard_cap_ms: v.hardCapMs,
    extension_schedule_ms: schedule,
    closing_grace_ms: v.closingGraceMs,
    tick_size: v.tickSize,
    slots: [{ slot_id: v.slotId, description: v.slotDescription, quantity: 1, unit: "unit" }],
  };
  if (v.historicAmount !== null) {
    config.historic_value = { amount: v.historicAmount, currency: v.currency };
  }
  return { config, participants };
}

export interface SetupWizard {
  root: HTMLElement;
  showResult(text: string): void;
}

export function createSetupWizard(
  container: HTMLElement,
  opts: {
    serverNow: () => number;
    onCreate: (payload: Record<string, unknown>) => void;
  },
): SetupWizard {
  const fields = {
    auctionId: el("input", { type: "text", placeholder: "auction id" }),
    title: el("input", { type: "text", placeholder: "title" }),
    format: el("select", {}, el("option", { value: "reverse" }, "reverse"), el("option", { value: "english" }, "english")),
    currency: el("input", { type: "text", value: "EUR" }),
    startInMs: el("input", { type: "number", value: "60000" }),
    mainDurationMs: el("input", { type: "number", value: "600000" }),
    hardCapMs: el("input", { type: "number", value: "1200000" }),
    extensionScheduleMs: el("input", {
      type: "text",
      value: "180000,120000,60000,30000,15000,10000,5000",
    }),
    closingGraceMs: el("input", { type: "number", value: "3000" }),
    tickSize: el("input", { type: "number", value: "100" }),
    historicAmount: el("input", { type: "number", placeholder: "reference amount (optional)" }),
    slotId: el("input", { type: "text", value: "s1" }),
    slotDescription: el("input", { type: "text", placeholder: "what is being auctioned" }),
    participants: el("textarea", {
      rows: "6",
      placeholder: "person_id, role, company_id, password[, admit]",
    }),
  };
  const createButton = el("button", { type: "submit" }, "Create auction");
  const resultLine = el("div", { class: "result" });

  const labeled = (label: string, node: HTMLElement) => el("label", {}, label, node);
  const form = el(
    "form",
    { class: "setup-wizard" },
    el("h2", {}, "New auction"),
    labeled("Auction id", fields.auctionId),
    labeled("Title", fields.title),
    labeled("Format", fields.format),
    labeled("Currency", fields.currency),
    labeled("Starts in (ms)", fields.startInMs),
    labeled("Main duration (ms)", fields.mainDurationMs),
    labeled("Hard cap (ms)", fields.hardCapMs),
    labeled("Extension schedule (ms)", fields.extensionScheduleMs),
    labeled("Closing grace (ms)", fields.closingGraceMs),
    labeled("Tick size", fields.tickSize),
    labeled("Reference amount", fields.historicAmount),
    labeled("Slot id", fields.slotId),
    labeled("Slot description", fields.slotDescription),
    labeled("Participants", fields.participants),
    createButton,
    resultLine,
  );
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    opts.onCreate(
      buildCreatePayload({
        auctionId: fields.auctionId.value,
        title: fields.title.value,
        format: fields.format.value,
        currency: fields.currency.value,
        startInMs: Number(fields.startInMs.value),
        serverNow: opts.serverNow(),
        mainDurationMs: Number(fields.mainDurationMs.value),
        hardCapMs: Number(fields.hardCapMs.value),
        extensionScheduleMs: fields.extensionScheduleMs.value,
        closingGraceMs: Number(fields.closingGraceMs.value),
        tickSize: Number(fields.tickSize.value),
        historicAmount: fields.historicAmount.value === "" ? null : Number(fields.historicAmount.value),
        slotId: fields.slotId.value,
        slotDescription: fields.slotDescription.value,
        participants: fields.participants.value,
      }),
    );
  });
  container.append(form);
  return {
    root: form,
    showResult(text: string): void {
      resultLine.textContent = text;
    },
  };
}
