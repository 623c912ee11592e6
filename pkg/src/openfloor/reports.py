"""Post-auction reports: participants, bidding curves, winners, statistics.

One neutral report structure is computed from the final state; per-role
rendering then applies the same redaction rules as the live views, so a
report file never reveals more than the role could see during the auction.
Regenerating a report from a replayed state produces byte-identical files.
"""
from __future__ import annotations

import csv
import io
import os
from typing import Any

from .codec import canonical_bytes
from .domain import AuctionFormat, AuctionState, MessageKind, Person, Phase, Role
from .engine import BindingResult, ResultError, binding_result, determine_winners
from .views import percent_of_reference, pseudonym, slot_reference

REPORT_ROLES = (Role.AUCTIONEER, Role.BIDDER, Role.ORIGINATOR, Role.OBSERVER)


class ReportError(Exception):
    def __init__(self, code: str, detail: str = ""):
        super().__init__(code if not detail else f"{code}: {detail}")
        self.code = code
        self.detail = detail


def _closed_at(state: AuctionState) -> int | None:
    for msg in reversed(state.messages):
        if msg.kind is MessageKind.CLOSED:
            return msg.payload["closed_at"]
        if msg.kind is MessageKind.AUCTION_CANCELLED:
            return msg.payload["cancelled_at"]
    return None


def _curve(state: AuctionState, slot_id: str) -> list[tuple[int, int]]:
    """Best-so-far after each surviving bid, equal-time points collapsed to
    the latest, so the series is strictly time-ordered and monotone."""
    reverse = state.config.format is AuctionFormat.REVERSE
    best: int | None = None
    points: list[tuple[int, int]] = []
    for bid in state.slot_bids(slot_id):
        amount = bid.amount.amount
        if best is None or (amount < best if reverse else amount > best):
            best = amount
        if points and points[-1][0] == bid.server_time:
            points[-1] = (bid.server_time, best)
        else:
            points.append((bid.server_time, best))
    return points


def generate_report(state: AuctionState, persons: dict[str, Person]) -> dict[str, Any]:
    """Neutral (unredacted) report for a finished auction."""
    if state.phase not in (Phase.CLOSED, Phase.CANCELLED):
        raise ReportError("NotClosed", state.phase.value)

    winners = determine_winners(state)
    try:
        binding = binding_result(state, winners).value
    except ResultError:
        binding = None  # cancelled: no outcome to bind anyone

    participants = []
    for pid in sorted(state.roster):
        entry = state.roster[pid]
        person = persons.get(pid)
        participants.append(
            {
                "person_id": pid,
                "name": person.name if person else pid,
                "company_id": person.company_id if person else None,
                "role": entry.role.value,
                "pseudonym": pseudonym(state, pid) if pid in state.pseudonyms else None,
                "invited": entry.status.invited,
                "contract_signed": entry.status.contract_signed,
                "admitted": entry.status.admitted,
                "banned": entry.status.banned,
            }
        )

    slots = []
    total_winning = 0
    winner_count = 0
    for slot in state.config.slots:
        win = winners[slot.slot_id]
        if win is not None:
            total_winning += win.amount.amount
            winner_count += 1
        slots.append(
            {
                "slot_id": slot.slot_id,
                "description": slot.description,
                "quantity": slot.quantity,
                "unit": slot.unit,
                "bid_count": len(state.slot_bids(slot.slot_id)),
                "winner": (
                    None
                    if win is None
                    else {
                        "person_id": win.bidder,
                        "pseudonym": pseudonym(state, win.bidder),
                        "amount": win.amount.to_dict(),
                        "bid_id": win.bid_id,
                        "seq": win.seq,
                        "server_time": win.server_time,
                    }
                ),
                "curve": [[t, a] for t, a in _curve(state, slot.slot_id)],
            }
        )

    all_bids = [b for bids in state.bids.values() for b in bids]
    voided = sorted((b for b in all_bids if b.voided), key=lambda b: b.seq)
    savings = None
    historic = state.config.historic_value
    if historic is not None and winner_count > 0:
        savings = percent_of_reference(historic.amount - total_winning, historic.amount)

    return {
        "auction_id": state.auction_id,
        "title": state.config.title,
        "format": state.config.format.value,
        "currency": state.config.currency,
        "phase": state.phase.value,
        "start_time": state.config.start_time,
        "scheduled_end": state.config.start_time + state.config.main_duration_ms,
        "final_end": state.current_end,
        "hard_cap_at": state.hard_cap_at,
        "closed_at": _closed_at(state),
        "participants": participants,
        "slots": slots,
        "statistics": {
            "total_bids": len(all_bids),
            "voided_bids": len(voided),
            "extensions_granted": state.extension_count,
            "distinct_bidders": len(state.pseudonyms),
            "total_winning": (
                {"amount": total_winning, "currency": state.config.currency}
                if winner_count > 0
                else None
            ),
            "savings_percent": savings,
            "binding": binding,
        },
        "voided_bids": [
            {
                "bid_id": b.bid_id,
                "slot_id": b.slot_id,
                "person_id": b.bidder,
                "pseudonym": pseudonym(state, b.bidder),
                "amount": b.amount.to_dict(),
                "seq": b.seq,
                "server_time": b.server_time,
            }
            for b in voided
        ],
    }


# -- per-role rendering ----------------------------------------------------


def _percent_str(state: AuctionState, slot_id: str, amount: int) -> str | None:
    ref = slot_reference(state, slot_id)
    if ref is None:
        return None
    return percent_of_reference(amount, ref) + "%"


def render_report(report: dict[str, Any], role: Role, state: AuctionState) -> dict[str, Any]:
    """Redact the neutral report for one role; same rules as live views."""
    if role is Role.AUCTIONEER:
        return report

    out = dict(report)
    out["participants"] = [
        {
            "pseudonym": p["pseudonym"],
            "role": p["role"],
            "invited": p["invited"],
            "contract_signed": p["contract_signed"],
            "admitted": p["admitted"],
            "banned": p["banned"],
        }
        for p in report["participants"]
    ]

    def strip_winner(slot: dict[str, Any]) -> dict[str, Any]:
        slot = dict(slot)
        win = slot["winner"]
        if win is not None:
            win = {k: v for k, v in win.items() if k != "person_id"}
            if role is Role.OBSERVER:
                amount = win.pop("amount")
                win["percent"] = _percent_str(state, slot["slot_id"], amount["amount"])
            slot["winner"] = win
        if role is Role.OBSERVER:
            slot["curve"] = [
                [t, _percent_str(state, slot["slot_id"], a)] for t, a in slot["curve"]
            ]
        return slot

    out["slots"] = [strip_winner(s) for s in report["slots"]]
    out["voided_bids"] = [
        {k: v for k, v in b.items() if k != "person_id"} for b in report["voided_bids"]
    ]
    if role is Role.OBSERVER:
        redacted_voided = []
        for b in out["voided_bids"]:
            b = dict(b)
            amount = b.pop("amount")
            b["percent"] = _percent_str(state, b["slot_id"], amount["amount"])
            redacted_voided.append(b)
        out["voided_bids"] = redacted_voided
        stats = dict(out["statistics"])
        total = stats.pop("total_winning")
        historic = state.config.historic_value
        if total is not None and historic is not None:
            stats["total_winning_percent"] = percent_of_reference(total["amount"], historic.amount) + "%"
        else:
            stats["total_winning_percent"] = None
        out["statistics"] = stats
        out = {k: v for k, v in out.items() if k != "currency"}
    return out


def _csv_rows(rendered: dict[str, Any], role: Role) -> list[list[Any]]:
    rows: list[list[Any]] = [["section", "slot_id", "server_time", "label", "value"]]
    for slot in rendered["slots"]:
        for t, v in slot["curve"]:
            rows.append(["curve", slot["slot_id"], t, "", v])
        win = slot["winner"]
        if win is None:
            rows.append(["winner", slot["slot_id"], "", "", ""])
        else:
            value = win.get("percent") if role is Role.OBSERVER else win["amount"]["amount"]
            rows.append(
                ["winner", slot["slot_id"], win["server_time"], win["pseudonym"], value]
            )
    stats = rendered["statistics"]
    for key in sorted(stats):
        value = stats[key]
        if isinstance(value, dict):
            value = value["amount"]
        rows.append(["statistic", "", "", key, "" if value is None else value])
    return rows


def render_csv(rendered: dict[str, Any], role: Role) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, quoting=csv.QUOTE_NONNUMERIC, lineterminator="\n")
    writer.writerows(_csv_rows(rendered, role))
    return buf.getvalue()


def write_reports(state: AuctionState, persons: dict[str, Person], data_dir: str) -> str:
    """Write report.<role>.json and report.<role>.csv for every role.
    Returns the report directory."""
    report = generate_report(state, persons)
    out_dir = os.path.join(data_dir, "reports", state.auction_id)
    os.makedirs(out_dir, exist_ok=True)
    for role in REPORT_ROLES:
        rendered = render_report(report, role, state)
        with open(os.path.join(out_dir, f"report.{role.value}.json"), "wb") as fh:
            fh.write(canonical_bytes(rendered) + b"\n")
        with open(os.path.join(out_dir, f"report.{role.value}.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(render_csv(rendered, role))
    return out_dir
