"""Role-filtered projections of auction state.

Each role sees a different projection of the same state:

* auctioneer: identities, amounts, and the pseudonym-to-identity map
* bidder: pseudonyms and amounts, plus their own rank and how many rivals
  share the slot
* originator: pseudonyms and amounts, no identities
* observer: pseudonyms and percent-of-reference strings only; no absolute
  amount or currency field appears anywhere in the projection

Redaction also applies to replayed messages, so a client's message stream
never carries more than its role's view would.
"""
from __future__ import annotations

from decimal import ROUND_HALF_UP, Decimal
from typing import Any

from .domain import (
    AuctionState,
    Bid,
    Message,
    MessageKind,
    Person,
    Role,
)
from .engine import rank_bidders


class ViewError(Exception):
    def __init__(self, code: str, detail: str = ""):
        super().__init__(code if not detail else f"{code}: {detail}")
        self.code = code
        self.detail = detail


def pseudonym(state: AuctionState, person_id: str) -> str:
    """Stable public label for a bidder, assigned in first-bid order."""
    n = state.pseudonyms.get(person_id)
    if n is None:
        return "Bidder-?"
    return f"Bidder-{n}"


def percent_of_reference(amount: int, reference: int) -> str:
    """amount as a percentage of reference, two decimals, half-up."""
    if reference <= 0:
        raise ViewError("NoReferenceAvailable", f"reference {reference}")
    pct = Decimal(amount) * 100 / Decimal(reference)
    return str(pct.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def slot_reference(state: AuctionState, slot_id: str) -> int | None:
    """Reference amount for percent views on one slot.

    Priority: auction-wide historic value, then the slot's start price, then
    the first bid ever placed on the slot (voided or not, so the reference
    never changes retroactively). None when nothing is available.
    """
    if state.config.historic_value is not None:
        return state.config.historic_value.amount
    slot = state.config.slot(slot_id)
    if slot is not None and slot.start_price is not None:
        return slot.start_price.amount
    bids = state.slot_bids(slot_id, include_voided=True)
    if bids:
        first = min(bids, key=lambda b: b.seq)
        return first.amount.amount
    return None


def _percent_entry(state: AuctionState, bid: Bid) -> str:
    ref = slot_reference(state, bid.slot_id)
    if ref is None:
        raise ViewError("NoReferenceAvailable", bid.slot_id)
    return percent_of_reference(bid.amount.amount, ref) + "%"


def _viewer_entry(state: AuctionState, role: Role, bid: Bid, viewer: str) -> dict[str, Any]:
    entry: dict[str, Any] = {"label": pseudonym(state, bid.bidder)}
    if role is Role.OBSERVER:
        entry["value"] = _percent_entry(state, bid)
    else:
        entry["value"] = bid.amount.to_dict()
    if role is Role.BIDDER and bid.bidder == viewer:
        entry["own"] = True
    return entry


def competitor_count(state: AuctionState, slot_id: str) -> int:
    """Admitted, unbanned bidders whose right covers the slot (the viewer
    included)."""
    n = 0
    for entry in state.roster.values():
        if entry.role is not Role.BIDDER:
            continue
        if not entry.status.admitted or entry.status.banned:
            continue
        if entry.right is not None and entry.right.covers_slot(slot_id):
            n += 1
    return n


def render_view(
    state: AuctionState,
    viewer: str,
    role: Role,
    now: int,
    persons: dict[str, Person] | None = None,
) -> dict[str, Any]:
    """The poll-time projection of one auction for one viewer.

    Raises ``ViewError("NoAccessRight")`` when the viewer's roster entry does
    not support reading at all (bidders must be admitted and unbanned first).
    """
    entry = state.roster.get(viewer)
    if entry is None:
        raise ViewError("NoAccessRight", viewer)
    if entry.role is not role:
        raise ViewError("NoAccessRight", f"{viewer} is not {role.value}")
    if role is Role.BIDDER and (not entry.status.admitted or entry.status.banned):
        raise ViewError("NoAccessRight", f"{viewer} not admitted")

    slots: dict[str, Any] = {}
    for slot in state.config.slots:
        ranking = rank_bidders(state, slot.slot_id)
        slot_view: dict[str, Any] = {
            "slot_id": slot.slot_id,
            "description": slot.description,
            "quantity": slot.quantity,
            "unit": slot.unit,
            "bid_count": len(state.slot_bids(slot.slot_id)),
            "entries": [_viewer_entry(state, role, b, viewer) for _, b in ranking],
        }
        if role is Role.BIDDER:
            own_rank = None
            for i, (who, _) in enumerate(ranking, start=1):
                if who == viewer:
                    own_rank = i
            slot_view["own_rank"] = own_rank
            slot_view["competitor_count"] = competitor_count(state, slot.slot_id)
        slots[slot.slot_id] = slot_view

    view: dict[str, Any] = {
        "auction_id": state.auction_id,
        "title": state.config.title,
        "format": state.config.format.value,
        "viewer_role": role.value,
        "phase": state.phase.value,
        "extension_count": state.extension_count,
        "current_end": state.current_end,
        "server_time": now,
        "slots": slots,
    }
    if role is Role.BIDDER:
        view["tick_size"] = state.config.tick_size
    if role is Role.AUCTIONEER:
        identity_map: dict[str, Any] = {}
        for person_id, n in state.pseudonyms.items():
            person = (persons or {}).get(person_id)
            identity_map[f"Bidder-{n}"] = {
                "person_id": person_id,
                "name": person.name if person else person_id,
                "company_id": person.company_id if person else None,
            }
        view["identity_map"] = identity_map
    return view


def redact_message(state: AuctionState, msg: Message, viewer: str, role: Role) -> dict[str, Any]:
    """One stream message as the given role may see it.

    The seq, kind, and server_time always pass through unchanged; payload
    fields naming people or absolute amounts are rewritten per role.
    """
    payload = dict(msg.payload)
    if msg.kind is MessageKind.BID_PLACED:
        bidder_id = payload.pop("bidder_id")
        payload["bidder_label"] = pseudonym(state, bidder_id)
        if role is Role.AUCTIONEER or (role is Role.BIDDER and bidder_id == viewer):
            payload["bidder_id"] = bidder_id
        if role is Role.OBSERVER:
            amount = payload.pop("amount")
            slot_id = payload["slot_id"]
            ref = slot_reference(state, slot_id)
            if ref is None:
                raise ViewError("NoReferenceAvailable", slot_id)
            payload["percent"] = percent_of_reference(amount["amount"], ref) + "%"
    elif msg.kind in (MessageKind.PARTICIPANT_BANNED, MessageKind.PARTICIPANT_ADMITTED):
        person_id = payload.pop("person_id")
        if role is Role.AUCTIONEER or (role is Role.BIDDER and person_id == viewer):
            payload["person_id"] = person_id
        else:
            n = state.pseudonyms.get(person_id)
            payload["person_label"] = f"Bidder-{n}" if n is not None else None
    return {
        "seq": msg.seq,
        "kind": msg.kind.value,
        "payload": payload,
        "server_time": msg.server_time,
    }
