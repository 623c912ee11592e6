"""Domain types for the auction service, with validation.

Conventions used throughout the package:

* Money amounts are integer minor units (cents); no floats ever touch a price.
* Timestamps are server-epoch milliseconds. Clients never contribute
  authoritative times.
* Every type has a canonical dict form (``to_dict`` / ``from_dict``) with
  snake_case keys; the wire protocol, the event log, and reports all use it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .codec import digest

DEFAULT_EXTENSION_SCHEDULE_MS = (180_000, 120_000, 60_000, 30_000, 15_000, 10_000, 5_000)
DEFAULT_CLOSING_GRACE_MS = 3_000


class AuctionFormat(str, Enum):
    ENGLISH = "english"
    REVERSE = "reverse"


class Phase(str, Enum):
    SCHEDULED = "scheduled"
    OPEN = "open"
    EXTENSION = "extension"
    CLOSING = "closing"
    CLOSED = "closed"
    CANCELLED = "cancelled"


#: Phases in which bids can still arrive.
RUNNING_PHASES = frozenset((Phase.OPEN, Phase.EXTENSION, Phase.CLOSING))
#: Phases from which no further transition is possible.
TERMINAL_PHASES = frozenset((Phase.CLOSED, Phase.CANCELLED))


class Role(str, Enum):
    AUCTIONEER = "auctioneer"
    BIDDER = "bidder"
    ORIGINATOR = "originator"
    OBSERVER = "observer"


class MessageKind(str, Enum):
    BID_PLACED = "bid_placed"
    STATE_CHANGED = "state_changed"
    EXTENSION_GRANTED = "extension_granted"
    CLOSING_ANNOUNCED = "closing_announced"
    CLOSED = "closed"
    PARTICIPANT_BANNED = "participant_banned"
    PARTICIPANT_ADMITTED = "participant_admitted"
    AUCTION_CANCELLED = "auction_cancelled"
    AUCTION_PROLONGED = "auction_prolonged"


@dataclass(frozen=True)
class Money:
    amount: int
    currency: str

    def to_dict(self) -> dict[str, Any]:
        return {"amount": self.amount, "currency": self.currency}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Money":
        return cls(amount=int(d["amount"]), currency=str(d["currency"]))


def _money_or_none(d: dict[str, Any] | None) -> Money | None:
    return None if d is None else Money.from_dict(d)


@dataclass(frozen=True)
class Slot:
    slot_id: str
    description: str
    quantity: int
    unit: str
    start_price: Money | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "slot_id": self.slot_id,
            "description": self.description,
            "quantity": self.quantity,
            "unit": self.unit,
            "start_price": self.start_price.to_dict() if self.start_price else None,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Slot":
        return cls(
            slot_id=str(d["slot_id"]),
            description=str(d.get("description", "")),
            quantity=int(d.get("quantity", 1)),
            unit=str(d.get("unit", "unit")),
            start_price=_money_or_none(d.get("start_price")),
        )


@dataclass
class AuctionConfig:
    """Static definition of one auction.

    ``hard_cap_ms`` bounds the total auction length including extensions;
    ``extension_schedule_ms`` lists the reaction window granted by the k-th
    extension, the last entry repeating for all further extensions.
    """

    auction_id: str
    title: str
    format: AuctionFormat
    currency: str
    start_time: int
    main_duration_ms: int
    hard_cap_ms: int
    extension_schedule_ms: list[int] = field(
        default_factory=lambda: list(DEFAULT_EXTENSION_SCHEDULE_MS)
    )
    closing_grace_ms: int = DEFAULT_CLOSING_GRACE_MS
    tick_size: int = 1
    historic_value: Money | None = None
    target_value: Money | None = None
    slots: list[Slot] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "auction_id": self.auction_id,
            "title": self.title,
            "format": self.format.value,
            "currency": self.currency,
            "start_time": self.start_time,
            "main_duration_ms": self.main_duration_ms,
            "hard_cap_ms": self.hard_cap_ms,
            "extension_schedule_ms": list(self.extension_schedule_ms),
            "closing_grace_ms": self.closing_grace_ms,
            "tick_size": self.tick_size,
            "historic_value": self.historic_value.to_dict() if self.historic_value else None,
            "target_value": self.target_value.to_dict() if self.target_value else None,
            "slots": [s.to_dict() for s in self.slots],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AuctionConfig":
        main = int(d["main_duration_ms"])
        hard_cap = d.get("hard_cap_ms")
        schedule = d.get("extension_schedule_ms")
        return cls(
            auction_id=str(d["auction_id"]),
            title=str(d.get("title", "")),
            format=AuctionFormat(d.get("format", "reverse")),
            currency=str(d.get("currency", "EUR")),
            start_time=int(d["start_time"]),
            main_duration_ms=main,
            hard_cap_ms=int(hard_cap) if hard_cap is not None else 2 * main,
            extension_schedule_ms=(
                [int(x) for x in schedule]
                if schedule is not None
                else list(DEFAULT_EXTENSION_SCHEDULE_MS)
            ),
            closing_grace_ms=int(d.get("closing_grace_ms", DEFAULT_CLOSING_GRACE_MS)),
            tick_size=int(d.get("tick_size", 1)),
            historic_value=_money_or_none(d.get("historic_value")),
            target_value=_money_or_none(d.get("target_value")),
            slots=[Slot.from_dict(s) for s in d.get("slots", [])],
        )

    def slot(self, slot_id: str) -> Slot | None:
        for s in self.slots:
            if s.slot_id == slot_id:
                return s
        return None


@dataclass(frozen=True)
class Company:
    company_id: str
    name: str

    def to_dict(self) -> dict[str, Any]:
        return {"company_id": self.company_id, "name": self.name}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Company":
        return cls(company_id=str(d["company_id"]), name=str(d["name"]))


@dataclass(frozen=True)
class Person:
    person_id: str
    name: str
    company_id: str
    credential_hash: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "person_id": self.person_id,
            "name": self.name,
            "company_id": self.company_id,
            "credential_hash": self.credential_hash,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Person":
        return cls(
            person_id=str(d["person_id"]),
            name=str(d["name"]),
            company_id=str(d["company_id"]),
            credential_hash=str(d.get("credential_hash", "")),
        )


@dataclass(frozen=True)
class AccessRight:
    """Grants one person one role in one auction, optionally slot-scoped.

    ``slot_id`` of None means the right covers all slots. The optional
    validity window restricts when the right may be exercised.
    """

    person_id: str
    auction_id: str
    role: Role
    slot_id: str | None = None
    valid_from: int | None = None
    valid_until: int | None = None

    def covers_slot(self, slot_id: str) -> bool:
        return self.slot_id is None or self.slot_id == slot_id

    def valid_at(self, now: int) -> bool:
        if self.valid_from is not None and now < self.valid_from:
            return False
        if self.valid_until is not None and now > self.valid_until:
            return False
        return True

    def to_dict(self) -> dict[str, Any]:
        return {
            "person_id": self.person_id,
            "auction_id": self.auction_id,
            "role": self.role.value,
            "slot_id": self.slot_id,
            "valid_from": self.valid_from,
            "valid_until": self.valid_until,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AccessRight":
        return cls(
            person_id=str(d["person_id"]),
            auction_id=str(d["auction_id"]),
            role=Role(d["role"]),
            slot_id=d.get("slot_id"),
            valid_from=d.get("valid_from"),
            valid_until=d.get("valid_until"),
        )


@dataclass
class ParticipantStatus:
    """Admission workflow flags for one participant in one auction.

    Invariants: admitted implies invited and contract_signed; banned implies
    not admitted.
    """

    person_id: str
    auction_id: str
    invited: bool = False
    contract_signed: bool = False
    password_delivered: bool = False
    admitted: bool = False
    banned: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "person_id": self.person_id,
            "auction_id": self.auction_id,
            "invited": self.invited,
            "contract_signed": self.contract_signed,
            "password_delivered": self.password_delivered,
            "admitted": self.admitted,
            "banned": self.banned,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ParticipantStatus":
        return cls(
            person_id=str(d["person_id"]),
            auction_id=str(d["auction_id"]),
            invited=bool(d.get("invited", False)),
            contract_signed=bool(d.get("contract_signed", False)),
            password_delivered=bool(d.get("password_delivered", False)),
            admitted=bool(d.get("admitted", False)),
            banned=bool(d.get("banned", False)),
        )


@dataclass
class Bid:
    """One bid; ``seq`` is the per-auction sequence number of its message."""

    bid_id: str
    auction_id: str
    slot_id: str
    bidder: str
    amount: Money
    server_time: int
    seq: int
    voided: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "bid_id": self.bid_id,
            "auction_id": self.auction_id,
            "slot_id": self.slot_id,
            "bidder": self.bidder,
            "amount": self.amount.to_dict(),
            "server_time": self.server_time,
            "seq": self.seq,
            "voided": self.voided,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Bid":
        return cls(
            bid_id=str(d["bid_id"]),
            auction_id=str(d["auction_id"]),
            slot_id=str(d["slot_id"]),
            bidder=str(d["bidder"]),
            amount=Money.from_dict(d["amount"]),
            server_time=int(d["server_time"]),
            seq=int(d["seq"]),
            voided=bool(d.get("voided", False)),
        )


@dataclass(frozen=True)
class Message:
    """Sequenced event on an auction's gapless message stream (seq from 1)."""

    seq: int
    kind: MessageKind
    payload: dict[str, Any]
    server_time: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "kind": self.kind.value,
            "payload": self.payload,
            "server_time": self.server_time,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Message":
        return cls(
            seq=int(d["seq"]),
            kind=MessageKind(d["kind"]),
            payload=dict(d["payload"]),
            server_time=int(d["server_time"]),
        )


@dataclass
class RosterEntry:
    """One participant of one auction: intended role, status, granted right.

    Bidder rights are only granted at admission, so ``right`` stays None for
    bidders until then; other roles receive their right when the roster is
    created.
    """

    person_id: str
    role: Role
    slot_id: str | None
    status: ParticipantStatus
    right: AccessRight | None = None
    valid_from: int | None = None
    valid_until: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "person_id": self.person_id,
            "role": self.role.value,
            "slot_id": self.slot_id,
            "status": self.status.to_dict(),
            "right": self.right.to_dict() if self.right else None,
            "valid_from": self.valid_from,
            "valid_until": self.valid_until,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RosterEntry":
        right = d.get("right")
        return cls(
            person_id=str(d["person_id"]),
            role=Role(d["role"]),
            slot_id=d.get("slot_id"),
            status=ParticipantStatus.from_dict(d["status"]),
            right=AccessRight.from_dict(right) if right else None,
            valid_from=d.get("valid_from"),
            valid_until=d.get("valid_until"),
        )


@dataclass
class AuctionState:
    """Dynamic state of one auction: the full fold of its command history."""

    config: AuctionConfig
    phase: Phase = Phase.SCHEDULED
    current_end: int = 0
    hard_cap_at: int = 0
    extension_count: int = 0
    messages: list[Message] = field(default_factory=list)
    bids: dict[str, list[Bid]] = field(default_factory=dict)
    roster: dict[str, RosterEntry] = field(default_factory=dict)
    pseudonyms: dict[str, int] = field(default_factory=dict)
    closing_announced_seq: int | None = None
    announced_end: int | None = None

    @classmethod
    def initial(cls, config: AuctionConfig) -> "AuctionState":
        state = cls(config=config)
        state.current_end = config.start_time + config.main_duration_ms
        state.hard_cap_at = config.start_time + config.hard_cap_ms
        state.bids = {s.slot_id: [] for s in config.slots}
        return state

    @property
    def auction_id(self) -> str:
        return self.config.auction_id

    @property
    def next_seq(self) -> int:
        return len(self.messages) + 1

    def slot_bids(self, slot_id: str, include_voided: bool = False) -> list[Bid]:
        bids = self.bids.get(slot_id, [])
        if include_voided:
            return list(bids)
        return [b for b in bids if not b.voided]

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config.to_dict(),
            "phase": self.phase.value,
            "current_end": self.current_end,
            "hard_cap_at": self.hard_cap_at,
            "extension_count": self.extension_count,
            "messages": [m.to_dict() for m in self.messages],
            "bids": {sid: [b.to_dict() for b in bs] for sid, bs in self.bids.items()},
            "roster": {pid: e.to_dict() for pid, e in self.roster.items()},
            "pseudonyms": self.pseudonyms,
            "closing_announced_seq": self.closing_announced_seq,
            "announced_end": self.announced_end,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AuctionState":
        return cls(
            config=AuctionConfig.from_dict(d["config"]),
            phase=Phase(d["phase"]),
            current_end=int(d["current_end"]),
            hard_cap_at=int(d["hard_cap_at"]),
            extension_count=int(d["extension_count"]),
            messages=[Message.from_dict(m) for m in d["messages"]],
            bids={
                sid: [Bid.from_dict(b) for b in bs] for sid, bs in d["bids"].items()
            },
            roster={pid: RosterEntry.from_dict(e) for pid, e in d["roster"].items()},
            pseudonyms={pid: int(n) for pid, n in d["pseudonyms"].items()},
            closing_announced_seq=d.get("closing_announced_seq"),
            announced_end=d.get("announced_end"),
        )

    def state_digest(self) -> str:
        return digest(self.to_dict())


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"code": self.code, "detail": self.detail}


def validate_config(config: AuctionConfig) -> list[Violation]:
    """Check all static invariants of an auction definition.

    Returns an empty list iff the configuration is valid; violations are data,
    not exceptions, so callers can report all of them at once.
    """
    out: list[Violation] = []

    if config.start_time < 0:
        out.append(Violation("BadStartTime", f"start_time {config.start_time} < 0"))
    if config.main_duration_ms <= 0:
        out.append(Violation("NonPositiveMainDuration", str(config.main_duration_ms)))
    if config.hard_cap_ms <= 0:
        out.append(Violation("NonPositiveHardCap", str(config.hard_cap_ms)))
    if config.main_duration_ms > config.hard_cap_ms:
        out.append(
            Violation(
                "MainExceedsHardCap",
                f"main {config.main_duration_ms} > cap {config.hard_cap_ms}",
            )
        )
    if not config.extension_schedule_ms:
        out.append(Violation("EmptyExtensionSchedule"))
    else:
        for g in config.extension_schedule_ms:
            if g <= 0:
                out.append(Violation("NonPositiveExtension", str(g)))
                break
        for a, b in zip(config.extension_schedule_ms, config.extension_schedule_ms[1:]):
            if b > a:
                out.append(Violation("ExtensionScheduleIncreasing", f"{a} -> {b}"))
                break
    if config.closing_grace_ms <= 0:
        out.append(Violation("NonPositiveClosingGrace", str(config.closing_grace_ms)))
    if config.tick_size <= 0:
        out.append(Violation("NonPositiveTickSize", str(config.tick_size)))

    if config.format is not AuctionFormat.REVERSE:
        if config.historic_value is not None:
            out.append(Violation("HistoricValueOnlyReverse"))
        if config.target_value is not None:
            out.append(Violation("TargetValueOnlyReverse"))
    if config.historic_value is not None and config.target_value is not None:
        if config.target_value.amount >= config.historic_value.amount:
            out.append(
                Violation(
                    "TargetNotBelowHistoric",
                    f"target {config.target_value.amount} >= historic "
                    f"{config.historic_value.amount}",
                )
            )

    if not config.slots:
        out.append(Violation("NoSlots"))
    seen: set[str] = set()
    for slot in config.slots:
        if slot.slot_id in seen:
            out.append(Violation("DuplicateSlotId", slot.slot_id))
        seen.add(slot.slot_id)
        if slot.quantity <= 0:
            out.append(Violation("NonPositiveQuantity", f"{slot.slot_id}: {slot.quantity}"))
        if slot.start_price is not None:
            if slot.start_price.amount <= 0:
                out.append(Violation("NonPositiveStartPrice", slot.slot_id))
            if slot.start_price.currency != config.currency:
                out.append(Violation("CurrencyMismatch", f"slot {slot.slot_id}"))
    for label, value in (("historic_value", config.historic_value), ("target_value", config.target_value)):
        if value is not None and value.currency != config.currency:
            out.append(Violation("CurrencyMismatch", label))

    return out


class AccessError(Exception):
    """Raised when an access right grant violates the role rules."""

    def __init__(self, code: str, detail: str = ""):
        super().__init__(code if not detail else f"{code}: {detail}")
        self.code = code
        self.detail = detail


def grant_access(
    right: AccessRight,
    roster: dict[str, RosterEntry],
    persons: dict[str, Person],
) -> AccessRight:
    """Validate and return a new access right against an auction roster.

    One role per (person, auction). A bidder right additionally requires the
    person to be admitted and their company to hold no other admitted bidder.
    The caller records the returned right on the roster entry.
    """
    person = persons.get(right.person_id)
    if person is None:
        raise AccessError("UnknownPerson", right.person_id)
    entry = roster.get(right.person_id)
    if entry is not None and entry.right is not None:
        raise AccessError("RoleConflict", f"{right.person_id} already holds {entry.right.role.value}")
    if entry is not None and entry.role is not right.role:
        raise AccessError("RoleConflict", f"{right.person_id} rostered as {entry.role.value}")

    if right.role is Role.BIDDER:
        status = entry.status if entry is not None else None
        if status is None or not status.admitted:
            raise AccessError("NotAdmitted", right.person_id)
        for other in roster.values():
            if other.person_id == right.person_id:
                continue
            other_person = persons.get(other.person_id)
            if other_person is None:
                continue
            if (
                other.role is Role.BIDDER
                and other.status.admitted
                and other_person.company_id == person.company_id
            ):
                raise AccessError("SecondBidderSameCompany", person.company_id)
    return right


def check_state_invariants(state: AuctionState) -> list[str]:
    """Structural invariants every reachable state must satisfy; for tests
    and plausibility checking."""
    problems: list[str] = []
    if state.current_end > state.hard_cap_at:
        problems.append(f"current_end {state.current_end} beyond cap {state.hard_cap_at}")
    for i, msg in enumerate(state.messages, start=1):
        if msg.seq != i:
            problems.append(f"message seq gap: expected {i} got {msg.seq}")
            break
    last_t = None
    for msg in state.messages:
        if last_t is not None and msg.server_time < last_t:
            problems.append(f"message time regression at seq {msg.seq}")
            break
        last_t = msg.server_time
    for sid, bids in state.bids.items():
        last_seq = 0
        for b in bids:
            if b.seq <= last_seq:
                problems.append(f"bid seq not increasing on slot {sid}")
                break
            last_seq = b.seq
            if b.amount.amount <= 0:
                problems.append(f"non-positive bid amount at seq {b.seq}")
            if b.amount.currency != state.config.currency:
                problems.append(f"bid currency mismatch at seq {b.seq}")
    for entry in state.roster.values():
        st = entry.status
        if st.admitted and not (st.invited and st.contract_signed):
            problems.append(f"{entry.person_id} admitted without invite+signature")
        if st.banned and st.admitted:
            problems.append(f"{entry.person_id} both banned and admitted")
    bid_counts = sorted(state.pseudonyms.values())
    if bid_counts != list(range(1, len(bid_counts) + 1)):
        problems.append("pseudonym numbers not 1..n")
    auctioneers = [e for e in state.roster.values() if e.role is Role.AUCTIONEER]
    if len(auctioneers) != 1:
        problems.append(f"expected exactly one auctioneer, found {len(auctioneers)}")
    return problems
