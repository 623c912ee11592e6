"""Auction state machine: a pure fold of timestamped commands.

The machine owns one auction's state and advances it deterministically. All
timing decisions use the command's server receipt time, never a client time,
so replaying the identical command sequence reproduces the identical state
byte for byte.

Phase transitions are stamped with the time the threshold was crossed (the
scheduled start, the expired end, the grace deadline), not with the receipt
time of whichever command happened to trigger the check. That makes message
streams independent of how often the clock is sampled.

Closing protocol: when the running end expires with the hard cap not yet
reached, the machine first announces the closing and keeps accepting bids
for a short grace window; only bids submitted with knowledge of the
announcement (client cursor at or past it) are refused. A bid accepted
during the window re-extends the auction. The hard cap closes immediately,
with no announcement and no grace.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

from .domain import (
    AccessError,
    AccessRight,
    AuctionFormat,
    AuctionState,
    Bid,
    Message,
    MessageKind,
    Money,
    Person,
    Phase,
    Role,
    TERMINAL_PHASES,
    grant_access,
)


@dataclass(frozen=True)
class OpenAuction:
    at: int


@dataclass(frozen=True)
class PlaceBid:
    at: int
    person_id: str
    slot_id: str
    amount: int
    cursor_at_submit: int = 0


@dataclass(frozen=True)
class Tick:
    at: int


@dataclass(frozen=True)
class Admit:
    at: int
    person_id: str


@dataclass(frozen=True)
class Ban:
    at: int
    person_id: str


@dataclass(frozen=True)
class Prolong:
    at: int
    delta_ms: int


@dataclass(frozen=True)
class Cancel:
    at: int


Command = OpenAuction | PlaceBid | Tick | Admit | Ban | Prolong | Cancel

_COMMAND_KINDS: dict[str, type] = {
    "open_auction": OpenAuction,
    "place_bid": PlaceBid,
    "tick": Tick,
    "admit": Admit,
    "ban": Ban,
    "prolong": Prolong,
    "cancel": Cancel,
}
_KIND_BY_TYPE = {cls: kind for kind, cls in _COMMAND_KINDS.items()}


def command_to_dict(cmd: Command) -> dict[str, Any]:
    d = {"kind": _KIND_BY_TYPE[type(cmd)]}
    d.update(cmd.__dict__)
    return d


def command_from_dict(d: dict[str, Any]) -> Command:
    d = dict(d)
    cls = _COMMAND_KINDS[d.pop("kind")]
    return cls(**d)


@dataclass(frozen=True)
class BidOutcome:
    bid: Bid
    rank: int
    extended: bool
    new_end: int


@dataclass
class ApplyResult:
    """What one command did: a domain rejection (``error``), or acceptance
    with the messages it produced. ``tick_messages`` are transitions due to
    time passing before the command itself ran."""

    error: str | None = None
    bid: BidOutcome | None = None
    tick_messages: list[Message] = field(default_factory=list)
    command_messages: list[Message] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.error is None

    @property
    def messages(self) -> list[Message]:
        return self.tick_messages + self.command_messages


class AuctionMachine:
    """Single-auction command executor. Not thread-safe; the service layer
    serializes access."""

    def __init__(self, state: AuctionState, persons: dict[str, Person]):
        self.state = state
        self.persons = persons
        self._last_at = 0

    # -- message emission ------------------------------------------------

    def _emit(self, sink: list[Message], kind: MessageKind, payload: dict[str, Any], at: int) -> Message:
        msg = Message(seq=self.state.next_seq, kind=kind, payload=payload, server_time=at)
        self.state.messages.append(msg)
        sink.append(msg)
        return msg

    # -- time advancement ------------------------------------------------

    def _advance(self, now: int, sink: list[Message]) -> None:
        """Apply every phase transition whose threshold lies at or before
        ``now``, each stamped at its own threshold time."""
        st = self.state
        while True:
            if st.phase is Phase.SCHEDULED and now >= st.config.start_time:
                st.phase = Phase.OPEN
                self._emit(
                    sink,
                    MessageKind.STATE_CHANGED,
                    {"phase": Phase.OPEN.value, "current_end": st.current_end},
                    st.config.start_time,
                )
                continue
            if st.phase in (Phase.OPEN, Phase.EXTENSION):
                if st.current_end >= st.hard_cap_at and now >= st.hard_cap_at:
                    self._close(sink, st.hard_cap_at)
                    continue
                if st.current_end < st.hard_cap_at and now >= st.current_end:
                    st.phase = Phase.CLOSING
                    st.announced_end = st.current_end
                    msg = self._emit(
                        sink,
                        MessageKind.CLOSING_ANNOUNCED,
                        {
                            "announced_end": st.current_end,
                            "grace_ms": st.config.closing_grace_ms,
                        },
                        st.current_end,
                    )
                    st.closing_announced_seq = msg.seq
                    continue
            if st.phase is Phase.CLOSING:
                assert st.announced_end is not None
                deadline = min(st.announced_end + st.config.closing_grace_ms, st.hard_cap_at)
                if now >= deadline:
                    self._close(sink, deadline)
                    continue
            return

    def _close(self, sink: list[Message], at: int) -> None:
        st = self.state
        st.phase = Phase.CLOSED
        st.closing_announced_seq = None
        st.announced_end = None
        self._emit(sink, MessageKind.CLOSED, {"closed_at": at}, at)

    # -- command application ---------------------------------------------

    def apply(self, cmd: Command) -> ApplyResult:
        if cmd.at < self._last_at:
            raise ValueError(f"receipt time regression: {cmd.at} < {self._last_at}")
        self._last_at = cmd.at
        result = ApplyResult()
        if self.state.phase not in TERMINAL_PHASES:
            self._advance(cmd.at, result.tick_messages)

        handler: Callable[[Any, ApplyResult], None] = {
            OpenAuction: self._do_open,
            PlaceBid: self._do_bid,
            Tick: self._do_tick,
            Admit: self._do_admit,
            Ban: self._do_ban,
            Prolong: self._do_prolong,
            Cancel: self._do_cancel,
        }[type(cmd)]
        handler(cmd, result)
        return result

    def _do_tick(self, cmd: Tick, result: ApplyResult) -> None:
        pass  # the shared _advance above is the whole effect

    def _do_open(self, cmd: OpenAuction, result: ApplyResult) -> None:
        st = self.state
        if st.phase in TERMINAL_PHASES:
            result.error = "AlreadyClosed"
            return
        if st.phase is not Phase.SCHEDULED:
            return  # already open: idempotent
        st.phase = Phase.OPEN
        self._emit(
            result.command_messages,
            MessageKind.STATE_CHANGED,
            {"phase": Phase.OPEN.value, "current_end": st.current_end},
            cmd.at,
        )

    def _do_bid(self, cmd: PlaceBid, result: ApplyResult) -> None:
        st = self.state
        if st.phase in TERMINAL_PHASES:
            result.error = "AuctionClosed"
            return
        if st.phase is Phase.SCHEDULED:
            result.error = "IllegalPhase"
            return
        if (
            st.phase is Phase.CLOSING
            and st.closing_announced_seq is not None
            and cmd.cursor_at_submit >= st.closing_announced_seq
        ):
            # the bidder had already seen the closing announcement
            result.error = "ClosingCursorTooNew"
            return

        slot = st.config.slot(cmd.slot_id)
        if slot is None:
            result.error = "UnknownReference"
            return
        entry = st.roster.get(cmd.person_id)
        if entry is None or entry.role is not Role.BIDDER:
            result.error = "NotABidder"
            return
        if entry.status.banned:
            result.error = "Banned"
            return
        if not entry.status.admitted or entry.right is None:
            result.error = "NotAdmitted"
            return
        if not entry.right.covers_slot(cmd.slot_id) or not entry.right.valid_at(cmd.at):
            result.error = "NotABidder"
            return

        err = self._check_improvement(cmd, slot.start_price.amount if slot.start_price else None)
        if err is not None:
            result.error = err
            return

        if cmd.person_id not in st.pseudonyms:
            st.pseudonyms[cmd.person_id] = len(st.pseudonyms) + 1

        seq = st.next_seq
        bid = Bid(
            bid_id=f"b{seq}",
            auction_id=st.auction_id,
            slot_id=cmd.slot_id,
            bidder=cmd.person_id,
            amount=_money(st, cmd.amount),
            server_time=cmd.at,
            seq=seq,
        )
        st.bids.setdefault(cmd.slot_id, []).append(bid)
        self._emit(
            result.command_messages,
            MessageKind.BID_PLACED,
            {
                "bid_id": bid.bid_id,
                "slot_id": bid.slot_id,
                "bidder_id": bid.bidder,
                "amount": bid.amount.to_dict(),
            },
            cmd.at,
        )
        extended = self._maybe_extend(cmd.at, result.command_messages)
        rank = next(
            i for i, (who, _) in enumerate(rank_bidders(st, cmd.slot_id), start=1)
            if who == cmd.person_id
        )
        result.bid = BidOutcome(bid=bid, rank=rank, extended=extended, new_end=st.current_end)

    def _check_improvement(self, cmd: PlaceBid, start_price: int | None) -> str | None:
        st = self.state
        own_prev = None
        for b in st.bids.get(cmd.slot_id, []):
            if b.bidder == cmd.person_id and not b.voided:
                own_prev = b
        if own_prev is None:
            if cmd.amount <= 0:
                return "InsufficientImprovement"
            if (
                st.config.format is AuctionFormat.REVERSE
                and start_price is not None
                and cmd.amount > start_price
            ):
                return "AboveStartPrice"
            return None
        delta = (
            own_prev.amount.amount - cmd.amount
            if st.config.format is AuctionFormat.REVERSE
            else cmd.amount - own_prev.amount.amount
        )
        if delta <= 0:
            return "WrongDirection" if delta < 0 else "InsufficientImprovement"
        if delta % st.config.tick_size != 0:
            return "InsufficientImprovement"
        return None

    def _maybe_extend(self, now: int, sink: list[Message]) -> bool:
        """After an accepted bid: if less than the current reaction window
        remains, push the end out to restore it (never past the cap)."""
        st = self.state
        schedule = st.config.extension_schedule_ms
        window = schedule[min(st.extension_count, len(schedule) - 1)]
        if st.current_end - now >= window:
            return False
        st.current_end = min(now + window, st.hard_cap_at)
        st.extension_count += 1
        if st.phase is Phase.CLOSING:
            st.closing_announced_seq = None
            st.announced_end = None
        st.phase = Phase.EXTENSION
        self._emit(
            sink,
            MessageKind.EXTENSION_GRANTED,
            {
                "extension_count": st.extension_count,
                "window_ms": window,
                "new_end": st.current_end,
            },
            now,
        )
        return True

    def _do_admit(self, cmd: Admit, result: ApplyResult) -> None:
        st = self.state
        if st.phase in TERMINAL_PHASES:
            result.error = "AlreadyClosed"
            return
        entry = st.roster.get(cmd.person_id)
        if entry is None:
            result.error = "NotFound"
            return
        if entry.status.banned:
            result.error = "Banned"
            return
        if entry.status.admitted:
            return  # idempotent, no message
        if not entry.status.invited:
            result.error = "NotInvited"
            return
        if not entry.status.contract_signed:
            result.error = "NotSigned"
            return
        entry.status.admitted = True
        if entry.role is Role.BIDDER:
            try:
                entry.right = grant_access(
                    AccessRight(
                        person_id=cmd.person_id,
                        auction_id=st.auction_id,
                        role=Role.BIDDER,
                        slot_id=entry.slot_id,
                        valid_from=entry.valid_from,
                        valid_until=entry.valid_until,
                    ),
                    st.roster,
                    self.persons,
                )
            except AccessError as exc:
                entry.status.admitted = False
                result.error = exc.code
                return
        self._emit(
            result.command_messages,
            MessageKind.PARTICIPANT_ADMITTED,
            {"person_id": cmd.person_id},
            cmd.at,
        )

    def _do_ban(self, cmd: Ban, result: ApplyResult) -> None:
        st = self.state
        if st.phase in TERMINAL_PHASES:
            result.error = "AlreadyClosed"
            return
        entry = st.roster.get(cmd.person_id)
        if entry is None:
            result.error = "NotFound"
            return
        if entry.status.banned:
            return  # idempotent, no message
        entry.status.banned = True
        entry.status.admitted = False
        entry.right = None
        voided: list[int] = []
        for bids in st.bids.values():
            for b in bids:
                if b.bidder == cmd.person_id and not b.voided:
                    b.voided = True
                    voided.append(b.seq)
        self._emit(
            result.command_messages,
            MessageKind.PARTICIPANT_BANNED,
            {"person_id": cmd.person_id, "voided_seqs": voided},
            cmd.at,
        )

    def _do_prolong(self, cmd: Prolong, result: ApplyResult) -> None:
        st = self.state
        if st.phase in TERMINAL_PHASES:
            result.error = "AlreadyClosed"
            return
        if cmd.delta_ms <= 0:
            result.error = "InvalidDelta"
            return
        st.current_end += cmd.delta_ms
        st.hard_cap_at += cmd.delta_ms
        if st.phase is Phase.CLOSING:
            st.phase = Phase.EXTENSION
            st.closing_announced_seq = None
            st.announced_end = None
        self._emit(
            result.command_messages,
            MessageKind.AUCTION_PROLONGED,
            {
                "delta_ms": cmd.delta_ms,
                "new_end": st.current_end,
                "new_cap": st.hard_cap_at,
            },
            cmd.at,
        )

    def _do_cancel(self, cmd: Cancel, result: ApplyResult) -> None:
        st = self.state
        if st.phase in TERMINAL_PHASES:
            result.error = "AlreadyClosed"
            return
        st.phase = Phase.CANCELLED
        st.closing_announced_seq = None
        st.announced_end = None
        self._emit(
            result.command_messages,
            MessageKind.AUCTION_CANCELLED,
            {"cancelled_at": cmd.at},
            cmd.at,
        )


def _money(state: AuctionState, amount: int) -> Money:
    return Money(amount=amount, currency=state.config.currency)


# -- terminal results ------------------------------------------------------


class ResultError(Exception):
    def __init__(self, code: str):
        super().__init__(code)
        self.code = code


def rank_bidders(state: AuctionState, slot_id: str) -> list[tuple[str, Bid]]:
    """Current standing on one slot: each bidder's best live bid, best first.

    Ties on amount go to the earlier bid. Voided bids never count.
    """
    best: dict[str, Bid] = {}
    for b in state.slot_bids(slot_id):
        prev = best.get(b.bidder)
        if prev is None or _better(state, b, prev):
            best[b.bidder] = b
    reverse = state.config.format is AuctionFormat.REVERSE
    ordered = sorted(
        best.values(),
        key=lambda b: (b.amount.amount if reverse else -b.amount.amount, b.seq),
    )
    return [(b.bidder, b) for b in ordered]


def _better(state: AuctionState, new: Bid, old: Bid) -> bool:
    if state.config.format is AuctionFormat.REVERSE:
        return new.amount.amount < old.amount.amount
    return new.amount.amount > old.amount.amount


def determine_winners(state: AuctionState) -> dict[str, Bid | None]:
    """Winning bid per slot once the auction has ended.

    Cancelled auctions award nothing. Raises ``ResultError("NotClosed")``
    while the auction still runs.
    """
    if state.phase is Phase.CANCELLED:
        return {s.slot_id: None for s in state.config.slots}
    if state.phase is not Phase.CLOSED:
        raise ResultError("NotClosed")
    out: dict[str, Bid | None] = {}
    for slot in state.config.slots:
        ranking = rank_bidders(state, slot.slot_id)
        out[slot.slot_id] = ranking[0][1] if ranking else None
    return out


class BindingResult(str, Enum):
    BINDING = "binding"
    FREE_CHOICE = "free_choice"


def binding_result(state: AuctionState, winners: dict[str, Bid | None] | None = None) -> BindingResult:
    """Whether the outcome obliges the originator to award the contracts.

    Binding requires a closed price-lowering auction with a published target,
    at least one winning bid, and a winning total at or below the target;
    anything else leaves the originator free to choose.
    """
    if state.phase is not Phase.CLOSED:
        raise ResultError("NotClosed")
    if state.config.format is not AuctionFormat.REVERSE:
        return BindingResult.FREE_CHOICE
    target = state.config.target_value
    if target is None:
        return BindingResult.FREE_CHOICE
    if winners is None:
        winners = determine_winners(state)
    amounts = [b.amount.amount for b in winners.values() if b is not None]
    if not amounts:
        return BindingResult.FREE_CHOICE
    if sum(amounts) <= target.amount:
        return BindingResult.BINDING
    return BindingResult.FREE_CHOICE
