"""Shared builders for tests: configured machines, random auction states,
random bid scripts, and simulation scenarios."""
from __future__ import annotations

import random
from typing import Any

from openfloor.domain import (
    AccessRight,
    AuctionConfig,
    AuctionFormat,
    AuctionState,
    Money,
    ParticipantStatus,
    Person,
    Role,
    RosterEntry,
    Slot,
)
from openfloor.engine import Admit, AuctionMachine, Ban, PlaceBid, Prolong, Tick

EUR = "EUR"


def money(amount: int) -> Money:
    return Money(amount=amount, currency=EUR)


def make_config(**over: Any) -> AuctionConfig:
    base: dict[str, Any] = dict(
        auction_id="a1",
        title="Test auction",
        format=AuctionFormat.REVERSE,
        currency=EUR,
        start_time=1_000,
        main_duration_ms=600_000,
        hard_cap_ms=1_200_000,
        extension_schedule_ms=[180_000, 120_000, 60_000, 30_000, 15_000, 10_000, 5_000],
        closing_grace_ms=3_000,
        tick_size=100,
        slots=[Slot(slot_id="s1", description="lot 1", quantity=1, unit="unit")],
    )
    base.update(over)
    return AuctionConfig(**base)


def person(pid: str, company: str) -> Person:
    return Person(person_id=pid, name=pid.title(), company_id=company)


def bidder_entry(state: AuctionState, pid: str, slot_id: str | None = None) -> RosterEntry:
    entry = RosterEntry(
        person_id=pid,
        role=Role.BIDDER,
        slot_id=slot_id,
        status=ParticipantStatus(
            person_id=pid,
            auction_id=state.auction_id,
            invited=True,
            contract_signed=True,
            admitted=True,
        ),
        right=AccessRight(
            person_id=pid, auction_id=state.auction_id, role=Role.BIDDER, slot_id=slot_id
        ),
    )
    state.roster[pid] = entry
    return entry


def plain_entry(state: AuctionState, pid: str, role: Role) -> RosterEntry:
    entry = RosterEntry(
        person_id=pid,
        role=role,
        slot_id=None,
        status=ParticipantStatus(
            person_id=pid,
            auction_id=state.auction_id,
            invited=True,
            contract_signed=True,
            admitted=True,
        ),
        right=AccessRight(person_id=pid, auction_id=state.auction_id, role=role),
    )
    state.roster[pid] = entry
    return entry


def make_machine(config: AuctionConfig | None = None, bidders: int = 2) -> AuctionMachine:
    """A machine with one auctioneer, one originator, one observer, and the
    requested number of admitted bidders (each in its own company)."""
    config = config or make_config()
    state = AuctionState.initial(config)
    persons: dict[str, Person] = {}
    for pid, role in (("ann", Role.AUCTIONEER), ("org", Role.ORIGINATOR), ("obs", Role.OBSERVER)):
        persons[pid] = person(pid, f"co-{pid}")
        plain_entry(state, pid, role)
    for i in range(1, bidders + 1):
        pid = f"b{i}"
        persons[pid] = person(pid, f"co-{i}")
        bidder_entry(state, pid)
    return AuctionMachine(state, persons)


def open_machine(machine: AuctionMachine) -> AuctionMachine:
    machine.apply(Tick(at=machine.state.config.start_time))
    return machine


# -- random generators -----------------------------------------------------


def random_bid_script(rng: random.Random) -> tuple[AuctionConfig, list[tuple[int, str, int]]]:
    """A config plus a list of (time, bidder, amount) bids which are valid
    by construction except for lateness: per bidder, times ascend and
    amounts strictly improve by tick multiples."""
    start = rng.randrange(0, 10_000_000)
    main = rng.randrange(60_000, 900_000)
    cap = main + rng.randrange(0, 2 * main)
    schedule_len = rng.randrange(1, 6)
    schedule = sorted(
        (rng.randrange(1_000, 200_000) for _ in range(schedule_len)), reverse=True
    )
    grace = rng.choice([1_000, 3_000, 5_000])
    tick = rng.choice([1, 50, 100, 1_000])
    start_price = rng.choice([None, rng.randrange(500_000, 2_000_000)])
    config = make_config(
        start_time=start,
        main_duration_ms=main,
        hard_cap_ms=cap,
        extension_schedule_ms=schedule,
        closing_grace_ms=grace,
        tick_size=tick,
        slots=[
            Slot(
                slot_id="s1",
                description="lot",
                quantity=1,
                unit="unit",
                start_price=money(start_price) if start_price else None,
            )
        ],
    )
    n_bidders = rng.randrange(1, 5)
    n_bids = rng.randrange(1, 20)
    horizon = start + cap + 2 * grace + 60_000
    times = rng.sample(range(start, horizon), n_bids)
    owners = [rng.randrange(n_bidders) for _ in times]
    per_bidder: dict[int, list[int]] = {}
    for t, owner in zip(times, owners):
        per_bidder.setdefault(owner, []).append(t)
    bids: list[tuple[int, str, int]] = []
    for owner, ts in per_bidder.items():
        ts.sort()
        ceiling = start_price if start_price else 3_000_000
        amount = ceiling - rng.randrange(0, 3) * tick
        for t in ts:
            bids.append((t, f"b{owner + 1}", amount))
            amount -= rng.randrange(1, 4) * tick
    bids.sort(key=lambda b: b[0])
    return config, bids


def run_script(config: AuctionConfig, bids: list[tuple[int, str, int]]) -> tuple[AuctionMachine, list[tuple[int, bool, str | None]]]:
    """Apply a bid script with no intermediate ticks, then one final tick
    far past the cap. Returns the machine and per-bid (time, accepted,
    reason)."""
    n_bidders = len({b for _, b, _ in bids}) or 1
    machine = make_machine(config, bidders=max(4, n_bidders))
    outcomes: list[tuple[int, bool, str | None]] = []
    for t, bidder, amount in bids:
        result = machine.apply(
            PlaceBid(at=t, person_id=bidder, slot_id="s1", amount=amount, cursor_at_submit=0)
        )
        outcomes.append((t, result.error is None, result.error))
    horizon = config.start_time + config.hard_cap_ms + 10 * config.closing_grace_ms + 100_000
    machine.apply(Tick(at=max(horizon, (bids[-1][0] if bids else 0) + 1)))
    return machine, outcomes


def random_machine(rng: random.Random) -> AuctionMachine:
    """A random mid-flight or finished auction with messages, bids, voids,
    and admin events; used by redaction and winner property tests."""
    fmt = rng.choice([AuctionFormat.REVERSE, AuctionFormat.ENGLISH])
    n_slots = rng.randrange(1, 5)
    tick = rng.choice([1, 100])
    slots = []
    for i in range(n_slots):
        price = None
        if fmt is AuctionFormat.REVERSE and rng.random() < 0.6:
            price = money(rng.randrange(100_000, 900_000))
        slots.append(
            Slot(slot_id=f"s{i + 1}", description=f"lot {i + 1}", quantity=rng.randrange(1, 9), unit="unit", start_price=price)
        )
    historic = None
    target = None
    if fmt is AuctionFormat.REVERSE:
        if rng.random() < 0.5:
            historic = money(rng.randrange(1_000_000, 4_000_000))
        if rng.random() < 0.5:
            upper = historic.amount if historic else 2_000_000
            target = money(rng.randrange(10_000, upper))
    config = make_config(
        format=fmt,
        start_time=0,
        main_duration_ms=200_000,
        hard_cap_ms=400_000,
        extension_schedule_ms=[20_000, 10_000, 5_000],
        tick_size=tick,
        historic_value=historic,
        target_value=target,
        slots=slots,
    )
    n_bidders = rng.randrange(1, 6)
    machine = make_machine(config, bidders=n_bidders)
    machine.apply(Tick(at=0))
    t = 1
    n_cmds = rng.randrange(0, 25)
    for _ in range(n_cmds):
        t += rng.randrange(1, 15_000)
        roll = rng.random()
        if roll < 0.8:
            bidder = f"b{rng.randrange(1, n_bidders + 1)}"
            slot = slots[rng.randrange(n_slots)]
            prev = [
                b.amount.amount
                for b in machine.state.bids.get(slot.slot_id, [])
                if b.bidder == bidder and not b.voided
            ]
            if prev:
                step = rng.randrange(1, 5) * tick
                amount = prev[-1] - step if fmt is AuctionFormat.REVERSE else prev[-1] + step
            else:
                base = slot.start_price.amount if slot.start_price else 500_000
                amount = base - rng.randrange(0, 50) * tick
            machine.apply(
                PlaceBid(at=t, person_id=bidder, slot_id=slot.slot_id, amount=amount, cursor_at_submit=0)
            )
        elif roll < 0.9:
            machine.apply(Ban(at=t, person_id=f"b{rng.randrange(1, n_bidders + 1)}"))
        elif roll < 0.95:
            machine.apply(Prolong(at=t, delta_ms=rng.randrange(1_000, 60_000)))
        else:
            machine.apply(Tick(at=t))
    if rng.random() < 0.5:
        machine.apply(Tick(at=t + 500_000 + config.hard_cap_ms))
    return machine
