"""Independent oracles for derived expected values.

Each oracle re-derives behaviour from the rules alone, sharing no code with
the package, so agreement between package and oracle means two independent
readings of the same rule converge.
"""
from __future__ import annotations


def extension_oracle(
    start: int,
    main_ms: int,
    cap_ms: int,
    schedule: list[int],
    grace_ms: int,
    bid_times: list[int],
) -> tuple[list[int], int, int]:
    """Fold the soft-close rule over a sorted list of bid arrival times.

    Models an auction where every bid is otherwise valid: a bid is accepted
    unless the auction has already closed at its arrival time. Returns
    (accepted bid times, final end, extension count).
    """
    end = start + main_ms
    cap = start + cap_ms
    k = 0
    accepted: list[int] = []
    closed = False
    for t in sorted(bid_times):
        if not closed:
            if end >= cap:
                if t >= cap:
                    closed = True
            else:
                if t >= min(end + grace_ms, cap):
                    closed = True
        if closed:
            continue
        accepted.append(t)
        g = schedule[min(k, len(schedule) - 1)]
        if end - t < g:
            end = min(t + g, cap)
            k += 1
    return accepted, end, k


def winners_oracle(
    fmt: str, slot_bids: dict[str, list[tuple[int, int, str, bool]]]
) -> dict[str, int | None]:
    """Exhaustive scan winner per slot.

    slot_bids: slot -> list of (seq, amount, bidder, voided). Returns the
    winning seq per slot or None. Reverse wants the minimum amount, English
    the maximum; ties go to the smaller seq.
    """
    out: dict[str, int | None] = {}
    for slot, bids in slot_bids.items():
        best_seq: int | None = None
        best_amount: int | None = None
        for seq, amount, _bidder, voided in bids:
            if voided:
                continue
            if best_amount is None:
                best_seq, best_amount = seq, amount
                continue
            better = amount < best_amount if fmt == "reverse" else amount > best_amount
            if better or (amount == best_amount and seq < best_seq):
                best_seq, best_amount = seq, amount
        out[slot] = best_seq
    return out


def binding_oracle(
    fmt: str,
    phase: str,
    target: int | None,
    winning_amounts: list[int],
) -> str | None:
    """The award-obligation rule; None when it does not apply (not closed)."""
    if phase != "closed":
        return None
    if fmt != "reverse" or target is None or not winning_amounts:
        return "free_choice"
    return "binding" if sum(winning_amounts) <= target else "free_choice"


def percent_oracle(amount: int, reference: int) -> str:
    """Round-half-up to two decimals of 100*amount/reference, in integer
    arithmetic (no Decimal)."""
    assert reference > 0
    num = amount * 10_000  # hundredths of a percent
    q, r = divmod(num, reference)
    if 2 * r >= reference:
        q += 1
    return f"{q // 100}.{q % 100:02d}"


def poll_interval_oracle(remaining_ms: int, load_factor: float) -> int:
    base = 500 if remaining_ms < 120_000 else 1000
    scaled = int(base * max(1.0, load_factor))
    return max(250, min(5000, scaled))


def offset_oracle(t0: int, ts: int, t2: int) -> tuple[int, int]:
    mid = (t0 + t2) // 2 if t0 + t2 >= 0 else -((-(t0 + t2)) // 2)
    return ts - mid, t2 - t0
