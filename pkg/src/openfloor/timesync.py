"""Client clock offset estimation from request/response timestamp triples.

Each poll carries the client's send time t0; the server stamps ts; the client
notes receive time t2. Assuming the two legs are symmetric, the server clock
read ts corresponds to the local midpoint (t0+t2)/2, so

    offset = ts - (t0 + t2) // 2      (integer ms, rounded toward zero)

and the error is bounded by half the round-trip asymmetry: with one-way
delays d_out and d_back the estimate is off by exactly (d_back - d_out) / 2.
Samples taken on short round trips are therefore better, which is what the
estimator selects for.

All arithmetic is integer milliseconds.
"""
from __future__ import annotations

from dataclasses import dataclass


class TimesyncError(Exception):
    def __init__(self, code: str, detail: str = ""):
        super().__init__(code if not detail else f"{code}: {detail}")
        self.code = code
        self.detail = detail


def _idiv2(x: int) -> int:
    # round toward zero, unlike // which floors
    return x // 2 if x >= 0 else -((-x) // 2)


def sample_offset(t0: int, ts: int, t2: int) -> tuple[int, int]:
    """One raw (offset, rtt) sample from a timestamp triple.

    t0: client clock at send, ts: server clock at handling, t2: client clock
    at receive. Raises ``TimesyncError("NegativeRtt")`` if t2 < t0.
    """
    if t2 < t0:
        raise TimesyncError("NegativeRtt", f"t0={t0} t2={t2}")
    return ts - _idiv2(t0 + t2), t2 - t0


@dataclass
class OffsetEstimate:
    offset_ms: int
    rtt_ms: int
    sample_count: int

    def to_dict(self) -> dict:
        return {
            "offset_ms": self.offset_ms,
            "rtt_ms": self.rtt_ms,
            "sample_count": self.sample_count,
        }


class OffsetEstimator:
    """Two-phase estimator: an initial burst picks the minimum-RTT sample,
    later samples refine the estimate only when their round trip is nearly
    as good as the current one.

    Phase 1 (first ``burst_size`` samples): keep the sample with the smallest
    round trip, ties broken by smaller offset magnitude, so the result does
    not depend on arrival order.

    Phase 2: a sample with rtt <= current rtt + ``rtt_slack_ms`` updates
    offset := (3 * old + new) // 4 (toward zero) and adopts the new rtt;
    slower samples are discarded. ``sample_count`` counts every observed
    sample either way.
    """

    def __init__(self, burst_size: int = 8, rtt_slack_ms: int = 25):
        self.burst_size = burst_size
        self.rtt_slack_ms = rtt_slack_ms
        self._burst: list[tuple[int, int]] = []  # (rtt, offset)
        self._offset: int | None = None
        self._rtt: int | None = None
        self._count = 0

    def add_sample(self, t0: int, ts: int, t2: int) -> None:
        offset, rtt = sample_offset(t0, ts, t2)
        self._count += 1
        if self._offset is None:
            self._burst.append((rtt, offset))
            if len(self._burst) >= self.burst_size:
                best_rtt, best_offset = min(self._burst, key=lambda s: (s[0], abs(s[1])))
                self._offset = best_offset
                self._rtt = best_rtt
                self._burst.clear()
            return
        assert self._rtt is not None
        if rtt <= self._rtt + self.rtt_slack_ms:
            mixed = 3 * self._offset + offset
            self._offset = _idiv2(_idiv2(mixed))
            self._rtt = rtt

    @property
    def ready(self) -> bool:
        return self._offset is not None

    @property
    def sample_count(self) -> int:
        return self._count

    def current(self) -> OffsetEstimate:
        """Best estimate so far; before the burst completes, the minimum-RTT
        sample seen so far. Raises on zero samples."""
        if self._offset is not None:
            assert self._rtt is not None
            return OffsetEstimate(self._offset, self._rtt, self._count)
        if not self._burst:
            raise TimesyncError("EmptySamples")
        rtt, offset = min(self._burst, key=lambda s: (s[0], abs(s[1])))
        return OffsetEstimate(offset, rtt, self._count)


def estimate(samples: list[tuple[int, int, int]], burst_size: int = 8, rtt_slack_ms: int = 25) -> OffsetEstimate:
    """Fold a list of (t0, ts, t2) triples through an estimator."""
    if not samples:
        raise TimesyncError("EmptySamples")
    est = OffsetEstimator(burst_size=burst_size, rtt_slack_ms=rtt_slack_ms)
    for t0, ts, t2 in samples:
        est.add_sample(t0, ts, t2)
    return est.current()


def remaining_ms(end_server_time: int, local_now: int, est: OffsetEstimate) -> int:
    """Milliseconds until a server-side deadline as judged by a client clock."""
    return max(0, end_server_time - (local_now + est.offset_ms))
