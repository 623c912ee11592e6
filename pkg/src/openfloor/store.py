"""Append-only event log with checksums, snapshots, and replay.

Format: JSON Lines, one record per line. Each record carries a gapless
``global_seq``, the auction it belongs to, a kind tag, the payload, the
server receipt time, and a CRC-32 over the record's canonical bytes (crc
field excluded). A torn final line (crash mid-write) is detected and
dropped on reload; a bad line anywhere else is corruption and refuses to
load.

Three record kinds:

* ``create_auction``: the full creation payload (config + participants)
* ``command``: one effective engine command (rejected commands are not
  logged; neither are ticks that caused no transition)
* ``message``: one emitted message, for audit and plausibility checking;
  replay ignores these and regenerates them from the command fold

Replaying create/command records through the engine reproduces the exact
pre-crash states, digests included.
"""
from __future__ import annotations

import errno
import json
import os
from dataclasses import dataclass, field
from typing import Any, Iterator

from .codec import canonical_bytes, crc32_hex
from .domain import (
    AccessRight,
    AuctionConfig,
    AuctionState,
    Company,
    ParticipantStatus,
    Person,
    Role,
    RosterEntry,
    TERMINAL_PHASES,
    grant_access,
)
from .engine import AuctionMachine, PlaceBid, command_from_dict

LOG_NAME = "events.jsonl"
SNAPSHOT_EVERY = 10_000


class StoreError(Exception):
    def __init__(self, code: str, detail: str = ""):
        super().__init__(code if not detail else f"{code}: {detail}")
        self.code = code
        self.detail = detail


class CorruptLog(StoreError):
    def __init__(self, seq: int, detail: str = ""):
        super().__init__("CorruptLog", f"line {seq}: {detail}")
        self.seq = seq


def _wrap_io(exc: OSError) -> StoreError:
    if exc.errno == errno.ENOSPC:
        return StoreError("StorageFull", str(exc))
    return StoreError("IoFailure", str(exc))


def record_crc(record: dict[str, Any]) -> str:
    body = {k: v for k, v in record.items() if k != "crc32"}
    return crc32_hex(canonical_bytes(body))


def make_record(global_seq: int, auction_id: str, kind: str, body: dict[str, Any], server_time: int) -> dict[str, Any]:
    record = {
        "global_seq": global_seq,
        "auction_id": auction_id,
        "kind": kind,
        "body": body,
        "server_time": server_time,
    }
    record["crc32"] = record_crc(record)
    return record


def _parse_line(line: bytes) -> tuple[dict[str, Any] | None, str | None]:
    try:
        record = json.loads(line.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        return None, f"unparseable: {exc}"
    if not isinstance(record, dict) or "crc32" not in record:
        return None, "not a record"
    if record_crc(record) != record["crc32"]:
        return record, "checksum mismatch"
    return record, None


class EventStore:
    """Single-writer append log under one data directory."""

    def __init__(self, data_dir: str, fsync: bool = False):
        self.data_dir = data_dir
        self.fsync = fsync
        os.makedirs(data_dir, exist_ok=True)
        self.path = os.path.join(data_dir, LOG_NAME)
        self._next_seq = self._scan_next_seq()
        self._fh = None

    def _scan_next_seq(self) -> int:
        """Find the next global seq, chopping off a torn final line so the
        next append starts on a clean line boundary."""
        last = 0
        try:
            with open(self.path, "rb") as fh:
                data = fh.read()
        except FileNotFoundError:
            return 1
        except OSError as exc:
            raise _wrap_io(exc) from exc
        good_end = 0
        lines = data.split(b"\n")
        if lines and lines[-1] == b"":
            lines.pop()
        for i, line in enumerate(lines):
            record, problem = _parse_line(line)
            if problem is not None:
                if i == len(lines) - 1:
                    break  # torn tail
                raise CorruptLog(i + 1, problem)
            assert record is not None
            last = record["global_seq"]
            good_end += len(line) + 1
        if good_end < len(data):
            try:
                with open(self.path, "r+b") as fh:
                    fh.truncate(good_end)
            except OSError as exc:
                raise _wrap_io(exc) from exc
        elif good_end == len(data) + 1:
            # final line parsed but its newline never made it to disk
            try:
                with open(self.path, "ab") as fh:
                    fh.write(b"\n")
            except OSError as exc:
                raise _wrap_io(exc) from exc
        return last + 1

    @property
    def next_seq(self) -> int:
        return self._next_seq

    def append_batch(self, entries: list[tuple[str, str, dict[str, Any], int]]) -> list[int]:
        """Append (auction_id, kind, body, server_time) entries, one flush
        for the whole batch. Returns the assigned global seqs."""
        if not entries:
            return []
        seqs: list[int] = []
        lines: list[bytes] = []
        for auction_id, kind, body, server_time in entries:
            record = make_record(self._next_seq, auction_id, kind, body, server_time)
            lines.append(canonical_bytes(record) + b"\n")
            seqs.append(self._next_seq)
            self._next_seq += 1
        try:
            if self._fh is None:
                self._fh = open(self.path, "ab")
            self._fh.write(b"".join(lines))
            self._fh.flush()
            if self.fsync:
                os.fsync(self._fh.fileno())
        except OSError as exc:
            self._next_seq = seqs[0]
            raise _wrap_io(exc) from exc
        return seqs

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def iter_records(path: str, strict: bool = True) -> Iterator[dict[str, Any]]:
    """Yield records in order. A bad final line is a torn write and is
    dropped; a bad line elsewhere raises ``CorruptLog`` when strict."""
    try:
        with open(path, "rb") as fh:
            lines = fh.read().split(b"\n")
    except FileNotFoundError:
        return
    except OSError as exc:
        raise _wrap_io(exc) from exc
    while lines and lines[-1] == b"":
        lines.pop()
    for i, line in enumerate(lines):
        record, problem = _parse_line(line)
        if problem is not None:
            if i == len(lines) - 1:
                return  # torn tail from a crash mid-write
            if strict:
                raise CorruptLog(i + 1, problem)
            continue
        assert record is not None
        yield record


# -- building auctions from creation payloads ------------------------------


def build_auction(body: dict[str, Any]) -> tuple[AuctionState, dict[str, Person], dict[str, Company]]:
    """Construct the initial state, persons, and companies from a creation
    payload. The payload must already be validated; replay trusts it."""
    config = AuctionConfig.from_dict(body["config"])
    state = AuctionState.initial(config)
    persons: dict[str, Person] = {}
    companies: dict[str, Company] = {}
    for part in body.get("participants", []):
        person = Person(
            person_id=str(part["person_id"]),
            name=str(part.get("name", part["person_id"])),
            company_id=str(part.get("company_id", "")),
            credential_hash=str(part.get("credential_hash", "")),
        )
        persons[person.person_id] = person
        if person.company_id and person.company_id not in companies:
            companies[person.company_id] = Company(
                company_id=person.company_id,
                name=str(part.get("company_name", person.company_id)),
            )
        role = Role(part["role"])
        status = ParticipantStatus(
            person_id=person.person_id,
            auction_id=config.auction_id,
            invited=bool(part.get("invited", True)),
            contract_signed=bool(part.get("contract_signed", False)),
            password_delivered=bool(part.get("password_delivered", False)),
        )
        entry = RosterEntry(
            person_id=person.person_id,
            role=role,
            slot_id=part.get("slot_id"),
            status=status,
            valid_from=part.get("valid_from"),
            valid_until=part.get("valid_until"),
        )
        state.roster[person.person_id] = entry
        if role is not Role.BIDDER:
            # organizing roles act immediately; the admission workflow is
            # for bidders
            if bool(part.get("admitted", True)):
                status.invited = True
                status.contract_signed = True
                status.admitted = True
            entry.right = grant_access(
                AccessRight(
                    person_id=person.person_id,
                    auction_id=config.auction_id,
                    role=role,
                    slot_id=part.get("slot_id"),
                    valid_from=part.get("valid_from"),
                    valid_until=part.get("valid_until"),
                ),
                state.roster,
                persons,
            )
    # bidders flagged admitted in the payload skip the admission workflow
    for part in body.get("participants", []):
        if Role(part["role"]) is not Role.BIDDER or not part.get("admitted", False):
            continue
        entry = state.roster[str(part["person_id"])]
        entry.status.invited = True
        entry.status.contract_signed = True
        entry.status.admitted = True
        entry.right = grant_access(
            AccessRight(
                person_id=entry.person_id,
                auction_id=config.auction_id,
                role=Role.BIDDER,
                slot_id=entry.slot_id,
                valid_from=entry.valid_from,
                valid_until=entry.valid_until,
            ),
            state.roster,
            persons,
        )
    return state, persons, companies


# -- replay ----------------------------------------------------------------


@dataclass
class ReplayResult:
    machines: dict[str, AuctionMachine] = field(default_factory=dict)
    persons: dict[str, Person] = field(default_factory=dict)
    companies: dict[str, Company] = field(default_factory=dict)
    last_seq: int = 0


def replay(records: Iterator[dict[str, Any]], base: ReplayResult | None = None) -> ReplayResult:
    """Fold create/command records into engine machines; message records are
    audit copies and are skipped."""
    out = base if base is not None else ReplayResult()
    for record in records:
        out.last_seq = record["global_seq"]
        kind = record["kind"]
        if kind == "create_auction":
            state, persons, companies = build_auction(record["body"])
            out.persons.update(persons)
            out.companies.update(companies)
            out.machines[state.auction_id] = AuctionMachine(state, out.persons)
        elif kind == "command":
            machine = out.machines.get(record["auction_id"])
            if machine is None:
                raise CorruptLog(record["global_seq"], f"command for unknown auction {record['auction_id']}")
            machine.apply(command_from_dict(record["body"]))
    return out


# -- snapshots -------------------------------------------------------------


def snapshot_path(data_dir: str, seq: int) -> str:
    return os.path.join(data_dir, f"snapshot-{seq}.json")


def write_snapshot(data_dir: str, result: ReplayResult) -> str:
    payload = {
        "global_seq": result.last_seq,
        "auctions": {aid: m.state.to_dict() for aid, m in result.machines.items()},
        "persons": {pid: p.to_dict() for pid, p in result.persons.items()},
        "companies": {cid: c.to_dict() for cid, c in result.companies.items()},
    }
    path = snapshot_path(data_dir, result.last_seq)
    tmp = path + ".tmp"
    try:
        with open(tmp, "wb") as fh:
            fh.write(canonical_bytes(payload))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except OSError as exc:
        raise _wrap_io(exc) from exc
    return path


def load_latest_snapshot(data_dir: str) -> ReplayResult | None:
    best_seq = -1
    best_path = None
    try:
        names = os.listdir(data_dir)
    except FileNotFoundError:
        return None
    for name in names:
        if name.startswith("snapshot-") and name.endswith(".json"):
            try:
                seq = int(name[len("snapshot-"):-len(".json")])
            except ValueError:
                continue
            if seq > best_seq:
                best_seq = seq
                best_path = os.path.join(data_dir, name)
    if best_path is None:
        return None
    try:
        with open(best_path, "rb") as fh:
            payload = json.loads(fh.read().decode("utf-8"))
    except (OSError, ValueError):
        return None  # unreadable snapshot: fall back to full replay
    result = ReplayResult(last_seq=int(payload["global_seq"]))
    result.persons = {pid: Person.from_dict(d) for pid, d in payload["persons"].items()}
    result.companies = {cid: Company.from_dict(d) for cid, d in payload["companies"].items()}
    for aid, d in payload["auctions"].items():
        result.machines[aid] = AuctionMachine(AuctionState.from_dict(d), result.persons)
    return result


def recover(data_dir: str) -> ReplayResult:
    """Latest snapshot plus suffix replay; full replay when no usable
    snapshot exists."""
    path = os.path.join(data_dir, LOG_NAME)
    base = load_latest_snapshot(data_dir)
    if base is None:
        return replay(iter_records(path))
    suffix = (r for r in iter_records(path) if r["global_seq"] > base.last_seq)
    return replay(suffix, base=base)


def repair_message_tail(data_dir: str, store: EventStore) -> int:
    """Regenerate message records lost to a crash mid-batch.

    A command record and its message records are written together; a crash
    can cut the log between them, leaving the command without some of its
    audit copies. The command still refolds deterministically, so the lost
    records are rebuilt verbatim and appended. Returns how many were added.
    """
    path = os.path.join(data_dir, LOG_NAME)
    logged: dict[str, int] = {}
    last_time = 0

    def folding() -> Iterator[dict[str, Any]]:
        nonlocal last_time
        for record in iter_records(path):
            last_time = record["server_time"]
            if record["kind"] == "message":
                aid = record["auction_id"]
                logged[aid] = logged.get(aid, 0) + 1
            else:
                yield record

    world = replay(folding())
    batch: list[tuple[str, str, dict[str, Any], int]] = []
    for aid, machine in world.machines.items():
        for msg in machine.state.messages[logged.get(aid, 0):]:
            batch.append((aid, "message", msg.to_dict(), last_time))
    store.append_batch(batch)
    return len(batch)


# -- plausibility ----------------------------------------------------------


@dataclass(frozen=True)
class LogViolation:
    code: str
    global_seq: int
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"code": self.code, "global_seq": self.global_seq, "detail": self.detail}


_IMPROVEMENT_ERRORS = frozenset(
    ("InsufficientImprovement", "WrongDirection", "AboveStartPrice")
)


def plausibility_check(path: str) -> list[LogViolation]:
    """Structural and semantic audit of a log file. Violations are data;
    an empty list means the log replays cleanly and consistently."""
    out: list[LogViolation] = []
    expected_seq = 1
    last_seq = 0
    last_time: int | None = None
    result = ReplayResult()
    pending: dict[str, int] = {}  # auction_id -> messages already matched

    try:
        with open(path, "rb") as fh:
            lines = fh.read().split(b"\n")
    except FileNotFoundError:
        return out
    except OSError as exc:
        raise _wrap_io(exc) from exc
    while lines and lines[-1] == b"":
        lines.pop()

    for i, line in enumerate(lines):
        record, problem = _parse_line(line)
        if problem is not None:
            if i == len(lines) - 1:
                break  # torn tail, not a violation
            out.append(LogViolation("ChecksumMismatch", i + 1, problem))
            continue
        assert record is not None
        seq = record["global_seq"]
        if seq != expected_seq:
            out.append(LogViolation("GapInGlobalSeq", seq, f"expected {expected_seq}"))
            expected_seq = seq
        expected_seq += 1
        last_seq = seq
        t = record["server_time"]
        if last_time is not None and t < last_time:
            out.append(LogViolation("TimeRegression", seq, f"{t} < {last_time}"))
        last_time = t

        kind = record["kind"]
        aid = record["auction_id"]
        if kind == "create_auction":
            if aid in result.machines:
                out.append(LogViolation("DuplicateAuction", seq, aid))
                continue
            try:
                state, persons, companies = build_auction(record["body"])
            except Exception as exc:
                out.append(LogViolation("IllegalTransition", seq, f"bad creation payload: {exc}"))
                continue
            result.persons.update(persons)
            result.companies.update(companies)
            result.machines[aid] = AuctionMachine(state, result.persons)
            pending[aid] = 0
        elif kind == "command":
            machine = result.machines.get(aid)
            if machine is None:
                out.append(LogViolation("DanglingReference", seq, f"unknown auction {aid}"))
                continue
            try:
                cmd = command_from_dict(record["body"])
            except Exception as exc:
                out.append(LogViolation("IllegalTransition", seq, f"bad command: {exc}"))
                continue
            if isinstance(cmd, PlaceBid):
                if cmd.amount <= 0:
                    out.append(LogViolation("NonPositiveAmount", seq, str(cmd.amount)))
                if machine.state.config.slot(cmd.slot_id) is None:
                    out.append(LogViolation("DanglingReference", seq, f"slot {cmd.slot_id}"))
                    continue
                if cmd.person_id not in machine.state.roster:
                    out.append(LogViolation("DanglingReference", seq, f"person {cmd.person_id}"))
                    continue
            try:
                applied = machine.apply(cmd)
            except ValueError as exc:
                out.append(LogViolation("TimeRegression", seq, str(exc)))
                continue
            if applied.error is not None:
                code = (
                    "ImprovementViolation"
                    if applied.error in _IMPROVEMENT_ERRORS
                    else "IllegalTransition"
                )
                out.append(LogViolation(code, seq, applied.error))
        elif kind == "message":
            machine = result.machines.get(aid)
            if machine is None:
                out.append(LogViolation("DanglingReference", seq, f"unknown auction {aid}"))
                continue
            matched = pending.get(aid, 0)
            messages = machine.state.messages
            body = record["body"]
            if matched >= len(messages):
                if machine.state.phase in TERMINAL_PHASES:
                    out.append(LogViolation("MessageAfterClose", seq, f"msg seq {body.get('seq')}"))
                else:
                    out.append(LogViolation("MessageSeqGap", seq, f"no pending message for {body.get('seq')}"))
                continue
            expected = messages[matched].to_dict()
            if body != expected:
                if body.get("seq") != expected["seq"]:
                    out.append(LogViolation("MessageSeqGap", seq, f"expected msg seq {expected['seq']} got {body.get('seq')}"))
                else:
                    out.append(LogViolation("MessageMismatch", seq, f"msg seq {body.get('seq')}"))
            pending[aid] = matched + 1
    for aid, machine in result.machines.items():
        n_logged = pending.get(aid, 0)
        if n_logged < len(machine.state.messages):
            out.append(
                LogViolation(
                    "MessageSeqGap",
                    last_seq,
                    f"{aid}: {len(machine.state.messages) - n_logged} emitted messages missing from log",
                )
            )
    return out
