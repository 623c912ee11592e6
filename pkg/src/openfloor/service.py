"""Application service: authentication, pacing, and the command funnel.

Every mutation goes through one lock-serialized executor per service so the
engine sees a totally ordered command stream; reads run against the same
states under the lock (cheap: projections are pure and fast). Durability
rule: effective commands and their messages are appended and flushed before
the caller gets its response.

Tokens are deliberately not event-sourced: a restart logs everyone out,
which is the safe failure mode for an auction room.
"""
from __future__ import annotations

import hashlib
import os
import secrets
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable

from .domain import (
    Person,
    Phase,
    Role,
    TERMINAL_PHASES,
    validate_config,
)
from .engine import (
    Admit,
    Ban,
    Cancel,
    Command,
    PlaceBid,
    Prolong,
    Tick,
    command_to_dict,
)
from . import reports as reports_mod
from .store import (
    EventStore,
    ReplayResult,
    SNAPSHOT_EVERY,
    build_auction,
    recover,
    repair_message_tail,
    write_snapshot,
)
from .views import ViewError, redact_message, render_view

TOKEN_IDLE_EXPIRY_MS = 12 * 3600 * 1000
PBKDF2_ITERATIONS = 10_000
BASE_POLL_MS = 1000
NEAR_END_POLL_MS = 500
NEAR_END_THRESHOLD_MS = 120_000
MIN_POLL_MS = 250
MAX_POLL_MS = 5000
DEFAULT_CAPACITY_RPS = 500


class ServiceError(Exception):
    def __init__(self, code: str, http_status: int = 400, detail: str = ""):
        super().__init__(code if not detail else f"{code}: {detail}")
        self.code = code
        self.http_status = http_status
        self.detail = detail


# -- credentials -----------------------------------------------------------


def hash_password(password: str, salt: str | None = None, iterations: int = PBKDF2_ITERATIONS) -> str:
    if salt is None:
        salt = secrets.token_hex(8)
    dk = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt.encode("utf-8"), iterations)
    return f"pbkdf2${iterations}${salt}${dk.hex()}"


def verify_password(password: str, credential_hash: str) -> bool:
    try:
        scheme, iterations, salt, expected = credential_hash.split("$")
        if scheme != "pbkdf2":
            return False
        dk = hashlib.pbkdf2_hmac(
            "sha256", password.encode("utf-8"), salt.encode("utf-8"), int(iterations)
        )
        return secrets.compare_digest(dk.hex(), expected)
    except (ValueError, AttributeError):
        return False


# a syntactically valid hash of an unguessable value, so unknown-user logins
# burn the same work as wrong-password logins
_DUMMY_HASH = hash_password(secrets.token_hex(16))


# -- tokens ----------------------------------------------------------------


@dataclass
class TokenEntry:
    person_id: str
    last_used: int


class TokenTable:
    def __init__(self, idle_expiry_ms: int = TOKEN_IDLE_EXPIRY_MS):
        self.idle_expiry_ms = idle_expiry_ms
        self._tokens: dict[str, TokenEntry] = {}

    def issue(self, person_id: str, now: int) -> str:
        token = secrets.token_hex(16)
        self._tokens[token] = TokenEntry(person_id=person_id, last_used=now)
        return token

    def resolve(self, token: str, now: int) -> str | None:
        entry = self._tokens.get(token)
        if entry is None:
            return None
        if now - entry.last_used > self.idle_expiry_ms:
            del self._tokens[token]
            return None
        entry.last_used = now
        return entry.person_id


# -- traffic ---------------------------------------------------------------


class TrafficMonitor:
    """Requests-per-second over a sliding 10 s window, as a fraction of
    configured capacity."""

    def __init__(self, capacity_rps: float = DEFAULT_CAPACITY_RPS, window_ms: int = 10_000):
        self.capacity_rps = max(capacity_rps, 0.001)
        self.window_ms = window_ms
        self._hits: deque[int] = deque()

    def record(self, now: int) -> None:
        self._hits.append(now)
        self._trim(now)

    def _trim(self, now: int) -> None:
        cutoff = now - self.window_ms
        while self._hits and self._hits[0] <= cutoff:
            self._hits.popleft()

    def load_factor(self, now: int) -> float:
        self._trim(now)
        observed_rps = len(self._hits) * 1000 / self.window_ms
        return observed_rps / self.capacity_rps


def poll_interval(remaining_ms: int, load_factor: float) -> int:
    """Server-directed delay until the client's next poll."""
    base = NEAR_END_POLL_MS if remaining_ms < NEAR_END_THRESHOLD_MS else BASE_POLL_MS
    scaled = int(base * max(1.0, load_factor))
    return max(MIN_POLL_MS, min(MAX_POLL_MS, scaled))


# -- the service -----------------------------------------------------------


@dataclass
class BidReply:
    accepted: bool
    reason: str | None
    server_time: int
    rank: int | None = None
    new_end: int | None = None
    bid_id: str | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"accepted": self.accepted, "server_time": self.server_time}
        if self.accepted:
            out.update({"rank": self.rank, "new_end": self.new_end, "bid_id": self.bid_id})
        else:
            out["reason"] = self.reason
        return out


class AuctionService:
    """Facade over the engine, store, views, and token machinery.

    ``clock`` returns server-epoch ms; inject a virtual clock for tests and
    simulation. ``auto_report`` writes report files when an auction reaches
    a terminal phase.
    """

    def __init__(
        self,
        data_dir: str,
        clock: Callable[[], int] | None = None,
        capacity_rps: float = DEFAULT_CAPACITY_RPS,
        auto_report: bool = True,
        fsync: bool = False,
        snapshot_every: int = SNAPSHOT_EVERY,
        bootstrap: dict[str, Any] | None = None,
    ):
        self.data_dir = data_dir
        self.clock = clock if clock is not None else (lambda: int(time.time() * 1000))
        self.auto_report = auto_report
        self.snapshot_every = snapshot_every
        self._lock = threading.RLock()
        self._world: ReplayResult = recover(data_dir)
        self._apply_bootstrap(bootstrap)
        self._store = EventStore(data_dir, fsync=fsync)
        repair_message_tail(data_dir, self._store)
        self._tokens = TokenTable()
        self._traffic = TrafficMonitor(capacity_rps=capacity_rps)
        self._reported: set[str] = set()
        for aid, machine in self._world.machines.items():
            if machine.state.phase in TERMINAL_PHASES:
                self._reported.add(aid)  # reports for past auctions exist or are regenerable

    def _apply_bootstrap(self, bootstrap: dict[str, Any] | None) -> None:
        """Operator-provisioned accounts from the config file. These are not
        event-sourced; the config is re-read on every start."""
        if not bootstrap:
            return
        for entry in bootstrap.get("persons", []):
            pid = str(entry["person_id"])
            password = entry.get("password")
            credential = (
                hash_password(password)
                if password is not None
                else str(entry.get("credential_hash", ""))
            )
            existing = self._world.persons.get(pid)
            self._world.persons[pid] = Person(
                person_id=pid,
                name=str(entry.get("name", pid)),
                company_id=str(entry.get("company_id", existing.company_id if existing else "")),
                credential_hash=credential or (existing.credential_hash if existing else ""),
            )

    # -- helpers ----------------------------------------------------------

    @property
    def persons(self) -> dict[str, Person]:
        return self._world.persons

    def machine(self, auction_id: str):
        machine = self._world.machines.get(auction_id)
        if machine is None:
            raise ServiceError("UnknownAuction", 404, auction_id)
        return machine

    def _authenticate(self, token: str, now: int) -> str:
        person_id = self._tokens.resolve(token, now)
        if person_id is None:
            raise ServiceError("Unauthorized", 401)
        return person_id

    def _role_for(self, auction_id: str, person_id: str) -> Role:
        machine = self.machine(auction_id)
        entry = machine.state.roster.get(person_id)
        if entry is None:
            raise ServiceError("Unauthorized", 401)
        return entry.role

    def _execute(self, auction_id: str, cmd: Command) -> Any:
        """Apply one command; persist it and its messages when effective."""
        machine = self.machine(auction_id)
        result = machine.apply(cmd)
        batch: list[tuple[str, str, dict[str, Any], int]] = []
        now = cmd.at
        if result.tick_messages:
            batch.append((auction_id, "command", command_to_dict(Tick(at=now)), now))
            for msg in result.tick_messages:
                batch.append((auction_id, "message", msg.to_dict(), now))
        if result.command_messages:
            batch.append((auction_id, "command", command_to_dict(cmd), now))
            for msg in result.command_messages:
                batch.append((auction_id, "message", msg.to_dict(), now))
        if batch:
            self._store.append_batch(batch)
            self._maybe_snapshot()
        self._maybe_report(auction_id)
        return result

    def _maybe_snapshot(self) -> None:
        written = self._store.next_seq - 1
        if written > 0 and written % self.snapshot_every == 0:
            self._world.last_seq = written
            write_snapshot(self.data_dir, self._world)

    def _maybe_report(self, auction_id: str) -> None:
        machine = self._world.machines.get(auction_id)
        if machine is None or machine.state.phase not in TERMINAL_PHASES:
            return
        if not self.auto_report or auction_id in self._reported:
            return
        self._reported.add(auction_id)
        reports_mod.write_reports(machine.state, self.persons, self.data_dir)

    # -- public API -------------------------------------------------------

    def login(self, username: str, password: str) -> dict[str, Any]:
        with self._lock:
            now = self.clock()
            self._traffic.record(now)
            person = self._world.persons.get(username)
            credential = person.credential_hash if person else _DUMMY_HASH
            if not verify_password(password, credential) or person is None:
                raise ServiceError("BadCredentials", 401)
            token = self._tokens.issue(username, now)
            return {"auth_token": token, "person_id": username, "server_time": now}

    def list_auctions(self, token: str) -> dict[str, Any]:
        with self._lock:
            now = self.clock()
            self._traffic.record(now)
            person_id = self._authenticate(token, now)
            rows = []
            for aid in sorted(self._world.machines):
                machine = self._world.machines[aid]
                entry = machine.state.roster.get(person_id)
                if entry is None:
                    continue
                rows.append(
                    {
                        "auction_id": aid,
                        "title": machine.state.config.title,
                        "format": machine.state.config.format.value,
                        "phase": machine.state.phase.value,
                        "role": entry.role.value,
                        "start_time": machine.state.config.start_time,
                        "current_end": machine.state.current_end,
                    }
                )
            return {"server_time": now, "auctions": rows}

    def poll(self, token: str, auction_id: str, cursor: int, client_send_time: int | None = None) -> dict[str, Any]:
        with self._lock:
            now = self.clock()
            self._traffic.record(now)
            person_id = self._authenticate(token, now)
            machine = self.machine(auction_id)
            entry = machine.state.roster.get(person_id)
            if entry is None:
                raise ServiceError("Unauthorized", 401)
            self._execute(auction_id, Tick(at=now))
            state = machine.state
            latest = len(state.messages)
            if cursor > latest:
                raise ServiceError("CursorAhead", 409, f"cursor {cursor} > latest {latest}")
            if cursor < 0:
                raise ServiceError("CursorAhead", 409, f"cursor {cursor} < 0")
            role = entry.role
            try:
                view = render_view(state, person_id, role, now, self.persons)
            except ViewError as exc:
                raise ServiceError("Unauthorized", 401, exc.code) from exc
            messages = [
                redact_message(state, msg, person_id, role) for msg in state.messages[cursor:]
            ]
            remaining = max(0, state.current_end - now)
            if state.phase in TERMINAL_PHASES:
                remaining = 0
            return {
                "server_time": now,
                "messages": messages,
                "view": view,
                "next_poll_ms": poll_interval(remaining, self._traffic.load_factor(now)),
                "new_cursor": latest,
            }

    def bid(
        self,
        token: str,
        auction_id: str,
        slot_id: str,
        amount: int,
        cursor_at_submit: int = 0,
        client_send_time: int | None = None,
    ) -> BidReply:
        with self._lock:
            now = self.clock()
            self._traffic.record(now)
            person_id = self._authenticate(token, now)
            self.machine(auction_id)  # 404 before engine contact
            result = self._execute(
                auction_id,
                PlaceBid(
                    at=now,
                    person_id=person_id,
                    slot_id=slot_id,
                    amount=int(amount),
                    cursor_at_submit=int(cursor_at_submit),
                ),
            )
            if result.error is not None:
                return BidReply(accepted=False, reason=result.error, server_time=now)
            outcome = result.bid
            return BidReply(
                accepted=True,
                reason=None,
                server_time=now,
                rank=outcome.rank,
                new_end=outcome.new_end,
                bid_id=outcome.bid.bid_id,
            )

    def create_auction(self, token: str, payload: dict[str, Any]) -> dict[str, Any]:
        """Create from a full definition: config plus participant roster.

        The caller becomes the auction's originator unless the roster
        already names them. Participant passwords are hashed here; the log
        only ever sees credential hashes.
        """
        with self._lock:
            now = self.clock()
            self._traffic.record(now)
            person_id = self._authenticate(token, now)
            body = self._prepare_creation(person_id, payload)
            auction_id = body["config"]["auction_id"]
            state, persons, companies = build_auction(body)
            self._world.persons.update(persons)
            self._world.companies.update(companies)
            from .engine import AuctionMachine

            self._world.machines[auction_id] = AuctionMachine(state, self._world.persons)
            self._store.append_batch([(auction_id, "create_auction", body, now)])
            self._maybe_snapshot()
            return {
                "server_time": now,
                "auction_id": auction_id,
                "phase": state.phase.value,
            }

    def _prepare_creation(self, creator: str, payload: dict[str, Any]) -> dict[str, Any]:
        from .domain import AuctionConfig

        if "config" not in payload:
            raise ServiceError("InvalidConfig", 400, "missing config")
        config = AuctionConfig.from_dict(payload["config"])
        violations = validate_config(config)
        if violations:
            raise ServiceError(
                "InvalidConfig",
                400,
                "; ".join(f"{v.code}({v.detail})" if v.detail else v.code for v in violations),
            )
        if config.auction_id in self._world.machines:
            raise ServiceError("DuplicateAuction", 409, config.auction_id)

        participants = [dict(p) for p in payload.get("participants", [])]
        seen: set[str] = set()
        auctioneers = 0
        for part in participants:
            pid = str(part.get("person_id", ""))
            if not pid:
                raise ServiceError("InvalidConfig", 400, "participant without person_id")
            if pid in seen:
                raise ServiceError("RoleConflict", 400, f"{pid} listed twice")
            seen.add(pid)
            try:
                role = Role(part.get("role", ""))
            except ValueError:
                raise ServiceError("InvalidConfig", 400, f"bad role for {pid}")
            if role is Role.AUCTIONEER:
                auctioneers += 1
            slot_id = part.get("slot_id")
            if slot_id is not None and config.slot(slot_id) is None:
                raise ServiceError("InvalidConfig", 400, f"unknown slot {slot_id} for {pid}")
            password = part.pop("password", None)
            if password is not None:
                part["credential_hash"] = hash_password(password)
            elif "credential_hash" not in part:
                existing = self._world.persons.get(pid)
                if existing is not None:
                    part["credential_hash"] = existing.credential_hash
        if auctioneers != 1:
            raise ServiceError("InvalidConfig", 400, f"need exactly one auctioneer, got {auctioneers}")
        if creator not in seen:
            existing = self._world.persons.get(creator)
            participants.append(
                {
                    "person_id": creator,
                    "name": existing.name if existing else creator,
                    "company_id": existing.company_id if existing else "",
                    "credential_hash": existing.credential_hash if existing else "",
                    "role": Role.ORIGINATOR.value,
                    "admitted": True,
                }
            )
        return {"config": config.to_dict(), "participants": participants}

    def _admin(self, token: str, auction_id: str) -> tuple[str, int]:
        now = self.clock()
        self._traffic.record(now)
        person_id = self._authenticate(token, now)
        role = self._role_for(auction_id, person_id)
        if role is not Role.AUCTIONEER:
            raise ServiceError("Forbidden", 403)
        return person_id, now

    def admin_admit(self, token: str, auction_id: str, person_id: str) -> dict[str, Any]:
        with self._lock:
            _, now = self._admin(token, auction_id)
            result = self._execute(auction_id, Admit(at=now, person_id=person_id))
            return self._admin_reply(result, now)

    def admin_ban(self, token: str, auction_id: str, person_id: str) -> dict[str, Any]:
        with self._lock:
            _, now = self._admin(token, auction_id)
            result = self._execute(auction_id, Ban(at=now, person_id=person_id))
            return self._admin_reply(result, now)

    def admin_prolong(self, token: str, auction_id: str, delta_ms: int) -> dict[str, Any]:
        with self._lock:
            _, now = self._admin(token, auction_id)
            result = self._execute(auction_id, Prolong(at=now, delta_ms=int(delta_ms)))
            return self._admin_reply(result, now)

    def admin_cancel(self, token: str, auction_id: str) -> dict[str, Any]:
        with self._lock:
            _, now = self._admin(token, auction_id)
            result = self._execute(auction_id, Cancel(at=now))
            return self._admin_reply(result, now)

    @staticmethod
    def _admin_reply(result: Any, now: int) -> dict[str, Any]:
        out: dict[str, Any] = {"server_time": now, "ok": result.error is None}
        if result.error is not None:
            out["reason"] = result.error
        return out

    def admin_status(self, token: str, auction_id: str) -> dict[str, Any]:
        with self._lock:
            _, now = self._admin(token, auction_id)
            machine = self.machine(auction_id)
            self._execute(auction_id, Tick(at=now))
            state = machine.state
            rows = []
            for pid in sorted(state.roster):
                entry = state.roster[pid]
                person = self.persons.get(pid)
                rows.append(
                    {
                        "person_id": pid,
                        "name": person.name if person else pid,
                        "company_id": person.company_id if person else None,
                        "role": entry.role.value,
                        "slot_id": entry.slot_id,
                        "invited": entry.status.invited,
                        "contract_signed": entry.status.contract_signed,
                        "password_delivered": entry.status.password_delivered,
                        "admitted": entry.status.admitted,
                        "banned": entry.status.banned,
                        "pseudonym": (
                            f"Bidder-{state.pseudonyms[pid]}" if pid in state.pseudonyms else None
                        ),
                    }
                )
            return {
                "server_time": now,
                "auction_id": auction_id,
                "phase": state.phase.value,
                "current_end": state.current_end,
                "hard_cap_at": state.hard_cap_at,
                "extension_count": state.extension_count,
                "participants": rows,
            }

    def tick_all(self) -> None:
        """Advance every live auction to the current clock; used by the
        server's periodic scheduler."""
        with self._lock:
            now = self.clock()
            for aid in list(self._world.machines):
                machine = self._world.machines[aid]
                if machine.state.phase in TERMINAL_PHASES:
                    self._maybe_report(aid)
                    continue
                self._execute(aid, Tick(at=now))

    def close(self) -> None:
        with self._lock:
            self._store.close()
