"""Deterministic discrete-event simulation of clients against the service.

Virtual time only: the loop pops timed events off a heap, so a minutes-long
auction with dozens of clients runs in well under a second and two runs
with the same seed produce byte-identical traces.

Each agent talks to the service exactly like a remote client would: every
request is delayed by its link (one-way delay = base + U(0, jitter), drawn
independently per direction), responses arrive after the return leg, and
the agent only ever acts on what it has observed. Agents carry a known
clock offset, so the harness can judge the offset estimator against truth.

Scripted bid times are given in server virtual time (the scenario author's
frame); the agent's believed phase and believed remaining time at the
moment of sending are recorded with each bid, which is what the fairness
checks consume.
"""
from __future__ import annotations

import heapq
import random
import tempfile
from dataclasses import dataclass, field
from typing import Any, Callable

from .codec import canonical_bytes
from .domain import AuctionFormat, TERMINAL_PHASES
from .service import AuctionService, ServiceError
from .timesync import OffsetEstimator, TimesyncError, remaining_ms


class ScenarioInvalid(Exception):
    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


@dataclass(frozen=True)
class LinkModel:
    base_ms: int = 0
    jitter_ms: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {"base_ms": self.base_ms, "jitter_ms": self.jitter_ms}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "LinkModel":
        return cls(base_ms=int(d.get("base_ms", 0)), jitter_ms=int(d.get("jitter_ms", 0)))


@dataclass
class AgentSpec:
    person_id: str
    password: str
    link: LinkModel = field(default_factory=LinkModel)
    clock_offset_ms: int = 0
    connect_at: int = 0
    disconnect_at: int | None = None
    strategy: dict[str, Any] = field(default_factory=lambda: {"kind": "watch"})

    def to_dict(self) -> dict[str, Any]:
        return {
            "person_id": self.person_id,
            "password": self.password,
            "link": self.link.to_dict(),
            "clock_offset_ms": self.clock_offset_ms,
            "connect_at": self.connect_at,
            "disconnect_at": self.disconnect_at,
            "strategy": self.strategy,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AgentSpec":
        return cls(
            person_id=str(d["person_id"]),
            password=str(d.get("password", "pw")),
            link=LinkModel.from_dict(d.get("link", {})),
            clock_offset_ms=int(d.get("clock_offset_ms", 0)),
            connect_at=int(d.get("connect_at", 0)),
            disconnect_at=d.get("disconnect_at"),
            strategy=dict(d.get("strategy", {"kind": "watch"})),
        )


@dataclass
class Scenario:
    seed: int
    creation: dict[str, Any]
    creator: str
    creator_password: str
    agents: list[AgentSpec]
    server_tick_ms: int = 250
    max_time_ms: int = 24 * 3600 * 1000
    burst_polls: int = 8
    burst_spacing_ms: int = 50
    admin_script: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "creation": self.creation,
            "creator": self.creator,
            "creator_password": self.creator_password,
            "agents": [a.to_dict() for a in self.agents],
            "server_tick_ms": self.server_tick_ms,
            "max_time_ms": self.max_time_ms,
            "burst_polls": self.burst_polls,
            "burst_spacing_ms": self.burst_spacing_ms,
            "admin_script": self.admin_script,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Scenario":
        try:
            return cls(
                seed=int(d["seed"]),
                creation=dict(d["creation"]),
                creator=str(d["creator"]),
                creator_password=str(d.get("creator_password", "pw")),
                agents=[AgentSpec.from_dict(a) for a in d.get("agents", [])],
                server_tick_ms=int(d.get("server_tick_ms", 250)),
                max_time_ms=int(d.get("max_time_ms", 24 * 3600 * 1000)),
                burst_polls=int(d.get("burst_polls", 8)),
                burst_spacing_ms=int(d.get("burst_spacing_ms", 50)),
                admin_script=list(d.get("admin_script", [])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioInvalid(str(exc)) from exc


@dataclass
class Trace:
    records: list[dict[str, Any]] = field(default_factory=list)

    def add(self, **fields: Any) -> None:
        self.records.append(fields)

    def to_jsonl(self) -> bytes:
        return b"".join(canonical_bytes(r) + b"\n" for r in self.records)

    def of_kind(self, kind: str) -> list[dict[str, Any]]:
        return [r for r in self.records if r["event"] == kind]


class _Agent:
    def __init__(self, spec: AgentSpec, sim: "Simulation"):
        self.spec = spec
        self.sim = sim
        self.token: str | None = None
        self.cursor = 0
        self.estimator = OffsetEstimator()
        self.last_view: dict[str, Any] | None = None
        self.seen_terminal = False
        self.observed: dict[int, int] = {}  # msg seq -> observation time (server frame)
        self.bids_made = 0
        self.pending_reaction: int | None = None
        self.polls_sent = 0
        self.disconnected = False

    # -- clocks ----------------------------------------------------------

    def local(self, server_t: int) -> int:
        return server_t + self.spec.clock_offset_ms

    def believed_remaining(self, server_t: int) -> int | None:
        if self.last_view is None:
            return None
        try:
            est = self.estimator.current()
        except TimesyncError:
            return None
        return remaining_ms(self.last_view["current_end"], self.local(server_t), est)

    def believed_phase(self) -> str | None:
        return self.last_view["phase"] if self.last_view is not None else None


class Simulation:
    def __init__(self, scenario: Scenario, data_dir: str):
        self.scenario = scenario
        self.rng = random.Random(scenario.seed)
        self.now = 0
        self.trace = Trace()
        self._queue: list[tuple[int, int, Callable[[], None]]] = []
        self._tie = 0
        self.service = AuctionService(
            data_dir,
            clock=lambda: self.now,
            auto_report=False,
            bootstrap=self._bootstrap_persons(),
        )
        self.auction_id: str = scenario.creation["config"]["auction_id"]
        self.agents = [_Agent(spec, self) for spec in scenario.agents]

    def _bootstrap_persons(self) -> dict[str, Any]:
        persons = [
            {
                "person_id": self.scenario.creator,
                "name": self.scenario.creator,
                "company_id": "org",
                "password": self.scenario.creator_password,
            }
        ]
        return {"persons": persons}

    # -- event loop ------------------------------------------------------

    def at(self, t: int, fn: Callable[[], None]) -> None:
        if t < self.now:
            t = self.now
        self._tie += 1
        heapq.heappush(self._queue, (t, self._tie, fn))

    def delay(self, link: LinkModel) -> int:
        if link.jitter_ms <= 0:
            return link.base_ms
        return link.base_ms + self.rng.randint(0, link.jitter_ms)

    def run(self) -> Trace:
        creator_token = self.service.login(self.scenario.creator, self.scenario.creator_password)["auth_token"]
        self.service.create_auction(creator_token, self.scenario.creation)
        self._schedule_server_tick()
        if self.scenario.admin_script:
            admin_token = creator_token
            for part in self.scenario.creation.get("participants", []):
                if part.get("role") == "auctioneer" and part.get("password"):
                    admin_token = self.service.login(
                        part["person_id"], part["password"]
                    )["auth_token"]
                    break
            for item in self.scenario.admin_script:
                self.at(int(item["at"]), lambda item=item: self._run_admin(admin_token, item))
        for agent in self.agents:
            self.at(agent.spec.connect_at, lambda a=agent: self._login(a))
            if agent.spec.strategy.get("kind") == "scripted":
                for bid in agent.spec.strategy.get("bids", []):
                    self.at(int(bid["at"]), lambda a=agent, b=bid: self._send_bid(a, b["slot_id"], int(b["amount"])))
        while self._queue:
            t, _, fn = heapq.heappop(self._queue)
            if t > self.scenario.max_time_ms:
                break
            self.now = t
            fn()
        self._finalize()
        return self.trace

    def _schedule_server_tick(self) -> None:
        def tick() -> None:
            self.service.tick_all()
            machine = self.service.machine(self.auction_id)
            if machine.state.phase not in TERMINAL_PHASES:
                self.at(self.now + self.scenario.server_tick_ms, tick)
            else:
                self.trace.add(
                    event="server_terminal",
                    t=self.now,
                    phase=machine.state.phase.value,
                )

        self.at(0, tick)

    def _run_admin(self, token: str, item: dict[str, Any]) -> None:
        op = item["op"]
        try:
            if op == "ban":
                self.service.admin_ban(token, self.auction_id, item["person_id"])
            elif op == "admit":
                self.service.admin_admit(token, self.auction_id, item["person_id"])
            elif op == "prolong":
                self.service.admin_prolong(token, self.auction_id, int(item["delta_ms"]))
            elif op == "cancel":
                self.service.admin_cancel(token, self.auction_id)
            else:
                raise ScenarioInvalid(f"unknown admin op {op}")
            self.trace.add(event="admin", t=self.now, op=op, detail=item.get("person_id"))
        except ServiceError as exc:
            self.trace.add(event="admin_error", t=self.now, op=op, code=exc.code)

    # -- agent behaviour -------------------------------------------------

    def _login(self, agent: _Agent) -> None:
        out_d = self.delay(agent.spec.link)
        back_d = self.delay(agent.spec.link)

        def server_side() -> None:
            try:
                reply = self.service.login(agent.spec.person_id, agent.spec.password)
            except ServiceError as exc:
                self.trace.add(event="login_failed", t=self.now, client=agent.spec.person_id, code=exc.code)
                return
            self.at(self.now + back_d, lambda: client_side(reply))

        def client_side(reply: dict[str, Any]) -> None:
            agent.token = reply["auth_token"]
            self.trace.add(event="login", t=self.now, client=agent.spec.person_id)
            for i in range(self.scenario.burst_polls):
                self.at(self.now + i * self.scenario.burst_spacing_ms, lambda: self._poll(agent))

        self.at(self.now + out_d, server_side)

    def _should_stop_polling(self, agent: _Agent, send_t: int) -> bool:
        if agent.seen_terminal:
            return True
        if agent.spec.disconnect_at is not None and send_t >= agent.spec.disconnect_at:
            if not agent.disconnected:
                agent.disconnected = True
                self.trace.add(event="disconnect", t=send_t, client=agent.spec.person_id)
            return True
        return False

    def _poll(self, agent: _Agent) -> None:
        if agent.token is None or self._should_stop_polling(agent, self.now):
            return
        send_t = self.now
        t0 = agent.local(send_t)
        out_d = self.delay(agent.spec.link)
        back_d = self.delay(agent.spec.link)
        agent.polls_sent += 1

        def server_side() -> None:
            try:
                reply = self.service.poll(agent.token, self.auction_id, agent.cursor, t0)
            except ServiceError as exc:
                self.trace.add(event="poll_error", t=self.now, client=agent.spec.person_id, code=exc.code)
                return
            self.at(self.now + back_d, lambda: client_side(reply))

        def client_side(reply: dict[str, Any]) -> None:
            recv_t = self.now
            t2 = agent.local(recv_t)
            agent.estimator.add_sample(t0, reply["server_time"], t2)
            agent.last_view = reply["view"]
            for msg in reply["messages"]:
                if msg["seq"] not in agent.observed:
                    agent.observed[msg["seq"]] = recv_t
                    self.trace.add(
                        event="observe",
                        t=recv_t,
                        client=agent.spec.person_id,
                        seq=msg["seq"],
                        kind=msg["kind"],
                        msg_time=msg["server_time"],
                    )
                if msg["kind"] in ("closed", "auction_cancelled"):
                    agent.seen_terminal = True
            agent.cursor = reply["new_cursor"]
            self._react(agent, reply, recv_t)
            if not agent.seen_terminal:
                self.at(recv_t + reply["next_poll_ms"], lambda: self._poll(agent))

        self.at(send_t + out_d, server_side)

    def _react(self, agent: _Agent, reply: dict[str, Any], recv_t: int) -> None:
        strat = agent.spec.strategy
        if strat.get("kind") != "undercut" or agent.spec.person_id not in self._bidder_ids():
            return
        slot_id = strat["slot_id"]
        max_bids = int(strat.get("max_bids", 10))
        if agent.bids_made >= max_bids or agent.seen_terminal:
            return
        view_slot = reply["view"]["slots"].get(slot_id)
        if view_slot is None:
            return
        entries = view_slot.get("entries", [])
        own_rank = view_slot.get("own_rank")
        if own_rank == 1:
            return  # already leading
        if agent.pending_reaction is not None and agent.pending_reaction > recv_t:
            return
        reaction = int(strat.get("reaction_ms", 500))
        when = recv_t + reaction
        agent.pending_reaction = when
        best = entries[0]["value"]["amount"] if entries else None
        self.at(when, lambda: self._undercut_fire(agent, slot_id, best))

    def _undercut_fire(self, agent: _Agent, slot_id: str, observed_best: int | None) -> None:
        if agent.seen_terminal or agent.token is None:
            return
        strat = agent.spec.strategy
        machine = self.service.machine(self.auction_id)
        config = machine.state.config
        tick = config.tick_size
        floor = int(strat.get("floor", tick))
        slot = config.slot(slot_id)
        start_price = slot.start_price.amount if slot and slot.start_price else None
        reverse = config.format is AuctionFormat.REVERSE

        own_prev = None
        for b in machine.state.bids.get(slot_id, []):
            if b.bidder == agent.spec.person_id and not b.voided:
                own_prev = b.amount.amount
        if reverse:
            goal = observed_best - tick if observed_best is not None else (start_price or floor + 10 * tick)
            if own_prev is None:
                amount = min(start_price, goal) if start_price is not None else goal
            else:
                if own_prev <= goal:
                    amount = own_prev - tick
                else:
                    steps = -((goal - own_prev) // tick)  # ceil division
                    amount = own_prev - steps * tick
            if amount < floor:
                return
        else:
            goal = observed_best + tick if observed_best is not None else floor
            if own_prev is None:
                amount = goal
            else:
                amount = max(own_prev + tick, goal)
            ceiling = int(strat.get("ceiling", 10**12))
            if amount > ceiling:
                return
        remaining = agent.believed_remaining(self.now)
        if remaining is not None and remaining <= 0:
            return
        self._send_bid(agent, slot_id, amount)

    def _send_bid(self, agent: _Agent, slot_id: str, amount: int) -> None:
        if agent.token is None:
            return
        send_t = self.now
        believed = agent.believed_phase()
        remaining = agent.believed_remaining(send_t)
        out_d = self.delay(agent.spec.link)
        back_d = self.delay(agent.spec.link)
        cursor = agent.cursor
        agent.bids_made += 1

        def server_side() -> None:
            try:
                reply = self.service.bid(agent.token, self.auction_id, slot_id, amount, cursor, None)
            except ServiceError as exc:
                self.trace.add(
                    event="bid_error", t=send_t, client=agent.spec.person_id, code=exc.code
                )
                return
            self.trace.add(
                event="bid",
                t=send_t,
                arrival_t=self.now,
                client=agent.spec.person_id,
                slot_id=slot_id,
                amount=amount,
                cursor_at_submit=cursor,
                believed_phase=believed,
                believed_remaining=remaining,
                delay_out=out_d,
                accepted=reply.accepted,
                reason=reply.reason,
                rank=reply.rank,
            )
            self.at(self.now + back_d, lambda: None)  # response leg, nothing to do

        self.at(send_t + out_d, server_side)

    def _bidder_ids(self) -> set[str]:
        machine = self.service.machine(self.auction_id)
        return {
            pid
            for pid, e in machine.state.roster.items()
            if e.role.value == "bidder"
        }

    # -- wrap-up ---------------------------------------------------------

    def _finalize(self) -> None:
        machine = self.service.machine(self.auction_id)
        state = machine.state
        close_msg = next(
            (m for m in state.messages if m.kind.value in ("closed", "auction_cancelled")),
            None,
        )
        self.trace.add(
            event="final",
            t=self.now,
            phase=state.phase.value,
            current_end=state.current_end,
            hard_cap_at=state.hard_cap_at,
            extension_count=state.extension_count,
            close_time=close_msg.server_time if close_msg else None,
            close_payload_time=(
                close_msg.payload.get("closed_at", close_msg.payload.get("cancelled_at"))
                if close_msg
                else None
            ),
            digest=state.state_digest(),
            message_count=len(state.messages),
        )
        for agent in self.agents:
            try:
                est = agent.estimator.current().to_dict()
            except TimesyncError:
                est = None
            self.trace.add(
                event="client_final",
                t=self.now,
                client=agent.spec.person_id,
                true_offset=agent.spec.clock_offset_ms,
                estimate=est,
                cursor=agent.cursor,
                polls_sent=agent.polls_sent,
                disconnected=agent.disconnected,
                observed_seqs=sorted(agent.observed),
                observed_times={str(k): v for k, v in sorted(agent.observed.items())},
            )
        self.service.close()


def run(scenario: Scenario, data_dir: str | None = None) -> Trace:
    if not scenario.agents and not scenario.creation:
        raise ScenarioInvalid("empty scenario")
    if data_dir is None:
        with tempfile.TemporaryDirectory(prefix="openfloor-sim-") as tmp:
            return Simulation(scenario, tmp).run()
    return Simulation(scenario, data_dir).run()


# -- trace checks ----------------------------------------------------------


def check_close_agreement(trace: Trace) -> dict[str, Any]:
    """Per-client lag between the server's close and the client observing
    it. Disconnected clients are excluded and reported separately."""
    final = trace.of_kind("final")[0]
    close_t = final["close_time"]
    lags: dict[str, int] = {}
    excluded: list[str] = []
    observed_close: dict[str, int] = {}
    for rec in trace.of_kind("observe"):
        if rec["kind"] in ("closed", "auction_cancelled"):
            observed_close.setdefault(rec["client"], rec["t"])
    for rec in trace.of_kind("client_final"):
        client = rec["client"]
        if rec["disconnected"]:
            excluded.append(client)
            continue
        if client in observed_close and close_t is not None:
            lags[client] = observed_close[client] - close_t
    return {
        "close_time": close_t,
        "lags": lags,
        "max_lag": max(lags.values()) if lags else None,
        "excluded": excluded,
        "missing": [
            r["client"]
            for r in trace.of_kind("client_final")
            if not r["disconnected"] and r["client"] not in observed_close
        ],
    }


def check_fairness(trace: Trace, closing_grace_ms: int) -> list[dict[str, Any]]:
    """Bids sent while the client still believed the auction open, carried
    by a link faster than the grace window, arriving before the hard cap,
    must never bounce with AuctionClosed."""
    final = trace.of_kind("final")[0]
    cap = final["hard_cap_at"]
    violations = []
    for rec in trace.of_kind("bid"):
        if rec["believed_phase"] not in ("open", "extension"):
            continue
        if rec["delay_out"] >= closing_grace_ms:
            continue
        if rec["arrival_t"] >= cap:
            continue
        if not rec["accepted"] and rec["reason"] == "AuctionClosed":
            violations.append(rec)
    return violations


def check_no_late_win(trace: Trace) -> list[dict[str, Any]]:
    final = trace.of_kind("final")[0]
    cap = final["hard_cap_at"]
    return [r for r in trace.of_kind("bid") if r["accepted"] and r["arrival_t"] >= cap]
