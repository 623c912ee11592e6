"""Service facade: logins and tokens, auction creation, polling, bidding,
admin operations, persistence across restarts, and pacing."""
from __future__ import annotations

import json
import os

import pytest

from openfloor.service import (
    AuctionService,
    ServiceError,
    TokenTable,
    TrafficMonitor,
    hash_password,
    poll_interval,
    verify_password,
)

from helpers import make_config


class Clock:
    def __init__(self, t=0):
        self.t = t

    def __call__(self):
        return self.t

    def advance(self, ms):
        self.t += ms
        return self.t


BOOTSTRAP = {
    "persons": [
        {"person_id": "boss", "password": "boss-pw", "name": "Boss", "company_id": "co-orig"},
        {"person_id": "lurker", "password": "lurker-pw"},
    ]
}


def auction_payload(config=None, extra_participants=()):
    config = config or make_config()
    participants = [
        {"person_id": "ann", "role": "auctioneer", "password": "ann-pw", "company_id": "co-host"},
        {"person_id": "obs", "role": "observer", "password": "obs-pw", "company_id": "co-watch"},
        {
            "person_id": "b1",
            "role": "bidder",
            "password": "b1-pw",
            "company_id": "co-1",
            "admitted": True,
        },
        {
            "person_id": "b2",
            "role": "bidder",
            "password": "b2-pw",
            "company_id": "co-2",
            "admitted": True,
        },
    ]
    participants.extend(extra_participants)
    return {"config": config.to_dict(), "participants": participants}


def make_service(tmp_path, clock, **kw):
    kw.setdefault("bootstrap", BOOTSTRAP)
    return AuctionService(str(tmp_path), clock=clock, **kw)


def standard(tmp_path, **payload_kw):
    """Service with one created auction, clock just past its start."""
    clock = Clock(0)
    service = make_service(tmp_path, clock)
    boss = service.login("boss", "boss-pw")["auth_token"]
    service.create_auction(boss, auction_payload(**payload_kw))
    clock.t = 2_000  # start_time is 1_000
    tokens = {
        who: service.login(who, f"{who}-pw")["auth_token"]
        for who in ("ann", "obs", "b1", "b2")
    }
    tokens["boss"] = boss
    return service, clock, tokens


def code_of(excinfo):
    return excinfo.value.code, excinfo.value.http_status


class TestPasswords:
    def test_roundtrip(self):
        h = hash_password("hunter2")
        assert h.startswith("pbkdf2$")
        assert verify_password("hunter2", h)
        assert not verify_password("hunter3", h)

    def test_malformed_hash_rejects(self):
        assert not verify_password("anything", "")
        assert not verify_password("anything", "plainly-wrong")

    def test_salted(self):
        assert hash_password("same") != hash_password("same")


class TestAuth:
    def test_login_and_use(self, tmp_path):
        clock = Clock(0)
        service = make_service(tmp_path, clock)
        reply = service.login("boss", "boss-pw")
        assert reply["person_id"] == "boss"
        assert service.list_auctions(reply["auth_token"])["auctions"] == []

    def test_wrong_and_unknown_user_indistinguishable(self, tmp_path):
        service = make_service(tmp_path, Clock(0))
        with pytest.raises(ServiceError) as wrong:
            service.login("boss", "nope")
        with pytest.raises(ServiceError) as unknown:
            service.login("martian", "nope")
        assert code_of(wrong) == code_of(unknown) == ("BadCredentials", 401)
        assert str(wrong.value) == str(unknown.value)

    def test_bad_token(self, tmp_path):
        service = make_service(tmp_path, Clock(0))
        with pytest.raises(ServiceError) as err:
            service.list_auctions("deadbeef")
        assert code_of(err) == ("Unauthorized", 401)

    def test_idle_expiry(self, tmp_path):
        clock = Clock(0)
        service = make_service(tmp_path, clock)
        token = service.login("boss", "boss-pw")["auth_token"]
        clock.advance(12 * 3_600_000 + 1)
        with pytest.raises(ServiceError) as err:
            service.list_auctions(token)
        assert code_of(err) == ("Unauthorized", 401)

    def test_activity_refreshes_expiry(self, tmp_path):
        clock = Clock(0)
        service = make_service(tmp_path, clock)
        token = service.login("boss", "boss-pw")["auth_token"]
        for _ in range(4):
            clock.advance(8 * 3_600_000)  # under the limit each time
            service.list_auctions(token)

    def test_tokens_do_not_survive_restart(self, tmp_path):
        clock = Clock(0)
        service = make_service(tmp_path, clock)
        token = service.login("boss", "boss-pw")["auth_token"]
        service.close()
        reborn = make_service(tmp_path, clock)
        with pytest.raises(ServiceError):
            reborn.list_auctions(token)
        reborn.close()

    def test_token_table_unit(self):
        table = TokenTable(idle_expiry_ms=100)
        token = table.issue("p", 0)
        assert table.resolve(token, 100) == "p"
        assert table.resolve(token, 201) is None  # 101 past the refreshed stamp
        assert table.resolve(token, 202) is None  # and it stays dead


class TestCreateAuction:
    def test_create_and_list(self, tmp_path):
        service, clock, tokens = standard(tmp_path)
        rows = service.list_auctions(tokens["b1"])["auctions"]
        assert [r["auction_id"] for r in rows] == ["a1"]
        assert rows[0]["role"] == "bidder"
        # the creator was folded in as originator
        boss_rows = service.list_auctions(tokens["boss"])["auctions"]
        assert boss_rows[0]["role"] == "originator"
        # no roster entry, no row
        lurker = service.login("lurker", "lurker-pw")["auth_token"]
        assert service.list_auctions(lurker)["auctions"] == []
        service.close()

    def test_invalid_config_collects_codes(self, tmp_path):
        clock = Clock(0)
        service = make_service(tmp_path, clock)
        boss = service.login("boss", "boss-pw")["auth_token"]
        bad = make_config(main_duration_ms=0, tick_size=0)
        with pytest.raises(ServiceError) as err:
            service.create_auction(boss, auction_payload(config=bad))
        assert err.value.code == "InvalidConfig"
        assert "NonPositiveMainDuration" in err.value.detail
        assert "NonPositiveTickSize" in err.value.detail
        service.close()

    def test_duplicate_auction_id(self, tmp_path):
        service, clock, tokens = standard(tmp_path)
        with pytest.raises(ServiceError) as err:
            service.create_auction(tokens["boss"], auction_payload())
        assert code_of(err) == ("DuplicateAuction", 409)
        service.close()

    def test_duplicate_participant(self, tmp_path):
        clock = Clock(0)
        service = make_service(tmp_path, clock)
        boss = service.login("boss", "boss-pw")["auth_token"]
        payload = auction_payload(
            extra_participants=[{"person_id": "b1", "role": "bidder", "company_id": "co-9"}]
        )
        with pytest.raises(ServiceError) as err:
            service.create_auction(boss, payload)
        assert err.value.code == "RoleConflict"
        service.close()

    def test_exactly_one_auctioneer(self, tmp_path):
        clock = Clock(0)
        service = make_service(tmp_path, clock)
        boss = service.login("boss", "boss-pw")["auth_token"]
        payload = auction_payload()
        payload["participants"] = [p for p in payload["participants"] if p["role"] != "auctioneer"]
        with pytest.raises(ServiceError) as err:
            service.create_auction(boss, payload)
        assert err.value.code == "InvalidConfig"
        two = auction_payload(
            extra_participants=[
                {"person_id": "ann2", "role": "auctioneer", "company_id": "co-host"}
            ]
        )
        with pytest.raises(ServiceError):
            service.create_auction(boss, two)
        service.close()

    def test_unknown_slot_for_participant(self, tmp_path):
        clock = Clock(0)
        service = make_service(tmp_path, clock)
        boss = service.login("boss", "boss-pw")["auth_token"]
        payload = auction_payload(
            extra_participants=[
                {"person_id": "b9", "role": "bidder", "slot_id": "sX", "company_id": "co-9"}
            ]
        )
        with pytest.raises(ServiceError) as err:
            service.create_auction(boss, payload)
        assert err.value.code == "InvalidConfig"
        service.close()

    def test_passwords_never_reach_disk(self, tmp_path):
        service, clock, tokens = standard(tmp_path)
        service.close()
        with open(os.path.join(str(tmp_path), "events.jsonl"), "rb") as fh:
            raw = fh.read()
        for secret in (b"ann-pw", b"b1-pw", b"b2-pw", b"obs-pw", b'"password"'):
            assert secret not in raw
        assert b"pbkdf2$" in raw  # hashes made it instead

    def test_unauthenticated_create(self, tmp_path):
        service = make_service(tmp_path, Clock(0))
        with pytest.raises(ServiceError) as err:
            service.create_auction("bogus", auction_payload())
        assert code_of(err) == ("Unauthorized", 401)
        service.close()


class TestPollAndBid:
    def test_poll_shape(self, tmp_path):
        service, clock, tokens = standard(tmp_path)
        reply = service.poll(tokens["b1"], "a1", 0)
        assert reply["server_time"] == 2_000
        assert reply["view"]["phase"] == "open"
        assert reply["new_cursor"] == len(reply["messages"]) == 1  # the opening
        assert reply["messages"][0]["kind"] == "state_changed"
        service.close()

    def test_poll_unknown_auction(self, tmp_path):
        service, clock, tokens = standard(tmp_path)
        with pytest.raises(ServiceError) as err:
            service.poll(tokens["b1"], "aX", 0)
        assert code_of(err) == ("UnknownAuction", 404)
        service.close()

    def test_poll_outside_roster(self, tmp_path):
        service, clock, tokens = standard(tmp_path)
        lurker = service.login("lurker", "lurker-pw")["auth_token"]
        with pytest.raises(ServiceError) as err:
            service.poll(lurker, "a1", 0)
        assert code_of(err) == ("Unauthorized", 401)
        service.close()

    def test_unadmitted_bidder_cannot_poll(self, tmp_path):
        service, clock, tokens = standard(
            tmp_path,
            extra_participants=[
                {
                    "person_id": "b3",
                    "role": "bidder",
                    "password": "b3-pw",
                    "company_id": "co-3",
                    "invited": True,
                    "contract_signed": True,
                }
            ],
        )
        b3 = service.login("b3", "b3-pw")["auth_token"]
        with pytest.raises(ServiceError) as err:
            service.poll(b3, "a1", 0)
        assert code_of(err) == ("Unauthorized", 401)
        service.close()

    def test_cursor_bounds(self, tmp_path):
        service, clock, tokens = standard(tmp_path)
        latest = service.poll(tokens["b1"], "a1", 0)["new_cursor"]
        with pytest.raises(ServiceError) as err:
            service.poll(tokens["b1"], "a1", latest + 1)
        assert code_of(err) == ("CursorAhead", 409)
        with pytest.raises(ServiceError):
            service.poll(tokens["b1"], "a1", -1)
        service.close()

    def test_accepted_bid_reply(self, tmp_path):
        service, clock, tokens = standard(tmp_path)
        reply = service.bid(tokens["b1"], "a1", "s1", 10_000)
        assert reply.accepted
        d = reply.to_dict()
        assert d["rank"] == 1 and d["bid_id"] and "reason" not in d
        assert d["new_end"] == service.machine("a1").state.current_end
        service.close()

    def test_rejected_bid_reply_and_log_silence(self, tmp_path):
        service, clock, tokens = standard(tmp_path)
        service.poll(tokens["b1"], "a1", 0)  # flush the opening transition
        log = os.path.join(str(tmp_path), "events.jsonl")
        before = os.path.getsize(log)
        reply = service.bid(tokens["b1"], "a1", "s1", 0)
        assert not reply.accepted and reply.reason == "InsufficientImprovement"
        d = reply.to_dict()
        assert d == {"accepted": False, "server_time": 2_000, "reason": "InsufficientImprovement"}
        assert os.path.getsize(log) == before
        service.close()

    def test_observer_cannot_bid(self, tmp_path):
        service, clock, tokens = standard(tmp_path)
        reply = service.bid(tokens["obs"], "a1", "s1", 9_000)
        assert not reply.accepted and reply.reason == "NotABidder"
        service.close()

    def test_cursor_delivery_exactly_once(self, tmp_path):
        service, clock, tokens = standard(tmp_path)
        cursor = 0
        seen = []
        for amount, who in ((10_000, "b1"), (9_500, "b2"), (9_900, "b1")):
            service.bid(tokens[who], "a1", "s1", amount)
            clock.advance(500)
            reply = service.poll(tokens["obs"], "a1", cursor)
            seen.extend(m["seq"] for m in reply["messages"])
            cursor = reply["new_cursor"]
        assert seen == sorted(set(seen))
        total = len(service.machine("a1").state.messages)
        assert seen == list(range(1, total + 1))
        service.close()

    def test_next_poll_ms_near_end(self, tmp_path):
        service, clock, tokens = standard(tmp_path)
        far = service.poll(tokens["b1"], "a1", 0)["next_poll_ms"]
        assert far == 1_000
        clock.t = service.machine("a1").state.current_end - 60_000
        near = service.poll(tokens["b1"], "a1", 0)["next_poll_ms"]
        assert near == 500
        service.close()

    def test_bids_from_different_slots_rejected(self, tmp_path):
        service, clock, tokens = standard(tmp_path)
        reply = service.bid(tokens["b1"], "a1", "sX", 9_000)
        assert reply.reason == "UnknownReference"
        service.close()


class TestAdmin:
    def test_requires_auctioneer(self, tmp_path):
        service, clock, tokens = standard(tmp_path)
        for token in (tokens["b1"], tokens["obs"], tokens["boss"]):
            with pytest.raises(ServiceError) as err:
                service.admin_ban(token, "a1", "b1")
            assert code_of(err) == ("Forbidden", 403)
        service.close()

    def test_admit_workflow_over_http_surface(self, tmp_path):
        service, clock, tokens = standard(
            tmp_path,
            extra_participants=[
                {
                    "person_id": "b3",
                    "role": "bidder",
                    "password": "b3-pw",
                    "company_id": "co-3",
                    "invited": True,
                    "contract_signed": True,
                }
            ],
        )
        reply = service.admin_admit(tokens["ann"], "a1", "b3")
        assert reply["ok"]
        b3 = service.login("b3", "b3-pw")["auth_token"]
        assert service.bid(b3, "a1", "s1", 7_000).accepted
        service.close()

    def test_admit_failure_reason_passthrough(self, tmp_path):
        service, clock, tokens = standard(
            tmp_path,
            extra_participants=[
                {
                    "person_id": "b3",
                    "role": "bidder",
                    "password": "b3-pw",
                    "company_id": "co-3",
                }
            ],
        )
        # being rostered implies invited; the unsigned contract still blocks
        reply = service.admin_admit(tokens["ann"], "a1", "b3")
        assert reply == {"server_time": 2_000, "ok": False, "reason": "NotSigned"}
        service.close()

    def test_admit_uninvited(self, tmp_path):
        service, clock, tokens = standard(
            tmp_path,
            extra_participants=[
                {
                    "person_id": "b3",
                    "role": "bidder",
                    "password": "b3-pw",
                    "company_id": "co-3",
                    "invited": False,
                }
            ],
        )
        reply = service.admin_admit(tokens["ann"], "a1", "b3")
        assert reply["reason"] == "NotInvited"
        service.close()

    def test_ban_voids_and_locks_out(self, tmp_path):
        service, clock, tokens = standard(tmp_path)
        service.bid(tokens["b1"], "a1", "s1", 10_000)
        service.bid(tokens["b2"], "a1", "s1", 9_000)
        assert service.admin_ban(tokens["ann"], "a1", "b1")["ok"]
        with pytest.raises(ServiceError):
            service.poll(tokens["b1"], "a1", 0)
        reply = service.bid(tokens["b1"], "a1", "s1", 8_000)
        assert reply.reason == "Banned"
        status = service.admin_status(tokens["ann"], "a1")
        row = next(r for r in status["participants"] if r["person_id"] == "b1")
        assert row["banned"] and not row["admitted"]
        service.close()

    def test_prolong_and_status(self, tmp_path):
        service, clock, tokens = standard(tmp_path)
        before = service.admin_status(tokens["ann"], "a1")
        assert service.admin_prolong(tokens["ann"], "a1", 60_000)["ok"]
        after = service.admin_status(tokens["ann"], "a1")
        assert after["current_end"] == before["current_end"] + 60_000
        assert after["hard_cap_at"] == before["hard_cap_at"] + 60_000
        assert not service.admin_prolong(tokens["ann"], "a1", 0)["ok"]
        service.close()

    def test_cancel(self, tmp_path):
        service, clock, tokens = standard(tmp_path)
        assert service.admin_cancel(tokens["ann"], "a1")["ok"]
        assert service.machine("a1").state.phase.value == "cancelled"
        reply = service.bid(tokens["b1"], "a1", "s1", 9_000)
        assert reply.reason == "AuctionClosed"
        service.close()

    def test_status_shows_pseudonyms(self, tmp_path):
        service, clock, tokens = standard(tmp_path)
        service.bid(tokens["b2"], "a1", "s1", 10_000)
        status = service.admin_status(tokens["ann"], "a1")
        row = next(r for r in status["participants"] if r["person_id"] == "b2")
        assert row["pseudonym"] == "Bidder-1"
        service.close()


class TestPersistence:
    def test_restart_resumes_exact_state(self, tmp_path):
        service, clock, tokens = standard(tmp_path)
        service.bid(tokens["b1"], "a1", "s1", 10_000)
        service.bid(tokens["b2"], "a1", "s1", 9_500)
        digest = service.machine("a1").state.state_digest()
        service.close()

        reborn = make_service(tmp_path, clock)
        assert reborn.machine("a1").state.state_digest() == digest
        b1 = reborn.login("b1", "b1-pw")["auth_token"]
        assert reborn.bid(b1, "a1", "s1", 9_900).accepted
        reborn.close()

    def test_terminal_auction_writes_reports(self, tmp_path):
        service, clock, tokens = standard(tmp_path)
        service.bid(tokens["b1"], "a1", "s1", 10_000)
        clock.t = 10_000_000
        service.tick_all()
        assert service.machine("a1").state.phase.value == "closed"
        report_dir = os.path.join(str(tmp_path), "reports", "a1")
        names = sorted(os.listdir(report_dir))
        assert names == [
            "report.auctioneer.csv",
            "report.auctioneer.json",
            "report.bidder.csv",
            "report.bidder.json",
            "report.observer.csv",
            "report.observer.json",
            "report.originator.csv",
            "report.originator.json",
        ]
        with open(os.path.join(report_dir, "report.observer.json"), "rb") as fh:
            observer = json.loads(fh.read())
        assert "winner" in json.dumps(observer)  # sanity: structured content
        service.close()

    def test_snapshot_written_and_used(self, tmp_path):
        clock = Clock(0)
        service = make_service(tmp_path, clock, snapshot_every=5)
        boss = service.login("boss", "boss-pw")["auth_token"]
        service.create_auction(boss, auction_payload())
        clock.t = 2_000
        b1 = service.login("b1", "b1-pw")["auth_token"]
        amount = 100_000
        for _ in range(8):
            assert service.bid(b1, "a1", "s1", amount).accepted
            amount -= 100
        digest = service.machine("a1").state.state_digest()
        snapshots = [n for n in os.listdir(str(tmp_path)) if n.startswith("snapshot-")]
        assert snapshots
        service.close()
        reborn = make_service(tmp_path, clock, snapshot_every=5)
        assert reborn.machine("a1").state.state_digest() == digest
        reborn.close()


class TestPacing:
    def test_poll_interval_table(self):
        assert poll_interval(600_000, 0.0) == 1_000
        assert poll_interval(120_000, 0.0) == 1_000  # threshold is exclusive
        assert poll_interval(119_999, 0.0) == 500
        assert poll_interval(0, 0.0) == 500
        assert poll_interval(600_000, 3.0) == 3_000
        assert poll_interval(600_000, 99.0) == 5_000
        assert poll_interval(119_999, 0.5) == 500  # light load never speeds up
        assert poll_interval(600_000, 1.0) == 1_000

    def test_traffic_window(self):
        monitor = TrafficMonitor(capacity_rps=10, window_ms=10_000)
        for t in range(0, 1_000, 10):  # 100 hits in one second
            monitor.record(t)
        # 100 hits over a 10 s window = 10 rps = at capacity
        assert monitor.load_factor(1_000) == pytest.approx(1.0)
        # all hits age out
        assert monitor.load_factor(20_000) == 0.0

    def test_load_shows_up_in_next_poll_ms(self, tmp_path):
        clock = Clock(0)
        service = make_service(tmp_path, clock, capacity_rps=0.5)
        boss = service.login("boss", "boss-pw")["auth_token"]
        service.create_auction(boss, auction_payload())
        clock.t = 2_000
        b1 = service.login("b1", "b1-pw")["auth_token"]
        for _ in range(40):
            service.poll(b1, "a1", 0)
        reply = service.poll(b1, "a1", 0)
        assert reply["next_poll_ms"] > 1_000
        service.close()
