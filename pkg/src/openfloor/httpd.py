"""HTTP front end: JSON request/response over plain HTTP.

POST bodies carry ``auth_token``; GET endpoints use ``Authorization:
Bearer``. TLS is a reverse proxy concern, deliberately outside this server.
Engine rejections are not HTTP errors: a rejected bid is a 200 with
``accepted: false`` and the verbatim reason code, because the request
itself was well-formed and authorized.

With a simulated clock (test mode) the server starts at t=0 and time moves
only via POST /api/test/advance.
"""
from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Callable

from .service import AuctionService, ServiceError


class SimClock:
    """Virtual millisecond clock for test mode."""

    def __init__(self, start: int = 0):
        self._now = start
        self._lock = threading.Lock()

    def now(self) -> int:
        with self._lock:
            return self._now

    def advance(self, delta_ms: int) -> int:
        with self._lock:
            self._now += max(0, int(delta_ms))
            return self._now


_ADMIN_OP = re.compile(r"^/api/admin/([^/]+)/(admit|ban|prolong|cancel|status)$")


def make_handler(
    service: AuctionService,
    sim_clock: SimClock | None = None,
) -> type[BaseHTTPRequestHandler]:
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt: str, *args: Any) -> None:
            pass  # request logging is the event log's job; stay quiet

        # -- plumbing --------------------------------------------------

        def _send(self, status: int, payload: dict[str, Any]) -> None:
            body = json.dumps(payload, sort_keys=True).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _error(self, status: int, code: str) -> None:
            self._send(status, {"error": code})

        def _read_json(self) -> dict[str, Any] | None:
            try:
                length = int(self.headers.get("Content-Length", "0"))
                raw = self.rfile.read(length) if length else b"{}"
                parsed = json.loads(raw.decode("utf-8"))
            except (ValueError, UnicodeDecodeError):
                return None
            return parsed if isinstance(parsed, dict) else None

        def _bearer(self) -> str:
            header = self.headers.get("Authorization", "")
            if header.startswith("Bearer "):
                return header[len("Bearer "):]
            return ""

        # -- dispatch --------------------------------------------------

        def do_POST(self) -> None:  # noqa: N802 (stdlib naming)
            body = self._read_json()
            if body is None:
                self._error(400, "BadRequest")
                return
            try:
                self._route_post(self.path, body)
            except ServiceError as exc:
                self._error(exc.http_status, exc.code)
            except Exception:
                self._error(500, "InternalError")

        def do_GET(self) -> None:  # noqa: N802
            try:
                self._route_get(self.path)
            except ServiceError as exc:
                self._error(exc.http_status, exc.code)
            except Exception:
                self._error(500, "InternalError")

        def _route_post(self, path: str, body: dict[str, Any]) -> None:
            token = str(body.get("auth_token", ""))
            if path == "/api/login":
                out = service.login(str(body.get("username", "")), str(body.get("password", "")))
                self._send(200, out)
                return
            if path == "/api/poll":
                out = service.poll(
                    token,
                    str(body.get("auction_id", "")),
                    int(body.get("cursor", 0)),
                    body.get("client_send_time"),
                )
                self._send(200, out)
                return
            if path == "/api/bid":
                reply = service.bid(
                    token,
                    str(body.get("auction_id", "")),
                    str(body.get("slot_id", "")),
                    int(body.get("amount", 0)),
                    int(body.get("cursor_at_submit", 0)),
                    body.get("client_send_time"),
                )
                self._send(200, reply.to_dict())
                return
            if path == "/api/admin/auction":
                out = service.create_auction(token, body)
                self._send(200, out)
                return
            m = _ADMIN_OP.match(path)
            if m and m.group(2) != "status":
                auction_id, op = m.group(1), m.group(2)
                if op == "admit":
                    out = service.admin_admit(token, auction_id, str(body.get("person_id", "")))
                elif op == "ban":
                    out = service.admin_ban(token, auction_id, str(body.get("person_id", "")))
                elif op == "prolong":
                    out = service.admin_prolong(token, auction_id, int(body.get("delta_ms", 0)))
                else:
                    out = service.admin_cancel(token, auction_id)
                self._send(200, out)
                return
            if path == "/api/test/advance":
                if sim_clock is None:
                    self._error(404, "NotFound")
                    return
                now = sim_clock.advance(int(body.get("delta_ms", 0)))
                service.tick_all()
                self._send(200, {"server_time": now})
                return
            self._error(404, "NotFound")

        def _route_get(self, path: str) -> None:
            if path == "/api/auctions":
                self._send(200, service.list_auctions(self._bearer()))
                return
            m = _ADMIN_OP.match(path)
            if m and m.group(2) == "status":
                self._send(200, service.admin_status(self._bearer(), m.group(1)))
                return
            self._error(404, "NotFound")

    return Handler


class Server:
    """Owns the HTTP server plus the periodic tick scheduler."""

    def __init__(
        self,
        service: AuctionService,
        listen: str = "127.0.0.1:8080",
        sim_clock: SimClock | None = None,
        tick_interval_s: float = 0.25,
    ):
        host, _, port = listen.rpartition(":")
        self.service = service
        self.sim_clock = sim_clock
        self.httpd = ThreadingHTTPServer((host or "127.0.0.1", int(port)), make_handler(service, sim_clock))
        self.tick_interval_s = tick_interval_s
        self._stop = threading.Event()
        self._ticker: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self.httpd.server_address[0], self.httpd.server_address[1]

    def _tick_loop(self) -> None:
        while not self._stop.wait(self.tick_interval_s):
            try:
                self.service.tick_all()
            except Exception:
                pass  # a tick failure must not kill the scheduler

    def start(self) -> None:
        if self.sim_clock is None:
            self._ticker = threading.Thread(target=self._tick_loop, daemon=True)
            self._ticker.start()
        threading.Thread(target=self.httpd.serve_forever, daemon=True).start()

    def serve_forever(self) -> None:
        self.start()
        try:
            self._stop.wait()
        except KeyboardInterrupt:
            self.stop()

    def stop(self) -> None:
        self._stop.set()
        self.httpd.shutdown()
        self.httpd.server_close()
        self.service.close()
