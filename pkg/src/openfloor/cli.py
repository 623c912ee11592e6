"""Command line entry points.

serve    run the auction server
inspect  print decoded event log records
verify   run the log plausibility checks
report   regenerate report files for one auction from the log
sim      run a simulation scenario
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import reports as reports_mod
from . import sim as sim_mod
from . import store as store_mod
from .httpd import Server, SimClock
from .service import DEFAULT_CAPACITY_RPS, AuctionService


def _data_dir(value: str | None) -> str:
    path = value or os.environ.get("OPENFLOOR_DATA_DIR")
    if not path:
        raise SystemExit("no data directory: pass --data-dir or set OPENFLOOR_DATA_DIR")
    return path


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def cmd_serve(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    sim_clock = SimClock() if args.sim_clock else None
    service = AuctionService(
        _data_dir(args.data_dir),
        clock=sim_clock.now if sim_clock else None,
        capacity_rps=args.capacity_rps or config.get("capacity_rps", DEFAULT_CAPACITY_RPS),
        fsync=bool(config.get("fsync", False)),
        bootstrap=config,
    )
    server = Server(service, listen=args.listen, sim_clock=sim_clock)
    host, port = server.address
    print(f"listening on {host}:{port}", flush=True)
    server.serve_forever()
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    path = os.path.join(_data_dir(args.data_dir), store_mod.LOG_NAME)
    for record in store_mod.iter_records(path, strict=False):
        print(json.dumps(record, sort_keys=True))
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    path = os.path.join(_data_dir(args.data_dir), store_mod.LOG_NAME)
    violations = store_mod.plausibility_check(path)
    for v in violations:
        print(f"{v.code} at global_seq {v.global_seq}: {v.detail}")
    if violations:
        print(f"{len(violations)} violation(s)")
        return 1
    print("log ok")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    data_dir = _data_dir(args.data_dir)
    world = store_mod.recover(data_dir)
    machine = world.machines.get(args.auction_id)
    if machine is None:
        print(f"unknown auction {args.auction_id}", file=sys.stderr)
        return 1
    try:
        out_dir = reports_mod.write_reports(machine.state, world.persons, data_dir)
    except reports_mod.ReportError as exc:
        print(f"cannot report: {exc}", file=sys.stderr)
        return 1
    print(out_dir)
    return 0


def cmd_sim(args: argparse.Namespace) -> int:
    with open(args.scenario, "r", encoding="utf-8") as fh:
        scenario_dict = json.load(fh)
    if args.seed is not None:
        scenario_dict["seed"] = args.seed
    scenario = sim_mod.Scenario.from_dict(scenario_dict)
    trace = sim_mod.run(scenario)
    payload = trace.to_jsonl()
    if args.trace:
        with open(args.trace, "wb") as fh:
            fh.write(payload)
        print(f"{len(trace.records)} trace records -> {args.trace}")
    else:
        sys.stdout.buffer.write(payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="openfloor")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the auction server")
    serve.add_argument("--listen", default="127.0.0.1:8080", metavar="addr:port")
    serve.add_argument("--data-dir", default=None)
    serve.add_argument("--config", default=None, help="JSON file: persons, capacity_rps, fsync")
    serve.add_argument("--capacity-rps", type=float, default=None)
    serve.add_argument("--sim-clock", action="store_true", help="virtual clock, advanced via /api/test/advance")
    serve.set_defaults(fn=cmd_serve)

    inspect = sub.add_parser("inspect", help="print decoded event log records")
    inspect.add_argument("data_dir", nargs="?", default=None)
    inspect.set_defaults(fn=cmd_inspect)

    verify = sub.add_parser("verify", help="run log plausibility checks")
    verify.add_argument("data_dir", nargs="?", default=None)
    verify.set_defaults(fn=cmd_verify)

    report = sub.add_parser("report", help="regenerate reports for an auction")
    report.add_argument("auction_id")
    report.add_argument("--data-dir", default=None)
    report.set_defaults(fn=cmd_report)

    simp = sub.add_parser("sim", help="run a simulation scenario")
    simp.add_argument("scenario")
    simp.add_argument("--seed", type=int, default=None)
    simp.add_argument("--trace", default=None, help="write trace JSONL here instead of stdout")
    simp.set_defaults(fn=cmd_sim)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
