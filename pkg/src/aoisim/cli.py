"""Command-line client for the simulation service.

The CLI only speaks HTTP to the service app. By default it mounts the app
in-process (no server needed, fully deterministic); pass --url to target a
running server instead.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx

from .harness import load_config_file
from .policies import POLICY_KINDS

DEFAULT_TIMEOUT = 3600.0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="aoisim",
        description="Energy-harvesting sensor simulator: status-update policies "
        "optimizing age of information.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a run or a sweep and save the artifacts")
    run_p.add_argument("--config", metavar="PATH", help="flat key = value config file")
    run_p.add_argument("--policy", nargs="+", choices=POLICY_KINDS, default=None)
    run_p.add_argument("--profile", nargs="+", choices=("low", "medium", "high"), default=None)
    run_p.add_argument("--capacitance", nargs="+", type=float, metavar="F", default=None)
    run_p.add_argument("--days", type=int, metavar="N", help="training days (default 10)")
    run_p.add_argument("--eval-days", type=int, metavar="N", help="evaluation days (default 7)")
    run_p.add_argument("--updates-per-day", type=int, choices=(1, 2, 3), default=None)
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--trace", metavar="PATH", help="harvest trace CSV instead of the synthetic profile")
    run_p.add_argument("--lux-coeff", type=float, metavar="X", help="amperes per lux for lux traces")
    run_p.add_argument("--out", metavar="DIR", default="runs", help="output directory (default: runs)")
    run_p.add_argument("--no-timeseries", action="store_true", help="skip the per-step CSV")
    run_p.add_argument("--url", metavar="URL", help="remote service URL (default: in-process)")

    serve_p = sub.add_parser("serve", help="start the HTTP service")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8000)
    return parser


class InProcessClient:
    """Minimal sync HTTP client mounted directly on the ASGI app."""

    def __init__(self, app):
        self._app = app

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    def post(self, path, json=None):
        import asyncio

        async def go():
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://aoisim.local", timeout=DEFAULT_TIMEOUT
            ) as client:
                return await client.post(path, json=json)

        return asyncio.run(go())


def make_client(url):
    if url:
        return httpx.Client(base_url=url, timeout=DEFAULT_TIMEOUT)
    from .service import app

    return InProcessClient(app)


def gather_overrides(args):
    """Config-file values overridden by explicit CLI flags."""
    overrides = {}
    if args.config:
        overrides.update(load_config_file(args.config))
    flag_map = {
        "days": "train_days",
        "eval_days": "eval_days",
        "updates_per_day": "updates_per_day",
        "seed": "seed",
        "trace": "trace",
        "lux_coeff": "lux_coeff",
    }
    for attr, key in flag_map.items():
        value = getattr(args, attr)
        if value is not None:
            overrides[key] = value
    return overrides


def run_command(args):
    overrides = gather_overrides(args)
    policies = args.policy or [overrides.pop("policy", "split-drl")]
    profiles = args.profile or [overrides.pop("profile", "medium")]
    capacitances = args.capacitance or [overrides.pop("capacitance_farads", 4.0)]
    overrides.pop("out_dir", None)

    out = Path(args.out)
    with make_client(args.url) as client:
        if len(policies) * len(profiles) * len(capacitances) == 1:
            payload = dict(
                overrides,
                policy=policies[0],
                profile=profiles[0],
                capacitance_farads=capacitances[0],
                include_timeseries=not args.no_timeseries,
            )
            resp = client.post("/run", json=payload)
            check_response(resp)
            body = resp.json()
            out.mkdir(parents=True, exist_ok=True)
            (out / "summary.json").write_text(
                json.dumps(body["summary"], indent=2, sort_keys=True) + "\n"
            )
            if body.get("timeseries_csv"):
                (out / "timeseries.csv").write_text(body["timeseries_csv"])
            s = body["summary"]
            print(
                f"{s['policy']} {s['profile']} {s['capacitance_farads']}F seed={s['seed']}: "
                f"avg AoI {s['aoi_avg_minutes']:.2f} min, peak "
                f"{fmt(s['aoi_peak_minutes'])} min, downtime {s['downtime_hours']:.2f} h, "
                f"{s['tx_attempts_per_day']:.1f} tx/day -> {out}"
            )
        else:
            payload = {
                "policies": policies,
                "profiles": profiles,
                "capacitances": capacitances,
                "seeds": [overrides.pop("seed", 0)] if "seed" not in overrides else [overrides.pop("seed")],
                "base": overrides,
            }
            resp = client.post("/sweep", json=payload)
            check_response(resp)
            body = resp.json()
            out.mkdir(parents=True, exist_ok=True)
            (out / "sweep.csv").write_text(body["sweep_csv"])
            (out / "summaries.json").write_text(
                json.dumps(body["rows"], indent=2, sort_keys=True) + "\n"
            )
            print(f"{len(body['rows'])} runs -> {out / 'sweep.csv'}")
    return 0


def fmt(value):
    return "n/a" if value is None else f"{value:.2f}"


def check_response(resp):
    if resp.status_code == 400 or resp.status_code == 422:
        detail = resp.json().get("detail", resp.text)
        raise SystemExit(f"aoisim: config error: {detail}")
    resp.raise_for_status()


def serve_command(args):
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return serve_command(args)
        return run_command(args)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return 2
        raise
    except (ValueError, OSError) as exc:
        print(f"aoisim: {exc}", file=sys.stderr)
        return 2
    except httpx.HTTPError as exc:
        print(f"aoisim: request failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
