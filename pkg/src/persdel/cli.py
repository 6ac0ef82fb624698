"""Command-line client.

Runs the service in-process by default; ``--server URL`` sends the same
request to a running HTTP service instead.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from pydantic import ValidationError

from .errors import PersDelError

EXIT_OK, EXIT_INVALID, EXIT_REFUTED = 0, 2, 3

CSV_HEADERS = {
    "nu": ["m", "nu", "dnu"],
    "price": ["gamma", "x_star"],
    "price_no_participation": ["gamma", "x_star"],
    "partition": ["interval_lo", "interval_hi", "kind"],
    "top": ["code", "value", "set"],
}


class ClientError(Exception):
    """Request rejected by the remote service."""


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--csv-dir", help="directory for nu.csv, price.csv, partition.csv")
    p.add_argument("--strict", action="store_true", help="exit 3 when a certificate is Refuted")
    p.add_argument("--server", help="base URL of a running service")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="persdel", description="Balanced delegation and monotone persuasion toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    def scen(p):
        p.add_argument("scenario", help="bundled name, JSON file, or inline JSON")

    p = sub.add_parser("transform", parents=[common], help="equivalent primitive of the other problem")
    scen(p)
    p.add_argument("--grid", type=int, default=64)

    p = sub.add_parser("eval", parents=[common], help="expected payoffs of a set")
    scen(p)
    p.add_argument("--set", help="JSON list of points and [lo, hi] intervals (default: scenario candidate)")
    p.add_argument("--tie-break", choices=["principal_preferred", "principal_worst", "lowest"])
    p.add_argument("--no-twin", action="store_true", help="skip the equivalent-problem evaluation")
    p.add_argument("--schedule", type=int, default=0, help="report decisions at this many states")

    p = sub.add_parser("solve-regulation", parents=[common], help="upper-censorship cutoff for price regulation")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--density", help="bundled density name")
    g.add_argument("--density-file", help="JSON piecewise polynomial {breaks, coeffs}")
    g.add_argument("--scenario", help="scenario with a regulation section")
    p.add_argument("--theta-bar", type=float, default=None)

    p = sub.add_parser("solve-linear", parents=[common], help="classify nu and construct the optimal set")
    scen(p)

    p = sub.add_parser("verify", parents=[common], help="price-function certificate for a candidate set")
    scen(p)
    p.add_argument("--set", help="JSON candidate (default: scenario candidate)")

    p = sub.add_parser("oracle", parents=[common], help="exhaustive search over grid-aligned sets")
    scen(p)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--mode", choices=["delegation", "persuasion", "linear"])
    p.add_argument("--family", choices=["full", "cells"], default="full")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tie-break", choices=["principal_preferred", "principal_worst", "lowest"])

    p = sub.add_parser("demo", parents=[common], help="run a bundled example end to end")
    p.add_argument("name", choices=["kg", "regulation-triangular", "producer"])

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return ap


def _json_arg(text):
    if text is None:
        return None
    path = Path(text)
    if not text.lstrip().startswith(("[", "{")) and path.exists():
        text = path.read_text()
    return json.loads(text)


def _request(args) -> tuple[str, str, dict]:
    """(method, path, payload) of the request for a parsed command."""
    from .scenario import load_scenario

    def scenario(ref):
        return load_scenario(ref).model_dump(mode="json")

    c = args.command
    if c == "transform":
        return "POST", "/transform", {"scenario": scenario(args.scenario), "grid": args.grid}
    if c == "eval":
        return "POST", "/eval", {"scenario": scenario(args.scenario), "set": _json_arg(args.set),
                                 "tie_break": args.tie_break, "twin": not args.no_twin, "schedule": args.schedule}
    if c == "solve-regulation":
        body = {"theta_bar": args.theta_bar}
        if args.density:
            body["density_name"] = args.density
        elif args.density_file:
            body["density"] = _json_arg(args.density_file)
        else:
            body["scenario"] = scenario(args.scenario)
        return "POST", "/solve-regulation", body
    if c == "solve-linear":
        return "POST", "/solve-linear", {"scenario": scenario(args.scenario)}
    if c == "verify":
        return "POST", "/verify", {"scenario": scenario(args.scenario), "set": _json_arg(args.set)}
    if c == "oracle":
        return "POST", "/oracle", {"scenario": scenario(args.scenario), "n": args.n, "mode": args.mode,
                                   "family": args.family, "top_k": args.top_k, "seed": args.seed,
                                   "tie_break": args.tie_break}
    return "GET", f"/demo/{args.name}", {}


def _local(method: str, path: str, body: dict) -> dict:
    from . import api

    if method == "GET":
        return api._out(api.service.run_demo(path.rsplit("/", 1)[1])).model_dump()
    model, handler = api.HANDLERS[path]
    return api._out(handler(model.model_validate(body))).model_dump()


def _remote(base: str, method: str, path: str, body: dict) -> dict:
    import httpx

    url = base.rstrip("/") + path
    r = httpx.request(method, url, json=body if method == "POST" else None, timeout=600.0)
    if r.status_code == 422:
        detail = r.json()
        raise ClientError(detail.get("message") or json.dumps(detail.get("detail")))
    r.raise_for_status()
    return r.json()


def write_tables(tables: dict, directory: str) -> list[str]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    written = []
    for name, rows in sorted(tables.items()):
        path = d / f"{name}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADERS.get(name, [f"c{i}" for i in range(len(rows[0]) if rows else 0)]))
            for row in rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])
        written.append(str(path))
    return written


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "serve":
        import uvicorn

        uvicorn.run("persdel.api:app", host=args.host, port=args.port)
        return EXIT_OK
    try:
        method, path, body = _request(args)
        out = _remote(args.server, method, path, body) if args.server else _local(method, path, body)
    except (PersDelError, ValueError, ValidationError, ClientError, FileNotFoundError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    text = json.dumps(out["report"], indent=2, sort_keys=True, allow_nan=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.csv_dir:
        write_tables(out["tables"], args.csv_dir)
    if args.strict and out.get("verified") is False:
        return EXIT_REFUTED
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
