"""Thin command-line client for the doorstep service.

Every subcommand marshals its work through the HTTP API: against a remote
server when --server is given, otherwise against an in-process instance of
the app (no network, same schemas). File reading/writing stays on the client.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx

from .config import load_config


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    from .service.app import create_app

    transport = httpx.ASGITransport(app=create_app())
    return httpx.Client(
        transport=transport, base_url="http://doorstep.internal", timeout=600.0
    )


def _config_overrides(args) -> dict:
    cfg = load_config(args.config) if args.config else load_config()
    overrides = cfg.to_dict()
    for item in args.set or []:
        if "=" not in item:
            raise SystemExit(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    resp = client.post(path, json=payload)
    if resp.status_code != 200:
        raise SystemExit(f"{path} failed ({resp.status_code}): {resp.text}")
    return resp.json()


def cmd_generate(args) -> int:
    overrides = _config_overrides(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    count = int(overrides["corpus_size"])
    master = int(overrides["master_seed"])
    with _client(args.server) as client:
        for i in range(count):
            seed = master + i
            doc = _post(
                client, "/worlds/generate", {"seed": seed, "config": overrides}
            )
            path = out / f"world_{seed}.json"
            path.write_text(json.dumps(doc) + "\n")
            print(f"wrote {path}")
    return 0


def cmd_run(args) -> int:
    overrides = _config_overrides(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with _client(args.server) as client:
        body = _post(client, "/corpus/run", {"config": overrides})
    trials = body["trials"]
    report = body["report"]
    with open(out / "trials.jsonl", "w") as fh:
        for t in trials:
            fh.write(json.dumps(t) + "\n")
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    from .harness import report_csv_text

    (out / "report.csv").write_text(report_csv_text(report))
    for method, stats in report["methods"].items():
        print(
            f"{method}: n={stats['count']} delivered={stats['delivered']} "
            f"mean={stats['mean_elapsed_s']:.2f}s std={stats['std_elapsed_s']:.2f}s"
        )
    if report.get("speedup_ratio"):
        print(f"speedup ratio (frontier/proposed): {report['speedup_ratio']:.3f}")
    print(f"outputs in {out}")
    return 0


def cmd_report(args) -> int:
    overrides = _config_overrides(args)
    trials = []
    with open(args.trials) as fh:
        for line in fh:
            if line.strip():
                trials.append(json.loads(line))
    with _client(args.server) as client:
        report = _post(client, "/report", {"trials": trials, "config": overrides})
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2) + "\n")
    from .harness import report_csv_text

    csv_path = out.with_suffix(".csv")
    csv_path.write_text(report_csv_text(report))
    print(f"wrote {out} and {csv_path}")
    return 0


def cmd_render(args) -> int:
    overrides = _config_overrides(args)
    records = []
    with open(args.trials) as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    match = [
        r
        for r in records
        if (args.seed is None or r["seed"] == args.seed)
        and (args.method is None or r["method"] == args.method)
        and (args.target is None or r["target"] == args.target)
    ]
    if not match:
        raise SystemExit("no trial record matches the given filters")
    trial = match[args.index]
    payload = {"trial": trial, "config": overrides}
    if args.world:
        payload["world"] = json.loads(Path(args.world).read_text())
    with _client(args.server) as client:
        body = _post(client, "/render", payload)
    Path(args.out).write_text(body["svg"])
    print(f"wrote {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("doorstep.service.app:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doorstep",
        description="Batch drone-delivery simulator (semantic descent vs frontier baseline)",
    )
    parser.add_argument("--server", help="remote service URL (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value config file")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="override a config key (repeatable)",
        )

    p = sub.add_parser("generate", help="emit the seeded world JSON corpus")
    common(p)
    p.add_argument("--out", default="worlds", help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="run the corpus and write trials + reports")
    common(p)
    p.add_argument("--out", default="results", help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="aggregate an existing trials.jsonl")
    common(p)
    p.add_argument("--trials", required=True, help="trials.jsonl path")
    p.add_argument("--out", default="report.json", help="report JSON path")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("render", help="render one trial trajectory to SVG")
    common(p)
    p.add_argument("--trials", required=True, help="trials.jsonl path")
    p.add_argument("--seed", type=int, help="filter by seed")
    p.add_argument("--method", help="filter by method")
    p.add_argument("--target", help="filter by target")
    p.add_argument("--index", type=int, default=0, help="index among matches")
    p.add_argument("--world", help="world JSON (regenerated from seed if omitted)")
    p.add_argument("--out", default="trajectory.svg", help="output SVG path")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
