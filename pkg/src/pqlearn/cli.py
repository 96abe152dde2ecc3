"""Command-line interface.

`run` and `compare` are thin clients of the experiment service: they post
the config to the service (mounted in-process unless --server points at a
remote instance) and write the returned files under the output directory.
`bounds` and `validate` are pure local computations, kept free of the
HTTP stack so they stay fast; the same operations are also exposed as
service endpoints. Imports happen inside commands so startup stays cheap.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

OUTPUT_DIR_ENV = "PQLEARN_OUT_DIR"


def _resolve_out_dir(cli_out: str | None, config_out: str | None) -> Path:
    out = cli_out or config_out or os.environ.get(OUTPUT_DIR_ENV)
    if not out:
        raise SystemExit(
            f"no output directory: pass --out, set 'out' in the config, or set ${OUTPUT_DIR_ENV}"
        )
    return Path(out)


def _load_config_doc(path: str) -> dict:
    """Read a config file and resolve its relative paths, so the document
    can be shipped to the service as-is."""
    cfg_path = Path(path)
    try:
        doc = json.loads(cfg_path.read_text())
    except FileNotFoundError:
        raise SystemExit(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise SystemExit(f"{path} is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise SystemExit(f"{path}: config must be a JSON object")
    base = cfg_path.parent.resolve()
    if isinstance(doc.get("mdp_file"), str) and not Path(doc["mdp_file"]).is_absolute():
        doc["mdp_file"] = str(base / doc["mdp_file"])
    dist = doc.get("distribution")
    if (
        isinstance(dist, dict)
        and isinstance(dist.get("file"), str)
        and not Path(dist["file"]).is_absolute()
    ):
        dist["file"] = str(base / dist["file"])
    return doc


def _write_files(out_dir: Path, files: list[dict]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for item in files:
        target = out_dir / item["name"]
        target.write_text(item["content"])
        print(f"wrote {target}")


def _print_summary(label: str, summary: dict) -> None:
    print(
        f"{label}: seeds={summary['seed_count']} samples={summary['samples_used']} "
        f"q_inf_error={summary['q_inf_error_mean']:.6g}±{summary['q_inf_error_se']:.2g} "
        f"v_gap={summary['v_gap_mean']:.6g}±{summary['v_gap_se']:.2g} "
        f"config={summary['config_hash'][:12]}"
    )


def cmd_bounds(args) -> int:
    from .pq import bounds_report

    try:
        report = bounds_report(
            args.epsilon, args.gamma, args.states, args.actions, args.c, args.l
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"epsilon {report['epsilon']!r}")
    print(f"gamma {report['gamma']!r}")
    print(f"num_states {report['num_states']}")
    print(f"num_actions {report['num_actions']}")
    print(f"c {report['c']!r}")
    print(f"l {report['l']!r}")
    print(f"inner_steps_per_iteration {report['inner_steps']}")
    print(f"outer_iterations {report['outer_iters']}")
    print(f"samples_for_q_accuracy {report['samples_for_q_accuracy']!r}")
    if report["samples_for_policy_accuracy"] is not None:
        print(f"samples_for_policy_accuracy {report['samples_for_policy_accuracy']!r}")
    else:
        print("samples_for_policy_accuracy n/a (stated for epsilon <= 1)")
    print(f"schedule_beta {report['schedule']['beta']!r}")
    print(f"schedule_lambda {report['schedule']['lambda']!r}")
    return 0


def cmd_validate(args) -> int:
    from .mdp import load_mdp_file

    try:
        mdp, dist = load_mdp_file(args.mdp_file)
    except FileNotFoundError:
        print(f"error: file not found: {args.mdp_file}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"invalid: {exc}")
        return 1
    extra = " with embedded distribution" if dist is not None else ""
    print(
        f"valid: {mdp.num_states} states, {mdp.num_actions} actions, "
        f"gamma={mdp.gamma}{extra}"
    )
    return 0


def cmd_run(args) -> int:
    from .client import ServiceClient, ServiceError

    doc = _load_config_doc(args.config)
    out_dir = _resolve_out_dir(args.out, doc.get("out"))
    doc.pop("out", None)  # output location is client-side only
    try:
        with ServiceClient(args.server) as client:
            payload = client.run(doc, seeds=args.seeds, threads=args.threads)
    except ServiceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _write_files(out_dir, payload["files"])
    _print_summary("run", payload["summary"])
    return 0


def cmd_compare(args) -> int:
    from .client import ServiceClient, ServiceError

    pq_doc = _load_config_doc(args.pq_config)
    std_doc = _load_config_doc(args.std_config)
    out_dir = _resolve_out_dir(args.out, pq_doc.get("out"))
    pq_doc.pop("out", None)
    std_doc.pop("out", None)
    try:
        with ServiceClient(args.server) as client:
            payload = client.compare(pq_doc, std_doc, args.budget, threads=args.threads)
    except ServiceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _write_files(out_dir, payload["files"])
    _print_summary("pq", payload["pq_summary"])
    _print_summary("standard", payload["std_summary"])
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pqlearn",
        description="Periodic Q-learning experiments on tabular discounted MDPs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a seeded experiment from a config file")
    p_run.add_argument("--config", required=True, help="experiment config JSON")
    p_run.add_argument("--out", help=f"output directory (default: config 'out' or ${OUTPUT_DIR_ENV})")
    p_run.add_argument("--seeds", type=int, help="override the config's replica count")
    p_run.add_argument("--threads", type=int, default=1, help="replica thread pool size")
    p_run.add_argument("--server", help="base URL of a remote service (default: in-process)")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="periodic vs standard learner at a matched budget")
    p_cmp.add_argument("--pq-config", required=True, help="config with algorithm 'pq'")
    p_cmp.add_argument("--std-config", required=True, help="config with algorithm 'standard'")
    p_cmp.add_argument("--budget", type=int, required=True, help="total samples both must consume")
    p_cmp.add_argument("--out", help="output directory")
    p_cmp.add_argument("--threads", type=int, default=1)
    p_cmp.add_argument("--server", help="base URL of a remote service (default: in-process)")
    p_cmp.set_defaults(func=cmd_compare)

    p_bounds = sub.add_parser("bounds", help="print the closed-form budget formulas")
    p_bounds.add_argument("--epsilon", type=float, required=True)
    p_bounds.add_argument("--gamma", type=float, required=True)
    p_bounds.add_argument("--states", type=int, required=True)
    p_bounds.add_argument("--actions", type=int, required=True)
    p_bounds.add_argument("--c", type=float, help="min state-action probability (default uniform)")
    p_bounds.add_argument("--l", type=float, help="max state-action probability (default uniform)")
    p_bounds.set_defaults(func=cmd_bounds)

    p_val = sub.add_parser("validate", help="check an MDP document file")
    p_val.add_argument("mdp_file", help="path to the MDP JSON document")
    p_val.set_defaults(func=cmd_validate)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
