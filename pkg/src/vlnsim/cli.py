"""Command-line surface: evaluation, BC export, step statistics, synthetic
world generation, and the HTTP episode server.

The CLI stays thin: flags are parsed here and everything else is delegated
to the core package. Infrastructure problems (bad flags, missing files,
unreachable remote policy) exit nonzero; per-episode policy failures are
recorded in the report and do not crash the run.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

from .data import (
    DataError,
    SyntheticWorldParams,
    export_bc,
    gen_synthetic,
    save_world,
)
from .evaluation import run_offline_eval, run_online_eval
from .expert import ExpertError, step_stats
from .metrics import DEFAULT_SUCCESS_RADIUS_M
from .policies import RemotePolicyError, policy_factory
from .server import DatasetRegistry, create_app
from .simulator import SPACE_LOW, SPACE_PANO, VariantConfig

ENV_BIND = "VLNSIM_BIND"
ENV_DEBUG = "VLNSIM_DEBUG"


class CliError(RuntimeError):
    pass


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise CliError(f"cannot read config {path}: {e}") from e


def _variant_from_args(args) -> VariantConfig:
    return VariantConfig(
        vfov_deg=args.vfov,
        auto_adjust=not args.no_adjust,
        max_steps=args.max_steps,
    )


def _registry_from_args(args, config: dict) -> DatasetRegistry:
    registry = DatasetRegistry()
    datasets = list(args.dataset or [])
    if not datasets and config.get("dataset"):
        datasets = [config["dataset"]]
    if not datasets:
        raise CliError("no dataset given (use --dataset or a config file)")
    conn = getattr(args, "connectivity", None) or config.get("connectivity")
    for d in datasets:
        registry.add_dataset(d, connectivity_root=Path(conn) if conn else None)
    return registry


def _add_dataset_flags(p: argparse.ArgumentParser):
    p.add_argument("--dataset", action="append", help="synthetic world file or R2R root dir")
    p.add_argument("--connectivity", help="connectivity root (default <dataset>/connectivity)")
    p.add_argument("--config", help="JSON config file (dataset roots, ports, defaults)")


def _add_variant_flags(p: argparse.ArgumentParser):
    p.add_argument("--vfov", type=float, default=105.0, help="vertical FOV in degrees")
    p.add_argument("--no-adjust", action="store_true", help="disable auto turn-towards-node")
    p.add_argument("--max-steps", type=int, default=None, help="episode step cap")


def cmd_eval(args) -> int:
    config = _load_config(args.config)
    registry = _registry_from_args(args, config)
    variant = _variant_from_args(args)
    specs = registry.episodes(
        args.split,
        space=args.space,
        variant=variant,
        instruction_index=args.instruction_index,
    )
    if not specs:
        raise CliError(f"split {args.split!r} has no episodes after filtering")
    make_policy = policy_factory(args.policy, seed=args.seed)
    buckets = None
    if args.buckets:
        buckets = [float(x) for x in args.buckets.split(",") if x.strip()]
    if args.mode == "online":
        result = run_online_eval(
            specs,
            make_policy,
            split=args.split,
            success_radius_m=args.success_radius,
            bucket_edges=buckets,
            seed=args.seed,
        )
        report, records = result.report, result.records
    else:
        offline = run_offline_eval(
            specs,
            make_policy,
            split=args.split,
            success_radius_m=args.success_radius,
            seed=args.seed,
        )
        report, records = offline.report, None
    sys.stdout.write(report.to_table())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.to_json())
        (out / "report.txt").write_text(report.to_table())
        if records is not None:
            lines = [r.to_json() for r in records]
            (out / "records.jsonl").write_text("\n".join(lines) + "\n" if lines else "")
    return 0


def cmd_export_bc(args) -> int:
    config = _load_config(args.config)
    registry = _registry_from_args(args, config)
    variant = _variant_from_args(args)
    specs = registry.episodes(
        args.split,
        space=args.space,
        variant=variant,
        instruction_index=args.instruction_index,
    )
    count = export_bc(specs, args.space, variant, args.out)
    print(f"wrote {count} lines to {args.out}")
    return 0


def cmd_stats(args) -> int:
    config = _load_config(args.config)
    registry = _registry_from_args(args, config)
    variant = _variant_from_args(args)
    spaces = [args.space] if args.space else [SPACE_LOW, SPACE_PANO]
    specs = registry.episodes(args.split, variant=variant)
    for space in spaces:
        stats = step_stats(specs, space, variant)
        print(
            f"{args.split} {space}: avg_steps={stats.avg_steps:.2f}"
            f" episodes={stats.episode_count}"
        )
        if args.histogram:
            for steps, count in stats.histogram.items():
                print(f"  {steps:>4} actions: {count}")
    return 0


def cmd_gen_synthetic(args) -> int:
    params = SyntheticWorldParams(
        node_count=args.nodes,
        area_side_m=args.side,
        connect_radius_m=args.radius,
        min_geodesic_m=args.min_geo,
        max_geodesic_m=args.max_geo,
        seed=args.seed,
        episode_count=args.episodes,
        split_name=args.split_name,
    )
    graph, episodes = gen_synthetic(params)
    save_world(args.out, graph, episodes, params)
    print(
        f"wrote {len(episodes)} episodes over {len(graph)} nodes"
        f" (split {params.split_name!r}) to {args.out}"
    )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    config = _load_config(args.config)
    registry = _registry_from_args(args, config)
    debug = args.debug or os.environ.get(ENV_DEBUG, "") == "1" or bool(config.get("debug"))
    # resolution order: env override, then flag, then config, then default
    host = args.host or config.get("host") or "127.0.0.1"
    port = args.port if args.port is not None else int(config.get("port", 8800))
    bind = os.environ.get(ENV_BIND)
    if bind:
        host, _, p = bind.partition(":")
        port = int(p) if p else port
    timeout = (
        args.episode_timeout
        if args.episode_timeout is not None
        else float(config.get("episode_timeout_s", 600.0))
    )
    app = create_app(
        registry,
        debug=debug,
        idle_timeout_s=timeout,
        success_radius_m=args.success_radius,
    )
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vlnsim",
        description="Navigation-graph simulator, dataset tools, and evaluation harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="run an evaluation over a split")
    _add_dataset_flags(p)
    p.add_argument("--split", required=True)
    p.add_argument("--space", choices=[SPACE_LOW, SPACE_PANO], default=SPACE_PANO)
    p.add_argument("--mode", choices=["online", "offline"], default="online")
    p.add_argument(
        "--policy",
        default="expert",
        help="expert | random | stop | remote:<url>",
    )
    _add_variant_flags(p)
    p.add_argument(
        "--success-radius", type=float, default=DEFAULT_SUCCESS_RADIUS_M
    )
    p.add_argument("--instruction-index", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="directory for report.json/report.txt/records.jsonl")
    p.add_argument("--buckets", help="comma-separated bucket edges for SR-by-length")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-bc", help="export the behavior-cloning JSONL dataset")
    _add_dataset_flags(p)
    p.add_argument("--split", required=True)
    p.add_argument("--space", choices=[SPACE_LOW, SPACE_PANO], required=True)
    _add_variant_flags(p)
    p.add_argument("--instruction-index", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_bc)

    p = sub.add_parser("stats", help="expert step statistics per action space")
    _add_dataset_flags(p)
    p.add_argument("--split", required=True)
    p.add_argument("--space", choices=[SPACE_LOW, SPACE_PANO], default=None)
    _add_variant_flags(p)
    p.add_argument("--histogram", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("gen-synthetic", help="generate a seeded synthetic world")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nodes", type=int, default=60)
    p.add_argument("--side", type=float, default=30.0)
    p.add_argument("--radius", type=float, default=6.0)
    p.add_argument("--min-geo", type=float, default=6.0)
    p.add_argument("--max-geo", type=float, default=18.0)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--split-name", default="synthetic")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("serve", help="serve the HTTP episode API")
    _add_dataset_flags(p)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--debug", action="store_true", help="enable the expert_action fixture")
    p.add_argument("--episode-timeout", type=float, default=None)
    p.add_argument(
        "--success-radius", type=float, default=DEFAULT_SUCCESS_RADIUS_M
    )
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, DataError, ExpertError, RemotePolicyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
