"""Command-line entry point: ``symbohm <experiment> --config FILE [--seed S] [--out DIR] [--tol T]``."""

from __future__ import annotations

import argparse
import os
import sys

from .config import KINDS, SCHEMA, ConfigError, ExperimentConfig, load_config, parse_config
from .configuration import atomic_write_text
from .experiments import EXIT_CONFIG, list_experiments, run, summary_text

__all__ = ["main", "run", "list_experiments", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="symbohm", description="Reproducible experiments on identical-particle "
                                     "Bohmian mechanics.  Exit status: 0 pass, 2 physics assertion failed, "
                                     "3 configuration error, 4 numerical failure.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="show every experiment kind with its required keys and the claim it tests")
    sub.add_parser("schema", help="print every configuration key with its default")
    for kind in KINDS:
        p = sub.add_parser(kind, help=dict((i.kind, i.claim) for i in list_experiments())[kind])
        p.add_argument("--config", help="INI-style configuration file")
        p.add_argument("--seed", type=int, help="overrides [experiment] seed")
        p.add_argument("--out", help="output directory (default: runs/<experiment>)")
        p.add_argument("--tol", type=float, help="overrides [experiment] tol")
        if kind == "characters":
            p.add_argument("--n", type=int, help="number of particles (overrides [characters] n)")
    return parser


def _print_list():
    for info in list_experiments():
        print(f"{info.kind:18s} {info.anchor}")
        print(f"{'':18s} claim: {info.claim}")
        print(f"{'':18s} keys:  {', '.join(info.required_keys)}")


def _print_schema():
    for section, keys in SCHEMA.items():
        print(f"[{section}]")
        for key, (kind, default) in keys.items():
            shown = "required" if default is None else f"default {default!r}"
            print(f"  {key:15s} {getattr(kind, '__name__', 'list').lstrip('_')}  {shown}")
    print("[packet.<i>]\n  center, momentum  comma-separated floats  required\n  width             float  required")


def _config(args) -> ExperimentConfig:
    if args.config is None:
        if args.command != "characters":
            raise ConfigError(f"{args.command} needs --config")
        cfg = parse_config("[experiment]\n", kind="characters", seed=args.seed, tol=args.tol)
    else:
        cfg = load_config(args.config, kind=args.command, seed=args.seed, tol=args.tol)
    if args.command == "characters" and args.n is not None:
        cfg.sections.setdefault("characters", {})["n"] = args.n
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        _print_list()
        return 0
    if args.command == "schema":
        _print_schema()
        return 0
    try:
        cfg = _config(args)
    except (ConfigError, OSError) as exc:
        print(f"symbohm: configuration error: {exc}", file=sys.stderr)
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            atomic_write_text(os.path.join(args.out, "summary.txt"), summary_text({
                "kind": args.command, "status": "error", "error_class": type(exc).__name__,
                "error": str(exc), "exit_status": EXIT_CONFIG}))
        return EXIT_CONFIG
    out = args.out or f"runs/{cfg.kind}"
    code, summary = run(cfg, out)
    print(f"{cfg.kind}: {summary['status']} (exit {code}); artefacts in {out}")
    if "error_class" in summary:
        print(f"{summary['error_class']}: {summary['error']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
