"""Command line entry point for the verification studies.

Subcommands: cell, bloch, fiber-rates, eps-rates, korn, two-scale, all.
Exit status 0 when every asserted tolerance and slope passed, 2 when a
study failed its assertions, 1 on configuration or usage errors.
"""
import argparse
import os
import sys

from . import __version__
from .config import ConfigError, load_config
from .fiber import cache_stats
from .manifest import RunManifest, StopWatch
from .studies import STUDIES, run_studies


def build_parser():
    p = argparse.ArgumentParser(prog="blochhom",
                                description="periodic elasticity homogenization studies")
    p.add_argument("subcommand", choices=sorted(STUDIES) + ["all"])
    p.add_argument("--config", required=True, help="path to a TOML config file")
    p.add_argument("--out", default=None, help="output directory (default from config)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--jobs", type=int, default=None, help="worker pool size")
    p.add_argument("--k", type=int, default=None, help="override the mode cutoff K")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed, "jobs": args.jobs, "K": args.k,
                 "out_dir": args.out}
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    names = sorted(STUDIES) if args.subcommand == "all" else [args.subcommand]
    manifest = RunManifest(config_hash=cfg.digest(), version=__version__, seed=cfg.seed)
    watch = StopWatch()
    try:
        ok = run_studies(names, cfg, out, manifest)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    manifest.wall_time = watch.elapsed()
    manifest.cache_hits = cache_stats()["hits"]
    manifest.write(os.path.join(out, "manifest.json"))
    for name, entry in manifest.studies.items():
        print(f"[{name}] {'PASS' if entry['pass'] else 'FAIL'}")
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
