"""Run manifests and deterministic CSV emission.

Floats are written with repr (shortest round-trip form), so reruns with
identical configs produce byte-identical artifacts.
"""
import json
import os
import time
from dataclasses import dataclass, field


def fmt(x):
    return repr(float(x))


def write_csv(path, header, rows):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, 'w') as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(x) if isinstance(x, float) else str(x)
                              for x in row) + "\n")


def write_gnuplot(path, csv_name, columns, title):
    """Log-log plotting script for a rate CSV (optional convenience)."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, 'w') as fh:
        fh.write("set logscale xy\nset key left top\n")
        fh.write(f"set title '{title}'\n")
        plots = ", ".join(f"'{csv_name}' using 1:{i} with linespoints title '{name}'"
                          for i, name in columns)
        fh.write(f"plot {plots}\n")


@dataclass
class RunManifest:
    config_hash: str
    version: str
    seed: int
    studies: dict = field(default_factory=dict)
    cache_hits: int = 0
    wall_time: float = 0.0

    def record(self, name, passed, detail):
        self.studies[name] = {"pass": bool(passed), **detail}

    def all_passed(self):
        return all(s["pass"] for s in self.studies.values())

    def write(self, path):
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, 'w') as fh:
            json.dump({
                "config_hash": self.config_hash,
                "version": self.version,
                "seed": self.seed,
                "studies": self.studies,
                "cache_hits": self.cache_hits,
                "wall_time_s": round(self.wall_time, 3),
            }, fh, indent=1, sort_keys=True)
            fh.write("\n")


class StopWatch:
    def __init__(self):
        self.t0 = time.perf_counter()

    def elapsed(self):
        return time.perf_counter() - self.t0
