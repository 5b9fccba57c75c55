"""Time the compiled and pure-Python stepping kernels on the same profiles.

    python3 benchmarks/bench_kernels.py [--repeat N] [--format table|json]

Each case integrates one profile end to end with the default tolerances.
Besides timing, the script checks that both backends return bit-identical
nodes and states, so a speedup never hides a numerical change.
"""

import argparse
import json
import statistics
import time

import numpy as np

from ksselfsim import backend
from ksselfsim.cumulated import CumulatedParams, solve
from ksselfsim.wmodel import WParams, solve_w

CASES = [
    ("cumulated a=1 tau=1", lambda: solve(CumulatedParams(a=1.0, tau=1.0))),
    ("cumulated a=1e3 tau=0.05", lambda: solve(CumulatedParams(a=1e3, tau=0.05))),
    ("cumulated a=1e4 tau=10", lambda: solve(CumulatedParams(a=1e4, tau=10.0))),
    ("radial s=0 tau=1", lambda: solve_w(WParams(s=0.0, tau=1.0))),
    ("radial s=8 tau=0.1", lambda: solve_w(WParams(s=8.0, tau=0.1))),
]


def _time(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def _arrays(profile):
    return [np.asarray(v) for k, v in vars(profile).items() if isinstance(v, np.ndarray)]


def run(repeat):
    names = backend.available_backends()
    rows = []
    for label, fn in CASES:
        timings, outputs = {}, {}
        for name in names:
            with backend.use_backend(name):
                timings[name], outputs[name] = _time(fn, repeat)
        identical = None
        if len(outputs) == 2:
            a, b = (_arrays(outputs[n]) for n in names)
            identical = all(np.array_equal(x, y) for x, y in zip(a, b))
        row = {"case": label, "nodes": int(next(iter(outputs.values())).grid.size),
               "identical": identical}
        for name in names:
            row[f"{name}_ms"] = 1e3 * timings[name]
        if "compiled" in timings:
            row["speedup"] = timings["python"] / timings["compiled"]
        rows.append(row)
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--format", choices=("table", "json"), default="table")
    args = p.parse_args(argv)
    rows = run(args.repeat)
    if args.format == "json":
        print(json.dumps(rows, indent=2))
        return 0
    if "compiled" not in backend.available_backends():
        print("compiled extension not built; timing the Python kernels only")
    keys = list(rows[0])
    print("  ".join(f"{k:>26}" if k == "case" else f"{k:>12}" for k in keys))
    for r in rows:
        cells = []
        for k in keys:
            v = r[k]
            cells.append(f"{v:>26}" if k == "case" else f"{v:>12.4g}" if isinstance(v, float) else f"{str(v):>12}")
        print("  ".join(cells))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
