"""Time the hot kernels under both backends and check they agree.

Each backend runs in its own interpreter because HSFL_KERNELS is read at
import time.  The numba run is timed after a warm-up call so compilation is
excluded.

    python benchmarks/bench_kernels.py [--repeat 3] [--csv out.csv]
"""

import argparse
import csv
import json
import os
import subprocess
import sys

WORKER = r"""
import json, time
import numpy as np
from hsfl import BACKEND
from hsfl.freq import FreqSubproblem, solve_freq
from hsfl.power import solve_power
from hsfl.shortterm import optimize_round
from hsfl.verify import random_link_problem, small_scenario
from hsfl.channel import sample_batch

repeat = int(__import__("sys").argv[1])
rng = np.random.default_rng(0)
links = [random_link_problem(rng) for _ in range(30)]
freqs = [FreqSubproblem(rng.uniform(0, 5, 4), rng.uniform(0.1, 10, 4) * 1e12, 1e12)
         for _ in range(200)]
scen = small_scenario(k=4, subchannels=6)
envs = sample_batch(scen.stats, 1, 5)
cut = np.array([0, 1, 2, 3])

def bench_power():
    return [solve_power(p).objective for p in links]

def bench_freq():
    return [solve_freq(s).objective for s in freqs]

def bench_round():
    return [optimize_round(scen.model, scen.sys, e, cut).latency for e in envs]

out = {"backend": BACKEND, "results": {}}
for name, fn in (("bnb_link", bench_power), ("freq_dual", bench_freq),
                 ("optimize_round", bench_round)):
    values = fn()  # warm-up (and compilation under numba)
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    out["results"][name] = {"seconds": best, "values": values}
print(json.dumps(out))
"""


def run(backend, repeat):
    env = dict(os.environ, HSFL_KERNELS=backend)
    proc = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--csv", default=None)
    args = parser.parse_args()

    fast, slow = run("numba", args.repeat), run("numpy", args.repeat)
    rows = []
    print(f"{'kernel':16s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s} {'max rel diff':>13s}")
    for name in fast["results"]:
        a, b = fast["results"][name], slow["results"][name]
        diff = max(abs(x - y) / max(abs(y), 1e-300) for x, y in zip(a["values"], b["values"]))
        speedup = b["seconds"] / a["seconds"]
        rows.append([name, a["seconds"], b["seconds"], speedup, diff])
        print(f"{name:16s} {a['seconds']:10.4f} {b['seconds']:10.4f} {speedup:8.1f} {diff:13.2e}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kernel", "numba_seconds", "numpy_seconds", "speedup", "max_rel_diff"])
            writer.writerows(rows)


if __name__ == "__main__":
    main()
