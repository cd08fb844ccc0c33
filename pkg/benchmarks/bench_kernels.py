"""Compare the compiled and numpy kernel backends.

Times the two per-replication kernels on small-n/large-p shapes typical of
the simulations, then one full Monte Carlo cell under each backend (each in
a fresh interpreter, since the backend is fixed at import).

    python benchmarks/bench_kernels.py [--reps 2000] [--cell-reps 2000]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from meanshrink import _backend

SHAPES = [(10, 100), (20, 100), (50, 400), (100, 1000)]

CELL = """
import json, time
from meanshrink import Design, _backend, run_monte_carlo
d = Design(p=100, n=10, sigma="sigma1", mu="mu1", tau=0.5,
           loss_q="inverse-diag", q_input="estimated-diag")
t = time.perf_counter()
rep = run_monte_carlo(d, ["mean", "js", "bb", "tong", "proposed", "oracle"], {R}, 42)
print(json.dumps({{"backend": _backend.BACKEND, "seconds": time.perf_counter() - t,
                   "proposed": rep.row("proposed").risk}}))
"""


def bench_kernels(reps):
    rng = np.random.default_rng(0)
    rows = []
    for n, p in SHAPES:
        X = rng.standard_normal((n, p))
        xbar = X.mean(axis=0)
        q = rng.uniform(0.5, 2.0, p)
        for name in _backend.available():
            k = _backend.get(name)
            t_mv = min(timeit.repeat(lambda: k.col_mean_var(X), number=reps, repeat=3)) / reps
            t_qs = min(timeit.repeat(lambda: k.centered_qsums(X, xbar, q), number=reps, repeat=3)) / reps
            rows.append((n, p, name, t_mv * 1e6, t_qs * 1e6))
    return rows


def bench_cell(R):
    out = []
    for name in _backend.available():
        env = dict(os.environ, MEANSHRINK_BACKEND=name)
        res = subprocess.run([sys.executable, "-c", CELL.format(R=R)], env=env,
                             capture_output=True, text=True, check=True)
        out.append(json.loads(res.stdout))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=2000, help="kernel calls per timing")
    ap.add_argument("--cell-reps", type=int, default=2000, help="MC replications for the full cell")
    args = ap.parse_args(argv)

    print(f"{'n':>4} {'p':>5} {'backend':>9} {'mean/var us':>12} {'qsums us':>10}")
    for n, p, name, a, b in bench_kernels(args.reps):
        print(f"{n:>4} {p:>5} {name:>9} {a:>12.2f} {b:>10.2f}")
    print()
    cells = bench_cell(args.cell_reps)
    for c in cells:
        print(f"MC cell (sigma1, n=10, p=100, R={args.cell_reps}) {c['backend']:>9}: "
              f"{c['seconds']:.2f} s  proposed risk {c['proposed']:.4f}")
    if len({round(c["proposed"], 12) for c in cells}) > 1:
        print("warning: backends disagree on the cell result")


if __name__ == "__main__":
    main()
