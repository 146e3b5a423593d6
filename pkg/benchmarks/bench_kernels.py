"""Compiled vs pure-numpy objective kernel.

Runs both backends on the same batch of relevant-cell marginals (the shape a
verification step produces) and reports best-of-N wall time and the largest
disagreement between them.

    python benchmarks/bench_kernels.py --items 4096 --repeat 5
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mrac import _kernels
from mrac.belief_core import ObsModel
from mrac.planning import Problem, joint_actions
from mrac.scenario_sar import Grid


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--items", type=int, default=4096, help="belief rows per call")
    ap.add_argument("--horizon", type=int, default=1, help="planning horizon L")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    m = ObsModel()
    problem = Problem(Grid(10, 10), ((4, 4), (6, 5)), m, joint_actions(args.horizon, 2))
    rng = np.random.default_rng(args.seed)
    cond = rng.uniform(0.05, 0.95, size=(args.items, problem.relevant_cells.size))
    run = lambda backend: _kernels.objective_deltas(  # noqa: E731
        cond, problem.visits, 2, m.p_detect, m.p_false_alarm, backend=backend
    )

    if _kernels._HAVE_NUMBA:
        run("numba")  # compile outside the timed region
    rows = []
    for backend in ("numba", "numpy"):
        if backend == "numba" and not _kernels._HAVE_NUMBA:
            continue
        t, out = best_of(lambda: run(backend), args.repeat)
        rows.append((backend, t, out))

    ref = rows[-1][2]
    print(f"items={args.items} actions={len(problem.actions)} reads/action={problem.visits.shape[1]}")
    for backend, t, out in rows:
        err = float(np.max(np.abs(out - ref)))
        print(f"{backend:>6}: {t * 1e3:9.2f} ms   max|diff vs numpy| = {err:.2e}")
    if len(rows) == 2:
        print(f"speed-up: {rows[1][1] / rows[0][1]:.1f}x")


if __name__ == "__main__":
    main()
