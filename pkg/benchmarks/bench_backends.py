"""Compare the numba and numpy state-vector backends.

Two measurements:

* kernel throughput: random circuits of one- and two-qubit gates at several
  register widths, timed in-process with an explicit backend argument;
* the full N=8 Loschmidt pipeline (interferometric circuits, 50 time
  points, 16000 shots per basis), run in a subprocess per backend because
  the default backend is fixed at import from ``DQPTSIM_BACKEND``.

Usage::

    python benchmarks/bench_backends.py [--widths 9 14 18] [--gates 400] [--skip-pipeline]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from dqptsim import simulator
from dqptsim.circuit import Circuit, Gate

PIPELINE_TARGET_S = 60.0

_PIPELINE_SNIPPET = """
import json, time
import numpy as np
from dqptsim import _kernels, dqpt
from dqptsim.model import ModelParams
params = ModelParams({N}, {m})
grid = np.linspace(0.0, 4.0 / {m}, {points})
dqpt.loschmidt_series(params, grid[:1], 100, 0)  # compile outside the timing
start = time.perf_counter()
est = dqpt.loschmidt_series(params, grid, {shots}, {seed})
elapsed = time.perf_counter() - start
print(json.dumps({{"backend": _kernels.BACKEND, "seconds": elapsed,
                  "values": [[e.value.real, e.value.imag] for e in est]}}))
"""


def random_circuit(width: int, n_gates: int, rng: np.random.Generator) -> Circuit:
    gates = []
    for _ in range(n_gates):
        roll = rng.integers(4)
        a, b = (int(x) for x in rng.choice(width, 2, replace=False))
        angle = float(rng.uniform(-np.pi, np.pi))
        if roll == 0:
            gates.append(Gate("H", (a,)))
        elif roll == 1:
            gates.append(Gate("RY", (a,), angle))
        elif roll == 2:
            gates.append(Gate("CNOT", (a, b)))
        else:
            gates.append(Gate("RZZ", (a, b), angle))
    return Circuit(width, gates, None, 0.0, {})


def best_time(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def bench_kernels(widths, n_gates: int, repeats: int) -> list[dict]:
    rng = np.random.default_rng(0)
    rows = []
    simulator.apply(random_circuit(3, 8, rng), backend="numba")  # compile
    for width in widths:
        circ = random_circuit(width, n_gates, rng)
        outs = {b: simulator.apply(circ, backend=b) for b in ("numba", "numpy")}
        row = {"width": width, "gates": n_gates,
               "max_abs_diff": float(np.max(np.abs(outs["numba"] - outs["numpy"])))}
        for b in ("numba", "numpy"):
            row[f"{b}_s"] = best_time(lambda: simulator.apply(circ, backend=b), repeats)
        row["speedup"] = row["numpy_s"] / row["numba_s"]
        rows.append(row)
    return rows


def bench_pipeline(backend: str, N: int, m: float, points: int, shots: int, seed: int) -> dict:
    code = _PIPELINE_SNIPPET.format(N=N, m=m, points=points, shots=shots, seed=seed)
    env = dict(os.environ, DQPTSIM_BACKEND=backend, DQPTSIM_WORKERS="1")
    done = subprocess.run([sys.executable, "-c", code], env=env, check=True,
                          capture_output=True, text=True)
    return json.loads(done.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--widths", type=int, nargs="+", default=[9, 14, 18])
    ap.add_argument("--gates", type=int, default=400)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--points", type=int, default=50)
    ap.add_argument("--shots", type=int, default=16000)
    ap.add_argument("--skip-pipeline", action="store_true")
    args = ap.parse_args(argv)

    print("kernel throughput (best of %d)" % args.repeats)
    print(f"{'width':>5} {'gates':>6} {'numba s':>10} {'numpy s':>10} {'speedup':>8} {'max diff':>9}")
    for r in bench_kernels(args.widths, args.gates, args.repeats):
        print(f"{r['width']:>5} {r['gates']:>6} {r['numba_s']:>10.4f} {r['numpy_s']:>10.4f} "
              f"{r['speedup']:>8.2f} {r['max_abs_diff']:>9.1e}")

    if args.skip_pipeline:
        return 0
    print(f"\nN=8 Loschmidt pipeline, {args.points} points, {args.shots} shots per basis "
          f"(target {PIPELINE_TARGET_S:.0f} s)")
    results = {b: bench_pipeline(b, 8, 0.8, args.points, args.shots, 0) for b in ("numba", "numpy")}
    for b, r in results.items():
        verdict = "within" if r["seconds"] <= PIPELINE_TARGET_S else "over"
        print(f"  {b:>5}: {r['seconds']:8.2f} s ({verdict} target)")
    same = results["numba"]["values"] == results["numpy"]["values"]
    diff = max(abs(complex(*a) - complex(*b)) for a, b in
               zip(results["numba"]["values"], results["numpy"]["values"]))
    print(f"  identical estimates across backends: {same} (max difference {diff:.1e})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
