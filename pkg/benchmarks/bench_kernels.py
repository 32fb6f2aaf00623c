"""Time the compiled theta-scheme kernel against the numpy/scipy fallback.

Usage: python3 benchmarks/bench_kernels.py [--sizes 256 1024 4096] [--steps 2048]

Both backends march the same degenerate (gamma = 4) operator; the script
prints one CSV row per size with the best-of-``repeat`` wall time of each
backend, their ratio and the largest difference between the trajectories.
"""

import argparse
import csv
import sys
import time

import numpy as np

from dul import DegenerateCoefficient, DomainGeometry
from dul.solver import ProblemSpec, assemble, build_mesh
from dul.solver import _fallback

try:
    from dul.solver import _kernels
except ImportError:
    _kernels = None


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(n_nodes, steps, repeat=3):
    geom = DomainGeometry.interval()
    mesh = build_mesh(geom, n_nodes)
    spec = ProblemSpec(DegenerateCoefficient(4.0), 0.5, initial=lambda x: np.sin(np.pi * x))
    asm = assemble(spec, mesh)
    u0 = spec.initial(mesh.nodes)
    m = np.ones(steps + 1)
    dt = spec.T / steps
    args = (asm.sub, asm.diag, asm.sup, asm.r, m, dt, 1.0, u0)
    t_py, (U_py, _) = _best(lambda: _fallback.theta_march(*args), repeat)
    if _kernels is None:
        return t_py, float("nan"), float("nan")
    t_c, (U_c, _) = _best(lambda: _kernels.theta_march(*args), repeat)
    return t_py, t_c, float(np.max(np.abs(np.asarray(U_c) - U_py)))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[256, 1024, 4096])
    parser.add_argument("--steps", type=int, default=2048)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; timing the fallback only", file=sys.stderr)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["n_nodes", "steps", "fallback_s", "compiled_s", "speedup", "max_abs_diff"])
    for n in args.sizes:
        t_py, t_c, diff = bench(n, args.steps, args.repeat)
        writer.writerow([n, args.steps, f"{t_py:.4f}", f"{t_c:.4f}", f"{t_py / t_c:.1f}", f"{diff:.2e}"])


if __name__ == "__main__":
    main()
