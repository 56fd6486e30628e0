"""Time the compiled graph kernels against the pure-Python reference ones.

    python3 benchmarks/bench_kernels.py [--res 128] [--repeat 3]

Both backends run on the same transition graph and their outputs are compared
before any timing is printed.
"""
from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from conleykit import _kernels_py
from conleykit.cubical import CubeSet, Grid, transition_graph
from conleykit.flow import FlowConfig, VectorFieldSpec

try:
    from conleykit import _kernels as compiled
except ImportError:
    compiled = None


def _best(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases(res: int):
    f = VectorFieldSpec.catalog("SADDLE2")
    g = Grid((-1.0, -1.0), (1.0, 1.0), (res, res))
    G = transition_graph(f, FlowConfig(), g)
    full = CubeSet.full(g).u8()
    seeds = np.zeros(g.ncubes, dtype=np.uint8)
    seeds[g.ncubes // 2 + res // 2] = 1
    w = g.widths
    corners = g.lo + g.multi(np.arange(g.ncubes)) * w
    lo_idx = np.floor((corners - 0.3 * w - g.lo) / w).astype(np.int64)
    hi_idx = np.ceil((corners + 1.3 * w - g.lo) / w).astype(np.int64) - 1
    resv = np.array(g.res, dtype=np.int64)
    return {
        "forward_closure": lambda k: k.forward_closure(G.indptr, G.indices, full, seeds),
        "survive(16)": lambda k: k.survive(G.indptr, G.indices, full, 16),
        "trim": lambda k: k.trim(G.indptr, G.indices, G.rindptr, G.rindices, full),
        "box_adjacency": lambda k: k.box_adjacency(lo_idx, hi_idx, resv),
    }


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--res", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
        return 1
    print(f"grid {args.res}x{args.res}, best of {args.repeat}")
    print(f"{'kernel':<16} {'python [s]':>11} {'cython [s]':>11} {'speedup':>8}")
    ok = True
    for name, fn in cases(args.res).items():
        tp, op = _best(lambda: fn(_kernels_py), args.repeat)
        tc, oc = _best(lambda: fn(compiled), args.repeat)
        same = _same(op, oc)
        ok &= same
        flag = "" if same else "  OUTPUT MISMATCH"
        print(f"{name:<16} {tp:>11.4f} {tc:>11.4f} {tp / max(tc, 1e-9):>7.1f}x{flag}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
