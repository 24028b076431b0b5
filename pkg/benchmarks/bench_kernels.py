"""Compiled vs pure-Python kernel timings.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel is run on the same inputs through both backends; the outputs are
compared before timing so a fast-but-wrong build is reported, not hidden.
"""
from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from stochlb._kernels import _pure

try:
    from stochlb._kernels import _ext
except ImportError:
    _ext = None


def _dist(rng, k, vmax=10.0):
    v = np.sort(rng.uniform(0, vmax, k))
    return v, rng.dirichlet(np.ones(k))


def cases(rng):
    """Small supports are what the solver sees thousands of times per run;
    the large ones show the asymptotic per-element cost."""
    out = {}
    for k in (4, 5000):
        v, q = _dist(rng, k)
        out[f"merge_sorted {k}"] = ("merge_sorted", (v, q, 1e-12))
        out[f"l_function {k}"] = ("l_function", (v, q, 0.7, 3.0))
        out[f"log_mgf {k}"] = ("log_mgf", (v, q, np.log(16.0)))
    for k in (4, 60):
        va, pa = _dist(rng, k)
        vb, pb = _dist(rng, k)
        out[f"convolve {k}x{k}"] = ("convolve", (va, pa, vb, pb, 1e-12))
    for m in (3, 6):
        loads = [_dist(rng, 6) for _ in range(m)]
        for p in (2.0, 3.0):
            out[f"expected_norm 6^{m} p={p:g}"] = ("expected_norm", ([v for v, _ in loads], [q for _, q in loads], p))
    return out


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(np.allclose(x, y, rtol=1e-12, atol=0) for x, y in zip(a, b))
    return bool(np.isclose(a, b, rtol=1e-12, atol=0))


def _best(f, args, repeat) -> float:
    """Seconds per call, best of ``repeat`` batches sized to ~20 ms."""
    timer = timeit.Timer(lambda: f(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=max(1, number // 10))) / max(1, number // 10)


def run(repeat: int = 5, seed: int = 0) -> list[dict]:
    rng = np.random.default_rng(seed)
    rows = []
    for label, (name, args) in cases(rng).items():
        row = {"kernel": label}
        f_py = getattr(_pure, name)
        row["python_s"] = _best(f_py, args, repeat)
        if _ext is not None:
            f_cy = getattr(_ext, name)
            row["agree"] = _same(f_py(*args), f_cy(*args))
            row["cython_s"] = _best(f_cy, args, repeat)
            row["speedup"] = row["python_s"] / row["cython_s"]
        rows.append(row)
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    rows = run(args.repeat, args.seed)
    if _ext is None:
        print("compiled extension not built; pure-Python timings only", file=sys.stderr)
    print(f"{'kernel':<28}{'python (us)':>12}{'cython (us)':>13}{'speedup':>9}  agree")
    for r in rows:
        cy = f"{1e6 * r['cython_s']:13.3f}{r['speedup']:9.1f}  {r['agree']}" if "cython_s" in r else ""
        print(f"{r['kernel']:<28}{1e6 * r['python_s']:12.3f}{cy}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0 if all(r.get("agree", True) for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
