"""Compare the compiled and pure-Python kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--n 20000] [--repeat 3]

Each workload runs on both backends with the same inputs; the table lists
the best wall time of ``--repeat`` runs and the largest absolute
difference between the two results.
"""
import argparse
import time

import numpy as np

from hostsec import _backend
from hostsec.factor.polychoric import dataset_thresholds
from hostsec.pipeline.run import feature_dataset
from hostsec.pipeline.synth import default_spec, synth_generate


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def workloads(n):
    rng = np.random.default_rng(0)
    pts = rng.uniform(-3, 3, size=(2000, 2))
    rs = rng.uniform(-0.99, 0.99, size=2000)
    world = synth_generate(default_spec(n, max(n // 50, 1), seed=0))
    data = feature_dataset(world.dataset.codes).compact()
    th = dataset_thresholds(data).padded()
    codes = np.ascontiguousarray(data.codes.T, dtype=np.int32)
    ncat = np.asarray(data.category_counts, dtype=np.int32)
    table = np.array([[400.0, 120.0, 30.0], [150.0, 500.0, 160.0], [20.0, 110.0, 410.0]])
    tx, ty = np.array([-0.4, 0.6]), np.array([-0.5, 0.5])

    return {
        "bvn_cdf x2000": lambda k: np.array([k.bvn_cdf(h, q, r) for (h, q), r in zip(pts, rs)]),
        "polychoric 3x3 table": lambda k: np.array(k.polychoric_table(table, tx, ty)[:1]),
        f"polychoric 15 vars, n={n}": lambda k: k.polychoric_codes(codes, ncat, th)[0],
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20_000, help="domains in the synthetic feature matrix")
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args(argv)

    names = _backend.available()
    if "cython" not in names:
        print("compiled backend not built; only the pure-Python timings are shown")
    kernels = {name: _backend.load(name) for name in names}
    print(f"{'workload':<32}" + "".join(f"{n + ' (s)':>14}" for n in names) + f"{'speedup':>10}{'max |diff|':>12}")
    for label, fn in workloads(a.n).items():
        times, outs = [], []
        for name in names:
            t, out = best_of(lambda: fn(kernels[name]), a.repeat)
            times.append(t)
            outs.append(np.asarray(out))
        speed = f"{times[-1] / times[0]:.1f}x" if len(times) == 2 else "-"
        diff = f"{np.max(np.abs(outs[0] - outs[-1])):.1e}" if len(outs) == 2 else "-"
        print(f"{label:<32}" + "".join(f"{t:>14.4f}" for t in times) + f"{speed:>10}{diff:>12}")


if __name__ == "__main__":
    main()
