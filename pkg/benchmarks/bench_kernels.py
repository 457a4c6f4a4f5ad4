"""Time the hot kernels under numba and under the pure-numpy fallback.

Each backend runs in its own interpreter because the choice is fixed at
import time by ``UQCOV_DISABLE_NUMBA``::

    python benchmarks/bench_kernels.py            # both backends, side by side
    python benchmarks/bench_kernels.py --worker   # current backend only, JSON out
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best_of(fn, repeat):
    fn()  # warm-up; includes JIT compilation on the numba path
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    from uqcov import intervals, metrics, shift
    from uqcov.models import _nn

    rng = np.random.default_rng(0)
    sizes = _nn.layer_sizes(13, (64, 64))
    x = rng.normal(size=(400, 13))
    y = rng.normal(size=400)
    params = _nn.init_params(sizes, rng)
    masks = _nn.dropout_masks(rng, 400, sizes, 0.1, False)
    wmask = _nn.weight_mask(sizes)
    perm = rng.permutation(400)

    def mlp_epoch():
        p = params.copy()
        _nn._mlp_epoch(p, np.zeros_like(p), np.zeros_like(p), 0, sizes, x, y, perm, masks, 32, 1e-3, 1e-4, wmask)

    npar = params.size
    theta0 = np.concatenate([params, np.full(npar, -5.0), [0.0]])
    eps = rng.standard_normal((13, npar))
    ones = np.ones((400, 128))

    def svi_epoch():
        t = theta0.copy()
        _nn._svi_epoch(t, np.zeros_like(t), np.zeros_like(t), 0, sizes, x, y, perm, eps, ones, 32, 1e-3,
                       np.ones(npar), 1.0, 1.0 / 400)

    probs = rng.dirichlet(np.ones(10), size=20_000)

    def sets():
        intervals.prediction_sets(probs, 0.05)

    labels = rng.integers(0, 10, 20_000)

    def ece():
        metrics.ece(probs, labels)

    images = rng.uniform(size=(1000, 28, 28))

    def rotate():
        shift.rotate_batch(images, 30.0)

    return {"mlp_epoch": mlp_epoch, "svi_epoch": svi_epoch, "prediction_sets": sets, "ece": ece,
            "rotate_batch": rotate}


def worker(repeat):
    from uqcov._accel import backend

    out = {name: _best_of(fn, repeat) for name, fn in cases().items()}
    print(json.dumps({"backend": backend(), "seconds": out}))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--worker", action="store_true", help="time the current backend and print JSON")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if args.worker:
        worker(args.repeat)
        return 0
    results = {}
    for flag in ("0", "1"):
        env = dict(os.environ, UQCOV_DISABLE_NUMBA=flag)
        proc = subprocess.run([sys.executable, __file__, "--worker", "--repeat", str(args.repeat)],
                              env=env, capture_output=True, text=True, check=True)
        res = json.loads(proc.stdout.strip().splitlines()[-1])
        results[res["backend"]] = res["seconds"]
    names = list(next(iter(results.values())))
    print(f"{'kernel':<18}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for n in names:
        a = results.get("numba", {}).get(n, float("nan"))
        b = results["numpy"][n]
        print(f"{n:<18}{a * 1e3:>12.2f}{b * 1e3:>12.2f}{b / a:>10.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
