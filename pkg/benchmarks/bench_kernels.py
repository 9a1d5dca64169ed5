"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is called once before timing so numba compilation is excluded.
The two implementations are also checked for agreement on the same inputs.
"""

import argparse
import timeit

import numpy as np

from mdaopt import _kernels
from mdaopt.core import RngStream
from mdaopt.problems import two_spirals


def cases():
    gen = RngStream(0, 0).generator
    X = gen.normal(size=(2000, 20))
    y = np.where(gen.random(2000) < 0.5, -1.0, 1.0)
    w = gen.normal(size=20)
    idx = gen.choice(2000, size=256, replace=False).astype(np.int64)
    yield "logistic_loss_grad", (w, X, y, idx)

    Xs, labels = two_spirals(500, RngStream(0, 1).generator)
    n_hidden = 16
    n_params = n_hidden * 2 + n_hidden + 2 * n_hidden + 2
    params = gen.normal(size=n_params) * 0.5
    yield "mlp_loss_grad", (params, Xs, labels.astype(np.int64), np.arange(32, dtype=np.int64), n_hidden, 2)

    yield "alpha_inequality_violations", (1.0, 200_000)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        print("numba is not installed; only the numpy path exists")
        return
    print(f"{'kernel':<30}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}  agree")
    for name, call_args in cases():
        nb, npf = _kernels.numba_kernels[name], _kernels.numpy_kernels[name]
        out_nb, out_np = nb(*call_args), npf(*call_args)
        agree = all(np.allclose(a, b, rtol=1e-10, atol=1e-12) for a, b in zip(out_nb, out_np))
        t_nb = min(timeit.repeat(lambda: nb(*call_args), number=20, repeat=args.repeat)) / 20
        t_np = min(timeit.repeat(lambda: npf(*call_args), number=20, repeat=args.repeat)) / 20
        print(f"{name:<30}{t_nb * 1e3:>12.4f}{t_np * 1e3:>12.4f}{t_np / t_nb:>10.1f}  {agree}")


if __name__ == "__main__":
    main()
