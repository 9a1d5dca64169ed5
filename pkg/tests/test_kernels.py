import os
import subprocess
import sys

import numpy as np
import pytest

from mdaopt import _kernels
from mdaopt.problems import two_spirals

pytestmark = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def test_logistic_parity():
    gen = np.random.default_rng(0)
    X = gen.normal(size=(300, 7))
    y = np.where(gen.random(300) < 0.5, -1.0, 1.0)
    idx = gen.choice(300, 40, replace=False).astype(np.int64)
    for scale in (0.1, 1.0, 300.0):
        w = gen.normal(size=7) * scale
        l1, g1 = _kernels.numba_kernels["logistic_loss_grad"](w, X, y, idx)
        l2, g2 = _kernels.numpy_kernels["logistic_loss_grad"](w, X, y, idx)
        assert l1 == pytest.approx(l2, rel=1e-12)
        np.testing.assert_allclose(g1, g2, rtol=1e-11, atol=1e-14)


def test_mlp_parity():
    gen = np.random.default_rng(1)
    X, labels = two_spirals(100, gen)
    h = 6
    params = gen.normal(size=h * 2 + h + 2 * h + 2)
    idx = np.arange(0, 100, 3, dtype=np.int64)
    l1, g1 = _kernels.numba_kernels["mlp_loss_grad"](params, X, labels, idx, h, 2)
    l2, g2 = _kernels.numpy_kernels["mlp_loss_grad"](params, X, labels, idx, h, 2)
    assert l1 == pytest.approx(l2, rel=1e-12)
    np.testing.assert_allclose(g1, g2, rtol=1e-10, atol=1e-14)


@pytest.mark.parametrize("eta", [0.1, 1.0, 10.0])
def test_inequality_scan_parity(eta):
    a = _kernels.numba_kernels["alpha_inequality_violations"](eta, 20_000)
    b = _kernels.numpy_kernels["alpha_inequality_violations"](eta, 20_000)
    assert tuple(a) == tuple(b) == (0, 0, 0, 0, 0)


def test_env_flag_selects_numpy_path():
    env = dict(os.environ, MDAOPT_DISABLE_NUMBA="1")
    code = "from mdaopt import _kernels as k; print(k.USE_NUMBA, k.logistic_loss_grad is k.numpy_kernels['logistic_loss_grad'])"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "True"]
