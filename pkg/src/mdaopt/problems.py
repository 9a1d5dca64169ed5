"""Desk-scale objectives with exact gradients and known constants."""

from __future__ import annotations

import math
from functools import cached_property

import numpy as np
from scipy import optimize

from . import _kernels
from .core import RngStream, UsageError, as_vector


class Problem:
    """Differentiable objective with a stochastic gradient oracle.

    Subclasses set ``n``, ``L``, ``sigma_sq``, ``x0`` and optionally
    ``x_star``; ``f_star`` is the reference optimal value used for gaps.
    """

    n: int
    L: float
    sigma_sq: float
    x0: np.ndarray
    x_star: np.ndarray | None = None
    stochastic = True

    def value(self, x) -> float:
        raise NotImplementedError

    def full_grad(self, x) -> np.ndarray:
        raise NotImplementedError

    def stoch_grad(self, x, rng: RngStream) -> np.ndarray:
        return self.full_grad(x)

    def second_moment(self, x) -> float | None:
        """Exact ``E |g(x, xi)|^2`` when available in closed form."""
        return None

    @property
    def f_star(self) -> float:
        return self.value(self.x_star)

    def describe(self) -> str:
        return type(self).__name__


class Quadratic(Problem):
    """``f(x) = 1/2 (x - x*)^T A (x - x*)`` with diagonal ``A``.

    Eigenvalues are log-spaced on ``[1, condition_number]`` (a single
    eigenvalue equal to ``condition_number`` when ``n == 1``). The oracle adds
    Normal(0, sigma^2/n) noise per coordinate so ``E|noise|^2 = sigma^2``.
    """

    def __init__(self, n: int = 10, condition_number: float = 10.0, sigma: float = 0.0, seed: int = 0):
        if n < 1 or condition_number < 1 or sigma < 0:
            raise UsageError("need n >= 1, condition_number >= 1, sigma >= 0")
        self.n = n
        self.condition_number = condition_number
        self.sigma = sigma
        self.seed = seed
        self.eig = np.geomspace(1.0, condition_number, n) if n > 1 else np.array([float(condition_number)])
        self.L = float(condition_number)
        self.sigma_sq = sigma**2
        rng = RngStream(seed, index=1)
        self.x_star = rng.normal(n)
        self.x0 = np.zeros(n)
        self.stochastic = sigma > 0

    def value(self, x) -> float:
        d = as_vector(x) - self.x_star
        return 0.5 * math.fsum(self.eig * d * d)

    def full_grad(self, x) -> np.ndarray:
        return self.eig * (as_vector(x) - self.x_star)

    def stoch_grad(self, x, rng: RngStream) -> np.ndarray:
        g = self.full_grad(x)
        if self.sigma > 0:
            g = g + rng.normal(self.n, self.sigma / math.sqrt(self.n))
        return g

    def second_moment(self, x) -> float:
        g = self.full_grad(x)
        return float(g @ g) + self.sigma_sq

    @property
    def f_star(self) -> float:
        return 0.0

    def describe(self) -> str:
        return f"quadratic(n={self.n}, condition_number={self.condition_number!r}, sigma={self.sigma!r}, seed={self.seed})"


def quadratic(n: int = 10, condition_number: float = 10.0, sigma: float = 0.0, seed: int = 0) -> Quadratic:
    return Quadratic(n, condition_number, sigma, seed)


class Logistic(Problem):
    """Mean binary logistic loss on seeded synthetic data.

    Labels come from a random hyperplane with a fraction ``label_noise`` of
    them flipped, so the minimizer is finite. ``L = max_i |a_i|^2 / 4 + l2``
    bounds the gradient Lipschitz constant. Each per-sample gradient has norm
    at most ``max_i |a_i|`` (without the l2 term), so ``sigma_sq`` is set to
    ``max_i |a_i|^2``, a valid bound on the oracle's second moment.
    """

    def __init__(self, n_samples: int = 200, n_features: int = 5, batch: int = 10, seed: int = 0, label_noise: float = 0.1, l2: float = 0.0):
        if not 1 <= batch <= n_samples:
            raise UsageError("need 1 <= batch <= n_samples")
        self.n_samples = n_samples
        self.n = n_features
        self.batch = batch
        self.seed = seed
        self.l2 = l2
        rng = RngStream(seed, index=1).generator
        self.A = rng.normal(size=(n_samples, n_features))
        w_true = rng.normal(size=n_features)
        y = np.sign(self.A @ w_true)
        y[y == 0] = 1.0
        flip = rng.random(n_samples) < label_noise
        y[flip] = -y[flip]
        self.y = y
        row_sq = float(np.max(np.sum(self.A**2, axis=1)))
        self.L = 0.25 * row_sq + l2
        self.sigma_sq = row_sq
        self.x0 = np.zeros(n_features)
        self.stochastic = batch < n_samples
        self._all = np.arange(n_samples)

    def _loss_grad(self, x, idx):
        x = as_vector(x)
        loss, grad = _kernels.logistic_loss_grad(x, self.A, self.y, idx)
        if self.l2:
            loss += 0.5 * self.l2 * float(x @ x)
            grad = grad + self.l2 * x
        return float(loss), grad

    def value(self, x) -> float:
        return self._loss_grad(x, self._all)[0]

    def full_grad(self, x) -> np.ndarray:
        return self._loss_grad(x, self._all)[1]

    def stoch_grad(self, x, rng: RngStream) -> np.ndarray:
        if self.batch == self.n_samples:
            return self.full_grad(x)
        return self._loss_grad(x, rng.choice(self.n_samples, self.batch))[1]

    @cached_property
    def x_star(self) -> np.ndarray:
        res = optimize.minimize(
            lambda w: self._loss_grad(w, self._all),
            self.x0,
            jac=True,
            method="L-BFGS-B",
            options={"gtol": 1e-12, "ftol": 1e-15, "maxiter": 10_000},
        )
        return res.x

    def describe(self) -> str:
        return f"logistic(n_samples={self.n_samples}, n_features={self.n}, batch={self.batch}, seed={self.seed})"


def logistic(n_samples: int = 200, n_features: int = 5, batch: int = 10, seed: int = 0, **kw) -> Logistic:
    return Logistic(n_samples, n_features, batch, seed, **kw)


class Rosenbrock(Problem):
    """Chained Rosenbrock ``sum_i 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2``.

    ``L = 7402`` is a Gershgorin bound on the Hessian over ``[-2, 2]^n``:
    the diagonal is at most ``1200*4 + 400*2 + 202`` and each row has at most
    two off-diagonal entries of size ``400*2``.
    """

    stochastic = False

    def __init__(self, n: int = 2):
        if n < 2:
            raise UsageError("rosenbrock needs n >= 2")
        self.n = n
        self.L = 7402.0
        self.sigma_sq = 0.0
        self.x_star = np.ones(n)
        self.x0 = np.zeros(n)

    def value(self, x) -> float:
        x = as_vector(x)
        return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))

    def full_grad(self, x) -> np.ndarray:
        x = as_vector(x)
        g = np.zeros_like(x)
        r = x[1:] - x[:-1] ** 2
        g[:-1] = -400.0 * x[:-1] * r - 2.0 * (1.0 - x[:-1])
        g[1:] += 200.0 * r
        return g

    @property
    def f_star(self) -> float:
        return 0.0

    def describe(self) -> str:
        return f"rosenbrock(n={self.n})"


def rosenbrock(n: int = 2) -> Rosenbrock:
    return Rosenbrock(n)


def two_spirals(n_samples: int, rng: np.random.Generator, noise: float = 0.2):
    """Two interleaved 2-D spiral arms with labels 0/1.

    Radius is uniform on [0, 1]; the angle is ``4 r + pi * label`` plus
    Normal(0, noise^2) jitter.
    """
    labels = np.arange(n_samples) % 2
    r = rng.random(n_samples)
    theta = 4.0 * r + math.pi * labels + noise * rng.normal(size=n_samples)
    X = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    return X, labels.astype(np.int64)


class TinyMLP(Problem):
    """2 -> n_hidden (tanh) -> 2 softmax classifier on two spirals.

    Parameters are flattened as ``W1 (h, 2), b1 (h), W2 (2, h), b2 (2)``. The
    loss is the mean cross-entropy; minibatches are drawn without replacement.
    ``f_star`` is 0 (a lower bound; cross-entropy is nonnegative) and ``L`` and
    ``sigma_sq`` are unknown (NaN).
    """

    n_classes = 2

    def __init__(self, n_hidden: int = 16, n_samples: int = 500, batch: int = 32, seed: int = 0, X=None, labels=None):
        if n_hidden < 2:
            raise UsageError("n_hidden must be >= 2")
        gen = RngStream(seed, index=1).generator
        if X is None:
            X, labels = two_spirals(n_samples, gen)
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.n_samples = len(self.labels)
        if not 1 <= batch <= self.n_samples:
            raise UsageError("need 1 <= batch <= n_samples")
        self.n_hidden = n_hidden
        self.batch = batch
        self.seed = seed
        d_in = self.X.shape[1]
        self.n = n_hidden * d_in + n_hidden + self.n_classes * n_hidden + self.n_classes
        self.L = math.nan
        self.sigma_sq = math.nan
        w1 = gen.normal(size=n_hidden * d_in) / math.sqrt(d_in)
        w2 = gen.normal(size=self.n_classes * n_hidden) / math.sqrt(n_hidden)
        self.x0 = np.concatenate([w1, np.zeros(n_hidden), w2, np.zeros(self.n_classes)])
        self.stochastic = batch < self.n_samples
        self._all = np.arange(self.n_samples)

    def _loss_grad(self, x, idx):
        loss, grad = _kernels.mlp_loss_grad(as_vector(x), self.X, self.labels, idx, self.n_hidden, self.n_classes)
        return float(loss), grad

    def value(self, x) -> float:
        return self._loss_grad(x, self._all)[0]

    def full_grad(self, x) -> np.ndarray:
        return self._loss_grad(x, self._all)[1]

    def stoch_grad(self, x, rng: RngStream) -> np.ndarray:
        if self.batch == self.n_samples:
            return self.full_grad(x)
        return self._loss_grad(x, np.sort(rng.choice(self.n_samples, self.batch)))[1]

    @property
    def f_star(self) -> float:
        return 0.0

    def describe(self) -> str:
        return f"tiny_mlp(n_hidden={self.n_hidden}, n_samples={self.n_samples}, batch={self.batch}, seed={self.seed})"


def tiny_mlp(n_hidden: int = 16, n_samples: int = 500, batch: int = 32, seed: int = 0) -> TinyMLP:
    return TinyMLP(n_hidden, n_samples, batch, seed)


def fd_gradient(problem, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of ``problem.value`` (or a plain callable)."""
    if h <= 0:
        raise UsageError("h must be positive")
    f = problem if callable(problem) else problem.value
    x = as_vector(x)
    out = np.empty_like(x)
    for i in range(len(x)):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        # divide by the step actually taken, which differs from 2h by rounding
        out[i] = (f(xp) - f(xm)) / (xp[i] - xm[i])
    return out


PROBLEMS = {
    "quadratic": quadratic,
    "logistic": logistic,
    "rosenbrock": rosenbrock,
    "tiny_mlp": tiny_mlp,
}
