"""Scaling, step-size, regularization and momentum sequences.

MDA uses ``beta_k = sqrt(k+1)`` and ``lambda_k = eta_k * sqrt(k+1)`` so that
the SGD-equivalent step ``lambda_k / beta_k`` equals ``eta_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .core import UsageError

LR_SHAPES = ("flat", "stagewise", "warmup_linear_decay", "inv_sqrt_t")


def beta(k):
    """MDA scaling coefficient sqrt(k+1)."""
    return np.sqrt(k + 1.0) if isinstance(k, np.ndarray) else math.sqrt(k + 1)


def lam(k, eta_k):
    """MDA dual step size eta_k * sqrt(k+1)."""
    return eta_k * beta(k)


def alpha_reg(k, eta_k):
    """Implicit L2 coefficient of MDA viewed as regularized SGD.

    Evaluates ``(sqrt(k+2) - sqrt(k+1)) / (eta_k * sqrt(k+2))`` through the
    rationalized numerator ``1 / (sqrt(k+2) + sqrt(k+1))``, which avoids the
    cancellation at large k. Works elementwise on arrays.
    """
    if isinstance(k, np.ndarray):
        a, b = np.sqrt(k + 2.0), np.sqrt(k + 1.0)
    else:
        a, b = math.sqrt(k + 2), math.sqrt(k + 1)
    return 1.0 / (eta_k * a * (a + b))


def _at(seq, k):
    return seq(k) if callable(seq) else seq[k]


def alpha_prop1(k: int, beta_seq: Sequence[float] | Callable = beta, lambda_seq: Sequence[float] | Callable | None = None) -> float:
    """Regularization weight ``(beta_k - beta_{k-1}) / lambda_k``.

    This is the coefficient under which a regularized SGD step reproduces a
    dual averaging step exactly. ``beta_{-1}`` is taken equal to ``beta_0`` so
    the value at k = 0 is 0. ``lambda_seq`` defaults to the flat MDA sequence
    with eta = 1.
    """
    if k < 0:
        raise UsageError("k must be >= 0")
    if lambda_seq is None:
        lambda_seq = lambda j: lam(j, 1.0)
    if k == 0:
        return 0.0
    return (_at(beta_seq, k) - _at(beta_seq, k - 1)) / _at(lambda_seq, k)


def effective_lr(k: int, lambda_k: float, beta_k: float) -> float:
    if beta_k <= 0:
        raise UsageError("beta_k must be positive")
    return lambda_k / beta_k


def nesterov_betas(T: int, beta0: float = 1.0) -> np.ndarray:
    """Classical dual averaging scaling ``beta_{k+1} = beta_k + 1/beta_k``."""
    out = np.empty(max(T, 1))
    out[0] = beta0
    for k in range(1, len(out)):
        out[k] = out[k - 1] + 1.0 / out[k - 1]
    return out


@dataclass(frozen=True)
class ScheduleSpec:
    """Learning-rate and momentum schedule over ``total_steps`` steps.

    ``stages`` is used by the ``stagewise`` shape: each entry
    ``(fraction, multiplier, ramp_fraction)`` moves the multiplier of
    ``base_lr`` linearly from its previous value to ``multiplier`` between
    steps ``fraction*T`` and ``(fraction + ramp_fraction)*T``. The ``inv_sqrt_t``
    shape ignores ``base_lr`` and uses ``1/sqrt(T)``.
    """

    base_lr: float = 0.1
    lr_shape: str = "flat"
    total_steps: int = 100
    c0: float = 1.0
    compensate_momentum: bool = False
    stages: tuple = ()
    warmup_steps: int = 0

    def __post_init__(self):
        if self.lr_shape not in LR_SHAPES:
            raise UsageError(f"unknown lr_shape {self.lr_shape!r}")
        if self.base_lr <= 0:
            raise UsageError("base_lr must be positive")
        if self.total_steps < 1:
            raise UsageError("total_steps must be >= 1")
        if not 0 < self.c0 <= 1:
            raise UsageError("c0 must lie in (0, 1]")
        for stage in self.stages:
            if len(stage) != 3 or stage[1] <= 0 or stage[2] < 0 or not 0 <= stage[0] <= 1:
                raise UsageError(f"bad stage {stage!r}")
        if self.lr_shape == "warmup_linear_decay" and not 0 <= self.warmup_steps < self.total_steps:
            raise UsageError("warmup_steps must lie in [0, total_steps)")

    def eta(self, k: int) -> float:
        T = self.total_steps
        if self.lr_shape == "flat":
            return self.base_lr
        if self.lr_shape == "inv_sqrt_t":
            return 1.0 / math.sqrt(T)
        if self.lr_shape == "warmup_linear_decay":
            w = self.warmup_steps
            if k < w:
                return self.base_lr * (k + 1) / w
            return self.base_lr * (T - k) / (T - w)
        mult = 1.0
        for frac, target, ramp in sorted(self.stages):
            start = frac * T
            end = start + ramp * T
            if k >= end:
                mult = target
            elif k >= start:
                mult = mult + (target - mult) * (k - start) / (end - start)
                break
            else:
                break
        return self.base_lr * mult

    def etas(self) -> np.ndarray:
        return np.array([self.eta(k) for k in range(self.total_steps)])


def momentum_schedule(spec: ScheduleSpec, k: int) -> float:
    """Averaging parameter c_k, raised as the step size falls and clamped at 1.

    The reference step size is ``base_lr`` (for ``inv_sqrt_t``: ``1/sqrt(T)``),
    which coincides with eta_0 for every shape without warmup.
    """
    if not spec.compensate_momentum:
        return spec.c0
    ref = spec.eta(0) if spec.lr_shape != "warmup_linear_decay" else spec.base_lr
    return min(1.0, spec.c0 * ref / spec.eta(k))


def scan_alpha_inequalities(eta: float, k_max: int) -> dict:
    """Count violations of the inequalities satisfied by :func:`alpha_reg`.

    Checks, for ``0 <= k <= k_max``: monotone decrease, the bound
    ``alpha_k <= 1/(2 eta (k+1))``, the difference bound
    ``alpha_{k+1} - alpha_k <= -1/(4 eta (k+2)^{3/2} sqrt(k+3))`` and the two
    sign products. Returns violation counts keyed by inequality name.
    """
    counts = _kernels.alpha_inequality_violations(float(eta), int(k_max))
    names = ("monotone", "upper_bound", "difference_bound", "sign_product_k", "sign_product_k1")
    return dict(zip(names, (int(c) for c in counts)))
