"""Step functions for dual averaging, MDA, SGD variants and Adam, plus the run loop.

Each ``*_step`` is a pure transition: it returns a new state and never
modifies its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .core import GENERATOR_NAME, NonFiniteError, RngStream, RunTrace, TraceRow, UsageError, all_finite, as_vector
from .schedules import ScheduleSpec, alpha_prop1, momentum_schedule, nesterov_betas

OPTIMIZERS = ("sgd", "sgdm", "spa", "da", "mda", "reg_sgd", "adam")


def _check_grad(g: np.ndarray, k: int) -> np.ndarray:
    g = as_vector(g)
    if not all_finite(g):
        raise NonFiniteError(k, "gradient")
    return g


@dataclass(frozen=True)
class DaState:
    s: np.ndarray
    x0: np.ndarray
    x: np.ndarray
    k: int = 0

    @classmethod
    def start(cls, x0) -> "DaState":
        x0 = as_vector(x0).copy()
        return cls(s=np.zeros_like(x0), x0=x0, x=x0.copy(), k=0)


@dataclass(frozen=True)
class MdaState:
    s: np.ndarray
    z: np.ndarray
    x: np.ndarray
    x0: np.ndarray
    k: int = 0

    @classmethod
    def start(cls, x0) -> "MdaState":
        x0 = as_vector(x0).copy()
        return cls(s=np.zeros_like(x0), z=x0.copy(), x=x0.copy(), x0=x0, k=0)


@dataclass(frozen=True)
class SgdmState:
    m: np.ndarray
    x: np.ndarray

    @classmethod
    def start(cls, x0) -> "SgdmState":
        x0 = as_vector(x0).copy()
        return cls(m=np.zeros_like(x0), x=x0)


@dataclass(frozen=True)
class SpaState:
    z: np.ndarray
    x: np.ndarray

    @classmethod
    def start(cls, x0) -> "SpaState":
        x0 = as_vector(x0).copy()
        return cls(z=x0.copy(), x=x0)


@dataclass(frozen=True)
class RegSgdState:
    x: np.ndarray
    x0: np.ndarray
    k: int = 0

    @classmethod
    def start(cls, x0) -> "RegSgdState":
        x0 = as_vector(x0).copy()
        return cls(x=x0.copy(), x0=x0, k=0)


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    x: np.ndarray
    k: int = 0

    @classmethod
    def start(cls, x0) -> "AdamState":
        x0 = as_vector(x0).copy()
        return cls(m=np.zeros_like(x0), v=np.zeros_like(x0), x=x0, k=0)


def da_step(state: DaState, g, lambda_k: float, beta_k: float) -> DaState:
    """Dual averaging step with the closed-form prox ``x = x0 - s / beta_k``."""
    if lambda_k <= 0 or beta_k <= 0:
        raise UsageError("lambda_k and beta_k must be positive")
    g = _check_grad(g, state.k)
    s = state.s + lambda_k * g
    return DaState(s=s, x0=state.x0, x=state.x0 - s / beta_k, k=state.k + 1)


def averaged_da_step(state: MdaState, g, lambda_k: float, beta_k: float, c_next: float) -> MdaState:
    """Dual averaging on ``z`` followed by ``x <- (1 - c) x + c z``."""
    if lambda_k <= 0 or beta_k <= 0:
        raise UsageError("lambda_k and beta_k must be positive")
    if not 0 < c_next <= 1:
        raise UsageError("c_next must lie in (0, 1]")
    g = _check_grad(g, state.k)
    s = state.s + lambda_k * g
    z = state.x0 - s / beta_k
    x = (1.0 - c_next) * state.x + c_next * z
    return MdaState(s=s, z=z, x=x, x0=state.x0, k=state.k + 1)


def mda_step(state: MdaState, g, eta_k: float, c_next: float) -> MdaState:
    """One MDA step: ``beta_k = sqrt(k+1)``, ``lambda_k = eta_k sqrt(k+1)``."""
    if eta_k <= 0:
        raise UsageError("eta_k must be positive")
    b = math.sqrt(state.k + 1)
    return averaged_da_step(state, g, eta_k * b, b, c_next)


def sgd_step(x, g, eta_k: float) -> np.ndarray:
    if eta_k <= 0:
        raise UsageError("eta_k must be positive")
    return as_vector(x) - eta_k * _check_grad(g, -1)


def reg_sgd_step(state: RegSgdState, g, eta_k: float, alpha_k: float) -> RegSgdState:
    """SGD on ``f(x) + alpha_k/2 |x - x0|^2``."""
    if eta_k <= 0 or alpha_k < 0:
        raise UsageError("need eta_k > 0 and alpha_k >= 0")
    g = _check_grad(g, state.k)
    x = state.x - eta_k * g - eta_k * alpha_k * (state.x - state.x0)
    return RegSgdState(x=x, x0=state.x0, k=state.k + 1)


def sgdm_step(state: SgdmState, g, alpha: float, beta: float) -> SgdmState:
    """Heavy-ball form: ``m <- beta m + g``, ``x <- x - alpha m``."""
    if alpha <= 0 or not 0 <= beta < 1:
        raise UsageError("need alpha > 0 and beta in [0, 1)")
    m = beta * state.m + _check_grad(g, -1)
    return SgdmState(m=m, x=state.x - alpha * m)


def spa_step(state: SpaState, g, eta: float, c: float) -> SpaState:
    """Primal-averaging form of momentum."""
    if eta <= 0 or not 0 < c <= 1:
        raise UsageError("need eta > 0 and c in (0, 1]")
    z = state.z - eta * _check_grad(g, -1)
    return SpaState(z=z, x=(1.0 - c) * state.x + c * z)


def spa_params_from_sgdm(alpha: float, beta: float) -> tuple[float, float]:
    """Map heavy-ball ``(alpha, beta)`` to averaging ``(eta, c)``.

    With ``z0 = x0`` and ``m0 = 0`` both forms then produce the same x iterates.
    """
    if alpha <= 0:
        raise UsageError("alpha must be positive")
    if not 0 <= beta < 1:
        raise UsageError("beta must lie in [0, 1)")
    c = 1.0 - beta
    return alpha / c, c


def sgdm_params_from_spa(eta: float, c: float) -> tuple[float, float]:
    return c * eta, 1.0 - c


def adam_step(state: AdamState, g, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    if lr <= 0 or eps <= 0 or not (0 <= beta1 < 1 and 0 <= beta2 < 1):
        raise UsageError("invalid Adam hyperparameters")
    g = _check_grad(g, state.k)
    k = state.k + 1
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1**k)
    v_hat = v / (1.0 - beta2**k)
    return AdamState(m=m, v=v, x=state.x - lr * m_hat / (np.sqrt(v_hat) + eps), k=k)


# --- run loop -----------------------------------------------------------------


class _Method:
    """Adapter giving every optimizer the same (init, step, row) surface."""

    has_z = False

    def __init__(self, schedule: ScheduleSpec, **hyper):
        self.schedule = schedule
        self.hyper = hyper
        unknown = set(hyper) - set(self.defaults)
        if unknown:
            raise UsageError(f"unknown hyperparameter(s) for {self.name}: {sorted(unknown)}")
        self.params = {**self.defaults, **hyper}

    defaults: dict = {}
    name = "?"

    def c_next(self, k: int) -> float:
        return momentum_schedule(self.schedule, min(k + 1, self.schedule.total_steps - 1))

    def z(self, state):
        return None


class _Sgd(_Method):
    name = "sgd"

    def init(self, x0):
        return as_vector(x0).copy()

    def x(self, state):
        return state

    def step(self, state, g, k):
        return sgd_step(state, g, self.schedule.eta(k))

    def row(self, k):
        eta = self.schedule.eta(k)
        return eta, 0.0, 1.0, eta, 1.0


class _Sgdm(_Method):
    name = "sgdm"
    defaults = {"momentum": 0.9}

    def init(self, x0):
        return SgdmState.start(x0)

    def x(self, state):
        return state.x

    def step(self, state, g, k):
        return sgdm_step(state, g, self.schedule.eta(k), self.params["momentum"])

    def row(self, k):
        eta = self.schedule.eta(k)
        return eta, 0.0, 1.0, eta, 1.0 - self.params["momentum"]


class _Spa(_Method):
    name = "spa"
    has_z = True

    def init(self, x0):
        return SpaState.start(x0)

    def x(self, state):
        return state.x

    def z(self, state):
        return state.z

    def step(self, state, g, k):
        return spa_step(state, g, self.schedule.eta(k), self.c_next(k))

    def row(self, k):
        eta = self.schedule.eta(k)
        return eta, 0.0, 1.0, eta, self.c_next(k)


class _Da(_Method):
    """Plain dual averaging; ``beta_rule`` picks the classical or MDA scaling."""

    name = "da"
    defaults = {"beta_rule": "nesterov"}

    def __init__(self, schedule, **hyper):
        super().__init__(schedule, **hyper)
        rule = self.params["beta_rule"]
        T = schedule.total_steps
        etas = schedule.etas()
        if rule == "nesterov":
            self.betas = nesterov_betas(T)
            self.lams = etas
        elif rule == "sqrt":
            self.betas = np.sqrt(np.arange(T) + 1.0)
            self.lams = etas * self.betas
        else:
            raise UsageError(f"unknown beta_rule {rule!r}")

    def init(self, x0):
        return DaState.start(x0)

    def x(self, state):
        return state.x

    def step(self, state, g, k):
        return da_step(state, g, self.lams[k], self.betas[k])

    def row(self, k):
        b, l = self.betas[k], self.lams[k]
        return l / b, alpha_prop1(k, self.betas, self.lams), b, l, 1.0


class _Mda(_Method):
    name = "mda"
    has_z = True

    def init(self, x0):
        return MdaState.start(x0)

    def x(self, state):
        return state.x

    def z(self, state):
        return state.z

    def step(self, state, g, k):
        return mda_step(state, g, self.schedule.eta(k), self.c_next(k))

    def row(self, k):
        eta = self.schedule.eta(k)
        b = math.sqrt(k + 1)
        alpha = 0.0 if k == 0 else (b - math.sqrt(k)) / (eta * b)
        return eta, alpha, b, eta * b, self.c_next(k)


class _RegSgd(_Method):
    """SGD with the decaying L2 pull towards x0 that MDA induces (flat c = 1)."""

    name = "reg_sgd"

    def init(self, x0):
        return RegSgdState.start(x0)

    def x(self, state):
        return state.x

    def _alpha(self, k):
        if k == 0:
            return 0.0
        b = math.sqrt(k + 1)
        return (b - math.sqrt(k)) / (self.schedule.eta(k) * b)

    def step(self, state, g, k):
        return reg_sgd_step(state, g, self.schedule.eta(k), self._alpha(k))

    def row(self, k):
        eta = self.schedule.eta(k)
        return eta, self._alpha(k), 1.0, eta, 1.0


class _Adam(_Method):
    name = "adam"
    defaults = {"beta1": 0.9, "beta2": 0.999, "eps": 1e-8}

    def init(self, x0):
        return AdamState.start(x0)

    def x(self, state):
        return state.x

    def step(self, state, g, k):
        p = self.params
        return adam_step(state, g, self.schedule.eta(k), p["beta1"], p["beta2"], p["eps"])

    def row(self, k):
        eta = self.schedule.eta(k)
        return eta, 0.0, 1.0, eta, 1.0


_METHODS = {cls.name: cls for cls in (_Sgd, _Sgdm, _Spa, _Da, _Mda, _RegSgd, _Adam)}


def make_method(optimizer_id: str, schedule: ScheduleSpec, **hyper) -> _Method:
    try:
        cls = _METHODS[optimizer_id]
    except KeyError:
        raise UsageError(f"unknown optimizer {optimizer_id!r}; choose from {', '.join(OPTIMIZERS)}") from None
    return cls(schedule, **hyper)


def run(
    problem,
    optimizer_id: str,
    schedule: ScheduleSpec,
    T: int | None = None,
    seed: int = 0,
    *,
    weight_decay: float = 0.0,
    record_iterates: bool = False,
    **hyper,
) -> RunTrace:
    """Run ``T`` optimizer steps on ``problem`` and return the trace.

    Row ``k`` holds the loss and exact gradient norm at ``x_k`` and the
    schedule values used by step ``k``. A non-finite loss, gradient or state
    stops the run; the trace then records ``abort_step`` and keeps the rows
    up to and including the offending one.
    """
    if T is None:
        T = schedule.total_steps
    if T < 1:
        raise UsageError("T must be >= 1")
    if T != schedule.total_steps:
        schedule = replace(schedule, total_steps=T)
    method = make_method(optimizer_id, schedule, **hyper)
    rng = RngStream(seed)
    x0 = as_vector(problem.x0).copy()
    meta = {
        "problem": problem.describe(),
        "optimizer": optimizer_id,
        "hyper": dict(sorted(method.params.items())) | ({"weight_decay": weight_decay} if weight_decay else {}),
        "schedule": schedule,
        "T": T,
        "seed": seed,
        "generator": GENERATOR_NAME,
        "version": __version__,
    }
    trace = RunTrace(meta=meta)
    state = method.init(x0)
    x_sum = np.zeros_like(x0)
    xs = [x0.copy()] if record_iterates else None
    zs = [x0.copy()] if record_iterates and method.has_z else None

    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(T):
            x = method.x(state)
            loss = problem.value(x)
            gfull = problem.full_grad(x)
            gn = float(gfull @ gfull)
            d = x - x0
            trace.append(TraceRow(k, loss, gn, *method.row(k), float(d @ d)))
            if not (math.isfinite(loss) and math.isfinite(gn)):
                trace.abort_step, trace.abort_reason = k, "non-finite loss or gradient"
                break
            x_sum += x
            g = problem.stoch_grad(x, rng)
            if weight_decay:
                g = g + weight_decay * x
            try:
                state = method.step(state, g, k)
            except NonFiniteError:
                trace.abort_step, trace.abort_reason = k, "non-finite stochastic gradient"
                break
            if record_iterates:
                xs.append(method.x(state).copy())
                if zs is not None:
                    zs.append(method.z(state).copy())

        x = method.x(state)
        trace.x_final = x.copy()
        if not trace.aborted:
            x_sum += x
            trace.x_average = x_sum / (T + 1)
            trace.final_loss = problem.value(x)
            gfull = problem.full_grad(x)
            trace.final_grad_norm_sq = float(gfull @ gfull)
            if not (all_finite(x) and math.isfinite(trace.final_loss)):
                trace.abort_step, trace.abort_reason = T, "non-finite final iterate"
    if record_iterates:
        trace.xs = np.array(xs)
        trace.zs = np.array(zs) if zs is not None else None
    return trace
