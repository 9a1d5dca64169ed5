"""Trajectory comparisons and multi-seed experiments built on :func:`run`."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import BoundConstants, mda_bound_rhs, rate_fit
from .core import RngStream, as_vector
from .optimizers import (
    DaState,
    MdaState,
    RegSgdState,
    SgdmState,
    SpaState,
    averaged_da_step,
    da_step,
    mda_step,
    reg_sgd_step,
    run,
    sgdm_step,
    spa_params_from_sgdm,
    spa_step,
)
from .schedules import ScheduleSpec, alpha_prop1, nesterov_betas


def _stream(problem, seed):
    return RngStream(seed, index=7)


def _trajectory(problem, state, step, T, rng):
    xs = [state.x.copy()]
    for k in range(T):
        state = step(state, problem.stoch_grad(state.x, rng), k)
        xs.append(state.x)
    return np.array(xs)


def max_deviation(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)))


def da_vs_reg_sgd(problem, eta: float, T: int = 200, seed: int = 0) -> float:
    """Max inf-norm gap between dual averaging and its regularized-SGD twin.

    Dual averaging runs with ``beta_k = sqrt(k+1)``, ``lambda_k = eta sqrt(k+1)``;
    the SGD twin uses ``eta_k = lambda_k / beta_k`` and
    ``alpha_k = (beta_k - beta_{k-1}) / lambda_k``. Both consume clones of the
    same gradient stream.
    """
    betas = np.sqrt(np.arange(T) + 1.0)
    lams = eta * betas
    rng = _stream(problem, seed)
    xs_da = _trajectory(problem, DaState.start(problem.x0), lambda s, g, k: da_step(s, g, lams[k], betas[k]), T, rng.clone())
    xs_reg = _trajectory(
        problem,
        RegSgdState.start(problem.x0),
        lambda s, g, k: reg_sgd_step(s, g, lams[k] / betas[k], alpha_prop1(k, betas, lams)),
        T,
        rng.clone(),
    )
    return max_deviation(xs_da, xs_reg)


def spa_vs_sgdm(problem, alpha: float, beta: float, T: int = 200, seed: int = 0) -> float:
    eta, c = spa_params_from_sgdm(alpha, beta)
    rng = _stream(problem, seed)
    xs_m = _trajectory(problem, SgdmState.start(problem.x0), lambda s, g, k: sgdm_step(s, g, alpha, beta), T, rng.clone())
    xs_a = _trajectory(problem, SpaState.start(problem.x0), lambda s, g, k: spa_step(s, g, eta, c), T, rng.clone())
    return max_deviation(xs_m, xs_a)


def mda_c1_vs_da(problem, eta: float, T: int = 500, seed: int = 0) -> float:
    betas = np.sqrt(np.arange(T) + 1.0)
    rng = _stream(problem, seed)
    xs_mda = _trajectory(problem, MdaState.start(problem.x0), lambda s, g, k: mda_step(s, g, eta, 1.0), T, rng.clone())
    xs_da = _trajectory(problem, DaState.start(problem.x0), lambda s, g, k: da_step(s, g, eta * betas[k], betas[k]), T, rng.clone())
    return max_deviation(xs_mda, xs_da)


def estimate_second_moment(problem, x, rng: RngStream, n_draws: int = 64) -> float:
    exact = problem.second_moment(x)
    if exact is not None:
        return exact
    draws = [problem.stoch_grad(x, rng) for _ in range(n_draws)]
    return float(np.mean([g @ g for g in draws]))


@dataclass
class BoundCheck:
    lhs: float
    constants: BoundConstants
    terms: object
    per_seed_lhs: list

    @property
    def rhs(self) -> float:
        return self.terms.total

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs


def _mda_iterates(problem, T_steps, eta, c, seed):
    sched = ScheduleSpec(base_lr=eta, total_steps=T_steps, c0=c)
    tr = run(problem, "mda", sched, T_steps, seed, record_iterates=True)
    if tr.aborted:
        raise FloatingPointError(f"MDA run aborted at step {tr.abort_step}")
    return tr.xs, tr.zs


def grad_sq_rows(problem, X: np.ndarray) -> np.ndarray:
    G = np.array([problem.full_grad(x) for x in X])
    return np.einsum("ij,ij->i", G, G)


def bound_soundness(problem, c: float, T: int, seeds, sigma_draws: int = 64) -> BoundCheck:
    """Compare the seed-averaged stationarity measure with the MDA bound.

    MDA runs k = 0..T with eta = 1/sqrt(T), producing ``x_0..x_{T+1}`` and
    ``z_0..z_{T+1}``. The second moment and squared radius entering the bound
    are the largest values seen along all trajectories.
    """
    eta = 1.0 / math.sqrt(T)
    x0 = as_vector(problem.x0)
    f_star = problem.f_star
    lhs, f_z, f_x, sig, rad = [], [], [], 0.0, 0.0
    for seed in seeds:
        xs, zs = _mda_iterates(problem, T + 1, eta, c, seed)
        s = grad_sq_rows(problem, xs[: T + 1]).sum() + grad_sq_rows(problem, zs[: T + 1]).sum()
        lhs.append(s / (2.0 * T))
        f_z.append(problem.value(zs[T + 1]) - f_star)
        f_x.append(problem.value(xs[T]) - f_star)
        rng = RngStream(seed, index=11)
        stride = max(1, len(xs) // 200)
        sig = max(sig, max(estimate_second_moment(problem, x, rng, sigma_draws) for x in xs[::stride]))
        rad = max(rad, float(np.max(np.sum((xs - x0) ** 2, axis=1))), float(np.max(np.sum((zs - x0) ** 2, axis=1))))
    consts = BoundConstants(
        L=problem.L,
        sigma_sq=sig,
        R_sq=rad,
        c=c,
        T=T,
        f_x0_gap=problem.value(x0) - f_star,
        f_zT_gap=float(np.mean(f_z)),
        f_xT_gap=float(np.mean(f_x)),
    )
    return BoundCheck(float(np.mean(lhs)), consts, mda_bound_rhs(consts), lhs)


@dataclass
class RateResult:
    Ts: list
    metrics: list
    slope: float


def rate_metric(problem, T: int, seeds, c: float = 0.5) -> float:
    """Seed average of ``(1/T) sum_{k<T} (|grad f(x_k)|^2 + |grad f(z_k)|^2) / 2``."""
    eta = 1.0 / math.sqrt(T)
    vals = []
    for seed in seeds:
        xs, zs = _mda_iterates(problem, T, eta, c, seed)
        vals.append(0.5 * (grad_sq_rows(problem, xs[:T]).mean() + grad_sq_rows(problem, zs[:T]).mean()))
    return float(np.mean(vals))


def rate_experiment(problem, Ts, seeds, c: float = 0.5) -> RateResult:
    Ts = list(Ts)
    metrics = [rate_metric(problem, T, seeds, c) for T in Ts]
    return RateResult(Ts, metrics, rate_fit(zip(Ts, metrics)))


# --- ablation ladder ------------------------------------------------------------

RUNGS = ("dual_averaging", "+momentum", "+lambda_sqrt")


def ladder_rung(problem, rung: str, schedule: ScheduleSpec, seed: int, c: float = 0.1) -> float:
    """Final full-batch loss of one ablation rung after ``schedule.total_steps`` steps.

    ``dual_averaging``: classical scaling ``beta_{k+1} = beta_k + 1/beta_k``
    with ``lambda_k = eta_k``. ``+momentum``: the same dual sequence with the
    averaged iterate ``x <- (1-c) x + c z``. ``+lambda_sqrt``: full MDA,
    ``beta_k = sqrt(k+1)``, ``lambda_k = eta_k sqrt(k+1)``.
    """
    T = schedule.total_steps
    etas = schedule.etas()
    if rung == "+lambda_sqrt":
        betas = np.sqrt(np.arange(T) + 1.0)
        lams = etas * betas
    elif rung in RUNGS:
        betas = nesterov_betas(T)
        lams = etas
    else:
        raise ValueError(f"unknown rung {rung!r}")
    c_used = 1.0 if rung == "dual_averaging" else c
    rng = RngStream(seed)
    state = MdaState.start(problem.x0)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(T):
            g = problem.stoch_grad(state.x, rng)
            if not np.isfinite(g).all():
                return math.inf
            state = averaged_da_step(state, g, lams[k], betas[k], c_used)
        loss = problem.value(state.x)
    return loss if math.isfinite(loss) else math.inf


@dataclass
class LadderRow:
    rung: str
    schedule: ScheduleSpec
    losses: list

    @property
    def lr(self) -> float:
        return self.schedule.base_lr

    @property
    def mean(self) -> float:
        return float(np.mean(self.losses))

    @property
    def stderr(self) -> float:
        n = len(self.losses)
        return float(np.std(self.losses, ddof=1) / math.sqrt(n)) if n > 1 else 0.0


STAGEWISE = ((0.5, 0.1, 0.05), (0.75, 0.01, 0.05))


def ablation_ladder(problem_factory, T: int, seeds, lrs, c: float = 0.1, shapes=("flat", "stagewise")):
    """Best final loss per rung over a sweep of learning rates and lr shapes.

    ``problem_factory(seed)`` builds the problem for each seed. For every rung
    the (lr, shape) pair with the lowest seed-mean final loss is kept. The
    stage-wise shape divides the rate by 10 at 50% and by 100 at 75% of the
    run, each drop ramped linearly over 5% of the steps.
    """
    rows = []
    problems = {seed: problem_factory(seed) for seed in seeds}
    for rung in RUNGS:
        best = None
        for shape in shapes:
            for lr in lrs:
                spec = ScheduleSpec(base_lr=lr, lr_shape=shape, total_steps=T, stages=STAGEWISE if shape == "stagewise" else ())
                row = LadderRow(rung, spec, [ladder_rung(problems[seed], rung, spec, seed, c) for seed in seeds])
                if best is None or row.mean < best.mean:
                    best = row
        rows.append(best)
    return rows


def ladder_monotone(rows) -> list[bool]:
    """Per-rung flag: mean loss improves on, or ties within one s.e. of, the rung above."""
    flags = [True]
    for prev, cur in zip(rows, rows[1:]):
        flags.append(cur.mean <= prev.mean + max(prev.stderr, cur.stderr))
    return flags
