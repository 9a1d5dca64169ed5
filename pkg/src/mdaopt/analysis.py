"""Lyapunov descent audit, step-size condition and convergence-bound evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import UsageError, as_vector


class HypothesisViolation(UsageError):
    """The bound was asked for outside the horizon it is proved for."""


def max_stepsize(L: float, c: float) -> float:
    """Largest eta with ``eta <= (c + 1/2) / L``."""
    if L <= 0 or not 0 < c <= 1:
        raise UsageError("need L > 0 and c in (0, 1]")
    return (c + 0.5) / L


def lyapunov_gamma(f_z_next, f_x, dx_norm_sq, eta, c, c_next, L, form="forward"):
    """Potential ``f(z)/eta^2 + (L/eta)(1/c - 1) f(x) + w |dx|^2``.

    The f arguments are gaps ``f(.) - f*``. With ``form="forward"`` the weight
    of the squared step is ``L / (2 eta c_next^2)``; ``form="lagged"`` uses
    ``L / (2 eta^2 c_next^2)``, the weight under which the per-step descent
    inequality actually closes (see :func:`check_descent_inequality`).
    """
    if eta <= 0 or not (0 < c <= 1 and 0 < c_next <= 1):
        raise UsageError("need eta > 0 and c, c_next in (0, 1]")
    if form == "forward":
        w = L / (2.0 * eta * c_next**2)
    elif form == "lagged":
        w = L / (2.0 * eta**2 * c_next**2)
    else:
        raise UsageError(f"unknown form {form!r}")
    return f_z_next / eta**2 + (L / eta) * (1.0 / c - 1.0) * f_x + w * dx_norm_sq


def bracket_coefficient(eta: float, c: float, L: float) -> float:
    """Coefficient in square brackets multiplying ``(L/2)|x_k - x_{k-1}|^2``."""
    u = 1.0 / c - 1.0
    return (u + eta * L) * u / eta**2 + (L / eta) * u * u - 1.0 / (eta * c) ** 2


def regularized_bracket(k, eta: float, c: float, L: float):
    """Same bracket with ``L`` replaced by ``L + 1/(2 eta (k+1))``.

    This is the form the step-size condition ``eta <= (c + 1/2)/L`` is meant
    to keep nonpositive; it depends on k and works elementwise on arrays.
    """
    u = 1.0 / c - 1.0
    Lk = L + 1.0 / (2.0 * eta * (np.asarray(k, dtype=np.float64) + 1.0))
    return (u + eta * Lk) * u / eta**2 + (Lk / eta) * u * u - 1.0 / (eta * c) ** 2


@dataclass(frozen=True)
class LyapunovRecord:
    k: int
    gamma: float
    inequality_lhs: float
    inequality_rhs: float
    residual: float
    bracket: float
    violation: bool


@dataclass
class DescentAudit:
    records: list
    eta: float
    c: float
    L: float
    tol: float
    bracket_mda: np.ndarray = field(repr=False, default=None)

    @property
    def violations(self) -> list:
        return [r for r in self.records if r.violation]

    @property
    def bracket_positive_steps(self) -> np.ndarray:
        """Steps where the k-dependent bracket is positive (step size too large)."""
        scale = 1.0 / (self.eta * self.c) ** 2
        return np.flatnonzero(self.bracket_mda > 1e-12 * scale)

    @property
    def bracket_sign_flip(self) -> bool:
        return len(self.bracket_positive_steps) > 0


def spa_trajectory(problem, eta: float, c: float, T: int, x0=None):
    """Deterministic SPA iterates ``x_0..x_T`` and ``z_0..z_T`` (``z_0 = x_0``)."""
    x = as_vector(problem.x0 if x0 is None else x0).copy()
    z = x.copy()
    xs, zs = [x.copy()], [z.copy()]
    for _ in range(T):
        z = z - eta * problem.full_grad(x)
        x = (1.0 - c) * x + c * z
        xs.append(x)
        zs.append(z)
    return np.array(xs), np.array(zs)


def check_descent_inequality(problem, eta: float, c: float, L: float | None = None, T: int = 500, *, trajectory=None, convention: str = "lagged", tol: float = 1e-6) -> DescentAudit:
    """Evaluate the SPA per-step descent inequality along a deterministic run.

    For each step k it compares
    ``(|grad f(x_k)|^2 + |grad f(z_k)|^2) / (2 eta)`` with
    ``Gamma_k - Gamma_{k+1} + L |grad f(x_k)|^2 + (L/2) B |x_k - x_{k-1}|^2``
    where B is :func:`bracket_coefficient` and ``x_{-1} = x_0``. A step is a
    violation when ``rhs - lhs < -tol * max(1, |Gamma_k|)``.

    ``convention="lagged"`` builds ``Gamma_k`` from ``z_k``, ``x_{k-1}`` and
    ``|x_k - x_{k-1}|^2`` with the ``1/eta^2`` step weight.
    ``convention="forward"`` builds it from ``z_{k+1}``, ``x_k`` and
    ``|x_{k+1} - x_k|^2`` with the ``1/eta`` weight.
    """
    if problem.stochastic:
        raise UsageError("the pointwise descent check needs a deterministic problem")
    if convention not in ("lagged", "forward"):
        raise UsageError(f"unknown convention {convention!r}")
    L = problem.L if L is None else L
    if trajectory is None:
        xs, zs = spa_trajectory(problem, eta, c, T + 2)
    else:
        xs, zs = trajectory
    f_star = problem.f_star
    fx = np.array([problem.value(x) for x in xs]) - f_star
    fz = np.array([problem.value(z) for z in zs]) - f_star
    gx = np.array([problem.full_grad(x) for x in xs])
    gz = np.array([problem.full_grad(z) for z in zs])
    gx2 = np.einsum("ij,ij->i", gx, gx)
    gz2 = np.einsum("ij,ij->i", gz, gz)
    prev = np.vstack([xs[:1], xs[:-1]])
    step_sq = np.einsum("ij,ij->i", xs - prev, xs - prev)  # |x_k - x_{k-1}|^2

    if convention == "lagged":
        def gamma(k):
            return lyapunov_gamma(fz[k], fx[k - 1] if k > 0 else fx[0], step_sq[k], eta, c, c, L, form="lagged")
        n_steps = len(xs) - 1
    else:
        def gamma(k):
            return lyapunov_gamma(fz[k + 1], fx[k], step_sq[k + 1], eta, c, c, L, form="forward")
        n_steps = len(xs) - 2
    n_steps = min(n_steps, T)

    B = bracket_coefficient(eta, c, L)
    records = []
    g_next = gamma(0)
    for k in range(n_steps):
        g_k, g_next = g_next, gamma(k + 1)
        lhs = (gx2[k] + gz2[k]) / (2.0 * eta)
        rhs = g_k - g_next + L * gx2[k] + 0.5 * B * L * step_sq[k]
        res = rhs - lhs
        records.append(LyapunovRecord(k, g_k, lhs, rhs, res, B, bool(res < -tol * max(1.0, abs(g_k)))))
    return DescentAudit(records, eta, c, L, tol, bracket_mda=regularized_bracket(np.arange(n_steps), eta, c, L))


def alpha_T(T: int) -> float:
    """``sqrt(T) (1 - sqrt(T+1)/sqrt(T+2))`` in cancellation-free form."""
    a, b = math.sqrt(T + 2), math.sqrt(T + 1)
    return math.sqrt(T) / (a * (a + b))


@dataclass
class BoundConstants:
    L: float
    sigma_sq: float
    R_sq: float
    c: float
    T: int
    f_x0_gap: float
    f_zT_gap: float
    f_xT_gap: float
    eta: float = field(init=False)
    alpha_T: float = field(init=False)

    def __post_init__(self):
        if self.T < 1:
            raise UsageError("T must be >= 1")
        if min(self.L, self.sigma_sq, self.R_sq) < 0 or not 0 < self.c <= 1:
            raise UsageError("constants must be nonnegative and c in (0, 1]")
        self.eta = 1.0 / math.sqrt(self.T)
        self.alpha_T = alpha_T(self.T)

    @property
    def min_horizon(self) -> int:
        return math.ceil(self.L**2 / self.c**2)


@dataclass(frozen=True)
class BoundTerms:
    progress: float
    momentum: float
    noise: float
    domain: float

    @property
    def total(self) -> float:
        return self.progress + self.momentum + self.noise + self.domain


def mda_bound_rhs(consts: BoundConstants) -> BoundTerms:
    """Right-hand side of the MDA stationarity bound, term by term.

    Bounds ``(1/2T) sum_{k=0}^T (|grad f(x_k)|^2 + |grad f(z_k)|^2)`` for
    eta = 1/sqrt(T), constant c and ``T >= L^2/c^2``.
    """
    k = consts
    if k.T < k.L**2 / k.c**2:
        raise HypothesisViolation(f"T={k.T} is below L^2/c^2={k.L**2 / k.c**2:g}")
    rT = math.sqrt(k.T)
    logT = math.log(k.T)
    return BoundTerms(
        progress=2.0 * (k.f_x0_gap - k.f_zT_gap) / rT,
        momentum=2.0 * (1.0 / k.c - 1.0) * ((k.L + 1.0) * k.f_x0_gap - (k.L + k.alpha_T) * k.f_xT_gap) / k.T,
        noise=2.0 * (k.L / rT + math.log(k.T + 1) / k.T) * k.sigma_sq,
        domain=2.0 * (k.L * logT / k.T + 2.0 * logT / rT) * k.R_sq,
    )


def sgd_bound_rhs(f_x0_gap: float, L: float, sigma_sq: float, T: int) -> float:
    """SGD stationarity bound with eta = 1/sqrt(T)."""
    if T < 1:
        raise UsageError("T must be >= 1")
    return f_x0_gap / math.sqrt(T) + L * sigma_sq / (2.0 * T)


def rate_fit(points) -> float:
    """Least-squares slope of log(metric) against log(T)."""
    pts = list(points)
    if len(pts) < 3:
        raise UsageError("rate_fit needs at least 3 points")
    T = np.array([p[0] for p in pts], dtype=np.float64)
    m = np.array([p[1] for p in pts], dtype=np.float64)
    if np.any(m <= 0) or np.any(T <= 0):
        raise UsageError("T values and metrics must be positive")
    lx, ly = np.log(T), np.log(m)
    lx = lx - lx.mean()
    return float(lx @ (ly - ly.mean()) / (lx @ lx))
