"""Self-check suites bundled behind ``mdaopt verify``."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import experiments as ex
from .analysis import check_descent_inequality, max_stepsize
from .core import RngStream
from .problems import fd_gradient, logistic, quadratic, rosenbrock, tiny_mlp
from .schedules import scan_alpha_inequalities


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _equivalence_problems():
    # eta * (L + alpha_1) < 2 for every eta used, so no trajectory diverges
    return {"quadratic": quadratic(n=10, condition_number=1.5, sigma=0.0), "logistic": logistic(n_samples=200, n_features=5, batch=200)}


def suite_schedule_inequalities(k_max: int = 10**6):
    bad = {}
    for eta in (0.1, 1.0, 10.0):
        counts = scan_alpha_inequalities(eta, k_max)
        if any(counts.values()):
            bad[eta] = counts
    if bad:
        return False, f"violations: {bad}"
    return True, f"0 violations for k <= {k_max} at eta in (0.1, 1, 10)"


def suite_da_reg_sgd(T: int = 200, tol: float = 1e-9):
    worst = 0.0
    for name, p in _equivalence_problems().items():
        for eta in (0.1, 0.5, 1.0):
            dev = ex.da_vs_reg_sgd(p, eta, T)
            worst = max(worst, dev)
            if not dev <= tol:
                return False, f"{name} eta={eta}: max deviation {dev:.3e} > {tol:g}"
    return True, f"max deviation {worst:.3e} <= {tol:g}"


def suite_spa_sgdm(T: int = 200, tol: float = 1e-9):
    worst = 0.0
    for name, p in _equivalence_problems().items():
        for alpha, beta in ((0.1, 0.9), (0.01, 0.99), (0.5, 0.0)):
            dev = ex.spa_vs_sgdm(p, alpha, beta, T)
            worst = max(worst, dev)
            if not dev <= tol:
                return False, f"{name} (alpha, beta)=({alpha}, {beta}): deviation {dev:.3e} > {tol:g}"
    return True, f"max deviation {worst:.3e} <= {tol:g}"


def suite_mda_c1(T: int = 500, tol: float = 1e-12):
    worst = 0.0
    for name, p in _equivalence_problems().items():
        for eta in (0.1, 0.5, 1.0):
            dev = ex.mda_c1_vs_da(p, eta, T)
            worst = max(worst, dev)
            if not dev <= tol:
                return False, f"{name} eta={eta}: deviation {dev:.3e} > {tol:g}"
    return True, f"max deviation {worst:.3e} <= {tol:g}"


def gradient_errors(seed: int = 0) -> dict:
    """Worst finite-difference disagreement per problem, in each problem's own metric."""
    gen = RngStream(seed, index=3).generator
    out = {}
    q = quadratic(n=10, condition_number=10.0)
    # unit-scale offsets from the minimizer: rounding in f, not truncation, sets the error here
    pts = q.x_star + gen.uniform(-1, 1, size=(100, q.n))
    out["quadratic_abs"] = max(float(np.max(np.abs(fd_gradient(q, x) - q.full_grad(x)))) for x in pts)
    lg = logistic()
    out["logistic_rel"] = max(_rel(fd_gradient(lg, x), lg.full_grad(x)) for x in gen.normal(size=(20, lg.n)))
    rb = rosenbrock(n=4)
    out["rosenbrock_rel"] = max(_rel(fd_gradient(rb, x), rb.full_grad(x)) for x in gen.uniform(-2, 2, size=(100, rb.n)))
    mlp = tiny_mlp()
    out["tiny_mlp_rel"] = max(_rel(fd_gradient(mlp, x), mlp.full_grad(x)) for x in gen.normal(size=(20, mlp.n)))
    return out


def _rel(approx, exact):
    return float(np.linalg.norm(approx - exact) / max(np.linalg.norm(exact), 1e-12))


GRADIENT_TOLERANCES = {"quadratic_abs": 1e-8, "logistic_rel": 1e-5, "rosenbrock_rel": 1e-5, "tiny_mlp_rel": 1e-4}


def suite_gradients():
    errs = gradient_errors()
    bad = {k: v for k, v in errs.items() if not v <= GRADIENT_TOLERANCES[k]}
    detail = ", ".join(f"{k}={v:.1e}" for k, v in errs.items())
    return not bad, detail


def unbiasedness_zscores(n_draws: int = 10_000, n_points: int = 5, seed: int = 0) -> np.ndarray:
    """|mean stochastic gradient - full gradient| in standard errors, per probe and coordinate."""
    p = logistic(n_samples=200, n_features=5, batch=10)
    gen = RngStream(seed, index=5)
    probes = [np.zeros(p.n)] + list(gen.normal((n_points - 1, p.n)))
    z = []
    for x in probes:
        draws = np.array([p.stoch_grad(x, gen) for _ in range(n_draws)])
        se = draws.std(axis=0, ddof=1) / np.sqrt(n_draws)
        z.append(np.abs(draws.mean(axis=0) - p.full_grad(x)) / se)
    return np.array(z)


def suite_unbiasedness():
    z = unbiasedness_zscores()
    return bool(np.all(z <= 3.0)), f"max |z| = {z.max():.2f} over {z.size} coordinates (limit 3)"


AUDIT_GRID = [(c, frac) for c in (0.1, 0.25, 0.5, 0.75, 1.0) for frac in (0.25, 0.5, 1.0)]


def suite_descent_audit(T: int = 500, tol: float = 1e-6, overshoot: float = 1.5):
    problems = {"quadratic": quadratic(n=10, condition_number=1.0), "logistic": logistic(n_samples=200, n_features=5, batch=200)}
    checked = 0
    for name, p in problems.items():
        for c, frac in AUDIT_GRID:
            eta = frac * max_stepsize(p.L, c)
            audit = check_descent_inequality(p, eta, c, T=T, tol=tol)
            checked += len(audit.records)
            if audit.violations:
                v = audit.violations[0]
                return False, f"{name} c={c} eta={eta:.4g}: residual {v.residual:.3e} at k={v.k}"
        neg = check_descent_inequality(p, overshoot * max_stepsize(p.L, 0.5), 0.5, T=T, tol=tol)
        if not neg.bracket_sign_flip:
            return False, f"{name}: step-size bracket did not turn positive at eta = {overshoot} x max_stepsize"
    return True, f"{checked} steps, 0 violations; negative control detected"


def suite_stationarity_bound(T: int = 10_000, n_seeds: int = 20):
    p = quadratic(n=10, condition_number=10.0, sigma=1.0)
    res = ex.bound_soundness(p, c=0.5, T=T, seeds=range(n_seeds))
    return res.holds, f"lhs {res.lhs:.4g} <= rhs {res.rhs:.4g}" if res.holds else f"lhs {res.lhs:.4g} > rhs {res.rhs:.4g}"


SUITES = {
    "schedule_inequalities": suite_schedule_inequalities,
    "da_reg_sgd_equivalence": suite_da_reg_sgd,
    "spa_sgdm_equivalence": suite_spa_sgdm,
    "mda_c1_equals_da": suite_mda_c1,
    "gradient_checks": suite_gradients,
    "oracle_unbiasedness": suite_unbiasedness,
    "descent_audit": suite_descent_audit,
    "stationarity_bound": suite_stationarity_bound,
}


def run_suites(names=None, stop_on_failure: bool = False):
    results = []
    for name in names or SUITES:
        t0 = time.perf_counter()
        try:
            passed, detail = SUITES[name]()
        except Exception as exc:  # a crashing suite counts as a failure
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(SuiteResult(name, bool(passed), detail, time.perf_counter() - t0))
        if stop_on_failure and not passed:
            break
    return results
