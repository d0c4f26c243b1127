"""Constrained solver for the in-processing problems.

Augmented-Lagrangian outer loop (PHR form for two-sided bounds) over an
L-BFGS inner minimizer. Nonsmooth terms are smoothed with a width that is
annealed stage by stage; the final point is always re-checked with the exact
constraint forms, and the smoothed bounds are shifted inward and the last
stage re-run when the exact check fails.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .core import Dataset
from .optim import Coefficients, Problem, predict_proba

log = logging.getLogger(__name__)

STATUSES = ("optimal", "time_limit", "iter_limit", "infeasible_tolerance")


@dataclass(frozen=True)
class SolverOptions:
    kkt_tol: float = 1e-6
    feas_tol: float = 1e-6
    max_seconds: float = 60.0
    max_iters: int = 1000
    smoothing: tuple[float, ...] = (1e-2, 1e-3, 1e-4)
    init: np.ndarray | None = None
    rho0: float = 10.0
    max_outer: int = 30
    max_tighten: int = 6

    def __post_init__(self):
        if min(self.kkt_tol, self.feas_tol, self.max_seconds) <= 0:
            raise ValueError("tolerances and the time limit must be positive")
        if not self.smoothing or min(self.smoothing) <= 0:
            raise ValueError("smoothing schedule must be a non-empty list of positive widths")


@dataclass(eq=False)
class Solution:
    coeffs: Coefficients
    status: str
    objective: float
    iterations: int
    wall_seconds: float
    feasibility: list[dict] = field(default_factory=list)
    trace: list[dict] = field(default_factory=list)
    merit_history: list[list[float]] = field(default_factory=list)

    @property
    def theta(self) -> np.ndarray:
        beta, g = self.coeffs.beta, self.coeffs.g
        return beta if g is None else np.concatenate([beta, g])

    def predict_proba(self, d: Dataset) -> np.ndarray:
        return predict_proba(self.coeffs, d)

    def to_dict(self) -> dict:
        return {
            "coefficients": self.coeffs.to_dict(),
            "status": self.status,
            "objective": self.objective,
            "iterations": self.iterations,
            "wall_seconds": self.wall_seconds,
            "feasibility": self.feasibility,
        }

    def write_trace(self, path) -> None:
        """Iteration trace as CSV: iter, objective, max_residual, tau."""
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["iter", "objective", "max_residual", "tau"])
            w.writeheader()
            w.writerows(self.trace)


def numeric_gradient(f, theta, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar field."""
    theta = np.asarray(theta, float)
    grad = np.empty_like(theta)
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = h
        grad[k] = (f(theta + e) - f(theta - e)) / (2 * h)
    return grad


def feasibility_report(solution, problem: Problem, tol: float = 1e-6) -> list[dict]:
    """Exact (unsmoothed) constraint check, one entry per inequality."""
    theta = solution.theta if isinstance(solution, Solution) else np.asarray(solution, float)
    vals, _ = problem.constraint_values(theta, tau=None)
    value_of = dict(zip(problem.evaluators, vals))
    report = []
    for con in problem.constraints:
        v = float(value_of[(con.kind, con.sf)])
        residual = v - con.bound if con.direction == "<=" else con.bound - v
        report.append(
            {
                "kind": con.kind,
                "sf": con.sf,
                "direction": con.direction,
                "bound": con.bound,
                "value": v,
                "residual": max(0.0, residual),
                "satisfied": residual <= tol,
            }
        )
    return report


def _needs_smoothing(problem: Problem) -> bool:
    return problem.spec.svm or any(kind != "DI" for kind, _ in problem.evaluators)


def solve(problem: Problem, opts: SolverOptions | None = None) -> Solution:
    opts = opts or SolverOptions()
    start = time.perf_counter()
    deadline = start + opts.max_seconds

    theta = np.zeros(problem.n_params) if opts.init is None else np.array(opts.init, float)
    if theta.shape != (problem.n_params,):
        raise ValueError(f"initial point has shape {theta.shape}, expected ({problem.n_params},)")
    f0, _ = problem.objective(theta, opts.smoothing[0])
    if not np.isfinite(f0):
        raise ValueError("objective is not finite at the initial point")

    m = len(problem.evaluators)
    c = problem.bounds
    upper, lower = c.copy(), -c.copy()
    lam_up, lam_lo = np.zeros(m), np.zeros(m)
    rho = opts.rho0
    taus = list(opts.smoothing) if _needs_smoothing(problem) else [None]

    trace: list[dict] = []
    merit: list[list[float]] = []
    iters = 0
    status = None
    converged = False

    def stage(tau, theta, lam_up, lam_lo, rho, final):
        nonlocal iters, status
        # intermediate smoothing stages only need a rough answer
        feas_goal = 0.1 * opts.feas_tol if final else 1e-4
        gtol_floor = opts.kkt_tol * 1e-2 if final else 1e-5
        prev_viol = np.inf
        converged = False
        for k in range(opts.max_outer if m else 1):
            history: list[float] = []

            def merit_fn(x):
                f, gf = problem.objective(x, tau)
                if not m:
                    return f, gf
                h, J = problem.constraint_values(x, tau)
                a_up = np.maximum(0.0, lam_up + rho * (h - upper))
                a_lo = np.maximum(0.0, lam_lo + rho * (lower - h))
                val = f + (np.sum(a_up**2 - lam_up**2) + np.sum(a_lo**2 - lam_lo**2)) / (2 * rho)
                return val, gf + J.T @ (a_up - a_lo)

            def callback(intermediate_result):
                history.append(float(intermediate_result.fun))
                if time.perf_counter() > deadline:
                    raise StopIteration

            # inner tolerance tightens with the outer iteration
            gtol = max(gtol_floor, 10.0 ** -(k + 2)) if m else gtol_floor
            res = minimize(
                merit_fn,
                theta,
                jac=True,
                method="L-BFGS-B",
                callback=callback,
                options={"maxiter": opts.max_iters, "gtol": gtol, "ftol": 1e-15, "maxls": 50},
            )
            theta = res.x
            iters += res.nit
            merit.append(history)
            timed_out = time.perf_counter() > deadline

            f, gf = problem.objective(theta, tau)
            if m:
                h, J = problem.constraint_values(theta, tau)
                viol = float(np.max(np.maximum(0.0, np.maximum(h - upper, lower - h))))
                lam_up = np.maximum(0.0, lam_up + rho * (h - upper))
                lam_lo = np.maximum(0.0, lam_lo + rho * (lower - h))
                kkt = float(np.max(np.abs(gf + J.T @ (lam_up - lam_lo))))
            else:
                viol, kkt = 0.0, float(np.max(np.abs(gf)))
            trace.append({"iter": iters, "objective": f, "max_residual": viol, "tau": tau})
            log.debug("tau=%s iters=%d f=%.6g viol=%.3g kkt=%.3g", tau, iters, f, viol, kkt)

            if timed_out:
                status = "time_limit"
                break
            scale = max(1.0, abs(f))
            stalled = res.success and gtol <= gtol_floor
            if viol <= feas_goal and (kkt <= opts.kkt_tol * scale or stalled):
                converged = True
                break
            if viol > 0.25 * prev_viol:
                rho = min(rho * 10.0, 1e10)
            prev_viol = viol
        return theta, lam_up, lam_lo, rho, converged

    for i, tau in enumerate(taus):
        final = i == len(taus) - 1
        theta, lam_up, lam_lo, rho, converged = stage(tau, theta, lam_up, lam_lo, rho, final)
        if status:
            break

    # exact re-check; shift smoothed bounds inward by the smoothing error and retry
    for _ in range(opts.max_tighten if (m and taus[-1] is not None) else 0):
        if status:
            break
        exact, _ = problem.constraint_values(theta, None)
        if np.all(np.abs(exact) <= c + opts.feas_tol):
            break
        smooth, _ = problem.constraint_values(theta, taus[-1])
        gap = exact - smooth
        margin = 0.1 * opts.feas_tol
        upper = c - gap - margin
        lower = -c - gap + margin
        theta, lam_up, lam_lo, rho, converged = stage(taus[-1], theta, lam_up, lam_lo, rho, True)

    feas = feasibility_report(theta, problem, opts.feas_tol)
    if status is None:
        if not all(r["satisfied"] for r in feas):
            status = "infeasible_tolerance"
        elif not converged:
            status = "iter_limit"
        else:
            status = "optimal"
    objective, _ = problem.objective(theta, None)
    return Solution(
        coeffs=problem.coefficients(theta),
        status=status,
        objective=float(objective),
        iterations=iters,
        wall_seconds=time.perf_counter() - start,
        feasibility=feas,
        trace=trace,
        merit_history=merit,
    )
