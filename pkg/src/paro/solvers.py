"""First-order solvers for ``min f(x) + lam * psi(x)``.

Proximal gradient (with optional backtracking), accelerated proximal gradient
with objective restart, and scaled-dual ADMM. Every solver returns the final
point together with an :class:`IterateTrace`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from .losses import CompositeProblem, LeastSquaresLoss, LogisticLoss, lipschitz_bound
from .par import ParSpec, quantization_rate, subgradient_bounds
from .prox import prox_vector

__all__ = [
    "SolverConfig",
    "IterateTrace",
    "CriticalityReport",
    "LineSearchError",
    "proximal_gradient",
    "accelerated_proximal_gradient",
    "admm",
    "check_criticality",
    "snap_to_levels",
    "TRACE_COLUMNS",
]

TRACE_COLUMNS = ("iter", "F", "f", "psi", "eta", "step_norm", "qrate", "crit_residual")
MAX_BACKTRACKS = 60
SNAP_TOL = 1e-9


class LineSearchError(RuntimeError):
    """Raised when backtracking cannot find an acceptable step."""


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    Parameters
    ----------
    max_iters : int
        Iteration cap.
    step_init : float or None
        Initial (or fixed) stepsize. ``None`` means ``1/L`` with line search
        and ``1/(2L)`` without.
    line_search : bool
        Backtrack on the sufficient-decrease test.
    backtrack_factor : float
        Shrink factor in (0, 1).
    sufficient_decrease_const : float
        ``c`` in ``F(x+) <= F(x) - (c / eta) * ||x+ - x||**2``.
    momentum_rule : str or float
        ``"nesterov-t"`` for ``(t - 1) / (t + 2)``, or a constant ``beta``.
    restart : bool
        Drop momentum for one step whenever the objective would increase.
    admm_rho : float
        ADMM penalty.
    tol_residual : float
        Stopping tolerance on the step (or ADMM residual) norm.
    crit_every : int
        Record the criticality residual every this many iterations.
    seed : int
        Seed for the power iteration behind the default stepsize.
    """

    max_iters: int = 1000
    step_init: float | None = None
    line_search: bool = True
    backtrack_factor: float = 0.5
    sufficient_decrease_const: float = 0.25
    momentum_rule: str | float = "nesterov-t"
    restart: bool = True
    admm_rho: float = 1.0
    tol_residual: float = 1e-8
    crit_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.step_init is not None and not self.step_init > 0:
            raise ValueError("step_init must be > 0")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.sufficient_decrease_const < 0:
            raise ValueError("sufficient_decrease_const must be >= 0")
        if not isinstance(self.momentum_rule, (int, float)) and self.momentum_rule != "nesterov-t":
            raise ValueError(f"unknown momentum rule {self.momentum_rule!r}")
        if self.crit_every < 1:
            raise ValueError("crit_every must be >= 1")

    def beta(self, t: int) -> float:
        if self.momentum_rule == "nesterov-t":
            return (t - 1) / (t + 2)
        return float(self.momentum_rule)


@dataclass
class IterateTrace:
    """Per-iteration diagnostics; row 0 describes the starting point."""

    rows: list = field(default_factory=list)
    converged: bool = False
    method: str = ""

    def append(self, *row):
        self.rows.append(tuple(float(v) for v in row))

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        j = TRACE_COLUMNS.index(name)
        return np.array([r[j] for r in self.rows])

    @property
    def n_iter(self) -> int:
        return len(self.rows) - 1

    def to_csv(self, fh=None) -> str:
        """Write the trace as CSV to ``fh`` (if given) and return the text."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.rows:
            w.writerow([int(r[0])] + [repr(v) for v in r[1:]])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


@dataclass(frozen=True)
class CriticalityReport:
    residual: float
    coordinate_residuals: np.ndarray
    is_critical: bool


def snap_to_levels(par, x, tol: float = SNAP_TOL) -> np.ndarray:
    """Move coordinates within ``tol`` of a breakpoint exactly onto it."""
    x = np.asarray(x, dtype=float)
    radius = float(np.max(np.abs(x), initial=0.0)) + 2 * (par.gap or 0.0) + 1.0
    t = par.knots(radius)[0]
    j = np.clip(np.searchsorted(t, x), 1, max(t.size - 1, 1))
    cand = np.stack([t[j - 1], t[np.minimum(j, t.size - 1)]])
    dist = np.abs(cand - x)
    best = cand[np.argmin(dist, axis=0), np.arange(x.size)]
    return np.where(np.min(dist, axis=0) <= tol, best, x)


def _bounds(par, x):
    if isinstance(par, ParSpec):
        return subgradient_bounds(par, x)
    return par.subgradient_bounds(x)


def _prox(par, t, v):
    if isinstance(par, ParSpec):
        return prox_vector(par, t, v)
    return par.prox(t, v)


def _qrate(par, x):
    if isinstance(par, ParSpec):
        return quantization_rate(x, par).rate
    return math.nan


def check_criticality(problem: CompositeProblem, x, tol: float = 1e-5) -> CriticalityReport:
    """Distance (sup norm) from 0 to ``grad f(x) + lam * dpsi(x)``.

    Coordinates within ``1e-9`` of a breakpoint are first moved onto it.
    """
    if isinstance(problem.par, ParSpec):
        x = snap_to_levels(problem.par, x)
    g = problem.loss.grad(x)
    lo, hi = _bounds(problem.par, x)
    lam = problem.lam
    with np.errstate(invalid="ignore"):
        lam_lo = np.where(np.isinf(lo), lo, lam * lo)
        lam_hi = np.where(np.isinf(hi), hi, lam * hi)
    res = np.maximum(0.0, np.maximum(g + lam_lo, -g - lam_hi))
    worst = float(np.max(res, initial=0.0))
    return CriticalityReport(worst, res, worst <= tol)


# --- shared plumbing -----------------------------------------------------------

def _start(problem, x0):
    if x0 is None:
        x = np.zeros(problem.d)
    else:
        x = np.array(x0, dtype=float)
        if x.shape != (problem.d,):
            raise ValueError(f"x0 must have length {problem.d}")
    F, f, psi = problem.parts(x)
    if not math.isfinite(F):
        raise ValueError("objective is infinite at the starting point")
    return x, F, f, psi


def _default_step(problem, config):
    if config.step_init is not None:
        return config.step_init
    L = lipschitz_bound(problem.loss)
    if L == 0:
        return 1.0
    return 1.0 / L if config.line_search else 0.5 / L


def _record(trace, problem, config, t, x, parts, eta, step, last=False):
    crit = math.nan
    if t % config.crit_every == 0 or last:
        crit = check_criticality(problem, x).residual
    qr = _qrate(problem.par, x)
    trace.append(t, parts[0], parts[1], parts[2], eta, step, qr, crit)


def _finish(trace, problem, config, x, parts, eta, step, t):
    # make sure the last row carries a criticality value
    if trace.rows and int(trace.rows[-1][0]) == t and math.isnan(trace.rows[-1][-1]):
        trace.rows[-1] = trace.rows[-1][:-1] + (check_criticality(problem, x).residual,)


def _prox_step(problem, y, gy, eta):
    return _prox(problem.par, eta * problem.lam, y - eta * gy)


# --- proximal gradient ---------------------------------------------------------

def proximal_gradient(problem: CompositeProblem, config: SolverConfig = SolverConfig(),
                      x0=None, callback: Callable | None = None):
    """Proximal gradient descent.

    With line search, each iteration restarts from ``step_init`` and shrinks
    until ``F(x+) <= F(x) - (c / eta) * ||x+ - x||**2``.

    Returns
    -------
    x : ndarray
    trace : IterateTrace
    """
    return _pg_core(problem, config, x0, callback, momentum=False)


def accelerated_proximal_gradient(problem: CompositeProblem,
                                  config: SolverConfig = SolverConfig(),
                                  x0=None, callback: Callable | None = None):
    """Proximal gradient with momentum ``y = x + beta_t (x - x_prev)``.

    The line search runs the same sufficient-decrease test anchored at ``y``
    (or, when ``F(y)`` is infinite, the quadratic upper bound on ``f``).
    With ``restart`` on, a step that raises ``F`` is redone from ``x`` with
    zero momentum and the momentum counter resets.
    """
    return _pg_core(problem, config, x0, callback, momentum=True)


def _line_search(problem, config, y, fy, gy, Fy, eta0):
    c = config.sufficient_decrease_const
    eta = eta0
    for _ in range(MAX_BACKTRACKS + 1):
        xp = _prox_step(problem, y, gy, eta)
        parts = problem.parts(xp)
        d = xp - y
        dd = float(d @ d)
        if not config.line_search:
            return xp, parts, eta
        if math.isfinite(Fy):
            ok = parts[0] <= Fy - (c / eta) * dd + 1e-15 * abs(Fy)
        else:
            ok = parts[1] <= fy + float(gy @ d) + dd / (2 * eta) + 1e-15 * abs(fy)
        if ok:
            return xp, parts, eta
        eta *= config.backtrack_factor
    raise LineSearchError(f"no acceptable step after {MAX_BACKTRACKS} backtracks "
                          f"(last eta={eta / config.backtrack_factor:.3e})")


def _pg_core(problem, config, x0, callback, momentum):
    x, *parts = _start(problem, x0)
    parts = tuple(parts)
    eta0 = _default_step(problem, config)
    trace = IterateTrace(method="acc_pg" if momentum else "pg")
    _record(trace, problem, config, 0, x, parts, math.nan, math.nan)
    if callback is not None:
        callback(0, x)
    x_prev = x
    k = 1  # momentum counter since last restart
    eta, step = math.nan, math.nan
    t = 0
    for t in range(1, config.max_iters + 1):
        beta = config.beta(k) if momentum else 0.0
        if beta != 0.0:
            y = x + beta * (x - x_prev)
            Fy, fy, _ = problem.parts(y)
        else:
            y, (Fy, fy, _) = x, parts
        gy = problem.loss.grad(y)
        xp, new_parts, eta = _line_search(problem, config, y, fy, gy, Fy, eta0)
        if momentum and config.restart and beta != 0.0 and new_parts[0] > parts[0]:
            gx = problem.loss.grad(x)
            xp, new_parts, eta = _line_search(problem, config, x, parts[1], gx, parts[0], eta0)
            k = 1
        else:
            k += 1
        step = float(np.linalg.norm(xp - x))
        x_prev, x, parts = x, xp, new_parts
        done = step <= config.tol_residual
        _record(trace, problem, config, t, x, parts, eta, step, last=done)
        if callback is not None:
            callback(t, x)
        if done:
            trace.converged = True
            break
    _finish(trace, problem, config, x, parts, eta, step, t)
    return x, trace


# --- ADMM ----------------------------------------------------------------------

class _LsqXStep:
    """Solves ``(A^T A + rho n I) x = A^T b + rho n v`` with one factorization."""

    def __init__(self, loss: LeastSquaresLoss, rho: float):
        A = loss.A
        n, d = A.shape
        self.c = rho * n
        self.A = A
        self.Atb = A.T @ loss.b
        self.wide = n < d
        try:
            if self.wide:  # Woodbury on the n x n side
                self.fac = linalg.cho_factor(A @ A.T + self.c * np.eye(n))
            else:
                self.fac = linalg.cho_factor(A.T @ A + self.c * np.eye(d))
        except (linalg.LinAlgError, ValueError) as exc:
            raise ValueError(f"ADMM factorization failed: {exc}") from exc

    def __call__(self, v, x_prev):
        r = self.Atb + self.c * v
        if self.wide:
            return (r - self.A.T @ linalg.cho_solve(self.fac, self.A @ r)) / self.c
        return linalg.cho_solve(self.fac, r)


class _LogisticXStep:
    """Damped Newton on ``f(x) + (rho / 2) ||x - v||**2``."""

    def __init__(self, loss: LogisticLoss, rho: float, gtol: float = 1e-8, max_iter: int = 100):
        self.loss, self.rho, self.gtol, self.max_iter = loss, rho, gtol, max_iter

    def __call__(self, v, x_prev):
        loss, rho = self.loss, self.rho
        A, n = loss.A, loss.n

        def phi(x):
            f, g = loss.value_grad(x)
            dv = x - v
            return f + 0.5 * rho * float(dv @ dv), g + rho * dv

        x = x_prev.copy()
        val, g = phi(x)
        for _ in range(self.max_iter):
            if np.linalg.norm(g) <= self.gtol:
                break
            w = loss.hessian_weights(x)
            H = (A.T * w) @ A / n + rho * np.eye(A.shape[1])
            p = -linalg.solve(H, g, assume_a="pos")
            s = 1.0
            while True:
                xn = x + s * p
                vn, gn = phi(xn)
                if vn <= val + 1e-4 * s * float(g @ p) or s < 1e-12:
                    break
                s *= 0.5
            x, val, g = xn, vn, gn
        return x


def admm(problem: CompositeProblem, config: SolverConfig = SolverConfig(), x0=None,
         callback: Callable | None = None):
    """Scaled-dual ADMM splitting ``x`` (loss side) from ``z`` (penalty side).

    Iterates ``x = argmin f + (rho/2)||x - z + y||**2``,
    ``z = prox_{(lam/rho) psi}(x + y)``, ``y += x - z`` and stops once
    ``max(||x - z||_inf, rho ||dz||_inf) <= tol_residual``. Returns ``z``.
    """
    rho = config.admm_rho
    if not (rho > 0 and math.isfinite(rho)):
        raise ValueError(f"ADMM needs rho > 0, got {rho}")
    loss = problem.loss
    if not (np.all(np.isfinite(loss.A)) and np.all(np.isfinite(loss.b))):
        raise ValueError("ADMM factorization failed: non-finite data")
    if isinstance(loss, LeastSquaresLoss):
        xstep = _LsqXStep(loss, rho)
    elif isinstance(loss, LogisticLoss):
        xstep = _LogisticXStep(loss, rho)
    else:
        raise TypeError(f"unsupported loss {type(loss).__name__}")

    z, *parts = _start(problem, x0)
    parts = tuple(parts)
    x = z.copy()
    y = np.zeros_like(z)
    trace = IterateTrace(method="admm")
    _record(trace, problem, config, 0, z, parts, math.nan, math.nan)
    if callback is not None:
        callback(0, z)
    step, t = math.nan, 0
    for t in range(1, config.max_iters + 1):
        x = xstep(z - y, x)
        z_new = _prox(problem.par, problem.lam / rho, x + y)
        y = y + x - z_new
        step = float(np.linalg.norm(z_new - z))
        res = max(float(np.max(np.abs(x - z_new), initial=0.0)),
                  rho * float(np.max(np.abs(z_new - z), initial=0.0)))
        z = z_new
        parts = problem.parts(z)
        done = res <= config.tol_residual
        _record(trace, problem, config, t, z, parts, math.nan, step, last=done)
        if callback is not None:
            callback(t, z)
        if done:
            trace.converged = True
            break
    _finish(trace, problem, config, z, parts, math.nan, step, t)
    return z, trace
