"""Smooth loss terms and the composite objective ``f(x) + lam * psi(x)``."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .par import ParSpec

__all__ = [
    "LeastSquaresLoss",
    "LogisticLoss",
    "CompositeProblem",
    "loss_eval",
    "lipschitz_bound",
    "objective",
    "load_csv",
    "save_csv",
]


class _Loss:
    A: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValueError(f"expected a vector of length {self.d}, got shape {x.shape}")
        return x

    def value(self, x) -> float:
        return self.value_grad(x)[0]

    def grad(self, x) -> np.ndarray:
        return self.value_grad(x)[1]


@dataclass(frozen=True, eq=False)
class LeastSquaresLoss(_Loss):
    """``f(x) = ||A x - b||^2 / (2n)``."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if A.ndim != 2 or b.shape != (A.shape[0],):
            raise ValueError(f"incompatible shapes A{A.shape}, b{b.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    def value_grad(self, x):
        x = self._check(x)
        r = self.A @ x - self.b
        return float(r @ r) / (2 * self.n), self.A.T @ r / self.n


@dataclass(frozen=True, eq=False)
class LogisticLoss(_Loss):
    """``f(x) = mean(log(1 + exp(-b_i <a_i, x>)))`` with labels in {-1, +1}."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if A.ndim != 2 or b.shape != (A.shape[0],):
            raise ValueError(f"incompatible shapes A{A.shape}, b{b.shape}")
        if not np.all(np.abs(b) == 1):
            raise ValueError("logistic labels must be -1 or +1")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    def value_grad(self, x):
        x = self._check(x)
        margin = self.b * (self.A @ x)
        val = float(np.mean(np.logaddexp(0.0, -margin)))
        w = -self.b * expit(-margin)
        return val, self.A.T @ w / self.n

    def hessian_weights(self, x) -> np.ndarray:
        """Diagonal ``D`` with ``hess f(x) = A^T D A / n``."""
        p = expit(self.A @ np.asarray(x, float))
        return p * (1.0 - p)


def loss_eval(loss, x):
    """Return ``(f(x), grad f(x))`` from one pass."""
    return loss.value_grad(x)


def _power_iteration(M, tol=1e-6, max_iter=1000, seed=0):
    v = np.random.default_rng(seed).standard_normal(M.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = M @ v
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 0.0, True
        v = w / nrm
        new = float(v @ (M @ v))
        if abs(new - est) <= tol * abs(new):
            return new, True
        est = new
    return est, False


def lipschitz_bound(loss, tol: float = 1e-6, max_iter: int = 1000) -> float:
    """Upper bound on the Lipschitz constant of ``grad f``.

    Power iteration on the smaller Gram matrix of ``A``, inflated by 1%; falls
    back to the Frobenius bound when it does not converge. The logistic
    constant carries an extra factor 1/4.
    """
    A = loss.A
    n = loss.n
    fro = float(np.sum(A * A))
    gram = A @ A.T if A.shape[0] <= A.shape[1] else A.T @ A
    lam_max, ok = _power_iteration(gram, tol, max_iter)
    top = min(1.01 * lam_max, fro) if ok else fro
    scale = 0.25 if isinstance(loss, LogisticLoss) else 1.0
    return scale * top / n


@dataclass(frozen=True, eq=False)
class CompositeProblem:
    """``F(x) = f(x) + lam * psi(x)``."""

    loss: _Loss
    par: ParSpec
    lam: float

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam}")

    @property
    def d(self) -> int:
        return self.loss.d

    def penalty(self, x) -> float:
        return self.par.total(x)

    def objective(self, x) -> float:
        return objective(self, x)

    def parts(self, x):
        """``(F, f, psi)`` at ``x``."""
        f = self.loss.value(x)
        psi = self.penalty(x)
        # the domain of a bounded PAR is a hard constraint even at lam = 0
        reg = psi if math.isinf(psi) else self.lam * psi
        return f + reg, f, psi


def objective(problem: CompositeProblem, x) -> float:
    """``f(x) + lam * psi(x)``; ``+inf`` outside a bounded PAR domain."""
    return problem.parts(x)[0]


def save_csv(path, A, b) -> None:
    """Write features then the response as the last column."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row, target in zip(np.asarray(A, float), np.asarray(b, float)):
            w.writerow([repr(float(v)) for v in row] + [repr(float(target))])


def load_csv(path):
    """Inverse of :func:`save_csv`; returns ``(A, b)``."""
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    return data[:, :-1].copy(), data[:, -1].copy()
