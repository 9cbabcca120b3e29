"""Synthetic regression data, closed-form baselines and error metrics."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import linalg
from scipy.special import expit

from .losses import load_csv, save_csv
from .par import ParSpec, quantization_rate

__all__ = [
    "SyntheticSpec",
    "RegressionDataset",
    "ErrorReport",
    "gen_dataset",
    "ridge_closed_form",
    "recommended_ridge_lambda",
    "lasso_lambda_bound",
    "error_report",
    "prox_half_power",
    "RidgePenalty",
    "HalfPowerPenalty",
    "save_dataset",
    "load_dataset",
]


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic dataset.

    ``truth`` is ``"dense-gaussian"``, ``"sparse"`` (with ``sparsity``
    nonzeros) or ``"user"`` (with ``truth_vector``).
    """

    n: int
    d: int
    task: str = "linear"
    noise_sigma: float = 0.0
    truth: str = "dense-gaussian"
    sparsity: int | None = None
    truth_vector: tuple | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be >= 1")
        if self.task not in ("linear", "logistic"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.truth == "sparse":
            if self.sparsity is None or not 0 <= self.sparsity <= self.d:
                raise ValueError(f"sparsity must lie in [0, d={self.d}]")
        elif self.truth == "user":
            if self.truth_vector is None or len(self.truth_vector) != self.d:
                raise ValueError("user truth needs a vector of length d")
        elif self.truth != "dense-gaussian":
            raise ValueError(f"unknown truth {self.truth!r}")

    def to_dict(self) -> dict:
        rec = asdict(self)
        if rec["truth_vector"] is not None:
            rec["truth_vector"] = list(rec["truth_vector"])
        return rec


@dataclass(frozen=True, eq=False)
class RegressionDataset:
    A: np.ndarray
    b: np.ndarray
    x_true: np.ndarray
    spec: SyntheticSpec
    noise: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    def covariance(self) -> np.ndarray:
        """Sample covariance ``A^T A / n``."""
        return self.A.T @ self.A / self.n


@dataclass(frozen=True)
class ErrorReport:
    l2_error: float
    mahalanobis_error: float
    quantization_rate: float
    objective: float


def gen_dataset(spec: SyntheticSpec) -> RegressionDataset:
    """Gaussian design with labels from a linear or logistic model."""
    rng = np.random.default_rng(spec.seed)
    A = rng.standard_normal((spec.n, spec.d))
    if spec.truth == "dense-gaussian":
        x = rng.standard_normal(spec.d)
    elif spec.truth == "sparse":
        x = np.zeros(spec.d)
        support = rng.choice(spec.d, size=spec.sparsity, replace=False)
        x[np.sort(support)] = rng.standard_normal(spec.sparsity)
    else:
        x = np.asarray(spec.truth_vector, dtype=float)
    if spec.task == "linear":
        eps = spec.noise_sigma * rng.standard_normal(spec.n)
        b = A @ x + eps
    else:
        eps = None
        p = expit(A @ x)
        b = np.where(rng.random(spec.n) < p, 1.0, -1.0)
    return RegressionDataset(A, b, x, spec, eps)


def ridge_closed_form(dataset, lam: float) -> np.ndarray:
    """``argmin ||Ax - b||^2 / (2n) + lam ||x||^2 / 2``.

    Raises
    ------
    numpy.linalg.LinAlgError
        When ``lam = 0`` and ``A`` lacks full column rank.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    A, b = dataset.A, dataset.b
    n, d = A.shape
    try:
        if n < d and lam > 0:  # solve in the n-dimensional dual
            alpha = linalg.solve(A @ A.T + n * lam * np.eye(n), b, assume_a="pos")
            return A.T @ alpha
        return linalg.solve(A.T @ A + n * lam * np.eye(d), A.T @ b, assume_a="pos")
    except (linalg.LinAlgError, ValueError) as exc:
        raise np.linalg.LinAlgError(f"singular ridge system: {exc}") from exc


def recommended_ridge_lambda(dataset, gap: float, sigma: float, truth_norm: float) -> float:
    """``sigma / (||x*|| + sqrt(d) q) * sqrt(tr(S) / n)`` with ``S = A^T A / n``."""
    if min(gap, sigma, truth_norm) < 0:
        raise ValueError("inputs must be nonnegative")
    denom = truth_norm + math.sqrt(dataset.d) * gap
    if denom == 0:
        raise ZeroDivisionError("truth_norm and gap are both zero")
    trace = float(np.sum(dataset.A * dataset.A)) / dataset.n
    return sigma / denom * math.sqrt(trace / dataset.n)


def lasso_lambda_bound(dataset, nu: float = 1.0) -> float:
    """Oracle choice ``||A^T eps||_inf / (2 nu n)`` from the realized noise."""
    if dataset.noise is None:
        raise ValueError("dataset carries no noise realization")
    return float(np.max(np.abs(dataset.A.T @ dataset.noise))) / (2 * nu * dataset.n)


def error_report(dataset, estimate, par: ParSpec | None = None, objective: float = math.nan,
                 tol: float = 1e-6) -> ErrorReport:
    """Estimation errors of ``estimate`` against the true coefficients."""
    est = np.asarray(estimate, dtype=float)
    if est.shape != dataset.x_true.shape:
        raise ValueError(f"estimate has shape {est.shape}, expected {dataset.x_true.shape}")
    e = est - dataset.x_true
    Ae = dataset.A @ e
    maha = math.sqrt(max(float(Ae @ Ae) / dataset.n, 0.0))
    qr = quantization_rate(est, par, tol).rate if par is not None else math.nan
    return ErrorReport(float(np.linalg.norm(e)), maha, qr, float(objective))


def prox_half_power(x, lam: float) -> np.ndarray:
    """Prox of ``lam * sum(sqrt(|x_i|))``.

    Interior stationary points satisfy ``s**3 - |x| s + lam / 2 = 0`` with
    ``s = sqrt(|z|)``; the local minimizer is the largest root, found by
    bisection, and is then compared against ``z = 0`` (ties go to zero).
    """
    xa = np.asarray(x, dtype=float)
    u = np.abs(xa).ravel()
    if lam == 0:
        return xa.copy()
    s_lo = np.sqrt(u / 3.0)
    h = lambda s: s ** 3 - u * s + 0.5 * lam
    feasible = (h(s_lo) <= 0) & (u > 0)
    lo, hi = s_lo.copy(), np.sqrt(u) + 1.0
    # h(sqrt(u) + 1) > 0 always, so [lo, hi] brackets the largest root
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        neg = h(mid) < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    z = hi * hi
    inner = lam * hi + 0.5 * (z - u) ** 2
    keep = feasible & (inner < 0.5 * u * u)
    out = np.where(keep, z, 0.0) * np.sign(xa.ravel())
    return out.reshape(xa.shape)


class RidgePenalty:
    """``psi(x) = ||x||^2 / 2`` in the solver penalty interface."""

    gap = None

    def total(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ x)

    def prox(self, t: float, v) -> np.ndarray:
        return np.asarray(v, dtype=float) / (1.0 + t)

    def subgradient_bounds(self, x):
        x = np.asarray(x, dtype=float)
        return x, x


class HalfPowerPenalty:
    """``psi(x) = sum(sqrt(|x_i|))`` in the solver penalty interface."""

    gap = None

    def total(self, x) -> float:
        return float(np.sum(np.sqrt(np.abs(np.asarray(x, dtype=float)))))

    def prox(self, t: float, v) -> np.ndarray:
        return prox_half_power(v, t)

    def subgradient_bounds(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = 0.5 * np.sign(x) / np.sqrt(np.abs(x))
        return np.where(x == 0, -np.inf, g), np.where(x == 0, np.inf, g)


def save_dataset(dataset: RegressionDataset, csv_path, sidecar_path) -> None:
    """CSV of ``[A | b]`` plus a JSON sidecar with the truth and spec."""
    save_csv(csv_path, dataset.A, dataset.b)
    rec = {"x_true": [float(v) for v in dataset.x_true], "spec": dataset.spec.to_dict()}
    if dataset.noise is not None:
        rec["noise"] = [float(v) for v in dataset.noise]
    with open(sidecar_path, "w") as fh:
        json.dump(rec, fh, indent=1, sort_keys=True)


def load_dataset(csv_path, sidecar_path) -> RegressionDataset:
    A, b = load_csv(csv_path)
    with open(sidecar_path) as fh:
        rec = json.load(fh)
    spec = dict(rec["spec"])
    if spec.get("truth_vector") is not None:
        spec["truth_vector"] = tuple(spec["truth_vector"])
    noise = np.asarray(rec["noise"]) if "noise" in rec else None
    return RegressionDataset(A, b, np.asarray(rec["x_true"], float), SyntheticSpec(**spec), noise)
