"""Proximal mappings ``argmin_z lam * psi(z) + (x - z)**2 / 2`` of PARs.

Closed forms exist for the convex, quasiconvex-uniform and nonconvex-nearest
families. :func:`prox_oracle` solves the same problem by brute-force segment
enumeration and serves as ground truth in the tests; :func:`prox_segments`
is its vectorized counterpart, used for the ``general`` family.

Where the minimizer is not unique the smaller ``|z|`` wins, then the smaller
``z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .par import ParSpec, nearest_level, par_value

__all__ = ["ProxResult", "prox_scalar", "prox_oracle", "prox_vector", "prox_segments",
           "prox_objective", "prox_table"]

# relative objective slack inside which candidates count as tied
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class ProxResult:
    point: float
    objective: float
    at_level: int | None = None


def prox_objective(par: ParSpec, lam: float, x, z):
    """``lam * psi(z) + (x - z)**2 / 2`` (elementwise)."""
    psi = par_value(par, z)
    if lam == 0:
        psi = np.where(np.isinf(psi), psi, 0.0)
    return lam * psi + 0.5 * (np.asarray(x, float) - np.asarray(z, float)) ** 2


def _level_index(par: ParSpec, z: float) -> int | None:
    """Signed index of ``z`` in the quantization set, or None."""
    if not math.isfinite(z):
        return None
    if par.family == "quasiconvex-uniform":
        k = round(z / par.gap)
        return k if k * par.gap == z or abs(z - k * par.gap) <= 1e-15 * max(1.0, abs(z)) else None
    if par.family == "nonconvex-nearest":
        hits = np.flatnonzero(par._q == z)
        return int(hits[0]) if hits.size else None
    hits = np.flatnonzero(par._q == abs(z))
    if not hits.size:
        return None
    return int(hits[0]) if z >= 0 else -int(hits[0])


# --- closed forms (vectorized) -------------------------------------------------

def _prox_convex(par: ParSpec, lam: float, x: np.ndarray):
    q, a = par._q, par._a
    u = np.abs(x)
    m = q.size - 1
    # band edges: snap_k ends at q_k + lam a_k, slide_k ends at q_{k+1} + lam a_k
    edges = np.empty(2 * m + 1)
    edges[0::2] = q + lam * a
    edges[1::2] = q[1:] + lam * a[:-1]
    j = np.searchsorted(edges, u, side="left")
    snap = j % 2 == 0
    k = j // 2
    out = np.where(snap, q[np.minimum(k, m)], u - lam * a[np.minimum(k, m)])
    return np.sign(x) * out, snap


def _round_half_down(t):
    return np.ceil(t - 0.5)


def _prox_quasiconvex(par: ParSpec, lam: float, x: np.ndarray):
    g = par.gap
    u = np.abs(x)
    if lam >= g:
        k = np.maximum(_round_half_down((u - 0.5 * lam) / g), 0.0)
        out = k * g
        snap = np.ones(x.shape, dtype=bool)
    else:
        k = np.floor(u / g)
        r = u - k * g
        snap = r < lam
        slide = ~snap & (r <= 0.5 * (g + lam))
        out = np.where(snap, k * g, np.where(slide, u - lam, u))
    return np.sign(x) * out, snap


def _prox_nonconvex(par: ParSpec, lam: float, x: np.ndarray):
    q = par._q
    xc = np.clip(x, q[0], q[-1])
    if q.size == 1:
        return xc, np.ones(x.shape, dtype=bool)
    k = np.clip(np.searchsorted(q, xc, side="right") - 1, 0, q.size - 2)
    lo, hi = q[k], q[k + 1]
    mid = 0.5 * (lo + hi)
    down = np.clip(xc - lam, lo, mid)
    up = np.clip(xc + lam, mid, hi)
    out = np.where(xc < mid, down, up)
    # exact midpoint: both halves give the same objective
    tie = xc == mid
    if np.any(tie):
        pick_down = (np.abs(down) < np.abs(up)) | ((np.abs(down) == np.abs(up)) & (down <= up))
        out = np.where(tie & pick_down, down, out)
    snap = (out == lo) | (out == hi)
    return out, snap


def prox_segments(par: ParSpec, lam: float, x) -> np.ndarray:
    """Vectorized segment enumeration; valid for every family."""
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if lam == 0:
        return _clip_domain(par, xa)
    radius = float(np.max(np.abs(xa))) + lam * par.a_max + 2 * (par.gap or 0.0)
    t, v, sl, sr = par.knots(radius)
    slopes = np.diff(v) / np.diff(t)
    X = xa[:, None]
    cands = [np.broadcast_to(t, (xa.size, t.size))]
    vals = [np.broadcast_to(v, (xa.size, t.size))]
    if t.size > 1:
        z = np.clip(X - lam * slopes, t[:-1], t[1:])
        cands.append(z)
        vals.append(v[:-1] + slopes * (z - t[:-1]))
    if math.isfinite(sl):
        z = np.minimum(X - lam * sl, t[0])
        cands.append(z)
        vals.append(v[0] + sl * (z - t[0]))
    if math.isfinite(sr):
        z = np.maximum(X - lam * sr, t[-1])
        cands.append(z)
        vals.append(v[-1] + sr * (z - t[-1]))
    Z = np.concatenate(cands, axis=1)
    obj = lam * np.concatenate(vals, axis=1) + 0.5 * (X - Z) ** 2
    best = obj.min(axis=1, keepdims=True)
    near = obj <= best + TIE_RTOL * (1.0 + np.abs(best))
    # among tied candidates: smallest |z|, then smallest z
    key = np.where(near, np.abs(Z), np.inf)
    kmin = key.min(axis=1, keepdims=True)
    key2 = np.where(near & (key == kmin), Z, np.inf)
    return key2.min(axis=1)


def _prox_windowed(par: ParSpec, lam: float, x: np.ndarray):
    """Segment enumeration restricted to ``[x - lam a_max, x + lam a_max]``.

    With finite slopes every local minimizer satisfies ``|z - x| <= lam a_max``,
    so only the knots in that window (and the segments touching it) matter.
    """
    radius = float(np.max(np.abs(x), initial=0.0)) + lam * par.a_max + 2 * (par.gap or 0.0)
    t, v, sl, sr = par.knots(radius)
    K = t.size
    w = lam * par.a_max * (1 + 1e-12) + 1e-300
    lo = np.clip(np.searchsorted(t, x - w, side="left") - 1, 0, K - 1)
    hi = np.clip(np.searchsorted(t, x + w, side="right"), 0, K - 1)
    width = int(np.max(hi - lo, initial=0)) + 1
    idx = lo[:, None] + np.arange(width)
    valid = idx <= hi[:, None]
    idx = np.minimum(idx, K - 1)
    X = x[:, None]
    cands = [t[idx]]
    vals = [np.where(valid, v[idx], np.inf)]
    if K > 1:
        j = np.minimum(idx, K - 2)
        seg_ok = valid & (idx < K - 1) & (idx + 1 <= hi[:, None])
        slope = (v[j + 1] - v[j]) / (t[j + 1] - t[j])
        z = np.clip(X - lam * slope, t[j], t[j + 1])
        cands.append(z)
        vals.append(np.where(seg_ok, v[j] + slope * (z - t[j]), np.inf))
    zl = np.minimum(x - lam * sl, t[0])
    zr = np.maximum(x - lam * sr, t[-1])
    cands += [zl[:, None], zr[:, None]]
    vals += [(v[0] + sl * (zl - t[0]))[:, None], (v[-1] + sr * (zr - t[-1]))[:, None]]
    Z = np.concatenate(cands, axis=1)
    obj = lam * np.concatenate(vals, axis=1) + 0.5 * (X - Z) ** 2
    best = obj.min(axis=1, keepdims=True)
    near = obj <= best + TIE_RTOL * (1.0 + np.abs(best))
    key = np.where(near, np.abs(Z), np.inf)
    kmin = key.min(axis=1, keepdims=True)
    return np.where(near & (key == kmin), Z, np.inf).min(axis=1)


def _clip_domain(par: ParSpec, x: np.ndarray) -> np.ndarray:
    if par.family == "nonconvex-nearest":
        return np.clip(x, par._q[0], par._q[-1])
    if par.bounded_domain:
        return np.clip(x, -par._q[-1], par._q[-1])
    return x.copy()


_CLOSED_FORMS = {
    "convex": _prox_convex,
    "quasiconvex-uniform": _prox_quasiconvex,
    "nonconvex-nearest": _prox_nonconvex,
}


def prox_vector(par: ParSpec, lam: float, x, *, allow_general: bool = True) -> np.ndarray:
    """Coordinatewise proximal map of ``lam * psi``.

    The ``general`` family uses a windowed segment enumeration unless
    ``allow_general`` is false.
    """
    if lam < 0 or not math.isfinite(lam):
        raise ValueError(f"lambda must be finite and >= 0, got {lam}")
    xa = np.asarray(x, dtype=float)
    if lam == 0:
        return _clip_domain(par, np.atleast_1d(xa)).reshape(xa.shape)
    fn = _CLOSED_FORMS.get(par.family)
    if fn is None:
        if not allow_general:
            raise ValueError("no closed-form prox for the general family; use prox_oracle")
        return _prox_windowed(par, lam, xa.ravel()).reshape(xa.shape)
    out, _ = fn(par, lam, xa.ravel())
    return out.reshape(xa.shape)


def prox_scalar(par: ParSpec, lam: float, x: float) -> ProxResult:
    """Closed-form prox of a scalar.

    Raises
    ------
    ValueError
        For the ``general`` family, which has no coded closed form.
    """
    z = float(prox_vector(par, lam, np.array([float(x)]), allow_general=False)[0])
    obj = float(prox_objective(par, lam, x, z))
    return ProxResult(z, obj, _level_index(par, z))


def prox_oracle(par: ParSpec, lam: float, x: float) -> ProxResult:
    """Brute-force prox of a scalar.

    Minimizes the strongly convex quadratic on every segment of the
    regularizer (unconstrained minimizer clamped to the segment), adds every
    breakpoint as a candidate and keeps the global best. Segments are taken
    within the radius ``|x| + lam * a_max + 2 * gap``.
    """
    x = float(x)
    lam = float(lam)
    radius = abs(x) + lam * par.a_max + 2 * (par.gap or 0.0)
    t, v, sl, sr = par.knots(radius)
    t = [float(s) for s in t]
    v = [float(s) for s in v]

    def obj(z, psi):
        return (lam * psi if lam else 0.0) + 0.5 * (x - z) ** 2

    cands = [(obj(tj, vj), tj) for tj, vj in zip(t, v)]
    for j in range(1, len(t)):
        s = (v[j] - v[j - 1]) / (t[j] - t[j - 1])
        z = min(max(x - lam * s, t[j - 1]), t[j])
        cands.append((obj(z, v[j - 1] + s * (z - t[j - 1])), z))
    if math.isfinite(sl):
        z = min(x - lam * sl, t[0])
        cands.append((obj(z, v[0] + sl * (z - t[0])), z))
    if math.isfinite(sr):
        z = max(x - lam * sr, t[-1])
        cands.append((obj(z, v[-1] + sr * (z - t[-1])), z))

    best = min(c[0] for c in cands)
    tied = [z for o, z in cands if o <= best + TIE_RTOL * (1.0 + abs(best))]
    z = min(tied, key=lambda s: (abs(s), s))
    return ProxResult(z, obj(z, float(par_value(par, z))), _level_index(par, z))


def prox_table(par: ParSpec, lam: float, xs) -> list[dict]:
    """Rows ``(x, prox_closed_form, prox_oracle, abs_diff)`` over a grid."""
    xs = np.asarray(xs, dtype=float)
    closed = prox_vector(par, lam, xs)
    rows = []
    for xi, ci in zip(xs, closed):
        oi = prox_oracle(par, lam, xi).point
        rows.append({"x": float(xi), "prox_closed_form": float(ci),
                     "prox_oracle": oi, "abs_diff": abs(float(ci) - oi)})
    return rows


def project_levels(par: ParSpec, x) -> np.ndarray:
    """Hard projection ``Q(x)`` onto the quantization set."""
    return nearest_level(par, x)
