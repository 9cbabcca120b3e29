"""Piecewise-affine regularizers (PARs).

A PAR is a continuous, piecewise-linear penalty whose kinks sit at target
quantization levels. Three families have closed-form proximal mappings:

* ``convex``: ``psi(x) = a_k (|x| - q_k) + b_k`` on ``q_k <= |x| <= q_{k+1}``
  with ``0 <= a_0 < a_1 < ...``; the last slope may be ``inf`` which confines
  the domain to ``[-q_m, q_m]``.
* ``quasiconvex-uniform``: slope 1 on ``[kq, (k + 1/2) q]`` and flat on
  ``[(k + 1/2) q, (k + 1) q]``, repeated for every ``k >= 0``.
* ``nonconvex-nearest``: distance to the nearest level of an arbitrary,
  possibly asymmetric, level list.

The ``general`` family accepts any symmetric slope list; its proximal map is
computed by segment enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "FAMILIES",
    "ParSpec",
    "SubgradInterval",
    "QuantizationReport",
    "build_par",
    "quasiconvex_par",
    "nonconvex_par",
    "integer_convex_par",
    "par_value",
    "par_subdifferential",
    "quantization_rate",
    "nearest_level",
    "par_approx_classic",
]

FAMILIES = ("convex", "quasiconvex-uniform", "nonconvex-nearest", "general")
SYMMETRIC = ("convex", "quasiconvex-uniform", "general")


@dataclass(frozen=True)
class SubgradInterval:
    """Closed interval ``[lo, hi]`` of Clarke subgradients."""

    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty subgradient interval [{self.lo}, {self.hi}]")

    def __contains__(self, g):
        return self.lo <= g <= self.hi


@dataclass(frozen=True)
class QuantizationReport:
    rate: float
    quantized_mask: np.ndarray
    tolerance: float


@dataclass(frozen=True, eq=False)
class ParSpec:
    """Immutable description of a piecewise-affine regularizer.

    Attributes
    ----------
    family : str
        One of :data:`FAMILIES`.
    levels : tuple of float
        Breakpoints. For symmetric families this is the nonnegative half
        ``0 = q_0 < q_1 < ... < q_m``; for ``quasiconvex-uniform`` it is one
        period ``(0, q/2)``; for ``nonconvex-nearest`` it is the full signed
        level list.
    slopes : tuple of float
        Slope of the piece starting at each breakpoint; when one shorter than
        ``levels`` the last slope also covers ``|x| > q_m``. For
        ``nonconvex-nearest`` the slopes of the pieces of the whole real line,
        left tail first.
    intercepts : tuple of float
        Value of the regularizer at each breakpoint (for ``nonconvex-nearest``
        at each level and each midpoint, interleaved).
    gap : float or None
        Uniform spacing ``q`` of the quasiconvex family.
    a_max : float
        Largest finite slope magnitude (Lipschitz constant).
    nu : float
        Linear-growth constant, ``psi(x) >= nu |x|``.
    """

    family: str
    levels: tuple
    slopes: tuple
    intercepts: tuple
    gap: float | None = None
    a_max: float = 0.0
    nu: float = 0.0
    _q: np.ndarray = field(default=None, repr=False, compare=False)
    _a: np.ndarray = field(default=None, repr=False, compare=False)
    _b: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        slopes = tuple(self.slopes)
        if self.family in SYMMETRIC and len(slopes) == len(self.levels) - 1:
            # final slope continues past the last level
            slopes = slopes + slopes[-1:]
        for name, val in (("_q", self.levels), ("_a", slopes), ("_b", self.intercepts)):
            arr = np.asarray(val, dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def symmetric(self) -> bool:
        return self.family in SYMMETRIC

    @property
    def bounded_domain(self) -> bool:
        """True when the regularizer is ``+inf`` outside a finite interval."""
        return self.family == "nonconvex-nearest" or (
            self.family == "convex" and math.isinf(self.slopes[-1]))

    def __call__(self, x):
        return par_value(self, x)

    def total(self, x) -> float:
        """Separable sum ``sum_i psi(x_i)``."""
        return float(np.sum(par_value(self, x)))

    def quantization_levels(self, radius: float | None = None) -> np.ndarray:
        """Sorted signed quantization set, truncated to ``[-radius, radius]``
        when the set is unbounded (quasiconvex family)."""
        if self.family == "quasiconvex-uniform":
            if radius is None:
                raise ValueError("quasiconvex level set is unbounded; pass a radius")
            k = math.floor(radius / self.gap) + 1
            return np.arange(-k, k + 1, dtype=float) * self.gap
        if self.family == "nonconvex-nearest":
            return self._q.copy()
        return np.concatenate([-self._q[:0:-1], self._q])

    def knots(self, radius: float = 0.0):
        """Whole-line piecewise-linear description.

        Returns ``(t, v, left_slope, right_slope)``: sorted breakpoints ``t``,
        values ``v = psi(t)`` and the slopes of the two unbounded tails. For
        the periodic quasiconvex family the breakpoints cover at least
        ``[-radius, radius]``.
        """
        if self.family == "nonconvex-nearest":
            q = self._q
            mids = 0.5 * (q[:-1] + q[1:])
            t = np.empty(2 * q.size - 1)
            t[0::2] = q
            t[1::2] = mids
            v = np.empty_like(t)
            v[0::2] = 0.0
            v[1::2] = 0.5 * np.diff(q)
            return t, v, -math.inf, math.inf
        if self.family == "quasiconvex-uniform":
            half = 0.5 * self.gap
            k = math.ceil(max(radius, self.gap) / half) + 2
            pos = np.arange(0, k + 1, dtype=float) * half
            vpos = par_value(self, pos)
            t = np.concatenate([-pos[:0:-1], pos])
            v = np.concatenate([vpos[:0:-1], vpos])
            tail = 1.0 if k % 2 == 0 else 0.0
            return t, v, -tail, tail
        q, a, b = self._q, self._a, self._b
        t = np.concatenate([-q[:0:-1], q])
        v = np.concatenate([b[:0:-1], b])
        return t, v, -a[-1], a[-1]

    def to_config(self) -> dict:
        """Plain record; intercepts are recomputed on load."""
        rec = {"family": self.family}
        if self.family == "quasiconvex-uniform":
            rec["gap"] = self.gap
            return rec
        rec["levels"] = [float(v) for v in self.levels]
        if self.family != "nonconvex-nearest":
            rec["slopes"] = ["inf" if math.isinf(s) else float(s) for s in self.slopes]
        return rec

    @classmethod
    def from_config(cls, rec: dict) -> "ParSpec":
        family = rec["family"]
        if family == "quasiconvex-uniform" and rec.get("gap") is not None:
            return quasiconvex_par(float(rec["gap"]))
        if family == "nonconvex-nearest":
            return nonconvex_par(rec["levels"])
        return build_par(rec["levels"], [float(s) for s in rec["slopes"]], family)

    def __eq__(self, other):
        if not isinstance(other, ParSpec):
            return NotImplemented
        return (self.family, self.levels, self.slopes, self.gap) == (
            other.family, other.levels, other.slopes, other.gap)

    def __hash__(self):
        return hash((self.family, self.levels, self.slopes, self.gap))


def _intercepts(levels, slopes):
    b = [0.0]
    for k in range(1, len(levels)):
        b.append(b[-1] + slopes[k - 1] * (levels[k] - levels[k - 1]))
    return tuple(b)


def build_par(levels: Sequence[float], slopes: Sequence[float] | None = None,
              family: str = "general") -> ParSpec:
    """Construct a :class:`ParSpec`, computing intercepts by the recursion
    ``b_0 = 0``, ``b_k = b_{k-1} + a_{k-1} (q_k - q_{k-1})``.

    Raises
    ------
    ValueError
        On non-monotone levels, equal adjacent slopes, misplaced infinite
        slopes or a convex slope list that is not strictly increasing.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown PAR family {family!r}; expected one of {FAMILIES}")
    if family == "nonconvex-nearest":
        spec = nonconvex_par(levels)
        if slopes is not None and tuple(float(s) for s in slopes) != spec.slopes:
            raise ValueError("nonconvex-nearest slopes must alternate -1, +1 (derived from levels)")
        return spec

    q = tuple(float(v) for v in levels)
    if slopes is None:
        raise ValueError(f"family {family!r} requires slopes")
    a = tuple(float(s) for s in slopes)
    if not q or q[0] != 0.0:
        raise ValueError("levels must start at 0 for symmetric families")
    if any(not math.isfinite(v) for v in q):
        raise ValueError("levels must be finite")
    if any(q1 <= q0 for q0, q1 in zip(q, q[1:])):
        raise ValueError(f"levels must be strictly increasing, got {q}")
    if len(a) not in (len(q), len(q) - 1) or not a:
        raise ValueError(f"need one slope per level: {len(q)} levels, {len(a)} slopes")
    if any(math.isnan(s) for s in a):
        raise ValueError("slopes must not be NaN")
    for k, (s0, s1) in enumerate(zip(a, a[1:])):
        if s0 == s1:
            raise ValueError(f"adjacent slopes a_{k} and a_{k + 1} are equal ({s0})")
    if any(math.isinf(s) for s in a[:-1]) or (math.isinf(a[-1]) and (family != "convex" or a[-1] < 0)):
        raise ValueError("an infinite slope is only allowed as the final convex slope +inf")

    if family == "convex":
        if a[0] < 0 or any(s1 <= s0 for s0, s1 in zip(a, a[1:])):
            raise ValueError(f"convex PAR needs 0 <= a_0 < a_1 < ..., got {a}")
    elif family == "quasiconvex-uniform":
        if len(q) < 2:
            raise ValueError("quasiconvex-uniform needs at least the levels (0, q/2)")
        half = q[1]
        if any(not math.isclose(v, k * half, rel_tol=1e-12, abs_tol=1e-15) for k, v in enumerate(q)):
            raise ValueError("quasiconvex-uniform levels must be uniformly spaced by q/2")
        if any(s != (1.0 if k % 2 == 0 else 0.0) for k, s in enumerate(a)):
            raise ValueError("quasiconvex-uniform slopes must alternate 1, 0, 1, 0, ...")
        return quasiconvex_par(2.0 * half)

    b = _intercepts(q, a + a[-1:])
    finite = [abs(s) for s in a if math.isfinite(s)]
    a_max = max(finite) if finite else 0.0
    if family == "convex":
        nu = a[0]
    else:
        ratios = [a[0], a[-1]] + [bk / qk for bk, qk in zip(b[1:], q[1:])]
        nu = max(0.0, min(ratios))
    return ParSpec(family, q, a, b, None, a_max, nu)


def quasiconvex_par(gap: float) -> ParSpec:
    """Quasiconvex PAR with uniform gap ``q``: levels ``{kq}``, ``a_max = 1``,
    ``nu = 1/2``."""
    gap = float(gap)
    if not gap > 0 or not math.isfinite(gap):
        raise ValueError("gap must be positive")
    return ParSpec("quasiconvex-uniform", (0.0, 0.5 * gap), (1.0, 0.0), (0.0, 0.5 * gap),
                   gap, 1.0, 0.5)


def nonconvex_par(levels: Sequence[float]) -> ParSpec:
    """Distance-to-nearest-level PAR for an arbitrary sorted level list,
    restricted to ``[q_1, q_m]`` (``+inf`` outside)."""
    q = tuple(float(v) for v in levels)
    if not q:
        raise ValueError("need at least one level")
    if any(not math.isfinite(v) for v in q):
        raise ValueError("levels must be finite")
    if any(q1 <= q0 for q0, q1 in zip(q, q[1:])):
        raise ValueError(f"levels must be strictly increasing, got {q}")
    # outside [q_1, q_m] the regularizer is +inf, so the hard-quantizer regime
    # snaps every input
    slopes = (-math.inf,) + (1.0, -1.0) * (len(q) - 1) + (math.inf,)
    inter = [0.0]
    for q0, q1 in zip(q, q[1:]):
        inter += [0.5 * (q1 - q0), 0.0]
    return ParSpec("nonconvex-nearest", q, slopes, tuple(inter), None, 1.0, 0.0)


def integer_convex_par(max_level: int, gap: float = 1.0, bounded: bool = True) -> ParSpec:
    """Convex PAR on levels ``{0, g, ..., max_level g}`` with slopes 1, 2, ...

    With ``bounded`` the final slope is ``+inf`` (domain clamp), otherwise it
    continues as ``max_level + 1``.
    """
    m = int(max_level)
    if m < 1:
        raise ValueError("max_level must be >= 1")
    levels = [k * gap for k in range(m + 1)]
    slopes = [float(k + 1) for k in range(m)] + [math.inf if bounded else float(m + 1)]
    return build_par(levels, slopes, "convex")


def par_value(par: ParSpec, x):
    """Evaluate the regularizer elementwise. Returns a float for scalar input."""
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    if par.family == "quasiconvex-uniform":
        q = par.gap
        u = np.abs(xa)
        k = np.floor(u / q)
        r = u - k * q
        out = 0.5 * k * q + np.minimum(r, 0.5 * q)
    elif par.family == "nonconvex-nearest":
        out = np.abs(xa - nearest_level(par, xa))
        out = np.where((xa < par._q[0]) | (xa > par._q[-1]), np.inf, out)
    else:
        u = np.abs(xa)
        q, a, b = par._q, par._a, par._b
        idx = np.searchsorted(q, u, side="right") - 1
        slope = a[idx]
        with np.errstate(invalid="ignore"):
            out = b[idx] + slope * (u - q[idx])
        if par.bounded_domain:
            out = np.where(u > q[-1], np.inf, out)
            out = np.where(u == q[-1], b[-1], out)
    return float(out[0]) if scalar else out


def _one_sided_slopes(par: ParSpec, x: np.ndarray):
    """Left and right derivatives of the regularizer at each entry of ``x``."""
    if par.family == "nonconvex-nearest":
        t, _, sl, sr = par.knots()
        # piece j spans [t[j-1], t[j]]; its slope is slopes[j]
        slopes = np.asarray(par.slopes)
        jr = np.searchsorted(t, x, side="right")
        jl = np.searchsorted(t, x, side="left")
        return slopes[jl], slopes[jr]

    u = np.abs(x)
    if par.family == "quasiconvex-uniform":
        g = par.gap
        at_level = u == _round_half_toward_zero(u / g) * g
        at_mid = u == (np.floor(u / g) + 0.5) * g
        rising = (u - np.floor(u / g) * g) < 0.5 * g
        inner = np.where(rising, 1.0, 0.0)
        left = np.where(at_level, 0.0, np.where(at_mid, 1.0, inner))
        right = np.where(at_level, 1.0, np.where(at_mid, 0.0, inner))
    else:
        q, a = par._q, par._a
        ir = np.searchsorted(q, u, side="right") - 1
        il = np.searchsorted(q, u, side="left") - 1
        right = a[ir]
        left = a[np.maximum(il, 0)]
    # mirror for negative inputs: psi(x) = psi(-x)
    neg = x < 0
    lo_side = np.where(neg, -right, left)
    hi_side = np.where(neg, -left, right)
    zero = x == 0
    a0 = par.slopes[0]
    lo_side = np.where(zero, -a0, lo_side)
    hi_side = np.where(zero, a0, hi_side)
    return lo_side, hi_side


def subgradient_bounds(par: ParSpec, x):
    """Vectorized Clarke subdifferential: arrays ``(lo, hi)``."""
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    left, right = _one_sided_slopes(par, xa)
    return np.minimum(left, right), np.maximum(left, right)


def par_subdifferential(par: ParSpec, x: float) -> SubgradInterval:
    """Clarke subdifferential at a scalar point: the convex hull of the two
    one-sided slopes."""
    lo, hi = subgradient_bounds(par, float(x))
    return SubgradInterval(float(lo[0]), float(hi[0]))


def _round_half_toward_zero(t):
    return np.sign(t) * np.ceil(np.abs(t) - 0.5)


def nearest_level(par: ParSpec, x):
    """Hard projection onto the quantization set. Ties go to the smaller
    magnitude, then to the smaller value."""
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    if par.family == "quasiconvex-uniform":
        out = _round_half_toward_zero(xa / par.gap) * par.gap
    else:
        lv = par.quantization_levels()
        hi = np.clip(np.searchsorted(lv, xa, side="left"), 0, lv.size - 1)
        lo = np.clip(hi - 1, 0, lv.size - 1)
        dlo = np.abs(xa - lv[lo])
        dhi = np.abs(xa - lv[hi])
        tie = dlo == dhi
        pick_lo = (dlo < dhi) | (tie & ((np.abs(lv[lo]) < np.abs(lv[hi]))
                                        | ((np.abs(lv[lo]) == np.abs(lv[hi])) & (lv[lo] <= lv[hi]))))
        out = np.where(pick_lo, lv[lo], lv[hi])
    return float(out[0]) if scalar else out


def quantization_rate(x, par: ParSpec, tol: float = 1e-6) -> QuantizationReport:
    """Fraction of coordinates within ``tol`` of the quantization set."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    mask = np.abs(xa - nearest_level(par, xa)) <= tol
    rate = float(mask.mean()) if mask.size else 1.0
    return QuantizationReport(rate, mask, tol)


def par_approx_classic(target: str, gap: float, max_level: float, bump: float = 0.25) -> ParSpec:
    """PAR interpolating a classical regularizer at the levels ``{k gap}``.

    ``square`` interpolates ``x**2 / 2`` by chords (slopes ``(k + 1/2) gap``);
    ``sqrt`` interpolates ``sqrt(|x|)`` by secants; ``abs`` returns
    ``|x| + bump * dist(|x|, gap Z)``, which touches ``|x|`` at every level
    and has kinks that actually trap iterates (a pure secant of ``|x|`` would
    be ``|x|`` itself). ``max_level`` is floor-rounded to a multiple of
    ``gap``; the last slope continues the pattern past it.
    """
    gap = float(gap)
    if not gap > 0:
        raise ValueError("gap must be positive")
    if max_level < gap:
        raise ValueError("max_level must be >= gap")
    m = int(math.floor(max_level / gap + 1e-9))
    if target == "square":
        levels = [k * gap for k in range(m + 1)]
        slopes = [(k + 0.5) * gap for k in range(m + 1)]
        return build_par(levels, slopes, "convex")
    if target == "sqrt":
        levels = [k * gap for k in range(m + 1)]
        slopes = [math.sqrt((k + 1) * gap) - math.sqrt(k * gap) for k in range(m + 1)]
        slopes = [s / gap for s in slopes]
        return build_par(levels, slopes, "general")
    if target == "abs":
        if not 0 < bump < 1:
            raise ValueError("bump must lie in (0, 1)")
        levels = [0.5 * k * gap for k in range(2 * m + 1)]
        slopes = [1.0 + bump if k % 2 == 0 else 1.0 - bump for k in range(2 * m + 1)]
        return build_par(levels, slopes, "general")
    raise ValueError(f"unknown target {target!r}; expected square, abs or sqrt")
