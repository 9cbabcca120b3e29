"""Config-driven experiment runners that emit flat CSV tables.

Every runner takes a nested config dict (see :data:`DEFAULTS`), splits the
sweep into independent cells, optionally runs them in a process pool, and
returns ``{table_name: rows}`` with rows in deterministic key order. Nothing
is aggregated across seeds; that is left to downstream analysis.
"""

from __future__ import annotations

import copy
import csv
import io
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields

import numpy as np

from .losses import CompositeProblem, LeastSquaresLoss, LogisticLoss
from .par import (ParSpec, build_par, integer_convex_par, nearest_level, nonconvex_par,
                  par_approx_classic, quasiconvex_par)
from .prox import prox_table
from .solvers import (TRACE_COLUMNS, SolverConfig, accelerated_proximal_gradient, admm,
                      check_criticality, proximal_gradient)
from .statbench import (HalfPowerPenalty, RidgePenalty, SyntheticSpec, error_report,
                        gen_dataset, lasso_lambda_bound, recommended_ridge_lambda,
                        ridge_closed_form)

__all__ = ["DEFAULTS", "EXPERIMENTS", "resolve_config", "run_experiment", "tables_to_csv",
           "write_tables", "solver_from_config", "SOLVERS"]

SOLVERS = {"pg": proximal_gradient, "acc_pg": accelerated_proximal_gradient, "admm": admm}

_LAM_GRID = [float(v) for v in np.logspace(-4, 2, 20)]

DEFAULTS: dict = {
    "quantsweep": {
        "dataset": {"d": 200, "noise_sigma": 0.0, "truth": "dense-gaussian"},
        "sweep": {"n": [20], "lam": _LAM_GRID, "seeds": list(range(10))},
        "par": {"gap": 1.0, "max_level": None},
        "solver": {"name": "admm", "max_iters": 20000, "tol_residual": 1e-9, "admm_rho": "auto"},
    },
    "solvers": {
        "dataset": {"n": 20, "d": 200, "noise_sigma": 0.1, "truth": "dense-gaussian"},
        "sweep": {"lam": [1.0], "seeds": list(range(10)),
                  "families": ["convex", "quasiconvex-uniform", "nonconvex-nearest"],
                  "solvers": ["pg", "acc_pg", "admm"]},
        "par": {"gap": 1.0, "max_level": None},
        "solver": {"max_iters": 3000, "tol_residual": 1e-10, "admm_rho": 1.0},
        "gap_tol": 1e-6,
        "traces": True,
    },
    "parcompare": {
        "dataset": {"n": 100, "d": 1000, "noise_sigma": 0.1, "truth": "dense-gaussian"},
        "sweep": {"lam": [0.01, 0.015, 0.02, 0.05], "seeds": list(range(3)),
                  "families": ["convex", "quasiconvex-uniform", "nonconvex-nearest"]},
        "par": {"gap": 0.5, "max_level": None},
        "solver": {"name": "admm", "max_iters": 500, "tol_residual": 1e-8, "admm_rho": 1.0},
        "traces": True,
    },
    "statcompare": {
        "dataset": {"d": 200, "noise_sigma": 0.1, "truth": "sparse", "sparsity": 20},
        "sweep": {"n": [100, 200, 400], "seeds": list(range(10)),
                  "tasks": ["linear", "logistic"], "gaps": [0.1, 0.05, 0.01],
                  "regularizers": ["ridge", "l1", "l0.5"]},
        "lam": {"ridge": "recommended", "l1": "oracle", "l0.5": 0.01, "logistic": 0.01},
        "par": {"max_level": None, "bump": 0.25},
        "solver": {"name": "acc_pg", "max_iters": 3000, "tol_residual": 1e-9},
    },
    "prox-table": {
        "par": {"family": "convex", "levels": [0.0, 1.0, 2.0], "slopes": [1.0, 2.0, 3.0],
                "gap": None},
        "lam": 0.5,
        "grid": {"start": -4.0, "stop": 4.0, "num": 81},
    },
    "solve": {
        "dataset": {"csv": None, "n": 20, "d": 50, "task": "linear", "noise_sigma": 0.1,
                    "truth": "dense-gaussian", "seed": 0},
        "par": {"family": "convex", "levels": [0.0, 1.0, 2.0], "slopes": [1.0, 2.0, "inf"],
                "gap": None},
        "lam": 0.1,
        "solver": {"name": "admm", "max_iters": 1000, "tol_residual": 1e-8},
    },
}

_COMMON = {"experiment": None, "output_dir": "results", "workers": 1}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in out:
            raise KeyError(f"unknown config field {path + k!r}")
        if isinstance(out[k], dict) and isinstance(v, dict):
            out[k] = _merge(out[k], v, path + k + ".")
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve_config(cfg: dict) -> dict:
    """Fill in defaults for ``cfg["experiment"]`` and reject unknown fields."""
    name = cfg.get("experiment")
    if name not in DEFAULTS:
        raise ValueError(f"unknown experiment {name!r}; choose from {sorted(DEFAULTS)}")
    base = dict(_COMMON, **copy.deepcopy(DEFAULTS[name]))
    out = _merge(base, cfg)
    sweep = out.get("sweep", {})
    for axis, vals in sweep.items():
        if isinstance(vals, list) and not vals:
            raise ValueError(f"sweep axis {axis!r} is empty")
    return out


def solver_from_config(block: dict, lam: float = 1.0) -> tuple[str, SolverConfig]:
    """Split a ``solver`` block into the solver name and a :class:`SolverConfig`.

    ``admm_rho: auto`` resolves to ``clip(10 lam, 1e-3, 1)``.
    """
    block = dict(block)
    name = block.pop("name", "admm")
    if name not in SOLVERS:
        raise ValueError(f"unknown solver {name!r}")
    if block.get("admm_rho") == "auto":
        block["admm_rho"] = float(np.clip(10 * lam, 1e-3, 1.0))
    allowed = {f.name for f in fields(SolverConfig)}
    bad = set(block) - allowed
    if bad:
        raise KeyError(f"unknown solver fields {sorted(bad)}")
    return name, SolverConfig(**block)


def _levels_max(x_true, gap, max_level):
    if max_level is not None:
        return int(max_level)
    return max(1, int(math.ceil(2 * float(np.max(np.abs(x_true))) / gap)))


def _family_par(family: str, gap: float, m: int) -> ParSpec:
    if family == "convex":
        return integer_convex_par(m, gap)
    if family == "quasiconvex-uniform":
        return quasiconvex_par(gap)
    if family == "nonconvex-nearest":
        return nonconvex_par([k * gap for k in range(-m, m + 1)])
    raise ValueError(f"unknown family {family!r}")


def _status_row(exc: Exception) -> str:
    return f"error:{type(exc).__name__}:{exc}".replace("\n", " ")


# --- cells -----------------------------------------------------------------------

def _cell_quantsweep(cfg, n, lam, seed):
    ds_cfg = cfg["dataset"]
    d = ds_cfg["d"]
    ds = gen_dataset(SyntheticSpec(n=n, d=d, task="linear", noise_sigma=ds_cfg["noise_sigma"],
                                   truth=ds_cfg["truth"], seed=seed))
    gap = cfg["par"]["gap"]
    par = integer_convex_par(_levels_max(ds.x_true, gap, cfg["par"]["max_level"]), gap)
    row = {"n": n, "d": d, "lambda": lam, "seed": seed, "family": "convex",
           "bound": max(0.0, 1 - n / d)}
    try:
        name, scfg = solver_from_config(cfg["solver"], lam)
        prob = CompositeProblem(LeastSquaresLoss(ds.A, ds.b), par, lam)
        x, tr = SOLVERS[name](prob, scfg)
        crit = check_criticality(prob, x).residual
        last = tr.rows[-1]
        row.update(qrate=last[6], train_loss=last[2], objective=last[1], crit_residual=crit,
                   iters=tr.n_iter, converged=int(tr.converged), status="ok")
    except Exception as exc:  # recorded, not raised
        row.update(qrate=math.nan, train_loss=math.nan, objective=math.nan,
                   crit_residual=math.nan, iters=0, converged=0, status=_status_row(exc))
    return {"results": [row]}


def _iters_to(F, target):
    hit = np.flatnonzero(F <= target)
    return int(hit[0]) if hit.size else math.inf


def _cell_solvers(cfg, family, lam, seed):
    ds_cfg = cfg["dataset"]
    ds = gen_dataset(SyntheticSpec(n=ds_cfg["n"], d=ds_cfg["d"], task="linear",
                                   noise_sigma=ds_cfg["noise_sigma"], truth=ds_cfg["truth"],
                                   seed=seed))
    gap = cfg["par"]["gap"]
    par = _family_par(family, gap, _levels_max(ds.x_true, gap, cfg["par"]["max_level"]))
    prob = CompositeProblem(LeastSquaresLoss(ds.A, ds.b), par, lam)
    qpar = _family_par("nonconvex-nearest", gap,
                       _levels_max(ds.x_true, gap, cfg["par"]["max_level"]))
    key = {"seed": seed, "lambda": lam, "n": ds.n, "d": ds.d, "family": family}
    runs = {}
    for sname in cfg["sweep"]["solvers"]:
        fq = []
        cb = lambda t, x: fq.append(prob.loss.value(nearest_level(qpar, x)))
        try:
            _, scfg = solver_from_config(dict(cfg["solver"], name=sname), lam)
            x, tr = SOLVERS[sname](prob, scfg, callback=cb)
            runs[sname] = (x, tr, fq, "ok")
        except Exception as exc:
            runs[sname] = (None, None, fq, _status_row(exc))
    finals = [np.nanmin(r[1].column("F")) for r in runs.values() if r[1] is not None]
    F_star = min(finals) if finals else math.nan
    target = F_star + cfg["gap_tol"] * max(1.0, abs(F_star))
    traces, summary = [], []
    for sname, (x, tr, fq, status) in runs.items():
        row = dict(key, solver=sname, status=status)
        if tr is None:
            row.update(iters=0, converged=0, final_F=math.nan, best_F=math.nan,
                       final_qrate=math.nan, crit_residual=math.nan, iters_to_gap=math.inf,
                       best_fQ=math.nan, F_star=F_star)
            summary.append(row)
            continue
        F = tr.column("F")
        row.update(iters=tr.n_iter, converged=int(tr.converged), final_F=float(F[-1]),
                   best_F=float(np.min(F)), final_qrate=tr.rows[-1][6],
                   crit_residual=tr.rows[-1][7], iters_to_gap=_iters_to(F, target),
                   best_fQ=float(min(fq)), F_star=F_star)
        summary.append(row)
        if cfg["traces"]:
            for r, q in zip(tr.rows, fq):
                rec = dict(key, solver=sname)
                rec.update(zip(TRACE_COLUMNS, r))
                rec["iter"] = int(r[0])
                rec["fQ"] = q
                traces.append(rec)
    return {"summary": summary, "traces": traces}


def _cell_parcompare(cfg, family, lam, seed):
    ds_cfg = cfg["dataset"]
    ds = gen_dataset(SyntheticSpec(n=ds_cfg["n"], d=ds_cfg["d"], task="linear",
                                   noise_sigma=ds_cfg["noise_sigma"], truth=ds_cfg["truth"],
                                   seed=seed))
    gap = cfg["par"]["gap"]
    m = _levels_max(ds.x_true, gap, cfg["par"]["max_level"])
    par = _family_par(family, gap, m)
    qpar = _family_par("nonconvex-nearest", gap, m)  # the shared level set
    prob = CompositeProblem(LeastSquaresLoss(ds.A, ds.b), par, lam)
    key = {"seed": seed, "lambda": lam, "n": ds.n, "d": ds.d, "family": family}
    fq = []
    row = dict(key)
    traces = []
    try:
        name, scfg = solver_from_config(cfg["solver"], lam)
        x, tr = SOLVERS[name](prob, scfg,
                              callback=lambda t, x: fq.append(
                                  prob.loss.value(nearest_level(qpar, x))))
        row.update(solver=name, iters=tr.n_iter, converged=int(tr.converged),
                   final_fQ=fq[-1], best_fQ=float(min(fq)), final_F=tr.rows[-1][1],
                   final_qrate=tr.rows[-1][6], status="ok")
        if cfg["traces"]:
            for t, q in enumerate(fq):
                traces.append(dict(key, iter=t, fQ=q))
    except Exception as exc:
        row.update(solver=cfg["solver"].get("name", "admm"), iters=0, converged=0,
                   final_fQ=math.nan, best_fQ=math.nan, final_F=math.nan,
                   final_qrate=math.nan, status=_status_row(exc))
    return {"summary": [row], "traces": traces}


def _stat_lambda(cfg, ds, reg, task, gap):
    spec = cfg["lam"]["logistic"] if task == "logistic" else cfg["lam"][reg]
    if spec == "recommended":
        return recommended_ridge_lambda(ds, gap, ds.spec.noise_sigma,
                                        float(np.linalg.norm(ds.x_true)))
    if spec == "oracle":
        return lasso_lambda_bound(ds, 1.0)
    return float(spec)


_CLASSIC = {"ridge": "square", "l1": "abs", "l0.5": "sqrt"}


def _cell_statcompare(cfg, task, n, seed):
    ds_cfg = cfg["dataset"]
    ds = gen_dataset(SyntheticSpec(n=n, d=ds_cfg["d"], task=task,
                                   noise_sigma=ds_cfg["noise_sigma"], truth=ds_cfg["truth"],
                                   sparsity=ds_cfg.get("sparsity"), seed=seed))
    loss = LeastSquaresLoss(ds.A, ds.b) if task == "linear" else LogisticLoss(ds.A, ds.b)
    name, scfg = solver_from_config(cfg["solver"])
    reach = 2 * float(np.max(np.abs(ds.x_true))) + 1.0
    rows = []
    for reg in cfg["sweep"]["regularizers"]:
        # the classic fit uses the finest-gap lambda so both sides match
        for approx, gap in [("classic", None)] + [("par", g) for g in cfg["sweep"]["gaps"]]:
            lam = _stat_lambda(cfg, ds, reg, task, min(cfg["sweep"]["gaps"]))
            row = {"seed": seed, "lambda": lam, "n": n, "d": ds.d, "family": reg,
                   "task": task, "approx": approx, "gap": gap if gap is not None else math.nan}
            try:
                if approx == "classic":
                    pen = {"ridge": RidgePenalty(), "l1": build_par([0.0], [1.0], "convex"),
                           "l0.5": HalfPowerPenalty()}[reg]
                else:
                    top = cfg["par"]["max_level"] or max(gap, math.ceil(reach / gap) * gap)
                    pen = par_approx_classic(_CLASSIC[reg], gap, top, cfg["par"]["bump"])
                prob = CompositeProblem(loss, pen, lam)
                if approx == "classic" and reg == "ridge" and task == "linear":
                    x = ridge_closed_form(ds, lam)
                    iters, conv = 0, 1
                else:
                    x, tr = SOLVERS[name](prob, scfg)
                    iters, conv = tr.n_iter, int(tr.converged)
                rep = error_report(ds, x, pen if approx == "par" else None, prob.objective(x))
                row.update(l2_error=rep.l2_error, mahalanobis_error=rep.mahalanobis_error,
                           qrate=rep.quantization_rate, objective=rep.objective,
                           iters=iters, converged=conv, status="ok")
            except Exception as exc:
                row.update(l2_error=math.nan, mahalanobis_error=math.nan, qrate=math.nan,
                           objective=math.nan, iters=0, converged=0, status=_status_row(exc))
            rows.append(row)
    return {"results": rows}


def _run_cells(fn, cfg, cells):
    workers = int(cfg.get("workers") or 1)
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_call, [(fn, cfg, c) for c in cells]))
    else:
        parts = [fn(cfg, *c) for c in cells]
    tables: dict[str, list] = {}
    for part in parts:  # cells were enumerated in key order
        for name, rows in part.items():
            tables.setdefault(name, []).extend(rows)
    return tables


def _call(args):
    fn, cfg, cell = args
    return fn(cfg, *cell)


def run_quantsweep(cfg: dict) -> dict:
    sw = cfg["sweep"]
    cells = [(n, float(lam), int(s)) for n in sorted(sw["n"]) for lam in sorted(sw["lam"])
             for s in sorted(sw["seeds"])]
    return _run_cells(_cell_quantsweep, cfg, cells)


def run_solvers(cfg: dict) -> dict:
    sw = cfg["sweep"]
    cells = [(fam, float(lam), int(s)) for fam in sw["families"] for lam in sorted(sw["lam"])
             for s in sorted(sw["seeds"])]
    return _run_cells(_cell_solvers, cfg, cells)


def run_parcompare(cfg: dict) -> dict:
    sw = cfg["sweep"]
    cells = [(fam, float(lam), int(s)) for fam in sw["families"] for lam in sorted(sw["lam"])
             for s in sorted(sw["seeds"])]
    tables = _run_cells(_cell_parcompare, cfg, cells)
    # per (seed, family): the lambda whose best f(Q(x)) is lowest
    best = {}
    for row in tables["summary"]:
        k = (row["family"], row["seed"])
        if row["status"] == "ok" and (k not in best or row["best_fQ"] < best[k]["best_fQ"]):
            best[k] = row
    tables["best"] = [dict(best[k]) for k in sorted(best, key=lambda k: (sw["families"].index(k[0]), k[1]))]
    return tables


def run_statcompare(cfg: dict) -> dict:
    sw = cfg["sweep"]
    cells = [(task, int(n), int(s)) for task in sw["tasks"] for n in sorted(sw["n"])
             for s in sorted(sw["seeds"])]
    return _run_cells(_cell_statcompare, cfg, cells)


def run_prox_table(cfg: dict) -> dict:
    par = ParSpec.from_config(cfg["par"])
    g = cfg["grid"]
    xs = np.linspace(float(g["start"]), float(g["stop"]), int(g["num"]))
    lam = float(cfg["lam"])
    key = {"lambda": lam, "family": par.family}
    return {"results": [dict(key, **r) for r in prox_table(par, lam, xs)]}


def run_solve(cfg: dict) -> dict:
    ds_cfg = cfg["dataset"]
    if ds_cfg.get("csv"):
        from .losses import load_csv
        A, b = load_csv(ds_cfg["csv"])
    else:
        ds = gen_dataset(SyntheticSpec(n=ds_cfg["n"], d=ds_cfg["d"], task=ds_cfg["task"],
                                       noise_sigma=ds_cfg["noise_sigma"],
                                       truth=ds_cfg["truth"], seed=ds_cfg["seed"]))
        A, b = ds.A, ds.b
    loss = LeastSquaresLoss(A, b) if ds_cfg["task"] == "linear" else LogisticLoss(A, b)
    par = ParSpec.from_config(cfg["par"])
    lam = float(cfg["lam"])
    name, scfg = solver_from_config(cfg["solver"], lam)
    x, tr = SOLVERS[name](CompositeProblem(loss, par, lam), scfg)
    key = {"seed": ds_cfg["seed"], "lambda": lam, "n": A.shape[0], "d": A.shape[1],
           "family": par.family, "solver": name}
    trace = []
    for r in tr.rows:
        rec = dict(key)
        rec.update(zip(TRACE_COLUMNS, r))
        rec["iter"] = int(r[0])
        trace.append(rec)
    sol = [dict(key, index=i, value=float(v)) for i, v in enumerate(x)]
    return {"trace": trace, "solution": sol}


EXPERIMENTS = {
    "quantsweep": run_quantsweep,
    "solvers": run_solvers,
    "parcompare": run_parcompare,
    "statcompare": run_statcompare,
    "prox-table": run_prox_table,
    "solve": run_solve,
}


def run_experiment(cfg: dict) -> dict:
    """Resolve defaults and dispatch on ``cfg["experiment"]``."""
    cfg = resolve_config(cfg)
    return EXPERIMENTS[cfg["experiment"]](cfg)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def tables_to_csv(rows: list) -> str:
    """Render rows as CSV; columns follow the first row's key order."""
    buf = io.StringIO()
    if not rows:
        return ""
    cols = list(rows[0])
    for r in rows[1:]:
        for k in r:
            if k not in cols:
                cols.append(k)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def write_tables(tables: dict, output_dir, experiment: str) -> list[str]:
    """Write each table atomically as ``<experiment>[_<table>].csv``."""
    os.makedirs(output_dir, exist_ok=True)
    paths = []
    single = len(tables) == 1
    for name in sorted(tables):
        fname = f"{experiment}.csv" if single else f"{experiment}_{name}.csv"
        path = os.path.join(output_dir, fname)
        fd, tmp = tempfile.mkstemp(dir=output_dir, suffix=".tmp")
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(tables_to_csv(tables[name]))
        os.replace(tmp, path)
        paths.append(path)
    return paths
