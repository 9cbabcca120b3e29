import collections
import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from paro.cli import main, parse_overrides
from paro.experiments import (DEFAULTS, resolve_config, run_experiment, solver_from_config,
                              tables_to_csv, write_tables)


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


# --- config ------------------------------------------------------------------------

def test_resolve_fills_defaults_and_rejects_unknown():
    cfg = resolve_config({"experiment": "quantsweep", "dataset": {"d": 50}})
    assert cfg["dataset"]["d"] == 50
    assert cfg["sweep"]["lam"] == DEFAULTS["quantsweep"]["sweep"]["lam"]
    with pytest.raises(KeyError):
        resolve_config({"experiment": "quantsweep", "dataset": {"dd": 50}})
    with pytest.raises(ValueError):
        resolve_config({"experiment": "quantsweep", "sweep": {"seeds": []}})
    with pytest.raises(ValueError):
        resolve_config({"experiment": "figure9"})


def test_solver_block():
    name, cfg = solver_from_config({"name": "admm", "admm_rho": "auto", "max_iters": 7}, lam=1e-5)
    assert name == "admm" and cfg.admm_rho == 1e-3 and cfg.max_iters == 7
    assert solver_from_config({"admm_rho": "auto"}, lam=5.0)[1].admm_rho == 1.0
    with pytest.raises(ValueError):
        solver_from_config({"name": "newton"})
    with pytest.raises(KeyError):
        solver_from_config({"name": "pg", "momentum": 0.5})


def test_parse_overrides():
    got = parse_overrides(["--dataset.n", "40", "--sweep.seeds=[0, 1]", "--par.max_level", "null"])
    assert got == [("dataset.n", 40), ("sweep.seeds", [0, 1]), ("par.max_level", None)]
    # exponent notation without a dot is still a number
    assert parse_overrides(["--solver.tol_residual", "1e-9"]) == [("solver.tol_residual", 1e-9)]
    assert parse_overrides(["--lam=[1e-3, 2]"]) == [("lam", [1e-3, 2])]
    with pytest.raises(ValueError):
        parse_overrides(["--dataset.n"])
    with pytest.raises(ValueError):
        parse_overrides(["stray"])


# --- cli ---------------------------------------------------------------------------

def test_cli_prox_table(tmp_path, capsys):
    code = main(["prox-table", "--output_dir", str(tmp_path), "--grid.num", "11"])
    assert code == 0
    out = capsys.readouterr().out.split()
    assert out == [str(tmp_path / "prox-table.csv")]
    rows = _rows(out[0])
    assert len(rows) == 11
    assert max(float(r["abs_diff"]) for r in rows) <= 1e-12
    assert {r["family"] for r in rows} == {"convex"}


def test_cli_quasiconvex_by_gap(tmp_path, capsys):
    assert main(["prox-table", "--par.family", "quasiconvex-uniform", "--par.gap", "0.5",
                 "--lam", "0.25", "--output_dir", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "prox-table.csv")
    assert {r["family"] for r in rows} == {"quasiconvex-uniform"}
    assert max(float(r["abs_diff"]) for r in rows) <= 1e-12


def test_cli_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("experiment: solve\nlam: 0.3\ndataset:\n  n: 10\n  d: 12\n"
                   "solver:\n  tol_residual: 1e-9\n"
                   f"output_dir: {tmp_path}\n")
    assert main(["solve", "--config", str(cfg), "--print-config", "--dataset.d", "15"]) == 0
    printed = capsys.readouterr().out
    assert "d: 15" in printed and "lam: 0.3" in printed
    assert main(["solve", "--config", str(cfg)]) == 0
    sol = _rows(tmp_path / "solve_solution.csv")
    assert len(sol) == 12 and sol[0]["lambda"] == "0.3"
    trace = _rows(tmp_path / "solve_trace.csv")
    assert trace[0]["iter"] == "0"


@pytest.mark.parametrize("argv,stage,code", [
    (["quantsweep", "--dataset.bogus", "1"], "config", 2),
    (["quantsweep", "--sweep.seeds", "[]"], "config", 2),
    (["solve", "--par.family", "weird"], "run", 1),
])
def test_cli_error_record(argv, stage, code, tmp_path, capsys):
    assert main(argv + ["--output_dir", str(tmp_path)]) == code
    rec = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert rec["status"] == "error" and rec["stage"] == stage
    assert rec["experiment"] == argv[0] and rec["type"] and rec["message"]


def test_cli_mismatched_config(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("experiment: solvers\n")
    assert main(["quantsweep", "--config", str(cfg)]) == 2


def test_console_script_runs(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "paro.cli", "prox-table", "--output_dir",
                           str(tmp_path), "--lam", "1.0"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "prox-table.csv").exists()


def test_solve_from_csv(tmp_path, capsys):
    from paro.losses import save_csv
    rng = np.random.default_rng(0)
    A = rng.normal(size=(15, 6))
    save_csv(tmp_path / "d.csv", A, A @ np.array([1.0, 0, 0, -1, 0, 2]))
    assert main(["solve", "--dataset.csv", str(tmp_path / "d.csv"), "--lam", "0.001",
                 "--solver.tol_residual", "1e-12", "--solver.max_iters", "20000",
                 "--output_dir", str(tmp_path)]) == 0
    sol = [float(r["value"]) for r in _rows(tmp_path / "solve_solution.csv")]
    assert np.allclose(sol, [1, 0, 0, -1, 0, 2], atol=0.05)


# --- output ------------------------------------------------------------------------

def test_csv_rendering_is_exact():
    text = tables_to_csv([{"a": 0.1, "b": math.inf, "c": 3, "d": "x"}])
    assert text == "a,b,c,d\n0.1,inf,3,x\n"
    assert tables_to_csv([]) == ""


def test_write_tables_names(tmp_path):
    paths = write_tables({"results": [{"a": 1}]}, tmp_path, "exp")
    assert paths == [str(tmp_path / "exp.csv")]
    paths = write_tables({"x": [{"a": 1}], "y": [{"b": 2}]}, tmp_path, "exp")
    assert sorted(paths) == [str(tmp_path / "exp_x.csv"), str(tmp_path / "exp_y.csv")]


# --- experiment properties on small grids ---------------------------------------------

_KEY = {"seed", "lambda", "n", "d", "family"}


def test_quantsweep_small():
    t = run_experiment({"experiment": "quantsweep",
                        "sweep": {"lam": [1e-3, 0.1, 10.0], "seeds": [0, 1]}})
    rows = t["results"]
    assert len(rows) == 6
    for r in rows:
        assert _KEY <= set(r) and r["status"] == "ok"
        assert r["bound"] == pytest.approx(0.9)
        if r["converged"] and r["crit_residual"] <= 1e-5:
            assert r["qrate"] >= 0.9
    loss = collections.defaultdict(list)
    for r in rows:
        loss[r["lambda"]].append(r["train_loss"])
    med = [np.median(loss[k]) for k in sorted(loss)]
    assert all(a <= b for a, b in zip(med, med[1:]))


def test_quantsweep_full_sample_bound_is_vacuous():
    t = run_experiment({"experiment": "quantsweep", "dataset": {"d": 30},
                        "sweep": {"n": [30], "lam": [0.1], "seeds": [0]}})
    r = t["results"][0]
    assert r["bound"] == 0.0 and r["qrate"] >= 0


def test_failures_become_rows():
    t = run_experiment({"experiment": "quantsweep", "solver": {"admm_rho": -1.0},
                        "sweep": {"lam": [0.1], "seeds": [0]}})
    assert t["results"][0]["status"].startswith("error:")


def test_solvers_small():
    t = run_experiment({"experiment": "solvers",
                        "sweep": {"seeds": [0, 1, 2], "families": ["convex"]}})
    summ = {(r["seed"], r["solver"]): r for r in t["summary"]}
    for s in range(3):
        assert summ[(s, "acc_pg")]["iters_to_gap"] <= summ[(s, "pg")]["iters_to_gap"]
    F = collections.defaultdict(list)
    for r in t["traces"]:
        assert _KEY <= set(r)
        F[(r["seed"], r["solver"])].append(r["F"])
    for (seed, solver), vals in F.items():
        if solver == "admm":
            continue  # not a descent method; checked through its final value
        vals = np.asarray(vals)
        assert np.all(np.diff(vals) <= 1e-12 * np.abs(vals[:-1]))


def test_parcompare_small():
    t = run_experiment({"experiment": "parcompare", "dataset": {"n": 30, "d": 200},
                        "sweep": {"lam": [0.0, 0.02], "seeds": [0]},
                        "solver": {"max_iters": 100}})
    assert len(t["best"]) == 3
    assert all(_KEY <= set(r) for r in t["summary"])
    assert {r["iter"] for r in t["traces"]} >= {0, 1}
    # at lam = 0 every family reduces to the same unregularized problem
    zero = [r for r in t["summary"] if r["lambda"] == 0.0 and r["family"] != "convex"]
    assert zero[0]["final_fQ"] == pytest.approx(zero[1]["final_fQ"], rel=1e-9)


def _parcompare_medians():
    t = run_experiment({"experiment": "parcompare", "traces": False})
    best = collections.defaultdict(list)
    for r in t["best"]:
        best[r["family"]].append(r["best_fQ"])
    return {k: float(np.median(v)) for k, v in best.items()}


@pytest.fixture(scope="module")
def parcompare_medians():
    return _parcompare_medians()


@pytest.mark.slow
def test_parcompare_quasiconvex_beats_nonconvex(parcompare_medians):
    assert parcompare_medians["quasiconvex-uniform"] <= parcompare_medians["nonconvex-nearest"]


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="with the shared level set and lambda grid the convex "
                   "family shrinks hardest and ends with the largest f(Q(x))")
def test_parcompare_convex_best(parcompare_medians):
    assert parcompare_medians["convex"] <= parcompare_medians["quasiconvex-uniform"]


def test_statcompare_small():
    t = run_experiment({"experiment": "statcompare",
                        "sweep": {"n": [100, 200], "seeds": [0, 1, 2, 3, 4],
                                  "regularizers": ["ridge"]}})
    rows = t["results"]
    assert all(r["status"] == "ok" for r in rows)
    classic = {(r["task"], r["n"], r["seed"]): r["l2_error"] for r in rows
               if r["approx"] == "classic"}
    diff = collections.defaultdict(list)
    for r in rows:
        if r["approx"] == "par":
            assert r["qrate"] > 0
            diff[(r["task"], r["n"], r["gap"])].append(
                abs(r["l2_error"] - classic[(r["task"], r["n"], r["seed"])]))
    for task in ("linear", "logistic"):
        for n in (100, 200):
            med = [np.median(diff[(task, n, g)]) for g in (0.1, 0.05, 0.01)]
            assert med[0] >= med[1] >= med[2]


def test_rerun_is_byte_identical(tmp_path):
    for exp, over in [("quantsweep", ["--sweep.lam", "[0.01, 1.0]", "--sweep.seeds", "[0]"]),
                      ("solvers", ["--sweep.seeds", "[0]", "--solver.max_iters", "200"])]:
        outs = []
        for k in range(2):
            d = tmp_path / f"{exp}{k}"
            assert main([exp, "--output_dir", str(d)] + over) == 0
            outs.append(sorted((p.name, p.read_bytes()) for p in d.iterdir()))
        assert outs[0] == outs[1]


def test_workers_do_not_change_output():
    base = {"experiment": "quantsweep", "sweep": {"lam": [0.01, 1.0], "seeds": [0, 1]}}
    one = run_experiment(base)
    two = run_experiment(dict(base, workers=2))
    assert tables_to_csv(one["results"]) == tables_to_csv(two["results"])
