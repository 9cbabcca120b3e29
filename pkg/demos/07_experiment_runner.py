"""
Running experiments from a config
=================================

Each experiment is a function of a nested config. Missing fields take their
defaults, and results come back as tables of rows that are written as CSV.
The same config through ``paro <experiment>`` on the command line produces
identical files.
"""

# %%
import tempfile
from pathlib import Path

from paro.cli import main
from paro.experiments import resolve_config, run_experiment, tables_to_csv

cfg = resolve_config({"experiment": "quantsweep",
                      "sweep": {"lam": [0.01, 1.0], "seeds": [0, 1]}})
print(cfg["solver"])

# %%
tables = run_experiment(cfg)
print(tables_to_csv(tables["results"]))

# %%
# The command line takes a YAML file and dotted overrides.
out = Path(tempfile.mkdtemp())
config = out / "prox.yaml"
config.write_text("lam: 0.5\npar:\n  family: quasiconvex-uniform\n  gap: 1.0\n")
main(["prox-table", "--config", str(config), "--grid.num", "13", "--output_dir", str(out)])
print((out / "prox-table.csv").read_text())
