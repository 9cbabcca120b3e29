"""Command-line entry point: ``paro <experiment> [--config FILE] [--a.b VALUE ...]``.

The config file is YAML. Any field can be overridden with a flag named by its
dotted path, e.g. ``--dataset.n 40`` or ``--sweep.seeds "[0, 1]"``; flag
values are parsed as YAML scalars or lists. On failure a JSON error record is
written to stderr and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys

import yaml

from .experiments import DEFAULTS, resolve_config, run_experiment, write_tables

EXIT_CONFIG = 2
EXIT_RUNTIME = 1


def _set_dotted(cfg: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise KeyError(f"{dotted!r} descends into a non-mapping field")
    node[keys[-1]] = value


def _coerce(value):
    # YAML 1.1 reads "1e-8" as a string; treat anything float() accepts as a number
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    if isinstance(value, list):
        return [_coerce(v) for v in value]
    if isinstance(value, dict):
        return {k: _coerce(v) for k, v in value.items()}
    return value


def parse_overrides(tokens: list[str]) -> list[tuple[str, object]]:
    """Turn ``["--a.b", "1", "--c=x"]`` into ``[("a.b", 1), ("c", "x")]``."""
    out = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or len(tok) == 2:
            raise ValueError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, raw = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ValueError(f"flag {tok!r} needs a value")
            raw = tokens[i + 1]
            i += 2
        out.append((key, _coerce(yaml.safe_load(raw))))
    return out


def build_config(experiment: str, config_path: str | None, overrides: list[str]) -> dict:
    cfg: dict = {}
    if config_path:
        with open(config_path) as fh:
            cfg = yaml.safe_load(fh) or {}
        if not isinstance(cfg, dict):
            raise ValueError("config file must hold a mapping")
        cfg = _coerce(cfg)
    file_exp = cfg.get("experiment")
    if file_exp is not None and file_exp != experiment:
        raise ValueError(f"config is for {file_exp!r}, not {experiment!r}")
    cfg["experiment"] = experiment
    for key, value in parse_overrides(overrides):
        _set_dotted(cfg, key, value)
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="paro", description="Run a piecewise-affine regularization experiment.",
        epilog="Any config field may be overridden as --dotted.path VALUE.")
    parser.add_argument("experiment", choices=sorted(DEFAULTS))
    parser.add_argument("--config", help="YAML config file")
    parser.add_argument("--print-config", action="store_true",
                        help="print the resolved config and exit")
    args, rest = parser.parse_known_args(argv)
    stage = "config"
    try:
        cfg = resolve_config(build_config(args.experiment, args.config, rest))
        if args.print_config:
            yaml.safe_dump(cfg, sys.stdout, sort_keys=True)
            return 0
        stage = "run"
        tables = run_experiment(cfg)
        paths = write_tables(tables, cfg["output_dir"], args.experiment)
    except Exception as exc:
        record = {"status": "error", "stage": stage, "experiment": args.experiment,
                  "type": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return EXIT_CONFIG if stage == "config" else EXIT_RUNTIME
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
