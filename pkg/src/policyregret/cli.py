"""Command-line front end: ingest or simulate data, run analyses, emit
CSV/JSON reports.

Every command is deterministic for a fixed seed and config; re-running
overwrites byte-identical outputs. Exit codes: 0 success, 1 config error,
2 data error, 3 numeric/model failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from typing import List, Optional

from .assumptions import CausalAssumption
from .core import (
    ConfigError,
    DataError,
    NumericError,
    PolicyRegretError,
    dump_json,
    load_dataset,
    parse_measure,
)
from .estimation import EstimationConfig, cross_fit_regret, subgroup_report
from .nuisance import ClassifierConfig
from .synthetic import (
    DEFAULT_MEASURES,
    SyntheticWorld,
    coverage_experiment,
    design_sensitivity,
    generate,
    oracle_regret,
    separation_characterization,
    violation_sweep,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


def _write_csv(path: str, rows: List[dict]) -> None:
    if not rows:
        raise NumericError("no rows to write")
    fields = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _load_config_file(path: Optional[str], allowed: set) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _merge(args: argparse.Namespace, cfg: dict, key: str, default):
    """Flag value wins over config file, which wins over the default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in cfg:
        return cfg[key]
    return default


def _parse_grid(spec) -> List[float]:
    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    try:
        return [float(v) for v in str(spec).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad numeric grid {spec!r}")


def _parse_int_grid(spec) -> List[int]:
    return [int(v) for v in _parse_grid(spec)]


def _assumption_from(args, cfg) -> CausalAssumption:
    kind = _merge(args, cfg, "assumption", "msm")
    lam = _merge(args, cfg, "lam", None)
    gamma = _merge(args, cfg, "gamma", None)
    z_column = cfg.get("z_column", "z")
    w_column = cfg.get("w_column", "w")
    if kind == "msm" and lam is None:
        lam = 1.2
    return CausalAssumption(
        kind=kind,
        lam=None if lam is None else float(lam),
        gamma=None if gamma is None else float(gamma),
        z_column=z_column,
        w_column=w_column if kind == "proximal_tw" else None,
    )


def _estimation_config_from(args, cfg) -> EstimationConfig:
    return EstimationConfig(
        k_folds=int(_merge(args, cfg, "k_folds", 2)),
        estimator=str(_merge(args, cfg, "estimator", "plugin")),
        bootstrap_b=int(_merge(args, cfg, "bootstrap", 200)),
        ci_level=float(cfg.get("ci_level", 0.95)),
        seed=int(_merge(args, cfg, "seed", 0)),
        classifier=ClassifierConfig(learner=str(cfg.get("learner", "logistic"))),
        jobs=int(_merge(args, cfg, "jobs", 1)),
        min_group_size=int(cfg.get("min_group_size", 50)),
    )


def _measures_from(args, cfg):
    spec = _merge(args, cfg, "measures", "accuracy")
    if isinstance(spec, str):
        parts = [p for p in spec.split(",") if p.strip()]
    else:
        parts = list(spec)
    if not parts:
        raise ConfigError("measure list is empty")
    return [parse_measure(p) for p in parts]


def _outdir(args, cfg) -> str:
    out = _merge(args, cfg, "out", ".")
    os.makedirs(out, exist_ok=True)
    return out


ANALYZE_KEYS = {
    "assumption", "lam", "gamma", "z_column", "w_column", "k_folds",
    "estimator", "bootstrap", "ci_level", "seed", "learner", "jobs",
    "min_group_size", "measures", "out", "input", "group_column",
}


def cmd_analyze(args) -> int:
    cfg = _load_config_file(args.config, ANALYZE_KEYS)
    input_path = _merge(args, cfg, "input", None)
    if input_path is None:
        raise ConfigError("analyze requires --input")
    group_column = _merge(args, cfg, "group_column", None)
    schema = {"group": group_column} if group_column else None
    data = load_dataset(input_path, schema)
    assumption = _assumption_from(args, cfg)
    config = _estimation_config_from(args, cfg)
    measures = _measures_from(args, cfg)
    if data.group is not None:
        report = subgroup_report(data, measures, assumption, config)
    else:
        report = cross_fit_regret(data, measures, assumption, config)
    out = _outdir(args, cfg)
    payload = {
        "assumption": assumption.to_dict(),
        "config": {
            "k_folds": config.k_folds,
            "estimator": config.estimator,
            "bootstrap_b": config.bootstrap_b,
            "ci_level": config.ci_level,
            "seed": config.seed,
        },
        "n_rows": data.n,
        "masked_y_count": data.masked_y_count,
        "report": report.to_dict(),
    }
    dump_json(payload, os.path.join(out, "report.json"))
    _write_csv(os.path.join(out, "report.csv"), report.csv_rows())
    return EXIT_OK


SIM_KEYS = {"n", "mode", "lam", "beta0", "beta1", "seed", "out", "measures"}


def cmd_simulate(args) -> int:
    cfg = _load_config_file(args.config, SIM_KEYS)
    n = int(_merge(args, cfg, "n", 10000))
    mode = str(_merge(args, cfg, "mode", "msm"))
    lam = float(_merge(args, cfg, "lam", 1.4) or 1.4)
    seed = int(_merge(args, cfg, "seed", 0))
    world = SyntheticWorld.sample(
        seed=seed,
        mode=mode,
        lam=lam,
        beta0=float(_merge(args, cfg, "beta0", 1.0)),
        beta1=float(_merge(args, cfg, "beta1", 0.0)),
    )
    sample = generate(world, n)
    measures = _measures_from(args, cfg)
    out = _outdir(args, cfg)
    sample.data.to_csv(os.path.join(out, "data.csv"))
    oracle = {
        "clip_fraction": sample.clip_fraction,
        "oracle_regret": {m.label: oracle_regret(sample, m) for m in measures},
        "seed": seed,
        "n": n,
        "mode": mode,
        "lambda": lam,
    }
    dump_json(oracle, os.path.join(out, "oracle.json"))
    return EXIT_OK


COVERAGE_KEYS = {
    "n_grid", "trials", "lam", "mode", "beta0", "beta1", "assumption",
    "gamma", "k_folds", "estimator", "seed", "jobs", "measures", "out",
    "learner", "ci_level", "min_group_size", "bootstrap",
}


def cmd_coverage(args) -> int:
    cfg = _load_config_file(args.config, COVERAGE_KEYS)
    trials = int(_merge(args, cfg, "trials", 100))
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    n_grid = _parse_int_grid(_merge(args, cfg, "n_grid", "1000,5000,20000"))
    lam = float(_merge(args, cfg, "lam", 1.4) or 1.4)
    world_kwargs = {
        "mode": str(_merge(args, cfg, "mode", "msm")),
        "lam": lam,
        "beta0": float(_merge(args, cfg, "beta0", 1.0)),
        "beta1": float(_merge(args, cfg, "beta1", 0.0)),
    }
    assumption = _assumption_from(args, cfg)
    if assumption.kind == "msm" and getattr(args, "lam", None) is None and "lam" not in cfg:
        assumption = CausalAssumption.msm(lam)
    config = _estimation_config_from(args, cfg)
    measures = _measures_from(args, cfg)
    rows = coverage_experiment(world_kwargs, n_grid, trials, assumption, config, measures)
    out = _outdir(args, cfg)
    _write_csv(os.path.join(out, "coverage.csv"), rows)
    dump_json({"rows": rows}, os.path.join(out, "coverage.json"))
    return EXIT_OK


SWEEP_KEYS = COVERAGE_KEYS | {"knob", "grid", "n"}


def cmd_sweep(args) -> int:
    cfg = _load_config_file(args.config, SWEEP_KEYS)
    knob = str(_merge(args, cfg, "knob", "lambda_star"))
    grid = _parse_grid(_merge(args, cfg, "grid", "1.0,1.4,2.5"))
    trials = int(_merge(args, cfg, "trials", 50))
    n = int(_merge(args, cfg, "n", 10000))
    lam = float(_merge(args, cfg, "lam", 1.4) or 1.4)
    mode = str(_merge(args, cfg, "mode", "msm" if knob == "lambda_star" else "iv"))
    world_kwargs = {
        "mode": mode,
        "lam": lam,
        "beta0": float(_merge(args, cfg, "beta0", 1.0)),
        "beta1": float(_merge(args, cfg, "beta1", 0.0)),
    }
    assumption = _assumption_from(args, cfg)
    if assumption.kind == "msm" and getattr(args, "lam", None) is None and "lam" not in cfg:
        assumption = CausalAssumption.msm(lam)
    config = _estimation_config_from(args, cfg)
    measures = _measures_from(args, cfg)
    rows = violation_sweep(
        world_kwargs, knob, grid, trials, n, assumption, config, measures
    )
    out = _outdir(args, cfg)
    _write_csv(os.path.join(out, "sweep.csv"), rows)
    dump_json({"rows": rows}, os.path.join(out, "sweep.json"))
    return EXIT_OK


SENS_KEYS = {"grid", "n", "lam", "mode", "beta0", "beta1", "seed", "k_folds",
             "jobs", "measures", "out", "learner"}


def cmd_sensitivity(args) -> int:
    cfg = _load_config_file(args.config, SENS_KEYS)
    grid = _parse_grid(_merge(args, cfg, "grid", ",".join(
        str(round(1.0 + 0.1 * i, 1)) for i in range(21))))
    n = int(_merge(args, cfg, "n", 20000))
    seed = int(_merge(args, cfg, "seed", 0))
    world = SyntheticWorld.sample(
        seed=seed,
        mode=str(_merge(args, cfg, "mode", "msm")),
        lam=float(_merge(args, cfg, "lam", max(grid)) or max(grid)),
        beta0=float(_merge(args, cfg, "beta0", 1.0)),
        beta1=float(_merge(args, cfg, "beta1", 0.0)),
    )
    config = _estimation_config_from(args, cfg)
    measures = _measures_from(args, cfg) if (
        getattr(args, "measures", None) or "measures" in cfg
    ) else list(DEFAULT_MEASURES)
    thresholds = design_sensitivity(world, grid, config, n=n, measures=measures)
    rows = []
    for label in sorted(thresholds):
        for method in ("delta", "baseline"):
            val = thresholds[label][method]
            rows.append(
                {
                    "measure": label,
                    "method": method,
                    "lambda_zero": "beyond_grid" if math.isinf(val) else val,
                }
            )
    out = _outdir(args, cfg)
    _write_csv(os.path.join(out, "sensitivity.csv"), rows)
    dump_json({"rows": rows}, os.path.join(out, "sensitivity.json"))
    return EXIT_OK


SEP_KEYS = {"n_fixtures", "seed", "out", "measures"}


def cmd_separation(args) -> int:
    cfg = _load_config_file(args.config, SEP_KEYS)
    n_fixtures = int(_merge(args, cfg, "n_fixtures", 1000))
    seed = int(_merge(args, cfg, "seed", 0))
    measures = _measures_from(args, cfg) if (
        getattr(args, "measures", None) or "measures" in cfg
    ) else list(DEFAULT_MEASURES)
    rows = separation_characterization(n_fixtures, seed, measures)
    out = _outdir(args, cfg)
    _write_csv(os.path.join(out, "separation.csv"), rows)
    slack = [r["improvement"] - r["bound"] for r in rows]
    dump_json(
        {"n_fixtures": n_fixtures, "min_slack": min(slack), "rows": len(rows)},
        os.path.join(out, "separation.json"),
    )
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--out", help="output directory (default .)")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--jobs", type=int, help="worker parallelism (default 1)")
    p.add_argument("--measures", help="comma-separated measure specs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="policyregret",
        description="Partially identified regret intervals for decision "
        "policies under confounding and selective labels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="regret intervals from a CSV dataset")
    _add_common(p)
    p.add_argument("--input", help="input CSV path")
    p.add_argument("--assumption", choices=(
        "manski", "msm", "rosenbaum", "iv", "proximal_t", "proximal_tw"))
    p.add_argument("--lambda", dest="lam", type=float, help="MSM odds bound")
    p.add_argument("--gamma", type=float, help="treatment-odds bound")
    p.add_argument("--k-folds", dest="k_folds", type=int)
    p.add_argument("--bootstrap", type=int, help="bootstrap replicates (0 disables)")
    p.add_argument("--estimator", choices=("plugin", "doubly_robust"))
    p.add_argument("--group-column", dest="group_column")

    p = sub.add_parser("simulate", help="generate a synthetic dataset + oracle")
    _add_common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--mode", choices=("msm", "iv"))
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--beta0", type=float)
    p.add_argument("--beta1", type=float)

    p = sub.add_parser("coverage", help="Monte Carlo oracle-coverage experiment")
    _add_common(p)
    p.add_argument("--n-grid", dest="n_grid")
    p.add_argument("--trials", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--mode", choices=("msm", "iv"))
    p.add_argument("--assumption", choices=(
        "manski", "msm", "rosenbaum", "iv", "proximal_t", "proximal_tw"))
    p.add_argument("--gamma", type=float)
    p.add_argument("--k-folds", dest="k_folds", type=int)
    p.add_argument("--estimator", choices=("plugin", "doubly_robust"))
    p.add_argument("--beta0", type=float)
    p.add_argument("--beta1", type=float)

    p = sub.add_parser("sweep", help="assumption-violation sweep")
    _add_common(p)
    p.add_argument("--knob", choices=("lambda_star", "beta0", "beta1"))
    p.add_argument("--grid")
    p.add_argument("--trials", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--mode", choices=("msm", "iv"))
    p.add_argument("--assumption", choices=(
        "manski", "msm", "rosenbaum", "iv", "proximal_t", "proximal_tw"))
    p.add_argument("--gamma", type=float)
    p.add_argument("--k-folds", dest="k_folds", type=int)
    p.add_argument("--estimator", choices=("plugin", "doubly_robust"))
    p.add_argument("--beta0", type=float)
    p.add_argument("--beta1", type=float)

    p = sub.add_parser("sensitivity", help="design-sensitivity lambda thresholds")
    _add_common(p)
    p.add_argument("--grid")
    p.add_argument("--n", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--mode", choices=("msm", "iv"))
    p.add_argument("--k-folds", dest="k_folds", type=int)
    p.add_argument("--beta0", type=float)
    p.add_argument("--beta1", type=float)

    p = sub.add_parser("separation", help="interval-improvement characterization")
    _add_common(p)
    p.add_argument("--n-fixtures", dest="n_fixtures", type=int)

    return parser


COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "coverage": cmd_coverage,
    "sweep": cmd_sweep,
    "sensitivity": cmd_sensitivity,
    "separation": cmd_separation,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PolicyRegretError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
