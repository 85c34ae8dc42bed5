"""Command-line interface.

Subcommands: ``simulate`` (write a study dataset + ground truth), ``detect``
(run the sampler and emit a report plus plot-data CSVs), ``pelt`` (penalized
segmentation baseline), ``bench-consistency`` (Bayes-factor trend tables) and
``oracle`` (exact enumeration, optionally compared against the sampler).

Exit codes: 0 success, 2 configuration errors, 3 input/output errors,
4 numeric or domain errors.  Seeds are mandatory wherever randomness exists;
nothing is ever seeded from the clock.  The environment variable
``CPSLAB_THREADS`` sets the default chain-level thread count.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import enumeration, gibbs, pelt, report, simulate
from .errors import (
    ConfigError,
    CpslabError,
    DegenerateInput,
    DimensionMismatch,
    MaskTooLarge,
    NonFiniteError,
    ParseError,
    SchemaError,
    SingularSystem,
    TooLarge,
)
from .model import PriorConfig

_DETECT_DEFAULTS = {
    "iterations": 8000,
    "burn_in": 4000,
    "thin": 1,
    "chains": 1,
    "sigma2": "estimate",
    "tau2": 1.0,
    "mu_var": 1.0,
    "expected_changepoints": 1.0,
    "changepoint_prob": None,
    "inclusion_prob": None,
    "alpha1": 0.1,
    "max_model_size": None,
    "response": "y",
    "covariates": None,
    "standardize": False,
    "sqrt_transform": False,
    "ar_lag": False,
    "with_pelt": False,
    "penalty": None,
    "min_seg": 1,
}


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("CPSLAB_THREADS", "1")))
    except ValueError:
        return 1


def _parse_sigma2(value):
    if value is None or value == "estimate":
        return None
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"sigma2 must be a positive number or 'estimate', got {value!r}")
    if v <= 0:
        raise ConfigError("sigma2 must be positive")
    return v


def _load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid config file: {exc}") from exc
    unknown = set(cfg) - set(_DETECT_DEFAULTS)
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
    return cfg


def _resolve_detect_config(args) -> dict:
    resolved = dict(_DETECT_DEFAULTS)
    if args.config:
        resolved.update(_load_config_file(args.config))
    for key in _DETECT_DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
    resolved["seed"] = args.seed
    resolved["threads"] = args.threads if args.threads else _default_threads()
    return resolved


def _schema_from_config(cfg) -> simulate.CsvSchema:
    covs = cfg["covariates"]
    if isinstance(covs, str):
        covs = [c.strip() for c in covs.split(",") if c.strip()]
    return simulate.CsvSchema(
        response=cfg["response"],
        covariates=covs,
        standardize=bool(cfg["standardize"]),
        sqrt_transform=bool(cfg["sqrt_transform"]),
        ar_lag=bool(cfg["ar_lag"]),
    )


def _prior_from_config(cfg) -> PriorConfig:
    prior = PriorConfig(
        changepoint_prob=cfg["changepoint_prob"],
        expected_changepoints=float(cfg["expected_changepoints"]),
        inclusion_prob=cfg["inclusion_prob"],
        inclusion_penalty_alpha1=float(cfg["alpha1"]),
        tau2=float(cfg["tau2"]),
        mu_var=float(cfg["mu_var"]),
        sigma2=_parse_sigma2(cfg["sigma2"]),
        max_model_size=cfg["max_model_size"],
    )
    try:
        prior.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return prior


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    dataset, truth = simulate.generate_example(args.example, args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data_path = out_dir / f"example{args.example}_seed{args.seed}.csv"
    truth_path = out_dir / f"example{args.example}_seed{args.seed}_truth.json"
    simulate.write_dataset_csv(data_path, dataset)
    truth_path.write_text(truth.to_json() + "\n", encoding="utf-8")
    p_x = 0 if dataset.X is None else dataset.X.shape[1]
    print(f"wrote {data_path} ({dataset.n} rows, {p_x} covariates)")
    print(f"wrote {truth_path}")
    return 0


def cmd_detect(args) -> int:
    cfg = _resolve_detect_config(args)
    t0 = time.perf_counter()
    dataset = simulate.load_csv(args.input, _schema_from_config(cfg))
    t_load = time.perf_counter() - t0
    prior = _prior_from_config(cfg)
    sampler_cfg = gibbs.SamplerConfig(
        iterations=int(cfg["iterations"]),
        burn_in=int(cfg["burn_in"]),
        thin=int(cfg["thin"]),
        seed=int(args.seed),
        chains=int(cfg["chains"]),
    )
    try:
        sampler_cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    t0 = time.perf_counter()
    summary = gibbs.run_chain(dataset, prior, sampler_cfg, threads=int(cfg["threads"]))
    t_run = time.perf_counter() - t0

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    baseline = None
    if cfg["with_pelt"]:
        res = pelt.pelt_detect(
            dataset.y,
            penalty=cfg["penalty"],
            min_seg=int(cfg["min_seg"]),
            variance=_parse_sigma2(cfg["sigma2"]),
        )
        baseline = {
            "changepoints": res.changepoints,
            "total_cost": res.total_cost,
            "penalty": res.penalty,
            "variance": res.variance,
            "segment_params": res.segment_params,
        }

    cfg_echo = {k: (v if not isinstance(v, np.ndarray) else list(v)) for k, v in cfg.items()}
    rep = report.RunReport(
        config=cfg_echo,
        provenance={"input": str(args.input), "seed": int(args.seed)},
        summary=report.summary_to_dict(summary),
        baseline=baseline,
        timings={"load_seconds": t_load, "run_seconds": t_run},
    )
    rep.validate()
    report_path = out_dir / "report.json"
    report_path.write_text(rep.to_json() + "\n", encoding="utf-8")
    files = report.write_plot_files(out_dir, dataset, summary)
    print(f"wrote {report_path}")
    for name in files:
        print(f"wrote {out_dir / name}")
    mode = max(summary.partition_count_dist, key=summary.partition_count_dist.get)
    print(f"posterior mode of block count: {mode}")
    return 0


def cmd_pelt(args) -> int:
    schema = simulate.CsvSchema(response=args.response, covariates=[])
    dataset = simulate.load_csv(args.input, schema)
    res = pelt.pelt_detect(
        dataset.y,
        penalty=args.penalty,
        min_seg=args.min_seg,
        variance=_parse_sigma2(args.sigma2) if args.sigma2 else None,
    )
    payload = {
        "config": {
            "input": str(args.input),
            "penalty": res.penalty,
            "min_seg": args.min_seg,
            "variance": res.variance,
        },
        "changepoints": res.changepoints,
        "total_cost": res.total_cost,
        "segment_params": res.segment_params,
    }
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "pelt.json"
    out_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {out_path}")
    print(f"changepoints: {res.changepoints}")
    return 0


def cmd_bench(args) -> int:
    scenarios = list(bench_mod.SCENARIOS) if args.scenario == "all" else [args.scenario]
    n_grid = [int(v) for v in args.n_grid.split(",") if v.strip()]
    if not n_grid:
        raise ConfigError("empty n-grid")
    rows, summary = bench_mod.run_bench(scenarios, n_grid, args.replicates, args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows_path = out_dir / "bench.csv"
    with open(rows_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "n", "replicate", "log_bf"])
        for r in rows:
            w.writerow([r.scenario, r.n, r.replicate, repr(r.log_bf)])
    summary_path = out_dir / "bench_summary.csv"
    with open(summary_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "n", "mean_log_bf"])
        for scenario, per_n in summary.items():
            for n, m in per_n.items():
                w.writerow([scenario, n, repr(m)])
    print(f"wrote {rows_path}")
    print(f"wrote {summary_path}")
    for scenario, per_n in summary.items():
        trend = "  ".join(f"n={n}: {m:.2f}" for n, m in per_n.items())
        print(f"{scenario}: {trend}")
    return 0


def cmd_oracle(args) -> int:
    covs = None
    if args.covariates is not None:
        covs = [c.strip() for c in args.covariates.split(",") if c.strip()]
    schema = simulate.CsvSchema(response=args.response, covariates=covs, ar_lag=args.ar_lag)
    dataset = simulate.load_csv(args.input, schema)
    prior = PriorConfig(
        sigma2=_parse_sigma2(args.sigma2),
        tau2=args.tau2,
        mu_var=args.mu_var,
        changepoint_prob=args.changepoint_prob,
        inclusion_prob=args.inclusion_prob,
    )
    prior.validate()
    exact = enumeration.enumerate_exact(dataset, prior, n_max=args.max_n, p_max=args.max_p)
    payload = {
        "n_models": exact.marginals.n_samples,
        "normalizer": exact.normalizer,
        "cp_prob": [float(v) for v in exact.marginals.cp_prob],
        "pip": [float(v) for v in exact.marginals.pip],
        "partition_count_dist": {
            str(k): float(v) for k, v in exact.marginals.partition_count_dist.items()
        },
    }
    print(f"enumerated {exact.marginals.n_samples} models")
    if args.compare_sampler:
        if args.seed is None:
            raise ConfigError("--seed is required with --compare-sampler")
        cfg = gibbs.SamplerConfig(
            iterations=args.burn_in + args.samples,
            burn_in=args.burn_in,
            thin=1,
            seed=args.seed,
        )
        summary = gibbs.run_chain(dataset, prior, cfg)
        devs = enumeration.compare_with_sampler(exact, summary)
        payload["sampler_comparison"] = devs
        for key, val in devs.items():
            print(f"{key}: {val:.5f}")
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        out_path = out_dir / "oracle.json"
        out_path.write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        print(f"wrote {out_path}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpslab",
        description="Bayesian changepoint detection with spike-and-slab variable selection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a simulation-study dataset and ground truth")
    p.add_argument("--example", type=int, required=True, choices=(1, 2, 3))
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("detect", help="run the Gibbs sampler on a CSV series")
    p.add_argument("--input", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--config", help="JSON file of settings (flags override it)")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--iterations", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--sigma2", help="known noise variance, or 'estimate'")
    p.add_argument("--tau2", type=float)
    p.add_argument("--mu-var", dest="mu_var", type=float)
    p.add_argument("--expected-changepoints", dest="expected_changepoints", type=float)
    p.add_argument("--changepoint-prob", dest="changepoint_prob", type=float)
    p.add_argument("--inclusion-prob", dest="inclusion_prob", type=float)
    p.add_argument("--alpha1", type=float)
    p.add_argument("--max-model-size", dest="max_model_size", type=int)
    p.add_argument("--response")
    p.add_argument("--covariates", help="comma-separated covariate columns")
    p.add_argument("--standardize", action="store_const", const=True)
    p.add_argument("--sqrt-transform", dest="sqrt_transform", action="store_const", const=True)
    p.add_argument("--ar-lag", dest="ar_lag", action="store_const", const=True)
    p.add_argument("--with-pelt", dest="with_pelt", action="store_const", const=True)
    p.add_argument("--penalty", type=float)
    p.add_argument("--min-seg", dest="min_seg", type=int)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("pelt", help="penalized-cost segmentation baseline")
    p.add_argument("--input", required=True)
    p.add_argument("--response", default="y")
    p.add_argument("--penalty", type=float, help="default: 2 * variance * log n")
    p.add_argument("--min-seg", dest="min_seg", type=int, default=1)
    p.add_argument("--sigma2", help="known noise variance (default: MAD estimate)")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_pelt)

    p = sub.add_parser("bench-consistency", help="Bayes-factor trend tables")
    p.add_argument("--scenario", default="all", choices=("all",) + bench_mod.SCENARIOS)
    p.add_argument("--n-grid", dest="n_grid", default="100,200,400,800")
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle", help="exact enumeration posterior on a small series")
    p.add_argument("--input", required=True)
    p.add_argument("--response", default="y")
    p.add_argument("--covariates")
    p.add_argument("--ar-lag", dest="ar_lag", action="store_true")
    p.add_argument("--sigma2", default="1.0")
    p.add_argument("--tau2", type=float, default=1.0)
    p.add_argument("--mu-var", dest="mu_var", type=float, default=1.0)
    p.add_argument("--changepoint-prob", dest="changepoint_prob", type=float)
    p.add_argument("--inclusion-prob", dest="inclusion_prob", type=float)
    p.add_argument("--max-n", dest="max_n", type=int, default=enumeration.N_MAX_DEFAULT)
    p.add_argument("--max-p", dest="max_p", type=int, default=enumeration.P_MAX_DEFAULT)
    p.add_argument("--compare-sampler", dest="compare_sampler", action="store_true")
    p.add_argument("--samples", type=int, default=200_000)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=2000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, SchemaError, OSError) as exc:
        print(f"input/output error: {exc}", file=sys.stderr)
        return 3
    except (
        SingularSystem,
        NonFiniteError,
        TooLarge,
        MaskTooLarge,
        DegenerateInput,
        DimensionMismatch,
    ) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CpslabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
