"""Command-line interface.

One binary with subcommands sharing the solver plumbing:

    construct  build a knockoff matrix for a design + groups file
    filter     run the group knockoff filter on design/groups/response CSVs
    analyze    multitask pipeline for a design and an n x r response matrix
    simulate   group-sparse | multitask benchmark sweeps

Options resolve as defaults < config file (--config, flat ``key = value``
lines) < command-line flags.  All randomness flows from --seed (a fixed
constant by default, so runs are reproducible).  Exit codes: 0 success,
2 usage error, 3 data validation error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import asdict, replace

import numpy as np

from .construction import construct_group_knockoffs
from .design import new_grouped_design, normalize_columns, normalize_matrix_columns
from .errors import DataValidationError, NumericalError
from .filtering import FilterConfig, run_group_knockoff_filter
from .io import (
    build_envelope,
    read_groups_file,
    read_matrix_csv,
    write_json,
    write_matrix_csv,
    write_records_csv,
)
from .multitask import run_multitask_knockoff
from .simulation import (
    GroupSparseSimConfig,
    MultitaskSimConfig,
    run_experiment,
)

__all__ = ["main"]


class _UsageError(Exception):
    pass


_SOLVER_DEFAULTS = {
    "q": 0.2,
    "plus": False,
    "grid_size": 100,
    "grid_min_ratio": 1e-3,
    "kkt_tol": 1e-6,
    "max_iter": 10000,
    "group_weights": "none",
    "seed": 424242,
    "normalize": True,
}

# Keys accepted in --config files, with their parsers.
_CONVERTERS = {
    "q": float, "plus": bool, "grid_size": int, "grid_min_ratio": float,
    "kkt_tol": float, "max_iter": int, "group_weights": str, "seed": int,
    "normalize": bool, "log_transform": bool, "drop_incomplete_rows": bool,
    "min_feature_count": int, "trials": int, "paper_scale": bool,
    "n": int, "p": int, "m": int, "group_size": int, "k": int,
    "amplitude": float, "rho": float, "gamma_factor": float,
    "r": int, "signal_scale": float, "rho_x": float, "rho_y": float,
    "methods": str, "sweep": str,
}

_BOOL_TOKENS = {"true": True, "1": True, "yes": True, "on": True,
                "false": False, "0": False, "no": False, "off": False}

# Namespace entries that are paths/plumbing, not tunable options.
_NON_OPTION_KEYS = {"func", "config", "subcommand", "setting", "design",
                    "groups", "response", "output", "records", "xtilde_out"}


def _add_solver_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="flat key = value config file; flags override it")
    sp.add_argument("--q", type=float, help="target FDR level in (0, 1), default 0.2")
    sp.add_argument("--plus", action="store_const", const=True,
                    help="use the conservative knockoff+ estimate")
    sp.add_argument("--grid-size", type=int, dest="grid_size")
    sp.add_argument("--grid-min-ratio", type=float, dest="grid_min_ratio")
    sp.add_argument("--kkt-tol", type=float, dest="kkt_tol")
    sp.add_argument("--max-iter", type=int, dest="max_iter")
    sp.add_argument("--group-weights", choices=("none", "sqrt"), dest="group_weights")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--no-normalize", action="store_const", const=False,
                    dest="normalize", help="skip column normalization (pre-scaled data)")
    sp.add_argument("--output", "-o", help="result JSON path (default: stdout)")


def _read_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise _UsageError(f"{path}:{lineno}: expected 'key = value'")
                key, _, val = line.partition("=")
                key = key.strip().replace("-", "_")
                if key not in _CONVERTERS:
                    raise _UsageError(f"{path}:{lineno}: unknown config key {key!r}")
                conv = _CONVERTERS[key]
                token = val.strip()
                if conv is bool:
                    if token.lower() not in _BOOL_TOKENS:
                        raise _UsageError(f"{path}:{lineno}: bad boolean {token!r}")
                    values[key] = _BOOL_TOKENS[token.lower()]
                else:
                    try:
                        values[key] = conv(token)
                    except ValueError:
                        raise _UsageError(
                            f"{path}:{lineno}: bad value {token!r} for {key}"
                        ) from None
    except OSError as exc:
        raise _UsageError(f"cannot read config file {path}: {exc}") from exc
    return values


def _resolve(args: argparse.Namespace,
             extra_defaults: dict | None = None) -> tuple[dict, dict]:
    """(merged options, explicitly-set options).

    Explicit values come from the config file and then command-line flags;
    merged fills the rest from the defaults.
    """
    explicit: dict = {}
    if getattr(args, "config", None):
        explicit.update(_read_config_file(args.config))
    for key, val in vars(args).items():
        if key in _NON_OPTION_KEYS or val is None:
            continue
        explicit[key] = val
    merged = dict(_SOLVER_DEFAULTS)
    if extra_defaults:
        merged.update(extra_defaults)
    merged.update({k: v for k, v in explicit.items() if k in merged})
    if not 0.0 < merged["q"] < 1.0:
        raise _UsageError(f"--q must lie in (0, 1), got {merged['q']}")
    if merged["grid_size"] < 2:
        raise _UsageError("--grid-size must be at least 2")
    return merged, explicit


def _filter_config(opts: dict) -> FilterConfig:
    return FilterConfig(
        q=opts["q"],
        variant="knockoff+" if opts["plus"] else "knockoff",
        grid_size=opts["grid_size"],
        grid_min_ratio=opts["grid_min_ratio"],
        kkt_tol=opts["kkt_tol"],
        max_iter=opts["max_iter"],
        group_weights=opts["group_weights"],
        seed=opts["seed"],
    )


def _emit(envelope: dict, path) -> None:
    text = write_json(envelope, path)
    if path is None:
        print(text)


def _solver_diagnostics(result) -> dict:
    if result.path is None:
        return {"grid_points": 0, "max_kkt_residual": 0.0, "unconverged_points": 0}
    return {
        "grid_points": int(result.path.grid.values.size),
        "max_kkt_residual": float(np.max(result.path.kkt_residuals)),
        "unconverged_points": int(np.sum(~result.path.converged)),
    }


def _cmd_construct(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    opts, _ = _resolve(args)
    X, _ = read_matrix_csv(args.design)
    labels = read_groups_file(args.groups)
    design = new_grouped_design(X, labels)
    if opts["normalize"]:
        design = normalize_columns(design)
    aug = construct_group_knockoffs(design, seed=opts["seed"])
    write_matrix_csv(args.xtilde_out, aug.X_tilde)
    payload = {
        "xtilde_path": args.xtilde_out,
        "gamma": aug.gamma,
        "group_labels": list(design.labels),
        "group_sizes": design.group_sizes,
        "diagnostics": {
            "max_gram_dev": aug.diagnostics.max_gram_dev,
            "max_cross_dev": aug.diagnostics.max_cross_dev,
            "max_off_block": aug.diagnostics.max_off_block,
            "min_eig_s": aug.diagnostics.min_eig_s,
            "passed": aug.diagnostics.passed,
            "tol": aug.diagnostics.tol,
        },
    }
    invocation = dict(opts, design=args.design, groups=args.groups,
                      xtilde_out=args.xtilde_out)
    _emit(build_envelope("construct", invocation, payload, started), args.output)
    return 0


def _read_single_response(path) -> np.ndarray:
    y, _ = read_matrix_csv(path)
    if y.shape[1] != 1:
        raise DataValidationError(
            f"{path}: expected a single response column, got {y.shape[1]}"
        )
    return y[:, 0]


def _cmd_filter(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    opts, _ = _resolve(args)
    X, _ = read_matrix_csv(args.design)
    labels = read_groups_file(args.groups)
    y = _read_single_response(args.response)
    design = new_grouped_design(X, labels)
    if opts["normalize"]:
        design = normalize_columns(design)
    result = run_group_knockoff_filter(design, y, _filter_config(opts))
    payload = {
        "selected_groups": [design.labels[i] for i in result.selected],
        "selected_group_indices": [int(i) + 1 for i in result.selected],
        "group_labels": list(design.labels),
        "W": result.W,
        "threshold": result.threshold,
        "fdp_estimate": result.fdp_estimate,
        "gamma": result.gamma,
        "q": result.q,
        "variant": result.variant,
        "diagnostics": {
            "construction": {
                "max_gram_dev": result.augmentation.diagnostics.max_gram_dev,
                "max_cross_dev": result.augmentation.diagnostics.max_cross_dev,
                "passed": result.augmentation.diagnostics.passed,
            },
            "solver": _solver_diagnostics(result),
        },
    }
    invocation = dict(opts, design=args.design, groups=args.groups,
                      response=args.response)
    _emit(build_envelope("filter", invocation, payload, started), args.output)
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    opts, _ = _resolve(args, {"log_transform": False, "drop_incomplete_rows": True,
                              "min_feature_count": 3})
    X, xnames = read_matrix_csv(args.design, missing_ok=True)
    Y, _ = read_matrix_csv(args.response, missing_ok=True)
    if Y.shape[0] != X.shape[0]:
        raise DataValidationError(
            f"design has {X.shape[0]} rows but response has {Y.shape[0]}"
        )
    n_input, p_input = X.shape
    complete = np.all(np.isfinite(X), axis=1) & np.all(np.isfinite(Y), axis=1)
    if opts["drop_incomplete_rows"]:
        X, Y = X[complete], Y[complete]
    elif not np.all(complete):
        raise DataValidationError(
            "input contains missing values; drop --no-drop-incomplete-rows "
            "or clean the data"
        )
    if opts["log_transform"]:
        if np.any(Y <= 0.0):
            raise DataValidationError(
                "--log-transform requires strictly positive responses"
            )
        Y = np.log(Y)
    counts = np.count_nonzero(X, axis=0)
    keep = counts >= opts["min_feature_count"]
    kept_idx = np.nonzero(keep)[0]
    X = X[:, keep]
    if X.shape[1] == 0:
        raise DataValidationError("no features left after the minimum-count filter")
    if opts["normalize"]:
        X = normalize_matrix_columns(X)
    result = run_multitask_knockoff(X, Y, _filter_config(opts))
    selected_original = kept_idx[result.selected_features]
    payload = {
        "selected_features": [int(j) + 1 for j in selected_original],
        "selected_feature_names": (
            [xnames[j] for j in selected_original] if xnames else None
        ),
        "W": result.inner.W,
        "threshold": result.inner.threshold,
        "fdp_estimate": result.inner.fdp_estimate,
        "gamma": result.inner.gamma,
        "q": result.inner.q,
        "variant": result.inner.variant,
        "sample_sizes": {
            "n_rows_input": int(n_input),
            "n_rows_used": int(X.shape[0]),
            "rows_dropped": int(n_input - X.shape[0]),
            "p_features_input": int(p_input),
            "p_features_used": int(X.shape[1]),
            "features_dropped": [int(j) + 1 for j in np.nonzero(~keep)[0]],
            "r_responses": int(Y.shape[1]),
        },
        "diagnostics": {"solver": _solver_diagnostics(result.inner)},
    }
    invocation = dict(opts, design=args.design, response=args.response)
    _emit(build_envelope("analyze", invocation, payload, started), args.output)
    return 0


def _parse_sweep(spec: str, config_cls) -> tuple[str, list]:
    if "=" not in spec:
        raise _UsageError("--sweep expects 'field=v1,v2,...'")
    field, _, rest = spec.partition("=")
    field = field.strip().replace("-", "_")
    valid = set(config_cls.__dataclass_fields__)
    if field not in valid or field in ("trials", "seed"):
        raise _UsageError(f"--sweep field {field!r} is not a sweepable setting")
    conv = _CONVERTERS.get(field, float)
    try:
        values = [conv(tok) for tok in rest.split(",") if tok.strip()]
    except ValueError:
        raise _UsageError(f"bad sweep values in {spec!r}") from None
    if not values:
        raise _UsageError("empty sweep value list")
    return field, values


def _records_path(output, records):
    if records:
        return records
    if output is None:
        raise _UsageError("simulate needs --output (or --records) for the trial CSV")
    return (output[: -len(".json")] if output.endswith(".json") else output) + ".csv"


def _simulate(args: argparse.Namespace, config_cls, default_methods) -> int:
    started = time.perf_counter()
    merged, explicit = _resolve(args, {"methods": ",".join(default_methods),
                                       "sweep": None, "paper_scale": False})
    field_names = set(config_cls.__dataclass_fields__)
    kwargs = {k: explicit[k] for k in field_names if k in explicit}
    kwargs.setdefault("q", merged["q"])
    kwargs.setdefault("seed", merged["seed"])
    sweep = None
    if merged["sweep"]:
        sweep = _parse_sweep(merged["sweep"], config_cls)
        kwargs[sweep[0]] = sweep[1][0]  # base must be valid for the first cell
    try:
        if merged["paper_scale"] and hasattr(config_cls, "paper_scale"):
            base = config_cls.paper_scale(**kwargs)
        else:
            base = config_cls(**kwargs)
        configs = [base] if sweep is None else \
            [replace(base, **{sweep[0]: v}) for v in sweep[1]]
    except DataValidationError as exc:
        raise _UsageError(str(exc)) from exc
    methods = [tok.strip() for tok in merged["methods"].split(",") if tok.strip()]
    if not methods:
        raise _UsageError("--methods must name at least one method")
    solver = _filter_config(dict(merged, q=base.q))
    report = run_experiment(configs, methods, solver=solver)
    records_path = _records_path(args.output, getattr(args, "records", None))
    write_records_csv(report.records, records_path)
    payload = {
        "summary": report.summary,
        "records_csv": records_path,
        "n_records": len(report.records),
        "methods": methods,
    }
    invocation = dict(merged, base_config=asdict(base))
    _emit(build_envelope(f"simulate {args.setting}", invocation, payload, started),
          args.output)
    return 0


def _cmd_simulate_group_sparse(args: argparse.Namespace) -> int:
    return _simulate(args, GroupSparseSimConfig,
                     ("group-knockoff", "group-knockoff+",
                      "ungrouped-knockoff", "ungrouped-knockoff+"))


def _cmd_simulate_multitask(args: argparse.Namespace) -> int:
    return _simulate(args, MultitaskSimConfig,
                     ("multitask-knockoff", "pooled-knockoff", "parallel-knockoff"))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groupknockoff",
        description="FDR-controlled group and multitask feature selection "
                    "via the knockoff filter.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    con = sub.add_parser("construct", help="build a knockoff matrix")
    con.add_argument("--design", required=True, help="n x p design CSV")
    con.add_argument("--groups", required=True, help="p-line group label file")
    con.add_argument("--xtilde-out", required=True, dest="xtilde_out",
                     help="where to write the knockoff matrix CSV")
    _add_solver_flags(con)
    con.set_defaults(func=_cmd_construct)

    fil = sub.add_parser("filter", help="run the group knockoff filter")
    fil.add_argument("--design", required=True, help="n x p design CSV")
    fil.add_argument("--groups", required=True, help="p-line group label file")
    fil.add_argument("--response", required=True, help="n x 1 response CSV")
    _add_solver_flags(fil)
    fil.set_defaults(func=_cmd_filter)

    ana = sub.add_parser("analyze", help="multitask analysis of a CSV data set")
    ana.add_argument("--design", required=True, help="n x p design CSV")
    ana.add_argument("--response", required=True, help="n x r response CSV")
    ana.add_argument("--log-transform", action="store_const", const=True,
                     dest="log_transform", help="apply natural log to responses")
    ana.add_argument("--no-drop-incomplete-rows", action="store_const", const=False,
                     dest="drop_incomplete_rows",
                     help="fail on missing values instead of dropping rows")
    ana.add_argument("--min-feature-count", type=int, dest="min_feature_count",
                     help="drop features with fewer nonzero entries (default 3)")
    _add_solver_flags(ana)
    ana.set_defaults(func=_cmd_analyze)

    sim = sub.add_parser("simulate", help="benchmark sweeps")
    simsub = sim.add_subparsers(dest="setting", required=True)
    for name, cmd, cfg in (
        ("group-sparse", _cmd_simulate_group_sparse, GroupSparseSimConfig),
        ("multitask", _cmd_simulate_multitask, MultitaskSimConfig),
    ):
        ssp = simsub.add_parser(name, help=f"{name} benchmark")
        ssp.add_argument("--trials", type=int)
        ssp.add_argument("--methods", help="comma-separated method names")
        ssp.add_argument("--sweep", help="one varied setting: 'field=v1,v2,...'")
        ssp.add_argument("--paper-scale", action="store_const", const=True,
                         dest="paper_scale", help="full-size setting (slow)")
        ssp.add_argument("--records", help="trial CSV path (default: from --output)")
        for field in ("n", "p", "k"):
            ssp.add_argument(f"--{field}", type=int)
        if cfg is GroupSparseSimConfig:
            ssp.add_argument("--m", type=int)
            ssp.add_argument("--group-size", type=int, dest="group_size")
            ssp.add_argument("--amplitude", type=float)
            ssp.add_argument("--rho", type=float)
            ssp.add_argument("--gamma-factor", type=float, dest="gamma_factor")
        else:
            ssp.add_argument("--r", type=int)
            ssp.add_argument("--signal-scale", type=float, dest="signal_scale")
            ssp.add_argument("--rho-x", type=float, dest="rho_x")
            ssp.add_argument("--rho-y", type=float, dest="rho_y")
        _add_solver_flags(ssp)
        ssp.set_defaults(func=cmd)
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except DataValidationError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
