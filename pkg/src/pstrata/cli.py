"""Command-line interface: ingest count tables, run analyses, emit JSON/CSV results.

Input format: a UTF-8 CSV with header exactly ``trial,z,s,y,count`` (LF or
CRLF), trials labelled 1..N_R contiguously, z/s/y in {0,1}, counts
non-negative integers.  Unit-level files (header ``trial,z,s,y``) can be
converted with the ``tabulate`` subcommand.

Every JSON output embeds the resolved config, the seed, and the library
version; randomized subcommands require ``--seed`` (no silent entropy).
Given the same command line and seed, outputs are byte-identical except for
the timestamp field.  CSV mirrors of tabular results are written next to
the declared output path (same stem).  Exit codes: 0 success, 2 input
error, 3 numerical failure.  The environment variable PSTRATA_THREADS sets
the default worker count for parallel replicates.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import warnings
from dataclasses import replace
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .bounds import bootstrap_bounds
from .em import EmConfig, run_em
from .errors import (
    EmptyArmError,
    NumericalError,
    ParameterError,
    PstrataError,
    UntestableModelError,
)
from .gibbs import GibbsConfig, gelman_rubin_all, run_gibbs, summarize
from .identification import local_identifiability
from .model import ObservedCounts, Stratum, psace_summary
from .model_checking import lrt, posterior_predictive_p, saturated_log_likelihood
from .sensitivity import SIGMA_GRID, run_hierarchical_gibbs, summarize_hierarchical
from .simulation import builtin_scenarios, evaluate as evaluate_scenario
from .surrogate import (
    evaluate_surrogate,
    predict_ace_y_bounds,
    predict_ace_y_monotone,
    sign_conclusion,
)

COUNTS_HEADER = ["trial", "z", "s", "y", "count"]
UNITS_HEADER = ["trial", "z", "s", "y"]


class CliInputError(ParameterError):
    """Malformed command line or input file."""


def parse_counts_csv(path) -> ObservedCounts:
    """Read a counts CSV; duplicates of a (trial,z,s,y) key are summed with a warning."""
    rows = _read_csv_rows(path, COUNTS_HEADER)
    cells = {}
    duplicates = False
    for lineno, row in rows:
        try:
            trial, z, s, y, count = (int(v) for v in row)
        except ValueError:
            raise CliInputError(f"{path}: line {lineno}: non-integer field in {row!r}")
        if z not in (0, 1) or s not in (0, 1) or y not in (0, 1):
            raise CliInputError(f"{path}: line {lineno}: z, s, y must be 0 or 1")
        if trial < 1:
            raise CliInputError(f"{path}: line {lineno}: trial labels start at 1")
        if count < 0:
            raise CliInputError(f"{path}: line {lineno}: negative count")
        key = (trial, z, s, y)
        if key in cells:
            duplicates = True
        cells[key] = cells.get(key, 0) + count
    if not cells:
        raise CliInputError(f"{path}: no data rows")
    if duplicates:
        warnings.warn(f"{path}: duplicate (trial,z,s,y) rows were summed", RuntimeWarning)
    n_trials = max(k[0] for k in cells)
    seen = {k[0] for k in cells}
    gaps = sorted(set(range(1, n_trials + 1)) - seen)
    if gaps:
        raise CliInputError(f"{path}: trial labels must be contiguous; missing {gaps}")
    counts = np.zeros((2, 2, 2, n_trials), dtype=np.int64)
    for (trial, z, s, y), count in cells.items():
        counts[z, s, y, trial - 1] = count
    return ObservedCounts(counts)


def _read_csv_rows(path, header):
    try:
        fh = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise CliInputError(f"cannot read {path}: {exc}")
    with fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise CliInputError(f"{path}: line 1: missing header {','.join(header)}")
        if [c.strip() for c in first] != header:
            raise CliInputError(
                f"{path}: line 1: header must be exactly {','.join(header)}"
            )
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise CliInputError(
                    f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}"
                )
            out.append((lineno, [c.strip() for c in row]))
        return out


def counts_to_csv(counts: ObservedCounts, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(COUNTS_HEADER)
        for r in range(counts.n_trials):
            for z in (0, 1):
                for s in (0, 1):
                    for y in (0, 1):
                        writer.writerow([r + 1, z, s, y, int(counts.counts[z, s, y, r])])


def _sanitize(obj):
    """Make results JSON-serializable: numpy scalars, arrays, non-finite floats."""
    if isinstance(obj, dict):
        return {_key(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def _key(k):
    if isinstance(k, Stratum):
        return k.label
    if isinstance(k, tuple):
        return ",".join(str(_key(v)) for v in k)
    if isinstance(k, (np.integer, int, np.floating, float)):
        return str(k)
    return k


def _write_result(args, command, results):
    envelope = {
        "tool": "pstrata",
        "version": __version__,
        "command": command,
        "config": _sanitize({k: v for k, v in vars(args).items() if k != "func"}),
        "seed": getattr(args, "seed", None),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "results": _sanitize(results),
    }
    text = json.dumps(envelope, indent=2, sort_keys=True, allow_nan=False)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _mirror_path(output, suffix):
    stem, _ = os.path.splitext(output)
    return f"{stem}{suffix}"


def _write_table_csv(path, rows, columns):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row.get(c, "") for c in columns])


def _summary_csv_rows(summary):
    columns = ["name"]
    for row in summary.values():
        for key in row:
            if key not in columns:
                columns.append(key)
    rows = [{"name": name, **vals} for name, vals in summary.items()]
    return rows, columns


def _parse_quantiles(text):
    try:
        qs = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise CliInputError(f"bad quantile list: {text!r}")
    if not qs or any(not 0 < q < 1 for q in qs):
        raise CliInputError("quantiles must lie strictly between 0 and 1")
    return qs


def _default_jobs():
    value = os.environ.get("PSTRATA_THREADS", "1")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def _resolve(args, name, default):
    value = getattr(args, name)
    if value is None:
        setattr(args, name, default)
        return default
    return value


def _reject_flags(args, names, why):
    given = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is not None]
    if given:
        raise CliInputError(f"{', '.join(given)} cannot be used {why}")


# ---------------------------------------------------------------- subcommands


def _cmd_fit(args):
    counts = parse_counts_csv(args.input)
    monotonicity = args.model == "monotone"
    quantiles = _parse_quantiles(args.quantiles)
    if args.method == "em":
        _reject_flags(args, ["iterations", "burnin", "thin", "chains"], "with --method em")
        config = EmConfig(
            tol=_resolve(args, "tol", 1e-8),
            max_iter=_resolve(args, "max_iter", 5000),
            n_starts=_resolve(args, "n_starts", 20),
        )
        fit = run_em(counts, monotonicity, seed=args.seed, **config.kwargs())
        if not np.isfinite(fit.log_likelihood):
            raise NumericalError("EM failed: no start reached a finite likelihood")
        summary = psace_summary(fit.params)
        act = list(fit.params.active)
        results = {
            "parameters": {
                "p": fit.params.p,
                "alpha": fit.params.alpha,
                "pi": {u.label: fit.params.pi[:, u] for u in act},
                "delta": {f"z{z}": {u.label: fit.params.delta[z, u] for u in act} for z in (0, 1)},
            },
            "psace": {
                "ace": {u.label: summary.ace[u] for u in act},
                "ace_s": summary.ace_s,
                "ace_y": summary.ace_y,
            },
            "log_likelihood": fit.log_likelihood,
            "iterations": fit.iterations,
            "converged": fit.converged,
            "settings": fit.settings,
        }
        _write_result(args, "fit", results)
        return 0
    # gibbs
    _reject_flags(args, ["tol", "max_iter", "n_starts"], "with --method gibbs")
    config = GibbsConfig(
        iterations=_resolve(args, "iterations", 20_000),
        burn_in=_resolve(args, "burnin", 4_000),
        thin=_resolve(args, "thin", 1),
        chains=_resolve(args, "chains", 1),
    )
    draws = run_gibbs(counts, monotonicity, seed=args.seed, **config.kwargs())
    summary = summarize(draws, quantiles)
    psrf = gelman_rubin_all(draws) if config.chains >= 2 else None
    results = {"summary": summary, "gelman_rubin": psrf, "meta": draws.meta}
    _write_result(args, "fit", results)
    if args.output:
        rows, columns = _summary_csv_rows(summary)
        _write_table_csv(_mirror_path(args.output, ".csv"), rows, columns)
    return 0


def _cmd_bounds(args):
    counts = parse_counts_csv(args.input)
    monotonicity = args.model == "monotone"
    trials = range(counts.n_trials) if args.trial is None else [args.trial - 1]
    for r in trials:
        if not 0 <= r < counts.n_trials:
            raise CliInputError(f"--trial must lie in 1..{counts.n_trials}")
    per_trial = {}
    csv_rows = []
    for r in trials:
        result = bootstrap_bounds(
            counts, r, monotonicity, n_boot=args.bootstrap, seed=args.seed, level=args.level
        )
        entry = {}
        for u, est in result.estimates.items():
            entry[u.label] = {
                "lower": est.lower,
                "upper": est.upper,
                "ci_lower": est.ci_lower,
                "ci_upper": est.ci_upper,
                "informative": est.informative,
            }
            csv_rows.append({"trial": r + 1, "stratum": u.label, **entry[u.label]})
        per_trial[str(r + 1)] = {
            "strata": entry,
            "n_boot": result.n_boot,
            "n_skipped": result.n_skipped,
            "skip_warning": result.skip_warning,
        }
    _write_result(args, "bounds", {"trials": per_trial, "level": args.level})
    if args.output:
        _write_table_csv(
            _mirror_path(args.output, ".csv"),
            csv_rows,
            ["trial", "stratum", "lower", "upper", "ci_lower", "ci_upper", "informative"],
        )
    return 0


def _cmd_check(args):
    counts = parse_counts_csv(args.input)
    monotonicity = args.model == "monotone"
    em_config = EmConfig(
        tol=_resolve(args, "tol", 1e-8),
        max_iter=_resolve(args, "max_iter", 5000),
        n_starts=_resolve(args, "n_starts", 20),
    )
    results = {"saturated_log_likelihood": saturated_log_likelihood(counts)}

    try:
        report = lrt(counts, monotonicity, em_config=em_config, seed=args.seed)
        results["gof"] = {
            "model": report.model,
            "statistic": report.statistic,
            "df": report.df,
            "p_value": report.p_value,
            "flags": report.flags,
        }
    except UntestableModelError as exc:
        results["gof"] = {"untestable": str(exc)}

    fit = run_em(counts, monotonicity, seed=args.seed, **em_config.kwargs())
    ident = local_identifiability(fit.params)
    results["identifiability"] = {
        "n_params": ident.n_params,
        "n_free_frequencies": ident.n_free_frequencies,
        "jacobian_rank": ident.jacobian_rank,
        "full_rank": ident.full_rank,
        "trial_count_ok": ident.trial_count_ok,
        "ratio_variation": {
            f"{i + 1},{j + 1}": list(v) for (i, j), v in ident.ratio_variation.items()
        },
        "notes": ident.notes,
    }

    if args.ppp_reps:
        draws = run_gibbs(
            counts,
            monotonicity,
            iterations=_resolve(args, "iterations", 4_000),
            burn_in=_resolve(args, "burnin", 1_000),
            thin=1,
            chains=1,
            seed=args.seed,
        )
        ppp = posterior_predictive_p(
            counts,
            monotonicity,
            draws,
            n_rep=args.ppp_reps,
            em_config=EmConfig(tol=em_config.tol, max_iter=em_config.max_iter, n_starts=5),
            seed=args.seed,
            warm_restarts=args.warm_restarts,
            discrepancy=args.ppp_discrepancy,
        )
        results["ppp"] = {
            "value": ppp.ppp,
            "n_rep": ppp.n_rep,
            "n_dropped": ppp.n_dropped,
            "discrepancy": args.ppp_discrepancy,
            "flags": ppp.flags,
        }
    _write_result(args, "check", results)
    return 0


def _cmd_sensitivity(args):
    counts = parse_counts_csv(args.input)
    sigmas = args.sigma if args.sigma else list(SIGMA_GRID)
    quantiles = _parse_quantiles(args.quantiles)
    per_sigma = {}
    csv_rows = []
    for sigma in sigmas:
        draws = run_hierarchical_gibbs(
            counts,
            sigma,
            iterations=args.iterations,
            burn_in=args.burnin,
            thin=args.thin,
            chains=args.chains,
            seed=args.seed,
        )
        summary = summarize_hierarchical(draws, quantiles)
        per_sigma[str(sigma)] = {
            "summary": summary,
            "min_acceptance": float(draws.acceptance.min()),
            "meta": draws.meta,
        }
        for name, vals in summary.items():
            csv_rows.append({"sigma": sigma, "name": name, **vals})
    _write_result(args, "sensitivity", {"sigmas": per_sigma})
    if args.output and csv_rows:
        columns = ["sigma", "name"] + [
            c for c in csv_rows[0] if c not in ("sigma", "name")
        ]
        _write_table_csv(_mirror_path(args.output, ".csv"), csv_rows, columns)
    return 0


def _cmd_simulate(args):
    catalogue = builtin_scenarios()
    if args.scenario not in catalogue:
        raise CliInputError(
            f"unknown scenario {args.scenario!r}; available: {', '.join(sorted(catalogue))}"
        )
    scenario = catalogue[args.scenario]
    if args.n_per_trial:
        scenario = replace(scenario, n_per_trial=args.n_per_trial)
    report = evaluate_scenario(
        scenario,
        args.replicates,
        em_config=EmConfig(n_starts=_resolve(args, "n_starts", 10)),
        gibbs_config=GibbsConfig(
            iterations=_resolve(args, "iterations", 20_000),
            burn_in=_resolve(args, "burnin", 4_000),
            thin=1,
            chains=1,
        ),
        level=args.level,
        seed=args.seed,
        n_jobs=args.jobs,
    )
    results = {
        "scenario": report.scenario,
        "n_replicates": report.n_replicates,
        "n_failed": report.n_failed,
        "fail_warning": report.fail_warning,
        "truth": report.truth,
        "bias": report.bias,
        "rmse": report.rmse,
        "coverage": report.coverage,
    }
    _write_result(args, "simulate", results)
    if args.output and report.replicates:
        columns = list(report.replicates[0].keys())
        _write_table_csv(_mirror_path(args.output, ".replicates.csv"), report.replicates, columns)
    return 0


def _cmd_predict(args):
    monotonicity = args.model == "monotone"
    if args.ace_s < 0:
        raise CliInputError(
            "negative surrogate effect; relabel the surrogate as 1-S and rerun"
        )
    sign = "positive" if args.ace_s > 0 else "zero"
    results = {"case": args.case}
    if monotonicity:
        results["ace_y"] = predict_ace_y_monotone(args.ace_s, args.ace_ssbar)
        results["sign"] = sign_conclusion(sign, args.ace_ssbar, None, True)
    else:
        if args.ace_sbars is None:
            raise CliInputError("--ace-sbars is required without monotonicity")
        lo, hi = predict_ace_y_bounds(args.ace_s, args.ace_ssbar, args.ace_sbars)
        results["ace_y_bounds"] = [lo, hi]
        results["sign"] = sign_conclusion(sign, args.ace_ssbar, args.ace_sbars, False)
    _write_result(args, "predict", results)
    return 0


def _cmd_evaluate(args):
    counts = parse_counts_csv(args.input)
    monotonicity = args.model == "monotone"
    draws = run_gibbs(
        counts,
        monotonicity,
        iterations=args.iterations,
        burn_in=args.burnin,
        thin=args.thin,
        chains=args.chains,
        seed=args.seed,
    )
    verdict = evaluate_surrogate(draws, level=args.level)
    results = {
        "verdict": {
            "necessity": verdict.necessity,
            "sufficiency": verdict.sufficiency,
            "sum_condition": verdict.sum_condition,
            "intervals": verdict.intervals,
            "medians": verdict.medians,
            "level": verdict.level,
        },
        "summary": summarize(draws),
        "meta": draws.meta,
    }
    _write_result(args, "evaluate", results)
    return 0


def _cmd_tabulate(args):
    rows = _read_csv_rows(args.input, UNITS_HEADER)
    if not rows:
        raise CliInputError(f"{args.input}: no data rows")
    data = {"trial": [], "z": [], "s": [], "y": []}
    for lineno, row in rows:
        try:
            trial, z, s, y = (int(v) for v in row)
        except ValueError:
            raise CliInputError(f"{args.input}: line {lineno}: non-integer field")
        if z not in (0, 1) or s not in (0, 1) or y not in (0, 1):
            raise CliInputError(f"{args.input}: line {lineno}: z, s, y must be 0 or 1")
        if trial < 1:
            raise CliInputError(f"{args.input}: line {lineno}: trial labels start at 1")
        data["trial"].append(trial)
        data["z"].append(z)
        data["s"].append(s)
        data["y"].append(y)
    counts = ObservedCounts.from_units(data["trial"], data["z"], data["s"], data["y"])
    counts_to_csv(counts, args.output)
    return 0


# ---------------------------------------------------------------- parser


def _add_common(parser, *, needs_input=True, needs_seed=True):
    if needs_input:
        parser.add_argument("--input", "-i", required=True, help="counts CSV (trial,z,s,y,count)")
    parser.add_argument("--output", "-o", default=None, help="JSON output path (stdout if omitted)")
    if needs_seed:
        parser.add_argument("--seed", type=int, required=True, help="RNG seed (required; no silent entropy)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pstrata",
        description="Principal-stratum effects and surrogate evaluation from multi-trial count data.",
    )
    parser.add_argument("--version", action="version", version=f"pstrata {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit the latent-stratum model by EM or Gibbs")
    _add_common(p_fit)
    p_fit.add_argument("--method", choices=["em", "gibbs"], required=True)
    p_fit.add_argument("--model", choices=["monotone", "nonmonotone"], required=True)
    p_fit.add_argument("--n-starts", type=int, default=None)
    p_fit.add_argument("--tol", type=float, default=None)
    p_fit.add_argument("--max-iter", type=int, default=None)
    p_fit.add_argument("--iterations", type=int, default=None)
    p_fit.add_argument("--burnin", type=int, default=None)
    p_fit.add_argument("--thin", type=int, default=None)
    p_fit.add_argument("--chains", type=int, default=None)
    p_fit.add_argument("--quantiles", default="0.025,0.5,0.975")
    p_fit.set_defaults(func=_cmd_fit)

    p_bounds = sub.add_parser("bounds", help="partial-identification bounds with bootstrap CIs")
    _add_common(p_bounds)
    p_bounds.add_argument("--model", choices=["monotone", "nonmonotone"], required=True)
    p_bounds.add_argument("--bootstrap", type=int, default=2000, metavar="B")
    p_bounds.add_argument("--trial", type=int, default=None, help="1-based trial (default: all)")
    p_bounds.add_argument("--level", type=float, default=0.95)
    p_bounds.set_defaults(func=_cmd_bounds)

    p_check = sub.add_parser("check", help="goodness of fit and identifiability diagnostics")
    _add_common(p_check)
    p_check.add_argument("--model", choices=["monotone", "nonmonotone"], required=True)
    p_check.add_argument("--n-starts", type=int, default=None)
    p_check.add_argument("--tol", type=float, default=None)
    p_check.add_argument("--max-iter", type=int, default=None)
    p_check.add_argument("--ppp-reps", type=int, default=0, help="posterior predictive replicates (0 = skip)")
    p_check.add_argument("--ppp-discrepancy", choices=["realized", "refit"], default="realized")
    p_check.add_argument("--iterations", type=int, default=None, help="Gibbs iterations for the ppp draws")
    p_check.add_argument("--burnin", type=int, default=None)
    p_check.add_argument("--warm-restarts", type=int, default=5, help="random restarts per refit replicate")
    p_check.set_defaults(func=_cmd_check)

    p_sens = sub.add_parser("sensitivity", help="hierarchical sensitivity analysis over a sigma grid")
    _add_common(p_sens)
    p_sens.add_argument("--sigma", type=float, action="append", default=None,
                        help="repeatable; default grid 0.05 0.2 0.5")
    p_sens.add_argument("--iterations", type=int, default=20_000)
    p_sens.add_argument("--burnin", type=int, default=4_000)
    p_sens.add_argument("--thin", type=int, default=1)
    p_sens.add_argument("--chains", type=int, default=1)
    p_sens.add_argument("--quantiles", default="0.025,0.5,0.975")
    p_sens.set_defaults(func=_cmd_sensitivity)

    p_sim = sub.add_parser("simulate", help="replicate study: bias, RMSE, interval coverage")
    _add_common(p_sim, needs_input=False)
    p_sim.add_argument("--scenario", required=True)
    p_sim.add_argument("--replicates", type=int, default=200)
    p_sim.add_argument("--n-per-trial", type=int, default=None)
    p_sim.add_argument("--n-starts", type=int, default=None)
    p_sim.add_argument("--iterations", type=int, default=None)
    p_sim.add_argument("--burnin", type=int, default=None)
    p_sim.add_argument("--level", type=float, default=0.95)
    p_sim.add_argument("--jobs", type=int, default=_default_jobs())
    p_sim.set_defaults(func=_cmd_simulate)

    p_pred = sub.add_parser("predict", help="endpoint effect in a new trial from its surrogate effect")
    _add_common(p_pred, needs_input=False, needs_seed=False)
    p_pred.add_argument("--model", choices=["monotone", "nonmonotone"], required=True)
    p_pred.add_argument("--ace-s", type=float, required=True, help="surrogate effect in the new trial")
    p_pred.add_argument("--ace-ssbar", type=float, required=True)
    p_pred.add_argument("--ace-sbars", type=float, default=None)
    p_pred.add_argument("--case", choices=["1", "2"], default="1",
                        help="asserted transfer case (same drug / new drug); recorded only")
    p_pred.set_defaults(func=_cmd_predict)

    p_eval = sub.add_parser("evaluate", help="surrogate validity verdict from a posterior fit")
    _add_common(p_eval)
    p_eval.add_argument("--model", choices=["monotone", "nonmonotone"], required=True)
    p_eval.add_argument("--iterations", type=int, default=20_000)
    p_eval.add_argument("--burnin", type=int, default=4_000)
    p_eval.add_argument("--thin", type=int, default=1)
    p_eval.add_argument("--chains", type=int, default=1)
    p_eval.add_argument("--level", type=float, default=0.95)
    p_eval.set_defaults(func=_cmd_evaluate)

    p_tab = sub.add_parser("tabulate", help="convert unit-level CSV (trial,z,s,y) to counts CSV")
    p_tab.add_argument("--input", "-i", required=True)
    p_tab.add_argument("--output", "-o", required=True)
    p_tab.set_defaults(func=_cmd_tabulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ParameterError, EmptyArmError, UntestableModelError, PstrataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
