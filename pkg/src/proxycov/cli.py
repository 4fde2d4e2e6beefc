"""Command-line front end.

Subcommands: ``aggregate`` turns a unit-level table into the compact
per-cell statistics file, ``estimate`` runs one estimator over either
table kind and emits a report, ``simulate`` runs a Monte Carlo scenario
and writes plot-ready tables, ``scenarios`` lists the built-in presets.

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical
failure inside an estimator, 4 file-system errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from ._version import __version__
from .aggregates import UnitData, aggregate_unit_data, within_noise
from .estimands import ols_weights, symmetric_inverse_sqrt
from .estimators import (
    jackknife_covariance,
    kclass_weights,
    limlk_weights,
    naive_covariance,
    noise_subtracted_covariance,
)
from .exceptions import NumericalError, UnsupportedDesignError, ValidationError
from .io import (
    IngestResult,
    ReportDocument,
    RunConfig,
    file_digest,
    fmt_float,
    ingest_aggregates,
    ingest_units,
    read_matrix,
    read_scenario,
    read_units,
    render_report,
    reorder_metrics,
    scenario_to_dict,
    sniff_table_kind,
    write_aggregates,
    write_report,
)
from .simulate import (
    ESTIMATOR_NAMES,
    preset_names,
    reference_slopes,
    run_monte_carlo,
    scenario_preset,
    simulate_panel,
    structural_truth_covariance,
)
from .types import CovEstimate, NoiseModel

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxycov",
        description="Proxy-metric weights from treatment-effect covariances.",
    )
    parser.add_argument("--version", action="version", version=f"proxycov {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("aggregate", help="collapse a unit-level table to cell statistics")
    p.add_argument("input", help="unit-level csv (experiment_id, arm, metrics...)")
    p.add_argument("--out", required=True, help="aggregate csv to write")
    p.set_defaults(func=_cmd_aggregate)

    p = sub.add_parser("estimate", help="estimate proxy weights from a data file")
    p.add_argument("input", help="unit-level or aggregate csv")
    p.add_argument(
        "--method",
        required=True,
        choices=("naive", "jackknife", "limlk", "tc", "kclass"),
    )
    p.add_argument(
        "--omega",
        default=None,
        help="noise covariance: a matrix csv path, or 'within' for the pooled "
        "within-experiment contrast covariance",
    )
    p.add_argument("--n", type=int, default=None, dest="n_override",
                   help="units per experiment (defaults to the value in the data)")
    p.add_argument("--primary-metric", default=None,
                   help="metric column to treat as the primary outcome (default: first)")
    p.add_argument("--format", choices=("json", "text"), default="json", dest="fmt")
    p.add_argument("--out", default=None, help="also write the report here")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("simulate", help="run a Monte Carlo scenario")
    p.add_argument("--scenario", required=True,
                   help="preset name (see `proxycov scenarios`) or scenario json path")
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--estimators", default="naive,jackknife,limlk,tc",
                   help="comma-separated subset of " + ",".join(ESTIMATOR_NAMES))
    p.add_argument("--full-scale", action="store_true",
                   help="blow a preset up to full reference scale (slow)")
    p.add_argument("--format", choices=("json", "text"), default="json", dest="fmt")
    p.add_argument("--out", default=None,
                   help="prefix for the summary/draws/scatter/slopes tables and report")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("scenarios", help="list built-in scenario presets")
    p.add_argument("--format", choices=("json", "text"), default="text", dest="fmt")
    p.set_defaults(func=_cmd_scenarios)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def _cmd_aggregate(args) -> int:
    result = ingest_units(args.input)
    write_aggregates(args.out, result.aggregates, result.metric_names)
    n = result.units_per_experiment
    print(
        f"aggregated {result.num_rows} units into {result.num_experiments} experiments "
        f"({result.num_metrics} metrics, {n} units each); wrote {args.out}"
    )
    return EXIT_OK


def _ingest_any(path) -> IngestResult:
    kind = sniff_table_kind(path)
    return ingest_units(path) if kind == "units" else ingest_aggregates(path)


def _labeled(cov: CovEstimate, names) -> CovEstimate:
    return CovEstimate(cov.matrix, provenance=cov.provenance, metric_names=tuple(names))


def _load_omega(source, names):
    if source == "within":
        return None  # resolved from the data later
    omega, mnames = read_matrix(source)
    if mnames and set(mnames) != {""} and list(mnames) != [str(i) for i in range(len(mnames))]:
        if set(mnames) != set(names):
            raise ValidationError(
                f"noise matrix metrics ({', '.join(mnames)}) do not match "
                f"the data metrics ({', '.join(names)})"
            )
        perm = [mnames.index(m) for m in names]
        omega = omega[np.ix_(perm, perm)]
    return NoiseModel(omega)


def _resolve_n(result: IngestResult, n_override) -> int:
    if n_override is not None:
        if n_override < 2:
            raise ValidationError("--n must be at least 2")
        return int(n_override)
    n = result.units_per_experiment
    if n is None:
        raise UnsupportedDesignError(
            "experiments have unequal unit counts; the noise scale 4/n is undefined"
        )
    return n


def _cmd_estimate(args) -> int:
    config = RunConfig(
        command="estimate",
        input_path=args.input,
        method=args.method,
        omega_source=args.omega,
        n_override=args.n_override,
        primary_metric=args.primary_metric,
        out=args.out,
        fmt=args.fmt,
    )
    digest = file_digest(args.input)
    result = _ingest_any(args.input)
    if config.primary_metric is not None:
        result = reorder_metrics(result, config.primary_metric)
    names = result.metric_names
    aggs = result.aggregates

    if config.method == "naive" and config.omega_source is not None:
        print("warning: method naive ignores --omega", file=sys.stderr)

    omega = None
    if config.method in ("limlk", "tc"):
        omega = _load_omega(config.omega_source, names)
        if omega is None:
            omega = within_noise(aggs)

    diagnostics = {"omega_source": config.omega_source}
    if config.method == "tc" and config.omega_source == "within":
        diagnostics["omega_source_note"] = (
            "the within source is the pooled contrast covariance, so this run "
            "reproduces the unit-level k-class regression, not the known-noise "
            "subtraction"
        )
    weights = None

    if config.method == "naive":
        cov = naive_covariance(aggs)
        weights = ols_weights(cov)
    elif config.method == "jackknife":
        cov = jackknife_covariance(aggs)
        weights = ols_weights(cov)
    elif config.method == "tc":
        base = naive_covariance(aggs)
        n = _resolve_n(result, config.n_override)
        cov = noise_subtracted_covariance(base, omega, n)
        weights = ols_weights(cov)
        diagnostics["n"] = n
    elif config.method == "limlk":
        cov = naive_covariance(aggs)
        n = _resolve_n(result, config.n_override)
        weights = limlk_weights(cov, omega, n)
        diagnostics["n"] = n
        diagnostics["kappa"] = weights.kappa
        diagnostics["generalized_eigen_residual"] = weights.residual_norm
        diagnostics["gamma_y"] = weights.gamma_y
    else:  # kclass
        if result.kind != "units":
            raise ValidationError(
                "method kclass regresses unit-level contrasts and needs a unit-level file"
            )
        units = read_units(args.input)
        if config.primary_metric is not None:
            unames = units.metric_names
            perm = [unames.index(config.primary_metric)] + [
                i for i, m in enumerate(unames) if m != config.primary_metric
            ]
            units = UnitData(
                units.experiment_ids,
                units.arms,
                units.metrics[:, perm],
                metric_names=tuple(unames[i] for i in perm),
            )
        weights = kclass_weights(units)
        n = int(weights.extra["n"])
        # the regression's implied covariance, for the labeled report matrix
        cov = noise_subtracted_covariance(
            naive_covariance(aggs), within_noise(aggs), n
        )
        diagnostics["n"] = n
        diagnostics["k"] = weights.extra["k"]
        diagnostics["implied_cov_min_eigenvalue"] = weights.extra["implied_cov_min_eigenvalue"]

    cov = _labeled(cov, names)
    diagnostics["indefinite"] = cov.is_indefinite
    diagnostics["min_eigenvalue"] = cov.min_eigenvalue
    diagnostics["eigenvalues"] = cov.eigenvalues.tolist()

    doc = ReportDocument.build(
        command="estimate",
        config=config.echo(),
        input_info={
            "path": args.input,
            "digest": digest,
            "kind": result.kind,
            "rows": result.num_rows,
            "num_experiments": result.num_experiments,
            "num_metrics": result.num_metrics,
            "units_per_experiment": result.units_per_experiment,
        },
        metric_names=names,
        covariance=cov,
        weights=weights,
        diagnostics=diagnostics,
        method=config.method,
    )
    _emit(doc, config)
    return EXIT_OK


def _resolve_scenario(args):
    if args.scenario in preset_names():
        return scenario_preset(args.scenario, full_scale=args.full_scale)
    if os.path.exists(args.scenario):
        if args.full_scale:
            raise ValidationError("--full-scale applies to presets only")
        return read_scenario(args.scenario)
    raise ValidationError(
        f"unknown scenario {args.scenario!r}; presets: {', '.join(preset_names())}"
    )


def _write_csv(path, header, rows):
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _cmd_simulate(args) -> int:
    estimators = tuple(e.strip() for e in args.estimators.split(",") if e.strip())
    config = RunConfig(
        command="simulate",
        scenario=args.scenario,
        replications=args.replications,
        seed=args.seed,
        out=args.out,
        fmt=args.fmt,
        estimators=estimators,
        full_scale=args.full_scale,
    )
    scenario = _resolve_scenario(args)
    overrides = {}
    if args.replications is not None:
        overrides["replications"] = args.replications
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        scenario = replace(scenario, **overrides)

    result = run_monte_carlo(scenario, estimators=estimators, workers=args.workers)

    names = scenario.metric_names
    proxies = names[1:]
    summaries = {}
    for est in estimators:
        s = result.summaries[est]
        summaries[est] = {
            "mean": s.mean.tolist(),
            "mc_se": s.mc_se.tolist(),
            "bias": None if s.bias is None else s.bias.tolist(),
            "failures": s.failures,
            "replications_used": s.replications_used,
            "indefinite_frequency": s.indefinite_frequency,
        }

    # replication-0 panel supplies the scatter; exact formulas the slopes
    units, _ = simulate_panel(scenario, 0)
    est_effects = np.stack(
        [a.effect_estimate for a in aggregate_unit_data(units)]
    )
    white = symmetric_inverse_sqrt(scenario.noise.omega)
    whitened = est_effects @ white
    truth = structural_truth_covariance(scenario)
    slopes = reference_slopes(truth, scenario.noise, [scenario.dims.units_per_experiment])

    written = {}
    if args.out:
        base = args.out
        _write_csv(
            base + ".summary.csv",
            ["estimator", "metric", "mean", "mc_se", "bias", "failures",
             "replications_used", "indefinite_frequency"],
            [
                [est, proxies[j], fmt_float(s["mean"][j]), fmt_float(s["mc_se"][j]),
                 "" if s["bias"] is None else fmt_float(s["bias"][j]),
                 str(s["failures"]), str(s["replications_used"]),
                 fmt_float(s["indefinite_frequency"])]
                for est, s in summaries.items()
                for j in range(len(proxies))
            ],
        )
        _write_csv(
            base + ".draws.csv",
            ["replication", "estimator"] + [f"weight_{m}" for m in proxies],
            [
                [str(r), est] + [fmt_float(v) for v in result.draws[r, i]]
                for r in range(result.draws.shape[0])
                for i, est in enumerate(estimators)
            ],
        )
        _write_csv(
            base + ".scatter.csv",
            ["experiment"]
            + [f"effect_{m}" for m in names]
            + [f"whitened_effect_{m}" for m in names],
            [
                [str(t)] + [fmt_float(v) for v in est_effects[t]]
                + [fmt_float(v) for v in whitened[t]]
                for t in range(est_effects.shape[0])
            ],
        )
        slope_rows = [
            ["ols_target"] + [fmt_float(v) for v in slopes["ols_target"]],
            ["ols_plim"] + [fmt_float(v) for v in slopes["by_n"][0]["ols_plim"]],
            ["tls_target"] + [fmt_float(v) for v in slopes["tls_target"]],
            ["tls_plim"] + [fmt_float(v) for v in slopes["by_n"][0]["tls_plim"]],
            ["whitened_ols_target"]
            + [fmt_float(v) for v in slopes["whitened_ols_target"]],
            ["whitened_ols_plim"]
            + [fmt_float(v) for v in slopes["by_n"][0]["whitened_ols_plim"]],
        ]
        _write_csv(
            base + ".slopes.csv",
            ["line"] + [f"weight_{m}" for m in proxies],
            slope_rows,
        )
        written = {
            "summary": os.path.basename(base + ".summary.csv"),
            "draws": os.path.basename(base + ".draws.csv"),
            "scatter": os.path.basename(base + ".scatter.csv"),
            "slopes": os.path.basename(base + ".slopes.csv"),
        }

    doc = ReportDocument.build(
        command="simulate",
        config=config.echo(),
        input_info={"scenario": scenario.name or args.scenario, "kind": scenario.kind},
        metric_names=names,
        covariance=None,
        weights=None,
        diagnostics={
            "replications": scenario.replications,
            "seed": scenario.seed,
            "num_experiments": scenario.dims.num_experiments,
            "units_per_experiment": scenario.dims.units_per_experiment,
        },
        extras={
            "scenario": scenario_to_dict(scenario),
            "summaries": summaries,
            "reference_slopes": {
                "ols_target": slopes["ols_target"].tolist(),
                "tls_target": slopes["tls_target"].tolist(),
                "whitened_ols_target": slopes["whitened_ols_target"].tolist(),
                "n": scenario.dims.units_per_experiment,
                "ols_plim": slopes["by_n"][0]["ols_plim"].tolist(),
                "tls_plim": slopes["by_n"][0]["tls_plim"].tolist(),
                "whitened_ols_plim": slopes["by_n"][0]["whitened_ols_plim"].tolist(),
            },
            "files": written,
        },
    )
    if args.out:
        write_report(args.out + ".report." + ("json" if config.fmt == "json" else "txt"),
                     doc, config.fmt)
    print(render_report(doc, config.fmt), end="")
    return EXIT_OK


def _cmd_scenarios(args) -> int:
    rows = []
    for name in preset_names():
        sc = scenario_preset(name)
        rows.append(
            {
                "name": name,
                "kind": sc.kind,
                "num_experiments": sc.dims.num_experiments,
                "num_metrics": sc.dims.num_metrics,
                "units_per_experiment": sc.dims.units_per_experiment,
                "replications": sc.replications,
            }
        )
    if args.fmt == "json":
        import json

        print(json.dumps(rows, indent=2))
    else:
        for r in rows:
            print(
                f"{r['name']}: kind={r['kind']} experiments={r['num_experiments']} "
                f"metrics={r['num_metrics']} units={r['units_per_experiment']} "
                f"replications={r['replications']}"
            )
    return EXIT_OK


def _emit(doc: ReportDocument, config: RunConfig) -> None:
    text = render_report(doc, config.fmt)
    if config.out:
        write_report(config.out, doc, config.fmt)
    print(text, end="")


if __name__ == "__main__":
    sys.exit(main())
