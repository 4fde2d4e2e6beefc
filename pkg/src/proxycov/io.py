"""File formats for units, aggregates, matrices, scenarios, and reports.

All tables are UTF-8 comma-separated text with a header row. Numbers are
written with 17 significant digits, which round-trips IEEE doubles
exactly, so re-ingesting a written file reproduces the original values
bit for bit and determinism checks can compare bytes.

Schemas (none of them come from any upstream system; they are this
package's own):

* unit table: ``experiment_id, arm, <metric>, ...`` with arm in {0, 1};
* aggregate table: ``experiment_id, arm, count, sum_<metric>, ...,
  cross_<a>_<b>, ...`` with one cross column per unordered metric pair
  (upper triangle, row-major);
* matrix file: header row of metric names, then a square numeric body;
* scenario file: JSON object mirroring StructuralScenario;
* report: JSON document (the canonical serialization) or a plain-text
  rendering of the same content.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Sequence

import numpy as np

from ._version import __version__
from .aggregates import ExperimentAggregate, UnitData, _cells_to_aggregates
from .exceptions import SchemaError, UnsupportedDesignError, ValidationError
from .simulate import StructuralScenario
from .types import CovEstimate, NoiseModel, PanelDims, ProxyWeights

__all__ = [
    "IngestResult",
    "ReportDocument",
    "RunConfig",
    "default_metric_names",
    "file_digest",
    "fmt_float",
    "ingest_aggregates",
    "ingest_units",
    "read_matrix",
    "read_report",
    "read_scenario",
    "read_units",
    "render_report",
    "reorder_metrics",
    "scenario_from_dict",
    "scenario_to_dict",
    "sniff_table_kind",
    "write_aggregates",
    "write_matrix",
    "write_report",
    "write_scenario",
    "write_units",
]

_CHUNK_ROWS = 1 << 16
_PSD_WARN_RTOL = 1e-8


def fmt_float(x) -> str:
    return format(float(x), ".17g")


def default_metric_names(g: int) -> tuple[str, ...]:
    return ("Y",) + tuple(f"S{i}" for i in range(1, g))


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


@dataclass(frozen=True)
class IngestResult:
    """Aggregates plus the table facts an ingested file established."""

    aggregates: tuple[ExperimentAggregate, ...]
    metric_names: tuple[str, ...]
    num_rows: int
    kind: str  # "units" or "aggregates"

    @property
    def num_experiments(self) -> int:
        return len(self.aggregates)

    @property
    def num_metrics(self) -> int:
        return len(self.metric_names)

    @property
    def units_per_experiment(self) -> int | None:
        sizes = {a.num_units for a in self.aggregates}
        return sizes.pop() if len(sizes) == 1 else None


def write_units(path, units: UnitData) -> None:
    names = units.metric_names or default_metric_names(units.num_metrics)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["experiment_id", "arm"] + list(names))
        for eid, arm, row in zip(units.experiment_ids, units.arms, units.metrics):
            writer.writerow([str(eid), str(int(arm))] + [fmt_float(v) for v in row])


def _units_header(header, path):
    if header is None:
        raise SchemaError(f"{path}: empty file", line=1)
    if len(header) < 3 or header[0] != "experiment_id" or header[1] != "arm":
        raise SchemaError(
            f"{path}: expected header experiment_id, arm, <metric columns>", line=1
        )
    return tuple(header[2:])


def _parse_unit_chunk(rows, names, first_line):
    width = len(names) + 2
    for offset, row in enumerate(rows):
        if len(row) != width:
            raise SchemaError(
                f"expected {width} columns, got {len(row)}", line=first_line + offset
            )
    raw = np.asarray(rows, dtype=object)
    arms_txt = raw[:, 1]
    bad = ~np.isin(arms_txt, ("0", "1"))
    if bad.any():
        offset = int(np.flatnonzero(bad)[0])
        raise SchemaError(
            f"arm must be 0 or 1, got {arms_txt[offset]!r}",
            line=first_line + offset,
            column="arm",
        )
    try:
        metrics = raw[:, 2:].astype(float)
    except ValueError:
        # locate the first offending cell for the error message
        for offset, row in enumerate(rows):
            for j, cell in enumerate(row[2:]):
                try:
                    float(cell)
                except ValueError:
                    raise SchemaError(
                        f"non-numeric metric value {cell!r}",
                        line=first_line + offset,
                        column=names[j],
                    ) from None
        raise
    if not np.all(np.isfinite(metrics)):
        offset = int(np.flatnonzero(~np.isfinite(metrics).all(axis=1))[0])
        raise SchemaError("non-finite metric value", line=first_line + offset)
    return raw[:, 0].astype(str), arms_txt.astype(int), metrics


def _accumulate_cells(cells, ids, arms, metrics):
    order = np.lexsort((arms, ids))
    ids, arms, metrics = ids[order], arms[order], metrics[order]
    change = np.flatnonzero((ids[1:] != ids[:-1]) | (arms[1:] != arms[:-1]))
    starts = np.r_[0, change + 1]
    ends = np.r_[change + 1, ids.size]
    for a, b in zip(starts, ends):
        block = metrics[a:b]
        key = (ids[a], int(arms[a]))
        acc = cells.get(key)
        if acc is None:
            cells[key] = [b - a, block.sum(axis=0), block.T @ block]
        else:
            acc[0] += b - a
            acc[1] += block.sum(axis=0)
            acc[2] += block.T @ block


def _scan_unit_file(path):
    """Yield (metric_names, chunks) where chunks iterates parsed blocks."""
    fh = open(path, newline="", encoding="utf-8")
    reader = csv.reader(fh)
    names = _units_header(next(reader, None), path)

    def chunks():
        with fh:
            first_line = 2
            block = []
            for row in reader:
                if not row:
                    first_line += 1
                    continue
                block.append(row)
                if len(block) == _CHUNK_ROWS:
                    yield _parse_unit_chunk(block, names, first_line)
                    first_line += len(block)
                    block = []
            if block:
                yield _parse_unit_chunk(block, names, first_line)

    return names, chunks()


def ingest_units(path, require_uniform: bool = True) -> IngestResult:
    """Stream a unit-level table into per-experiment aggregates.

    The file is read in chunks; only the running cell statistics are held
    in memory, so row count is not a constraint. By default the ingested
    panel must have balanced arms and a shared experiment size, which is
    what every downstream consumer here assumes; pass
    ``require_uniform=False`` to skip that check.

    Raises
    ------
    SchemaError
        Malformed header or row; the message names the line (and column
        where it is known).
    UnsupportedDesignError
        Missing arm, unbalanced arms, or (by default) unequal sizes.
    """
    names, chunks = _scan_unit_file(path)
    cells: dict = {}
    rows = 0
    for ids, arms, metrics in chunks:
        if metrics.shape[1] != len(names):
            raise SchemaError(f"{path}: ragged metric columns")
        rows += ids.size
        _accumulate_cells(cells, ids, arms, metrics)
    aggs = _cells_to_aggregates(cells)
    if require_uniform:
        for a in aggs:
            if not a.is_balanced:
                raise UnsupportedDesignError(
                    f"experiment {a.experiment_id!r} has unbalanced arms "
                    f"({a.control.count} vs {a.treatment.count})"
                )
        sizes = {a.num_units for a in aggs}
        if len(sizes) > 1:
            raise UnsupportedDesignError(
                f"experiments differ in size ({sorted(sizes)}); "
                "a shared units-per-experiment is required here"
            )
    return IngestResult(tuple(aggs), names, rows, kind="units")


def read_units(path) -> UnitData:
    """Load a unit-level table fully into memory (for unit-level methods)."""
    names, chunks = _scan_unit_file(path)
    parts = [c for c in chunks]
    if not parts:
        raise SchemaError(f"{path}: no data rows")
    ids = np.concatenate([p[0] for p in parts])
    arms = np.concatenate([p[1] for p in parts])
    metrics = np.vstack([p[2] for p in parts])
    return UnitData(ids, arms, metrics, metric_names=names)


def _cross_column_names(names):
    cols = []
    for i in range(len(names)):
        for j in range(i, len(names)):
            cols.append(f"cross_{names[i]}_{names[j]}")
    return cols


def write_aggregates(
    path, aggregates: Sequence[ExperimentAggregate], metric_names: Sequence[str] | None = None
) -> None:
    """Write per-cell counts, sums, and upper-triangle cross-products."""
    aggs = list(aggregates)
    if not aggs:
        raise ValidationError("nothing to write: empty aggregate collection")
    g = aggs[0].num_metrics
    names = tuple(metric_names) if metric_names is not None else default_metric_names(g)
    if len(names) != g:
        raise ValidationError(f"got {len(names)} metric names for {g} metrics")
    iu = np.triu_indices(g)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["experiment_id", "arm", "count"]
            + [f"sum_{m}" for m in names]
            + _cross_column_names(names)
        )
        for agg in aggs:
            for cell in (agg.control, agg.treatment):
                writer.writerow(
                    [str(cell.experiment_id), str(cell.arm), str(cell.count)]
                    + [fmt_float(v) for v in cell.metric_sum]
                    + [fmt_float(v) for v in cell.metric_cross[iu]]
                )


def ingest_aggregates(path) -> IngestResult:
    """Read an aggregate table back into per-experiment aggregates.

    Metric names are recovered from the ``sum_`` columns; every unordered
    metric pair must have its ``cross_`` column (a missing one is a schema
    error naming it). Duplicate (experiment, arm) rows merge additively,
    so sharded exports concatenate. A reconstructed cross-product matrix
    that fails positive semidefiniteness beyond roundoff draws a warning
    but is kept, since downstream estimators may still be well defined.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file", line=1)
        if header[:3] != ["experiment_id", "arm", "count"]:
            raise SchemaError(
                f"{path}: expected header experiment_id, arm, count, sum_..., cross_...",
                line=1,
            )
        names = tuple(c[len("sum_"):] for c in header if c.startswith("sum_"))
        if not names:
            raise SchemaError(f"{path}: no sum_ columns found", line=1)
        col_index = {c: i for i, c in enumerate(header)}
        for col in _cross_column_names(names):
            if col not in col_index:
                raise SchemaError(f"{path}: missing column {col}", line=1, column=col)

        g = len(names)
        iu = np.triu_indices(g)
        sum_cols = [col_index[f"sum_{m}"] for m in names]
        cross_cols = [col_index[c] for c in _cross_column_names(names)]
        cells: dict = {}
        rows = 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(
                    f"expected {len(header)} columns, got {len(row)}", line=lineno
                )
            rows += 1
            eid = row[0]
            try:
                arm = int(row[1])
                count = int(row[2])
                sums = np.array([float(row[i]) for i in sum_cols])
                tri = np.array([float(row[i]) for i in cross_cols])
            except ValueError as exc:
                raise SchemaError(f"non-numeric value ({exc})", line=lineno) from None
            if arm not in (0, 1):
                raise SchemaError(f"arm must be 0 or 1, got {row[1]!r}", line=lineno, column="arm")
            if count < 1:
                raise SchemaError("count must be positive", line=lineno, column="count")
            cross = np.zeros((g, g))
            cross[iu] = tri
            cross = cross + np.triu(cross, 1).T
            evals = np.linalg.eigvalsh(cross)
            if evals[0] < -_PSD_WARN_RTOL * max(float(evals[-1]), 1e-300):
                warnings.warn(
                    f"cross-product matrix for experiment {eid!r} arm {arm} is not "
                    f"positive semidefinite (min eigenvalue {evals[0]:.3e}); keeping it",
                    RuntimeWarning,
                    stacklevel=2,
                )
            acc = cells.get((eid, arm))
            if acc is None:
                cells[(eid, arm)] = [count, sums, cross]
            else:
                acc[0] += count
                acc[1] += sums
                acc[2] += cross
    aggs = _cells_to_aggregates(cells)
    return IngestResult(tuple(aggs), names, rows, kind="aggregates")


def sniff_table_kind(path) -> str:
    """Classify a table as unit-level or aggregate-level from its header."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    if not header:
        raise SchemaError(f"{path}: empty file", line=1)
    if header[:3] == ["experiment_id", "arm", "count"] and any(
        c.startswith("sum_") for c in header
    ):
        return "aggregates"
    if header[:2] == ["experiment_id", "arm"] and len(header) > 2:
        return "units"
    raise SchemaError(f"{path}: unrecognized header {header[:4]}", line=1)


def reorder_metrics(
    result: IngestResult, primary_metric: str
) -> IngestResult:
    """Move the named metric to the front (the primary slot)."""
    names = result.metric_names
    if primary_metric not in names:
        raise ValidationError(
            f"unknown metric {primary_metric!r}; file has {', '.join(names)}"
        )
    idx = names.index(primary_metric)
    if idx == 0:
        return result
    perm = np.r_[idx, np.delete(np.arange(len(names)), idx)]
    cells: dict = {}
    for agg in result.aggregates:
        for cell in (agg.control, agg.treatment):
            cells[(cell.experiment_id, cell.arm)] = [
                cell.count,
                cell.metric_sum[perm],
                cell.metric_cross[np.ix_(perm, perm)],
            ]
    return IngestResult(
        tuple(_cells_to_aggregates(cells)),
        tuple(names[i] for i in perm),
        result.num_rows,
        kind=result.kind,
    )


def write_matrix(path, matrix, metric_names: Sequence[str] | None = None) -> None:
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"matrix file wants a square matrix, got shape {m.shape}")
    names = tuple(metric_names) if metric_names is not None else default_metric_names(m.shape[0])
    if len(names) != m.shape[0]:
        raise ValidationError(f"got {len(names)} metric names for a {m.shape[0]}-row matrix")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in m:
            writer.writerow([fmt_float(v) for v in row])


def read_matrix(path) -> tuple[np.ndarray, tuple[str, ...]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise SchemaError(f"{path}: empty matrix file", line=1)
        names = tuple(header)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names):
                raise SchemaError(
                    f"expected {len(names)} columns, got {len(row)}", line=lineno
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise SchemaError(f"non-numeric value ({exc})", line=lineno) from None
    if len(rows) != len(names):
        raise SchemaError(f"{path}: expected {len(names)} rows, got {len(rows)}")
    return np.array(rows), names


def scenario_to_dict(scenario: StructuralScenario) -> dict:
    d = {
        "kind": scenario.kind,
        "num_experiments": scenario.dims.num_experiments,
        "num_metrics": scenario.dims.num_metrics,
        "units_per_experiment": scenario.dims.units_per_experiment,
        "effect_cov": scenario.effect_cov.tolist(),
        "noise": scenario.noise.omega.tolist(),
        "replications": scenario.replications,
        "seed": scenario.seed,
        "baseline_mean": scenario.baseline_mean,
        "baseline_sd": scenario.baseline_sd,
        "name": scenario.name,
    }
    if scenario.beta is not None:
        d["beta"] = scenario.beta.tolist()
    if scenario.gradient is not None:
        d["gradient"] = scenario.gradient.tolist()
        d["hessian"] = scenario.hessian.tolist()
        d["effect_scale"] = scenario.effect_scale
    return d


_SCENARIO_KEYS = {
    "kind",
    "num_experiments",
    "num_metrics",
    "units_per_experiment",
    "beta",
    "effect_cov",
    "noise",
    "replications",
    "seed",
    "baseline_mean",
    "baseline_sd",
    "gradient",
    "hessian",
    "effect_scale",
    "name",
}


def scenario_from_dict(d: dict) -> StructuralScenario:
    unknown = set(d) - _SCENARIO_KEYS
    if unknown:
        raise ValidationError(f"unknown scenario fields: {', '.join(sorted(unknown))}")
    missing = {"kind", "num_experiments", "num_metrics", "units_per_experiment",
               "effect_cov", "noise"} - set(d)
    if missing:
        raise ValidationError(f"scenario file lacks fields: {', '.join(sorted(missing))}")
    try:
        dims = PanelDims(
            int(d["num_experiments"]), int(d["num_metrics"]), int(d["units_per_experiment"])
        )
        kwargs = dict(
            kind=d["kind"],
            dims=dims,
            beta=None if d.get("beta") is None else np.asarray(d["beta"], dtype=float),
            effect_cov=np.asarray(d["effect_cov"], dtype=float),
            noise=NoiseModel(np.asarray(d["noise"], dtype=float)),
            replications=int(d.get("replications", 1)),
            seed=int(d.get("seed", 0)),
            baseline_mean=float(d.get("baseline_mean", 0.0)),
            baseline_sd=float(d.get("baseline_sd", 0.0)),
            name=str(d.get("name", "")),
        )
        if d.get("gradient") is not None or d.get("hessian") is not None:
            kwargs["gradient"] = np.asarray(d["gradient"], dtype=float)
            kwargs["hessian"] = np.asarray(d["hessian"], dtype=float)
        if "effect_scale" in d:
            kwargs["effect_scale"] = float(d["effect_scale"])
    except (TypeError, KeyError) as exc:
        raise ValidationError(f"malformed scenario file ({exc})") from None
    return StructuralScenario(**kwargs)


def write_scenario(path, scenario: StructuralScenario) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2)
        fh.write("\n")


def read_scenario(path) -> StructuralScenario:
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})", line=exc.lineno) from None
    if not isinstance(d, dict):
        raise SchemaError(f"{path}: scenario file must hold a JSON object")
    return scenario_from_dict(d)


@dataclass(frozen=True)
class RunConfig:
    """Validated parameters of one command invocation."""

    command: str
    input_path: str | None = None
    method: str | None = None
    omega_source: str | None = None  # "within" or a matrix file path
    n_override: int | None = None
    primary_metric: str | None = None
    out: str | None = None
    fmt: str = "json"
    seed: int | None = None
    scenario: str | None = None
    replications: int | None = None
    estimators: tuple[str, ...] | None = None
    full_scale: bool = False

    def __post_init__(self) -> None:
        if self.fmt not in ("json", "text"):
            raise ValidationError(f"unknown format {self.fmt!r}")
        if self.method is not None and self.method not in (
            "naive", "jackknife", "limlk", "tc", "kclass",
        ):
            raise ValidationError(f"unknown method {self.method!r}")
        if self.command == "estimate":
            if self.method in ("limlk", "tc") and self.omega_source is None:
                raise ValidationError(
                    f"method {self.method!r} needs --omega (a matrix file or 'within')"
                )
        if self.replications is not None and self.replications < 1:
            raise ValidationError("replications must be at least 1")

    def echo(self) -> dict:
        d = {"command": self.command}
        for key in (
            "input_path", "method", "omega_source", "n_override", "primary_metric",
            "out", "fmt", "seed", "scenario", "replications", "full_scale",
        ):
            val = getattr(self, key)
            if val is not None and val is not False:
                d[key] = val
        if self.estimators is not None:
            d["estimators"] = list(self.estimators)
        return d


_INTERPRETATION = (
    "The weights say how proxy-metric effects combine to track the primary-metric "
    "effect across experiments of this population.",
    "They measure association between true effects, not a causal decomposition: "
    "interventions that move the primary metric through channels the proxies do not "
    "register leave that direct component outside the weighted combination.",
    "Use the weighted proxy effect as the proxy-predictable part of the primary "
    "effect; only when direct effects are negligible does it stand in for measuring "
    "the primary metric itself.",
)

_METHOD_NOTES = {
    "naive": "Method note: the plain covariance of estimated effects carries "
    "within-experiment sampling noise, which biases these weights at small "
    "experiment sizes.",
    "jackknife": "Method note: leave-one-out cross moments remove the "
    "within-experiment sampling-noise bias of the plain covariance.",
    "limlk": "Method note: weights come from the smallest noise-whitened "
    "direction; they are exact under full mediation but need the direct effects "
    "to vanish.",
    "tc": "Method note: the (4/n)-scaled noise matrix was subtracted from the "
    "plain covariance before regressing.",
    "kclass": "Method note: unit-level regression with k = 1 + 4/n; identical to "
    "subtracting the pooled within-experiment contrast covariance.",
}


@dataclass(frozen=True)
class ReportDocument:
    """Self-contained record of one command's inputs, outputs, diagnostics.

    The JSON form is the canonical serialization and round-trips
    losslessly (floats are written with full precision; non-finite values
    map to null). The text form renders the same content for reading.
    """

    command: str
    config: dict
    input_info: dict
    metric_names: tuple[str, ...]
    covariance: CovEstimate | None
    weights: ProxyWeights | None
    diagnostics: dict
    interpretation: tuple[str, ...]
    extras: dict = field(default_factory=dict)
    version: str = __version__
    created_at: str = ""

    @classmethod
    def build(cls, command, config, input_info, metric_names, covariance, weights,
              diagnostics, method=None, extras=None):
        lines = _INTERPRETATION + ((_METHOD_NOTES[method],) if method else ())
        return cls(
            command=command,
            config=config,
            input_info=input_info,
            metric_names=tuple(metric_names),
            covariance=covariance,
            weights=weights,
            diagnostics=diagnostics,
            interpretation=lines,
            extras=extras or {},
            created_at=datetime.now(timezone.utc).isoformat(),
        )

    def to_dict(self) -> dict:
        cov = None
        if self.covariance is not None:
            cov = {
                "provenance": self.covariance.provenance,
                "metric_names": list(
                    self.covariance.metric_names or self.metric_names
                ),
                "matrix": self.covariance.matrix.tolist(),
            }
        wts = None
        if self.weights is not None:
            wts = {
                "estimand": self.weights.estimand,
                "proxy_names": list(self.metric_names[1:]),
                "values": self.weights.weights.tolist(),
                "kappa": self.weights.kappa,
                "residual_norm": self.weights.residual_norm,
                "gamma_y": self.weights.gamma_y,
                "extra": dict(self.weights.extra),
            }
        return _json_safe(
            {
                "proxycov_version": self.version,
                "created_at": self.created_at,
                "command": self.command,
                "config": self.config,
                "input": self.input_info,
                "metric_names": list(self.metric_names),
                "covariance": cov,
                "weights": wts,
                "diagnostics": self.diagnostics,
                "interpretation": list(self.interpretation),
                "extras": self.extras,
            }
        )

    @classmethod
    def from_dict(cls, d: dict) -> "ReportDocument":
        cov = None
        if d.get("covariance") is not None:
            c = d["covariance"]
            cov = CovEstimate(
                _num_array(c["matrix"]),
                provenance=c["provenance"],
                metric_names=tuple(c["metric_names"]),
            )
        wts = None
        if d.get("weights") is not None:
            w = d["weights"]
            wts = ProxyWeights(
                weights=_num_array(w["values"]),
                estimand=w["estimand"],
                kappa=_num_scalar(w.get("kappa")),
                residual_norm=_num_scalar(w.get("residual_norm")),
                gamma_y=_num_scalar(w.get("gamma_y")),
                extra=w.get("extra", {}),
            )
        return cls(
            command=d["command"],
            config=d["config"],
            input_info=d["input"],
            metric_names=tuple(d["metric_names"]),
            covariance=cov,
            weights=wts,
            diagnostics=d["diagnostics"],
            interpretation=tuple(d["interpretation"]),
            extras=d.get("extras", {}),
            version=d["proxycov_version"],
            created_at=d["created_at"],
        )


def _json_safe(x):
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, np.ndarray):
        return _json_safe(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        f = float(x)
        return f if math.isfinite(f) else None
    return x


def _num_array(values):
    def conv(v):
        if isinstance(v, list):
            return [conv(x) for x in v]
        return math.nan if v is None else float(v)

    return np.asarray(conv(values), dtype=float)


def _num_scalar(v):
    return None if v is None else float(v)


def _text_lines(doc: ReportDocument) -> list[str]:
    lines = [f"proxycov {doc.version} {doc.command} report", f"generated: {doc.created_at}"]
    for key, val in sorted(doc.config.items()):
        lines.append(f"config {key}: {val}")
    for key, val in sorted(doc.input_info.items()):
        lines.append(f"input {key}: {val}")
    lines.append("metrics: " + ", ".join(doc.metric_names))
    if doc.covariance is not None:
        lines.append(f"covariance ({doc.covariance.provenance}):")
        names = doc.covariance.metric_names or doc.metric_names
        for name, row in zip(names, doc.covariance.matrix):
            lines.append(f"  {name}: " + " ".join(fmt_float(v) for v in row))
    if doc.weights is not None:
        lines.append(f"weights ({doc.weights.estimand}):")
        for name, v in zip(doc.metric_names[1:], doc.weights.weights):
            lines.append(f"  {name}: {fmt_float(v)}")
    for key, val in sorted(doc.diagnostics.items()):
        if isinstance(val, (list, tuple)):
            val = " ".join(fmt_float(v) if isinstance(v, (int, float)) else str(v) for v in val)
        elif isinstance(val, float):
            val = fmt_float(val)
        lines.append(f"diagnostic {key}: {val}")
    for key, val in sorted(doc.extras.items()):
        lines.append(f"{key}: {json.dumps(_json_safe(val), sort_keys=True)}")
    lines.append("interpretation:")
    lines.extend(f"  {line}" for line in doc.interpretation)
    return lines


def render_report(doc: ReportDocument, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(doc.to_dict(), indent=2, allow_nan=False) + "\n"
    if fmt == "text":
        return "\n".join(_text_lines(doc)) + "\n"
    raise ValidationError(f"unknown format {fmt!r}")


def write_report(path, doc: ReportDocument, fmt: str = "json") -> str:
    text = render_report(doc, fmt)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return text


def read_report(path) -> ReportDocument:
    with open(path, encoding="utf-8") as fh:
        return ReportDocument.from_dict(json.load(fh))
