"""Per-experiment sufficient statistics from unit-level records.

Everything downstream (the covariance estimators, the noise plug-in, the
report pipeline) runs off the per-cell counts, sums, and cross-product
matrices collected here, so unit-level data only has to be scanned once.

The transformed contrast of a unit with outcome vector d in arm a is
2(2a-1)d. Its per-experiment mean equals the difference of arm means when
the two arms have equal size, which is why the derived tilde_* statistics
below are pure functions of the per-arm sums and cross-products.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Any, Iterable, Sequence

import numpy as np

from .exceptions import DimensionError, UnsupportedDesignError, ValidationError
from .types import NoiseModel

__all__ = [
    "CellAggregate",
    "ExperimentAggregate",
    "UnitData",
    "aggregate_units",
    "aggregate_unit_data",
    "merge_aggregates",
    "within_noise",
]


@dataclass(frozen=True)
class CellAggregate:
    """Count, sum, and cross-product matrix for one (experiment, arm) cell.

    ``metric_cross`` is the raw second moment sum over units, d_i d_iᵀ,
    not centered. Two aggregates for the same cell merge by fieldwise
    addition.
    """

    experiment_id: Any
    arm: int
    count: int
    metric_sum: np.ndarray
    metric_cross: np.ndarray

    def __post_init__(self) -> None:
        if self.arm not in (0, 1):
            raise ValidationError(f"arm must be 0 or 1, got {self.arm!r}")
        if self.count < 1:
            raise ValidationError("cell count must be positive")
        s = np.atleast_1d(np.asarray(self.metric_sum, dtype=float))
        c = np.asarray(self.metric_cross, dtype=float)
        if c.shape != (s.size, s.size):
            raise DimensionError(
                f"cross-product shape {c.shape} does not match sum length {s.size}"
            )
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(c))):
            raise ValidationError("cell statistics contain non-finite entries")
        c = (c + c.T) / 2.0
        for name, val in (("metric_sum", s), ("metric_cross", c)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @classmethod
    def from_units(cls, experiment_id, arm: int, metrics: np.ndarray) -> "CellAggregate":
        m = np.atleast_2d(np.asarray(metrics, dtype=float))
        return cls(
            experiment_id=experiment_id,
            arm=arm,
            count=m.shape[0],
            metric_sum=m.sum(axis=0),
            metric_cross=m.T @ m,
        )

    @property
    def num_metrics(self) -> int:
        return self.metric_sum.size

    @property
    def mean(self) -> np.ndarray:
        return self.metric_sum / self.count

    def merge(self, other: "CellAggregate") -> "CellAggregate":
        if self.experiment_id != other.experiment_id or self.arm != other.arm:
            raise ValidationError("can only merge aggregates for the same (experiment, arm) cell")
        if self.num_metrics != other.num_metrics:
            raise DimensionError("metric dimension mismatch in merge")
        return CellAggregate(
            experiment_id=self.experiment_id,
            arm=self.arm,
            count=self.count + other.count,
            metric_sum=self.metric_sum + other.metric_sum,
            metric_cross=self.metric_cross + other.metric_cross,
        )


@dataclass(frozen=True)
class ExperimentAggregate:
    """Sufficient statistics for one experiment: a control and a treatment cell."""

    control: CellAggregate
    treatment: CellAggregate

    def __post_init__(self) -> None:
        if self.control.experiment_id != self.treatment.experiment_id:
            raise ValidationError("control and treatment cells belong to different experiments")
        if (self.control.arm, self.treatment.arm) != (0, 1):
            raise ValidationError("cells must be (control=arm 0, treatment=arm 1)")
        if self.control.num_metrics != self.treatment.num_metrics:
            raise DimensionError("arms disagree on the number of metrics")

    @property
    def experiment_id(self):
        return self.control.experiment_id

    @property
    def num_metrics(self) -> int:
        return self.control.num_metrics

    @property
    def num_units(self) -> int:
        return self.control.count + self.treatment.count

    @property
    def is_balanced(self) -> bool:
        return self.control.count == self.treatment.count

    @cached_property
    def effect_estimate(self) -> np.ndarray:
        """Difference of arm means, the per-experiment effect estimate."""
        out = self.treatment.mean - self.control.mean
        out.setflags(write=False)
        return out

    @cached_property
    def tilde_sum(self) -> np.ndarray:
        """Sum of the transformed contrasts 2(2a-1)d over units."""
        out = 2.0 * (self.treatment.metric_sum - self.control.metric_sum)
        out.setflags(write=False)
        return out

    @cached_property
    def tilde_cross(self) -> np.ndarray:
        """Sum of outer products of the transformed contrasts."""
        out = 4.0 * (self.treatment.metric_cross + self.control.metric_cross)
        out.setflags(write=False)
        return out

    def merge(self, other: "ExperimentAggregate") -> "ExperimentAggregate":
        return ExperimentAggregate(
            control=self.control.merge(other.control),
            treatment=self.treatment.merge(other.treatment),
        )


@dataclass(frozen=True)
class UnitData:
    """Column-oriented unit-level dataset.

    Attributes
    ----------
    experiment_ids : array of shape (N,)
        Experiment membership per unit; any homogeneous sortable dtype.
    arms : int array of shape (N,)
        0 for control, 1 for treatment.
    metrics : float array of shape (N, G)
        Outcome vectors, primary metric in column 0.
    metric_names : tuple of str, optional
    """

    experiment_ids: np.ndarray
    arms: np.ndarray
    metrics: np.ndarray
    metric_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        ids = np.asarray(self.experiment_ids)
        arms = np.asarray(self.arms, dtype=np.int64)
        metrics = np.atleast_2d(np.asarray(self.metrics, dtype=float))
        if metrics.shape[0] < 1:
            raise DimensionError("unit dataset is empty")
        if not (ids.shape == arms.shape == (metrics.shape[0],)):
            raise DimensionError(
                f"inconsistent lengths: ids {ids.shape}, arms {arms.shape}, metrics {metrics.shape}"
            )
        if not np.all((arms == 0) | (arms == 1)):
            raise ValidationError("arms must be 0 or 1")
        if not np.all(np.isfinite(metrics)):
            raise ValidationError("metrics contain non-finite entries")
        if self.metric_names is not None and len(self.metric_names) != metrics.shape[1]:
            raise ValidationError("metric_names length does not match metric columns")
        for name, val in (("experiment_ids", ids), ("arms", arms), ("metrics", metrics)):
            val = val.copy()
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def num_units(self) -> int:
        return self.metrics.shape[0]

    @property
    def num_metrics(self) -> int:
        return self.metrics.shape[1]


def aggregate_units(
    records: Iterable[tuple], metric_names: tuple[str, ...] | None = None
) -> list[ExperimentAggregate]:
    """Aggregate a stream of (experiment_id, arm, metric_vector) records.

    Single pass, order-independent up to floating-point associativity.
    Returns one aggregate per experiment, sorted by experiment id.

    Raises
    ------
    ValidationError
        On an arm value outside {0, 1}.
    DimensionError
        When records disagree on the number of metrics.
    UnsupportedDesignError
        When some experiment has an empty arm.
    """
    cells: dict[tuple, list] = {}
    num_metrics = None
    for experiment_id, arm, vector in records:
        if arm not in (0, 1):
            raise ValidationError(f"arm must be 0 or 1, got {arm!r}")
        v = np.asarray(vector, dtype=float)
        if v.ndim != 1:
            raise DimensionError("each record needs a flat metric vector")
        if num_metrics is None:
            num_metrics = v.size
        elif v.size != num_metrics:
            raise DimensionError(
                f"record for experiment {experiment_id!r} has {v.size} metrics, expected {num_metrics}"
            )
        if not np.all(np.isfinite(v)):
            raise ValidationError(f"non-finite metric value in experiment {experiment_id!r}")
        acc = cells.get((experiment_id, arm))
        if acc is None:
            cells[(experiment_id, arm)] = [1, v.copy(), np.outer(v, v)]
        else:
            acc[0] += 1
            acc[1] += v
            acc[2] += np.outer(v, v)
    return _cells_to_aggregates(cells)


def _cells_to_aggregates(cells: dict) -> list[ExperimentAggregate]:
    ids = sorted({eid for eid, _ in cells})
    out = []
    for eid in ids:
        pair = []
        for arm in (0, 1):
            acc = cells.get((eid, arm))
            if acc is None:
                raise UnsupportedDesignError(f"experiment {eid!r} has an empty arm {arm}")
            pair.append(
                CellAggregate(
                    experiment_id=eid,
                    arm=arm,
                    count=acc[0],
                    metric_sum=acc[1],
                    metric_cross=acc[2],
                )
            )
        out.append(ExperimentAggregate(control=pair[0], treatment=pair[1]))
    return out


def aggregate_unit_data(units: UnitData) -> list[ExperimentAggregate]:
    """Vectorized aggregation of a UnitData block.

    Same contract as :func:`aggregate_units`, but sorts once and reduces
    cell blocks with matrix products instead of a per-record loop.
    """
    uniq, inverse = np.unique(units.experiment_ids, return_inverse=True)
    cell_index = inverse * 2 + units.arms
    order = np.argsort(cell_index, kind="stable")
    sorted_cells = cell_index[order]
    sorted_metrics = units.metrics[order]
    boundaries = np.flatnonzero(np.diff(sorted_cells)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [sorted_cells.size]))

    cells: dict[tuple, list] = {}
    for s, e in zip(starts, ends):
        c = int(sorted_cells[s])
        block = sorted_metrics[s:e]
        key = (uniq[c // 2], c % 2)
        cells[key] = [e - s, block.sum(axis=0), block.T @ block]
    return _cells_to_aggregates(cells)


def merge_aggregates(*collections: Sequence[ExperimentAggregate]) -> list[ExperimentAggregate]:
    """Merge shard-level aggregate collections into one canonical collection.

    Experiments appearing in several shards are combined cellwise; the
    result is sorted by experiment id.
    """
    by_id: dict = {}
    for coll in collections:
        for agg in coll:
            prev = by_id.get(agg.experiment_id)
            by_id[agg.experiment_id] = agg if prev is None else prev.merge(agg)
    return [by_id[eid] for eid in sorted(by_id)]


def within_noise(aggregates: Sequence[ExperimentAggregate]) -> NoiseModel:
    """Pooled within-experiment covariance of the transformed contrasts.

    For each experiment this is the sum of squared deviations of the
    contrasts 2(2a-1)d around their experiment mean, pooled over
    experiments and divided by the total unit count (population style).
    This is exactly the plug-in for which the unit-level regression
    identity of the noise-subtracted estimator holds. It is not a
    drop-in estimate of the unit noise covariance: it carries the factor
    4 from the contrast transform, picks up the effect covariance
    through the between-arm spread, and, when experiment baselines are
    nonzero, a baseline-squared contamination term. Subtracting it at
    the usual 4/n scale therefore reproduces the unit-level k-class
    regression rather than the known-noise subtraction.
    """
    if not aggregates:
        raise DimensionError("need at least one experiment")
    g = aggregates[0].num_metrics
    total = np.zeros((g, g))
    count = 0
    for agg in aggregates:
        if agg.num_metrics != g:
            raise DimensionError("experiments disagree on the number of metrics")
        n = agg.num_units
        ts = agg.tilde_sum
        total += agg.tilde_cross - np.outer(ts, ts) / n
        count += n
    return NoiseModel(total / count)
