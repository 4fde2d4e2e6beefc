"""Estimators of the treatment-effect covariance and the derived weights.

Four routes from data to a covariance estimate:

* :func:`naive_covariance` is the empirical covariance of the per-
  experiment effect estimates. Its expectation is inflated by unit-level
  noise (see :func:`expected_naive_covariance`).
* :func:`jackknife_covariance` replaces each squared effect estimate by a
  leave-one-out cross moment, computed in closed form from sufficient
  statistics.
* :func:`noise_subtracted_covariance` subtracts the known noise
  contribution from the naive estimate.
* :func:`kclass_weights` skips the covariance and runs the equivalent
  unit-level regression directly; it exists as an independent arithmetic
  route for cross-checking the noise-subtracted estimator.

:func:`limlk_weights` maps the naive estimate straight to weights by
whitening with the noise covariance, which only uses its direction.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .aggregates import ExperimentAggregate, UnitData
from .estimands import ols_weights, tls_weights
from .exceptions import (
    ConditioningError,
    DimensionError,
    UnsupportedDesignError,
    ValidationError,
)
from .types import CovEstimate, NoiseModel, ProxyWeights

__all__ = [
    "naive_covariance",
    "expected_naive_covariance",
    "jackknife_covariance",
    "noise_subtracted_covariance",
    "limlk_weights",
    "kclass_weights",
    "WITHIN_NOISE_KCLASS_SCALE",
]

# Multiplier on the pooled within-experiment contrast covariance that makes
# the unit-level regression of kclass_weights coincide with the
# noise-subtracted estimator. Frozen by the equivalence-derivation test in
# tests/test_estimators.py; the within matrix as defined already carries
# the factor 4 from the contrast transform, so no extra scale is needed.
WITHIN_NOISE_KCLASS_SCALE = 1.0

_SINGULAR_RTOL = 1e-10


def _effect_matrix(aggregates: Sequence[ExperimentAggregate], require_constant_n: bool):
    if len(aggregates) < 2:
        raise DimensionError("need at least 2 experiments")
    g = aggregates[0].num_metrics
    sizes = []
    rows = np.empty((len(aggregates), g))
    for i, agg in enumerate(aggregates):
        if agg.num_metrics != g:
            raise DimensionError("experiments disagree on the number of metrics")
        rows[i] = agg.effect_estimate
        sizes.append(agg.num_units)
    if require_constant_n and len(set(sizes)) > 1:
        raise UnsupportedDesignError(
            f"experiments have unequal unit counts {sorted(set(sizes))}; "
            "the estimators assume a common n"
        )
    return rows, sizes


def naive_covariance(aggregates: Sequence[ExperimentAggregate]) -> CovEstimate:
    """Empirical covariance of the effect estimates across experiments.

    Population normalization (divide by K). The expectation of this
    estimator is the true effect covariance plus (4/n) times the unit
    noise covariance, so it is biased whenever noise is non-negligible.

    Raises UnsupportedDesignError when experiments have unequal n.
    """
    rows, _ = _effect_matrix(aggregates, require_constant_n=True)
    centered = rows - rows.mean(axis=0)
    return CovEstimate(centered.T @ centered / rows.shape[0], provenance="naive")


def expected_naive_covariance(truth: CovEstimate, noise: NoiseModel, n: int) -> CovEstimate:
    """Expectation of the naive estimator: truth + (4/n) noise.

    Useful as an oracle for the naive route and for plotting plim curves.
    """
    if n < 2:
        raise ValidationError("n must be at least 2")
    if noise.num_metrics != truth.num_metrics:
        raise DimensionError("noise and truth dimensions differ")
    return CovEstimate(truth.matrix + (4.0 / n) * noise.omega, provenance="naive")


def jackknife_covariance(aggregates: Sequence[ExperimentAggregate], raw: bool = False):
    """Leave-one-out corrected covariance of effect estimates.

    Per experiment, the cross moment of the leave-one-out mean contrast
    with the held-out contrast has closed form

        (n/(n-1)) tau tauᵀ - tilde_cross / (n (n-1)),

    which removes the unit-noise inflation of the squared term. Averaging
    over experiments and subtracting the squared grand mean gives the
    covariance estimate. That matrix is asymmetric in finite samples; the
    returned estimate is its symmetric part. Pass ``raw=True`` to get the
    unsymmetrized ndarray for diagnostics instead of a CovEstimate.

    Experiments may have different unit counts here; each needs n >= 2 and
    equal arms.
    """
    if len(aggregates) < 2:
        raise DimensionError("need at least 2 experiments")
    g = aggregates[0].num_metrics
    second = np.zeros((g, g))
    mean = np.zeros(g)
    for agg in aggregates:
        if agg.num_metrics != g:
            raise DimensionError("experiments disagree on the number of metrics")
        if not agg.is_balanced:
            raise UnsupportedDesignError(
                f"experiment {agg.experiment_id!r} has arms of unequal size"
            )
        n = agg.num_units
        if n < 2:
            raise DimensionError(f"experiment {agg.experiment_id!r} has n < 2")
        tau = agg.effect_estimate
        second += (n / (n - 1.0)) * np.outer(tau, tau) - agg.tilde_cross / (n * (n - 1.0))
        mean += tau
    k = len(aggregates)
    mean /= k
    lam = second / k - np.outer(mean, mean)
    if raw:
        return lam
    return CovEstimate((lam + lam.T) / 2.0, provenance="jackknife")


def noise_subtracted_covariance(sigma: CovEstimate, noise: NoiseModel, n: int) -> CovEstimate:
    """Subtract the noise contribution (4/n) omega from a naive estimate.

    Unbiased for the effect covariance when ``noise`` is the true unit
    noise. The result can be indefinite in finite samples; that is
    reported through the estimate's is_indefinite flag, not raised.
    """
    if sigma.provenance != "naive":
        raise ValidationError(
            f"noise subtraction applies to a naive covariance, got provenance {sigma.provenance!r}"
        )
    if noise.num_metrics != sigma.num_metrics:
        raise DimensionError("noise and covariance dimensions differ")
    if n < 2:
        raise ValidationError("n must be at least 2")
    return CovEstimate(sigma.matrix - (4.0 / n) * noise.omega, provenance="tc")


def limlk_weights(sigma: CovEstimate, noise: NoiseModel, n: int) -> ProxyWeights:
    """Whitened smallest-direction weights from the naive covariance.

    Adding a multiple of ``noise`` to the truth shifts every generalized
    eigenvalue by the same amount and leaves eigenvectors alone, so the
    whitened direction of the naive estimate is consistent for the
    whitened direction of the truth; only the direction of ``noise``
    matters, not its scale. ``n`` is recorded in the diagnostics and does
    not enter the computation.
    """
    if sigma.provenance != "naive":
        raise ValidationError(
            f"expected a naive covariance, got provenance {sigma.provenance!r}"
        )
    res = tls_weights(sigma, noise)
    extra = dict(res.extra)
    extra["n"] = n
    return ProxyWeights(
        weights=res.weights,
        estimand="tls",
        kappa=res.kappa,
        residual_norm=res.residual_norm,
        gamma_y=res.gamma_y,
        extra=extra,
    )


def _validate_balanced_constant_n(units: UnitData):
    uniq, inverse = np.unique(units.experiment_ids, return_inverse=True)
    counts = np.zeros((uniq.size, 2), dtype=np.int64)
    np.add.at(counts, (inverse, units.arms), 1)
    if np.any(counts == 0):
        bad = uniq[np.nonzero(counts == 0)[0][0]]
        raise UnsupportedDesignError(f"experiment {bad!r} has an empty arm")
    if np.any(counts[:, 0] != counts[:, 1]):
        bad = uniq[np.nonzero(counts[:, 0] != counts[:, 1])[0][0]]
        raise UnsupportedDesignError(f"experiment {bad!r} has arms of unequal size")
    n = counts.sum(axis=1)
    if np.unique(n).size > 1:
        raise UnsupportedDesignError(
            f"experiments have unequal unit counts {sorted(set(n.tolist()))}; "
            "the unit-level route assumes a common n"
        )
    return uniq, inverse, int(n[0])


def kclass_weights(units: UnitData, k: float | None = None) -> ProxyWeights:
    """Unit-level regression of the primary contrast on the proxy contrasts.

    Grand-centers the transformed contrasts, then solves the regression
    whose normal matrix is (total sum of squares) - k (within-experiment
    sum of squares), with k defaulting to 1 + 4/n. At the default k this
    reproduces, as exact algebra, the weights from the noise-subtracted
    covariance with the pooled within-contrast noise plug-in; at k = 1 it
    collapses to the plain regression on the naive covariance.

    Computed in two streaming passes over experiments (means, then
    accumulation); no N x N projector is ever formed.

    Raises
    ------
    UnsupportedDesignError
        Unbalanced arms, empty arms, or unequal n across experiments.
    ConditioningError
        Singular regression matrix.
    """
    if units.num_metrics < 2:
        raise DimensionError("need a primary metric plus at least one proxy")
    uniq, inverse, n = _validate_balanced_constant_n(units)
    if uniq.size < 2:
        raise DimensionError("need at least 2 experiments")
    if k is None:
        k = 1.0 + 4.0 / n
    g = units.num_metrics

    contrasts = (2.0 * (2 * units.arms - 1))[:, None] * units.metrics

    # pass 1: per-experiment and grand means of the contrasts
    sums = np.zeros((uniq.size, g))
    np.add.at(sums, inverse, contrasts)
    exp_means = sums / n
    grand_mean = sums.sum(axis=0) / units.num_units

    # pass 2: total and within-experiment sums of squares
    centered = contrasts - grand_mean
    total = centered.T @ centered
    within_dev = contrasts - exp_means[inverse]
    within = within_dev.T @ within_dev

    m = total - k * within
    m = (m + m.T) / 2.0
    denom = m[1:, 1:]
    evals = np.linalg.eigvalsh(denom)
    scale = float(np.max(np.abs(evals)))
    smallest = float(np.min(np.abs(evals)))
    if smallest <= _SINGULAR_RTOL * max(scale, 1e-300):
        raise ConditioningError(
            "unit-level regression matrix is singular", eigenvalue=smallest
        )
    w = np.linalg.solve(denom, m[1:, 0])
    implied = np.linalg.eigvalsh(m / units.num_units)
    radius = float(np.max(np.abs(implied)))
    min_eig = float(implied[0])
    return ProxyWeights(
        weights=w,
        estimand="ols",
        extra={
            "k": float(k),
            "n": n,
            "implied_cov_min_eigenvalue": min_eig,
            "implied_cov_indefinite": bool(min_eig < -1e-12 * max(radius, 1e-300)),
        },
    )
