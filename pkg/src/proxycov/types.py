"""Core value types shared across the package.

Conventions used throughout:

* Metric 0 is the primary outcome Y; metrics 1..G-1 are the candidate
  proxies S.
* Covariances over experiments use the population normalization (divide
  by K, never K-1).
* ``n`` always means units per experiment, split evenly between the two
  arms (n/2 each).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np

from .exceptions import DimensionError, ValidationError

__all__ = [
    "PanelDims",
    "TrueEffects",
    "CovEstimate",
    "NoiseModel",
    "ProxyWeights",
    "COV_PROVENANCES",
]

COV_PROVENANCES = ("exact", "naive", "jackknife", "tc")

# Relative asymmetry tolerated before a matrix is rejected as non-symmetric.
_SYM_RTOL = 1e-12
# Relative eigenvalue floor below which a covariance counts as indefinite.
_INDEFINITE_RTOL = 1e-12


def _as_readonly(a: np.ndarray, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


def _check_symmetric(m: np.ndarray, what: str) -> np.ndarray:
    """Validate near-symmetry, then return the exactly symmetrized matrix."""
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"{what} must be a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{what} contains non-finite entries")
    scale = np.max(np.abs(m))
    if scale > 0 and np.max(np.abs(m - m.T)) > _SYM_RTOL * scale:
        raise ValidationError(f"{what} is not symmetric within relative tolerance {_SYM_RTOL:g}")
    return (m + m.T) / 2.0


@dataclass(frozen=True)
class PanelDims:
    """Shape of an experiment panel.

    Attributes
    ----------
    num_experiments : int
        Number of experiments K, at least 1.
    num_metrics : int
        Number of metrics G (primary plus proxies), at least 2.
    units_per_experiment : int
        Units per experiment n, even and at least 4 (n/2 per arm).
    """

    num_experiments: int
    num_metrics: int
    units_per_experiment: int

    def __post_init__(self) -> None:
        if self.num_experiments < 1:
            raise ValidationError("num_experiments must be at least 1")
        if self.num_metrics < 2:
            raise ValidationError("num_metrics must be at least 2 (primary plus one proxy)")
        n = self.units_per_experiment
        if n < 4 or n % 2 != 0:
            raise ValidationError("units_per_experiment must be an even integer >= 4")

    @property
    def total_units(self) -> int:
        return self.num_experiments * self.units_per_experiment


@dataclass(frozen=True)
class TrueEffects:
    """Ground-truth average treatment effects, one row per experiment.

    ``effects[t, 0]`` is the effect on the primary metric in experiment t,
    the remaining columns are effects on the proxy metrics.
    """

    effects: np.ndarray

    def __post_init__(self) -> None:
        e = np.atleast_2d(np.asarray(self.effects, dtype=float))
        if e.ndim != 2:
            raise ValidationError("effects must be a K x G matrix")
        if e.shape[0] < 1 or e.shape[1] < 2:
            raise DimensionError(f"effects needs K >= 1 rows and G >= 2 columns, got {e.shape}")
        if not np.all(np.isfinite(e)):
            raise ValidationError("effects contains non-finite entries")
        object.__setattr__(self, "effects", _as_readonly(e))

    @property
    def num_experiments(self) -> int:
        return self.effects.shape[0]

    @property
    def num_metrics(self) -> int:
        return self.effects.shape[1]


@dataclass(frozen=True)
class CovEstimate:
    """A G x G covariance of treatment effects with estimator provenance.

    The matrix is symmetrized on construction. Estimates produced by the
    noise-corrected estimators may legitimately be indefinite; that is
    recorded by :attr:`is_indefinite`, never raised as an error.
    """

    matrix: np.ndarray
    provenance: str
    metric_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.provenance not in COV_PROVENANCES:
            raise ValidationError(
                f"unknown provenance {self.provenance!r}, expected one of {COV_PROVENANCES}"
            )
        m = _check_symmetric(np.asarray(self.matrix, dtype=float), "covariance matrix")
        if m.shape[0] < 2:
            raise DimensionError("covariance needs at least 2 metrics")
        if self.metric_names is not None and len(self.metric_names) != m.shape[0]:
            raise ValidationError("metric_names length does not match matrix size")
        object.__setattr__(self, "matrix", _as_readonly(m))

    @property
    def num_metrics(self) -> int:
        return self.matrix.shape[0]

    @property
    def yy(self) -> float:
        """Variance of effects on the primary metric."""
        return float(self.matrix[0, 0])

    @property
    def sy(self) -> np.ndarray:
        """Covariance of proxy effects with the primary effect, shape (G-1,)."""
        return self.matrix[1:, 0]

    @property
    def ss(self) -> np.ndarray:
        """Covariance block of the proxy effects, shape (G-1, G-1)."""
        return self.matrix[1:, 1:]

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return _as_readonly(np.linalg.eigvalsh(self.matrix))

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def is_indefinite(self) -> bool:
        radius = float(np.max(np.abs(self.eigenvalues)))
        return bool(self.eigenvalues[0] < -_INDEFINITE_RTOL * max(radius, 1e-300))


@dataclass(frozen=True)
class NoiseModel:
    """Unit-level noise covariance, assumed common to all experiments and arms.

    Must be symmetric positive definite.
    """

    omega: np.ndarray

    def __post_init__(self) -> None:
        m = _check_symmetric(np.asarray(self.omega, dtype=float), "noise covariance")
        evals = np.linalg.eigvalsh(m)
        if evals[0] <= 0:
            raise ValidationError(
                f"noise covariance must be positive definite (smallest eigenvalue {evals[0]:.6e})"
            )
        object.__setattr__(self, "omega", _as_readonly(m))

    @property
    def num_metrics(self) -> int:
        return self.omega.shape[0]

    @property
    def condition_number(self) -> float:
        evals = np.linalg.eigvalsh(self.omega)
        return float(evals[-1] / evals[0])


@dataclass(frozen=True)
class ProxyWeights:
    """Weights over the proxy metrics, plus diagnostics of how they were found.

    ``estimand`` is "ols" for the regression estimand (primary on proxies)
    and "tls" for the noise-whitened smallest-direction estimand. The TLS
    route also records the generalized eigenvalue ``kappa`` (which may be
    negative and is reported as found), the residual of the eigen equation,
    and the primary-metric coordinate of the recovered direction before
    normalization.
    """

    weights: np.ndarray
    estimand: str
    kappa: float | None = None
    residual_norm: float | None = None
    gamma_y: float | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.estimand not in ("ols", "tls"):
            raise ValidationError(f"unknown estimand {self.estimand!r}, expected 'ols' or 'tls'")
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if w.ndim != 1 or w.size < 1:
            raise ValidationError("weights must be a non-empty vector")
        if not np.all(np.isfinite(w)):
            raise ValidationError("weights contains non-finite entries")
        object.__setattr__(self, "weights", _as_readonly(w))

    @property
    def num_proxies(self) -> int:
        return self.weights.size
