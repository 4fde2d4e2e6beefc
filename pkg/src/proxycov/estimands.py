"""Proxy-weight estimands defined on a covariance of treatment effects.

Both estimands take a G x G covariance of true (or estimated) effects,
with the primary metric in position 0, and return weights over the G-1
proxy metrics:

* :func:`ols_weights` solves the population regression of the primary
  effect on the proxy effects.
* :func:`tls_weights` whitens by a noise covariance and takes the
  direction annihilated by the smallest generalized eigenvalue, i.e. a
  total-least-squares fit that treats every metric as noisy.
"""

from __future__ import annotations

import numpy as np

from .exceptions import (
    AmbiguousEigenvalueError,
    ConditioningError,
    DegenerateDirectionError,
    DimensionError,
    ValidationError,
)
from .types import CovEstimate, NoiseModel, ProxyWeights, TrueEffects

__all__ = [
    "effects_covariance",
    "ols_weights",
    "tls_weights",
    "symmetric_inverse_sqrt",
]

# Relative cutoff under which a matrix counts as singular / a direction as
# degenerate / an eigenvalue gap as ambiguous.
_SINGULAR_RTOL = 1e-10
# The recovered TLS direction must satisfy the eigen equation to this
# relative residual, otherwise the solve is reported as failed.
_RESIDUAL_RTOL = 1e-8


def effects_covariance(effects: TrueEffects | np.ndarray) -> CovEstimate:
    """Population covariance of effects across experiments (divide by K).

    Parameters
    ----------
    effects : TrueEffects or array of shape (K, G)

    Returns
    -------
    CovEstimate with provenance "exact".
    """
    if not isinstance(effects, TrueEffects):
        effects = TrueEffects(effects)
    e = effects.effects
    if e.shape[0] < 2:
        raise DimensionError("need at least 2 experiments to form a covariance")
    centered = e - e.mean(axis=0)
    cov = centered.T @ centered / e.shape[0]
    return CovEstimate(matrix=cov, provenance="exact")


def ols_weights(cov: CovEstimate) -> ProxyWeights:
    """Regression weights of the primary effect on the proxy effects.

    Solves ss @ w = sy where ss is the proxy block and sy the cross block
    of ``cov``. Raises ConditioningError when the proxy block is singular
    at relative tolerance 1e-10.
    """
    ss = cov.ss
    sy = cov.sy
    evals = np.linalg.eigvalsh(ss)
    scale = float(np.max(np.abs(evals)))
    smallest = float(np.min(np.abs(evals)))
    if smallest <= _SINGULAR_RTOL * max(scale, 1e-300):
        raise ConditioningError(
            "proxy-effect covariance block is singular, regression weights are not identified",
            eigenvalue=smallest,
        )
    w = np.linalg.solve(ss, sy)
    return ProxyWeights(weights=w, estimand="ols")


def symmetric_inverse_sqrt(m: np.ndarray) -> np.ndarray:
    """Inverse square root of a symmetric positive definite matrix.

    Computed through the eigendecomposition, so the result is itself
    symmetric. Raises ConditioningError when the input is not positive
    definite at relative tolerance 1e-10.
    """
    m = np.asarray(m, dtype=float)
    evals, evecs = np.linalg.eigh((m + m.T) / 2.0)
    top = float(evals[-1])
    if top <= 0 or evals[0] <= _SINGULAR_RTOL * top:
        raise ConditioningError(
            "matrix is not positive definite, cannot form inverse square root",
            eigenvalue=float(evals[0]),
        )
    return (evecs / np.sqrt(evals)) @ evecs.T


def tls_weights(cov: CovEstimate, noise: NoiseModel) -> ProxyWeights:
    """Noise-whitened smallest-direction weights.

    Finds the generalized eigenvector (cov - kappa * noise) @ gamma = 0 at
    the smallest eigenvalue kappa and returns weights -gamma_S / gamma_Y,
    where gamma_Y is the primary-metric coordinate. Negative kappa is
    accepted and reported as found.

    Raises
    ------
    AmbiguousEigenvalueError
        When the two smallest eigenvalues coincide at relative tolerance
        1e-10, so the direction is not unique.
    DegenerateDirectionError
        When the direction has (relatively) no primary-metric component.
    ConditioningError
        When the whitening fails or the recovered pair does not satisfy
        the eigen equation to relative residual 1e-8.
    """
    if noise.num_metrics != cov.num_metrics:
        raise DimensionError(
            f"noise covariance is {noise.num_metrics}x{noise.num_metrics}, "
            f"effect covariance is {cov.num_metrics}x{cov.num_metrics}"
        )
    white = symmetric_inverse_sqrt(noise.omega)
    b = white @ cov.matrix @ white
    evals, evecs = np.linalg.eigh((b + b.T) / 2.0)

    radius = float(np.max(np.abs(evals)))
    gap = float(evals[1] - evals[0])
    if gap <= _SINGULAR_RTOL * max(radius, 1e-300):
        raise AmbiguousEigenvalueError(
            "smallest generalized eigenvalue is repeated, direction is not unique",
            gap=gap,
        )

    kappa = float(evals[0])
    gamma = white @ evecs[:, 0]
    norm = float(np.linalg.norm(gamma))

    residual = float(np.linalg.norm((cov.matrix - kappa * noise.omega) @ gamma)) / norm
    fro = float(np.linalg.norm(cov.matrix, "fro"))
    if residual > _RESIDUAL_RTOL * max(fro, 1e-300):
        raise ConditioningError(
            f"generalized eigenpair residual {residual:.3e} exceeds tolerance",
            eigenvalue=kappa,
        )

    gamma_y = float(gamma[0])
    if abs(gamma_y) < _SINGULAR_RTOL * norm:
        raise DegenerateDirectionError(
            "recovered direction has no primary-metric component, weights are undefined"
        )

    w = -gamma[1:] / gamma_y
    return ProxyWeights(
        weights=w,
        estimand="tls",
        kappa=kappa,
        residual_norm=residual,
        gamma_y=gamma_y,
    )
