"""Synthetic experiment panels and Monte Carlo estimator comparisons.

Three data-generating processes are supported, selected by
``StructuralScenario.kind``:

* ``no_direct_effects``: proxy effects are drawn from a configurable
  covariance and the primary effect is exactly their inner product with
  the structural coefficient beta.
* ``inside_direct_effects``: all effects are drawn jointly from a full
  covariance, then the implied direct component of the primary effect is
  projected to be exactly orthogonal to the realized proxy-effect columns
  (and to the constant), so the proxy-to-primary slope of the realized
  covariance equals beta while a direct term remains in the primary
  variance.
* ``npiv_nonlinear``: the primary outcome is a quadratic function of the
  proxies; used to study how far the linear slope estimand drifts from
  the strength-weighted average gradient as effect sizes grow.

Unit outcomes are experiment baseline + arm * effect + correlated noise,
with two equal arms per experiment. Per-replication randomness is derived
from (seed, replication_index), so results are reproducible and identical
under any parallel schedule; within a replication the draw order is fixed
(effects, then baselines, then unit noise).
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .aggregates import UnitData, aggregate_unit_data
from .estimands import effects_covariance, ols_weights, symmetric_inverse_sqrt, tls_weights
from .estimators import (
    expected_naive_covariance,
    jackknife_covariance,
    kclass_weights,
    limlk_weights,
    naive_covariance,
    noise_subtracted_covariance,
)
from .exceptions import NumericalError, ValidationError
from .types import CovEstimate, NoiseModel, PanelDims, TrueEffects

__all__ = [
    "SCENARIO_KINDS",
    "ESTIMATOR_NAMES",
    "StructuralScenario",
    "EstimatorSummary",
    "MonteCarloResult",
    "NpivGradientReport",
    "simulate_panel",
    "run_monte_carlo",
    "npiv_gradient_check",
    "reference_slopes",
    "structural_truth_covariance",
    "jackknife_bias_ladder",
    "scenario_preset",
    "preset_names",
]

SCENARIO_KINDS = ("no_direct_effects", "inside_direct_effects", "npiv_nonlinear")
ESTIMATOR_NAMES = ("naive", "jackknife", "limlk", "tc", "kclass")

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class StructuralScenario:
    """Full description of a synthetic panel generator.

    Parameters
    ----------
    kind : str
        One of ``no_direct_effects``, ``inside_direct_effects``,
        ``npiv_nonlinear``.
    dims : PanelDims
    beta : array of shape (G-1,), optional
        Structural coefficient. Required for the two linear kinds,
        disallowed for the nonlinear one.
    effect_cov : array
        Covariance the effects are drawn from. For
        ``inside_direct_effects`` this is the full G x G matrix; for the
        other kinds it is the (G-1) x (G-1) covariance of the proxy
        effects (for ``npiv_nonlinear`` it shapes the direction draw
        before rescaling).
    noise : NoiseModel
        Unit-level noise covariance, shared by all experiments and arms.
    replications : int
    seed : int
        Non-negative 64-bit seed.
    baseline_mean, baseline_sd : float
        Per-experiment baseline distribution (drawn once per panel).
    gradient, hessian : arrays, nonlinear kind only
        Coefficients of the quadratic structural function
        h(s) = gradient . s + s . hessian . s / 2.
    effect_scale : float, nonlinear kind only
        Upper bound on the proxy-effect norms after rescaling.
    name : str
        Preset label, echoed in reports.
    full_scale : bool
        Marks a scenario blown up to full reference scale; constructing
        one emits a runtime warning since Monte Carlo runs take hours.
    """

    kind: str
    dims: PanelDims
    beta: np.ndarray | None
    effect_cov: np.ndarray
    noise: NoiseModel
    replications: int = 1
    seed: int = 0
    baseline_mean: float = 0.0
    baseline_sd: float = 0.0
    gradient: np.ndarray | None = None
    hessian: np.ndarray | None = None
    effect_scale: float = 1.0
    name: str = ""
    full_scale: bool = False

    def __post_init__(self) -> None:
        if self.kind not in SCENARIO_KINDS:
            raise ValidationError(f"unknown scenario kind {self.kind!r}")
        g = self.dims.num_metrics
        if self.noise.num_metrics != g:
            raise ValidationError("noise covariance does not match the metric count")
        if self.replications < 1:
            raise ValidationError("replications must be at least 1")
        if not (0 <= self.seed <= _SEED_MASK):
            raise ValidationError("seed must be a non-negative 64-bit integer")
        if self.baseline_sd < 0:
            raise ValidationError("baseline_sd must be non-negative")

        cov = np.asarray(self.effect_cov, dtype=float)
        expected = g if self.kind == "inside_direct_effects" else g - 1
        if cov.shape != (expected, expected):
            raise ValidationError(
                f"effect_cov must be {expected}x{expected} for kind {self.kind!r}, got {cov.shape}"
            )
        cov = (cov + cov.T) / 2.0
        cov.setflags(write=False)
        object.__setattr__(self, "effect_cov", cov)

        if self.kind == "npiv_nonlinear":
            if self.gradient is None or self.hessian is None:
                raise ValidationError("the nonlinear kind needs gradient and hessian")
            if self.beta is not None:
                raise ValidationError("beta is not a parameter of the nonlinear model")
            grad = np.asarray(self.gradient, dtype=float)
            hess = np.asarray(self.hessian, dtype=float)
            if grad.shape != (g - 1,) or hess.shape != (g - 1, g - 1):
                raise ValidationError("gradient/hessian shapes do not match the proxy count")
            hess = (hess + hess.T) / 2.0
            if self.effect_scale <= 0:
                raise ValidationError("effect_scale must be positive")
            grad = grad.copy()
            grad.setflags(write=False)
            hess.setflags(write=False)
            object.__setattr__(self, "gradient", grad)
            object.__setattr__(self, "hessian", hess)
        else:
            if self.gradient is not None or self.hessian is not None:
                raise ValidationError("gradient/hessian only apply to the nonlinear kind")
            if self.beta is None:
                raise ValidationError(f"kind {self.kind!r} needs beta")
            b = np.asarray(self.beta, dtype=float).copy()
            if b.shape != (g - 1,):
                raise ValidationError(f"beta must have length {g - 1}, got shape {b.shape}")
            b.setflags(write=False)
            object.__setattr__(self, "beta", b)

        if self.full_scale:
            warnings.warn(
                "full reference scale requested; Monte Carlo runs at this size take hours",
                RuntimeWarning,
                stacklevel=2,
            )

    @property
    def metric_names(self) -> tuple[str, ...]:
        return ("Y",) + tuple(f"S{i}" for i in range(1, self.dims.num_metrics))


def _replication_rng(seed: int, replication_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & _SEED_MASK, replication_index]))


def _nudge_spd(m: np.ndarray) -> np.ndarray:
    # Cholesky needs strictly positive eigenvalues; accept merely PSD
    # inputs via a relative jitter far below every tolerance in use.
    scale = float(np.max(np.abs(m)))
    if scale == 0.0:
        return m + 1e-300 * np.eye(m.shape[0])
    return m + (1e-14 * scale) * np.eye(m.shape[0])


def _centered_bounded_directions(scenario, rng):
    k, g = scenario.dims.num_experiments, scenario.dims.num_metrics
    chol = np.linalg.cholesky(_nudge_spd(scenario.effect_cov))
    z = rng.standard_normal((k, g - 1)) @ chol.T
    z = z - z.mean(axis=0)
    top = float(np.max(np.linalg.norm(z, axis=1)))
    if top <= 0:
        raise ValidationError("degenerate proxy-effect draw; increase K or effect_cov")
    return z / top


def _draw_effects(scenario: StructuralScenario, rng: np.random.Generator) -> np.ndarray:
    k, g = scenario.dims.num_experiments, scenario.dims.num_metrics
    if scenario.kind == "no_direct_effects":
        chol = np.linalg.cholesky(_nudge_spd(scenario.effect_cov))
        tau_s = rng.standard_normal((k, g - 1)) @ chol.T
        return np.column_stack([tau_s @ scenario.beta, tau_s])
    if scenario.kind == "inside_direct_effects":
        chol = np.linalg.cholesky(_nudge_spd(scenario.effect_cov))
        tau = rng.standard_normal((k, g)) @ chol.T
        tau_s = tau[:, 1:]
        direct = tau[:, 0] - tau_s @ scenario.beta
        # exact orthogonality to the realized proxy-effect columns and to
        # the constant, so the covariance block identity holds per panel
        q, _ = np.linalg.qr(np.column_stack([tau_s, np.ones(k)]))
        direct = direct - q @ (q.T @ direct)
        return np.column_stack([tau_s @ scenario.beta + direct, tau_s])
    # nonlinear kind: primary effects get filled in once baselines exist
    return scenario.effect_scale * _centered_bounded_directions(scenario, rng)


def _npiv_primary_effects(scenario, tau_s, baselines_s):
    # exact effect of shifting the proxy mean by tau at baseline mu for
    # quadratic h: the noise-trace terms of the two arms cancel
    grad, hess = scenario.gradient, scenario.hessian
    lin = tau_s @ grad
    inter = np.einsum("kg,gh,kh->k", baselines_s, hess, tau_s)
    quad = 0.5 * np.einsum("kg,gh,kh->k", tau_s, hess, tau_s)
    return lin + inter + quad


def simulate_panel(
    scenario: StructuralScenario, replication_index: int = 0
) -> tuple[UnitData, TrueEffects]:
    """Generate one panel of unit-level data plus its ground-truth effects.

    The replication index selects an independent, reproducible random
    stream; the scenario seed plus the index fully determine the output.
    """
    if replication_index < 0:
        raise ValidationError("replication_index must be non-negative")
    rng = _replication_rng(scenario.seed, replication_index)
    dims = scenario.dims
    k, g, n = dims.num_experiments, dims.num_metrics, dims.units_per_experiment

    effects = _draw_effects(scenario, rng)
    baselines = scenario.baseline_mean + scenario.baseline_sd * rng.standard_normal((k, g))
    if scenario.kind == "npiv_nonlinear":
        tau_s = effects
        tau_y = _npiv_primary_effects(scenario, tau_s, baselines[:, 1:])
        effects = np.column_stack([tau_y, tau_s])

    ids = np.repeat(np.arange(k), n)
    arms = np.tile(np.r_[np.zeros(n // 2, dtype=np.int64), np.ones(n // 2, dtype=np.int64)], k)
    noise = rng.standard_normal((k * n, g)) @ np.linalg.cholesky(scenario.noise.omega).T

    if scenario.kind == "npiv_nonlinear":
        s_units = baselines[ids, 1:] + arms[:, None] * effects[ids, 1:] + noise[:, 1:]
        grad, hess = scenario.gradient, scenario.hessian
        y_units = s_units @ grad + 0.5 * np.einsum("ig,gh,ih->i", s_units, hess, s_units)
        y_units = y_units + baselines[ids, 0] + noise[:, 0]
        metrics = np.column_stack([y_units, s_units])
    else:
        metrics = baselines[ids] + arms[:, None] * effects[ids] + noise

    units = UnitData(ids, arms, metrics, metric_names=scenario.metric_names)
    return units, TrueEffects(effects)


@dataclass(frozen=True)
class EstimatorSummary:
    """Monte Carlo summary for one estimator."""

    name: str
    mean: np.ndarray
    mc_se: np.ndarray
    bias: np.ndarray | None
    indefinite_frequency: float
    failures: int
    replications_used: int


@dataclass(frozen=True)
class MonteCarloResult:
    """Replication-level weight draws plus per-estimator summaries."""

    scenario: StructuralScenario
    estimator_names: tuple[str, ...]
    draws: np.ndarray  # (R, n_estimators, G-1); NaN rows mark failures
    summaries: dict[str, EstimatorSummary] = field(default_factory=dict)


def _estimate_one(name, units, aggs, sigma, scenario):
    n = scenario.dims.units_per_experiment
    if name == "naive":
        return ols_weights(sigma).weights, sigma.is_indefinite
    if name == "jackknife":
        jk = jackknife_covariance(aggs)
        return ols_weights(jk).weights, jk.is_indefinite
    if name == "limlk":
        return limlk_weights(sigma, scenario.noise, n).weights, False
    if name == "tc":
        tc = noise_subtracted_covariance(sigma, scenario.noise, n)
        return ols_weights(tc).weights, tc.is_indefinite
    if name == "kclass":
        res = kclass_weights(units)
        return res.weights, bool(res.extra["implied_cov_indefinite"])
    raise ValidationError(f"unknown estimator {name!r}")


def run_monte_carlo(
    scenario: StructuralScenario,
    estimators: Sequence[str] = ("naive", "jackknife", "limlk", "tc"),
    workers: int = 1,
) -> MonteCarloResult:
    """Run the scenario's replications and summarize each estimator.

    A numerical failure inside an estimator marks that replication as
    failed for that estimator (NaN row in the draws, counted in the
    summary) without aborting the run. Results are bit-identical for a
    fixed seed no matter how many workers execute the replications. With
    one usable replication the MC standard error is reported as NaN.
    """
    names = tuple(estimators)
    for name in names:
        if name not in ESTIMATOR_NAMES:
            raise ValidationError(
                f"unknown estimator {name!r}, expected a subset of {ESTIMATOR_NAMES}"
            )
    if scenario.kind == "npiv_nonlinear":
        raise ValidationError("Monte Carlo weight comparisons apply to the linear kinds")
    if workers < 1:
        raise ValidationError("workers must be at least 1")

    r_total = scenario.replications
    g1 = scenario.dims.num_metrics - 1

    def one(rep_index: int):
        units, _ = simulate_panel(scenario, rep_index)
        aggs = aggregate_unit_data(units)
        sigma = naive_covariance(aggs)
        row = np.full((len(names), g1), np.nan)
        indef = np.zeros(len(names), dtype=bool)
        failed = np.zeros(len(names), dtype=bool)
        for j, name in enumerate(names):
            try:
                row[j], indef[j] = _estimate_one(name, units, aggs, sigma, scenario)
            except NumericalError:
                failed[j] = True
        return row, indef, failed

    if workers == 1:
        results = [one(r) for r in range(r_total)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(r_total)))

    draws = np.stack([r[0] for r in results])
    indefinite = np.stack([r[1] for r in results])
    failures = np.stack([r[2] for r in results])

    summaries = {}
    for j, name in enumerate(names):
        ok = ~failures[:, j]
        used = int(ok.sum())
        col = draws[ok, j, :]
        mean = col.mean(axis=0) if used else np.full(g1, np.nan)
        se = col.std(axis=0, ddof=1) / np.sqrt(used) if used >= 2 else np.full(g1, np.nan)
        bias = mean - scenario.beta if scenario.beta is not None else None
        summaries[name] = EstimatorSummary(
            name=name,
            mean=mean,
            mc_se=se,
            bias=bias,
            indefinite_frequency=float(indefinite[ok, j].mean()) if used else float("nan"),
            failures=int(failures[:, j].sum()),
            replications_used=used,
        )

    draws.setflags(write=False)
    return MonteCarloResult(
        scenario=scenario, estimator_names=names, draws=draws, summaries=summaries
    )


@dataclass(frozen=True)
class NpivGradientReport:
    """Slope-versus-weighted-gradient gaps across effect scales."""

    records: tuple[dict, ...]
    gap_ratios: tuple[float, ...]


def npiv_gradient_check(
    scenario: StructuralScenario, scales: Sequence[float] = (1.0, 0.5, 0.25)
) -> NpivGradientReport:
    """Compare the exact slope estimand with the weighted-gradient target.

    Works on exact realized effects (no unit noise): the regression
    weights of the primary effect on the proxy effects are set against
    the strength-weighted average gradient of the structural function at
    the control means,

        (sum_t tau tauᵀ)⁻¹ sum_t tau tauᵀ (gradient + hessian mu_t).

    Directions and baselines are drawn once and shared across scales, so
    the gap is exactly proportional to the scale for a quadratic function
    and zero for a linear one. ``gap_ratios`` holds consecutive-scale gap
    quotients (NaN when the reference gap is zero).
    """
    if scenario.kind != "npiv_nonlinear":
        raise ValidationError("gradient check applies to npiv_nonlinear scenarios")
    if len(scales) < 1 or any(s <= 0 for s in scales):
        raise ValidationError("scales must be a non-empty list of positive factors")
    rng = _replication_rng(scenario.seed, 0)
    k, g = scenario.dims.num_experiments, scenario.dims.num_metrics

    z = _centered_bounded_directions(scenario, rng)
    baselines_s = scenario.baseline_mean + scenario.baseline_sd * rng.standard_normal((k, g - 1))
    grad, hess = scenario.gradient, scenario.hessian
    mean_gradients = grad[None, :] + baselines_s @ hess

    records = []
    for s in scales:
        eps = scenario.effect_scale * float(s)
        tau_s = eps * z
        tau_y = _npiv_primary_effects(scenario, tau_s, baselines_s)
        theta = ols_weights(effects_covariance(np.column_stack([tau_y, tau_s]))).weights
        strength = tau_s.T @ tau_s
        loading = np.einsum("kg,kg->k", tau_s, mean_gradients)
        target = np.linalg.solve(strength, tau_s.T @ loading)
        records.append(
            {
                "scale": float(s),
                "epsilon": eps,
                "weights": theta,
                "target": target,
                "gap": float(np.linalg.norm(theta - target)),
            }
        )
    ratios = []
    for prev, cur in zip(records, records[1:]):
        ratios.append(cur["gap"] / prev["gap"] if prev["gap"] > 0 else float("nan"))
    return NpivGradientReport(records=tuple(records), gap_ratios=tuple(ratios))


def reference_slopes(truth: CovEstimate, noise: NoiseModel, n_values: Sequence[int]) -> dict:
    """Exact large-K slopes of the naive estimate versus their targets.

    For each n, reports the regression and whitened-smallest-direction
    weights of truth + (4/n) noise next to the same functionals of the
    truth. The whitened-direction weights agree with their target at
    every n (adding a noise multiple shifts eigenvalues, not directions),
    while the regression weights only approach theirs as n grows.
    """
    ols_target = ols_weights(truth).weights
    tls_target = tls_weights(truth, noise).weights
    white = symmetric_inverse_sqrt(noise.omega)

    def whitened_slope(matrix):
        m = white @ matrix @ white
        return np.linalg.solve(m[1:, 1:], m[1:, 0])

    by_n = []
    for n in n_values:
        sigma = expected_naive_covariance(truth, noise, int(n))
        by_n.append(
            {
                "n": int(n),
                "ols_plim": ols_weights(sigma).weights,
                "tls_plim": tls_weights(sigma, noise).weights,
                "whitened_ols_plim": whitened_slope(sigma.matrix),
            }
        )
    return {
        "ols_target": ols_target,
        "tls_target": tls_target,
        "whitened_ols_target": whitened_slope(truth.matrix),
        "by_n": tuple(by_n),
    }


def structural_truth_covariance(scenario: StructuralScenario) -> CovEstimate:
    """Effect covariance implied by the scenario's drawing distribution.

    For the jointly-drawn kind this is the scenario's own matrix; for the
    fully mediated kind it is assembled from the proxy covariance and
    beta. Realized panels differ from it by sampling variation (and, for
    the jointly-drawn kind, by the exact-orthogonality projection).
    """
    if scenario.kind == "inside_direct_effects":
        return CovEstimate(scenario.effect_cov, provenance="exact")
    if scenario.kind == "no_direct_effects":
        c = scenario.effect_cov
        cb = c @ scenario.beta
        top = float(scenario.beta @ cb)
        matrix = np.block([[np.array([[top]]), cb[None, :]], [cb[:, None], c]])
        return CovEstimate(matrix, provenance="exact")
    raise ValidationError("the nonlinear kind has no closed-form effect covariance")


def jackknife_bias_ladder(
    scenario: StructuralScenario,
    total_units: Sequence[int],
    replications: Sequence[int],
    workers: int = 1,
) -> tuple[dict, ...]:
    """Measure the leave-one-out estimator's bias against total sample size.

    For each ladder point the scenario is re-dimensioned so that K times n
    equals the requested total, then the error of the estimate against
    the panel's realized effect covariance is averaged over replications.
    Differencing against the realized truth isolates the finite-sample
    bias, which shrinks like noise / total units. Each record carries the
    Frobenius norms of the measured bias, of its MC standard error, and
    of the predicted bias (4/total) * noise.
    """
    if len(total_units) != len(replications):
        raise ValidationError("total_units and replications must align")
    k = scenario.dims.num_experiments
    g = scenario.dims.num_metrics
    records = []
    for idx, (total, reps) in enumerate(zip(total_units, replications)):
        if total % k != 0:
            raise ValidationError(f"total units {total} not divisible by K={k}")
        point = replace(
            scenario,
            dims=PanelDims(k, g, total // k),
            replications=int(reps),
            seed=(scenario.seed + 1_000_003 * (idx + 1)) & _SEED_MASK,
        )

        def one(rep_index: int):
            units, truth = simulate_panel(point, rep_index)
            jk = jackknife_covariance(aggregate_unit_data(units))
            return jk.matrix - effects_covariance(truth).matrix

        if workers == 1:
            errs = [one(r) for r in range(point.replications)]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                errs = list(pool.map(one, range(point.replications)))
        stacked = np.stack(errs)
        mean_err = stacked.mean(axis=0)
        entry_se = stacked.std(axis=0, ddof=1) / np.sqrt(len(errs))
        records.append(
            {
                "total_units": int(total),
                "replications": int(reps),
                "bias_frobenius": float(np.linalg.norm(mean_err, "fro")),
                "se_frobenius": float(np.linalg.norm(entry_se, "fro")),
                "predicted_frobenius": float(
                    (4.0 / total) * np.linalg.norm(scenario.noise.omega, "fro")
                ),
                "mean_error": mean_err,
            }
        )
    return tuple(records)


def _omega_three_metric() -> np.ndarray:
    v = np.array([np.sqrt(0.01), np.sqrt(10.0), 5.0])
    mask = np.array([[1.0, 0.8, 0.0], [0.8, 1.0, -0.1], [0.0, -0.1, 1.0]])
    return np.outer(v, v) * mask


_PRESET_BUILDERS = {}


def _preset(name):
    def deco(fn):
        _PRESET_BUILDERS[name] = fn
        return fn

    return deco


@_preset("appendix-figure-setup")
def _figure_setup(full_scale: bool) -> StructuralScenario:
    dims = PanelDims(1000 if full_scale else 500, 2, 100)
    return StructuralScenario(
        kind="inside_direct_effects",
        dims=dims,
        beta=np.array([-0.25]),
        effect_cov=1e-3 * np.array([[1.0, -0.25], [-0.25, 1.0]]),
        noise=NoiseModel(np.array([[1.0, 0.4], [0.4, 1.0]])),
        replications=5000 if full_scale else 500,
        seed=1729,
        name="appendix-figure-setup",
        full_scale=full_scale,
    )


@_preset("appendix-no-direct")
def _no_direct(full_scale: bool) -> StructuralScenario:
    dims = PanelDims(1000 if full_scale else 200, 3, 10000 if full_scale else 5000)
    return StructuralScenario(
        kind="no_direct_effects",
        dims=dims,
        beta=np.array([-0.4, 0.04]),
        effect_cov=np.eye(2),
        noise=NoiseModel(_omega_three_metric()),
        replications=5000 if full_scale else 200,
        seed=1729,
        name="appendix-no-direct",
        full_scale=full_scale,
    )


@_preset("appendix-direct")
def _direct(full_scale: bool) -> StructuralScenario:
    dims = PanelDims(1000 if full_scale else 200, 3, 10000 if full_scale else 5000)
    return StructuralScenario(
        kind="inside_direct_effects",
        dims=dims,
        beta=np.array([-0.4, 0.04]),
        effect_cov=1e-3 * np.array([[1.0, -0.4, 0.04], [-0.4, 1.0, 0.0], [0.04, 0.0, 1.0]]),
        noise=NoiseModel(_omega_three_metric()),
        replications=5000 if full_scale else 200,
        seed=1729,
        name="appendix-direct",
        full_scale=full_scale,
    )


def preset_names() -> tuple[str, ...]:
    return tuple(sorted(_PRESET_BUILDERS))


def scenario_preset(name: str, full_scale: bool = False) -> StructuralScenario:
    """Load a named reference scenario at desk scale (or full scale)."""
    try:
        builder = _PRESET_BUILDERS[name]
    except KeyError:
        raise ValidationError(
            f"unknown scenario preset {name!r}; available: {', '.join(preset_names())}"
        ) from None
    return builder(full_scale)
