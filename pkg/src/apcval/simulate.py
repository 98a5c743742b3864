"""Monte Carlo and analytic studies of test success and user risk.

Trials run the configured test end-to-end on synthetic relative
differences: stratum membership is drawn per record, the counted subset of
the safe partition comes from the real sampler, and the verdict uses the
same estimator operations as a live evaluation. Per-trial seeds are
derived from (seed, grid point, trial index), so trials are reproducible
in any execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classify import _sample_mask
from .domain import PartitionParams, PartitionStats, TestParams
from .estimator import (
    PASS,
    confidence_interval,
    equivalence_verdict,
    pooled_variance,
    stratified_mean,
)
from .normal import norm_cdf, norm_ppf

TEST_CLASSIC = "classic"
TEST_PARTITIONED = "partitioned"


@dataclass(frozen=True, slots=True)
class NormalErrors:
    """Per-stratum normal error model for relative differences."""

    mu_s: float = 0.0
    nu_s: float = 0.15
    mu_u: float = 0.0
    nu_u: float = 0.15

    def __post_init__(self) -> None:
        if self.nu_s < 0.0 or self.nu_u < 0.0:
            raise ValueError("standard deviations must be >= 0")

    def overall_mean(self, p_s: float) -> float:
        return p_s * self.mu_s + (1.0 - p_s) * self.mu_u


@dataclass(frozen=True, slots=True)
class ResamplingErrors:
    """Per-stratum with-replacement resampling from empirical pools."""

    pool_s: tuple[float, ...] = ()
    pool_u: tuple[float, ...] = ()

    def overall_mean(self, p_s: float) -> float:
        mean_s = float(np.mean(self.pool_s)) if self.pool_s else 0.0
        mean_u = float(np.mean(self.pool_u)) if self.pool_u else 0.0
        return p_s * mean_s + (1.0 - p_s) * mean_u


@dataclass(frozen=True, slots=True)
class SimConfig:
    """One simulation study: grid, error model, test and reproducibility."""

    error_model: NormalErrors | ResamplingErrors
    params: TestParams
    partition: PartitionParams
    n_values: tuple[int, ...]
    bias_sweep: tuple[float, ...] | None = None
    trials: int = 10_000
    test: str = TEST_CLASSIC
    seed: int = 0

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.n_values or any(n < 2 for n in self.n_values):
            raise ValueError("every simulated sample size must be >= 2")
        if self.test not in (TEST_CLASSIC, TEST_PARTITIONED):
            raise ValueError(f"unknown test {self.test!r}")
        model = self.error_model
        if isinstance(model, ResamplingErrors):
            if self.partition.p_s > 0.0 and not model.pool_s:
                raise ValueError("resampling model needs a nonempty safe pool")
            if self.partition.p_s < 1.0 and not model.pool_u:
                raise ValueError("resampling model needs a nonempty unsafe pool")


@dataclass(frozen=True, slots=True)
class CurvePoint:
    grid_value: float
    pass_rate: float
    mc_se: float
    analytic: float | None


@dataclass(frozen=True, slots=True)
class SuccessCurve:
    """Pass probability along one grid variable, with MC standard errors."""

    grid_var: str
    points: tuple[CurvePoint, ...]
    test: str
    trials: int
    seed: int
    fixed: tuple[tuple[str, float], ...] = ()


@dataclass(frozen=True, slots=True)
class AuditPoint:
    n: int
    pass_rate: float
    mc_se: float
    worst_mu: float


def planning_normal_model(nu: float, partition: PartitionParams) -> NormalErrors:
    """Zero-bias normal model whose strata reproduce the planning deviations.

    The safe deviation is nu_s_ratio * nu; the unsafe one absorbs the rest
    so the composite deviation equals nu.
    """
    nu_s = partition.nu_s_ratio * nu
    p_u = partition.p_u
    if p_u > 0.0:
        surplus = nu**2 - partition.p_s * nu_s**2
        if surplus < 0.0:
            raise ValueError("nu_s_ratio too large: composite variance exceeded")
        nu_u = math.sqrt(surplus / p_u)
    else:
        nu_u = nu
    return NormalErrors(mu_s=0.0, nu_s=nu_s, mu_u=0.0, nu_u=nu_u)


def analytic_success(mu: float, nu: float, n: int, alpha: float, delta: float) -> float:
    """Pass probability of the classic test under a normal error model.

    The empirical standard deviation is held at its true value nu, so this
    is the idealized reference curve; a simulated test estimates it and
    deviates slightly at small n. Zero whenever the interval halfwidth
    exceeds the margin (delta * sqrt(n) / nu < z).
    """
    if nu <= 0.0:
        raise ValueError("nu must be > 0")
    if n < 1:
        raise ValueError("n must be >= 1")
    z = norm_ppf(1.0 - alpha / 2.0)
    scale = math.sqrt(n) / nu
    value = norm_cdf((delta - mu) * scale - z) + norm_cdf((delta + mu) * scale - z) - 1.0
    return max(0.0, value)


def _mc_se(p: float, trials: int) -> float:
    return math.sqrt(p * (1.0 - p) / trials)


def _trial_rng(seed: int, point_index: int, trial: int) -> np.random.Generator:
    """Generator for one trial, splittably derived from (seed, point, trial).

    Trials can run in any order or in parallel and still reproduce.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(point_index, trial))
    return np.random.default_rng(ss)


def _draw_strata(
    rng: np.random.Generator,
    n: int,
    p_s: float,
    model: NormalErrors | ResamplingErrors,
    shift: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw one trial's safe and unsafe relative differences.

    The safe count is one binomial draw (the sum of the per-record
    membership indicators); values are iid within a stratum, so only the
    counts matter for everything downstream.
    """
    if p_s >= 1.0:
        n_s = n
    elif p_s <= 0.0:
        n_s = 0
    else:
        n_s = int(rng.binomial(n, p_s))
    n_u = n - n_s
    if isinstance(model, NormalErrors):
        d_s = rng.normal(model.mu_s + shift, model.nu_s, n_s)
        d_u = rng.normal(model.mu_u + shift, model.nu_u, n_u)
    else:
        pool_s = np.asarray(model.pool_s, dtype=float)
        pool_u = np.asarray(model.pool_u, dtype=float)
        d_s = (rng.choice(pool_s, n_s, replace=True) + shift) if n_s else np.empty(0)
        d_u = (rng.choice(pool_u, n_u, replace=True) + shift) if n_u else np.empty(0)
    return d_s, d_u


def _classic_pass(d: np.ndarray, params: TestParams) -> bool:
    d_bar = float(d.mean())
    sigma = float(d.std(ddof=1)) if d.size >= 2 else None
    nu_hat = params.nu_min if (sigma is None or sigma < params.nu_min) else sigma
    ci = confidence_interval(d_bar, nu_hat, d.size, params.alpha)
    return equivalence_verdict(ci, params.delta) == PASS


def _partitioned_stats(
    d_s: np.ndarray, d_u: np.ndarray, q0: float, rng: np.random.Generator
) -> PartitionStats:
    n_s = d_s.size
    n_u = d_u.size
    if n_s:
        sampled = d_s[_sample_mask(n_s, q0, rng)]
        q_eff = sampled.size / n_s
        d_bar_s = float(sampled.mean())
        nu_hat_s = float(sampled.std(ddof=1)) if sampled.size >= 2 else None
    else:
        q_eff = 1.0
        d_bar_s = None
        nu_hat_s = None
    d_bar_u = float(d_u.mean()) if n_u else None
    nu_hat_u = float(d_u.std(ddof=1)) if n_u >= 2 else None
    return PartitionStats(
        n=n_s + n_u,
        n_s=n_s,
        n_u=n_u,
        q_effective=q_eff,
        d_bar_s=d_bar_s,
        d_bar_u=d_bar_u,
        nu_hat_s=nu_hat_s,
        nu_hat_u=nu_hat_u,
        m_hat_q=float("nan"),
    )


def _partitioned_pass(stats: PartitionStats, params: TestParams) -> bool:
    d_hat = stratified_mean(stats)
    pooled = pooled_variance(stats, params.nu_min)
    ci = confidence_interval(d_hat, math.sqrt(pooled.value), stats.n, params.alpha)
    return equivalence_verdict(ci, params.delta) == PASS


def _point_pass_rate(
    config: SimConfig, point_index: int, n: int, shift: float
) -> float:
    passes = 0
    p_s = config.partition.p_s
    for trial in range(config.trials):
        rng = _trial_rng(config.seed, point_index, trial)
        d_s, d_u = _draw_strata(rng, n, p_s, config.error_model, shift)
        if config.test == TEST_CLASSIC:
            passes += _classic_pass(np.concatenate([d_s, d_u]), config.params)
        else:
            stats = _partitioned_stats(d_s, d_u, config.partition.q, rng)
            passes += _partitioned_pass(stats, config.params)
    return passes / config.trials


def _grid(config: SimConfig) -> tuple[tuple[float, ...], list[tuple[int, int, float]]]:
    base_mean = config.error_model.overall_mean(config.partition.p_s)
    sweep = config.bias_sweep if config.bias_sweep is not None else (base_mean,)
    points = []
    index = 0
    for n in config.n_values:
        for mu in sweep:
            points.append((index, n, mu))
            index += 1
    return sweep, points


def _analytic_for(config: SimConfig, n: int, mu: float) -> float | None:
    if config.test != TEST_CLASSIC or not isinstance(config.error_model, NormalErrors):
        return None
    model = config.error_model
    p_s = config.partition.p_s
    p_u = 1.0 - p_s
    nu2 = (
        p_s * model.nu_s**2
        + p_u * model.nu_u**2
        + p_s * p_u * (model.mu_s - model.mu_u) ** 2
    )
    if nu2 <= 0.0:
        return None
    return analytic_success(mu, math.sqrt(nu2), n, config.params.alpha, config.params.delta)


def run_simulation(config: SimConfig) -> list[SuccessCurve]:
    """Estimate pass probability over the configured (n, bias) grid.

    Returns one curve per grid slice: over n when the bias sweep is a
    single point, otherwise one curve over the bias sweep per sample size.
    Deterministic given the config, including its seed.
    """
    sweep, points = _grid(config)
    base_mean = config.error_model.overall_mean(config.partition.p_s)
    results: dict[tuple[int, float], CurvePoint] = {}
    for index, n, mu in points:
        shift = mu - base_mean
        rate = _point_pass_rate(config, index, n, shift)
        results[(n, mu)] = CurvePoint(
            grid_value=float(mu),
            pass_rate=rate,
            mc_se=_mc_se(rate, config.trials),
            analytic=_analytic_for(config, n, mu),
        )

    context = (
        ("alpha", config.params.alpha),
        ("delta", config.params.delta),
        ("nu_min", config.params.nu_min),
        ("p_s", config.partition.p_s),
        ("q", config.partition.q),
    )
    curves: list[SuccessCurve] = []
    if len(sweep) == 1:
        mu = sweep[0]
        pts = tuple(
            CurvePoint(float(n), results[(n, mu)].pass_rate, results[(n, mu)].mc_se,
                       results[(n, mu)].analytic)
            for n in config.n_values
        )
        curves.append(
            SuccessCurve("n", pts, config.test, config.trials, config.seed,
                         fixed=(("mu", float(mu)),) + context)
        )
    else:
        for n in config.n_values:
            pts = tuple(results[(n, mu)] for mu in sweep)
            curves.append(
                SuccessCurve("mu", pts, config.test, config.trials, config.seed,
                             fixed=(("n", float(n)),) + context)
            )
    return curves


def user_risk_audit(config: SimConfig) -> tuple[AuditPoint, ...]:
    """Worst-case pass probability per sample size over a null-region sweep.

    The bias sweep must stay in the null region (|mu| >= delta): the
    returned rates are the realized user risk, which the test promises to
    keep at or below alpha/2.
    """
    if config.bias_sweep is None:
        raise ValueError("user risk audit needs an explicit bias sweep")
    off = [mu for mu in config.bias_sweep if abs(mu) < config.params.delta]
    if off:
        raise ValueError(f"bias sweep values inside the equivalence margin: {off}")
    curves = run_simulation(config)
    audit: list[AuditPoint] = []
    if len(config.bias_sweep) == 1:
        (curve,) = curves
        for point in curve.points:
            audit.append(
                AuditPoint(int(point.grid_value), point.pass_rate, point.mc_se,
                           config.bias_sweep[0])
            )
    else:
        for n, curve in zip(config.n_values, curves):
            worst = max(curve.points, key=lambda p: p.pass_rate)
            audit.append(AuditPoint(n, worst.pass_rate, worst.mc_se, worst.grid_value))
    return tuple(audit)


def bias_estimates(
    model: NormalErrors | ResamplingErrors,
    partition: PartitionParams,
    n: int,
    trials: int,
    seed: int = 0,
    shift: float = 0.0,
) -> np.ndarray:
    """Per-trial partitioned bias estimates, for moment studies.

    Runs the same trial machinery as `run_simulation` but collects the
    point estimate instead of the verdict. The per-stratum standard
    deviations are skipped: the estimate only needs counts and means.
    """
    q0 = partition.q
    p_s = partition.p_s
    out = np.empty(trials)
    for trial in range(trials):
        rng = _trial_rng(seed, 0, trial)
        d_s, d_u = _draw_strata(rng, n, p_s, model, shift)
        n_s = d_s.size
        n_tot = n_s + d_u.size
        total = 0.0
        if n_s:
            sampled = d_s[_sample_mask(n_s, q0, rng)]
            total += (n_s / n_tot) * float(sampled.mean())
        if d_u.size:
            total += (d_u.size / n_tot) * float(d_u.mean())
        out[trial] = total
    return out
