"""Point estimates, pooled variance, confidence interval and verdict.

Implements both evaluation pipelines: the classic one, where every record
is comparison-counted, and the partitioned one, where the unsafe partition
is counted in full and the safe partition only at a quota. All operations
are pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .domain import SAFE, UNLABELED, UNSAFE, DopRecord, PartitionStats, TestParams
from .normal import norm_ppf

PASS = "pass"
FAIL = "fail"


@dataclass(frozen=True, slots=True)
class EvaluationReport:
    """Outcome of one equivalence test run.

    `nu_hat` is the pooled relative standard deviation actually used in the
    interval (floors applied); the raw stratum values sit in `stats`. The
    clamped flags record whether nu_min replaced an empirical standard
    deviation in the corresponding stratum (for the classic pipeline the
    whole campaign is carried in the unsafe slot).
    """

    d_hat: float
    nu_hat: float
    n: int
    ci_low: float
    ci_high: float
    delta: float
    verdict: str
    stats: PartitionStats
    clamped_s: bool
    clamped_u: bool
    q_planned: float | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.ci_low <= self.d_hat <= self.ci_high:
            raise ValueError("confidence interval does not contain the point estimate")
        expected = equivalence_verdict((self.ci_low, self.ci_high), self.delta)
        if self.verdict != expected:
            raise ValueError(f"verdict {self.verdict!r} inconsistent with interval")


class PooledVariance(NamedTuple):
    value: float
    clamped_s: bool
    clamped_u: bool


def _fmean(values: list[float]) -> float:
    return math.fsum(values) / len(values)


def _fstd(values: list[float], mean: float) -> float:
    """Empirical standard deviation with the n-1 denominator."""
    return math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (len(values) - 1))


def _split(records: list[DopRecord]) -> tuple[list[DopRecord], list[DopRecord], list[DopRecord]]:
    """Split into (unsafe, sampled safe, all safe); rejects unlabeled input."""
    unlabeled = [r.dop_id for r in records if r.label == UNLABELED]
    if unlabeled:
        raise ValueError(f"records are unlabeled: {', '.join(unlabeled)}")
    safe = [r for r in records if r.label == SAFE]
    unsafe = [r for r in records if r.label == UNSAFE]
    undecided = [r.dop_id for r in safe if r.sampled is None]
    if undecided:
        raise ValueError(
            f"safe records without sampling indicator: {', '.join(undecided)}"
        )
    sampled = [r for r in safe if r.sampled]
    return unsafe, sampled, safe


def mean_count_estimate(records: list[DopRecord], q_effective: float) -> float:
    """Mean manual count reconstructed from a partially counted campaign.

    Unsafe records enter with weight 1, counted safe records with weight
    1/q_effective, so the estimate stays unbiased for the full-campaign
    mean although only the quota was counted. `q_effective` must equal
    (number of sampled safe records) / (number of safe records).
    """
    if not records:
        raise ValueError("no records to evaluate")
    if q_effective <= 0.0:
        raise ValueError(f"q_effective must be > 0, got {q_effective}")
    unsafe, sampled, _ = _split(records)
    missing = [r.dop_id for r in unsafe + sampled if r.m_final is None]
    if missing:
        raise ValueError(f"records lack ground truth: {', '.join(missing)}")
    total = math.fsum(r.m_final for r in unsafe) + (
        math.fsum(r.m_final for r in sampled) / q_effective
    )
    return total / len(records)


def relative_differences(
    records: list[DopRecord], m_hat: float
) -> list[tuple[DopRecord, float]]:
    """Per-record relative counting error for every evaluable record.

    Evaluable means unsafe or sampled safe; uncounted safe records yield
    no value. `m_hat` must be positive (a campaign without boarding
    passengers has no meaningful relative error).
    """
    if m_hat <= 0.0:
        raise ValueError(f"mean count estimate must be > 0, got {m_hat}")
    unsafe, sampled, _ = _split(records)
    missing = [r.dop_id for r in unsafe + sampled if r.m_final is None]
    if missing:
        raise ValueError(f"records lack ground truth: {', '.join(missing)}")
    return [(r, (r.k_auto - r.m_final) / m_hat) for r in unsafe + sampled]


def stratified_mean(stats: PartitionStats) -> float:
    """Bias estimate recombining the two partitions by their shares."""
    if stats.n == 0:
        raise ValueError("no records to evaluate")
    total = 0.0
    if stats.n_s > 0:
        total += (stats.n_s / stats.n) * stats.d_bar_s
    if stats.n_u > 0:
        total += (stats.n_u / stats.n) * stats.d_bar_u
    return total


def pooled_variance(stats: PartitionStats, nu_min: float) -> PooledVariance:
    """Pooled squared relative standard deviation of the bias estimate.

    Three contributions: the safe stratum inflated by 1/q_effective, the
    unsafe stratum, and the between-strata spread that accounts for the
    randomness of the classification itself. Stratum standard deviations
    below nu_min (or undefined, with fewer than two counted records) are
    replaced by nu_min; the returned flags record where that happened.
    """
    value = 0.0
    clamped_s = False
    clamped_u = False
    if stats.n_s > 0:
        sigma = stats.nu_hat_s
        clamped_s = sigma is None or sigma < nu_min
        eff = nu_min if clamped_s else sigma
        value += (stats.n_s / stats.n) * eff**2 / stats.q_effective
    if stats.n_u > 0:
        sigma = stats.nu_hat_u
        clamped_u = sigma is None or sigma < nu_min
        eff = nu_min if clamped_u else sigma
        value += (stats.n_u / stats.n) * eff**2
    if stats.n_s > 0 and stats.n_u > 0:
        value += (stats.n_s * stats.n_u / stats.n**2) * (
            stats.d_bar_s - stats.d_bar_u
        ) ** 2
    return PooledVariance(value, clamped_s, clamped_u)


def confidence_interval(
    d_hat: float, nu_hat: float, n: int, alpha: float
) -> tuple[float, float]:
    """Two-sided confidence interval for the bias estimate."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if nu_hat < 0.0:
        raise ValueError(f"nu_hat must be >= 0, got {nu_hat}")
    half = norm_ppf(1.0 - alpha / 2.0) * nu_hat / math.sqrt(n)
    return d_hat - half, d_hat + half


def equivalence_verdict(ci: tuple[float, float], delta: float) -> str:
    """Pass iff the interval lies inside [-delta, +delta], bounds inclusive."""
    low, high = ci
    return PASS if -delta <= low and high <= delta else FAIL


def evaluate_classic(records: list[DopRecord], params: TestParams) -> EvaluationReport:
    """Run the classic equivalence test on a fully counted campaign.

    Labels and sampling indicators are ignored; every record must carry
    ground truth. In the report's stats the whole campaign occupies the
    unsafe slot (fully counted, quota 1).
    """
    if not records:
        raise ValueError("no records to evaluate")
    missing = [r.dop_id for r in records if r.m_final is None]
    if missing:
        raise ValueError(f"records lack ground truth: {', '.join(missing)}")
    n = len(records)
    m_bar = _fmean([float(r.m_final) for r in records])
    if m_bar <= 0.0:
        raise ValueError("campaign has no boarding passengers (mean count is 0)")
    diffs = [(r.k_auto - r.m_final) / m_bar for r in records]
    d_bar = _fmean(diffs)

    warnings: list[str] = []
    if n >= 2:
        sigma = _fstd(diffs, d_bar)
    else:
        sigma = None
        warnings.append(
            "single-record campaign: standard deviation undefined, floored at nu_min"
        )
    clamped = sigma is None or sigma < params.nu_min
    nu_hat = params.nu_min if clamped else sigma

    ci = confidence_interval(d_bar, nu_hat, n, params.alpha)
    stats = PartitionStats(
        n=n,
        n_s=0,
        n_u=n,
        q_effective=1.0,
        d_bar_s=None,
        d_bar_u=d_bar,
        nu_hat_s=None,
        nu_hat_u=sigma,
        m_hat_q=m_bar,
    )
    return EvaluationReport(
        d_hat=d_bar,
        nu_hat=nu_hat,
        n=n,
        ci_low=ci[0],
        ci_high=ci[1],
        delta=params.delta,
        verdict=equivalence_verdict(ci, params.delta),
        stats=stats,
        clamped_s=False,
        clamped_u=clamped,
        warnings=tuple(warnings),
    )


def evaluate_partitioned(
    records: list[DopRecord],
    params: TestParams,
    q_planned: float | None = None,
) -> EvaluationReport:
    """Run the partitioned equivalence test on a labeled campaign.

    Preconditions: every record is labeled; every unsafe and every sampled
    safe record carries ground truth; every safe record has a definite
    sampling indicator; a nonempty safe partition has at least one sampled
    record. The realized quota is derived from the data; `q_planned` is
    carried into the report for audit only.
    """
    if not records:
        raise ValueError("no records to evaluate")
    unsafe, sampled, safe = _split(records)
    if safe and not sampled:
        raise ValueError("safe partition is nonempty but no record was sampled")
    n = len(records)
    n_s = len(safe)
    n_u = len(unsafe)
    q_effective = len(sampled) / n_s if n_s else 1.0

    m_hat = mean_count_estimate(records, q_effective)
    diffs = relative_differences(records, m_hat)
    d_s = [d for r, d in diffs if r.label == SAFE]
    d_u = [d for r, d in diffs if r.label == UNSAFE]

    warnings: list[str] = []
    d_bar_s = sigma_s = None
    if n_s:
        d_bar_s = _fmean(d_s)
        if len(d_s) >= 2:
            sigma_s = _fstd(d_s, d_bar_s)
        else:
            warnings.append(
                "safe stratum has fewer than 2 counted records: "
                "standard deviation floored at nu_min"
            )
    d_bar_u = sigma_u = None
    if n_u:
        d_bar_u = _fmean(d_u)
        if len(d_u) >= 2:
            sigma_u = _fstd(d_u, d_bar_u)
        else:
            warnings.append(
                "unsafe stratum has fewer than 2 counted records: "
                "standard deviation floored at nu_min"
            )

    stats = PartitionStats(
        n=n,
        n_s=n_s,
        n_u=n_u,
        q_effective=q_effective,
        d_bar_s=d_bar_s,
        d_bar_u=d_bar_u,
        nu_hat_s=sigma_s,
        nu_hat_u=sigma_u,
        m_hat_q=m_hat,
    )
    d_hat = stratified_mean(stats)
    pooled = pooled_variance(stats, params.nu_min)
    nu_hat = math.sqrt(pooled.value)
    ci = confidence_interval(d_hat, nu_hat, n, params.alpha)
    return EvaluationReport(
        d_hat=d_hat,
        nu_hat=nu_hat,
        n=n,
        ci_low=ci[0],
        ci_high=ci[1],
        delta=params.delta,
        verdict=equivalence_verdict(ci, params.delta),
        stats=stats,
        clamped_s=pooled.clamped_s,
        clamped_u=pooled.clamped_u,
        q_planned=q_planned,
        warnings=tuple(warnings),
    )
