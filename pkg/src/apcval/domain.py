"""Core value types shared by every other module.

All containers are frozen dataclasses: once constructed they are immutable
and safe to share between concurrent workers. Parameter containers enforce
their invariants at construction time; `DopRecord` stays permissive (labels
and sampling indicators are legal transient states) and is checked by
`validate_record` instead.
"""

from __future__ import annotations

from dataclasses import dataclass

SAFE = "safe"
UNSAFE = "unsafe"
UNLABELED = "unlabeled"

LABELS = (SAFE, UNSAFE, UNLABELED)


@dataclass(frozen=True, slots=True)
class DopRecord:
    """One door opening phase with its counts and workflow state.

    `m1`, `m2` and `m_sup` are the first, second and supervisor manual
    counts; `m_final` is the agreed ground truth and is absent while the
    record has not been comparison-counted. `k_auto` is the count reported
    by the system under validation, `alg_count`/`alg_confidence` come from
    an optional second algorithm. `sampled` is the random counting
    indicator on the safe partition (None = not yet drawn).
    """

    dop_id: str
    k_auto: int
    duration_s: float = 0.0
    m1: int | None = None
    m2: int | None = None
    m_sup: int | None = None
    m_final: int | None = None
    alg_count: int | None = None
    alg_confidence: float | None = None
    label: str = UNLABELED
    sampled: bool | None = None


def validate_record(record: DopRecord) -> list[str]:
    """Return human-readable invariant violations for `record`.

    Total: never raises, an empty list means the record is consistent.
    """
    violations: list[str] = []
    r = record
    if r.duration_s < 0:
        violations.append(f"{r.dop_id}: duration_s must be >= 0, got {r.duration_s}")
    for name in ("m1", "m2", "m_sup", "m_final", "k_auto", "alg_count"):
        value = getattr(r, name)
        if value is not None and value < 0:
            violations.append(f"{r.dop_id}: {name} must be >= 0, got {value}")
    if r.alg_confidence is not None and not 0.0 <= r.alg_confidence <= 1.0:
        violations.append(
            f"{r.dop_id}: alg_confidence must be in [0, 1], got {r.alg_confidence}"
        )
    if r.label not in LABELS:
        violations.append(f"{r.dop_id}: unknown label {r.label!r}")
    if r.m_final is not None and r.m1 is None:
        violations.append(f"{r.dop_id}: m_final present without a first manual count")
    if r.label == UNSAFE and r.m_final is None:
        violations.append(f"{r.dop_id}: unsafe record lacks ground truth")
    if r.label == SAFE and r.sampled is True and r.m_final is None:
        violations.append(f"{r.dop_id}: sampled safe record lacks ground truth")
    return violations


def ground_truth(m1: int | None, m2: int | None, m_sup: int | None) -> int | None:
    """Resolve the final manual count from two counters plus a supervisor.

    Two agreeing counters settle the value; on disagreement the supervisor
    count decides. Returns None when the count is still unresolved (this is
    an incomplete count, not an error).
    """
    if m1 is None or m2 is None:
        return None
    if m1 == m2:
        return m1
    return m_sup


@dataclass(frozen=True, slots=True)
class TestParams:
    """Equivalence-test parameters.

    alpha is the total user risk of the two-sided interval (the quantile
    used everywhere is z_{1-alpha/2}), beta the manufacturer risk, delta
    the equivalence margin, nu the planning relative standard deviation,
    nu_min the floor applied to empirical standard deviations, and buffer
    the sample-size safety factor.
    """

    alpha: float = 0.05
    beta: float = 0.05
    delta: float = 0.01
    nu: float = 0.20
    nu_min: float = 0.03
    buffer: float = 1.15

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must be in (0, 1), got {self.beta}")
        if self.delta <= 0.0:
            raise ValueError(f"delta must be > 0, got {self.delta}")
        if self.nu < 0.0:
            raise ValueError(f"nu must be >= 0, got {self.nu}")
        if self.nu_min < 0.0:
            raise ValueError(f"nu_min must be >= 0, got {self.nu_min}")
        if self.buffer < 1.0:
            raise ValueError(f"buffer must be >= 1, got {self.buffer}")


@dataclass(frozen=True, slots=True)
class PartitionParams:
    """Planning parameters of the safe/unsafe partition.

    p_s is the expected safe share, nu_s_ratio the ratio of the safe
    stratum's standard deviation to the overall one, q the counted quota
    of the safe partition.
    """

    p_s: float = 0.90
    nu_s_ratio: float = 0.35
    q: float = 0.175

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_s <= 1.0:
            raise ValueError(f"p_s must be in [0, 1], got {self.p_s}")
        if self.nu_s_ratio < 0.0:
            raise ValueError(f"nu_s_ratio must be >= 0, got {self.nu_s_ratio}")
        if not 0.0 < self.q <= 1.0:
            raise ValueError(f"q must be in (0, 1], got {self.q}")

    @property
    def p_u(self) -> float:
        return 1.0 - self.p_s


@dataclass(frozen=True, slots=True)
class CostParams:
    """Per-record cost components of a validation campaign.

    c_u: mean combined cost of an unsafe record (always fully counted).
    c_s0: basic cost of a safe record, incurred whether or not it is counted.
    c_sz: manual counting cost of a safe record, incurred only at quota q.
    """

    c_u: float
    c_s0: float
    c_sz: float

    def __post_init__(self) -> None:
        for name in ("c_u", "c_s0", "c_sz"):
            value = getattr(self, name)
            if value < 0.0:
                raise ValueError(f"{name} must be >= 0, got {value}")


@dataclass(frozen=True, slots=True)
class CostRates:
    """Raw rates that generate per-record counting costs.

    r_av is the ratio of manual review time to video duration, c_labor the
    hourly labor cost, r_s the surcharge factor for the second count and
    the supervisor.
    """

    r_av: float = 0.7
    c_labor: float = 20.0
    r_s: float = 1.2

    def __post_init__(self) -> None:
        if self.r_av <= 0.0:
            raise ValueError(f"r_av must be > 0, got {self.r_av}")
        if self.c_labor < 0.0:
            raise ValueError(f"c_labor must be >= 0, got {self.c_labor}")
        if self.r_s < 0.0:
            raise ValueError(f"r_s must be >= 0, got {self.r_s}")


@dataclass(frozen=True, slots=True)
class PartitionStats:
    """Aggregates of one evaluated campaign, split by partition.

    Stratum statistics are None when the stratum is empty. `nu_hat_s` and
    `nu_hat_u` are the raw empirical standard deviations (None when fewer
    than two counted records exist in a nonempty stratum); the nu_min floor
    is applied later, in the pooled variance.
    """

    n: int
    n_s: int
    n_u: int
    q_effective: float
    d_bar_s: float | None
    d_bar_u: float | None
    nu_hat_s: float | None
    nu_hat_u: float | None
    m_hat_q: float

    def __post_init__(self) -> None:
        if self.n != self.n_s + self.n_u:
            raise ValueError(f"n={self.n} != n_s+n_u={self.n_s + self.n_u}")
        if not 0.0 < self.q_effective <= 1.0:
            raise ValueError(f"q_effective must be in (0, 1], got {self.q_effective}")
        for name in ("nu_hat_s", "nu_hat_u"):
            value = getattr(self, name)
            if value is not None and value < 0.0:
                raise ValueError(f"{name} must be >= 0, got {value}")
        if self.n_s > 0 and self.d_bar_s is None:
            raise ValueError("nonempty safe stratum without d_bar_s")
        if self.n_u > 0 and self.d_bar_u is None:
            raise ValueError("nonempty unsafe stratum without d_bar_u")
