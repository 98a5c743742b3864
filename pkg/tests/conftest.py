"""Shared campaign builders for the test suite."""

from __future__ import annotations

import numpy as np

from apcval.domain import SAFE, UNSAFE, DopRecord


def make_record(i: int, m: int, k: int, label: str, sampled=None, duration: float = 30.0) -> DopRecord:
    return DopRecord(
        dop_id=f"d{i:05d}",
        duration_s=duration,
        m1=m,
        m2=m,
        m_final=m,
        k_auto=k,
        label=label,
        sampled=sampled,
    )


def fully_counted_campaign(
    rng: np.random.Generator,
    n: int,
    p_s: float = 0.7,
    error_rate: float = 0.3,
    mean_count: float = 3.0,
) -> list[DopRecord]:
    """Random labeled campaign, fully counted, every safe record sampled.

    Ensures at least one boarding passenger so the mean count stays
    positive.
    """
    records = []
    for i in range(n):
        m = int(rng.poisson(mean_count))
        if i == 0:
            m = max(m, 1)
        err = 0
        if rng.random() < error_rate:
            err = int(rng.integers(-2, 3))
        k = max(0, m + err)
        label = SAFE if rng.random() < p_s else UNSAFE
        records.append(make_record(i, m, k, label, sampled=True if label == SAFE else None))
    return records


def subsample_safe(
    records: list[DopRecord], rng: np.random.Generator, q: float
) -> list[DopRecord]:
    """Mark a random q-quota of the safe records as sampled (rest False)."""
    from dataclasses import replace

    from apcval.planner import counted_count

    safe_idx = [i for i, r in enumerate(records) if r.label == SAFE]
    m = counted_count(q, len(safe_idx)) if safe_idx else 0
    chosen = set(rng.choice(len(safe_idx), size=m, replace=False).tolist())
    out = list(records)
    for rank, i in enumerate(safe_idx):
        out[i] = replace(records[i], sampled=rank in chosen)
    return out
