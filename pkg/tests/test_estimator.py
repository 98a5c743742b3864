import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fully_counted_campaign, make_record
from apcval.domain import SAFE, UNSAFE, DopRecord, PartitionStats, TestParams
from apcval.estimator import (
    FAIL,
    PASS,
    confidence_interval,
    equivalence_verdict,
    evaluate_classic,
    evaluate_partitioned,
    mean_count_estimate,
    pooled_variance,
    relative_differences,
    stratified_mean,
)

Z975 = 1.959963984540054


def three_record_campaign() -> list[DopRecord]:
    # safe M=[2,4] with sampled=[True,False], unsafe M=[3], errors all zero
    return [
        make_record(0, 2, 2, SAFE, sampled=True),
        make_record(1, 4, 4, SAFE, sampled=False),
        make_record(2, 3, 3, UNSAFE),
    ]


class TestMeanCountEstimate:
    def test_hand_example(self):
        # (3 + 2/0.5) / 3 = 7/3
        assert mean_count_estimate(three_record_campaign(), 0.5) == pytest.approx(7 / 3, abs=1e-15)

    def test_all_unsafe_reduces_to_plain_mean(self):
        records = [make_record(i, m, m, UNSAFE) for i, m in enumerate([1, 2, 3])]
        assert mean_count_estimate(records, 1.0) == pytest.approx(2.0, abs=1e-15)

    def test_full_quota_equals_plain_mean(self):
        records = [
            make_record(0, 2, 2, SAFE, sampled=True),
            make_record(1, 4, 4, SAFE, sampled=True),
            make_record(2, 3, 3, UNSAFE),
        ]
        assert mean_count_estimate(records, 1.0) == pytest.approx(3.0, abs=1e-15)

    def test_errors(self):
        with pytest.raises(ValueError):
            mean_count_estimate([], 1.0)
        with pytest.raises(ValueError):
            mean_count_estimate(three_record_campaign(), 0.0)
        broken = [make_record(0, 2, 2, UNSAFE)]
        object.__setattr__(broken[0], "m_final", None)
        with pytest.raises(ValueError, match="ground truth"):
            mean_count_estimate(broken, 1.0)


class TestRelativeDifferences:
    def test_direct_formula(self):
        r = make_record(0, 4, 5, UNSAFE)
        [(_, d)] = relative_differences([r], 2.0)
        assert d == pytest.approx(0.5, abs=1e-15)

    def test_zero_error(self):
        r = make_record(0, 4, 4, UNSAFE)
        [(_, d)] = relative_differences([r], 123.0)
        assert d == 0.0

    def test_hand_example(self):
        r = make_record(0, 4, 3, UNSAFE)
        [(_, d)] = relative_differences([r], 7 / 3)
        assert d == pytest.approx(-3 / 7, abs=1e-15)

    def test_non_sampled_safe_yield_no_value(self):
        diffs = relative_differences(three_record_campaign(), 7 / 3)
        assert len(diffs) == 2
        assert {r.dop_id for r, _ in diffs} == {"d00000", "d00002"}

    def test_degenerate_mean(self):
        with pytest.raises(ValueError, match="> 0"):
            relative_differences(three_record_campaign(), 0.0)


def stats(
    n, n_s, n_u, q=1.0, d_s=None, d_u=None, nu_s=None, nu_u=None, m_hat=1.0
) -> PartitionStats:
    return PartitionStats(
        n=n, n_s=n_s, n_u=n_u, q_effective=q,
        d_bar_s=d_s, d_bar_u=d_u, nu_hat_s=nu_s, nu_hat_u=nu_u, m_hat_q=m_hat,
    )


class TestStratifiedMean:
    def test_all_unsafe(self):
        assert stratified_mean(stats(3, 0, 3, d_u=-0.2)) == pytest.approx(-0.2)

    def test_weighted_recombination(self):
        s = stats(3, 2, 1, q=1.0, d_s=0.1, d_u=-0.2)
        assert stratified_mean(s) == pytest.approx(0.0, abs=1e-15)

    def test_full_quota_equals_plain_mean(self):
        d = [0.3, -0.1, 0.2, 0.4, -0.5]
        s = stats(
            5, 3, 2, q=1.0,
            d_s=float(np.mean(d[:3])), d_u=float(np.mean(d[3:])),
        )
        assert stratified_mean(s) == pytest.approx(float(np.mean(d)), abs=1e-15)


class TestPooledVariance:
    def test_hand_example(self):
        # 0.9*0.0025/0.5 + 0.1*0.09 + 0.09*0.0004 = 0.013536
        s = stats(1000, 900, 100, q=0.5, d_s=0.0, d_u=0.02, nu_s=0.05, nu_u=0.3)
        pooled = pooled_variance(s, 0.03)
        assert pooled.value == pytest.approx(0.013536, abs=1e-15)
        assert not pooled.clamped_s and not pooled.clamped_u

    def test_clamping_flags(self):
        s = stats(100, 50, 50, q=1.0, d_s=0.0, d_u=0.0, nu_s=0.01, nu_u=0.3)
        pooled = pooled_variance(s, 0.03)
        assert pooled.clamped_s and not pooled.clamped_u
        assert pooled.value == pytest.approx(0.5 * 0.03**2 + 0.5 * 0.3**2, abs=1e-15)

    def test_single_stratum_collapse(self):
        s = stats(100, 100, 0, q=0.5, d_s=0.0, nu_s=0.1)
        pooled = pooled_variance(s, 0.03)
        assert pooled.value == pytest.approx(0.1**2 / 0.5, abs=1e-15)

    def test_undefined_sigma_uses_floor(self):
        s = stats(2, 1, 1, q=1.0, d_s=0.0, d_u=0.0, nu_s=None, nu_u=None)
        pooled = pooled_variance(s, 0.03)
        assert pooled.clamped_s and pooled.clamped_u
        assert pooled.value == pytest.approx(0.03**2, abs=1e-18)

    @given(
        nu_min_a=st.floats(min_value=0, max_value=0.5),
        nu_min_b=st.floats(min_value=0, max_value=0.5),
        nu_s=st.floats(min_value=0, max_value=0.5),
        nu_u=st.floats(min_value=0, max_value=0.5),
        q=st.floats(min_value=0.05, max_value=1.0),
    )
    def test_monotone_in_nu_min(self, nu_min_a, nu_min_b, nu_s, nu_u, q):
        s = stats(10, 6, 4, q=q, d_s=0.01, d_u=-0.02, nu_s=nu_s, nu_u=nu_u)
        lo, hi = sorted([nu_min_a, nu_min_b])
        assert pooled_variance(s, lo).value <= pooled_variance(s, hi).value + 1e-18


class TestConfidenceInterval:
    def test_zero_width(self):
        assert confidence_interval(0.0, 0.0, 10, 0.05) == (0.0, 0.0)

    def test_quantile_evaluation(self):
        low, high = confidence_interval(0.0, 0.15, 3458, 0.05)
        assert high == pytest.approx(Z975 * 0.15 / math.sqrt(3458), abs=1e-12)
        assert high == pytest.approx(0.005, abs=5e-7)
        assert low == -high

    def test_offset_interval(self):
        low, high = confidence_interval(0.002, 0.2, 6147, 0.05)
        half = Z975 * 0.2 / math.sqrt(6147)
        assert low == pytest.approx(0.002 - half, abs=1e-12)
        assert high == pytest.approx(0.002 + half, abs=1e-12)
        assert half == pytest.approx(0.005, abs=5e-7)

    def test_preconditions(self):
        with pytest.raises(ValueError):
            confidence_interval(0.0, 0.1, 0, 0.05)
        with pytest.raises(ValueError):
            confidence_interval(0.0, -0.1, 10, 0.05)


class TestVerdict:
    def test_containment(self):
        assert equivalence_verdict((-0.003, 0.007), 0.01) == PASS

    def test_upper_breach(self):
        assert equivalence_verdict((-0.003, 0.011), 0.01) == FAIL

    def test_boundary_inclusive(self):
        assert equivalence_verdict((-0.01, 0.01), 0.01) == PASS


class TestEvaluateClassic:
    def test_all_zero_errors(self):
        records = [make_record(i, 3, 3, UNSAFE) for i in range(100)]
        report = evaluate_classic(records, TestParams())
        assert report.d_hat == 0.0
        assert report.nu_hat == 0.03  # clamped
        assert report.clamped_u
        # halfwidth 1.96*0.03/10 = 0.00588 <= 0.01
        assert report.verdict == PASS

    def test_single_record_degenerate(self):
        report = evaluate_classic([make_record(0, 2, 2, UNSAFE)], TestParams())
        assert report.nu_hat == 0.03
        assert report.warnings

    def test_missing_ground_truth(self):
        r = DopRecord(dop_id="x", k_auto=1)
        with pytest.raises(ValueError, match="ground truth"):
            evaluate_classic([r], TestParams())

    def test_all_zero_counts_rejected(self):
        records = [make_record(i, 0, 0, UNSAFE) for i in range(5)]
        with pytest.raises(ValueError, match="no boarding passengers"):
            evaluate_classic(records, TestParams())

    def test_labels_ignored(self):
        records = [make_record(i, 3, 3 + (i % 2), SAFE, sampled=False) for i in range(40)]
        report = evaluate_classic(records, TestParams())
        assert report.stats.n_u == 40  # whole campaign in the fully counted slot
        assert report.stats.q_effective == 1.0


class TestEvaluatePartitioned:
    def test_worked_three_record_example(self):
        report = evaluate_partitioned(three_record_campaign(), TestParams(), q_planned=0.5)
        assert report.stats.m_hat_q == pytest.approx(7 / 3, abs=1e-15)
        assert report.stats.q_effective == 0.5
        assert report.d_hat == 0.0
        # both strata have a single counted record: sigma floors at nu_min
        assert report.clamped_s and report.clamped_u
        expected_var = (2 / 3) * 0.03**2 / 0.5 + (1 / 3) * 0.03**2
        assert report.nu_hat == pytest.approx(math.sqrt(expected_var), abs=1e-15)
        half = Z975 * report.nu_hat / math.sqrt(3)
        assert report.verdict == (PASS if half <= 0.01 else FAIL)
        assert report.verdict == FAIL
        assert report.q_planned == 0.5
        assert len(report.warnings) == 2

    def test_all_unsafe_equals_classic(self):
        rng = np.random.default_rng(7)
        records = fully_counted_campaign(rng, 80, p_s=0.0)
        part = evaluate_partitioned(records, TestParams())
        classic = evaluate_classic(records, TestParams())
        assert part.d_hat == pytest.approx(classic.d_hat, abs=1e-15)
        assert part.nu_hat == pytest.approx(classic.nu_hat, abs=1e-15)
        assert part.verdict == classic.verdict

    def test_precondition_errors(self):
        records = three_record_campaign()
        with pytest.raises(ValueError, match="unlabeled"):
            evaluate_partitioned(records + [DopRecord(dop_id="u", k_auto=1)], TestParams())
        unsampled = [make_record(0, 2, 2, SAFE, sampled=None)]
        with pytest.raises(ValueError, match="sampling indicator"):
            evaluate_partitioned(unsampled, TestParams())
        none_sampled = [
            make_record(0, 2, 2, SAFE, sampled=False),
            make_record(1, 3, 3, UNSAFE),
        ]
        with pytest.raises(ValueError, match="no record was sampled"):
            evaluate_partitioned(none_sampled, TestParams())

    def test_clamped_pass_case(self):
        # zero errors everywhere: both strata floor at nu_min; pooled equals
        # nu_min exactly at full quota, so the verdict matches the classic one
        records = [
            make_record(i, 3, 3, SAFE if i % 2 else UNSAFE, sampled=True if i % 2 else None)
            for i in range(100)
        ]
        report = evaluate_partitioned(records, TestParams())
        classic = evaluate_classic(records, TestParams())
        assert report.nu_hat == pytest.approx(0.03, abs=1e-15)
        assert report.verdict == classic.verdict == PASS

    def test_weighted_mean_identity(self):
        # explicit indicator/quota weights equal the sampled-subset mean
        rng = np.random.default_rng(11)
        records = fully_counted_campaign(rng, 200, p_s=0.8)
        from conftest import subsample_safe

        records = subsample_safe(records, rng, 0.4)
        report = evaluate_partitioned(records, TestParams())
        m_hat = report.stats.m_hat_q
        q_eff = report.stats.q_effective
        safe = [r for r in records if r.label == SAFE]
        explicit = math.fsum(
            ((r.k_auto - r.m_final) / m_hat) * (1.0 if r.sampled else 0.0) / q_eff
            for r in safe
        ) / len(safe)
        assert explicit == pytest.approx(report.stats.d_bar_s, abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.data())
    def test_degeneration_small_campaigns(self, data):
        # at full quota the partitioned estimate equals the classic one; for
        # n <= 30 the interval halfwidth exceeds the margin for both tests
        # (nu floors at 0.03), so the verdicts agree structurally
        n = data.draw(st.integers(min_value=2, max_value=30))
        ms = data.draw(st.lists(st.integers(0, 6), min_size=n, max_size=n))
        errs = data.draw(st.lists(st.integers(-2, 2), min_size=n, max_size=n))
        labels = data.draw(st.lists(st.booleans(), min_size=n, max_size=n))
        if not any(ms):
            ms[0] = 1
        records = [
            make_record(
                i, m, max(0, m + e), SAFE if safe else UNSAFE,
                sampled=True if safe else None,
            )
            for i, (m, e, safe) in enumerate(zip(ms, errs, labels))
        ]
        part = evaluate_partitioned(records, TestParams())
        classic = evaluate_classic(records, TestParams())
        assert part.stats.q_effective == 1.0
        assert abs(part.d_hat - classic.d_hat) <= 1e-12
        assert part.verdict == classic.verdict == FAIL

    def test_report_invariants(self):
        rng = np.random.default_rng(3)
        records = fully_counted_campaign(rng, 50)
        report = evaluate_partitioned(records, TestParams())
        assert report.ci_low <= report.d_hat <= report.ci_high
        assert report.n == 50
        assert report.stats.n == report.stats.n_s + report.stats.n_u
