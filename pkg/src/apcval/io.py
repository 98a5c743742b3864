"""Campaign files, configuration files and report emission.

Campaign files are UTF-8 comma-delimited text with a mandatory header and
one row per door opening phase; empty cells mean absent. Labels use the
one-letter values 's' and 'u'. Configuration files are flat `key = value`
text with a closed key set; unknown keys are rejected and every value is
validated against the domain invariants on load.
"""

from __future__ import annotations

import csv
import io as _stringio
import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from ._version import VERSION
from .classify import ClassifierSpec
from .cost import SCHEME_NO_FIRST_COUNT, SCHEMES, CostBreakdown
from .domain import (
    SAFE,
    UNLABELED,
    UNSAFE,
    CostRates,
    DopRecord,
    PartitionParams,
    PartitionStats,
    TestParams,
    validate_record,
)
from .estimator import EvaluationReport
from .planner import Plan
from .simulate import AuditPoint, SuccessCurve

CAMPAIGN_COLUMNS = (
    "dop_id",
    "duration_s",
    "m1",
    "m2",
    "m_sup",
    "m_final",
    "k_auto",
    "alg_count",
    "alg_confidence",
    "label",
    "sampled",
)

_LABEL_TO_CSV = {SAFE: "s", UNSAFE: "u", UNLABELED: ""}
_CSV_TO_LABEL = {"s": SAFE, "u": UNSAFE, "": UNLABELED}


class CampaignError(ValueError):
    """Raised for unreadable, malformed or inconsistent campaign files."""


def _opt_int(cell: str, row: int, column: str) -> int | None:
    if cell == "":
        return None
    try:
        return int(cell)
    except ValueError:
        raise CampaignError(f"row {row}: {column} is not an integer: {cell!r}") from None


def _opt_float(cell: str, row: int, column: str) -> float | None:
    if cell == "":
        return None
    try:
        return float(cell)
    except ValueError:
        raise CampaignError(f"row {row}: {column} is not a number: {cell!r}") from None


def load_campaign(path: str | Path, strict: bool = False) -> tuple[list[DopRecord], list[str]]:
    """Read a campaign file into records plus a validation report.

    Parse problems (bad header, unparseable cells, duplicate ids) are hard
    errors. Domain invariant violations are returned as a list; with
    strict=True any violation is promoted to a CampaignError.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CampaignError(f"cannot read campaign file {path}: {exc}") from exc

    reader = csv.reader(_stringio.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise CampaignError(f"{path}: empty file, header row is mandatory") from None
    if sorted(header) != sorted(CAMPAIGN_COLUMNS):
        raise CampaignError(
            f"{path}: malformed header {header!r}, expected columns {list(CAMPAIGN_COLUMNS)}"
        )
    col = {name: header.index(name) for name in CAMPAIGN_COLUMNS}

    records: list[DopRecord] = []
    violations: list[str] = []
    seen: set[str] = set()
    for row_no, row in enumerate(reader, start=2):
        if not row or all(cell == "" for cell in row):
            continue
        if len(row) != len(header):
            raise CampaignError(f"row {row_no}: expected {len(header)} cells, got {len(row)}")
        cell = lambda name: row[col[name]].strip()
        dop_id = cell("dop_id")
        if not dop_id:
            raise CampaignError(f"row {row_no}: empty dop_id")
        if dop_id in seen:
            raise CampaignError(f"duplicate dop_id {dop_id!r}")
        seen.add(dop_id)

        label_cell = cell("label")
        if label_cell not in _CSV_TO_LABEL:
            raise CampaignError(f"row {row_no}: unknown label {label_cell!r} (use s/u or empty)")
        sampled_cell = cell("sampled")
        if sampled_cell not in ("", "true", "false"):
            raise CampaignError(
                f"row {row_no}: sampled must be true/false or empty, got {sampled_cell!r}"
            )
        k_auto = _opt_int(cell("k_auto"), row_no, "k_auto")
        if k_auto is None:
            raise CampaignError(f"row {row_no}: k_auto is mandatory")
        record = DopRecord(
            dop_id=dop_id,
            duration_s=_opt_float(cell("duration_s"), row_no, "duration_s") or 0.0,
            m1=_opt_int(cell("m1"), row_no, "m1"),
            m2=_opt_int(cell("m2"), row_no, "m2"),
            m_sup=_opt_int(cell("m_sup"), row_no, "m_sup"),
            m_final=_opt_int(cell("m_final"), row_no, "m_final"),
            k_auto=k_auto,
            alg_count=_opt_int(cell("alg_count"), row_no, "alg_count"),
            alg_confidence=_opt_float(cell("alg_confidence"), row_no, "alg_confidence"),
            label=_CSV_TO_LABEL[label_cell],
            sampled={"true": True, "false": False, "": None}[sampled_cell],
        )
        records.append(record)
        violations.extend(validate_record(record))

    if strict and violations:
        raise CampaignError("validation failed:\n" + "\n".join(violations))
    return records, violations


def save_campaign(records: list[DopRecord], path: str | Path) -> None:
    """Write records back out; load_campaign(save_campaign(x)) is identity."""
    buf = _stringio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CAMPAIGN_COLUMNS)
    for r in records:
        writer.writerow(
            [
                r.dop_id,
                repr(r.duration_s),
                "" if r.m1 is None else r.m1,
                "" if r.m2 is None else r.m2,
                "" if r.m_sup is None else r.m_sup,
                "" if r.m_final is None else r.m_final,
                r.k_auto,
                "" if r.alg_count is None else r.alg_count,
                "" if r.alg_confidence is None else repr(r.alg_confidence),
                _LABEL_TO_CSV[r.label],
                "" if r.sampled is None else ("true" if r.sampled else "false"),
            ]
        )
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


# --- configuration ----------------------------------------------------------

_CONFIG_KEYS = (
    "alpha",
    "beta",
    "delta",
    "nu",
    "nu_min",
    "buffer",
    "p_s",
    "nu_s_ratio",
    "q",
    "seed",
    "classifier.kind",
    "classifier.threshold",
    "classifier.target_share",
    "costs.r_av",
    "costs.c_labor",
    "costs.r_s",
    "costs.scheme",
)


@dataclass(frozen=True, slots=True)
class Config:
    """Validated configuration for the command line workflows."""

    params: TestParams
    partition: PartitionParams
    rates: CostRates
    scheme: str = SCHEME_NO_FIRST_COUNT
    seed: int = 0
    classifier: ClassifierSpec | None = None


class ConfigError(ValueError):
    """Raised for unknown keys or invalid values in a configuration."""


def _parse_config_text(text: str, source: str) -> dict[str, str]:
    raw: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{line_no}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{source}:{line_no}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{source}:{line_no}: duplicate key {key!r}")
        raw[key] = value.strip()
    return raw


def config_from_raw(raw: dict[str, str]) -> Config:
    """Build and validate a Config from raw string key-values."""
    unknown = [k for k in raw if k not in _CONFIG_KEYS]
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}")

    def number(key: str, default: float) -> float:
        if key not in raw:
            return default
        try:
            return float(raw[key])
        except ValueError:
            raise ConfigError(f"{key} is not a number: {raw[key]!r}") from None

    try:
        params = TestParams(
            alpha=number("alpha", 0.05),
            beta=number("beta", 0.05),
            delta=number("delta", 0.01),
            nu=number("nu", 0.20),
            nu_min=number("nu_min", 0.03),
            buffer=number("buffer", 1.15),
        )
        partition = PartitionParams(
            p_s=number("p_s", 0.90),
            nu_s_ratio=number("nu_s_ratio", 0.35),
            q=number("q", 0.175),
        )
        rates = CostRates(
            r_av=number("costs.r_av", 0.7),
            c_labor=number("costs.c_labor", 20.0),
            r_s=number("costs.r_s", 1.2),
        )
        classifier = None
        if "classifier.kind" in raw:
            threshold = raw.get("classifier.threshold")
            target = raw.get("classifier.target_share")
            classifier = ClassifierSpec(
                kind=raw["classifier.kind"],
                threshold=None if threshold is None else float(threshold),
                target_share=None if target is None else float(target),
            )
        elif "classifier.threshold" in raw or "classifier.target_share" in raw:
            raise ConfigError("classifier.threshold/target_share need classifier.kind")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc

    scheme = raw.get("costs.scheme", SCHEME_NO_FIRST_COUNT)
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown costs.scheme {scheme!r}, expected one of {list(SCHEMES)}")
    try:
        seed = int(raw.get("seed", "0"))
    except ValueError:
        raise ConfigError(f"seed is not an integer: {raw['seed']!r}") from None
    if seed < 0:
        raise ConfigError(f"seed must be >= 0, got {seed}")
    return Config(
        params=params,
        partition=partition,
        rates=rates,
        scheme=scheme,
        seed=seed,
        classifier=classifier,
    )


def load_config(path: str | Path) -> Config:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return config_from_raw(_parse_config_text(text, str(path)))


def merge_overrides(raw: dict[str, str], overrides: list[str]) -> dict[str, str]:
    """Apply `key=value` override strings on top of raw config pairs."""
    merged = dict(raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, _, value = item.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown override key {key!r}")
        merged[key] = value.strip()
    return merged


def load_config_with_overrides(path: str | Path | None, overrides: list[str]) -> Config:
    raw: dict[str, str] = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {p}: {exc}") from exc
        raw = _parse_config_text(text, str(p))
    return config_from_raw(merge_overrides(raw, overrides))


# --- report emission --------------------------------------------------------


def _round12(x: float) -> float | None:
    if not math.isfinite(x):
        return None
    return float(f"{x:.12g}")


def _clean(obj):
    if isinstance(obj, float):
        return _round12(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _params_dict(params: TestParams) -> dict:
    return {
        "alpha": params.alpha,
        "beta": params.beta,
        "delta": params.delta,
        "nu": params.nu,
        "nu_min": params.nu_min,
        "buffer": params.buffer,
    }


def _partition_dict(partition: PartitionParams) -> dict:
    return {"p_s": partition.p_s, "nu_s_ratio": partition.nu_s_ratio, "q": partition.q}


def _stats_dict(stats: PartitionStats) -> dict:
    return {
        "n": stats.n,
        "n_s": stats.n_s,
        "n_u": stats.n_u,
        "q_effective": stats.q_effective,
        "d_bar_s": stats.d_bar_s,
        "d_bar_u": stats.d_bar_u,
        "nu_hat_s": stats.nu_hat_s,
        "nu_hat_u": stats.nu_hat_u,
        "m_hat_q": stats.m_hat_q,
    }


def report_to_dict(report) -> dict:
    """Convert a result object to its stable dictionary form."""
    if isinstance(report, EvaluationReport):
        return {
            "report": "evaluation",
            "version": VERSION,
            "d_hat": report.d_hat,
            "nu_hat": report.nu_hat,
            "n": report.n,
            "ci_low": report.ci_low,
            "ci_high": report.ci_high,
            "delta": report.delta,
            "verdict": report.verdict,
            "clamped_s": report.clamped_s,
            "clamped_u": report.clamped_u,
            "q_planned": report.q_planned,
            "stats": _stats_dict(report.stats),
            "warnings": list(report.warnings),
        }
    if isinstance(report, Plan):
        return {
            "report": "plan",
            "version": VERSION,
            "n_e": report.n_e,
            "n_rec": report.n_rec,
            "q_planned": report.q_planned,
            "q_source": report.q_source,
            "buffered_n_rec": report.buffered_n_rec,
            "buffered_n_e": report.buffered_n_e,
            "params": _params_dict(report.params),
            "partition": _partition_dict(report.partition),
            "costs": None
            if report.costs is None
            else {"c_u": report.costs.c_u, "c_s0": report.costs.c_s0, "c_sz": report.costs.c_sz},
            "notes": list(report.notes),
        }
    if isinstance(report, SuccessCurve):
        return {
            "report": "success_curve",
            "version": VERSION,
            "grid_var": report.grid_var,
            "test": report.test,
            "trials": report.trials,
            "seed": report.seed,
            "fixed": dict(report.fixed),
            "points": [
                {
                    "grid_value": p.grid_value,
                    "pass_rate": p.pass_rate,
                    "mc_se": p.mc_se,
                    "analytic": p.analytic,
                }
                for p in report.points
            ],
        }
    if isinstance(report, CostBreakdown):
        return {
            "report": "cost",
            "version": VERSION,
            "scheme": report.scheme,
            "c_u": report.c_u,
            "c_s0": report.c_s0,
            "c_sz": report.c_sz,
            "per_record": [[dop_id, c] for dop_id, c in report.per_record],
        }
    if isinstance(report, tuple) and report and isinstance(report[0], AuditPoint):
        return {
            "report": "user_risk_audit",
            "version": VERSION,
            "points": [
                {"n": p.n, "pass_rate": p.pass_rate, "mc_se": p.mc_se, "worst_mu": p.worst_mu}
                for p in report
            ],
        }
    if isinstance(report, dict):
        return report
    raise TypeError(f"cannot emit report for {type(report).__name__}")


def _flatten(prefix: str, value, rows: list[tuple[str, str]]) -> None:
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, rows)
    elif isinstance(value, list):
        for i, v in enumerate(value):
            _flatten(f"{prefix}[{i}]", v, rows)
    else:
        rows.append((prefix, "" if value is None else str(value)))


def emit_report(report, fmt: str = "json", timestamp: bool = True) -> str:
    """Serialize a result with stable field names.

    JSON carries floats at 12 significant digits. CSV emits the success
    curve table (grid_var, grid_value, pass_rate, mc_se, analytic) and a
    flat key,value table for every other report type. The `created` field
    is informational and excluded from reproducibility comparisons.
    """
    if fmt not in ("json", "csv"):
        raise ValueError(f"unknown format {fmt!r}")
    if fmt == "csv" and isinstance(report, SuccessCurve):
        buf = _stringio.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["grid_var", "grid_value", "pass_rate", "mc_se", "analytic"])
        for p in report.points:
            writer.writerow(
                [
                    report.grid_var,
                    f"{p.grid_value:.12g}",
                    f"{p.pass_rate:.12g}",
                    f"{p.mc_se:.12g}",
                    "" if p.analytic is None else f"{p.analytic:.12g}",
                ]
            )
        return buf.getvalue()

    payload = _clean(report_to_dict(report))
    if timestamp:
        payload["created"] = datetime.now(timezone.utc).isoformat()
    if fmt == "json":
        return json.dumps(payload, indent=2, allow_nan=False) + "\n"
    rows: list[tuple[str, str]] = []
    _flatten("", payload, rows)
    buf = _stringio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["key", "value"])
    writer.writerows(rows)
    return buf.getvalue()
