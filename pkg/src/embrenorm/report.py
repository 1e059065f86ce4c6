"""Comparison statistics and report rendering.

A comparison row holds the per-task delta between a treated run and a
baseline run, with a z-score in units of the baseline's standard
error.  Aggregation mirrors the way results tables are usually read:
sum of deltas over root-sum-square of sigmas, plus the fraction of
tasks individually beyond 2 sigma either way.

The extremes summary applies the familiar "interesting rows only"
filter: |delta| > 0.1 and |relative delta| > 2%.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum

from .errors import DegenerateInput, KeyMismatch
from .harness import RunRecord
from .metrics import SIGMA_FLOOR, TaskScore, spearman
from .tasks import TaskType

SIGNIFICANCE_Z = 2.0
DELTA_THRESHOLD = 0.1
REL_DELTA_THRESHOLD = 0.02


class GroupBy(Enum):
    TASK_TYPE = "task-type"
    MODEL = "model"


@dataclass(frozen=True)
class ComparisonRow:
    task_id: str
    task_type: TaskType
    model_id: str
    metric: str
    baseline: TaskScore
    treated: TaskScore
    delta: float
    rel_delta: float | None  # None when the baseline value is 0
    z: float


@dataclass(frozen=True)
class AggregateRow:
    group_key: str
    count: int
    mean_delta: float
    aggregate_z: float
    frac_significant_up: float
    frac_significant_down: float


@dataclass(frozen=True)
class ExtremesSummary:
    count_up: int
    mean_delta_up: float | None
    max_delta_up: float | None
    min_delta_up: float | None
    count_down: int
    mean_delta_down: float | None
    max_delta_down: float | None  # least negative qualifying drop
    min_delta_down: float | None  # the worst drop
    filtered_out: int


def compare(
    baseline_records: list[RunRecord],
    treated_records: list[RunRecord],
    model_id: str = "",
    combined_sigma: bool = False,
) -> list[ComparisonRow]:
    """Pair records by task id and compute deltas.

    Both sides must be keyed by exactly the same task ids.  Pairs
    where either side failed are skipped (they carry no score).

    z is delta over the baseline sigma.  With combined_sigma the
    denominator becomes sqrt(sigma_b^2 + sigma_t^2) instead.
    """

    def index(records, side):
        out = {}
        for r in records:
            if r.task_id in out:
                raise KeyMismatch(f"duplicate task id {r.task_id!r} in {side} records")
            out[r.task_id] = r
        return out

    base = index(baseline_records, "baseline")
    treat = index(treated_records, "treated")
    if set(base) != set(treat):
        only_b = sorted(set(base) - set(treat))
        only_t = sorted(set(treat) - set(base))
        raise KeyMismatch(f"task ids differ: baseline-only {only_b}, treated-only {only_t}")

    rows = []
    for tid in sorted(base):
        b, t = base[tid], treat[tid]
        if b.status != "ok" or t.status != "ok":
            continue
        delta = t.score.value - b.score.value
        rel = None if b.score.value == 0.0 else delta / b.score.value
        if combined_sigma:
            denom = math.sqrt(
                max(b.score.sigma, SIGMA_FLOOR) ** 2 + max(t.score.sigma, SIGMA_FLOOR) ** 2
            )
        else:
            denom = max(b.score.sigma, SIGMA_FLOOR)
        z = delta / denom
        rows.append(
            ComparisonRow(
                task_id=tid,
                task_type=b.task_type,
                model_id=model_id,
                metric=b.score.metric,
                baseline=b.score,
                treated=t.score,
                delta=delta,
                rel_delta=rel,
                z=z,
            )
        )
    return rows


def aggregate(rows: list[ComparisonRow], group_by: GroupBy = GroupBy.TASK_TYPE) -> list[AggregateRow]:
    """Grouped roll-up: aggregateZ = sum(delta) / sqrt(sum(sigma^2))."""
    groups: dict[str, list[ComparisonRow]] = {}
    for row in rows:
        key = row.task_type.value if group_by is GroupBy.TASK_TYPE else row.model_id
        groups.setdefault(key, []).append(row)
    out = []
    for key in sorted(groups):
        members = groups[key]
        total_delta = sum(r.delta for r in members)
        var = sum(max(r.baseline.sigma, SIGMA_FLOOR) ** 2 for r in members)
        out.append(
            AggregateRow(
                group_key=key,
                count=len(members),
                mean_delta=total_delta / len(members),
                aggregate_z=total_delta / math.sqrt(var),
                frac_significant_up=sum(1 for r in members if r.z > SIGNIFICANCE_Z) / len(members),
                frac_significant_down=sum(1 for r in members if r.z < -SIGNIFICANCE_Z) / len(members),
            )
        )
    return out


def significant_extremes(
    rows: list[ComparisonRow],
    delta_threshold: float = DELTA_THRESHOLD,
    rel_threshold: float = REL_DELTA_THRESHOLD,
) -> ExtremesSummary:
    """Largest movers after the absolute-and-relative filter.

    A row qualifies only when |delta| exceeds delta_threshold and its
    relative delta exists and exceeds rel_threshold in magnitude.
    """
    eligible = [
        r
        for r in rows
        if r.rel_delta is not None
        and abs(r.delta) > delta_threshold
        and abs(r.rel_delta) > rel_threshold
    ]
    ups = [r.delta for r in eligible if r.delta > 0]
    downs = [r.delta for r in eligible if r.delta < 0]
    return ExtremesSummary(
        count_up=len(ups),
        mean_delta_up=sum(ups) / len(ups) if ups else None,
        max_delta_up=max(ups) if ups else None,
        min_delta_up=min(ups) if ups else None,
        count_down=len(downs),
        mean_delta_down=sum(downs) / len(downs) if downs else None,
        max_delta_down=max(downs) if downs else None,
        min_delta_down=min(downs) if downs else None,
        filtered_out=len(rows) - len(eligible),
    )


@dataclass(frozen=True)
class CorrelationReport:
    spearman: float
    n: int
    csv: str  # plot-ready, columns muNorm and effectiveness


def correlation_report(pairs) -> CorrelationReport:
    """Rank correlation between bias norms and effectiveness deltas."""
    pairs = list(pairs)
    if len(pairs) < 3:
        raise DegenerateInput(f"need at least 3 pairs, got {len(pairs)}")
    xs = [float(p[0]) for p in pairs]
    ys = [float(p[1]) for p in pairs]
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["muNorm", "effectiveness"])
    for x, y in zip(xs, ys):
        writer.writerow([_fmt(x), _fmt(y)])
    return CorrelationReport(spearman=spearman(xs, ys), n=len(pairs), csv=buf.getvalue())


def format_cell(rel_delta: float | None, z: float, delta: float) -> str:
    """Render one comparison like "+8.68% 89.4σ ↑".

    The percentage is the relative delta, sigma count is |z|, and the
    arrow follows the sign of the absolute delta.  When the baseline
    was 0 (no relative delta) the absolute delta is shown instead.
    """
    arrow = "↑" if delta >= 0 else "↓"
    magnitude = f"{abs(z):.1f}σ"
    if rel_delta is None:
        return f"{delta:+.4f} {magnitude} {arrow}"
    return f"{rel_delta * 100.0:+.2f}% {magnitude} {arrow}"


def format_row(row: ComparisonRow) -> str:
    return format_cell(row.rel_delta, row.z, row.delta)


_CSV_HEADER = [
    "taskId",
    "taskType",
    "model",
    "metric",
    "baseline",
    "treated",
    "delta",
    "relDelta",
    "z",
    "rendered",
]


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def rows_to_csv(rows: list[ComparisonRow]) -> str:
    """RFC-4180 CSV with floats at 6 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(_CSV_HEADER)
    for r in rows:
        writer.writerow(
            [
                r.task_id,
                r.task_type.value,
                r.model_id,
                r.metric,
                _fmt(r.baseline.value),
                _fmt(r.treated.value),
                _fmt(r.delta),
                "" if r.rel_delta is None else _fmt(r.rel_delta),
                _fmt(r.z),
                format_row(r),
            ]
        )
    return buf.getvalue()


def read_csv_rows(text: str) -> list[dict]:
    """Parse rows_to_csv output back into dicts with float fields."""
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for rec in reader:
        out.append(
            {
                "taskId": rec["taskId"],
                "taskType": rec["taskType"],
                "model": rec["model"],
                "metric": rec["metric"],
                "baseline": float(rec["baseline"]),
                "treated": float(rec["treated"]),
                "delta": float(rec["delta"]),
                "relDelta": None if rec["relDelta"] == "" else float(rec["relDelta"]),
                "z": float(rec["z"]),
                "rendered": rec["rendered"],
            }
        )
    return out


def summary_json(
    rows: list[ComparisonRow],
    aggregates: list[AggregateRow],
    extremes: ExtremesSummary,
) -> dict:
    """JSON-ready summary with per-task cells and grouped roll-ups."""
    return {
        "perTask": [
            {
                "taskId": r.task_id,
                "taskType": r.task_type.value,
                "model": r.model_id,
                "metric": r.metric,
                "baseline": r.baseline.value,
                "treated": r.treated.value,
                "delta": r.delta,
                "relDelta": r.rel_delta,
                "z": r.z,
                "significant": abs(r.z) > SIGNIFICANCE_Z,
                "rendered": format_row(r),
            }
            for r in rows
        ],
        "aggregates": [
            {
                "group": a.group_key,
                "count": a.count,
                "meanDelta": a.mean_delta,
                "aggregateZ": a.aggregate_z,
                "fracSignificantUp": a.frac_significant_up,
                "fracSignificantDown": a.frac_significant_down,
            }
            for a in aggregates
        ],
        "extremes": {
            "countUp": extremes.count_up,
            "meanDeltaUp": extremes.mean_delta_up,
            "maxDeltaUp": extremes.max_delta_up,
            "minDeltaUp": extremes.min_delta_up,
            "countDown": extremes.count_down,
            "meanDeltaDown": extremes.mean_delta_down,
            "maxDeltaDown": extremes.max_delta_down,
            "minDeltaDown": extremes.min_delta_down,
            "filteredOut": extremes.filtered_out,
        },
    }
