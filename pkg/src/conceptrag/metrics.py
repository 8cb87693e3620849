"""Evaluation metrics: answer accuracy, area-under-curve integration,
compression ratio, and latency summaries, plus report rendering.

Aggregation is a single-threaded reduction over immutable record lists so
floating-point summation order is deterministic.
"""

from __future__ import annotations

import json
import math
import re
import string
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, typing only
    from .ragpipe import PipelineRecord

_WS_RE = re.compile(r"\s+")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


class MetricsError(ValueError):
    """Invalid metric input (e.g. a curve missing points inside an interval)."""


@dataclass(frozen=True)
class Interval:
    """Closed integer interval of document counts."""

    x_s: int
    x_e: int

    def __post_init__(self):
        if self.x_s >= self.x_e:
            raise ValueError(f"interval start {self.x_s} must be below end {self.x_e}")

    @property
    def name(self) -> str:
        if (self.x_s, self.x_e) == (1, 10):
            return "normal"
        if (self.x_s, self.x_e) == (6, 10):
            return "long"
        return f"{self.x_s},{self.x_e}"


NORMAL_INTERVAL = Interval(1, 10)
LONG_INTERVAL = Interval(6, 10)


def parse_interval(text: str) -> Interval:
    """Accepts 'normal', 'long', or 'a,b'."""
    if text == "normal":
        return NORMAL_INTERVAL
    if text == "long":
        return LONG_INTERVAL
    parts = text.split(",")
    if len(parts) != 2:
        raise MetricsError(f"interval must be 'normal', 'long', or 'a,b', got {text!r}")
    try:
        return Interval(int(parts[0]), int(parts[1]))
    except ValueError as exc:
        raise MetricsError(f"invalid interval {text!r}: {exc}") from None


@dataclass(frozen=True)
class EvalCurve:
    """Accuracy (percent) per document count K."""

    points: dict[int, float]
    label: str = ""

    def __post_init__(self):
        for k, acc in self.points.items():
            if k < 1 or not 0.0 <= acc <= 100.0:
                raise ValueError(f"invalid curve point K={k}, Acc={acc}")


@dataclass(frozen=True)
class IntgReport:
    intg: float
    interval: Interval
    delta: float | None = None


def normalize_answer(text: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace."""
    return _WS_RE.sub(" ", text.lower().translate(_PUNCT_TABLE)).strip()


def answer_match(candidate: str, gold_answers: list[str]) -> bool:
    """True iff any normalized gold answer is a substring of the normalized
    candidate."""
    if not gold_answers:
        raise MetricsError("gold answer list must be non-empty")
    normalized = normalize_answer(candidate)
    for gold in gold_answers:
        gold_norm = normalize_answer(gold)
        if gold_norm and gold_norm in normalized:
            return True
    return False


def accuracy_curve(records: Iterable["PipelineRecord"], label: str = "") -> EvalCurve:
    """Per-K accuracy: 100 x correct / total among pairs with that K."""
    totals: dict[int, int] = {}
    correct: dict[int, int] = {}
    for record in records:
        totals[record.k] = totals.get(record.k, 0) + 1
        correct[record.k] = correct.get(record.k, 0) + (1 if record.correct else 0)
    points = {k: 100.0 * correct[k] / totals[k] for k in totals}
    return EvalCurve(points=points, label=label)


def integrate(
    curve: EvalCurve, interval: Interval, baseline: EvalCurve | None = None
) -> IntgReport:
    """Trapezoidal area under the accuracy curve over unit K steps.

    The curve must define Acc at every integer K in the interval. When a
    baseline is supplied, ``delta`` is this curve's area minus the
    baseline's.
    """
    area = _trapezoid_area(curve, interval)
    delta = None
    if baseline is not None:
        delta = area - _trapezoid_area(baseline, interval)
    return IntgReport(intg=area, interval=interval, delta=delta)


def _trapezoid_area(curve: EvalCurve, interval: Interval) -> float:
    missing = [k for k in range(interval.x_s, interval.x_e + 1) if k not in curve.points]
    if missing:
        raise MetricsError(
            f"curve {curve.label!r} lacks Acc at K={missing} inside "
            f"[{interval.x_s},{interval.x_e}]"
        )
    return sum(
        0.5 * (curve.points[k] + curve.points[k - 1])
        for k in range(interval.x_s + 1, interval.x_e + 1)
    )


def compression_ratio(originals: list[str], compressed: list[str]) -> float:
    """Word-level size of the compressed texts as a percentage of the
    originals (the uncompressed baseline is 100.0)."""
    if len(originals) != len(compressed):
        raise MetricsError(
            f"originals ({len(originals)}) and compressed ({len(compressed)}) differ in length"
        )
    original_words = sum(len(text.split()) for text in originals)
    if original_words == 0:
        raise MetricsError("original texts contain no words")
    compressed_words = sum(len(text.split()) for text in compressed)
    return 100.0 * compressed_words / original_words


def percentile(values: list[float], q: float) -> float:
    """Nearest-rank percentile over a non-empty list."""
    if not values:
        raise MetricsError("cannot take a percentile of no values")
    ordered = sorted(values)
    rank = max(1, math.ceil(q / 100.0 * len(ordered)))
    return ordered[min(rank, len(ordered)) - 1]


def latency_summary(records: Iterable["PipelineRecord"]) -> list[dict]:
    """Mean/p50/p95 latency in ms per (backend, mode) group."""
    groups: dict[tuple[str, str], list[float]] = {}
    for record in records:
        groups.setdefault((record.backend, record.mode), []).append(record.latency_ms)
    rows = []
    for (backend, mode), latencies in sorted(groups.items()):
        rows.append(
            {
                "backend": backend,
                "mode": mode,
                "count": len(latencies),
                "mean_ms": sum(latencies) / len(latencies),
                "p50_ms": percentile(latencies, 50),
                "p95_ms": percentile(latencies, 95),
            }
        )
    return rows


# --- report assembly ---------------------------------------------------------


@dataclass(frozen=True)
class RecordView:
    """The slice of a pipeline record that reporting needs; built either from
    live records or from a results JSON."""

    k: int
    correct: bool
    backend: str
    mode: str
    latency_ms: float
    original_words: int = 0
    compressed_words: int = 0
    error: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "RecordView":
        return cls(
            k=data["k"],
            correct=bool(data["correct"]),
            backend=data.get("backend", ""),
            mode=data.get("mode", ""),
            latency_ms=data.get("latency_ms", 0.0),
            original_words=data.get("original_words", 0),
            compressed_words=data.get("compressed_words", 0),
            error=data.get("error"),
        )


def _as_views(records: Iterable) -> list[RecordView]:
    views = []
    for record in records:
        if isinstance(record, RecordView):
            views.append(record)
        elif isinstance(record, dict):
            views.append(RecordView.from_dict(record))
        else:
            views.append(RecordView.from_dict(record.to_dict()))
    return views


def build_report(
    records: list,
    intervals: list[Interval],
    baseline_records: list | None = None,
    label: str = "run",
) -> dict:
    """Aggregate a run (optionally against a baseline run) into one report
    structure with per-K accuracy, Intg (and delta) per interval, the
    word-level compression ratio, and the latency table."""
    views = _as_views(records)
    baseline_views = _as_views(baseline_records) if baseline_records else None
    curve = accuracy_curve(views, label=label)
    baseline_curve = (
        accuracy_curve(baseline_views, label="baseline") if baseline_views else None
    )
    intg_rows = []
    for interval in intervals:
        try:
            report = integrate(curve, interval, baseline=baseline_curve)
        except MetricsError as exc:
            intg_rows.append({"interval": interval.name, "error": str(exc)})
            continue
        row = {"interval": interval.name, "intg": report.intg}
        if report.delta is not None:
            row["delta"] = report.delta
        intg_rows.append(row)

    original_words = sum(v.original_words for v in views)
    compressed_words = sum(v.compressed_words for v in views)
    ratio = 100.0 * compressed_words / original_words if original_words else None

    all_views = views + (baseline_views or [])
    return {
        "label": label,
        "records": len(views),
        "errors": sum(1 for v in views if v.error),
        "accuracy_per_k": {str(k): curve.points[k] for k in sorted(curve.points)},
        "intg": intg_rows,
        "compression_ratio": ratio,
        "latency": latency_summary(all_views),
    }


def render_report_tsv(report: dict) -> str:
    """Tab-separated rendering; accuracies shown with 2-decimal rounding."""
    lines = [f"# report\t{report['label']}\trecords={report['records']}\terrors={report['errors']}"]
    lines.append("K\tAcc")
    for k, acc in report["accuracy_per_k"].items():
        lines.append(f"{k}\t{acc:.2f}")
    lines.append("interval\tIntg\tdelta")
    for row in report["intg"]:
        if "error" in row:
            lines.append(f"{row['interval']}\tERROR: {row['error']}\t")
        else:
            delta = f"{row['delta']:+.2f}" if "delta" in row else ""
            lines.append(f"{row['interval']}\t{row['intg']:.2f}\t{delta}")
    if report["compression_ratio"] is not None:
        lines.append(f"compression_ratio\t{report['compression_ratio']:.2f}")
    lines.append("backend\tmode\tcount\tmean_ms\tp50_ms\tp95_ms")
    for row in report["latency"]:
        lines.append(
            f"{row['backend']}\t{row['mode']}\t{row['count']}"
            f"\t{row['mean_ms']:.2f}\t{row['p50_ms']:.2f}\t{row['p95_ms']:.2f}"
        )
    return "\n".join(lines) + "\n"


def write_report(report: dict, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(report, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    (out / "report.tsv").write_text(render_report_tsv(report), encoding="utf-8")


# --- SVG accuracy plot ---------------------------------------------------------


def render_accuracy_svg(curves: list[EvalCurve], title: str = "") -> str:
    """A static accuracy-vs-K line chart as a standalone SVG document."""
    if not curves or not any(c.points for c in curves):
        raise MetricsError("nothing to plot")
    width, height, margin = 640, 420, 50
    ks = sorted({k for c in curves for k in c.points})
    k_min, k_max = ks[0], ks[-1]
    span = max(k_max - k_min, 1)

    def x_at(k: int) -> float:
        return margin + (k - k_min) / span * (width - 2 * margin)

    def y_at(acc: float) -> float:
        return height - margin - acc / 100.0 * (height - 2 * margin)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" '
        'stroke="black"/>',
    ]
    for k in ks:
        parts.append(
            f'<text x="{x_at(k):.1f}" y="{height - margin + 18}" text-anchor="middle" '
            f'font-size="11">{k}</text>'
        )
    for acc in range(0, 101, 20):
        parts.append(
            f'<text x="{margin - 8}" y="{y_at(acc) + 4:.1f}" text-anchor="end" '
            f'font-size="11">{acc}</text>'
        )
    for i, curve in enumerate(curves):
        color = palette[i % len(palette)]
        pts = " ".join(
            f"{x_at(k):.1f},{y_at(curve.points[k]):.1f}" for k in sorted(curve.points)
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{width - margin + 4}" y="{margin + 16 * i + 10}" font-size="11" '
            f'fill="{color}">{curve.label or f"curve {i + 1}"}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
