"""Console, JSON and CSV emission of evaluation results.

Usage from CLI:
    reporter = EvaluationReporter()
    reporter.emit(reports=reports, summaries=aggregate_reports(reports))
    write_report_json(out / "report.json", reports, summaries, loader=loader)
    write_report_csv(out / "report.csv", reports)
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import TYPE_CHECKING, Any, Optional, Sequence

import click

from .evaluation import CorpusSummary, EvalReport, SweepRow, TimingReport

if TYPE_CHECKING:
    from .data_loader import DataLoader

CSV_METRICS = ("precision", "recall", "f1", "macro_f1", "tp", "fp", "fn", "mean_seconds")


class EvaluationReporter:
    """Console summary of per-user reports, corpus aggregates, sweeps and timings."""

    def __init__(self, *, use_colors: bool = True):
        self.use_colors = use_colors

    # ---- public ----
    def emit(
        self,
        *,
        reports: Sequence[EvalReport] = (),
        summaries: Sequence[CorpusSummary] = (),
        sweep: Sequence[SweepRow] = (),
        timing: Optional[TimingReport] = None,
    ) -> None:
        if reports:
            self._print_header("✅ Evaluation Complete!", color="green", bold=True)
            for r in reports:
                if r.skipped is not None:
                    self._print_line(f"   • {r.user_id:<8} {r.method:<6} skipped: {r.skipped}", color="yellow")
                    continue
                c = r.confusion
                self._println(
                    f"   • {r.user_id:<8} {r.method:<6} {r.mode:<8} "
                    f"P={r.precision:.3f} R={r.recall:.3f} F1={r.f1:.3f} macro={r.macro_f1:.3f} "
                    f"(tp={c.tp} fp={c.fp} fn={c.fn}, {len(r.sessions)} session(s))"
                )

        if summaries:
            self._println()
            self._print_header("📊 Corpus summary", color="cyan", bold=True)
            for s in summaries:
                self._print_kv(
                    f"   {s.method} [{s.mode}]",
                    f"micro F1={s.micro_f1:.3f}  macro F1={s.macro_f1:.3f}  users={s.users}"
                    + (f"  skipped={s.skipped}" if s.skipped else ""),
                    strong=True,
                )

        if sweep:
            self._println()
            self._print_header("📍 Stay-point extraction", color="cyan", bold=True)
            for row in sweep:
                c = row.confusion
                self._println(
                    f"   θ=({row.params.theta_dist:g} m, {row.params.theta_time:g} s)  "
                    f"PRE={c.precision:.3f} REC={c.recall:.3f} F1={c.f1:.3f}  tp={c.tp} fp={c.fp} fn={c.fn}"
                )

        if timing is not None:
            self._println()
            self._print_header(f"⏱️ Solve time ({timing.backend})", color="cyan", bold=True)
            for n_sp, secs in sorted(timing.buckets.items()):
                self._println(f"   {n_sp:>4} stay-points: {secs:.4f}s mean over {timing.counts.get(n_sp, 0)}")
            self._print_kv("   Resident memory", f"{timing.rss_mb:.1f} MB")

    # ---- private ----
    def _print_header(self, text: str, *, color: Optional[str] = None, bold: bool = False) -> None:
        if self.use_colors and color:
            click.secho(text, fg=color, bold=bold)
        else:
            self._println(text)

    def _print_kv(self, k: str, v: str, *, strong: bool = False) -> None:
        line = f"{k}: {v}"
        if self.use_colors and strong:
            click.secho(line, fg="green", bold=True)
        else:
            self._println(line)

    def _print_line(self, text: str, *, color: Optional[str] = None) -> None:
        if self.use_colors and color:
            click.secho(text, fg=color)
        else:
            self._println(text)

    def _println(self, text: str = "") -> None:
        click.echo(text)


# ----------------------------- files -----------------------------

def report_document(
    reports: Sequence[EvalReport],
    summaries: Sequence[CorpusSummary] = (),
    *,
    sweep: Sequence[SweepRow] = (),
    timing: Optional[TimingReport] = None,
    include_timing: bool = True,
) -> dict[str, Any]:
    """JSON document; `include_timing=False` leaves out wall-clock figures so reruns compare byte for byte."""
    doc: dict[str, Any] = {
        "users": [r.to_dict(include_timing=include_timing) for r in reports],
        "summary": [s.to_dict() for s in summaries],
    }
    if sweep:
        doc["extraction"] = [row.to_dict() for row in sweep]
    if timing is not None and include_timing:
        doc["timing"] = timing.to_dict()
    return doc


def report_rows(reports: Sequence[EvalReport], *, include_timing: bool = True) -> list[dict[str, Any]]:
    """Flat rows: one per user × method × metric."""
    rows: list[dict[str, Any]] = []
    for r in reports:
        if r.skipped is not None:
            rows.append({"user": r.user_id, "method": r.method, "mode": r.mode, "metric": "skipped", "value": r.skipped})
            continue
        c = r.confusion
        values = {
            "precision": r.precision,
            "recall": r.recall,
            "f1": r.f1,
            "macro_f1": r.macro_f1,
            "tp": c.tp,
            "fp": c.fp,
            "fn": c.fn,
            "mean_seconds": r.mean_seconds,
        }
        for metric in CSV_METRICS:
            if metric == "mean_seconds" and not include_timing:
                continue
            rows.append({"user": r.user_id, "method": r.method, "mode": r.mode, "metric": metric, "value": values[metric]})
    return rows


def write_report_csv(
    file_path: str | Path, reports: Sequence[EvalReport], *, loader: "DataLoader", include_timing: bool = True
) -> Path:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["user", "method", "mode", "metric", "value"], lineterminator="\n")
    writer.writeheader()
    writer.writerows(report_rows(reports, include_timing=include_timing))
    return loader.write_text(file_path, buf.getvalue())


def write_report_json(
    file_path: str | Path,
    reports: Sequence[EvalReport],
    summaries: Sequence[CorpusSummary] = (),
    *,
    loader: "DataLoader",
    sweep: Sequence[SweepRow] = (),
    timing: Optional[TimingReport] = None,
    include_timing: bool = True,
) -> Path:
    doc = report_document(reports, summaries, sweep=sweep, timing=timing, include_timing=include_timing)
    return loader.write_json(file_path, doc)
