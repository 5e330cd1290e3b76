"""Batch evaluation over a directory of episode files."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence

from .config import EngineConfig
from .episode import (
    EngineBackends,
    EpisodeResult,
    EpisodeSpec,
    Outcome,
    load_episode,
    run_episode,
)
from .metrics import MetricsReport, build_report

CSV_COLUMNS = (
    "episode",
    "success",
    "outcome",
    "path_length_m",
    "shortest_path_m",
    "spl",
    "questions_asked",
    "actions_taken",
    "abort_reason",
)


def load_episode_dir(directory: str | Path) -> list[EpisodeSpec]:
    directory = Path(directory)
    paths = sorted(directory.glob("*.json"))
    if not paths:
        raise ValueError(f"no episode files in {directory}")
    return [load_episode(p) for p in paths]


def run_batch(
    episode_dir: str | Path,
    config: EngineConfig,
    backends: EngineBackends,
    out_dir: str | Path | None = None,
) -> MetricsReport:
    """Run every episode; failures become Aborted results, never batch crashes."""
    specs = load_episode_dir(episode_dir)
    results: list[EpisodeResult] = []
    for spec in specs:
        try:
            results.append(run_episode(spec, config, backends))
        except Exception as exc:  # noqa: BLE001 - isolate per-episode failures
            results.append(
                EpisodeResult(
                    episode_id=spec.episode_id,
                    success=False,
                    outcome=Outcome.ABORTED,
                    path_length_m=0.0,
                    questions_asked=0,
                    actions_taken=0,
                    transcript=({"type": "error", "message": str(exc)},),
                    abort_reason=f"crash: {exc}",
                )
            )
    report = build_report(results, specs)
    if out_dir is not None:
        write_reports(report, results, config, Path(out_dir))
    return report


def render_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in report.rows:
        writer.writerow({k: row[k] for k in CSV_COLUMNS})
    return buf.getvalue()


def write_reports(
    report: MetricsReport,
    results: Sequence[EpisodeResult],
    config: EngineConfig,
    out_dir: Path,
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"config_hash": config.hash(), "config": config.to_dict(), **report.to_dict()}
    (out_dir / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    (out_dir / "report.csv").write_text(render_csv(report))
    transcripts = out_dir / "transcripts"
    transcripts.mkdir(exist_ok=True)
    for result in results:
        (transcripts / f"{result.episode_id}.jsonl").write_text(result.transcript_jsonl())
