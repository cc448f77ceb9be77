"""Offline report aggregates, computed from the persisted CSV archive alone."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sinks import read_csv


@dataclass
class ReportSummary:
    n_rounds: int
    per_round_max_s2c: list[tuple[int, float]]
    duration_stats: dict | None  # min/p50/p90/max over round durations
    per_client_phases: dict[str, dict[str, float]]  # client -> phase means
    trajectory: list[tuple[int, float, float]]  # (round, loss, accuracy)


def summarize(csv_dir) -> ReportSummary:
    """Aggregate rounds.csv into the report figures.

    Percentiles use linear interpolation over the sorted round durations.
    Pure function of the CSV bytes; raises FileNotFoundError when the
    archive is absent and SchemaError on header mismatch.
    """
    rows = read_csv(Path(csv_dir) / "rounds.csv")
    by_round: dict[int, list[dict]] = {}
    for row in rows:
        by_round.setdefault(int(row["round"]), []).append(row)

    per_round_max_s2c = []
    durations = []
    trajectory = []
    for rnd in sorted(by_round):
        group = by_round[rnd]
        per_round_max_s2c.append((rnd, max(float(r["s2c_s"]) for r in group)))
        durations.append(float(group[0]["round_duration_s"]))
        trajectory.append((rnd, float(group[0]["global_loss"]), float(group[0]["global_accuracy"])))

    duration_stats = None
    if durations:
        arr = np.asarray(durations)
        duration_stats = {
            "min": float(arr.min()),
            "p50": float(np.percentile(arr, 50)),
            "p90": float(np.percentile(arr, 90)),
            "max": float(arr.max()),
        }

    clients: dict[str, dict[str, list[float]]] = {}
    for row in rows:
        acc = clients.setdefault(row["client_id"], {"s2c_s": [], "compute_s": [], "c2s_s": []})
        for phase in ("s2c_s", "compute_s", "c2s_s"):
            acc[phase].append(float(row[phase]))
    per_client_phases = {
        cid: {phase: float(np.mean(vals)) for phase, vals in phases.items()}
        for cid, phases in sorted(clients.items())
    }

    return ReportSummary(
        n_rounds=len(by_round),
        per_round_max_s2c=per_round_max_s2c,
        duration_stats=duration_stats,
        per_client_phases=per_client_phases,
        trajectory=trajectory,
    )


def summary_to_dict(summary: ReportSummary) -> dict:
    return {
        "n_rounds": summary.n_rounds,
        "per_round_max_s2c": [{"round": r, "max_s2c_s": v} for r, v in summary.per_round_max_s2c],
        "round_duration_s": summary.duration_stats,
        "per_client_phase_means": summary.per_client_phases,
        "trajectory": [
            {"round": r, "global_loss": l, "global_accuracy": a} for r, l, a in summary.trajectory
        ],
    }


def render_text(summary: ReportSummary) -> str:
    lines = [f"rounds: {summary.n_rounds}"]
    if summary.n_rounds == 0:
        lines.append("empty run: no round records")
        return "\n".join(lines) + "\n"

    stats = summary.duration_stats
    lines.append(
        "round duration [s]  min={min:.6g}  p50={p50:.6g}  p90={p90:.6g}  max={max:.6g}".format(**stats)
    )
    lines.append("")
    lines.append(f"{'round':>5}  {'max_s2c_s':>12}  {'loss':>10}  {'accuracy':>8}")
    s2c = dict(summary.per_round_max_s2c)
    for rnd, loss, acc in summary.trajectory:
        lines.append(f"{rnd:>5}  {s2c[rnd]:>12.6g}  {loss:>10.6g}  {acc:>8.4f}")
    lines.append("")
    lines.append(f"{'client':>8}  {'mean_s2c_s':>12}  {'mean_compute_s':>14}  {'mean_c2s_s':>12}")
    for cid, phases in summary.per_client_phases.items():
        lines.append(
            f"{cid:>8}  {phases['s2c_s']:>12.6g}  {phases['compute_s']:>14.6g}  {phases['c2s_s']:>12.6g}"
        )
    return "\n".join(lines) + "\n"
