"""Comparison suites: controllers x seeds x attack intensities.

Emits a tidy long-format CSV (one row per run per round), a per-cell median
summary CSV, and comparison figures. Rows are written in a fixed order
(intensity, controller, seed, round) so suite outputs are byte-reproducible.
"""

import csv
import statistics
from pathlib import Path

from trustloop.config import ScenarioConfig, apply_attack
from trustloop.engine import RunResult, run_scenario

RUN_FIELDS = [
    "scenario",
    "controller",
    "seed",
    "intensity",
    "round",
    "global_loss",
    "global_accuracy",
    "agent_state",
    "theta",
    "alpha",
    "n_excluded",
    "n_omitted",
    "flip_events",
    "omission_precision",
    "omission_recall",
    "messages",
    "payload_bytes",
]

RUN_SUMMARY_FIELDS = [
    "scenario",
    "controller",
    "seed",
    "intensity",
    "final_accuracy",
    "final_loss",
    "total_flips",
    "final_omission_precision",
    "final_omission_recall",
    "first_correct_exclusion_round",
    "total_messages",
    "total_payload_bytes",
    "stalled_rounds",
]

SUMMARY_FIELDS = [
    "scenario",
    "controller",
    "intensity",
    "n_seeds",
    "median_final_accuracy",
    "median_final_loss",
    "median_total_flips",
    "median_final_recall",
    "total_messages",
    "total_payload_bytes",
]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run_suite(config: ScenarioConfig, out_dir: str | Path, write_runs: bool = False) -> dict:
    """Run the full cross product and write suite_runs.csv / suite_summary.csv.

    Returns {"results": [RunResult...], "summary_rows": [...], "paths": {...}}.
    """
    config.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    results: list[tuple[float, RunResult]] = []
    for intensity in config.suite.intensities:
        scenario = apply_attack(config, intensity)
        for kind in config.suite.controllers:
            for seed in config.seeds:
                run_out = out / "runs" if write_runs else None
                results.append((intensity, run_scenario(scenario, seed, kind, run_out)))

    runs_path = out / "suite_runs.csv"
    with open(runs_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUN_FIELDS)
        for intensity, res in results:
            for row in res.rounds:
                writer.writerow(
                    [
                        _fmt(res.config.name),
                        _fmt(res.controller),
                        _fmt(res.seed),
                        _fmt(intensity),
                        _fmt(row["round"]),
                        _fmt(row["global_loss"]),
                        _fmt(row["global_accuracy"]),
                        _fmt(row["agent_state"]),
                        _fmt(row["theta"]),
                        _fmt(row["alpha"]),
                        _fmt(len(row["excluded_ids"])),
                        _fmt(len(row["omitted_ids"])),
                        _fmt(row["flip_events"]),
                        _fmt(row["omission_precision"]),
                        _fmt(row["omission_recall"]),
                        _fmt(row["messages"]),
                        _fmt(row["payload_bytes"]),
                    ]
                )

    run_summaries_path = out / "suite_run_summaries.csv"
    with open(run_summaries_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUN_SUMMARY_FIELDS)
        for intensity, res in results:
            s = res.summary
            row = dict(s, intensity=intensity, scenario=res.config.name, controller=res.controller)
            writer.writerow([_fmt(row.get(k)) for k in RUN_SUMMARY_FIELDS])

    summary_rows = summarize_suite(results)
    summary_path = out / "suite_summary.csv"
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_FIELDS)
        for row in summary_rows:
            writer.writerow([_fmt(row[k]) for k in SUMMARY_FIELDS])

    return {
        "results": [res for _, res in results],
        "intensities": [intensity for intensity, _ in results],
        "summary_rows": summary_rows,
        "paths": {"runs": runs_path, "run_summaries": run_summaries_path, "summary": summary_path},
    }


def summarize_suite(results: list[tuple[float, RunResult]]) -> list[dict]:
    cells: dict[tuple[str, float], list[RunResult]] = {}
    for intensity, res in results:
        cells.setdefault((res.controller, intensity), []).append(res)

    rows = []
    for (controller, intensity), cell in sorted(cells.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        finals = [r.summary for r in cell]
        recalls = [s["final_omission_recall"] for s in finals if s["final_omission_recall"] is not None]
        rows.append(
            {
                "scenario": cell[0].config.name,
                "controller": controller,
                "intensity": intensity,
                "n_seeds": len(cell),
                "median_final_accuracy": statistics.median(s["final_accuracy"] for s in finals),
                "median_final_loss": statistics.median(s["final_loss"] for s in finals),
                "median_total_flips": statistics.median(s["total_flips"] for s in finals),
                "median_final_recall": statistics.median(recalls) if recalls else None,
                "total_messages": sum(s["total_messages"] for s in finals),
                "total_payload_bytes": sum(s["total_payload_bytes"] for s in finals),
            }
        )
    return rows
