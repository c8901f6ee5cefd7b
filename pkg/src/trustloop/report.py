"""Post-run reporting: summary tables (CSV) and rendered figures (PNG).

summarize() consumes run artifacts (metrics.jsonl / summary.json) from one or
more run directories and writes a report/ folder next to them containing
runs.csv, clients.csv, and matplotlib figures. Suites additionally get
controller-comparison figures keyed off suite_runs.csv.
"""

import csv
import json
import statistics
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from trustloop.errors import ConfigError

STATE_COLORS = {"Normal": "#d8f0d8", "Degraded": "#f6c8c8", "Stabilising": "#f7ecc4"}

RUN_SUMMARY_FIELDS = [
    "run",
    "scenario",
    "controller",
    "seed",
    "rounds",
    "final_loss",
    "final_accuracy",
    "total_flips",
    "mean_trust_adversarial",
    "mean_trust_benign",
    "final_omission_precision",
    "final_omission_recall",
    "first_correct_exclusion_round",
    "total_messages",
    "total_payload_bytes",
    "stalled_rounds",
]

CLIENT_FIELDS = [
    "run",
    "client_id",
    "adversarial",
    "mean_trust",
    "trust_std",
    "flip_count",
    "excluded_final",
]


def load_run(run_dir: Path) -> dict:
    metrics_path = run_dir / "metrics.jsonl"
    summary_path = run_dir / "summary.json"
    if not metrics_path.is_file() or not summary_path.is_file():
        raise ConfigError(str(run_dir), "not a run directory (missing metrics.jsonl/summary.json)")
    try:
        rounds = [json.loads(line) for line in metrics_path.read_text().splitlines() if line]
        summary = json.loads(summary_path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(str(run_dir), f"corrupt run artifact: {exc}") from exc
    if not rounds:
        raise ConfigError(str(run_dir), "metrics.jsonl is empty")
    return {"dir": run_dir, "rounds": rounds, "summary": summary}


def discover_runs(root: Path) -> list[dict]:
    root = Path(root)
    if (root / "metrics.jsonl").is_file():
        return [load_run(root)]
    runs = [load_run(p) for p in sorted(root.iterdir()) if (p / "metrics.jsonl").is_file()] if root.is_dir() else []
    if not runs:
        raise ConfigError(str(root), "no run artifacts found")
    return runs


def _client_stats(run: dict) -> list[dict]:
    rounds = run["rounds"]
    summary = run["summary"]
    adversaries = set(summary["adversary_ids"])
    flips = summary["flips_per_client"]
    final_excluded = set(rounds[-1]["excluded_ids"])
    stats = []
    for cid_str in sorted(rounds[0]["trust"], key=int):
        trajectory = [row["trust"][cid_str] for row in rounds]
        cid = int(cid_str)
        mean = statistics.fmean(trajectory)
        std = (statistics.fmean([(t - mean) ** 2 for t in trajectory])) ** 0.5
        stats.append(
            {
                "client_id": cid,
                "adversarial": cid in adversaries,
                "mean_trust": mean,
                "trust_std": std,
                "flip_count": flips[cid_str],
                "excluded_final": cid in final_excluded,
            }
        )
    return stats


def render_run_figures(run: dict, fig_dir: Path) -> list[Path]:
    fig_dir.mkdir(parents=True, exist_ok=True)
    rounds = run["rounds"]
    summary = run["summary"]
    xs = [row["round"] for row in rounds]
    name = run["dir"].name
    written = []

    def _state_bands(ax):
        for row in rounds:
            ax.axvspan(row["round"] - 0.5, row["round"] + 0.5,
                       color=STATE_COLORS.get(row["agent_state"], "white"),
                       lw=0, alpha=0.6, zorder=0)

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    _state_bands(ax1)
    ax1.plot(xs, [r["global_loss"] for r in rounds], color="tab:red", label="global loss")
    ax1.set_ylabel("loss")
    ax1.legend(loc="upper right")
    _state_bands(ax2)
    ax2.plot(xs, [r["global_accuracy"] for r in rounds], color="tab:blue", label="global accuracy")
    ax2.set_ylabel("accuracy")
    ax2.set_xlabel("round")
    ax2.set_ylim(0, 1)
    ax2.legend(loc="lower right")
    fig.suptitle(f"{name}: training curves (background = controller state)")
    path = fig_dir / "training_curves.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    adversaries = {str(cid) for cid in summary["adversary_ids"]}
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for cid_str in sorted(rounds[0]["trust"], key=int):
        ys = [row["trust"][cid_str] for row in rounds]
        if cid_str in adversaries:
            ax.plot(xs, ys, color="tab:red", lw=1.4, alpha=0.9)
        else:
            ax.plot(xs, ys, color="0.55", lw=0.9, alpha=0.7)
    ax.axhline(rounds[-1]["theta"], color="tab:purple", ls="--", lw=1, label="final theta")
    ax.set_xlabel("round")
    ax.set_ylabel("smoothed trust")
    ax.set_ylim(0, 1)
    ax.set_title(f"{name}: trust trajectories (red = adversarial)")
    ax.legend(loc="upper right")
    path = fig_dir / "trust_trajectories.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    _state_bands(ax1)
    ax1.plot(xs, [r["theta"] for r in rounds], color="tab:purple", label="theta")
    ax1.plot(xs, [r["alpha"] for r in rounds], color="tab:green", label="alpha")
    ax1.set_ylabel("controller parameters")
    ax1.legend(loc="upper right")
    _state_bands(ax2)
    ax2.step(xs, [len(r["excluded_ids"]) for r in rounds], color="tab:red", where="mid", label="excluded")
    ax2.step(xs, [len(r["omitted_ids"]) for r in rounds], color="tab:orange", where="mid",
             ls="--", label="omitted at aggregation")
    ax2.set_xlabel("round")
    ax2.set_ylabel("clients")
    ax2.legend(loc="upper right")
    fig.suptitle(f"{name}: controller actions")
    path = fig_dir / "controller_actions.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written


def render_suite_figures(suite_csv: Path, fig_dir: Path) -> list[Path]:
    fig_dir.mkdir(parents=True, exist_ok=True)
    with open(suite_csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return []

    # Final-round rows only, grouped by (controller, intensity).
    last_round: dict[tuple[str, int, float], dict] = {}
    for row in rows:
        key = (row["controller"], int(row["seed"]), float(row["intensity"]))
        if key not in last_round or int(row["round"]) > int(last_round[key]["round"]):
            last_round[key] = row

    cells: dict[tuple[str, float], list[float]] = {}
    flips: dict[tuple[str, float], list[int]] = {}
    for (controller, _seed, intensity), row in last_round.items():
        cells.setdefault((controller, intensity), []).append(float(row["global_accuracy"]))
    for row in rows:
        key = (row["controller"], float(row["intensity"]))
        flips.setdefault(key, []).append(int(row["flip_events"]))

    controllers = sorted({c for c, _ in cells})
    intensities = sorted({i for _, i in cells})
    written = []

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for controller in controllers:
        ys = [statistics.median(cells[(controller, i)]) for i in intensities if (controller, i) in cells]
        xs = [i for i in intensities if (controller, i) in cells]
        ax.plot(xs, ys, marker="o", label=controller)
    ax.set_xlabel("adversarial client fraction")
    ax.set_ylabel("median final accuracy")
    ax.set_ylim(0, 1)
    ax.set_title("Global model performance vs attack intensity")
    ax.legend()
    path = fig_dir / "accuracy_vs_intensity.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    width = 0.8 / max(len(intensities), 1)
    for k, intensity in enumerate(intensities):
        totals = [sum(flips.get((c, intensity), [0])) for c in controllers]
        ax.bar([j + k * width for j in range(len(controllers))], totals, width=width,
               label=f"intensity {intensity:g}")
    ax.set_xticks([j + width * (len(intensities) - 1) / 2 for j in range(len(controllers))])
    ax.set_xticklabels(controllers)
    ax.set_ylabel("total exclusion flips (all seeds)")
    ax.set_title("Exclusion oscillation by controller")
    ax.legend()
    path = fig_dir / "flips_by_controller.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written


def summarize(in_dir: str | Path, render: bool = True) -> dict:
    """Summarize run artifacts under in_dir into in_dir/report/ (CSV + figures)."""
    root = Path(in_dir)
    runs = discover_runs(root)
    report_dir = root / "report"
    report_dir.mkdir(parents=True, exist_ok=True)

    runs_csv = report_dir / "runs.csv"
    with open(runs_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUN_SUMMARY_FIELDS)
        for run in runs:
            s = run["summary"]
            writer.writerow(
                [
                    run["dir"].name,
                    s["scenario"],
                    s["controller"],
                    s["seed"],
                    s["rounds"],
                    repr(s["final_loss"]),
                    repr(s["final_accuracy"]),
                    s["total_flips"],
                    "" if s["mean_trust_adversarial"] is None else repr(s["mean_trust_adversarial"]),
                    "" if s["mean_trust_benign"] is None else repr(s["mean_trust_benign"]),
                    "" if s["final_omission_precision"] is None else repr(s["final_omission_precision"]),
                    "" if s["final_omission_recall"] is None else repr(s["final_omission_recall"]),
                    "" if s["first_correct_exclusion_round"] is None else s["first_correct_exclusion_round"],
                    s["total_messages"],
                    s["total_payload_bytes"],
                    s["stalled_rounds"],
                ]
            )

    clients_csv = report_dir / "clients.csv"
    with open(clients_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CLIENT_FIELDS)
        for run in runs:
            for stat in _client_stats(run):
                writer.writerow(
                    [
                        run["dir"].name,
                        stat["client_id"],
                        int(stat["adversarial"]),
                        repr(stat["mean_trust"]),
                        repr(stat["trust_std"]),
                        stat["flip_count"],
                        int(stat["excluded_final"]),
                    ]
                )

    figures: list[Path] = []
    if render:
        for run in runs:
            figures.extend(render_run_figures(run, report_dir / "figures" / run["dir"].name))
        suite_csv = root / "suite_runs.csv"
        if suite_csv.is_file():
            figures.extend(render_suite_figures(suite_csv, report_dir / "figures"))

    return {"runs": runs, "paths": {"runs_csv": runs_csv, "clients_csv": clients_csv}, "figures": figures}
