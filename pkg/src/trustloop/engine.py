"""Round loop: updates -> signals -> trust -> analysis -> action -> aggregation.

run_scenario executes one seeded federation run and writes three artifacts
into the run directory: metrics.jsonl (one record per round), decisions.jsonl
(controller log), and summary.json. All outputs are deterministic functions
of (config, seed, controller kind).
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from trustloop.aggregation import AggregationReport, aggregate, no_trust_aggregate
from trustloop.config import ScenarioConfig
from trustloop.controller import (
    KIND_NONE,
    KIND_ORACLE,
    ControllerDecision,
    make_controller,
)
from trustloop.federation import FederationState, evaluate_global
from trustloop.mcdm import init_trust_table, score_round
from trustloop.signals import SignalTracker, SystemIndicators, compute_trust_dispersion
from trustloop.task import generate_task

METRICS_SCHEMA_VERSION = 1


@dataclass
class RunResult:
    run_dir: Path | None
    config: ScenarioConfig
    seed: int
    controller: str
    adversary_ids: list[int]
    rounds: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def run_name(config: ScenarioConfig, controller: str, seed: int) -> str:
    return f"{config.name}_{controller}_seed{seed}"


def _precision_recall(
    omitted: list[int], participants: list[int], adversaries: set[int]
) -> tuple[float | None, float | None]:
    omitted_set = set(omitted)
    true_hits = len(omitted_set & adversaries)
    precision = true_hits / len(omitted_set) if omitted_set else None
    present_adv = adversaries & set(participants)
    recall = len(omitted_set & present_adv) / len(present_adv) if present_adv else None
    return precision, recall


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set)):
        items = sorted(value) if isinstance(value, set) else list(value)
        return [_jsonable(v) for v in items]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


def run_scenario(
    config: ScenarioConfig,
    seed: int,
    controller_kind: str | None = None,
    out_dir: str | Path | None = None,
) -> RunResult:
    """Execute one run; returns in-memory results and (optionally) writes
    the run artifacts under out_dir/<scenario>_<controller>_seed<seed>/."""
    config.validate()
    kind = controller_kind or config.controller

    profiles = config.client_profiles()
    task = generate_task(config.task, config.clients_count, seed)
    federation = FederationState(task=task, profiles=profiles, train=config.train, master_seed=seed)
    adversary_ids = federation.adversary_ids

    tracker = SignalTracker(config.clients_count, config.signals)
    trust = init_trust_table([p.client_id for p in profiles], config.trust_init)
    controller = make_controller(kind, config.controller_params, adversary_ids)

    result = RunResult(
        run_dir=None,
        config=config,
        seed=seed,
        controller=kind,
        adversary_ids=adversary_ids,
    )
    decisions: list[ControllerDecision] = []

    # Baseline loss of the untrained broadcast model anchors the loss trend.
    loss, accuracy = evaluate_global(federation.model, task.holdout, task.num_classes)
    tracker.record_loss(loss)

    excluded_now: set[int] = set()
    for round_index in range(config.rounds):
        skip = frozenset(excluded_now) if config.skip_excluded_uploads else frozenset()
        updates, mask, messages, payload_bytes = federation.run_round(round_index, skip)
        participants = [u.client_id for u in updates]

        signals = tracker.observe_round(round_index, updates, mask)
        score_round(signals, trust, controller.agent.alpha, round_index)

        participant_trust = [trust[cid].smoothed_trust for cid in participants]
        indicators = SystemIndicators(
            round=round_index,
            loss_trend=tracker.loss_trend(),
            trust_dispersion=compute_trust_dispersion(participant_trust) if participants else 0.0,
        )

        latest_loss = tracker.loss_history[-1]
        decision = controller.step(round_index, trust, signals, indicators, latest_loss)
        decisions.append(decision)

        flip_events = 0
        for cid in sorted(decision.exclude):
            trust[cid].set_excluded(True, round_index)
            flip_events += 1
        for cid in sorted(decision.reinstate):
            trust[cid].set_excluded(False, round_index)
            flip_events += 1
        excluded_now = {cid for cid, rec in trust.items() if rec.excluded}

        stalled = not updates
        if updates:
            if kind == KIND_NONE:
                new_model = no_trust_aggregate(federation.model, updates)
                report = AggregationReport(
                    round=round_index,
                    included_ids=sorted(participants),
                    omitted_ids=[],
                    weights_used={
                        u.client_id: u.num_samples / sum(x.num_samples for x in updates)
                        for u in updates
                    },
                    messages=messages,
                    payload_bytes=payload_bytes,
                )
            elif kind == KIND_ORACLE:
                kept = [u for u in updates if u.client_id not in excluded_now]
                if kept:
                    new_model = no_trust_aggregate(federation.model, kept)
                else:
                    new_model = federation.model.copy()
                    new_model.round += 1
                total = sum(u.num_samples for u in kept)
                report = AggregationReport(
                    round=round_index,
                    included_ids=sorted(u.client_id for u in kept),
                    omitted_ids=sorted(set(participants) - {u.client_id for u in kept}),
                    weights_used={u.client_id: u.num_samples / total for u in kept} if kept else {},
                    messages=messages,
                    payload_bytes=payload_bytes,
                    stalled=not kept,
                )
            else:
                new_model, report = aggregate(
                    federation.model,
                    updates,
                    trust,
                    decision.new_theta,
                    excluded_now,
                    messages=messages,
                    payload_bytes=payload_bytes,
                )
            federation.model = new_model
            stalled = report.stalled
        else:
            federation.model.round += 1
            report = AggregationReport(
                round=round_index,
                included_ids=[],
                omitted_ids=[],
                weights_used={},
                messages=messages,
                payload_bytes=payload_bytes,
                stalled=True,
            )

        loss, accuracy = evaluate_global(federation.model, task.holdout, task.num_classes)
        tracker.record_loss(loss)

        precision, recall = _precision_recall(report.omitted_ids, participants, set(adversary_ids))
        for cid in participants:
            trust[cid].trust_history.append(trust[cid].smoothed_trust)

        result.rounds.append(
            {
                "schema_version": METRICS_SCHEMA_VERSION,
                "round": round_index,
                "global_loss": loss,
                "global_accuracy": accuracy,
                "agent_state": decision.state_after,
                "theta": decision.new_theta,
                "alpha": decision.new_alpha,
                "trust": {str(cid): trust[cid].smoothed_trust for cid in sorted(trust)},
                "raw_trust": {str(cid): trust[cid].raw_trust for cid in sorted(trust)},
                "participants": sorted(participants),
                "excluded_ids": sorted(excluded_now),
                "newly_excluded": sorted(decision.exclude),
                "reinstated": sorted(decision.reinstate),
                "flip_events": flip_events,
                "included_ids": report.included_ids,
                "omitted_ids": report.omitted_ids,
                "omission_precision": precision,
                "omission_recall": recall,
                "messages": messages,
                "payload_bytes": payload_bytes,
                "stalled": stalled,
                "loss_trend": indicators.loss_trend,
                "trust_dispersion": indicators.trust_dispersion,
                "rationale": decision.rationale,
            }
        )

    result.summary = _build_summary(result, trust, federation)
    if out_dir is not None:
        result.run_dir = write_artifacts(result, decisions, Path(out_dir))
    return result


def _build_summary(result: RunResult, trust, federation: FederationState) -> dict:
    rounds = result.rounds
    final = rounds[-1]
    adversaries = set(result.adversary_ids)
    benign = [cid for cid in sorted(trust) if cid not in adversaries]

    def mean_trust(ids):
        return float(np.mean([trust[cid].smoothed_trust for cid in ids])) if ids else None

    first_correct_exclusion = None
    for row in rounds:
        if set(row["newly_excluded"]) & adversaries:
            first_correct_exclusion = row["round"]
            break

    return {
        "schema_version": METRICS_SCHEMA_VERSION,
        "scenario": result.config.name,
        "controller": result.controller,
        "seed": result.seed,
        "rounds": len(rounds),
        "clients": result.config.clients_count,
        "adversary_ids": sorted(adversaries),
        "final_loss": final["global_loss"],
        "final_accuracy": final["global_accuracy"],
        "total_flips": sum(rec.flip_count for rec in trust.values()),
        "flips_per_client": {str(cid): trust[cid].flip_count for cid in sorted(trust)},
        "mean_trust_adversarial": mean_trust(sorted(adversaries)),
        "mean_trust_benign": mean_trust(benign),
        "final_excluded_ids": final["excluded_ids"],
        "final_omission_precision": final["omission_precision"],
        "final_omission_recall": final["omission_recall"],
        "first_correct_exclusion_round": first_correct_exclusion,
        "total_messages": federation.messages_total,
        "total_payload_bytes": federation.payload_bytes_total,
        "stalled_rounds": sum(1 for row in rounds if row["stalled"]),
    }


def write_artifacts(result: RunResult, decisions: list[ControllerDecision], out_dir: Path) -> Path:
    run_dir = out_dir / run_name(result.config, result.controller, result.seed)
    run_dir.mkdir(parents=True, exist_ok=True)

    with open(run_dir / "metrics.jsonl", "w") as fh:
        for row in result.rounds:
            fh.write(json.dumps(_jsonable(row), sort_keys=True) + "\n")

    with open(run_dir / "decisions.jsonl", "w") as fh:
        for d in decisions:
            record = {
                "round": d.round,
                "state": d.state_after,
                "theta": d.new_theta,
                "alpha": d.new_alpha,
                "excluded": sorted(d.exclude),
                "reinstated": sorted(d.reinstate),
                "rationale": d.rationale,
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    with open(run_dir / "summary.json", "w") as fh:
        json.dump(_jsonable(result.summary), fh, sort_keys=True, indent=2)
        fh.write("\n")
    return run_dir
