"""Trust-aware aggregation of client updates into the next global model."""

from dataclasses import dataclass, field

import numpy as np

from trustloop.errors import TrustError
from trustloop.federation import ClientUpdate, GlobalModel
from trustloop.mcdm import TrustRecord

WEIGHT_SUM_TOL = 1e-9


@dataclass
class AggregationReport:
    round: int
    included_ids: list[int]
    omitted_ids: list[int]
    weights_used: dict[int, float]
    messages: int = 0
    payload_bytes: int = 0
    stalled: bool = False


def _apply_weighted(model: GlobalModel, updates: list[ClientUpdate], weights: dict[int, float]) -> GlobalModel:
    # Accumulate in ascending client_id order for bit-exact determinism.
    delta = np.zeros_like(model.parameters)
    for u in sorted(updates, key=lambda u: u.client_id):
        delta += weights[u.client_id] * u.delta
    return GlobalModel(parameters=model.parameters + delta, round=model.round + 1)


def aggregate(
    model: GlobalModel,
    updates: list[ClientUpdate],
    trust: dict[int, TrustRecord],
    theta: float,
    excluded: set[int],
    messages: int = 0,
    payload_bytes: int = 0,
) -> tuple[GlobalModel, AggregationReport]:
    """Weighted aggregation over trusted participants.

    A participant contributes iff it is not excluded and its smoothed trust
    is at least theta; contributions are weighted by trust * sample count,
    normalized over the included set. If nobody qualifies the model is kept
    unchanged and the report flags a stalled round.
    """
    if not updates:
        raise TrustError("aggregate requires at least one update")

    included = [
        u for u in updates
        if u.client_id not in excluded and trust[u.client_id].smoothed_trust >= theta
    ]
    included_set = {u.client_id for u in included}
    omitted_ids = sorted(u.client_id for u in updates if u.client_id not in included_set)

    if not included:
        report = AggregationReport(
            round=model.round,
            included_ids=[],
            omitted_ids=omitted_ids,
            weights_used={},
            messages=messages,
            payload_bytes=payload_bytes,
            stalled=True,
        )
        return GlobalModel(parameters=model.parameters.copy(), round=model.round + 1), report

    raw = {u.client_id: trust[u.client_id].smoothed_trust * u.num_samples for u in included}
    total = sum(raw.values())
    if total <= 0:
        # Every included trust is 0 but above theta (only possible at theta=0):
        # fall back to sample-count weights.
        raw = {u.client_id: float(u.num_samples) for u in included}
        total = sum(raw.values())
    weights = {cid: w / total for cid, w in raw.items()}
    assert abs(sum(weights.values()) - 1.0) <= WEIGHT_SUM_TOL

    new_model = _apply_weighted(model, included, weights)
    report = AggregationReport(
        round=model.round,
        included_ids=sorted(weights),
        omitted_ids=omitted_ids,
        weights_used=weights,
        messages=messages,
        payload_bytes=payload_bytes,
    )
    return new_model, report


def no_trust_aggregate(model: GlobalModel, updates: list[ClientUpdate]) -> GlobalModel:
    """Classic sample-count-weighted averaging, ignoring trust entirely."""
    if not updates:
        raise TrustError("aggregation requires at least one update")
    total = sum(u.num_samples for u in updates)
    weights = {u.client_id: u.num_samples / total for u in updates}
    return _apply_weighted(model, updates, weights)
