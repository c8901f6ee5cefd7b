"""Entropy-weighted TOPSIS trust scoring with EMA smoothing.

Each round the participants' signals form a decision matrix with three
benefit-oriented criteria, in fixed column order:

    0: mapped similarity     (s + 1) / 2            in [0, 1]
    1: participation         p                      in [0, 1]
    2: inverse volatility    1 / (1 + v)            in (0, 1]

Entropy weighting assigns more weight to criteria that disperse more across
clients; TOPSIS closeness to the ideal point is the raw trust, smoothed per
client by an EMA with factor alpha.
"""

from dataclasses import dataclass, field

import numpy as np

from trustloop.errors import TrustError
from trustloop.signals import SignalVector

CRITERIA = ("similarity", "participation", "inverse_volatility")

# Degenerate-case constants. A single participant or an all-identical matrix
# carries no ranking evidence, so raw trust falls back to neutral.
NEUTRAL_TRUST = 0.5
DEGENERATE_EPS = 1e-12


@dataclass
class DecisionMatrix:
    client_ids: list[int]  # ascending
    values: np.ndarray  # (m, len(CRITERIA)), all finite, benefit-oriented

    @property
    def m(self) -> int:
        return self.values.shape[0]


@dataclass
class TrustRecord:
    client_id: int
    raw_trust: float = NEUTRAL_TRUST
    smoothed_trust: float = NEUTRAL_TRUST
    last_round_seen: int = -1
    excluded: bool = False
    exclusion_round: int | None = None
    flip_count: int = 0
    trust_history: list[float] = field(default_factory=list)

    def set_excluded(self, excluded: bool, round_index: int) -> None:
        """Toggle exclusion status; every toggle counts one flip."""
        if excluded == self.excluded:
            return
        self.excluded = excluded
        self.exclusion_round = round_index if excluded else None
        self.flip_count += 1


def build_matrix(signals: list[SignalVector]) -> DecisionMatrix:
    """Map raw signals to the fixed benefit-oriented criteria columns."""
    if not signals:
        raise TrustError("decision matrix requires at least one participant")
    ordered = sorted(signals, key=lambda s: s.client_id)
    rows = np.array(
        [
            [(s.similarity + 1.0) / 2.0, s.participation, 1.0 / (1.0 + s.volatility)]
            for s in ordered
        ]
    )
    if not np.all(np.isfinite(rows)):
        raise TrustError("non-finite entry in decision matrix")
    return DecisionMatrix(client_ids=[s.client_id for s in ordered], values=rows)


def entropy_weights(matrix: DecisionMatrix) -> np.ndarray:
    """Entropy-method criterion weights.

    Column proportions q_ij = x_ij / sum_i x_ij; column entropy
    e_j = -(1/ln m) * sum_i q_ij ln q_ij with 0 ln 0 = 0; divergence
    d_j = 1 - e_j; weights w_j = d_j / sum d_j. A constant column (including
    all-zero) has maximum entropy and weight 0; if every column is constant
    the weights are uniform.
    """
    x = matrix.values
    m, n = x.shape
    if m < 2:
        raise TrustError("entropy weighting needs at least two participants")
    if np.any(x < 0):
        raise TrustError("entropy weighting requires non-negative entries")

    divergence = np.zeros(n)
    for j in range(n):
        total = x[:, j].sum()
        if total <= 0:
            continue  # all-zero column: no information
        q = x[:, j] / total
        nz = q > 0
        entropy = -np.sum(q[nz] * np.log(q[nz])) / np.log(m)
        divergence[j] = 1.0 - entropy

    divergence = np.maximum(divergence, 0.0)  # clip float dust at e_j ~ 1
    total_div = divergence.sum()
    if total_div <= 0:
        return np.full(n, 1.0 / n)
    return divergence / total_div


def topsis_closeness(matrix: DecisionMatrix, weights: np.ndarray) -> np.ndarray:
    """Closeness of each row to the ideal point, in [0, 1].

    Columns are vector-normalized (a zero-norm column stays zero) and scaled
    by the weights. With every criterion benefit-oriented, the ideal point is
    the column-wise max and the anti-ideal the column-wise min; closeness is
    D- / (D+ + D-), with 0.5 when both distances vanish.
    """
    if abs(float(np.sum(weights)) - 1.0) > 1e-9:
        raise TrustError("weights must sum to 1")
    x = matrix.values
    norms = np.linalg.norm(x, axis=0)
    scaled = np.divide(x, norms, out=np.zeros_like(x), where=norms > 0) * weights

    ideal = scaled.max(axis=0)
    anti_ideal = scaled.min(axis=0)
    d_plus = np.linalg.norm(scaled - ideal, axis=1)
    d_minus = np.linalg.norm(scaled - anti_ideal, axis=1)

    total = d_plus + d_minus
    closeness = np.full(matrix.m, NEUTRAL_TRUST)
    ok = total >= DEGENERATE_EPS
    closeness[ok] = d_minus[ok] / total[ok]
    return closeness


def update_trust(prev_trust: float, raw: float, alpha: float) -> float:
    """EMA smoothing step: alpha * raw + (1 - alpha) * prev."""
    return alpha * raw + (1.0 - alpha) * prev_trust


def score_round(
    signals: list[SignalVector],
    trust: dict[int, TrustRecord],
    alpha: float,
    round_index: int,
) -> None:
    """Score this round's participants and smooth their trust in place.

    Non-participants keep their prior trust; unseen clients must already be
    registered (see `init_trust_table`). A single-participant round bypasses
    TOPSIS and scores neutral.
    """
    if not signals:
        return
    if len(signals) == 1:
        raw_values = np.array([NEUTRAL_TRUST])
        client_ids = [signals[0].client_id]
    else:
        matrix = build_matrix(signals)
        raw_values = topsis_closeness(matrix, entropy_weights(matrix))
        client_ids = matrix.client_ids

    for cid, raw in zip(client_ids, raw_values):
        record = trust[cid]
        record.raw_trust = float(raw)
        record.smoothed_trust = update_trust(record.smoothed_trust, float(raw), alpha)
        record.last_round_seen = round_index


def init_trust_table(client_ids: list[int], t_init: float = NEUTRAL_TRUST) -> dict[int, TrustRecord]:
    return {
        cid: TrustRecord(client_id=cid, raw_trust=t_init, smoothed_trust=t_init)
        for cid in client_ids
    }
