"""Per-client behavioral signals and system-level indicators.

Per client and round: cosine similarity of the update against the
federation's normative profile (the coordinate-wise median of the round's
deltas), a windowed volatility of that similarity, and an EMA of the
participation indicator. System level: the OLS slope of recent global losses
and the population standard deviation of current trust scores.
"""

from dataclasses import dataclass

import numpy as np

from trustloop.errors import SignalError
from trustloop.federation import ClientUpdate

ZERO_NORM_EPS = 1e-12


@dataclass
class SignalVector:
    client_id: int
    round: int
    similarity: float  # in [-1, 1]
    volatility: float  # >= 0
    participation: float  # in [0, 1]


@dataclass
class SystemIndicators:
    round: int
    loss_trend: float  # loss units per round
    trust_dispersion: float  # >= 0


def reference_update(updates: list[ClientUpdate]) -> np.ndarray:
    """Coordinate-wise median of the round's deltas (robust normative profile)."""
    if not updates:
        raise SignalError("reference_update requires at least one update")
    return np.median(np.stack([u.delta for u in updates]), axis=0)


def compute_similarity(delta: np.ndarray, reference: np.ndarray) -> float:
    """Cosine similarity, defined as 0 when either vector is numerically zero."""
    if delta.shape != reference.shape:
        raise SignalError(f"dimension mismatch: {delta.shape} vs {reference.shape}")
    nu, nr = np.linalg.norm(delta), np.linalg.norm(reference)
    if nu < ZERO_NORM_EPS or nr < ZERO_NORM_EPS:
        return 0.0
    return float(np.dot(delta, reference) / (nu * nr))


def compute_volatility(similarity_history: list[float], window: int) -> float:
    """Population std of the client's last `window` similarity values."""
    if window < 2:
        raise SignalError("volatility window must be >= 2")
    recent = similarity_history[-window:]
    if len(recent) < 2:
        return 0.0
    if min(recent) == max(recent):  # exact zero for constant histories
        return 0.0
    return float(np.std(recent))


def update_participation(prev_p: float, participated: bool, beta_p: float) -> float:
    """EMA of the participation indicator."""
    return beta_p * (1.0 if participated else 0.0) + (1.0 - beta_p) * prev_p


def compute_loss_trend(loss_history: list[float], window: int) -> float:
    """OLS slope of the last `window` (round, loss) pairs; 0 with < 2 points."""
    if window < 2:
        raise SignalError("loss-trend window must be >= 2")
    recent = loss_history[-window:]
    n = len(recent)
    if n < 2:
        return 0.0
    x = np.arange(n, dtype=float)
    y = np.asarray(recent, dtype=float)
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def compute_trust_dispersion(trust_scores: list[float]) -> float:
    """Population std of the participants' smoothed trust scores."""
    if not trust_scores:
        raise SignalError("trust dispersion requires at least one score")
    if min(trust_scores) == max(trust_scores):
        return 0.0
    return float(np.std(trust_scores))


@dataclass
class SignalConfig:
    volatility_window: int = 5
    loss_window: int = 5
    participation_beta: float = 0.1
    participation_init: float = 1.0


class SignalTracker:
    """Owns per-client signal histories; updated once per round by the engine."""

    def __init__(self, num_clients: int, config: SignalConfig):
        self.config = config
        self.similarity_history: list[list[float]] = [[] for _ in range(num_clients)]
        self.participation: list[float] = [config.participation_init] * num_clients
        self.loss_history: list[float] = []

    def observe_round(
        self, round_index: int, updates: list[ClientUpdate], mask: np.ndarray
    ) -> list[SignalVector]:
        """Compute this round's SignalVectors (participants only) and update
        every client's participation EMA."""
        signals: list[SignalVector] = []
        if updates:
            reference = reference_update(updates)
            for u in updates:
                s = compute_similarity(u.delta, reference)
                hist = self.similarity_history[u.client_id]
                hist.append(s)
                v = compute_volatility(hist, self.config.volatility_window)
                signals.append(
                    SignalVector(
                        client_id=u.client_id,
                        round=round_index,
                        similarity=s,
                        volatility=v,
                        participation=0.0,  # filled below, after the EMA step
                    )
                )
        for cid in range(len(self.participation)):
            self.participation[cid] = update_participation(
                self.participation[cid], bool(mask[cid]), self.config.participation_beta
            )
        for sig in signals:
            sig.participation = self.participation[sig.client_id]
        return signals

    def record_loss(self, loss: float) -> None:
        self.loss_history.append(loss)

    def loss_trend(self) -> float:
        return compute_loss_trend(self.loss_history, self.config.loss_window)
