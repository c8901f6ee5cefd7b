"""Supervisory trust controllers.

The agentic controller infers an operating state each round from joint
signals and issues state-conditioned actions:

    Normal      -- no parameter motion; reinstatement stays active.
    Degraded    -- entered after a sustained loss rise coincides with high
                   trust dispersion or a high-volatility client fraction;
                   raises the omission threshold, speeds up trust smoothing,
                   and temporarily excludes low-trust participants.
    Stabilising -- entered from Degraded/Stabilising after a sustained loss
                   fall; relaxes threshold and smoothing gradually and
                   reinstates excluded clients that have stayed trustworthy
                   for a probation window. Graduates to Normal after a run
                   of calm rounds.

Requiring consecutive rounds before any transition is what separates
transient noise from sustained instability; exclusion at theta + margin
while aggregation filters at theta adds a hysteresis band against boundary
chatter. Two simpler controllers are provided as baselines: a fixed
memoryless threshold (the mechanism that produces oscillation) and a
single-signal reactive threshold.
"""

import math
from dataclasses import dataclass, field, replace

from trustloop.errors import ConfigError
from trustloop.mcdm import TrustRecord
from trustloop.signals import SignalVector, SystemIndicators

NORMAL = "Normal"
DEGRADED = "Degraded"
STABILISING = "Stabilising"
STATES = (NORMAL, DEGRADED, STABILISING)

KIND_ATCL = "atcl"
KIND_FIXED = "fixed"
KIND_ADAPTIVE = "adaptive"
KIND_NONE = "none"
KIND_ORACLE = "oracle"
CONTROLLER_KINDS = (KIND_ATCL, KIND_FIXED, KIND_ADAPTIVE, KIND_NONE, KIND_ORACLE)


@dataclass
class ControllerParams:
    theta_init: float = 0.3
    theta_min: float = 0.1
    theta_max: float = 0.6
    delta_theta: float = 0.05
    margin: float = 0.05
    alpha_init: float = 0.2
    alpha_min: float = 0.05
    alpha_max: float = 0.6
    gamma_up: float = 1.5
    eps_loss: float = 0.0
    k_degraded: int = 3
    k_stabilising: int = 3
    h_normal: int = 5
    sigma_min: float = 0.15
    v_max: float = 0.3
    rho: float = 0.25
    r_probe: int = 3

    def validate(self) -> None:
        if not 0.0 <= self.theta_min <= self.theta_init <= self.theta_max <= 1.0:
            raise ConfigError("controller.theta_init", "need 0 <= min <= init <= max <= 1")
        if not 0.0 < self.alpha_min <= self.alpha_init <= self.alpha_max <= 1.0:
            raise ConfigError("controller.alpha_init", "need 0 < min <= init <= max <= 1")
        if self.delta_theta < 0 or self.margin < 0:
            raise ConfigError("controller.delta_theta", "steps must be >= 0")
        if self.gamma_up <= 1.0:
            raise ConfigError("controller.gamma_up", "must be > 1")
        if min(self.k_degraded, self.k_stabilising, self.h_normal, self.r_probe) < 1:
            raise ConfigError("controller.k_degraded", "window lengths must be >= 1")


@dataclass
class AgentState:
    state: str = NORMAL
    theta: float = 0.3
    alpha: float = 0.2
    rounds_in_state: int = 0


@dataclass
class ControllerDecision:
    round: int
    new_theta: float
    new_alpha: float
    exclude: set[int] = field(default_factory=set)
    reinstate: set[int] = field(default_factory=set)
    state_after: str = NORMAL
    rationale: str = ""


class TrustController:
    """Base interface: one `step` per round, between scoring and aggregation."""

    kind: str = KIND_NONE

    def __init__(self, params: ControllerParams):
        params.validate()
        self.params = params
        self.agent = AgentState(theta=params.theta_init, alpha=params.alpha_init)

    def step(
        self,
        round_index: int,
        trust: dict[int, TrustRecord],
        signals: list[SignalVector],
        indicators: SystemIndicators,
        latest_loss: float | None,
    ) -> ControllerDecision:
        raise NotImplementedError


def _memoryless_sets(
    trust: dict[int, TrustRecord], participant_ids: list[int], threshold: float
) -> tuple[set[int], set[int]]:
    """Threshold-driven omission with no hysteresis: exclude every participant
    strictly below the threshold, reinstate every excluded client at or above it."""
    exclude = {
        cid for cid in participant_ids
        if not trust[cid].excluded and trust[cid].smoothed_trust < threshold
    }
    reinstate = {
        cid for cid, rec in trust.items()
        if rec.excluded and rec.smoothed_trust >= threshold
    }
    return exclude, reinstate


class AtclController(TrustController):
    """Three-state supervisory loop over joint trust and loss signals."""

    kind = KIND_ATCL

    def __init__(self, params: ControllerParams):
        super().__init__(params)
        self._rise_streak = 0
        self._fall_streak = 0
        self._calm_streak = 0
        self._probe_streak: dict[int, int] = {}

    def _infer_state(self, instability: bool, recovery: bool) -> tuple[str, str]:
        """Evaluate transitions in priority order; returns (state, rationale)."""
        current = self.agent.state
        if instability:
            return DEGRADED, "DEGRADED"
        if recovery:
            return STABILISING, "STABILISING:loss_recovery"
        if current == STABILISING and self._calm_streak >= self.params.h_normal:
            return NORMAL, "NORMAL:graduated"
        if current == NORMAL:
            return NORMAL, "NORMAL:steady"
        return current, f"{current.upper()}:holding"

    def step(self, round_index, trust, signals, indicators, latest_loss=None):
        p = self.params

        # Consecutive-round bookkeeping implements the noise-vs-drift split:
        # a single-round spike never reaches the K_d / K_s streaks.
        self._rise_streak = self._rise_streak + 1 if indicators.loss_trend > p.eps_loss else 0
        self._fall_streak = self._fall_streak + 1 if indicators.loss_trend < 0.0 else 0

        vol_fraction = 0.0
        if signals:
            vol_fraction = sum(1 for s in signals if s.volatility > p.v_max) / len(signals)

        dispersion_hit = indicators.trust_dispersion > p.sigma_min
        volatility_hit = vol_fraction > p.rho
        instability = self._rise_streak >= p.k_degraded and (dispersion_hit or volatility_hit)
        recovery = (
            self.agent.state in (DEGRADED, STABILISING)
            and self._fall_streak >= p.k_stabilising
            and not instability
        )

        if self.agent.state == STABILISING and not instability and not recovery:
            self._calm_streak += 1
        else:
            self._calm_streak = 0

        new_state, rationale = self._infer_state(instability, recovery)
        if instability:
            causes = [name for hit, name in ((dispersion_hit, "dispersion"), (volatility_hit, "volatility")) if hit]
            rationale = "DEGRADED:loss_rise+" + "+".join(causes)

        theta, alpha = self.agent.theta, self.agent.alpha
        exclude: set[int] = set()
        if new_state == DEGRADED:
            theta = min(p.theta_max, theta + p.delta_theta)
            alpha = min(p.alpha_max, alpha * p.gamma_up)
            bound = theta + p.margin
            exclude = {
                s.client_id for s in signals
                if not trust[s.client_id].excluded and trust[s.client_id].smoothed_trust < bound
            }
        elif new_state == STABILISING:
            theta = max(p.theta_min, theta - p.delta_theta / 2.0)
            alpha = max(p.alpha_min, alpha / math.sqrt(p.gamma_up))

        # Probation: an excluded client must stay above theta + margin for
        # r_probe consecutive rounds before it can come back. Qualifying
        # rounds accumulate in any state; reinstatement fires outside Degraded.
        bound = theta + p.margin
        for cid, rec in trust.items():
            if not rec.excluded or cid in exclude:
                continue
            if rec.smoothed_trust >= bound:
                self._probe_streak[cid] = self._probe_streak.get(cid, 0) + 1
            else:
                self._probe_streak[cid] = 0
        reinstate: set[int] = set()
        if new_state in (NORMAL, STABILISING):
            reinstate = {
                cid for cid, streak in self._probe_streak.items()
                if streak >= p.r_probe and trust[cid].excluded and cid not in exclude
            }
        for cid in exclude:
            self._probe_streak[cid] = 0
        for cid in reinstate:
            self._probe_streak.pop(cid, None)

        if new_state == self.agent.state:
            rounds_in_state = self.agent.rounds_in_state + 1
        else:
            rounds_in_state = 0
        self.agent = AgentState(state=new_state, theta=theta, alpha=alpha, rounds_in_state=rounds_in_state)

        return ControllerDecision(
            round=round_index,
            new_theta=theta,
            new_alpha=alpha,
            exclude=exclude,
            reinstate=reinstate,
            state_after=new_state,
            rationale=rationale,
        )


class FixedThresholdController(TrustController):
    """Constant threshold and smoothing; memoryless exclusion each round."""

    kind = KIND_FIXED

    def step(self, round_index, trust, signals, indicators, latest_loss=None):
        participant_ids = [s.client_id for s in signals]
        exclude, reinstate = _memoryless_sets(trust, participant_ids, self.agent.theta)
        self.agent = replace(self.agent, rounds_in_state=self.agent.rounds_in_state + 1)
        return ControllerDecision(
            round=round_index,
            new_theta=self.agent.theta,
            new_alpha=self.agent.alpha,
            exclude=exclude,
            reinstate=reinstate,
            state_after=NORMAL,
            rationale="FIXED:threshold",
        )


class AdaptiveThresholdController(TrustController):
    """Single-signal reactive rule: the threshold chases per-round loss deltas.

    Loss up one round -> theta up one step immediately; loss down -> theta
    down one step. Exclusion stays memoryless against the moving threshold
    and alpha never adapts.
    """

    kind = KIND_ADAPTIVE

    def __init__(self, params: ControllerParams):
        super().__init__(params)
        self._prev_loss: float | None = None

    def step(self, round_index, trust, signals, indicators, latest_loss=None):
        p = self.params
        theta = self.agent.theta
        rationale = "ADAPTIVE:hold"
        if latest_loss is not None and self._prev_loss is not None:
            if latest_loss > self._prev_loss:
                theta = min(p.theta_max, theta + p.delta_theta)
                rationale = "ADAPTIVE:loss_up"
            elif latest_loss < self._prev_loss:
                theta = max(p.theta_min, theta - p.delta_theta)
                rationale = "ADAPTIVE:loss_down"
        self._prev_loss = latest_loss

        participant_ids = [s.client_id for s in signals]
        exclude, reinstate = _memoryless_sets(trust, participant_ids, theta)
        self.agent = replace(self.agent, theta=theta, rounds_in_state=self.agent.rounds_in_state + 1)
        return ControllerDecision(
            round=round_index,
            new_theta=theta,
            new_alpha=self.agent.alpha,
            exclude=exclude,
            reinstate=reinstate,
            state_after=NORMAL,
            rationale=rationale,
        )


class PassthroughController(TrustController):
    """Trust-agnostic baseline: never excludes, never moves parameters."""

    kind = KIND_NONE

    def step(self, round_index, trust, signals, indicators, latest_loss=None):
        self.agent = replace(self.agent, rounds_in_state=self.agent.rounds_in_state + 1)
        return ControllerDecision(
            round=round_index,
            new_theta=self.agent.theta,
            new_alpha=self.agent.alpha,
            state_after=NORMAL,
            rationale="NOTRUST:passthrough",
        )


class OracleController(TrustController):
    """Upper-bound reference: excludes the ground-truth adversaries at round 0."""

    kind = KIND_ORACLE

    def __init__(self, params: ControllerParams, adversary_ids: list[int]):
        super().__init__(params)
        self.adversary_ids = set(adversary_ids)

    def step(self, round_index, trust, signals, indicators, latest_loss=None):
        exclude = self.adversary_ids if round_index == 0 else set()
        self.agent = replace(self.agent, rounds_in_state=self.agent.rounds_in_state + 1)
        return ControllerDecision(
            round=round_index,
            new_theta=self.agent.theta,
            new_alpha=self.agent.alpha,
            exclude=set(exclude),
            state_after=NORMAL,
            rationale="ORACLE:ground_truth",
        )


def make_controller(kind: str, params: ControllerParams, adversary_ids: list[int] | None = None) -> TrustController:
    if kind == KIND_ATCL:
        return AtclController(params)
    if kind == KIND_FIXED:
        return FixedThresholdController(params)
    if kind == KIND_ADAPTIVE:
        return AdaptiveThresholdController(params)
    if kind == KIND_NONE:
        return PassthroughController(params)
    if kind == KIND_ORACLE:
        return OracleController(params, adversary_ids or [])
    raise ConfigError("controller", f"unknown controller kind {kind!r}")
