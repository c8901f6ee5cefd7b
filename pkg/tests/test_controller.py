import numpy as np
import pytest

from trustloop.controller import (
    DEGRADED,
    NORMAL,
    STABILISING,
    AdaptiveThresholdController,
    AtclController,
    ControllerParams,
    FixedThresholdController,
    OracleController,
    PassthroughController,
    make_controller,
)
from trustloop.errors import ConfigError
from trustloop.mcdm import TrustRecord
from trustloop.signals import SignalVector, SystemIndicators


def obs(rnd, loss_trend, dispersion):
    return SystemIndicators(round=rnd, loss_trend=loss_trend, trust_dispersion=dispersion)


def sig(cid, volatility=0.0, similarity=0.5, participation=1.0, rnd=0):
    return SignalVector(client_id=cid, round=rnd, similarity=similarity,
                        volatility=volatility, participation=participation)


def trust_table(values, excluded=()):
    table = {}
    for cid, t in values.items():
        rec = TrustRecord(client_id=cid, smoothed_trust=t, raw_trust=t)
        if cid in excluded:
            rec.excluded = True
        table[cid] = rec
    return table


def drive(controller, trace, trust=None, signals=None):
    """Feed a list of (loss_trend, dispersion) observations; return state labels."""
    states = []
    trust = trust if trust is not None else trust_table({0: 0.8, 1: 0.8})
    for rnd, (trend, disp) in enumerate(trace):
        sigs = signals(rnd) if callable(signals) else [sig(cid, rnd=rnd) for cid in trust]
        decision = controller.step(rnd, trust, sigs, obs(rnd, trend, disp), latest_loss=None)
        states.append(decision.state_after)
    return states


class TestStateTraces:
    """Scripted indicator traces with exact expected state sequences."""

    def test_sustained_rise_enters_degraded(self):
        c = AtclController(ControllerParams())
        states = drive(c, [(+0.2, 0.3)] * 6)
        assert states == [NORMAL, NORMAL, DEGRADED, DEGRADED, DEGRADED, DEGRADED]

    def test_single_round_spike_is_ignored(self):
        c = AtclController(ControllerParams())
        trace = [(-0.01, 0.0), (-0.01, 0.0), (+0.5, 0.5), (-0.01, 0.0), (-0.01, 0.0), (-0.01, 0.0)]
        assert drive(c, trace) == [NORMAL] * 6

    def test_recovery_enters_stabilising(self):
        c = AtclController(ControllerParams())
        trace = [(+0.2, 0.3)] * 3 + [(-0.05, 0.0)] * 3
        assert drive(c, trace) == [NORMAL, NORMAL, DEGRADED, DEGRADED, DEGRADED, STABILISING]

    def test_full_graduation_cycle(self):
        c = AtclController(ControllerParams())
        trace = [(+0.2, 0.3)] * 3 + [(-0.05, 0.0)] * 3 + [(0.0, 0.0)] * 5
        expected = [NORMAL, NORMAL, DEGRADED, DEGRADED, DEGRADED, STABILISING,
                    STABILISING, STABILISING, STABILISING, STABILISING, NORMAL]
        assert drive(c, trace) == expected

    def test_oscillating_loss_never_degrades(self):
        c = AtclController(ControllerParams())
        trace = [(+0.3, 0.3), (-0.3, 0.3)] * 4
        assert drive(c, trace) == [NORMAL] * 8

    def test_all_calm_stays_normal(self):
        c = AtclController(ControllerParams())
        assert drive(c, [(0.0, 0.0)] * 6) == [NORMAL] * 6

    def test_dispersion_alone_is_not_instability(self):
        c = AtclController(ControllerParams())
        assert drive(c, [(-0.01, 0.5)] * 6) == [NORMAL] * 6

    def test_volatility_fraction_arm_triggers(self):
        c = AtclController(ControllerParams())
        trust = trust_table({0: 0.8, 1: 0.8, 2: 0.8, 3: 0.8})
        # half the participants above v_max=0.3 exceeds rho=0.25
        def signals(rnd):
            return [sig(0, volatility=0.5, rnd=rnd), sig(1, volatility=0.4, rnd=rnd),
                    sig(2, volatility=0.0, rnd=rnd), sig(3, volatility=0.0, rnd=rnd)]
        states = drive(c, [(+0.1, 0.05)] * 4, trust=trust, signals=signals)
        assert states == [NORMAL, NORMAL, DEGRADED, DEGRADED]

    def test_no_direct_degraded_to_normal(self):
        rng = np.random.default_rng(19)
        c = AtclController(ControllerParams())
        prev = NORMAL
        for rnd in range(300):
            trend = float(rng.uniform(-0.3, 0.3))
            disp = float(rng.uniform(0.0, 0.5))
            trust = trust_table({0: 0.8, 1: 0.2})
            d = c.step(rnd, trust, [sig(0, rnd=rnd), sig(1, rnd=rnd)], obs(rnd, trend, disp), None)
            if prev == DEGRADED:
                assert d.state_after in (DEGRADED, STABILISING)
            prev = d.state_after

    def test_transient_shorter_than_k_degraded_never_excludes(self):
        c = AtclController(ControllerParams())
        trust = trust_table({0: 0.9, 1: 0.1})
        for rnd, trend in enumerate([+0.2, +0.2, -0.1, +0.2, +0.2, -0.1]):
            d = c.step(rnd, trust, [sig(0, rnd=rnd), sig(1, rnd=rnd)], obs(rnd, trend, 0.5), None)
            assert d.state_after == NORMAL
            assert not d.exclude


class TestDegradedActions:
    def run_to_degraded(self, trust):
        c = AtclController(ControllerParams())
        for rnd in range(3):
            d = c.step(rnd, trust, [sig(cid, rnd=rnd) for cid in trust], obs(rnd, +0.2, 0.3), None)
        assert d.state_after == DEGRADED
        return c, d

    def test_theta_and_alpha_step_up(self):
        c, d = self.run_to_degraded(trust_table({0: 0.8, 1: 0.8}))
        assert d.new_theta == pytest.approx(0.35, abs=1e-12)
        assert d.new_alpha == pytest.approx(0.2 * 1.5, abs=1e-12)

    def test_exclusion_below_theta_plus_margin(self):
        # theta 0.30 -> 0.35 on entry; exclusion bound 0.40
        c, d = self.run_to_degraded(trust_table({0: 0.8, 1: 0.2}))
        assert d.exclude == {1}
        assert d.rationale.startswith("DEGRADED:loss_rise")

    def test_boundary_is_strict(self):
        c, d = self.run_to_degraded(trust_table({0: 0.8, 1: 0.4}))
        assert d.exclude == set()

    def test_theta_clamped_at_max(self):
        params = ControllerParams(theta_init=0.58, theta_max=0.6)
        c = AtclController(params)
        trust = trust_table({0: 0.9, 1: 0.9})
        for rnd in range(6):
            d = c.step(rnd, trust, [sig(0, rnd=rnd), sig(1, rnd=rnd)], obs(rnd, +0.2, 0.3), None)
        assert d.new_theta == pytest.approx(0.6, abs=1e-12)

    def test_alpha_clamped_at_max(self):
        c = AtclController(ControllerParams())
        trust = trust_table({0: 0.9, 1: 0.9})
        for rnd in range(12):
            d = c.step(rnd, trust, [sig(0, rnd=rnd), sig(1, rnd=rnd)], obs(rnd, +0.2, 0.3), None)
        assert d.new_alpha == pytest.approx(0.6, abs=1e-12)


class TestReinstatement:
    def drive_exclusion_then_recovery(self, hold_rounds, params=None):
        params = params or ControllerParams()
        c = AtclController(params)
        trust = trust_table({0: 0.9, 1: 0.2})
        # three rising rounds excludes client 1
        for rnd in range(3):
            d = c.step(rnd, trust, [sig(0, rnd=rnd), sig(1, rnd=rnd)], obs(rnd, +0.2, 0.3), None)
        assert d.exclude == {1}
        trust[1].excluded = True
        trust[1].smoothed_trust = 0.7  # recovers immediately after exclusion
        decisions = []
        for rnd in range(3, 3 + hold_rounds):
            d = c.step(rnd, trust, [sig(0, rnd=rnd)], obs(rnd, -0.05, 0.0), None)
            decisions.append(d)
            if 1 in d.reinstate:
                trust[1].excluded = False
        return decisions

    def test_reinstated_after_probe_rounds(self):
        # Derived trace: T=0.7 >= theta + margin every round; r_probe=3 fires
        # on the third qualifying round.
        decisions = self.drive_exclusion_then_recovery(4)
        reinstate_rounds = [d.round for d in decisions if 1 in d.reinstate]
        assert reinstate_rounds == [5]

    def test_single_qualifying_round_never_reinstates(self):
        decisions = self.drive_exclusion_then_recovery(1)
        assert all(not d.reinstate for d in decisions)

    def test_probe_streak_resets_on_dip(self):
        params = ControllerParams()
        c = AtclController(params)
        trust = trust_table({0: 0.9, 1: 0.2})
        for rnd in range(3):
            d = c.step(rnd, trust, [sig(0, rnd=rnd), sig(1, rnd=rnd)], obs(rnd, +0.2, 0.3), None)
        trust[1].excluded = True
        levels = [0.7, 0.7, 0.1, 0.7, 0.7, 0.7]  # dip resets the streak
        reinstated_at = None
        for offset, level in enumerate(levels):
            rnd = 3 + offset
            trust[1].smoothed_trust = level
            d = c.step(rnd, trust, [sig(0, rnd=rnd)], obs(rnd, -0.05, 0.0), None)
            if 1 in d.reinstate:
                reinstated_at = rnd
                break
        assert reinstated_at == 8

    def test_exclude_and_reinstate_disjoint(self):
        c = AtclController(ControllerParams())
        trust = trust_table({0: 0.9, 1: 0.2, 2: 0.7}, excluded={2})
        for rnd in range(10):
            d = c.step(rnd, trust, [sig(cid, rnd=rnd) for cid in trust],
                       obs(rnd, +0.2 if rnd < 5 else -0.1, 0.3), None)
            assert not (d.exclude & d.reinstate)


class TestParameterClamps:
    def test_random_traces_keep_parameters_in_bounds(self):
        rng = np.random.default_rng(43)
        params = ControllerParams()
        for _ in range(20):
            c = AtclController(params)
            trust = trust_table({i: float(rng.uniform(0, 1)) for i in range(6)})
            for rnd in range(120):
                trend = float(rng.uniform(-0.4, 0.4))
                disp = float(rng.uniform(0, 0.6))
                sigs = [sig(cid, volatility=float(rng.uniform(0, 0.6)), rnd=rnd) for cid in trust]
                d = c.step(rnd, trust, sigs, obs(rnd, trend, disp), None)
                assert params.theta_min <= d.new_theta <= params.theta_max
                assert params.alpha_min <= d.new_alpha <= params.alpha_max
                assert d.state_after in (NORMAL, DEGRADED, STABILISING)
                for cid in d.exclude:
                    trust[cid].excluded = True
                for cid in d.reinstate:
                    trust[cid].excluded = False

    def test_replay_reproduces_decisions(self):
        rng = np.random.default_rng(47)
        trace = [(float(rng.uniform(-0.3, 0.3)), float(rng.uniform(0, 0.5))) for _ in range(60)]

        def run():
            c = AtclController(ControllerParams())
            trust = trust_table({0: 0.9, 1: 0.3, 2: 0.6})
            out = []
            for rnd, (trend, disp) in enumerate(trace):
                d = c.step(rnd, trust, [sig(cid, rnd=rnd) for cid in trust], obs(rnd, trend, disp), None)
                out.append((d.state_after, round(d.new_theta, 12), round(d.new_alpha, 12),
                            tuple(sorted(d.exclude)), tuple(sorted(d.reinstate)), d.rationale))
                for cid in d.exclude:
                    trust[cid].excluded = True
                for cid in d.reinstate:
                    trust[cid].excluded = False
            return out

        assert run() == run()

    def test_rationale_always_non_empty(self):
        rng = np.random.default_rng(53)
        c = AtclController(ControllerParams())
        trust = trust_table({0: 0.8, 1: 0.2})
        for rnd in range(80):
            d = c.step(rnd, trust, [sig(0, rnd=rnd), sig(1, rnd=rnd)],
                       obs(rnd, float(rng.uniform(-0.3, 0.3)), float(rng.uniform(0, 0.4))), None)
            assert d.rationale


class TestFixedBaseline:
    def test_boundary_convention_is_strict_less_than(self):
        c = FixedThresholdController(ControllerParams(theta_init=0.5))
        trust = trust_table({0: 0.5})
        d = c.step(0, trust, [sig(0)], obs(0, 0.0, 0.0), None)
        assert d.exclude == set()

    def test_alternating_trust_toggles_every_round(self):
        c = FixedThresholdController(ControllerParams(theta_init=0.5))
        trust = trust_table({0: 0.45})
        toggles = 0
        for rnd in range(10):
            trust[0].smoothed_trust = 0.45 if rnd % 2 == 0 else 0.55
            d = c.step(rnd, trust, [sig(0, rnd=rnd)], obs(rnd, 0.0, 0.0), None)
            if 0 in d.exclude:
                trust[0].set_excluded(True, rnd)
                toggles += 1
            if 0 in d.reinstate:
                trust[0].set_excluded(False, rnd)
                toggles += 1
        assert toggles == 10
        assert trust[0].flip_count == 10

    def test_all_above_threshold_excludes_nobody(self):
        c = FixedThresholdController(ControllerParams(theta_init=0.3))
        trust = trust_table({0: 0.4, 1: 0.9})
        d = c.step(0, trust, [sig(0), sig(1)], obs(0, 0.0, 0.0), None)
        assert d.exclude == set()

    def test_theta_never_moves(self):
        c = FixedThresholdController(ControllerParams())
        trust = trust_table({0: 0.1})
        for rnd in range(5):
            d = c.step(rnd, trust, [sig(0, rnd=rnd)], obs(rnd, +1.0, 0.9), None)
            assert d.new_theta == 0.3
            assert d.new_alpha == 0.2


class TestAdaptiveBaseline:
    def test_loss_up_raises_theta_immediately(self):
        c = AdaptiveThresholdController(ControllerParams())
        trust = trust_table({0: 0.8})
        c.step(0, trust, [sig(0)], obs(0, 0.0, 0.0), latest_loss=1.0)
        d = c.step(1, trust, [sig(0)], obs(1, 0.0, 0.0), latest_loss=1.2)
        assert d.new_theta == pytest.approx(0.35, abs=1e-12)

    def test_decreasing_loss_pins_theta_at_min(self):
        c = AdaptiveThresholdController(ControllerParams())
        trust = trust_table({0: 0.8})
        loss = 2.0
        for rnd in range(10):
            d = c.step(rnd, trust, [sig(0, rnd=rnd)], obs(rnd, 0.0, 0.0), latest_loss=loss)
            loss -= 0.1
        assert d.new_theta == pytest.approx(0.1, abs=1e-12)

    def test_alternating_loss_oscillates_theta_with_period_two(self):
        # Derived trace: loss up/down alternation moves theta +step/-step forever.
        c = AdaptiveThresholdController(ControllerParams())
        trust = trust_table({0: 0.8})
        losses = [1.0, 1.2, 1.0, 1.2, 1.0, 1.2, 1.0]
        thetas = []
        for rnd, loss in enumerate(losses):
            d = c.step(rnd, trust, [sig(0, rnd=rnd)], obs(rnd, 0.0, 0.0), latest_loss=loss)
            thetas.append(round(d.new_theta, 10))
        assert thetas == [0.3, 0.35, 0.3, 0.35, 0.3, 0.35, 0.3]

    def test_alpha_fixed(self):
        c = AdaptiveThresholdController(ControllerParams())
        trust = trust_table({0: 0.8})
        for rnd, loss in enumerate([1.0, 2.0, 0.5]):
            d = c.step(rnd, trust, [sig(0, rnd=rnd)], obs(rnd, 0.0, 0.0), latest_loss=loss)
            assert d.new_alpha == 0.2


class TestOtherControllers:
    def test_passthrough_never_acts(self):
        c = PassthroughController(ControllerParams())
        trust = trust_table({0: 0.0, 1: 0.0})
        d = c.step(0, trust, [sig(0), sig(1)], obs(0, +1.0, 0.9), latest_loss=9.9)
        assert d.exclude == set() and d.reinstate == set()
        assert d.new_theta == 0.3

    def test_oracle_excludes_adversaries_at_round_zero_only(self):
        c = OracleController(ControllerParams(), adversary_ids=[3, 4])
        trust = trust_table({i: 0.5 for i in range(5)})
        d0 = c.step(0, trust, [sig(i) for i in range(5)], obs(0, 0.0, 0.0), None)
        assert d0.exclude == {3, 4}
        d1 = c.step(1, trust, [sig(i) for i in range(5)], obs(1, 0.0, 0.0), None)
        assert d1.exclude == set()

    def test_make_controller_rejects_unknown(self):
        with pytest.raises(ConfigError):
            make_controller("bogus", ControllerParams())

    def test_invalid_params_rejected(self):
        with pytest.raises(ConfigError):
            ControllerParams(theta_init=0.05, theta_min=0.1).validate()
        with pytest.raises(ConfigError):
            ControllerParams(gamma_up=1.0).validate()
