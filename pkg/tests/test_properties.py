"""Seeded randomized property tests for the numerical invariants."""

import numpy as np
import pytest

from trustloop.aggregation import aggregate
from trustloop.federation import ClientUpdate, GlobalModel
from trustloop.mcdm import DecisionMatrix, TrustRecord, topsis_closeness, update_trust
from trustloop.signals import update_participation


def matrix(rows):
    return DecisionMatrix(client_ids=list(range(len(rows))), values=np.asarray(rows, dtype=float))


class TestEmaBoundedness:
    def test_trust_ema_stays_in_unit_interval(self):
        rng = np.random.default_rng(101)
        for _ in range(500):
            prev = float(rng.uniform(0, 1))
            raw = float(rng.uniform(0, 1))
            alpha = float(rng.uniform(1e-9, 1.0))
            out = update_trust(prev, raw, alpha)
            assert 0.0 <= out <= 1.0

    def test_endpoint_alphas(self):
        assert update_trust(0.0, 1.0, 1.0) == 1.0
        assert update_trust(1.0, 0.0, 1.0) == 0.0


class TestTopsisScalingInvariance:
    def test_positive_column_scaling_preserves_closeness(self):
        rng = np.random.default_rng(103)
        for _ in range(200):
            m = int(rng.integers(2, 7))
            n = int(rng.integers(2, 5))
            rows = rng.uniform(0.01, 1, size=(m, n))
            w = rng.dirichlet(np.ones(n))
            base = topsis_closeness(matrix(rows.tolist()), w)
            j = int(rng.integers(0, n))
            c = float(rng.uniform(1e-3, 1e3))
            scaled = rows.copy()
            scaled[:, j] *= c
            out = topsis_closeness(matrix(scaled.tolist()), w)
            assert np.allclose(out, base, atol=1e-9)
            assert np.array_equal(np.argsort(out), np.argsort(base))


class TestAggregationInvariants:
    def _setup(self, rng, m=5, dim=6):
        updates = [
            ClientUpdate(client_id=i, round=0, delta=rng.normal(size=dim),
                         num_samples=int(rng.integers(5, 40)), local_loss=0.1)
            for i in range(m)
        ]
        trust = {i: TrustRecord(client_id=i, smoothed_trust=float(rng.uniform(0, 1)))
                 for i in range(m)}
        model = GlobalModel(parameters=rng.normal(size=dim), round=0)
        return model, updates, trust

    def test_convexity(self):
        rng = np.random.default_rng(107)
        for _ in range(100):
            model, updates, trust = self._setup(rng)
            new, report = aggregate(model, updates, trust, theta=0.3, excluded=set())
            if report.stalled:
                assert np.array_equal(new.parameters, model.parameters)
                continue
            deltas = np.stack([u.delta for u in updates if u.client_id in report.included_ids])
            applied = new.parameters - model.parameters
            assert np.all(applied >= deltas.min(axis=0) - 1e-12)
            assert np.all(applied <= deltas.max(axis=0) + 1e-12)

    def test_omitted_clients_have_zero_influence(self):
        rng = np.random.default_rng(109)
        for _ in range(100):
            model, updates, trust = self._setup(rng)
            new, report = aggregate(model, updates, trust, theta=0.3, excluded={0})
            omitted = set(report.omitted_ids)
            if not omitted:
                continue
            perturbed = [
                ClientUpdate(client_id=u.client_id, round=0,
                             delta=u.delta + (rng.normal(size=u.delta.shape) * 1e9
                                              if u.client_id in omitted else 0.0),
                             num_samples=u.num_samples, local_loss=u.local_loss)
                for u in updates
            ]
            out, _ = aggregate(model, perturbed, trust, theta=0.3, excluded={0})
            assert np.array_equal(out.parameters, new.parameters)


class TestParticipationConvergence:
    def test_exact_geometric_rate_toward_any_constant_indicator(self):
        rng = np.random.default_rng(113)
        for _ in range(50):
            beta = float(rng.uniform(0.01, 0.99))
            p0 = float(rng.uniform(0, 1))
            target = bool(rng.integers(0, 2))
            b = 1.0 if target else 0.0
            p = p0
            for k in range(1, 40):
                p = update_participation(p, target, beta)
                expected = (1 - beta) ** k * abs(p0 - b)
                assert abs(p - b) == pytest.approx(expected, rel=1e-9, abs=1e-15)
