import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qda import harness
from qda import quantum_core as qc
from qda import shadow_tomography as sh
from qda.errors import DimensionMismatch, InvalidInput, OverBudget, ResourceCapExceeded
from qda.threshold_search import ThresholdInstance

seeds = st.integers(0, 2 ** 32 - 1)
ONE = qc.QuantumEvent.diagonal([1, 0])
FAMILY = harness._diagonal_projectors(2)


def _diag(p):
    return qc.QuantumState.diagonal([p, 1 - p])


def _random_stream(seed, m=20):
    rng = np.random.default_rng(seed)
    rho = qc.QuantumState.diagonal(rng.dirichlet(np.ones(2)))
    return rho, [FAMILY[j] for j in rng.integers(len(FAMILY), size=m)]


class TestStudent:
    def test_fresh_prediction_is_normalised_trace(self, rng):
        st_ = sh.new_student(3, 0.2)
        a = qc.random_event(3, rng)
        assert sh.student_predict(st_, a) == pytest.approx(np.trace(a.matrix).real / 3)
        assert sh.student_predict(st_, qc.QuantumEvent.identity(3)) == pytest.approx(1.0)

    def test_one_mistake_closed_form(self):
        eps = 0.25
        eta = eps / 2
        st1 = sh.student_update(sh.new_student(2, eps), ONE, 0.5, 0.2)
        want = np.diag([math.exp(-eta), 1.0]) / (math.exp(-eta) + 1)
        np.testing.assert_allclose(st1.hypothesis.matrix, want, atol=1e-12)
        assert st1.mistake_count == 1

    def test_opposite_mistakes_cancel(self):
        s = sh.new_student(2, 0.3)
        s = sh.student_update(s, ONE, 0.5, 0.2)
        s = sh.student_update(s, ONE, 0.3, 0.9)
        np.testing.assert_allclose(s.hypothesis.matrix, np.eye(2) / 2, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.integers(2, 4), st.floats(0.0, 1.0))
    def test_prediction_moves_toward_correction(self, seed, d, corrected):
        rng = np.random.default_rng(seed)
        s = sh.new_student(d, 0.25)
        a = qc.random_event(d, rng)
        before = sh.student_predict(s, a)
        after = sh.student_predict(sh.student_update(s, a, before, corrected), a)
        assert np.sign(after - before) * np.sign(corrected - before) >= 0

    @settings(max_examples=30, deadline=None)
    @given(seeds, st.integers(2, 4), st.integers(1, 12))
    def test_hypothesis_stays_a_state(self, seed, d, steps):
        rng = np.random.default_rng(seed)
        s = sh.new_student(d, 0.2)
        for _ in range(steps):
            a = qc.random_event(d, rng)
            s = sh.student_update(s, a, sh.student_predict(s, a), rng.uniform())
        w = np.linalg.eigvalsh(s.hypothesis.matrix)
        assert w.min() >= -1e-9
        assert abs(np.trace(s.hypothesis.matrix).real - 1) < 1e-9

    def test_dimension_checked(self):
        with pytest.raises(DimensionMismatch):
            sh.student_predict(sh.new_student(2, 0.2), qc.QuantumEvent.identity(3))


class TestConfig:
    def test_rounds(self):
        cfg = sh.ShadowConfig(0.25, 0.2, 2.0)
        assert cfg.rounds(2) == math.ceil(2.0 * math.log(2) / 0.0625) + 1 == 24
        assert cfg.round_delta(2) == pytest.approx(0.2 / 24)

    def test_invalid(self):
        with pytest.raises(InvalidInput):
            sh.ShadowConfig(0.6, 0.2)
        with pytest.raises(InvalidInput):
            sh.ShadowConfig(0.2, 0.2, 0.0)

    @pytest.mark.parametrize("acc,delta", [(0.1, 0.1), (0.05, 0.01)])
    def test_estimate_copies_certified(self, acc, delta):
        from scipy.stats import binom
        h = sh.estimate_copies(acc, delta)
        p = np.linspace(0, 1, 101)
        bad = binom.cdf(np.ceil(h * (p - acc) - 1e-12) - 1, h, p) + \
            binom.sf(np.floor(h * (p + acc) + 1e-12), h, p)
        assert bad.max() <= delta


class TestUpgradedSearch:
    def test_all_within(self):
        inst = ThresholdInstance(pairs=[(ONE, 0.3), (ONE, 0.3)], epsilon=0.2, delta=0.2)
        kinds = [sh.upgraded_search(inst, _diag(0.3), s).kind for s in range(40)]
        _, _, hi = harness.proportion_ci(kinds.count("all_within"), 40)
        assert hi >= 0.8

    def test_large_deviation_found_and_estimated(self):
        inst = ThresholdInstance(pairs=[(ONE, 0.8)], epsilon=0.2, delta=0.2)
        good = 0
        for s in range(40):
            res = sh.upgraded_search(inst, _diag(0.3), s)
            good += res.kind == "deviation" and res.index == 0 and abs(res.estimate - 0.3) <= 0.05
        _, _, hi = harness.proportion_ci(good, 40)
        assert hi >= 0.8

    def test_identity_at_threshold_one(self):
        inst = ThresholdInstance(pairs=[(qc.QuantumEvent.identity(2), 1.0)], epsilon=0.2,
                                 delta=0.2)
        for s in range(10):
            assert sh.upgraded_search(inst, _diag(0.4), s).kind == "all_within"


class TestShadowTomography:
    def test_identity_stream(self):
        ident = qc.QuantumEvent.identity(2)
        res = sh.shadow_tomography([ident] * 5, qc.QuantumState.maximally_mixed(2), seed=0)
        np.testing.assert_allclose(res.estimates, 1.0)
        assert res.mistakes == 0 and res.rounds_used == 1

    def test_random_streams_accurate(self):
        ok = 0
        for s in range(30):
            rho, events = _random_stream(s)
            res = sh.shadow_tomography(events, rho, seed=s)
            truth = [qc.expectation(rho, e) for e in events]
            ok += np.max(np.abs(np.array(res.estimates) - truth)) <= 0.25
            assert res.mistakes <= res.rounds - 1
        _, _, hi = harness.proportion_ci(ok, 30)
        assert hi >= 0.8

    def test_teacher_properties(self):
        eps = 0.25
        held = 0
        for s in range(20):
            rho, events = _random_stream(100 + s)
            res = sh.shadow_tomography(events, rho, seed=s)
            truth = [qc.expectation(rho, e) for e in events]
            fine = True
            for rec in res.records:
                mu = truth[rec["t"]]
                if rec["outcome"] == "pass":
                    fine &= abs(rec["predicted"] - mu) <= eps
                else:
                    fine &= abs(rec["predicted"] - mu) > 0.75 * eps
                    fine &= abs(rec["corrected"] - mu) <= eps / 4
            held += fine
        _, _, hi = harness.proportion_ci(held, 20)
        assert hi >= 0.8

    def test_estimates_follow_records(self):
        rho, events = _random_stream(7)
        res = sh.shadow_tomography(events, rho, seed=3)
        for rec, est in zip(res.records, res.estimates):
            want = rec["predicted"] if rec["outcome"] == "pass" else rec["corrected"]
            assert est == want
        assert [r["t"] for r in res.records] == list(range(len(events)))

    def test_deterministic(self):
        rho, events = _random_stream(8)
        a = sh.shadow_tomography(events, rho, seed=11)
        b = sh.shadow_tomography(events, rho, seed=11)
        assert a.estimates == b.estimates and a.records == b.records

    def test_adaptive_stream(self):
        ok = 0
        for s in range(20):
            inst = harness.generate_instance("adversarial-stream", 2, 10, s, diagonal=True)
            chosen = []

            def stream(t, estimates, _inst=inst, _chosen=chosen):
                ev, _ = _inst.adversary(t, [float(x) for x in estimates])
                _chosen.append(ev)
                return ev

            res = sh.shadow_tomography(stream, inst.rho, seed=s, m=10)
            truth = [qc.expectation(inst.rho, e) for e in chosen]
            assert len(chosen) == 10
            ok += np.max(np.abs(np.array(res.estimates) - truth)) <= 0.25
        _, _, hi = harness.proportion_ci(ok, 20)
        assert hi >= 0.8

    def test_over_budget_is_explicit(self):
        # two batches cannot absorb the corrections needed for a far-off pure state
        cfg = sh.ShadowConfig(0.25, 0.2, mistake_constant=0.01)
        assert cfg.rounds(2) == 2
        with pytest.raises(OverBudget):
            sh.shadow_tomography([ONE] * 6, _diag(1.0), cfg, seed=0)

    def test_non_diagonal_stream_hits_cap(self, rng):
        rho = qc.random_state(2, rng)
        with pytest.raises(ResourceCapExceeded):
            sh.shadow_tomography([qc.random_event(2, rng) for _ in range(3)], rho, seed=0)

    def test_adaptive_needs_length(self):
        with pytest.raises(InvalidInput):
            sh.shadow_tomography(lambda t, e: ONE, _diag(0.5))
