import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binom

from qda import classical_stats as cs
from qda import quantum_core as qc
from qda.errors import DimensionMismatch, InvalidInput, ResourceCapExceeded, ZeroProbabilityError

seeds = st.integers(0, 2 ** 32 - 1)


def _rng(seed):
    return np.random.default_rng(seed)


class TestTypes:
    def test_state_validation(self):
        with pytest.raises(InvalidInput):
            qc.QuantumState(np.diag([0.5, 0.6]))
        with pytest.raises(InvalidInput):
            qc.QuantumState(np.diag([1.2, -0.2]))
        with pytest.raises(InvalidInput):
            qc.QuantumState(np.array([[0.5, 0.1], [0.2, 0.5]]))

    def test_event_validation(self):
        with pytest.raises(InvalidInput):
            qc.QuantumEvent(np.diag([1.5, 0.0]))
        assert qc.QuantumEvent(np.diag([1.0, 0.0])).is_projector
        assert not qc.QuantumEvent(np.diag([0.5, 0.0])).is_projector

    def test_measurement_must_resolve_identity(self):
        a = qc.QuantumEvent.diagonal([0.3, 0.6])
        qc.Measurement([a, a.complement()])
        with pytest.raises(InvalidInput):
            qc.Measurement([a, a])

    def test_immutable(self):
        rho = qc.QuantumState.maximally_mixed(2)
        with pytest.raises(ValueError):
            rho.matrix[0, 0] = 1


class TestExpectation:
    def test_examples(self, rng):
        mixed = qc.QuantumState.maximally_mixed(2)
        assert qc.expectation(mixed, qc.random_projector(2, 1, rng)) == pytest.approx(0.5)
        assert qc.expectation(qc.random_state(3, rng), qc.QuantumEvent.identity(3)) == \
            pytest.approx(1.0)
        rho = qc.QuantumState.diagonal([0.3, 0.7])
        assert qc.expectation(rho, qc.QuantumEvent.diagonal([1, 0])) == pytest.approx(0.3)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            qc.expectation(qc.QuantumState.maximally_mixed(2), qc.QuantumEvent.identity(3))

    @settings(max_examples=50, deadline=None)
    @given(seeds, st.integers(1, 6))
    def test_in_unit_interval(self, seed, d):
        rng = _rng(seed)
        e = qc.expectation(qc.random_state(d, rng), qc.random_event(d, rng))
        assert 0.0 <= e <= 1.0


class TestCollapse:
    def test_projector_containing_support(self):
        rho = qc.QuantumState.diagonal([1.0, 0.0, 0.0])
        out = qc.collapse_canonical(rho, qc.QuantumEvent.diagonal([1, 1, 0]), True)
        np.testing.assert_allclose(out.matrix, rho.matrix, atol=1e-12)

    def test_classical_conditioning(self):
        out = qc.collapse_canonical(qc.QuantumState.diagonal([0.5, 0.5]),
                                    qc.QuantumEvent.diagonal([1, 0]), True)
        np.testing.assert_allclose(out.matrix, np.diag([1.0, 0.0]), atol=1e-12)

    def test_scalar_event(self):
        rho = qc.QuantumState.maximally_mixed(2)
        out = qc.collapse_canonical(rho, qc.QuantumEvent(np.eye(2) / 2), True)
        np.testing.assert_allclose(out.matrix, rho.matrix, atol=1e-12)

    def test_zero_probability(self):
        with pytest.raises(ZeroProbabilityError):
            qc.collapse_canonical(qc.QuantumState.diagonal([1.0, 0.0]),
                                  qc.QuantumEvent.diagonal([0, 1]), True)

    @settings(max_examples=50, deadline=None)
    @given(seeds, st.integers(2, 6))
    def test_valid_state_and_completeness(self, seed, d):
        rng = _rng(seed)
        rho, a = qc.random_state(d, rng), qc.random_event(d, rng)
        p = qc.expectation(rho, a)
        yes = qc.collapse_canonical(rho, a, True)
        no = qc.collapse_canonical(rho, a, False)
        for s in (yes, no):
            assert abs(np.trace(s.matrix).real - 1) < 1e-10
            assert np.linalg.eigvalsh(s.matrix).min() > -1e-9
        avg = p * yes.matrix + (1 - p) * no.matrix
        direct = a.sqrt() @ rho.matrix @ a.sqrt() + \
            a.complement().sqrt() @ rho.matrix @ a.complement().sqrt()
        np.testing.assert_allclose(np.diag(avg), np.diag(direct), atol=1e-10)


class TestDistances:
    def test_self(self, rng):
        rho = qc.random_state(3, rng)
        assert qc.state_distance("fidelity", rho, rho) == pytest.approx(1.0, abs=1e-10)
        assert qc.state_distance("trace", rho, rho) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal(self):
        a, b = qc.QuantumState.diagonal([1, 0]), qc.QuantumState.diagonal([0, 1])
        assert qc.trace_distance(a, b) == pytest.approx(1.0)
        assert qc.fidelity(a, b) == pytest.approx(0.0)
        assert qc.bures_distance(a, b) == pytest.approx(math.sqrt(2))

    def test_diagonal_is_classical_tv(self):
        a, b = qc.QuantumState.diagonal([0.5, 0.5]), qc.QuantumState.diagonal([0.25, 0.75])
        assert qc.trace_distance(a, b) == pytest.approx(0.25)
        assert qc.trace_distance(a, b) == pytest.approx(cs.divergence("tv", [.5, .5], [.25, .75]))

    def test_unknown(self):
        with pytest.raises(InvalidInput):
            qc.state_distance("hilbert-schmidt", qc.QuantumState.maximally_mixed(2),
                              qc.QuantumState.maximally_mixed(2))

    @settings(max_examples=100, deadline=None)
    @given(seeds, st.integers(2, 6))
    def test_fuchs_caves(self, seed, d):
        rng = _rng(seed)
        rho, sigma = qc.random_state(d, rng), qc.random_state(d, rng)
        b = qc.bures_distance(rho, sigma)
        t = qc.trace_distance(rho, sigma)
        assert 0.5 * b * b <= t + 1e-9
        assert t <= b + 1e-9


class TestHelstrom:
    def test_orthogonal(self):
        a = qc.helstrom_event(qc.QuantumState.diagonal([1, 0]), qc.QuantumState.diagonal([0, 1]))
        np.testing.assert_allclose(a.matrix, np.diag([1, 0]), atol=1e-12)

    def test_equal_states(self, rng):
        rho = qc.random_state(2, rng)
        a = qc.helstrom_event(rho, rho)
        assert abs(qc.expectation(rho, a) - qc.expectation(rho, a)) == 0
        assert qc.trace_distance(rho, rho) == pytest.approx(0, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(seeds, st.integers(2, 6))
    def test_gap_equals_distance_and_is_optimal(self, seed, d):
        rng = _rng(seed)
        s1, s2 = qc.random_state(d, rng), qc.random_state(d, rng)
        a = qc.helstrom_event(s1, s2)
        dist = qc.trace_distance(s1, s2)
        assert abs(qc.expectation(s1, a) - qc.expectation(s2, a) - dist) < 1e-9
        for _ in range(4):
            e = qc.random_event(d, rng)
            assert qc.expectation(s1, e) - qc.expectation(s2, e) <= dist + 1e-9


class TestNaimark:
    def test_projector_embeds_blockwise(self):
        a = qc.QuantumEvent.diagonal([1, 0])
        pi = qc.naimark_dilate(a)
        np.testing.assert_allclose(pi.matrix, np.diag([1, 0, 0, 1]), atol=1e-12)

    def test_half_identity(self):
        pi = qc.naimark_dilate(qc.QuantumEvent(np.eye(2) / 2))
        rho = qc.dilate_state(qc.QuantumState.diagonal([1, 0]))
        assert qc.expectation(rho, pi) == pytest.approx(0.5)

    @settings(max_examples=30, deadline=None)
    @given(seeds, st.integers(1, 5))
    def test_projector_preserving_expectation(self, seed, d):
        rng = _rng(seed)
        a = qc.random_event(d, rng)
        pi = qc.naimark_dilate(a)
        np.testing.assert_allclose(pi.matrix @ pi.matrix, pi.matrix, atol=1e-9)
        for _ in range(20):
            rho = qc.random_state(d, rng)
            assert abs(qc.expectation(qc.dilate_state(rho), pi) - qc.expectation(rho, a)) < 1e-9


class TestSpectral:
    def test_projector_keeps_both_components(self):
        a = qc.QuantumEvent.diagonal([1, 0, 1])
        sd = qc.spectral(a)
        np.testing.assert_allclose(sd.eigenvalues, [1.0, 0.0])
        np.testing.assert_allclose(sd.projectors[0].matrix, a.matrix, atol=1e-12)
        np.testing.assert_allclose(sd.projectors[1].matrix, a.complement().matrix, atol=1e-12)

    def test_scalar(self):
        sd = qc.spectral(qc.QuantumEvent(np.eye(3) / 2))
        assert len(sd.pairs) == 1
        assert sd.eigenvalues[0] == pytest.approx(0.5)

    @settings(max_examples=50, deadline=None)
    @given(seeds, st.integers(1, 7))
    def test_round_trip_and_resolution(self, seed, d):
        a = qc.random_event(d, _rng(seed))
        sd = qc.spectral(a)
        assert np.all(np.diff(sd.eigenvalues) < 0)
        np.testing.assert_allclose(sd.reconstruct(), a.matrix, atol=1e-8)
        np.testing.assert_allclose(sum(p.matrix for p in sd.projectors), np.eye(d), atol=1e-9)
        for i, p in enumerate(sd.projectors):
            for q in sd.projectors[i + 1:]:
                assert np.abs(p.matrix @ q.matrix).max() < 1e-9


class TestTensor:
    def test_examples(self, rng):
        rho = qc.random_state(2, rng)
        np.testing.assert_allclose(qc.tensor_power(rho, 1).matrix, rho.matrix)
        np.testing.assert_allclose(qc.tensor(np.eye(3), np.eye(3)), np.eye(9))
        p = 0.3
        d2 = qc.tensor_power(qc.QuantumState.diagonal([p, 1 - p]), 2)
        np.testing.assert_allclose(np.diag(d2.matrix).real,
                                   [p * p, p * (1 - p), (1 - p) * p, (1 - p) ** 2])

    def test_leftmost_most_significant(self):
        a, b = qc.QuantumState.diagonal([1, 0]), qc.QuantumState.diagonal([0, 1])
        assert qc.tensor(a, b).matrix[1, 1] == 1

    def test_cap(self):
        with qc.dimension_cap(64):
            with pytest.raises(ResourceCapExceeded) as info:
                qc.tensor_power(qc.QuantumState.maximally_mixed(2), 7)
        assert info.value.required == 128 and info.value.allowed == 64

    def test_env_cap(self, monkeypatch):
        monkeypatch.setenv("QDA_DIM_CAP", "16")
        assert qc.get_dimension_cap() == 16


class TestAmplification:
    def test_c_zero_is_identity(self):
        b = qc.amplification_event(qc.QuantumEvent.diagonal([1, 0]), 3, 0.4, 0.0)
        np.testing.assert_allclose(b.matrix, np.eye(8), atol=1e-12)

    def test_certain_event(self):
        a = qc.QuantumEvent.diagonal([1, 0])
        b = qc.amplification_event(a, 4, 0.0, 0.5)
        rho = qc.tensor_power(qc.QuantumState.diagonal([1, 0]), 4)
        assert qc.expectation(rho, b) == pytest.approx(1.0)

    def test_binomial_tail_value(self):
        b = qc.amplification_event(qc.QuantumEvent.diagonal([1, 0]), 4, 0.0, 0.5)
        rho = qc.tensor_power(qc.QuantumState.diagonal([0.3, 0.7]), 4)
        assert qc.expectation(rho, b) == pytest.approx(binom.sf(1, 4, 0.3), abs=1e-12)
        assert qc.expectation(rho, b) == pytest.approx(0.3483, abs=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(seeds, st.integers(1, 5), st.floats(0, 1), st.floats(0, 1))
    def test_dense_matches_binomial(self, seed, n, tau, c):
        rng = _rng(seed)
        a, rho = qc.random_projector(2, 1, rng), qc.random_state(2, rng)
        b = qc.amplification_event(a, n, tau, c)
        np.testing.assert_allclose(b.matrix @ b.matrix, b.matrix, atol=1e-9)
        law = cs.binomial_pmf(n, qc.expectation(rho, a)).weights
        want = float(law @ qc.amplification_coefficients(n, tau, c))
        assert abs(qc.expectation(qc.tensor_power(rho, n), b) - want) < 1e-9

    @pytest.mark.parametrize("eps,delta", [(0.2, 0.1), (0.3, 0.2), (0.15, 0.05)])
    def test_error_bounds_on_grid(self, eps, delta):
        n = math.ceil(2 * math.log(2 / delta) / eps ** 2)
        for tau in np.linspace(0, 1, 6):
            for c in np.linspace(0, 0.5, 6):
                f = qc.amplification_coefficients(n, tau, c)
                for e in np.linspace(0, 1, 41):
                    fire = float(cs.binomial_pmf(n, e).weights @ f)
                    if abs(e - tau) >= c + eps:
                        assert fire >= 1 - delta
                    if abs(e - tau) <= c - eps:
                        assert fire <= delta


class TestCountEvents:
    def test_binomial_statistics(self, rng):
        a, rho = qc.random_projector(2, 1, rng), qc.random_state(2, rng)
        big = qc.tensor_power(rho, 4)
        probs = [qc.expectation(big, e) for e in qc.count_events(a, 4)]
        np.testing.assert_allclose(probs, cs.binomial_pmf(4, qc.expectation(rho, a)).weights,
                                   atol=1e-12)

    def test_count_operator_matches_sum(self, rng):
        a = qc.random_event(2, rng)
        coeffs = rng.uniform(0, 1, 4)
        direct = sum(c * e.matrix for c, e in zip(coeffs, qc.count_events(a, 3)))
        np.testing.assert_allclose(qc.count_operator(a, 3, coeffs), direct, atol=1e-12)


class TestFidelityIdentities:
    @settings(max_examples=50, deadline=None)
    @given(seeds, st.integers(2, 8))
    def test_general_observable(self, seed, d):
        rng = _rng(seed)
        rho, a = qc.random_state(d, rng), qc.random_event(d, rng)
        m = a.sqrt()
        collapsed, _ = qc.collapse_with(rho, m)
        fid = qc.fidelity(rho, collapsed)
        assert abs(fid ** 2 - qc.fid_squared_prediction(rho, m)) < 1e-9

    @settings(max_examples=30, deadline=None)
    @given(seeds, st.integers(2, 8))
    def test_projector_form(self, seed, d):
        rng = _rng(seed)
        rho = qc.random_state(d, rng)
        p = qc.random_projector(d, int(rng.integers(1, d + 1)), rng)
        collapsed = qc.collapse_canonical(rho, p, True)
        assert abs(qc.fidelity(rho, collapsed) ** 2 - qc.expectation(rho, p)) < 1e-9

    @settings(max_examples=50, deadline=None)
    @given(seeds, st.integers(2, 8))
    def test_bhattacharyya(self, seed, d):
        rng = _rng(seed)
        rho, a = qc.random_state(d, rng), qc.random_event(d, rng)
        collapsed = qc.collapse_canonical(rho, a, True)
        sd = qc.spectral(a)
        p = [qc.expectation(rho, q) for q in sd.projectors]
        q = [qc.expectation(collapsed, q) for q in sd.projectors]
        assert abs(qc.fidelity(rho, collapsed) - cs.divergence("bc", p, q)) < 1e-9


class TestDamage:
    def test_identity_chain(self, rng):
        ops = [qc.QuantumOperation.identity(2)] * 3
        assert qc.verify_damage(ops, qc.random_state(2, rng), {0, 2}) == (0.0, 0.0)

    def test_single_operation(self, rng):
        op = qc.QuantumOperation.from_event(qc.random_event(2, rng), occurred=False)
        lhs, _ = qc.verify_damage([op], qc.random_state(2, rng), {0})
        assert lhs == pytest.approx(0.0, abs=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(seeds, st.integers(1, 4))
    def test_bound_holds(self, seed, length):
        rng = _rng(seed)
        rho = qc.random_state(2, rng)
        ops = [qc.QuantumOperation.from_event(qc.random_event(2, rng), bool(rng.integers(2)))
               for _ in range(length)]
        subset = {i for i in range(length) if rng.integers(2)}
        lhs, rhs = qc.verify_damage(ops, rho, subset)
        assert lhs <= rhs + 1e-9


class TestSequentialProjective:
    def test_identity_targets(self, rng):
        ident = [qc.QuantumEvent.identity(2)] * 3
        assert qc.sequential_projective(qc.random_state(2, rng), ident, [1, 1, 1]) == \
            pytest.approx(1.0)

    def test_single(self, rng):
        rho, p = qc.random_state(2, rng), qc.random_projector(2, 1, rng)
        assert qc.sequential_projective(rho, [p], [0]) == pytest.approx(
            1 - qc.expectation(rho, p))

    def test_commuting_diagonal_is_product(self, rng):
        rho = qc.QuantumState.diagonal(rng.dirichlet(np.ones(4)))
        projs = [qc.QuantumEvent.diagonal(rng.integers(0, 2, 4)) for _ in range(3)]
        target = [1, 0, 1]
        # joint law over basis labels: product of indicator functions per label
        probs = np.diag(rho.matrix).real
        ind = np.ones(4)
        for p, bit in zip(projs, target):
            diag = np.diag(p.matrix).real
            ind = ind * (diag if bit else 1 - diag)
        assert qc.sequential_projective(rho, projs, target) == pytest.approx(float(probs @ ind))

    @settings(max_examples=100, deadline=None)
    @given(seeds, st.integers(1, 4))
    def test_gao_union_bound(self, seed, m):
        rng = _rng(seed)
        d = 2
        rho = qc.random_state(d, rng)
        projs, target = [], []
        for _ in range(m):
            p = qc.random_projector(d, 1, rng)
            bit = int(qc.expectation(rho, p) >= 0.5)
            projs.append(p)
            target.append(bit)
        eps = max(1 - (qc.expectation(rho, p) if b else 1 - qc.expectation(rho, p))
                  for p, b in zip(projs, target))
        assert qc.sequential_projective(rho, projs, target) >= 1 - 4 * eps * m - 1e-9

    def test_target_length(self, rng):
        with pytest.raises(InvalidInput):
            qc.sequential_projective(qc.random_state(2, rng), [qc.QuantumEvent.identity(2)],
                                     [1, 0])


class TestRandom:
    def test_seeded(self):
        a = qc.random_state(3, np.random.default_rng(5)).matrix
        b = qc.random_state(3, np.random.default_rng(5)).matrix
        np.testing.assert_array_equal(a, b)

    @settings(max_examples=30, deadline=None)
    @given(seeds, st.integers(1, 6))
    def test_valid(self, seed, d):
        rng = _rng(seed)
        qc.QuantumState(qc.random_state(d, rng).matrix)
        qc.QuantumState(qc.random_pure_state(d, rng).matrix)
        qc.QuantumEvent(qc.random_event(d, rng).matrix)
        assert qc.random_projector(d, d, rng).is_projector
