import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qeopt.encoding import encode_target, make_scheme, uniform_lambdas
from qeopt.estimator import (
    build_cost_hamiltonian,
    cost_hamiltonian_terms,
    estimate_cost,
    exact_group_stats,
    shot_group_stats,
)
from qeopt.problem import cost, generate_sk
from qeopt.rng import stream
from qeopt.simulator import Statevector, init_plus


def random_state(rng, n):
    amps = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return Statevector(n, amps / np.linalg.norm(amps))


class TestExactStats:
    def test_plus_state(self, n4_scheme):
        stats = exact_group_stats(n4_scheme, init_plus(3))
        np.testing.assert_allclose(stats.p_label, 0.5)
        np.testing.assert_allclose(stats.zbar, 0.0, atol=1e-14)
        assert stats.observed.all()
        assert stats.source == "exact"

    def test_encoded_string_has_definite_values(self, n4_scheme):
        rng = np.random.default_rng(8)
        z = rng.choice([-1, 1], size=4)
        state = Statevector(3, encode_target(n4_scheme, z, uniform_lambdas(n4_scheme)))
        stats = exact_group_stats(n4_scheme, state)
        np.testing.assert_allclose(stats.zbar, z, atol=1e-12)
        assert stats.pair_corr[(0, 1)] == pytest.approx(z[0] * z[1])
        assert stats.pair_corr[(2, 3)] == pytest.approx(z[2] * z[3])

    def test_supp_bell_pattern(self, n4_scheme):
        # c0 = c3 = 1/sqrt(2): zbar vanishes, corr(0,1) = +1
        amps = np.zeros(8, dtype=complex)
        amps[0] = amps[3] = 2**-0.5
        stats = exact_group_stats(n4_scheme, Statevector(3, amps))
        assert stats.zbar[0] == pytest.approx(0.0, abs=1e-14)
        assert stats.zbar[1] == pytest.approx(0.0, abs=1e-14)
        assert stats.pair_corr[(0, 1)] == pytest.approx(1.0)
        assert not stats.observed[1]

    def test_unobserved_label_flagged_and_zeroed(self, n4_scheme):
        amps = np.zeros(8, dtype=complex)
        amps[1] = 1.0  # support only on label 0
        stats = exact_group_stats(n4_scheme, Statevector(3, amps))
        assert stats.observed[0] and not stats.observed[1]
        assert stats.n_unobserved == 1
        np.testing.assert_array_equal(stats.zbar[2:], 0.0)
        assert stats.pair_corr[(2, 3)] == 0.0


class TestShotStats:
    def test_concentrated_counts(self, n4_scheme):
        stats = shot_group_stats(n4_scheme, {0b001: 50}, 50)
        np.testing.assert_allclose(stats.zbar[:2], [1, -1])
        assert stats.pair_corr[(0, 1)] == pytest.approx(-1.0)
        assert not stats.observed[1]
        assert stats.n_shots == 50

    def test_counts_must_sum(self, n4_scheme):
        with pytest.raises(ValueError):
            shot_group_stats(n4_scheme, {0: 3}, 5)

    def test_converges_to_exact(self, n4_instance, n4_scheme):
        from qeopt.ansatz import LayerParams, run_ansatz

        trace = run_ansatz(n4_instance, n4_scheme, [LayerParams(0.9, 0.3, 0.2)])
        exact = exact_group_stats(n4_scheme, trace.final_state)
        counts = trace.final_state.sample(10_000, seed=3)
        shots = shot_group_stats(n4_scheme, counts, 10_000)
        np.testing.assert_allclose(shots.zbar, exact.zbar, atol=0.05)
        for key in exact.pair_corr:
            assert shots.pair_corr[key] == pytest.approx(exact.pair_corr[key], abs=0.05)

    def test_conditionally_unbiased_pair_correlation(self, n4_scheme):
        rng = np.random.default_rng(17)
        state = random_state(rng, 3)
        exact = exact_group_stats(n4_scheme, state)
        reps = 200
        values = np.empty(reps)
        for rep in range(reps):
            counts = state.sample(1000, seed=rep, key=("unbiased",))
            stats = shot_group_stats(n4_scheme, counts, 1000)
            assert stats.observed.all()  # 1000 shots, both labels near 1/2
            values[rep] = stats.pair_corr[(0, 1)]
        se = values.std(ddof=1) / np.sqrt(reps)
        assert abs(values.mean() - exact.pair_corr[(0, 1)]) < max(3 * se, 1e-12)


class TestCost:
    def test_d_equals_n_reduces_to_plain_expectation(self):
        n = 4
        inst = generate_sk(n, "pm1", seed=2)
        scheme = make_scheme(n, n)
        rng = np.random.default_rng(0)
        state = random_state(rng, n)
        stats = exact_group_stats(scheme, state)
        got = estimate_cost(inst, scheme, stats).total
        # direct <sum w Z Z> via the classical diagonal
        diag = np.empty(1 << n)
        for k in range(1 << n):
            z = np.array([1 - 2 * ((k >> (n - 1 - i)) & 1) for i in range(n)])
            diag[k] = cost(inst, z)
        assert got == pytest.approx(state.expectation_diagonal(diag), abs=1e-9)

    def test_fixture_final_state_cost(self, n4_instance, n4_scheme):
        # hand-built optimal state: (|0>+|1>) x (|01>+|10>) / 2
        amps = np.zeros(8, dtype=complex)
        amps[[0b001, 0b010, 0b101, 0b110]] = 0.5
        stats = exact_group_stats(n4_scheme, Statevector(3, amps))
        breakdown = estimate_cost(n4_instance, n4_scheme, stats)
        assert breakdown.total == pytest.approx(-2.0)
        assert breakdown.intra == pytest.approx(-2.0)
        assert breakdown.inter == pytest.approx(0.0, abs=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_encoded_strings_reproduce_classical_cost(self, seed):
        rng = np.random.default_rng(seed)
        n, d = [(4, 2), (8, 2), (8, 4), (16, 4)][seed % 4]
        inst = generate_sk(n, "gaussian", seed=seed)
        scheme = make_scheme(n, d)
        z = rng.choice([-1, 1], size=n)
        amps = encode_target(scheme, z, uniform_lambdas(scheme))
        stats = exact_group_stats(scheme, Statevector(scheme.n_qubits, amps))
        assert estimate_cost(inst, scheme, stats).total == pytest.approx(cost(inst, z), abs=1e-9)


class TestHamiltonian:
    def test_plus_state_operator_of_the_worked_example(self, n4_instance, n4_scheme):
        stats = exact_group_stats(n4_scheme, init_plus(3))
        ham = build_cost_hamiltonian(n4_instance, n4_scheme, stats)
        np.testing.assert_allclose(ham.entries, [2, -2, -2, 2, 2, -2, -2, 2])

    def test_zero_zbar_has_no_one_body_terms(self, n4_instance, n4_scheme):
        stats = exact_group_stats(n4_scheme, init_plus(3))
        terms = cost_hamiltonian_terms(n4_instance, n4_scheme, stats)
        assert all(len(t.data_qubits) == 2 for t in terms)
        assert len(terms) == 2
        coeffs = {t.label: t.coefficient for t in terms}
        assert coeffs[0] == pytest.approx(2.0)  # w01 / (1/2)
        assert coeffs[1] == pytest.approx(2.0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_expectation_identity(self, seed):
        """<psi|H[psi]|psi> equals the assembled cost, q <= 8."""
        rng = np.random.default_rng(seed)
        n, d = [(4, 2), (8, 2), (8, 4), (16, 4), (8, 8)][seed % 5]
        inst = generate_sk(n, "gaussian", seed=seed + 1)
        scheme = make_scheme(n, d)
        state = random_state(rng, scheme.n_qubits)
        stats = exact_group_stats(scheme, state)
        ham = build_cost_hamiltonian(inst, scheme, stats)
        assert state.expectation_diagonal(ham) == pytest.approx(
            estimate_cost(inst, scheme, stats).total, abs=1e-9
        )

    def test_terms_match_dense_diagonal(self, n4_instance, n4_scheme):
        rng = np.random.default_rng(5)
        state = random_state(rng, 3)
        stats = exact_group_stats(n4_scheme, state)
        terms = cost_hamiltonian_terms(n4_instance, n4_scheme, stats)
        dense = build_cost_hamiltonian(n4_instance, n4_scheme, stats)
        rebuilt = np.zeros(8)
        for term in terms:
            for k in range(8):
                if (k >> 2) != term.label:
                    continue
                s = 1.0
                for dq in term.data_qubits:
                    s *= 1 - 2 * ((k >> (1 - dq)) & 1)
                rebuilt[k] += term.coefficient * s
        np.testing.assert_allclose(rebuilt, dense.entries, atol=1e-12)

    def test_unobserved_label_terms_dropped(self, n4_instance, n4_scheme, caplog):
        amps = np.zeros(8, dtype=complex)
        amps[0b001] = 1.0
        stats = exact_group_stats(n4_scheme, Statevector(3, amps))
        assert stats.n_unobserved == 1
        with caplog.at_level(logging.DEBUG):
            ham = build_cost_hamiltonian(n4_instance, n4_scheme, stats)
        assert "unobserved" in caplog.text
        np.testing.assert_array_equal(ham.entries[4:], 0.0)

    def test_size_mismatch_rejected(self, n4_instance):
        scheme = make_scheme(8, 2)
        stats = exact_group_stats(scheme, init_plus(scheme.n_qubits))
        with pytest.raises(ValueError):
            estimate_cost(n4_instance, scheme, stats)
