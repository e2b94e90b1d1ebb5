import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qeopt.encoding import (
    basis_spin_table,
    data_bits_to_spins,
    decode_shot,
    encode_target,
    make_scheme,
    spins_to_data_bits,
    uniform_lambdas,
)


class TestMakeScheme:
    def test_n12_d3_needs_five_qubits(self):
        scheme = make_scheme(12, 3)
        assert scheme.n_label_qubits == 2
        assert scheme.n_qubits == 5
        assert not scheme.padded

    def test_d_equals_n_has_no_label_register(self):
        scheme = make_scheme(4, 4)
        assert scheme.n_label_qubits == 0
        assert scheme.n_qubits == 4
        assert scheme.n_groups == 1

    def test_padding_raises_to_next_pow2_multiple(self):
        scheme = make_scheme(12, 4, allow_padding=True)
        assert scheme.n_vars == 16
        assert scheme.n_label_qubits == 2
        assert scheme.n_qubits == 6
        assert scheme.padded
        assert scheme.n_vars_raw == 12

    def test_non_pow2_group_count_rejected_without_padding(self):
        with pytest.raises(ValueError, match="power of two"):
            make_scheme(12, 4)

    @pytest.mark.parametrize("n, d", [(4, 5), (4, 0), (1, 1)])
    def test_invalid_sizes(self, n, d):
        with pytest.raises(ValueError):
            make_scheme(n, d)


class TestIndexMaps:
    def test_label_of(self):
        scheme = make_scheme(12, 3)
        assert scheme.label_of(5) == 1
        assert scheme.label_of(0) == 0

    def test_d1_every_variable_its_own_group(self):
        scheme = make_scheme(8, 1)
        assert scheme.label_of(7) == 7
        assert scheme.data_qubit_of(7) == 0

    def test_data_qubit_of(self):
        scheme = make_scheme(12, 3)
        assert scheme.data_qubit_of(5) == 2
        assert scheme.data_qubit_of(3) == 0

    def test_d_equals_n_identity_map(self):
        scheme = make_scheme(8, 8)
        for k in range(8):
            assert scheme.data_qubit_of(k) == k
            assert scheme.label_of(k) == 0

    def test_out_of_range(self):
        scheme = make_scheme(12, 3)
        with pytest.raises(IndexError):
            scheme.label_of(12)
        with pytest.raises(IndexError):
            scheme.data_qubit_of(-1)

    @given(st.sampled_from([(4, 1), (4, 2), (4, 4), (8, 2), (16, 4), (12, 3)]))
    def test_index_map_is_bijective(self, shape):
        n, d = shape
        scheme = make_scheme(n, d)
        images = {(scheme.label_of(i), scheme.data_qubit_of(i)) for i in range(n)}
        assert len(images) == n
        assert images == {(l, a) for l in range(scheme.n_groups) for a in range(d)}


class TestEncodeTarget:
    def test_ground_state_of_the_worked_example(self, n4_scheme):
        z = np.array([1, -1, 1, -1])
        amps = encode_target(n4_scheme, z, uniform_lambdas(n4_scheme))
        expected = np.zeros(8, dtype=complex)
        expected[0b001] = expected[0b101] = 1 / np.sqrt(2)
        np.testing.assert_allclose(amps, expected, atol=1e-15)

    def test_d_equals_n_gives_product_state(self):
        scheme = make_scheme(4, 4)
        z = np.array([1, -1, -1, 1])
        amps = encode_target(scheme, z, np.array([1.0]))
        expected = np.zeros(16, dtype=complex)
        expected[0b0110] = 1.0
        np.testing.assert_allclose(amps, expected, atol=1e-15)

    def test_all_up_uniform_lambda_hand_built(self, n4_scheme):
        amps = encode_target(n4_scheme, np.ones(4), uniform_lambdas(n4_scheme))
        hand = np.zeros(8, dtype=complex)
        hand[0b000] = hand[0b100] = 1 / np.sqrt(2)
        np.testing.assert_allclose(amps, hand, atol=1e-15)

    def test_norm_and_support(self, n4_scheme):
        rng = np.random.default_rng(0)
        lam = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        lam /= np.linalg.norm(lam)
        amps = encode_target(n4_scheme, np.array([1, 1, -1, -1]), lam)
        assert abs(np.linalg.norm(amps) - 1) < 1e-12
        assert np.count_nonzero(amps) == n4_scheme.n_groups

    def test_unnormalized_lambdas_rejected(self, n4_scheme):
        with pytest.raises(ValueError, match="normalized"):
            encode_target(n4_scheme, np.ones(4), np.array([1.0, 1.0]))

    def test_bad_spins_rejected(self, n4_scheme):
        with pytest.raises(ValueError):
            encode_target(n4_scheme, np.array([1, 0, 1, -1]), uniform_lambdas(n4_scheme))


class TestDecodeShot:
    def test_supp_table_rows(self, n4_scheme):
        label, partial = decode_shot(n4_scheme, 0b001)
        assert label == 0
        np.testing.assert_array_equal(partial, [1, -1])
        label, partial = decode_shot(n4_scheme, 0b100)
        assert label == 1
        np.testing.assert_array_equal(partial, [1, 1])

    def test_d_equals_n_full_string(self):
        scheme = make_scheme(4, 4)
        label, partial = decode_shot(scheme, 0b0101)
        assert label == 0
        np.testing.assert_array_equal(partial, [1, -1, 1, -1])

    def test_out_of_range(self, n4_scheme):
        with pytest.raises(IndexError):
            decode_shot(n4_scheme, 8)

    @given(st.integers(0, 3), st.integers(0, 3))
    def test_round_trip_single_basis_states(self, label, pattern):
        scheme = make_scheme(8, 2)
        index = (label << 2) | pattern
        got_label, partial = decode_shot(scheme, index)
        assert got_label == label
        assert spins_to_data_bits(partial) == pattern


@settings(max_examples=30)
@given(st.integers(1, 6), st.integers(0, 63))
def test_bit_packing_round_trip(d, bits):
    bits = bits & ((1 << d) - 1)
    assert spins_to_data_bits(data_bits_to_spins(bits, d)) == bits


def test_spin_table_matches_scalar_decoding():
    table = basis_spin_table(3)
    for pattern in range(8):
        np.testing.assert_array_equal(table[pattern], data_bits_to_spins(pattern, 3))
