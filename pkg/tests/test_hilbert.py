import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from couplergate.hilbert import (DeviceSpec, ModeSpec, CouplingSpec, all_labels, bare_diagonal,
                                 bare_hamiltonian, basis_vector, computational_labels, coupling_operator,
                                 drive_operator, fock_index, format_label, label_of_index,
                                 lowering_operator, number_operator, parse_label)

import oracles


def single(levels=4, freq=5.0, alpha=-0.2):
    return DeviceSpec((ModeSpec("A", freq, alpha, levels),))


@pytest.mark.parametrize("label, index", [((0, 0, 0), 0), ((1, 0, 0), 16), ((0, 0, 2), 2)])
def test_fock_index_row_major(aba, label, index):
    assert fock_index(label, aba) == index


def test_fock_index_rejects_out_of_range(aba):
    with pytest.raises(IndexError):
        fock_index((4, 0, 0), aba)
    with pytest.raises(ValueError):
        fock_index((0, 0), aba)


@given(st.lists(st.integers(2, 5), min_size=1, max_size=4), st.data())
def test_label_index_bijection(levels, data):
    dev = DeviceSpec(tuple(ModeSpec(f"M{k}", 5.0 + k, -0.2, n) for k, n in enumerate(levels)))
    index = data.draw(st.integers(0, dev.dimension - 1))
    assert fock_index(label_of_index(index, dev), dev) == index


def test_all_labels_enumerate_basis(aba):
    labels = all_labels(aba)
    assert len(labels) == 64
    assert [fock_index(lab, aba) for lab in labels] == list(range(64))


def test_label_text_round_trip(aba):
    assert parse_label("102", aba) == (1, 0, 2)
    assert format_label((1, 0, 2)) == "102"
    assert parse_label("|1,0>", aba) == (1, 0, 0)


def test_ladder_matrix_elements():
    a = lowering_operator("A", single())
    assert a[0, 1] == pytest.approx(1)
    assert a[1, 2] == pytest.approx(math.sqrt(2))
    assert a[2, 3] == pytest.approx(math.sqrt(3))


def test_number_operator_diagonal():
    np.testing.assert_allclose(number_operator("A", single()), np.diag([0, 1, 2, 3]))


def test_truncated_commutator_below_cutoff():
    a = lowering_operator("A", single())
    comm = a @ a.conj().T - a.conj().T @ a
    np.testing.assert_allclose(comm[:3, :3], np.eye(3), atol=1e-14)


def test_single_mode_duffing_ladder():
    w, alpha = 2 * math.pi * 5.0, 2 * math.pi * -0.2
    np.testing.assert_allclose(bare_diagonal(single()), [0, w, 2 * w + alpha, 3 * w + 3 * alpha])


def test_uncoupled_spectrum_is_separable(aba):
    dev = aba.with_couplings(())
    vals = np.linalg.eigvalsh(bare_hamiltonian(dev))
    np.testing.assert_allclose(np.sort(vals), np.sort(bare_diagonal(dev)), atol=1e-9)


def test_table_device_hamiltonian_matches_kron_oracle(aba):
    h = bare_hamiltonian(aba)
    assert h.shape == (64, 64)
    assert np.max(np.abs(h - h.conj().T)) < 1e-12
    np.testing.assert_allclose(h, oracles.duffing(oracles.ABA_MODES, oracles.ABA_G), atol=1e-10)


def test_drive_operator_properties():
    x = drive_operator("A", single())
    np.testing.assert_allclose(x, x.T)
    np.testing.assert_allclose(np.diag(x, 1), [1, math.sqrt(2), math.sqrt(3)])
    assert np.trace(x) == 0
    assert (x @ x)[0, 0] == pytest.approx(1)


def test_coupling_operator_is_hermitian_and_offdiagonal(aba):
    v = coupling_operator(aba)
    assert np.max(np.abs(v - v.conj().T)) < 1e-12
    assert np.all(np.diag(v) == 0)


def test_device_validation():
    with pytest.raises(ValueError):
        ModeSpec("A", 5.0, -0.2, 1)
    with pytest.raises(ValueError):
        CouplingSpec("A", "A", 0.1)
    with pytest.raises(KeyError):
        DeviceSpec((ModeSpec("A", 5.0),), (CouplingSpec("A", "B", 0.1),))


def test_computational_labels_follow_pair(threeq):
    assert computational_labels(threeq, ("Q1", "Q3")) == [(0, 0, 0, 0), (0, 0, 1, 0),
                                                          (1, 0, 0, 0), (1, 0, 1, 0)]
    assert basis_vector((1, 0, 1, 0), threeq)[fock_index((1, 0, 1, 0), threeq)] == 1
