import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from couplergate.hilbert import bare_hamiltonian, computational_labels
from couplergate.spectrum import (LabelingError, dressed_basis, dressed_label, eigensystem,
                                  greedy_assignment, zz_strength, zz_sweep)

import oracles

# frozen from the kron-built oracle in oracles.py
ZZ_ABA_KHZ = -273.13554327611513
ZZ_ABC_KHZ = -36.265266619637664


def test_diagonal_input():
    sys = eigensystem(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_allclose(sys.values, [1, 2, 3])
    np.testing.assert_allclose(np.abs(sys.vectors), np.eye(3)[:, [1, 2, 0]])


def test_pauli_x():
    np.testing.assert_allclose(eigensystem(np.array([[0.0, 1.0], [1.0, 0.0]])).values, [-1, 1])


def test_non_hermitian_rejected():
    with pytest.raises(ValueError):
        eigensystem(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_random_hermitian_reconstruction():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    h = a + a.conj().T
    sys = eigensystem(h)
    np.testing.assert_allclose(sys.vectors @ np.diag(sys.values) @ sys.vectors.conj().T, h, atol=1e-9)


@given(arrays(float, (6, 6), elements=st.floats(0, 1)))
def test_greedy_assignment_is_a_permutation(w):
    match = greedy_assignment(w)
    assert sorted(match.tolist()) == list(range(6))


def test_greedy_assignment_takes_largest_first():
    w = np.array([[0.6, 0.4], [0.9, 0.1]])
    np.testing.assert_array_equal(greedy_assignment(w), [1, 0])


def test_zero_couplings_identity_labels(aba):
    dev = aba.with_couplings(())
    levels = dressed_label(dev, eigensystem(bare_hamiltonian(dev)))
    assert all(lv.overlap == pytest.approx(1.0) for lv in levels.values())
    assert zz_strength(dev).zeta_khz == 0.0


@pytest.mark.parametrize("name", ["aba", "abc"])
def test_computational_states_dispersive(name, request):
    dev = request.getfixturevalue(name)
    levels = dressed_label(dev, eigensystem(bare_hamiltonian(dev)), computational_labels(dev, ("Q1", "Q2")))
    assert all(lv.overlap > 0.9 for lv in levels.values())


def test_zz_table_devices_match_oracle(aba, abc):
    assert zz_strength(aba).zeta_khz == pytest.approx(ZZ_ABA_KHZ, rel=1e-7)
    assert zz_strength(abc).zeta_khz == pytest.approx(ZZ_ABC_KHZ, rel=1e-7)


def test_zz_table_devices_near_quoted_values(aba, abc):
    assert zz_strength(aba).zeta_khz == pytest.approx(-273, rel=0.15)
    assert zz_strength(abc).zeta_khz == pytest.approx(-36, rel=0.15)



@pytest.mark.parametrize("name", ["aba", "abc"])
def test_zz_converged_in_truncation(name, request):
    dev = request.getfixturevalue(name)
    four, five = (zz_strength(dev.with_levels(n)).zeta_khz for n in (4, 5))
    assert abs(four - five) <= 1e-3 * abs(five)

@settings(max_examples=15, deadline=None)
@given(st.floats(4.6, 5.4), st.floats(5.6, 6.4))
def test_zz_matches_oracle_across_frequencies(aba, w1, w2):
    dev = aba.with_mode("Q1", frequency=w1).with_mode("Q2", frequency=w2)
    modes = dict(oracles.ABA_MODES, Q1=(w1, -0.2), Q2=(w2, -0.2))
    ref = oracles.zz_khz(oracles.duffing(modes, oracles.ABA_G))
    assert zz_strength(dev).zeta_khz == pytest.approx(ref, rel=1e-6, abs=1e-3)


def test_dressed_basis_is_phase_fixed_and_orthonormal(aba):
    labels = computational_labels(aba, ("Q1", "Q2"))
    v = dressed_basis(aba, labels)
    np.testing.assert_allclose(v.conj().T @ v, np.eye(4), atol=1e-12)
    for k, lab in enumerate(labels):
        c = v[16 * lab[0] + 4 * lab[1] + lab[2], k]
        assert c.real > 0 and abs(c.imag) < 1e-14


def test_min_overlap_enforced(aba):
    with pytest.raises(LabelingError):
        zz_strength(aba.with_mode("Q2", frequency=7.0), min_overlap=0.99)


def test_sweep_cell_matches_single_point(aba):
    sweep = zz_sweep(aba, [4.9, 5.0, 5.1], [5.8, 5.9, 6.0])
    assert sweep.zeta_khz.shape == (3, 3)
    assert sweep.zeta_khz[1, 1] == zz_strength(aba).zeta_khz
    assert len(list(sweep.rows())) == 9


def test_sweep_is_thread_invariant(aba):
    a = zz_sweep(aba, [4.8, 5.2], [5.7, 6.1], threads=1).zeta_khz
    b = zz_sweep(aba, [4.8, 5.2], [5.7, 6.1], threads=3).zeta_khz
    np.testing.assert_array_equal(a, b)


def test_empty_sweep_rejected(aba):
    with pytest.raises(ValueError):
        zz_sweep(aba, [], [5.9])
