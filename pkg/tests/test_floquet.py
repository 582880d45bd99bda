import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from couplergate.floquet import (FloquetFrame, identify_leakage_candidates, quasienergies,
                                 quasienergy_map, rwa_hamiltonian)
from couplergate.hilbert import DeviceSpec, ModeSpec
from couplergate.pulse import ConstantEnvelope, DriveSchedule, DriveSpec, two_tone

ABA_DRIVES = two_tone("C", (8.654, 7.744), ConstantEnvelope(0.16))


def test_frame_requires_two_distinct_tones():
    with pytest.raises(ValueError):
        FloquetFrame.from_schedule(DriveSchedule((DriveSpec("C", 8.6, ConstantEnvelope(0.1)),)))
    with pytest.raises(ValueError):
        FloquetFrame.from_schedule(two_tone("C", (8.6, 8.6), ConstantEnvelope(0.1)))


def test_fold_range():
    frame = FloquetFrame(1.0, 0.3)
    folded = frame.fold(np.linspace(-5, 5, 101))
    assert np.all(folded >= -0.15) and np.all(folded < 0.15)
    np.testing.assert_allclose(np.mod(folded - np.linspace(-5, 5, 101) + 1e-12, 0.3), 0.0, atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 1e4))
def test_rwa_hamiltonian_is_periodic_and_hermitian(aba, t):
    frame = FloquetFrame.from_schedule(ABA_DRIVES)
    h = rwa_hamiltonian(aba, ABA_DRIVES, frame, t)
    assert np.max(np.abs(h - rwa_hamiltonian(aba, ABA_DRIVES, frame, t + frame.period))) < 1e-10
    assert np.max(np.abs(h - h.conj().T)) < 1e-12


def test_zero_scale_matches_static_spectrum(aba):
    frame = FloquetFrame.from_schedule(ABA_DRIVES)
    col = quasienergies(aba, ABA_DRIVES, frame, scale=0.0)
    h0 = rwa_hamiltonian(aba, ABA_DRIVES, frame, 0.0, scale=0.0)
    expected = np.sort(frame.fold(np.linalg.eigvalsh(h0)))
    np.testing.assert_allclose(np.sort(col.quasienergies), expected, atol=1e-8)
    assert col.quasienergies.size == aba.dimension


def test_resonant_two_level_quasienergy_splitting():
    dev = DeviceSpec((ModeSpec("Q", 5.0, 0.0, 2),))
    omega = 0.01
    sched = DriveSchedule((DriveSpec("Q", 5.0, ConstantEnvelope(omega)),
                           DriveSpec("Q", 5.05, ConstantEnvelope(0.0))))
    col = quasienergies(dev, sched)
    split = abs(col.quasienergies[1] - col.quasienergies[0])
    assert split == pytest.approx(2 * math.pi * omega, rel=0.01)


@pytest.mark.slow
def test_aba_neighbours_of_100_include_002(aba):
    qmap = quasienergy_map(aba, ABA_DRIVES, [0.0, 0.5, 1.0])
    ranking = identify_leakage_candidates(qmap, (1, 0, 0), 2 * math.pi * 0.1)
    assert (0, 0, 2) in ranking.labels
    assert ranking.labels[0] == (0, 0, 2)
