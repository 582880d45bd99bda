import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from couplergate.hilbert import drive_operator
from couplergate.pulse import (ConstantEnvelope, DriveSchedule, DriveSpec, Envelope, drive_hamiltonian,
                               envelope_value, pack_drives, two_tone)

import oracles

ENV = Envelope.from_sigma(0.16, 196.0, 346.0)


def test_envelope_starts_and_ends_at_zero():
    assert ENV(0.0) == pytest.approx(0.0, abs=1e-15)
    assert ENV(346.0) == pytest.approx(0.0, abs=1e-15)
    assert ENV(-1.0) == 0.0 and ENV(400.0) == 0.0


@pytest.mark.parametrize("t", [98.5, 150.0, 247.5])
def test_envelope_plateau(t):
    assert ENV(t) == 1.0


def test_ramp_point_matches_scalar_formula():
    assert ENV(49.0) == pytest.approx(oracles.flat_top(49.0, 98.0, 196.0, 346.0), rel=1e-14)


@given(st.floats(0.0, 346.0))
def test_envelope_mirror_symmetry_and_range(t):
    assert ENV(t) == pytest.approx(ENV(346.0 - t), abs=1e-12)
    assert -1e-15 <= ENV(t) <= 1.0


def test_envelope_continuous_at_branch_points():
    for t in (98.0, 248.0):
        assert ENV(t - 1e-9) == pytest.approx(ENV(t + 1e-9), abs=1e-9)


def test_vectorized_matches_scalar():
    ts = np.linspace(-10, 360, 371)
    np.testing.assert_allclose(envelope_value(ENV, ts), [oracles.flat_top(t, 98, 196, 346) for t in ts],
                               atol=1e-14)


def test_envelope_validation():
    with pytest.raises(ValueError):
        Envelope(0.1, 200.0, 100.0, 346.0)
    with pytest.raises(ValueError):
        Envelope(0.1, 50.0, 0.0, 346.0)
    with pytest.raises(ValueError):
        DriveSpec("C", 0.0, ENV)


def test_constant_envelope():
    env = ConstantEnvelope(0.1, 50.0)
    assert env(0.0) == 1.0 and env(50.0) == 1.0 and env(50.1) == 0.0 and env(-0.1) == 0.0


def test_zero_amplitude_gives_zero_operator(aba):
    sched = two_tone("C", (8.6, 7.7), Envelope.from_sigma(0.0, 196.0, 346.0))
    assert not np.any(drive_hamiltonian(sched, aba, 170.0))


def test_plateau_at_carrier_peak(aba):
    t = 200.0
    freq = 10.0 / t  # cos(2 pi f t) = 1
    sched = DriveSchedule((DriveSpec("C", freq, ENV),))
    np.testing.assert_allclose(drive_hamiltonian(sched, aba, t),
                               2 * math.pi * 0.16 * drive_operator("C", aba), atol=1e-12)


def test_two_drives_add(aba):
    s1 = DriveSchedule((DriveSpec("C", 8.6, ENV),))
    s2 = DriveSchedule((DriveSpec("C", 7.7, ENV),))
    both = two_tone("C", (8.6, 7.7), ENV)
    t = 123.4
    np.testing.assert_allclose(drive_hamiltonian(both, aba, t),
                               drive_hamiltonian(s1, aba, t) + drive_hamiltonian(s2, aba, t), atol=1e-12)


def test_schedule_validation_and_packing(aba):
    with pytest.raises(KeyError):
        DriveSchedule((DriveSpec("X", 5.0, ENV),)).validate(aba)
    rows = pack_drives(two_tone("C", (8.6, 7.7), ENV))
    assert rows.shape[0] == 2
    assert two_tone("C", (8.6, 7.7), ENV).duration == 346.0
    assert two_tone("C", (8.6, 7.7), ENV).scaled(0.5).drives[0].envelope.amplitude == pytest.approx(0.08)
