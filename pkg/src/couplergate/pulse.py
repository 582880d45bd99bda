"""Microwave drive envelopes and schedules for the coupler drives."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .hilbert import DeviceSpec, angular, drive_operator

# envelope kinds understood by the compiled integrator
FLAT_TOP = 0
CONSTANT = 1


@dataclass(frozen=True)
class Envelope:
    """Flat-top pulse with Gaussian-segment ramps.

    ``duration`` is the full pulse length t_p; the ramps occupy
    ``[0, ramp_time]`` and ``[t_p - ramp_time, t_p]``.  ``amplitude`` is the
    plateau drive strength in GHz.
    """

    amplitude: float
    ramp_time: float
    sigma: float
    duration: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not 0 < self.ramp_time <= 0.5 * self.duration:
            raise ValueError(
                f"ramp time {self.ramp_time} ns must lie in (0, t_p/2] for t_p = {self.duration} ns")

    @classmethod
    def from_sigma(cls, amplitude: float, sigma: float, duration: float, ramp_ratio: float = 0.5):
        """Ramp time tied to the Gaussian width, ``t_r = ramp_ratio * sigma``."""
        return cls(amplitude, ramp_ratio * sigma, sigma, duration)

    kind = FLAT_TOP

    def __call__(self, t):
        return envelope_value(self, t)


@dataclass(frozen=True)
class ConstantEnvelope:
    """Always-on drive of fixed amplitude (GHz); used for scans and Floquet analysis."""

    amplitude: float
    duration: float = math.inf

    kind = CONSTANT

    def __call__(self, t):
        return envelope_value(self, t)


def _ramp(x: np.ndarray, tr: float, sigma: float) -> np.ndarray:
    floor = math.exp(-tr * tr / (2 * sigma * sigma))
    return (np.exp(-x * x / (2 * sigma * sigma)) - floor) / (1.0 - floor)


def envelope_value(env: Envelope | ConstantEnvelope, t):
    """Dimensionless shape G(t); zero outside the pulse."""
    t_arr = np.asarray(t, dtype=float)
    if env.kind == CONSTANT:
        out = np.where(t_arr >= 0.0, 1.0, 0.0)
        if math.isfinite(env.duration):
            out = np.where(t_arr > env.duration, 0.0, out)
        return out if out.ndim else float(out)
    tr, sigma, tp = env.ramp_time, env.sigma, env.duration
    out = np.zeros_like(t_arr)
    rise = (t_arr >= 0) & (t_arr <= tr)
    flat = (t_arr > tr) & (t_arr < tp - tr)
    fall = (t_arr >= tp - tr) & (t_arr <= tp) & ~rise
    out[rise] = _ramp(t_arr[rise] - tr, tr, sigma)
    out[flat] = 1.0
    out[fall] = _ramp(t_arr[fall] - (tp - tr), tr, sigma)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DriveSpec:
    """One carrier tone on one mode: ``A G(t) cos(omega t + phase) (q + q^dag)``."""

    target: str
    frequency: float  # GHz
    envelope: Envelope | ConstantEnvelope
    phase: float = 0.0

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError("carrier frequency must be positive")

    def with_frequency(self, frequency: float) -> DriveSpec:
        return replace(self, frequency=frequency)

    def with_envelope(self, envelope) -> DriveSpec:
        return replace(self, envelope=envelope)

    def coefficient(self, t):
        """Scalar prefactor of the quadrature operator at time t (rad/ns)."""
        return (angular(self.envelope.amplitude) * envelope_value(self.envelope, t)
                * np.cos(angular(self.frequency) * np.asarray(t) + self.phase))


@dataclass(frozen=True)
class DriveSchedule:
    drives: tuple[DriveSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "drives", tuple(self.drives))

    @property
    def duration(self) -> float:
        if not self.drives:
            return 0.0
        return max(d.envelope.duration for d in self.drives)

    def validate(self, device: DeviceSpec) -> None:
        for d in self.drives:
            device.index_of(d.target)

    def scaled(self, factor: float) -> DriveSchedule:
        return DriveSchedule(tuple(
            replace(d, envelope=replace(d.envelope, amplitude=d.envelope.amplitude * factor))
            for d in self.drives))

    def as_constant(self, duration: float = math.inf) -> DriveSchedule:
        """Same carriers held at their plateau amplitude."""
        return DriveSchedule(tuple(
            replace(d, envelope=ConstantEnvelope(d.envelope.amplitude, duration)) for d in self.drives))

    def with_envelope(self, envelope) -> DriveSchedule:
        return DriveSchedule(tuple(d.with_envelope(envelope) for d in self.drives))


def two_tone(target: str, freqs: Sequence[float], envelope) -> DriveSchedule:
    return DriveSchedule(tuple(DriveSpec(target, f, envelope) for f in freqs))


def drive_hamiltonian(schedule: DriveSchedule, device: DeviceSpec, t: float) -> np.ndarray:
    out = np.zeros((device.dimension,) * 2, dtype=complex)
    for d in schedule.drives:
        out += d.coefficient(t) * drive_operator(d.target, device)
    return out


def pack_drives(schedule: DriveSchedule) -> np.ndarray:
    """Row per drive: amplitude (rad/ns), carrier (rad/ns), phase, kind, t_r, sigma, t_p."""
    rows = []
    for d in schedule.drives:
        e = d.envelope
        if e.kind == CONSTANT:
            tr, sigma, tp = 0.0, 1.0, (e.duration if math.isfinite(e.duration) else 1e300)
        else:
            tr, sigma, tp = e.ramp_time, e.sigma, e.duration
        rows.append([angular(e.amplitude), angular(d.frequency), d.phase, float(e.kind), tr, sigma, tp])
    return np.array(rows, dtype=float).reshape(-1, 7)
