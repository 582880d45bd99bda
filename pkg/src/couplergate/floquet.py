"""Quasienergies of the two-tone driven system for leakage diagnosis.

The Hamiltonian is moved to a frame rotating every mode at the first drive
frequency and reduced with the rotating-wave approximation.  What remains
is periodic at the difference frequency nu of the two tones, so the
one-period propagator U(T), T = 2 pi / |nu|, yields quasienergies modulo nu.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import PropagationSettings, _Model, parallel_map
from .hilbert import (DeviceSpec, FockLabel, all_labels, angular, bare_diagonal,
                      computational_labels, fock_index, format_label)
from .pulse import CONSTANT, DriveSchedule
from .spectrum import greedy_assignment

UNITARITY_TOL = 1e-6


class FloquetQualityError(RuntimeError):
    """The one-period propagator is not unitary to tolerance."""


@dataclass(frozen=True)
class FloquetFrame:
    rotation: float  # rad/ns, frequency of the first tone
    nu: float  # rad/ns, second tone minus first

    def __post_init__(self):
        if self.nu == 0:
            raise ValueError("the two drive frequencies must differ")

    @property
    def period(self) -> float:
        return 2 * math.pi / abs(self.nu)

    @classmethod
    def from_schedule(cls, schedule: DriveSchedule) -> FloquetFrame:
        if len(schedule.drives) != 2:
            raise ValueError("a Floquet frame needs exactly two drive tones")
        w1, w2 = (angular(d.frequency) for d in schedule.drives)
        return cls(w1, w2 - w1)

    def fold(self, energy):
        """Map onto [-|nu|/2, |nu|/2)."""
        width = abs(self.nu)
        return np.mod(np.asarray(energy) + 0.5 * width, width) - 0.5 * width


def _rwa_parts(device: DeviceSpec, schedule: DriveSchedule, frame: FloquetFrame, scale: float):
    """Frame diagonal, static off-diagonal part, and (operator, amp, freq, phase) drive terms."""
    ops = device._ops
    total = sum(ops.number)
    diag = bare_diagonal(device) - frame.rotation * total
    static = np.zeros((device.dimension,) * 2, dtype=complex)
    for c in device.couplings:
        qa = ops.lowering[device.index_of(c.mode_a)]
        qb = ops.lowering[device.index_of(c.mode_b)]
        static += angular(c.strength) * (qa.T @ qb + qa @ qb.T)
    terms = []
    for d in schedule.drives:
        q = ops.lowering[device.index_of(d.target)]
        half = 0.5 * scale * angular(d.envelope.amplitude)
        # q^dag e^{-i nu_k t} + q e^{i nu_k t}, written with real carriers
        nu_k = angular(d.frequency) - frame.rotation
        quad, other = (q + q.T).astype(complex), 1j * (q - q.T)
        if nu_k == 0.0 and d.phase == 0.0:
            static += half * quad
            continue
        terms.append((quad, half, nu_k, d.phase))
        terms.append((other, half, nu_k, d.phase - 0.5 * math.pi))
    return diag, static, terms


def rwa_hamiltonian(device: DeviceSpec, schedule: DriveSchedule, frame: FloquetFrame, t: float,
                    scale: float = 1.0) -> np.ndarray:
    """Rotating-frame, rotating-wave Hamiltonian H_F(t) with drive amplitudes scaled by ``scale``."""
    if len(schedule.drives) != 2:
        raise ValueError("a Floquet frame needs exactly two drive tones")
    diag, static, terms = _rwa_parts(device, schedule, frame, scale)
    h = np.diag(diag).astype(complex) + static
    for op, amp, freq, phase in terms:
        h += amp * math.cos(freq * t + phase) * op
    return h


@dataclass(frozen=True)
class FloquetColumn:
    scale: float
    quasienergies: np.ndarray  # rad/ns per Floquet mode, folded
    modes: np.ndarray  # columns are t = 0 Floquet modes
    assignment: np.ndarray  # mode index for every bare basis state
    overlaps: np.ndarray  # |<bare|mode(bare)>|^2 per bare basis state

    def energy(self, index: int) -> float:
        return float(self.quasienergies[self.assignment[index]])


def quasienergies(device: DeviceSpec, schedule: DriveSchedule, frame: FloquetFrame | None = None,
                  scale: float = 1.0, settings: PropagationSettings | None = None) -> FloquetColumn:
    """Diagonalize the one-period propagator of H_F at a given drive scale."""
    frame = frame or FloquetFrame.from_schedule(schedule)
    settings = settings or PropagationSettings(rtol=1e-10, atol=1e-12, max_step=0.05)
    diag, static, terms = _rwa_parts(device, schedule, frame, scale)
    offdiag = static - np.diag(np.diag(static))
    diag = diag + np.real(np.diag(static))
    rows = np.array([[amp, freq, phase, float(CONSTANT), 0.0, 1.0, 1e300]
                     for _, amp, freq, phase in terms], dtype=float).reshape(-1, 7)
    model = _Model(diag, offdiag, [op for op, *_ in terms], rows)
    eye = np.eye(device.dimension, dtype=complex)
    u = model.run_columns(eye, np.array([frame.period]), settings)[-1]
    err = np.max(np.abs(u.conj().T @ u - eye))
    if err > UNITARITY_TOL:
        raise FloquetQualityError(f"one-period propagator deviates from unitarity by {err:.2e}")
    values, vectors = np.linalg.eig(u)
    kappa = frame.fold(-np.angle(values) / frame.period)
    order = np.argsort(kappa, kind="stable")
    kappa, vectors = kappa[order], vectors[:, order]
    # re-orthonormalize degenerate clusters
    vectors, _ = np.linalg.qr(vectors)
    weights = np.abs(vectors) ** 2
    match = greedy_assignment(weights)
    overlaps = weights[np.arange(weights.shape[0]), match]
    return FloquetColumn(float(scale), kappa, vectors, match, overlaps)


@dataclass(frozen=True)
class QuasienergyMap:
    device: DeviceSpec
    frame: FloquetFrame
    scales: np.ndarray
    columns: tuple[FloquetColumn, ...]

    def energies(self, label: Sequence[int]) -> np.ndarray:
        """Quasienergy (rad/ns) of the mode labeled ``label`` at every scale."""
        i = fock_index(label, self.device)
        return np.array([c.energy(i) for c in self.columns])

    def overlaps(self, label: Sequence[int]) -> np.ndarray:
        i = fock_index(label, self.device)
        return np.array([c.overlaps[i] for c in self.columns])

    def admixture(self, tracked: Sequence[int], other: Sequence[int]) -> np.ndarray:
        """Weight of bare ``other`` inside the mode labeled ``tracked``, per scale."""
        i = fock_index(tracked, self.device)
        j = fock_index(other, self.device)
        return np.array([abs(c.modes[j, c.assignment[i]]) ** 2 for c in self.columns])

    def rows(self):
        """(scale, label, quasienergy in GHz) in scale-major, basis order."""
        labels = all_labels(self.device)
        for c in self.columns:
            for i, lab in enumerate(labels):
                yield c.scale, format_label(lab), c.energy(i) / (2 * math.pi)


def quasienergy_map(device: DeviceSpec, schedule: DriveSchedule, scales: Sequence[float],
                    settings: PropagationSettings | None = None, threads: int = 1) -> QuasienergyMap:
    frame = FloquetFrame.from_schedule(schedule)
    scales = np.asarray(scales, dtype=float)
    cols = parallel_map(lambda s: quasienergies(device, schedule, frame, s, settings),
                        list(scales), threads)
    return QuasienergyMap(device, frame, scales, tuple(cols))


@dataclass(frozen=True)
class LeakageCandidate:
    label: FockLabel
    min_gap: float  # rad/ns, folded
    hybridization: float  # max admixture into the tracked mode along the sweep


@dataclass(frozen=True)
class LeakageRanking:
    state: FockLabel
    candidates: tuple[LeakageCandidate, ...]
    warning: str | None = None

    @property
    def labels(self) -> list[FockLabel]:
        return [c.label for c in self.candidates]


def identify_leakage_candidates(qmap: QuasienergyMap, state: Sequence[int], window: float,
                                pair: Sequence[str] = ("Q1", "Q2")) -> LeakageRanking:
    """Rank non-computational states that approach ``state`` within ``window`` (rad/ns).

    Candidates are those whose folded quasienergy comes within ``window`` of the
    tracked mode somewhere along the sweep.  They are ordered by how strongly
    they mix into the tracked mode, then by closest approach; in a folded
    spectrum uncoupled levels cross exactly, so the gap alone does not single
    out the states that actually take population.
    """
    state = tuple(state)
    comp = set(computational_labels(qmap.device, pair))
    tracked = qmap.energies(state)
    warning = None
    worst = float(np.min(qmap.overlaps(state)))
    if worst < 0.5:
        warning = f"|{format_label(state)}> loses identity (overlap {worst:.3f})"
    out = []
    for lab in all_labels(qmap.device):
        if lab in comp or lab == state:
            continue
        gap = float(np.min(np.abs(qmap.frame.fold(qmap.energies(lab) - tracked))))
        if gap > window:
            continue
        out.append(LeakageCandidate(lab, gap, float(np.max(qmap.admixture(state, lab)))))
    out.sort(key=lambda c: (-c.hybridization, c.min_gap, c.label))
    return LeakageRanking(state, tuple(out), warning)
