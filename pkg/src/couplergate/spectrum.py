"""Static eigenanalysis of the coupled Hamiltonian: dressed labels and ZZ."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import parallel_map
from .hilbert import (TWO_PI, DeviceSpec, FockLabel, all_labels, bare_hamiltonian,
                      computational_labels, fock_index, format_label)

HERMITIAN_TOL = 1e-10
TIE_TOL = 1e-12


class LabelingError(RuntimeError):
    """A bare label could not be matched to a dressed eigenstate."""


@dataclass(frozen=True)
class Eigensystem:
    values: np.ndarray  # ascending, rad/ns
    vectors: np.ndarray  # columns

    def __len__(self):
        return self.values.size


def eigensystem(h: np.ndarray, tol: float = HERMITIAN_TOL) -> Eigensystem:
    """Ascending eigenpairs of a Hermitian matrix."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.max(np.abs(h))) if h.size else 1.0)
    if np.max(np.abs(h - h.conj().T), initial=0.0) > tol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    values, vectors = np.linalg.eigh(0.5 * (h + h.conj().T))
    return Eigensystem(values, vectors)


@dataclass(frozen=True)
class DressedLevel:
    bare: FockLabel
    energy: float  # rad/ns
    overlap: float  # |<bare|dressed>|^2
    index: int  # column in the eigensystem

    @property
    def dispersive(self) -> bool:
        return self.overlap > 0.5


def greedy_assignment(weights: np.ndarray) -> np.ndarray:
    """Unique bare -> eigenvector matching by descending weight.

    ``weights[b, d]`` is the overlap of bare state b with eigenvector d, and
    eigenvectors are assumed ordered by ascending eigenvalue.  Overlaps that
    agree within ``TIE_TOL`` go to the lower eigenvalue first.  Returns the
    eigenvector index per bare state.
    """
    n = weights.shape[0]
    bare_idx, dressed_idx = np.divmod(np.arange(weights.size), n)
    flat = weights.ravel()
    # quantize so that near-equal overlaps fall back to eigenvalue order
    order = np.lexsort((dressed_idx, -np.round(flat / TIE_TOL)))
    bare_used = np.zeros(n, bool)
    dressed_used = np.zeros(n, bool)
    match = np.full(n, -1)
    remaining = n
    for k in order:
        b, d = bare_idx[k], dressed_idx[k]
        if bare_used[b] or dressed_used[d]:
            continue
        bare_used[b] = dressed_used[d] = True
        match[b] = d
        remaining -= 1
        if remaining == 0:
            break
    return match


def dressed_label(device: DeviceSpec, system: Eigensystem,
                  labels: Sequence[FockLabel] | None = None) -> dict[FockLabel, DressedLevel]:
    """Greedy unique assignment of bare labels to eigenvectors by descending overlap.

    All (bare, dressed) pairs compete, so a label requested through ``labels``
    still respects the uniqueness of every other label.
    """
    weights = np.abs(system.vectors) ** 2  # [bare, dressed]
    match = greedy_assignment(weights)
    wanted = all_labels(device) if labels is None else [tuple(x) for x in labels]
    out = {}
    for lab in wanted:
        b = fock_index(lab, device)
        d = int(match[b])
        if d < 0:
            raise LabelingError(f"no dressed state left for |{format_label(lab)}>")
        out[lab] = DressedLevel(lab, float(system.values[d]), float(weights[b, d]), d)
    return out


def dressed_basis(device: DeviceSpec, labels: Sequence[FockLabel]) -> np.ndarray:
    """Columns are the dressed eigenvectors assigned to ``labels``, phased so the bare
    component is real and positive."""
    system = eigensystem(bare_hamiltonian(device))
    levels = dressed_label(device, system, labels)
    cols = []
    for lab in labels:
        v = system.vectors[:, levels[lab].index]
        c = v[fock_index(lab, device)]
        cols.append(v * (abs(c) / c) if c != 0 else v)
    return np.stack(cols, axis=1)


@dataclass(frozen=True)
class ZZReport:
    zeta_khz: float
    energies: dict[FockLabel, float]  # rad/ns
    overlaps: dict[FockLabel, float]

    @property
    def log10_abs(self) -> float:
        return float(np.log10(abs(self.zeta_khz))) if self.zeta_khz != 0 else -np.inf


def zz_strength(device: DeviceSpec, pair: Sequence[str] = ("Q1", "Q2"),
                min_overlap: float = 0.0) -> ZZReport:
    """zeta = (E11 - E01) - (E10 - E00) from dressed energies, in kHz."""
    labels = computational_labels(device, pair)
    levels = dressed_label(device, eigensystem(bare_hamiltonian(device)), labels)
    for lab in labels:
        if levels[lab].overlap < min_overlap:
            raise LabelingError(f"|{format_label(lab)}> overlap {levels[lab].overlap:.3f} "
                                f"below {min_overlap}")
    e00, e01, e10, e11 = (levels[lab].energy for lab in labels)
    zeta = ((e11 - e01) - (e10 - e00)) / TWO_PI * 1e6
    return ZZReport(float(zeta), {k: v.energy for k, v in levels.items()},
                    {k: v.overlap for k, v in levels.items()})


@dataclass(frozen=True)
class ZZSweep:
    omega1: np.ndarray  # GHz
    omega2: np.ndarray  # GHz
    zeta_khz: np.ndarray  # (len(omega1), len(omega2)), NaN where labeling failed

    @property
    def log10_abs(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log10(np.abs(self.zeta_khz))

    def rows(self):
        """(omega1, omega2, zeta, log10|zeta|) in row-major grid order."""
        logs = self.log10_abs
        for i, w1 in enumerate(self.omega1):
            for j, w2 in enumerate(self.omega2):
                yield float(w1), float(w2), float(self.zeta_khz[i, j]), float(logs[i, j])


def zz_sweep(device: DeviceSpec, omega1: Sequence[float], omega2: Sequence[float],
             pair: Sequence[str] = ("Q1", "Q2"), min_overlap: float = 0.5,
             threads: int = 1) -> ZZSweep:
    """ZZ over a grid of the two qubit frequencies (GHz); cells whose computational
    states cannot be labeled with at least ``min_overlap`` are NaN."""
    omega1 = np.asarray(omega1, dtype=float)
    omega2 = np.asarray(omega2, dtype=float)
    if omega1.size == 0 or omega2.size == 0:
        raise ValueError("sweep ranges must be non-empty")
    cells = [(a, b) for a in omega1 for b in omega2]

    def one(cell):
        dev = device.with_mode(pair[0], frequency=cell[0]).with_mode(pair[1], frequency=cell[1])
        try:
            return zz_strength(dev, pair, min_overlap).zeta_khz
        except LabelingError:
            return np.nan

    values = parallel_map(one, cells, threads)
    return ZZSweep(omega1, omega2, np.array(values, dtype=float).reshape(omega1.size, omega2.size))
