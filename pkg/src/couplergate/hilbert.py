"""Truncated multi-oscillator Hilbert space for transmon qubits and couplers.

Every mode is a Duffing oscillator truncated to ``levels`` states.  The
composite basis is the row-major tensor product over the declared mode
order, so ``(n_0, n_1, ..., n_k)`` maps to a flat index exactly like
``numpy.ravel_multi_index``.

Configuration values are linear frequencies in GHz (``omega / 2pi``).
All matrices returned here are in angular units (rad/ns, hbar = 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * np.pi

FockLabel = tuple[int, ...]


def angular(freq_ghz: float) -> float:
    """GHz (linear) to rad/ns."""
    return TWO_PI * freq_ghz


@dataclass(frozen=True)
class ModeSpec:
    label: str
    frequency: float  # GHz
    anharmonicity: float = 0.0  # GHz
    levels: int = 4

    def __post_init__(self):
        if int(self.levels) != self.levels or self.levels < 2:
            raise ValueError(f"mode {self.label!r}: levels must be an integer >= 2")
        if not self.frequency > 0:
            raise ValueError(f"mode {self.label!r}: frequency must be positive")


@dataclass(frozen=True)
class CouplingSpec:
    mode_a: str
    mode_b: str
    strength: float  # GHz

    def __post_init__(self):
        if self.mode_a == self.mode_b:
            raise ValueError("a coupling needs two distinct modes")


@dataclass(frozen=True)
class DeviceSpec:
    modes: tuple[ModeSpec, ...]
    couplings: tuple[CouplingSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        labels = [m.label for m in self.modes]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate mode labels in {labels}")
        for c in self.couplings:
            for end in (c.mode_a, c.mode_b):
                if end not in labels:
                    raise KeyError(f"coupling references unknown mode {end!r}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(m.label for m in self.modes)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(m.levels for m in self.modes)

    @property
    def dimension(self) -> int:
        return int(np.prod(self.dims))

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown mode {label!r}; device has {self.labels}") from None

    def mode(self, label: str) -> ModeSpec:
        return self.modes[self.index_of(label)]

    def with_levels(self, levels: int) -> DeviceSpec:
        return replace(self, modes=tuple(replace(m, levels=levels) for m in self.modes))

    def with_mode(self, label: str, **changes) -> DeviceSpec:
        k = self.index_of(label)
        modes = list(self.modes)
        modes[k] = replace(modes[k], **changes)
        return replace(self, modes=tuple(modes))

    def with_couplings(self, couplings: Sequence[CouplingSpec]) -> DeviceSpec:
        return replace(self, couplings=tuple(couplings))

    def coupling(self, a: str, b: str) -> float:
        """Total coupling strength (GHz) between two modes, 0 if absent."""
        return sum(c.strength for c in self.couplings if {c.mode_a, c.mode_b} == {a, b})

    @cached_property
    def _ops(self) -> _OperatorCache:
        return _OperatorCache(self)


def fock_index(label: Sequence[int], device: DeviceSpec) -> int:
    dims = device.dims
    if len(label) != len(dims):
        raise ValueError(f"label {tuple(label)} has {len(label)} entries, device has {len(dims)} modes")
    idx = 0
    for n, d in zip(label, dims):
        if not 0 <= n < d:
            raise IndexError(f"occupation {n} out of range for a {d}-level mode")
        idx = idx * d + int(n)
    return idx


def label_of_index(index: int, device: DeviceSpec) -> FockLabel:
    if not 0 <= index < device.dimension:
        raise IndexError(f"basis index {index} out of range")
    return tuple(int(n) for n in np.unravel_index(index, device.dims))


def all_labels(device: DeviceSpec) -> list[FockLabel]:
    return [label_of_index(i, device) for i in range(device.dimension)]


def format_label(label: Sequence[int]) -> str:
    return "".join(str(n) for n in label)


def parse_label(text: str, device: DeviceSpec | None = None) -> FockLabel:
    """Parse ``"100"`` or ``"1,0,0"``; pads with zeros up to the device's mode count."""
    text = text.strip().strip("|>")
    parts = text.split(",") if "," in text else list(text)
    label = tuple(int(p) for p in parts)
    if device is not None and len(label) < len(device.modes):
        label = label + (0,) * (len(device.modes) - len(label))
    return label


def _ladder(levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, levels, dtype=float)), 1)


def embed(single: np.ndarray, k: int, dims: Sequence[int]) -> np.ndarray:
    """Tensor a single-mode operator into position ``k`` of the composite space."""
    out = np.ones((1, 1))
    for j, d in enumerate(dims):
        out = np.kron(out, single if j == k else np.eye(d))
    return out


class _OperatorCache:
    """Per-device cache of embedded ladder operators (real, dense)."""

    def __init__(self, device: DeviceSpec):
        dims = device.dims
        self.lowering = [embed(_ladder(d), k, dims) for k, d in enumerate(dims)]
        self.number = [np.diag(embed(np.diag(np.arange(d, dtype=float)), k, dims)).copy()
                       for k, d in enumerate(dims)]
        self.static = None


def lowering_operator(mode: str, device: DeviceSpec) -> np.ndarray:
    return device._ops.lowering[device.index_of(mode)].astype(complex)


def number_operator(mode: str, device: DeviceSpec) -> np.ndarray:
    return np.diag(device._ops.number[device.index_of(mode)]).astype(complex)


def occupation(mode: str, device: DeviceSpec) -> np.ndarray:
    """Diagonal of the number operator as a real vector."""
    return device._ops.number[device.index_of(mode)].copy()


def drive_operator(mode: str, device: DeviceSpec) -> np.ndarray:
    """Quadrature ``q + q^dagger`` of one mode."""
    q = device._ops.lowering[device.index_of(mode)]
    return (q + q.T).astype(complex)


def bare_diagonal(device: DeviceSpec) -> np.ndarray:
    """Uncoupled Duffing energies (rad/ns) of every basis state."""
    energy = np.zeros(device.dimension)
    for m, n in zip(device.modes, device._ops.number):
        energy += angular(m.frequency) * n + 0.5 * angular(m.anharmonicity) * n * (n - 1)
    return energy


def coupling_operator(device: DeviceSpec) -> np.ndarray:
    """Sum of g (q_a + q_a^dag)(q_b + q_b^dag) over the device couplings (rad/ns)."""
    out = np.zeros((device.dimension,) * 2)
    ops = device._ops.lowering
    for c in device.couplings:
        qa = ops[device.index_of(c.mode_a)]
        qb = ops[device.index_of(c.mode_b)]
        out += angular(c.strength) * (qa + qa.T) @ (qb + qb.T)
    return out


def bare_hamiltonian(device: DeviceSpec) -> np.ndarray:
    """Static Hamiltonian: Duffing ladders plus charge-charge couplings (no RWA)."""
    cache = device._ops
    if cache.static is None:
        h = coupling_operator(device) + np.diag(bare_diagonal(device))
        h.setflags(write=False)
        cache.static = h
    return cache.static.astype(complex)


def basis_vector(label: Sequence[int], device: DeviceSpec) -> np.ndarray:
    v = np.zeros(device.dimension, dtype=complex)
    v[fock_index(label, device)] = 1.0
    return v


def computational_labels(device: DeviceSpec, pair: Sequence[str]) -> list[FockLabel]:
    """Labels |00>, |01>, |10>, |11> of a qubit pair with every other mode in its ground state.

    The first digit refers to ``pair[0]``, matching the ordering of the 4x4 gate matrices.
    """
    a, b = (device.index_of(p) for p in pair)
    if a == b:
        raise ValueError("a computational pair needs two distinct modes")
    out = []
    for na in (0, 1):
        for nb in (0, 1):
            lab = [0] * len(device.modes)
            lab[a], lab[b] = na, nb
            out.append(tuple(lab))
    return out
