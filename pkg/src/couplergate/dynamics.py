"""Time-ordered propagation under H_s + H_d(t), closed and open (Lindblad).

The drive is integrated in the lab frame without any rotating-wave
approximation.  Internally the state is carried in the interaction
picture of the bare Duffing energies (an exact change of variables), which
removes the large diagonal phases from the right-hand side; every state
handed back to callers is in the lab frame again.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence, TypeVar

import numpy as np

from . import _integrate as _ig
from .hilbert import (DeviceSpec, FockLabel, bare_diagonal, coupling_operator, drive_operator,
                      fock_index, lowering_operator, occupation)
from .pulse import DriveSchedule, pack_drives

T = TypeVar("T")
R = TypeVar("R")


class IntegrationError(RuntimeError):
    """The adaptive integrator could not reach the requested time."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} at t = {time:.6g} ns")
        self.time = time


@dataclass(frozen=True)
class PropagationSettings:
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = 1.0  # ns
    times: tuple[float, ...] | None = None  # output grid; None -> end of the schedule only
    max_steps: int = 50_000_000

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        if self.times is not None:
            grid = np.asarray(self.times, dtype=float)
            if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
                raise ValueError("output grid must be strictly increasing")
            object.__setattr__(self, "times", tuple(float(x) for x in grid))

    def grid(self, schedule: DriveSchedule) -> np.ndarray:
        if self.times is not None:
            return np.asarray(self.times, dtype=float)
        return np.array([schedule.duration])

    def with_times(self, times) -> PropagationSettings:
        return PropagationSettings(self.rtol, self.atol, self.max_step, tuple(times), self.max_steps)

    def tightened(self, factor: float = 0.5) -> PropagationSettings:
        return PropagationSettings(self.rtol * factor, self.atol * factor, self.max_step,
                                   self.times, self.max_steps)


@dataclass(frozen=True)
class DecoherenceSpec:
    """Relaxation (T1) and pure-dephasing (T_phi) times in microseconds, per mode label."""

    relaxation: Mapping[str, float] = field(default_factory=dict)
    dephasing: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name, table in (("relaxation", self.relaxation), ("dephasing", self.dephasing)):
            for label, value in table.items():
                if value is not None and not value > 0:
                    raise ValueError(f"{name} time for {label!r} must be positive")

    @classmethod
    def uniform(cls, labels: Iterable[str], t1: float | None = None, tphi: float | None = None):
        labels = list(labels)
        return cls({k: t1 for k in labels if t1 is not None and math.isfinite(t1)},
                   {k: tphi for k in labels if tphi is not None and math.isfinite(tphi)})

    def collapse_operators(self, device: DeviceSpec) -> list[np.ndarray]:
        """sqrt(1/T1) q and sqrt(2/T_phi) q^dag q, rates in 1/ns."""
        ops = []
        for label, t1 in self.relaxation.items():
            if t1 is not None:
                ops.append(math.sqrt(1.0 / (t1 * 1e3)) * lowering_operator(label, device))
        for label, tp in self.dephasing.items():
            if tp is not None:
                ops.append(math.sqrt(2.0 / (tp * 1e3)) * np.diag(occupation(label, device)).astype(complex))
        return ops


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (T, N) state vectors or (T, N, N) density matrices
    device: DeviceSpec

    @property
    def is_density(self) -> bool:
        return self.states.ndim == 3

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def populations(self) -> np.ndarray:
        """(T, N) basis-state populations."""
        if self.is_density:
            return np.real(np.einsum("tii->ti", self.states))
        return np.abs(self.states) ** 2

    def population(self, label: Sequence[int]) -> np.ndarray:
        return self.populations()[:, fock_index(label, self.device)]

    def norms(self) -> np.ndarray:
        if self.is_density:
            return np.real(np.einsum("tii->t", self.states))
        return np.sum(np.abs(self.states) ** 2, axis=1)

    def in_basis(self, vectors: np.ndarray) -> np.ndarray:
        """Amplitudes (T, K) on the columns of ``vectors`` (state-vector trajectories only)."""
        return self.states @ vectors.conj()


def _coo(matrix: np.ndarray, term: int, tol: float = 0.0):
    r, c = np.nonzero(np.abs(matrix) > tol)
    return r.astype(np.int64), c.astype(np.int64), matrix[r, c].astype(np.complex128), \
        np.full(r.size, term, dtype=np.int64)


class _Model:
    """Sparse interaction-picture representation shared by every propagation mode."""

    def __init__(self, frame: np.ndarray, static_offdiag: np.ndarray,
                 drive_ops: Sequence[np.ndarray], drives: np.ndarray):
        self.h0 = np.ascontiguousarray(frame, dtype=float)
        parts = [_coo(static_offdiag, 0)]
        parts += [_coo(op, k + 1) for k, op in enumerate(drive_ops)]
        rows, cols, vals, terms = (np.concatenate(p) for p in zip(*parts))
        order = np.lexsort((cols, rows))
        self.rows, self.cols, self.vals, self.terms = (np.ascontiguousarray(a[order])
                                                      for a in (rows, cols, vals, terms))
        self.ptr = np.searchsorted(self.rows, np.arange(frame.size + 1)).astype(np.int64)
        self.drives = np.ascontiguousarray(drives, dtype=float).reshape(-1, 7)
        self.n = self.h0.size

    @classmethod
    def from_device(cls, device: DeviceSpec, schedule: DriveSchedule) -> _Model:
        schedule.validate(device)
        ops = [drive_operator(d.target, device) for d in schedule.drives]
        return cls(bare_diagonal(device), coupling_operator(device), ops, pack_drives(schedule))

    def frame_phase(self, t: float) -> np.ndarray:
        return np.exp(-1j * self.h0 * t)

    def _scratch(self):
        return (np.empty(self.n, dtype=np.complex128), np.empty(self.drives.shape[0] + 1),
                np.empty(self.rows.size, dtype=np.complex128))

    def run_columns(self, columns: np.ndarray, grid: np.ndarray, settings: PropagationSettings,
                    t0: float = 0.0) -> np.ndarray:
        """Propagate (N, M) initial columns; returns lab-frame (T, N, M)."""
        columns = np.ascontiguousarray(columns, dtype=np.complex128)
        n, m = columns.shape
        d, coef, w = self._scratch()
        params = (self.h0, self.ptr, self.rows, self.cols, self.vals, self.terms, self.drives,
                  m, d, coef, w)
        y0 = (np.exp(1j * self.h0 * t0)[:, None] * columns).ravel()
        out = self._solve(_ig.schrodinger_rhs, params, y0, t0, grid, settings)
        out = out.reshape(len(grid), n, m)
        phases = np.exp(-1j * np.outer(grid, self.h0))
        return phases[:, :, None] * out

    def run_density(self, rhos: np.ndarray, collapse: Sequence[np.ndarray], grid: np.ndarray,
                    settings: PropagationSettings) -> np.ndarray:
        """Propagate a (B, N, N) batch of operators under the master equation; lab frame out."""
        rhos = np.ascontiguousarray(rhos, dtype=np.complex128)
        batch, n, _ = rhos.shape
        crow, ccol, cval, cptr = [], [], [], [0]
        gamma = np.zeros(n)
        for op in collapse:
            cdc = op.conj().T @ op
            if np.max(np.abs(cdc - np.diag(np.diag(cdc)))) > 1e-12:
                raise ValueError("collapse operators must have diagonal C^dag C")
            gamma += np.real(np.diag(cdc))
            r, c, v, _ = _coo(op, 0)
            crow.append(r)
            ccol.append(c)
            cval.append(v)
            cptr.append(cptr[-1] + r.size)
        empty_i = np.zeros(0, dtype=np.int64)
        crow = np.ascontiguousarray(np.concatenate(crow)) if collapse else empty_i
        ccol = np.ascontiguousarray(np.concatenate(ccol)) if collapse else empty_i
        cval = np.ascontiguousarray(np.concatenate(cval)) if collapse else np.zeros(0, np.complex128)
        cptr = np.asarray(cptr, dtype=np.int64)
        d, coef, w = self._scratch()
        wc = np.empty(crow.size, dtype=np.complex128)
        tmp = np.empty(n * n, dtype=np.complex128)
        params = (self.h0, self.ptr, self.rows, self.cols, self.vals, self.terms, self.drives,
                  crow, ccol, cval, cptr, gamma, batch, d, coef, w, wc, tmp)
        out = self._solve(_ig.lindblad_rhs, params, rhos.ravel(), 0.0, grid, settings)
        out = out.reshape(len(grid), batch, n, n)
        ph = np.exp(-1j * np.outer(grid, self.h0))
        return ph[:, None, :, None] * out * ph.conj()[:, None, None, :]

    @staticmethod
    def _solve(rhs, params, y0, t0, grid, settings: PropagationSettings) -> np.ndarray:
        grid = np.ascontiguousarray(grid, dtype=float)
        samples, status, t_reached, _, _ = _ig.dop853(
            rhs, params, y0, float(t0), grid, settings.rtol, settings.atol,
            settings.max_step, settings.max_steps)
        if status == _ig.STATUS_STEP_UNDERFLOW:
            raise IntegrationError("step size underflow", t_reached)
        if status == _ig.STATUS_MAX_STEPS:
            raise IntegrationError("maximum number of steps exceeded", t_reached)
        return samples


def _check_state(psi0: np.ndarray, device: DeviceSpec) -> np.ndarray:
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape[0] != device.dimension:
        raise ValueError(f"state has dimension {psi0.shape[0]}, device needs {device.dimension}")
    return psi0


def propagate_state(device: DeviceSpec, schedule: DriveSchedule, psi0: np.ndarray,
                    settings: PropagationSettings = PropagationSettings()) -> Trajectory:
    psi0 = _check_state(psi0, device)
    if abs(np.linalg.norm(psi0) - 1) > 1e-10:
        raise ValueError("initial state must be normalized")
    grid = settings.grid(schedule)
    out = _Model.from_device(device, schedule).run_columns(psi0[:, None], grid, settings)
    return Trajectory(grid, out[:, :, 0], device)


def propagate_columns(device: DeviceSpec, schedule: DriveSchedule, columns: np.ndarray,
                      settings: PropagationSettings = PropagationSettings()) -> np.ndarray:
    """Evolve several initial vectors at once; returns (T, N, M) on the settings grid."""
    columns = _check_state(columns, device)
    return _Model.from_device(device, schedule).run_columns(columns, settings.grid(schedule), settings)


def propagate_unitary(device: DeviceSpec, schedule: DriveSchedule,
                      settings: PropagationSettings = PropagationSettings()) -> np.ndarray:
    """Full-space propagator at the last time of the settings grid."""
    eye = np.eye(device.dimension, dtype=complex)
    return propagate_columns(device, schedule, eye, settings)[-1]


def propagate_lindblad(device: DeviceSpec, schedule: DriveSchedule, decoherence: DecoherenceSpec,
                       rho0: np.ndarray, settings: PropagationSettings = PropagationSettings()
                       ) -> Trajectory:
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (device.dimension,) * 2:
        raise ValueError("density matrix shape does not match the device")
    if abs(np.trace(rho0) - 1) > 1e-10 or np.max(np.abs(rho0 - rho0.conj().T)) > 1e-12:
        raise ValueError("initial density matrix must be Hermitian with unit trace")
    grid = settings.grid(schedule)
    model = _Model.from_device(device, schedule)
    out = model.run_density(rho0[None], decoherence.collapse_operators(device), grid, settings)
    return Trajectory(grid, out[:, 0], device)


def propagate_operators(device: DeviceSpec, schedule: DriveSchedule, decoherence: DecoherenceSpec,
                        operators: np.ndarray,
                        settings: PropagationSettings = PropagationSettings()) -> np.ndarray:
    """Apply the master-equation map to a (B, N, N) batch of arbitrary operators (final time)."""
    grid = settings.grid(schedule)
    model = _Model.from_device(device, schedule)
    return model.run_density(np.asarray(operators, dtype=complex),
                             decoherence.collapse_operators(device), grid, settings)[-1]


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: int = 1) -> list[R]:
    """Order-preserving map; the compiled kernels release the GIL."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def basis_states(device: DeviceSpec, labels: Sequence[FockLabel]) -> np.ndarray:
    """Columns of bare basis vectors for the given labels."""
    out = np.zeros((device.dimension, len(labels)), dtype=complex)
    for j, lab in enumerate(labels):
        out[fock_index(lab, device), j] = 1.0
    return out
