"""Two-qubit gate targets, subspace projection, phase fitting, fidelity and leakage."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .hilbert import DeviceSpec, FockLabel, computational_labels, fock_index, format_label
from .spectrum import dressed_basis

D = 4
COMPUTATIONAL_NAMES = ("00", "01", "10", "11")


# -- targets -----------------------------------------------------------------

def swap_theta(theta: float) -> np.ndarray:
    """Partial swap in the single-excitation block with angle ``theta``."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[1, 0, 0, 0],
                     [0, c, -1j * s, 0],
                     [0, -1j * s, c, 0],
                     [0, 0, 0, 1]], dtype=complex)


def sqrt_iswap() -> np.ndarray:
    return swap_theta(math.pi / 4)


def sqrt_iswap_like(phi: float) -> np.ndarray:
    """sqrt(iSWAP) with an extra e^{i phi} on |11>."""
    u = sqrt_iswap()
    u[3, 3] = np.exp(1j * phi)
    return u


def post_phases(theta1: float, theta2: float) -> np.ndarray:
    """Diagonal of Z rotations on both qubits: diag(1, e^{i t2}, e^{i t1}, e^{i(t1+t2)})."""
    return np.exp(1j * np.array([0.0, theta2, theta1, theta1 + theta2]))


def pre_phases(a2: float) -> np.ndarray:
    """Diagonal of a Z rotation on the second qubit only.

    A pre-rotation on the first qubit is redundant: the targets commute with
    the total excitation number, so it can be moved behind the gate.
    """
    return np.exp(1j * np.array([0.0, a2, 0.0, a2]))


def wrap(angle: float) -> float:
    """Fold an angle into (-pi, pi]."""
    a = math.remainder(angle, 2 * math.pi)
    return math.pi if a == -math.pi else a


# -- projection --------------------------------------------------------------

@dataclass(frozen=True)
class ComputationalProjection:
    matrix: np.ndarray  # 4x4, rows and columns |00>, |01>, |10>, |11>
    labels: tuple[FockLabel, ...]
    basis: str

    @property
    def leakage(self) -> np.ndarray:
        """Per-column deficit 1 - ||column||^2."""
        return 1.0 - np.sum(np.abs(self.matrix) ** 2, axis=0)


def computational_frame(device: DeviceSpec, pair: Sequence[str] = ("Q1", "Q2"),
                        basis: str = "dressed") -> np.ndarray:
    """(N, 4) columns spanning the computational subspace."""
    labels = computational_labels(device, pair)
    if basis == "dressed":
        return dressed_basis(device, labels)
    if basis == "bare":
        out = np.zeros((device.dimension, D), dtype=complex)
        for k, lab in enumerate(labels):
            out[fock_index(lab, device), k] = 1.0
        return out
    raise ValueError(f"unknown basis {basis!r}; use 'dressed' or 'bare'")


def extract_computational_unitary(u_full: np.ndarray, device: DeviceSpec,
                                  pair: Sequence[str] = ("Q1", "Q2"),
                                  basis: str = "dressed") -> ComputationalProjection:
    """Matrix elements of the full propagator between computational states."""
    u_full = np.asarray(u_full)
    if u_full.shape != (device.dimension,) * 2:
        raise ValueError(f"propagator shape {u_full.shape} does not match dimension {device.dimension}")
    v = computational_frame(device, pair, basis)
    return ComputationalProjection(v.conj().T @ u_full @ v,
                                   tuple(computational_labels(device, pair)), basis)


# -- fidelity ----------------------------------------------------------------

def average_fidelity(u_real: np.ndarray, target: np.ndarray) -> float:
    """[Tr(U_r^dag U_r) + |Tr(U^dag U_r)|^2] / (d^2 + d) with d = 4."""
    u_real = np.asarray(u_real)
    norm = np.real(np.trace(u_real.conj().T @ u_real))
    overlap = abs(np.trace(np.asarray(target).conj().T @ u_real)) ** 2
    return float((norm + overlap) / (D * D + D))


@dataclass(frozen=True)
class PhaseFit:
    fidelity: float
    theta1: float  # Z phase on the first qubit after the gate
    theta2: float  # Z phase on the second qubit after the gate
    phi: float  # conditional phase of the target, 0 when not fitted
    pre_phase: float  # Z phase on the second qubit before the gate

    def corrected_target(self) -> np.ndarray:
        """Target dressed with the fitted phases: the unitary closest to U_real."""
        return (post_phases(self.theta1, self.theta2)[:, None] * sqrt_iswap_like(self.phi)
                * pre_phases(self.pre_phase)[None, :])


def _fit_value(u_real, x, conditional):
    b1, b2, a2 = x[:3]
    phi = x[3] if conditional else 0.0
    corrected = post_phases(b1, b2).conj()[:, None] * u_real * pre_phases(a2).conj()[None, :]
    return average_fidelity(corrected, sqrt_iswap_like(phi))


def _analytic_start(u_real: np.ndarray) -> np.ndarray:
    """Phases that align the dominant entries of U_real with the target."""
    t = sqrt_iswap()
    ref = np.angle(u_real[0, 0])
    b2 = np.angle(u_real[1, 2] * np.conj(t[1, 2])) - ref
    b1 = np.angle(u_real[2, 2] * np.conj(t[2, 2])) - ref
    a2 = np.angle(u_real[2, 1] * np.conj(t[2, 1])) - ref - b1
    phi = np.angle(u_real[3, 3]) - ref - b1 - b2 - a2
    return np.array([b1, b2, a2, phi])


def compensate_phases(u_real: np.ndarray, fit_conditional: bool = True,
                      start: Sequence[float] | None = None) -> PhaseFit:
    """Maximize the fidelity over single-qubit Z phases and optionally the conditional phase.

    The model is U_real ~ diag_post(theta1, theta2) . target(phi) . diag_pre(a2); the
    fidelity is evaluated after undoing the fitted single-qubit phases.
    """
    u_real = np.asarray(u_real, dtype=complex)
    if np.linalg.svd(u_real, compute_uv=False)[-1] < 1e-6:
        warnings.warn("projected evolution is numerically rank deficient; phase fit is best effort",
                      stacklevel=2)
    n = 4 if fit_conditional else 3
    seeds = [_analytic_start(u_real)[:n], np.zeros(n)]
    if start is not None:
        seeds.append(np.resize(np.asarray(start, float), n))
    best_x, best_f = None, -1.0
    for seed in seeds:
        res = minimize(lambda x: -_fit_value(u_real, x, fit_conditional), seed, method="Nelder-Mead",
                       options=dict(xatol=1e-10, fatol=1e-13, maxiter=40_000, maxfev=40_000))
        if -res.fun > best_f:
            best_x, best_f = res.x, -res.fun
    b1, b2, a2 = (wrap(v) for v in best_x[:3])
    phi = wrap(best_x[3]) if fit_conditional else 0.0
    return PhaseFit(float(best_f), b1, b2, phi, a2)


# -- leakage -----------------------------------------------------------------

def leakage_state(u_full: np.ndarray, label: Sequence[int], device: DeviceSpec,
                  pair: Sequence[str] = ("Q1", "Q2"), basis: str = "dressed") -> float:
    """Population that leaves the computational subspace starting from ``label``.

    ``label`` is either a two-digit computational label such as (1, 1) or a
    full device label with every non-pair mode in its ground state.
    """
    labels = computational_labels(device, pair)
    label = tuple(label)
    if len(label) == 2:
        k = 2 * label[0] + label[1]
    else:
        k = labels.index(label)
    v = computational_frame(device, pair, basis)
    col = v.conj().T @ (np.asarray(u_full) @ v[:, k])
    return float(1.0 - np.sum(np.abs(col) ** 2))


def leakage_average(u_full: np.ndarray, device: DeviceSpec, pair: Sequence[str] = ("Q1", "Q2"),
                    basis: str = "dressed") -> float:
    """Subspace-averaged leakage: mean of the four per-state leakages."""
    proj = extract_computational_unitary(u_full, device, pair, basis)
    return float(np.mean(proj.leakage))


# -- channels ----------------------------------------------------------------

def operator_basis() -> list[np.ndarray]:
    """Matrix units |i><j| of the computational subspace in row-major order."""
    out = []
    for i in range(D):
        for j in range(D):
            e = np.zeros((D, D), dtype=complex)
            e[i, j] = 1.0
            out.append(e)
    return out


def superoperator(images: Sequence[np.ndarray]) -> np.ndarray:
    """Columns are row-major vectorized images of the matrix units."""
    return np.stack([np.asarray(m).reshape(-1) for m in images], axis=1)


def unitary_superoperator(u: np.ndarray) -> np.ndarray:
    """vec(U X U^dag) = (U kron conj U) vec(X) for row-major vectorization."""
    return np.kron(u, u.conj())


@dataclass(frozen=True)
class ChannelFidelity:
    fidelity: float
    trace_loss: float  # 1 - min over basis states of Tr E(|i><i|)
    note: str | None = None


def average_fidelity_channel(s_e: np.ndarray, target: np.ndarray,
                             tp_tol: float = 1e-4) -> ChannelFidelity:
    """(Tr[S_U^dag S_E] + d) / (d^2 + d) for a channel restricted to the subspace."""
    s_e = np.asarray(s_e)
    s_u = unitary_superoperator(np.asarray(target))
    value = (np.real(np.trace(s_u.conj().T @ s_e)) + D) / (D * D + D)
    # trace of E(|i><i|) is the sum of the diagonal entries of its image
    diag_cols = [i * D + i for i in range(D)]
    traces = [np.real(np.trace(s_e[:, c].reshape(D, D))) for c in diag_cols]
    loss = float(1.0 - min(traces))
    note = None
    if abs(loss) > tp_tol:
        note = f"channel is not trace preserving on the subspace (loss {loss:.2e})"
    return ChannelFidelity(float(value), loss, note)


# -- report ------------------------------------------------------------------

@dataclass(frozen=True)
class GateReport:
    fidelity_raw: float
    fidelity_1q: float
    fidelity_cond: float
    theta1: float
    theta2: float
    phi: float
    pre_phase: float
    leakage_by_state: dict[str, float] = field(default_factory=dict)
    leakage_average: float = 0.0
    gate_time: float = 0.0
    basis: str = "dressed"

    def as_dict(self) -> dict:
        return {
            "fidelity_raw": self.fidelity_raw,
            "fidelity_1q": self.fidelity_1q,
            "fidelity_cond": self.fidelity_cond,
            "theta1_rad": self.theta1,
            "theta2_rad": self.theta2,
            "phi_rad": self.phi,
            "pre_phase_rad": self.pre_phase,
            "leakage_by_initial_state": dict(self.leakage_by_state),
            "leakage_average": self.leakage_average,
            "gate_time_ns": self.gate_time,
            "basis": self.basis,
        }


def gate_report(u_full: np.ndarray, device: DeviceSpec, pair: Sequence[str] = ("Q1", "Q2"),
                gate_time: float = 0.0, basis: str = "dressed") -> tuple[GateReport, PhaseFit]:
    """Raw, single-qubit-corrected and conditional-phase-corrected fidelities plus leakage."""
    proj = extract_computational_unitary(u_full, device, pair, basis)
    u = proj.matrix
    raw = average_fidelity(u, sqrt_iswap())
    single = compensate_phases(u, fit_conditional=False)
    single = single if single.fidelity >= raw else PhaseFit(raw, 0.0, 0.0, 0.0, 0.0)
    cond = compensate_phases(u, fit_conditional=True,
                             start=(single.theta1, single.theta2, single.pre_phase, 0.0))
    if cond.fidelity < single.fidelity:
        cond = single
    leak = {name: float(x) for name, x in zip(COMPUTATIONAL_NAMES, proj.leakage)}
    report = GateReport(raw, single.fidelity, cond.fidelity, cond.theta1, cond.theta2, cond.phi,
                        cond.pre_phase, leak, float(np.mean(proj.leakage)), gate_time, basis)
    return report, cond


def label_name(label: Sequence[int]) -> str:
    return format_label(label)
