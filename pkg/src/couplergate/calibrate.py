"""Calibration protocols: drive-frequency seeds and scans, pulse-shape search,
end-to-end gate runs and decoherence sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import ExperimentConfig, ProtocolConfig, scenario_config
from .dynamics import (DecoherenceSpec, PropagationSettings, Trajectory, parallel_map,
                       propagate_columns, propagate_operators)
from .gate import (D, GateReport, PhaseFit, average_fidelity_channel, computational_frame,
                   gate_report, superoperator)
from .hilbert import DeviceSpec, computational_labels
from .perturbation import PerturbationContext, closed_form_j12
from .pulse import ConstantEnvelope, DriveSchedule, Envelope, two_tone


class CalibrationError(RuntimeError):
    """A calibration stage could not produce a usable result."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class CalibrationPlan:
    detuning: float  # GHz
    amplitude: float  # GHz
    scan_window: float = 0.006  # GHz, half width
    scan_step: float = 0.0005  # GHz
    sigma_grid: tuple[float, ...] = (196.0,)
    duration_grid: tuple[float, ...] = (346.0,)
    ramp_ratio: float = 0.5

    def __post_init__(self):
        if not (self.scan_window > 0 and self.scan_step > 0):
            raise ValueError("scan window and step must be positive")
        if not self.sigma_grid or not self.duration_grid:
            raise ValueError("shape grid must be non-empty")

    def scan_values(self, center: float) -> np.ndarray:
        n = int(round(self.scan_window / self.scan_step))
        return center + self.scan_step * np.arange(-n, n + 1)


def estimate_drive_frequencies(device: DeviceSpec, pair: Sequence[str] = ("Q1", "Q2"),
                               detuning: float = 0.0, coupler: str = "C") -> tuple[float, float]:
    """Two-photon seeds 2 w_c + a_c - w_k + delta (GHz), before any Stark shift."""
    c = device.mode(coupler)
    base = 2 * c.frequency + c.anharmonicity + detuning
    return tuple(base - device.mode(p).frequency for p in pair)


def settings_from(cfg: dict, prefix: str = "") -> PropagationSettings:
    return PropagationSettings(rtol=cfg.get(prefix + "rtol", 1e-10), atol=cfg.get(prefix + "atol", 1e-12),
                               max_step=cfg.get("max_step_ns", 1.0))


# -- frequency scan ----------------------------------------------------------

@dataclass(frozen=True)
class ScanResult:
    values: np.ndarray  # scanned omega_2^d, GHz
    objective: np.ndarray  # maximum transfer per point
    optimum: float  # GHz, refined
    horizon: float  # ns
    note: str = ""

    def rows(self):
        for v, o in zip(self.values, self.objective):
            yield float(v), float(o)


def transfer_curve(device: DeviceSpec, schedule: DriveSchedule, horizon: float, samples: int,
                   pair: Sequence[str], settings: PropagationSettings) -> tuple[np.ndarray, np.ndarray]:
    """Dressed |10> -> |01> population over [0, horizon]."""
    frame = computational_frame(device, pair)
    grid = np.linspace(0.0, horizon, samples)
    psi = propagate_columns(device, schedule, frame[:, 2:3], settings.with_times(grid))[:, :, 0]
    return grid, np.abs(psi @ frame[:, 1].conj()) ** 2


def refine_peak(x: np.ndarray, y: np.ndarray) -> tuple[float, str]:
    """Vertex of the parabola through the best point and its neighbours."""
    k = int(np.argmax(y))
    if k == 0 or k == len(y) - 1:
        return float(x[k]), "optimum on the scan edge; not refined"
    x0, x1, x2 = x[k - 1:k + 2]
    y0, y1, y2 = y[k - 1:k + 2]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom
    if a >= 0:
        return float(x1), "no curvature at the optimum; not refined"
    return float(np.clip(-b / (2 * a), x0, x2)), "quadratic refinement over the three best points"


def scan_drive_frequency(device: DeviceSpec, drive1: float, values: Sequence[float], amplitude: float,
                         pair: Sequence[str] = ("Q1", "Q2"), coupler: str = "C",
                         detuning: float | None = None, horizon: float | None = None,
                         samples: int = 601, settings: PropagationSettings | None = None,
                         threads: int = 1) -> ScanResult:
    """Maximum dressed |10> -> |01> transfer under plateau drives, per second-tone frequency."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise CalibrationError("scan", "empty scan window")
    settings = settings or PropagationSettings(rtol=1e-8, atol=1e-10)
    if horizon is None:
        if detuning is None:
            seeds = estimate_drive_frequencies(device, pair, 0.0, coupler)
            detuning = drive1 - seeds[0]
        ctx = PerturbationContext.from_device(device, (amplitude, amplitude), detuning, pair, coupler)
        try:
            j = abs(closed_form_j12(ctx))
        except ZeroDivisionError as exc:
            raise CalibrationError("scan", f"cannot size the probe horizon: {exc}") from None
        if j == 0:
            raise CalibrationError("scan", "perturbative coupling vanishes; no transfer to scan")
        horizon = 1.5 * math.pi / (2 * j)

    def one(f2):
        sched = two_tone(coupler, (drive1, f2), ConstantEnvelope(amplitude))
        return float(np.max(transfer_curve(device, sched, horizon, samples, pair, settings)[1]))

    objective = np.array(parallel_map(one, list(values), threads))
    if objective.max() - objective.min() < 0.05:
        raise CalibrationError("scan", f"flat objective (spread {np.ptp(objective):.3g}); widen the window")
    opt, note = refine_peak(values, objective)
    return ScanResult(values, objective, opt, float(horizon), note)


# -- pulse shape -------------------------------------------------------------

@dataclass(frozen=True)
class ShapeResult:
    sigma: float
    duration: float
    sigmas: np.ndarray
    durations: np.ndarray
    fidelity: np.ndarray  # (len(sigmas), len(durations)) conditional-phase-corrected

    def rows(self):
        for i, s in enumerate(self.sigmas):
            for j, t in enumerate(self.durations):
                yield float(s), float(t), float(self.fidelity[i, j])


def gate_columns(device: DeviceSpec, schedule: DriveSchedule, pair: Sequence[str],
                 settings: PropagationSettings, basis: str = "dressed") -> np.ndarray:
    """Final full-space images (N, 4) of the computational states."""
    frame = computational_frame(device, pair, basis)
    return propagate_columns(device, schedule, frame, settings)[-1]


def _u_from_columns(device, columns, pair, basis):
    """A full-space operator that acts like the propagator on the computational states."""
    frame = computational_frame(device, pair, basis)
    return columns @ frame.conj().T


def choose_pulse_shape(device: DeviceSpec, frequencies: Sequence[float], amplitude: float,
                       sigmas: Sequence[float], durations: Sequence[float],
                       pair: Sequence[str] = ("Q1", "Q2"), coupler: str = "C",
                       ramp_ratio: float = 0.5, settings: PropagationSettings | None = None,
                       threads: int = 1) -> ShapeResult:
    """Grid search over (sigma, t_p) maximizing the phase-corrected fidelity."""
    settings = settings or PropagationSettings(rtol=1e-8, atol=1e-10)
    sigmas = np.asarray(sigmas, dtype=float)
    durations = np.asarray(durations, dtype=float)
    cells = [(s, t) for s in sigmas for t in durations]

    def one(cell):
        env = Envelope.from_sigma(amplitude, cell[0], cell[1], ramp_ratio)
        cols = gate_columns(device, two_tone(coupler, frequencies, env), pair, settings)
        report, _ = gate_report(_u_from_columns(device, cols, pair, "dressed"), device, pair, cell[1])
        return report.fidelity_cond

    fid = np.array(parallel_map(one, cells, threads)).reshape(sigmas.size, durations.size)
    i, j = np.unravel_index(int(np.argmax(fid)), fid.shape)
    return ShapeResult(float(sigmas[i]), float(durations[j]), sigmas, durations, fid)


# -- end-to-end --------------------------------------------------------------

@dataclass
class ProtocolResult:
    scenario: str
    report: GateReport
    fit: PhaseFit
    frequencies: tuple[float, float]
    sigma: float
    duration: float
    trajectories: dict[str, Trajectory] = field(default_factory=dict)
    scan: ScanResult | None = None
    shape: ShapeResult | None = None
    device: DeviceSpec | None = None
    pair: tuple[str, str] = ("Q1", "Q2")

    def schedule(self, coupler: str = "C", amplitude: float = 0.16, ramp_ratio: float = 0.5):
        return two_tone(coupler, self.frequencies,
                        Envelope.from_sigma(amplitude, self.sigma, self.duration, ramp_ratio))


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except CalibrationError:
        raise
    except Exception as exc:  # re-tag with the stage that failed
        raise CalibrationError(name, f"{type(exc).__name__}: {exc}") from exc


def protocol_schedule(proto: ProtocolConfig, frequencies=None, sigma=None, duration=None):
    env = Envelope.from_sigma(proto.amplitude, sigma or proto.sigma, duration or proto.duration,
                              proto.ramp_ratio)
    return two_tone(proto.coupler, frequencies or proto.frequencies, env)


def run_gate_protocol(scenario: str | ExperimentConfig, scan: bool = False, shape_search: bool = False,
                      levels: int | None = None, settings: PropagationSettings | None = None,
                      trajectory_step: float | None = None, threads: int = 1,
                      basis: str = "dressed", **overrides) -> ProtocolResult:
    """Frequencies, shape, propagation, projection, phase fit and leakage for one scenario.

    ``overrides`` may replace ``frequencies``, ``sigma`` or ``duration``.
    """
    cfg = scenario_config(scenario) if isinstance(scenario, str) else scenario
    if levels is not None:
        cfg = cfg.with_levels(levels)
    proto, device = cfg.protocol, cfg.device
    settings = settings or settings_from(cfg.section("propagation"))
    cal = cfg.section("calibration")
    cal_settings = PropagationSettings(rtol=cal.get("rtol", 1e-8), atol=cal.get("atol", 1e-10))
    frequencies = overrides.get("frequencies") or proto.frequencies
    if frequencies is None:
        frequencies = estimate_drive_frequencies(device, proto.pair, proto.detuning, proto.coupler)
    frequencies = tuple(frequencies)
    scan_result = shape_result = None
    if scan:
        plan = CalibrationPlan(proto.detuning, proto.amplitude, cal.get("scan_window_MHz", 6) / 1e3,
                               cal.get("scan_step_MHz", 0.5) / 1e3)
        scan_result = _stage("scan", scan_drive_frequency, device, frequencies[0],
                             plan.scan_values(frequencies[1]), proto.amplitude, proto.pair,
                             proto.coupler, proto.detuning, cal.get("horizon_ns"),
                             cal.get("samples", 601), cal_settings, threads)
        frequencies = (frequencies[0], scan_result.optimum)
    sigma = overrides.get("sigma") or proto.sigma
    duration = overrides.get("duration") or proto.duration
    if shape_search:
        shape_result = _stage("shape", choose_pulse_shape, device, frequencies, proto.amplitude,
                              cal.get("sigma_grid_ns", [sigma]), cal.get("duration_grid_ns", [duration]),
                              proto.pair, proto.coupler, proto.ramp_ratio, cal_settings, threads)
        sigma, duration = shape_result.sigma, shape_result.duration
    schedule = protocol_schedule(proto, frequencies, sigma, duration)
    step = trajectory_step or cfg.section("trajectory").get("step_ns", 1.0)
    grid = np.linspace(0.0, duration, max(1, int(round(duration / step))) + 1)
    frame = computational_frame(device, proto.pair, basis)
    states = _stage("propagation", propagate_columns, device, schedule, frame,
                    settings.with_times(grid))
    report, fit = _stage("fidelity", gate_report, _u_from_columns(device, states[-1], proto.pair, basis),
                         device, proto.pair, duration, basis)
    names = ["".join(str(n) for n in lab) for lab in computational_labels(device, proto.pair)]
    trajectories = {name: Trajectory(grid, states[:, :, k], device) for k, name in enumerate(names)}
    return ProtocolResult(proto.name, report, fit, frequencies, float(sigma), float(duration),
                          trajectories, scan_result, shape_result, device, proto.pair)


# -- decoherence -------------------------------------------------------------

@dataclass(frozen=True)
class DecoherencePoint:
    t1: float | None  # us
    tphi: float | None  # us
    fidelity: float
    note: str | None = None

    @property
    def error(self) -> float:
        return 1.0 - self.fidelity


def channel_superoperator(device: DeviceSpec, schedule: DriveSchedule, decoherence: DecoherenceSpec,
                          pair: Sequence[str], settings: PropagationSettings,
                          basis: str = "dressed") -> np.ndarray:
    """16 x 16 superoperator of the noisy gate restricted to the computational subspace.

    Only the ten matrix units |i><j| with i <= j are propagated; the rest follow
    from E(X^dag) = E(X)^dag.
    """
    frame = computational_frame(device, pair, basis)
    upper = [(i, j) for i in range(D) for j in range(i, D)]
    ops = np.stack([np.outer(frame[:, i], frame[:, j].conj()) for i, j in upper])
    images = propagate_operators(device, schedule, decoherence, ops, settings)
    reduced = {ij: frame.conj().T @ img @ frame for ij, img in zip(upper, images)}
    out = []
    for i in range(D):
        for j in range(D):
            out.append(reduced[(i, j)] if i <= j else reduced[(j, i)].conj().T)
    return superoperator(out)


def decoherence_sweep(scenario: str | ExperimentConfig, points: Sequence[tuple[float | None, float | None]],
                      levels: int | None = None, settings: PropagationSettings | None = None,
                      threads: int = 1, basis: str = "dressed",
                      unitary: ProtocolResult | None = None) -> list[DecoherencePoint]:
    """Gate error 1 - F of the noisy channel, uniform T1/T_phi on every mode.

    The target is the ideal gate dressed with the single-qubit and conditional
    phases fitted on the closed-system run.
    """
    cfg = scenario_config(scenario) if isinstance(scenario, str) else scenario
    if levels is not None:
        cfg = cfg.with_levels(levels)
    dec = cfg.section("decoherence")
    settings = settings or PropagationSettings(rtol=dec.get("rtol", 1e-7), atol=dec.get("atol", 1e-9))
    if unitary is None:
        unitary = run_gate_protocol(cfg, trajectory_step=unitary_step(cfg), basis=basis)
    target = unitary.fit.corrected_target()
    proto = cfg.protocol
    schedule = protocol_schedule(proto, unitary.frequencies, unitary.sigma, unitary.duration)

    def one(point):
        t1, tphi = point
        spec = DecoherenceSpec.uniform(cfg.device.labels, t1, tphi)
        s_e = _stage("lindblad", channel_superoperator, cfg.device, schedule, spec, proto.pair,
                     settings, basis)
        res = average_fidelity_channel(s_e, target)
        return DecoherencePoint(t1, tphi, res.fidelity, res.note)

    return parallel_map(one, list(points), threads)


def unitary_step(cfg: ExperimentConfig) -> float:
    """Coarse sampling for runs whose trajectories are not needed."""
    return cfg.protocol.duration
