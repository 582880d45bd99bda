"""Fourth-order effective exchange between |100> and |010> under two coupler drives.

Two engines compute the same quantity.  ``path_sum_j`` walks explicit
virtual-transition paths through an extended space in which each drive is a
bosonic mode; ``closed_form_j12`` evaluates the resulting eight fractions
directly.  ``extract_j_from_dynamics`` measures the exchange rate from a
time-domain simulation and serves as the independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

from .dynamics import PropagationSettings, propagate_columns
from .hilbert import TWO_PI, DeviceSpec, angular, computational_labels, format_label
from .pulse import DriveSchedule

SINGULAR_TOL = 1e-6  # rad/ns


class SingularPathError(ZeroDivisionError):
    """An intermediate state is degenerate with the initial state."""


class ExtractionError(RuntimeError):
    """No exchange oscillation could be fitted."""


@dataclass(frozen=True, order=True)
class ExtendedState:
    """Occupations (Q1, Q2, Qc, D1, D2); D1 and D2 count drive photons."""

    occupations: tuple[int, int, int, int, int]

    def __post_init__(self):
        occ = tuple(int(n) for n in self.occupations)
        if len(occ) != 5 or min(occ) < 0:
            raise ValueError(f"bad extended state {self.occupations}")
        object.__setattr__(self, "occupations", occ)

    @classmethod
    def parse(cls, text: str) -> ExtendedState:
        return cls(tuple(int(c) for c in text.strip().strip("|>")))

    def __str__(self):
        return f"|{format_label(self.occupations)}>"


@dataclass(frozen=True)
class PerturbationContext:
    """Parameters of the perturbative picture, all in rad/ns.

    ``delta1``/``delta2`` are qubit-coupler detunings, ``detuning`` is the
    offset of both drives from the two-photon condition, so that drive k sits
    at ``2 omega_c + alpha_c - omega_k + detuning``.
    """

    delta1: float
    delta2: float
    detuning: float
    omega1: float  # drive amplitudes
    omega2: float
    g1: float
    g2: float
    alpha_c: float
    coupler_frequency: float = 0.0
    flags: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        flags = []
        for k, (d, g) in enumerate(((self.delta1, self.g1), (self.delta2, self.g2)), 1):
            if abs(d) <= 3 * abs(g):
                flags.append(f"|Delta_{k}| <= 3 g_{k}")
        for k, amp in enumerate((self.omega1, self.omega2), 1):
            if abs(self.coupler_frequency - self.drive_frequency(k)) <= 3 * abs(amp):
                flags.append(f"|omega_c - omega_{k}^d| <= 3 Omega_{k}")
        object.__setattr__(self, "flags", tuple(flags))

    @classmethod
    def from_device(cls, device: DeviceSpec, amplitudes: Sequence[float], detuning: float,
                    pair: Sequence[str] = ("Q1", "Q2"), coupler: str = "C") -> PerturbationContext:
        """Build from a device and linear (GHz) drive amplitudes and detuning."""
        c = device.mode(coupler)
        qa, qb = (device.mode(p) for p in pair)
        return cls(angular(qa.frequency - c.frequency), angular(qb.frequency - c.frequency),
                   angular(detuning), angular(amplitudes[0]), angular(amplitudes[1]),
                   angular(device.coupling(qa.label, coupler)),
                   angular(device.coupling(qb.label, coupler)),
                   angular(c.anharmonicity), angular(c.frequency))

    @property
    def dispersive(self) -> bool:
        return not self.flags

    def qubit_frequency(self, k: int) -> float:
        return self.coupler_frequency + (self.delta1 if k == 1 else self.delta2)

    def drive_frequency(self, k: int) -> float:
        return 2 * self.coupler_frequency + self.alpha_c - self.qubit_frequency(k) + self.detuning

    def energy(self, state: ExtendedState) -> float:
        n1, n2, nc, x1, x2 = state.occupations
        return (n1 * self.qubit_frequency(1) + n2 * self.qubit_frequency(2)
                + nc * self.coupler_frequency + 0.5 * self.alpha_c * nc * (nc - 1)
                + x1 * self.drive_frequency(1) + x2 * self.drive_frequency(2))

    def swapped(self) -> PerturbationContext:
        return PerturbationContext(self.delta2, self.delta1, self.detuning, self.omega2,
                                   self.omega1, self.g2, self.g1, self.alpha_c,
                                   self.coupler_frequency)

    def replace(self, **changes) -> PerturbationContext:
        data = {k: getattr(self, k) for k in ("delta1", "delta2", "detuning", "omega1", "omega2",
                                              "g1", "g2", "alpha_c", "coupler_frequency")}
        data.update(changes)
        return PerturbationContext(**data)


def _step_kind(a: ExtendedState, b: ExtendedState) -> tuple[str, int]:
    """Classify a single elementary exchange: ('qubit', k) or ('drive', k)."""
    diff = [y - x for x, y in zip(a.occupations, b.occupations)]
    moved = [i for i, d in enumerate(diff) if d != 0]
    if len(moved) == 2 and 2 in moved and all(abs(diff[i]) == 1 for i in moved):
        other = moved[0] if moved[1] == 2 else moved[1]
        if other in (0, 1) and diff[other] == -diff[2]:
            return "qubit", other + 1
        # coupler gains an excitation by absorbing a photon, or emits one
        if other in (3, 4) and diff[other] == -diff[2]:
            return "drive", other - 2
    raise ValueError(f"{a} -> {b} is not an elementary exchange")


@dataclass(frozen=True)
class TransitionPath:
    states: tuple[ExtendedState, ...]

    def __post_init__(self):
        states = tuple(s if isinstance(s, ExtendedState) else ExtendedState.parse(s)
                       for s in self.states)
        if len(states) != 5:
            raise ValueError("a fourth-order path has five states")
        for a, b in zip(states, states[1:]):
            _step_kind(a, b)
        object.__setattr__(self, "states", states)

    def __str__(self):
        return " <-> ".join(str(s) for s in self.states)

    def matrix_element(self, k: int, ctx: PerturbationContext) -> float:
        a, b = self.states[k], self.states[k + 1]
        kind, idx = _step_kind(a, b)
        nc = max(a.occupations[2], b.occupations[2])
        if kind == "qubit":
            nq = max(a.occupations[idx - 1], b.occupations[idx - 1])
            g = ctx.g1 if idx == 1 else ctx.g2
            return g * math.sqrt(nq * nc)
        amp = ctx.omega1 if idx == 1 else ctx.omega2
        return 0.5 * amp * math.sqrt(nc)

    def term(self, ctx: PerturbationContext) -> float:
        e0 = ctx.energy(self.states[0])
        num = 1.0
        for k in range(4):
            num *= self.matrix_element(k, ctx)
        den = 1.0
        for s in self.states[1:4]:
            gap = e0 - ctx.energy(s)
            if abs(gap) < SINGULAR_TOL:
                raise SingularPathError(f"intermediate {s} is degenerate with {self.states[0]} "
                                        f"on path {self}")
            den *= gap
        return num / den


EIGHT_PATHS: tuple[TransitionPath, ...] = tuple(TransitionPath(tuple(line.split())) for line in (
    "10011 00111 00201 01101 01002",
    "10011 00111 00201 00102 01002",
    "10011 10101 00201 01101 01002",
    "10011 10101 00201 00102 01002",
    "10011 10101 11001 01101 01002",
    "10011 10101 10002 00102 01002",
    "10011 00111 01011 01101 01002",
    "10011 00111 00012 00102 01002",
))


def path_terms(ctx: PerturbationContext,
               paths: Sequence[TransitionPath] = EIGHT_PATHS) -> np.ndarray:
    return np.array([p.term(ctx) for p in paths])


def path_sum_j(ctx: PerturbationContext, paths: Sequence[TransitionPath] = EIGHT_PATHS) -> float:
    """Fourth-order exchange amplitude summed over ``paths`` (rad/ns)."""
    return float(np.sum(path_terms(ctx, paths)))


def closed_form_terms(ctx: PerturbationContext) -> np.ndarray:
    """The eight closed-form fractions, one per path of ``EIGHT_PATHS`` and in the same order."""
    d1, d2, d, ac = ctx.delta1, ctx.delta2, ctx.detuning, ctx.alpha_c
    a1 = ac + d - d1  # gap to |00101>-type states reached by absorbing a D1 photon
    a2 = ac + d - d2
    pair = ctx.omega1 * ctx.omega2 * ctx.g1 * ctx.g2
    dens = (
        (2, d1, d, a2),
        (2, d1, d, d2),
        (2, a1, d, a2),
        (2, a1, d, d2),
        (4, a1, a1 + a2 - d - ac, a2),
        (4, a1, d2 - d1, d2),
        (4, d1, d1 - d2, a2),
        (4, d1, d1 + d2 - ac - d, d2),
    )
    out = []
    for k, (scale, *factors) in enumerate(dens, 1):
        prod = scale * math.prod(factors)
        if min(abs(f) for f in factors) < SINGULAR_TOL:
            raise SingularPathError(f"closed-form term {k} has a vanishing denominator")
        out.append(pair / prod)
    return np.array(out)


def closed_form_j12(ctx: PerturbationContext) -> float:
    """Closed-form effective exchange J_12 (rad/ns)."""
    return float(np.sum(closed_form_terms(ctx)))


def _sin2(t, amplitude, rate):
    return amplitude * np.sin(rate * t) ** 2


def fit_swap_rate(times: np.ndarray, transfer: np.ndarray, min_transfer: float = 0.2) -> float:
    """Exchange amplitude J from P(t) = A sin^2(W t), fitted over the first full period.

    A detuned exchange gives A = J^2 / W^2, so J = sqrt(A) W.
    """
    times = np.asarray(times, float)
    transfer = np.asarray(transfer, float)
    peak = int(np.argmax(transfer))
    if transfer[peak] < min_transfer:
        raise ExtractionError(f"maximum transfer {transfer[peak]:.3g} below {min_transfer}")
    # first local maximum above half the global one seeds the rate
    above = np.nonzero(transfer >= 0.5 * transfer[peak])[0]
    k = above[0]
    while k + 1 < transfer.size and transfer[k + 1] >= transfer[k]:
        k += 1
    t_peak = times[k]
    if t_peak <= 0:
        raise ExtractionError("transfer peaks at the first sample")
    rate0 = math.pi / (2 * t_peak)
    window = times <= min(times[-1], math.pi / rate0)
    (amp, rate), _ = curve_fit(_sin2, times[window], transfer[window], p0=(transfer[k], rate0))
    return float(math.sqrt(abs(amp)) * abs(rate))


def extract_j_from_dynamics(device: DeviceSpec, schedule: DriveSchedule, horizon: float,
                            pair: Sequence[str] = ("Q1", "Q2"), samples: int = 801,
                            settings: PropagationSettings | None = None) -> float:
    """|J| (rad/ns) from the dressed |10> -> |01> transfer under plateau drives."""
    from .spectrum import dressed_basis

    if not schedule.drives or all(d.envelope.amplitude == 0 for d in schedule.drives):
        raise ExtractionError("no drive applied")
    labels = computational_labels(device, pair)
    basis = dressed_basis(device, [labels[2], labels[1]])
    grid = np.linspace(0.0, horizon, samples)
    settings = (settings or PropagationSettings(rtol=1e-9, atol=1e-11)).with_times(grid)
    states = propagate_columns(device, schedule, basis[:, :1], settings)[:, :, 0]
    transfer = np.abs(states @ basis[:, 1].conj()) ** 2
    return fit_swap_rate(grid, transfer)


def to_mhz(value: float) -> float:
    return value / TWO_PI * 1e3

