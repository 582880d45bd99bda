"""Independent reference implementations used to cross-check the package.

Nothing here imports couplergate: Hamiltonians are assembled with np.kron,
envelopes are scalar math, and time evolution goes through scipy's solve_ivp.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp

TWO_PI = 2 * math.pi

# name -> (frequency GHz, anharmonicity GHz)
ABA_MODES = {"Q1": (5.0, -0.2), "Q2": (5.9, -0.2), "C": (7.0, -0.4)}
ABA_G = {("Q1", "C"): 0.19, ("Q2", "C"): 0.10}
ABC_MODES = {"Q1": (5.0, -0.3), "Q2": (7.5, -0.3), "C": (6.2, -0.4)}
ABC_G = {("Q1", "C"): 0.11, ("Q2", "C"): 0.12}


def ladder(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1)


def kron_op(single: np.ndarray, k: int, n_modes: int, n: int) -> np.ndarray:
    out = np.eye(1)
    for j in range(n_modes):
        out = np.kron(out, single if j == k else np.eye(n))
    return out


def duffing(modes: dict, couplings: dict, n: int = 4) -> np.ndarray:
    """Lab-frame static Hamiltonian (rad/ns), no rotating-wave approximation."""
    names = list(modes)
    a = ladder(n)
    ops = {m: kron_op(a, k, len(names), n) for k, m in enumerate(names)}
    h = np.zeros((n ** len(names),) * 2)
    for m, (w, alpha) in modes.items():
        num = ops[m].T @ ops[m]
        h += TWO_PI * (w * num + 0.5 * alpha * num @ (num - np.eye(len(num))))
    for (m1, m2), g in couplings.items():
        x1 = ops[m1] + ops[m1].T
        x2 = ops[m2] + ops[m2].T
        h += TWO_PI * g * x1 @ x2
    return h


def zz_khz(h: np.ndarray, n: int = 4, n_modes: int = 3) -> float:
    """ZZ from the eigenvalues whose eigenvectors overlap most with 000, 100, 010, 110."""
    vals, vecs = np.linalg.eigh(h)

    def idx(label):
        return sum(d * n ** (n_modes - 1 - k) for k, d in enumerate(label))

    def energy(label):
        return vals[int(np.argmax(np.abs(vecs[idx(label)]) ** 2))]

    z = energy((1, 1, 0)) - energy((1, 0, 0)) - energy((0, 1, 0)) + energy((0, 0, 0))
    return z / TWO_PI * 1e6


def flat_top(t: float, tr: float, sigma: float, tp: float) -> float:
    floor = math.exp(-tr ** 2 / (2 * sigma ** 2))
    if 0 <= t <= tr:
        return (math.exp(-(t - tr) ** 2 / (2 * sigma ** 2)) - floor) / (1 - floor)
    if tr < t < tp - tr:
        return 1.0
    if tp - tr <= t <= tp:
        return (math.exp(-(t - (tp - tr)) ** 2 / (2 * sigma ** 2)) - floor) / (1 - floor)
    return 0.0


def evolve(h_of_t, psi0: np.ndarray, t_end: float, rtol: float = 1e-10, atol: float = 1e-12) -> np.ndarray:
    """Schrodinger equation by scipy's DOP853 in the lab frame."""
    def rhs(t, y):
        return -1j * (h_of_t(t) @ y)
    sol = solve_ivp(rhs, (0.0, t_end), psi0.astype(complex), method="DOP853",
                    rtol=rtol, atol=atol, max_step=0.02)
    return sol.y[:, -1]


def sqrt_iswap() -> np.ndarray:
    s = 1 / math.sqrt(2)
    return np.array([[1, 0, 0, 0], [0, s, -1j * s, 0], [0, -1j * s, s, 0], [0, 0, 0, 1]])


def average_fidelity(u: np.ndarray, v: np.ndarray) -> float:
    return (abs(np.trace(v.conj().T @ u)) ** 2 + np.trace(u.conj().T @ u).real) / 20


def j12_mhz(w1, w2, wc, ac, g1, g2, amp1, amp2, delta) -> float:
    """Effective exchange (MHz) from the eight fourth-order fractions, inputs in GHz.

    Each denominator is a product of energy gaps of the intermediate states
    relative to the initial one; the factors 2 and 4 collect the drive matrix
    elements of Omega/2.
    """
    d1, d2 = w1 - wc, w2 - wc
    a1, a2 = ac + delta - d1, ac + delta - d2
    dens = [2 * d1 * delta * a2, 2 * d1 * delta * d2, 2 * a1 * delta * a2, 2 * a1 * delta * d2,
            4 * a1 * (a1 + a2 - delta - ac) * a2, 4 * a1 * (d2 - d1) * d2,
            4 * d1 * (d1 - d2) * a2, 4 * d1 * (d1 + d2 - ac - delta) * d2]
    return 1e3 * sum(amp1 * amp2 * g1 * g2 / den for den in dens)
