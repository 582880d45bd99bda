"""Compiled adaptive Dormand-Prince 8(5,3) integrator for driven-oscillator ODEs.

The Butcher tableau and error-estimator weights are taken from
``scipy.integrate._ivp.dop853_coefficients``; step-size control mirrors
``scipy.integrate.solve_ivp(method="DOP853")``.  Everything here runs in
the interaction picture of a diagonal reference Hamiltonian ``h0``, so
the right-hand sides only carry the off-diagonal and driven parts, each
entry dressed with the phase ``exp(i (h0[r] - h0[c]) t)``.

Sparse operators travel as row-sorted COO triplets (with CSR row pointers)
plus a ``term`` column: term 0 is static, term k >= 1 is multiplied by the
time-dependent coefficient of drive k - 1 (see ``pulse.pack_drives`` for
the drive row layout).
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

_A = np.ascontiguousarray(_dop.A[:12, :12])
_B = np.ascontiguousarray(_dop.B)
_C = np.ascontiguousarray(_dop.C[:12])
_E3 = np.ascontiguousarray(_dop.E3)
_E5 = np.ascontiguousarray(_dop.E5)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERROR_EXPONENT = -1.0 / 8.0

STATUS_OK = 0
STATUS_STEP_UNDERFLOW = 1
STATUS_MAX_STEPS = 2

_jit = nb.njit(cache=True, nogil=True, fastmath=False)


@_jit
def envelope(kind, tr, sigma, tp, t):
    if kind == 1:
        return 1.0 if (t >= 0.0 and t <= tp) else 0.0
    if t < 0.0 or t > tp:
        return 0.0
    if t > tr and t < tp - tr:
        return 1.0
    floor = math.exp(-tr * tr / (2.0 * sigma * sigma))
    x = t - tr if t <= tr else t - (tp - tr)
    return (math.exp(-x * x / (2.0 * sigma * sigma)) - floor) / (1.0 - floor)


@_jit
def term_coefficients(drives, t, coef):
    coef[0] = 1.0
    for k in range(drives.shape[0]):
        amp = drives[k, 0]
        g = envelope(int(drives[k, 3]), drives[k, 4], drives[k, 5], drives[k, 6], t)
        coef[k + 1] = amp * g * math.cos(drives[k, 1] * t + drives[k, 2])


@_jit
def _frame_phases(h0, t, d):
    for i in range(h0.size):
        d[i] = complex(math.cos(h0[i] * t), math.sin(h0[i] * t))


@_jit
def _entry_weights(h0, t, rows, cols, vals, terms, drives, d, coef, w):
    """w[e] = -i H_e(t) exp(i (h0[r] - h0[c]) t) for every stored entry."""
    _frame_phases(h0, t, d)
    term_coefficients(drives, t, coef)
    for e in range(rows.size):
        c = coef[terms[e]]
        if c == 0.0:
            w[e] = 0.0
        else:
            w[e] = -1j * vals[e] * c * d[rows[e]] * d[cols[e]].conjugate()


@_jit
def schrodinger_rhs(t, y, out, params):
    """d psi_I / dt for M column vectors stored row-major as (N, M); entries sorted by row."""
    h0, ptr, rows, cols, vals, terms, drives, m, d, coef, w = params
    n = h0.size
    _entry_weights(h0, t, rows, cols, vals, terms, drives, d, coef, w)
    for r in range(n):
        ro = r * m
        for j in range(m):
            out[ro + j] = 0.0
        for e in range(ptr[r], ptr[r + 1]):
            we = w[e]
            if we == 0.0:
                continue
            so = cols[e] * m
            for j in range(m):
                out[ro + j] += we * y[so + j]


@_jit
def lindblad_rhs(t, y, out, params):
    """d rho_I / dt for B operators stored as (B, N, N); entries sorted by row."""
    (h0, ptr, rows, cols, vals, terms, drives, crow, ccol, cval, cptr, gamma, batch,
     d, coef, w, wc, tmp) = params
    n = h0.size
    nnz = rows.size
    _entry_weights(h0, t, rows, cols, vals, terms, drives, d, coef, w)
    for e in range(crow.size):
        wc[e] = cval[e] * d[crow[e]] * d[ccol[e]].conjugate()
    nn = n * n
    for b in range(batch):
        base = b * nn
        # -1/2 {Gamma, rho}
        for i in range(n):
            gi = gamma[i]
            io = base + i * n
            for j in range(n):
                out[io + j] = -0.5 * (gi + gamma[j]) * y[io + j]
        # -i H rho
        for r in range(n):
            ro = base + r * n
            for e in range(ptr[r], ptr[r + 1]):
                we = w[e]
                if we == 0.0:
                    continue
                so = base + cols[e] * n
                for j in range(n):
                    out[ro + j] += we * y[so + j]
        # +i rho H: out[i, c] -= rho[i, r] * w
        for i in range(n):
            io = base + i * n
            for e in range(nnz):
                we = w[e]
                if we == 0.0:
                    continue
                out[io + cols[e]] -= y[io + rows[e]] * we
        # C rho C^dag, one collapse operator at a time
        for k in range(cptr.size - 1):
            for x in range(nn):
                tmp[x] = 0.0
            for e in range(cptr[k], cptr[k + 1]):
                ro = crow[e] * n
                so = base + ccol[e] * n
                we = wc[e]
                for j in range(n):
                    tmp[ro + j] += we * y[so + j]
            for i in range(n):
                io = base + i * n
                to = i * n
                for e in range(cptr[k], cptr[k + 1]):
                    out[io + crow[e]] += tmp[to + ccol[e]] * wc[e].conjugate()


@_jit
def _scaled_norm(v, scale):
    acc = 0.0
    for i in range(v.size):
        z = v[i] / scale[i]
        acc += z.real * z.real + z.imag * z.imag
    return math.sqrt(acc / v.size)


@_jit
def _initial_step(rhs, params, t0, y0, f0, rtol, atol, t_end):
    n = y0.size
    scale = np.empty(n)
    for i in range(n):
        scale[i] = atol + abs(y0[i]) * rtol
    d0 = _scaled_norm(y0, scale)
    d1 = _scaled_norm(f0, scale)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, abs(t_end - t0))
    y1 = y0 + h0 * f0
    f1 = np.empty_like(y0)
    rhs(t0 + h0, y1, f1, params)
    d2 = _scaled_norm(f1 - f0, scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    return min(100.0 * h0, h1, abs(t_end - t0))


@_jit
def dop853(rhs, params, y0, t0, t_out, rtol, atol, max_step, max_steps):
    """Integrate from t0 through the increasing sample times ``t_out``.

    Returns (samples, status, t_reached, accepted_steps, rhs_evaluations).
    Sample times are hit exactly by shortening the step that would cross them.
    """
    n = y0.size
    n_out = t_out.size
    samples = np.zeros((n_out, n), dtype=np.complex128)
    K = np.empty((13, n), dtype=np.complex128)
    y = y0.copy()
    y_new = np.empty_like(y)
    ytmp = np.empty_like(y)
    t = t0
    rhs(t, y, K[0], params)
    nfev = 1
    naccept = 0
    t_last = t_out[n_out - 1] if n_out > 0 else t0
    if t_last > t0:
        h_abs = min(_initial_step(rhs, params, t0, y, K[0], rtol, atol, t_last), max_step)
        nfev += 1
    else:
        h_abs = max_step
    k_out = 0
    while k_out < n_out and t_out[k_out] <= t0:
        samples[k_out] = y
        k_out += 1
    rejected = False
    while k_out < n_out:
        target = t_out[k_out]
        min_step = 10.0 * (np.nextafter(t, np.inf) - t)
        if h_abs > max_step:
            h_abs = max_step
        if h_abs < min_step:
            return samples, 1, t, naccept, nfev
        h = h_abs
        hits = False
        if t + h >= target - 1e-13 * max(1.0, abs(target)):
            h = target - t
            hits = True
        # stages
        for s in range(1, 12):
            for i in range(n):
                acc = 0.0j
                for j in range(s):
                    acc += _A[s, j] * K[j, i]
                ytmp[i] = y[i] + h * acc
            rhs(t + _C[s] * h, ytmp, K[s], params)
        for i in range(n):
            acc = 0.0j
            for j in range(12):
                acc += _B[j] * K[j, i]
            y_new[i] = y[i] + h * acc
        rhs(t + h, y_new, K[12], params)
        nfev += 12
        # error estimate
        e5 = 0.0
        e3 = 0.0
        for i in range(n):
            a5 = 0.0j
            a3 = 0.0j
            for j in range(13):
                a5 += _E5[j] * K[j, i]
                a3 += _E3[j] * K[j, i]
            sc = atol + max(abs(y[i]), abs(y_new[i])) * rtol
            a5 /= sc
            a3 /= sc
            e5 += a5.real * a5.real + a5.imag * a5.imag
            e3 += a3.real * a3.real + a3.imag * a3.imag
        if e5 == 0.0 and e3 == 0.0:
            err = 0.0
        else:
            err = abs(h) * e5 / math.sqrt((e5 + 0.01 * e3) * n)
        if err < 1.0:
            if err == 0.0:
                factor = MAX_FACTOR
            else:
                factor = min(MAX_FACTOR, SAFETY * err ** ERROR_EXPONENT)
            if rejected:
                factor = min(1.0, factor)
            t = target if hits else t + h
            y[:] = y_new
            K[0] = K[12]
            naccept += 1
            if naccept > max_steps:
                return samples, 2, t, naccept, nfev
            # keep the unclipped proposal when the step was shortened to land on a sample
            h_abs = max(h_abs, h) * factor if not hits else max(h_abs * min(factor, 1.0), h * factor)
            rejected = False
            while k_out < n_out and t_out[k_out] <= t:
                samples[k_out] = y
                k_out += 1
        else:
            h_abs = abs(h) * max(MIN_FACTOR, SAFETY * err ** ERROR_EXPONENT)
            rejected = True
    return samples, 0, t, naccept, nfev
