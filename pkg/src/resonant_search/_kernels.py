"""Compiled fixed-step RK4 kernels.

All kernels release the GIL so independent integrations can run on threads.
Step arithmetic is plain IEEE (no fastmath) so results are bit-reproducible.
"""

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)
PHASE_RESYNC = 32


@njit(**_JIT)
def _full_rhs(a, out, ph, drive, sub_idx, j_idx, coupling, gamma):
    # ph[k] = exp(i w_k t) for the k-th subset level at the evaluation time
    if drive == 0.0:
        for n in range(a.size):
            out[n] = 0j
    else:
        for n in range(a.size):
            out[n] = -1j * drive * gamma[n] * a[n]
    aj = a[j_idx]
    acc = 0j
    for k in range(sub_idx.size):
        n = sub_idx[k]
        out[n] += -1j * coupling * aj * ph[k]
        acc += a[n] * np.conj(ph[k])
    out[j_idx] += -1j * coupling * acc


@njit(**_JIT)
def _phases(t, w_sub, out):
    for k in range(w_sub.size):
        out[k] = np.exp(1j * w_sub[k] * t)


@njit(**_JIT)
def full_rhs(t, a, w_sub, sub_idx, j_idx, coupling, gamma, omega0):
    out = np.empty_like(a)
    ph = np.empty(w_sub.size, dtype=np.complex128)
    _phases(t, w_sub, ph)
    drive = np.sin(omega0 * t) if omega0 > 0.0 else 0.0
    _full_rhs(a, out, ph, drive, sub_idx, j_idx, coupling, gamma)
    return out


@njit(**_JIT)
def full_rk4(a0, t0, h, n_steps, sample_every, w_sub, sub_idx, j_idx, coupling, gamma, omega0):
    """Integrate the full amplitude equations; returns (final, samples, sample_steps)."""
    size = a0.size
    n_samples = n_steps // sample_every + 1
    if n_steps % sample_every != 0:
        n_samples += 1
    samples = np.empty((n_samples, size), dtype=np.complex128)
    sample_steps = np.empty(n_samples, dtype=np.int64)
    a = a0.copy()
    k1 = np.empty_like(a)
    k2 = np.empty_like(a)
    k3 = np.empty_like(a)
    k4 = np.empty_like(a)
    tmp = np.empty_like(a)
    m = w_sub.size
    ph0 = np.empty(m, dtype=np.complex128)
    ph_mid = np.empty(m, dtype=np.complex128)
    ph1 = np.empty(m, dtype=np.complex128)
    half_turn = np.empty(m, dtype=np.complex128)
    for k in range(m):
        half_turn[k] = np.exp(0.5j * w_sub[k] * h)
    driven = omega0 > 0.0
    _phases(t0, w_sub, ph0)
    samples[0] = a
    sample_steps[0] = 0
    row = 1
    for step in range(n_steps):
        t = t0 + step * h
        t_next = t0 + (step + 1) * h
        for k in range(m):
            ph_mid[k] = ph0[k] * half_turn[k]
        # phases advance by rotation; exact resync bounds rounding growth
        if (step + 1) % PHASE_RESYNC == 0:
            _phases(t_next, w_sub, ph1)
        else:
            for k in range(m):
                ph1[k] = ph_mid[k] * half_turn[k]
        d0 = np.sin(omega0 * t) if driven else 0.0
        dm = np.sin(omega0 * (t + 0.5 * h)) if driven else 0.0
        d1 = np.sin(omega0 * t_next) if driven else 0.0
        _full_rhs(a, k1, ph0, d0, sub_idx, j_idx, coupling, gamma)
        for n in range(size):
            tmp[n] = a[n] + 0.5 * h * k1[n]
        _full_rhs(tmp, k2, ph_mid, dm, sub_idx, j_idx, coupling, gamma)
        for n in range(size):
            tmp[n] = a[n] + 0.5 * h * k2[n]
        _full_rhs(tmp, k3, ph_mid, dm, sub_idx, j_idx, coupling, gamma)
        for n in range(size):
            tmp[n] = a[n] + h * k3[n]
        _full_rhs(tmp, k4, ph1, d1, sub_idx, j_idx, coupling, gamma)
        for n in range(size):
            a[n] = a[n] + h / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n])
        for k in range(m):
            ph0[k] = ph1[k]
        done = step + 1
        if done % sample_every == 0 or done == n_steps:
            samples[row] = a
            sample_steps[row] = done
            row += 1
    return a, samples[:row], sample_steps[:row]


@njit(**_JIT)
def _phase(t, eps, omega0):
    if eps == 0.0:
        return 1.0 + 0j
    return np.exp(1j * eps * (np.cos(omega0 * t) - 1.0) / omega0)


@njit(**_JIT)
def reduced_rk4(x0, t0, h, n_steps, omega, eps, omega0):
    """Integrate the rotating-frame pair for every column of ``x0`` (shape 2 x k).

    ``h`` may be negative to run backwards in time.
    """
    x = x0.copy()
    ncol = x.shape[1]
    c = -1j * omega
    for step in range(n_steps):
        t = t0 + step * h
        e0 = _phase(t, eps, omega0)
        em = _phase(t + 0.5 * h, eps, omega0)
        e1 = _phase(t + h, eps, omega0)
        for col in range(ncol):
            xj = x[0, col]
            xs = x[1, col]
            k1j = c * e0 * xs
            k1s = c * np.conj(e0) * xj
            k2j = c * em * (xs + 0.5 * h * k1s)
            k2s = c * np.conj(em) * (xj + 0.5 * h * k1j)
            k3j = c * em * (xs + 0.5 * h * k2s)
            k3s = c * np.conj(em) * (xj + 0.5 * h * k2j)
            k4j = c * e1 * (xs + h * k3s)
            k4s = c * np.conj(e1) * (xj + h * k3j)
            x[0, col] = xj + h / 6.0 * (k1j + 2.0 * k2j + 2.0 * k3j + k4j)
            x[1, col] = xs + h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
    return x
