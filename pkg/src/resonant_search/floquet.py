"""Floquet analysis of the driven two-level search and the (alpha, eps) map.

The monodromy is the fundamental matrix of the rotating-frame system over
one period T = 2 pi / omega0 of its coefficients, started from the identity.
The coefficient matrix is anti-Hermitian and trace-free, so the monodromy
lies in SU(2): its determinant is 1 and its trace is real with |tr| <= 2.
The Floquet exponent follows from cosh(mu T) = tr / 2.
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .dynamics import (
    StepConfig,
    resolve_step,
    evolve_reduced_matrix,
    optimal_time,
    reduced_default_step,
    reduced_step_bound,
)
from .model import AccuracyError, InvalidArgumentError

DET_TOLERANCE = 1e-6
STABLE_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Monodromy:
    matrix: np.ndarray
    period: float
    trace: complex
    det: complex
    eigenvalues: np.ndarray


@dataclass(frozen=True)
class StabilityMap:
    """Grid of P_s(tau) and Floquet data; rows follow ``eps_grid``, columns ``alpha_grid``.

    ``eps_grid`` is in units of Omega.
    """

    alpha_grid: np.ndarray
    eps_grid: np.ndarray
    p_s_at_tau: np.ndarray
    mu_imag: np.ndarray
    trace: np.ndarray
    det: np.ndarray
    stable_flags: np.ndarray
    omega_big: float
    notes: dict = field(default_factory=dict)


class GridPointError(AccuracyError):
    """Accuracy failure at a specific grid point."""

    def __init__(self, alpha: float, eps_over_omega: float, cause: Exception):
        super().__init__(f"at alpha={alpha:g}, eps/Omega={eps_over_omega:g}: {cause}")
        self.alpha = alpha
        self.eps_over_omega = eps_over_omega


def _check_omega0(omega0: float) -> None:
    if not (math.isfinite(omega0) and omega0 > 0):
        raise InvalidArgumentError(f"omega0 must be positive, got {omega0}")


def monodromy(
    omega_big: float, eps: float, omega0: float, cfg: Optional[StepConfig] = None
) -> Monodromy:
    _check_omega0(omega0)
    period = 2.0 * math.pi / omega0
    h_max = resolve_step(
        cfg,
        reduced_step_bound(omega_big, eps, omega0),
        reduced_default_step(omega_big, eps, omega0),
    )
    mat = evolve_reduced_matrix(np.eye(2, dtype=complex), 0.0, period, omega_big, eps, omega0, h_max)
    det = complex(mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0])
    if abs(det - 1.0) > DET_TOLERANCE:
        raise AccuracyError(f"monodromy determinant {det!r} drifted from 1; reduce the step")
    mat.flags.writeable = False
    return Monodromy(
        matrix=mat,
        period=period,
        trace=complex(mat[0, 0] + mat[1, 1]),
        det=det,
        eigenvalues=np.linalg.eigvals(mat),
    )


def floquet_exponent(m: Monodromy) -> complex:
    """Principal-branch mu with cosh(mu T) = trace / 2.

    mu is only defined modulo 2 pi i / T and up to sign.
    """
    return cmath.acosh(m.trace / 2.0) / m.period


def is_stable(mu: complex) -> bool:
    return abs(mu.real) <= STABLE_TOLERANCE


def searched_probability_at_tau(
    omega_big: float, eps: float, omega0: float, cfg: Optional[StepConfig] = None
) -> float:
    """|x_s(tau)|^2 starting from x_j = 1 at t = 0."""
    _check_omega0(omega0)
    h_max = resolve_step(
        cfg,
        reduced_step_bound(omega_big, eps, omega0),
        reduced_default_step(omega_big, eps, omega0),
    )
    tau = optimal_time(omega_big)
    x = evolve_reduced_matrix(
        np.array([[1.0], [0.0]], dtype=complex), 0.0, tau, omega_big, eps, omega0, h_max
    )
    norm2 = abs(x[0, 0]) ** 2 + abs(x[1, 0]) ** 2
    if abs(norm2 - 1.0) > DET_TOLERANCE:
        raise AccuracyError(f"reduced norm^2 drifted to {norm2!r} at tau; reduce the step")
    return min(1.0, abs(x[1, 0]) ** 2)


def grid(lo: float, hi: float, steps: int) -> np.ndarray:
    """``steps`` points from ``lo`` to ``hi`` inclusive."""
    if steps < 2:
        raise InvalidArgumentError(f"grid needs at least 2 steps, got {steps}")
    if not hi > lo:
        raise InvalidArgumentError(f"grid needs lo < hi, got {lo}:{hi}")
    return np.linspace(lo, hi, steps)


def _map_point(omega_big, alpha, eps_ratio, cfg):
    omega0 = alpha * omega_big
    eps = eps_ratio * omega_big
    try:
        p_s = searched_probability_at_tau(omega_big, eps, omega0, cfg)
        mono = monodromy(omega_big, eps, omega0, cfg)
    except AccuracyError as exc:
        raise GridPointError(alpha, eps_ratio, exc) from exc
    mu = floquet_exponent(mono)
    return p_s, mu, mono.trace, mono.det


def stability_map(
    omega_big: float,
    alpha_range: Tuple[float, float, int],
    eps_range: Tuple[float, float, int],
    cfg: Optional[StepConfig] = None,
    workers: int = 1,
) -> StabilityMap:
    """Evaluate P_s(tau) and the Floquet exponent over an (alpha, eps/Omega) grid.

    Every point is an independent fixed-step computation, so the result does
    not depend on ``workers`` or evaluation order.
    """
    alphas = grid(*alpha_range)
    epss = grid(*eps_range)
    if alphas[0] <= 0:
        raise InvalidArgumentError("alpha grid must be strictly positive")
    shape = (epss.size, alphas.size)
    p_s = np.empty(shape)
    mu_imag = np.empty(shape)
    trace = np.empty(shape, dtype=complex)
    det = np.empty(shape, dtype=complex)
    stable = np.empty(shape, dtype=bool)

    def row(i):
        out = []
        for a in alphas:
            out.append(_map_point(omega_big, float(a), float(epss[i]), cfg))
        return i, out

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(row, range(epss.size)))
    else:
        results = [row(i) for i in range(epss.size)]

    for i, values in results:
        for k, (ps, mu, tr, dt) in enumerate(values):
            p_s[i, k] = ps
            mu_imag[i, k] = mu.imag
            trace[i, k] = tr
            det[i, k] = dt
            stable[i, k] = is_stable(mu)

    return StabilityMap(
        alpha_grid=alphas,
        eps_grid=epss,
        p_s_at_tau=p_s,
        mu_imag=mu_imag,
        trace=trace,
        det=det,
        stable_flags=stable,
        omega_big=omega_big,
        notes={
            "period": "T = 2*pi/omega0",
            "mu_branch": "principal acosh(trace/2)/T; defined modulo 2*pi*i/T and up to sign",
        },
    )


def high_probability_region(
    p_s: np.ndarray, threshold: float = 0.9, seed_row: int = 0
) -> np.ndarray:
    """Cells with P_s >= ``threshold`` 4-connected to row ``seed_row``."""
    from scipy import ndimage

    mask = p_s >= threshold
    labels, _ = ndimage.label(mask)
    touching = np.unique(labels[seed_row][labels[seed_row] > 0])
    return np.isin(labels, touching)
