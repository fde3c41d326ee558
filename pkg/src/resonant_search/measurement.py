"""Repeated projective measurements of the search.

Between measurements the two populations (P_s, P_j) are mixed by the
doubly stochastic matrix [[p, q], [q, p]] with p = cos^2(Omega dt); after k
measurements starting from (0, 1) the searched probability is

    beta_k = (1 - prod_i cos(2 Omega dt_i)) / 2,

one factor per interval. The Monte Carlo side samples Born-rule collapses
on an ensemble of trajectories with per-trajectory random streams.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .dynamics import StepConfig, integrate_full, optimal_time
from .model import (
    FieldParams,
    InvalidArgumentError,
    SearchProblem,
    WaveState,
    check_normalized,
)

BACKENDS = ("two-level", "full")
RNG_ALGORITHM = "numpy PCG64, stream = SeedSequence(master_seed, spawn_key=(stream, trajectory))"


@dataclass(frozen=True)
class MeasurementSchedule:
    """Intervals between consecutive measurements; the first starts at t = 0."""

    intervals: Tuple[float, ...]

    def __post_init__(self):
        intervals = tuple(float(dt) for dt in self.intervals)
        if not intervals:
            raise InvalidArgumentError("a schedule needs at least one interval")
        if not all(math.isfinite(dt) and dt > 0 for dt in intervals):
            raise InvalidArgumentError("all intervals must be positive and finite")
        object.__setattr__(self, "intervals", intervals)

    @property
    def m(self) -> int:
        return len(self.intervals)

    @property
    def times(self) -> np.ndarray:
        return np.cumsum(self.intervals)

    @classmethod
    def regular(cls, dt: float, m: int) -> "MeasurementSchedule":
        if m < 1:
            raise InvalidArgumentError(f"m must be >= 1, got {m}")
        return cls((dt,) * m)

    @classmethod
    def zeno(cls, omega_big: float, m: int) -> "MeasurementSchedule":
        """``m`` equal intervals filling the optimal time."""
        return cls.regular(optimal_time(omega_big) / m, m)


@dataclass(frozen=True)
class MarkovCoefficients:
    """alpha_k, beta_k after k = 1..m measurements (index k-1)."""

    alpha: np.ndarray
    beta: np.ndarray

    def __len__(self) -> int:
        return int(self.beta.size)

    @property
    def final(self) -> Tuple[float, float]:
        return float(self.alpha[-1]), float(self.beta[-1])


@dataclass(frozen=True)
class EnsembleResult:
    """Empirical occupations after each measurement (index k-1)."""

    p_s: np.ndarray
    p_j: np.ndarray
    p_rest: np.ndarray
    n_traj: int
    master_seed: int
    backend: str
    rng_algorithm: str = RNG_ALGORITHM

    @staticmethod
    def _stderr(p, n):
        return np.sqrt(p * (1.0 - p) / n)

    @property
    def stderr_s(self) -> np.ndarray:
        return self._stderr(self.p_s, self.n_traj)

    @property
    def stderr_j(self) -> np.ndarray:
        return self._stderr(self.p_j, self.n_traj)

    @property
    def stderr_rest(self) -> np.ndarray:
        return self._stderr(self.p_rest, self.n_traj)


def transition_matrix(omega_big: float, dt: float) -> np.ndarray:
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    p = math.cos(omega_big * dt) ** 2
    q = 1.0 - p
    return np.array([[p, q], [q, p]])


def _coefficients(factors: np.ndarray) -> MarkovCoefficients:
    prod = np.cumprod(factors)
    beta = 0.5 * (1.0 - prod)
    # 1 - beta keeps alpha + beta == 1 exactly in floating point
    alpha = 1.0 - beta
    return MarkovCoefficients(alpha, beta)


def markov_coefficients(omega_big: float, schedule: MeasurementSchedule) -> MarkovCoefficients:
    dts = np.asarray(schedule.intervals)
    return _coefficients(np.cos(2.0 * omega_big * dts))


def regular_coefficients(omega_big: float, dt: float, m: int) -> MarkovCoefficients:
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    if m < 1:
        raise InvalidArgumentError(f"m must be >= 1, got {m}")
    return _coefficients(np.full(m, math.cos(2.0 * omega_big * dt)))


def zeno_coefficients(m: int) -> MarkovCoefficients:
    """m equal intervals tau/m; each factor is cos(pi/m)."""
    if m < 1:
        raise InvalidArgumentError(f"m must be >= 1, got {m}")
    return _coefficients(np.full(m, math.cos(math.pi / m)))


def single_measurement(omega_big: float, tau_star: float) -> Tuple[float, float]:
    """Searched probability for one measurement at the estimate ``tau_star``.

    Returns the exact value and its quadratic expansion in the relative
    error (tau_star - tau)/tau.
    """
    if not tau_star > 0:
        raise InvalidArgumentError(f"tau_star must be positive, got {tau_star}")
    tau = optimal_time(omega_big)
    exact = 0.5 * (1.0 - math.cos(2.0 * omega_big * tau_star))
    rel = (tau_star - tau) / tau
    approx = 1.0 - math.pi**2 / 4.0 * rel**2
    return exact, approx


def trajectory_rng(master_seed: int, index: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(stream, index)))
    )


def _born_cdf(amplitudes: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(np.abs(amplitudes) ** 2)
    return cdf / cdf[-1]


def _draw(cdf: np.ndarray, rng: np.random.Generator) -> int:
    idx = int(np.searchsorted(cdf, rng.random(), side="right"))
    return min(idx, cdf.size - 1)


def collapse(state: WaveState, rng: np.random.Generator) -> Tuple[int, WaveState]:
    """Projective measurement in the H0 eigenbasis (Born rule).

    Consumes exactly one uniform variate from ``rng``.
    """
    check_normalized(state.amplitudes)
    idx = _draw(_born_cdf(state.amplitudes), rng)
    return idx, WaveState.basis(state.amplitudes.size, idx, state.time)


class _TwoLevelPropagator:
    """Closed-form Rabi rotation between j and s (eps = 0)."""

    def __init__(self, problem: SearchProblem):
        self.problem = problem
        self.size = len(problem.spectrum)

    def __call__(self, start: int, t0: float, t1: float) -> np.ndarray:
        p = self.problem
        theta = p.omega_big * (t1 - t0)
        amps = np.zeros(self.size, dtype=complex)
        if start == p.j_index:
            amps[p.j_index] = math.cos(theta)
            amps[p.s_index] = -1j * math.sin(theta)
        elif start == p.s_index:
            amps[p.s_index] = math.cos(theta)
            amps[p.j_index] = -1j * math.sin(theta)
        else:
            raise InvalidArgumentError("two-level backend cannot leave the {j, s} pair")
        return amps


class _FullPropagator:
    def __init__(self, problem: SearchProblem, field: Optional[FieldParams], cfg):
        self.problem = problem
        self.field = field
        self.cfg = cfg

    def __call__(self, start: int, t0: float, t1: float) -> np.ndarray:
        state0 = WaveState.basis(len(self.problem.spectrum), start, t0)
        return integrate_full(self.problem, self.field, state0, t1, self.cfg).amplitudes


def run_ensemble(
    problem: SearchProblem,
    field: Optional[FieldParams],
    schedule: MeasurementSchedule,
    backend: str = "two-level",
    n_traj: int = 500,
    master_seed: int = 0,
    cfg: Optional[StepConfig] = None,
    stream: int = 0,
    workers: int = 1,
) -> EnsembleResult:
    """Monte Carlo ensemble of measured trajectories.

    Every trajectory starts in j at t = 0, evolves to each measurement time
    and collapses there. Trajectory ``i`` draws one uniform variate per
    measurement from its own stream ``trajectory_rng(master_seed, i, stream)``,
    so results do not depend on scheduling. After a collapse the state is a
    basis vector at a known time; its evolution over the next interval is a
    pure function of (start level, interval) and is computed once and shared.
    """
    if backend not in BACKENDS:
        raise InvalidArgumentError(f"unknown backend {backend!r}; choose from {BACKENDS}")
    if n_traj < 1:
        raise InvalidArgumentError(f"n_traj must be >= 1, got {n_traj}")
    if backend == "two-level":
        if field is not None and field.eps(problem) != 0.0:
            raise InvalidArgumentError("two-level backend requires no field or eps = 0")
        propagate = _TwoLevelPropagator(problem)
    else:
        propagate = _FullPropagator(problem, field, cfg)

    m = schedule.m
    bounds = np.concatenate(([0.0], schedule.times))
    rngs = [trajectory_rng(master_seed, i, stream) for i in range(n_traj)]
    current = np.full(n_traj, problem.j_index, dtype=np.int64)
    counts = np.zeros((m, 3), dtype=np.int64)

    for k in range(m):
        t0, t1 = float(bounds[k]), float(bounds[k + 1])
        starts = sorted(set(current.tolist()))
        if workers > 1 and len(starts) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                evolved = list(pool.map(lambda n: propagate(n, t0, t1), starts))
        else:
            evolved = [propagate(n, t0, t1) for n in starts]
        cdfs: Dict[int, np.ndarray] = {}
        for n, amps in zip(starts, evolved):
            check_normalized(amps)
            cdfs[n] = _born_cdf(amps)
        for i in range(n_traj):
            current[i] = _draw(cdfs[int(current[i])], rngs[i])
        n_s = int(np.count_nonzero(current == problem.s_index))
        n_j = int(np.count_nonzero(current == problem.j_index))
        counts[k] = (n_s, n_j, n_traj - n_s - n_j)

    freq = counts / float(n_traj)
    return EnsembleResult(
        p_s=freq[:, 0],
        p_j=freq[:, 1],
        p_rest=freq[:, 2],
        n_traj=n_traj,
        master_seed=master_seed,
        backend=backend,
    )
