"""Time evolution of the resonant search.

Three levels of description are available:

* ``integrate_full`` solves the amplitude equations for every level of the
  spectrum, including the fast Bohr-frequency phases and the diagonal field;
* ``integrate_reduced`` solves the rotating-frame two-level system
  ``dx_j/dt = -i Omega x_s e^{i phi}``, ``dx_s/dt = -i Omega x_j e^{-i phi}``
  with ``phi(t) = eps (cos omega0 t - 1) / omega0``;
* ``unperturbed_probabilities`` is the closed-form Rabi result.

Both integrators use fixed-step RK4 and never renormalise; a norm drift
larger than ``NORM_TOLERANCE`` raises ``AccuracyError``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import _kernels
from .model import (
    NORM_TOLERANCE,
    AccuracyError,
    FieldParams,
    InvalidArgumentError,
    ProbabilityRecord,
    SearchProblem,
    WaveState,
    probabilities,
)

#: Steps per period of the fastest Bohr frequency (upper bound on h).
FULL_STEPS_PER_PERIOD = 20
#: Default full-model resolution; the norm then holds to 1e-8 over 50 tau.
FULL_DEFAULT_STEPS_PER_PERIOD = 40
#: Steps per period of the fastest reduced-model scale (upper bound on h).
REDUCED_STEPS_PER_PERIOD = 200
#: Default resolution of the reduced model; finer than the bound so the norm
#: holds to 1e-8 over long horizons.
REDUCED_DEFAULT_STEPS_PER_PERIOD = 1000


@dataclass(frozen=True)
class StepConfig:
    """Fixed-step RK4 settings.

    ``step=None`` selects the default step for the model being integrated.
    The step actually used is shortened so that an integer number of steps
    lands exactly on the end time.
    """

    step: Optional[float] = None
    sample_every: int = 1
    method: str = "rk4"

    def __post_init__(self):
        if self.method != "rk4":
            raise InvalidArgumentError(f"unsupported method {self.method!r}")
        if self.step is not None and not (math.isfinite(self.step) and self.step > 0):
            raise InvalidArgumentError(f"step must be positive, got {self.step}")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise InvalidArgumentError(f"sample_every must be an integer >= 1, got {self.sample_every}")


@dataclass(frozen=True)
class ReducedState:
    x_j: complex
    x_s: complex
    time: float = 0.0

    @property
    def norm2(self) -> float:
        return abs(self.x_j) ** 2 + abs(self.x_s) ** 2

    @property
    def p_s(self) -> float:
        return abs(self.x_s) ** 2


@dataclass(frozen=True)
class Trajectory:
    """Final state of a full integration plus the sampled probabilities."""

    state: WaveState
    records: List[ProbabilityRecord]
    norms: np.ndarray


def optimal_time(omega_big: float) -> float:
    return math.pi / (2.0 * omega_big)


def unperturbed_probabilities(omega_big: float, t: float) -> Tuple[float, float]:
    """Closed-form (P_j, P_s) = (cos^2 Omega t, sin^2 Omega t)."""
    return math.cos(omega_big * t) ** 2, math.sin(omega_big * t) ** 2


def max_bohr_frequency(problem: SearchProblem) -> float:
    levels = problem.spectrum.levels
    return float(levels.max() - levels.min())


def full_step_bound(problem: SearchProblem) -> float:
    return 2.0 * math.pi / max_bohr_frequency(problem) / FULL_STEPS_PER_PERIOD


def full_default_step(problem: SearchProblem) -> float:
    return 2.0 * math.pi / max_bohr_frequency(problem) / FULL_DEFAULT_STEPS_PER_PERIOD


def reduced_fastest_scale(omega_big: float, eps: float, omega0: float) -> float:
    return max(omega_big, omega0, abs(eps))


def reduced_step_bound(omega_big: float, eps: float, omega0: float) -> float:
    return 2.0 * math.pi / reduced_fastest_scale(omega_big, eps, omega0) / REDUCED_STEPS_PER_PERIOD


def reduced_default_step(omega_big: float, eps: float, omega0: float) -> float:
    return (
        2.0 * math.pi / reduced_fastest_scale(omega_big, eps, omega0) / REDUCED_DEFAULT_STEPS_PER_PERIOD
    )


def step_count(duration: float, h_max: float) -> int:
    """Smallest number of equal steps covering ``duration`` with steps <= ``h_max``."""
    if duration == 0:
        return 0
    # tolerate duration/h_max landing a hair above an integer
    return max(1, math.ceil(duration / h_max * (1.0 - 1e-12)))


def resolve_step(cfg: Optional[StepConfig], bound: float, default: float) -> float:
    if cfg is None or cfg.step is None:
        return default
    if cfg.step > bound * (1.0 + 1e-12):
        raise InvalidArgumentError(
            f"step {cfg.step:.6g} exceeds the resolution bound {bound:.6g} for this model"
        )
    return cfg.step


def _field_arrays(problem: SearchProblem, field: Optional[FieldParams]):
    size = len(problem.spectrum)
    if field is None:
        return np.zeros(size), 0.0
    if field.gamma_diag.size != size:
        raise InvalidArgumentError(
            f"field has {field.gamma_diag.size} couplings, spectrum has {size} levels"
        )
    return np.asarray(field.gamma_diag, dtype=float), field.omega0


def _coupling_arrays(problem: SearchProblem):
    sub_idx = problem.subset_indices
    levels = problem.spectrum.levels
    # phase rate of each subset level relative to the searched level
    w_sub = levels[sub_idx] - levels[problem.s_index]
    return w_sub.astype(float), sub_idx


def full_rhs(
    problem: SearchProblem, field: Optional[FieldParams], t: float, amplitudes: np.ndarray
) -> np.ndarray:
    """da_n/dt of the full driven amplitude equations.

    With ``w_n = eps_n - eps_s``::

        n in subset:  -i/sqrt(N) a_j e^{i w_n t}            - i sin(omega0 t) G_nn a_n
        n == j:       -i/sqrt(N) sum_m a_m e^{-i w_m t}     - i sin(omega0 t) G_jj a_j
        otherwise:                                           - i sin(omega0 t) G_nn a_n
    """
    a = np.asarray(amplitudes, dtype=complex)
    if a.shape != (len(problem.spectrum),):
        raise InvalidArgumentError(
            f"amplitude vector has shape {a.shape}, expected ({len(problem.spectrum)},)"
        )
    gamma, omega0 = _field_arrays(problem, field)
    w_sub, sub_idx = _coupling_arrays(problem)
    return _kernels.full_rhs(
        float(t), a.copy(), w_sub, sub_idx, problem.j_index, problem.omega_big, gamma, omega0
    )


def integrate_full(
    problem: SearchProblem,
    field: Optional[FieldParams],
    state0: WaveState,
    t_end: float,
    cfg: Optional[StepConfig] = None,
    record: bool = False,
):
    """Evolve ``state0`` to ``t_end`` under the full amplitude equations.

    Returns the final ``WaveState``, or a ``Trajectory`` when ``record`` is
    set (probabilities sampled every ``cfg.sample_every`` steps, always
    including the first and last step).
    """
    if state0.amplitudes.shape != (len(problem.spectrum),):
        raise InvalidArgumentError("state does not match the spectrum size")
    if t_end < state0.time:
        raise InvalidArgumentError(f"t_end={t_end} precedes the state time {state0.time}")
    h_max = resolve_step(cfg, full_step_bound(problem), full_default_step(problem))
    duration = t_end - state0.time
    n_steps = step_count(duration, h_max)
    h = duration / n_steps if n_steps else 0.0
    sample_every = cfg.sample_every if cfg is not None else 1

    gamma, omega0 = _field_arrays(problem, field)
    w_sub, sub_idx = _coupling_arrays(problem)
    final, samples, sample_steps = _kernels.full_rk4(
        np.array(state0.amplitudes, dtype=complex),
        state0.time,
        h,
        n_steps,
        sample_every if record else max(n_steps, 1),
        w_sub,
        sub_idx,
        problem.j_index,
        problem.omega_big,
        gamma,
        omega0,
    )
    norm = float(np.sqrt(np.sum(np.abs(final) ** 2)))
    if abs(norm - state0.norm) > NORM_TOLERANCE:
        raise AccuracyError(
            f"norm drifted to {norm!r} over [{state0.time}, {t_end}] with h={h:.3g}; reduce the step"
        )
    out = WaveState(final, t_end)
    if not record:
        return out

    norms = np.sqrt(np.sum(np.abs(samples) ** 2, axis=1))
    records = []
    for amps, k in zip(samples, sample_steps):
        t = t_end if k == n_steps else state0.time + k * h
        records.append(probabilities(WaveState(amps, t), problem))
    return Trajectory(out, records, norms)


def evolve_reduced_matrix(
    x0: np.ndarray, t0: float, t1: float, omega_big: float, eps: float, omega0: float, h_max: float
) -> np.ndarray:
    """Propagate the columns of ``x0`` (2 x k) from ``t0`` to ``t1`` (either direction)."""
    n_steps = step_count(abs(t1 - t0), h_max)
    h = (t1 - t0) / n_steps if n_steps else 0.0
    return _kernels.reduced_rk4(
        np.ascontiguousarray(x0, dtype=complex), float(t0), h, n_steps,
        float(omega_big), float(eps), float(omega0),
    )


def integrate_reduced(
    omega_big: float,
    eps: float,
    omega0: float,
    x0: ReducedState,
    t_end: float,
    cfg: Optional[StepConfig] = None,
) -> ReducedState:
    if t_end < x0.time:
        raise InvalidArgumentError(f"t_end={t_end} precedes the state time {x0.time}")
    if not omega0 > 0:
        raise InvalidArgumentError(f"omega0 must be positive, got {omega0}")
    h_max = resolve_step(
        cfg,
        reduced_step_bound(omega_big, eps, omega0),
        reduced_default_step(omega_big, eps, omega0),
    )
    x = evolve_reduced_matrix(
        np.array([[x0.x_j], [x0.x_s]], dtype=complex), x0.time, t_end, omega_big, eps, omega0, h_max
    )
    out = ReducedState(complex(x[0, 0]), complex(x[1, 0]), float(t_end))
    if abs(math.sqrt(out.norm2) - math.sqrt(x0.norm2)) > NORM_TOLERANCE:
        raise AccuracyError(
            f"reduced norm drifted to {out.norm2!r} at t={t_end}; reduce the step"
        )
    return out
