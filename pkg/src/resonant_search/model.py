"""Physical model of the resonant search: spectra, search problems and states.

Energies are dimensionless with hbar = 1. Levels carry integer labels (the
rotor quantum number ``n``); every index argument that names a level
(``subset``, ``j``, ``s``) is a label, while amplitude vectors are stored
positionally in the order of ``Spectrum.levels``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

#: Below this value of ``bohr_gap_ratio`` the two-level picture is suspect.
REGIME_RATIO_THRESHOLD = 10.0

NORM_TOLERANCE = 1e-6


class SearchError(Exception):
    """Base class for all errors raised by this package."""


class InvalidModelError(SearchError, ValueError):
    """A spectrum or search problem violates its construction rules."""


class InvalidArgumentError(SearchError, ValueError):
    """An operation received arguments outside its contract."""


class IntegrityError(SearchError):
    """A quantum state is not normalised."""


class AccuracyError(SearchError, ArithmeticError):
    """A numerical integration drifted beyond its accuracy budget."""


class RegimeWarning(UserWarning):
    """The Bohr frequencies are not well separated from the Rabi frequency."""


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of the background Hamiltonian with their integer labels."""

    levels: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        levels = _frozen(self.levels, float)
        labels = _frozen(self.labels, int)
        if levels.ndim != 1 or labels.shape != levels.shape:
            raise InvalidModelError("levels and labels must be 1-d and of equal length")
        if levels.size < 3:
            raise InvalidModelError(f"a spectrum needs at least 3 levels, got {levels.size}")
        if not np.all(np.isfinite(levels)):
            raise InvalidModelError("levels must be finite")
        if np.unique(labels).size != labels.size:
            raise InvalidModelError("labels must be unique")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.levels.size)

    def index_of(self, label: int) -> int:
        """Position of ``label`` in ``levels``."""
        hits = np.flatnonzero(self.labels == label)
        if hits.size == 0:
            raise InvalidModelError(f"label {label} is not in the spectrum")
        return int(hits[0])

    def energy(self, label: int) -> float:
        return float(self.levels[self.index_of(label)])

    def describe(self) -> str:
        return (
            f"{len(self)} levels, labels {self.labels[0]}..{self.labels[-1]}, "
            f"energies {self.levels[0]:g}..{self.levels[-1]:g}"
        )


@dataclass(frozen=True)
class SearchProblem:
    """The searched subset, initial state ``j`` and searched state ``s``.

    ``omega_big`` is the Rabi frequency 1/sqrt(N), ``omega_sj`` the Bohr
    frequency eps_j - eps_s driving the coupling and ``tau`` the optimal
    measurement time pi/(2 omega_big).
    """

    spectrum: Spectrum
    subset: tuple
    j: int
    s: int
    omega_big: float
    omega_sj: float
    tau: float

    @property
    def n_states(self) -> int:
        return len(self.subset)

    @property
    def j_index(self) -> int:
        return self.spectrum.index_of(self.j)

    @property
    def s_index(self) -> int:
        return self.spectrum.index_of(self.s)

    @property
    def subset_indices(self) -> np.ndarray:
        return np.array([self.spectrum.index_of(n) for n in self.subset], dtype=np.int64)

    def describe(self) -> str:
        return (
            f"N={self.n_states} subset={self.subset[0]}..{self.subset[-1]} "
            f"j={self.j} s={self.s} Omega={self.omega_big:.9g} tau={self.tau:.9g}"
        )


@dataclass(frozen=True)
class WaveState:
    """Amplitudes a_n(t) in the eigenbasis of H0 (interaction picture)."""

    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", _frozen(self.amplitudes, complex))
        object.__setattr__(self, "time", float(self.time))

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    @classmethod
    def basis(cls, size: int, index: int, time: float = 0.0) -> "WaveState":
        amps = np.zeros(size, dtype=complex)
        amps[index] = 1.0
        return cls(amps, time)

    @classmethod
    def initial(cls, problem: SearchProblem) -> "WaveState":
        """The state a_j = 1 at t = 0."""
        return cls.basis(len(problem.spectrum), problem.j_index, 0.0)


@dataclass(frozen=True)
class FieldParams:
    """Diagonal couplings Gamma_nn of the field Gamma0 sin(omega0 t)."""

    gamma_diag: np.ndarray
    omega0: float

    def __post_init__(self):
        gamma = _frozen(self.gamma_diag, float)
        if gamma.ndim != 1 or not np.all(np.isfinite(gamma)):
            raise InvalidModelError("gamma_diag must be a finite 1-d vector")
        if not (math.isfinite(self.omega0) and self.omega0 > 0):
            raise InvalidModelError(f"omega0 must be positive, got {self.omega0}")
        object.__setattr__(self, "gamma_diag", gamma)
        object.__setattr__(self, "omega0", float(self.omega0))

    @classmethod
    def for_problem(
        cls,
        problem: SearchProblem,
        omega0: float,
        gamma_jj: float = 0.0,
        gamma_ss: float = 0.0,
        gamma_other: float = 0.0,
    ) -> "FieldParams":
        gamma = np.full(len(problem.spectrum), float(gamma_other))
        gamma[problem.j_index] = gamma_jj
        gamma[problem.s_index] = gamma_ss
        return cls(gamma, omega0)

    def eps(self, problem: SearchProblem) -> float:
        """Differential coupling Gamma_ss - Gamma_jj."""
        return float(self.gamma_diag[problem.s_index] - self.gamma_diag[problem.j_index])

    def alpha(self, problem: SearchProblem) -> float:
        """Field frequency in units of the Rabi frequency."""
        return self.omega0 / problem.omega_big


@dataclass(frozen=True)
class ProbabilityRecord:
    p_j: float
    p_s: float
    p_rest: float
    time: float


def build_rotor_spectrum(n_levels: int, scale: float = 1.0) -> Spectrum:
    """Quantum rotor spectrum eps_n = scale * n**2 for n = 1..n_levels."""
    if n_levels < 3:
        raise InvalidModelError(f"n_levels must be >= 3, got {n_levels}")
    if not scale > 0:
        raise InvalidModelError(f"scale must be positive, got {scale}")
    labels = np.arange(1, n_levels + 1)
    return Spectrum(scale * labels.astype(float) ** 2, labels)


def build_search_problem(
    spectrum: Spectrum, subset: Iterable[int], j: int, s: int
) -> SearchProblem:
    subset = tuple(int(n) for n in subset)
    if len(set(subset)) != len(subset):
        raise InvalidModelError("subset contains repeated labels")
    if len(subset) < 2:
        raise InvalidModelError(f"subset needs at least 2 states, got {len(subset)}")
    for n in subset + (j, s):
        spectrum.index_of(n)
    if j in subset:
        raise InvalidModelError(f"initial state j={j} must lie outside the searched subset")
    if s not in subset:
        raise InvalidModelError(f"searched state s={s} must lie inside the searched subset")
    energies = np.array([spectrum.energy(n) for n in subset])
    if np.unique(energies).size != energies.size:
        raise InvalidModelError("degenerate energies inside the searched subset")

    n = len(subset)
    omega_big = 1.0 / math.sqrt(n)
    return SearchProblem(
        spectrum=spectrum,
        subset=subset,
        j=int(j),
        s=int(s),
        omega_big=omega_big,
        omega_sj=spectrum.energy(j) - spectrum.energy(s),
        tau=math.pi / (2.0 * omega_big),
    )


def bohr_gap_ratio(problem: SearchProblem) -> float:
    """Smallest Bohr frequency among {j} and the subset, in units of Omega."""
    idx = np.append(problem.subset_indices, problem.j_index)
    levels = np.sort(problem.spectrum.levels[idx])
    return float(np.min(np.diff(levels)) / problem.omega_big)


def check_regime(problem: SearchProblem, threshold: float = REGIME_RATIO_THRESHOLD) -> float:
    """Return ``bohr_gap_ratio`` and warn when it falls below ``threshold``."""
    ratio = bohr_gap_ratio(problem)
    if ratio < threshold:
        warnings.warn(
            f"Bohr gap ratio {ratio:.3g} < {threshold:g}: two-level approximation may fail",
            RegimeWarning,
            stacklevel=2,
        )
    return ratio


def check_normalized(amplitudes: np.ndarray, tol: float = NORM_TOLERANCE) -> float:
    norm2 = float(np.sum(np.abs(amplitudes) ** 2))
    if abs(norm2 - 1.0) > tol:
        raise IntegrityError(f"state norm^2 = {norm2!r} deviates from 1 by more than {tol:g}")
    return norm2


def probabilities(state: WaveState, problem: SearchProblem) -> ProbabilityRecord:
    check_normalized(state.amplitudes)
    p_j = float(abs(state.amplitudes[problem.j_index]) ** 2)
    p_s = float(abs(state.amplitudes[problem.s_index]) ** 2)
    return ProbabilityRecord(p_j, p_s, max(0.0, 1.0 - p_j - p_s), state.time)


def default_problem(
    n_states: int = 50,
    n_levels: Optional[int] = None,
    s: Optional[int] = None,
    seed: int = 0,
    scale: float = 1.0,
) -> SearchProblem:
    """Rotor problem with subset {1..N} and j = N + 1.

    When ``s`` is not given it is drawn uniformly from the subset using a
    generator seeded from ``seed``, so the choice is reproducible.
    """
    n_levels = n_states + 1 if n_levels is None else n_levels
    if n_levels < n_states + 1:
        raise InvalidModelError(f"n_levels={n_levels} leaves no room for j={n_states + 1}")
    spectrum = build_rotor_spectrum(n_levels, scale)
    subset = range(1, n_states + 1)
    if s is None:
        s = choose_searched_state(subset, seed)
    return build_search_problem(spectrum, subset, n_states + 1, s)


def choose_searched_state(subset: Sequence[int], seed: int) -> int:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(0xC401CE,))))
    subset = list(subset)
    return int(subset[rng.integers(len(subset))])
