import cmath
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from resonant_search.dynamics import StepConfig
from resonant_search.floquet import (
    Monodromy,
    floquet_exponent,
    high_probability_region,
    is_stable,
    monodromy,
    searched_probability_at_tau,
    stability_map,
)
from resonant_search.model import InvalidArgumentError


def monodromy_oracle(omega, eps, omega0):
    """Fundamental matrix over one period by adaptive DOP853."""

    def f(t, x):
        ph = np.exp(1j * eps * (np.cos(omega0 * t) - 1.0) / omega0)
        return np.array([-1j * omega * ph * x[1], -1j * omega * np.conj(ph) * x[0]])

    period = 2 * math.pi / omega0
    cols = []
    for x0 in ([1, 0], [0, 1]):
        sol = solve_ivp(f, (0, period), np.array(x0, complex), method="DOP853", rtol=1e-13, atol=1e-14)
        cols.append(sol.y[:, -1])
    return np.array(cols).T


def _fake(trace, period=1.0):
    return Monodromy(np.eye(2), period, complex(trace), 1 + 0j, np.ones(2))


class TestMonodromy:
    @pytest.mark.parametrize("alpha", [0.3, 0.77, 1.0, 1.6])
    def test_undriven_rotation(self, omega50, alpha):
        omega0 = alpha * omega50
        m = monodromy(omega50, 0.0, omega0)
        assert m.trace == pytest.approx(2 * math.cos(omega50 * m.period), abs=1e-9)
        assert abs(m.det - 1) <= 1e-8

    def test_period_doubling_boundary(self, omega50):
        m = monodromy(omega50, 0.0, 2 * omega50)
        assert m.trace.real == pytest.approx(-2.0, abs=1e-9)

    def test_driven_trace_against_oracle(self, omega50):
        w = omega50
        ref = np.trace(monodromy_oracle(w, w / 2, w / 2))
        m = monodromy(w, w / 2, w / 2)
        assert abs(m.trace - ref) < 1e-8
        # frozen from the DOP853 oracle
        assert m.trace.real == pytest.approx(1.95743324054238, abs=1e-8)

    def test_step_halving_converges(self, omega50):
        w = omega50
        base = 2 * math.pi / w / 1000
        t1 = monodromy(w, w / 2, w / 2, StepConfig(base)).trace
        t2 = monodromy(w, w / 2, w / 2, StepConfig(base / 2)).trace
        assert abs(t1 - t2) < 1e-8

    @pytest.mark.parametrize("alpha, eps_ratio", [(0.05, 4.0), (0.4, 2.5), (1.0, 5.0), (0.9, -3.0)])
    def test_su2_invariants(self, omega50, alpha, eps_ratio):
        m = monodromy(omega50, eps_ratio * omega50, alpha * omega50)
        assert abs(m.det - 1) <= 1e-8
        assert abs(m.trace.imag) <= 1e-8
        assert abs(m.trace) <= 2 + 1e-8
        assert np.allclose(np.abs(m.eigenvalues), 1.0, atol=1e-8)

    def test_rejects_nonpositive_frequency(self, omega50):
        with pytest.raises(InvalidArgumentError):
            monodromy(omega50, 0.1, 0.0)


class TestFloquetExponent:
    def test_trace_two(self):
        assert floquet_exponent(_fake(2.0)) == 0

    def test_trace_minus_two(self):
        T = 3.0
        assert floquet_exponent(_fake(-2.0, T)) == pytest.approx(1j * math.pi / T, abs=1e-15)

    def test_rotation_quasifrequency(self, omega50):
        m = monodromy(omega50, 0.0, 0.37 * omega50)
        mu = floquet_exponent(m)
        assert is_stable(mu)
        # mu = +-i Omega modulo 2 pi i / T
        k = (omega50 - mu.imag) * m.period / (2 * math.pi)
        k2 = (omega50 + mu.imag) * m.period / (2 * math.pi)
        assert min(abs(k - round(k)), abs(k2 - round(k2))) < 1e-8

    def test_relation(self, omega50):
        m = monodromy(omega50, 1.4 * omega50, 0.6 * omega50)
        mu = floquet_exponent(m)
        assert cmath.cosh(mu * m.period) == pytest.approx(m.trace / 2, abs=1e-12)
        assert is_stable(mu)


class TestSearchedProbability:
    @pytest.mark.parametrize("alpha", [0.05, 0.5, 1.0])
    def test_no_coupling_difference(self, omega50, alpha):
        assert searched_probability_at_tau(omega50, 0.0, alpha * omega50) == pytest.approx(1.0, abs=1e-8)

    def test_against_oracle(self, omega50):
        w = omega50
        p = searched_probability_at_tau(w, w, w / 2)
        assert p == pytest.approx(0.96498937128095, abs=1e-8)

    @pytest.mark.parametrize("alpha, eps_ratio", [(0.5, 1.0), (0.3, 2.7), (0.95, 4.1)])
    def test_eps_sign_symmetry(self, omega50, alpha, eps_ratio):
        plus = searched_probability_at_tau(omega50, eps_ratio * omega50, alpha * omega50)
        minus = searched_probability_at_tau(omega50, -eps_ratio * omega50, alpha * omega50)
        assert plus == pytest.approx(minus, abs=1e-12)


class TestStabilityMap:
    def test_small_grid(self, omega50):
        m = stability_map(omega50, (0.1, 0.5, 3), (0.0, 1.0, 3))
        assert m.p_s_at_tau.shape == (3, 3)
        assert np.all((m.p_s_at_tau >= 0) & (m.p_s_at_tau <= 1))
        assert np.allclose(m.p_s_at_tau[0], 1.0, atol=1e-6)
        assert np.all(np.diff(m.alpha_grid) > 0) and np.all(np.diff(m.eps_grid) > 0)
        assert m.stable_flags.all()

    def test_workers_do_not_change_result(self, omega50):
        a = stability_map(omega50, (0.2, 1.0, 4), (0.0, 3.0, 5), workers=1)
        b = stability_map(omega50, (0.2, 1.0, 4), (0.0, 3.0, 5), workers=3)
        assert np.array_equal(a.p_s_at_tau, b.p_s_at_tau)
        assert np.array_equal(a.trace, b.trace)

    def test_point_order_independence(self, omega50):
        m = stability_map(omega50, (0.2, 1.0, 3), (0.0, 2.0, 3))
        for i, e in reversed(list(enumerate(m.eps_grid))):
            for k, a in reversed(list(enumerate(m.alpha_grid))):
                p = searched_probability_at_tau(omega50, e * omega50, a * omega50)
                assert p == m.p_s_at_tau[i, k]

    def test_bad_grid(self, omega50):
        with pytest.raises(InvalidArgumentError):
            stability_map(omega50, (0.0, 1.0, 3), (0.0, 1.0, 3))
        with pytest.raises(InvalidArgumentError):
            stability_map(omega50, (0.1, 1.0, 1), (0.0, 1.0, 3))

    def test_region_helper(self):
        p = np.array([[1.0, 1.0, 0.2], [0.95, 0.1, 0.99], [0.3, 0.2, 0.99]])
        region = high_probability_region(p, 0.9)
        assert region.tolist() == [[True, True, False], [True, False, False], [False, False, False]]
