"""Exit criteria for the simulator, one test per criterion.

Each test appends a PASS/FAIL line to the terminal summary.
"""

import math
import time

import mpmath
import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from resonant_search import cli
from resonant_search.dynamics import (
    ReducedState,
    StepConfig,
    integrate_full,
    integrate_reduced,
)
from resonant_search.floquet import high_probability_region, stability_map
from resonant_search.measurement import (
    MeasurementSchedule,
    markov_coefficients,
    regular_coefficients,
    run_ensemble,
    single_measurement,
    zeno_coefficients,
)
from resonant_search.model import FieldParams, WaveState, probabilities

SEED = cli.DEFAULT_SEED
N_TRAJ = 500


def record(criterion, checks):
    """``checks`` maps a short description to (passed, detail)."""
    ok = all(passed for passed, _ in checks.values())
    detail = "; ".join(f"{name}: {d}" for name, (_, d) in checks.items())
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {criterion} | {detail}")
    failed = [name for name, (passed, _) in checks.items() if not passed]
    assert not failed, f"{criterion} failed: {failed}"


def test_c1_unperturbed_resonance(rotor50):
    start = time.perf_counter()
    state = integrate_full(rotor50, None, WaveState.initial(rotor50), rotor50.tau)
    elapsed = time.perf_counter() - start
    rec = probabilities(state, rotor50)
    record(
        "C1 unperturbed resonance",
        {
            "P_s(tau)>=0.95": (rec.p_s >= 0.95, f"{rec.p_s:.6f}"),
            "P_rest<=0.02": (rec.p_rest <= 0.02, f"{rec.p_rest:.2e}"),
            "runtime<=10s": (elapsed <= 10.0, f"{elapsed:.2f}s"),
        },
    )


def test_c2_single_measurement(rotor50):
    exact, approx = single_measurement(rotor50.omega_big, 1.2 * rotor50.tau)
    reference = float((1 - mpmath.cos(mpmath.mpf("1.2") * mpmath.pi)) / 2)
    ens = run_ensemble(
        rotor50, None, MeasurementSchedule.regular(1.2 * rotor50.tau, 1), n_traj=N_TRAJ, master_seed=SEED
    )
    record(
        "C2 single measurement",
        {
            "exact=0.904508 (1e-6)": (abs(exact - reference) <= 1e-6, f"{exact:.9f}"),
            "|approx-exact|<=0.004": (abs(approx - exact) <= 0.004, f"{abs(approx - exact):.6f}"),
            "MC within 0.04": (abs(ens.p_s[0] - exact) <= 0.04, f"{ens.p_s[0]:.3f}"),
        },
    )


def test_c3_long_run_limit(rotor50):
    dt = 1.2 * rotor50.tau
    beta = regular_coefficients(rotor50.omega_big, dt, 5000).beta
    worst = float(np.max(np.abs(beta[39:] - 0.5)))
    ens = run_ensemble(
        rotor50, None, MeasurementSchedule.regular(dt, 50), n_traj=N_TRAJ, master_seed=SEED
    )
    mc_worst = float(np.max(np.abs(ens.p_s[39:] - beta[39:50])))
    record(
        "C3 long-run limit",
        {
            "|beta_m-0.5|<1e-3 for m>=40": (worst < 1e-3, f"max {worst:.2e}"),
            "MC within 0.07 for m=40..50": (mc_worst <= 0.07, f"max {mc_worst:.3f}"),
        },
    )


def test_c4_zeno_regime():
    finals = np.array([zeno_coefficients(m).final[1] for m in range(1, 5001)])
    mpmath.mp.dps = 40

    def beta_mp(m):
        return (1 - mpmath.cos(mpmath.pi / m) ** m) / 2

    threshold = next(m for m in range(1, 200) if all(beta_mp(k) < 0.1 for k in range(m, 200)))
    record(
        "C4 Zeno regime",
        {
            "beta_m<0.1 for m>=31": (bool(np.all(finals[30:] < 0.1)), f"beta_31={finals[30]:.5f}"),
            "oracle threshold m=23": (
                threshold == 23 and bool(finals[21] >= 0.1) and bool(finals[22] < 0.1),
                f"threshold {threshold}",
            ),
            "beta_30=0.0760+-1e-4": (abs(finals[29] - 0.0760) <= 1e-4, f"{finals[29]:.6f}"),
            "strictly decreasing": (bool(np.all(np.diff(finals) < 0)), "m=1..5000"),
        },
    )


def test_c5_oracle_equivalence(rotor50):
    rng = np.random.default_rng(20240501)
    worst = 0.0
    for _ in range(1000):
        intervals = rng.uniform(1e-3, 3 * rotor50.tau, size=rng.integers(1, 60))
        c = markov_coefficients(rotor50.omega_big, MeasurementSchedule(tuple(intervals)))
        v = np.array([0.0, 1.0])
        chain = []
        for dt in intervals:
            p = math.cos(rotor50.omega_big * dt) ** 2
            v = np.array([[p, 1 - p], [1 - p, p]]) @ v
            chain.append(v[0])
        worst = max(worst, float(np.max(np.abs(c.beta - chain))))
    exact = all(
        np.array_equal(
            regular_coefficients(rotor50.omega_big, rotor50.tau / m, m).beta, zeno_coefficients(m).beta
        )
        for m in range(1, 201)
    )
    record(
        "C5 oracle equivalence",
        {
            "markov vs matrix chain <=1e-12": (worst <= 1e-12, f"max {worst:.1e} over 1000"),
            "regular(tau/m)==zeno(m)": (exact, "m=1..200 bitwise"),
        },
    )


@pytest.fixture(scope="module")
def full_map(omega50):
    start = time.perf_counter()
    smap = stability_map(omega50, (0.01, 1.0, 101), (0.0, 5.0, 101), workers=4)
    return smap, time.perf_counter() - start


def test_c6_floquet_invariants(full_map):
    smap, elapsed = full_map
    det_err = float(np.max(np.abs(smap.det - 1)))
    im_tr = float(np.max(np.abs(smap.trace.imag)))
    abs_tr = float(np.max(np.abs(smap.trace)))
    eps0 = float(np.max(np.abs(smap.p_s_at_tau[0] - 1)))
    region = high_probability_region(smap.p_s_at_tau, 0.9, seed_row=0)
    record(
        "C6 Floquet invariants",
        {
            "|det-1|<=1e-8": (det_err <= 1e-8, f"{det_err:.1e}"),
            "|Im tr|<=1e-8": (im_tr <= 1e-8, f"{im_tr:.1e}"),
            "|tr|<=2+1e-8": (abs_tr <= 2 + 1e-8, f"{abs_tr:.12f}"),
            "eps=0 row = 1 (1e-6)": (eps0 <= 1e-6, f"{eps0:.1e}"),
            "P_s>=0.9 region from eps=0 covers >=25%": (
                bool(region[0].all()) and region.mean() >= 0.25,
                f"{region.mean():.1%}",
            ),
            "101x101 map <=60s": (elapsed <= 60.0, f"{elapsed:.1f}s"),
        },
    )


def test_c7_numerical_integrity(rotor50, omega50):
    w = omega50
    tau = rotor50.tau
    full = integrate_full(rotor50, None, WaveState.initial(rotor50), 50 * tau)
    full_drift = abs(full.norm - 1)
    red = integrate_reduced(w, 2 * w, w, ReducedState(1, 0), 50 * tau)
    red_drift = abs(red.norm2 - 1)

    errs = []
    for n in (50, 100, 200):
        x = integrate_reduced(w, 0.0, w, ReducedState(1, 0), tau, StepConfig(tau / n))
        errs.append(math.hypot(abs(x.x_j - math.cos(w * tau)), abs(x.x_s + 1j)))
    ratios = [a / b for a, b in zip(errs, errs[1:])]

    worst = 0.0
    for eps_ratio in (-2.0, -1.0, 1.0, 2.0):
        for alpha in (0.25, 0.5, 1.0):
            field = FieldParams.for_problem(rotor50, alpha * w, gamma_ss=eps_ratio * w)
            a = integrate_full(rotor50, field, WaveState.initial(rotor50), tau)
            x = integrate_reduced(w, field.eps(rotor50), field.omega0, ReducedState(1, 0), tau)
            worst = max(worst, abs(probabilities(a, rotor50).p_s - x.p_s))
    record(
        "C7 numerical integrity",
        {
            "full norm over 50 tau": (full_drift <= 1e-8, f"{full_drift:.1e}"),
            "reduced norm over 50 tau": (red_drift <= 1e-8, f"{red_drift:.1e}"),
            "RK4 halving ratio 16+-1.5": (
                all(abs(r - 16) <= 1.5 for r in ratios),
                ", ".join(f"{r:.2f}" for r in ratios),
            ),
            "reduced vs full P_s(tau) <=0.05": (worst <= 0.05, f"max {worst:.1e}"),
        },
    )


def test_c8_determinism(tmp_path):
    def produce(name, *args):
        out = tmp_path / name
        assert cli.main([*args, "--out", str(out)]) == 0
        return out.read_bytes()

    fig1 = ("fig1", "--alpha", "0.1:1.0:6", "--eps", "0:5:6")
    fig2 = ("fig2", "--m-max", "20", "--seed", "17")
    fig3 = ("fig3", "--m-max", "3", "--trajectories", "60", "--backend", "full", "--seed", "17")
    same = {
        "fig1": produce("a1", *fig1) == produce("b1", *fig1, "--workers", "4"),
        "fig2": produce("a2", *fig2) == produce("b2", *fig2, "--workers", "4"),
        "fig3 full": produce("a3", *fig3) == produce("b3", *fig3, "--workers", "3"),
    }
    record(
        "C8 determinism",
        {f"{k} byte-identical across runs/threads": (v, "yes" if v else "no") for k, v in same.items()},
    )
