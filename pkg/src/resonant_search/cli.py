"""Command-line front end: ``resonant-search {fig1,fig2,fig3,evolve}``.

Every command writes a CSV preceded by ``#`` metadata lines that echo all
result-affecting parameters. Output is rendered in memory and written
atomically, so a failed run never leaves a partial file behind.

Plotting is left to external tools, e.g.::

    resonant-search fig3 --out fig3.csv
    python -c "import pandas as pd; pd.read_csv('fig3.csv', comment='#').plot(x='m')"
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
import warnings
from typing import Dict, List, Optional, Sequence

from . import __version__
from .dynamics import StepConfig, full_default_step, full_step_bound, integrate_full, step_count
from .floquet import stability_map
from .measurement import (
    RNG_ALGORITHM,
    MeasurementSchedule,
    regular_coefficients,
    run_ensemble,
    zeno_coefficients,
)
from .model import (
    AccuracyError,
    FieldParams,
    InvalidArgumentError,
    RegimeWarning,
    SearchError,
    WaveState,
    check_regime,
    default_problem,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ACCURACY = 3
EXIT_IO = 4

DEFAULT_SEED = 0
# options that do not change the numbers in the output
_NOT_ECHOED = {"command", "out", "config", "workers"}
# the field map depends only on N and the grids
_FIG1_UNUSED = {"seed", "levels", "s_index", "gamma_jj", "gamma_ss", "omega0"}


class GridSpec:
    """``lo:hi:steps`` with both endpoints included."""

    def __init__(self, text: str):
        try:
            lo, hi, steps = text.split(":")
            self.lo, self.hi, self.steps = float(lo), float(hi), int(steps)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected lo:hi:steps, got {text!r}") from None
        if self.steps < 2 or not self.hi > self.lo:
            raise argparse.ArgumentTypeError(f"need lo < hi and steps >= 2, got {text!r}")

    def as_tuple(self):
        return self.lo, self.hi, self.steps

    def __str__(self):
        return f"{self.lo:g}:{self.hi:g}:{self.steps}"


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _rel_error(text: str) -> float:
    value = float(text)
    if not value > -1:
        raise argparse.ArgumentTypeError(f"rel-error must exceed -1, got {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model")
    g.add_argument("--n-states", type=_positive_int, default=50, help="size N of the searched subset")
    g.add_argument("--levels", type=_positive_int, default=None, help="rotor levels (default N + 1)")
    g.add_argument("--s-index", type=int, default=None, help="searched label (default: drawn from --seed)")
    g.add_argument("--seed", type=int, default=DEFAULT_SEED, help="master seed")
    g.add_argument("--step", type=float, default=None, help="RK4 step override")
    g.add_argument("--gamma-jj", type=float, default=0.0, help="field coupling of the initial state")
    g.add_argument("--gamma-ss", type=float, default=0.0, help="field coupling of the searched state")
    g.add_argument("--omega0", type=float, default=None, help="field frequency")
    o = common.add_argument_group("output")
    o.add_argument("--out", default=None, help="CSV path (default stdout)")
    o.add_argument("--config", default=None, help="key = value file; flags override it")
    o.add_argument("--workers", type=_positive_int, default=1, help="threads for independent work")

    mc = argparse.ArgumentParser(add_help=False)
    m = mc.add_argument_group("measurements")
    m.add_argument("--trajectories", type=_positive_int, default=500)
    m.add_argument("--m-max", type=_positive_int, default=50)
    m.add_argument("--backend", choices=("two-level", "full"), default="two-level")

    parser = argparse.ArgumentParser(prog="resonant-search", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p1 = sub.add_parser("fig1", parents=[common], help="P_s(tau) and Floquet map over (alpha, eps)")
    p1.add_argument("--alpha", type=GridSpec, default=GridSpec("0.01:1.0:101"), help="omega0/Omega grid")
    p1.add_argument("--eps", type=GridSpec, default=GridSpec("0:5:101"), help="eps/Omega grid")

    p2 = sub.add_parser("fig2", parents=[common, mc], help="measurements every (1 + rel_error) tau")
    p2.add_argument("--rel-error", type=_rel_error, default=0.2)

    p3 = sub.add_parser("fig3", parents=[common, mc], help="m measurements within the optimal time")

    pe = sub.add_parser("evolve", parents=[common], help="full-model populations versus time")
    pe.add_argument("--t-end", type=float, default=1.0, help="end time in units of tau")
    pe.add_argument("--samples", type=_positive_int, default=100, help="number of sampled intervals")
    parser.commands = {"fig1": p1, "fig2": p2, "fig3": p3, "evolve": pe}
    return parser


def read_config(path: str) -> Dict[str, str]:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidArgumentError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    first = parser.parse_args(argv)
    if first.config is None:
        return first
    config = read_config(first.config)
    subparser = parser.commands[first.command]
    known = {a.dest for a in subparser._actions}
    unknown = sorted(set(config) - known - {"config"})
    if unknown:
        raise InvalidArgumentError(f"unknown config keys for {first.command}: {', '.join(unknown)}")
    config.pop("config", None)
    subparser.set_defaults(**config)
    return parser.parse_args(argv)


# ----------------------------------------------------------------- commands


def _problem(args):
    return default_problem(args.n_states, args.levels, s=args.s_index, seed=args.seed)


def _field(args, problem) -> Optional[FieldParams]:
    if args.omega0 is None:
        if args.gamma_jj or args.gamma_ss:
            raise InvalidArgumentError("--gamma-jj/--gamma-ss need --omega0")
        return None
    return FieldParams.for_problem(problem, args.omega0, args.gamma_jj, args.gamma_ss)


def _metadata(args, extra: Sequence[str] = (), seeded: bool = True) -> List[str]:
    skip = _NOT_ECHOED if seeded else _NOT_ECHOED | _FIG1_UNUSED
    params = {k: v for k, v in vars(args).items() if k not in skip}
    lines = [
        f"resonant-search {__version__}",
        f"command: {args.command}",
        "params: " + " ".join(f"{k}={params[k]}" for k in sorted(params)),
    ]
    if seeded:
        lines += [f"seed: {args.seed}", f"rng: {RNG_ALGORITHM}"]
    lines.extend(extra)
    return ["# " + line for line in lines]


def _spectrum_lines(problem) -> List[str]:
    return [
        f"spectrum: rotor eps_n = n^2, {problem.spectrum.describe()}",
        f"problem: {problem.describe()} (j = N + 1, s drawn from seed unless --s-index)",
    ]


def _f6(x: float) -> str:
    return f"{x:.6f}"


def _e9(x: float) -> str:
    return f"{x:.8e}"


def cmd_fig1(args) -> List[str]:
    omega = 1.0 / math.sqrt(args.n_states)
    cfg = StepConfig(step=args.step) if args.step is not None else None
    smap = stability_map(omega, args.alpha.as_tuple(), args.eps.as_tuple(), cfg, workers=args.workers)
    lines = _metadata(
        args,
        [
            f"Omega: {omega:.9g} (N = {args.n_states})",
            f"floquet: {smap.notes['period']}; mu = {smap.notes['mu_branch']}",
            "axes: alpha = omega0/Omega, eps_over_omega = (Gamma_ss - Gamma_jj)/Omega",
        ],
        seeded=False,
    )
    lines.append("alpha,eps_over_omega,p_s_at_tau,mu_imag,trace")
    for k, a in enumerate(smap.alpha_grid):
        for i, e in enumerate(smap.eps_grid):
            lines.append(
                ",".join(
                    (
                        _f6(a),
                        _f6(e),
                        _f6(smap.p_s_at_tau[i, k]),
                        _e9(smap.mu_imag[i, k]),
                        _e9(smap.trace[i, k].real),
                    )
                )
            )
    return lines


_MEAS_HEADER = "m,p_s_theory,p_j_theory,p_s_mc,p_j_mc,p_rest_mc,stderr_s,stderr_j"


def _meas_row(m, beta, alpha, ens, k) -> str:
    return ",".join(
        [str(m)]
        + [
            _f6(v)
            for v in (
                beta,
                alpha,
                ens.p_s[k],
                ens.p_j[k],
                ens.p_rest[k],
                ens.stderr_s[k],
                ens.stderr_j[k],
            )
        ]
    )


def cmd_fig2(args) -> List[str]:
    problem = _problem(args)
    check_regime(problem)
    field = _field(args, problem)
    cfg = StepConfig(step=args.step) if args.step is not None else None
    dt = (1.0 + args.rel_error) * problem.tau
    theory = regular_coefficients(problem.omega_big, dt, args.m_max)
    ens = run_ensemble(
        problem,
        field,
        MeasurementSchedule.regular(dt, args.m_max),
        backend=args.backend,
        n_traj=args.trajectories,
        master_seed=args.seed,
        cfg=cfg,
        workers=args.workers,
    )
    lines = _metadata(args, _spectrum_lines(problem) + [f"interval: dt = {dt:.9g} = (1 + rel_error) tau"])
    lines.append(_MEAS_HEADER)
    for k in range(args.m_max):
        lines.append(_meas_row(k + 1, theory.beta[k], theory.alpha[k], ens, k))
    return lines


def cmd_fig3(args) -> List[str]:
    problem = _problem(args)
    check_regime(problem)
    field = _field(args, problem)
    cfg = StepConfig(step=args.step) if args.step is not None else None
    lines = _metadata(
        args, _spectrum_lines(problem) + ["schedule: m equal intervals tau/m; MC stream = m"]
    )
    lines.append(_MEAS_HEADER)
    for m in range(1, args.m_max + 1):
        alpha, beta = zeno_coefficients(m).final
        ens = run_ensemble(
            problem,
            field,
            MeasurementSchedule.zeno(problem.omega_big, m),
            backend=args.backend,
            n_traj=args.trajectories,
            master_seed=args.seed,
            cfg=cfg,
            stream=m,
            workers=args.workers,
        )
        lines.append(_meas_row(m, beta, alpha, ens, m - 1))
    return lines


def cmd_evolve(args) -> List[str]:
    problem = _problem(args)
    check_regime(problem)
    field = _field(args, problem)
    if not args.t_end >= 0:
        raise InvalidArgumentError(f"--t-end must be non-negative, got {args.t_end}")
    t_end = args.t_end * problem.tau
    h_max = full_default_step(problem) if args.step is None else args.step
    if h_max > full_step_bound(problem) * (1 + 1e-12):
        raise InvalidArgumentError(
            f"step {h_max:.6g} exceeds the resolution bound {full_step_bound(problem):.6g}"
        )
    # a whole number of steps per sample so rows land on t_end * i / samples
    per_sample = max(1, math.ceil(step_count(t_end, h_max) / args.samples)) if t_end > 0 else 1
    n_steps = per_sample * args.samples
    cfg = StepConfig(step=t_end / n_steps if t_end > 0 else None, sample_every=per_sample)
    traj = integrate_full(problem, field, WaveState.initial(problem), t_end, cfg, record=True)
    extra = _spectrum_lines(problem) + [f"steps: {n_steps} of h = {t_end / n_steps if t_end else 0:.9g}"]
    if field is not None:
        extra.append(f"field: eps = {field.eps(problem):.9g}, alpha = {field.alpha(problem):.9g}")
    lines = _metadata(args, extra)
    lines.append("t,p_j,p_s,p_rest,norm")
    for rec, norm in zip(traj.records, traj.norms):
        lines.append(f"{rec.time:.6f},{_f6(rec.p_j)},{_f6(rec.p_s)},{_f6(rec.p_rest)},{norm:.12f}")
    return lines


COMMANDS = {"fig1": cmd_fig1, "fig2": cmd_fig2, "fig3": cmd_fig3, "evolve": cmd_evolve}


def write_output(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".resonant-search-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _diag(message: str) -> None:
    # plain text only, so NO_COLOR holds trivially
    print(f"resonant-search: {message}", file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except InvalidArgumentError as exc:
        _diag(f"error: {exc}")
        return EXIT_USAGE
    except OSError as exc:
        _diag(f"error: cannot read config: {exc}")
        return EXIT_IO

    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RegimeWarning)
            lines = COMMANDS[args.command](args)
        for w in caught:
            _diag(f"warning: {w.message}")
        write_output("\n".join(lines) + "\n", args.out)
    except AccuracyError as exc:
        _diag(f"accuracy failure: {exc}")
        return EXIT_ACCURACY
    except SearchError as exc:
        _diag(f"error: {exc}")
        return EXIT_USAGE
    except OSError as exc:
        _diag(f"I/O failure writing {args.out}: {exc}")
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
