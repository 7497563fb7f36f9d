"""Command-line entry point ``sea-impedance``.

Subcommands ``synth``, ``simulate``, ``bode``, ``passivity`` and
``reproduce``.  Exit codes: 0 success, 1 infeasible bounds, 2 verification,
stability or acceptance failure, 3 configuration or usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .analysis import (
    actual_impedance,
    bode_columns,
    check_relaxed_passivity,
    passivity_grid,
    wphi_deterioration,
)
from .config import (
    BUNDLED,
    ExperimentConfig,
    atomic_write_text,
    bundled_config,
    format_controller,
    load_config,
    load_controller,
    write_csv,
)
from .errors import (
    ConfigError,
    DimensionMismatch,
    Infeasible,
    SeaImpedanceError,
    UnstableClosedLoop,
    VerificationFailure,
)
from .lti import FrequencyResponse
from .sea import build_generalized_plant, desired_models
from .simulation import simulate
from .synthesis import close_loop, synthesize_mixed, verify

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INFEASIBLE, EXIT_FAILED, EXIT_USAGE = 0, 1, 2, 3

# Reference simulation figures for the stiffness cases: max |e| (Nm),
# max |omega_d| (rad/s) and, where reported, max |tau_d| (Nm).
REFERENCE_TARGETS = {
    "0.3": {"error": 0.0233, "control": 16.9859, "tau_d": None},
    "0.6": {"error": 0.0130, "control": 9.8110, "tau_d": 0.0580},
    "0.9": {"error": 0.0060, "control": 2.4232, "tau_d": 0.0870},
}
ENVELOPE = 0.30  # relative window on the reference error and control figures
TAU_D_TOL = 0.005
BODE_GRID = np.logspace(-2, 3, 401)  # rad/s, 80 points per decade


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------


@dataclass
class Check:
    label: str
    ok: bool
    detail: str = ""


@dataclass
class CaseOutcome:
    name: str
    config: ExperimentConfig
    controller: object = None
    report: object = None
    trace: object = None
    passivity: object = None
    physical_passivity: object = None
    synth_seconds: float = float("nan")
    error: str | None = None
    infeasible: bool = False
    checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.error is None and all(c.ok for c in self.checks)


def impedance_responses(cfg: ExperimentConfig, cl, grid) -> dict[str, FrequencyResponse]:
    """Bode data for ``Z_d``, ``W_phi Z_d`` and the rendered ``Z_a``."""
    _, Z_d = desired_models(cfg.impedance)
    return {
        "Zd": FrequencyResponse.from_transfer_function(Z_d, grid),
        "WphiZd": FrequencyResponse.from_transfer_function(cfg.weights.W_phi * Z_d, grid),
        "Za": actual_impedance(cl, grid),
    }


def passivity_of(cl, fmax_hz: float):
    grid = passivity_grid(fmax_hz)
    return check_relaxed_passivity(actual_impedance(cl, grid), fmax_hz, closed_loop=cl)


def run_case(name: str, cfg: ExperimentConfig, fmax_hz: float = 5.0) -> CaseOutcome:
    """Synthesize, verify, simulate and analyse one configuration, then
    attach its acceptance checks."""
    out = CaseOutcome(name, cfg)
    try:
        plant = build_generalized_plant(cfg.sea, cfg.impedance, cfg.weights)
        t0 = time.perf_counter()
        k = synthesize_mixed(plant, cfg.bounds)
        out.synth_seconds = time.perf_counter() - t0
        out.controller = k
        out.report = verify(plant, k, cfg.bounds)
        cl = close_loop(plant, k)
        out.trace = simulate(cl, cfg.phi_L, cfg.d, cfg.n, steady_fraction=cfg.steady_fraction)
        out.passivity = passivity_of(cl, fmax_hz)
        if not cfg.weights.W_phi.is_static:
            phys = build_generalized_plant(cfg.sea, cfg.impedance, cfg.weights, filter_spring_path=False)
            out.physical_passivity = passivity_of(close_loop(phys, k), fmax_hz)
    except Infeasible as exc:
        out.error, out.infeasible = f"Infeasible: {exc}", True
    except SeaImpedanceError as exc:
        out.error = f"{type(exc).__name__}: {exc}"
    out.checks = case_checks(out)
    return out


def _within(value: float, target: float, rel: float) -> bool:
    return abs(value - target) <= rel * abs(target)


def case_checks(out: CaseOutcome) -> list[Check]:
    if out.error is not None:
        return [Check("pipeline", False, out.error)]
    rep, tr, pas = out.report, out.trace, out.passivity
    w_max = out.config.sea.omega_max
    checks = [
        Check("norm bounds", rep.pass_, rep.summary()),
        Check("closed loop Hurwitz", rep.spectral_abscissa < 0, f"abscissa {rep.spectral_abscissa:.4g}"),
        Check("control below limit", tr.max_abs_control < w_max, f"{tr.max_abs_control:.4f} < {w_max:g} rad/s"),
        Check("relaxed passivity", pas.passed, pas.summary()),
    ]
    target = REFERENCE_TARGETS.get(out.name)
    if target is not None:
        for key, val in (("error", tr.max_abs_error), ("control", tr.max_abs_control)):
            ref = target[key]
            checks.append(Check(
                f"max {key} within 30% of reference",
                _within(val, ref, ENVELOPE),
                f"{val:.5g} vs {ref:g} (window [{ref * (1 - ENVELOPE):.4g}, {ref * (1 + ENVELOPE):.4g}])",
            ))
        if target["tau_d"] is not None:
            ref = target["tau_d"]
            checks.append(Check(
                "max desired torque",
                _within(tr.max_abs_tau_d, ref, TAU_D_TOL),
                f"{tr.max_abs_tau_d:.5f} vs {ref:g} Nm (0.5%)",
            ))
    return checks


def trend_check(outcomes: Sequence[CaseOutcome]) -> Check | None:
    """Higher stiffness must give strictly smaller error and effort."""
    rows = sorted(
        (o for o in outcomes if o.name in REFERENCE_TARGETS and o.trace is not None),
        key=lambda o: o.config.impedance.K_d,
    )
    if len(rows) < 2:
        return None
    e = [o.trace.max_abs_error for o in rows]
    u = [o.trace.max_abs_control for o in rows]
    ok = all(a > b for a, b in zip(e, e[1:])) and all(a > b for a, b in zip(u, u[1:]))
    return Check("monotone trend in K_d", ok, f"errors {['%.5f' % v for v in e]}, controls {['%.4f' % v for v in u]}")


def write_case_files(out: CaseOutcome, root: Path) -> None:
    d = root / out.name
    lines = [f"case {out.name}"]
    if out.controller is not None:
        atomic_write_text(d / "controller.txt", format_controller(out.controller))
        cl = close_loop(build_generalized_plant(out.config.sea, out.config.impedance, out.config.weights), out.controller)
        for key, fr in impedance_responses(out.config, cl, BODE_GRID).items():
            write_csv(d / f"bode_{key}.csv", bode_columns(fr))
    if out.trace is not None:
        write_csv(d / "trace.csv", out.trace.columns())
    lines += [f"{'PASS' if c.ok else 'FAIL'}  {c.label}: {c.detail}" for c in out.checks]
    if out.physical_passivity is not None:
        lines.append(f"info  passivity with unfiltered spring path: {out.physical_passivity.summary()}")
    atomic_write_text(d / "report.txt", "\n".join(lines) + "\n")


def reproduce(
    cases: Sequence[str] = tuple(BUNDLED),
    *,
    fmax_hz: float = 5.0,
    sample_rate_hz: float | None = None,
    bound_scale: dict | None = None,
) -> tuple[list[CaseOutcome], list[Check]]:
    """Run bundled cases; return per-case outcomes and cross-case checks."""
    outcomes = []
    for name in cases:
        cfg = bundled_config(name)
        if sample_rate_hz is not None:
            cfg = cfg.with_sample_rate(sample_rate_hz)
        if bound_scale and name in bound_scale:
            cfg = cfg.with_bounds(cfg.bounds.scaled(bound_scale[name]))
        outcomes.append(run_case(name, cfg, fmax_hz))
    extra = []
    t = trend_check(outcomes)
    if t is not None:
        extra.append(t)
    return outcomes, extra


def reproduce_table(outcomes: Sequence[CaseOutcome]) -> str:
    head = (
        f"{'case':<8} {'K_d':>9} {'gamma_e':>8} {'gamma_u':>8} {'hinf':>9} {'h2':>9} "
        f"{'max|e|':>9} {'ref':>7} {'max|u|':>9} {'ref':>8} {'max|tau_d|':>10} {'ref':>7} {'min phase':>9}  status"
    )
    lines = [head, "-" * len(head)]
    for o in outcomes:
        tg = REFERENCE_TARGETS.get(o.name, {})
        f = lambda v, p=5: "-" if v is None else f"{v:.{p}g}"
        hinf = h2 = err = ctl = tau = ph = None
        if o.report is not None:
            hinf, h2 = o.report.hinf_we_to_etilde, o.report.h2_w_to_utilde
        if o.trace is not None:
            err, ctl, tau = o.trace.max_abs_error, o.trace.max_abs_control, o.trace.max_abs_tau_d
        if o.passivity is not None:
            ph = float(o.passivity.phase_deg.min())
        status = "ok" if o.ok else "FAIL: " + "; ".join(c.label for c in o.checks if not c.ok)
        lines.append(
            f"{o.name:<8} {o.config.impedance.K_d:>9.5g} {o.config.bounds.gamma_e:>8.4g} {o.config.bounds.gamma_u:>8.4g} "
            f"{f(hinf):>9} {f(h2):>9} {f(err):>9} {f(tg.get('error')):>7} {f(ctl):>9} {f(tg.get('control')):>8} "
            f"{f(tau):>10} {f(tg.get('tau_d')):>7} {f(ph, 6):>9}  {status}"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    return Path(args.out if args.out is not None else cfg.output_dir)


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if getattr(args, "sample_rate_hz", None) is not None:
        cfg = cfg.with_sample_rate(args.sample_rate_hz)
    return cfg


def _closed_loop(args):
    cfg = _load(args)
    k = load_controller(args.controller)
    plant = build_generalized_plant(cfg.sea, cfg.impedance, cfg.weights)
    return cfg, plant, k, close_loop(plant, k)


def cmd_synth(args) -> int:
    cfg = _load(args)
    plant = build_generalized_plant(cfg.sea, cfg.impedance, cfg.weights)
    out = _out_dir(args, cfg)
    try:
        k = synthesize_mixed(plant, cfg.bounds)
    except Infeasible as exc:
        print(f"Infeasible: {exc}")
        return EXIT_INFEASIBLE
    except VerificationFailure as exc:
        print(f"verification failed: {exc}")
        if exc.report is not None:
            atomic_write_text(out / "report.txt", exc.report.summary() + "\n")
        return EXIT_FAILED
    rep = verify(plant, k, cfg.bounds)
    atomic_write_text(out / "controller.txt", format_controller(k))
    atomic_write_text(out / "report.txt", rep.summary() + "\n")
    print(rep.summary())
    print(f"controller written to {out / 'controller.txt'}")
    return EXIT_OK if rep.pass_ else EXIT_FAILED


def cmd_simulate(args) -> int:
    cfg, _, _, cl = _closed_loop(args)
    tr = simulate(cl, cfg.phi_L, cfg.d, cfg.n, steady_fraction=cfg.steady_fraction)
    path = write_csv(_out_dir(args, cfg) / "trace.csv", tr.columns())
    print(f"steady window [{tr.steady_window[0]:g}, {tr.steady_window[1]:g}] s")
    print(f"max_abs_error   = {tr.max_abs_error:.6g} Nm")
    print(f"max_abs_control = {tr.max_abs_control:.6g} rad/s")
    print(f"max_abs_tau_d   = {tr.max_abs_tau_d:.6g} Nm")
    print(f"trace written to {path}")
    return EXIT_OK


def cmd_bode(args) -> int:
    cfg, _, _, cl = _closed_loop(args)
    out = _out_dir(args, cfg)
    for key, fr in impedance_responses(cfg, cl, BODE_GRID).items():
        write_csv(out / f"bode_{key}.csv", bode_columns(fr))
    _, Z_d = desired_models(cfg.impedance)
    mag, ph = wphi_deterioration(Z_d, cfg.weights.W_phi, args.fmax_hz)
    print(f"W_phi deterioration up to {args.fmax_hz:g} Hz: {mag:.4f} dB, {ph:.4f} deg")
    print(f"Bode data written to {out}")
    return EXIT_OK


def cmd_passivity(args) -> int:
    _, _, _, cl = _closed_loop(args)
    rep = passivity_of(cl, args.fmax_hz)
    print(rep.summary())
    return EXIT_OK if rep.passed else EXIT_FAILED


def _parse_scale(items) -> dict:
    scale = {}
    for item in items or ():
        name, _, factor = item.partition("=")
        if name not in BUNDLED or not factor:
            raise ConfigError(f"--scale-bounds expects CASE=FACTOR with CASE in {sorted(BUNDLED)}, got {item!r}")
        scale[name] = float(factor)
    return scale


def cmd_reproduce(args) -> int:
    cases = [c.strip() for c in args.cases.split(",")] if args.cases else list(BUNDLED)
    for c in cases:
        if c not in BUNDLED:
            raise ConfigError(f"unknown case {c!r}; choose from {sorted(BUNDLED)}")
    outcomes, extra = reproduce(
        cases, fmax_hz=args.fmax_hz, sample_rate_hz=args.sample_rate_hz, bound_scale=_parse_scale(args.scale_bounds)
    )
    root = Path(args.out if args.out is not None else "out")
    for o in outcomes:
        write_case_files(o, root)
    table = reproduce_table(outcomes)
    lines = [table, ""]
    for o in outcomes:
        for c in o.checks:
            lines.append(f"{'PASS' if c.ok else 'FAIL'}  [{o.name}] {c.label}: {c.detail}")
        if o.physical_passivity is not None:
            lines.append(f"info  [{o.name}] passivity with unfiltered spring path: {o.physical_passivity.summary()}")
    for c in extra:
        lines.append(f"{'PASS' if c.ok else 'FAIL'}  {c.label}: {c.detail}")
    text = "\n".join(lines) + "\n"
    atomic_write_text(root / "summary.txt", text)
    print(text, end="")
    if all(o.ok for o in outcomes) and all(c.ok for c in extra):
        return EXIT_OK
    if any(o.infeasible for o in outcomes):
        return EXIT_INFEASIBLE
    return EXIT_FAILED


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sea-impedance", description="Mixed H2/H-inf impedance control of a series elastic actuator.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for solver detail")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, controller=False):
        sp.add_argument("--config", required=True, help="experiment file (INI)")
        if controller:
            sp.add_argument("--controller", required=True, help="controller file written by synth")
        sp.add_argument("--out", default=None, help="output directory (default: [output] dir)")
        sp.add_argument("--sample-rate-hz", type=float, default=None, help="override the signal sample rate")
        sp.add_argument("--fmax-hz", type=float, default=5.0, help="passivity band edge (default 5)")

    common(sub.add_parser("synth", help="synthesize and verify a controller"))
    common(sub.add_parser("simulate", help="simulate the closed loop and write trace.csv"), True)
    common(sub.add_parser("bode", help="write impedance Bode CSVs"), True)
    common(sub.add_parser("passivity", help="check relaxed passivity of the rendered impedance"), True)
    rp = sub.add_parser("reproduce", help="run the bundled case studies and acceptance checks")
    rp.add_argument("--cases", default=None, help=f"comma list from {','.join(BUNDLED)}")
    rp.add_argument("--out", default=None, help="output directory (default: out)")
    rp.add_argument("--fmax-hz", type=float, default=5.0)
    rp.add_argument("--sample-rate-hz", type=float, default=None, help="default: bundled value, 2000")
    rp.add_argument("--scale-bounds", action="append", metavar="CASE=FACTOR", help="multiply a case's bounds")
    return p


COMMANDS = {
    "synth": cmd_synth,
    "simulate": cmd_simulate,
    "bode": cmd_bode,
    "passivity": cmd_passivity,
    "reproduce": cmd_reproduce,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DimensionMismatch, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnstableClosedLoop as exc:
        print(f"unstable: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except SeaImpedanceError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
