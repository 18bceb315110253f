"""Command-line driver.

    hopflow solve --config scenario.cfg [--out DIR]
    hopflow validate [--out DIR] [--only 1,4]
    hopflow kinematics psi.txt [psi_later.txt] --hbar-over-m 1.0 [--out DIR]
    hopflow bifurcation --config scenario.cfg --sweep-from 0.1 --sweep-to 5 --sweep-steps 20

Exit codes: 0 success, 1 invalid input or failed check, 2 non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from hopflow import __version__
from hopflow.colehopf import initial_psi
from hopflow.config import ConfigError, ScenarioConfig
from hopflow.errors import HopflowError, NotConverged
from hopflow.fields import ComplexField
from hopflow.kinematics import (
    WaveState,
    continuity_residual,
    probability_current,
    probability_density,
    velocity_from_wavefunction,
)
from hopflow.mapping import PrescribedReaction, ReynoldsSchedule
from hopflow.snapshot import read_snapshot, write_snapshot

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NOT_CONVERGED = 2


class _Log:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def info(self, msg: str) -> None:
        if not self.quiet:
            print(msg, file=sys.stderr)

    def error(self, msg: str) -> None:
        print(f"error: {msg}", file=sys.stderr)


def _write_manifest(out: Path, command: str, payload: dict) -> None:
    manifest = {"tool": "hopflow", "version": __version__, "command": command, **payload}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _trace_csv(differences) -> str:
    return "iteration,difference\n" + "".join(
        f"{i + 1},{float(d)!r}\n" for i, d in enumerate(differences)
    )


def _write_report(out: Path, report) -> None:
    (out / "report.csv").write_text(report.to_csv())
    snaps = out / "snapshots"
    snaps.mkdir(exist_ok=True)
    for i, (t, psi, v) in enumerate(zip(report.times, report.psi, report.velocity)):
        write_snapshot(snaps / f"psi_{i:05d}.txt", psi, time=t)
        write_snapshot(snaps / f"velocity_{i:05d}.txt", v, time=t)


def cmd_solve(args, log: _Log) -> int:
    from hopflow.mapping import march

    try:
        scenario = ScenarioConfig.load(args.config)
    except ConfigError as exc:
        log.error(str(exc))
        return EXIT_INVALID
    out = Path(args.out) if args.out else scenario.output
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out, "solve", {"config": scenario.echo(), "config_path": str(args.config)})

    log.info(f"solving to T={scenario.T} with window {scenario.mapping.window}")
    try:
        report = march(
            scenario.initial_velocity, scenario.T, scenario.mapping, sample_every=scenario.sample_every
        )
    except NotConverged as exc:
        log.error(f"{exc} in the window starting at t={getattr(exc, 'time', 0.0)!r}")
        print(_trace_csv(exc.trace.differences), file=sys.stderr, end="")
        (out / "trace.csv").write_text(_trace_csv(exc.trace.differences))
        partial = getattr(exc, "report", None)
        if partial is not None:
            _write_report(out, partial)
        return EXIT_NOT_CONVERGED
    except (HopflowError, ValueError) as exc:
        log.error(str(exc))
        return EXIT_INVALID

    _write_report(out, report)
    log.info(f"wrote {len(report.times)} samples to {out}")
    return EXIT_OK


def cmd_validate(args, log: _Log) -> int:
    from hopflow.validation import run_all

    only = None
    if args.only:
        try:
            only = {int(s) for s in args.only.split(",")}
        except ValueError:
            log.error(f"--only expects comma-separated criterion numbers, got {args.only!r}")
            return EXIT_INVALID
    results = run_all(only=only, fault=args.inject_fault, emit=print)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["criterion,title,passed,seconds,budget,checks"]
        for r in results:
            checks = "; ".join(str(c) for c in r.checks)
            lines.append(f'{r.number},{r.title},{int(r.passed)},{r.seconds:.3f},{r.budget:g},"{checks}"')
        (out / "validation.csv").write_text("\n".join(lines) + "\n")
        notes = {str(r.number): r.notes for r in results if r.notes}
        _write_manifest(out, "validate", {"notes": notes})
    return EXIT_OK if passed == len(results) else EXIT_INVALID


def cmd_kinematics(args, log: _Log) -> int:
    from hopflow.errors import ZeroAmplitude

    if not args.hbar_over_m > 0:
        log.error("--hbar-over-m must be positive")
        return EXIT_INVALID
    try:
        snaps = [read_snapshot(p) for p in args.snapshots]
    except (OSError, ValueError) as exc:
        log.error(str(exc))
        return EXIT_INVALID
    if any(not isinstance(s.field, ComplexField) for s in snaps):
        log.error("kinematics expects complex wave-function snapshots (complex: true)")
        return EXIT_INVALID

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    state = WaveState(snaps[0].field, args.hbar_over_m)
    try:
        velocity = velocity_from_wavefunction(state)
    except ZeroAmplitude as exc:
        log.error(str(exc))
        return EXIT_INVALID
    t = snaps[0].time
    write_snapshot(out / "density.txt", probability_density(state), time=t)
    write_snapshot(out / "current.txt", probability_current(state), time=t)
    write_snapshot(out / "velocity.txt", velocity, time=t)

    if len(snaps) == 2:
        later = snaps[1]
        dt = args.dt
        if dt is None:
            if later.time is None or snaps[0].time is None:
                log.error("two snapshots need 'time:' headers or --dt")
                return EXIT_INVALID
            dt = later.time - snaps[0].time
        try:
            residual = continuity_residual(state, WaveState(later.field, args.hbar_over_m), dt)
        except (HopflowError, ValueError) as exc:
            log.error(str(exc))
            return EXIT_INVALID
        (out / "continuity.txt").write_text(f"dt: {float(dt)!r}\nresidual: {residual!r}\n")
        print(f"continuity residual {residual:.6e} (dt={dt!r})")
    log.info(f"wrote kinematics to {out}")
    return EXIT_OK


def cmd_bifurcation(args, log: _Log) -> int:
    from hopflow.sweep import rows_to_csv, run_point

    try:
        scenario = ScenarioConfig.load(args.config)
    except ConfigError as exc:
        log.error(str(exc))
        return EXIT_INVALID
    if args.sweep_steps < 1 or not np.isfinite([args.sweep_from, args.sweep_to]).all():
        log.error("invalid sweep: need finite bounds and --sweep-steps >= 1")
        return EXIT_INVALID
    base = scenario.reaction
    if isinstance(base, ReynoldsSchedule):
        make = lambda p: ReynoldsSchedule(p, base.t0)  # noqa: E731
        name = "re0"
    elif isinstance(base, PrescribedReaction) and np.ndim(base.source) == 0 and not callable(base.source):
        make = PrescribedReaction
        name = "gamma"
    else:
        log.error("bifurcation sweeps need reaction = constant or reynolds_schedule")
        return EXIT_INVALID

    out = Path(args.out) if args.out else scenario.output
    out.mkdir(parents=True, exist_ok=True)
    psi_init = initial_psi(scenario.initial_velocity, scenario.params)
    params = np.linspace(args.sweep_from, args.sweep_to, args.sweep_steps)
    rows = []
    for p in params:
        cfg = scenario.with_reaction(make(float(p)), fp_max_iters=args.iterations)
        row = run_point(psi_init, cfg, float(p))
        log.info(f"{name}={float(p)!r}: {row.classification}")
        rows.append(row)
    (out / "sweep.csv").write_text(rows_to_csv(rows))
    _write_manifest(
        out,
        "bifurcation",
        {
            "config": scenario.echo(),
            "config_path": str(args.config),
            "sweep": {
                "parameter": name,
                "from": args.sweep_from,
                "to": args.sweep_to,
                "steps": args.sweep_steps,
                "iterations": args.iterations,
            },
        },
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hopflow", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"hopflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--quiet", action="store_true", help="suppress progress messages")

    p = sub.add_parser("solve", help="march a scenario and write report.csv and snapshots")
    p.add_argument("--config", required=True, help="scenario file")
    p.add_argument("--out", help="output directory (overrides 'output' in the config)")
    common(p)

    p = sub.add_parser("validate", help="run the acceptance checks")
    p.add_argument("--out", help="also write validation.csv and manifest.json here")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.add_argument("--inject-fault", choices=["kernel-normalization"], help=argparse.SUPPRESS)
    common(p)

    p = sub.add_parser("kinematics", help="density, current and velocity of a wave function")
    p.add_argument("snapshots", nargs="+", help="one or two complex snapshots")
    p.add_argument("--hbar-over-m", type=float, required=True)
    p.add_argument("--dt", type=float, help="time between the two snapshots (else from headers)")
    p.add_argument("--out", default="kinematics_out")
    common(p)

    p = sub.add_parser("bifurcation", help="classify fixed-point traces across a reaction sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--sweep-from", type=float, required=True)
    p.add_argument("--sweep-to", type=float, required=True)
    p.add_argument("--sweep-steps", type=int, required=True)
    p.add_argument("--iterations", type=int, default=200, help="iteration cap per point")
    p.add_argument("--out")
    common(p)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "kinematics" and len(args.snapshots) > 2:
        parser.error("kinematics takes one or two snapshots")
    log = _Log(args.quiet)
    handlers = {
        "solve": cmd_solve,
        "validate": cmd_validate,
        "kinematics": cmd_kinematics,
        "bifurcation": cmd_bifurcation,
    }
    return handlers[args.command](args, log)


if __name__ == "__main__":
    sys.exit(main())
