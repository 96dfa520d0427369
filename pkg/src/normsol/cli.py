"""Command-line entry point: ``normsol {landscape,minimize,evolve,stability}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import RunConfig
from .dynamics import evolve, rotation_frequency, stability_experiment
from .errors import BlowUpGuard, ConfigError, NormsolError, NotConverged
from .field import read_field, write_field, write_profile_csv
from .landscape import compute_landscape
from .optimizer import MinimizerRecord, ordering_report

EXIT_OK, EXIT_USAGE, EXIT_MASS, EXIT_CRITICAL, EXIT_SHORTFALL, EXIT_GUARD = 0, 1, 2, 3, 4, 5

log = logging.getLogger("normsol")


class _Run:
    """Shared state for one invocation: config, output directory, printing."""

    def __init__(self, cfg: RunConfig, out: str, quiet: bool):
        self.cfg = cfg
        self.out = out
        self.quiet = quiet
        self.header = {"config_sha256": cfg.hash()}
        os.makedirs(out, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    def say(self, text: str) -> None:
        if not self.quiet:
            print(text)

    def write_text(self, name: str, body: str) -> None:
        with open(self.path(name), "w") as fh:
            fh.write(body)


def _header_lines(header: dict) -> str:
    return "".join(f"# {k} = {v}\n" for k, v in header.items())


def _landscape(run: _Run):
    """Compute and persist the landscape; return (report, exit code)."""
    cfg = run.cfg
    pot = cfg.potential()
    rep = compute_landscape(cfg.params, pot.h_max)
    run.write_text("landscape.txt", _header_lines(run.header) + rep.to_text())
    # At the Sobolev exponent a failing critical condition forces the mass
    # condition to fail too, so it is tested first to keep exit 3 reachable.
    if not rep.critical_condition:
        run.say(f"critical-exponent condition fails: margin {rep.critical_margin:.6g}")
        return rep, EXIT_CRITICAL
    if not rep.mass_condition:
        run.say(f"mass condition fails: margin {rep.mass_margin:.6g}")
        return rep, EXIT_MASS
    return rep, EXIT_OK


def cmd_landscape(run: _Run) -> int:
    rep, code = _landscape(run)
    if code == EXIT_OK:
        run.say(f"r0 = {rep.r0:.10g}  R0 = {rep.R0:.10g}  R1 = {rep.R1:.10g}  "
                f"mass margin = {rep.mass_margin:.6g}")
    return code


def cmd_minimize(run: _Run) -> int:
    rep, code = _landscape(run)
    if code != EXIT_OK:
        return code
    cfg = run.cfg
    pot = cfg.potential()
    grid = cfg.grid()
    try:
        report = ordering_report(cfg.params, pot, rep.profile, grid, cfg.solver)
    except NotConverged as exc:
        run.say(f"autonomous minimization failed: {exc}")
        return EXIT_SHORTFALL
    rows = ["region beta lambda center_distance residual converged"]
    for rec in report.records:
        stem = f"record_{rec.region}"
        run.write_text(stem + ".txt", rec.to_text(run.header))
        write_field(run.path(stem + ".nsf"), rec.u)
        write_profile_csv(run.path(stem + ".csv"), rec.u)
        rows.append(f"{rec.region} {rec.beta:.10e} {rec.lam:.10e} {rec.center_distance:.6e} "
                    f"{rec.residual:.3e} {'yes' if rec.converged else 'no:' + ','.join(rec.flags)}")
    summary = [
        f"upsilon_max = {report.upsilon_max:.17g}",
        f"upsilon_inf = {report.upsilon_inf:.17g}",
        f"gamma_upper_estimate = {report.gamma_proxy:.17g}",
        f"gamma_minus_upsilon_max = {report.excess:.17g}",
        f"chain_ok = {'true' if report.chain_ok else 'false'}",
        f"regions = {pot.l}",
        f"converged = {sum(r.converged for r in report.records)}",
    ]
    for i, msg in sorted(report.failures.items()):
        summary.append(f"failure_{i} = {msg}")
    body = _header_lines(run.header) + "\n".join(summary) + "\n\n" + "\n".join(rows) + "\n"
    run.write_text("summary.txt", body)
    run.say("\n".join(rows))
    for i, msg in sorted(report.failures.items()):
        run.say(f"region {i}: {msg}")
    converged = sum(r.converged for r in report.records)
    if converged < pot.l:
        run.say(f"only {converged} of {pot.l} regions produced accepted minimizers")
        return EXIT_SHORTFALL
    return EXIT_OK


def cmd_evolve(run: _Run, field_path: str, reference_path: str | None) -> int:
    rep, code = _landscape(run)
    if code != EXIT_OK:
        return code
    cfg, d = run.cfg, run.cfg.dynamics
    psi0 = read_field(field_path)
    ref = read_field(reference_path) if reference_path else psi0
    try:
        trace, final = evolve(psi0, cfg.params, cfg.potential(), d.dt, d.T,
                              sample_every=d.sample_every, reference=ref, guard_R1=rep.R1)
        code = EXIT_OK
    except BlowUpGuard as exc:
        trace, final, code = exc.trace, exc.state, EXIT_GUARD
        run.say(str(exc))
    trace.to_csv(run.path("trace.csv"), run.header)
    write_field(run.path("final.nsf"), final)
    run.say(f"max mass drift {trace.max_mass_drift:.3e}  max energy drift {trace.max_energy_drift:.3e}  "
            f"rotation frequency {rotation_frequency(trace):.10g}")
    return code


def cmd_stability(run: _Run, record_path: str) -> int:
    rep, code = _landscape(run)
    if code != EXIT_OK:
        return code
    cfg, d = run.cfg, run.cfg.dynamics
    stem = record_path[:-4] if record_path.endswith((".nsf", ".txt")) else record_path
    u = read_field(stem + ".nsf")
    with open(stem + ".txt") as fh:
        rec = MinimizerRecord.from_text(fh.read(), u)
    if not rec.converged:
        run.say("record is not an accepted minimizer")
        return EXIT_USAGE
    code = EXIT_OK
    for k, g in enumerate(d.gammas):
        verdict, trace = stability_experiment(
            u, g, d.stability_T, d.stability_dt, cfg.params, cfg.potential(), rep.R0, rep.R1,
            theta_target=d.theta_target, seed=cfg.seed, sample_every=d.sample_every,
        )
        name = f"stability_{rec.region}_{k}"
        run.write_text(name + ".txt", verdict.to_text(run.header))
        trace.to_csv(run.path(name + ".csv"), run.header)
        run.say(f"gamma {g:g}: {'PASS' if verdict.passed else 'FAIL'}  sup dist {verdict.theta:.4e}  "
                f"max grad norm {verdict.max_grad_norm:.4e} (R0 = {rep.R0:.4e})")
        if verdict.message:
            code = EXIT_GUARD
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="normsol", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration file")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--seed", type=int, help="random seed (overrides the config)")
    common.add_argument("--quiet", action="store_true", help="suppress console output")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("landscape", parents=[common], help="radii, constants and admissibility conditions")
    sub.add_parser("minimize", parents=[common], help="one local minimizer per maximum of h")
    ev = sub.add_parser("evolve", parents=[common], help="integrate the time-dependent flow")
    ev.add_argument("--field", required=True, help="initial state (NSF1 file)")
    ev.add_argument("--reference", help="profile for the distance columns (default: the initial state)")
    st = sub.add_parser("stability", parents=[common], help="perturbed-evolution stability test")
    st.add_argument("--record", required=True, help="record stem, e.g. out/record_1")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        cfg.validate()
    except (OSError, ConfigError, NormsolError, ValueError) as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    run = _Run(cfg, args.out or cfg.output, args.quiet)
    try:
        if args.command == "landscape":
            return cmd_landscape(run)
        if args.command == "minimize":
            return cmd_minimize(run)
        if args.command == "evolve":
            return cmd_evolve(run, args.field, args.reference)
        return cmd_stability(run, args.record)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
