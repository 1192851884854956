"""Command-line front end.

Exit codes: 0 success, 1 solver failure (NonConverged and friends),
2 Undetermined classification, 3 frozen-reference mismatch,
64 usage error, 66 unreadable or invalid configuration.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__, harness
from .config import load_config
from .errors import ConfigError, DomainError, SolverError
from .fbsolver import Outcome
from .semiwave import DEFAULT_TOL
from .speed import ETA_REL_TOL, TOL_S0, TOL_SMU

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_UNDETERMINED = 2
EXIT_REGRESSION = 3
EXIT_USAGE = 64
EXIT_CONFIG = 66

SCENARIO_FOR = {
    "semiwave": harness.Scenario.SEMI_WAVE_TABLE,
    "speed": harness.Scenario.SPEED_SELECTION,
    "simulate": harness.Scenario.SPREADING_VERIFICATION,
    "sweep": harness.Scenario.MU_SWEEP,
    "converge": harness.Scenario.CONVERGENCE_STUDY,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _version_text() -> str:
    return (f"lvspread {__version__}\n"
            f"default tolerances: relax_tol={DEFAULT_TOL:g} tol_s0={TOL_S0:g} "
            f"tol_smu={TOL_SMU:g} eta_rel_tol={ETA_REL_TOL:g} speed_gap=0.05")


@dataclass
class CliInvocation:
    subcommand: str
    flags: dict = field(default_factory=dict)
    config: Path | None = None
    out: Path | None = None


def _build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="key = value parameter file")
    common.add_argument("--out", type=Path, help="output directory (default results/<subcommand>)")
    common.add_argument("--quiet", action="store_true", help="suppress the summary line")
    store = _Parser(add_help=False)
    store.add_argument("--scenario", required=True, choices=[s.value for s in harness.Scenario])
    store.add_argument("--store", type=Path, help="frozen reference CSV (default: the packaged store)")

    parser = _Parser(prog="lvspread", description="Semi-wave speeds and free-boundary runs for a competition model.")
    parser.add_argument("--version", action="store_true", help="print version and default tolerances")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)
    helps = {
        "semiwave": "relax semi-wave profiles at the listed speeds (s_values)",
        "speed": "estimate s0 and solve for the spreading speed s_mu",
        "simulate": "run the free-boundary problem and classify the outcome",
        "sweep": "s_mu over an increasing mu_list",
        "converge": "grid and time-step refinement study",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    fr = sub.add_parser("freeze", parents=[common, store], help="run a scenario and pin its results in the store")
    fr.add_argument("--tolerance", type=float, default=1e-3)
    fr.add_argument("--note", default="")
    sub.add_parser("check", parents=[common, store], help="run a scenario and compare with the store")
    return parser


def parse_args(argv) -> CliInvocation:
    """Validated invocation; raises UsageError (exit 64) on bad input."""
    ns = _build_parser().parse_args(argv)
    if ns.version:
        return CliInvocation("version")
    if ns.subcommand is None:
        raise UsageError("lvspread: a subcommand is required (try --help)")
    flags = {k: v for k, v in vars(ns).items() if k not in ("subcommand", "config", "out", "version")}
    out = ns.out or Path("results") / ns.subcommand
    return CliInvocation(ns.subcommand, flags, ns.config, out)


def execute(inv: CliInvocation, stdout=None) -> int:
    stdout = stdout or sys.stdout
    if inv.subcommand == "version":
        print(_version_text(), file=stdout)
        return EXIT_OK
    quiet = inv.flags.get("quiet", False)
    try:
        cfg = load_config(inv.config)
        scenario = SCENARIO_FOR.get(inv.subcommand) or harness.Scenario(inv.flags["scenario"])
        spec = harness.spec_from_config(cfg, scenario, inv.out)
        report = harness.run(spec)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_SOLVER

    code = EXIT_OK
    if inv.subcommand in ("freeze", "check"):
        path = inv.flags.get("store") or harness.default_store_path()
        try:
            store = harness.load_store(path)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if inv.subcommand == "freeze":
            store = harness.freeze(store, report.frozen, inv.flags["tolerance"], inv.flags["note"],
                                   report.tolerances)
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            harness.save_store(store, path)
            report.values["frozen"] = len(report.frozen)
        else:
            entries = harness.check_frozen(store, report.frozen)
            for e in entries:
                if not quiet or e.status == "fail":
                    print(e.line(), file=stdout)
            n_fail = sum(e.status == "fail" for e in entries)
            report.values["failed"] = n_fail
            report.values["new"] = sum(e.status == "new" for e in entries)
            if n_fail:
                code = EXIT_REGRESSION
    if report.outcome is Outcome.UNDETERMINED:
        code = EXIT_UNDETERMINED
    if not quiet:
        print(report.summary_line(), file=stdout)
    return code


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        inv = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return EXIT_USAGE
    return execute(inv)


if __name__ == "__main__":
    sys.exit(main())
