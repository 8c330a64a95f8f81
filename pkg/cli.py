"""Command-line front-end: `python cli.py <mode> [options]`.

Every mode prints a text report (or a key-value document with --format kv) to
stdout. Exit status is 0 on convergence, 2 when a solve did not converge (the
report is still printed) and 1 on usage or data errors.
"""
import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from eqsolver import EquilibriumError, SolverConfig, solve_ps, solve_pt, solve_rhoe
from export_utils import (ReportDocument, ReportSection, build_report, export_report,
                          export_to_kv, export_to_text, solver_report_section,
                          state_report_section)
from oracles import OracleError, co2_equilibrium
from shocktools import (FlowState, effective_area_ratio, mach_number, nozzle_expansion,
                        normal_shock, pitot_state, reflected_shock, reflected_shock_tunnel)
from thermo import (GasState, MixtureModel, ThermoError, X_from_n, load_thermo_db,
                    n_from_Y)
from utils import normalize_composition, parse_number_list, parse_species_list

logger = logging.getLogger(__name__)

LOG_LEVEL_ENV = "EQGAS_LOG_LEVEL"
CO2_SPECIES = ["CO2", "CO", "O2"]
EXPORT_FORMATS = {'.kv': 'kv', '.txt': 'txt', '.html': 'html', '.htm': 'html',
                  '.pdf': 'pdf', '.docx': 'docx'}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors instead of exiting with status 2"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--species", help="Comma separated species names, e.g. N2,O2,N,O,NO.")
    composition = common.add_mutually_exclusive_group()
    composition.add_argument("--X", help="Initial mole fractions (normalised if needed).")
    composition.add_argument("--Y", help="Initial mass fractions (normalised if needed).")
    common.add_argument("--db", help="Thermo database (default: $EQGAS_THERMO_DB, then data/thermo.inp).")
    common.add_argument("--tol", type=float, help="Residual-norm tolerance.")
    common.add_argument("--max-iter", type=int, help="Newton iteration cap.")
    common.add_argument("--relax", type=float, help="Relaxation fraction of |ln x| per step.")
    common.add_argument("--verbose", action="store_true", default=None,
                        help="Write the per-iteration trace to stderr.")
    common.add_argument("--format", choices=["text", "kv"], default="text",
                        help="Report format on stdout.")
    common.add_argument("--log-level", default=os.getenv(LOG_LEVEL_ENV, "WARNING"),
                        help="Logging level for messages on stderr.")
    common.add_argument("--export", type=Path,
                        help="Also write the report to FILE (.kv, .txt, .html, .pdf or .docx).")
    return common


def _nozzle_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--area-ratio", type=float, help="Exit-to-throat area ratio.")
    parser.add_argument("--exit-radius", type=float, help="Nozzle exit radius, m.")
    parser.add_argument("--throat-radius", type=float, help="Nozzle throat radius, m.")
    parser.add_argument("--displacement-thickness", type=float, default=0.0,
                        help="Boundary-layer displacement thickness at the exit, m.")


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = _Parser(prog="eqgas", description="Chemical equilibrium and shock-tunnel calculations.")
    sub = parser.add_subparsers(dest="mode", required=True, parser_class=_Parser)

    pt = sub.add_parser("pt", parents=[common], help="Equilibrium at fixed p and T.")
    pt.add_argument("--p", type=float, required=True, help="Pressure, Pa.")
    pt.add_argument("--T", type=float, required=True, help="Temperature, K.")

    rhoe = sub.add_parser("rhoe", parents=[common], help="Equilibrium at fixed density and internal energy.")
    rhoe.add_argument("--rho", type=float, required=True, help="Density, kg/m3.")
    rhoe.add_argument("--e", type=float, required=True, help="Specific internal energy, J/kg.")
    rhoe.add_argument("--T-guess", type=float, help="Starting temperature, K.")

    ps = sub.add_parser("ps", parents=[common], help="Equilibrium at fixed p and specific entropy.")
    ps.add_argument("--p", type=float, required=True, help="Pressure, Pa.")
    ps.add_argument("--s", type=float, required=True, help="Specific entropy, J/kg/K.")
    ps.add_argument("--T-guess", type=float, help="Starting temperature, K.")

    shock = sub.add_parser("shock", parents=[common], help="Equilibrium normal shock.")
    shock.add_argument("--p1", type=float, required=True, help="Preshock pressure, Pa.")
    shock.add_argument("--T1", type=float, required=True, help="Preshock temperature, K.")
    shock.add_argument("--v1", type=float, required=True, help="Shock-frame inflow speed, m/s.")

    reflect = sub.add_parser("reflect", parents=[common], help="Incident and reflected shock.")
    reflect.add_argument("--p1", type=float, required=True, help="Test-gas fill pressure, Pa.")
    reflect.add_argument("--T1", type=float, required=True, help="Test-gas fill temperature, K.")
    reflect.add_argument("--vs", type=float, required=True, help="Incident shock speed, m/s.")

    nozzle = sub.add_parser("nozzle", parents=[common], help="Isentropic equilibrium nozzle expansion.")
    nozzle.add_argument("--p0", type=float, required=True, help="Stagnation pressure, Pa.")
    nozzle.add_argument("--T0", type=float, required=True, help="Stagnation temperature, K.")
    _nozzle_options(nozzle)

    pitot = sub.add_parser("pitot", parents=[common], help="Pitot pressure of a supersonic stream.")
    pitot.add_argument("--p", type=float, required=True, help="Freestream pressure, Pa.")
    pitot.add_argument("--T", type=float, required=True, help="Freestream temperature, K.")
    pitot.add_argument("--v", type=float, required=True, help="Freestream speed, m/s.")

    co2 = sub.add_parser("co2-verify", parents=[common],
                         help="Compare the CO2 dissociation oracle with the pt solver.")
    co2.add_argument("--T", required=True, help="Temperature(s), K, comma separated.")
    co2.add_argument("--p", required=True, help="Pressure(s), Pa, comma separated.")

    tunnel = sub.add_parser("tunnel", parents=[common], help="Reflected shock tunnel chain.")
    tunnel.add_argument("--p1", type=float, required=True, help="Test-gas fill pressure, Pa.")
    tunnel.add_argument("--T1", type=float, required=True, help="Test-gas fill temperature, K.")
    tunnel.add_argument("--vs", type=float, required=True, help="Incident shock speed, m/s.")
    tunnel.add_argument("--p-supply", type=float, help="Measured nozzle-supply pressure, Pa.")
    _nozzle_options(tunnel)
    return parser


def _config(args) -> SolverConfig:
    return SolverConfig.from_env(tol=args.tol, max_iter=args.max_iter,
                                 relax_fraction=args.relax, verbose=args.verbose)


def _mixture(args, default_species: Optional[Sequence[str]] = None) -> Tuple[MixtureModel, np.ndarray]:
    """Model and initial mole fractions from --species and --X/--Y"""
    if args.species is None and default_species is None:
        raise UsageError("--species is required for this mode")
    names = parse_species_list(args.species if args.species is not None else default_species)
    model = MixtureModel.from_database(load_thermo_db(args.db), names)

    if args.X is not None:
        X0 = normalize_composition(parse_number_list(args.X), count=len(names))
    elif args.Y is not None:
        Y = normalize_composition(parse_number_list(args.Y), count=len(names))
        X0 = X_from_n(n_from_Y(Y, model.molar_masses))
    elif default_species is not None and args.species is None:
        X0 = np.zeros(len(names))
        X0[0] = 1.0
    else:
        raise UsageError("give the initial composition with --X or --Y")
    return model, X0


def _area_ratio(args) -> float:
    if args.area_ratio is not None:
        if args.exit_radius is not None or args.throat_radius is not None:
            raise UsageError("give either --area-ratio or --exit-radius/--throat-radius, not both")
        return args.area_ratio
    if args.exit_radius is None or args.throat_radius is None:
        raise UsageError("nozzle geometry needs --area-ratio or --exit-radius and --throat-radius")
    return effective_area_ratio(args.exit_radius, args.throat_radius, args.displacement_thickness)


def _run_equilibrium(args, config: SolverConfig) -> ReportDocument:
    model, X0 = _mixture(args)
    if args.mode == "pt":
        state, report = solve_pt(model, args.p, args.T, X0, config)
        title = f"Equilibrium at p = {args.p:g} Pa, T = {args.T:g} K"
    elif args.mode == "rhoe":
        state, report = solve_rhoe(model, args.rho, args.e, X0, config, T_guess=args.T_guess)
        title = f"Equilibrium at rho = {args.rho:g} kg/m3, e = {args.e:g} J/kg"
    else:
        state, report = solve_ps(model, args.p, args.s, X0, config, T_guess=args.T_guess)
        title = f"Equilibrium at p = {args.p:g} Pa, s = {args.s:g} J/kg/K"
    sections = [state_report_section(model, state, "state", "Equilibrium state"),
                solver_report_section(report)]
    return build_report(title, sections, converged=report.converged)


def _run_shock(args, config: SolverConfig) -> ReportDocument:
    model, X0 = _mixture(args)
    solution = normal_shock(model, args.p1, args.T1, args.v1, X0, config)
    sections = [
        state_report_section(model, solution.pre, "state1", "Preshock state (frozen)", velocity=solution.v1),
        state_report_section(model, solution.post, "state2", "Postshock state (equilibrium)",
                             velocity=solution.v2),
        solver_report_section(solution.report),
    ]
    sections[-1].summary['outer_evaluations'] = solution.outer_iterations
    return build_report(f"Normal shock at v1 = {args.v1:g} m/s", sections,
                        converged=solution.report.converged)


def _run_reflect(args, config: SolverConfig) -> ReportDocument:
    model, X0 = _mixture(args)
    incident = normal_shock(model, args.p1, args.T1, args.vs, X0, config)
    v2_lab = args.vs - incident.v2
    reflected = reflected_shock(model, incident.post, v2_lab, config)
    sections = [
        state_report_section(model, incident.pre, "state1", "Initial test gas"),
        state_report_section(model, incident.post, "state2", "Behind incident shock (lab frame)",
                             velocity=v2_lab),
        state_report_section(model, reflected.post, "state5", "Behind reflected shock (at rest)"),
        ReportSection(key="waves", title="Wave speeds",
                      summary={'incident_shock': args.vs, 'reflected_shock': reflected.wave_speed},
                      units={'incident_shock': 'm/s', 'reflected_shock': 'm/s'}),
        solver_report_section(reflected.report),
    ]
    return build_report(f"Reflected shock for v_s = {args.vs:g} m/s", sections,
                        converged=reflected.report.converged)


def _run_nozzle(args, config: SolverConfig) -> ReportDocument:
    model, X0 = _mixture(args)
    area_ratio = _area_ratio(args)
    stagnation, report = solve_pt(model, args.p0, args.T0, X0, config)
    if not report.converged:
        raise EquilibriumError(f"stagnation state: {report.summary()}")
    throat, exit_flow = nozzle_expansion(model, stagnation, area_ratio, config)
    sections = [
        state_report_section(model, stagnation, "stagnation", "Stagnation state"),
        state_report_section(model, throat.gas, "throat", "Throat", velocity=throat.v),
        state_report_section(model, exit_flow.gas, "exit", "Nozzle exit", velocity=exit_flow.v),
        ReportSection(key="nozzle", title="Nozzle", summary={'area_ratio': area_ratio}),
    ]
    return build_report(f"Nozzle expansion to area ratio {area_ratio:g}", sections)


def _run_pitot(args, config: SolverConfig) -> ReportDocument:
    model, X0 = _mixture(args)
    freestream = FlowState(gas=GasState.from_TpX(model, args.T, args.p, X0), v=args.v)
    stagnation, shock = pitot_state(model, freestream, config)
    sections = [
        state_report_section(model, freestream.gas, "freestream", "Freestream", velocity=freestream.v),
        state_report_section(model, shock.post, "postshock", "Behind the normal shock", velocity=shock.v2),
        state_report_section(model, stagnation, "pitot", "Pitot (stagnation behind shock)"),
        ReportSection(key="pitot_summary", title="Pitot pressure",
                      summary={'p_pitot': stagnation.p, 'p_pitot_over_p': stagnation.p / args.p,
                               'mach_frozen': mach_number(model, freestream)},
                      units={'p_pitot': 'Pa'}),
    ]
    return build_report(f"Pitot pressure at v = {args.v:g} m/s", sections)


def _run_tunnel(args, config: SolverConfig) -> ReportDocument:
    model, X0 = _mixture(args)
    rst = reflected_shock_tunnel(model, args.p1, args.T1, args.vs, X0, _area_ratio(args), config,
                                 p_supply=args.p_supply)
    sections = [
        state_report_section(model, rst.state1, "state1", "Initial test gas"),
        state_report_section(model, rst.state2, "state2", "Behind incident shock"),
        state_report_section(model, rst.state5, "state5", "Behind reflected shock"),
    ]
    if args.p_supply is not None:
        sections.append(state_report_section(model, rst.stagnation, "supply", "Nozzle supply"))
    sections += [
        state_report_section(model, rst.throat.gas, "throat", "Throat", velocity=rst.throat.v),
        state_report_section(model, rst.exit.gas, "exit", "Nozzle exit", velocity=rst.exit.v),
        state_report_section(model, rst.pitot, "pitot", "Pitot"),
        ReportSection(key="tunnel", title="Facility summary",
                      summary={'pitot_to_stagnation_ratio': rst.pitot_to_stagnation_ratio,
                               'reflected_shock_speed': rst.reflected.wave_speed}),
    ]
    return build_report(f"Reflected shock tunnel, v_s = {args.vs:g} m/s", sections, notes=rst.notes)


def _run_co2(args, config: SolverConfig) -> ReportDocument:
    model, X0 = _mixture(args, default_species=CO2_SPECIES)
    if model.names[:3] != CO2_SPECIES:
        raise UsageError(f"co2-verify needs the species list to start with {','.join(CO2_SPECIES)}")
    db = load_thermo_db(args.db)
    rows = []
    converged = True
    for T in parse_number_list(args.T):
        for p in parse_number_list(args.p):
            oracle = co2_equilibrium(T, p, db)
            state, report = solve_pt(model, p, T, X0, config)
            converged &= report.converged
            solver_X = state.X[:3]
            rows.append({
                'T': T,
                'p': p,
                'alpha_oracle': oracle.alpha,
                'alpha_solver': solver_X[1] / (solver_X[0] + solver_X[1]),
                'max_abs_dX': float(np.max(np.abs(np.array(oracle.X) - solver_X))),
                'iterations': report.iterations,
            })
    grid = pd.DataFrame(rows).set_index(['T', 'p'])
    grid.index = [f"T{T:g}_p{p:g}" for T, p in grid.index]
    grid.index.name = 'case'
    section = ReportSection(key="co2", title="Oracle vs solver",
                            summary={'max_abs_dX': float(grid['max_abs_dX'].max())},
                            table=grid)
    return build_report("CO2 dissociation cross-check", [section], converged=converged)


HANDLERS = {
    "pt": _run_equilibrium,
    "rhoe": _run_equilibrium,
    "ps": _run_equilibrium,
    "shock": _run_shock,
    "reflect": _run_reflect,
    "nozzle": _run_nozzle,
    "pitot": _run_pitot,
    "co2-verify": _run_co2,
    "tunnel": _run_tunnel,
}


def _export(doc: ReportDocument, path: Path, argv: List[str]) -> None:
    export_format = EXPORT_FORMATS.get(path.suffix.lower())
    if export_format is None:
        raise UsageError(f"cannot infer export format from {path.name!r} "
                         f"(use one of {', '.join(sorted(EXPORT_FORMATS))})")
    path.write_bytes(export_report(doc, export_format, argv))
    logger.info("Wrote %s report to %s", export_format, path)


def run(argv: Optional[Sequence[str]] = None, stdout=None) -> int:
    """Parse argv, run one mode and print its report; returns the exit status"""
    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    level = getattr(logging, str(args.log_level).upper(), None)
    if not isinstance(level, int):
        print(f"error: unknown log level {args.log_level!r}", file=sys.stderr)
        return 1
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s")

    try:
        config = _config(args)
        doc = HANDLERS[args.mode](args, config)
        if args.export is not None:
            _export(doc, args.export, argv)
    except (UsageError, ThermoError, EquilibriumError, OracleError, ValueError,
            FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    if args.format == "kv":
        stdout.write(export_to_kv(doc, argv))
    else:
        stdout.write(export_to_text(doc))
    return 0 if doc.converged else 2


if __name__ == "__main__":
    sys.exit(run())
