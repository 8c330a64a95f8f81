import streamlit as st

# Must be the first Streamlit command
st.set_page_config(
    page_title="eqgas: Equilibrium Gas Calculator",
    page_icon="🔥",
    layout="wide",
    initial_sidebar_state="expanded"
)

# Import other modules AFTER `set_page_config`
import logging
import os

import numpy as np
import pandas as pd

from eqsolver import EquilibriumError, SolverConfig, solve_ps, solve_pt, solve_rhoe
from export_utils import (ReportSection, build_report, bundle_exports, create_download_link,
                          export_report, solver_report_section, state_report_section,
                          validate_export_data)
from oracles import OracleError, co2_equilibrium
from shocktools import effective_area_ratio, nozzle_expansion, normal_shock
from thermo import (MixtureModel, ThermoError, X_from_n, load_thermo_db, n_from_Y,
                    resolve_db_path)
from utils import normalize_composition, parse_number_list, parse_species_list, report_filename

logging.basicConfig(level=os.getenv("EQGAS_LOG_LEVEL", "WARNING").upper())

AIR5 = "N2,O2,N,O,NO"
AIR11 = "N2,O2,N,O,NO,NO+,N2+,O+,N+,O-,e-"

MODES = [
    "Equilibrium (p, T)",
    "Equilibrium (rho, e)",
    "Equilibrium (p, s)",
    "Normal shock",
    "Nozzle expansion",
    "CO2 check",
]

# Initialize session state
if 'report' not in st.session_state:
    st.session_state.report = None
if 'report_tag' not in st.session_state:
    st.session_state.report_tag = ("eqgas", {})


@st.cache_resource
def get_database(path: str):
    """Parse the thermo database once per path"""
    return load_thermo_db(path or None)


def get_config(tol: float, max_iter: int, relax: float) -> SolverConfig:
    return SolverConfig.from_env(tol=tol, max_iter=max_iter, relax_fraction=relax)


def composition_inputs(prefix: str, species: str, fractions: str):
    """Species list and composition widgets; returns the raw texts and basis"""
    col1, col2, col3 = st.columns([3, 3, 1])
    with col1:
        species_text = st.text_input("Species", value=species, key=f"{prefix}_species")
    with col2:
        fractions_text = st.text_input("Initial fractions", value=fractions, key=f"{prefix}_fractions")
    with col3:
        kind = st.radio("Basis", ["mole", "mass"], key=f"{prefix}_basis")
    return species_text, fractions_text, kind


def build_mixture(species_text: str, fractions_text: str, kind: str):
    names = parse_species_list(species_text)
    model = MixtureModel.from_database(get_database(st.session_state.db_path), names)
    values = normalize_composition(parse_number_list(fractions_text), count=len(names))
    if kind == "mass":
        values = X_from_n(n_from_Y(values, model.molar_masses))
    return model, values


def show_equilibrium(mode: str, config: SolverConfig):
    """Fixed-state equilibrium forms"""
    st.header(f"⚗️ {mode}")
    with st.form(f"form_{mode}"):
        species_text, fractions_text, kind = composition_inputs("eq", AIR5, "0.767,0.233,0,0,0")
        col1, col2 = st.columns(2)
        if mode == "Equilibrium (p, T)":
            with col1:
                p = st.number_input("Pressure [Pa]", value=10135.0, min_value=1e-6, format="%.6g", key="eq_p")
            with col2:
                T = st.number_input("Temperature [K]", value=2500.0, min_value=1.0, format="%.6g", key="eq_T")
        elif mode == "Equilibrium (rho, e)":
            with col1:
                rho = st.number_input("Density [kg/m3]", value=0.0138, min_value=1e-12, format="%.6g", key="eq_rho")
            with col2:
                e = st.number_input("Internal energy [J/kg]", value=1.9e6, format="%.6g", key="eq_e")
        else:
            with col1:
                p = st.number_input("Pressure [Pa]", value=101325.0, min_value=1e-6, format="%.6g", key="eq_ps_p")
            with col2:
                s = st.number_input("Entropy [J/kg/K]", value=8500.0, format="%.6g", key="eq_s")
        submitted = st.form_submit_button("Solve", type="primary")

    if submitted:
        try:
            model, X0 = build_mixture(species_text, fractions_text, kind)
            if mode == "Equilibrium (p, T)":
                state, report = solve_pt(model, p, T, X0, config)
            elif mode == "Equilibrium (rho, e)":
                state, report = solve_rhoe(model, rho, e, X0, config)
            else:
                state, report = solve_ps(model, p, s, X0, config)
            st.session_state.report = build_report(
                mode,
                [state_report_section(model, state, "state", "Equilibrium state"),
                 solver_report_section(report)],
                converged=report.converged,
            )
            if mode == "Equilibrium (p, T)":
                st.session_state.report_tag = ("pt", {"T": T, "p": p})
            elif mode == "Equilibrium (rho, e)":
                st.session_state.report_tag = ("rhoe", {"rho": rho, "e": e})
            else:
                st.session_state.report_tag = ("ps", {"p": p, "s": s})
        except (ThermoError, EquilibriumError, ValueError, FileNotFoundError) as e:
            st.error(f"Solve failed: {str(e)}")


def show_shock(config: SolverConfig):
    """Equilibrium normal shock"""
    st.header("💥 Normal shock")
    with st.form("form_shock"):
        species_text, fractions_text, kind = composition_inputs(
            "shock", AIR11, "0.767,0.233,0,0,0,0,0,0,0,0,0")
        col1, col2, col3 = st.columns(3)
        with col1:
            p1 = st.number_input("p1 [Pa]", value=600.0, min_value=1e-6, format="%.6g", key="shock_p1")
        with col2:
            T1 = st.number_input("T1 [K]", value=300.0, min_value=1.0, format="%.6g", key="shock_T1")
        with col3:
            v1 = st.number_input("v1 [m/s]", value=6000.0, min_value=1.0, format="%.6g", key="shock_v1")
        submitted = st.form_submit_button("Solve", type="primary")

    if submitted:
        try:
            model, X0 = build_mixture(species_text, fractions_text, kind)
            with st.spinner("Solving the jump conditions..."):
                solution = normal_shock(model, p1, T1, v1, X0, config)
            st.session_state.report = build_report(
                f"Normal shock at v1 = {v1:g} m/s",
                [state_report_section(model, solution.pre, "state1", "Preshock (frozen)", velocity=solution.v1),
                 state_report_section(model, solution.post, "state2", "Postshock (equilibrium)",
                                      velocity=solution.v2),
                 solver_report_section(solution.report)],
                converged=solution.report.converged,
            )
            st.session_state.report_tag = ("shock", {"p1": p1, "v1": v1})
        except (ThermoError, EquilibriumError, ValueError, FileNotFoundError) as e:
            st.error(f"Shock solution failed: {str(e)}")


def show_nozzle(config: SolverConfig):
    """Isentropic nozzle expansion from an equilibrium stagnation state"""
    st.header("🚀 Nozzle expansion")
    with st.form("form_nozzle"):
        species_text, fractions_text, kind = composition_inputs("nozzle", AIR5, "0.79,0.21,0,0,0")
        col1, col2 = st.columns(2)
        with col1:
            p0 = st.number_input("Stagnation pressure [Pa]", value=2.0e7, min_value=1.0, format="%.6g", key="noz_p0")
            T0 = st.number_input("Stagnation temperature [K]", value=4000.0, min_value=200.0, format="%.6g",
                                 key="noz_T0")
        with col2:
            r_exit = st.number_input("Exit radius [m]", value=0.1365, min_value=1e-6, format="%.6g", key="noz_re")
            r_throat = st.number_input("Throat radius [m]", value=0.0125, min_value=1e-6, format="%.6g",
                                       key="noz_rt")
            delta = st.number_input("Displacement thickness [m]", value=0.0, min_value=0.0, format="%.6g",
                                    key="noz_delta")
        submitted = st.form_submit_button("Expand", type="primary")

    if submitted:
        try:
            model, X0 = build_mixture(species_text, fractions_text, kind)
            area_ratio = effective_area_ratio(r_exit, r_throat, delta)
            stagnation, report = solve_pt(model, p0, T0, X0, config)
            with st.spinner("Following the isentrope..."):
                throat, exit_flow = nozzle_expansion(model, stagnation, area_ratio, config)
            st.session_state.report = build_report(
                f"Nozzle expansion, area ratio {area_ratio:.4g}",
                [state_report_section(model, stagnation, "stagnation", "Stagnation"),
                 state_report_section(model, throat.gas, "throat", "Throat", velocity=throat.v),
                 state_report_section(model, exit_flow.gas, "exit", "Exit", velocity=exit_flow.v),
                 ReportSection(key="nozzle", title="Nozzle", summary={'area_ratio': area_ratio})],
                converged=report.converged,
            )
            st.session_state.report_tag = ("nozzle", {"T0": T0, "AR": area_ratio})
        except (ThermoError, EquilibriumError, ValueError, FileNotFoundError) as e:
            st.error(f"Expansion failed: {str(e)}")


def show_co2_check(config: SolverConfig):
    """Single-reaction CO2 dissociation oracle against the general solver"""
    st.header("🧪 CO2 dissociation check")
    with st.form("form_co2"):
        temperatures = st.text_input("Temperatures [K]", value="1500,2000,2500,3000,3500", key="co2_T")
        pressures = st.text_input("Pressures [Pa]", value="10132.5,101325,1013250", key="co2_p")
        submitted = st.form_submit_button("Compare", type="primary")

    if submitted:
        try:
            db = get_database(st.session_state.db_path)
            model = MixtureModel.from_database(db, ["CO2", "CO", "O2"])
            rows = []
            converged = True
            for T in parse_number_list(temperatures):
                for p in parse_number_list(pressures):
                    oracle = co2_equilibrium(T, p, db)
                    state, report = solve_pt(model, p, T, [1.0, 0.0, 0.0], config)
                    converged &= report.converged
                    rows.append({
                        'case': f"T{T:g}_p{p:g}",
                        'alpha': oracle.alpha,
                        'X_CO2': state.X[0],
                        'X_CO': state.X[1],
                        'X_O2': state.X[2],
                        'max_abs_dX': float(np.max(np.abs(np.array(oracle.X) - state.X))),
                    })
            table = pd.DataFrame(rows).set_index('case')
            st.session_state.report = build_report(
                "CO2 dissociation cross-check",
                [ReportSection(key="co2", title="Oracle vs solver",
                               summary={'max_abs_dX': float(table['max_abs_dX'].max())}, table=table)],
                converged=converged,
            )
            st.session_state.report_tag = ("co2", {})
        except (ThermoError, EquilibriumError, OracleError, ValueError, FileNotFoundError) as e:
            st.error(f"Check failed: {str(e)}")


def show_report():
    """Display the last report with download buttons"""
    doc = st.session_state.report
    if doc is None:
        st.info("Fill in the form and solve to see results here.")
        return

    st.divider()
    st.subheader(doc.title)
    if doc.converged:
        st.success("Converged")
    else:
        st.warning("Solution did NOT converge; results are the last iterate")
    for note in doc.notes:
        st.caption(note)

    for section in doc.sections:
        st.markdown(f"**{section.title}**")
        if all(k in section.summary for k in ('T', 'p', 'rho')):
            col1, col2, col3 = st.columns(3)
            col1.metric("T [K]", f"{section.summary['T']:.2f}")
            col2.metric("p [Pa]", f"{section.summary['p']:.6g}")
            col3.metric("ρ [kg/m³]", f"{section.summary['rho']:.6g}")
        if section.summary:
            st.dataframe(pd.DataFrame({'value': [str(v) for v in section.summary.values()]},
                                      index=list(section.summary.keys())),
                         use_container_width=True)
        if section.table is not None:
            st.dataframe(section.table, use_container_width=True)

    check = validate_export_data(doc)
    for warning in check['warnings']:
        st.caption(f"⚠️ {warning}")
    if not check['can_export']:
        st.error("; ".join(check['errors']))
        return

    st.subheader("Export Options")
    columns = st.columns(4)
    labels = {'kv': "🔢 Key-value", 'html': "🌐 HTML", 'pdf': "📄 PDF", 'docx': "📝 DOCX"}
    mimes = {'kv': 'text/plain', 'html': 'text/html', 'pdf': 'application/pdf',
             'docx': 'application/vnd.openxmlformats-officedocument.wordprocessingml.document'}
    for column, (export_format, label) in zip(columns, labels.items()):
        with column:
            try:
                data = export_report(doc, export_format)
                st.download_button(
                    label=label,
                    data=data,
                    file_name=report_filename(*st.session_state.report_tag, extension=export_format),
                    mime=mimes[export_format],
                    key=f"download_{export_format}",
                )
            except Exception as e:
                st.error(f"{export_format.upper()} export failed: {str(e)}")

    try:
        stem = report_filename(*st.session_state.report_tag)
        bundle = bundle_exports(doc, stem)
        st.markdown(create_download_link(bundle, f"{stem}.zip", 'zip'),
                    unsafe_allow_html=True)
    except Exception as e:
        st.error(f"Bundle export failed: {str(e)}")


def main():
    st.title("🔥 eqgas")
    st.markdown("Chemical equilibrium, shocks and nozzle flows for high-temperature gases")

    # Sidebar navigation
    with st.sidebar:
        st.title("Calculation")
        mode = st.selectbox("Choose a calculation:", MODES, key="mode")

        st.divider()
        st.subheader("Solver")
        tol = st.number_input("Tolerance", value=1e-11, min_value=1e-15, format="%.1e", key="tol")
        max_iter = st.number_input("Max iterations", value=200, min_value=1, step=10, key="max_iter")
        relax = st.slider("Relaxation fraction", min_value=0.05, max_value=1.0, value=0.5, key="relax")

        st.divider()
        db_path = st.text_input("Thermo database", value=os.getenv("EQGAS_THERMO_DB", ""),
                                placeholder="bundled data/thermo.inp", key="db_input")
        try:
            st.session_state.db_path = str(resolve_db_path(db_path or None))
            st.caption(f"Using {st.session_state.db_path}")
        except FileNotFoundError as e:
            st.error(str(e))
            return

    config = get_config(tol, int(max_iter), relax)
    if mode.startswith("Equilibrium"):
        show_equilibrium(mode, config)
    elif mode == "Normal shock":
        show_shock(config)
    elif mode == "Nozzle expansion":
        show_nozzle(config)
    elif mode == "CO2 check":
        show_co2_check(config)

    show_report()


main()
