import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from eqsolver import (EquilibriumError, SolveReport, SolverConfig, solve_ps, solve_pt,
                      solve_rhoe)
from thermo import GasState, MixtureModel, frozen_sound_speed, mixture_props

logger = logging.getLogger(__name__)

SCAN_POINTS = 40
WEAK_SHOCK_MARGIN = 1e-6


class ShockError(EquilibriumError):
    """Jump or expansion problem without a usable solution"""


@dataclass
class FlowState:
    gas: GasState
    v: float


@dataclass
class ShockSolution:
    """Pre/post states in the shock-stationary frame; wave_speed is lab frame"""
    pre: GasState
    post: GasState
    v1: float
    v2: float
    wave_speed: float
    report: SolveReport
    outer_iterations: int = 0


@dataclass
class RstSolution:
    state1: GasState
    state2: GasState
    state5: GasState
    stagnation: GasState
    throat: FlowState
    exit: FlowState
    pitot: GasState
    pitot_to_stagnation_ratio: float
    incident: ShockSolution
    reflected: ShockSolution
    notes: List[str] = field(default_factory=list)


class _JumpProblem:
    """Rankine-Hugoniot closure for a trial downstream speed.

    The upstream state moves into the shock at u_in; the trial downstream
    speed u_out fixes density, pressure and energy, and an equilibrium
    rho-e solve supplies the equation-of-state pressure to compare against.
    """

    def __init__(self, model: MixtureModel, upstream: GasState, X0: np.ndarray,
                 config: SolverConfig, inflow: Callable[[float], Tuple[float, float]]):
        self.model = model
        self.upstream = upstream
        self.h_up = mixture_props(model, upstream).h
        self.X0 = X0
        self.config = config
        self.inflow = inflow
        self.warm: GasState = upstream
        self.calls = 0

    def solve(self, trial: float) -> Tuple[float, GasState, SolveReport]:
        u_in, u_out = self.inflow(trial)
        rho1, p1 = self.upstream.rho, self.upstream.p
        rho2 = rho1 * u_in / u_out
        p2 = rho1 * u_in**2 + p1 - rho2 * u_out**2
        h2 = self.h_up + 0.5 * (u_in**2 - u_out**2)
        e2 = h2 - p2 / rho2

        self.calls += 1
        try:
            state, report = solve_rhoe(self.model, rho2, e2, self.X0, self.config,
                                       T_guess=self.warm.T, X_guess=self.warm.X)
        except EquilibriumError as e:
            raise ShockError(f"inner rho-e solve failed at trial speed {trial:.6g} m/s: {e}") from e
        if not report.converged:
            raise ShockError(
                f"inner rho-e solve did not converge at trial speed {trial:.6g} m/s "
                f"({report.summary()})"
            )
        self.warm = state
        return (p2 - state.p) / p2, state, report

    def residual(self, trial: float) -> float:
        return self.solve(trial)[0]


def _bracketed_root(problem: _JumpProblem, lower: float, upper: float, xtol: float,
                    label: str) -> float:
    """brentq on [lower, upper], falling back to a geometric scan for a sign change"""
    try:
        f_lower = problem.residual(lower)
        f_upper = problem.residual(upper)
        if f_lower * f_upper < 0.0:
            return brentq(problem.residual, lower, upper, xtol=xtol, rtol=1e-14, maxiter=200)
    except ShockError as e:
        logger.info("%s: endpoint evaluation failed (%s); scanning", label, e)

    samples = []
    failures = 0
    previous = None
    for trial in np.geomspace(lower, upper, SCAN_POINTS):
        try:
            value = problem.residual(float(trial))
        except ShockError:
            failures += 1
            continue
        samples.append((float(trial), value))
        if previous is not None and previous[1] * value < 0.0:
            return brentq(problem.residual, previous[0], float(trial), xtol=xtol, rtol=1e-14,
                          maxiter=200)
        previous = (float(trial), value)

    shown = ", ".join(f"{v:.4g}:{f:+.3e}" for v, f in samples[:12])
    raise ShockError(
        f"{label}: no sign change of (p - p_eos)/p in [{lower:.6g}, {upper:.6g}] m/s "
        f"({len(samples)} samples, {failures} failed solves; {shown})"
    )


def normal_shock(model: MixtureModel, p1: float, T1: float, v1: float, X0,
                 config: Optional[SolverConfig] = None) -> ShockSolution:
    """Equilibrium normal shock; the preshock gas is frozen at X0"""
    config = config or SolverConfig.from_env()
    pre = GasState.from_TpX(model, T1, p1, X0)
    X_pre = pre.X
    a1 = frozen_sound_speed(model, pre)
    if v1 < a1:
        raise ShockError(f"v1 = {v1:.6g} m/s is below the frozen sound speed {a1:.6g} m/s")

    if v1 / a1 - 1.0 < WEAK_SHOCK_MARGIN:
        post, report = solve_pt(model, p1, T1, X_pre, config)
        logger.info("Mach-1 normal shock: returning the trivial solution")
        return ShockSolution(pre=pre, post=post, v1=v1, v2=v1 * pre.rho / post.rho,
                             wave_speed=v1, report=report)

    problem = _JumpProblem(model, pre, X_pre, config, inflow=lambda v2: (v1, v2))
    v2 = _bracketed_root(problem, v1 / 20.0, v1 * (1.0 - WEAK_SHOCK_MARGIN), xtol=1e-12 * v1,
                         label="normal shock")
    _, post, report = problem.solve(v2)
    logger.info("Normal shock v1=%.1f m/s: v2=%.4f m/s, T2=%.2f K (%d inner solves)",
                v1, v2, post.T, problem.calls)
    return ShockSolution(pre=pre, post=post, v1=v1, v2=v2, wave_speed=v1, report=report,
                         outer_iterations=problem.calls)


def reflected_shock(model: MixtureModel, state2: GasState, v2_lab: float,
                    config: Optional[SolverConfig] = None) -> ShockSolution:
    """Shock reflected from a closed end; the gas behind it is at rest in the lab frame.

    v2_lab is the speed of the incoming shocked gas towards the wall; the root
    is found in the reflected wave speed v_r, with inflow v2_lab + v_r and
    outflow v_r in the reflected-shock frame.
    """
    config = config or SolverConfig.from_env()
    if not v2_lab > 0.0:
        raise ShockError(f"no reflected shock for incoming gas speed {v2_lab} m/s")
    a2 = frozen_sound_speed(model, state2)
    problem = _JumpProblem(model, state2, state2.X, config,
                           inflow=lambda v_r: (v2_lab + v_r, v_r))
    lower = 0.05 * v2_lab
    upper = 10.0 * v2_lab + 5.0 * a2
    v_r = _bracketed_root(problem, lower, upper, xtol=1e-12 * upper, label="reflected shock")
    _, post, report = problem.solve(v_r)
    logger.info("Reflected shock: v_r=%.4f m/s, T5=%.2f K, p5=%.6g Pa", v_r, post.T, post.p)
    return ShockSolution(pre=state2, post=post, v1=v2_lab + v_r, v2=v_r, wave_speed=v_r,
                         report=report, outer_iterations=problem.calls)


def mach_number(model: MixtureModel, flow: FlowState) -> float:
    return flow.v / frozen_sound_speed(model, flow.gas)


def effective_area_ratio(exit_radius: float, throat_radius: float,
                         displacement_thickness: float = 0.0) -> float:
    """Exit-to-throat area ratio with the exit radius reduced by a boundary-layer thickness"""
    effective = exit_radius - displacement_thickness
    if throat_radius <= 0.0 or effective < throat_radius:
        raise ValueError("effective exit radius must be at least the throat radius")
    return (effective / throat_radius)**2


class _Isentrope:
    """Equilibrium states along s = s0 below a stagnation state, with v from h0 - h"""

    def __init__(self, model: MixtureModel, stagnation: GasState, config: SolverConfig):
        props = mixture_props(model, stagnation)
        self.model = model
        self.config = config
        self.s0 = props.s
        self.h0 = props.h
        self.X0 = stagnation.X
        self.warm = stagnation

    def state_at(self, p: float) -> Tuple[GasState, float]:
        state, report = solve_ps(self.model, p, self.s0, self.X0, self.config,
                                 T_guess=self.warm.T, X_guess=self.warm.X)
        if not report.converged:
            raise ShockError(f"isentropic expansion failed at p = {p:.6g} Pa ({report.summary()})")
        self.warm = state
        h = mixture_props(self.model, state).h
        return state, math.sqrt(max(2.0 * (self.h0 - h), 0.0))

    def mass_flux(self, p: float) -> float:
        state, v = self.state_at(p)
        return state.rho * v


def nozzle_expansion(model: MixtureModel, stagnation: GasState, area_ratio: float,
                     config: Optional[SolverConfig] = None) -> Tuple[FlowState, FlowState]:
    """Steady isentropic equilibrium expansion to a given exit-to-throat area ratio"""
    config = config or SolverConfig.from_env()
    if area_ratio < 1.0:
        raise ValueError(f"area ratio must be >= 1, got {area_ratio}")
    isentrope = _Isentrope(model, stagnation, config)
    p0 = stagnation.p

    # Throat: the pressure maximising rho*v
    best = minimize_scalar(lambda lnp: -isentrope.mass_flux(math.exp(lnp)),
                           bounds=(math.log(0.2 * p0), math.log(0.95 * p0)),
                           method="bounded", options={"xatol": 1e-10})
    p_star = math.exp(best.x)
    throat_state, v_star = isentrope.state_at(p_star)
    throat = FlowState(gas=throat_state, v=v_star)
    if area_ratio == 1.0:
        return throat, FlowState(gas=throat_state.copy(), v=v_star)

    flux_star = throat_state.rho * v_star

    def area_residual(lnp: float) -> float:
        return flux_star / isentrope.mass_flux(math.exp(lnp)) - area_ratio

    # March down in ln p; shorten the step when a trial falls outside the thermo range
    upper = math.log(p_star)
    step = math.log(2.0)
    for _ in range(200):
        lower = upper - step
        try:
            if area_residual(lower) > 0.0:
                break
        except EquilibriumError as e:
            step *= 0.5
            if step < 1e-6:
                raise ShockError(f"exit state for area ratio {area_ratio} lies beyond the "
                                 f"database temperature range ({e})") from e
            continue
        upper = lower
    else:
        raise ShockError(f"exit pressure for area ratio {area_ratio} not bracketed")

    ln_exit = brentq(area_residual, lower, upper, xtol=1e-13, rtol=1e-15, maxiter=200)
    exit_state, v_exit = isentrope.state_at(math.exp(ln_exit))
    logger.info("Nozzle AR=%.4g: throat p=%.6g Pa, exit p=%.6g Pa, v=%.2f m/s",
                area_ratio, p_star, exit_state.p, v_exit)
    return throat, FlowState(gas=exit_state, v=v_exit)


def pitot_state(model: MixtureModel, freestream: FlowState,
                config: Optional[SolverConfig] = None) -> Tuple[GasState, ShockSolution]:
    """Stagnation state behind a normal shock, reached by isentropic compression to rest"""
    config = config or SolverConfig.from_env()
    gas = freestream.gas
    a = frozen_sound_speed(model, gas)
    if freestream.v <= a:
        raise ShockError(f"pitot reconstruction needs supersonic flow (v={freestream.v:.6g}, a={a:.6g})")

    shock = normal_shock(model, gas.p, gas.T, freestream.v, gas.X, config)
    post = shock.post
    props = mixture_props(model, post)
    h_total = props.h + 0.5 * shock.v2**2
    warm = [post]

    def enthalpy_deficit(p: float) -> float:
        state, report = solve_ps(model, p, props.s, post.X, config,
                                 T_guess=warm[0].T, X_guess=warm[0].X)
        if not report.converged:
            raise ShockError(f"pitot compression failed at p = {p:.6g} Pa")
        warm[0] = state
        return mixture_props(model, state).h - h_total

    upper = 2.0 * post.p
    for _ in range(40):
        if enthalpy_deficit(upper) > 0.0:
            break
        upper *= 2.0
    else:
        raise ShockError("pitot pressure not bracketed")

    p_pitot = brentq(enthalpy_deficit, post.p, upper, xtol=1e-12 * post.p, rtol=1e-14)
    state, _ = solve_ps(model, p_pitot, props.s, post.X, config,
                        T_guess=warm[0].T, X_guess=warm[0].X)
    return state, shock


def pitot_pressure(model: MixtureModel, freestream: FlowState,
                   config: Optional[SolverConfig] = None) -> float:
    return pitot_state(model, freestream, config)[0].p


def relax_to_supply_pressure(model: MixtureModel, state5: GasState, p_supply: float,
                             config: Optional[SolverConfig] = None) -> GasState:
    """Isentropic relaxation of the reflected-shock state to a measured supply pressure"""
    config = config or SolverConfig.from_env()
    s5 = mixture_props(model, state5).s
    state, report = solve_ps(model, p_supply, s5, state5.X, config,
                             T_guess=state5.T, X_guess=state5.X)
    if not report.converged:
        raise ShockError(f"supply-pressure relaxation failed ({report.summary()})")
    return state


def reflected_shock_tunnel(model: MixtureModel, p1: float, T1: float, shock_speed: float, X0,
                           area_ratio: float, config: Optional[SolverConfig] = None,
                           p_supply: Optional[float] = None) -> RstSolution:
    """Facility chain: incident shock, reflection, optional supply relaxation, nozzle, pitot"""
    config = config or SolverConfig.from_env()
    notes = []
    incident = normal_shock(model, p1, T1, shock_speed, X0, config)
    v2_lab = shock_speed - incident.v2
    reflected = reflected_shock(model, incident.post, v2_lab, config)

    stagnation = reflected.post
    if p_supply is not None:
        stagnation = relax_to_supply_pressure(model, reflected.post, p_supply, config)
        notes.append(f"state 5 relaxed isentropically from {reflected.post.p:.6g} Pa "
                     f"to supply pressure {p_supply:.6g} Pa")

    throat, exit_flow = nozzle_expansion(model, stagnation, area_ratio, config)
    pitot, _ = pitot_state(model, exit_flow, config)
    return RstSolution(
        state1=incident.pre,
        state2=incident.post,
        state5=reflected.post,
        stagnation=stagnation,
        throat=throat,
        exit=exit_flow,
        pitot=pitot,
        pitot_to_stagnation_ratio=pitot.p / stagnation.p,
        incident=incident,
        reflected=reflected,
        notes=notes,
    )
