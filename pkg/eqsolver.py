import logging
import os
import sys
from dataclasses import dataclass, field, replace
from typing import List, Optional, TextIO, Tuple

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from thermo import P_REF, R_U, GasState, MixtureModel, n_from_X
from utils import env_flag

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-11
DEFAULT_MAX_ITER = 200
DEFAULT_RELAX = 0.5
DEFAULT_TRACE_FLOOR = 1e-4
DEFAULT_T_GUESS = 3000.0
PIVOT_FLOOR = 1e-300
TINY_MOLARITY = 1e-300
# ln of the mole fraction below which a falling species no longer limits the shared step
LN_VANISHING = float(np.log(1e-8))

MODE_PT = "pt"
MODE_RHOE = "rhoe"
MODE_PS = "ps"


class EquilibriumError(Exception):
    """Base error for equilibrium solves"""


class SingularSystemError(EquilibriumError):
    """Reduced Newton matrix has a vanishing pivot"""


class TemperatureRangeError(EquilibriumError):
    """Target energy or entropy is unreachable inside the database temperature range"""


@dataclass(frozen=True)
class SolverConfig:
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    relax_fraction: float = DEFAULT_RELAX
    trace_floor_fraction: float = DEFAULT_TRACE_FLOOR
    verbose: bool = False

    def __post_init__(self):
        if not self.tol > 0.0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        if not 0.0 < self.relax_fraction <= 1.0:
            raise ValueError(f"relax_fraction must lie in (0, 1], got {self.relax_fraction}")
        if not self.trace_floor_fraction > 0.0:
            raise ValueError("trace_floor_fraction must be positive")

    @classmethod
    def from_env(cls, **overrides) -> "SolverConfig":
        """Defaults from EQGAS_* environment variables; explicit non-None overrides win"""
        values = {
            "tol": float(os.getenv("EQGAS_TOL", DEFAULT_TOL)),
            "max_iter": int(os.getenv("EQGAS_MAX_ITER", DEFAULT_MAX_ITER)),
            "relax_fraction": float(os.getenv("EQGAS_RELAX", DEFAULT_RELAX)),
            "verbose": env_flag("EQGAS_VERBOSE", False),
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)

    def replace(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass
class SolverWorkspace:
    """Private per-solve unknowns. lnns is first class; ns is only ever exp(lnns)."""
    lnns: np.ndarray
    ns: np.ndarray
    lnn: float
    lnT: float
    pi: np.ndarray
    dlnT: float = 0.0
    matrix: Optional[np.ndarray] = None
    rhs: Optional[np.ndarray] = None
    # Set in fixed-T mode so the requested temperature is used exactly
    T_fixed: Optional[float] = None

    @property
    def T(self) -> float:
        if self.T_fixed is not None:
            return self.T_fixed
        return float(np.exp(self.lnT))


@dataclass
class SolveReport:
    mode: str
    converged: bool = False
    iterations: int = 0
    residual_history: List[float] = field(default_factory=list)
    final_residual: float = float("inf")
    lambda_history: List[float] = field(default_factory=list)
    temperature_history: List[float] = field(default_factory=list)
    range_flags: List[str] = field(default_factory=list)
    pi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    element_names: List[str] = field(default_factory=list)
    active_species: List[str] = field(default_factory=list)
    pruned_elements: List[str] = field(default_factory=list)

    def summary(self) -> str:
        status = "converged" if self.converged else "NOT converged"
        return (f"{self.mode}: {status} in {self.iterations} iterations, "
                f"residual {self.final_residual:.3e}")


@dataclass
class ReducedSystem:
    mode: str
    matrix: np.ndarray
    rhs: np.ndarray
    A: np.ndarray
    mu: np.ndarray
    temperature_coef: Optional[np.ndarray]
    labels: List[str]
    has_lnn: bool
    has_lnT: bool


@dataclass
class NewtonStep:
    dlnns: np.ndarray
    dlnn: float
    dlnT: float
    pi: np.ndarray


@dataclass
class _Problem:
    """Active sub-problem after removing elements with no source in X0"""
    model: MixtureModel
    active: np.ndarray
    n0: np.ndarray
    b0: np.ndarray
    pruned: List[str]


def _build_problem(model: MixtureModel, X0) -> _Problem:
    X0 = np.asarray(X0, dtype=float)
    if X0.shape != (len(model),):
        raise ValueError(f"X0 has {X0.size} entries for {len(model)} species")
    n0 = n_from_X(X0, model.molar_masses)
    totals = model.A @ n0
    pruned = [name for j, name in enumerate(model.element_names)
              if name != "charge" and totals[j] == 0.0]
    active = np.ones(len(model), dtype=bool)
    for name in pruned:
        active &= model.A[model.element_names.index(name)] == 0.0
    if pruned:
        logger.debug("Pruned elements %s; frozen species %s", pruned,
                     [model.names[s] for s in np.flatnonzero(~active)])
    sub = model if active.all() else model.subset(active)
    n0_active = n0[active]
    return _Problem(model=sub, active=active, n0=n0_active, b0=sub.A @ n0_active, pruned=pruned)


def initial_guess(model: MixtureModel, X0, config: SolverConfig) -> Tuple[np.ndarray, float]:
    """Floored starting molarities; the only place a logarithm of ns is taken"""
    X0 = np.asarray(X0, dtype=float)
    if np.any(X0 < 0.0) or not np.sum(X0) > 0.0:
        raise ValueError("initial composition must be non-negative with a positive sum")
    M0 = float(np.dot(X0, model.molar_masses) / np.sum(X0))
    n = 1.0 / M0
    ns = np.maximum(X0 / np.sum(X0) / M0, n * config.trace_floor_fraction)
    return np.log(ns), float(np.log(n))


# ---------------------------------------------------------------------------
# Residuals
# ---------------------------------------------------------------------------

def residuals_pt(model: MixtureModel, T: float, p: float, lnns: np.ndarray, ns: np.ndarray,
                 n: float, pi: np.ndarray, n0: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
    """Fixed (T, p) residual families (F_s, F_j, F_n) using lnns directly"""
    g = model.standard_props(T).g
    F_s = g / (R_U * T) + lnns - np.log(n) + np.log(p / P_REF) - model.A.T @ pi
    F_j = model.A @ ns - model.A @ n0
    F_n = float(np.sum(ns) - n)
    return F_s, F_j, F_n


def residual_norm(F_s: np.ndarray, F_j: np.ndarray, F_n: float, ns: np.ndarray,
                  F_t: float = 0.0) -> float:
    """Abundance-weighted L2 norm; F_t is the energy or entropy closure when T is unknown"""
    weighted = np.asarray(ns) * np.asarray(F_s)
    return float(np.sqrt(np.sum(weighted**2) + np.sum(np.asarray(F_j)**2) + F_n**2 + F_t**2))


# ---------------------------------------------------------------------------
# Reduced Newton systems
# ---------------------------------------------------------------------------

def _element_block(A: np.ndarray, ns: np.ndarray, b0: np.ndarray, mu: np.ndarray):
    An = A * ns
    return An @ A.T, b0 - A @ ns + An @ mu


def assemble_system(problem: _Problem, ws: SolverWorkspace, mode: str, target: float,
                    fixed: float) -> ReducedSystem:
    """Build the reduced matrix for one mode.

    fixed is p for pt/ps and rho for rhoe; target is unused for pt, e0 for
    rhoe and s0 for ps.
    """
    model = problem.model
    A, ns, lnns = model.A, ws.ns, ws.lnns
    T = ws.T
    props = model.standard_props(T)
    ne = A.shape[0]
    labels = list(model.element_names)

    if mode == MODE_PT:
        mu = props.g / (R_U * T) + lnns - ws.lnn + np.log(fixed / P_REF)
        n = np.exp(ws.lnn)
        matrix = np.zeros((ne + 1, ne + 1))
        rhs = np.zeros(ne + 1)
        matrix[:ne, :ne], rhs[:ne] = _element_block(A, ns, problem.b0, mu)
        matrix[:ne, ne] = matrix[ne, :ne] = A @ ns
        matrix[ne, ne] = np.sum(ns) - n
        rhs[ne] = n - np.sum(ns) + ns @ mu
        return ReducedSystem(mode, matrix, rhs, A, mu, None, labels + ["n"], True, False)

    if mode == MODE_RHOE:
        mu = props.g / (R_U * T) + np.log(fixed * R_U * T / P_REF) + lnns
        e_rt = props.h / (R_U * T) - 1.0
        cv_r = props.cp / R_U - 1.0
        e = R_U * T * float(ns @ e_rt)
        matrix = np.zeros((ne + 1, ne + 1))
        rhs = np.zeros(ne + 1)
        matrix[:ne, :ne], rhs[:ne] = _element_block(A, ns, problem.b0, mu)
        matrix[:ne, ne] = matrix[ne, :ne] = A @ (ns * e_rt)
        matrix[ne, ne] = ns @ cv_r + ns @ e_rt**2
        rhs[ne] = (target - e) / (R_U * T) + ns @ (e_rt * mu)
        return ReducedSystem(mode, matrix, rhs, A, mu, e_rt, labels + ["T"], False, True)

    if mode == MODE_PS:
        ln_p = np.log(fixed / P_REF)
        mu = props.g / (R_U * T) + lnns - ws.lnn + ln_p
        n = np.exp(ws.lnn)
        h_rt = props.h / (R_U * T)
        s_r = props.s / R_U - (lnns - ws.lnn) - ln_p
        s = R_U * float(ns @ s_r)
        excess = np.sum(ns) - n
        matrix = np.zeros((ne + 2, ne + 2))
        rhs = np.zeros(ne + 2)
        matrix[:ne, :ne], rhs[:ne] = _element_block(A, ns, problem.b0, mu)
        matrix[:ne, ne] = matrix[ne, :ne] = A @ ns
        matrix[:ne, ne + 1] = A @ (ns * h_rt)
        matrix[ne, ne] = excess
        matrix[ne, ne + 1] = ns @ h_rt
        rhs[ne] = -excess + ns @ mu
        matrix[ne + 1, :ne] = A @ (ns * s_r)
        matrix[ne + 1, ne] = ns @ s_r + excess
        matrix[ne + 1, ne + 1] = ns @ (props.cp / R_U) + ns @ (s_r * h_rt)
        rhs[ne + 1] = (target - s) / R_U - excess + ns @ (s_r * mu)
        return ReducedSystem(mode, matrix, rhs, A, mu, h_rt, labels + ["n", "T"], True, True)

    raise ValueError(f"unknown solver mode {mode!r}")


def newton_step(ws: SolverWorkspace, system: ReducedSystem) -> NewtonStep:
    """Solve the reduced system (pivoted LU) and back-substitute the species updates"""
    if not np.all(np.isfinite(system.matrix)) or not np.all(np.isfinite(system.rhs)):
        raise EquilibriumError(f"non-finite entries in the {system.mode} Newton system")
    lu, piv = lu_factor(system.matrix, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if np.any(pivots < PIVOT_FLOOR):
        row = int(np.argmin(pivots))
        raise SingularSystemError(
            f"singular {system.mode} system: vanishing pivot for row '{system.labels[row]}'"
        )
    x = lu_solve((lu, piv), system.rhs, check_finite=False)
    ws.matrix, ws.rhs = system.matrix, system.rhs

    ne = system.A.shape[0]
    pi = x[:ne]
    dlnn = float(x[ne]) if system.has_lnn else 0.0
    dlnT = float(x[-1]) if system.has_lnT else 0.0
    dlnns = -system.mu + dlnn + system.A.T @ pi
    if system.temperature_coef is not None:
        dlnns = dlnns + system.temperature_coef * dlnT
    return NewtonStep(dlnns=dlnns, dlnn=dlnn, dlnT=dlnT, pi=pi)


def relaxation_factor(current_log: float, delta, fraction: float):
    """min(1, fraction |ln x| / |delta|), elementwise over delta"""
    limit = fraction * abs(current_log)
    magnitude = np.abs(np.asarray(delta, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(magnitude > 0.0, limit / magnitude, 1.0)
    return np.minimum(1.0, lam)


def apply_relaxation(ws: SolverWorkspace, step: NewtonStep, config: SolverConfig,
                     t_bounds: Optional[Tuple[float, float]] = None
                     ) -> Tuple[np.ndarray, float, float]:
    """Damp and apply one Newton update; returns (per-species Λ, shared Λ, Λ_T).

    Species steps are damped one by one. Δln n takes the smallest species
    factor, and Δln T the same rule scaled by |ln T|. Species already below
    the vanishing mole fraction and still falling take part in neither
    reduction. This is the only place ns is written during iteration.
    """
    lam_s = relaxation_factor(ws.lnn, step.dlnns, config.relax_fraction)
    vanishing = (ws.lnns - ws.lnn < LN_VANISHING) & (step.dlnns < 0.0)
    governing = np.abs(step.dlnns[~vanishing])
    lam_n = float(lam_s[~vanishing].min()) if governing.size else 1.0
    lam_T = 1.0
    if step.dlnT != 0.0:
        largest = max(float(governing.max(initial=0.0)), abs(step.dlnT))
        lam_T = float(relaxation_factor(ws.lnT, largest, config.relax_fraction))

    ws.lnns = ws.lnns + lam_s * step.dlnns
    ws.lnn = ws.lnn + lam_n * step.dlnn
    if step.dlnT != 0.0:
        ws.lnT = ws.lnT + lam_T * step.dlnT
        if t_bounds is not None:
            ws.lnT = float(np.clip(ws.lnT, np.log(t_bounds[0]), np.log(t_bounds[1])))
    ws.dlnT = step.dlnT
    ws.ns = np.exp(ws.lnns)
    return lam_s, lam_n, lam_T


def _trace(stream: TextIO, iteration: int, ws: SolverWorkspace, names: List[str],
           step: NewtonStep, lam_s: np.ndarray, eps: float) -> None:
    values = " ".join(f"{value:.2f}" for value in ws.ns)
    stream.write(f"iter {iteration:2d}: [{np.exp(ws.lnn):.2f}] {values}  ({eps:.3e})\n")
    for name, lnns, dlnns, lam in zip(names, ws.lnns, step.dlnns, lam_s):
        stream.write(f" sp: {name:<3s} lnns: {lnns:7.3f} dlnns: {dlnns:9.6f}  lambda: {lam:7.4f}\n")


# ---------------------------------------------------------------------------
# Solve driver
# ---------------------------------------------------------------------------

def _mode_residual_norm(problem: _Problem, ws: SolverWorkspace, system: ReducedSystem,
                        pi: np.ndarray, mode: str, fixed: float, target: float) -> float:
    """ε at the current unknowns, with π taken from this iteration's solve"""
    T = ws.T
    model = problem.model
    if mode == MODE_PT:
        F_s, F_j, F_n = residuals_pt(model, T, fixed, ws.lnns, ws.ns, np.exp(ws.lnn), pi,
                                     problem.n0)
        return residual_norm(F_s, F_j, F_n, ws.ns)

    F_s = system.mu - model.A.T @ pi
    F_j = model.A @ ws.ns - problem.b0
    props = model.standard_props(T)
    if mode == MODE_RHOE:
        e = float(ws.ns @ (props.h - R_U * T))
        return residual_norm(F_s, F_j, 0.0, ws.ns, (target - e) / (R_U * T))

    n = np.exp(ws.lnn)
    s_r = props.s / R_U - (ws.lnns - ws.lnn) - np.log(fixed / P_REF)
    s = R_U * float(ws.ns @ s_r)
    return residual_norm(F_s, F_j, float(np.sum(ws.ns) - n), ws.ns, (target - s) / R_U)


def _solve(model: MixtureModel, mode: str, X0, config: Optional[SolverConfig], fixed: float,
           target: float, T_start: float, X_guess=None,
           stream: Optional[TextIO] = None) -> Tuple[GasState, SolveReport]:
    config = config or SolverConfig.from_env()
    problem = _build_problem(model, X0)
    sub = problem.model
    t_bounds = (sub.t_min, sub.t_max)

    start = np.asarray(X_guess if X_guess is not None else X0, dtype=float)[problem.active]
    if not np.sum(start) > 0.0:
        start = np.asarray(X0, dtype=float)[problem.active]
    lnns, lnn = initial_guess(sub, start, config)
    # Fixed-T solves keep the requested T even outside the fits (clamped, flagged)
    T0 = T_start if mode == MODE_PT else float(np.clip(T_start, *t_bounds))
    ws = SolverWorkspace(lnns=lnns, ns=np.exp(lnns), lnn=lnn, lnT=float(np.log(T0)),
                         pi=np.zeros(sub.A.shape[0]),
                         T_fixed=float(T_start) if mode == MODE_PT else None)
    if mode == MODE_RHOE:
        ws.lnn = float(np.log(np.sum(ws.ns)))

    report = SolveReport(mode=mode, element_names=list(sub.element_names),
                         active_species=list(sub.names), pruned_elements=problem.pruned)
    stream = stream or sys.stderr

    for iteration in range(1, config.max_iter + 1):
        system = assemble_system(problem, ws, mode, target, fixed)
        step = newton_step(ws, system)
        ws.pi = step.pi
        eps = _mode_residual_norm(problem, ws, system, step.pi, mode, fixed, target)

        report.iterations = iteration
        report.residual_history.append(eps)
        report.temperature_history.append(ws.T)
        report.final_residual = eps
        if eps < config.tol:
            report.converged = True
            break

        lam_s, lam_shared, _ = apply_relaxation(ws, step, config, t_bounds)
        if mode == MODE_RHOE:
            ws.lnn = float(np.log(np.sum(ws.ns)))
        report.lambda_history.append(lam_shared)
        if config.verbose:
            _trace(stream, iteration, ws, sub.names, step, lam_s, eps)

    report.pi = ws.pi
    T = ws.T
    flags = sub.standard_props(T).out_of_range
    report.range_flags = [name for name, flag in zip(sub.names, flags) if flag]

    if not report.converged:
        at_bound = np.isclose(T, t_bounds[0], rtol=1e-12) or np.isclose(T, t_bounds[1], rtol=1e-12)
        if mode != MODE_PT and at_bound:
            raise TemperatureRangeError(
                f"{mode} target unreachable: temperature pinned at database bound {T:.2f} K "
                f"(valid range {t_bounds[0]:.2f}-{t_bounds[1]:.2f} K)"
            )
        logger.warning("%s", report.summary())
    else:
        logger.debug(report.summary())

    ns = np.zeros(len(model))
    ns[problem.active] = ws.ns
    if mode == MODE_RHOE:
        state = GasState.from_T_ns(T, ns, rho=fixed)
    else:
        state = GasState.from_T_ns(T, ns, p=fixed)
    return state, report


def solve_pt(model: MixtureModel, p: float, T: float, X0, config: Optional[SolverConfig] = None,
             X_guess=None) -> Tuple[GasState, SolveReport]:
    """Equilibrium at fixed temperature and pressure (Gibbs minimisation)"""
    if not (p > 0.0 and T > 0.0):
        raise ValueError(f"p and T must be positive, got p={p}, T={T}")
    return _solve(model, MODE_PT, X0, config, fixed=p, target=0.0, T_start=T, X_guess=X_guess)


def solve_rhoe(model: MixtureModel, rho: float, e: float, X0,
               config: Optional[SolverConfig] = None, T_guess: Optional[float] = None,
               X_guess=None) -> Tuple[GasState, SolveReport]:
    """Equilibrium at fixed density and specific internal energy (Helmholtz form)"""
    if not rho > 0.0:
        raise ValueError(f"rho must be positive, got {rho}")
    return _solve(model, MODE_RHOE, X0, config, fixed=rho, target=e,
                  T_start=T_guess or DEFAULT_T_GUESS, X_guess=X_guess)


def solve_ps(model: MixtureModel, p: float, s: float, X0, config: Optional[SolverConfig] = None,
             T_guess: Optional[float] = None, X_guess=None) -> Tuple[GasState, SolveReport]:
    """Equilibrium at fixed pressure and specific entropy"""
    if not p > 0.0:
        raise ValueError(f"p must be positive, got {p}")
    return _solve(model, MODE_PS, X0, config, fixed=p, target=s,
                  T_start=T_guess or DEFAULT_T_GUESS, X_guess=X_guess)


# ---------------------------------------------------------------------------
# Stationarity check
# ---------------------------------------------------------------------------

def lagrangian_value(model: MixtureModel, T: float, p: float, ns: np.ndarray, n0: np.ndarray,
                     lam: np.ndarray) -> float:
    """Gibbs Lagrangian per kg, J/kg"""
    ns = np.asarray(ns, dtype=float)
    if np.any(ns <= 0.0):
        raise ValueError("lagrangian needs strictly positive molarities")
    n = float(np.sum(ns))
    g = model.standard_props(T).g
    gibbs = float(ns @ (g + R_U * T * np.log(ns / n) + R_U * T * np.log(p / P_REF)))
    return gibbs + float(np.asarray(lam) @ (model.A @ ns - model.A @ np.asarray(n0)))


def verify_stationarity(model: MixtureModel, state: GasState, n0: np.ndarray,
                        report: SolveReport, perturbation: float = 1e-4
                        ) -> Tuple[np.ndarray, float]:
    """Central-difference dL/dn_s at a solved state, multipliers rebuilt as λ = -π R T.

    Species frozen by pruning or underflowed to zero report 0.
    """
    mask = np.array([name in report.active_species for name in model.names])
    sub = model if mask.all() else model.subset(mask)
    if list(sub.element_names) != list(report.element_names):
        raise ValueError("report does not belong to this model")
    lam = -np.asarray(report.pi) * R_U * state.T
    ns = np.maximum(np.asarray(state.ns, dtype=float)[mask], TINY_MOLARITY)
    n0 = np.asarray(n0, dtype=float)[mask]
    present = np.asarray(state.ns)[mask] > 0.0

    derivative = np.zeros(len(sub))
    for s in np.flatnonzero(present):
        step = perturbation * ns[s]
        up, down = ns.copy(), ns.copy()
        up[s] += step
        down[s] -= step
        L_up = lagrangian_value(sub, state.T, state.p, up, n0, lam)
        L_down = lagrangian_value(sub, state.T, state.p, down, n0, lam)
        derivative[s] = (L_up - L_down) / (2.0 * step)

    full = np.zeros(len(model))
    full[mask] = derivative
    return full, float(np.linalg.norm(full))
