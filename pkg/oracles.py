"""Analytic and brute-force reference solutions.

Nothing here touches the equilibrium solver: the CO2 oracle reads standard
Gibbs energies straight from the thermo records and solves its own cubic, and
the perfect-gas relations are closed-form.
"""
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from thermo import P_REF, R_U, SpeciesRecord, cp0, g0


class OracleError(ValueError):
    """Inputs outside the regime an analytic solution covers"""


@dataclass
class Co2Problem:
    """Single-reaction CO2 <=> CO + 1/2 O2 state; alpha is the reaction progress"""
    T: float
    p: float
    Kp: float
    alpha: float

    @property
    def X(self) -> Tuple[float, float, float]:
        return co2_mole_fractions(self.alpha)


def co2_kp(T: float, g0_CO2: float, g0_CO: float, g0_O2: float) -> float:
    """Equilibrium constant of CO2 dissociation from molar standard Gibbs energies"""
    if not T > 0.0:
        raise ValueError(f"temperature must be positive, got {T}")
    return math.exp((g0_CO2 - g0_CO - 0.5 * g0_O2) / (R_U * T))


def co2_alpha(Kp: float, p: float) -> float:
    """Root in [0, 1] of alpha^3 (1 - (p/p0)/Kp^2) - 3 alpha + 2 = 0"""
    if not (Kp > 0.0 and p > 0.0):
        raise OracleError(f"need Kp > 0 and p > 0, got Kp={Kp}, p={p}")
    # Divide twice; Kp**2 overflows for Kp above ~1e154
    c3 = 1.0 - (p / P_REF) / Kp / Kp

    def cubic(alpha: float) -> float:
        return c3 * alpha**3 - 3.0 * alpha + 2.0

    upper = cubic(1.0)
    if upper == 0.0:
        return 1.0
    if upper > 0.0 or not math.isfinite(upper):
        raise OracleError(f"no dissociation root in [0, 1] for Kp={Kp}, p={p}")
    return brentq(cubic, 0.0, 1.0, xtol=1e-15, rtol=4.0 * np.finfo(float).eps, maxiter=200)


def co2_mole_fractions(alpha: float) -> Tuple[float, float, float]:
    """(X_CO2, X_CO, X_O2) for reaction progress alpha"""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    a = Fraction(alpha)
    total = 1 + a / 2
    return float((1 - a) / total), float(a / total), float((a / 2) / total)


def co2_equilibrium(T: float, p: float, db: Dict[str, SpeciesRecord]) -> Co2Problem:
    Kp = co2_kp(T, g0(db["CO2"], T), g0(db["CO"], T), g0(db["O2"], T))
    return Co2Problem(T=T, p=p, Kp=Kp, alpha=co2_alpha(Kp, p))


def co2_grid(temperatures: Iterable[float], pressures: Iterable[float],
             db: Dict[str, SpeciesRecord]) -> List[Co2Problem]:
    """Dissociation states over a T x p grid, row-major in T"""
    pressures = list(pressures)
    return [co2_equilibrium(T, p, db) for T in temperatures for p in pressures]


def dice_microstates(n: int, S: int) -> int:
    """Number of ordered rolls of n six-sided dice that total S"""
    if n < 1 or S < n or S > 6 * n:
        return 0
    return sum((-1) ** k * math.comb(n, k) * math.comb(S - 6 * k - 1, n - 1)
               for k in range((S - n) // 6 + 1))


# ---------------------------------------------------------------------------
# Perfect-gas relations
# ---------------------------------------------------------------------------

@dataclass
class NormalShockRatios:
    p2_p1: float
    rho2_rho1: float
    T2_T1: float
    M2: float


def perfect_gas_normal_shock(mach_upstream: float, gamma: float = 1.4) -> NormalShockRatios:
    """
    Static property ratios across a normal shock in a calorically perfect gas.

    Args:
        mach_upstream: Mach number ahead of the shock, > 1.
        gamma: Ratio of specific heats.

    Returns: NormalShockRatios with downstream/upstream ratios and downstream Mach number.
    """
    if mach_upstream < 1.0:
        raise OracleError(f"upstream Mach number must be >= 1, got {mach_upstream}")
    gm1 = gamma - 1.0
    m2 = mach_upstream**2
    return NormalShockRatios(
        p2_p1=(2.0 * gamma * m2 - gm1) / (gamma + 1.0),
        rho2_rho1=(gamma + 1.0) * m2 / (gm1 * m2 + 2.0),
        T2_T1=(2.0 * gamma * m2 - gm1) * (gm1 * m2 + 2.0) / ((gamma + 1.0)**2 * m2),
        M2=math.sqrt((gm1 * m2 + 2.0) / (2.0 * gamma * m2 - gm1)),
    )


def perfect_gas_reflected_shock(mach_incident: float, gamma: float = 1.4
                                ) -> Tuple[float, float, float]:
    """
    Reflected-shock Mach number (relative to the shocked gas) and the p5/p2, T5/T2 jumps.

    Args:
        mach_incident: Incident shock Mach number relative to the quiescent test gas.
        gamma: Ratio of specific heats.

    Returns: (M_R, p5/p2, T5/T2)
    """
    ms2 = mach_incident**2
    if ms2 <= 1.0:
        raise OracleError("incident shock must be supersonic")
    root = math.sqrt(1.0 + 2.0 * (gamma - 1.0) / (gamma + 1.0)**2 * (ms2 - 1.0) * (gamma + 1.0 / ms2))
    k = mach_incident / (ms2 - 1.0) * root
    mach_reflected = (1.0 + math.sqrt(1.0 + 4.0 * k**2)) / (2.0 * k)
    jump = perfect_gas_normal_shock(mach_reflected, gamma)
    return mach_reflected, jump.p2_p1, jump.T2_T1


def area_ratio_from_mach(mach: float, gamma: float = 1.4) -> float:
    """Isentropic A/A* at Mach number `mach`"""
    if mach <= 0.0:
        raise OracleError("Mach number must be positive")
    exponent = (gamma + 1.0) / (2.0 * (gamma - 1.0))
    return (2.0 / (gamma + 1.0) * (1.0 + 0.5 * (gamma - 1.0) * mach**2))**exponent / mach


def mach_from_area_ratio(area_ratio: float, gamma: float = 1.4, supersonic: bool = True) -> float:
    if area_ratio < 1.0:
        raise OracleError(f"area ratio must be >= 1, got {area_ratio}")
    if area_ratio == 1.0:
        return 1.0

    def residual(mach: float) -> float:
        return area_ratio_from_mach(mach, gamma) - area_ratio

    if supersonic:
        upper = 2.0
        while residual(upper) < 0.0:
            upper *= 2.0
        return brentq(residual, 1.0, upper, xtol=1e-14)
    return brentq(residual, 1e-12, 1.0, xtol=1e-14)


def rayleigh_pitot_ratio(mach: float, gamma: float = 1.4) -> float:
    """Pitot (post-shock stagnation) pressure over freestream static pressure"""
    if mach < 1.0:
        raise OracleError(f"Rayleigh pitot formula needs supersonic flow, got M={mach}")
    m2 = mach**2
    first = ((gamma + 1.0)**2 * m2 / (4.0 * gamma * m2 - 2.0 * (gamma - 1.0)))**(gamma / (gamma - 1.0))
    return first * (1.0 - gamma + 2.0 * gamma * m2) / (gamma + 1.0)


def frozen_isentrope_temperature(species: SpeciesRecord, T1: float, p1: float, p2: float) -> float:
    """Integrate dT/dln(p) = R T / cp(T) for one frozen species from p1 to p2"""

    def rhs(_, y):
        return [R_U * y[0] / cp0(species, y[0])]

    solution = solve_ivp(rhs, (math.log(p1), math.log(p2)), [T1], method="DOP853",
                         rtol=1e-11, atol=1e-9)
    if not solution.success:
        raise OracleError(f"isentrope integration failed: {solution.message}")
    return float(solution.y[0, -1])
