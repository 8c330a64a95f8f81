import math

import numpy as np
import pytest

from eqsolver import solve_pt
from oracles import (OracleError, area_ratio_from_mach, co2_alpha, co2_equilibrium, co2_grid,
                     co2_kp, co2_mole_fractions, dice_microstates, frozen_isentrope_temperature,
                     mach_from_area_ratio, perfect_gas_normal_shock, perfect_gas_reflected_shock,
                     rayleigh_pitot_ratio)
from thermo import P_REF, R_U, g0

ATM = 101325.0


def test_kp_of_zero_gibbs_change_is_one():
    assert co2_kp(3000.0, 0.0, 0.0, 0.0) == 1.0
    with pytest.raises(ValueError):
        co2_kp(0.0, 0.0, 0.0, 0.0)


def test_kp_from_database(db):
    T = 3000.0
    expected = math.exp((g0(db["CO2"], T) - g0(db["CO"], T) - 0.5 * g0(db["O2"], T)) / (R_U * T))
    assert co2_equilibrium(T, ATM, db).Kp == pytest.approx(expected, rel=1e-14)

    values = [co2_equilibrium(T, ATM, db).Kp for T in np.linspace(2000.0, 4000.0, 9)]
    assert all(np.diff(values) > 0.0)


def test_alpha_special_cases():
    # Kp^2 = p/p0 removes the cubic term
    assert co2_alpha(1.0, P_REF) == pytest.approx(2.0 / 3.0, abs=1e-14)
    assert co2_alpha(1e200, P_REF) == 1.0
    assert co2_alpha(1e160, P_REF) == 1.0
    assert co2_alpha(float("inf"), 2.0 * P_REF) == 1.0
    assert co2_alpha(1e8, P_REF) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(OracleError):
        co2_alpha(0.0, P_REF)
    with pytest.raises(OracleError):
        co2_alpha(1.0, -1.0)


def test_alpha_satisfies_cubic():
    for Kp, p in [(0.5, 1e4), (3.0, 1e6), (50.0, 1e5)]:
        alpha = co2_alpha(Kp, p)
        assert 0.0 <= alpha <= 1.0
        assert alpha**3 * (1.0 - (p / P_REF) / Kp**2) - 3.0 * alpha + 2.0 == pytest.approx(0.0, abs=1e-12)


def test_mole_fractions():
    assert co2_mole_fractions(0.0) == (1.0, 0.0, 0.0)
    np.testing.assert_allclose(co2_mole_fractions(1.0), (0.0, 2.0 / 3.0, 1.0 / 3.0))
    np.testing.assert_allclose(co2_mole_fractions(2.0 / 3.0), (0.25, 0.5, 0.25))
    for alpha in np.linspace(0.0, 1.0, 17):
        assert math.fsum(co2_mole_fractions(alpha)) == pytest.approx(1.0, abs=2e-16)
    with pytest.raises(ValueError):
        co2_mole_fractions(1.5)


def test_co2_oracle_agrees_with_solver(db, co2, config):
    grid = co2_grid([1500.0, 2000.0, 2500.0, 3000.0, 3500.0], [0.1 * ATM, ATM, 10.0 * ATM], db)
    assert len(grid) == 15
    worst = 0.0
    for problem in grid:
        state, report = solve_pt(co2, problem.p, problem.T, [1.0, 0.0, 0.0], config)
        assert report.converged
        worst = max(worst, float(np.max(np.abs(state.X - np.array(problem.X)))))
    assert worst < 1e-5


def test_dissociation_grows_with_temperature_and_falls_with_pressure(db):
    low = co2_equilibrium(2500.0, ATM, db).alpha
    assert co2_equilibrium(3500.0, ATM, db).alpha > low
    assert co2_equilibrium(2500.0, 10.0 * ATM, db).alpha < low


def test_dice_microstates():
    assert dice_microstates(2, 7) == 6
    assert dice_microstates(2, 2) == 1
    assert dice_microstates(2, 12) == 1
    assert dice_microstates(2, 13) == 0
    assert dice_microstates(3, 2) == 0
    for n in range(1, 7):
        assert sum(dice_microstates(n, S) for S in range(n, 6 * n + 1)) == 6**n
    for S in range(10, 61):
        assert dice_microstates(10, S) == dice_microstates(10, 70 - S)
    assert dice_microstates(1000, 3500) > 10**700


def test_perfect_gas_normal_shock():
    jump = perfect_gas_normal_shock(2.0)
    assert jump.p2_p1 == pytest.approx(4.5)
    assert jump.rho2_rho1 == pytest.approx(2.6666667, rel=1e-7)
    assert jump.T2_T1 == pytest.approx(1.6875)
    assert jump.M2 == pytest.approx(0.5773503, rel=1e-6)

    unit = perfect_gas_normal_shock(1.0)
    assert (unit.p2_p1, unit.rho2_rho1, unit.T2_T1, unit.M2) == pytest.approx((1.0, 1.0, 1.0, 1.0))
    with pytest.raises(OracleError):
        perfect_gas_normal_shock(0.9)


def test_perfect_gas_reflected_shock_is_consistent():
    mach_reflected, p_ratio, T_ratio = perfect_gas_reflected_shock(3.0, 1.4)
    assert 1.0 < mach_reflected < 3.0
    jump = perfect_gas_normal_shock(mach_reflected, 1.4)
    assert p_ratio == pytest.approx(jump.p2_p1)
    assert T_ratio == pytest.approx(jump.T2_T1)
    with pytest.raises(OracleError):
        perfect_gas_reflected_shock(1.0)


def test_area_mach_relation():
    assert area_ratio_from_mach(1.0) == pytest.approx(1.0)
    assert area_ratio_from_mach(2.0) == pytest.approx(1.6875, rel=1e-6)
    assert mach_from_area_ratio(1.6875) == pytest.approx(2.0, rel=1e-10)
    subsonic = mach_from_area_ratio(1.6875, supersonic=False)
    assert subsonic < 1.0
    assert area_ratio_from_mach(subsonic) == pytest.approx(1.6875)
    assert mach_from_area_ratio(1.0) == 1.0
    with pytest.raises(OracleError):
        mach_from_area_ratio(0.5)


def test_rayleigh_pitot():
    assert rayleigh_pitot_ratio(1.0) == pytest.approx((1.2)**3.5, rel=1e-12)
    assert rayleigh_pitot_ratio(2.0) == pytest.approx(5.6404, rel=1e-4)
    with pytest.raises(OracleError):
        rayleigh_pitot_ratio(0.5)


def test_frozen_isentrope_of_monatomic_gas(db):
    T2 = frozen_isentrope_temperature(db["Ar"], 300.0, 1e5, 1e6)
    assert T2 == pytest.approx(300.0 * 10.0**0.4, rel=1e-8)
