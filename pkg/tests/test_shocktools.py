import numpy as np
import pytest

from conftest import air_composition
from eqsolver import solve_pt
from oracles import (mach_from_area_ratio, perfect_gas_normal_shock, perfect_gas_reflected_shock,
                     rayleigh_pitot_ratio)
from shocktools import (FlowState, ShockError, effective_area_ratio, mach_number,
                        nozzle_expansion, normal_shock, pitot_pressure, pitot_state,
                        reflected_shock, reflected_shock_tunnel, relax_to_supply_pressure)
from thermo import GasState, frozen_sound_speed, mixture_props

MONATOMIC = 5.0 / 3.0

# Ionising air behind a 6 km/s shock into 600 Pa, 300 K air
AIR11_POSTSHOCK = {
    "N2": 4.260e-1, "O": 3.249e-1, "N": 2.396e-1, "NO": 8.549e-3, "e-": 3.570e-4,
    "NO+": 3.295e-4, "O2": 2.591e-4, "O+": 1.437e-5, "N+": 1.015e-5, "N2+": 4.004e-6,
    "O-": 1.004e-6,
}


def _argon_speed(argon, T, mach):
    return mach * frozen_sound_speed(argon, GasState.from_TpX(argon, T, 1e5, [1.0]))


def _assert_flux_invariants(model, shock, tol=1e-8):
    pre, post = shock.pre, shock.post
    h1 = mixture_props(model, pre).h
    h2 = mixture_props(model, post).h
    mass = pre.rho * shock.v1
    assert post.rho * shock.v2 == pytest.approx(mass, rel=tol)
    assert post.p + post.rho * shock.v2**2 == pytest.approx(pre.p + mass * shock.v1, rel=tol)
    assert h2 + 0.5 * shock.v2**2 == pytest.approx(h1 + 0.5 * shock.v1**2, rel=tol)


@pytest.fixture(scope="module")
def air_shock(air11):
    return normal_shock(air11, 600.0, 300.0, 6000.0, air_composition(air11))


def test_argon_shock_matches_perfect_gas(argon, config):
    v1 = _argon_speed(argon, 300.0, 3.0)
    shock = normal_shock(argon, 1000.0, 300.0, v1, [1.0], config)
    jump = perfect_gas_normal_shock(3.0, MONATOMIC)
    assert shock.post.p / shock.pre.p == pytest.approx(jump.p2_p1, rel=5e-3)
    assert shock.post.T / shock.pre.T == pytest.approx(jump.T2_T1, rel=5e-3)
    assert shock.post.rho / shock.pre.rho == pytest.approx(jump.rho2_rho1, rel=5e-3)
    assert shock.wave_speed == v1
    _assert_flux_invariants(argon, shock)


def test_ionising_air_shock(air11, air_shock):
    assert air_shock.report.converged
    assert air_shock.v2 == pytest.approx(474.5, rel=0.01)
    assert air_shock.post.T == pytest.approx(6564.6, rel=0.01)
    assert air_shock.post.p == pytest.approx(231418.8, rel=0.02)
    for name, expected in AIR11_POSTSHOCK.items():
        value = air_shock.post.X[air11.index(name)]
        assert value == pytest.approx(expected, rel=0.05, abs=5e-7), name


def test_shock_conserves_fluxes_and_raises_entropy(air11, air_shock):
    _assert_flux_invariants(air11, air_shock)
    assert mixture_props(air11, air_shock.post).s > mixture_props(air11, air_shock.pre).s
    assert air_shock.outer_iterations > 0


def test_stronger_shocks_are_hotter(air5, config):
    X0 = air_composition(air5)
    shocks = [normal_shock(air5, 1000.0, 300.0, v1, X0, config) for v1 in (2000.0, 3000.0, 4500.0, 6000.0)]
    temperatures = [shock.post.T for shock in shocks]
    pressures = [shock.post.p for shock in shocks]
    assert temperatures == sorted(temperatures)
    assert pressures == sorted(pressures)


def test_subsonic_inflow_is_rejected(air5, config):
    with pytest.raises(ShockError, match="sound speed"):
        normal_shock(air5, 1000.0, 300.0, 200.0, air_composition(air5), config)


def test_sonic_inflow_gives_trivial_jump(argon, config):
    a1 = frozen_sound_speed(argon, GasState.from_TpX(argon, 300.0, 1000.0, [1.0]))
    shock = normal_shock(argon, 1000.0, 300.0, a1 * (1.0 + 1e-9), [1.0], config)
    assert shock.post.T == pytest.approx(300.0)
    assert shock.post.p == pytest.approx(1000.0)
    assert shock.v2 == pytest.approx(shock.v1)


def test_weak_argon_shock_is_found_near_the_sonic_limit(argon, config):
    mach = 1.005
    v1 = _argon_speed(argon, 300.0, mach)
    shock = normal_shock(argon, 1000.0, 300.0, v1, [1.0], config)
    jump = perfect_gas_normal_shock(mach, MONATOMIC)
    assert 0.99 * v1 < shock.v2 < v1
    assert shock.post.p / shock.pre.p - 1.0 == pytest.approx(jump.p2_p1 - 1.0, rel=1e-4)
    assert shock.post.rho / shock.pre.rho == pytest.approx(jump.rho2_rho1, rel=1e-6)
    _assert_flux_invariants(argon, shock)


def test_reflected_argon_shock_matches_perfect_gas(argon, config):
    Ms = 3.0
    vs = _argon_speed(argon, 300.0, Ms)
    incident = normal_shock(argon, 1000.0, 300.0, vs, [1.0], config)
    v2_lab = vs - incident.v2
    reflected = reflected_shock(argon, incident.post, v2_lab, config)

    _, p_ratio, T_ratio = perfect_gas_reflected_shock(Ms, MONATOMIC)
    assert reflected.post.p / incident.post.p == pytest.approx(p_ratio, rel=5e-3)
    assert reflected.post.T / incident.post.T == pytest.approx(T_ratio, rel=5e-3)
    _assert_flux_invariants(argon, reflected)
    # Gas behind the reflected shock is at rest in the lab frame
    assert reflected.v1 - reflected.wave_speed == pytest.approx(v2_lab)


def test_reflection_needs_incoming_gas(argon, config):
    state = GasState.from_TpX(argon, 1000.0, 1e4, [1.0])
    with pytest.raises(ShockError):
        reflected_shock(argon, state, 0.0, config)


def test_effective_area_ratio():
    assert effective_area_ratio(0.1365, 0.0125) == pytest.approx((0.1365 / 0.0125)**2)
    assert effective_area_ratio(0.1365, 0.0125, 0.006) == pytest.approx((0.1305 / 0.0125)**2)
    assert effective_area_ratio(0.01, 0.01) == 1.0
    with pytest.raises(ValueError):
        effective_area_ratio(0.01, 0.02)
    with pytest.raises(ValueError):
        effective_area_ratio(0.1, 0.0)


def test_argon_nozzle_matches_area_mach_relation(argon, config):
    stagnation = GasState.from_TpX(argon, 3000.0, 1e6, [1.0])
    throat, exit_flow = nozzle_expansion(argon, stagnation, 10.0, config)
    assert mach_number(argon, throat) == pytest.approx(1.0, rel=1e-4)
    assert mach_number(argon, exit_flow) == pytest.approx(mach_from_area_ratio(10.0, MONATOMIC), rel=5e-3)

    props0 = mixture_props(argon, stagnation)
    for flow in (throat, exit_flow):
        props = mixture_props(argon, flow.gas)
        assert props.s == pytest.approx(props0.s, rel=1e-9)
        assert props.h + 0.5 * flow.v**2 == pytest.approx(props0.h, rel=1e-9)
    assert throat.gas.rho * throat.v == pytest.approx(10.0 * exit_flow.gas.rho * exit_flow.v, rel=1e-6)


def test_nozzle_area_ratio_edge_cases(argon, config):
    stagnation = GasState.from_TpX(argon, 3000.0, 1e6, [1.0])
    throat, exit_flow = nozzle_expansion(argon, stagnation, 1.0, config)
    assert exit_flow.v == throat.v
    assert exit_flow.gas.p == throat.gas.p
    with pytest.raises(ValueError):
        nozzle_expansion(argon, stagnation, 0.5, config)


def test_equilibrium_air_nozzle_is_isentropic(air5, config):
    stagnation, _ = solve_pt(air5, 2e7, 4000.0, air_composition(air5), config)
    throat, exit_flow = nozzle_expansion(air5, stagnation, 50.0, config)
    s0 = mixture_props(air5, stagnation).s
    assert mixture_props(air5, exit_flow.gas).s == pytest.approx(s0, rel=1e-9)
    assert exit_flow.gas.T < throat.gas.T < stagnation.T
    assert mach_number(air5, exit_flow) > 3.0


def test_argon_pitot_matches_rayleigh(argon, config):
    T = 300.0
    freestream = FlowState(gas=GasState.from_TpX(argon, T, 1000.0, [1.0]), v=_argon_speed(argon, T, 4.0))
    p_pitot = pitot_pressure(argon, freestream, config)
    assert p_pitot / 1000.0 == pytest.approx(rayleigh_pitot_ratio(4.0, MONATOMIC), rel=5e-3)

    state, shock = pitot_state(argon, freestream, config)
    assert state.p == pytest.approx(p_pitot)
    assert state.p > shock.post.p > 1000.0


def test_pitot_needs_supersonic_flow(argon, config):
    freestream = FlowState(gas=GasState.from_TpX(argon, 300.0, 1000.0, [1.0]), v=100.0)
    with pytest.raises(ShockError, match="supersonic"):
        pitot_state(argon, freestream, config)


def test_supply_relaxation_keeps_entropy(argon, config):
    state5 = GasState.from_TpX(argon, 3000.0, 2e6, [1.0])
    relaxed = relax_to_supply_pressure(argon, state5, 1.5e6, config)
    assert relaxed.p == 1.5e6
    assert relaxed.T < 3000.0
    assert mixture_props(argon, relaxed).s == pytest.approx(mixture_props(argon, state5).s, rel=1e-9)


@pytest.fixture(scope="module")
def tunnel(air5):
    area_ratio = effective_area_ratio(0.1365, 0.0125)
    return reflected_shock_tunnel(air5, 5e4, 300.0, 2500.0, air_composition(air5), area_ratio)


def test_reflected_shock_tunnel_chain(air5, tunnel):
    assert tunnel.state1.T == 300.0
    assert tunnel.state2.T > tunnel.state1.T
    assert tunnel.state5.T > tunnel.state2.T
    assert tunnel.state5.p > tunnel.state2.p
    assert tunnel.stagnation is tunnel.state5
    assert tunnel.exit.v > tunnel.throat.v
    assert 0.0 < tunnel.pitot_to_stagnation_ratio < 1.0
    assert tunnel.notes == []


def test_boundary_layer_raises_pitot_ratio(air5, tunnel):
    thick = reflected_shock_tunnel(air5, 5e4, 300.0, 2500.0, air_composition(air5),
                                   effective_area_ratio(0.1365, 0.0125, 0.006))
    assert thick.pitot_to_stagnation_ratio > tunnel.pitot_to_stagnation_ratio


def test_tunnel_with_supply_pressure(air5, tunnel):
    p_supply = 0.8 * tunnel.state5.p
    relaxed = reflected_shock_tunnel(air5, 5e4, 300.0, 2500.0, air_composition(air5),
                                     effective_area_ratio(0.1365, 0.0125), p_supply=p_supply)
    assert relaxed.stagnation.p == pytest.approx(p_supply)
    assert relaxed.stagnation.T < relaxed.state5.T
    assert len(relaxed.notes) == 1
