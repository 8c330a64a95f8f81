import numpy as np
import pytest

from conftest import AIR5
from thermo import (CHARGE_ROW, DEFAULT_DB, R_U, GasState, MixtureModel, ThermoParseError,
                    UnknownSpeciesError, X_from_n, Y_from_n, cp0, frozen_sound_speed, g0, h0,
                    load_thermo_db, mixture_props, n_from_X, n_from_Y, parse_thermo_db,
                    resolve_db_path, s0, species_entropy, species_props)


def _record_lines(name):
    """Raw lines of one record from the bundled database"""
    lines = DEFAULT_DB.read_text(encoding="utf-8").splitlines()
    start = next(i for i, line in enumerate(lines) if line[:16].split() and line.split()[0] == name)
    nint = int(lines[start + 1][0:2])
    return lines[start:start + 2 + 3 * nint]


def test_bundled_database_species(db):
    assert len(db) == 20
    assert list(db)[:5] == ["N2", "O2", "N", "O", "NO"]
    assert {"e-", "O-", "NO+", "Ar", "CO2", "CH4"} <= set(db)


def test_record_fields(db):
    n2 = db["N2"]
    assert n2.molar_mass == pytest.approx(0.0280134)
    assert n2.elements == {"N": 2.0}
    assert n2.charge == 0
    assert len(n2.segments) == 3
    assert (n2.t_min, n2.t_max) == (200.0, 20000.0)

    assert db["e-"].charge == -1
    assert db["e-"].elements == {}
    assert db["NO+"].charge == 1
    assert db["O-"].charge == -1
    assert db["Ar"].elements == {"Ar": 1.0}
    assert db["H2O"].t_max == 6000.0


def test_reference_state_values(db):
    T = 298.15
    assert s0(db["N2"], T) == pytest.approx(191.609, abs=0.01)
    assert s0(db["O2"], T) == pytest.approx(205.148, abs=0.01)
    assert s0(db["CO2"], T) == pytest.approx(213.786, abs=0.01)
    assert h0(db["N2"], T) == pytest.approx(0.0, abs=1.0)
    assert h0(db["O"], T) == pytest.approx(249175.0, abs=5.0)
    assert cp0(db["N2"], T) == pytest.approx(29.124, abs=0.01)
    assert cp0(db["Ar"], 500.0) == pytest.approx(2.5 * R_U, rel=1e-12)


def test_oxygen_anion_is_the_published_record(db):
    o_minus = db["O-"]
    assert "Hotop,1985" in _record_lines("O-")[0]
    assert o_minus.molar_mass == pytest.approx(0.0159999486)
    assert [segment.t_high for segment in o_minus.segments] == [1000.0, 6000.0, 20000.0]
    assert h0(o_minus, 298.15) == pytest.approx(101846.192, abs=5.0)
    assert cp0(o_minus, 3000.0) != pytest.approx(2.5 * R_U, rel=1e-6)


def test_gibbs_is_h_minus_ts(db):
    for name in ("N2", "NO+", "CO2"):
        props = species_props(db[name], 3500.0)
        assert props.g == pytest.approx(props.h - 3500.0 * props.s)
        assert g0(db[name], 3500.0) == pytest.approx(props.g)


@pytest.mark.parametrize("name", ["N2", "O2", "O", "NO", "CO2", "H2O"])
def test_segments_join_continuously(db, name):
    species = db[name]
    for segment in species.segments[:-1]:
        below = species_props(species, segment.t_high - 1e-6)
        above = species_props(species, segment.t_high + 1e-6)
        assert above.cp == pytest.approx(below.cp, rel=1e-3)
        assert above.h == pytest.approx(below.h, rel=1e-4, abs=1.0)
        assert above.s == pytest.approx(below.s, rel=1e-4)


def test_enthalpy_and_entropy_integrate_heat_capacity(db):
    rng = np.random.default_rng(11)
    dT = 1e-2
    for species in db.values():
        edges = [seg.t_high for seg in species.segments[:-1]]
        temperatures = rng.uniform(species.t_min + 1.0, species.t_max - 1.0, size=8)
        for T in temperatures:
            if any(abs(T - edge) < 1.0 for edge in edges):
                continue
            cp = cp0(species, T)
            dh = (h0(species, T + dT) - h0(species, T - dT)) / (2.0 * dT)
            ds = (s0(species, T + dT) - s0(species, T - dT)) / (2.0 * dT)
            assert dh == pytest.approx(cp, rel=1e-6), (species.name, T)
            assert ds == pytest.approx(cp / T, rel=1e-6), (species.name, T)


def test_out_of_range_is_clamped_and_flagged(db, caplog):
    n2 = db["N2"]
    inside = species_props(n2, 200.0)
    with caplog.at_level("WARNING"):
        clamped = species_props(n2, 100.0)
    assert clamped.out_of_range
    assert not inside.out_of_range
    assert clamped.cp == inside.cp
    assert clamped.s == inside.s
    assert "clamped" in caplog.text

    with pytest.raises(ValueError):
        species_props(n2, 0.0)


def test_species_entropy(db):
    o2 = db["O2"]
    assert species_entropy(o2, 1000.0, 1e5, 1.0) == pytest.approx(s0(o2, 1000.0))
    assert species_entropy(o2, 1000.0, 1e5, 0.5) == pytest.approx(s0(o2, 1000.0) + R_U * np.log(2.0))
    with pytest.raises(ValueError):
        species_entropy(o2, 1000.0, 1e5, 0.0)
    with pytest.raises(ValueError):
        species_entropy(o2, 1000.0, -1.0, 0.5)


def test_parse_skips_comments_condensed_and_single_temperature_records():
    text = "\n".join(
        ["! comment", "thermo", "    200.00   1000.00   6000.00  20000.   9/09/04"]
        + _record_lines("N2")
        + ["H2O(L)            liquid",
           " 0 g 8/01 H   2.00O   1.00    0.00    0.00    0.00 1   18.0152800    -285830.000",
           "    273.150      0.0000 -2.0 -1.0  0.0  1.0  2.0  3.0  4.0  0.0        13278.000"]
        + ["END PRODUCTS"] + _record_lines("Ar") + ["END REACTANTS"] + _record_lines("O2")
    )
    records = parse_thermo_db(text)
    assert [record.name for record in records] == ["N2", "Ar"]


def test_parse_condensed_phase_is_skipped():
    lines = _record_lines("Ar")
    info = lines[1].ljust(80)
    lines[1] = info[:50] + " 1" + info[52:]
    assert parse_thermo_db("\n".join(lines + _record_lines("N2"))) == parse_thermo_db(
        "\n".join(_record_lines("N2")))


def test_parse_error_names_species_and_line():
    lines = _record_lines("O2")
    lines[3] = lines[3][:16] + "  not-a-number  " + lines[3][32:]
    with pytest.raises(ThermoParseError, match=r"'O2'.*line 4"):
        parse_thermo_db("\n".join(lines))


def test_parse_rejects_duplicates_and_truncation():
    with pytest.raises(ThermoParseError, match="duplicate"):
        parse_thermo_db("\n".join(_record_lines("N") * 2))
    with pytest.raises(ThermoParseError, match="truncated"):
        parse_thermo_db("\n".join(_record_lines("N")[:-1]))


def test_parse_rejects_unsupported_exponents():
    lines = _record_lines("N")
    lines[2] = lines[2].replace(" 4.0", " 5.0", 1)
    with pytest.raises(ThermoParseError, match="exponent"):
        parse_thermo_db("\n".join(lines))


def test_resolve_db_path_order(tmp_path, monkeypatch):
    custom = tmp_path / "custom.inp"
    custom.write_text("\n".join(_record_lines("Ar")))
    assert resolve_db_path() == DEFAULT_DB
    monkeypatch.setenv("EQGAS_THERMO_DB", str(custom))
    assert resolve_db_path() == custom
    assert list(load_thermo_db()) == ["Ar"]
    assert resolve_db_path(DEFAULT_DB) == DEFAULT_DB

    with pytest.raises(FileNotFoundError, match="search path"):
        resolve_db_path(tmp_path / "missing.inp")


def test_mixture_model_structure(air5, air11):
    assert air5.element_names == ["N", "O"]
    np.testing.assert_array_equal(air5.A, [[2, 0, 1, 0, 1], [0, 2, 0, 1, 1]])
    assert air11.element_names == ["N", "O", CHARGE_ROW]
    np.testing.assert_array_equal(air11.A[-1], air11.charges)
    assert air11.charges[air11.index("e-")] == -1
    assert not air5.A.flags.writeable
    assert air5.t_min == 200.0 and air5.t_max == 20000.0
    assert air11.t_min == 200.0


def test_mixture_model_errors(db):
    with pytest.raises(UnknownSpeciesError, match="available"):
        MixtureModel.from_database(db, ["N2", "Xe"])
    with pytest.raises(ValueError, match="duplicate"):
        MixtureModel.from_database(db, ["N2", "N2"])
    with pytest.raises(ValueError):
        MixtureModel([])
    with pytest.raises(UnknownSpeciesError):
        MixtureModel.from_database(db, AIR5).index("Ar")


@pytest.mark.parametrize("T", [150.0, 298.15, 999.0, 1000.0, 2500.0, 6500.0, 25000.0])
def test_standard_props_matches_scalar_evaluation(air11, T):
    props = air11.standard_props(T)
    for s, species in enumerate(air11.species):
        scalar = species_props(species, T)
        assert props.cp[s] == pytest.approx(scalar.cp, rel=1e-12)
        assert props.h[s] == pytest.approx(scalar.h, rel=1e-12, abs=1e-9)
        assert props.s[s] == pytest.approx(scalar.s, rel=1e-12)
        assert props.g[s] == pytest.approx(scalar.g, rel=1e-12)
        assert bool(props.out_of_range[s]) == scalar.out_of_range


def test_subset_keeps_order(air5):
    sub = air5.subset(np.array([True, False, True, False, False]))
    assert sub.names == ["N2", "N"]
    assert sub.element_names == ["N"]


def test_composition_conversions(air5):
    M = air5.molar_masses
    X = np.array([0.767, 0.233, 0.0, 0.0, 0.0])
    ns = n_from_X(X, M)
    assert 1.0 / ns.sum() == pytest.approx(0.767 * M[0] + 0.233 * M[1])
    np.testing.assert_allclose(X_from_n(ns), X)
    Y = Y_from_n(ns, M)
    assert Y.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(n_from_Y(Y, M), ns)
    np.testing.assert_allclose(n_from_X(3.0 * X, M), ns)

    with pytest.raises(ValueError):
        n_from_X([-0.1, 1.1, 0, 0, 0], M)
    with pytest.raises(ValueError):
        X_from_n(np.zeros(5))


def test_gas_state_constructors(air5):
    state = GasState.from_TpX(air5, 300.0, 101325.0, [0.79, 0.21, 0, 0, 0])
    assert state.rho == pytest.approx(101325.0 * state.M_mix / (R_U * 300.0))
    same = GasState.from_T_ns(300.0, state.ns, rho=state.rho)
    assert same.p == pytest.approx(101325.0)
    with pytest.raises(ValueError):
        GasState.from_T_ns(300.0, state.ns)
    with pytest.raises(ValueError):
        GasState.from_T_ns(300.0, state.ns, p=1.0, rho=1.0)

    copy = state.copy()
    copy.ns[0] = 0.0
    assert state.ns[0] > 0.0


def test_mixture_props_of_argon(argon):
    state = GasState.from_TpX(argon, 500.0, 1e5, [1.0])
    props = mixture_props(argon, state)
    M = argon.molar_masses[0]
    assert props.gamma_frozen == pytest.approx(5.0 / 3.0, rel=1e-12)
    assert props.cp == pytest.approx(2.5 * R_U / M)
    assert props.h - props.e == pytest.approx(R_U * 500.0 / M)
    assert props.s == pytest.approx(s0(argon.species[0], 500.0) / M)
    assert frozen_sound_speed(argon, state) == pytest.approx(np.sqrt(5.0 / 3.0 * R_U * 500.0 / M))


def test_mixture_entropy_ignores_absent_species(air5):
    state = GasState.from_TpX(air5, 1000.0, 1e5, [0.79, 0.21, 0, 0, 0])
    props = mixture_props(air5, state)
    assert np.isfinite(props.s)
    assert not props.out_of_range
