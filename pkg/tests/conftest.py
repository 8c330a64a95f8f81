import numpy as np
import pytest

from eqsolver import SolverConfig
from thermo import DEFAULT_DB, MixtureModel, load_thermo_db

AIR5 = ["N2", "O2", "N", "O", "NO"]
AIR11 = ["N2", "O2", "N", "O", "NO", "NO+", "N2+", "O+", "N+", "O-", "e-"]
CO2_SET = ["CO2", "CO", "O2"]

# Preshock air used by the reference air listings
AIR_X = [0.767, 0.233]


def air_composition(model: MixtureModel) -> np.ndarray:
    X0 = np.zeros(len(model))
    X0[model.index("N2")] = AIR_X[0]
    X0[model.index("O2")] = AIR_X[1]
    return X0


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in ("EQGAS_THERMO_DB", "EQGAS_TOL", "EQGAS_MAX_ITER", "EQGAS_RELAX", "EQGAS_VERBOSE"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture(scope="session")
def db():
    return load_thermo_db(DEFAULT_DB)


@pytest.fixture(scope="session")
def air5(db):
    return MixtureModel.from_database(db, AIR5)


@pytest.fixture(scope="session")
def air11(db):
    return MixtureModel.from_database(db, AIR11)


@pytest.fixture(scope="session")
def co2(db):
    return MixtureModel.from_database(db, CO2_SET)


@pytest.fixture(scope="session")
def argon(db):
    return MixtureModel.from_database(db, ["Ar"])


@pytest.fixture
def config():
    return SolverConfig()
