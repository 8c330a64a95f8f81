import io
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

R_U = 8.31446261815324  # J/mol/K
P_REF = 100000.0  # Pa

THERMO_DB_ENV = "EQGAS_THERMO_DB"
DATA_DIR = Path(__file__).resolve().parent / "data"
DEFAULT_DB = DATA_DIR / "thermo.inp"

# Standard NASA-9 exponent set for Cp/R
NASA9_EXPONENTS = (-2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0)
CHARGE_ROW = "charge"


class ThermoError(Exception):
    """Base error for thermodynamic data problems"""


class ThermoParseError(ThermoError):
    """Malformed or duplicate record in a thermo database"""


class UnknownSpeciesError(ThermoError, KeyError):
    """Requested species is not in the database"""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


@dataclass(frozen=True)
class ThermoSegment:
    """One temperature interval of a NASA-9 fit: Cp/R coefficients a1..a7 plus H and S constants b1, b2."""
    t_low: float
    t_high: float
    a: Tuple[float, ...]
    b: Tuple[float, float]

    def __post_init__(self):
        if not self.t_low < self.t_high:
            raise ValueError(f"segment bounds out of order: {self.t_low} >= {self.t_high}")
        if len(self.a) != 7 or len(self.b) != 2:
            raise ValueError("a NASA-9 segment needs 7 a-coefficients and 2 b-constants")

    def contains(self, T: float) -> bool:
        return self.t_low <= T <= self.t_high

    @property
    def coefficients(self) -> np.ndarray:
        return np.array(self.a + self.b, dtype=float)


@dataclass(frozen=True)
class SpeciesRecord:
    """A gas-phase species: molar mass in kg/mol, element counts, signed charge and its fits."""
    name: str
    molar_mass: float
    elements: Dict[str, float]
    charge: int
    segments: Tuple[ThermoSegment, ...]

    def __post_init__(self):
        if self.molar_mass <= 0.0:
            raise ValueError(f"{self.name}: molar mass must be positive")
        if not self.segments:
            raise ValueError(f"{self.name}: at least one temperature segment is required")
        for lower, upper in zip(self.segments, self.segments[1:]):
            if abs(lower.t_high - upper.t_low) > 1e-6 * upper.t_low:
                raise ValueError(
                    f"{self.name}: segments not contiguous at {lower.t_high} / {upper.t_low}"
                )

    @property
    def t_min(self) -> float:
        return self.segments[0].t_low

    @property
    def t_max(self) -> float:
        return self.segments[-1].t_high


@dataclass
class SpeciesProps:
    """Standard-state properties at one temperature (floats) or over a species vector (arrays).

    cp and s in J/mol/K, h and g in J/mol. out_of_range marks clamped evaluations.
    """
    cp: Union[float, np.ndarray]
    h: Union[float, np.ndarray]
    s: Union[float, np.ndarray]
    g: Union[float, np.ndarray]
    out_of_range: Union[bool, np.ndarray]


# ---------------------------------------------------------------------------
# Database parsing
# ---------------------------------------------------------------------------

def _fortran_float(field: str, name: str, lineno: int) -> float:
    text = field.strip().replace("D", "E").replace("d", "e")
    try:
        return float(text)
    except ValueError:
        raise ThermoParseError(
            f"species {name!r}: cannot read number {field.strip()!r} on line {lineno}"
        ) from None


def _element_symbol(raw: str) -> str:
    raw = raw.strip()
    return raw[0].upper() + raw[1:].lower()


def _parse_segment(lines: List[Tuple[int, str]], name: str) -> ThermoSegment:
    (range_no, range_line), (c1_no, c1), (c2_no, c2) = lines
    range_line, c1, c2 = range_line.ljust(80), c1.ljust(80), c2.ljust(80)

    t_low = _fortran_float(range_line[0:11], name, range_no)
    t_high = _fortran_float(range_line[11:22], name, range_no)
    ncoef = range_line[22:23].strip()
    if ncoef != "7":
        raise ThermoParseError(f"species {name!r}: expected 7 coefficients on line {range_no}")
    exponents = tuple(
        _fortran_float(range_line[23 + 5 * k:28 + 5 * k], name, range_no) for k in range(7)
    )
    if exponents != NASA9_EXPONENTS:
        raise ThermoParseError(
            f"species {name!r}: unsupported exponent set {exponents} on line {range_no}"
        )

    a = [_fortran_float(c1[16 * k:16 * (k + 1)], name, c1_no) for k in range(5)]
    a += [_fortran_float(c2[0:16], name, c2_no), _fortran_float(c2[16:32], name, c2_no)]
    b = (_fortran_float(c2[48:64], name, c2_no), _fortran_float(c2[64:80], name, c2_no))

    try:
        return ThermoSegment(t_low=t_low, t_high=t_high, a=tuple(a), b=b)
    except ValueError as e:
        raise ThermoParseError(f"species {name!r}: {e} (line {range_no})") from None


def parse_thermo_db(source: Union[TextIO, Iterable[str], str]) -> List[SpeciesRecord]:
    """Parse a NASA Glenn 9-coefficient thermo.inp stream.

    Comment lines, the `thermo` header with its global range line, condensed
    phases and single-temperature (zero interval) records are skipped. Parsing
    stops at END REACTANTS.
    """
    if isinstance(source, str):
        source = io.StringIO(source)

    numbered = [(i, line.rstrip("\r\n")) for i, line in enumerate(source, start=1)]
    records: List[SpeciesRecord] = []
    seen = set()
    pos = 0

    def take(count: int, name: str) -> List[Tuple[int, str]]:
        nonlocal pos
        chunk = numbered[pos:pos + count]
        if len(chunk) < count:
            raise ThermoParseError(f"species {name!r}: record truncated at end of file")
        pos += count
        return chunk

    while pos < len(numbered):
        lineno, line = numbered[pos]
        stripped = line.strip()
        if not stripped or stripped[0] in "!#":
            pos += 1
            continue
        if stripped.lower().startswith("thermo"):
            # Header is followed by the global temperature-range line
            pos += 2
            continue
        if stripped.upper().startswith("END REACTANTS"):
            break
        if stripped.upper().startswith("END"):
            pos += 1
            continue

        name = line[:16].split()[0] if line[:16].strip() else stripped.split()[0]
        pos += 1
        (info_no, info), = take(1, name)
        info = info.ljust(80)

        try:
            nint = int(info[0:2])
        except ValueError:
            raise ThermoParseError(
                f"species {name!r}: bad interval count {info[0:2]!r} on line {info_no}"
            ) from None

        elements: Dict[str, float] = {}
        electrons = 0.0
        for k in range(5):
            symbol = info[10 + 8 * k:12 + 8 * k].strip()
            count_field = info[12 + 8 * k:18 + 8 * k]
            if not symbol:
                continue
            count = _fortran_float(count_field, name, info_no)
            if count == 0.0:
                continue
            if symbol.upper() == "E":
                electrons += count
            else:
                symbol = _element_symbol(symbol)
                elements[symbol] = elements.get(symbol, 0.0) + count

        phase_field = info[50:52].strip() or "0"
        molar_mass = _fortran_float(info[52:65], name, info_no) / 1000.0

        if nint == 0:
            take(1, name)
            logger.debug("Skipping single-temperature record %s", name)
            continue

        segments = tuple(_parse_segment(take(3, name), name) for _ in range(nint))
        if phase_field != "0":
            logger.debug("Skipping condensed species %s", name)
            continue

        if name in seen:
            raise ThermoParseError(f"duplicate species {name!r} on line {lineno}")
        seen.add(name)

        charge = -int(round(electrons))
        if abs(electrons + charge) > 1e-9:
            raise ThermoParseError(f"species {name!r}: non-integral charge on line {info_no}")

        try:
            records.append(SpeciesRecord(
                name=name,
                molar_mass=molar_mass,
                elements=elements,
                charge=charge,
                segments=tuple(sorted(segments, key=lambda seg: seg.t_low)),
            ))
        except ValueError as e:
            raise ThermoParseError(f"{e} (record starting on line {lineno})") from None

    return records


def resolve_db_path(explicit: Optional[Union[str, Path]] = None) -> Path:
    """Pick the database file: explicit path, then $EQGAS_THERMO_DB, then the bundled file."""
    env_path = os.getenv(THERMO_DB_ENV)
    search = [("--db", explicit), (THERMO_DB_ENV, env_path), ("bundled", DEFAULT_DB)]
    for origin, candidate in search:
        if not candidate:
            continue
        path = Path(candidate).expanduser()
        if path.is_file():
            return path
        searched = ", ".join(f"{o}={c}" for o, c in search if c)
        raise FileNotFoundError(f"thermo database not found: {path} (search path: {searched})")
    raise FileNotFoundError("no thermo database configured")


def load_thermo_db(path: Optional[Union[str, Path]] = None) -> Dict[str, SpeciesRecord]:
    """Read a database file into a name -> record mapping"""
    db_path = resolve_db_path(path)
    with open(db_path, "r", encoding="utf-8") as handle:
        records = parse_thermo_db(handle)
    logger.debug("Loaded %d species from %s", len(records), db_path)
    return {record.name: record for record in records}


# ---------------------------------------------------------------------------
# NASA-9 polynomial forms; c[..., 0:7] = a1..a7, c[..., 7:9] = b1, b2
# ---------------------------------------------------------------------------

def _cp_over_r(c: np.ndarray, T):
    return (c[..., 0] / T**2 + c[..., 1] / T + c[..., 2] + c[..., 3] * T
            + c[..., 4] * T**2 + c[..., 5] * T**3 + c[..., 6] * T**4)


def _h_over_rt(c: np.ndarray, T):
    return (-c[..., 0] / T**2 + c[..., 1] * np.log(T) / T + c[..., 2] + c[..., 3] * T / 2.0
            + c[..., 4] * T**2 / 3.0 + c[..., 5] * T**3 / 4.0 + c[..., 6] * T**4 / 5.0
            + c[..., 7] / T)


def _s_over_r(c: np.ndarray, T):
    return (-c[..., 0] / T**2 / 2.0 - c[..., 1] / T + c[..., 2] * np.log(T) + c[..., 3] * T
            + c[..., 4] * T**2 / 2.0 + c[..., 5] * T**3 / 3.0 + c[..., 6] * T**4 / 4.0
            + c[..., 8])


def _select_segment(species: SpeciesRecord, T: float) -> Tuple[ThermoSegment, float, bool]:
    segments = species.segments
    if T < segments[0].t_low:
        return segments[0], segments[0].t_low, True
    if T > segments[-1].t_high:
        return segments[-1], segments[-1].t_high, True
    for segment in segments:
        if T <= segment.t_high:
            return segment, T, False
    return segments[-1], T, False


def species_props(species: SpeciesRecord, T: float) -> SpeciesProps:
    """Standard-state Cp, H, S and G of one species, clamped to the fitted range"""
    if not T > 0.0:
        raise ValueError(f"temperature must be positive, got {T}")
    segment, t_eval, clamped = _select_segment(species, T)
    c = segment.coefficients
    cp = float(_cp_over_r(c, t_eval)) * R_U
    h = float(_h_over_rt(c, t_eval)) * R_U * t_eval
    s = float(_s_over_r(c, t_eval)) * R_U
    if clamped:
        logger.warning("%s evaluated at %.2f K outside [%.2f, %.2f] K; clamped",
                       species.name, T, species.t_min, species.t_max)
    return SpeciesProps(cp=cp, h=h, s=s, g=h - T * s, out_of_range=clamped)


def cp0(species: SpeciesRecord, T: float) -> float:
    return species_props(species, T).cp


def h0(species: SpeciesRecord, T: float) -> float:
    return species_props(species, T).h


def s0(species: SpeciesRecord, T: float) -> float:
    return species_props(species, T).s


def g0(species: SpeciesRecord, T: float) -> float:
    props = species_props(species, T)
    return props.h - T * props.s


def species_entropy(species: SpeciesRecord, T: float, p: float, X_s: float) -> float:
    """Molar entropy of a species at partial state (T, p, X_s), J/mol/K"""
    if not p > 0.0:
        raise ValueError(f"pressure must be positive, got {p}")
    if not 0.0 < X_s <= 1.0:
        raise ValueError(f"mole fraction must lie in (0, 1], got {X_s}")
    return s0(species, T) - R_U * np.log(X_s) - R_U * np.log(p / P_REF)


# ---------------------------------------------------------------------------
# Mixtures
# ---------------------------------------------------------------------------

class MixtureModel:
    """Ordered species set with its element list and constraint matrix A (elements x species).

    When any species carries charge the last row is the charge pseudo-element.
    Models are never mutated after construction.
    """

    def __init__(self, species: Sequence[SpeciesRecord]):
        if not species:
            raise ValueError("a mixture needs at least one species")
        names = [sp.name for sp in species]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise ValueError(f"duplicate species in mixture: {', '.join(duplicates)}")

        self.species: Tuple[SpeciesRecord, ...] = tuple(species)
        self.names: List[str] = names

        elements: List[str] = []
        for sp in self.species:
            for symbol in sp.elements:
                if symbol not in elements:
                    elements.append(symbol)
        if any(sp.charge != 0 for sp in self.species):
            elements.append(CHARGE_ROW)
        self.element_names: List[str] = elements

        A = np.zeros((len(elements), len(self.species)))
        for s, sp in enumerate(self.species):
            for symbol, count in sp.elements.items():
                A[elements.index(symbol), s] = count
            if sp.charge != 0:
                A[-1, s] = sp.charge
        empty = [names[s] for s in range(len(names)) if not np.any(A[:, s])]
        if empty:
            raise ValueError(f"species without tracked elements: {', '.join(empty)}")
        self.A = A
        self.A.setflags(write=False)

        self.molar_masses = np.array([sp.molar_mass for sp in self.species])
        self.charges = np.array([sp.charge for sp in self.species], dtype=float)
        self.molar_masses.setflags(write=False)
        self.charges.setflags(write=False)

        nseg = max(len(sp.segments) for sp in self.species)
        self._coeffs = np.zeros((len(self.species), nseg, 9))
        self._joins = np.full((len(self.species), max(nseg - 1, 0)), np.inf)
        for s, sp in enumerate(self.species):
            for k, segment in enumerate(sp.segments):
                self._coeffs[s, k] = segment.coefficients
                if k < len(sp.segments) - 1:
                    self._joins[s, k] = segment.t_high
        self._t_low = np.array([sp.t_min for sp in self.species])
        self._t_high = np.array([sp.t_max for sp in self.species])

    @classmethod
    def from_database(cls, db: Dict[str, SpeciesRecord], names: Sequence[str]) -> "MixtureModel":
        missing = [name for name in names if name not in db]
        if missing:
            raise UnknownSpeciesError(
                f"unknown species: {', '.join(missing)}; available: {', '.join(sorted(db))}"
            )
        return cls([db[name] for name in names])

    def __len__(self) -> int:
        return len(self.species)

    def __repr__(self) -> str:
        return f"MixtureModel({', '.join(self.names)})"

    @property
    def t_min(self) -> float:
        return float(self._t_low.min())

    @property
    def t_max(self) -> float:
        return float(self._t_high.max())

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownSpeciesError(
                f"species {name!r} not in mixture; available: {', '.join(self.names)}"
            ) from None

    def subset(self, mask: np.ndarray) -> "MixtureModel":
        return MixtureModel([sp for sp, keep in zip(self.species, mask) if keep])

    def standard_props(self, T: float) -> SpeciesProps:
        """Vectorised standard-state properties for every species at T (arrays, molar units)"""
        if not T > 0.0:
            raise ValueError(f"temperature must be positive, got {T}")
        t_eval = np.clip(T, self._t_low, self._t_high)
        flags = t_eval != T
        idx = (self._joins < t_eval[:, None]).sum(axis=1)
        c = self._coeffs[np.arange(len(self.species)), idx]
        cp = _cp_over_r(c, t_eval) * R_U
        h = _h_over_rt(c, t_eval) * R_U * t_eval
        s = _s_over_r(c, t_eval) * R_U
        return SpeciesProps(cp=cp, h=h, s=s, g=h - T * s, out_of_range=flags)


@dataclass
class GasState:
    """Thermodynamic state with composition as specific molarities ns (mol/kg)"""
    T: float
    p: float
    rho: float
    ns: np.ndarray

    @property
    def n(self) -> float:
        return float(np.sum(self.ns))

    @property
    def X(self) -> np.ndarray:
        return X_from_n(self.ns)

    @property
    def M_mix(self) -> float:
        return 1.0 / self.n

    def Y(self, model: MixtureModel) -> np.ndarray:
        return Y_from_n(self.ns, model.molar_masses)

    def copy(self) -> "GasState":
        return GasState(T=self.T, p=self.p, rho=self.rho, ns=np.array(self.ns, dtype=float))

    @classmethod
    def from_T_ns(cls, T: float, ns: np.ndarray, p: Optional[float] = None,
                  rho: Optional[float] = None) -> "GasState":
        """Complete a state from T, ns and exactly one of p or rho via p = rho n R T"""
        ns = np.asarray(ns, dtype=float)
        n = float(np.sum(ns))
        if (p is None) == (rho is None):
            raise ValueError("give exactly one of p or rho")
        if p is None:
            p = rho * n * R_U * T
        else:
            rho = p / (n * R_U * T)
        return cls(T=float(T), p=float(p), rho=float(rho), ns=ns)

    @classmethod
    def from_TpX(cls, model: MixtureModel, T: float, p: float, X) -> "GasState":
        return cls.from_T_ns(T, n_from_X(X, model.molar_masses), p=p)


@dataclass
class MixtureProps:
    """Specific (per kg) mixture properties; frozen cp, cv and gamma"""
    e: float
    h: float
    s: float
    g: float
    cp: float
    cv: float
    gamma_frozen: float
    M_mix: float
    out_of_range: bool


def mixture_props(model: MixtureModel, state: GasState) -> MixtureProps:
    props = model.standard_props(state.T)
    ns = np.asarray(state.ns, dtype=float)
    n = float(np.sum(ns))
    present = ns > 0.0
    h = float(np.dot(ns, props.h))
    e = h - n * R_U * state.T
    s_mol = props.s[present] - R_U * np.log(ns[present] / n) - R_U * np.log(state.p / P_REF)
    s = float(np.dot(ns[present], s_mol))
    cp = float(np.dot(ns, props.cp))
    cv = cp - n * R_U
    return MixtureProps(
        e=e,
        h=h,
        s=s,
        g=h - state.T * s,
        cp=cp,
        cv=cv,
        gamma_frozen=cp / cv,
        M_mix=1.0 / n,
        out_of_range=bool(np.any(props.out_of_range[present])),
    )


def frozen_sound_speed(model: MixtureModel, state: GasState) -> float:
    props = mixture_props(model, state)
    return float(np.sqrt(props.gamma_frozen * state.n * R_U * state.T))


# ---------------------------------------------------------------------------
# Composition conversions
# ---------------------------------------------------------------------------

def _nonnegative(values, label: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if np.any(arr < 0.0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{label} must be finite and non-negative")
    if not np.sum(arr) > 0.0:
        raise ValueError(f"{label} must have a positive sum")
    return arr


def X_from_n(ns) -> np.ndarray:
    ns = _nonnegative(ns, "specific molarities")
    return ns / np.sum(ns)


def Y_from_n(ns, M) -> np.ndarray:
    ns = _nonnegative(ns, "specific molarities")
    return np.asarray(M, dtype=float) * ns


def n_from_X(X, M) -> np.ndarray:
    """Mole fractions (normalised here) to specific molarities, mol/kg"""
    X = _nonnegative(X, "mole fractions")
    X = X / np.sum(X)
    M0 = float(np.dot(X, M))
    return X / M0


def n_from_Y(Y, M) -> np.ndarray:
    Y = _nonnegative(Y, "mass fractions")
    return (Y / np.sum(Y)) / np.asarray(M, dtype=float)
