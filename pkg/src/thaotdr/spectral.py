"""Wavelength-indexed spectra, decibel arithmetic and physical constants.

Every other module in the package passes spectral quantities around as
:class:`Spectrum` objects.  Values are stored as read-only numpy arrays,
interpolation is piecewise linear and never extrapolates.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError, RangeError, ValidationError

#: Reflectance of a surface that returns nothing, in dB.
BELOW_FLOOR = float("-inf")

GRID_SANITY_NM = (200.0, 2500.0)


@dataclass(frozen=True)
class PhysicalConstants:
    """Planck constant and speed of light used for photon-number conversion."""

    planck_J_per_Hz: float
    light_speed_m_per_s: float
    name: str = "custom"

    def __post_init__(self):
        if not (self.planck_J_per_Hz > 0 and self.light_speed_m_per_s > 0):
            raise DomainError("physical constants must be strictly positive")


CODATA = PhysicalConstants(6.62607015e-34, 2.99792458e8, "codata")
PAPER_ROUNDED = PhysicalConstants(6.63e-34, 3.0e8, "paper")

_CONSTANT_SETS = {"codata": CODATA, "paper": PAPER_ROUNDED}


def constants_by_name(name: str) -> PhysicalConstants:
    """Return the constant set called ``"codata"`` or ``"paper"``."""
    try:
        return _CONSTANT_SETS[name.lower()]
    except KeyError:
        raise ConfigurationError(
            f"unknown constant set {name!r}; expected one of {sorted(_CONSTANT_SETS)}"
        ) from None


class Unit(str, Enum):
    DB = "dB"
    DBM = "dBm"
    LINEAR = "linear"
    FRACTION = "fraction"


class Kind(str, Enum):
    REFLECTANCE = "reflectance"
    TRANSMITTANCE = "transmittance"
    EFFICIENCY = "efficiency"
    POWER = "power"
    OTHER = "other"


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class WavelengthGrid:
    """Strictly increasing wavelengths in nanometres."""

    points_nm: np.ndarray

    def __post_init__(self):
        pts = _readonly(np.atleast_1d(self.points_nm))
        if pts.ndim != 1 or pts.size == 0:
            raise ValidationError("wavelength grid must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("wavelength grid contains non-finite values")
        if np.any(np.diff(pts) <= 0):
            raise ValidationError("wavelength grid must be strictly increasing (no duplicates)")
        lo, hi = GRID_SANITY_NM
        if pts[0] < lo or pts[-1] > hi:
            raise ValidationError(
                f"wavelengths must lie within [{lo:g}, {hi:g}] nm, got {pts[0]:g}..{pts[-1]:g}"
            )
        object.__setattr__(self, "points_nm", pts)

    @classmethod
    def arange(cls, start_nm: float, stop_nm: float, step_nm: float) -> "WavelengthGrid":
        """Grid from ``start_nm`` to ``stop_nm`` inclusive in steps of ``step_nm``."""
        if step_nm <= 0:
            raise DomainError("grid step must be positive")
        n = int(math.floor((stop_nm - start_nm) / step_nm + 1e-9)) + 1
        return cls(start_nm + step_nm * np.arange(n))

    def __len__(self) -> int:
        return int(self.points_nm.size)

    def __iter__(self):
        return iter(float(x) for x in self.points_nm)

    @property
    def bounds(self) -> tuple[float, float]:
        return float(self.points_nm[0]), float(self.points_nm[-1])


@dataclass(frozen=True)
class Spectrum:
    """Values aligned to a :class:`WavelengthGrid`.

    dB values may be ``-inf`` to represent a component that reflects or
    transmits nothing.
    """

    grid: WavelengthGrid
    values: np.ndarray
    unit: Unit = Unit.DB
    kind: Kind = Kind.OTHER

    def __post_init__(self):
        if not isinstance(self.grid, WavelengthGrid):
            object.__setattr__(self, "grid", WavelengthGrid(self.grid))
        object.__setattr__(self, "unit", Unit(self.unit))
        object.__setattr__(self, "kind", Kind(self.kind))
        vals = _readonly(np.atleast_1d(self.values))
        if vals.shape != self.grid.points_nm.shape:
            raise ValidationError(
                f"spectrum has {vals.size} values for {len(self.grid)} grid points"
            )
        if np.any(np.isnan(vals)) or np.any(vals == np.inf):
            raise ValidationError("spectrum values must not be NaN or +inf")
        unit, kind = self.unit, self.kind
        if unit in (Unit.LINEAR, Unit.FRACTION):
            if np.any(vals < 0) or np.any(~np.isfinite(vals)):
                raise ValidationError("linear spectrum values must be finite and >= 0")
            if (unit is Unit.FRACTION or kind is Kind.EFFICIENCY) and np.any(vals > 1):
                raise ValidationError("fraction/efficiency values must be <= 1")
        if unit is Unit.DB and kind in (Kind.REFLECTANCE, Kind.TRANSMITTANCE):
            if np.any(vals > 0):
                raise ValidationError(f"{kind.value} in dB must be <= 0 at every wavelength")
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, value: float, grid: WavelengthGrid | None = None, unit=Unit.DB,
                 kind=Kind.OTHER) -> "Spectrum":
        """Wavelength-independent spectrum spanning ``grid`` (default: the sanity window)."""
        if grid is None:
            grid = WavelengthGrid(np.array(GRID_SANITY_NM))
        return cls(grid, np.full(len(grid), float(value)), unit, kind)

    @property
    def wavelengths_nm(self) -> np.ndarray:
        return self.grid.points_nm

    def covers(self, wavelength_nm: float) -> bool:
        lo, hi = self.grid.bounds
        return lo <= wavelength_nm <= hi

    def __call__(self, wavelength_nm):
        return sample(self, wavelength_nm)

    def to_linear(self) -> "Spectrum":
        """Convert a dB spectrum to linear ratios (dBm becomes watts)."""
        if self.unit is Unit.DB:
            return Spectrum(self.grid, db_to_linear_array(self.values), Unit.LINEAR, self.kind)
        if self.unit is Unit.DBM:
            return Spectrum(self.grid, 1e-3 * db_to_linear_array(self.values), Unit.LINEAR,
                            self.kind)
        return self

    def to_db(self) -> "Spectrum":
        if self.unit in (Unit.DB, Unit.DBM):
            return self
        with np.errstate(divide="ignore"):
            vals = 10.0 * np.log10(self.values)
        return Spectrum(self.grid, vals, Unit.DB, self.kind)


def db_to_linear(value_db: float) -> float:
    """Return ``10**(value_db/10)``; ``-inf`` maps to 0."""
    if math.isnan(value_db) or value_db == math.inf:
        raise DomainError(f"cannot convert {value_db!r} dB to linear")
    if value_db == -math.inf:
        return 0.0
    return 10.0 ** (value_db / 10.0)


def db_to_linear_array(values_db) -> np.ndarray:
    vals = np.asarray(values_db, dtype=float)
    if np.any(np.isnan(vals)) or np.any(vals == np.inf):
        raise DomainError("cannot convert NaN or +inf dB to linear")
    return np.power(10.0, vals / 10.0)


def linear_to_db(value: float) -> float:
    """Return ``10*log10(value)``; zero maps to ``-inf``."""
    if not math.isfinite(value) or value < 0:
        raise DomainError(f"cannot express {value!r} in dB")
    if value == 0:
        return BELOW_FLOOR
    return 10.0 * math.log10(value)


def dbm_to_watts(value_dbm: float) -> float:
    return 1e-3 * db_to_linear(value_dbm)


def watts_to_dbm(power_w: float) -> float:
    return linear_to_db(power_w / 1e-3)


def _interp_scalar(x: np.ndarray, y: np.ndarray, q: float) -> float:
    i = int(np.searchsorted(x, q, side="left"))
    if i < x.size and x[i] == q:
        return float(y[i])
    x0, x1 = x[i - 1], x[i]
    y0, y1 = y[i - 1], y[i]
    if y0 == y1:
        return float(y0)
    if not (math.isfinite(y0) and math.isfinite(y1)):
        # a -inf node drags the whole open interval to -inf
        return BELOW_FLOOR
    t = (q - x0) / (x1 - x0)
    return float(y0 + t * (y1 - y0))


def sample(spectrum: Spectrum, wavelength_nm):
    """Linearly interpolate ``spectrum`` at ``wavelength_nm``.

    Accepts a scalar or an array of wavelengths.  Exact at grid nodes.

    Raises
    ------
    RangeError
        If any requested wavelength lies outside the spectrum's grid.
    """
    x = spectrum.grid.points_nm
    y = spectrum.values
    q = np.asarray(wavelength_nm, dtype=float)
    if np.any(np.isnan(q)):
        raise DomainError("wavelength is NaN")
    lo, hi = x[0], x[-1]
    if np.any(q < lo) or np.any(q > hi):
        raise RangeError(
            f"wavelength {wavelength_nm} nm outside spectrum range [{lo:g}, {hi:g}] nm"
        )
    if q.ndim == 0:
        return _interp_scalar(x, y, float(q))
    return np.array([_interp_scalar(x, y, float(v)) for v in q.ravel()]).reshape(q.shape)


def photon_energy_J(wavelength_nm: float, constants: PhysicalConstants = CODATA) -> float:
    """Photon energy ``h*c/lambda`` in joules."""
    if not (wavelength_nm > 0) or not math.isfinite(wavelength_nm):
        raise DomainError(f"wavelength must be positive, got {wavelength_nm!r}")
    return constants.planck_J_per_Hz * constants.light_speed_m_per_s / (wavelength_nm * 1e-9)


def common_grid(*spectra: Spectrum) -> WavelengthGrid:
    """Union of all grid nodes lying inside the range every spectrum covers."""
    if not spectra:
        raise ConfigurationError("no spectra given")
    lo = max(s.grid.bounds[0] for s in spectra)
    hi = min(s.grid.bounds[1] for s in spectra)
    if lo > hi:
        raise ConfigurationError(
            f"spectra share no common wavelength range (max start {lo:g} nm > min end {hi:g} nm)"
        )
    nodes = np.unique(np.concatenate([s.grid.points_nm for s in spectra]))
    nodes = nodes[(nodes >= lo) & (nodes <= hi)]
    return WavelengthGrid(nodes)


def resample(spectrum: Spectrum, grid: WavelengthGrid) -> Spectrum:
    return Spectrum(grid, sample(spectrum, grid.points_nm), spectrum.unit, spectrum.kind)


# ----------------------------------------------------------------------------
# CSV I/O

def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def read_spectrum(path, unit=None, kind=None) -> Spectrum:
    """Read a ``wavelength_nm,value`` CSV.

    ``unit`` and ``kind`` come from the arguments or, when omitted, from a
    sidecar ``<file>.json`` holding ``{"unit": ..., "kind": ...}``.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"spectrum file not found: {path}")
    meta = {}
    sidecar = _sidecar_path(path)
    if sidecar.is_file():
        try:
            meta = json.loads(sidecar.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{sidecar}: invalid JSON ({exc})") from None
    unit = unit if unit is not None else meta.get("unit")
    kind = kind if kind is not None else meta.get("kind", "other")
    if unit is None:
        raise ConfigurationError(
            f"{path}: unit not declared (pass it explicitly or add {sidecar.name})"
        )
    wl, vals = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["wavelength_nm", "value"]:
            raise ConfigurationError(f"{path}:1: expected header 'wavelength_nm,value'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ConfigurationError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                w, v = float(row[0]), float(row[1])
            except ValueError:
                raise ConfigurationError(f"{path}:{lineno}: non-numeric value in {row!r}") from None
            if wl and w <= wl[-1]:
                raise ConfigurationError(
                    f"{path}:{lineno}: wavelengths must be strictly increasing ({w:g} after {wl[-1]:g})"
                )
            wl.append(w)
            vals.append(v)
    if not wl:
        raise ConfigurationError(f"{path}: no data rows")
    try:
        return Spectrum(WavelengthGrid(np.array(wl)), np.array(vals), unit, kind)
    except (ValidationError, ValueError) as exc:
        raise ConfigurationError(f"{path}: {exc}") from None


def write_spectrum(path, spectrum: Spectrum, sidecar: bool = True) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["wavelength_nm", "value"])
        for x, y in zip(spectrum.grid.points_nm, spectrum.values):
            w.writerow([repr(float(x)), repr(float(y))])
    if sidecar:
        _sidecar_path(path).write_text(
            json.dumps({"unit": spectrum.unit.value, "kind": spectrum.kind.value},
                       sort_keys=True) + "\n",
            encoding="utf-8",
        )
