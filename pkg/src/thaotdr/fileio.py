"""File formats: layouts, traces, scan directories, maps and reports.

All writers are deterministic.  JSON is emitted with sorted keys and a
fixed indent, floats use their shortest round-trip representation and
non-finite values are spelled ``"inf"``, ``"-inf"`` or ``"nan"`` so the
output stays standard JSON.  Nothing time-dependent is recorded.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .analysis import CalibrationData, ReflectanceMap
from .errors import ConfigurationError, ValidationError
from .layouts import REFERENCE_LAYOUTS
from .security import LeakageReport
from .simulator import (
    BroadbandScan,
    FiberComponent,
    FiberLayout,
    Mode,
    OtdrTrace,
    default_rayleigh_spectrum,
)
from .spectral import (
    GRID_SANITY_NM,
    Kind,
    Spectrum,
    Unit,
    WavelengthGrid,
    read_spectrum,
    write_spectrum,
)

SCAN_FORMAT = "thaotdr-scan/1"
MANIFEST_NAME = "manifest.json"
TRACE_HEADER = ["bin_index", "time_s", "distance_m", "counts"]
LEAKAGE_HEADER = ["wavelength_nm", "p_eve_dbm", "mu_eve", "chi_bits"]
REFERENCE_PREFIX = "reference:"


# ----------------------------------------------------------------------------
# JSON

def _plain(obj):
    """Recursively convert to JSON-safe builtins with spelled-out non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None


def parse_float(value, what: str = "value") -> float:
    """Accept numbers and the spelled-out non-finite strings written by :func:`dumps`."""
    if isinstance(value, str) and value.strip().lower() in ("inf", "-inf", "nan"):
        return float(value)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{what}: expected a number, got {value!r}") from None


def _fmt(x) -> str:
    return repr(float(x)) if not isinstance(x, (int, np.integer)) else str(int(x))


# ----------------------------------------------------------------------------
# layouts

def _spectrum_field(entry: dict, base: Path, key: str, kind: Kind, default=None,
                    where: str = "") -> Spectrum | None:
    """Spectrum given as ``<key>_dB`` (constant) or ``<key>_csv`` (file)."""
    if f"{key}_csv" in entry:
        return read_spectrum(base / entry[f"{key}_csv"], unit=Unit.DB, kind=kind)
    if f"{key}_dB" in entry:
        value = parse_float(entry[f"{key}_dB"], f"{where}{key}_dB")
        return Spectrum.constant(value, unit=Unit.DB, kind=kind)
    return default


def layout_from_dict(data: dict, base: Path = Path(".")) -> FiberLayout:
    """Build a layout from its JSON form.

    Example::

        {"total_length_m": 12, "group_index": 1.468,
         "rayleigh_dB": -80,
         "components": [{"position_m": 9, "reflectance_dB": -50, "label": "A"},
                        {"position_m": 11, "reflectance_csv": "b.csv",
                         "insertion_loss_dB": -0.1}]}

    ``rayleigh_dB`` / ``rayleigh_csv`` override the default backscatter
    spectrum; ``"rayleigh": null`` disables it.
    """
    comps = []
    for i, entry in enumerate(data.get("components", [])):
        where = f"components[{i}]."
        if "position_m" not in entry:
            raise ConfigurationError(f"{where}position_m is required")
        refl = _spectrum_field(entry, base, "reflectance", Kind.REFLECTANCE, where=where)
        if refl is None:
            raise ConfigurationError(f"{where}reflectance_dB or reflectance_csv is required")
        loss = _spectrum_field(entry, base, "insertion_loss", Kind.TRANSMITTANCE,
                               default=Spectrum.constant(0.0, unit=Unit.DB,
                                                         kind=Kind.TRANSMITTANCE),
                               where=where)
        comps.append(FiberComponent(parse_float(entry["position_m"], f"{where}position_m"),
                                    refl, loss, str(entry.get("label", f"component {i}"))))
    if "rayleigh" in data and data["rayleigh"] is None:
        rayleigh = None
    else:
        rayleigh = _spectrum_field(data, base, "rayleigh", Kind.OTHER,
                                   default=default_rayleigh_spectrum())
    total = data.get("total_length_m")
    if total is None:
        total = max([c.position_m for c in comps], default=0.0)
    kwargs = {}
    if "group_index" in data:
        kwargs["group_index"] = parse_float(data["group_index"], "group_index")
    return FiberLayout(tuple(comps), parse_float(total, "total_length_m"),
                       rayleigh_backscatter_dB_per_pulse=rayleigh, **kwargs)


def load_layout(ref, base: Path = Path(".")) -> FiberLayout:
    """Layout from ``reference:<name>``, a JSON file path or an inline dict."""
    if isinstance(ref, dict):
        return layout_from_dict(ref, base)
    ref = str(ref)
    if ref.startswith(REFERENCE_PREFIX):
        name = ref[len(REFERENCE_PREFIX):]
        if name not in REFERENCE_LAYOUTS:
            raise ConfigurationError(
                f"unknown reference layout {name!r}; choose from {sorted(REFERENCE_LAYOUTS)}")
        return REFERENCE_LAYOUTS[name]()
    path = Path(ref)
    if not path.is_absolute():
        path = base / path
    data = read_json(path)
    try:
        return layout_from_dict(data, path.parent)
    except ValidationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None


# ----------------------------------------------------------------------------
# traces and scans

def write_trace(path, trace: OtdrTrace) -> None:
    """CSV ``bin_index,time_s,distance_m,counts``; integer counts stay integers."""
    integer = np.issubdtype(trace.counts.dtype, np.integer)
    times = trace.times_s()
    dists = trace.distances_m()
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for i, (t, d, c) in enumerate(zip(times, dists, trace.counts)):
            w.writerow([i, repr(float(t)), repr(float(d)),
                        str(int(c)) if integer else repr(float(c))])


def read_trace_counts(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"trace file not found: {path}")
    counts = []
    integer = True
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != TRACE_HEADER:
            raise ConfigurationError(f"{path}:1: expected header {','.join(TRACE_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise ConfigurationError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            if int(row[0]) != lineno - 2:
                raise ConfigurationError(f"{path}:{lineno}: bin_index out of sequence")
            cell = row[3].strip()
            try:
                if integer and cell.lstrip("-").isdigit():
                    counts.append(int(cell))
                else:
                    integer = False
                    counts.append(float(cell))
            except ValueError:
                raise ConfigurationError(f"{path}:{lineno}: non-numeric count {cell!r}") from None
    if not counts:
        raise ConfigurationError(f"{path}: no data rows")
    return np.array(counts, dtype=np.int64 if integer else float)


def calibration_to_dict(cal: CalibrationData) -> dict:
    return {
        "n_in_cps": cal.n_in_cps,
        "att_in_dB": cal.att_in_dB,
        "att_out_dB": cal.att_out_dB,
        "t12_dB": cal.t12_dB,
        "t23_dB": cal.t23_dB,
        "quantum_efficiency": cal.quantum_efficiency,
    }


def calibration_from_dict(d: dict) -> CalibrationData:
    try:
        return CalibrationData(
            n_in_cps=parse_float(d["n_in_cps"], "n_in_cps"),
            att_in_dB=parse_float(d.get("att_in_dB", 0.0), "att_in_dB"),
            att_out_dB=parse_float(d.get("att_out_dB", 0.0), "att_out_dB"),
            t12_dB=parse_float(d.get("t12_dB", 0.0), "t12_dB"),
            t23_dB=parse_float(d.get("t23_dB", 0.0), "t23_dB"),
            quantum_efficiency=(None if d.get("quantum_efficiency") is None
                                else parse_float(d["quantum_efficiency"], "quantum_efficiency")),
        )
    except KeyError as exc:
        raise ConfigurationError(f"calibration record lacks {exc.args[0]!r}") from None


def write_scan(directory, scan: BroadbandScan, calibrations, extra: dict) -> Path:
    """Write one CSV per trace plus ``manifest.json``; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for trace, cal in zip(scan.traces, calibrations):
        name = f"trace_{trace.wavelength_nm:08.3f}nm.csv"
        write_trace(directory / name, trace)
        meta = trace.metadata()
        if trace.mode is Mode.ANALYTIC:
            meta.pop("seed", None)
        entries.append({"file": name, "metadata": meta,
                        "calibration": calibration_to_dict(cal)})
    manifest = {"format": SCAN_FORMAT, "traces": entries, **extra}
    path = directory / MANIFEST_NAME
    write_json(path, manifest)
    return path


def read_scan(directory) -> tuple[BroadbandScan, list[CalibrationData], dict]:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    manifest = read_json(manifest_path)
    if manifest.get("format") != SCAN_FORMAT:
        raise ConfigurationError(f"{manifest_path}: unsupported format {manifest.get('format')!r}")
    traces, cals = [], []
    for i, entry in enumerate(manifest.get("traces", [])):
        try:
            meta = dict(entry["metadata"])
            counts = read_trace_counts(directory / entry["file"])
            traces.append(OtdrTrace(
                wavelength_nm=parse_float(meta["wavelength_nm"]),
                bin_width_s=parse_float(meta["bin_width_s"]),
                counts=counts,
                duration_s=parse_float(meta["duration_s"]),
                f_pulse_Hz=parse_float(meta["f_pulse_Hz"]),
                group_index=parse_float(meta.get("group_index", 1.468)),
                dead_time_s=parse_float(meta.get("dead_time_s", 0.0)),
                att_in_dB=parse_float(meta.get("att_in_dB", 0.0)),
                att_out_dB=parse_float(meta.get("att_out_dB", 0.0)),
                mode=meta.get("mode", "monte_carlo"),
                seed=meta.get("seed"),
                light_speed_m_per_s=parse_float(meta.get("light_speed_m_per_s", 2.99792458e8)),
            ))
            cals.append(calibration_from_dict(entry["calibration"]))
        except KeyError as exc:
            raise ConfigurationError(
                f"{manifest_path}: traces[{i}] lacks {exc.args[0]!r}") from None
    if not traces:
        raise ConfigurationError(f"{manifest_path}: no traces listed")
    grid = WavelengthGrid(np.array([t.wavelength_nm for t in traces]))
    return BroadbandScan(grid, tuple(traces)), cals, manifest


# ----------------------------------------------------------------------------
# maps and reports

def write_heatmap(path, rmap: ReflectanceMap) -> None:
    """First row: distances (m); first column: wavelengths (nm); cells in dB."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["wavelength_nm\\distance_m", *(repr(float(d)) for d in rmap.distances_m)])
        for wl, row in zip(rmap.grid, rmap.heatmap_dB):
            w.writerow([repr(float(wl)),
                        *("nan" if not np.isfinite(v) else repr(float(v)) for v in row)])


def write_reflectance_map(directory, rmap: ReflectanceMap, assumptions: dict) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_heatmap(directory / "heatmap.csv", rmap)
    write_spectrum(directory / "worst_case.csv", rmap.worst_case)
    write_spectrum(directory / "noise_floor.csv", rmap.noise_floor)
    write_json(directory / "peaks.json", {
        "assumptions": assumptions,
        "wavelengths": rmap.peak_report(),
        "approximate_wavelengths_nm": [float(wl) for wl, a in zip(rmap.grid, rmap.approximate)
                                       if a],
    })


def write_leakage(directory, report: LeakageReport, assumptions: dict) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with (directory / "leakage.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LEAKAGE_HEADER)
        for r in report.records:
            w.writerow([_fmt(r.wavelength_nm), _fmt(r.p_eve_dBm), _fmt(r.mu_eve),
                        _fmt(r.chi_upper)])
    summary = report.summary()
    summary["assumptions"] = {**assumptions, **summary["assumptions"]}
    write_json(directory / "leakage_summary.json", summary)


def constant_or_spectrum(value, base: Path, kind: Kind, unit: Unit = Unit.DB,
                         what: str = "value") -> float | Spectrum:
    """Scalar, or a CSV path relative to ``base``."""
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            pass
        path = Path(value)
        if not path.is_absolute():
            path = base / path
        return read_spectrum(path, unit=unit, kind=kind)
    raise ConfigurationError(f"{what}: expected a number or a CSV path, got {value!r}")


def as_spectrum(value: float | Spectrum, kind: Kind, unit: Unit = Unit.DB) -> Spectrum:
    if isinstance(value, Spectrum):
        return value
    return Spectrum(WavelengthGrid(np.array(GRID_SANITY_NM)), np.full(2, float(value)),
                    unit, kind)
