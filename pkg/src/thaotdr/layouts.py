"""Reference fibre layouts used by tests, the acceptance suite and the CLI.

The Alice- and Bob-like layouts are synthetic stand-ins for the measured
setups.  Their strongest reflector is configured at -49 dB near 1575 nm
and -53 dB near 1625 nm respectively.  A Mach-Zehnder interferometer is
represented by three reflector copies: the long and short arms combine
into four return paths, two of which have equal delays.
"""

from __future__ import annotations

import numpy as np

from .simulator import FiberComponent, FiberLayout
from .spectral import Kind, Spectrum, Unit, WavelengthGrid

_GRID = WavelengthGrid.arange(1000.0, 2000.0, 25.0)


def flat_reflectance(value_dB: float) -> Spectrum:
    return Spectrum(_GRID, np.full(len(_GRID), float(value_dB)), Unit.DB, Kind.REFLECTANCE)


def peaked_reflectance(peak_dB: float, peak_nm: float, curvature_dB: float = 3.0,
                       half_span_nm: float = 350.0) -> Spectrum:
    """Parabolic (in dB) reflectance with its maximum ``peak_dB`` at ``peak_nm``."""
    x = (_GRID.points_nm - peak_nm) / half_span_nm
    return Spectrum(_GRID, peak_dB - curvature_dB * x**2, Unit.DB, Kind.REFLECTANCE)


def insertion_loss(value_dB: float) -> Spectrum:
    return Spectrum(_GRID, np.full(len(_GRID), float(value_dB)), Unit.DB, Kind.TRANSMITTANCE)


def mzi_components(position_m: float, spacing_m: float, reflectance: Spectrum,
                   label: str = "MZI") -> list[FiberComponent]:
    """Triple-peak pattern of a reflector seen through an unbalanced interferometer.

    Each of the four return paths carries a quarter of the reflected
    power; the two equal-delay paths stack at ``position_m + spacing_m``.
    """
    quarter = Spectrum(reflectance.grid, reflectance.values - 10.0 * np.log10(4.0),
                       Unit.DB, Kind.REFLECTANCE)
    return [
        FiberComponent(position_m, quarter, label=f"{label} short-short"),
        FiberComponent(position_m + spacing_m, quarter, label=f"{label} short-long"),
        FiberComponent(position_m + spacing_m, quarter, label=f"{label} long-short"),
        FiberComponent(position_m + 2 * spacing_m, quarter, label=f"{label} long-long"),
    ]


def two_reflector_layout() -> FiberLayout:
    """-50 dB at 9 m and -53 dB at 11 m on a 12 m lossless fibre."""
    return FiberLayout(
        components=(
            FiberComponent(9.0, flat_reflectance(-50.0), label="connector A"),
            FiberComponent(11.0, flat_reflectance(-53.0), label="connector B"),
        ),
        total_length_m=12.0,
    )


def single_reflector_layout(position_m: float = 9.0, reflectance_dB: float = -50.0,
                            total_length_m: float | None = None) -> FiberLayout:
    return FiberLayout(
        components=(FiberComponent(position_m, flat_reflectance(reflectance_dB),
                                   label="reflector"),),
        total_length_m=position_m + 1.0 if total_length_m is None else total_length_m,
    )


def alice_like_layout() -> FiberLayout:
    comps = [
        FiberComponent(0.5, flat_reflectance(-62.0), insertion_loss(-0.05), "input adapter"),
        FiberComponent(2.0, peaked_reflectance(-66.0, 1400.0), insertion_loss(-0.1), "filter"),
        *mzi_components(4.0, 0.5, flat_reflectance(-56.0)),
        FiberComponent(7.0, flat_reflectance(-60.0), insertion_loss(-0.05), "PM connector"),
        FiberComponent(9.0, peaked_reflectance(-49.0, 1575.0), insertion_loss(-0.2),
                       "connector after MZI"),
        FiberComponent(10.5, flat_reflectance(-64.0), label="laser adapter"),
    ]
    return FiberLayout(components=tuple(comps), total_length_m=12.0)


def bob_like_layout() -> FiberLayout:
    comps = [
        FiberComponent(0.5, flat_reflectance(-63.0), insertion_loss(-0.05), "input adapter"),
        FiberComponent(3.0, flat_reflectance(-61.0), insertion_loss(-0.1), "ILP"),
        *mzi_components(6.0, 0.5, flat_reflectance(-57.0)),
        FiberComponent(9.0, flat_reflectance(-62.0), insertion_loss(-0.05), "PM connector"),
        FiberComponent(11.0, peaked_reflectance(-53.0, 1625.0), insertion_loss(-0.2),
                       "connector after MZI"),
    ]
    return FiberLayout(components=tuple(comps), total_length_m=13.0)


REFERENCE_LAYOUTS = {
    "alice": alice_like_layout,
    "bob": bob_like_layout,
    "two-reflector": two_reflector_layout,
    "single": single_reflector_layout,
    "empty": lambda: FiberLayout(components=(), total_length_m=0.0),
}
