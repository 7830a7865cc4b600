"""Calibrated reflectance, peaks, resolution and noise floor from OTDR traces.

Reflectance follows the calibration relation::

    R[dB] = 10*log10(N_out / N_in) + Att_in - Att_out - T12 - T23

with every attenuation and transmittance stored as a value <= 0 dB and
entered exactly as written.  ``Att_in`` is the attenuator setting used for
the input reference ``N_in`` (attenuator output wired to the detector) and
``Att_out`` is the total attenuation in place while the trace is acquired.
``N_out`` and ``N_in`` are both rates in counts per second.

A sign slip in any of these terms biases R silently, so
:func:`simulated_calibration` builds the record straight from a simulator
configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage, stats

from .errors import ConfigurationError, DomainError, ValidationError
from .simulator import (
    DEFAULT_PULSE_FWHM_S,
    AcquisitionConfig,
    BroadbandScan,
    OtdrTrace,
    SpadModel,
    reference_attenuation,
    reference_input_rate,
)
from .spectral import (
    BELOW_FLOOR,
    CODATA,
    Kind,
    PhysicalConstants,
    Spectrum,
    Unit,
    WavelengthGrid,
    sample,
)

DEFAULT_SNR_THRESHOLD = 5.0
DEFAULT_BACKGROUND_WINDOW = 41
APPROXIMATE_EFFICIENCY = 0.01


@dataclass(frozen=True)
class CalibrationData:
    n_in_cps: float
    att_in_dB: float = 0.0
    att_out_dB: float = 0.0
    t12_dB: float = 0.0
    t23_dB: float = 0.0
    quantum_efficiency: float | None = None

    def __post_init__(self):
        if not (self.n_in_cps > 0) or not math.isfinite(self.n_in_cps):
            raise ValidationError(f"input reference rate must be positive, got {self.n_in_cps!r}")
        for name in ("att_in_dB", "att_out_dB", "t12_dB", "t23_dB"):
            if getattr(self, name) > 0:
                raise ValidationError(f"{name} must be <= 0 dB")

    @property
    def offset_dB(self) -> float:
        """Everything in the calibration relation except the count ratio."""
        return self.att_in_dB - self.att_out_dB - self.t12_dB - self.t23_dB


@dataclass(frozen=True)
class Peak:
    distance_m: float
    bin_range: tuple[int, int]
    amplitude_counts: float
    reflectance_dB: float | None
    fwhm_m: float
    snr_linear: float
    centre_bin: float
    label: str | None = None

    def to_dict(self) -> dict:
        return {
            "distance_m": self.distance_m,
            "bin_range": list(self.bin_range),
            "amplitude_counts": self.amplitude_counts,
            "reflectance_dB": self.reflectance_dB,
            "fwhm_m": self.fwhm_m,
            "snr_linear": self.snr_linear,
            "centre_bin": self.centre_bin,
            "label": self.label,
        }


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Per-bin expected background counts from a running median."""

    background: np.ndarray

    @classmethod
    def from_trace(cls, trace: OtdrTrace, window_bins: int = DEFAULT_BACKGROUND_WINDOW
                   ) -> "NoiseModel":
        bg = ndimage.median_filter(np.asarray(trace.counts, dtype=float),
                                   size=window_bins, mode="wrap")
        return cls(bg)

    def sigma(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.background, 1.0))


@dataclass(frozen=True, eq=False)
class ReflectanceMap:
    grid: WavelengthGrid
    peaks: tuple[tuple[Peak, ...], ...]
    worst_case: Spectrum
    noise_floor: Spectrum
    approximate: tuple[bool, ...]
    heatmap_dB: np.ndarray
    distances_m: np.ndarray

    def peak_report(self) -> list[dict]:
        return [
            {
                "wavelength_nm": float(wl),
                "approximate": approx,
                "noise_floor_dB": float(floor),
                "peaks": [p.to_dict() for p in peaks],
            }
            for wl, peaks, approx, floor in zip(self.grid, self.peaks, self.approximate,
                                               self.noise_floor.values)
        ]


# ----------------------------------------------------------------------------
# calibration relation

def distance_from_delay(t_s: float, group_index: float,
                        constants: PhysicalConstants = CODATA) -> float:
    """One-way fibre distance of a round-trip delay."""
    if not (t_s >= 0):
        raise DomainError(f"delay must be >= 0, got {t_s!r}")
    return t_s * constants.light_speed_m_per_s / (2.0 * group_index)


def estimate_reflectance(peak_counts: float, duration_s: float, cal: CalibrationData,
                         dead_time_correction: float = 1.0) -> float:
    """Reflectance in dB of a peak holding ``peak_counts`` over ``duration_s``.

    Returns ``-inf`` (below floor) when there are no counts.
    """
    if not (duration_s > 0):
        raise ValidationError("duration must be positive")
    if peak_counts <= 0:
        return BELOW_FLOOR
    rate = peak_counts / duration_s * dead_time_correction
    return 10.0 * math.log10(rate / cal.n_in_cps) + cal.offset_dB


def dead_time_correction(trace: OtdrTrace) -> float:
    """Factor restoring true rates from observed ones, ``1 + R_true * tau_d``."""
    observed = float(np.sum(trace.counts)) / trace.duration_s
    lost = observed * trace.dead_time_s
    if lost >= 1.0:
        raise ValidationError("observed rate saturates the detector dead time")
    return 1.0 / (1.0 - lost)


def simulated_calibration(spad: SpadModel, config: AcquisitionConfig, wavelength_nm: float
                          ) -> CalibrationData:
    """Calibration record matching a simulated acquisition."""
    att_ref = reference_attenuation(config)
    return CalibrationData(
        n_in_cps=reference_input_rate(spad, config, wavelength_nm, att_ref),
        att_in_dB=att_ref,
        att_out_dB=config.att_in_dB + config.att_out_dB,
        t12_dB=float(sample(config.circulator_t12_dB, wavelength_nm)),
        t23_dB=float(sample(config.circulator_t23_dB, wavelength_nm)),
        quantum_efficiency=float(sample(spad.quantum_efficiency, wavelength_nm)),
    )


# ----------------------------------------------------------------------------
# peaks

def _is_integer_trace(trace: OtdrTrace) -> bool:
    c = trace.counts
    return np.issubdtype(c.dtype, np.integer) or bool(np.all(c == np.round(c)))


def _significance(window_counts: np.ndarray, window_bg: np.ndarray, integer: bool
                  ) -> np.ndarray:
    """Gaussian-equivalent z-score of window sums against their expected background."""
    bg = np.maximum(window_bg, 1.0)
    if integer:
        p = stats.poisson.sf(np.ceil(window_counts) - 1, bg)
        with np.errstate(divide="ignore"):
            return np.where(p > 0, stats.norm.isf(np.maximum(p, 1e-300)), np.inf)
    return (window_counts - bg) / np.sqrt(bg)


def _half_max_edges(excess: np.ndarray, i: int, lo: int, hi: int) -> tuple[float, float]:
    """Interpolated half-maximum crossings around bin ``i`` in bin-centre units."""
    half = excess[i] / 2.0
    j = i
    while j > lo and excess[j - 1] >= half:
        j -= 1
    if j > lo:
        a, b = excess[j - 1], excess[j]
        left = (j - 1) + (half - a) / (b - a)
    else:
        left = j - 0.5
    k = i
    while k < hi and excess[k + 1] >= half:
        k += 1
    if k < hi:
        a, b = excess[k], excess[k + 1]
        right = k + (a - half) / (a - b)
    else:
        right = k + 0.5
    return left, right


def detect_peaks(trace: OtdrTrace, floor: NoiseModel | None = None,
                 cal: CalibrationData | None = None,
                 snr_threshold: float = DEFAULT_SNR_THRESHOLD,
                 merge_radius_m: float | None = None,
                 pulse_fwhm_s: float = DEFAULT_PULSE_FWHM_S,
                 labels: Mapping[str, float] | None = None,
                 label_tolerance_m: float = 0.05) -> list[Peak]:
    """Local maxima standing ``snr_threshold`` standard deviations above the floor.

    Significance is judged on the counts summed over a short window around
    each candidate against the running-median background, using Poisson
    tails for integer (Monte-Carlo or measured) traces.  Candidates closer
    than ``merge_radius_m`` (default: one pulse FWHM) are merged.  Each
    peak is integrated, background subtracted, over its centre +/- one
    FWHM, clipped halfway to neighbouring peaks.

    ``labels`` maps component names to expected distances; a peak within
    ``label_tolerance_m`` of one takes its name.
    """
    counts = np.asarray(trace.counts, dtype=float)
    n = counts.size
    if n == 0:
        raise ValidationError("empty trace")
    if floor is None:
        floor = NoiseModel.from_trace(trace)
    bg = floor.background
    excess = counts - bg
    integer = _is_integer_trace(trace)
    bin_m = trace.bin_distance_m
    if merge_radius_m is None:
        merge_radius_m = pulse_fwhm_s * trace.light_speed_m_per_s / (2 * trace.group_index)
    merge_bins = max(1, int(round(merge_radius_m / bin_m)))
    w = max(1, int(round(pulse_fwhm_s / trace.bin_width_s / 2)))

    csum = np.concatenate([[0.0], np.cumsum(counts)])
    bsum = np.concatenate([[0.0], np.cumsum(bg)])
    left_ok = np.concatenate([[True], counts[1:] >= counts[:-1]])
    right_ok = np.concatenate([counts[:-1] >= counts[1:], [True]])
    cand = np.flatnonzero(left_ok & right_ok & (excess > 0))
    a = np.maximum(0, cand - w)
    b = np.minimum(n, cand + w + 1)
    z = _significance(csum[b] - csum[a], bsum[b] - bsum[a], integer)
    keep = z >= snr_threshold
    found = [(int(i), float(zi)) for i, zi in zip(cand[keep], z[keep])]

    merged: list[tuple[int, float]] = []
    for i, z in found:
        if merged and i - merged[-1][0] <= merge_bins:
            if excess[i] > excess[merged[-1][0]]:
                merged[-1] = (i, max(z, merged[-1][1]))
            else:
                merged[-1] = (merged[-1][0], max(z, merged[-1][1]))
        else:
            merged.append((i, z))

    dead = dead_time_correction(trace) if trace.dead_time_s > 0 else 1.0
    peaks = []
    centres = [i for i, _ in merged]
    for idx, (i, z) in enumerate(merged):
        lo_lim = 0 if idx == 0 else (centres[idx - 1] + i) // 2 + 1
        hi_lim = n - 1 if idx == len(merged) - 1 else (i + centres[idx + 1]) // 2
        left, right = _half_max_edges(excess, i, lo_lim, hi_lim)
        fwhm_bins = right - left
        centre = 0.5 * (left + right)
        a = max(lo_lim, int(math.floor(centre - fwhm_bins + 0.5)))
        b = min(hi_lim, int(math.ceil(centre + fwhm_bins - 0.5)))
        seg = excess[a:b + 1]
        total = float(np.sum(seg))
        weights = np.clip(seg, 0.0, None)
        if np.sum(weights) > 0:
            centroid = float(np.sum((np.arange(a, b + 1) + 0.5) * weights) / np.sum(weights))
        else:
            centroid = i + 0.5
        dist = centroid * bin_m
        refl = None
        if cal is not None:
            refl = estimate_reflectance(total, trace.duration_s, cal, dead)
        label = None
        if labels:
            best = min(labels.items(), key=lambda kv: abs(kv[1] - dist))
            if abs(best[1] - dist) <= label_tolerance_m:
                label = best[0]
        peaks.append(Peak(
            distance_m=dist,
            bin_range=(a, b),
            amplitude_counts=total,
            reflectance_dB=refl,
            fwhm_m=fwhm_bins * bin_m,
            snr_linear=float(excess[i] / math.sqrt(max(bg[i], 1.0))),
            centre_bin=centroid - 0.5,
            label=label,
        ))
    return peaks


def estimate_resolution(trace: OtdrTrace, peaks: Sequence[Peak] | None = None,
                        isolation_m: float | None = None) -> float:
    """FWHM in metres of the narrowest isolated peak.

    A peak counts as isolated when no other peak lies within
    ``isolation_m`` (default: three times its own FWHM).
    """
    if peaks is None:
        peaks = detect_peaks(trace)
    best = math.inf
    for p in peaks:
        radius = 3.0 * p.fwhm_m if isolation_m is None else isolation_m
        if all(q is p or abs(q.distance_m - p.distance_m) > radius for q in peaks):
            best = min(best, p.fwhm_m)
    if not math.isfinite(best):
        raise ValidationError("trace has no isolated peak")
    return best


# ----------------------------------------------------------------------------
# noise floor

def interpolated_median(values: np.ndarray) -> float:
    """Median of integer counts refined by linear interpolation within the median class.

    Real-valued input falls back to the ordinary median.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValidationError("no values")
    if not np.all(v == np.round(v)):
        return float(np.median(v))
    k = float(np.median(v))
    if k != math.floor(k):
        return k
    below = float(np.sum(v < k))
    equal = float(np.sum(v == k))
    return k - 0.5 + (v.size / 2.0 - below) / equal


def peak_free_mask(trace: OtdrTrace, peaks: Sequence[Peak], margin_bins: int = 3) -> np.ndarray:
    mask = np.ones(trace.n_bins, dtype=bool)
    for p in peaks:
        a = max(0, p.bin_range[0] - margin_bins)
        b = min(trace.n_bins, p.bin_range[1] + margin_bins + 1)
        mask[a:b] = False
    return mask


def noise_floor_rate(trace: OtdrTrace, peaks: Sequence[Peak] | None = None) -> float:
    """Median per-bin count rate (cps) over peak-free bins, dead-time corrected."""
    if peaks is None:
        peaks = detect_peaks(trace)
    mask = peak_free_mask(trace, peaks)
    if not np.any(mask):
        raise ValidationError("trace has no peak-free region")
    per_bin = interpolated_median(trace.counts[mask]) / trace.duration_s
    corr = dead_time_correction(trace) if trace.dead_time_s > 0 else 1.0
    return per_bin * corr


def estimate_noise_floor(trace: OtdrTrace, cal: CalibrationData,
                         peaks: Sequence[Peak] | None = None) -> float:
    """Noise-equivalent reflectance in dB, or ``-inf`` without any noise."""
    rate = noise_floor_rate(trace, peaks)
    if rate <= 0:
        return BELOW_FLOOR
    return 10.0 * math.log10(rate / cal.n_in_cps) + cal.offset_dB


def bin_reflectance_dB(trace: OtdrTrace, cal: CalibrationData) -> np.ndarray:
    """Per-bin reflectance; bins without counts are NaN."""
    corr = dead_time_correction(trace) if trace.dead_time_s > 0 else 1.0
    rates = np.asarray(trace.counts, dtype=float) / trace.duration_s * corr
    out = np.full(rates.shape, np.nan)
    pos = rates > 0
    out[pos] = 10.0 * np.log10(rates[pos] / cal.n_in_cps) + cal.offset_dB
    return out


# ----------------------------------------------------------------------------
# broadband map

def _cal_for(cals, i: int, wl: float) -> CalibrationData:
    if isinstance(cals, Mapping):
        for key, cal in cals.items():
            if abs(float(key) - wl) < 1e-6:
                return cal
        raise ConfigurationError(f"no calibration for {wl:g} nm")
    if i >= len(cals) or cals[i] is None:
        raise ConfigurationError(f"no calibration for {wl:g} nm")
    return cals[i]


def build_reflectance_map(scan: BroadbandScan,
                          cals: Mapping[float, CalibrationData] | Sequence[CalibrationData],
                          snr_threshold: float = DEFAULT_SNR_THRESHOLD,
                          labels: Mapping[str, float] | None = None) -> ReflectanceMap:
    """Peaks, worst-case reflectance and noise floor at every scan wavelength.

    Where no peak is found the worst case falls back to the noise floor,
    the largest reflection that could have gone unnoticed.
    """
    all_peaks, worst, floors, approx, rows = [], [], [], [], []
    for i, (wl, trace) in enumerate(zip(scan.grid, scan.traces)):
        cal = _cal_for(cals, i, wl)
        peaks = tuple(detect_peaks(trace, cal=cal, snr_threshold=snr_threshold, labels=labels))
        floor = estimate_noise_floor(trace, cal, peaks)
        refl = [p.reflectance_dB for p in peaks if p.reflectance_dB is not None]
        worst.append(max([floor, *refl]))
        floors.append(floor)
        all_peaks.append(peaks)
        qe = cal.quantum_efficiency
        approx.append(bool(qe is not None and qe < APPROXIMATE_EFFICIENCY))
        rows.append(bin_reflectance_dB(trace, cal))
    grid = scan.grid
    n_cols = min(len(r) for r in rows)
    ref = scan.traces[0]
    return ReflectanceMap(
        grid=grid,
        peaks=tuple(all_peaks),
        worst_case=Spectrum(grid, np.array(worst), Unit.DB, Kind.REFLECTANCE),
        noise_floor=Spectrum(grid, np.array(floors), Unit.DB, Kind.REFLECTANCE),
        approximate=tuple(approx),
        heatmap_dB=np.vstack([r[:n_cols] for r in rows]),
        distances_m=ref.distances_m()[:n_cols],
    )
