"""Synthetic photon-counting OTDR traces.

A trace is a histogram of detector clicks over one laser period, split
into fixed-width time bins.  Each reflector contributes a Gaussian pulse
centred at its round-trip delay.  Distributed Rayleigh backscatter covers
the fibre, and dark counts are spread uniformly over the period.

Two modes are available:

``analytic``
    expected counts, with a first-order non-paralyzable dead-time factor
    ``1 / (1 + R_total * tau_d)``;
``monte_carlo``
    per-pulse, per-bin Bernoulli clicks with dead-time blanking across
    bins and pulses.  Clicks are generated event by event from cumulative
    hazards (see :mod:`thaotdr.kernels`), so runtime scales with the
    number of clicks rather than the number of pulses.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.special import ndtr

from .errors import ConfigurationError, RangeAmbiguityError, ValidationError
from .kernels import get_backend
from .spectral import (
    CODATA,
    Kind,
    PhysicalConstants,
    Spectrum,
    Unit,
    WavelengthGrid,
    db_to_linear,
    sample,
)

DEFAULT_GROUP_INDEX = 1.468
DEFAULT_BIN_WIDTH_S = 150e-12
DEFAULT_PULSE_FWHM_S = 300e-12
DEFAULT_F_PULSE_HZ = 5e5
DEFAULT_DEAD_TIME_S = 2e-6
DEFAULT_DARK_RATE_CPS = 1700.0
DEFAULT_INPUT_PHOTONS = 1000.0
DEFAULT_RAYLEIGH_DB_1550 = -80.0
REFERENCE_PHOTONS_PER_PULSE = 0.1
_FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
_DRAW_BLOCK = 1 << 16


class Mode(str, Enum):
    MONTE_CARLO = "monte_carlo"
    ANALYTIC = "analytic"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, Mode):
            return value
        aliases = {"mc": cls.MONTE_CARLO, "monte_carlo": cls.MONTE_CARLO,
                   "monte-carlo": cls.MONTE_CARLO, "analytic": cls.ANALYTIC}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ConfigurationError(f"unknown simulation mode {value!r}") from None


class OperatingPointWarning(UserWarning):
    """The acquisition violates the count-rate or dead-time condition."""


def _zero_db(kind=Kind.OTHER) -> Spectrum:
    return Spectrum.constant(0.0, unit=Unit.DB, kind=kind)


def default_rayleigh_spectrum() -> Spectrum:
    """Backscatter per resolution cell: -80 dB at 1550 nm, scaling as lambda**-4."""
    grid = WavelengthGrid.arange(1000.0, 2000.0, 5.0)
    vals = DEFAULT_RAYLEIGH_DB_1550 + 40.0 * np.log10(1550.0 / grid.points_nm)
    return Spectrum(grid, vals, Unit.DB, Kind.REFLECTANCE)


def default_efficiency_spectrum() -> Spectrum:
    """InGaAs-like detection efficiency, 10 % near 1550 nm and below 1 % at the band edges."""
    nodes = {
        1100: 0.008, 1150: 0.02, 1200: 0.04, 1250: 0.055, 1300: 0.07, 1350: 0.08,
        1400: 0.09, 1450: 0.095, 1500: 0.1, 1550: 0.1, 1600: 0.095, 1650: 0.075,
        1700: 0.045, 1750: 0.02, 1800: 0.008,
    }
    return Spectrum(WavelengthGrid(np.array(list(nodes), dtype=float)),
                    np.array(list(nodes.values())), Unit.FRACTION, Kind.EFFICIENCY)


def default_circulator_spectrum() -> Spectrum:
    return Spectrum.constant(-1.0, unit=Unit.DB, kind=Kind.TRANSMITTANCE)


@dataclass(frozen=True)
class FiberComponent:
    position_m: float
    reflectance: Spectrum
    insertion_loss: Spectrum = field(default_factory=lambda: _zero_db(Kind.TRANSMITTANCE))
    label: str = ""

    def __post_init__(self):
        if not (self.position_m >= 0) or not math.isfinite(self.position_m):
            raise ValidationError(f"component position must be >= 0, got {self.position_m!r}")
        if self.reflectance.unit is not Unit.DB or np.any(self.reflectance.values > 0):
            raise ValidationError(f"component {self.label!r}: reflectance must be <= 0 dB")
        if self.insertion_loss.unit is not Unit.DB or np.any(self.insertion_loss.values > 0):
            raise ValidationError(f"component {self.label!r}: insertion loss must be <= 0 dB")


@dataclass(frozen=True)
class FiberLayout:
    components: tuple[FiberComponent, ...] = ()
    total_length_m: float = 0.0
    group_index: float = DEFAULT_GROUP_INDEX
    rayleigh_backscatter_dB_per_pulse: Spectrum | None = field(
        default_factory=default_rayleigh_spectrum)

    def __post_init__(self):
        comps = tuple(sorted(self.components, key=lambda c: c.position_m))
        object.__setattr__(self, "components", comps)
        if not (1.4 <= self.group_index <= 1.6):
            raise ValidationError(f"group index {self.group_index!r} outside [1.4, 1.6]")
        if self.total_length_m < 0:
            raise ValidationError("total length must be >= 0")
        for c in comps:
            if c.position_m > self.total_length_m:
                raise ValidationError(
                    f"component {c.label!r} at {c.position_m} m lies beyond the "
                    f"{self.total_length_m} m layout"
                )


@dataclass(frozen=True)
class Gate:
    delay_s: float
    width_s: float

    def __post_init__(self):
        if not (self.width_s > 0):
            raise ValidationError("gate width must be positive")
        if self.delay_s < 0:
            raise ValidationError("gate delay must be >= 0")


@dataclass(frozen=True)
class SpadModel:
    quantum_efficiency: Spectrum = field(default_factory=default_efficiency_spectrum)
    dead_time_s: float = DEFAULT_DEAD_TIME_S
    dark_rate_cps: float = DEFAULT_DARK_RATE_CPS
    gate: Gate | None = None

    def __post_init__(self):
        qe = self.quantum_efficiency
        if qe.unit not in (Unit.FRACTION, Unit.LINEAR) or np.any(qe.values > 1):
            raise ValidationError("quantum efficiency must be a fraction in [0, 1]")
        if self.dead_time_s < 0:
            raise ValidationError("dead time must be >= 0")
        if self.dark_rate_cps < 0:
            raise ValidationError("dark count rate must be >= 0")


@dataclass(frozen=True)
class AcquisitionConfig:
    """Laser, binning and attenuator settings for one acquisition.

    ``att_in_dB`` and ``att_out_dB`` are the attenuator settings on the
    way into and back out of the device under test; both are <= 0 dB and
    both scale the reflected signal.
    """

    f_pulse_Hz: float = DEFAULT_F_PULSE_HZ
    bin_width_s: float = DEFAULT_BIN_WIDTH_S
    duration_s: float = 60.0
    att_in_dB: float = 0.0
    att_out_dB: float = 0.0
    input_photons_per_pulse: float = DEFAULT_INPUT_PHOTONS
    circulator_t12_dB: Spectrum = field(default_factory=default_circulator_spectrum)
    circulator_t23_dB: Spectrum = field(default_factory=default_circulator_spectrum)
    seed: int = 0
    mode: Mode = Mode.MONTE_CARLO
    pulse_fwhm_s: float = DEFAULT_PULSE_FWHM_S

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        for name in ("f_pulse_Hz", "bin_width_s", "duration_s"):
            v = getattr(self, name)
            if not (v > 0) or not math.isfinite(v):
                raise ValidationError(f"{name} must be positive, got {v!r}")
        if self.att_in_dB > 0 or self.att_out_dB > 0:
            raise ValidationError("attenuator settings must be <= 0 dB")
        if self.input_photons_per_pulse < 0:
            raise ValidationError("input photons per pulse must be >= 0")
        if self.pulse_fwhm_s < 0:
            raise ValidationError("pulse FWHM must be >= 0")
        for name in ("circulator_t12_dB", "circulator_t23_dB"):
            spec = getattr(self, name)
            if spec.unit is not Unit.DB or np.any(spec.values > 0):
                raise ValidationError(f"{name} must be a dB spectrum <= 0")

    @property
    def n_bins(self) -> int:
        return n_bins_for(self.f_pulse_Hz, self.bin_width_s)

    @property
    def n_pulses(self) -> int:
        return int(round(self.duration_s * self.f_pulse_Hz))


@dataclass(frozen=True, eq=False)
class OtdrTrace:
    wavelength_nm: float
    bin_width_s: float
    counts: np.ndarray
    duration_s: float
    f_pulse_Hz: float
    group_index: float = DEFAULT_GROUP_INDEX
    dead_time_s: float = 0.0
    att_in_dB: float = 0.0
    att_out_dB: float = 0.0
    mode: Mode = Mode.MONTE_CARLO
    seed: int | None = None
    light_speed_m_per_s: float = CODATA.light_speed_m_per_s

    def __post_init__(self):
        counts = np.array(self.counts, copy=True)
        if counts.ndim != 1 or counts.size == 0:
            raise ValidationError("trace counts must be a non-empty 1-D array")
        if np.any(counts < 0):
            raise ValidationError("trace counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "mode", Mode.parse(self.mode))

    @property
    def n_bins(self) -> int:
        return int(self.counts.size)

    @property
    def bin_distance_m(self) -> float:
        return self.bin_width_s * self.light_speed_m_per_s / (2.0 * self.group_index)

    def times_s(self) -> np.ndarray:
        """Start time of every bin."""
        return np.arange(self.n_bins) * self.bin_width_s

    def distances_m(self) -> np.ndarray:
        """Fibre distance of every bin centre."""
        return (np.arange(self.n_bins) + 0.5) * self.bin_distance_m

    def rates_cps(self) -> np.ndarray:
        return self.counts / self.duration_s

    def metadata(self) -> dict:
        return {
            "wavelength_nm": float(self.wavelength_nm),
            "bin_width_s": float(self.bin_width_s),
            "duration_s": float(self.duration_s),
            "f_pulse_Hz": float(self.f_pulse_Hz),
            "group_index": float(self.group_index),
            "dead_time_s": float(self.dead_time_s),
            "att_in_dB": float(self.att_in_dB),
            "att_out_dB": float(self.att_out_dB),
            "mode": self.mode.value,
            "seed": self.seed,
            "light_speed_m_per_s": float(self.light_speed_m_per_s),
        }


@dataclass(frozen=True)
class BroadbandScan:
    grid: WavelengthGrid
    traces: tuple[OtdrTrace, ...]

    def __post_init__(self):
        if len(self.traces) != len(self.grid):
            raise ValidationError("one trace per wavelength is required")

    def __iter__(self):
        return iter(self.traces)

    def __len__(self):
        return len(self.traces)

    def counts_matrix(self) -> np.ndarray:
        return np.vstack([t.counts for t in self.traces])


@dataclass(frozen=True)
class OperatingPointVerdict:
    """Outcome of the two operating-point conditions, each with its margin.

    ``rate_slack_cps = eta * f_pulse - N`` and
    ``dead_time_slack_s = 1/f_pulse - tau_d``; a non-negative slack means
    the condition holds.
    """

    rate_ok: bool
    rate_slack_cps: float
    rate_limit_cps: float
    dead_time_ok: bool
    dead_time_slack_s: float

    @property
    def ok(self) -> bool:
        return self.rate_ok and self.dead_time_ok


# ----------------------------------------------------------------------------
# geometry

def n_bins_for(f_pulse_Hz: float, bin_width_s: float) -> int:
    return int(math.ceil(1.0 / (f_pulse_Hz * bin_width_s) - 1e-9))


def delay_of_distance(distance_m: float, group_index: float,
                      constants: PhysicalConstants = CODATA) -> float:
    return 2.0 * distance_m * group_index / constants.light_speed_m_per_s


def bin_of_distance(distance_m: float, group_index: float, bin_width_s: float,
                    constants: PhysicalConstants = CODATA) -> int:
    return int(math.floor(delay_of_distance(distance_m, group_index, constants) / bin_width_s))


def distance_of_bin(bin_index: int, group_index: float, bin_width_s: float,
                    constants: PhysicalConstants = CODATA) -> float:
    """Fibre distance of the centre of ``bin_index``."""
    return (bin_index + 0.5) * bin_width_s * constants.light_speed_m_per_s / (2.0 * group_index)


# ----------------------------------------------------------------------------
# operating point

def check_operating_point(config: AcquisitionConfig, spad: SpadModel,
                          expected_max_rate_cps: float, wavelength_nm: float = 1550.0,
                          rel_tol: float = 1e-12) -> OperatingPointVerdict:
    """Check ``N <= eta * f_pulse`` and ``tau_d <= 1 / f_pulse``."""
    eta = float(sample(spad.quantum_efficiency, wavelength_nm))
    limit = eta * config.f_pulse_Hz
    rate_slack = limit - expected_max_rate_cps
    period = 1.0 / config.f_pulse_Hz
    dead_slack = period - spad.dead_time_s
    return OperatingPointVerdict(
        rate_ok=rate_slack >= -rel_tol * max(limit, 1.0),
        rate_slack_cps=rate_slack,
        rate_limit_cps=limit,
        dead_time_ok=dead_slack >= -rel_tol * period,
        dead_time_slack_s=dead_slack,
    )


# ----------------------------------------------------------------------------
# expected rates

def _gate_mask(spad: SpadModel, config: AcquisitionConfig) -> np.ndarray:
    n = config.n_bins
    if spad.gate is None:
        return np.ones(n, dtype=bool)
    starts = np.arange(n) * config.bin_width_s
    g = spad.gate
    return (starts + config.bin_width_s > g.delay_s) & (starts < g.delay_s + g.width_s)


def _pulse_weights(t0_s: float, config: AcquisitionConfig) -> tuple[np.ndarray, np.ndarray]:
    """Bin indices and the fraction of a Gaussian pulse at ``t0_s`` landing in each."""
    bw = config.bin_width_s
    n = config.n_bins
    centre = int(math.floor(t0_s / bw))
    sigma = config.pulse_fwhm_s * _FWHM_TO_SIGMA
    if sigma == 0:
        return np.array([centre % n]), np.array([1.0])
    half = int(math.ceil(7.0 * sigma / bw)) + 1
    idx = np.arange(centre - half, centre + half + 1)
    edges = np.append(idx, idx[-1] + 1) * bw
    cdf = ndtr((edges - t0_s) / sigma)
    w = np.diff(cdf)
    return np.mod(idx, n), w


def _path_loss_db(layout: FiberLayout, position_m: float, wavelength_nm: float) -> float:
    loss = 0.0
    for c in layout.components:
        if c.position_m < position_m:
            loss += float(sample(c.insertion_loss, wavelength_nm))
    return loss


def _common_gain_db(spad: SpadModel, config: AcquisitionConfig, wavelength_nm: float) -> float:
    return (config.att_in_dB + config.att_out_dB
            + float(sample(config.circulator_t12_dB, wavelength_nm))
            + float(sample(config.circulator_t23_dB, wavelength_nm)))


def rate_components(layout: FiberLayout, spad: SpadModel, config: AcquisitionConfig,
                    wavelength_nm: float, constants: PhysicalConstants = CODATA
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Per-bin expected click rates split into (reflected signal, dark counts).

    The reflected part covers discrete reflectors and Rayleigh backscatter;
    it scales linearly with the attenuator settings.  Both arrays are in
    counts per second.
    """
    n = config.n_bins
    f = config.f_pulse_Hz
    bw = config.bin_width_s
    eta = float(sample(spad.quantum_efficiency, wavelength_nm))
    scale = f * eta * config.input_photons_per_pulse
    gain_db = _common_gain_db(spad, config, wavelength_nm)
    period = 1.0 / f
    signal = np.zeros(n)
    for comp in layout.components:
        t0 = delay_of_distance(comp.position_m, layout.group_index, constants)
        if t0 >= period:
            raise RangeAmbiguityError(
                f"component {comp.label!r} at {comp.position_m} m returns after {t0:.3e} s, "
                f"beyond the {period:.3e} s pulse period"
            )
        r_db = float(sample(comp.reflectance, wavelength_nm))
        loss = _path_loss_db(layout, comp.position_m, wavelength_nm)
        amp = scale * db_to_linear(gain_db + 2.0 * loss + r_db)
        if amp == 0.0:
            continue
        idx, w = _pulse_weights(t0, config)
        np.add.at(signal, idx, amp * w)
    ray = layout.rayleigh_backscatter_dB_per_pulse
    if ray is not None and layout.total_length_m > 0:
        ray_lin = db_to_linear(float(sample(ray, wavelength_nm)))
        length = min(layout.total_length_m,
                     period * constants.light_speed_m_per_s / (2.0 * layout.group_index))
        last = bin_of_distance(length, layout.group_index, bw, constants)
        dists = (np.arange(n) + 0.5) * bw * constants.light_speed_m_per_s / (
            2.0 * layout.group_index)
        in_fiber = np.arange(n) <= min(last, n - 1)
        if layout.components:
            positions = np.array([c.position_m for c in layout.components])
            losses = np.array([float(sample(c.insertion_loss, wavelength_nm))
                               for c in layout.components])
            cum = np.concatenate([[0.0], np.cumsum(losses)])
            before = np.searchsorted(positions, dists, side="left")
            loss_db = cum[before]
        else:
            loss_db = np.zeros(n)
        ray_rate = scale * ray_lin * np.power(10.0, (gain_db + 2.0 * loss_db) / 10.0)
        signal += np.where(in_fiber, ray_rate, 0.0)
    dark = np.full(n, spad.dark_rate_cps / n)
    mask = _gate_mask(spad, config)
    signal = np.where(mask, signal, 0.0)
    dark = np.where(mask, dark, 0.0)
    return signal, dark


def expected_bin_rates(layout: FiberLayout, spad: SpadModel, config: AcquisitionConfig,
                       wavelength_nm: float, constants: PhysicalConstants = CODATA
                       ) -> np.ndarray:
    """Expected click rate in every bin (cps), before dead-time losses."""
    signal, dark = rate_components(layout, spad, config, wavelength_nm, constants)
    return signal + dark


def auto_attenuation(layout: FiberLayout, spad: SpadModel, config: AcquisitionConfig,
                     wavelength_nm: float, safety: float = 0.9,
                     constants: PhysicalConstants = CODATA) -> float:
    """Least-negative input attenuation keeping the peak bin under ``safety * eta * f``.

    The search is relative to a 0 dB input attenuator with ``att_out_dB``
    unchanged.  Returns 0.0 when the layout is already compliant there.
    """
    if not (0 < safety <= 1):
        raise ValidationError("safety factor must lie in (0, 1]")
    probe = replace(config, att_in_dB=0.0)
    signal, dark = rate_components(layout, spad, probe, wavelength_nm, constants)
    eta = float(sample(spad.quantum_efficiency, wavelength_nm))
    target = safety * eta * config.f_pulse_Hz
    lit = signal > 0
    if not np.any(lit) or np.max(signal + dark) <= target:
        return 0.0
    headroom = target - dark[lit]
    if np.any(headroom <= 0):
        raise ValidationError("dark counts alone exceed the count-rate limit")
    gain = float(np.min(headroom / signal[lit]))
    return min(0.0, 10.0 * math.log10(gain))


def dead_time_factor(total_rate_cps: float, dead_time_s: float) -> float:
    """Non-paralyzable throughput ``1 / (1 + R * tau_d)``."""
    return 1.0 / (1.0 + total_rate_cps * dead_time_s)


# ----------------------------------------------------------------------------
# traces

def trace_seed_sequence(seed: int, wavelength_nm: float) -> np.random.SeedSequence:
    """Per-wavelength RNG stream; the same for a lone trace and inside a scan."""
    return np.random.SeedSequence([int(seed), int(round(wavelength_nm * 1000))])


def hazard_table(signal_cps: np.ndarray, dark_cps: np.ndarray, f_pulse_Hz: float
                 ) -> np.ndarray:
    """Cumulative per-pulse hazard with a leading zero.

    A bin with signal click probability ``p`` and dark rate ``d`` has
    hazard ``-log(1 - p) + d / f``, i.e. click probability
    ``1 - (1 - p) * exp(-d / f)``.
    """
    p = signal_cps / f_pulse_Hz
    if np.any(p >= 1.0):
        raise ValidationError(
            "expected clicks per pulse reach 1 in some bin; attenuate the input"
        )
    h = -np.log1p(-p) + dark_cps / f_pulse_Hz
    return np.concatenate([[0.0], np.cumsum(h)])


def monte_carlo_counts(signal_cps: np.ndarray, dark_cps: np.ndarray, config: AcquisitionConfig,
                       dead_time_s: float, rng: np.random.Generator, backend: str | None = None
                       ) -> np.ndarray:
    _, run_events = get_backend(backend)
    cum = np.ascontiguousarray(hazard_table(signal_cps, dark_cps, config.f_pulse_Hz))
    n = config.n_bins
    counts = np.zeros(n, dtype=np.int64)
    state = np.zeros(2, dtype=np.int64)
    period_bins = 1.0 / (config.f_pulse_Hz * config.bin_width_s)
    dead_bins = dead_time_s / config.bin_width_s
    n_pulses = config.n_pulses
    while True:
        draws = rng.standard_exponential(_DRAW_BLOCK)
        _, done = run_events(cum, n_pulses, period_bins, dead_bins, draws, counts, state)
        if done:
            return counts


def simulate_trace(layout: FiberLayout, spad: SpadModel, config: AcquisitionConfig,
                   wavelength_nm: float, constants: PhysicalConstants = CODATA,
                   backend: str | None = None) -> OtdrTrace:
    """Simulate one trace; deterministic for a given ``config.seed``."""
    signal, dark = rate_components(layout, spad, config, wavelength_nm, constants)
    peak = float(np.max(signal + dark))
    verdict = check_operating_point(config, spad, peak, wavelength_nm)
    if not verdict.ok:
        warnings.warn(
            f"operating point at {wavelength_nm:g} nm: rate slack {verdict.rate_slack_cps:.4g} cps, "
            f"dead-time slack {verdict.dead_time_slack_s:.4g} s",
            OperatingPointWarning,
            stacklevel=2,
        )
    if config.mode is Mode.ANALYTIC:
        rates = signal + dark
        factor = dead_time_factor(float(np.sum(rates)), spad.dead_time_s)
        counts = rates * config.duration_s * factor
        seed = None
    else:
        rng = np.random.default_rng(trace_seed_sequence(config.seed, wavelength_nm))
        counts = monte_carlo_counts(signal, dark, config, spad.dead_time_s, rng, backend)
        seed = config.seed
    return OtdrTrace(
        wavelength_nm=float(wavelength_nm),
        bin_width_s=config.bin_width_s,
        counts=counts,
        duration_s=config.duration_s,
        f_pulse_Hz=config.f_pulse_Hz,
        group_index=layout.group_index,
        dead_time_s=spad.dead_time_s,
        att_in_dB=config.att_in_dB,
        att_out_dB=config.att_out_dB,
        mode=config.mode,
        seed=seed,
        light_speed_m_per_s=constants.light_speed_m_per_s,
    )


def simulate_scan(layout: FiberLayout, spad: SpadModel, config: AcquisitionConfig,
                  grid: WavelengthGrid, constants: PhysicalConstants = CODATA,
                  workers: int = 1, backend: str | None = None) -> BroadbandScan:
    """One trace per grid wavelength, each with its own seed-derived RNG stream."""
    def one(wl):
        try:
            return simulate_trace(layout, spad, config, wl, constants, backend)
        except Exception as exc:
            raise type(exc)(f"at {wl:g} nm: {exc}") from exc

    wls = list(grid)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traces = tuple(pool.map(one, wls))
    else:
        traces = tuple(one(wl) for wl in wls)
    return BroadbandScan(grid, traces)


# ----------------------------------------------------------------------------
# calibration reference

def reference_attenuation(config: AcquisitionConfig,
                          photons_per_pulse: float = REFERENCE_PHOTONS_PER_PULSE) -> float:
    """Attenuator setting for the input-reference measurement."""
    if config.input_photons_per_pulse <= 0:
        return 0.0
    return min(0.0, 10.0 * math.log10(photons_per_pulse / config.input_photons_per_pulse))


def reference_input_rate(spad: SpadModel, config: AcquisitionConfig, wavelength_nm: float,
                         att_ref_dB: float) -> float:
    """Click rate with the attenuator output wired straight to the detector."""
    eta = float(sample(spad.quantum_efficiency, wavelength_nm))
    return config.f_pulse_Hz * eta * config.input_photons_per_pulse * db_to_linear(att_ref_dB)
