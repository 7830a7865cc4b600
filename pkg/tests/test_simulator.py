import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thaotdr import kernels
from thaotdr.errors import RangeAmbiguityError, ValidationError
from thaotdr.layouts import (
    REFERENCE_LAYOUTS,
    flat_reflectance,
    single_reflector_layout,
    two_reflector_layout,
)
from thaotdr.simulator import (
    AcquisitionConfig,
    FiberComponent,
    FiberLayout,
    Gate,
    Mode,
    OperatingPointWarning,
    SpadModel,
    auto_attenuation,
    bin_of_distance,
    check_operating_point,
    default_efficiency_spectrum,
    delay_of_distance,
    distance_of_bin,
    expected_bin_rates,
    rate_components,
    simulate_scan,
    simulate_trace,
)
from thaotdr.spectral import PAPER_ROUNDED, Kind, Spectrum, Unit, WavelengthGrid

EMPTY = FiberLayout()
NO_RAYLEIGH = dict(rayleigh_backscatter_dB_per_pulse=None)


def flat_qe(value):
    return Spectrum.constant(value, unit=Unit.FRACTION, kind=Kind.EFFICIENCY)


def quiet_spad(**kw):
    return SpadModel(dead_time_s=0.0, dark_rate_cps=0.0, **kw)


class TestGeometry:
    def test_bin_count(self):
        assert AcquisitionConfig().n_bins == 13334
        assert AcquisitionConfig(f_pulse_Hz=1e6, bin_width_s=1e-9).n_bins == 1000

    def test_nine_metre_bin(self):
        # floor(2 * 9 * 1.468 / (3e8 * 150e-12))
        assert bin_of_distance(9.0, 1.468, 150e-12, PAPER_ROUNDED) == 587
        assert bin_of_distance(9.0, 1.468, 150e-12) == 587

    def test_round_trip_delay(self):
        assert delay_of_distance(9.0, 1.468) == pytest.approx(88.1e-9, rel=1e-3)

    @given(st.integers(min_value=0, max_value=13333), st.floats(min_value=1.4, max_value=1.6))
    def test_bin_distance_self_inverse(self, b, n_g):
        assert bin_of_distance(distance_of_bin(b, n_g, 150e-12), n_g, 150e-12) == b


class TestValidation:
    def test_component_beyond_layout(self):
        with pytest.raises(ValidationError):
            FiberLayout((FiberComponent(13.0, flat_reflectance(-50)),), total_length_m=12.0)

    def test_group_index_range(self):
        with pytest.raises(ValidationError):
            FiberLayout(group_index=1.7)

    def test_positive_attenuation(self):
        with pytest.raises(ValidationError):
            AcquisitionConfig(att_in_dB=1.0)

    def test_gate_width(self):
        with pytest.raises(ValidationError):
            Gate(0.0, 0.0)

    def test_efficiency_fraction(self):
        with pytest.raises(ValidationError):
            SpadModel(quantum_efficiency=Spectrum.constant(-10.0, unit=Unit.DB))

    def test_stacked_components_allowed(self):
        layout = FiberLayout((FiberComponent(5.0, flat_reflectance(-60)),
                              FiberComponent(5.0, flat_reflectance(-60))), total_length_m=6)
        assert len(layout.components) == 2

    def test_range_ambiguity(self):
        far = single_reflector_layout(position_m=250.0)
        with pytest.raises(RangeAmbiguityError):
            expected_bin_rates(far, SpadModel(), AcquisitionConfig(), 1550.0)


class TestOperatingPoint:
    def test_dead_time_boundary_zero_slack(self):
        v = check_operating_point(AcquisitionConfig(f_pulse_Hz=5e5), SpadModel(dead_time_s=2e-6),
                                  0.0)
        assert v.dead_time_ok and v.dead_time_slack_s == 0.0

    def test_dead_time_violation(self):
        v = check_operating_point(AcquisitionConfig(f_pulse_Hz=1e6), SpadModel(dead_time_s=2e-6),
                                  0.0)
        assert not v.dead_time_ok and not v.ok
        assert v.dead_time_slack_s == pytest.approx(-1e-6)

    def test_rate_boundary_zero_slack(self):
        v = check_operating_point(AcquisitionConfig(f_pulse_Hz=5e5),
                                  SpadModel(quantum_efficiency=flat_qe(0.1)), 50000.0)
        assert v.rate_ok and v.rate_slack_cps == 0.0 and v.ok

    def test_rate_violation(self):
        v = check_operating_point(AcquisitionConfig(f_pulse_Hz=5e5),
                                  SpadModel(quantum_efficiency=flat_qe(0.1)), 50001.0)
        assert not v.rate_ok and not v.ok

    def test_simulation_warns_but_runs(self):
        cfg = AcquisitionConfig(f_pulse_Hz=1e6, duration_s=1e-3, mode="analytic")
        with pytest.warns(OperatingPointWarning):
            simulate_trace(two_reflector_layout(), SpadModel(), cfg, 1550.0)


class TestExpectedRates:
    def test_empty_layout_no_dark(self):
        rates = expected_bin_rates(EMPTY, quiet_spad(), AcquisitionConfig(), 1550.0)
        assert np.all(rates == 0.0)

    def test_dark_only_totals_configured_rate(self):
        rates = expected_bin_rates(EMPTY, SpadModel(dark_rate_cps=1700.0), AcquisitionConfig(),
                                   1550.0)
        assert np.sum(rates) == pytest.approx(1700.0, rel=1e-12)
        assert np.ptp(rates) == 0.0

    def test_peak_lands_in_expected_bin(self):
        layout = FiberLayout((FiberComponent(9.0, flat_reflectance(-50.0)),),
                             total_length_m=10.0, **NO_RAYLEIGH)
        cfg = AcquisitionConfig(pulse_fwhm_s=0.0)
        rates = expected_bin_rates(layout, quiet_spad(), cfg, 1550.0, PAPER_ROUNDED)
        assert int(np.argmax(rates)) == 587

    def test_reflected_rate_follows_budget(self):
        layout = FiberLayout((FiberComponent(9.0, flat_reflectance(-50.0)),),
                             total_length_m=10.0, **NO_RAYLEIGH)
        cfg = AcquisitionConfig(att_in_dB=-3.0, att_out_dB=-2.0)
        spad = quiet_spad(quantum_efficiency=flat_qe(0.1))
        total = float(np.sum(expected_bin_rates(layout, spad, cfg, 1550.0)))
        # f * eta * mu_in * 10^((att_in + att_out + R + T12 + T23)/10)
        assert total == pytest.approx(5e5 * 0.1 * 1000 * 10 ** ((-3 - 2 - 50 - 1 - 1) / 10),
                                      rel=1e-9)

    def test_insertion_loss_applied_twice(self):
        loss = Spectrum.constant(-0.5, unit=Unit.DB, kind=Kind.TRANSMITTANCE)
        layout = FiberLayout((FiberComponent(2.0, flat_reflectance(-math.inf), loss),
                              FiberComponent(9.0, flat_reflectance(-50.0))),
                             total_length_m=10.0, **NO_RAYLEIGH)
        ref = FiberLayout((FiberComponent(9.0, flat_reflectance(-50.0)),),
                          total_length_m=10.0, **NO_RAYLEIGH)
        cfg = AcquisitionConfig()
        a = np.sum(expected_bin_rates(layout, quiet_spad(), cfg, 1550.0))
        b = np.sum(expected_bin_rates(ref, quiet_spad(), cfg, 1550.0))
        assert 10 * math.log10(a / b) == pytest.approx(-1.0, abs=1e-12)

    def test_gate_blanks_outside_window(self):
        cfg = AcquisitionConfig()
        spad = SpadModel(gate=Gate(50e-9, 10e-9))
        rates = expected_bin_rates(two_reflector_layout(), spad, cfg, 1550.0)
        active = np.flatnonzero(rates)
        assert active.min() * cfg.bin_width_s < 50e-9 + cfg.bin_width_s
        assert (active.max() + 1) * cfg.bin_width_s > 60e-9 - cfg.bin_width_s
        assert active.size <= 10e-9 / cfg.bin_width_s + 2

    @given(st.floats(min_value=-40, max_value=0))
    def test_attenuation_linearity(self, x):
        layout = two_reflector_layout()
        spad = SpadModel()
        base = AcquisitionConfig(mode="analytic")
        s0, d0 = rate_components(layout, spad, base, 1550.0)
        s1, d1 = rate_components(layout, spad, replace(base, att_in_dB=x), 1550.0)
        np.testing.assert_allclose(s1, s0 * 10 ** (x / 10), rtol=1e-12, atol=0)
        np.testing.assert_array_equal(d1, d0)


class TestAutoAttenuation:
    def _setup(self, factor, safety):
        spad = quiet_spad(quantum_efficiency=flat_qe(0.1))
        layout = FiberLayout((FiberComponent(9.0, flat_reflectance(-50.0)),),
                             total_length_m=10.0, **NO_RAYLEIGH)
        cfg = AcquisitionConfig(pulse_fwhm_s=0.0, input_photons_per_pulse=1.0)
        peak = float(np.max(expected_bin_rates(layout, spad, cfg, 1550.0)))
        limit = 0.1 * cfg.f_pulse_Hz
        cfg = replace(cfg, input_photons_per_pulse=factor * limit / peak)
        return auto_attenuation(layout, spad, cfg, 1550.0, safety=safety)

    def test_at_limit(self):
        assert self._setup(1.0, 1.0) == pytest.approx(0.0, abs=1e-9)

    def test_ten_times_over(self):
        assert self._setup(10.0, 1.0) == pytest.approx(-10.0, abs=1e-9)

    def test_ten_times_over_with_safety(self):
        assert self._setup(10.0, 0.9) == pytest.approx(10 * math.log10(0.09), abs=1e-9)
        assert self._setup(10.0, 0.9) == pytest.approx(-10.46, abs=5e-3)

    def test_already_compliant(self):
        assert self._setup(0.01, 0.9) == 0.0


class TestAnalyticMode:
    def test_equals_rates_times_duration_without_dead_time(self):
        cfg = AcquisitionConfig(mode="analytic", duration_s=7.0)
        spad = SpadModel(dead_time_s=0.0)
        tr = simulate_trace(two_reflector_layout(), spad, cfg, 1550.0)
        exp = expected_bin_rates(two_reflector_layout(), spad, cfg, 1550.0) * 7.0
        np.testing.assert_allclose(tr.counts, exp, rtol=1e-14)
        assert tr.seed is None

    def test_dead_time_factor(self):
        cfg = AcquisitionConfig(mode="analytic", duration_s=1.0)
        spad = SpadModel(dead_time_s=2e-6)
        tr = simulate_trace(two_reflector_layout(), spad, cfg, 1550.0)
        rates = expected_bin_rates(two_reflector_layout(), spad, cfg, 1550.0)
        total = float(np.sum(rates))
        np.testing.assert_allclose(tr.counts, rates / (1 + total * 2e-6), rtol=1e-12)

    def test_duration_doubling(self):
        cfg = AcquisitionConfig(mode="analytic", duration_s=3.0)
        a = simulate_trace(two_reflector_layout(), SpadModel(), cfg, 1550.0)
        b = simulate_trace(two_reflector_layout(), SpadModel(), replace(cfg, duration_s=6.0),
                           1550.0)
        np.testing.assert_array_equal(b.counts, 2 * a.counts)


class TestMonteCarlo:
    def test_deterministic_for_seed(self):
        cfg = AcquisitionConfig(duration_s=0.5, seed=42)
        a = simulate_trace(two_reflector_layout(), SpadModel(), cfg, 1550.0)
        b = simulate_trace(two_reflector_layout(), SpadModel(), cfg, 1550.0)
        c = simulate_trace(two_reflector_layout(), SpadModel(), replace(cfg, seed=43), 1550.0)
        np.testing.assert_array_equal(a.counts, b.counts)
        assert not np.array_equal(a.counts, c.counts)
        assert a.counts.dtype.kind == "i"

    @pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernel not built")
    def test_backends_agree_bit_for_bit(self):
        cfg = AcquisitionConfig(duration_s=0.05, seed=7, input_photons_per_pulse=2e5)
        layout = two_reflector_layout()
        spad = SpadModel(dead_time_s=2e-6, dark_rate_cps=1e5)
        a = simulate_trace(layout, spad, cfg, 1550.0, backend="cython")
        b = simulate_trace(layout, spad, cfg, 1550.0, backend="python")
        assert a.counts.sum() > 1000
        np.testing.assert_array_equal(a.counts, b.counts)

    def test_total_bounded_by_pulses(self):
        layout = FiberLayout((FiberComponent(5.0, flat_reflectance(-10.0)),),
                             total_length_m=6.0, **NO_RAYLEIGH)
        spad = quiet_spad(quantum_efficiency=flat_qe(0.1))
        cfg = AcquisitionConfig(duration_s=0.2, input_photons_per_pulse=5.0, pulse_fwhm_s=0.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OperatingPointWarning)
            tr = simulate_trace(layout, spad, cfg, 1550.0)
        p = float(np.sum(expected_bin_rates(layout, spad, cfg, 1550.0))) / cfg.f_pulse_Hz
        total = tr.counts.sum() / cfg.n_pulses
        assert total <= 1.0
        se = math.sqrt(p * (1 - p) / cfg.n_pulses)
        assert abs(total - p) < 5 * se

    def test_dead_time_saturation(self):
        # dark rate ten times 1/tau_d: observed rate must saturate below 1/tau_d
        tau = 2e-6
        spad = SpadModel(dead_time_s=tau, dark_rate_cps=5e6)
        cfg = AcquisitionConfig(duration_s=0.02, seed=1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OperatingPointWarning)
            tr = simulate_trace(EMPTY, spad, cfg, 1550.0)
        observed = tr.counts.sum() / cfg.duration_s
        assert observed < 1 / tau
        # non-paralyzable: R / (1 + R tau) with the per-pulse re-arm granularity
        assert observed == pytest.approx(5e6 / (1 + 5e6 * tau), rel=0.05)

    def test_duration_scaling(self):
        spad = SpadModel()
        cfg = AcquisitionConfig(duration_s=1.0, seed=3)
        a = simulate_trace(EMPTY, spad, cfg, 1550.0).counts.sum()
        b = simulate_trace(EMPTY, spad, replace(cfg, duration_s=2.0), 1550.0).counts.sum()
        # Poisson totals around 1700 and 3400
        assert abs(b - 2 * a) < 5 * math.sqrt(b + 4 * a)


class TestScan:
    def test_single_wavelength_scan_matches_trace(self):
        cfg = AcquisitionConfig(duration_s=0.5, seed=5)
        scan = simulate_scan(two_reflector_layout(), SpadModel(), cfg,
                             WavelengthGrid(np.array([1550.0])))
        tr = simulate_trace(two_reflector_layout(), SpadModel(), cfg, 1550.0)
        np.testing.assert_array_equal(scan.traces[0].counts, tr.counts)

    def test_full_grid_parallel_is_deterministic(self):
        cfg = AcquisitionConfig(duration_s=0.2, seed=9)
        grid = WavelengthGrid.arange(1100.0, 1800.0, 25.0)
        a = simulate_scan(two_reflector_layout(), SpadModel(), cfg, grid, workers=4)
        b = simulate_scan(two_reflector_layout(), SpadModel(), cfg, grid)
        assert len(a) == 29
        np.testing.assert_array_equal(a.counts_matrix(), b.counts_matrix())

    def test_errors_carry_wavelength(self):
        far = single_reflector_layout(position_m=250.0)
        with pytest.raises(RangeAmbiguityError, match="1550 nm"):
            simulate_scan(far, SpadModel(), AcquisitionConfig(mode="analytic"),
                          WavelengthGrid(np.array([1550.0])))

    @pytest.mark.parametrize("name", sorted(REFERENCE_LAYOUTS))
    def test_reference_layouts_simulate(self, name):
        cfg = AcquisitionConfig(mode="analytic", duration_s=1.0)
        tr = simulate_trace(REFERENCE_LAYOUTS[name](), SpadModel(), cfg, 1575.0)
        assert tr.n_bins == 13334

    def test_default_efficiency_edges(self):
        qe = default_efficiency_spectrum()
        assert qe(1100.0) < 0.01 and qe(1800.0) < 0.01
        assert qe(1550.0) == pytest.approx(0.1)
