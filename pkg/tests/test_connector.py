import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thaotdr.connector import (
    ConnectorModel,
    cavity_phase,
    connector_reflectance_db,
    fit_connector,
    fresnel_r0,
    model_curve,
    with_convention,
    write_model_vs_data,
)
from thaotdr.errors import DomainError, FitFailure, ValidationError
from thaotdr.spectral import Kind, Spectrum, Unit, WavelengthGrid

# 40-digit evaluations of the damaged-layer model at h = 0.015 um, n_d = 1.474
R0_1474 = 4.66571112902744e-5
R0_16 = 0.00228542853822207
R_1550_EXACT = -52.2674487872547
R_1550_APPROX = -52.2208834525575
DROP_1100_1800 = 4.21956029517587
PHASE_1550 = 0.358506392623847

MODEL = ConnectorModel(h_um=0.015, n_d=1.474)
GRID = WavelengthGrid.arange(1100.0, 1800.0, 25.0)


def synthetic(model=MODEL, grid=GRID, noise_dB=0.0, seed=0):
    vals = model_curve(model, grid.points_nm)
    if noise_dB:
        vals = vals + np.random.default_rng(seed).normal(0.0, noise_dB, vals.size)
    return Spectrum(grid, vals, Unit.DB, Kind.REFLECTANCE)


class TestFresnel:
    def test_values(self):
        assert fresnel_r0(1.454, 1.454) == 0.0
        assert fresnel_r0(1.454, 1.474) == pytest.approx(R0_1474, rel=1e-12)
        assert fresnel_r0(1.454, 1.6) == pytest.approx(R0_16, rel=1e-12)

    @given(st.floats(min_value=1.0001, max_value=4), st.floats(min_value=1.0001, max_value=4))
    def test_symmetric_and_bounded(self, a, b):
        assert fresnel_r0(a, b) == pytest.approx(fresnel_r0(b, a), rel=1e-14, abs=0)
        assert 0.0 <= fresnel_r0(a, b) < 1.0

    @pytest.mark.parametrize("pair", [(1.0, 1.5), (1.5, 0.9), (math.nan, 1.5)])
    def test_domain(self, pair):
        with pytest.raises(DomainError):
            fresnel_r0(*pair)


class TestModel:
    def test_reference_values(self):
        assert MODEL.phase(1550.0) == pytest.approx(PHASE_1550, rel=1e-12)
        assert connector_reflectance_db(MODEL, 1550.0) == pytest.approx(R_1550_EXACT, abs=1e-9)
        assert connector_reflectance_db(MODEL, 1550.0, exact=False) == pytest.approx(
            R_1550_APPROX, abs=1e-9)

    def test_spectral_drop(self):
        drop = connector_reflectance_db(MODEL, 1100.0) - connector_reflectance_db(MODEL, 1800.0)
        assert drop == pytest.approx(DROP_1100_1800, abs=1e-9)

    def test_vanishing_cavity(self):
        assert connector_reflectance_db(ConnectorModel(0.0, 1.5), 1550.0) == -math.inf

    def test_standard_convention_halves_phase(self):
        std = with_convention(MODEL, "standard")
        assert std.phase(1550.0) == pytest.approx(0.5 * MODEL.phase(1550.0), rel=1e-15)

    @pytest.mark.parametrize("kw", [dict(h_um=0.2, n_d=1.5), dict(h_um=0.01, n_d=1.46),
                                    dict(h_um=0.01, n_d=1.6), dict(h_um=-0.01, n_d=1.5),
                                    dict(h_um=0.01, n_d=1.5, n_core=1.3),
                                    dict(h_um=0.01, n_d=1.5, convention="other")])
    def test_bounds(self, kw):
        with pytest.raises(ValidationError):
            ConnectorModel(**kw)

    def test_wavelength_domain(self):
        with pytest.raises(DomainError):
            cavity_phase(0.01, 1.5, 0.0)

    @given(st.floats(min_value=1e-4, max_value=0.11), st.floats(min_value=1.4601, max_value=1.5999))
    def test_monotone_decreasing_in_small_cavity_regime(self, h, nd):
        m = ConnectorModel(h, nd)
        wl = np.linspace(1100.0, 1800.0, 141)
        if np.max(m.phase(wl)) >= math.pi:
            return
        assert np.all(np.diff(model_curve(m, wl)) < 0)

    @given(st.floats(min_value=1e-4, max_value=0.11), st.floats(min_value=1.4601, max_value=1.5999),
           st.floats(min_value=1100, max_value=1800))
    def test_exact_and_approximate_agree_at_small_phase(self, h, nd, wl):
        m = ConnectorModel(h, nd)
        if m.phase(wl) >= 0.5:
            return
        diff = connector_reflectance_db(m, wl) - connector_reflectance_db(m, wl, exact=False)
        assert abs(diff) <= 0.5


class TestFit:
    def test_noiseless_recovery(self):
        fit = fit_connector(synthetic())
        assert fit.residual_rms_dB <= 1e-6
        assert fit.model.h_um == pytest.approx(0.015, abs=1e-6)
        assert fit.model.n_d == pytest.approx(1.474, abs=1e-5)
        assert fit.used_exact_formula

    def test_deterministic(self):
        spec = synthetic(noise_dB=0.3, seed=4)
        a = fit_connector(spec)
        b = fit_connector(spec, workers=4)
        assert a.model == b.model and a.residual_rms_dB == b.residual_rms_dB

    def test_noisy_curve_shape_recovered(self):
        spec = synthetic(noise_dB=0.3, seed=0)
        fit = fit_connector(spec)
        clean = model_curve(MODEL, GRID.points_nm)
        fitted = model_curve(fit.model, GRID.points_nm)
        assert np.corrcoef(clean, fitted)[0, 1] >= 0.999
        assert fit.residual_rms_dB < 0.5

    def test_offset_keeps_shape(self):
        shifted = Spectrum(GRID, synthetic().values + 3.0, Unit.DB, Kind.REFLECTANCE)
        base = fit_connector(synthetic())
        fit = fit_connector(shifted)
        clean = model_curve(MODEL, GRID.points_nm)
        fitted = model_curve(fit.model, GRID.points_nm)
        assert np.corrcoef(clean, fitted)[0, 1] >= 0.999
        product = lambda m: m.r0 * m.phase(1550.0) ** 2  # noqa: E731
        assert product(fit.model) > product(base.model)

    def test_flat_spectrum_flagged(self):
        flat = Spectrum(GRID, np.full(len(GRID), -50.0), Unit.DB, Kind.REFLECTANCE)
        try:
            fit = fit_connector(flat)
        except FitFailure:
            return
        assert fit.at_boundary

    def test_hopeless_spectrum_fails(self):
        # far below anything the bounded model can reach
        low = Spectrum(GRID, np.full(len(GRID), -200.0), Unit.DB, Kind.REFLECTANCE)
        with pytest.raises(FitFailure) as info:
            fit_connector(low)
        assert info.value.result.residual_rms_dB > 10

    def test_too_few_points(self):
        g = WavelengthGrid(np.array([1500.0, 1550.0, 1600.0, 1650.0]))
        with pytest.raises(ValidationError):
            fit_connector(synthetic(grid=g))

    def test_requires_db(self):
        lin = Spectrum(GRID, np.full(len(GRID), 1e-5), Unit.LINEAR, Kind.REFLECTANCE)
        with pytest.raises(ValidationError):
            fit_connector(lin)

    def test_model_vs_data_csv(self, tmp_path):
        spec = synthetic()
        fit = fit_connector(spec)
        write_model_vs_data(tmp_path / "m.csv", fit, spec)
        lines = (tmp_path / "m.csv").read_text().splitlines()
        assert lines[0] == "wavelength_nm,data_dB,model_dB,residual_dB"
        assert len(lines) == len(GRID) + 1
        d = fit.to_dict()
        assert d["model"]["h_um"] == fit.model.h_um and "condition_number" in d
