"""Command-line pipeline: simulate, analyze, fit-connector, security-report, verify-fidelity.

Every subcommand reads an optional JSON ``--config`` whose relative paths
are resolved against the config file's directory; command-line flags
override config values.  Exit status is 0 on success, 2 for invalid input
or configuration and 3 when a numerical procedure fails.

A minimal config::

    {
      "layout": "reference:alice",
      "grid": {"start_nm": 1100, "stop_nm": 1800, "step_nm": 25},
      "acquisition": {"duration_s": 60, "f_pulse_Hz": 500000},
      "spad": {"dead_time_s": 2e-6, "dark_rate_cps": 1700},
      "security": {"p_max_dBm": 40, "transmittance_dB": -250}
    }
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import build_reflectance_map, simulated_calibration
from .connector import (
    CONVENTIONS,
    DEFAULT_N_CORE,
    fit_connector,
    write_model_vs_data,
)
from .errors import ConfigurationError, FitFailure, NumericalError, ThaOtdrError
from .fidelity import bound_suite
from .fileio import (
    as_spectrum,
    constant_or_spectrum,
    load_layout,
    read_json,
    read_scan,
    write_json,
    write_leakage,
    write_reflectance_map,
    write_scan,
)
from .security import DEFAULT_F_EVE_HZ, LeakageParams, SecurityBudget, broadband_leakage
from .simulator import (
    AcquisitionConfig,
    Gate,
    Mode,
    OperatingPointWarning,
    SpadModel,
    simulate_scan,
)
from .spectral import Kind, Unit, WavelengthGrid, constants_by_name, read_spectrum

log = logging.getLogger("thaotdr")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

DEFAULT_GRID = {"start_nm": 1100.0, "stop_nm": 1800.0, "step_nm": 25.0}

_ACQ_KEYS = ("f_pulse_Hz", "bin_width_s", "duration_s", "att_in_dB", "att_out_dB",
             "input_photons_per_pulse", "pulse_fwhm_s")


class Settings:
    """Config file merged with command-line overrides."""

    def __init__(self, args):
        self.base = Path(".")
        self.data: dict = {}
        if getattr(args, "config", None):
            path = Path(args.config)
            self.data = read_json(path)
            self.base = path.parent
        sec = self.data.get("security", {})
        self.seed = args.seed if args.seed is not None else int(self.data.get("seed", 0))
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        self.mode = Mode.parse(args.mode or self.data.get("mode", "mc"))
        self.constants = constants_by_name(args.constants or self.data.get("constants", "codata"))
        self.f_eve_Hz = float(args.f_eve_hz if args.f_eve_hz is not None
                              else sec.get("f_eve_Hz", DEFAULT_F_EVE_HZ))
        self.qber = float(args.qber if args.qber is not None else sec.get("qber", 0.0))
        self.params = LeakageParams(qber=self.qber, f_eve_Hz=self.f_eve_Hz)
        out = args.out or self.data.get("out")
        if out is None:
            raise ConfigurationError("no output directory: pass --out or set \"out\" in the config")
        self.out = Path(out)

    def path(self, value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base / p

    def assumptions(self) -> dict:
        return {
            "f_eve_Hz": self.f_eve_Hz,
            "qber": self.qber,
            "constants": self.constants.name,
            "planck_J_per_Hz": self.constants.planck_J_per_Hz,
            "light_speed_m_per_s": self.constants.light_speed_m_per_s,
            "calibration": "R = 10*log10(N_out/N_in) + Att_in - Att_out - T12 - T23, all dB <= 0",
            "dead_time": "non-paralyzable",
            "connector_phase_convention": self.data.get("connector", {}).get("convention",
                                                                             "paper"),
        }

    # -- builders ---------------------------------------------------------

    def grid(self) -> WavelengthGrid:
        g = self.data.get("grid", DEFAULT_GRID)
        if isinstance(g, list):
            return WavelengthGrid(np.array(g, dtype=float))
        try:
            return WavelengthGrid.arange(float(g["start_nm"]), float(g["stop_nm"]),
                                         float(g["step_nm"]))
        except KeyError as exc:
            raise ConfigurationError(f"grid lacks {exc.args[0]!r}") from None

    def spad(self) -> SpadModel:
        s = self.data.get("spad", {})
        kwargs = {}
        if "efficiency_csv" in s:
            kwargs["quantum_efficiency"] = read_spectrum(self.path(s["efficiency_csv"]),
                                                         unit=Unit.FRACTION, kind=Kind.EFFICIENCY)
        for key in ("dead_time_s", "dark_rate_cps"):
            if key in s:
                kwargs[key] = float(s[key])
        if s.get("gate"):
            kwargs["gate"] = Gate(float(s["gate"]["delay_s"]), float(s["gate"]["width_s"]))
        return SpadModel(**kwargs)

    def acquisition(self) -> AcquisitionConfig:
        a = self.data.get("acquisition", {})
        kwargs = {k: float(a[k]) for k in _ACQ_KEYS if k in a}
        for key in ("circulator_t12", "circulator_t23"):
            if f"{key}_csv" in a:
                kwargs[f"{key}_dB"] = read_spectrum(self.path(a[f"{key}_csv"]), unit=Unit.DB,
                                                    kind=Kind.TRANSMITTANCE)
            elif f"{key}_dB" in a:
                kwargs[f"{key}_dB"] = as_spectrum(float(a[f"{key}_dB"]), Kind.TRANSMITTANCE)
        return AcquisitionConfig(seed=self.seed, mode=self.mode, **kwargs)


# ----------------------------------------------------------------------------
# subcommands

def cmd_simulate(args, st: Settings) -> int:
    layout_ref = args.layout or st.data.get("layout")
    if layout_ref is None:
        raise ConfigurationError("no layout: pass --layout or set \"layout\" in the config")
    layout = load_layout(layout_ref, st.base)
    spad = st.spad()
    config = st.acquisition()
    grid = st.grid()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", OperatingPointWarning)
        scan = simulate_scan(layout, spad, config, grid, st.constants, workers=args.workers)
    for w in caught:
        log.warning("%s", w.message)
    cals = [simulated_calibration(spad, config, wl) for wl in grid]
    extra = {
        "assumptions": st.assumptions(),
        "config": {k: v for k, v in st.data.items()
                   if not (k == "seed" and config.mode is Mode.ANALYTIC)},
        "layout": layout_ref if isinstance(layout_ref, str) else "inline",
        "mode": config.mode.value,
        "operating_point_warnings": [str(w.message) for w in caught],
    }
    if config.mode is Mode.MONTE_CARLO:
        extra["seed"] = st.seed
    path = write_scan(st.out, scan, cals, extra)
    log.info("wrote %d traces and %s", len(scan), path)
    return EXIT_OK


def cmd_analyze(args, st: Settings) -> int:
    scan_dir = Path(args.scan)
    scan, cals, _ = read_scan(scan_dir)
    labels = st.data.get("labels")
    rmap = build_reflectance_map(scan, cals, snr_threshold=args.snr_threshold, labels=labels)
    write_reflectance_map(st.out, rmap, st.assumptions())
    log.info("worst case %.2f dB at %g nm", float(np.max(rmap.worst_case.values)),
             float(rmap.grid.points_nm[int(np.argmax(rmap.worst_case.values))]))
    return EXIT_OK


def cmd_fit_connector(args, st: Settings) -> int:
    conn = st.data.get("connector", {})
    spectrum = read_spectrum(Path(args.spectrum), unit=Unit.DB, kind=Kind.REFLECTANCE)
    convention = args.convention or conn.get("convention", "paper")
    n_core = float(args.n_core if args.n_core is not None else conn.get("n_core", DEFAULT_N_CORE))
    st.out.mkdir(parents=True, exist_ok=True)
    try:
        fit = fit_connector(spectrum, n_core, exact=not args.approximate, convention=convention)
    except FitFailure as exc:
        partial = exc.result.to_dict() if hasattr(exc.result, "to_dict") else exc.result
        write_json(st.out / "fit_failure.json", {"assumptions": st.assumptions(),
                                                 "error": str(exc), "diagnostics": partial})
        raise
    write_json(st.out / "fit.json", {"assumptions": st.assumptions(), **fit.to_dict()})
    write_model_vs_data(st.out / "model_vs_data.csv", fit, spectrum)
    log.info("h = %.4f um, n_d = %.4f, rms %.3g dB", fit.model.h_um, fit.model.n_d,
             fit.residual_rms_dB)
    return EXIT_OK


def cmd_security_report(args, st: Settings) -> int:
    sec = st.data.get("security", {})
    refl_src = args.reflectance or sec.get("reflectance_csv") or sec.get("reflectance_dB")
    if refl_src is None:
        raise ConfigurationError("no reflectance: pass --reflectance or set security.reflectance_csv")
    trans_src = (args.transmittance if args.transmittance is not None
                 else sec.get("transmittance_csv", sec.get("transmittance_dB")))
    if trans_src is None:
        raise ConfigurationError("no transmittance: pass --transmittance or set "
                                 "security.transmittance_dB / transmittance_csv")
    pmax_src = args.p_max_dbm if args.p_max_dbm is not None else sec.get("p_max_dBm")
    if pmax_src is None:
        raise ConfigurationError("no P_max: pass --p-max-dbm or set security.p_max_dBm")
    # command-line paths are relative to the working directory
    cli_base = Path(".")
    refl = constant_or_spectrum(refl_src, cli_base if args.reflectance else st.base,
                                Kind.REFLECTANCE, what="reflectance")
    trans = constant_or_spectrum(trans_src, cli_base if args.transmittance is not None
                                 else st.base, Kind.TRANSMITTANCE, what="transmittance")
    pmax = constant_or_spectrum(pmax_src, cli_base if args.p_max_dbm is not None else st.base,
                                Kind.POWER, Unit.DBM, what="p_max_dBm")
    budget = SecurityBudget(
        p_max_dBm=pmax,
        transmittance_dB=as_spectrum(trans, Kind.TRANSMITTANCE),
        reflectance_dB=as_spectrum(refl, Kind.REFLECTANCE),
        params=st.params,
    )
    report = broadband_leakage(budget, st.constants)
    write_leakage(st.out, report, st.assumptions())
    w = report.worst_case
    log.info("worst case chi = %.3e bits at %g nm (mu = %.3e)", w.chi_upper, w.wavelength_nm,
             w.mu_eve)
    return EXIT_OK


def cmd_verify_fidelity(args, st: Settings) -> int:
    result = bound_suite(dims=tuple(args.dims), trials=args.trials, mu_max=args.mu_max,
                         seed=st.seed)
    st.out.mkdir(parents=True, exist_ok=True)
    write_json(st.out / "fidelity.json", {"assumptions": st.assumptions(), **result})
    if result["total_violations"]:
        raise NumericalError(f"{result['total_violations']} fidelity bound violations")
    log.info("fidelity bound held in all %d trials", args.trials * len(args.dims))
    return EXIT_OK


# ----------------------------------------------------------------------------
# parser

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON pipeline config")
    p.add_argument("--seed", type=int, help="master RNG seed (unsigned 64-bit)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--mode", choices=["mc", "analytic"], help="simulation mode")
    p.add_argument("--f-eve-hz", type=float, help="Eve's pulse repetition rate")
    p.add_argument("--qber", type=float, help="quantum bit error rate attributed to Eve")
    p.add_argument("--constants", choices=["codata", "paper"],
                   help="Planck/light-speed values: exact CODATA or rounded")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thaotdr",
        description="Broadband photon-counting OTDR simulation and Trojan-horse leakage bounds.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a wavelength scan into a directory")
    _common(p)
    p.add_argument("--layout", help="layout JSON or reference:<alice|bob|two-reflector|...>")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="reflectance map from a scan directory")
    _common(p)
    p.add_argument("scan", help="scan directory written by 'simulate'")
    p.add_argument("--snr-threshold", type=float, default=5.0)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit-connector", help="fit the damaged-layer connector model")
    _common(p)
    p.add_argument("spectrum", help="CSV wavelength_nm,value with reflectance in dB")
    p.add_argument("--n-core", type=float)
    p.add_argument("--convention", choices=list(CONVENTIONS))
    p.add_argument("--approximate", action="store_true",
                   help="fit the small-phase approximation instead of the exact form")
    p.set_defaults(func=cmd_fit_connector)

    p = sub.add_parser("security-report", help="broadband leakage bound")
    _common(p)
    p.add_argument("--reflectance", help="reflectance CSV (e.g. worst_case.csv) or dB value")
    p.add_argument("--transmittance", help="transmittance CSV or dB value")
    p.add_argument("--p-max-dbm", help="Eve's maximum power: dBm value or CSV")
    p.set_defaults(func=cmd_security_report)

    p = sub.add_parser("verify-fidelity", help="randomised check of the fidelity bound")
    _common(p)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--dims", type=int, nargs="+", default=[2, 4, 8])
    p.add_argument("--mu-max", type=float, default=0.5)
    p.set_defaults(func=cmd_verify_fidelity)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        settings = Settings(args)
        return args.func(args, settings)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ThaOtdrError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
