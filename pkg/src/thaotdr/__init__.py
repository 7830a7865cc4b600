"""Broadband photon-counting OTDR simulation and Trojan-horse leakage bounds.

Modules by task:

* :mod:`thaotdr.spectral` - wavelength grids, spectra, dB arithmetic, constants
* :mod:`thaotdr.security` - photon number and Holevo bound for a reflected attack
* :mod:`thaotdr.fidelity` - fidelity of phase-coded states and its closed-form bound
* :mod:`thaotdr.simulator` - Monte-Carlo and analytic photon-counting OTDR traces
* :mod:`thaotdr.analysis` - calibrated reflectance, peaks and noise floor
* :mod:`thaotdr.connector` - damaged-layer connector model and fit
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    DomainError,
    FitFailure,
    NumericalError,
    RangeAmbiguityError,
    RangeError,
    ThaOtdrError,
    ValidationError,
)
from .kernels import BACKEND  # noqa: E402
from .spectral import (  # noqa: E402
    BELOW_FLOOR,
    CODATA,
    PAPER_ROUNDED,
    PhysicalConstants,
    Spectrum,
    WavelengthGrid,
)

__all__ = [
    "BACKEND",
    "BELOW_FLOOR",
    "CODATA",
    "PAPER_ROUNDED",
    "ConfigurationError",
    "DomainError",
    "FitFailure",
    "NumericalError",
    "PhysicalConstants",
    "RangeAmbiguityError",
    "RangeError",
    "Spectrum",
    "ThaOtdrError",
    "ValidationError",
    "WavelengthGrid",
    "__version__",
]
