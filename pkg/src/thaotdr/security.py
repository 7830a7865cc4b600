"""Trojan-horse leakage bounds from power, transmittance and reflectance.

The chain evaluated at each wavelength is::

    P_eve[dBm] = P_max[dBm] + T[dB] + R[dB]
    mu_eve     = P_eve[W] * lambda / (f_eve * h * c)
    eta       >= 1 - 2 * mu_eve
    eps        = 1 - 2 * Q
    chi       <= h2((1 - eta * eps) / 2)

At the photon numbers of practical interest (``mu ~ 1e-16``) the product
``eta * eps`` equals one to within a few ulps, so the entropy argument is
formed algebraically as ``mu + Q - 2*mu*Q`` instead of by subtraction.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import mpmath
import numpy as np

from .errors import ConfigurationError, DomainError, ValidationError
from .spectral import (
    CODATA,
    BELOW_FLOOR,
    PhysicalConstants,
    Spectrum,
    Unit,
    common_grid,
    dbm_to_watts,
    sample,
)

DEFAULT_F_EVE_HZ = 5e5

_MP_DPS = 50


@dataclass(frozen=True)
class LeakageParams:
    qber: float = 0.0
    f_eve_Hz: float = DEFAULT_F_EVE_HZ

    def __post_init__(self):
        if not (0.0 <= self.qber <= 0.5):
            raise DomainError(f"QBER must lie in [0, 0.5], got {self.qber!r}")
        if not (self.f_eve_Hz > 0) or not math.isfinite(self.f_eve_Hz):
            raise DomainError(f"f_eve must be positive, got {self.f_eve_Hz!r}")


@dataclass(frozen=True)
class SecurityBudget:
    """Eve's power ceiling and the defence spectra at her disposal.

    ``p_max_dBm`` is either a scalar or a dBm :class:`Spectrum`.
    """

    p_max_dBm: float | Spectrum
    transmittance_dB: Spectrum
    reflectance_dB: Spectrum
    params: LeakageParams = LeakageParams()

    def __post_init__(self):
        for name in ("transmittance_dB", "reflectance_dB"):
            spec = getattr(self, name)
            if spec.unit is not Unit.DB:
                raise ValidationError(f"{name} must be expressed in dB, got {spec.unit.value}")
            if np.any(spec.values > 0):
                raise ValidationError(f"{name} exceeds 0 dB (would imply gain)")
        if isinstance(self.p_max_dBm, Spectrum):
            if self.p_max_dBm.unit not in (Unit.DBM, Unit.DB):
                raise ValidationError("P_max spectrum must be in dBm")
        elif not math.isfinite(float(self.p_max_dBm)):
            raise ValidationError("scalar P_max must be finite")


@dataclass(frozen=True)
class LeakageRecord:
    wavelength_nm: float
    p_eve_dBm: float
    mu_eve: float
    eta_lb: float
    chi_upper: float


@dataclass(frozen=True)
class LeakageReport:
    records: tuple[LeakageRecord, ...]
    worst_case: LeakageRecord
    params: LeakageParams
    constants: PhysicalConstants

    def assumptions(self) -> dict:
        return {
            "f_eve_Hz": self.params.f_eve_Hz,
            "qber": self.params.qber,
            "constants": self.constants.name,
            "planck_J_per_Hz": self.constants.planck_J_per_Hz,
            "light_speed_m_per_s": self.constants.light_speed_m_per_s,
            "p_eve_rule": "P_max[dBm] + T[dB] + R[dB]",
            "eta_rule": "max(1 - 2*mu_eve, -1)",
            "resampling": "linear interpolation onto union of nodes in common range",
        }

    def summary(self) -> dict:
        return {
            "worst_case": asdict(self.worst_case),
            "n_wavelengths": len(self.records),
            "assumptions": self.assumptions(),
        }


def binary_entropy(x) -> float:
    """Binary entropy in bits, ``h2(0) = h2(1) = 0``.

    Accepts floats or :mod:`mpmath` numbers; the latter are evaluated at
    50 significant digits.
    """
    if isinstance(x, mpmath.mpf):
        with mpmath.workdps(_MP_DPS):
            if x < 0 or x > 1:
                raise DomainError(f"binary entropy argument must lie in [0, 1], got {x}")
            if x == 0 or x == 1:
                return 0.0
            val = -x * mpmath.log(x, 2) - (1 - x) * mpmath.log(1 - x, 2)
            return float(val)
    x = float(x)
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"binary entropy argument must lie in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    # log1p keeps the (1-x) term accurate for tiny x
    return (-x * math.log(x) - (1.0 - x) * math.log1p(-x)) / math.log(2.0)


def eta_lower_bound(mu_eve: float) -> float:
    """Lower bound on the fidelity square root between the two returned states."""
    if not (mu_eve >= 0):
        raise DomainError(f"mean photon number must be >= 0, got {mu_eve!r}")
    return max(1.0 - 2.0 * mu_eve, -1.0)


def epsilon_from_qber(q: float) -> float:
    if not (0.0 <= q <= 0.5):
        raise DomainError(f"QBER must lie in [0, 0.5], got {q!r}")
    return 1.0 - 2.0 * q


def holevo_bound(eta, epsilon) -> float:
    """``h2((1 - eta*epsilon)/2)`` evaluated at 50 digits.

    Pass :class:`mpmath.mpf` values when ``eta`` is closer to one than
    double precision can represent; a float ``eta`` has already lost those
    digits.  :func:`holevo_from_mu` avoids the problem altogether.
    """
    with mpmath.workdps(_MP_DPS):
        e = mpmath.mpf(eta)
        s = mpmath.mpf(epsilon)
        if not (-1 <= e <= 1 and -1 <= s <= 1):
            raise DomainError(f"eta and epsilon must lie in [-1, 1], got {eta}, {epsilon}")
        x = (1 - e * s) / 2
        return binary_entropy(x)


def holevo_from_mu(mu_eve: float, qber: float) -> float:
    """Holevo bound for ``eta = max(1 - 2*mu, -1)`` and ``eps = 1 - 2*Q``.

    ``(1 - eta*eps)/2`` expands to ``mu + Q - 2*mu*Q`` while the clamp is
    inactive, which is evaluated without cancellation.
    """
    eps = epsilon_from_qber(qber)
    if not (mu_eve >= 0):
        raise DomainError(f"mean photon number must be >= 0, got {mu_eve!r}")
    if mu_eve >= 1.0:
        return holevo_bound(-1.0, eps)
    with mpmath.workdps(_MP_DPS):
        mu = mpmath.mpf(mu_eve)
        q = mpmath.mpf(qber)
        return binary_entropy(mu + q - 2 * mu * q)


def mu_eve_from_power(p_eve_dBm: float, wavelength_nm: float, f_eve_Hz: float,
                      constants: PhysicalConstants = CODATA) -> float:
    """Mean photon number per pulse returned to Eve."""
    if not (f_eve_Hz > 0) or not math.isfinite(f_eve_Hz):
        raise DomainError(f"f_eve must be positive, got {f_eve_Hz!r}")
    if not (wavelength_nm > 0):
        raise DomainError(f"wavelength must be positive, got {wavelength_nm!r}")
    if math.isnan(p_eve_dBm) or p_eve_dBm == math.inf:
        raise DomainError(f"invalid power {p_eve_dBm!r} dBm")
    p_w = dbm_to_watts(p_eve_dBm)
    return p_w * wavelength_nm * 1e-9 / (
        f_eve_Hz * constants.planck_J_per_Hz * constants.light_speed_m_per_s
    )


def eve_power(p_max_dBm: float, t_dB: float, r_dB: float) -> float:
    """Power returned to Eve in dBm; ``T`` and ``R`` must be losses (<= 0 dB)."""
    if t_dB > 0 or r_dB > 0:
        raise ValidationError(f"T and R must be <= 0 dB, got T={t_dB!r}, R={r_dB!r}")
    if math.isnan(p_max_dBm) or math.isnan(t_dB) or math.isnan(r_dB):
        raise ValidationError("NaN in power budget")
    if t_dB == BELOW_FLOOR or r_dB == BELOW_FLOOR:
        return BELOW_FLOOR
    return p_max_dBm + t_dB + r_dB


def leakage_at(wavelength_nm: float, p_max_dBm: float, t_dB: float, r_dB: float,
               params: LeakageParams, constants: PhysicalConstants = CODATA) -> LeakageRecord:
    p_eve = eve_power(p_max_dBm, t_dB, r_dB)
    mu = mu_eve_from_power(p_eve, wavelength_nm, params.f_eve_Hz, constants)
    return LeakageRecord(
        wavelength_nm=float(wavelength_nm),
        p_eve_dBm=float(p_eve),
        mu_eve=mu,
        eta_lb=eta_lower_bound(mu),
        chi_upper=holevo_from_mu(mu, params.qber),
    )


def broadband_leakage(budget: SecurityBudget, constants: PhysicalConstants = CODATA,
                      workers: int = 1) -> LeakageReport:
    """Evaluate the leakage chain at every node of the common wavelength range.

    Spectra on different grids are interpolated onto the union of their
    nodes inside the overlap.  The worst case is the largest ``chi_upper``;
    ties go to the shortest wavelength.
    """
    spectra = [budget.transmittance_dB, budget.reflectance_dB]
    if isinstance(budget.p_max_dBm, Spectrum):
        spectra.append(budget.p_max_dBm)
    grid = common_grid(*spectra)
    wls = grid.points_nm
    t = sample(budget.transmittance_dB, wls)
    r = sample(budget.reflectance_dB, wls)
    if isinstance(budget.p_max_dBm, Spectrum):
        p = sample(budget.p_max_dBm, wls)
    else:
        p = np.full(wls.shape, float(budget.p_max_dBm))

    def one(i):
        return leakage_at(float(wls[i]), float(p[i]), float(t[i]), float(r[i]),
                          budget.params, constants)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = tuple(pool.map(one, range(len(wls))))
    else:
        records = tuple(one(i) for i in range(len(wls)))
    if not records:
        raise ConfigurationError("empty wavelength overlap")
    worst = records[0]
    for rec in records[1:]:
        if rec.chi_upper > worst.chi_upper:
            worst = rec
    return LeakageReport(records, worst, budget.params, constants)
