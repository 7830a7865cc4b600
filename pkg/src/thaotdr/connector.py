"""Thin damaged-layer (Fabry-Perot) model of a physical-contact connector.

Polishing leaves a layer of thickness ``h`` with a slightly raised index
``n_d`` on the fibre end face.  Two weak interfaces form a low-finesse
cavity, so the reflectance is

    R(lambda) = 2 R0 (1 - cos(phi)),   R0 = ((n_core - n_d) / (n_core + n_d))**2

with ``phi = 4 pi n_d (2h) / lambda`` in the default convention and
``phi = 4 pi n_d h / lambda`` in the standard round-trip convention.  For
small ``phi`` this reduces to ``R0 * phi**2``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from .errors import DomainError, FitFailure, ValidationError
from .spectral import BELOW_FLOOR, Spectrum, Unit

DEFAULT_N_CORE = 1.454
N_D_BOUNDS = (1.46, 1.6)
H_BOUNDS_UM = (0.0, 0.11)
N_CORE_RANGE = (1.4, 1.5)
MAX_RESIDUAL_DB = 10.0
MIN_POINTS = 5
START_GRID = 10

CONVENTIONS = ("paper", "standard")

# Open bounds are approached but never touched by the optimiser: h = 0
# produces no reflection at all and would make the dB residual infinite.
_H_FLOOR_UM = 1e-6
_EDGE = 1e-9


@dataclass(frozen=True)
class ConnectorModel:
    """Damaged-layer parameters: thickness ``h_um`` (µm) and index ``n_d``."""

    h_um: float
    n_d: float
    n_core: float = DEFAULT_N_CORE
    convention: str = "paper"

    def __post_init__(self):
        lo, hi = N_D_BOUNDS
        if not (lo < self.n_d < hi):
            raise ValidationError(f"n_d={self.n_d!r} outside the open interval ({lo}, {hi})")
        lo, hi = H_BOUNDS_UM
        if not (lo <= self.h_um <= hi):
            raise ValidationError(f"h_um={self.h_um!r} outside [{lo}, {hi}]")
        lo, hi = N_CORE_RANGE
        if not (lo <= self.n_core <= hi):
            raise ValidationError(f"n_core={self.n_core!r} outside [{lo}, {hi}]")
        if self.convention not in CONVENTIONS:
            raise ValidationError(f"unknown phase convention {self.convention!r}")

    @property
    def r0(self) -> float:
        return fresnel_r0(self.n_core, self.n_d)

    def phase(self, wavelength_nm):
        return cavity_phase(self.h_um, self.n_d, wavelength_nm, self.convention)

    def to_dict(self) -> dict:
        return {"h_um": self.h_um, "n_d": self.n_d, "n_core": self.n_core,
                "convention": self.convention, "r0": self.r0}


@dataclass(frozen=True)
class FitResult:
    model: ConnectorModel
    residual_rms_dB: float
    covariance: np.ndarray | None
    condition_number: float
    correlation_h_nd: float
    used_exact_formula: bool
    at_boundary: bool
    n_points: int
    n_starts: int
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        cov = None if self.covariance is None else self.covariance.tolist()
        return {
            "model": self.model.to_dict(),
            "residual_rms_dB": self.residual_rms_dB,
            "covariance": cov,
            "condition_number": self.condition_number,
            "correlation_h_nd": self.correlation_h_nd,
            "used_exact_formula": self.used_exact_formula,
            "at_boundary": self.at_boundary,
            "n_points": self.n_points,
            "n_starts": self.n_starts,
            "diagnostics": self.diagnostics,
        }


def fresnel_r0(n_core: float, n_d: float) -> float:
    """Normal-incidence power reflectance of the core / layer interface."""
    if not (n_core > 1 and n_d > 1) or not (math.isfinite(n_core) and math.isfinite(n_d)):
        raise DomainError(f"refractive indices must be finite and > 1, got {n_core!r}, {n_d!r}")
    return ((n_core - n_d) / (n_core + n_d)) ** 2


def cavity_phase(h_um, n_d, wavelength_nm, convention: str = "paper"):
    wl = np.asarray(wavelength_nm, dtype=float)
    if np.any(wl <= 0):
        raise DomainError("wavelength must be positive")
    path = 2.0 * h_um if convention == "paper" else h_um
    phi = 4.0 * math.pi * n_d * (path * 1000.0) / wl
    return float(phi) if phi.ndim == 0 else phi


def _reflectance_linear(h_um, n_d, n_core, wavelength_nm, exact, convention):
    r0 = fresnel_r0(n_core, n_d)
    phi = cavity_phase(h_um, n_d, wavelength_nm, convention)
    if exact:
        # 1 - cos(phi) = 2 sin^2(phi/2) avoids cancellation for thin layers
        return 4.0 * r0 * np.sin(0.5 * np.asarray(phi)) ** 2
    return r0 * np.asarray(phi) ** 2


def connector_reflectance_db(model: ConnectorModel, wavelength_nm, exact: bool = True):
    """Reflectance in dB; ``-inf`` when the cavity vanishes (``h = 0``)."""
    lin = _reflectance_linear(model.h_um, model.n_d, model.n_core, wavelength_nm, exact,
                              model.convention)
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(lin)
    out = np.where(lin > 0, out, BELOW_FLOOR)
    return float(out) if out.ndim == 0 else out


def _start_points(n: int = START_GRID):
    """Cell centres of an ``n x n`` grid spanning the bound box."""
    frac = (np.arange(n) + 0.5) / n
    hs = H_BOUNDS_UM[0] + frac * (H_BOUNDS_UM[1] - H_BOUNDS_UM[0])
    nds = N_D_BOUNDS[0] + frac * (N_D_BOUNDS[1] - N_D_BOUNDS[0])
    return [(float(h), float(nd)) for h in hs for nd in nds]


def fit_connector(reflectance: Spectrum, n_core: float = DEFAULT_N_CORE, *,
                  exact: bool = True, convention: str = "paper",
                  workers: int | None = None) -> FitResult:
    """Bounded least-squares fit of ``(h_um, n_d)`` to a dB reflectance spectrum.

    Every start of a 10x10 grid over the parameter box is refined with
    a trust-region solver.  The lowest cost wins; equal costs (to 1e-12
    relative) are broken by the lowest ``h`` and then the lowest ``n_d``,
    so the result does not depend on evaluation order.

    Raises
    ------
    ValidationError
        Fewer than five finite points or non-dB input.
    FitFailure
        No start converges or the best RMS residual exceeds 10 dB.
    """
    if reflectance.unit is not Unit.DB:
        raise ValidationError("connector fit expects a reflectance spectrum in dB")
    if not (N_CORE_RANGE[0] <= n_core <= N_CORE_RANGE[1]):
        raise ValidationError(f"n_core={n_core!r} outside {list(N_CORE_RANGE)}")
    wl = reflectance.wavelengths_nm
    data = reflectance.values
    keep = np.isfinite(data)
    wl, data = wl[keep], data[keep]
    if wl.size < MIN_POINTS:
        raise ValidationError(f"connector fit needs at least {MIN_POINTS} finite points, "
                              f"got {wl.size}")

    lower = np.array([_H_FLOOR_UM, N_D_BOUNDS[0] + _EDGE])
    upper = np.array([H_BOUNDS_UM[1], N_D_BOUNDS[1] - _EDGE])

    def residuals(p):
        lin = _reflectance_linear(p[0], p[1], n_core, wl, exact, convention)
        return 10.0 * np.log10(np.maximum(lin, 1e-300)) - data

    k = 4.0 * math.pi * 1000.0 * (2.0 if convention == "paper" else 1.0) / wl
    to_db = 10.0 / math.log(10.0)

    def jacobian(p):
        h, nd = p
        dln_r0 = 2.0 / (nd - n_core) - 2.0 / (n_core + nd) if nd != n_core else 0.0
        if exact:
            cot = 1.0 / np.tan(0.5 * k * nd * h)
            d_h = cot * k * nd
            d_nd = dln_r0 + cot * k * h
        else:
            d_h = np.full(wl.shape, 2.0 / h)
            d_nd = np.full(wl.shape, dln_r0 + 2.0 / nd)
        return to_db * np.column_stack([d_h, d_nd])

    def refine(start):
        x0 = np.clip(np.array(start), lower, upper)
        try:
            sol = least_squares(residuals, x0, jac=jacobian, bounds=(lower, upper), method="trf",
                                x_scale=[0.01, 0.01], xtol=1e-12, ftol=1e-12, gtol=1e-12,
                                max_nfev=1000)
        except (ValueError, FloatingPointError):
            return None
        if not np.all(np.isfinite(sol.fun)):
            return None
        return sol

    starts = _start_points()
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sols = list(pool.map(refine, starts))
    else:
        sols = [refine(s) for s in starts]
    good = [s for s in sols if s is not None]
    if not good:
        raise FitFailure("every start of the connector fit diverged",
                         result={"n_starts": len(starts)})

    best_cost = min(s.cost for s in good)
    tol = 1e-12 * max(best_cost, 1e-30) + 1e-30
    tied = [s for s in good if s.cost <= best_cost + tol]
    best = min(tied, key=lambda s: (float(s.x[0]), float(s.x[1])))

    rms = float(np.sqrt(np.mean(best.fun**2)))
    h_fit, nd_fit = (float(v) for v in best.x)
    model = ConnectorModel(h_fit, nd_fit, n_core, convention)

    jac = best.jac
    jtj = jac.T @ jac
    cond = float(np.linalg.cond(jtj)) if np.all(np.isfinite(jtj)) else math.inf
    dof = max(wl.size - 2, 1)
    try:
        inv = np.linalg.inv(jtj)
        cov = inv * (2.0 * best.cost / dof)
        corr = float(inv[0, 1] / math.sqrt(inv[0, 0] * inv[1, 1]))
    except (np.linalg.LinAlgError, ValueError, ZeroDivisionError):
        cov, corr = None, math.nan
    if cov is not None and not np.all(np.isfinite(cov)):
        cov, corr = None, math.nan

    span = upper - lower
    at_boundary = bool(np.any(np.abs(best.x - lower) < 1e-6 * span)
                       or np.any(np.abs(best.x - upper) < 1e-6 * span))
    diagnostics = {
        "converged_starts": len(good),
        "tied_starts": len(tied),
        "status": int(best.status),
        "max_abs_residual_dB": float(np.max(np.abs(best.fun))),
    }
    result = FitResult(model, rms, cov, cond, corr, exact, at_boundary, int(wl.size),
                       len(starts), diagnostics)
    if not math.isfinite(rms) or rms > MAX_RESIDUAL_DB:
        raise FitFailure(f"connector fit residual {rms:.3g} dB exceeds {MAX_RESIDUAL_DB} dB",
                         result=result)
    return result


def model_curve(model: ConnectorModel, wavelengths_nm, exact: bool = True) -> np.ndarray:
    return np.asarray(connector_reflectance_db(model, np.asarray(wavelengths_nm, dtype=float),
                                               exact))


def write_model_vs_data(path, fit: FitResult, data: Spectrum) -> None:
    """CSV with columns ``wavelength_nm,data_dB,model_dB,residual_dB``."""
    wl = data.wavelengths_nm
    model = model_curve(fit.model, wl, fit.used_exact_formula)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["wavelength_nm", "data_dB", "model_dB", "residual_dB"])
        for x, d, m in zip(wl, data.values, model):
            w.writerow([repr(float(x)), repr(float(d)), repr(float(m)), repr(float(d - m))])


def with_convention(model: ConnectorModel, convention: str) -> ConnectorModel:
    return replace(model, convention=convention)
