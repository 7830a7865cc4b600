"""Fidelity between phase-coded Trojan-horse states on a truncated Fock space.

Eve's returned state for bit 0 is an arbitrary density matrix ``rho0``;
for bit 1 every photon-number coherence picks up a phase,
``rho1[m, n] = rho0[m, n] * exp(i*(phi_m - phi_n))``.  The functions here
compute the Uhlmann fidelity square root by brute force and check it
against the closed-form bound ``eta >= 2*p0 - 1 >= 1 - 2*mu``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainError, ValidationError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
EIG_CLAMP = 1e-10
TAIL_MASS_TOL = 1e-8
BOUND_TOL = 1e-9
DEFAULT_DIM = 8


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix in the Fock basis."""

    entries: np.ndarray

    def __post_init__(self):
        rho = np.array(self.entries, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 1:
            raise ValidationError(f"density matrix must be square, got shape {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
            raise ValidationError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > TRACE_TOL:
            raise ValidationError(f"density matrix trace is {np.trace(rho).real!r}, not 1")
        rho = 0.5 * (rho + rho.conj().T)
        if np.linalg.eigvalsh(rho)[0] < -EIG_CLAMP:
            raise ValidationError("density matrix is not positive semidefinite")
        rho.setflags(write=False)
        object.__setattr__(self, "entries", rho)

    @classmethod
    def from_vector(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        return cls(np.outer(psi, psi.conj()))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def vacuum_probability(self) -> float:
        return float(self.entries[0, 0].real)

    @property
    def mean_photon_number(self) -> float:
        return float(np.dot(np.arange(self.dim), np.diag(self.entries).real))


@dataclass(frozen=True)
class PhaseProfile:
    """Phase ``phi_m`` imprinted on the m-photon component (``phi_0 = 0``)."""

    phases: np.ndarray

    def __post_init__(self):
        ph = np.array(self.phases, dtype=float)
        if ph.ndim != 1 or ph.size == 0:
            raise ValidationError("phase profile must be a non-empty vector")
        ph = ph - ph[0]
        ph.setflags(write=False)
        object.__setattr__(self, "phases", ph)

    @classmethod
    def pi_profile(cls, dim: int) -> "PhaseProfile":
        """``phi_m = m*pi``: every odd photon-number difference is a pi shift."""
        return cls(np.pi * np.arange(dim))

    def __len__(self):
        return int(self.phases.size)


@dataclass(frozen=True)
class FidelityResult:
    eta: float
    p0: float
    mu: float
    bound_a8: float
    bound_mu: float

    @property
    def holds(self) -> bool:
        return (self.eta >= self.bound_a8 - BOUND_TOL
                and self.bound_a8 >= self.bound_mu - BOUND_TOL)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["holds"] = self.holds
        return d


def _eigh_psd(mat: np.ndarray):
    """Eigendecomposition with the tolerance policy for small negatives."""
    w, v = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    if w[0] < -EIG_CLAMP:
        raise ValidationError(f"matrix has eigenvalue {w[0]:.3e} below -{EIG_CLAMP:g}")
    return np.clip(w, 0.0, None), v


def apply_phase_code(rho0: DensityMatrix, phases: PhaseProfile) -> DensityMatrix:
    if len(phases) != rho0.dim:
        raise ValidationError(
            f"phase profile length {len(phases)} does not match dimension {rho0.dim}"
        )
    u = np.exp(1j * phases.phases)
    return DensityMatrix(rho0.entries * np.outer(u, u.conj()))


def matrix_sqrt(rho) -> np.ndarray:
    """Hermitian PSD square root via eigendecomposition."""
    mat = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    w, v = _eigh_psd(mat)
    return (v * np.sqrt(w)) @ v.conj().T


def sqrt_fidelity(a: DensityMatrix, b: DensityMatrix) -> float:
    """Uhlmann fidelity square root ``tr sqrt(sqrt(b) a sqrt(b))``.

    Evaluated as the trace norm of ``sqrt(a) sqrt(b)`` in the two
    eigenbases, which keeps rank-deficient (pure) inputs accurate to
    rounding instead of to its square root.
    """
    if a.dim != b.dim:
        raise ValidationError(f"dimension mismatch: {a.dim} vs {b.dim}")
    wa, va = _eigh_psd(a.entries)
    wb, vb = _eigh_psd(b.entries)
    core = (np.sqrt(wa)[:, None] * (va.conj().T @ vb)) * np.sqrt(wb)[None, :]
    return float(np.sum(np.linalg.svd(core, compute_uv=False)))


def verify_a8_bound(rho0: DensityMatrix) -> FidelityResult:
    """Fidelity of ``rho0`` against its pi-coded partner and both closed-form bounds."""
    rho1 = apply_phase_code(rho0, PhaseProfile.pi_profile(rho0.dim))
    p0 = rho0.vacuum_probability
    mu = rho0.mean_photon_number
    return FidelityResult(
        eta=sqrt_fidelity(rho0, rho1),
        p0=p0,
        mu=mu,
        bound_a8=2.0 * p0 - 1.0,
        bound_mu=1.0 - 2.0 * mu,
    )


def optimal_tha_states(mu: float, dim: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """The pure pair ``sqrt(1-mu)|0> +/- sqrt(mu)|1>`` padded to ``dim`` levels."""
    if not (0.0 <= mu <= 1.0):
        raise DomainError(f"mu must lie in [0, 1], got {mu!r}")
    if dim < 2:
        raise DomainError("Fock truncation must keep at least two levels")
    xi0 = np.zeros(dim, dtype=complex)
    xi1 = np.zeros(dim, dtype=complex)
    xi0[0] = xi1[0] = math.sqrt(1.0 - mu)
    xi0[1] = math.sqrt(mu)
    xi1[1] = -math.sqrt(mu)
    return xi0, xi1


def coherent_state(alpha: complex, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Truncated coherent state, renormalised after checking the tail mass."""
    n = np.arange(dim)
    log_fact = np.array([math.lgamma(k + 1) for k in n])
    mag = abs(alpha)
    if mag == 0:
        amps = np.zeros(dim, dtype=complex)
        amps[0] = 1.0
        return amps
    amps = np.exp(-0.5 * mag**2 + n * math.log(mag) - 0.5 * log_fact) * np.exp(
        1j * n * np.angle(alpha)
    )
    tail = 1.0 - float(np.sum(np.abs(amps) ** 2))
    if tail > TAIL_MASS_TOL:
        raise ValidationError(
            f"coherent state |alpha|^2={mag**2:g} leaves {tail:.2e} probability beyond "
            f"{dim} levels (limit {TAIL_MASS_TOL:g})"
        )
    return amps / np.linalg.norm(amps)


def random_density_matrix(dim: int, rng: np.random.Generator, mu_max: float | None = None
                          ) -> DensityMatrix:
    """Hilbert-Schmidt random state, optionally mixed with vacuum.

    With ``mu_max`` set, a target mean photon number is drawn uniformly
    from ``[0, mu_max]`` and reached by mixing in ``|0><0|``.
    """
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    if mu_max is not None:
        mu = float(np.dot(np.arange(dim), np.diag(rho).real))
        target = rng.uniform(0.0, mu_max)
        if mu > target:
            t = 1.0 - target / mu
            rho = (1.0 - t) * rho
            rho[0, 0] += t
    return DensityMatrix(rho)


def bound_suite(dims=(2, 4, 8), trials: int = 1000, mu_max: float = 0.5, seed: int = 0,
                optimal_mus=(0.01, 0.1, 0.25, 0.5)) -> dict:
    """Randomised check of the pi-coded fidelity bound.

    Each (dim, trial) pair draws from its own child of one master
    :class:`numpy.random.SeedSequence`, so results do not depend on the
    order of evaluation.
    """
    root = np.random.SeedSequence(seed)
    per_dim = {}
    for dim, child in zip(dims, root.spawn(len(dims))):
        violations = 0
        min_gap = math.inf
        worst = None
        for trial_seq in child.spawn(trials):
            res = verify_a8_bound(random_density_matrix(dim, np.random.default_rng(trial_seq),
                                                        mu_max))
            gap = res.eta - res.bound_mu
            if res.eta < res.bound_mu - BOUND_TOL or not res.holds:
                violations += 1
            if gap < min_gap:
                min_gap, worst = gap, res
        per_dim[str(dim)] = {
            "trials": trials,
            "violations": violations,
            "min_eta_minus_bound_mu": min_gap,
            "tightest": worst.to_dict(),
        }
    optimal = []
    for mu in optimal_mus:
        xi0, xi1 = optimal_tha_states(mu, 2)
        res = verify_a8_bound(DensityMatrix.from_vector(xi0))
        optimal.append({"mu": mu, **res.to_dict(),
                        "eta_minus_bound_mu": res.eta - res.bound_mu,
                        "overlap": float(abs(np.vdot(xi0, xi1)))})
    return {
        "seed": seed,
        "mu_max": mu_max,
        "tolerance": BOUND_TOL,
        "dims": per_dim,
        "optimal_states": optimal,
        "total_violations": sum(d["violations"] for d in per_dim.values()),
    }
