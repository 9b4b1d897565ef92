"""Fisher information, Cramer-Rao bound, fidelity and deformation.

Derivatives with respect to ``gamma`` are taken at fixed physical time
``t`` and fixed rescaled controls ``u1, u2``; then ``d/d gamma = t d/d tau``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .dynamics import analytic_matrix
from .errors import PreconditionError, UnboundedVarianceError
from .fock import (
    DensityMatrix,
    StateVector,
    SystemConfig,
    hermitian_eigendecomposition,
    is_hermitian,
    matrix_sqrt_psd,
)

DEFAULT_H_REL = 1e-5
DEFAULT_FLOOR = 1e-12
PURE_PURITY = 1.0 - 1e-8
TAU_STAR = 2.0


@dataclass(frozen=True)
class QfiResult:
    tau: float
    gamma: float
    value: float
    method: Literal["exact_eig", "pure_state", "closed_form"]
    n_measurements: Optional[int] = None

    def __post_init__(self):
        if not self.value >= 0:
            raise PreconditionError(f"QFI must be non-negative, got {self.value!r}")


@dataclass(frozen=True)
class FidelityResult:
    tau: float
    value: float
    method: Literal["uhlmann", "pure_closed_form"]


def drho_dgamma(config: SystemConfig, t: float, h_rel: float = DEFAULT_H_REL) -> np.ndarray:
    """Central difference of the closed-form state in ``gamma`` at fixed ``t``."""
    if not 1e-8 <= h_rel <= 1e-3:
        raise PreconditionError(f"h_rel must lie in [1e-8, 1e-3], got {h_rel}")
    if t < 0:
        raise PreconditionError(f"t must be >= 0, got {t}")
    if t == 0:
        return np.zeros((config.dim, config.dim), dtype=complex)
    g = config.gamma
    up = analytic_matrix(config, g * (1 + h_rel) * t)
    down = analytic_matrix(config, g * (1 - h_rel) * t)
    return (up - down) / (2 * h_rel * g)


def qfi_exact(rho: DensityMatrix, drho: np.ndarray, floor: float = DEFAULT_FLOOR,
              tau: float = float("nan"), gamma: float = float("nan")) -> QfiResult:
    """Eigenbasis formula ``2 sum |<m|drho|n>|^2 / (p_m + p_n)``.

    Pairs whose eigenvalue sum does not exceed ``floor`` are skipped.
    """
    drho = np.asarray(drho, dtype=complex)
    if drho.shape != rho.matrix.shape:
        raise PreconditionError("drho and rho have different shapes")
    if not is_hermitian(drho, tol=1e-10 * max(1.0, float(np.max(np.abs(drho))))):
        raise PreconditionError("drho must be Hermitian")
    p, v = hermitian_eigendecomposition(rho.matrix)
    p = np.clip(p, 0.0, None)
    d = v.conj().T @ drho @ v
    denom = p[:, None] + p[None, :]
    mask = denom > floor
    value = 2.0 * float(np.sum(np.abs(d[mask]) ** 2 / denom[mask]))
    return QfiResult(tau, gamma, value, "exact_eig")


def qfi_exact_state(config: SystemConfig, tau: float, h_rel: float = DEFAULT_H_REL,
                    floor: float = DEFAULT_FLOOR) -> QfiResult:
    """Exact QFI of the closed-form state at rescaled time ``tau``."""
    from .dynamics import evolve_analytic

    t = tau / config.gamma
    rho = evolve_analytic(config, tau).state
    return qfi_exact(rho, drho_dgamma(config, t, h_rel), floor, tau=tau, gamma=config.gamma)


def qfi_pure(psi: StateVector, dpsi: StateVector, tau: float = float("nan"),
             gamma: float = float("nan")) -> QfiResult:
    """``4 (<dpsi|dpsi> - |<psi|dpsi>|^2)`` on the normalized state.

    An unnormalized ``psi`` (and the derivative of that unnormalized path)
    is normalized first, with the derivative corrected for the changing
    norm.
    """
    if psi.dim != dpsi.dim:
        raise PreconditionError(f"dimension mismatch: {psi.dim} vs {dpsi.dim}")
    x = psi.amplitudes
    dx = dpsi.amplitudes
    norm = math.sqrt(psi.norm2)
    dnorm = float(np.vdot(x, dx).real) / norm
    phi = x / norm
    dphi = dx / norm - x * dnorm / norm**2
    val = 4.0 * (float(np.vdot(dphi, dphi).real) - abs(np.vdot(phi, dphi)) ** 2)
    return QfiResult(tau, gamma, max(val, 0.0), "pure_state")


def qfi_pure_literal(psi: StateVector, dpsi: StateVector) -> complex:
    """Verbatim ``4 (<dpsi|dpsi> - (<psi|dpsi>)^2)`` with no normalization or modulus.

    Can be complex or negative; only for figure reproduction.
    """
    if psi.dim != dpsi.dim:
        raise PreconditionError(f"dimension mismatch: {psi.dim} vs {dpsi.dim}")
    overlap = np.vdot(psi.amplitudes, dpsi.amplitudes)
    return complex(4.0 * (np.vdot(dpsi.amplitudes, dpsi.amplitudes) - overlap**2))


def closed_form_qfi(tau, alpha2, u1, u2, gamma):
    """tau^2/gamma^2 |alpha|^2 e^{-tau} (1 + 4 (u1 + u2 + 2 tau |alpha|^2 u2)^2)."""
    ctrl = u1 + u2 + 2.0 * tau * alpha2 * u2
    return tau * tau / (gamma * gamma) * alpha2 * math.exp(-tau) * (1.0 + 4.0 * ctrl * ctrl)


def qfi_approx_closed(tau: float, config: SystemConfig) -> QfiResult:
    if tau < 0:
        raise PreconditionError(f"tau must be >= 0, got {tau}")
    val = closed_form_qfi(tau, config.nbar, config.u1, config.u2, config.gamma)
    return QfiResult(tau, config.gamma, val, "closed_form")


def cramer_rao_bound(qfi: QfiResult, n_measurements: int) -> float:
    """Lower bound ``1 / (N I)`` on the variance of any unbiased estimator of gamma."""
    if int(n_measurements) != n_measurements or n_measurements < 1:
        raise PreconditionError(f"n_measurements must be a positive integer, got {n_measurements!r}")
    if qfi.value <= 0:
        raise UnboundedVarianceError("zero Fisher information: variance is unbounded")
    return 1.0 / (n_measurements * qfi.value)


def fidelity_uhlmann(rho0: DensityMatrix, rho: DensityMatrix, tau: float = float("nan")) -> FidelityResult:
    """``(Tr sqrt(sqrt(rho) rho0 sqrt(rho)))^2`` between the trace-normalized states.

    Truncated states lose a little trace; both arguments are renormalized
    first so that ``F(rho, rho) = 1``.  If either state is pure the
    overlap ``<phi|rho|phi>`` is used directly.
    """
    if rho0.dim != rho.dim:
        raise PreconditionError(f"dimension mismatch: {rho0.dim} vs {rho.dim}")
    r0 = rho0.matrix / rho0.trace
    r1 = rho.matrix / rho.trace
    for pure, other in ((r0, r1), (r1, r0)):
        if np.einsum("ij,ji->", pure, pure).real > PURE_PURITY:
            w, v = hermitian_eigendecomposition(pure)
            phi = v[:, -1]
            val = float(np.vdot(phi, other @ phi).real)
            return FidelityResult(tau, min(max(val, 0.0), 1.0), "uhlmann")
    # Tr sqrt(sqrt(r1) r0 sqrt(r1)) is the sum of singular values of sqrt(r0) sqrt(r1)
    prod = matrix_sqrt_psd(r0) @ matrix_sqrt_psd(r1)
    val = float(np.sum(np.linalg.svd(prod, compute_uv=False))) ** 2
    return FidelityResult(tau, min(max(val, 0.0), 1.0), "uhlmann")


def closed_form_fidelity(tau, alpha2, u1, u2):
    """Two-level fidelity |e^{-n/2 - n e^{-tau}/2} (1 + n e^{-tau/2 + i phi})|^2, n = |alpha|^2."""
    phi = (u1 + u2) * tau + u2 * tau * tau * alpha2
    amp = math.exp(-0.5 * alpha2 - 0.5 * alpha2 * math.exp(-tau))
    z = 1.0 + alpha2 * math.exp(-0.5 * tau) * complex(math.cos(phi), math.sin(phi))
    return (amp * abs(z)) ** 2


def fidelity_approx(tau: float, config: SystemConfig) -> FidelityResult:
    """Closed-form two-level fidelity, evaluated literally (not renormalized).

    At ``tau = 0`` this is ``(e^{-n}(1+n))^2``, not 1: the two-level state
    keeps only the first two Fock amplitudes.
    """
    if tau < 0:
        raise PreconditionError(f"tau must be >= 0, got {tau}")
    val = closed_form_fidelity(tau, config.nbar, config.u1, config.u2)
    return FidelityResult(tau, val, "pure_closed_form")


def deformation_value(alpha2, u1, u2):
    return 1.0 - closed_form_fidelity(TAU_STAR, alpha2, u1, u2)


def deformation(config: SystemConfig) -> float:
    """``1 - F`` at the peak-information time ``tau* = 2``."""
    return deformation_value(config.nbar, config.u1, config.u2)
