"""Time evolution of the controlled, amplitude-damped mode.

Everything is expressed in rescaled time ``tau = gamma * t`` with the
rescaled master equation

    d rho / d tau = -i [u1 n + u2 n^2, rho] + a rho a^+ - (n rho + rho n) / 2.

Two independent routes are provided: the closed-form matrix elements
(:func:`evolve_analytic`) and a fixed-step RK4 integration of the master
equation itself (:func:`evolve_ode`), which serves as the reference.
:func:`pure_state_approx` is the two-level small-control approximation
used by the closed-form Fisher information.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np
from scipy.special import gammaln

from .errors import CorruptStateError, PreconditionError, StepSizeError
from .fock import (
    DensityMatrix,
    StateVector,
    SystemConfig,
    annihilation_matrix,
    coherent_state,
    control_hamiltonian,
    number_matrix,
    poisson_tail,
)

DEFAULT_ODE_DT = 1e-4


@dataclass(frozen=True)
class EvolutionResult:
    tau: float
    state: DensityMatrix
    method: Literal["analytic", "ode"]
    trace_drift: float

    @property
    def rho(self) -> np.ndarray:
        return self.state.matrix


@dataclass(frozen=True)
class ApproxPureState:
    tau: float
    vector: StateVector
    prefactor: float


def _log_lambda(p, q, alpha: complex):
    """log of alpha^p conj(alpha)^q / sqrt(p! q!) (vectorised, alpha != 0)."""
    logmag = (p + q) * math.log(abs(alpha)) - 0.5 * (gammaln(p + 1) + gammaln(q + 1))
    return logmag + 1j * (p - q) * cmath.phase(alpha)


def _element_exponent(p, q, tau, config: SystemConfig):
    k = p - q
    delta = 1.0 + 2j * config.u2 * k
    nbar = config.nbar
    return (
        -0.5 * delta * tau * (p + q)
        - 1j * config.u1 * tau * k
        - nbar * (1.0 - (1.0 - np.exp(-delta * tau)) / delta)
    )


def rho_element_analytic(p: int, q: int, tau: float, config: SystemConfig) -> complex:
    """Single closed-form matrix element ``rho_{p,q}(tau)``.

    ``Delta = 1 + 2i u2 (p - q)`` is complex, and the coherent-state weight
    ``alpha^p conj(alpha)^q / sqrt(p! q!)`` is handled in log space so large
    ``p, q`` underflow to zero instead of overflowing.
    """
    if p < 0 or q < 0:
        raise PreconditionError(f"Fock indices must be non-negative, got ({p}, {q})")
    if tau < 0:
        raise PreconditionError(f"tau must be >= 0, got {tau}")
    alpha = config.alpha
    if alpha == 0:
        return complex(1.0) if p == q == 0 else 0j
    k = p - q
    delta = 1.0 + 2j * config.u2 * k
    expo = (
        -0.5 * delta * tau * (p + q)
        - 1j * config.u1 * tau * k
        - config.nbar * (1.0 - (1.0 - cmath.exp(-delta * tau)) / delta)
    )
    logmag = (p + q) * math.log(abs(alpha)) - 0.5 * (math.lgamma(p + 1) + math.lgamma(q + 1))
    val = cmath.exp(logmag + expo.real) * cmath.exp(1j * (expo.imag + k * cmath.phase(alpha)))
    if not (math.isfinite(val.real) and math.isfinite(val.imag)):
        raise CorruptStateError(f"non-finite rho[{p},{q}] at tau={tau}")
    return val


def analytic_matrix(config: SystemConfig, tau: float) -> np.ndarray:
    """Closed-form density matrix over ``p, q < dim`` (no validation)."""
    if tau < 0:
        raise PreconditionError(f"tau must be >= 0, got {tau}")
    dim = config.dim
    if config.alpha == 0:
        rho = np.zeros((dim, dim), dtype=complex)
        rho[0, 0] = 1.0
        return rho
    p, q = np.meshgrid(np.arange(dim, dtype=float), np.arange(dim, dtype=float), indexing="ij")
    log_el = _log_lambda(p, q, config.alpha) + _element_exponent(p, q, tau, config)
    rho = np.exp(log_el)
    # mirror the upper triangle so Hermiticity is exact
    upper = np.triu(rho)
    rho = upper + np.triu(rho, 1).conj().T
    if not np.all(np.isfinite(rho)):
        raise CorruptStateError(f"non-finite analytic state at tau={tau}")
    return rho


def evolve_analytic(config: SystemConfig, tau: float, renormalize: bool = False) -> EvolutionResult:
    """Assemble the closed-form state at rescaled time ``tau``."""
    rho = analytic_matrix(config, tau)
    tail = poisson_tail(config.nbar * math.exp(-tau), config.dim)
    drift = abs(float(np.trace(rho).real) - 1.0)
    if renormalize:
        rho = rho / np.trace(rho).real
        tail = 0.0
    return EvolutionResult(tau, DensityMatrix(rho, tail), "analytic", drift)


def lindblad_rhs(rho: np.ndarray, h: np.ndarray, a: np.ndarray, n: np.ndarray) -> np.ndarray:
    ad = a.conj().T
    return -1j * (h @ rho - rho @ h) + a @ rho @ ad - 0.5 * (n @ rho + rho @ n)


def evolve_ode_many(config: SystemConfig, taus: Iterable[float], dt: float = DEFAULT_ODE_DT) -> list[EvolutionResult]:
    """RK4 integration of the rescaled master equation, sampled at ``taus``.

    Each segment between consecutive sample times is split into equal
    steps no longer than ``dt``.  Results come back in the order of the
    (sorted) sample times.
    """
    if not 0 < dt <= 1e-3:
        raise PreconditionError(f"dt must lie in (0, 1e-3], got {dt}")
    taus = sorted(float(t) for t in taus)
    if taus and taus[0] < 0:
        raise PreconditionError("tau must be >= 0")
    a = annihilation_matrix(config.dim)
    n = number_matrix(config.dim)
    h = control_hamiltonian(config)
    psi0 = coherent_state(config.alpha, config.dim)
    rho = psi0.projector()
    t = 0.0
    out = []
    for target in taus:
        span = target - t
        nsteps = math.ceil(span / dt - 1e-9) if span > 0 else 0
        if nsteps:
            step = span / nsteps
            for i in range(nsteps):
                k1 = lindblad_rhs(rho, h, a, n)
                k2 = lindblad_rhs(rho + 0.5 * step * k1, h, a, n)
                k3 = lindblad_rhs(rho + 0.5 * step * k2, h, a, n)
                k4 = lindblad_rhs(rho + step * k3, h, a, n)
                rho = rho + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                if not np.isfinite(rho).all():
                    raise StepSizeError(f"non-finite state at tau={t + (i + 1) * step:.6g}; reduce dt")
        t = target
        drift = abs(float(np.trace(rho).real) - 1.0)
        herm = 0.5 * (rho + rho.conj().T)
        out.append(EvolutionResult(target, DensityMatrix(herm, psi0.tail), "ode", drift))
    return out


def evolve_ode(config: SystemConfig, tau: float, dt: float = DEFAULT_ODE_DT) -> EvolutionResult:
    return evolve_ode_many(config, [tau], dt)[0]


def pure_state_approx(tau: float, config: SystemConfig, normalized: bool = False) -> ApproxPureState:
    """Two-level pure-state approximation, unnormalized unless asked.

    Amplitudes: ``c * (1, alpha * exp(-tau/2 - i (u1+u2) tau - i u2 |alpha|^2 tau^2))``
    with ``c = exp(-|alpha|^2 e^{-tau} / 2)``.  Meant for ``u1, u2 << 1``.
    """
    if tau < 0:
        raise PreconditionError(f"tau must be >= 0, got {tau}")
    nbar = config.nbar
    pref = math.exp(-0.5 * nbar * math.exp(-tau))
    phase = -0.5 * tau - 1j * (config.u1 + config.u2) * tau - 1j * config.u2 * tau**2 * nbar
    vec = StateVector(pref * np.array([1.0, config.alpha * cmath.exp(phase)]))
    if normalized:
        vec = vec.normalize()
    return ApproxPureState(tau, vec, pref)


def pure_state_gamma_derivative(t: float, config: SystemConfig) -> StateVector:
    """Derivative of the unnormalized two-level state with respect to gamma.

    Differentiation is at fixed physical time ``t`` and fixed rescaled
    controls, so ``tau = gamma t`` is the only gamma dependence.
    """
    if t < 0:
        raise PreconditionError(f"t must be >= 0, got {t}")
    tau = config.gamma * t
    nbar = config.nbar
    s = 0.5 * nbar * math.exp(-tau)
    expo = -0.5 * tau - 1j * (config.u1 + config.u2) * tau - 1j * config.u2 * nbar * tau**2
    first = s
    second = config.alpha * (s - 0.5 - 1j * (config.u1 + config.u2) - 2j * config.u2 * nbar * tau) * cmath.exp(expo)
    return StateVector(t * math.exp(-s) * np.array([first, second]))
