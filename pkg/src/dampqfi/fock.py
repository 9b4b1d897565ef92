"""Truncated Fock-space primitives for a single damped bosonic mode.

Operators are plain ``complex128`` numpy arrays indexed by occupation
number (row ``p``, column ``q``).  States and configurations are frozen
dataclasses whose array payloads are marked read-only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import poisson

from .errors import (
    CorruptStateError,
    InvalidDimensionError,
    NotPSDError,
    PreconditionError,
    TruncationTooSmallError,
)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-8
PSD_FLOOR = -1e-8
PSD_CLAMP_LIMIT = -1e-6
MAX_TAIL = 0.01
DEFAULT_DIM = 20
CURVE_DIM = 10


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


def _check_dim(dim: int) -> int:
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"truncation dimension must be an integer >= 2, got {dim!r}")
    return int(dim)


@dataclass(frozen=True)
class SystemConfig:
    """Physical scenario: coherent amplitude, damping rate and rescaled controls.

    ``u1`` and ``u2`` are the controls divided by ``gamma``, so the physical
    couplings are ``k1 = u1 * gamma`` and ``k2 = u2 * gamma``.
    """

    alpha: complex = 1.0
    gamma: float = 1.0
    u1: float = 0.0
    u2: float = 0.0
    dim: int = DEFAULT_DIM

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "dim", _check_dim(self.dim))
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise PreconditionError(f"gamma must be positive, got {self.gamma!r}")
        for name in ("u1", "u2"):
            val = getattr(self, name)
            if not 0.0 <= val < 1.0:
                raise PreconditionError(f"{name} must lie in [0, 1), got {val!r}")

    @property
    def nbar(self) -> float:
        return abs(self.alpha) ** 2

    @property
    def k1(self) -> float:
        return self.u1 * self.gamma

    @property
    def k2(self) -> float:
        return self.u2 * self.gamma

    def replace(self, **changes) -> "SystemConfig":
        fields = dict(alpha=self.alpha, gamma=self.gamma, u1=self.u1, u2=self.u2, dim=self.dim)
        fields.update(changes)
        return SystemConfig(**fields)


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    normalized: bool = False
    tail: float = 0.0

    def __post_init__(self):
        amps = _frozen(self.amplitudes)
        if amps.ndim != 1:
            raise PreconditionError("state amplitudes must be one-dimensional")
        object.__setattr__(self, "amplitudes", amps)
        if self.normalized and abs(self.norm2 - 1.0) > 1e-10:
            raise CorruptStateError(f"state flagged normalized but has norm^2 {self.norm2!r}")

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalize(self) -> "StateVector":
        return StateVector(self.amplitudes / math.sqrt(self.norm2), normalized=True)

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, PSD state with trace ``1 - truncation_tail`` or better.

    Construction validates the invariants; pass ``check=False`` only for
    intermediates that are re-validated later.
    """

    matrix: np.ndarray
    truncation_tail: float = 0.0
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise PreconditionError(f"density matrix must be square, got shape {m.shape}")
        _check_dim(m.shape[0])
        object.__setattr__(self, "matrix", m)
        if self.truncation_tail < 0:
            raise PreconditionError("truncation_tail must be >= 0")
        if self.check:
            self.validate()

    def validate(self) -> None:
        m = self.matrix
        if not np.all(np.isfinite(m)):
            raise CorruptStateError("density matrix has non-finite entries")
        herm = np.max(np.abs(m - m.conj().T))
        if herm > HERMITIAN_TOL:
            raise CorruptStateError(f"density matrix not Hermitian (deviation {herm:.3e})")
        tr = self.trace
        lo = 1.0 - max(TRACE_TOL, self.truncation_tail + 1e-12)
        if not lo <= tr <= 1.0 + TRACE_TOL:
            raise CorruptStateError(f"trace {tr!r} outside [{lo!r}, {1 + TRACE_TOL!r}]")
        lmin = np.linalg.eigvalsh(m)[0]
        if lmin < PSD_FLOOR:
            raise CorruptStateError(f"density matrix has eigenvalue {lmin:.3e}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @property
    def purity(self) -> float:
        return float(np.einsum("ij,ji->", self.matrix, self.matrix).real)

    def normalized(self) -> "DensityMatrix":
        return DensityMatrix(self.matrix / self.trace, 0.0)

    @classmethod
    def from_pure(cls, psi: StateVector) -> "DensityMatrix":
        return cls(psi.projector(), truncation_tail=psi.tail)


def annihilation_matrix(dim: int) -> np.ndarray:
    """Truncated lowering operator, ``a[p, p+1] = sqrt(p+1)``."""
    dim = _check_dim(dim)
    return np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(complex)


def number_matrix(dim: int) -> np.ndarray:
    dim = _check_dim(dim)
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def control_hamiltonian(config: SystemConfig) -> np.ndarray:
    """Rescaled control Hamiltonian ``u1 n + u2 n^2`` (diagonal in Fock basis)."""
    n = np.arange(config.dim, dtype=float)
    return np.diag(config.u1 * n + config.u2 * n * n).astype(complex)


def poisson_tail(mean: float, dim: int) -> float:
    """Probability mass of Poisson(mean) at occupation numbers >= dim."""
    if mean <= 0:
        return 0.0
    return float(poisson.sf(dim - 1, mean))


def coherent_state(alpha: complex, dim: int) -> StateVector:
    """Truncated coherent state ``|alpha>``.

    The returned vector carries ``tail``, the Poisson mass lost to the
    truncation.  Raises :class:`TruncationTooSmallError` if that mass
    exceeds 1%.
    """
    dim = _check_dim(dim)
    alpha = complex(alpha)
    nbar = abs(alpha) ** 2
    tail = poisson_tail(nbar, dim)
    if tail > MAX_TAIL:
        raise TruncationTooSmallError(
            f"|alpha|^2={nbar:g} leaves tail {tail:.3g} beyond dim={dim}; increase dim"
        )
    c = np.empty(dim, dtype=complex)
    c[0] = math.exp(-nbar / 2)
    for n in range(1, dim):
        c[n] = c[n - 1] * alpha / math.sqrt(n)
    return StateVector(c, normalized=tail <= 1e-10, tail=tail)


def coherent_density(alpha: complex, dim: int) -> DensityMatrix:
    return DensityMatrix.from_pure(coherent_state(alpha, dim))


def is_hermitian(m: np.ndarray, tol: float = 1e-10) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.max(np.abs(m - m.conj().T)) <= tol


def hermitian_eigendecomposition(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvector columns of ``m``."""
    m = np.asarray(m, dtype=complex)
    if not is_hermitian(m):
        raise PreconditionError("hermitian_eigendecomposition requires a Hermitian matrix")
    # eigh reads one triangle only; symmetrize so the result reflects both
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return w, v


def matrix_sqrt_psd(m: np.ndarray) -> np.ndarray:
    """Principal square root of a Hermitian PSD matrix.

    Eigenvalues in ``[-1e-6, 0)`` are treated as round-off and clamped;
    anything more negative raises :class:`NotPSDError`.  Eigenvalues at
    the round-off level of the largest one are also zeroed, since their
    square roots would turn ~1e-17 noise into ~1e-9 errors.
    """
    w, v = hermitian_eigendecomposition(m)
    if w[0] < PSD_CLAMP_LIMIT:
        raise NotPSDError(f"matrix has eigenvalue {w[0]:.3e} below {PSD_CLAMP_LIMIT}")
    cutoff = w.size * np.finfo(float).eps * max(abs(w[-1]), abs(w[0]))
    s = np.sqrt(np.where(w > cutoff, w, 0.0))
    return (v * s) @ v.conj().T
