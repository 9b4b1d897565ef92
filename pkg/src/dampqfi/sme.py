"""Estimating gamma from a continuous homodyne record with a bank of filters.

Measurement model: diffusive homodyne detection of the damping channel
with efficiency ``eta``.  In physical time, for a candidate rate ``g``,

    d rho = g L[rho] dt + sqrt(eta g) H[rho] dW,
    dy    = sqrt(eta g) <a + a^+> dt + dW,

where ``L`` is the rescaled Lindbladian (controls ``u1 n + u2 n^2`` plus
damping) and ``H[rho] = a rho + rho a^+ - <a + a^+> rho``.  The physical
couplings are ``g u1`` and ``g u2``, the same fixed-``u`` convention used
for the Fisher information.

The recipe: draw candidate rates, run one filter per candidate over the
observed record, weight candidates by the Gaussian innovation likelihood
and report the posterior-mean rate.  All operators act through index
shifts rather than matrix products, so a stack of states is propagated
with elementwise numpy operations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from .errors import (
    DegenerateCandidatesError,
    IntegrationError,
    PreconditionError,
    RenormalizationError,
)
from .fock import SystemConfig, coherent_state

CHECK_EVERY = 100
PSD_TOL = 1e-6
MAX_RESAMPLE = 100


@dataclass(frozen=True)
class CandidateSet:
    rates: np.ndarray
    prior: np.ndarray

    def __post_init__(self):
        rates = np.asarray(self.rates, dtype=float).ravel()
        prior = np.asarray(self.prior, dtype=float).ravel()
        if rates.size == 0 or rates.shape != prior.shape:
            raise PreconditionError("rates and prior must be non-empty and equally long")
        if np.any(rates <= 0) or not np.all(np.isfinite(rates)):
            raise PreconditionError("candidate rates must be positive and finite")
        if np.any(prior < 0) or abs(prior.sum() - 1.0) > 1e-12:
            raise PreconditionError("prior weights must be non-negative and sum to 1")
        rates.setflags(write=False)
        prior.setflags(write=False)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "prior", prior)

    def __len__(self):
        return self.rates.size

    @property
    def mean_rate(self) -> float:
        return float(self.prior @ self.rates)

    @classmethod
    def uniform(cls, rates: Sequence[float]) -> "CandidateSet":
        rates = np.asarray(rates, dtype=float)
        return cls(rates, np.full(rates.size, 1.0 / rates.size))


@dataclass(frozen=True)
class MeasurementRecord:
    dt: float
    samples: np.ndarray
    seed: int
    efficiency: float

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float).ravel()
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        if not self.dt > 0:
            raise PreconditionError("dt must be positive")
        if not 0.0 <= self.efficiency <= 1.0:
            raise PreconditionError("efficiency must lie in [0, 1]")

    @property
    def n_steps(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True)
class PosteriorState:
    candidates: CandidateSet
    times: np.ndarray
    weights_over_time: np.ndarray  # shape (n_steps + 1, n_candidates)
    estimate_over_time: np.ndarray
    reference_gamma: float = float("nan")
    reference_state: Optional[np.ndarray] = field(default=None, repr=False)


def generate_candidates(center: float, spread: float, n: int, seed: int) -> CandidateSet:
    """``n`` rates uniform on ``[center - spread, center + spread]``, uniform prior.

    Non-positive draws are redrawn; failing that after a bounded number of
    rounds raises :class:`DegenerateCandidatesError`.
    """
    if not center > 0:
        raise PreconditionError(f"center must be positive, got {center}")
    if spread < 0:
        raise PreconditionError(f"spread must be >= 0, got {spread}")
    if int(n) != n or n < 1:
        raise PreconditionError(f"n must be a positive integer, got {n}")
    rng = np.random.default_rng(seed)
    lo, hi = center - spread, center + spread
    rates = rng.uniform(lo, hi, int(n)) if spread > 0 else np.full(int(n), float(center))
    for _ in range(MAX_RESAMPLE):
        bad = rates <= 0
        if not bad.any():
            break
        rates[bad] = rng.uniform(lo, hi, int(bad.sum()))
    if np.any(rates <= 0):
        raise DegenerateCandidatesError(f"could not draw positive rates from [{lo}, {hi}]")
    return CandidateSet.uniform(rates)


@numba.njit(cache=True)
def _kraus_step(rho, m, c, jump, s, out):
    nb, dim, _ = rho.shape
    last = dim - 1
    for b in range(nb):
        cb = c[b]
        jb = jump[b]
        tr = 0.0
        for p in range(dim):
            mp = m[b, p]
            for q in range(p, dim):
                mq = m[b, q].conjugate()
                val = mp * rho[b, p, q] * mq
                if q < last:
                    val += cb * mp * rho[b, p, q + 1] * s[q]
                    if p < last:
                        val += (cb * rho[b, p + 1, q] * mq + jb * s[q] * rho[b, p + 1, q + 1]) * s[p]
                elif p < last:
                    val += cb * s[p] * rho[b, p + 1, q] * mq
                out[b, p, q] = val
            tr += out[b, p, p].real
        inv = 1.0 / tr
        for p in range(dim):
            out[b, p, p] = out[b, p, p].real * inv
            for q in range(p + 1, dim):
                v = out[b, p, q] * inv
                out[b, p, q] = v
                out[b, q, p] = v.conjugate()


class _Bank:
    """Stack of density matrices sharing dimension and control shape."""

    def __init__(self, config: SystemConfig, gammas: np.ndarray, eta: float):
        dim = config.dim
        n = np.arange(dim, dtype=float)
        self.dim = dim
        self.s = np.sqrt(n[1:])  # a[p, p+1]
        energy = config.u1 * n + config.u2 * n * n
        self.diag = -1j * energy - 0.5 * n
        self.g = np.asarray(gammas, dtype=float)[:, None]
        self.meas = np.sqrt(eta * np.asarray(gammas, dtype=float))
        self.unseen = (1.0 - eta) * np.asarray(gammas, dtype=float)
        self._dt = None
        psi = coherent_state(config.alpha, dim).amplitudes
        rho0 = np.outer(psi, psi.conj())
        rho0 = rho0 / np.trace(rho0).real
        self.rho = np.repeat(rho0[None], len(self.meas), axis=0)

    def x_mean(self) -> np.ndarray:
        sub = self.rho[:, 1:, :-1]
        return 2.0 * (np.diagonal(sub, axis1=1, axis2=2) * self.s).sum(axis=1).real

    def step(self, dy: np.ndarray, dt: float) -> None:
        """One first-order step ``rho <- M rho M^+ + (1 - eta) g dt a rho a^+``, renormalized.

        ``M = 1 - g dt (i E + n / 2) + sqrt(eta g) dy a``.  To first order
        this is the Euler-Maruyama step of the SME, but it is a completely
        positive map, so the state stays positive for any ``dt``.
        """
        if dt != self._dt:
            self._dt = dt
            self._m = 1.0 + self.g * dt * self.diag
            self._unseen_dt = self.unseen * dt
        c = self.meas * dy
        jump = c * c + self._unseen_dt
        out = np.empty_like(self.rho)
        _kraus_step(self.rho, self._m, c, jump, self.s, out)
        self.rho = out

    def check(self, step: int, dt: float) -> None:
        if not np.isfinite(self.rho).all():
            raise IntegrationError(f"non-finite state at step {step} (t={step * dt:.6g})")
        lmin = np.linalg.eigvalsh(self.rho)[:, 0].min()
        if lmin < -PSD_TOL:
            raise IntegrationError(
                f"state lost positivity at step {step} (t={step * dt:.6g}, min eigenvalue {lmin:.3e})"
            )


def _n_steps(duration: float, dt: float) -> int:
    if not duration > 0:
        raise PreconditionError(f"duration must be positive, got {duration}")
    return max(1, int(round(duration / dt)))


def simulate_trajectories(gamma_true: float, config: SystemConfig, duration: float, dt: float,
                          efficiency: float, seeds: Sequence[int],
                          sample_every: Optional[int] = None):
    """Simulate one homodyne record per seed.

    Returns ``(records, snapshots)``; ``snapshots`` is ``None`` unless
    ``sample_every`` is given, in which case it holds the conditional
    states at every ``sample_every``-th step, shape
    ``(n_samples, n_seeds, dim, dim)``.  Each seed drives its own
    independent normal stream.
    """
    if not gamma_true > 0:
        raise PreconditionError("gamma_true must be positive")
    if not 0 < dt * gamma_true <= 1e-3 * (1 + 1e-9):
        raise PreconditionError(f"dt must satisfy 0 < dt <= 1e-3 / gamma (got dt*gamma={dt * gamma_true:g})")
    if not 0.0 <= efficiency <= 1.0:
        raise PreconditionError("efficiency must lie in [0, 1]")
    steps = _n_steps(duration, dt)
    seeds = [int(s) for s in seeds]
    noise = np.stack([np.random.default_rng(s).standard_normal(steps) for s in seeds]) * math.sqrt(dt)
    bank = _Bank(config, np.full(len(seeds), float(gamma_true)), efficiency)
    dy = np.empty_like(noise)
    snaps = []
    if sample_every:
        snaps.append(bank.rho.copy())
    for k in range(steps):
        xm = bank.x_mean()
        dw = noise[:, k]
        dy[:, k] = bank.meas * xm * dt + dw
        bank.step(dy[:, k], dt)
        if (k + 1) % CHECK_EVERY == 0 or k + 1 == steps:
            bank.check(k + 1, dt)
        if sample_every and (k + 1) % sample_every == 0:
            snaps.append(bank.rho.copy())
    records = [MeasurementRecord(dt, dy[i], s, efficiency) for i, s in enumerate(seeds)]
    return records, (np.stack(snaps) if sample_every else None)


def simulate_trajectory(gamma_true: float, config: SystemConfig, duration: float, dt: float,
                        efficiency: float, seed: int) -> MeasurementRecord:
    return simulate_trajectories(gamma_true, config, duration, dt, efficiency, [seed])[0][0]


def update_posteriors_many(records: Sequence[MeasurementRecord], candidates: CandidateSet,
                           config: SystemConfig) -> list[PosteriorState]:
    """Run the filter bank over several records that share ``dt``, length and efficiency."""
    if not records:
        return []
    dt = records[0].dt
    eta = records[0].efficiency
    steps = records[0].n_steps
    for r in records:
        if r.dt != dt or r.efficiency != eta or r.n_steps != steps:
            raise PreconditionError("records in one batch must share dt, efficiency and length")
    n_rec = len(records)
    k = len(candidates)
    ref_gamma = candidates.mean_rate
    gammas = np.concatenate([np.tile(candidates.rates, n_rec), np.full(n_rec, ref_gamma)])
    bank = _Bank(config, gammas, eta)
    samples = np.stack([r.samples for r in records])
    # rows i*k + j: record i, candidate j; last n_rec rows: reference filters
    dy = np.concatenate([np.repeat(samples, k, axis=0), samples])
    prior = candidates.prior
    support = prior > 0
    loglik = np.zeros((n_rec, k))
    weights = np.empty((steps + 1, n_rec, k))
    weights[0] = candidates.prior
    for step in range(steps):
        xm = bank.x_mean()
        innov = dy[:, step] - bank.meas * xm * dt
        loglik -= (innov[: n_rec * k] ** 2).reshape(n_rec, k) / (2.0 * dt)
        bank.step(dy[:, step], dt)
        top = loglik[:, support].max(axis=1, keepdims=True)
        w = prior * np.exp(loglik - top)
        total = w.sum(axis=1, keepdims=True)
        if not np.all(np.isfinite(total) & (total > 0)):
            raise RenormalizationError(f"all candidate likelihoods vanished at step {step + 1}")
        weights[step + 1] = w / total
    times = np.arange(steps + 1) * dt
    lo, hi = candidates.rates.min(), candidates.rates.max()
    out = []
    for i in range(n_rec):
        w = weights[:, i, :]
        est = np.clip(w @ candidates.rates, lo, hi)
        out.append(PosteriorState(candidates, times, w, est, ref_gamma, bank.rho[n_rec * k + i].copy()))
    return out


def update_posteriors(record: MeasurementRecord, candidates: CandidateSet,
                      config: SystemConfig) -> PosteriorState:
    """Posterior over candidate rates after each increment of ``record``.

    A reference filter at the prior-mean rate runs alongside; its final
    state is kept on the result as a diagnostic only.
    """
    return update_posteriors_many([record], candidates, config)[0]


def estimate_gamma(posterior: PosteriorState) -> float:
    """Final-time posterior mean ``sum_i gamma_i P_i``."""
    if posterior.estimate_over_time.size == 0:
        raise PreconditionError("empty posterior")
    return float(posterior.estimate_over_time[-1])
