"""Precision/fidelity trade-off: peak information, epsilon-constraint, Pareto front.

The decision variables are ``(u1, u2, |alpha|^2)``; time is eliminated by
evaluating both objectives at the peak-information time ``tau* = 2``.
Optimisation is exhaustive over a rectangular grid, which is exact up to
grid resolution because the information objective is monotone.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import BracketError, InfeasibleError, PreconditionError
from .metrology import TAU_STAR, closed_form_qfi, deformation_value


@dataclass(frozen=True)
class ParetoPoint:
    u1: float
    u2: float
    alpha2: float
    i_star: float
    d: float

    @property
    def key(self):
        return (self.u1, self.u2, self.alpha2)


@dataclass(frozen=True)
class GridSpec:
    """Axis triples ``(lo, hi, count)``; ``count == 1`` pins the axis at ``lo``."""

    u1_range: tuple = (0.0, 0.99, 201)
    u2_range: tuple = (0.0, 0.99, 201)
    alpha2_range: tuple = (0.2, 0.2, 1)

    def __post_init__(self):
        for name in ("u1_range", "u2_range", "alpha2_range"):
            rng = getattr(self, name)
            if len(rng) != 3:
                raise PreconditionError(f"{name} must be (lo, hi, count)")
            lo, hi, count = float(rng[0]), float(rng[1]), rng[2]
            if int(count) != count or count < 1:
                raise PreconditionError(f"{name}: count must be a positive integer")
            if not 0.0 <= lo <= hi < 1.0:
                raise PreconditionError(f"{name}: need 0 <= lo <= hi < 1, got ({lo}, {hi})")
            object.__setattr__(self, name, (lo, hi, int(count)))

    @staticmethod
    def _axis(rng) -> np.ndarray:
        lo, hi, count = rng
        if count == 1:
            return np.array([lo])
        return np.linspace(lo, hi, count)

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self._axis(self.u1_range), self._axis(self.u2_range), self._axis(self.alpha2_range)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.u1_range[2], self.u2_range[2], self.alpha2_range[2])


@dataclass(frozen=True)
class ConstrainedOptimum:
    best: ParetoPoint
    epsilon: float
    feasible_count: int
    boundary_distance: float
    active: bool
    d_increment: float


@dataclass(frozen=True)
class TauStar:
    tau: float
    residual: float
    alt_residual: float
    equation: str

    def __float__(self):
        return self.tau


def qfi_star(u1: float, u2: float, alpha2: float, gamma: float = 1.0) -> float:
    """Approximate QFI at ``tau* = 2``: ``4|alpha|^2/gamma^2 e^-2 (1 + 4(u1+u2+4|alpha|^2 u2)^2)``."""
    return closed_form_qfi(TAU_STAR, alpha2, u1, u2, gamma)


def _stationarity(tau, u1, u2, alpha2):
    """Exact d/dtau = 0 condition of the closed-form QFI, and its tau-derivative."""
    big_t = u1 + u2 + 2 * alpha2 * u2 * tau
    dt = 2 * alpha2 * u2
    f = -4 * big_t**2 * tau + 8 * big_t**2 + 16 * alpha2 * u2 * big_t * tau - tau + 2
    df = (-8 * big_t * dt * tau - 4 * big_t**2 + 16 * big_t * dt
          + 16 * alpha2 * u2 * (dt * tau + big_t) - 1)
    return f, df


def _reduced_cubic(tau, u1, u2, alpha2):
    """Same condition with ``u1 + u2`` dropped from the control sum."""
    c = 16 * u2**2 * alpha2**2
    return -c * tau**3 + 4 * c * tau**2 - tau + 2, -3 * c * tau**2 + 8 * c * tau - 1


_EQUATIONS = {"stationarity": _stationarity, "reduced": _reduced_cubic}


def solve_tau_star(u1: float, u2: float, alpha2: float,
                   equation: Literal["stationarity", "reduced"] = "stationarity",
                   bracket: tuple[float, float] = (2.0, 4.0)) -> TauStar:
    """Peak-information time by safeguarded Newton from ``tau = 2``.

    ``equation="stationarity"`` solves the exact extremum condition of the
    closed-form QFI (a cubic in tau); ``"reduced"`` solves the simplified
    cubic that neglects ``u1 + u2`` inside the control sum.  Both equal
    ``(2 - tau)(...)`` when ``u2 = 0``, so the root is exactly 2 there.
    Both functions are >= 0 at tau = 2 and < 0 at tau = 4, which makes
    ``[2, 4]`` a valid bracket over the whole control box.
    """
    fn = _EQUATIONS[equation]
    other = _EQUATIONS["reduced" if equation == "stationarity" else "stationarity"]
    lo, hi = bracket
    flo, fhi = fn(lo, u1, u2, alpha2)[0], fn(hi, u1, u2, alpha2)[0]
    if flo == 0:
        return TauStar(lo, 0.0, abs(other(lo, u1, u2, alpha2)[0]), equation)
    if flo * fhi > 0:
        raise BracketError(
            f"no sign change of the {equation} equation on [{lo}, {hi}] "
            f"(u1={u1}, u2={u2}, alpha2={alpha2}, f(lo)={flo}, f(hi)={fhi})"
        )
    sign_lo = np.sign(flo)
    tau = 2.0 if lo <= 2.0 <= hi else 0.5 * (lo + hi)
    for _ in range(200):
        f, df = fn(tau, u1, u2, alpha2)
        if f == 0:
            break
        if np.sign(f) == sign_lo:
            lo = tau
        else:
            hi = tau
        step = tau - f / df if df != 0 else None
        if step is None or not lo < step < hi:
            step = 0.5 * (lo + hi)
        if step == tau or hi - lo < 4e-16 * max(1.0, abs(tau)):
            tau = step
            break
        tau = step
    res = abs(fn(tau, u1, u2, alpha2)[0])
    return TauStar(float(tau), res, abs(other(tau, u1, u2, alpha2)[0]), equation)


def evaluate_grid(spec: GridSpec, gamma: float = 1.0) -> list[ParetoPoint]:
    """One point per cell in row-major ``(u1, u2, alpha2)`` order."""
    u1s, u2s, a2s = spec.axes()
    pts = []
    for u1 in u1s:
        u1 = float(u1)
        for u2 in u2s:
            u2 = float(u2)
            for a2 in a2s:
                a2 = float(a2)
                pts.append(ParetoPoint(u1, u2, a2, qfi_star(u1, u2, a2, gamma), deformation_value(a2, u1, u2)))
    return pts


def _rank_key(p: ParetoPoint):
    return (-p.i_star, p.d, p.u1, p.u2, p.alpha2)


def _d_increment(points: Sequence[ParetoPoint], shape, index: int) -> float:
    n1, n2, n3 = shape
    i, rem = divmod(index, n2 * n3)
    j, k = divmod(rem, n3)
    d0 = points[index].d
    inc = 0.0
    for axis, (pos, size) in enumerate(((i, n1), (j, n2), (k, n3))):
        for step in (-1, 1):
            if 0 <= pos + step < size:
                idx = [i, j, k]
                idx[axis] += step
                nb = points[(idx[0] * n2 + idx[1]) * n3 + idx[2]]
                inc = max(inc, abs(nb.d - d0))
    return inc


def select_constrained(points: Sequence[ParetoPoint], epsilon: float) -> tuple[int, int]:
    """Index of the best feasible point and the number of feasible points."""
    best = -1
    count = 0
    best_key = None
    for idx, p in enumerate(points):
        if p.d <= epsilon:
            count += 1
            key = _rank_key(p)
            if best_key is None or key < best_key:
                best, best_key = idx, key
    return best, count


def epsilon_constrained_optimize(spec: GridSpec, gamma: float, epsilon: float,
                                 points: Sequence[ParetoPoint] | None = None) -> ConstrainedOptimum:
    """Maximise peak QFI subject to deformation ``<= epsilon`` over the grid.

    Deformation never exceeds 1, so ``epsilon = 1`` is the unconstrained
    problem.  Ties go to the smaller deformation, then to the lexicographically
    smaller ``(u1, u2, alpha2)``.  ``points`` may be passed to reuse an
    existing :func:`evaluate_grid` result for the same spec.
    """
    if not 0.0 < epsilon <= 1.0:
        raise PreconditionError(f"epsilon must lie in (0, 1], got {epsilon}")
    if points is None:
        points = evaluate_grid(spec, gamma)
    best, count = select_constrained(points, epsilon)
    if best < 0:
        min_d = min(p.d for p in points)
        raise InfeasibleError(f"no grid point has deformation <= {epsilon} (min {min_d:.6g})", min_d)
    bp = points[best]
    top = max(p.i_star for p in points)
    return ConstrainedOptimum(
        best=bp,
        epsilon=epsilon,
        feasible_count=count,
        boundary_distance=epsilon - bp.d,
        active=top > bp.i_star,
        d_increment=_d_increment(points, spec.shape, best),
    )


def dominates(p: ParetoPoint, q: ParetoPoint) -> bool:
    """``p`` is at least as good in both objectives and strictly better in one."""
    return (p.i_star >= q.i_star and p.d <= q.d) and (p.i_star > q.i_star or p.d < q.d)


def pareto_front(points: Sequence[ParetoPoint]) -> list[ParetoPoint]:
    """Non-dominated subset (maximise ``i_star``, minimise ``d``), sorted by ``d``.

    Sweep in order of increasing ``d``: within a group of equal ``d`` only
    the points attaining the group's largest ``i_star`` can survive, and
    they survive iff that value beats every point of strictly smaller
    ``d``.  Equal points never dominate each other, so duplicates are all
    kept, in input order.
    """
    if not points:
        return []
    order = sorted(range(len(points)), key=lambda k: (points[k].d, k))
    front = []
    best_before = -np.inf
    pos = 0
    while pos < len(order):
        end = pos
        d = points[order[pos]].d
        while end < len(order) and points[order[end]].d == d:
            end += 1
        group = order[pos:end]
        gmax = max(points[k].i_star for k in group)
        if gmax > best_before:
            front.extend(points[k] for k in group if points[k].i_star == gmax)
            best_before = gmax
        pos = end
    return front
