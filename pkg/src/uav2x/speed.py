"""Per-slot UAV speed optimization.

Speeds are scalar (metres per slot) along each UAV's fixed heading. The
slot objective is evaluated at end-of-slot positions. Searches are
deterministic grids followed by local refinement; ties go to the smaller
speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import ContractError, HorizonInfeasible

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_HORIZON_SLACK = 1e-9


@dataclass(frozen=True)
class SpeedBounds:
    lower: float
    upper: float

    def __post_init__(self):
        if not 0.0 <= self.lower <= self.upper:
            raise ValueError(f"invalid speed bounds [{self.lower}, {self.upper}]")

    def clip(self, v: float) -> float:
        return min(max(v, self.lower), self.upper)


def feasible_bounds(u, t: int, T: int, v_max: float) -> SpeedBounds:
    """Speed range that still lets ``u`` finish its trajectory by slot T."""
    if t >= T:
        raise HorizonInfeasible(f"slot {t} is outside the horizon T={T}")
    remaining = u.trajectory_length - u.progress
    if remaining > v_max * (T - t) + _HORIZON_SLACK:
        raise HorizonInfeasible(
            f"UAV {u.id}: {remaining:.6g} m left with only {T - t} slots at v_max={v_max}"
        )
    lower = max(0.0, remaining - v_max * (T - t - 1))
    return SpeedBounds(min(lower, v_max), v_max)


def u2u_max_distance(
    signal_coeff: float,
    interference: np.ndarray,
    r_min: float,
    alpha: float,
) -> float:
    """Largest transmitter-receiver distance that keeps the link at ``r_min``.

    ``signal_coeff`` is P_U*G (times fading); ``interference`` holds noise plus
    frozen interference on each assigned subchannel.
    """
    a = np.asarray(interference, dtype=float).ravel()
    if a.size == 0:
        raise ContractError("U2U link has no assigned subchannel")
    if r_min <= 0:
        return math.inf
    a = a[np.isfinite(a)]
    if a.size == 0:
        return 0.0
    if a.size == 1:
        return (signal_coeff / (a[0] * (2.0**r_min - 1.0))) ** (1.0 / alpha)

    def excess(log_d):
        d = math.exp(log_d)
        return float(np.log2(1.0 + signal_coeff * d ** (-alpha) / a).sum()) - r_min

    # bracket from the single-channel bounds: the sum lies between one and a.size copies
    lo = math.log((signal_coeff / (a.max() * (2.0**r_min - 1.0))) ** (1.0 / alpha)) - 1.0
    hi = math.log((signal_coeff / (a.min() * (2.0 ** (r_min / a.size) - 1.0))) ** (1.0 / alpha)) + 1.0
    return math.exp(brentq(excess, lo, hi, xtol=1e-14, rtol=1e-14))


def _grid(bounds: SpeedBounds, delta: float) -> np.ndarray:
    if bounds.upper - bounds.lower <= 0:
        return np.array([bounds.lower])
    n = max(1, int(math.ceil((bounds.upper - bounds.lower) / delta - 1e-12)))
    return np.linspace(bounds.lower, bounds.upper, n + 1)


def _argmax_smallest(values: np.ndarray, candidates: np.ndarray) -> int:
    best = values.max()
    tied = np.flatnonzero(values >= best)
    return int(tied[np.argmin(candidates[tied])])


def optimize_non_u2u(
    objective: Callable[[np.ndarray], np.ndarray],
    bounds: SpeedBounds,
    delta: float | None = None,
    tol: float = 1e-6,
    current: float | None = None,
) -> float:
    """Maximise a 1-D objective over ``bounds``.

    ``objective`` maps an array of speeds to an array of values. A grid of
    step ``delta`` (plus ``current``) locates the best bracket, golden-section
    search refines it; the refined point is kept only if strictly better.
    """
    if bounds.upper <= bounds.lower:
        return bounds.lower
    delta = delta if delta is not None else (bounds.upper - bounds.lower) / 100.0
    cand = _grid(bounds, delta)
    if current is not None and bounds.lower <= current <= bounds.upper:
        cand = np.union1d(cand, [current])
    vals = np.asarray(objective(cand), dtype=float)
    i = _argmax_smallest(vals, cand)
    v_best, f_best = float(cand[i]), float(vals[i])
    if np.all(vals == f_best):
        return float(cand.min())
    lo = float(cand[i - 1]) if i > 0 else v_best
    hi = float(cand[i + 1]) if i + 1 < len(cand) else v_best
    if hi - lo > tol:
        a, b = lo, hi
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        fc, fd = objective(np.array([c, d]))
        while b - a > tol:
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - _GOLDEN * (b - a)
                fc = float(objective(np.array([c]))[0])
            else:
                a, c, fc = c, d, fd
                d = a + _GOLDEN * (b - a)
                fd = float(objective(np.array([d]))[0])
        v_ref = 0.5 * (a + b)
        f_ref = float(objective(np.array([v_ref]))[0])
        if f_ref > f_best:
            return v_ref
    return v_best


@dataclass
class PairResult:
    speed_tx: float
    speed_rx: float
    violated: bool


def optimize_u2u_pair(
    objective: Callable[[np.ndarray, np.ndarray], np.ndarray],
    bounds_tx: SpeedBounds,
    bounds_rx: SpeedBounds,
    slack: Callable[[np.ndarray, np.ndarray], np.ndarray],
    delta: float | None = None,
    levels: int = 2,
    current: tuple[float, float] | None = None,
) -> PairResult:
    """Maximise a 2-D objective over the speed box where ``slack <= 0``.

    ``slack(v_tx, v_rx)`` is end-of-slot distance minus its allowed maximum
    (maximum over every distance constraint touching the pair). When no
    grid point satisfies it, the point of least slack is returned with
    ``violated=True``.
    """
    span = max(bounds_tx.upper - bounds_tx.lower, bounds_rx.upper - bounds_rx.lower)
    delta = delta if delta is not None else (span / 100.0 if span > 0 else 1.0)
    gt = _grid(bounds_tx, delta)
    gr = _grid(bounds_rx, delta)
    if current is not None:
        gt = np.union1d(gt, [bounds_tx.clip(current[0])])
        gr = np.union1d(gr, [bounds_rx.clip(current[1])])
    VT, VR = np.meshgrid(gt, gr, indexing="ij")
    sl = np.asarray(slack(VT, VR), dtype=float)
    feasible = sl <= 0
    if not feasible.any():
        # lexicographic: least slack, then smallest speeds
        flat = np.lexsort((VR.ravel(), VT.ravel(), sl.ravel()))
        j = flat[0]
        return PairResult(float(VT.ravel()[j]), float(VR.ravel()[j]), True)
    vals = np.where(feasible, np.asarray(objective(VT, VR), dtype=float), -np.inf)
    f_best = vals.max()
    tied = np.flatnonzero(vals.ravel() >= f_best)
    j = tied[np.lexsort((VR.ravel()[tied], VT.ravel()[tied]))[0]]
    bt, br = float(VT.ravel()[j]), float(VR.ravel()[j])
    if np.all(vals[feasible] == f_best):
        return PairResult(bt, br, False)
    step = delta
    for _ in range(levels):
        ft = np.clip(np.linspace(bt - step, bt + step, 21), bounds_tx.lower, bounds_tx.upper)
        fr = np.clip(np.linspace(br - step, br + step, 21), bounds_rx.lower, bounds_rx.upper)
        FT, FR = np.meshgrid(np.unique(ft), np.unique(fr), indexing="ij")
        ok = np.asarray(slack(FT, FR), dtype=float) <= 0
        fv = np.where(ok, np.asarray(objective(FT, FR), dtype=float), -np.inf)
        m = fv.max()
        if m > f_best:
            tied = np.flatnonzero(fv.ravel() >= m)
            j = tied[np.lexsort((FR.ravel()[tied], FT.ravel()[tied]))[0]]
            bt, br, f_best = float(FT.ravel()[j]), float(FR.ravel()[j]), m
        step /= 10.0
    return PairResult(bt, br, False)
