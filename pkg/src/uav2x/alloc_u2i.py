"""U2I/CU subchannel allocation.

With the U2U allocation and speeds frozen, the rate of every (link,
subchannel) pair is a constant, so the allocation is a bipartite
b-matching: each subchannel carries at most one link, each link takes at
most ``chi_max`` subchannels. The LP relaxation of this problem has an
integral optimum, so an assignment solver returns the exact 0/1 answer.

Among equal-valued optima the lexicographically greatest row-major 0/1
vector is returned, which pins the result for flat channels where every
subchannel is worth the same to a given link.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ConstraintViolation

_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class AssignmentInstance:
    weights: np.ndarray
    chi_max: int = 2

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2:
            w = w.reshape(-1, 0) if w.size == 0 else np.atleast_2d(w)
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and non-negative")
        if self.chi_max < 1:
            raise ValueError("chi_max must be >= 1")
        object.__setattr__(self, "weights", w)

    def to_json(self) -> str:
        return json.dumps({"weights": self.weights.tolist(), "chi_max": self.chi_max})

    @classmethod
    def from_dict(cls, d: dict) -> "AssignmentInstance":
        w = np.asarray(d["weights"], dtype=float)
        return cls(w.reshape(len(d["weights"]), -1) if w.size else np.zeros((len(d["weights"]), 0)), int(d["chi_max"]))


def _best_value(w: np.ndarray, caps: np.ndarray) -> tuple[float, np.ndarray]:
    """Max-weight b-matching value (rows capacity ``caps``, columns 1)."""
    rows = np.repeat(np.arange(w.shape[0]), caps)
    if rows.size == 0 or w.shape[1] == 0:
        return 0.0, np.zeros(w.shape, dtype=int)
    expanded = w[rows]
    r, c = linear_sum_assignment(expanded, maximize=True)
    phi = np.zeros(w.shape, dtype=int)
    keep = expanded[r, c] > 0
    phi[rows[r[keep]], c[keep]] = 1
    return float(expanded[r, c][keep].sum()), phi


def solve_u2i(inst: AssignmentInstance) -> np.ndarray:
    """Exact binary Phi maximising sum(phi * weights)."""
    w = inst.weights
    R, K = w.shape
    caps = np.full(R, inst.chi_max)
    target, phi = _best_value(w, caps)
    if target == 0.0:
        return np.zeros((R, K), dtype=int)
    tol = _TIE_RTOL * max(1.0, abs(target))

    # Lexicographic refinement: walk (row, col) in order, keep a 1 whenever
    # some optimum still contains it.
    out = np.zeros((R, K), dtype=int)
    allowed = w > 0
    gained = 0.0
    for r in range(R):
        for k in range(K):
            if not allowed[r, k] or caps[r] == 0:
                continue
            trial_caps = caps.copy()
            trial_caps[r] -= 1
            sub = np.where(allowed, w, 0.0)
            sub[:, k] = 0.0
            value, _ = _best_value(sub, trial_caps)
            if gained + w[r, k] + value >= target - tol:
                out[r, k] = 1
                gained += w[r, k]
                caps[r] -= 1
                allowed[:, k] = False
            else:
                allowed[r, k] = False
    return out


def verify_phi(phi: np.ndarray, inst: AssignmentInstance) -> float:
    """Objective of ``phi``; raises ConstraintViolation if it is infeasible."""
    phi = np.asarray(phi)
    if phi.shape != inst.weights.shape:
        raise ValueError(f"shape mismatch: {phi.shape} vs {inst.weights.shape}")
    if not np.all((phi == 0) | (phi == 1)):
        raise ConstraintViolation("binary", "phi has non-binary entries")
    col = phi.sum(axis=0)
    if np.any(col > 1):
        k = int(np.argmax(col > 1))
        raise ConstraintViolation("subchannel-exclusive", f"subchannel {k} assigned to {int(col[k])} links")
    row = phi.sum(axis=1)
    if np.any(row > inst.chi_max):
        i = int(np.argmax(row > inst.chi_max))
        raise ConstraintViolation("link-capacity", f"link {i} holds {int(row[i])} > chi_max={inst.chi_max}")
    return float((phi * inst.weights).sum())


def greedy_u2i(inst: AssignmentInstance) -> np.ndarray:
    """Baseline: links by best single-channel rate, each grabs its best free channels."""
    w = inst.weights
    R, K = w.shape
    phi = np.zeros((R, K), dtype=int)
    if R == 0 or K == 0:
        return phi
    free = np.ones(K, dtype=bool)
    order = sorted(range(R), key=lambda i: (-w[i].max(), i))
    for i in order:
        for _ in range(inst.chi_max):
            cand = np.where(free, w[i], -1.0)
            k = int(np.argmax(cand))
            if cand[k] <= 0:
                break
            phi[i, k] = 1
            free[k] = False
    return phi
