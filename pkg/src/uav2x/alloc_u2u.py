"""U2U subchannel allocation: LFSS seeding plus depth-first branch-and-bound.

With Phi and the speeds frozen, the uplink objective depends on Psi only
through the U2U leakage each subchannel sees at the BS, and every U2U link
must keep its aggregate rate at or above ``r_min`` with at most ``chi_max``
subchannels.

Node states are int8 matrices: -1 unfixed, 0 / 1 fixed. Bounds at a node:

* objective: evaluate the uplink objective with only the fixed-1 entries
  switched on (unfixed entries can only add leakage);
* per-link rate: own fixed-1 terms plus the best ``chi_max - n_fixed1``
  unfixed terms, with interference from other links' fixed-1 entries only.

Variable fixation uses the one-variable penalties of both bounds; a
variable pushed to both values fathoms the node.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ContractError

UNFIXED = -1
DEFAULT_NODE_BUDGET = 1_000_000
_FEAS_TOL = 1e-12


@dataclass(frozen=True)
class U2uInstance:
    """Everything the U2U allocation needs, with Phi already applied.

    Shapes: R Phi rows, L U2U links, K subchannels.
    """

    phi: np.ndarray  # (R, K) binary
    bs_signal: np.ndarray  # (R, K)
    bs_leak: np.ndarray  # (L, K)
    u2u_signal: np.ndarray  # (L, K)
    u2u_cross: np.ndarray  # (L, L, K) [i, m]: link m's transmitter at link i's receiver
    fixed_interference: np.ndarray  # (L, K) noise + co-channel U2I/CU power at the receiver
    noise: float
    r_min: float = 10.0
    chi_max: int = 2

    def __post_init__(self):
        for name in ("phi", "bs_signal", "bs_leak", "u2u_signal", "u2u_cross", "fixed_interference"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.r_min < 0:
            raise ValueError("r_min must be >= 0")
        arrays = (self.bs_signal, self.bs_leak, self.u2u_signal, self.u2u_cross, self.fixed_interference)
        if any(np.any(a < 0) for a in arrays):
            raise ValueError("powers must be non-negative")

    @property
    def shape(self) -> tuple[int, int]:
        return self.bs_leak.shape

    @classmethod
    def from_powers(cls, lp, phi, r_min: float, chi_max: int) -> "U2uInstance":
        return cls(
            phi=phi,
            bs_signal=lp.bs_signal,
            bs_leak=lp.bs_leak,
            u2u_signal=lp.u2u_signal,
            u2u_cross=lp.u2u_cross,
            fixed_interference=lp.fixed_u2u_interference(np.asarray(phi)),
            noise=lp.noise,
            r_min=r_min,
            chi_max=chi_max,
        )

    def to_dict(self) -> dict:
        def enc(a):
            return np.where(np.isinf(a), -1.0, a).tolist()

        return {
            "phi": self.phi.astype(int).tolist(),
            "bs_signal": self.bs_signal.tolist(),
            "bs_leak": self.bs_leak.tolist(),
            "u2u_signal": self.u2u_signal.tolist(),
            "u2u_cross": self.u2u_cross.tolist(),
            "fixed_interference": enc(self.fixed_interference),
            "noise": self.noise,
            "r_min": self.r_min,
            "chi_max": self.chi_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "U2uInstance":
        fi = np.asarray(d["fixed_interference"], dtype=float)
        K = np.asarray(d["phi"]).shape[1] if np.asarray(d["phi"]).ndim == 2 else 0
        L = len(d["bs_leak"])

        def arr(key, shape):
            a = np.asarray(d[key], dtype=float)
            return a.reshape(shape) if a.size == 0 else a

        return cls(
            phi=arr("phi", (len(d["phi"]), K)),
            bs_signal=arr("bs_signal", (len(d["bs_signal"]), K)),
            bs_leak=arr("bs_leak", (L, K)),
            u2u_signal=arr("u2u_signal", (L, K)),
            u2u_cross=arr("u2u_cross", (L, L, K)),
            fixed_interference=np.where(fi < 0, np.inf, fi).reshape(L, K),
            noise=float(d["noise"]),
            r_min=float(d["r_min"]),
            chi_max=int(d["chi_max"]),
        )

    # -- evaluation ---------------------------------------------------------

    def channel_values(self, leak_per_channel: np.ndarray) -> np.ndarray:
        """Uplink rate carried by each subchannel for a given U2U leakage at the BS."""
        sinr = self.bs_signal / (self.noise + leak_per_channel[None, :])
        return (self.phi * np.log2(1.0 + sinr)).sum(axis=0)

    def link_rate_terms(self, on: np.ndarray) -> np.ndarray:
        """Rate of link i on channel k when the entries of ``on`` transmit, (L, K)."""
        interference = np.einsum("imk,mk->ik", self.u2u_cross, on)
        total = self.fixed_interference + interference
        with np.errstate(invalid="ignore", divide="ignore"):
            sinr = np.where(np.isinf(total), 0.0, self.u2u_signal / total)
        return np.log2(1.0 + sinr)


def u2u_objective(psi: np.ndarray, inst: U2uInstance) -> float:
    """Uplink sum-rate (Phi fixed) as a function of Psi."""
    psi = np.asarray(psi, dtype=float)
    leak = (psi * inst.bs_leak).sum(axis=0) if psi.size else np.zeros(inst.phi.shape[1])
    return float(inst.channel_values(leak).sum())


def u2u_link_rates(psi: np.ndarray, inst: U2uInstance) -> np.ndarray:
    psi = np.asarray(psi, dtype=float)
    if psi.shape[0] == 0:
        return np.zeros(0)
    return (psi * inst.link_rate_terms(psi)).sum(axis=1)


def is_feasible(psi: np.ndarray, inst: U2uInstance) -> bool:
    psi = np.asarray(psi)
    if psi.shape[0] == 0:
        return True
    if not np.all((psi == 0) | (psi == 1)):
        return False
    if np.any(psi.sum(axis=1) > inst.chi_max):
        return False
    return bool(np.all(u2u_link_rates(psi, inst) >= inst.r_min - _FEAS_TOL))


@dataclass
class LfssResult:
    psi: np.ndarray
    feasible: bool
    failed_link: int | None = None


def lfss(inst: U2uInstance) -> LfssResult:
    """Greedy feasible-point search used to seed the branch-and-bound.

    Each link ranks subchannels by its rate under U2I/CU interference only,
    takes the first choice, then any link still short of ``r_min`` keeps
    adding its next preferred subchannel (never beyond ``chi_max``).
    """
    L, K = inst.shape
    psi = np.zeros((L, K), dtype=int)
    if L == 0:
        return LfssResult(psi, True)
    alone = inst.link_rate_terms(np.zeros((L, K)))
    prefs = [sorted(range(K), key=lambda k, i=i: (-alone[i, k], k)) for i in range(L)]
    cursor = [0] * L
    for i in range(L):
        if K:
            psi[i, prefs[i][0]] = 1
            cursor[i] = 1
    while True:
        rates = u2u_link_rates(psi, inst)
        short = [i for i in range(L) if rates[i] < inst.r_min - _FEAS_TOL]
        if not short:
            return LfssResult(psi, True)
        i = short[0]
        if cursor[i] >= K or psi[i].sum() >= inst.chi_max:
            return LfssResult(psi, False, failed_link=i)
        psi[i, prefs[i][cursor[i]]] = 1
        cursor[i] += 1


@dataclass
class BnbResult:
    psi: np.ndarray
    objective: float
    feasible: bool
    nodes: int
    complete: bool  # search finished within the node budget
    fathomed: dict = field(default_factory=dict)


class _Search:
    def __init__(self, inst: U2uInstance, trace: Callable[[dict], None] | None):
        self.inst = inst
        self.trace = trace
        L, K = inst.shape
        self.L, self.K = L, K
        # branching priority: rate under fixed interference only
        alone = inst.link_rate_terms(np.zeros((L, K)))
        order = sorted(((i, k) for i in range(L) for k in range(K)), key=lambda ik: (-alone[ik], ik))
        self.branch_order = order

    def emit(self, **event):
        if self.trace is not None:
            self.trace(event)


def branch_and_bound(
    inst: U2uInstance,
    seed: np.ndarray | None,
    node_budget: int | None = DEFAULT_NODE_BUDGET,
    trace: Callable[[dict], None] | None = None,
) -> BnbResult:
    """Maximise the uplink objective over feasible Psi.

    ``seed`` must be feasible; its objective is the initial incumbent. With
    ``seed=None`` the search starts without an incumbent. ``node_budget=None``
    searches to completion (exact); otherwise the best feasible point found
    when the budget runs out is returned.
    """
    L, K = inst.shape
    search = _Search(inst, trace)
    if seed is not None:
        seed = np.asarray(seed, dtype=int)
        if seed.shape != (L, K) or not is_feasible(seed, inst):
            raise ContractError("branch_and_bound seed is not a feasible U2U allocation")
        best = seed.copy()
        f_lb = u2u_objective(seed, inst)
    else:
        best = None
        f_lb = -math.inf
    if L == 0 or K == 0:
        psi = np.zeros((L, K), dtype=int)
        ok = is_feasible(psi, inst)
        return BnbResult(psi, u2u_objective(psi, inst), ok, 0, True)

    r_min = inst.r_min
    chi = inst.chi_max
    leak = inst.bs_leak
    stack = [np.full((L, K), UNFIXED, dtype=np.int8)]
    nodes = 0
    fathomed = {"objective": 0, "capacity": 0, "rate": 0, "contradiction": 0, "incumbent": 0}
    complete = True

    while stack:
        if node_budget is not None and nodes >= node_budget:
            complete = False
            break
        state = stack.pop()
        nodes += 1
        depth = int((state != UNFIXED).sum())
        ones = (state == 1).astype(float)
        unfixed = state == UNFIXED

        # objective bound
        base_leak = (ones * leak).sum(axis=0)
        ch_val = inst.channel_values(base_leak)
        f_bar = float(ch_val.sum())
        if f_bar <= f_lb:
            fathomed["objective"] += 1
            search.emit(node=nodes, depth=depth, event="fathom", reason="objective", f_bar=f_bar, f_lb=f_lb, state=state.tolist())
            continue

        n1 = ones.sum(axis=1)
        if np.any(n1 > chi):
            fathomed["capacity"] += 1
            search.emit(node=nodes, depth=depth, event="fathom", reason="capacity", state=state.tolist())
            continue

        # rate bound for every link
        terms = inst.link_rate_terms(ones)
        fixed_part = (ones * terms).sum(axis=1)
        cap = (chi - n1).astype(int)
        free_terms = np.where(unfixed, terms, -np.inf)
        sorted_free = -np.sort(-free_terms, axis=1)  # descending, -inf padded
        sorted_free = np.where(np.isinf(sorted_free), 0.0, sorted_free)
        csum = np.concatenate([np.zeros((L, 1)), np.cumsum(sorted_free, axis=1)], axis=1)
        top = csum[np.arange(L), np.minimum(cap, K)]
        r_bar = fixed_part + top
        if np.any(r_bar < r_min - _FEAS_TOL):
            fathomed["rate"] += 1
            search.emit(node=nodes, depth=depth, event="fathom", reason="rate", r_bar=r_bar.tolist(), f_bar=f_bar, state=state.tolist())
            continue

        search.emit(node=nodes, depth=depth, event="visit", f_bar=f_bar, f_lb=f_lb, r_bar=r_bar.tolist(), state=state.tolist())

        # the fixed-1 part alone is a complete allocation; adopt it if feasible
        if np.all(fixed_part >= r_min - _FEAS_TOL):
            best = (state == 1).astype(int)
            f_lb = f_bar
            fathomed["incumbent"] += 1
            search.emit(node=nodes, depth=depth, event="incumbent", f_lb=f_lb, state=state.tolist())
            # every descendant only adds leakage, so none can beat it
            continue
        if not unfixed.any():
            continue

        # -- variable fixation ------------------------------------------------
        fix0 = np.zeros((L, K), dtype=bool)
        fix1 = np.zeros((L, K), dtype=bool)
        # rows already at capacity cannot take another subchannel
        fix0 |= unfixed & (cap[:, None] <= 0)
        if math.isfinite(f_lb):
            # p1: loss of the objective bound if psi_ik were switched on
            p1 = _penalty_one(inst, base_leak, ch_val)
            fix0 |= unfixed & (f_bar - p1 <= f_lb)
            # p0 is identically zero (unfixed entries are already off in the
            # bound), so its rule only fires when f_bar <= f_lb, which was
            # fathomed above.
        # q0: loss of link i's rate bound if psi_ik were switched off
        kth = np.minimum(cap, K)
        in_top = np.zeros((L, K), dtype=bool)
        nxt = np.zeros(L)
        for i in range(L):
            if cap[i] <= 0:
                continue
            cand = [k for k in np.argsort(-free_terms[i], kind="stable") if unfixed[i, k]]
            chosen = cand[: kth[i]]
            in_top[i, chosen] = True
            nxt[i] = free_terms[i, cand[kth[i]]] if len(cand) > kth[i] else 0.0
        q0 = np.where(in_top, terms - nxt[:, None], 0.0)
        fix1 |= unfixed & (r_bar[:, None] - q0 < r_min - _FEAS_TOL)

        if np.any(fix0 & fix1):
            fathomed["contradiction"] += 1
            search.emit(node=nodes, depth=depth, event="fathom", reason="contradiction", state=state.tolist())
            continue
        if fix0.any() or fix1.any():
            child = state.copy()
            child[fix0] = 0
            child[fix1] = 1
            search.emit(
                node=nodes,
                depth=depth,
                event="fix",
                fix0=np.argwhere(fix0).tolist(),
                fix1=np.argwhere(fix1).tolist(),
                f_lb=f_lb,
                state=state.tolist(),
            )
            stack.append(child)
            continue

        # branch: 0-child pushed first so the 1-child is explored first
        i, k = next(ik for ik in search.branch_order if state[ik] == UNFIXED)
        zero = state.copy()
        zero[i, k] = 0
        one = state.copy()
        one[i, k] = 1
        stack.append(zero)
        stack.append(one)

    if best is None:
        psi = np.zeros((L, K), dtype=int)
        return BnbResult(psi, u2u_objective(psi, inst), False, nodes, complete, fathomed)
    return BnbResult(best, u2u_objective(best, inst), True, nodes, complete, fathomed)


def _penalty_one(inst: U2uInstance, base_leak: np.ndarray, ch_val: np.ndarray) -> np.ndarray:
    """Drop of each channel's value if link i's leakage is added there, (L, K)."""
    L, K = inst.shape
    leak_new = base_leak[None, :] + inst.bs_leak  # (L, K)
    sinr = inst.bs_signal[None, :, :] / (inst.noise + leak_new[:, None, :])  # (L, R, K)
    val = (inst.phi[None, :, :] * np.log2(1.0 + sinr)).sum(axis=1)
    return ch_val[None, :] - val


def enumerate_u2u(inst: U2uInstance):
    """Exhaustive optimum over all 2^(L*K) matrices (test oracle).

    Returns (best_objective, best_psi) or (None, None) when infeasible.
    """
    L, K = inst.shape
    n = L * K
    best_val, best_psi = None, None
    for code in range(1 << n):
        bits = np.array([(code >> b) & 1 for b in range(n)], dtype=int).reshape(L, K)
        if not is_feasible(bits, inst):
            continue
        v = u2u_objective(bits, inst)
        if best_val is None or v > best_val:
            best_val, best_psi = v, bits
    return best_val, best_psi


def greedy_u2u(inst: U2uInstance) -> tuple[np.ndarray, list[int]]:
    """Baseline: each link in turn adds the subchannel that maximises its own rate.

    Links that cannot reach ``r_min`` within ``chi_max`` subchannels are
    switched off; their indices are returned.
    """
    L, K = inst.shape
    psi = np.zeros((L, K), dtype=int)
    dropped = []
    for i in range(L):
        while True:
            current = u2u_link_rates(psi, inst)[i]
            if current >= inst.r_min - _FEAS_TOL:
                break
            if psi[i].sum() >= inst.chi_max:
                dropped.append(i)
                psi[i] = 0
                break
            best_k, best_rate = None, -1.0
            for k in range(K):
                if psi[i, k]:
                    continue
                trial = psi.copy()
                trial[i, k] = 1
                r = u2u_link_rates(trial, inst)[i]
                if r > best_rate:
                    best_k, best_rate = k, r
            if best_k is None:
                dropped.append(i)
                psi[i] = 0
                break
            psi[i, best_k] = 1
    return psi, dropped


def dump_trace_line(fh) -> Callable[[dict], None]:
    def write(event: dict) -> None:
        fh.write(json.dumps(event, sort_keys=True) + "\n")

    return write
