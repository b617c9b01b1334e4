"""Per-slot iterative allocation and speed optimization, plus the greedy baseline.

Each iteration solves the U2I assignment, then the U2U allocation, then
the speeds, each with the other two blocks frozen. A candidate iterate that
would lower the slot objective is rejected and the loop stops there, so
the recorded trace never decreases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .alloc_u2i import AssignmentInstance, greedy_u2i, solve_u2i
from .channel import rates_from_powers
from .alloc_u2u import U2uInstance, branch_and_bound, greedy_u2u, is_feasible, lfss, u2u_objective
from .slot import SlotProblem, SolverSettings, optimize_speeds

_MONOTONE_SLACK = 1e-9
_QOS_SLACK = 0.01  # relative, absorbs the frozen-interference distance approximation


@dataclass
class SlotDecision:
    phi: np.ndarray
    psi: np.ndarray
    speeds: np.ndarray
    objective: float
    iterations: int
    converged: bool
    violations: list[str] = field(default_factory=list)
    u2u_feasible: bool = True  # False: no feasible U2U allocation, links left idle
    bnb_nodes: int = 0

    def to_dict(self) -> dict:
        return {
            "phi": self.phi.tolist(),
            "psi": self.psi.tolist(),
            "speeds": self.speeds.tolist(),
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "violations": list(self.violations),
            "u2u_feasible": self.u2u_feasible,
            "bnb_nodes": self.bnb_nodes,
        }


@dataclass
class IterTrace:
    objectives: list[float] = field(default_factory=list)

    def is_monotone(self, slack: float = _MONOTONE_SLACK) -> bool:
        return all(b >= a - slack for a, b in zip(self.objectives, self.objectives[1:]))


def initial_speeds(problem: SlotProblem, settings: SolverSettings) -> np.ndarray:
    v0 = settings.v0 if settings.v0 is not None else problem.v_max / 2.0
    return problem.clip_speeds(v0)


def u2u_step(problem: SlotProblem, phi, psi_prev, speeds, settings: SolverSettings, trace=None):
    """Exact U2U allocation seeded by LFSS (or the previous Psi if that is better).

    Returns (psi, feasible, nodes). With no feasible seed the slot's U2U
    links stay idle (psi = 0) and ``feasible`` is False.
    """
    lp = problem.powers(speeds)
    inst = U2uInstance.from_powers(lp, phi, settings.r_min, settings.chi_max)
    L, K = inst.shape
    idle = np.zeros((L, K), dtype=int)
    if L == 0:
        return idle, True, 0
    seed = lfss(inst)
    seed_psi = seed.psi if seed.feasible else None
    if psi_prev is not None and psi_prev.any() and is_feasible(psi_prev, inst):
        if seed_psi is None or u2u_objective(psi_prev, inst) > u2u_objective(seed_psi, inst):
            seed_psi = psi_prev
    if seed_psi is None:
        return idle, False, 0
    res = branch_and_bound(inst, seed_psi, node_budget=settings.bnb_budget, trace=trace)
    return res.psi.astype(int), True, res.nodes


def _u2i_step(problem: SlotProblem, psi, speeds, settings: SolverSettings) -> np.ndarray:
    lp = problem.powers(speeds)
    zero_phi = np.zeros(lp.bs_signal.shape, dtype=int)
    weights = rates_from_powers(lp, zero_phi, psi).bs_rate
    return solve_u2i(AssignmentInstance(weights, settings.chi_max))


def check_violations(problem: SlotProblem, phi, psi, speeds, settings: SolverSettings, u2u_ok, violated_pairs) -> list[str]:
    out = [] if u2u_ok else ["u2u-infeasible"]
    out += [f"distance:{tx}->{rx}" for tx, rx in violated_pairs]
    if psi.size:
        rep = problem.report(phi, psi, speeds)
        for i, r in enumerate(rep.u2u_link_rate):
            if psi[i].any() and r < settings.r_min * (1.0 - _QOS_SLACK):
                out.append(f"u2u-min-rate:{problem.layout.u2u[i]}")
        if np.any(psi.sum(axis=1) > settings.chi_max):
            out.append("link-capacity")
    return out


def run_isasoa(problem: SlotProblem, settings: SolverSettings = SolverSettings(), trace=None) -> tuple[SlotDecision, IterTrace]:
    R, L, K = problem.layout.n_phi_rows, problem.layout.n_links, problem.n_subchannels
    phi = np.zeros((R, K), dtype=int)
    psi = np.zeros((L, K), dtype=int)
    speeds = initial_speeds(problem, settings)
    current = problem.objective(phi, psi, speeds)
    it = IterTrace([current])
    u2u_ok, violated, nodes = True, [], 0
    converged = False
    iterations = 0
    while iterations < settings.max_iter:
        new_phi = _u2i_step(problem, psi, speeds, settings)
        new_psi, new_ok, n = u2u_step(problem, new_phi, psi, speeds, settings, trace=trace)
        nodes += n
        new_speeds, info = optimize_speeds(problem, new_phi, new_psi, speeds, settings)
        value = problem.objective(new_phi, new_psi, new_speeds)
        iterations += 1
        if value < current - _MONOTONE_SLACK:
            # keep the previous iterate; nothing better is reachable along this path
            converged = True
            break
        gain = value - current
        phi, psi, speeds, current = new_phi, new_psi, new_speeds, value
        u2u_ok, violated = new_ok, info.violated_pairs
        it.objectives.append(current)
        if gain <= settings.eps:
            converged = True
            break
    violations = check_violations(problem, phi, psi, speeds, settings, u2u_ok, violated)
    decision = SlotDecision(phi, psi, speeds, current, iterations, converged, violations, u2u_ok, nodes)
    return decision, it


def run_greedy(problem: SlotProblem, settings: SolverSettings = SolverSettings()) -> SlotDecision:
    speeds = initial_speeds(problem, settings)
    lp = problem.powers(speeds)
    with np.errstate(divide="ignore"):
        weights = np.log2(1.0 + lp.bs_signal / lp.noise)
    phi = greedy_u2i(AssignmentInstance(weights, settings.chi_max))
    inst = U2uInstance.from_powers(lp, phi, settings.r_min, settings.chi_max)
    psi, dropped = greedy_u2u(inst)
    u2u_ok = not dropped and is_feasible(psi, inst)
    if not u2u_ok:
        psi = np.zeros_like(psi)
    speeds, info = optimize_speeds(problem, phi, psi, speeds, settings)
    value = problem.objective(phi, psi, speeds)
    violations = check_violations(problem, phi, psi, speeds, settings, u2u_ok, info.violated_pairs)
    return SlotDecision(phi, psi, speeds, value, 1, True, violations, u2u_ok)


def solve_slot(problem: SlotProblem, policy: str, settings: SolverSettings = SolverSettings(), bnb_trace=None):
    """Dispatch by policy name; returns (decision, trace or None)."""
    if policy == "isasoa":
        return run_isasoa(problem, settings, trace=bnb_trace)
    if policy == "greedy":
        return run_greedy(problem, settings), None
    raise ValueError(f"unknown policy {policy!r}")


__all__ = [
    "IterTrace",
    "SlotDecision",
    "check_violations",
    "initial_speeds",
    "run_greedy",
    "run_isasoa",
    "solve_slot",
    "u2u_step",
]
