"""Sense-and-send protocol driver over the full horizon.

Per slot: every UAV senses ``sense_bits``; the BS categorizes and pairs the
UAVs; the chosen policy decides allocations and speeds; U2I UAVs upload and
U2U transmitters hand data to their relays (both limited by the cache held
before transmission); then every UAV moves.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams
from .config import RunConfig
from .errors import CategorizationError
from .isasoa import SlotDecision, solve_slot
from .scenario import ScenarioState, advance_position, categorize_and_pair, generate_scenario
from .slot import SlotProblem

CONSERVATION_TOL = 1e-9
CSV_FIELDS = ("slot", "policy", "objective", "iterations", "total_uplink_bits", "u2u_bits", "violations")


def fmt(x: float) -> str:
    return f"{x:.9g}"


@dataclass
class SlotLog:
    slot: int
    u2i_set: tuple[int, ...]
    u2u_set: tuple[int, ...]
    pairing: dict[int, int]
    decision: SlotDecision
    uplink_bits: dict[int, float]  # per U2I UAV
    cu_bits: float
    u2u_bits: dict[int, float]  # per U2U transmitter, delivered to its relay
    u2u_sum_rate: float
    trace: list[float] | None
    qos_violations: list[str] = field(default_factory=list)
    conservation_error: float = 0.0

    @property
    def total_uplink_bits(self) -> float:
        return float(sum(self.uplink_bits.values()))

    @property
    def total_u2u_bits(self) -> float:
        return float(sum(self.u2u_bits.values()))

    def csv_row(self, policy: str) -> list[str]:
        return [
            str(self.slot),
            policy,
            fmt(self.decision.objective),
            str(self.decision.iterations),
            fmt(self.total_uplink_bits),
            fmt(self.total_u2u_bits),
            ";".join(self.qos_violations),
        ]


@dataclass
class RunResult:
    policy: str
    seed: int
    logs: list[SlotLog]
    completed: list[bool]
    total_sensed: float
    final_cache: list[float]

    @property
    def mean_sum_rate(self) -> float:
        return float(np.mean([g.decision.objective for g in self.logs])) if self.logs else 0.0

    @property
    def mean_u2u_sum_rate(self) -> float:
        return float(np.mean([g.u2u_sum_rate for g in self.logs])) if self.logs else 0.0

    @property
    def total_uploaded(self) -> float:
        return float(sum(g.total_uplink_bits for g in self.logs))

    @property
    def max_conservation_error(self) -> float:
        return max((g.conservation_error for g in self.logs), default=0.0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for g in self.logs:
            w.writerow(g.csv_row(self.policy))
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "policy": self.policy,
            "seed": self.seed,
            "slots": len(self.logs),
            "mean_uplink_sum_rate": self.mean_sum_rate,
            "mean_u2u_sum_rate": self.mean_u2u_sum_rate,
            "total_uploaded_bits": self.total_uploaded,
            "total_sensed_bits": self.total_sensed,
            "final_cache_bits": float(sum(self.final_cache)),
            "completed": self.completed,
            "slots_with_violations": sum(1 for g in self.logs if g.qos_violations),
            "max_conservation_error": self.max_conservation_error,
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"


def _categorize(s: ScenarioState, params: ChannelParams, cfg: RunConfig):
    """Categorize and pair; with no relay available the U2U UAVs stay idle."""
    p = cfg.protocol
    try:
        return categorize_and_pair(s, params, p.snr_threshold_db, p.n_u2u), []
    except CategorizationError as exc:
        cat = categorize_and_pair(s, params, p.snr_threshold_db, None) if p.n_u2u is not None else None
        u2i = cat.u2i_set if cat is not None else ()
        return s.replace(u2i_set=tuple(u2i), u2u_set=(), pairing={}), [f"categorization:{exc}"]


def run_simulation(
    cfg: RunConfig,
    policy: str = "isasoa",
    keep_traces: bool = True,
    bnb_trace=None,
    initial_state: ScenarioState | None = None,
) -> RunResult:
    """Run the protocol for ``horizon_T`` slots. Pure function of its inputs.

    ``initial_state`` replaces the generated scenario (hand-built layouts).
    """
    cfg.validate()
    sc, params, settings, proto = cfg.scenario, cfg.channel, cfg.solver, cfg.protocol
    state = generate_scenario(sc) if initial_state is None else initial_state
    logs: list[SlotLog] = []
    total_sensed = 0.0
    uploaded_total = 0.0
    for t in range(sc.horizon_T):
        state = state.replace(slot=t)
        # 1. sensing
        uavs = [dataclasses.replace(u, cache_bits=u.cache_bits + proto.sense_bits) for u in state.uavs]
        total_sensed += proto.sense_bits * len(uavs)
        state = state.replace(uavs=tuple(uavs))
        # 2-3. report, categorization and pairing, BS decision
        state, notes = _categorize(state, params, cfg)
        problem = SlotProblem(state, params, sc.n_subchannels, t, sc.horizon_T, sc.v_max)
        if bnb_trace is not None:
            bnb_trace({"event": "slot", "slot": t, "policy": policy})
        decision, trace = solve_slot(problem, policy, settings, bnb_trace)
        # 4-5. link access and transmission, evaluated at the decided positions
        report = problem.report(decision.phi, decision.psi, decision.speeds)
        lay = problem.layout
        row_rates = report.phi_row_rates(decision.phi)
        cache = np.array([u.cache_bits for u in state.uavs])
        before = cache.copy()
        uplink = {}
        for r, uav in enumerate(lay.u2i):
            bits = min(before[uav], row_rates[r] * proto.capacity_scale)
            uplink[uav] = float(bits)
            cache[uav] -= bits
        cu_bits = float(row_rates[len(lay.u2i) :].sum() * proto.capacity_scale)
        relayed = {}
        for i, tx in enumerate(lay.u2u):
            if not decision.psi[i].any():
                relayed[tx] = 0.0
                continue
            bits = min(before[tx], report.u2u_link_rate[i] * proto.capacity_scale)
            relayed[tx] = float(bits)
            cache[tx] -= bits
            cache[lay.rx[i]] += bits
        uploaded_total += sum(uplink.values())
        err = abs(total_sensed - uploaded_total - cache.sum())
        rel = err / max(1.0, total_sensed)
        # 6. movement
        moved = [
            dataclasses.replace(advance_position(u, float(v), sc.v_max), cache_bits=float(c))
            for u, v, c in zip(state.uavs, decision.speeds, cache)
        ]
        logs.append(
            SlotLog(
                slot=t,
                u2i_set=state.u2i_set,
                u2u_set=state.u2u_set,
                pairing=dict(state.pairing),
                decision=decision,
                uplink_bits=uplink,
                cu_bits=cu_bits,
                u2u_bits=relayed,
                u2u_sum_rate=float(report.u2u_link_rate.sum()),
                trace=list(trace.objectives) if (trace is not None and keep_traces) else None,
                qos_violations=notes + decision.violations,
                conservation_error=rel,
            )
        )
        state = state.replace(uavs=tuple(moved))
    completed = [u.progress >= u.trajectory_length - 1e-9 for u in state.uavs]
    return RunResult(policy, sc.rng_seed, logs, completed, total_sensed, [u.cache_bits for u in state.uavs])


def trace_csv(result: RunResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("slot", "iteration", "objective"))
    for g in result.logs:
        for r, v in enumerate(g.trace or []):
            w.writerow((g.slot, r, fmt(v)))
    return buf.getvalue()

