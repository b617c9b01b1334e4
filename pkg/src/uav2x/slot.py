"""One time slot as an optimization problem: geometry, powers, objective.

The allocation solvers see frozen powers; the speed step needs the
objective as a function of individual UAV speeds, which is what
``SlotProblem.objective_with`` provides (vectorised over speed grids).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams, LinkLayout, a2g_pathloss_db, link_powers, rates_from_powers
from .speed import (
    SpeedBounds,
    feasible_bounds,
    optimize_non_u2u,
    optimize_u2u_pair,
    u2u_max_distance,
)


@dataclass(frozen=True)
class SolverSettings:
    chi_max: int = 2
    r_min: float = 10.0
    eps: float = 0.1
    max_iter: int = 50
    v0: float | None = None  # None: v_max / 2
    bnb_budget: int | None = 1_000_000
    speed_delta: float | None = None  # None: v_max / 100
    speed_tol: float = 1e-6


@dataclass
class SlotProblem:
    state: object  # categorized ScenarioState
    params: ChannelParams
    n_subchannels: int
    slot: int
    horizon_T: int
    v_max: float
    layout: LinkLayout = field(init=False)
    bounds: list[SpeedBounds] = field(init=False)

    def __post_init__(self):
        s = self.state
        self.layout = LinkLayout.from_state(s)
        self.start = s.uav_positions()
        self.dirs = s.uav_directions()
        self.cu_pos = s.cu_positions()
        self.bs_height = s.bs_height
        self.bounds = [feasible_bounds(u, self.slot, self.horizon_T, self.v_max) for u in s.uavs]
        self.noise = self.params.noise_w

    @property
    def n_uavs(self) -> int:
        return len(self.start)

    def clip_speeds(self, v) -> np.ndarray:
        return np.array([b.clip(float(x)) for b, x in zip(self.bounds, np.broadcast_to(v, (self.n_uavs,)))])

    def positions(self, speeds) -> np.ndarray:
        return self.start + np.asarray(speeds, dtype=float)[:, None] * self.dirs

    def powers(self, speeds):
        return link_powers(self.layout, self.positions(speeds), self.cu_pos, self.bs_height, self.params, self.n_subchannels)

    def report(self, phi, psi, speeds):
        return rates_from_powers(self.powers(speeds), phi, psi)

    def objective(self, phi, psi, speeds) -> float:
        return self.report(phi, psi, speeds).uplink_sum_rate

    # -- vectorised evaluation for the speed step ---------------------------

    def bs_power(self, uav: int, v) -> np.ndarray:
        """Received power at the BS from ``uav`` moving at speed(s) ``v``."""
        v = np.asarray(v, dtype=float)
        p = self.start[uav] + v[..., None] * self.dirs[uav]
        dh = p[..., 2] - self.bs_height
        d = np.sqrt(p[..., 0] ** 2 + p[..., 1] ** 2 + dh**2)
        return self.params.tx_power_w / 10.0 ** (a2g_pathloss_db(d, dh, self.params) / 10.0)

    def _fixed_power(self, uav: int, v: float) -> float:
        key = (uav, float(v))
        cache = self.__dict__.setdefault("_pcache", {})
        if key not in cache:
            cache[key] = float(self.bs_power(uav, v))
        return cache[key]

    def partial_objective(self, phi, psi, speeds, movers: tuple[int, ...]):
        """Slot objective as a function of the speeds of ``movers`` only.

        Returns ``f(*speed_arrays)``; every other UAV stays at ``speeds``.
        The per-subchannel structure is resolved once, so repeated calls
        cost one power evaluation per mover.
        """
        n_u2i = len(self.layout.u2i)
        slot_of = {u: j for j, u in enumerate(movers)}
        cu_sig = self._cu_signal()
        terms = []  # (signal const or mover slot, interference const, mover slots leaking)
        for k in range(phi.shape[1]):
            holders = np.flatnonzero(phi[:, k])
            if holders.size == 0:
                continue
            r = int(holders[0])
            if r < n_u2i:
                uav = self.layout.u2i[r]
                sig = ("m", slot_of[uav]) if uav in slot_of else ("c", self._fixed_power(uav, speeds[uav]))
            else:
                sig = ("c", float(cu_sig[r - n_u2i]))
            base = self.noise
            leaking = []
            for i in np.flatnonzero(psi[:, k]) if psi.size else ():
                tx = self.layout.u2u[i]
                if tx in slot_of:
                    leaking.append(slot_of[tx])
                else:
                    base += self._fixed_power(tx, speeds[tx])
            terms.append((sig, base, leaking))

        def f(*vs):
            powers = [self.bs_power(u, v) for u, v in zip(movers, vs)]
            total = 0.0
            for (kind, val), base, leaking in terms:
                sig = powers[val] if kind == "m" else val
                interference = base
                for j in leaking:
                    interference = interference + powers[j]
                total = total + np.log2(1.0 + sig / interference)
            shape = np.broadcast_shapes(*(np.shape(v) for v in vs)) if vs else ()
            return np.broadcast_to(total, shape)

        return f

    def objective_with(self, phi, psi, speeds, movers: dict) -> np.ndarray:
        """Uplink objective with some UAV speeds replaced by (broadcastable) arrays."""
        keys = tuple(movers)
        return self.partial_objective(phi, psi, speeds, keys)(*(movers[u] for u in keys))

    def _cu_signal(self):
        if not hasattr(self, "_cu_sig_cache"):
            from .channel import cu_pathloss_db_at

            c = self.cu_pos
            if len(c):
                d = np.sqrt(c[:, 0] ** 2 + c[:, 1] ** 2 + (c[:, 2] - self.bs_height) ** 2)
                self._cu_sig_cache = self.params.tx_power_w / 10.0 ** (cu_pathloss_db_at(d, self.params.carrier_hz) / 10.0)
            else:
                self._cu_sig_cache = np.zeros(0)
        return self._cu_sig_cache


@dataclass
class SpeedStepInfo:
    violated_pairs: list[tuple[int, int]]
    reverted: bool


def optimize_speeds(problem: SlotProblem, phi, psi, speeds, settings: SolverSettings):
    """One Gauss-Seidel sweep over U2U pairs, then every other UAV.

    Each coordinate update includes the incumbent speed among its
    candidates, and the sweep is rejected as a whole if it lowers the slot
    objective.
    """
    phi = np.asarray(phi)
    psi = np.asarray(psi)
    original = np.asarray(speeds, dtype=float).copy()
    speeds = original.copy()
    before = problem.objective(phi, psi, speeds)
    delta = settings.speed_delta if settings.speed_delta is not None else problem.v_max / 100.0
    lay = problem.layout
    active = [i for i in range(lay.n_links) if psi[i].any()]
    violated = []

    # distance budgets with interference frozen at the current iterate
    d_max = {}
    if active:
        lp = problem.powers(speeds)
        a = lp.fixed_u2u_interference(phi)
        a = a + np.einsum("imk,mk->ik", lp.u2u_cross, psi)
        coeff = problem.params.tx_power_w * problem.params.gain_g * problem.params.fading_gain
        for i in active:
            d_max[i] = u2u_max_distance(coeff, a[i, psi[i] > 0], settings.r_min, problem.params.alpha)

    groups: dict[int, list[int]] = {}
    for i in active:
        groups.setdefault(lay.rx[i], []).append(i)

    for rx in sorted(groups):
        links = groups[rx]
        for i in links:
            tx = lay.u2u[i]
            others = [m for m in links if m != i]

            objective = problem.partial_objective(phi, psi, speeds, (tx, rx))

            def slack(vt, vr, tx=tx, rx=rx, i=i, others=others):
                p_rx = problem.start[rx] + vr[..., None] * problem.dirs[rx]
                p_tx = problem.start[tx] + vt[..., None] * problem.dirs[tx]
                s = np.linalg.norm(p_tx - p_rx, axis=-1) - d_max[i]
                for m in others:
                    p_m = problem.positions(speeds)[lay.u2u[m]]
                    s = np.maximum(s, np.linalg.norm(p_m - p_rx, axis=-1) - d_max[m])
                return s

            res = optimize_u2u_pair(
                objective,
                problem.bounds[tx],
                problem.bounds[rx],
                slack,
                delta=delta,
                current=(speeds[tx], speeds[rx]),
            )
            speeds[tx], speeds[rx] = res.speed_tx, res.speed_rx
            if res.violated:
                violated.append((tx, rx))

    in_pairs = {lay.u2u[i] for i in active} | set(groups)
    for u in range(problem.n_uavs):
        if u in in_pairs:
            continue

        objective = problem.partial_objective(phi, psi, speeds, (u,))
        speeds[u] = optimize_non_u2u(objective, problem.bounds[u], delta=delta, tol=settings.speed_tol, current=speeds[u])

    after = problem.objective(phi, psi, speeds)
    if after < before:
        return original, SpeedStepInfo(violated, True)
    return speeds, SpeedStepInfo(violated, False)
