"""Propagation, interference, SINR and rate computations.

Powers are carried in watts internally; dB/dBm appear only at the edges.
All subchannels share the same large-scale channel, so per-subchannel
arrays are broadcasts of per-link values (scaled by ``fading_gain`` on
air-to-air links).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import speed_of_light

from .errors import ConstraintViolation, DomainError


@dataclass(frozen=True)
class ChannelParams:
    carrier_hz: float = 1e9
    eta_los_db: float = 1.0
    eta_nlos_db: float = 20.0
    a_env: float = 12.0
    b_env: float = 0.135
    alpha: float = 2.0
    gain_g_db: float = -31.5
    noise_dbm: float = -96.0
    tx_power_dbm: float = 23.0
    fading_gain: float = 1.0

    def validate(self) -> "ChannelParams":
        from .errors import ConfigError

        if self.alpha <= 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if self.b_env <= 0:
            raise ConfigError(f"b_env must be > 0, got {self.b_env}")
        if self.carrier_hz <= 0:
            raise ConfigError("carrier_hz must be > 0")
        for name in ("noise_dbm", "tx_power_dbm", "gain_g_db"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if self.fading_gain < 0:
            raise ConfigError("fading_gain must be >= 0")
        return self

    @property
    def noise_w(self) -> float:
        return dbm_to_w(self.noise_dbm)

    @property
    def tx_power_w(self) -> float:
        return dbm_to_w(self.tx_power_dbm)

    @property
    def gain_g(self) -> float:
        return db_to_lin(self.gain_g_db)


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def dbm_to_w(dbm):
    return _scalar_or_array(10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0))


def w_to_dbm(w):
    return _scalar_or_array(10.0 * np.log10(np.asarray(w, dtype=float)) + 30.0)


def db_to_lin(db):
    return _scalar_or_array(10.0 ** (np.asarray(db, dtype=float) / 10.0))


def free_space_pathloss_db(f: float) -> float:
    """Distance-independent free-space term 20log10(f) + 20log10(4*pi/c)."""
    if f <= 0:
        raise DomainError(f"carrier frequency must be > 0, got {f}")
    return 20.0 * math.log10(f) + 20.0 * math.log10(4.0 * math.pi / speed_of_light)


def los_probability(elevation_deg, a_env: float, b_env: float):
    """Sigmoid LoS probability, elevation in degrees."""
    return 1.0 / (1.0 + a_env * np.exp(-b_env * (np.asarray(elevation_deg, dtype=float) - a_env)))


def elevation_deg(distance, height_diff):
    """Elevation of the aerial end above the ground end, clamped to [0, 90]."""
    d = np.asarray(distance, dtype=float)
    ratio = np.clip(np.asarray(height_diff, dtype=float) / d, 0.0, 1.0)
    return np.degrees(np.arcsin(ratio))


def a2g_pathloss_db(distance, height_diff, params: ChannelParams):
    """LoS/NLoS-averaged air-to-ground pathloss (dB), vectorised over links."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise DomainError("air-to-ground link with zero distance")
    p_los = los_probability(elevation_deg(d, height_diff), params.a_env, params.b_env)
    base = free_space_pathloss_db(params.carrier_hz) + 20.0 * np.log10(d)
    return p_los * (base + params.eta_los_db) + (1.0 - p_los) * (base + params.eta_nlos_db)


def u2i_avg_pathloss_db(uav_pos, bs_height: float, params: ChannelParams) -> float:
    x, y, z = uav_pos
    d = math.sqrt(x * x + y * y + (z - bs_height) ** 2)
    if d == 0:
        raise DomainError("UAV coincides with the BS antenna")
    return float(a2g_pathloss_db(d, z - bs_height, params))


def u2i_received_power_w(uav_pos, bs_height: float, params: ChannelParams) -> float:
    return params.tx_power_w / 10.0 ** (u2i_avg_pathloss_db(uav_pos, bs_height, params) / 10.0)


def cu_pathloss_db_at(distance, carrier_hz: float):
    """Macrocell pathloss; distance in metres, frequency taken in MHz."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise DomainError("CU at the BS position")
    f_mhz = carrier_hz / 1e6
    return -55.9 + 38.0 * np.log10(d) + (24.5 + 1.5 * f_mhz / 925.0) * math.log10(f_mhz)


def cu_pathloss_db(cu_pos, bs_height: float, params: ChannelParams) -> float:
    x, y, z = cu_pos
    d = math.sqrt(x * x + y * y + (z - bs_height) ** 2)
    return float(cu_pathloss_db_at(d, params.carrier_hz))


def cu_received_power_w(cu_pos, bs_height: float, params: ChannelParams) -> float:
    return params.tx_power_w / 10.0 ** (cu_pathloss_db(cu_pos, bs_height, params) / 10.0)


def u2u_received_power_w(d, params: ChannelParams):
    """Air-to-air power P_U * G * d^-alpha (times the fading gain)."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise DomainError("U2U distance must be > 0")
    p = params.tx_power_w * params.gain_g * params.fading_gain * d ** (-params.alpha)
    return float(p) if p.ndim == 0 else p


def rate(sinr):
    return np.log2(1.0 + np.asarray(sinr, dtype=float))


# ---------------------------------------------------------------------------
# Slot-level link bookkeeping


@dataclass(frozen=True)
class LinkLayout:
    """Row order of the two allocation matrices for one slot.

    Phi rows are the U2I UAVs (ascending id) followed by every CU; Psi rows
    are the U2U UAVs (ascending id), each with its relay ``rx``.
    """

    u2i: tuple[int, ...]
    n_cus: int
    u2u: tuple[int, ...]
    rx: tuple[int, ...]

    @classmethod
    def from_state(cls, s) -> "LinkLayout":
        u2u = tuple(sorted(s.u2u_set))
        return cls(
            u2i=tuple(sorted(s.u2i_set)),
            n_cus=len(s.cus),
            u2u=u2u,
            rx=tuple(s.pairing[i] for i in u2u),
        )

    @property
    def n_phi_rows(self) -> int:
        return len(self.u2i) + self.n_cus

    @property
    def n_links(self) -> int:
        return len(self.u2u)


@dataclass(frozen=True)
class LinkPowers:
    """Received powers (W) for every transmitter/receiver pair of a slot."""

    noise: float
    bs_signal: np.ndarray  # (R, K)  Phi row -> BS
    bs_leak: np.ndarray  # (L, K)  U2U transmitter -> BS
    u2u_signal: np.ndarray  # (L, K)  U2U transmitter -> own relay
    u2u_cross: np.ndarray  # (L, L, K) [i, m]: transmitter m -> relay of link i
    phi_to_rx: np.ndarray  # (R, L, K) [r, i]: Phi-row transmitter -> relay of link i (inf if same UAV)

    @property
    def n_subchannels(self) -> int:
        return self.bs_signal.shape[1]

    def fixed_u2u_interference(self, phi: np.ndarray) -> np.ndarray:
        """Noise plus co-channel U2I/CU interference at each relay, (L, K)."""
        on = phi[:, None, :] > 0
        contrib = np.where(on, self.phi_to_rx, 0.0)
        return self.noise + contrib.sum(axis=0)


def link_powers(
    layout: LinkLayout,
    uav_pos: np.ndarray,
    cu_pos: np.ndarray,
    bs_height: float,
    params: ChannelParams,
    n_subchannels: int,
) -> LinkPowers:
    K = n_subchannels
    pu = params.tx_power_w
    aa_gain = pu * params.gain_g * params.fading_gain
    alpha = params.alpha
    uav_pos = np.asarray(uav_pos, dtype=float).reshape(-1, 3)
    cu_pos = np.asarray(cu_pos, dtype=float).reshape(-1, 3)

    def to_bs(idx):
        p = uav_pos[list(idx)]
        if len(p) == 0:
            return np.zeros(0)
        d = np.sqrt(p[:, 0] ** 2 + p[:, 1] ** 2 + (p[:, 2] - bs_height) ** 2)
        return pu / 10.0 ** (a2g_pathloss_db(d, p[:, 2] - bs_height, params) / 10.0)

    if len(cu_pos):
        d_cu = np.sqrt(cu_pos[:, 0] ** 2 + cu_pos[:, 1] ** 2 + (cu_pos[:, 2] - bs_height) ** 2)
        cu_sig = pu / 10.0 ** (cu_pathloss_db_at(d_cu, params.carrier_hz) / 10.0)
    else:
        cu_sig = np.zeros(0)
    bs_sig = np.concatenate([to_bs(layout.u2i), cu_sig])
    leak = to_bs(layout.u2u)

    L = layout.n_links
    R = layout.n_phi_rows
    tx = uav_pos[list(layout.u2u)] if L else np.zeros((0, 3))
    rx = uav_pos[list(layout.rx)] if L else np.zeros((0, 3))
    d_sig = np.linalg.norm(tx - rx, axis=1)
    with np.errstate(divide="ignore"):
        u2u_sig = aa_gain * d_sig ** (-alpha)
    # cross[i, m] = transmitter m at the relay of link i
    d_cross = np.linalg.norm(rx[:, None, :] - tx[None, :, :], axis=2)
    with np.errstate(divide="ignore"):
        cross = aa_gain * d_cross ** (-alpha)
    np.fill_diagonal(cross, 0.0)
    # Phi-row transmitters at each relay: air-to-air for UAVs, reciprocal A2G for CUs
    phi_rx = np.zeros((R, L))
    if L:
        u2i_pos = uav_pos[list(layout.u2i)] if layout.u2i else np.zeros((0, 3))
        d_ui = np.linalg.norm(u2i_pos[:, None, :] - rx[None, :, :], axis=2)
        with np.errstate(divide="ignore"):
            phi_rx[: len(layout.u2i)] = np.where(d_ui > 0, aa_gain * np.where(d_ui > 0, d_ui, 1.0) ** (-alpha), np.inf)
        if len(cu_pos):
            d_cr = np.linalg.norm(cu_pos[:, None, :] - rx[None, :, :], axis=2)
            dh = rx[None, :, 2] - cu_pos[:, None, 2]
            phi_rx[len(layout.u2i) :] = pu / 10.0 ** (a2g_pathloss_db(d_cr, dh, params) / 10.0)

    def per_k(a):
        return np.repeat(a[..., None], K, axis=-1)

    return LinkPowers(
        noise=params.noise_w,
        bs_signal=per_k(bs_sig),
        bs_leak=per_k(leak),
        u2u_signal=per_k(u2u_sig),
        u2u_cross=per_k(cross),
        phi_to_rx=per_k(phi_rx),
    )


@dataclass
class RateReport:
    bs_sinr: np.ndarray
    bs_rate: np.ndarray
    u2u_sinr: np.ndarray
    u2u_rate: np.ndarray
    u2u_link_rate: np.ndarray
    uplink_sum_rate: float

    @property
    def u2u_sum_rate(self) -> float:
        return float(self.u2u_link_rate.sum())

    def phi_row_rates(self, phi: np.ndarray) -> np.ndarray:
        return (phi * self.bs_rate).sum(axis=1)

    def to_dict(self) -> dict:
        return {
            "bs_sinr": self.bs_sinr.tolist(),
            "bs_rate": self.bs_rate.tolist(),
            "u2u_sinr": self.u2u_sinr.tolist(),
            "u2u_rate": self.u2u_rate.tolist(),
            "u2u_link_rate": self.u2u_link_rate.tolist(),
            "uplink_sum_rate": self.uplink_sum_rate,
        }


def check_binary(m: np.ndarray, name: str) -> None:
    if not np.all((m == 0) | (m == 1)):
        raise ConstraintViolation("binary", f"{name} has non-binary entries")


def rates_from_powers(lp: LinkPowers, phi: np.ndarray, psi: np.ndarray) -> RateReport:
    phi = np.asarray(phi)
    psi = np.asarray(psi)
    check_binary(phi, "phi")
    check_binary(psi, "psi")
    if phi.size and np.any(phi.sum(axis=0) > 1):
        raise ConstraintViolation("subchannel-exclusive", "a subchannel carries more than one U2I/CU link")
    i_bs = (psi * lp.bs_leak).sum(axis=0) if psi.size else np.zeros(lp.n_subchannels)
    bs_sinr = lp.bs_signal / (lp.noise + i_bs[None, :])
    bs_rate = rate(bs_sinr)
    uplink = float((phi * bs_rate).sum())

    L = psi.shape[0]
    if L:
        a = lp.fixed_u2u_interference(phi)
        u2u_int = np.einsum("imk,mk->ik", lp.u2u_cross, psi)
        with np.errstate(invalid="ignore"):
            u2u_sinr = np.where(np.isinf(a), 0.0, lp.u2u_signal / (a + u2u_int))
        u2u_rate = rate(u2u_sinr)
        link_rate = (psi * u2u_rate).sum(axis=1)
    else:
        u2u_sinr = u2u_rate = np.zeros((0, lp.n_subchannels))
        link_rate = np.zeros(0)
    return RateReport(bs_sinr, bs_rate, u2u_sinr, u2u_rate, link_rate, uplink)


def assemble_rates(s, phi, psi, params: ChannelParams, positions=None, n_subchannels=None) -> RateReport:
    """Per-link SINR and rate for one slot, given both allocation matrices.

    ``positions`` overrides the UAV positions stored in ``s`` (used to
    evaluate end-of-slot geometry).
    """
    phi = np.asarray(phi)
    K = n_subchannels if n_subchannels is not None else phi.shape[1]
    layout = LinkLayout.from_state(s)
    pos = s.uav_positions() if positions is None else positions
    lp = link_powers(layout, pos, s.cu_positions(), s.bs_height, params, K)
    return rates_from_powers(lp, phi, psi)
