import itertools

import numpy as np
import pytest

from uav2x.alloc_u2u import U2uInstance
from uav2x.config import bundled_config


def random_u2u_instance(rng, L, K, R=None, r_max=14.0, chi_max=2):
    """Random U2U instance with powers spread over several decades."""
    R = int(R if R is not None else rng.integers(1, 4))
    phi = np.zeros((R, K), dtype=int)
    for k in range(K):
        r = rng.integers(-1, R)
        if r >= 0 and phi[r].sum() < chi_max:
            phi[r, k] = 1
    noise = 1e-12
    cross = noise * 10 ** rng.uniform(-1, 3, (L, L, K))
    for k in range(K):
        np.fill_diagonal(cross[:, :, k], 0.0)
    return U2uInstance(
        phi=phi,
        bs_signal=noise * 10 ** rng.uniform(0, 3, (R, K)),
        bs_leak=noise * 10 ** rng.uniform(-1, 1.5, (L, K)),
        u2u_signal=noise * 10 ** rng.uniform(2, 5, (L, K)),
        u2u_cross=cross,
        fixed_interference=noise * (1 + 10 ** rng.uniform(-1, 2, (L, K))),
        noise=noise,
        r_min=float(rng.uniform(0, r_max)),
        chi_max=chi_max,
    )


def brute_force_u2i(w, chi_max):
    """Best objective over every feasible Phi.

    Enumerates the owner of each column (a row or nobody), which covers
    every matrix with at most one 1 per column, then filters row capacity.
    """
    R, K = w.shape
    owners = np.array(list(itertools.product(range(R + 1), repeat=K)), dtype=int).reshape(-1, K)
    padded = np.vstack([w, np.zeros((1, K))])
    values = padded[owners, np.arange(K)].sum(axis=1)
    counts = np.stack([(owners == r).sum(axis=1) for r in range(R)], axis=1)
    ok = np.all(counts <= chi_max, axis=1)
    return float(values[ok].max())


@pytest.fixture
def desk():
    return bundled_config("desk")


def brute_force_u2u(inst):
    """Best (objective, psi) over every binary Psi, or (None, None) if none is feasible.

    Rates are computed from the raw instance arrays, independently of the
    solver's own evaluation code.
    """
    L, K = inst.bs_leak.shape
    R = inst.phi.shape[0]
    if L == 0:
        psi = np.zeros((0, K), dtype=int)
        return sum(
            float(np.log2(1 + inst.bs_signal[r, k] / inst.noise)) for r in range(R) for k in range(K) if inst.phi[r, k]
        ), psi
    allp = np.array(list(itertools.product((0, 1), repeat=L * K)), dtype=float).reshape(-1, L, K)
    allp = allp[np.all(allp.sum(axis=2) <= inst.chi_max, axis=1)]
    # link rates: interference at link i from every other active transmitter m
    interf = np.einsum("imk,pmk->pik", inst.u2u_cross, allp) - allp * np.einsum("iik->ik", inst.u2u_cross)[None]
    with np.errstate(invalid="ignore", divide="ignore"):
        sinr = np.where(np.isinf(inst.fixed_interference)[None], 0.0, inst.u2u_signal[None] / (inst.fixed_interference[None] + interf))
    rates = (allp * np.log2(1 + sinr)).sum(axis=2)
    ok = np.all(rates >= inst.r_min - 1e-12, axis=1)
    if not ok.any():
        return None, None
    leak = (allp * inst.bs_leak[None]).sum(axis=1)  # (P, K)
    owner_sig = (inst.phi * inst.bs_signal).sum(axis=0)  # zero on free channels
    values = np.log2(1 + owner_sig[None] / (inst.noise + leak)).sum(axis=1)
    values = np.where(ok, values, -np.inf)
    best = int(np.argmax(values))
    return float(values[best]), allp[best].astype(int)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def emit(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
