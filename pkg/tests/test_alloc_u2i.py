import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import brute_force_u2i
from uav2x.alloc_u2i import AssignmentInstance, greedy_u2i, solve_u2i, verify_phi
from uav2x.errors import ConstraintViolation


def solve(w, chi):
    inst = AssignmentInstance(np.asarray(w, dtype=float), chi)
    phi = solve_u2i(inst)
    return phi, verify_phi(phi, inst)


def test_small_examples():
    assert solve([[3.0]], 1)[1] == 3.0
    phi, v = solve([[3, 1], [2, 2]], 1)
    assert v == 5.0 and phi.tolist() == [[1, 0], [0, 1]]
    phi, v = solve([[3, 1]], 2)
    assert v == 4.0 and phi.tolist() == [[1, 1]]


def test_empty_and_zero():
    assert solve(np.zeros((0, 3)), 2)[0].shape == (0, 3)
    phi, v = solve(np.zeros((2, 2)), 2)
    assert v == 0.0 and not phi.any()


def test_ties_go_to_lexicographically_greatest():
    # flat channels: the first link takes the first channels
    phi, _ = solve([[5, 5, 5], [5, 5, 5]], 2)
    assert phi.tolist() == [[1, 1, 0], [0, 0, 1]]


def test_verify_phi_names_constraint():
    inst = AssignmentInstance(np.ones((2, 2)), 1)
    assert verify_phi(np.zeros((2, 2), dtype=int), inst) == 0.0
    for phi, name in (
        ([[1, 0], [1, 0]], "subchannel-exclusive"),
        ([[1, 1], [0, 0]], "link-capacity"),
        ([[2, 0], [0, 0]], "binary"),
    ):
        with pytest.raises(ConstraintViolation) as err:
            verify_phi(np.array(phi), inst)
        assert err.value.constraint == name


def test_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(150):
        R = int(rng.integers(1, 5))
        K = int(rng.integers(1, 16 // R + 1))
        w = rng.uniform(0, 10, (R, K)) * (rng.random((R, K)) > 0.2)
        chi = int(rng.integers(1, 4))
        _, v = solve(w, chi)
        assert v == pytest.approx(brute_force_u2i(w, chi), rel=1e-9, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 5), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_properties(R, K, chi, seed):
    rng = np.random.default_rng(seed)
    w = rng.uniform(0, 5, (R, K))
    _, base = solve(w, chi)
    # zero row changes nothing
    assert solve(np.vstack([w, np.zeros((1, K))]), chi)[1] == pytest.approx(base, rel=1e-12)
    # raising one weight never lowers the optimum
    w2 = w.copy()
    w2[rng.integers(R), rng.integers(K)] += 1.0
    assert solve(w2, chi)[1] >= base - 1e-12
    # permutations preserve the value
    pr, pc = rng.permutation(R), rng.permutation(K)
    assert solve(w[pr][:, pc], chi)[1] == pytest.approx(base, rel=1e-12)


def test_greedy_feasible_and_dominated():
    rng = np.random.default_rng(4)
    for _ in range(50):
        w = rng.uniform(0, 10, (4, 4))
        inst = AssignmentInstance(w, 2)
        g = verify_phi(greedy_u2i(inst), inst)
        assert g <= verify_phi(solve_u2i(inst), inst) + 1e-12


def test_json_roundtrip():
    inst = AssignmentInstance(np.array([[1.0, 2.0]]), 2)
    again = AssignmentInstance.from_dict(json.loads(inst.to_json()))
    assert np.array_equal(again.weights, inst.weights) and again.chi_max == 2


def test_rejects_bad_weights():
    with pytest.raises(ValueError):
        AssignmentInstance(np.array([[-1.0]]), 1)
    with pytest.raises(ValueError):
        AssignmentInstance(np.array([[1.0]]), 0)
