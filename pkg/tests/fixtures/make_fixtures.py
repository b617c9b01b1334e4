"""Regenerate the solver fixtures; oracle values come from exhaustive enumeration."""

import json
import sys
from pathlib import Path

import numpy as np

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE.parent))

from conftest import brute_force_u2i, brute_force_u2u, random_u2u_instance  # noqa: E402


def write(name, data):
    (HERE / name).write_text(json.dumps(data, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def main():
    rng = np.random.default_rng(20240607)
    w = rng.uniform(0.0, 12.0, (4, 4)).round(6)
    write("u2i_4x4.json", {"weights": w.tolist(), "chi_max": 2, "oracle_objective": brute_force_u2i(w, 2)})

    while True:
        inst = random_u2u_instance(rng, 3, 4)
        value, _ = brute_force_u2u(inst)
        if value is not None and inst.r_min > 3:
            break
    write("u2u_3x4.json", {**inst.to_dict(), "oracle_objective": value})

    while True:
        inst = random_u2u_instance(rng, 2, 3, r_max=40.0)
        value, _ = brute_force_u2u(inst)
        if value is None:
            break
    write("u2u_infeasible.json", {**inst.to_dict(), "oracle_objective": None})


if __name__ == "__main__":
    main()
