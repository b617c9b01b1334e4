"""Command-line entry point: single runs, parameter sweeps and solver debugging.

Exit codes: 0 success, 1 configuration or usage error, 2 infeasible instance.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .alloc_u2i import AssignmentInstance, solve_u2i, verify_phi
from .alloc_u2u import U2uInstance, branch_and_bound, dump_trace_line, lfss, u2u_link_rates
from .config import RunConfig, bundled_config, load_config
from .engine import fmt, run_simulation, trace_csv
from .errors import ConfigError, HorizonInfeasible, Uav2xError

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2
POLICIES = ("isasoa", "greedy")
SWEEP_VARIABLES = ("n_u2i", "u2u_ratio", "horizon_T", "v_max")
SWEEP_FIELDS = (
    "variable",
    "value",
    "policy",
    "replicas",
    "failures",
    "mean_sum_rate",
    "stderr_sum_rate",
    "mean_u2u_sum_rate",
    "stderr_u2u_sum_rate",
    "mean_uploaded_bits",
)


# -- experiments --------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentSpec:
    variable: str
    values: tuple[float, ...]
    replicas: int
    base: RunConfig
    policies: tuple[str, ...] = POLICIES
    first_seed: int = 0

    def validate(self) -> "ExperimentSpec":
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"unknown sweep variable {self.variable!r}; choose from {', '.join(SWEEP_VARIABLES)}")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        for p in self.policies:
            if p not in POLICIES:
                raise ConfigError(f"unknown policy {p!r}")
        for v in self.values:
            try:
                point_config(self.base, self.variable, v).validate()
            except HorizonInfeasible:
                pass  # every replica at this point aborts and is counted as a failure
        return self


def point_config(base: RunConfig, variable: str, value: float) -> RunConfig:
    """Base config with one sweep variable applied."""
    sc, proto = base.scenario, base.protocol
    if variable == "n_u2i":
        n_u2u = proto.n_u2u
        if n_u2u is None:
            raise ConfigError("an n_u2i sweep needs protocol.n_u2u set (fixed number of U2U UAVs)")
        if value != int(value) or value < 1:
            raise ConfigError(f"n_u2i must be a positive integer, got {value}")
        sc = dataclasses.replace(sc, n_uavs=int(value) + n_u2u)
    elif variable == "u2u_ratio":
        if not 0.0 <= value < 1.0:
            raise ConfigError(f"u2u_ratio must lie in [0, 1), got {value}")
        proto = dataclasses.replace(proto, n_u2u=int(round(value * sc.n_uavs)))
    elif variable == "horizon_T":
        if value != int(value):
            raise ConfigError(f"horizon_T must be an integer, got {value}")
        sc = dataclasses.replace(sc, horizon_T=int(value))
    elif variable == "v_max":
        sc = dataclasses.replace(sc, v_max=float(value))
    else:
        raise ConfigError(f"unknown sweep variable {variable!r}")
    return dataclasses.replace(base, scenario=sc, protocol=proto)


def _run_replica(task):
    cfg, policy = task
    try:
        r = run_simulation(cfg, policy, keep_traces=False)
    except Uav2xError:
        return None
    return r.mean_sum_rate, r.mean_u2u_sum_rate, r.total_uploaded


def worker_count() -> int:
    raw = os.environ.get("UAV2X_THREADS", "0")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"UAV2X_THREADS must be an integer, got {raw!r}") from exc
    if n < 0:
        raise ConfigError("UAV2X_THREADS must be >= 0")
    return n


def _mean_stderr(x: list[float]) -> tuple[float, float]:
    if not x:
        return math.nan, math.nan
    a = np.asarray(x, dtype=float)
    se = float(a.std(ddof=1) / math.sqrt(len(a))) if len(a) > 1 else 0.0
    return float(a.mean()), se


def run_experiment(spec: ExperimentSpec, workers: int | None = None) -> list[dict]:
    """One row per (sweep point, policy), in sweep order then policy order."""
    spec.validate()
    workers = worker_count() if workers is None else workers
    tasks, keys = [], []
    for v in spec.values:
        cfg = point_config(spec.base, spec.variable, v)
        for p in spec.policies:
            for rep in range(spec.replicas):
                tasks.append((cfg.with_seed(spec.first_seed + rep), p))
                keys.append((v, p))
    if workers > 0:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_replica, tasks, chunksize=1))
    else:
        results = [_run_replica(t) for t in tasks]
    rows = []
    for v in spec.values:
        for p in spec.policies:
            got = [r for k, r in zip(keys, results) if k == (v, p)]
            ok = [r for r in got if r is not None]
            m, se = _mean_stderr([r[0] for r in ok])
            mu, seu = _mean_stderr([r[1] for r in ok])
            up, _ = _mean_stderr([r[2] for r in ok])
            rows.append(
                {
                    "variable": spec.variable,
                    "value": v,
                    "policy": p,
                    "replicas": len(got),
                    "failures": len(got) - len(ok),
                    "mean_sum_rate": m,
                    "stderr_sum_rate": se,
                    "mean_u2u_sum_rate": mu,
                    "stderr_u2u_sum_rate": seu,
                    "mean_uploaded_bits": up,
                }
            )
    return rows


def sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_FIELDS)
    for r in rows:
        w.writerow([fmt(r[k]) if isinstance(r[k], float) else str(r[k]) for k in SWEEP_FIELDS])
    return buf.getvalue()


# -- argument handling --------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _values(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad value list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="run config JSON (default: bundled default config)")
    common.add_argument("--seed", type=_seed, help="scenario seed (overrides the config)")
    common.add_argument("--out", type=Path, help="output directory (default: print to stdout)")
    common.add_argument("--bnb-budget", type=int, help="branch-and-bound node budget (0: unlimited)")
    common.add_argument("--debug-trace", action="store_true", help="emit the branch-and-bound search trace as JSON lines")

    parser = _Parser(prog="uav2x", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", parents=[common], help="run one simulation")
    sim.add_argument("--policy", choices=POLICIES, default="isasoa")

    sw = sub.add_parser("sweep", parents=[common], help="sweep one parameter over replicas")
    sw.add_argument("--policy", choices=POLICIES, action="append", help="repeatable (default: both)")
    sw.add_argument("--var", required=True, choices=SWEEP_VARIABLES)
    sw.add_argument("--values", required=True, type=_values, help="comma-separated sweep values")
    sw.add_argument("--replicas", type=int, default=10)

    for name, helptext in (("solve-u2i", "solve one U2I assignment fixture"), ("solve-u2u", "solve one U2U fixture")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("fixture", type=Path)
    return parser


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config is not None else bundled_config("default")
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.bnb_budget is not None:
        if args.bnb_budget < 0:
            raise ConfigError("--bnb-budget must be >= 0")
        budget = None if args.bnb_budget == 0 else args.bnb_budget
        cfg = dataclasses.replace(cfg, solver=dataclasses.replace(cfg.solver, bnb_budget=budget))
    return cfg.validate()


def _emit(out: Path | None, name: str, text: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text, encoding="utf-8")


def _read_fixture(path: Path) -> dict:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read fixture {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def _oracle_fields(data: dict, objective: float | None) -> dict:
    if "oracle_objective" not in data:
        return {}
    expected = data["oracle_objective"]
    if expected is None or objective is None:
        return {"oracle_objective": expected, "oracle_match": expected is None and objective is None}
    match = abs(objective - expected) <= 1e-9 * max(1.0, abs(expected))
    return {"oracle_objective": expected, "oracle_match": bool(match)}


def _cmd_simulate(args) -> int:
    cfg = _load(args)
    trace_fh = io.StringIO() if args.debug_trace else None
    result = run_simulation(cfg, args.policy, bnb_trace=dump_trace_line(trace_fh) if trace_fh else None)
    _emit(args.out, "slots.csv", result.to_csv())
    if args.out is not None:
        _emit(args.out, "summary.json", result.summary_json())
        if args.policy == "isasoa":
            _emit(args.out, "iterations.csv", trace_csv(result))
        if trace_fh is not None:
            _emit(args.out, "bnb_trace.jsonl", trace_fh.getvalue())
    elif trace_fh is not None:
        sys.stderr.write(trace_fh.getvalue())
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    spec = ExperimentSpec(
        variable=args.var,
        values=tuple(args.values),
        replicas=args.replicas,
        base=cfg,
        policies=tuple(dict.fromkeys(args.policy)) if args.policy else POLICIES,
        first_seed=cfg.scenario.rng_seed,
    )
    rows = run_experiment(spec)
    _emit(args.out, "sweep.csv", sweep_csv(rows))
    return EXIT_OK


def _cmd_solve_u2i(args) -> int:
    data = _read_fixture(args.fixture)
    try:
        inst = AssignmentInstance.from_dict(data)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"{args.fixture}: bad U2I fixture ({exc})") from exc
    phi = solve_u2i(inst)
    value = verify_phi(phi, inst)
    out = {"phi": phi.tolist(), "objective": value, **_oracle_fields(data, value)}
    _emit(args.out, "solution.json", json.dumps(out, sort_keys=True) + "\n")
    return EXIT_OK


def _cmd_solve_u2u(args) -> int:
    data = _read_fixture(args.fixture)
    try:
        inst = U2uInstance.from_dict(data)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"{args.fixture}: bad U2U fixture ({exc})") from exc
    budget = 1_000_000 if args.bnb_budget is None else (None if args.bnb_budget == 0 else args.bnb_budget)
    lines: list[str] = []
    trace = (lambda ev: lines.append(json.dumps(ev, sort_keys=True))) if args.debug_trace else None
    seed = lfss(inst)
    res = branch_and_bound(inst, seed.psi if seed.feasible else None, node_budget=budget, trace=trace)
    out = {
        "feasible": res.feasible,
        "psi": res.psi.tolist(),
        "objective": res.objective if res.feasible else None,
        "link_rates": u2u_link_rates(res.psi, inst).tolist(),
        "nodes": res.nodes,
        "complete": res.complete,
        "lfss_feasible": seed.feasible,
        **_oracle_fields(data, res.objective if res.feasible else None),
    }
    _emit(args.out, "solution.json", json.dumps(out, sort_keys=True) + "\n")
    if trace is not None:
        text = "".join(line + "\n" for line in lines)
        if args.out is not None:
            _emit(args.out, "bnb_trace.jsonl", text)
        else:
            sys.stderr.write(text)
    return EXIT_OK if res.feasible else EXIT_INFEASIBLE


COMMANDS = {
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "solve-u2i": _cmd_solve_u2i,
    "solve-u2u": _cmd_solve_u2u,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"uav2x: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HorizonInfeasible as exc:
        print(f"uav2x: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except Uav2xError as exc:
        print(f"uav2x: runtime error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
