"""Scenario files, experiment drivers and result tables.

Usage::

    python -m uavmec solve --scenario scenarios/golden.toml --scheme proposed --out out/
    python -m uavmec sweep --scenario scenarios/golden.toml --l-bits 1e8 2e8 3e8 --out out/
    python -m uavmec baseline-compare --scenario scenarios/golden.toml --out out/
    python -m uavmec validate --scenario scenarios/golden.toml --plan out/proposed_trajectory.csv

Exit status: 0 on success, 2 for unreadable or invalid input (including a
plan that fails validation), 3 when a solver fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .baselines import solve_hover_and_fly, solve_straight_flight
from .config import SolverConfig
from .lp import LpError
from .model import (
    Scenario,
    TimeAllocation,
    Trajectory,
    db_to_linear,
    dbm_to_watts,
    rate_matrix,
    validate_solution,
)
from .planner import MissionPlan, PlanningError, min_completion_time
from .sca import SubproblemError

log = logging.getLogger(__name__)

SCHEMES = {
    "proposed": min_completion_time,
    "straight": solve_straight_flight,
    "hover-fly": solve_hover_and_fly,
}

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 2, 3

_SECTIONS = {
    "uav": {"altitude_m", "v_max_mps", "tx_power_dbm", "slot_s", "init_xy_m", "final_xy_m"},
    "radio": {"bandwidth_hz", "ref_gain_db", "noise_dbm"},
    "gbs": {"xy_m", "cpu_ghz", "cycles_per_bit"},
    "task": {"l_bits"},
}


class ScenarioFileError(ValueError):
    """Malformed or invalid scenario / plan file."""


def _fmt(x: float) -> str:
    return f"{float(x):.9g}"


# scenario files ------------------------------------------------------------


def _check_keys(table: dict, section: str, where: str) -> None:
    if not isinstance(table, dict):
        raise ScenarioFileError(f"{where}: expected a table")
    unknown = sorted(set(table) - _SECTIONS[section])
    if unknown:
        raise ScenarioFileError(f"{where}: unknown key(s) {', '.join(unknown)}")
    missing = sorted(_SECTIONS[section] - set(table))
    if missing:
        raise ScenarioFileError(f"{where}: missing key(s) {', '.join(missing)}")


def _number(table: dict, key: str, where: str) -> float:
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioFileError(f"{where}.{key}: expected a number, got {value!r}")
    return float(value)


def _xy(table: dict, key: str, where: str) -> np.ndarray:
    value = table[key]
    if (not isinstance(value, list) or len(value) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        raise ScenarioFileError(f"{where}.{key}: expected [x, y] in metres, got {value!r}")
    return np.array(value, dtype=float)


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    """Build a Scenario from TOML text; dB and dBm fields are converted to linear."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # the decoder message carries "(at line L, column C)"
        raise ScenarioFileError(f"{source}: parse error: {exc}") from exc
    unknown = sorted(set(doc) - set(_SECTIONS))
    if unknown:
        raise ScenarioFileError(f"{source}: unknown section(s) {', '.join(unknown)}")
    for name in _SECTIONS:
        if name not in doc:
            raise ScenarioFileError(f"{source}: missing [{name}] section")
    uav, radio, task = doc["uav"], doc["radio"], doc["task"]
    _check_keys(uav, "uav", "uav")
    _check_keys(radio, "radio", "radio")
    _check_keys(task, "task", "task")
    gbs = doc["gbs"]
    if not isinstance(gbs, list) or not gbs:
        raise ScenarioFileError(f"{source}: [[gbs]] must list at least one station")
    for i, g in enumerate(gbs):
        _check_keys(g, "gbs", f"gbs[{i}]")

    try:
        return Scenario(
            gbs_positions=np.array([_xy(g, "xy_m", f"gbs[{i}]") for i, g in enumerate(gbs)]),
            cpu_freq=np.array([_number(g, "cpu_ghz", f"gbs[{i}]") * 1e9
                               for i, g in enumerate(gbs)]),
            cycles_per_bit=np.array([_number(g, "cycles_per_bit", f"gbs[{i}]")
                                     for i, g in enumerate(gbs)]),
            altitude=_number(uav, "altitude_m", "uav"),
            bandwidth=_number(radio, "bandwidth_hz", "radio"),
            ref_gain=db_to_linear(_number(radio, "ref_gain_db", "radio")),
            noise_power=dbm_to_watts(_number(radio, "noise_dbm", "radio")),
            tx_power=dbm_to_watts(_number(uav, "tx_power_dbm", "uav")),
            v_max=_number(uav, "v_max_mps", "uav"),
            slot_len=_number(uav, "slot_s", "uav"),
            u_init=_xy(uav, "init_xy_m", "uav"),
            u_final=_xy(uav, "final_xy_m", "uav"),
            task_bits=_number(task, "l_bits", "task"),
        )
    except ScenarioFileError:
        raise
    except ValueError as exc:
        raise ScenarioFileError(f"{source}: invalid scenario: {exc}") from exc


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioFileError(f"{path}: {exc.strerror}") from exc
    return parse_scenario(text, str(path))


# results -------------------------------------------------------------------


def trajectory_table(plan: MissionPlan, scenario: Scenario) -> str:
    """CSV with one row per position n = 0..N; slot 0 is the start (no offloading)."""
    K = scenario.n_gbs
    pos = plan.trajectory.positions
    N = plan.n_slots
    tau = np.vstack([np.zeros((1, K)), plan.allocation.tau])
    bits = tau * rate_matrix(pos, scenario)
    bits[0] = 0.0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["slot", "x_m", "y_m"] + [f"tau_s_{k}" for k in range(K)]
               + [f"bits_{k}" for k in range(K)])
    for n in range(N + 1):
        w.writerow([n, _fmt(pos[n, 0]), _fmt(pos[n, 1])]
                   + [_fmt(t) for t in tau[n]] + [_fmt(b) for b in bits[n]])
    return buf.getvalue()


def read_trajectory_table(text: str, n_gbs: int) -> tuple[Trajectory, TimeAllocation]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ScenarioFileError("empty plan table")
    header = rows[0]
    want = ["slot", "x_m", "y_m"] + [f"tau_s_{k}" for k in range(n_gbs)]
    if header[:len(want)] != want:
        raise ScenarioFileError(f"plan table header {header} does not match {n_gbs} GBSs")
    try:
        data = np.array([[float(v) for v in r[:len(want)]] for r in rows[1:]])
    except ValueError as exc:
        raise ScenarioFileError(f"plan table: {exc}") from exc
    if data.shape[0] < 2 or not np.array_equal(data[:, 0], np.arange(data.shape[0])):
        raise ScenarioFileError("plan table: slots must run 0, 1, ..., N")
    return Trajectory(data[:, 1:3]), TimeAllocation(data[1:, 3:])


@dataclass
class ResultBundle:
    plan: MissionPlan
    scenario: Scenario
    wall_time: float
    table: str = field(init=False)

    def __post_init__(self):
        self.table = trajectory_table(self.plan, self.scenario)

    @property
    def summary(self) -> dict:
        p = self.plan
        return {
            "scheme": p.scheme,
            "N": p.n_slots,
            "T_s": p.completion_time,
            "L_bits": self.scenario.task_bits,
            "achieved_bits": p.achieved_bits,
            "per_gbs_bits": [float(b) for b in p.per_gbs_bits],
            "iterations": p.iterations,
            "wall_time_s": round(self.wall_time, 3),
        }

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = self.plan.scheme
        paths = [out / f"{stem}_trajectory.csv", out / f"{stem}_summary.json"]
        _atomic_write(paths[0], self.table)
        _atomic_write(paths[1], json.dumps(self.summary, indent=2) + "\n")
        return paths


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def run_solve(scenario: Scenario, scheme: str, config: SolverConfig | None = None) -> ResultBundle:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {', '.join(SCHEMES)}")
    config = config or SolverConfig()
    start = time.perf_counter()
    plan = SCHEMES[scheme](scenario, config)
    return ResultBundle(plan, scenario, time.perf_counter() - start)


@dataclass
class SweepTable:
    rows: list[dict]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["L_bits", "scheme", "N", "T_s", "achieved_bits"])
        for r in self.rows:
            w.writerow([_fmt(r["L_bits"]), r["scheme"], r["N"], _fmt(r["T_s"]),
                        _fmt(r["achieved_bits"])])
        return buf.getvalue()

    def column(self, scheme: str, key: str = "T_s") -> list:
        return [r[key] for r in self.rows if r["scheme"] == scheme]


def run_sweep(scenario: Scenario, l_values, schemes=tuple(SCHEMES),
              config: SolverConfig | None = None) -> SweepTable:
    """Solve every (L, scheme) pair; one row each, in input order."""
    l_values = [float(v) for v in l_values]
    if not l_values:
        raise ValueError("l_values must be non-empty")
    if any(b < a for a, b in zip(l_values, l_values[1:])):
        raise ValueError("l_values must be ascending")
    rows = []
    for L in l_values:
        sc = scenario.replace(task_bits=L)
        for scheme in schemes:
            bundle = run_solve(sc, scheme, config)
            row = dict(bundle.summary)
            rows.append(row)
            log.info("sweep L=%.6g scheme=%s N=%d (%.1f s)", L, scheme, row["N"],
                     bundle.wall_time)
    table = SweepTable(rows)
    for scheme in schemes:
        T = table.column(scheme)
        if any(b < a for a, b in zip(T, T[1:])):
            log.warning("%s: completion time decreases along the sweep: %s", scheme, T)
    return table


# command line --------------------------------------------------------------


def _config(args) -> SolverConfig:
    kwargs = {"trace": args.trace}
    if args.sca_max_iters is not None:
        kwargs["sca_max_iters"] = args.sca_max_iters
    if args.tol is not None:
        kwargs["sca_tol"] = kwargs["alt_tol"] = args.tol
    return SolverConfig(**kwargs)


def _scenario(args) -> Scenario:
    sc = load_scenario(args.scenario)
    if args.l_bits is not None:
        sc = sc.replace(task_bits=args.l_bits)
    return sc


def _cmd_solve(args) -> int:
    bundle = run_solve(_scenario(args), args.scheme, _config(args))
    if args.out:
        bundle.write(args.out)
    print(json.dumps(bundle.summary))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    sc = load_scenario(args.scenario)
    l_values = args.l_bits or [sc.task_bits]
    table = run_sweep(sc, l_values, args.scheme or list(SCHEMES), _config(args))
    text = table.to_csv()
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        _atomic_write(Path(args.out) / "sweep.csv", text)
    sys.stdout.write(text)
    return EXIT_OK


def _cmd_compare(args) -> int:
    sc = _scenario(args)
    config = _config(args)
    rows = []
    for scheme in SCHEMES:
        bundle = run_solve(sc, scheme, config)
        if args.out:
            bundle.write(args.out)
        rows.append(bundle.summary)
    text = SweepTable(rows).to_csv()
    if args.out:
        _atomic_write(Path(args.out) / "compare.csv", text)
    sys.stdout.write(text)
    return EXIT_OK


def _cmd_validate(args) -> int:
    sc = _scenario(args)
    try:
        text = Path(args.plan).read_text()
    except OSError as exc:
        raise ScenarioFileError(f"{args.plan}: {exc.strerror}") from exc
    traj, alloc = read_trajectory_table(text, sc.n_gbs)
    report = validate_solution(traj, alloc, sc)
    print(json.dumps({
        "feasible": report.feasible,
        "total_bits": report.total_bits,
        "violations": report.violations,
    }))
    return EXIT_OK if report.feasible else EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavmec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", required=True, help="scenario TOML file")
        p.add_argument("--out", help="directory for result tables")
        p.add_argument("--sca-max-iters", type=int, default=None)
        p.add_argument("--tol", type=float, default=None,
                       help="relative tolerance of the SCA and alternation loops")
        p.add_argument("--trace", action="store_true", help="log one line per iteration")

    p = sub.add_parser("solve", help="minimum mission time for one scheme")
    common(p)
    p.add_argument("--scheme", choices=list(SCHEMES), default="proposed")
    p.add_argument("--l-bits", type=float, default=None, help="override the task size")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("sweep", help="mission time over several task sizes")
    common(p)
    p.add_argument("--scheme", choices=list(SCHEMES), action="append")
    p.add_argument("--l-bits", type=float, nargs="+", default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("baseline-compare", help="all schemes on one scenario")
    common(p)
    p.add_argument("--l-bits", type=float, default=None)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("validate", help="check a saved trajectory table")
    common(p)
    p.add_argument("--plan", required=True, help="trajectory CSV written by solve")
    p.add_argument("--l-bits", type=float, default=None)
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.trace else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ScenarioFileError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (PlanningError, LpError, SubproblemError, RuntimeError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
