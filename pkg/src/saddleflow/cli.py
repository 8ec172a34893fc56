"""Command-line entry point: ``saddleflow {solve,simulate,rcg,optctrl,noiss}``.

Exit codes: 0 ok, 2 invalid input, 3 numerical failure, 4 infeasible or
unbounded.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import oracle
from .dynamics import IntegratorConfig
from .errors import InvalidInput, SaddleflowError
from .experiments import (
    ScenarioConfig,
    build_optimal_control_lp,
    control_cost,
    extract_controls,
    iss_counterexample,
    load_scenario,
    rollout,
    run_scenario,
    spec_from_dict,
)
from .lp_model import load_lp, require_valid
from .network import load_json

log = logging.getLogger("saddleflow")


def _emit(payload: dict, out: Path | None, name: str) -> None:
    text = json.dumps(payload, indent=2)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text + "\n")
    print(text)


def _solution_dict(sol: oracle.OracleSolution) -> dict:
    return {
        "method": sol.method,
        "optimal_value": sol.optimal_value,
        "x_star": sol.x_star.tolist(),
        "z_star": sol.z_star.tolist(),
        "optimal_bases": [list(map(int, B)) for B in sol.optimal_bases],
        "n_dual_vertices": len(sol.dual_vertices),
    }


def cmd_solve(args) -> int:
    lp = require_valid(load_lp(args.lp))
    out = Path(args.out) if args.out else None
    if args.oracle:
        _emit(_solution_dict(oracle.solve(lp)), out, "solution.json")
        return 0
    cfg = ScenarioConfig(lp, IntegratorConfig(dt=args.dt, t_max=args.tmax, stop_tol=args.tol), out_dir=out)
    metrics, _ = run_scenario(cfg)
    print(json.dumps(metrics.to_dict(), indent=2))
    return 0


def _run_scenario_file(path, out_override) -> int:
    cfg, initial = load_scenario(path)
    if out_override:
        cfg.out_dir = Path(out_override)
    metrics, traj = run_scenario(cfg, initial)
    payload = metrics.to_dict()
    if "checkpoints" in traj.extras:
        payload["checkpoints"] = traj.extras["checkpoints"]
        payload["checkpoint_residuals"] = traj.extras["checkpoint_residuals"]
        if cfg.out_dir is not None:
            (Path(cfg.out_dir) / "checkpoints.json").write_text(json.dumps(
                {"t": traj.extras["checkpoints"], "kkt": traj.extras["checkpoint_residuals"]}, indent=2) + "\n")
    print(json.dumps(payload, indent=2))
    return 0


def cmd_simulate(args) -> int:
    return _run_scenario_file(args.scenario, args.out)


def cmd_rcg(args) -> int:
    data = load_json(args.scenario)
    if "schedule" not in data or ("graph" not in data and "optimal_control" not in data):
        raise InvalidInput("rcg needs a scenario with 'graph' and 'schedule'")
    return _run_scenario_file(args.scenario, args.out)


def _write_rows(path: Path, prefix: str, rows: np.ndarray, first_tau: int) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tau", *(f"{prefix}_{i + 1}" for i in range(rows.shape[1]))])
        for k, row in enumerate(rows):
            writer.writerow([k + first_tau, *(f"{v:.17g}" for v in row)])


def cmd_optctrl(args) -> int:
    spec = spec_from_dict(load_json(args.spec))
    lp = build_optimal_control_lp(spec)
    sol = oracle.solve(lp)
    u = extract_controls(sol.x_star, spec)
    xs = rollout(spec, u)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "controls.csv", "u", u, 0)
    _write_rows(out / "states.csv", "x", xs, 1)
    metrics = {
        "n": lp.n,
        "m": lp.m,
        "optimal_value": sol.optimal_value,
        "rollout_cost": control_cost(spec, u),
        "control_variables_per_agent": 2 * (spec.T + 1),
        "method": sol.method,
    }
    if args.simulate:
        cfg = ScenarioConfig(lp, IntegratorConfig(dt=args.dt, t_max=args.tmax, stop_tol=args.tol))
        run, _ = run_scenario(cfg)
        metrics["saddle_point"] = run.to_dict()
    _emit(metrics, out, "metrics.json")
    return 0


def cmd_noiss(args) -> int:
    lp = load_lp(args.lp)
    cert = iss_counterexample(lp)
    _emit(cert.to_dict(), Path(args.out) if args.out else None, "certificate.json")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="saddleflow", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def integrator_flags(sp, tmax):
        sp.add_argument("--dt", type=float, default=0.01)
        sp.add_argument("--tmax", type=float, default=tmax)
        sp.add_argument("--tol", type=float, default=1e-3)

    sp = sub.add_parser("solve", help="run the saddle-point dynamics (or the oracle) on an LP file")
    sp.add_argument("lp")
    sp.add_argument("--oracle", action="store_true", help="print the enumeration oracle solution instead")
    integrator_flags(sp, 100.0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_solve)

    for name, func, text in (("simulate", cmd_simulate, "run a scenario file"),
                             ("rcg", cmd_rcg, "run a scenario under a link-failure schedule")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("scenario")
        sp.add_argument("--out", help="override the scenario's output directory")
        sp.set_defaults(func=func)

    sp = sub.add_parser("optctrl", help="solve a finite-horizon optimal-control spec")
    sp.add_argument("spec")
    sp.add_argument("--out", default="optctrl_out")
    sp.add_argument("--simulate", action="store_true", help="also run the saddle-point dynamics")
    integrator_flags(sp, 3000.0)
    sp.set_defaults(func=cmd_optctrl)

    sp = sub.add_parser("noiss", help="build a constant disturbance with unbounded equilibria")
    sp.add_argument("lp")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_noiss)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except SaddleflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
