"""Batch front end: validate / solve / simulate / tune / demo.

Scenarios are JSON documents (see README for the schema); constant matrices
broadcast over t.  Exit codes: 0 success, 1 validation violations, 2 bad
config (with field diagnostics), 3 numerical breakdown (with step index).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from .core import (DEFAULT_RTOL, DimMismatch, InvalidDelay, InvalidMatrix,
                   NumericalBreakdown, WrongControllerCount, eig_bounds)
from .coordination import LocalGains, build
from .infostructure import (DelayGraph, MemoryProtocol,
                            build_asymmetric_delay, build_control_sharing,
                            build_one_sided, build_symmetric_delay,
                            explicit_protocol, token_trace, validate)
from .plant import PlantModel
from .sim import exact_cost, simulate
from .solver import SolvedStrategy, solve
from .tune import tune


class ConfigError(Exception):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


def _get(doc, path, required=True, default=None):
    node = doc
    walked = []
    for part in path.split("."):
        walked.append(part)
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError(".".join(walked), "missing required field")
            return default
        node = node[part]
    return node


@dataclass
class Scenario:
    plant: PlantModel
    protocol: MemoryProtocol
    gains: LocalGains
    sim_seed: int
    sim_rollouts: int
    tune_budget: int
    tune_restarts: int
    tune_seed: int


def _load_gains(doc, plant, mp) -> LocalGains:
    g_doc = _get(doc, "gains", required=False)
    if not g_doc:
        return LocalGains.zeros(plant, mp)
    per_step = bool(g_doc.get("per_step", False))
    try:
        G = g_doc.get("G")
        H = g_doc.get("H")
        if G is None:
            G = [np.zeros((plant.d_u[i], plant.d_y[i]))
                 for i in range(plant.n)]
        if H is None:
            H = [np.zeros((plant.d_u[i], mp.d_m[i])) for i in range(plant.n)]
        if not per_step:
            G = [G] * plant.T
            H = [H] * plant.T
        return LocalGains.create(plant, mp, G, H)
    except (DimMismatch, InvalidMatrix, ValueError) as e:
        raise ConfigError("gains", str(e))


def load_scenario(doc: dict) -> Scenario:
    """Parse and semantically validate a config document."""
    T = _get(doc, "horizon")
    if not isinstance(T, int) or T < 1:
        raise ConfigError("horizon", "must be a positive integer")
    d_x = _get(doc, "dims.d_x")
    d_u = _get(doc, "dims.d_u")
    d_y = _get(doc, "dims.d_y")
    if not isinstance(d_u, list) or not isinstance(d_y, list):
        raise ConfigError("dims", "d_u and d_y must be per-controller lists")
    n = len(d_u)
    if len(d_y) != n:
        raise ConfigError("dims.d_y", f"expected {n} entries to match d_u")

    Q = _get(doc, "cost.Q")
    R = _get(doc, "cost.R")
    try:
        q_lo, _ = eig_bounds(np.asarray(Q, dtype=float))
    except Exception as e:
        raise ConfigError("cost.Q", str(e))
    if q_lo < -1e-10:
        raise ConfigError("cost.Q", "must be positive semi-definite")
    try:
        r_lo, _ = eig_bounds(np.asarray(R, dtype=float))
    except Exception as e:
        raise ConfigError("cost.R", str(e))
    if r_lo <= 0:
        raise ConfigError("cost.R", "must be positive definite")

    try:
        plant = PlantModel.create(
            n=n, T=T, d_x=d_x, d_u=d_u, d_y=d_y,
            A=_get(doc, "dynamics.A"), B=_get(doc, "dynamics.B"),
            C=_get(doc, "observations.C"), Q=Q, R=R,
            sigma_x=_get(doc, "noise.sigma_x"),
            sigma_w0=_get(doc, "noise.sigma_w0"),
            sigma_w=_get(doc, "noise.sigma_w"))
    except (DimMismatch, InvalidMatrix) as e:
        msg = str(e)
        field = "plant"
        for prefix, name in (("A", "dynamics.A"), ("B", "dynamics.B"),
                             ("C", "observations.C"), ("Q", "cost.Q"),
                             ("R", "cost.R"), ("sigma", "noise")):
            if msg.startswith(prefix):
                field = name
                break
        raise ConfigError(field, msg)

    kind = _get(doc, "info_structure.kind")
    params = _get(doc, "info_structure.params", required=False, default={})
    try:
        if kind == "symmetric_delay":
            mp = build_symmetric_delay(plant, params.get("k", 1))
        elif kind == "asymmetric_delay":
            delays = params.get("delays")
            if delays is None:
                raise ConfigError("info_structure.params.delays",
                                  "missing delay matrix")
            mp = build_asymmetric_delay(plant, DelayGraph.create(delays))
        elif kind == "control_sharing":
            mp = build_control_sharing(plant)
        elif kind == "one_sided":
            mp = build_one_sided(plant)
        elif kind == "explicit":
            mp = explicit_protocol(plant, params.get("blocks", []),
                                   strict=bool(params.get("strict", False)))
        else:
            raise ConfigError("info_structure.kind",
                              f"unknown kind {kind!r}")
    except (InvalidDelay, WrongControllerCount, DimMismatch,
            InvalidMatrix) as e:
        raise ConfigError("info_structure", str(e))

    gains = _load_gains(doc, plant, mp)
    return Scenario(
        plant=plant, protocol=mp, gains=gains,
        sim_seed=int(_get(doc, "sim.seed", required=False, default=0)),
        sim_rollouts=int(_get(doc, "sim.rollouts", required=False,
                              default=10000)),
        tune_budget=int(_get(doc, "tune.budget", required=False,
                             default=1000)),
        tune_restarts=int(_get(doc, "tune.restarts", required=False,
                               default=1)),
        tune_seed=int(_get(doc, "tune.seed", required=False, default=0)))


def _read_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(path, "config file not found")
    except json.JSONDecodeError as e:
        raise ConfigError(path, f"invalid JSON at line {e.lineno} "
                                f"column {e.colno}: {e.msg}")


# --------------------------------------------------------------------------
# strategy files


def strategy_to_doc(ss: SolvedStrategy, dump_matrices=False) -> dict:
    gains = ss.gains
    doc = {
        "format": "declqg-strategy/1",
        "J": ss.J,
        "K": [k.tolist() for k in ss.Kgain],
        "L": [m.tolist() for m in ss.Lgain],
        "filter_gain": [g.tolist() for g in ss.filter_gain],
        "gains": {
            "per_step": True,
            "G": [[b.tolist() for b in row] for row in gains.G],
            "H": [[b.tolist() for b in row] for row in gains.H],
        },
    }
    if dump_matrices and ss.Ptilde is not None:
        doc["Ptilde"] = [m.tolist() for m in ss.Ptilde]
        doc["S"] = [m.tolist() for m in ss.S]
    return doc


def strategy_from_doc(doc: dict, plant: PlantModel, mp: MemoryProtocol
                      ) -> SolvedStrategy:
    if doc.get("format") != "declqg-strategy/1":
        raise ConfigError("format", "not a declqg strategy file")
    gains = LocalGains.create(plant, mp, doc["gains"]["G"], doc["gains"]["H"])
    cs = build(plant, mp, gains)
    K = tuple(np.asarray(m, dtype=float) for m in doc["K"])
    L = tuple(np.asarray(m, dtype=float) for m in doc["L"])
    F = tuple(np.asarray(m, dtype=float) for m in doc["filter_gain"])
    if len(K) != plant.T or len(F) != plant.T - 1:
        raise ConfigError("K", "gain sequence length does not match horizon")
    return SolvedStrategy(cs=cs, Kgain=K, Lgain=L, filter_gain=F,
                          J=float(doc["J"]))


# --------------------------------------------------------------------------
# output helpers


def _outdir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path: str, doc: dict):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
    print(f"wrote {path}")


def _write_rollout_csv(path: str, rollout):
    d_x = rollout.x.shape[1]
    d_y = rollout.y.shape[1]
    d_u = rollout.u.shape[1]
    d_z = rollout.z.shape[1]
    header = (["t"] + [f"x_{j}" for j in range(d_x)]
              + [f"y_{j}" for j in range(d_y)]
              + [f"u_{j}" for j in range(d_u)]
              + [f"z_{j}" for j in range(d_z)] + ["cost_step"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t in range(rollout.x.shape[0]):
            row = ([t + 1] + list(rollout.x[t]) + list(rollout.y[t])
                   + list(rollout.u[t]) + list(rollout.z[t])
                   + [rollout.step_costs[t]])
            w.writerow(row)


# --------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    sc = load_scenario(_read_config(args.config))
    mp = sc.protocol
    report = validate(mp)
    print(f"protocol: {mp.kind} (strict={mp.strict}), n={mp.n}, T={mp.T}")
    print(f"d_m={list(mp.d_m)} d_carrier={mp.d_carrier} d_z={mp.d_z}")
    print(report.summary())
    try:
        trace = token_trace(mp)
        t = mp.T
        shared = [tok for tok in trace.z[t] if tok is not None]
        print(f"token simulation: Z_{t} carries {len(shared)} live entries "
              f"of {len(trace.z[t])} slots")
        for i in range(mp.n):
            toks = [tok for tok in trace.memory_tokens(i, t) if tok is not None]
            oldest = min((tok[2] for tok in toks), default=None)
            print(f"  M^{i + 1}_{t}: {len(toks)} live entries"
                  + (f", oldest from t={oldest}" if oldest else ""))
    except Exception as e:
        print(f"token simulation unavailable: {e}")
    if args.out:
        _write_json(os.path.join(_outdir(args), "protocol.json"),
                    mp.to_document())
    return 0 if report.ok else 1


def cmd_solve(args) -> int:
    sc = load_scenario(_read_config(args.config))
    ss = solve(sc.plant, sc.protocol, sc.gains, rtol=args.tolerance)
    print(f"predicted cost J = {ss.J:.10g}")
    print(f"augmented state dim = {ss.cs.d_state}, "
          f"statistic dim = {ss.cs.d_x + ss.cs.d_c}, d_z = {ss.cs.d_z}")
    print(" t   ||K~_t||_F     tr P~_t      tr S_t")
    for t in range(1, sc.plant.T + 1):
        print(f"{t:2d}   {np.linalg.norm(ss.Kgain[t - 1]):10.4f}"
              f"   {np.trace(ss.Ptilde[t - 1]):10.4f}"
              f"   {np.trace(ss.S[t - 1]):10.4f}")
    if args.dump_matrices:
        for t in range(1, sc.plant.T + 1):
            print(f"K~_{t} =\n{ss.Kgain[t - 1]}")
    out = _outdir(args)
    _write_json(os.path.join(out, "strategy.json"),
                strategy_to_doc(ss, dump_matrices=args.dump_matrices))
    return 0


def cmd_simulate(args) -> int:
    sc = load_scenario(_read_config(args.config))
    seed = sc.sim_seed if args.seed is None else args.seed
    rollouts = sc.sim_rollouts if args.rollouts is None else args.rollouts
    if args.strategy:
        ss = strategy_from_doc(_read_config(args.strategy), sc.plant,
                               sc.protocol)
        gains = ss.gains
        solved_here = False
    else:
        gains = sc.gains
        ss = solve(sc.plant, sc.protocol, gains, rtol=args.tolerance)
        solved_here = True
    mc = simulate(sc.plant, sc.protocol, gains, ss, seed=seed,
                  count=rollouts, sample_count=args.samples)
    exact = exact_cost(sc.plant, sc.protocol, gains, ss)
    print(f"rollouts        : {rollouts} (seed {seed})")
    print(f"monte carlo cost: {mc.mean:.10g} (stderr {mc.stderr:.4g})")
    print(f"exact cost      : {exact:.10g}")
    print(f"reported J      : {ss.J:.10g}"
          + ("" if solved_here else " (from strategy file)"))
    print(f"|MC - exact|    : {abs(mc.mean - exact):.4g} "
          f"({abs(mc.mean - exact) / max(mc.stderr, 1e-300):.2f} stderr)")
    print(f"|J - exact|     : {abs(ss.J - exact):.4g}")
    out = _outdir(args)
    _write_json(os.path.join(out, "simulation.json"), {
        "seed": seed, "rollouts": rollouts, "mean": mc.mean,
        "stderr": mc.stderr, "exact_cost": exact, "J": ss.J,
    })
    for idx, ro in enumerate(mc.samples):
        _write_rollout_csv(os.path.join(out, f"rollout_{idx:03d}.csv"), ro)
    return 0


def cmd_tune(args) -> int:
    sc = load_scenario(_read_config(args.config))
    budget = sc.tune_budget if args.budget is None else args.budget
    restarts = sc.tune_restarts if args.restarts is None else args.restarts
    seed = sc.tune_seed if args.seed is None else args.seed
    result = tune(sc.plant, sc.protocol, budget=budget, seed=seed,
                  restarts=restarts, rtol=args.tolerance)
    print(f"incumbent J = {result.J:.10g} after {result.evaluations} "
          f"evaluations ({restarts} restarts, seed {seed})")
    out = _outdir(args)
    log_path = os.path.join(out, "tune_log.csv")
    with open(log_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["restart", "eval", "J_incumbent"])
        w.writerows(result.log)
    print(f"wrote {log_path}")
    _write_json(os.path.join(out, "strategy.json"),
                strategy_to_doc(result.strategy))
    return 0


DEMOS = {}


def _demo(name, description, config):
    DEMOS[name] = {"description": description, "config": config}


_demo("scalar-2ctrl-k1",
      "two scalar controllers, one-step delayed sharing",
      {
          "horizon": 6,
          "dims": {"d_x": 1, "d_u": [1, 1], "d_y": [1, 1]},
          "dynamics": {"A": [[0.9]], "B": [[1.0, 0.5]]},
          "observations": {"C": [[[1.0]], [[0.7]]]},
          "cost": {"Q": [[1.0]], "R": [[1.0, 0.0], [0.0, 1.0]]},
          "noise": {"sigma_x": [[1.0]], "sigma_w0": [[0.4]],
                    "sigma_w": [[[0.2]], [[0.3]]]},
          "info_structure": {"kind": "symmetric_delay", "params": {"k": 1}},
          "sim": {"seed": 7, "rollouts": 20000},
          "tune": {"budget": 600, "restarts": 1, "seed": 0},
      })

_demo("symmetric-k2",
      "two controllers, planar plant, two-step delayed sharing",
      {
          "horizon": 6,
          "dims": {"d_x": 2, "d_u": [1, 1], "d_y": [1, 1]},
          "dynamics": {"A": [[0.95, 0.1], [-0.05, 0.85]],
                       "B": [[1.0, 0.0], [0.2, 0.8]]},
          "observations": {"C": [[[1.0, 0.0]], [[0.0, 1.0]]]},
          "cost": {"Q": [[1.0, 0.0], [0.0, 1.0]],
                   "R": [[1.0, 0.0], [0.0, 1.0]]},
          "noise": {"sigma_x": [[1.0, 0.0], [0.0, 1.0]],
                    "sigma_w0": [[0.3, 0.0], [0.0, 0.3]],
                    "sigma_w": [[[0.1]], [[0.1]]]},
          "info_structure": {"kind": "symmetric_delay", "params": {"k": 2}},
          "sim": {"seed": 11, "rollouts": 20000},
          "tune": {"budget": 800, "restarts": 1, "seed": 0},
      })

_demo("figure1-asymmetric",
      "three controllers on a line: 1 and 3 reach each other through 2",
      {
          "horizon": 6,
          "dims": {"d_x": 2, "d_u": [1, 1, 1], "d_y": [1, 1, 1]},
          "dynamics": {"A": [[0.9, 0.1], [0.0, 0.9]],
                       "B": [[1.0, 0.5, 0.0], [0.0, 0.5, 1.0]]},
          "observations": {"C": [[[1.0, 0.0]], [[0.5, 0.5]], [[0.0, 1.0]]]},
          "cost": {"Q": [[1.0, 0.0], [0.0, 1.0]],
                   "R": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]},
          "noise": {"sigma_x": [[1.0, 0.0], [0.0, 1.0]],
                    "sigma_w0": [[0.2, 0.0], [0.0, 0.2]],
                    "sigma_w": [[[0.1]], [[0.1]], [[0.1]]]},
          "info_structure": {"kind": "asymmetric_delay",
                             "params": {"delays": [[1, 1, 2], [1, 1, 1],
                                                   [2, 1, 1]]}},
          "sim": {"seed": 3, "rollouts": 20000},
          "tune": {"budget": 800, "restarts": 1, "seed": 0},
      })

_demo("control-sharing",
      "coupled subsystems observing their own state, sharing actions",
      {
          "horizon": 6,
          "dims": {"d_x": 2, "d_u": [1, 1], "d_y": [1, 1]},
          "dynamics": {"A": [[0.9, 0.0], [0.0, 0.8]],
                       "B": [[1.0, 0.4], [0.3, 1.0]]},
          "observations": {"C": [[[1.0, 0.0]], [[0.0, 1.0]]]},
          "cost": {"Q": [[1.0, 0.4], [0.4, 1.0]],
                   "R": [[1.0, 0.0], [0.0, 1.0]]},
          "noise": {"sigma_x": [[1.0, 0.0], [0.0, 1.0]],
                    "sigma_w0": [[0.3, 0.0], [0.0, 0.3]],
                    "sigma_w": [[[0.0]], [[0.0]]]},
          "info_structure": {"kind": "control_sharing"},
          "sim": {"seed": 5, "rollouts": 20000},
          "tune": {"budget": 600, "restarts": 1, "seed": 0},
      })

_demo("one-sided",
      "two subsystems; only subsystem 2's state and actions are shared",
      {
          "horizon": 6,
          "dims": {"d_x": 2, "d_u": [1, 1], "d_y": [1, 1]},
          "dynamics": {"A": [[0.9, 0.3], [0.0, 0.8]],
                       "B": [[1.0, 0.0], [0.4, 1.0]]},
          "observations": {"C": [[[1.0, 0.0]], [[0.0, 1.0]]]},
          "cost": {"Q": [[1.0, 0.0], [0.0, 1.0]],
                   "R": [[1.0, 0.0], [0.0, 1.0]]},
          "noise": {"sigma_x": [[1.0, 0.0], [0.0, 1.0]],
                    "sigma_w0": [[0.3, 0.0], [0.0, 0.3]],
                    "sigma_w": [[[0.0]], [[0.0]]]},
          "info_structure": {"kind": "one_sided"},
          "sim": {"seed": 9, "rollouts": 20000},
          "tune": {"budget": 600, "restarts": 1, "seed": 0},
      })


def cmd_demo(args) -> int:
    if args.name not in DEMOS:
        print(f"unknown demo {args.name!r}; available: "
              + ", ".join(sorted(DEMOS)), file=sys.stderr)
        return 2
    demo = DEMOS[args.name]
    print(f"demo {args.name}: {demo['description']}")
    doc = demo["config"]
    sc = load_scenario(doc)
    report = validate(sc.protocol)
    print(f"protocol {sc.protocol.kind}: "
          + ("valid" if report.ok else f"{len(report.violations)} violations"))
    ss = solve(sc.plant, sc.protocol, sc.gains, rtol=args.tolerance)
    exact = exact_cost(sc.plant, sc.protocol, sc.gains, ss)
    rollouts = min(sc.sim_rollouts, 20000)
    mc = simulate(sc.plant, sc.protocol, sc.gains, ss,
                  seed=sc.sim_seed, count=rollouts)
    print(f"J = {ss.J:.6f}   exact = {exact:.6f}   "
          f"MC({rollouts}) = {mc.mean:.6f} +- {mc.stderr:.6f}")
    if args.out:
        out = _outdir(args)
        _write_json(os.path.join(out, "config.json"), doc)
        _write_json(os.path.join(out, "strategy.json"), strategy_to_doc(ss))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="declqg",
        description="decentralized LQG synthesis with partial history sharing")
    parser.add_argument("--out", help="output directory", default=None)
    parser.add_argument("--tolerance", type=float, default=DEFAULT_RTOL,
                        help="pseudoinverse relative cutoff")
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="check a protocol (A1/A2, tokens)")
    p_val.add_argument("config")
    p_val.set_defaults(func=cmd_validate)

    p_solve = sub.add_parser("solve", help="solve for the best response gains")
    p_solve.add_argument("config")
    p_solve.add_argument("--dump-matrices", action="store_true")
    p_solve.set_defaults(func=cmd_solve)

    p_sim = sub.add_parser("simulate", help="Monte Carlo + exact-cost checks")
    p_sim.add_argument("config")
    p_sim.add_argument("--strategy", help="strategy JSON from `solve`")
    p_sim.add_argument("--rollouts", type=int, default=None)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--samples", type=int, default=0,
                       help="trajectories to export as CSV")
    p_sim.set_defaults(func=cmd_simulate)

    p_tune = sub.add_parser("tune", help="pattern search over local gains")
    p_tune.add_argument("config")
    p_tune.add_argument("--budget", type=int, default=None)
    p_tune.add_argument("--restarts", type=int, default=None)
    p_tune.add_argument("--seed", type=int, default=None)
    p_tune.set_defaults(func=cmd_tune)

    p_demo = sub.add_parser("demo", help="run a named built-in scenario")
    p_demo.add_argument("name")
    p_demo.set_defaults(func=cmd_demo)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error at {e.field}: {e.message}", file=sys.stderr)
        return 2
    except NumericalBreakdown as e:
        print(f"numerical breakdown: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
