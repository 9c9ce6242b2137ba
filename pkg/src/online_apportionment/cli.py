"""Command-line entry point: ``online-apportionment <command> ...``.

Exit codes: 0 ok, 1 a requested check failed, 2 bad input, 3 the method has
no feasible step on this instance.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from .adversary import AdversaryConfig, booster, figure3_schedule
from .core import (Instance, TrajectoryFormatError, TrajectoryState, check_global_quota,
                   format_rational, max_deviation, parse_rational, read_trajectory_csv,
                   surplus, validate_instance, write_trajectory_csv)
from .flow import (CapacitatedNetwork, Infeasible, decompose_integral, feasible_flow,
                   hypersimplex_decompose)
from .greedy import Greedy, InfeasibleStep as GreedyInfeasible, run_method
from .mmhsc import (CoveringInputError, load_covering, plan_min_cost, round_near_feasible)
from .offline import offline_lottery
from .randmethod import (Grimmett, InfeasibleStep, NetworkFlowMethod, grimmett_distribution,
                         method_state_json, sample_trajectory, step_marginals, substream, track)

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2, 3


class InputError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _load_instance(path: str) -> Instance:
    try:
        with open(path) as fh:
            inst = Instance.from_json(json.load(fh))
    except (OSError, ValueError, KeyError, TypeError, ZeroDivisionError) as exc:
        raise InputError(f"cannot read instance {path}: {exc}") from exc
    bad = validate_instance(inst)
    if bad:
        raise InputError("; ".join(f"step {v.step}: {v.message}" for v in bad[:5]))
    return inst


def _rational(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from exc


def _summary(state: TrajectoryState) -> dict:
    bad = check_global_quota(state)
    return {
        "T": state.t,
        "final_A": list(state.A),
        "final_surplus": [format_rational(x) for x in surplus(state)],
        "max_deviation": format_rational(max_deviation(state)),
        "global_quota": "ok" if bad is None else {"step": bad[0], "party": bad[1]},
    }


# --------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    inst = _load_instance(args.instance)
    os.makedirs(args.out, exist_ok=True)
    report = {"instance_digest": inst.digest(), "method": args.method, "seed": args.seed,
              "trials": []}
    exact = None
    if args.method == "grimmett" and inst.n > 2:
        raise InputError("grimmett needs at most two parties")
    if args.method == "netflow":
        try:
            dists = track(inst)
        except InfeasibleStep as exc:
            report["infeasible"] = {"step": exc.step, "certificate": exc.witness.to_json()}
            _write(os.path.join(args.out, "report.json"), _dump(report))
            sys.stderr.write(f"{exc}\n")
            return EXIT_INFEASIBLE
        _write(os.path.join(args.out, "method_state.json"), _dump(method_state_json(dists)))
        exact = [step_marginals(dists[t - 1], dists[t]) for t in range(1, inst.T + 1)]
    elif args.method == "grimmett":
        exact = [[Fraction(0)] * inst.n for _ in range(inst.T)]
        for traj, p in grimmett_distribution(inst).items():
            for t, X in enumerate(traj):
                for i in X:
                    exact[t][i] += p
    counts = [[0] * inst.n for _ in range(inst.T)]
    for k in range(args.trials):
        rng = substream(args.seed, k)
        if args.method == "greedy":
            state = run_method(Greedy(), inst)
        elif args.method == "grimmett":
            lam = Fraction(rng.randrange(2 ** 32), 2 ** 32)
            state = run_method(Grimmett(lam), inst)
        else:
            state = sample_trajectory(dists, inst, rng)
        name = f"trial_{k:05d}.csv"
        with open(os.path.join(args.out, name), "w", newline="") as fh:
            write_trajectory_csv(state, fh, float_report=args.float_report)
        for t, X in enumerate(state.steps):
            for i in X:
                counts[t][i] += 1
        report["trials"].append({"trial": k, "file": name, **_summary(state)})
    deltas = {}
    if args.trials:
        emp = max((abs(Fraction(counts[t][i], args.trials) - inst.votes[t][i])
                   for t in range(inst.T) for i in range(inst.n)), default=Fraction(0))
        deltas["empirical_max_abs"] = format_rational(emp)
    if exact is not None:
        ex = max((abs(exact[t][i] - inst.votes[t][i])
                  for t in range(inst.T) for i in range(inst.n)), default=Fraction(0))
        deltas["exact_max_abs"] = format_rational(ex)
    report["marginal_deltas"] = deltas
    _write(os.path.join(args.out, "report.json"), _dump(report))
    return EXIT_OK


def _target_method(name: str, n: int, seed: int):
    if name == "greedy":
        return Greedy()
    if name == "netflow":
        return NetworkFlowMethod(n, substream(seed, 0))
    if name == "grimmett":
        if n > 2:
            raise InputError("grimmett needs at most two parties")
        return Grimmett(Fraction(substream(seed, 0).randrange(2 ** 32), 2 ** 32))
    raise InputError(f"unknown method {name}")


def cmd_adversary(args) -> int:
    if args.n < 1:
        raise InputError("n must be positive")
    method = _target_method(args.target_method, args.n, args.seed)
    try:
        if args.schedule == "figure3":
            if args.n not in (3, 4):
                raise InputError("the figure3 schedule exists for n = 3 or 4 only")
            state, transcript = figure3_schedule(method, args.n)
            deviation = max_deviation(state)
        else:
            cfg = AdversaryConfig(tuple(range(args.n)), args.epsilon)
            res = booster(method, TrajectoryState.initial(args.n), cfg)
            state, transcript, deviation = res.state, res.transcript, max_deviation(res.state)
    except InfeasibleStep as exc:
        sys.stderr.write(f"{exc}\n")
        _write(None, _dump({"infeasible": {"step": exc.step,
                                           "certificate": exc.witness.to_json()}}))
        return EXIT_INFEASIBLE
    os.makedirs(args.out, exist_ok=True)
    _write(os.path.join(args.out, "instance.json"), _dump(state.instance.to_json()))
    _write(os.path.join(args.out, "transcript.json"), _dump(transcript))
    with open(os.path.join(args.out, "trajectory.csv"), "w", newline="") as fh:
        write_trajectory_csv(state, fh, float_report=args.float_report)
    summary = {"n": args.n, "schedule": args.schedule, "target_method": args.target_method,
               "epsilon": format_rational(args.epsilon), "steps": state.t,
               "achieved_deviation": format_rational(deviation),
               "max_surplus": format_rational(max(surplus(state), default=Fraction(0))),
               "min_surplus": format_rational(min(surplus(state), default=Fraction(0)))}
    _write(os.path.join(args.out, "summary.json"), _dump(summary))
    _write(None, _dump(summary))
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        with open(args.trajectory) as fh:
            text = fh.read()
        state, problems = read_trajectory_csv(text)
    except (OSError, TrajectoryFormatError) as exc:
        raise InputError(str(exc)) from exc
    checks = {}
    checks["consistency"] = [f"t={p.step} i={p.party}: {p.message}" for p in problems]
    local = [f"t={v.step} i={v.party}: {v.message}"
             for v in validate_instance(state.instance) + state.consistency_violations()]
    checks["local_feasibility"] = local
    bad = check_global_quota(state)
    quota = "ok" if bad is None else {"step": bad[0], "party": bad[1]}
    if args.global_quota:
        checks["global_quota"] = [] if bad is None else [f"t={bad[0]} i={bad[1]}"]
    dev = max_deviation(state)
    if args.alpha is not None:
        checks["alpha_proportional"] = ([] if dev <= args.alpha
                                        else [f"max deviation {dev} > {args.alpha}"])
    ok = all(not v for v in checks.values())
    out = {"ok": ok, "T": state.t, "n": state.n, "max_deviation": format_rational(dev),
           "global_quota": quota, "checks": {k: ("pass" if not v else v) for k, v in checks.items()}}
    _write(None, _dump(out))
    return EXIT_OK if ok else EXIT_CHECK


def cmd_offline(args) -> int:
    inst = _load_instance(args.instance)
    lottery = offline_lottery(inst)
    _write(args.out, _dump(lottery.to_json()))
    return EXIT_OK


def cmd_decompose(args) -> int:
    if args.vector is not None:
        if args.house is None:
            raise InputError("--vector needs --house")
        try:
            v = [parse_rational(x) for x in args.vector.split(",")]
            parts = hypersimplex_decompose(v, args.house)
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(str(exc)) from exc
        _write(args.out, _dump([{"weight": format_rational(w), "set": sorted(S)}
                                for w, S in parts]))
        return EXIT_OK
    if args.network is None or args.value is None:
        raise InputError("give --vector/--house or --network/--value")
    try:
        with open(args.network) as fh:
            net = CapacitatedNetwork.from_json(json.load(fh))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot read network: {exc}") from exc
    flow = feasible_flow(net, args.value)
    if isinstance(flow, Infeasible):
        _write(args.out, _dump({"feasible": False, "certificate": flow.to_json()}))
        return EXIT_INFEASIBLE
    out = {"feasible": True, "flow": flow.to_json()}
    if all(a.lower.denominator == 1 and a.upper.denominator == 1 for a in net.arcs):
        out["decomposition"] = [{"weight": format_rational(w), "flow": f.to_json()}
                                for w, f in decompose_integral(net, flow)]
    _write(args.out, _dump(out))
    return EXIT_OK


def cmd_mmhsc(args) -> int:
    try:
        with open(args.instance) as fh:
            ci, ys = load_covering(json.load(fh))
        if args.mode == "near-feasible":
            res = round_near_feasible(ci, ys)
            _write(args.out, _dump(res.to_json(ci)))
            return EXIT_OK if res.audit["within_bound"] else EXIT_CHECK
        plan = plan_min_cost(ci, ys)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    runs = []
    ok = True
    for k in range(max(1, args.trials)):
        res = plan.sample(lambda u, k=k: substream(args.seed, k * len(ci.vertices) + u))
        ok = ok and res.audit["covering_ok"] and res.audit["capacity_within_augmented"]
        runs.append(res.to_json(ci))
    out = runs[0] if args.trials <= 1 else {"runs": runs}
    _write(args.out, _dump(out))
    return EXIT_OK if ok else EXIT_CHECK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="online-apportionment",
                                description="Exact online apportionment tools.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a method on an instance")
    s.add_argument("--method", choices=["greedy", "grimmett", "netflow"], required=True)
    s.add_argument("--instance", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--trials", type=int, default=1)
    s.add_argument("--out", required=True)
    s.add_argument("--float-report", action="store_true")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("adversary", help="generate an adaptive vote stream")
    a.add_argument("--n", type=int, required=True)
    a.add_argument("--epsilon", type=_rational, default=Fraction(1, 20))
    a.add_argument("--target-method", choices=["greedy", "netflow", "grimmett"], default="greedy")
    a.add_argument("--schedule", choices=["auto", "figure3"], default="auto")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", required=True)
    a.add_argument("--float-report", action="store_true")
    a.set_defaults(func=cmd_adversary)

    v = sub.add_parser("verify", help="audit a trajectory CSV")
    v.add_argument("--trajectory", required=True)
    v.add_argument("--alpha", type=_rational)
    v.add_argument("--global-quota", action="store_true",
                   help="also require global quota at every prefix")
    v.set_defaults(func=cmd_verify)

    o = sub.add_parser("offline", help="offline lottery over global-quota allocations")
    o.add_argument("--instance", required=True)
    o.add_argument("--out")
    o.set_defaults(func=cmd_offline)

    d = sub.add_parser("decompose", help="hypersimplex or integral flow decomposition")
    d.add_argument("--vector")
    d.add_argument("--house", type=int)
    d.add_argument("--network")
    d.add_argument("--value", type=_rational)
    d.add_argument("--out")
    d.set_defaults(func=cmd_decompose)

    m = sub.add_parser("mmhsc", help="round a fractional covering solution online")
    m.add_argument("mode", choices=["near-feasible", "min-cost"])
    m.add_argument("--instance", required=True)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--trials", type=int, default=1)
    m.add_argument("--out")
    m.set_defaults(func=cmd_mmhsc)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, GreedyInfeasible, CoveringInputError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
