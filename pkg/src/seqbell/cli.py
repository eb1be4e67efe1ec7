"""Command-line front end.

Usage:
    seqbell table --alices 2 --bobs 2 --epsilon 0.5577 --theta-offset 0.2999
    seqbell simulate -j 2 -k 1 --format json
    seqbell compare --alices 3 --bobs 3 --epsilon 0.27665 --theta-offset 0.6219 --format csv
    seqbell verify
    seqbell optimize --alices 2 --bobs 2
    seqbell gammas --epsilon 0.5577 --theta-offset 0.2999 -n 2
    seqbell visibility

Exit codes: 0 success, 1 internal error or failed verification, 2 invalid input.
"""

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .errors import SeqBellError
from .gammaseq import INFEASIBLE, gamma_sequence, is_positive_increasing
from .measurements import (
    KRAUS_TOL,
    POVM_TOL,
    SideParameters,
    alice_povm,
    averaged_party_channel,
    bob_povm,
    luders_instrument,
)
from .optimizer import optimize_symmetric
from .simulator import (
    ScenarioConfig,
    compare_closed_form,
    critical_visibility,
    empirical_distribution,
    min_closed_form,
    sample_counts,
    simulate_S,
)
from .witness import LHV_BOUND, JointDistribution, chsh_prob_lhv_max, closed_form_table, lhv_bound, witness_from_joint

DEFAULT_EPSILON = 0.5577
DEFAULT_THETA_OFFSET = 0.2999


class CliError(SeqBellError):
    pass


# argument parsing


def _angle_group(p, suffix="", default_offset=DEFAULT_THETA_OFFSET):
    g = p.add_mutually_exclusive_group()
    g.add_argument(f"--theta{suffix}", type=float, default=None, help="absolute angle in radians")
    g.add_argument(f"--theta{suffix}-offset", type=float, default=None,
                   help="angle given as pi/4 - OFFSET")


def _add_params(p, pair_flags=True):
    p.add_argument("-J", "--alices", type=int, default=2)
    p.add_argument("-K", "--bobs", type=int, default=2)
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    _angle_group(p)
    p.add_argument("--epsilon2", type=float, default=None, help="side-2 epsilon (default: same as side 1)")
    _angle_group(p, "2")
    p.add_argument("--gamma", type=float, nargs="+", default=None,
                   help="explicit side-1 sharpnesses, overriding the recursion")
    p.add_argument("--gamma2", type=float, nargs="+", default=None,
                   help="explicit side-2 sharpnesses (default: same as --gamma)")
    p.add_argument("--visibility", type=float, default=1.0)


def _add_output(p, formats=("pretty", "csv", "json")):
    p.add_argument("--format", choices=formats, default="pretty")
    p.add_argument("-o", "--output", default=None, help="also write the rendered output to this file")


def build_parser():
    parser = argparse.ArgumentParser(prog="seqbell", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("table", help="closed-form S^(j,k) table")
    _add_params(p)
    _add_output(p)

    p = sub.add_parser("simulate", help="exact simulation of one (Alice^(j), Bob^(k)) pair")
    _add_params(p)
    p.add_argument("-j", "--alice-index", type=int, default=1)
    p.add_argument("-k", "--bob-index", type=int, default=1)
    p.add_argument("--reference", action="store_true", help="use the full 16x16 state")
    p.add_argument("--shots", type=int, default=0, help="also run a Monte Carlo check with this many runs")
    p.add_argument("--seed", type=int, default=0)
    _add_output(p)

    p = sub.add_parser("compare", help="closed form versus exact simulation for every pair")
    _add_params(p)
    p.add_argument("--reference", action="store_true")
    _add_output(p)

    p = sub.add_parser("verify", help="POVM validity, local bound, and sharpness-sequence checks")
    _add_params(p)
    _add_output(p, ("pretty", "json"))

    p = sub.add_parser("optimize", help="search (epsilon, theta) maximizing the weakest violation")
    p.add_argument("-J", "--alices", type=int, default=2)
    p.add_argument("-K", "--bobs", type=int, default=2)
    p.add_argument("--budget", type=int, default=500)
    p.add_argument("--grid", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--objective", choices=("min", "mean", "s11"), default="min")
    p.add_argument("--asymmetric", action="store_true")
    _add_output(p)

    p = sub.add_parser("gammas", help="print the sharpness sequence")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    _angle_group(p)
    p.add_argument("-n", type=int, default=2)
    _add_output(p)

    p = sub.add_parser("visibility", help="critical visibility below which some pair stops violating")
    _add_params(p)
    p.add_argument("--tol", type=float, default=1e-12)
    _add_output(p, ("pretty", "json"))
    return parser


def _theta(args, suffix=""):
    absolute = getattr(args, f"theta{suffix}")
    offset = getattr(args, f"theta{suffix}_offset")
    if absolute is not None:
        return absolute
    if offset is not None:
        return math.pi / 4 - offset
    return None


def _sides(args):
    J, K = args.alices, args.bobs
    if J < 1 or K < 1:
        raise CliError("--alices and --bobs must be >= 1")
    e1 = args.epsilon
    t1 = _theta(args)
    t1 = math.pi / 4 - DEFAULT_THETA_OFFSET if t1 is None else t1
    e2 = e1 if args.epsilon2 is None else args.epsilon2
    t2 = _theta(args, "2")
    t2 = t1 if t2 is None else t2
    g1 = args.gamma
    g2 = g1 if args.gamma2 is None else args.gamma2
    n = max(J, K)
    alice = SideParameters(e1, t1, g1) if g1 is not None else SideParameters.from_protocol(e1, t1, n)
    bob = SideParameters(e2, t2, g2) if g2 is not None else SideParameters.from_protocol(e2, t2, n)
    return ScenarioConfig(J, K, alice, bob, args.visibility)


def _params_dict(cfg: ScenarioConfig):
    return {
        "alices": cfg.J,
        "bobs": cfg.K,
        "visibility": cfg.visibility,
        "side1": {"epsilon": cfg.alice.epsilon, "theta": cfg.alice.theta, "gammas": list(cfg.alice.gammas)},
        "side2": {"epsilon": cfg.bob.epsilon, "theta": cfg.bob.theta, "gammas": list(cfg.bob.gammas)},
    }


# rendering


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def _pretty_table(table, corner="", fmt="{:.2f}"):
    K, J = len(table), len(table[0])
    head = [corner] + [f"Alice({j})" for j in range(1, J + 1)]
    body = [[f"Bob({k})"] + [fmt.format(v) for v in table[k - 1]] for k in range(1, K + 1)]
    widths = [max(len(r[c]) for r in [head] + body) for c in range(J + 1)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in [head] + body]
    return "\n".join(lines) + "\n"


def _scaled(table, v):
    return [[64.0 + v * (s - 64.0) for s in row] for row in table]


def cmd_table(args):
    cfg = _sides(args)
    table = _scaled(closed_form_table(cfg.alice, cfg.bob, cfg.J, cfg.K), cfg.visibility)
    viol = [[s > LHV_BOUND for s in row] for row in table]
    if args.format == "json":
        return _json({"params": _params_dict(cfg), "table": table, "bound": LHV_BOUND, "violations": viol})
    if args.format == "csv":
        return _csv(["j", "k", "S"], [(j, k, table[k - 1][j - 1])
                                      for k in range(1, cfg.K + 1) for j in range(1, cfg.J + 1)])
    return _pretty_table(table, "S") + f"local bound {lhv_bound():g}; every pair violates: {all(map(all, viol))}\n"


def cmd_simulate(args):
    cfg = _sides(args)
    j, k = args.alice_index, args.bob_index
    sim = simulate_S(cfg, j, k, reference=args.reference)
    cf = closed_form_table(cfg.alice, cfg.bob, cfg.J, cfg.K)[k - 1][j - 1]
    cf = 64.0 + cfg.visibility * (cf - 64.0)
    out = {
        "params": _params_dict(cfg),
        "pair": [j, k],
        "simulated": sim.S,
        "pair1_term": sim.pair1_term,
        "pair2_term": sim.pair2_term,
        "closed_form": cf,
        "bound": LHV_BOUND,
        "violation": sim.S > LHV_BOUND,
    }
    if args.shots:
        freq, _ = empirical_distribution(sample_counts(cfg, j, k, args.shots, args.seed))
        out["monte_carlo"] = {"shots": args.shots, "seed": args.seed,
                              "S": witness_from_joint(JointDistribution(freq)).S}
    if args.format == "json":
        return _json(out)
    if args.format == "csv":
        return _csv(["j", "k", "S", "pair1_term", "pair2_term", "closed_form"],
                    [(j, k, sim.S, sim.pair1_term, sim.pair2_term, cf)])
    text = (f"S({j},{k}) simulated   = {sim.S:.6f}  (pair terms {sim.pair1_term:.6f}, {sim.pair2_term:.6f})\n"
            f"S({j},{k}) closed form = {cf:.6f}\n")
    if args.shots:
        text += f"S({j},{k}) Monte Carlo = {out['monte_carlo']['S']:.6f}  ({args.shots} runs, seed {args.seed})\n"
    return text


def cmd_compare(args):
    cfg = _sides(args)
    rep = compare_closed_form(cfg, reference=args.reference)
    if args.format == "csv":
        return _csv(["j", "k", "S", "closed_form", "simulated", "delta"],
                    [(r.j, r.k, r.simulated, r.closed_form, r.simulated, r.delta) for r in rep.rows])
    cf = [[rep.row(j, k).closed_form for j in range(1, cfg.J + 1)] for k in range(1, cfg.K + 1)]
    sim = [[rep.row(j, k).simulated for j in range(1, cfg.J + 1)] for k in range(1, cfg.K + 1)]
    if args.format == "json":
        return _json({
            "params": _params_dict(cfg),
            "table": cf,
            "simulated_table": sim,
            "bound": LHV_BOUND,
            "violations": [[s > LHV_BOUND for s in row] for row in cf],
            "simulated_violations": [[s > LHV_BOUND for s in row] for row in sim],
            "rows": [{"j": r.j, "k": r.k, "closed_form": r.closed_form, "simulated": r.simulated,
                      "delta": r.delta, "pair1_delta": r.pair1_delta, "pair2_delta": r.pair2_delta,
                      "status": r.status} for r in rep.rows],
            "max_abs_deviation": rep.max_abs_deviation,
        })
    lines = [f"{'j':>2} {'k':>2} {'closed form':>12} {'simulated':>12} {'delta':>12}  status"]
    for r in rep.rows:
        lines.append(f"{r.j:>2} {r.k:>2} {r.closed_form:12.6f} {r.simulated:12.6f} {r.delta:12.3e}  {r.status}")
    return "\n".join(lines) + "\n"


def run_verification(cfg: ScenarioConfig):
    """List of (name, passed, detail) for the structural checks."""
    checks = []
    worst_povm, worst_kraus, worst_ch = 0.0, 0.0, 0.0
    ok = True
    try:
        for role, count, build in (("alice", cfg.J, alice_povm), ("bob", cfg.K, bob_povm)):
            for pos in range(1, count + 1):
                povm = build(pos, cfg.alice, cfg.bob)
                for m in (0, 1):
                    for n in (0, 1):
                        total = sum(povm.effect(m, n, p, q) for p in (0, 1) for q in (0, 1))
                        worst_povm = max(worst_povm, float(np.max(np.abs(total - np.eye(4)))))
                instr = luders_instrument(povm)
                worst_kraus = max(worst_kraus, instr.completeness_residual())
                for pair in (1, 2):
                    ch = averaged_party_channel(instr, pair)
                    worst_ch = max(worst_ch, ch.trace_preservation_residual(), ch.unitality_residual())
    except SeqBellError as exc:
        ok = False
        checks.append(("povm-construction", False, str(exc)))
    if ok:
        checks.append(("povm-completeness", worst_povm <= POVM_TOL, f"max residual {worst_povm:.2e}"))
        checks.append(("kraus-completeness", worst_kraus <= KRAUS_TOL, f"max residual {worst_kraus:.2e}"))
        checks.append(("channel-cptp-unital", worst_ch <= POVM_TOL, f"max residual {worst_ch:.2e}"))
    chsh = chsh_prob_lhv_max()
    checks.append(("lhv-chsh-enumeration", chsh == 3 and 32 * chsh == lhv_bound(),
                   f"max over 16 strategies = {chsh}; 32 x {chsh} = {32 * chsh}"))
    monotone = []
    for side in (cfg.alice, cfg.bob):
        seq = gamma_sequence(side.epsilon, side.theta, side.n)
        monotone.append(is_positive_increasing(seq) and all(a < b for a, b in zip(side.gammas, side.gammas[1:])))
    checks.append(("gamma-positive-increasing", all(monotone), f"sides: {monotone}"))
    return checks


def cmd_verify(args):
    cfg = _sides(args)
    checks = run_verification(cfg)
    passed = all(ok for _, ok, _ in checks)
    if args.format == "json":
        text = _json({"params": _params_dict(cfg), "passed": passed,
                      "checks": [{"name": n, "passed": ok, "detail": d} for n, ok, d in checks]})
    else:
        text = "".join(f"{'PASS' if ok else 'FAIL'}  {n}: {d}\n" for n, ok, d in checks)
    return text, (0 if passed else 1)


def cmd_optimize(args):
    res = optimize_symmetric(args.alices, args.bobs, budget=args.budget, seed=args.seed,
                             grid_size=args.grid, objective=args.objective, asymmetric=args.asymmetric)
    out = {
        "params": {"alices": args.alices, "bobs": args.bobs, "budget": args.budget, "grid": args.grid,
                   "seed": args.seed, "objective": args.objective, "asymmetric": args.asymmetric},
        "epsilon": res.epsilon,
        "theta": res.theta,
        "theta_offset": math.pi / 4 - res.theta,
        "epsilon2": res.epsilon2,
        "theta2": res.theta2,
        "min_S": res.min_S,
        "argmin_pair": list(res.argmin_pair),
        "table": [list(r) for r in res.table],
        "bound": LHV_BOUND,
        "violations": [[s > LHV_BOUND for s in r] for r in res.table],
        "evaluations": res.iterations,
    }
    if args.format == "json":
        return _json(out)
    if args.format == "csv":
        return _csv(["epsilon", "theta", "epsilon2", "theta2", "min_S", "j", "k"],
                    [(res.epsilon, res.theta, res.epsilon2 if res.epsilon2 is not None else "",
                      res.theta2 if res.theta2 is not None else "", res.min_S, *res.argmin_pair)])
    head = f"epsilon = {res.epsilon:.5f}, theta = pi/4 - {math.pi / 4 - res.theta:.5f}"
    if res.epsilon2 is not None:
        head += f"; side 2: epsilon = {res.epsilon2:.5f}, theta = pi/4 - {math.pi / 4 - res.theta2:.5f}"
    return (head + f"\nmin S = {res.min_S:.6f} at (j, k) = {res.argmin_pair} "
            f"after {res.iterations} evaluations\n" + _pretty_table([list(r) for r in res.table], "S"))


def cmd_gammas(args):
    theta = _theta(args)
    theta = math.pi / 4 - DEFAULT_THETA_OFFSET if theta is None else theta
    seq = gamma_sequence(args.epsilon, theta, args.n)
    vals = [None if v is INFEASIBLE else v for v in seq.values]
    if args.format == "json":
        return _json({"params": {"epsilon": args.epsilon, "theta": theta, "n": args.n},
                      "gammas": vals, "feasible_count": seq.feasible_count})
    if args.format == "csv":
        return _csv(["index", "gamma"], [(i, "infeasible" if v is None else v) for i, v in enumerate(vals, 1)])
    return "".join(f"gamma_{i} = {'infeasible' if v is None else format(v, '.4f')}\n"
                   for i, v in enumerate(vals, 1))


def cmd_visibility(args):
    cfg = _sides(args)
    v = critical_visibility(cfg, args.tol)
    s_min, pair = min_closed_form(cfg)
    if args.format == "json":
        return _json({"params": _params_dict(cfg), "critical_visibility": v, "S_min": s_min,
                      "argmin_pair": list(pair)})
    return f"critical visibility = {v:.6f} (weakest pair {pair}, S = {s_min:.4f})\n"


COMMANDS = {
    "table": cmd_table,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "verify": cmd_verify,
    "optimize": cmd_optimize,
    "gammas": cmd_gammas,
    "visibility": cmd_visibility,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        result = COMMANDS[args.command](args)
    except SeqBellError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    text, code = result if isinstance(result, tuple) else (result, 0)
    sys.stdout.write(text)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
