"""Command-line interface.

Subcommands: validate, stationary, project, integrate, simulate,
check-balance, classes.  Inputs ending in ``.json`` are hypergraph files;
anything else is a coordinate tensor file.  Exit codes: 0 success, 1
validation failure, 2 numerical failure, 3 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io as mio
from .ctmc import (
    RateTensor,
    build_generator,
    build_laplacian,
    check_detailed_balance,
    ct_closed_classes,
    integrate_exact,
    integrate_mean_field,
    interaction_graph,
    predict_limit,
    stationary_ct,
)
from .errors import (
    IntegrationError,
    IterationLimitError,
    MemwalkError,
    StructuralError,
    ValidationError,
)
from .hypergraph import DirectedHypergraph, classical_walk_stationary, project, to_rate, to_transition
from .markov import (
    JointDistribution,
    TransitionTensor,
    marginalize,
    stationary_joint,
    unfolded_chain,
)
from .simulate import run_continuous_ensemble, run_discrete_ensemble, total_variation

__all__ = ["main"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="memwalk",
        description=(
            "Analyze Markov chains with finite memory and memory-aware "
            "random walks on directed hypergraphs."
        ),
        epilog=(
            "Reproduction recipes: "
            "(1) two-triangle hypergraph, per-class memory-walk stationaries: "
            "memwalk stationary --input data/two_triangles.json --discrete --all; "
            "(2) its memoryless projected-graph stationary: "
            "memwalk stationary --input data/two_triangles.json --project; "
            "(3) exact vs closed dynamics on the all-ones rate tensor: "
            "memwalk integrate --input data/allones_rate.coo --both "
            "--x0 data/allones_x0.txt --t-end 5 --dt 1e-3 --output out"
        ),
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", required=True, help="tensor (.coo/.txt) or hypergraph (.json) file")
    common.add_argument("--output", default=None, help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument(
        "--policy",
        choices=("strict", "restrict", "uniform"),
        default=None,
        help="dangling-history policy (default: strict for tensors, restrict for hypergraphs)",
    )
    common.add_argument("--seed", type=int, default=0, help="RNG seed (unsigned 64-bit)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check an input file and report its structure")
    p.add_argument("--continuous", action="store_true", help="treat a tensor input as rates (no stochasticity check)")

    p = sub.add_parser("stationary", parents=[common], help="stationary distributions and eigen summary")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--discrete", action="store_true", help="memory-walk stationary (transition tensor)")
    mode.add_argument("--continuous", action="store_true", help="continuous-time stationary (rate tensor)")
    mode.add_argument("--project", action="store_true", help="memoryless walk on the projected graph")
    p.add_argument("--class", dest="class_index", type=int, default=None, help="select one closed class (1-based)")
    p.add_argument("--all", action="store_true", help="report every closed class")
    p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("project", parents=[common], help="projected pairwise graph of a hypergraph")

    p = sub.add_parser("integrate", parents=[common], help="integrate the exact or closed dynamics")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--exact", action="store_true", help="master equation over histories")
    mode.add_argument("--mean-field", action="store_true", help="closed n-dimensional system")
    mode.add_argument("--both", action="store_true", help="both systems; requires --output base path")
    p.add_argument("--x0", default=None, help="initial node distribution file (default: uniform)")
    p.add_argument("--xstar", default=None, help="equilibrium file; adds a Lyapunov column to mean-field output")
    p.add_argument("--t-end", type=float, default=5.0)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--record-every", type=int, default=1)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo walker ensembles")
    p.add_argument("--walkers", type=int, default=1)
    length = p.add_mutually_exclusive_group(required=True)
    length.add_argument("--steps", type=int, default=None, help="discrete-time run length")
    length.add_argument("--t-end", type=float, default=None, help="continuous-time horizon")
    p.add_argument("--burnin", type=int, default=None, help="discarded steps (default: 10%% of steps)")
    p.add_argument(
        "--init",
        action="append",
        default=None,
        help="initial history 'a,b,..' most recent first; repeatable (default: random)",
    )

    p = sub.add_parser("check-balance", parents=[common], help="detailed-balance certificate for a rate tensor")
    p.add_argument("--xstar", required=True, help="candidate equilibrium file")
    p.add_argument("--x0", default=None, help="initial condition for the predicted limit (default mass 1)")

    p = sub.add_parser("classes", parents=[common], help="closed classes of the unfolded chain")
    p.add_argument("--continuous", action="store_true", help="analyze the rate-tensor generator instead")
    return parser


def _load_input(path: str):
    if path.endswith(".json"):
        return "hypergraph", mio.load_hypergraph(path)
    return "tensor", mio.load_dense_tensor(path)


def _transition_from(kind, payload, policy):
    if kind == "hypergraph":
        return to_transition(payload, policy=policy or "restrict")
    return TransitionTensor(payload, policy=policy or "strict")


def _rates_from(kind, payload):
    if kind == "hypergraph":
        return to_rate(payload)
    return RateTensor(payload)


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(output).write_text(text if text.endswith("\n") else text + "\n")


def _fmt_row(values) -> str:
    return ",".join(mio.format_float(v) for v in values)


def _cmd_validate(args) -> int:
    kind, payload = _load_input(args.input)
    lines = []
    if kind == "hypergraph":
        graph: DirectedHypergraph = payload
        lines.append(f"hypergraph with {graph.n} nodes, uniform edge size {graph.k}")
        if graph.undirected_source is not None:
            lines.append(
                f"{len(graph.undirected_source)} hyperedges, "
                f"{graph.num_edges} directed configurations"
            )
        else:
            lines.append(f"{graph.num_edges} directed configurations")
    else:
        tensor = payload
        dims = " ".join(str(d) for d in tensor.shape)
        lines.append(f"tensor of order {tensor.order}, shape {dims}")
    if getattr(args, "continuous", False):
        rates = _rates_from(kind, payload)
        lines.append(f"valid rate tensor; max outflow {mio.format_float(rates.outflow.max())}")
        _emit("\n".join(lines), args.output)
        return 0
    policy = args.policy or ("restrict" if kind == "hypergraph" else "strict")
    T = _transition_from(kind, payload, policy)
    total = T.n ** (T.m - 1)
    lines.append(
        f"valid transition tensor under policy {policy!r}: "
        f"{total - len(T.dangling)} of {total} histories stochastic, "
        f"{len(T.dangling)} dangling"
    )
    if T.policy == "restrict" and T.dangling:
        chain = unfolded_chain(T)
        lines.append(f"restriction keeps {chain.size} realizable histories")
    _emit("\n".join(lines), args.output)
    return 0


def _class_payload(index, support, marginal, period=None, lam2=None, joint=None):
    entry = {
        "index": int(index),
        "support": [int(v) for v in support],
        "marginal": [float(v) for v in marginal],
    }
    if period is not None:
        entry["period"] = int(period)
    if lam2 is not None and np.isfinite(lam2):
        entry["lambda2_modulus"] = float(lam2)
    if joint is not None:
        entry["joint"] = {
            "shape": list(joint.array.shape),
            "vec": [float(v) for v in joint.vec()],
        }
    return entry


def _stationary_rows(entries, n, summary_fields, fmt, output):
    if fmt == "json":
        payload = dict(summary_fields)
        payload["classes"] = entries
        _emit(json.dumps(payload, indent=2), output)
        return
    lines = ["# " + json.dumps(summary_fields)]
    header = ["class", "support"] + [f"x{i}" for i in range(1, n + 1)]
    lines.append(",".join(header))
    for entry in entries:
        support = " ".join(str(v) for v in entry["support"])
        lines.append(f"{entry['index']},{support}," + _fmt_row(entry["marginal"]))
    _emit("\n".join(lines), output)


def _cmd_stationary(args) -> int:
    kind, payload = _load_input(args.input)
    if args.project:
        if kind != "hypergraph":
            raise UsageError("--project needs a hypergraph input")
        graph = project(payload)
        x = classical_walk_stationary(graph)
        entries = [_class_payload(1, range(1, graph.n + 1), x)]
        _stationary_rows(entries, graph.n, {"mode": "project"}, args.format, args.output)
        return 0
    if args.discrete:
        T = _transition_from(kind, payload, args.policy)
        summary = stationary_joint(T, class_index=args.class_index, tol=args.tol)
        fields = {
            "mode": "discrete",
            "lambda1": summary.lambda1,
            "lambda2_modulus": None
            if np.isnan(summary.lambda2_modulus)
            else summary.lambda2_modulus,
            "irreducible": summary.is_irreducible,
            "primitive": summary.is_primitive,
            "residual": None if np.isnan(summary.residual) else summary.residual,
        }
        if args.all:
            entries = [
                _class_payload(
                    i + 1, c.support, marginalize(c.stationary), c.period, c.lambda2_modulus, c.stationary
                )
                for i, c in enumerate(summary.classes)
            ]
        else:
            if summary.stationary is None:
                raise StructuralError(
                    f"chain is reducible with {len(summary.classes)} closed classes; "
                    "pass --all or --class"
                )
            index = args.class_index or 1
            chosen = summary.classes[index - 1] if args.class_index else None
            support = chosen.support if chosen else sorted(
                {v for c in summary.classes for v in c.support}
            )
            entries = [
                _class_payload(
                    index,
                    support,
                    marginalize(summary.stationary),
                    chosen.period if chosen else None,
                    summary.lambda2_modulus,
                    summary.stationary,
                )
            ]
        _stationary_rows(entries, T.n, fields, args.format, args.output)
        return 0
    # continuous
    rates = _rates_from(kind, payload)
    gen = build_generator(rates)
    fields = {"mode": "continuous"}
    if args.all:
        classes = ct_closed_classes(gen, tol=args.tol)
        entries = [
            _class_payload(i + 1, c.support, marginalize(c.stationary), joint=c.stationary)
            for i, c in enumerate(classes)
        ]
    else:
        joint = stationary_ct(gen, class_index=args.class_index, tol=args.tol)
        entries = [
            _class_payload(
                args.class_index or 1,
                sorted(set(np.flatnonzero(marginalize(joint) > 0) + 1)),
                marginalize(joint),
                joint=joint,
            )
        ]
    _stationary_rows(entries, rates.n, fields, args.format, args.output)
    return 0


def _cmd_project(args) -> int:
    kind, payload = _load_input(args.input)
    if kind != "hypergraph":
        raise UsageError("project needs a hypergraph input")
    graph = project(payload)
    x = classical_walk_stationary(graph)
    if args.format == "json":
        payload = {
            "n": graph.n,
            "weights": [[float(v) for v in row] for row in graph.weights],
            "degrees": [float(v) for v in graph.degrees],
            "stationary": [float(v) for v in x],
        }
        _emit(json.dumps(payload, indent=2), args.output)
        return 0
    lines = ["# projected graph: rows are weight-matrix rows; last rows are degrees and stationary"]
    header = ["row"] + [f"w{i}" for i in range(1, graph.n + 1)]
    lines.append(",".join(header))
    for i, row in enumerate(graph.weights, start=1):
        lines.append(f"{i}," + _fmt_row(row))
    lines.append("degrees," + _fmt_row(graph.degrees))
    lines.append("stationary," + _fmt_row(x))
    _emit("\n".join(lines), args.output)
    return 0


def _load_x0(path, n):
    if path is None:
        return np.full(n, 1.0 / n)
    x0 = mio.load_vector(path)
    if x0.size != n:
        raise ValidationError(f"x0 has {x0.size} entries, expected {n}")
    return x0


def _cmd_integrate(args) -> int:
    if args.format == "json":
        raise UsageError("trajectories are emitted as CSV; drop --format json")
    kind, payload = _load_input(args.input)
    rates = _rates_from(kind, payload)
    x0 = _load_x0(args.x0, rates.n)
    xstar = None
    if args.xstar is not None:
        xstar = mio.load_vector(args.xstar)
        if xstar.size != rates.n:
            raise ValidationError(f"xstar has {xstar.size} entries, expected {rates.n}")
    run_exact = args.exact or args.both
    run_mean = args.mean_field or args.both
    if args.both and args.output is None:
        raise UsageError("--both writes two files; pass --output as a base path")
    records = {}
    if run_exact:
        if abs(x0.sum() - 1.0) > 1e-9:
            raise ValidationError("exact integration needs a probability x0 (sum 1)")
        gen = build_generator(rates)
        joint0 = JointDistribution.from_product(x0, rates.m - 1)
        records["exact"] = integrate_exact(
            gen, joint0, args.t_end, dt=args.dt, record_every=args.record_every
        )
    if run_mean:
        lap = build_laplacian(rates)
        records["meanfield"] = integrate_mean_field(
            lap, x0, args.t_end, dt=args.dt, xstar=xstar, record_every=args.record_every
        )
    if args.both:
        base = Path(args.output)
        paths = {}
        for name, record in records.items():
            target = base.with_name(base.name + f".{name}.csv")
            mio.write_trajectory_csv(record, target)
            paths[name] = str(target)
        gap = float(
            np.max(np.abs(records["exact"].states - records["meanfield"].states))
        )
        sys.stdout.write(
            f"wrote {paths['exact']} and {paths['meanfield']}; "
            f"max marginal gap {mio.format_float(gap)}\n"
        )
        return 0
    record = next(iter(records.values()))
    if args.output is None:
        mio.write_trajectory_csv(record, sys.stdout)
    else:
        mio.write_trajectory_csv(record, args.output)
    return 0


def _parse_inits(raw):
    if raw is None:
        return None
    out = []
    for item in raw:
        try:
            out.append(tuple(int(tok) for tok in item.replace(",", " ").split()))
        except ValueError:
            raise UsageError(f"cannot parse --init {item!r}") from None
    return out


def _cmd_simulate(args) -> int:
    kind, payload = _load_input(args.input)
    inits = _parse_inits(args.init)
    params = {"walkers": args.walkers, "seed": args.seed}
    analytic = None
    if args.steps is not None:
        T = _transition_from(kind, payload, args.policy)
        result = run_discrete_ensemble(
            T, inits, args.steps, walkers=args.walkers, burnin=args.burnin, seed=args.seed
        )
        params.update({"mode": "discrete", "steps": args.steps, "burnin": args.burnin})
        if T.n ** (T.m - 1) <= 4096:
            try:
                init_joint = None
                if inits:
                    vecs = [JointDistribution.point(h, T.n).array for h in inits]
                    init_joint = JointDistribution(np.mean(vecs, axis=0))
                summary = stationary_joint(T, init=init_joint)
                if summary.stationary is not None:
                    analytic = marginalize(summary.stationary)
            except MemwalkError:
                analytic = None
    else:
        rates = _rates_from(kind, payload)
        result = run_continuous_ensemble(
            rates, inits, args.t_end, walkers=args.walkers, seed=args.seed
        )
        params.update({"mode": "continuous", "t_end": args.t_end})
        if rates.n ** (rates.m - 1) <= 4096:
            try:
                analytic = marginalize(stationary_ct(build_generator(rates)))
            except MemwalkError:
                analytic = None
    tv = None if analytic is None else total_variation(result.occupation, analytic)
    if args.format == "json":
        payload = {
            "occupation": [float(v) for v in result.occupation],
            "seed": result.seed,
            "params": params,
        }
        if analytic is not None:
            payload["analytic"] = [float(v) for v in analytic]
            payload["tv_distance"] = tv
        _emit(json.dumps(payload, indent=2), args.output)
        return 0
    lines = ["# " + json.dumps(params)]
    lines.append(",".join(["row"] + [f"x{i}" for i in range(1, result.occupation.size + 1)]))
    lines.append("occupation," + _fmt_row(result.occupation))
    if analytic is not None:
        lines.append("analytic," + _fmt_row(analytic))
        lines.append(f"tv_distance,{mio.format_float(tv)}")
    _emit("\n".join(lines), args.output)
    return 0


def _cmd_check_balance(args) -> int:
    kind, payload = _load_input(args.input)
    rates = _rates_from(kind, payload)
    xstar = mio.load_vector(args.xstar)
    if xstar.size != rates.n:
        raise ValidationError(f"xstar has {xstar.size} entries, expected {rates.n}")
    balanced, violation = check_detailed_balance(rates, xstar)
    graph = interaction_graph(rates)
    certificate = {
        "balanced": bool(balanced),
        "max_violation": float(violation),
        "strongly_connected": bool(graph.strongly_connected),
    }
    if balanced and graph.strongly_connected:
        x0 = _load_x0(args.x0, rates.n)
        certificate["predicted_limit"] = [float(v) for v in predict_limit(rates, xstar, x0)]
    _emit(json.dumps(certificate, indent=2), args.output)
    return 0


def _cmd_classes(args) -> int:
    kind, payload = _load_input(args.input)
    if getattr(args, "continuous", False):
        rates = _rates_from(kind, payload)
        classes = ct_closed_classes(build_generator(rates))
        n = rates.n
    else:
        T = _transition_from(kind, payload, args.policy)
        summary = stationary_joint(T)
        classes = summary.classes
        n = T.n
    entries = [
        {
            "index": i + 1,
            "support": list(c.support),
            "size": len(c.histories),
            "period": c.period,
            "marginal": [float(v) for v in marginalize(c.stationary)],
        }
        for i, c in enumerate(classes)
    ]
    if args.format == "json":
        _emit(json.dumps({"classes": entries}, indent=2), args.output)
        return 0
    lines = [",".join(["class", "support", "size", "period"] + [f"x{i}" for i in range(1, n + 1)])]
    for e in entries:
        support = " ".join(str(v) for v in e["support"])
        lines.append(f"{e['index']},{support},{e['size']},{e['period']}," + _fmt_row(e["marginal"]))
    _emit("\n".join(lines), args.output)
    return 0


_HANDLERS = {
    "validate": _cmd_validate,
    "stationary": _cmd_stationary,
    "project": _cmd_project,
    "integrate": _cmd_integrate,
    "simulate": _cmd_simulate,
    "check-balance": _cmd_check_balance,
    "classes": _cmd_classes,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 3
    except (IterationLimitError, IntegrationError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 2
    except (MemwalkError, OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
