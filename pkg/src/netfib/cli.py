"""Command line interface.

Exit codes: 0 success / property holds, 1 property fails, 2 bad input.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dynamics import (IntegrationError, IntegratorConfig, check_trajectory_semiconjugacy,
                       check_vectorfield_conjugacy, rk4_integrate)
from .graphs import (GraphError, InvalidMorphismError, MissingMappingError, NotAFibrationError,
                     fibration_witness)
from .io import (FormatError, load_morphism, load_network, load_point, network_to_dict,
                 partition_from_dict, quotient_to_dict, read_json, trajectory_csv,
                 witness_to_dict, write_json)
from .network import ShapeError, check_network_morphism
from .open_systems import SignatureMismatchError, family_violations, interconnect, pullback_family
from .quotients import (DimsNotConstantError, InconsistentFamilyError, NotBalancedError,
                        minimal_base, pushforward_family, quotient_network)

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2))


def _network(path, need_dynamics=False):
    net, fam = load_network(path)
    if need_dynamics and fam is None:
        raise InputError(f"{path}: no dynamics given")
    return net, fam


def _morphism(args, dom, cod):
    phi = load_morphism(args.map, dom.graph, cod.graph)
    problems = check_network_morphism(phi, dom, cod)
    if problems:
        raise InputError("; ".join(problems))
    return phi


def cmd_validate(args) -> int:
    net, fam = _network(args.network)
    report = {"nodes": len(net.graph.nodes), "edges": len(net.graph.edges),
              "dynamics": fam is not None, "violations": []}
    if fam is not None:
        report["violations"] = [str(p) for p in family_violations(net, fam)]
    _emit(report)
    return EXIT_OK if not report["violations"] else EXIT_INPUT


def cmd_fibration(args) -> int:
    dom, _ = _network(args.domain)
    cod, _ = _network(args.codomain)
    phi = _morphism(args, dom, cod)
    try:
        witness = fibration_witness(phi)
    except NotAFibrationError as exc:
        _emit({"fibration": False, "node": exc.node, "edge": exc.edge, "lifts": list(exc.lifts)})
        return EXIT_FAIL
    _emit({"fibration": True, "witness": witness_to_dict(witness)})
    return EXIT_OK


def _fibration_setup(args):
    dom, _ = _network(args.domain)
    cod, w = _network(args.codomain, need_dynamics=True)
    phi = _morphism(args, dom, cod)
    return dom, cod, w, phi


def cmd_pullback(args) -> int:
    dom, cod, w, phi = _fibration_setup(args)
    try:
        witness = fibration_witness(phi)
    except NotAFibrationError as exc:
        print(f"not a fibration: {exc}", file=sys.stderr)
        return EXIT_FAIL
    pulled = pullback_family(phi, witness, w, dom, cod)
    write_json(args.out, network_to_dict(dom, pulled))
    return EXIT_OK


def cmd_simulate(args) -> int:
    net, fam = _network(args.network, need_dynamics=True)
    x0 = load_point(args.x0, net)
    cfg = IntegratorConfig(args.h, args.t)
    traj = rk4_integrate(interconnect(net, fam), x0, cfg)
    Path(args.out).write_text(trajectory_csv(net, traj), encoding="utf-8")
    return EXIT_OK


def cmd_conjugacy(args) -> int:
    dom, cod, w, phi = _fibration_setup(args)
    try:
        report = check_vectorfield_conjugacy(phi, None, dom, cod, w, args.samples, args.seed)
    except NotAFibrationError as exc:
        print(f"not a fibration: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _emit({"samples": report.samples, "max_residual": report.max_residual,
           "residual_per_node": dict(sorted(report.residual_per_node.items())),
           "seed": report.seed, "tolerance": args.tol})
    return EXIT_OK if report.max_residual <= args.tol else EXIT_FAIL


def cmd_semiconjugacy(args) -> int:
    dom, cod, w, phi = _fibration_setup(args)
    x0 = load_point(args.x0, cod)
    try:
        report = check_trajectory_semiconjugacy(phi, None, dom, cod, w, x0, IntegratorConfig(args.h, args.t))
    except NotAFibrationError as exc:
        print(f"not a fibration: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _emit({"max_deviation": report.max_deviation, "tolerance": args.tol})
    return EXIT_OK if report.max_deviation <= args.tol else EXIT_FAIL


def _write_quotient(args, net, fam, qr) -> int:
    base_family = None
    if fam is not None and not args.graph_only:
        try:
            base_family = pushforward_family(qr, fam, net, args.samples, args.tol, args.seed)
        except InconsistentFamilyError as exc:
            print(f"dynamics do not descend to the quotient: {exc}", file=sys.stderr)
            return EXIT_FAIL
    write_json(args.out, quotient_to_dict(qr, base_family))
    if args.map_out:
        write_json(args.map_out, quotient_to_dict(qr)["projection"])
    return EXIT_OK


def cmd_minbase(args) -> int:
    net, fam = _network(args.network)
    return _write_quotient(args, net, fam, minimal_base(net))


def cmd_quotient(args) -> int:
    net, fam = _network(args.network)
    partition = partition_from_dict(read_json(args.partition), net)
    try:
        qr = quotient_network(net, partition)
    except NotBalancedError as exc:
        _emit({"balanced": False, "pair": list(exc.pair)})
        return EXIT_FAIL
    return _write_quotient(args, net, fam, qr)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netfib", description="Dynamics on networks and graph fibrations")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check a network file")
    s.add_argument("--network", required=True)
    s.set_defaults(func=cmd_validate)

    def fib_args(s):
        s.add_argument("--domain", required=True)
        s.add_argument("--codomain", required=True)
        s.add_argument("--map", required=True)

    s = sub.add_parser("fibration", help="test whether a map of graphs is a fibration")
    fib_args(s)
    s.set_defaults(func=cmd_fibration)

    s = sub.add_parser("pullback", help="pull codomain dynamics back to the domain")
    fib_args(s)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_pullback)

    s = sub.add_parser("simulate", help="integrate a network with RK4 and write CSV")
    s.add_argument("--network", required=True)
    s.add_argument("--x0", required=True)
    s.add_argument("--h", type=float, required=True)
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("conjugacy", help="sample the vector-field commuting square")
    fib_args(s)
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tol", type=float, default=1e-12)
    s.set_defaults(func=cmd_conjugacy)

    s = sub.add_parser("semiconjugacy", help="compare trajectories upstairs and downstairs")
    fib_args(s)
    s.add_argument("--x0", required=True, help="initial condition on the codomain")
    s.add_argument("--h", type=float, required=True)
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--tol", type=float, default=1e-10)
    s.set_defaults(func=cmd_semiconjugacy)

    def quotient_args(s):
        s.add_argument("--out", required=True)
        s.add_argument("--map-out", help="also write the projection as a morphism file")
        s.add_argument("--graph-only", action="store_true", help="do not push dynamics down")
        s.add_argument("--samples", type=int, default=64)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--tol", type=float, default=1e-9)

    s = sub.add_parser("minbase", help="coarsest balanced partition and minimal base")
    s.add_argument("--network", required=True)
    quotient_args(s)
    s.set_defaults(func=cmd_minbase)

    s = sub.add_parser("quotient", help="quotient by a given partition")
    s.add_argument("--network", required=True)
    s.add_argument("--partition", required=True)
    quotient_args(s)
    s.set_defaults(func=cmd_quotient)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except IntegrationError as exc:
        print(f"integration aborted: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (FormatError, InputError, ShapeError, SignatureMismatchError, MissingMappingError,
            InvalidMorphismError, DimsNotConstantError, GraphError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
