"""JSON network/morphism/partition files and trajectory CSV.

Network file::

    {"nodes": [{"id": "a", "dim": 1, "space": "euclidean",
                "dynamics": ["-x[0]"], "params": {}}, ...],
     "edges": [{"id": "e1", "src": "a", "tgt": "b"}, ...]}

``dynamics`` may be omitted on every node (a bare network). A node may carry
``"slots": [edge ids]`` to bind its input slots to in-edges in a
non-canonical order; without it slot ``s`` is the ``s``-th in-edge by id.

Morphism file: ``{"nodes": {dom: cod}, "edges": {dom: cod}}``.
Initial condition file: ``{"node": [numbers]}``.
Partition file: ``{"blocks": [[ids], ...]}`` or a bare list of blocks.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import dsl
from .dsl import SystemSignature
from .graphs import DirectedMultigraph, GraphMorphism, validate_graph
from .network import EUCLIDEAN, NetworkOfManifolds
from .open_systems import ControlFamily, OpenSystem, family_violations
from .quotients import NodePartition, QuotientResult


class FormatError(ValueError):
    """A file is malformed or violates the schema."""


def read_json(path) -> Any:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _expect(cond: bool, msg: str) -> None:
    if not cond:
        raise FormatError(msg)


def _ident(v, what: str) -> str:
    _expect(isinstance(v, str) and v != "", f"{what} must be a non-empty string, got {v!r}")
    return v


def network_from_dict(doc: Mapping) -> tuple[NetworkOfManifolds, ControlFamily | None]:
    """Build the network and (if dynamics are present) its control family."""
    _expect(isinstance(doc, Mapping), "network file must be a JSON object")
    _expect(set(doc) <= {"nodes", "edges"}, f"unknown top-level keys {sorted(set(doc) - {'nodes', 'edges'})}")
    nodes = doc.get("nodes")
    edges = doc.get("edges", [])
    _expect(isinstance(nodes, list), '"nodes" must be a list')
    _expect(isinstance(edges, list), '"edges" must be a list')

    dims, kinds, raw = {}, {}, {}
    for k, n in enumerate(nodes):
        _expect(isinstance(n, Mapping), f"nodes[{k}] must be an object")
        a = _ident(n.get("id"), f"nodes[{k}].id")
        _expect(a not in dims, f"duplicate node id {a!r}")
        d = n.get("dim")
        _expect(isinstance(d, int) and not isinstance(d, bool) and d >= 1,
                f"node {a!r}: dim must be a positive integer")
        _expect("space" in n, f'node {a!r}: "space" is required')
        _expect(n["space"] == EUCLIDEAN, f'node {a!r}: unsupported space {n["space"]!r}')
        unknown = set(n) - {"id", "dim", "space", "dynamics", "params", "slots"}
        _expect(not unknown, f"node {a!r}: unknown keys {sorted(unknown)}")
        dims[a], kinds[a], raw[a] = d, n["space"], n

    triples, seen = [], set()
    for k, e in enumerate(edges):
        _expect(isinstance(e, Mapping), f"edges[{k}] must be an object")
        eid = _ident(e.get("id"), f"edges[{k}].id")
        _expect(eid not in seen, f"duplicate edge id {eid!r}")
        seen.add(eid)
        triples.append((eid, _ident(e.get("src"), f"edge {eid!r} src"), _ident(e.get("tgt"), f"edge {eid!r} tgt")))
    graph = DirectedMultigraph.from_edges(dims, triples)
    problems = validate_graph(graph)
    _expect(not problems, "; ".join(problems))
    net = NetworkOfManifolds(graph, dims, kinds)

    with_dyn = [a for a in dims if "dynamics" in raw[a]]
    if not with_dyn:
        return net, None
    _expect(len(with_dyn) == len(dims),
            f"dynamics missing on nodes {sorted(set(dims) - set(with_dyn))}")
    systems, slots = {}, {}
    for a in sorted(dims):
        n = raw[a]
        exprs = n["dynamics"]
        _expect(isinstance(exprs, list) and all(isinstance(s, str) for s in exprs),
                f"node {a!r}: dynamics must be a list of strings")
        _expect(len(exprs) == dims[a], f"node {a!r}: {len(exprs)} dynamics expressions for dim {dims[a]}")
        params = n.get("params", {})
        _expect(isinstance(params, Mapping) and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in params.values()),
            f"node {a!r}: params must map names to numbers")
        bound = n.get("slots")
        if bound is None:
            bound = list(graph.in_edges(a))
        _expect(isinstance(bound, list) and sorted(bound) == list(graph.in_edges(a)),
                f"node {a!r}: slots must list the in-edges {list(graph.in_edges(a))}")
        body = []
        for i, s in enumerate(exprs):
            try:
                body.append(dsl.parse(s))
            except dsl.DslSyntaxError as exc:
                raise FormatError(f"node {a!r}, dynamics[{i}]: {exc}") from None
        sig = SystemSignature(dims[a], tuple(dims[graph.src[e]] for e in bound),
                              {k: float(v) for k, v in params.items()})
        systems[a] = OpenSystem(sig, tuple(body), tuple(exprs))
        slots[a] = tuple(bound)
    family = ControlFamily(systems, slots)
    problems = family_violations(net, family)
    _expect(not problems, "; ".join(str(p) for p in problems))
    return net, family


def load_network(path) -> tuple[NetworkOfManifolds, ControlFamily | None]:
    try:
        return network_from_dict(read_json(path))
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def network_to_dict(net: NetworkOfManifolds, family: ControlFamily | None = None) -> dict:
    g = net.graph
    nodes = []
    for a in sorted(g.nodes):
        n: dict[str, Any] = {"id": a, "dim": net.dims[a], "space": net.kind(a)}
        if family is not None:
            sys_ = family.systems[a]
            n["dynamics"] = sys_.texts()
            n["params"] = dict(sys_.params)
            if tuple(family.slots[a]) != g.in_edges(a):
                n["slots"] = list(family.slots[a])
        nodes.append(n)
    edges = [{"id": e, "src": s, "tgt": t} for e, s, t in g.edge_triples()]
    return {"nodes": nodes, "edges": edges}


def morphism_from_dict(doc: Mapping, domain: DirectedMultigraph, codomain: DirectedMultigraph) -> GraphMorphism:
    _expect(isinstance(doc, Mapping) and isinstance(doc.get("nodes"), Mapping)
            and isinstance(doc.get("edges", {}), Mapping),
            'morphism file must be {"nodes": {...}, "edges": {...}}')
    node_map, edge_map = dict(doc["nodes"]), dict(doc.get("edges", {}))
    missing = sorted(domain.nodes - set(node_map))
    _expect(not missing, f"node map is not defined on {missing}")
    missing = sorted(domain.edges - set(edge_map))
    _expect(not missing, f"edge map is not defined on {missing}")
    extra = sorted(set(node_map) - domain.nodes) + sorted(set(edge_map) - domain.edges)
    _expect(not extra, f"map mentions unknown domain ids {extra}")
    return GraphMorphism(domain, codomain, node_map, edge_map)


def morphism_to_dict(phi: GraphMorphism) -> dict:
    return {"nodes": {a: phi.node_map[a] for a in sorted(phi.node_map)},
            "edges": {e: phi.edge_map[e] for e in sorted(phi.edge_map)}}


def load_morphism(path, domain: DirectedMultigraph, codomain: DirectedMultigraph) -> GraphMorphism:
    try:
        return morphism_from_dict(read_json(path), domain, codomain)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def point_from_dict(doc: Mapping, net: NetworkOfManifolds) -> dict[str, np.ndarray]:
    _expect(isinstance(doc, Mapping), "initial condition must be a JSON object")
    missing = sorted(net.graph.nodes - set(doc))
    _expect(not missing, f"initial condition missing for nodes {missing}")
    extra = sorted(set(doc) - net.graph.nodes)
    _expect(not extra, f"initial condition for unknown nodes {extra}")
    out = {}
    for a, v in doc.items():
        _expect(isinstance(v, list) and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in v),
                f"node {a!r}: initial condition must be a list of numbers")
        _expect(len(v) == net.dims[a], f"node {a!r}: expected {net.dims[a]} numbers, got {len(v)}")
        out[a] = np.array(v, dtype=float)
    return out


def load_point(path, net: NetworkOfManifolds) -> dict[str, np.ndarray]:
    try:
        return point_from_dict(read_json(path), net)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def partition_from_dict(doc, net: NetworkOfManifolds) -> NodePartition:
    blocks = doc.get("blocks") if isinstance(doc, Mapping) else doc
    _expect(isinstance(blocks, list) and all(isinstance(b, list) for b in blocks),
            'partition must be a list of blocks or {"blocks": [...]}')
    try:
        return NodePartition.from_blocks(blocks, net.graph.nodes)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def quotient_to_dict(qr: QuotientResult, family: ControlFamily | None = None) -> dict:
    return {
        "base": network_to_dict(qr.base, family),
        "projection": morphism_to_dict(qr.projection),
        "partition": [list(b) for b in qr.partition.blocks],
        "witness": witness_to_dict(qr.witness),
    }


def witness_to_dict(witness) -> dict:
    return {a: {e2: witness[a][e2] for e2 in sorted(witness[a])} for a in sorted(witness.lifts)}


def format_float(v: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return format(float(v), ".17g")


def trajectory_csv(net: NetworkOfManifolds, traj) -> str:
    """Header ``t,<node>.<i>,...`` with nodes sorted by id; one row per state."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    order = sorted(net.dims)
    w.writerow(["t"] + [f"{a}.{i}" for a in order for i in range(net.dims[a])])
    for t, x in zip(traj.times, traj.states):
        w.writerow([format_float(t)] + [format_float(c) for a in order for c in x[a]])
    return buf.getvalue()


def read_trajectory_csv(text: str) -> tuple[list[str], np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    return header, np.array([[float(c) for c in r] for r in body]).reshape(len(body), len(header))


__all__ = [
    "FormatError", "read_json", "write_json", "network_from_dict", "network_to_dict",
    "load_network", "morphism_from_dict", "morphism_to_dict", "load_morphism",
    "point_from_dict", "load_point", "partition_from_dict", "quotient_to_dict",
    "witness_to_dict", "format_float", "trajectory_csv", "read_trajectory_csv",
]
