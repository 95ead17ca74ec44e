"""Finite directed multigraphs, graph morphisms, fibrations and input trees.

Graphs may have loops and parallel edges. Nodes and edges are named by
strings. Everything here is immutable once built; constructors do not
validate, so malformed objects can be handed to the ``validate_*``
functions, which report problems instead of raising.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

__all__ = [
    "DirectedMultigraph",
    "GraphMorphism",
    "InputTree",
    "FibrationWitness",
    "GraphError",
    "UnknownNodeError",
    "MissingMappingError",
    "DomainMismatchError",
    "InvalidMorphismError",
    "NotAFibrationError",
    "InvalidWitnessError",
    "validate_graph",
    "validate_morphism",
    "identity",
    "compose",
    "fibration_witness",
    "is_fibration",
    "verify_witness",
    "input_tree",
    "induced_input_map",
]


class GraphError(Exception):
    """Base class for graph-level errors."""


class UnknownNodeError(GraphError, KeyError):
    def __init__(self, node):
        super().__init__(node)
        self.node = node

    def __str__(self):
        return f"unknown node {self.node!r}"


class MissingMappingError(GraphError):
    def __init__(self, kind: str, missing: list[str]):
        self.kind = kind
        self.missing = missing
        super().__init__(f"{kind} map is not defined on {', '.join(map(repr, missing))}")


class DomainMismatchError(GraphError):
    pass


class InvalidMorphismError(GraphError):
    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


class InvalidWitnessError(GraphError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


class NotAFibrationError(GraphError):
    """Some codomain edge into ``node_map(node)`` has zero or several lifts into ``node``."""

    def __init__(self, node: str, edge: str, lifts: tuple[str, ...]):
        self.node = node
        self.edge = edge
        self.lifts = lifts
        super().__init__(
            f"edge {edge!r} into the image of node {node!r} has {len(lifts)} lifts"
            + (f" ({', '.join(lifts)})" if lifts else "")
        )


@dataclass(frozen=True, eq=False)
class DirectedMultigraph:
    """A finite directed multigraph ``src, tgt: edges -> nodes``.

    Build one with :meth:`from_edges`; ``src`` and ``tgt`` are plain mappings
    keyed by edge id.
    """

    nodes: frozenset[str]
    src: Mapping[str, str]
    tgt: Mapping[str, str]

    @classmethod
    def from_edges(cls, nodes: Iterable[str], edges: Iterable[tuple[str, str, str]] = ()):
        """``edges`` is an iterable of ``(edge_id, source, target)`` triples.

        A repeated edge id is a :class:`ValueError`, since the mappings could
        not hold both.
        """
        src: dict[str, str] = {}
        tgt: dict[str, str] = {}
        for e, s, t in edges:
            if e in src:
                raise ValueError(f"duplicate edge id {e!r}")
            src[e] = s
            tgt[e] = t
        return cls(frozenset(nodes), src, tgt)

    @property
    def edges(self) -> frozenset[str]:
        return frozenset(self.src)

    def __eq__(self, other):
        if not isinstance(other, DirectedMultigraph):
            return NotImplemented
        return (self.nodes == other.nodes and dict(self.src) == dict(other.src)
                and dict(self.tgt) == dict(other.tgt))

    def __hash__(self):
        return hash((self.nodes, frozenset(self.src.items()), frozenset(self.tgt.items())))

    def __repr__(self):
        es = ", ".join(f"{e}:{self.src[e]}->{self.tgt[e]}" for e in sorted(self.src))
        return f"DirectedMultigraph(nodes={sorted(self.nodes)}, edges=[{es}])"

    @cached_property
    def _in_edges(self) -> dict[str, tuple[str, ...]]:
        acc: dict[str, list[str]] = {a: [] for a in self.nodes}
        for e in sorted(self.src):
            acc.setdefault(self.tgt[e], []).append(e)
        return {a: tuple(es) for a, es in acc.items()}

    def in_edges(self, node: str) -> tuple[str, ...]:
        """Edges ending at ``node`` in canonical slot order (sorted by edge id)."""
        if node not in self.nodes:
            raise UnknownNodeError(node)
        return self._in_edges[node]

    def in_degree(self, node: str) -> int:
        return len(self.in_edges(node))

    def sorted_nodes(self) -> list[str]:
        return sorted(self.nodes)

    def edge_triples(self) -> list[tuple[str, str, str]]:
        return [(e, self.src[e], self.tgt[e]) for e in sorted(self.src)]


@dataclass(frozen=True)
class GraphMorphism:
    domain: DirectedMultigraph
    codomain: DirectedMultigraph
    node_map: Mapping[str, str]
    edge_map: Mapping[str, str]

    def __call__(self, node: str) -> str:
        return self.node_map[node]

    def image_nodes(self) -> frozenset[str]:
        return frozenset(self.node_map[a] for a in self.domain.nodes)

    def is_node_surjective(self) -> bool:
        return self.image_nodes() == self.codomain.nodes

    def is_node_injective(self) -> bool:
        return len(self.image_nodes()) == len(self.domain.nodes)

    def fiber(self, node: str) -> list[str]:
        return sorted(a for a in self.domain.nodes if self.node_map[a] == node)


@dataclass(frozen=True)
class InputTree:
    """A node together with one leaf per incoming edge.

    ``leaves`` keeps parallel edges apart and is in canonical slot order;
    ``attachment[leaf]`` is the source of that edge in the ambient graph.
    """

    root: str
    leaves: tuple[str, ...]
    attachment: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class FibrationWitness:
    """Per-node lift tables ``lifts[a][e'] = e``.

    ``e`` is the unique domain edge into ``a`` over the codomain edge ``e'``.
    """

    lifts: Mapping[str, Mapping[str, str]]

    def __getitem__(self, node: str) -> Mapping[str, str]:
        return self.lifts[node]

    def __eq__(self, other):
        if not isinstance(other, FibrationWitness):
            return NotImplemented
        return {a: dict(m) for a, m in self.lifts.items()} == {a: dict(m) for a, m in other.lifts.items()}


def validate_graph(g: DirectedMultigraph) -> list[str]:
    violations = []
    for a in sorted(g.nodes):
        if not isinstance(a, str) or not a:
            violations.append(f"node {a!r}: identifiers must be non-empty strings")
    if set(g.src) != set(g.tgt):
        for e in sorted(set(g.src) ^ set(g.tgt)):
            violations.append(f"edge {e!r}: source and target must both be defined")
    for e in sorted(g.src):
        if not isinstance(e, str) or not e:
            violations.append(f"edge {e!r}: identifiers must be non-empty strings")
        for role, m in (("source", g.src), ("target", g.tgt)):
            if e in m and m[e] not in g.nodes:
                violations.append(f"edge {e!r}: {role} {m[e]!r} is not a node")
    return violations


def _require_total(phi: GraphMorphism) -> None:
    missing = sorted(a for a in phi.domain.nodes if a not in phi.node_map)
    if missing:
        raise MissingMappingError("node", missing)
    missing = sorted(e for e in phi.domain.edges if e not in phi.edge_map)
    if missing:
        raise MissingMappingError("edge", missing)


def validate_morphism(phi: GraphMorphism) -> list[str]:
    """Check that ``phi`` commutes with source and target on every edge.

    Raises :class:`MissingMappingError` if either map is partial.
    """
    _require_total(phi)
    dom, cod = phi.domain, phi.codomain
    violations = []
    for a in sorted(dom.nodes):
        if phi.node_map[a] not in cod.nodes:
            violations.append(f"node {a!r}: image {phi.node_map[a]!r} is not a codomain node")
    for e in sorted(dom.edges):
        e2 = phi.edge_map[e]
        if e2 not in cod.src:
            violations.append(f"edge {e!r}: image {e2!r} is not a codomain edge")
            continue
        if phi.node_map.get(dom.src[e]) != cod.src[e2]:
            violations.append(
                f"edge {e!r}: source {dom.src[e]!r} maps to {phi.node_map.get(dom.src[e])!r} "
                f"but edge image {e2!r} starts at {cod.src[e2]!r}")
        if phi.node_map.get(dom.tgt[e]) != cod.tgt[e2]:
            violations.append(
                f"edge {e!r}: target {dom.tgt[e]!r} maps to {phi.node_map.get(dom.tgt[e])!r} "
                f"but edge image {e2!r} ends at {cod.tgt[e2]!r}")
    return violations


def identity(g: DirectedMultigraph) -> GraphMorphism:
    return GraphMorphism(g, g, {a: a for a in g.nodes}, {e: e for e in g.edges})


def compose(psi: GraphMorphism, phi: GraphMorphism) -> GraphMorphism:
    """Return ``psi ∘ phi`` (apply ``phi`` first)."""
    if phi.codomain != psi.domain:
        raise DomainMismatchError("codomain of the first map is not the domain of the second")
    return GraphMorphism(
        phi.domain,
        psi.codomain,
        {a: psi.node_map[b] for a, b in phi.node_map.items()},
        {e: psi.edge_map[f] for e, f in phi.edge_map.items()},
    )


def _lift_table(phi: GraphMorphism) -> dict[str, dict[str, list[str]]]:
    table = {}
    for a in phi.domain.nodes:
        lifts: dict[str, list[str]] = {e2: [] for e2 in phi.codomain.in_edges(phi.node_map[a])}
        for e in phi.domain.in_edges(a):
            lifts.setdefault(phi.edge_map[e], []).append(e)
        table[a] = lifts
    return table


def fibration_witness(phi: GraphMorphism) -> FibrationWitness:
    """Return the lift tables of ``phi`` or raise :class:`NotAFibrationError`.

    The error names the lexicographically smallest ``(node, codomain edge)``
    pair whose lift count is not exactly one.
    """
    violations = validate_morphism(phi)
    if violations:
        raise InvalidMorphismError(violations)
    table = _lift_table(phi)
    for a in sorted(table):
        for e2 in sorted(table[a]):
            if len(table[a][e2]) != 1:
                raise NotAFibrationError(a, e2, tuple(table[a][e2]))
    return FibrationWitness({a: {e2: es[0] for e2, es in lifts.items()} for a, lifts in table.items()})


def is_fibration(phi: GraphMorphism) -> bool:
    try:
        fibration_witness(phi)
    except NotAFibrationError:
        return False
    return True


def verify_witness(phi: GraphMorphism, witness: FibrationWitness) -> list[str]:
    """Report every way in which ``witness`` fails to be a lift table for ``phi``."""
    problems = []
    dom, cod = phi.domain, phi.codomain
    for a in sorted(dom.nodes):
        if a not in witness.lifts:
            problems.append(f"node {a!r}: no lift table")
            continue
        beta = witness.lifts[a]
        expected = set(cod.in_edges(phi.node_map[a]))
        if set(beta) != expected:
            problems.append(f"node {a!r}: lift table keys differ from the in-edges of {phi.node_map[a]!r}")
            continue
        for e2, e in sorted(beta.items()):
            if e not in dom.src or dom.tgt[e] != a or phi.edge_map.get(e) != e2:
                problems.append(f"node {a!r}: {e2!r} is not lifted correctly by {e!r}")
        if sorted(beta.values()) != list(dom.in_edges(a)):
            problems.append(f"node {a!r}: lift table is not a bijection onto the in-edges")
    return problems


def input_tree(g: DirectedMultigraph, a: str) -> InputTree:
    leaves = g.in_edges(a)
    return InputTree(a, leaves, {e: g.src[e] for e in leaves})


def induced_input_map(phi: GraphMorphism, witness: FibrationWitness, a: str) -> dict[str, str]:
    """Leaf bijection ``I(a) -> I(phi(a))`` given by the edge map.

    Its inverse is ``witness[a]``; a mismatch means the witness was not built
    for ``phi`` and is reported as :class:`InvalidMorphismError`.
    """
    if a not in phi.domain.nodes:
        raise UnknownNodeError(a)
    forward = {e: phi.edge_map[e] for e in phi.domain.in_edges(a)}
    inverse = {e2: e for e, e2 in forward.items()}
    if len(inverse) != len(forward) or inverse != dict(witness[a]):
        raise InvalidMorphismError([f"node {a!r}: witness does not invert the induced input map"])
    return forward
