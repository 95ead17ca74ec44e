"""Balanced partitions, quotient networks and minimal bases.

A node partition is *balanced* when the map collapsing each block to a node
is a graph fibration, i.e. any two nodes in a block receive the same
multiset of edges counted by the block of their source. The coarsest
balanced partition refining the dimension classes is found by iterated
recoloring and gives the smallest network through which the original one
fibers.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

from .graphs import DirectedMultigraph, FibrationWitness, GraphError, GraphMorphism
from .network import DEFAULT_TOL, NetworkOfManifolds
from .open_systems import (DEFAULT_SAMPLES, ConsistencyReport, ControlFamily,
                           family_is_pullback_consistent)


class InvalidPartitionError(ValueError):
    pass


class DimsNotConstantError(ValueError):
    def __init__(self, block: tuple[str, ...]):
        self.block = block
        super().__init__(f"dimensions differ inside block {list(block)}")


class NotBalancedError(GraphError):
    """Two nodes of one block receive different in-edge color multisets."""

    def __init__(self, pair: tuple[str, str]):
        self.pair = pair
        super().__init__(f"nodes {pair[0]!r} and {pair[1]!r} share a block but have different inputs")


class InconsistentFamilyError(ValueError):
    def __init__(self, report: ConsistencyReport):
        self.report = report
        self.pair = report.offending_pair
        super().__init__(f"open systems of {self.pair[0]!r} and {self.pair[1]!r} disagree "
                         f"(deviation {report.max_deviation:g})")


@dataclass(frozen=True)
class NodePartition:
    """Disjoint non-empty blocks covering the node set, sorted by smallest member."""

    blocks: tuple[tuple[str, ...], ...]

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[str]], nodes: Iterable[str]) -> "NodePartition":
        nodes = set(nodes)
        seen: set[str] = set()
        out = []
        for b in blocks:
            b = tuple(sorted(b))
            if not b:
                raise InvalidPartitionError("empty block")
            dup = seen.intersection(b)
            if dup:
                raise InvalidPartitionError(f"nodes {sorted(dup)} appear in more than one block")
            seen.update(b)
            out.append(b)
        if seen != nodes:
            extra, missing = sorted(seen - nodes), sorted(nodes - seen)
            raise InvalidPartitionError(
                f"blocks do not cover the nodes (unknown {extra}, missing {missing})")
        return cls(tuple(sorted(out)))

    @classmethod
    def from_coloring(cls, colors: Mapping[str, object]) -> "NodePartition":
        groups: dict[object, list[str]] = {}
        for a, c in colors.items():
            groups.setdefault(c, []).append(a)
        return cls.from_blocks(groups.values(), colors)

    @property
    def block_of(self) -> dict[str, int]:
        return {a: i for i, b in enumerate(self.blocks) for a in b}

    def representative(self, a: str) -> str:
        return self.blocks[self.block_of[a]][0]

    def __len__(self):
        return len(self.blocks)

    def refines(self, other: "NodePartition") -> bool:
        """True when every block of ``self`` lies inside a block of ``other``."""
        where = other.block_of
        return all(len({where[a] for a in b}) == 1 for b in self.blocks)


@dataclass(frozen=True)
class QuotientResult:
    base: NetworkOfManifolds
    projection: GraphMorphism
    witness: FibrationWitness
    partition: NodePartition


def _relabel(keys: Mapping[str, object]) -> dict[str, int]:
    order = {k: i for i, k in enumerate(sorted(set(keys.values())))}
    return {a: order[k] for a, k in keys.items()}


def refinement_rounds(net: NetworkOfManifolds, initial: NodePartition | None = None):
    """Yield the coloring after each round, starting with the initial one."""
    g = net.graph
    if initial is not None:
        where = NodePartition.from_blocks(initial.blocks, g.nodes).block_of
    else:
        where = {a: 0 for a in g.nodes}
    colors = _relabel({a: (net.dims[a], where[a]) for a in g.nodes})
    yield colors
    while True:
        keys = {a: (colors[a], tuple(sorted(colors[g.src[e]] for e in g.in_edges(a))))
                for a in g.nodes}
        new = _relabel(keys)
        yield new
        if len(set(new.values())) == len(set(colors.values())):
            return
        colors = new


def coarsest_balanced_partition(net: NetworkOfManifolds,
                                initial: NodePartition | None = None) -> NodePartition:
    """Coarsest balanced partition refining ``initial`` and the dimension classes."""
    *_, colors = refinement_rounds(net, initial)
    if not colors:
        return NodePartition(())
    return NodePartition.from_coloring(colors)


def _grouped_in_edges(g: DirectedMultigraph, a: str, where: Mapping[str, int]) -> dict[int, list[str]]:
    out: dict[int, list[str]] = {}
    for e in g.in_edges(a):
        out.setdefault(where[g.src[e]], []).append(e)
    return out


def quotient_network(net: NetworkOfManifolds, partition: NodePartition) -> QuotientResult:
    """Collapse each block to its smallest member.

    Base edges are the in-edges of the representatives. Every other node's
    in-edges are matched to them block by block in id order; raises
    :class:`NotBalancedError` when no matching exists.
    """
    g = net.graph
    partition = NodePartition.from_blocks(partition.blocks, g.nodes)
    where = partition.block_of
    for b in partition.blocks:
        if len({net.dims[a] for a in b}) != 1:
            raise DimsNotConstantError(b)
    reps = {i: b[0] for i, b in enumerate(partition.blocks)}

    base_edges = []
    for i, r in reps.items():
        for e in g.in_edges(r):
            base_edges.append((e, reps[where[g.src[e]]], r))
    base_graph = DirectedMultigraph.from_edges(reps.values(), base_edges)

    node_map = {a: reps[where[a]] for a in g.nodes}
    edge_map: dict[str, str] = {}
    lifts: dict[str, dict[str, str]] = {}
    for i, block in enumerate(partition.blocks):
        r = block[0]
        rep_groups = _grouped_in_edges(g, r, where)
        for a in block:
            groups = _grouped_in_edges(g, a, where)
            if {k: len(v) for k, v in groups.items()} != {k: len(v) for k, v in rep_groups.items()}:
                raise NotBalancedError((r, a))
            beta = {}
            for k, es in groups.items():
                for e, e_base in zip(es, rep_groups[k]):
                    edge_map[e] = e_base
                    beta[e_base] = e
            lifts[a] = beta

    base = NetworkOfManifolds(base_graph, {r: net.dims[r] for r in reps.values()},
                              {r: net.kind(r) for r in reps.values()})
    projection = GraphMorphism(g, base_graph, node_map, edge_map)
    return QuotientResult(base, projection, FibrationWitness(lifts), partition)


def minimal_base(net: NetworkOfManifolds, initial: NodePartition | None = None) -> QuotientResult:
    return quotient_network(net, coarsest_balanced_partition(net, initial))


def is_balanced(net: NetworkOfManifolds, partition: NodePartition) -> bool:
    g = net.graph
    where = partition.block_of
    for b in partition.blocks:
        ref = Counter(where[g.src[e]] for e in g.in_edges(b[0]))
        if any(Counter(where[g.src[e]] for e in g.in_edges(a)) != ref for a in b[1:]):
            return False
    return True


def pushforward_family(qr: QuotientResult, w: ControlFamily, net: NetworkOfManifolds,
                       samples: int = DEFAULT_SAMPLES, tol: float = DEFAULT_TOL,
                       seed: int = 0) -> ControlFamily:
    """Push ``w`` down to the base, if it is pulled back from there.

    Each base node takes its representative's open system, with slots bound
    to the images of the representative's edges. Raises
    :class:`InconsistentFamilyError` if nodes in some block disagree.
    """
    report = family_is_pullback_consistent(qr.projection, qr.witness, w, net, samples, tol, seed)
    if not report.consistent:
        raise InconsistentFamilyError(report)
    q = qr.projection
    systems, slots = {}, {}
    for r in qr.base.graph.nodes:
        systems[r] = w.systems[r]
        slots[r] = tuple(q.edge_map[e] for e in w.slots[r])
    return ControlFamily(systems, slots)
