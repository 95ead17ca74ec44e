"""Example networks and random generators for tests.

The gallery covers the standard small cases: two parallel edges ``a => b``,
the same graph followed by ``b -> c``, the two-leaf fan ``a1 -> b <- a2``
mapped onto it, and the 3-node loop ``1 <-> 2 -> 3`` inside a 10-node graph
that it drives.
"""
from __future__ import annotations

import numpy as np

from .dsl import BinOp, Call, Expr, InputVar, Neg, Num, Param, SelfVar, SystemSignature
from .graphs import DirectedMultigraph, GraphMorphism
from .network import NetworkOfManifolds
from .open_systems import ControlFamily, OpenSystem


def graph(nodes, edges=()) -> DirectedMultigraph:
    return DirectedMultigraph.from_edges(nodes, edges)


def parallel_pair() -> DirectedMultigraph:
    """``a => b`` via ``alpha`` and ``beta``."""
    return graph("ab", [("alpha", "a", "b"), ("beta", "a", "b")])


def parallel_pair_then_c() -> DirectedMultigraph:
    return graph("abc", [("alpha", "a", "b"), ("beta", "a", "b"), ("eps", "b", "c")])


def fan() -> DirectedMultigraph:
    """``a1 -> b <- a2`` via ``gamma`` and ``delta``."""
    return graph(["a1", "a2", "b"], [("gamma", "a1", "b"), ("delta", "a2", "b")])


def fan_target() -> DirectedMultigraph:
    """``a => b -> c`` with edges ``gamma'``, ``delta'`` and ``eps'``."""
    return graph("abc", [("gamma'", "a", "b"), ("delta'", "a", "b"), ("eps'", "b", "c")])


def fan_base() -> DirectedMultigraph:
    """``a => b`` with edges ``gamma'`` and ``delta'``."""
    return graph("ab", [("gamma'", "a", "b"), ("delta'", "a", "b")])


def fan_map() -> GraphMorphism:
    """The fibration ``fan() -> fan_target()``; neither injective nor surjective."""
    return GraphMorphism(fan(), fan_target(), {"a1": "a", "a2": "a", "b": "b"},
                         {"gamma": "gamma'", "delta": "delta'"})


def fan_surjection() -> GraphMorphism:
    return GraphMorphism(fan(), fan_base(), {"a1": "a", "a2": "a", "b": "b"},
                         {"gamma": "gamma'", "delta": "delta'"})


def fan_inclusion() -> GraphMorphism:
    return GraphMorphism(fan_base(), fan_target(), {"a": "a", "b": "b"},
                         {"gamma'": "gamma'", "delta'": "delta'"})


def collapse_map() -> GraphMorphism:
    """Both parallel edges of ``a => b`` sent to the single edge of ``a -> b``."""
    single = graph("ab", [("e", "a", "b")])
    return GraphMorphism(parallel_pair(), single, {"a": "a", "b": "b"}, {"alpha": "e", "beta": "e"})


def driver_graph() -> DirectedMultigraph:
    """``1 <-> 2 -> 3``."""
    return graph("123", [("e1_2", "1", "2"), ("e2_1", "2", "1"), ("e2_3", "2", "3")])


def driven_graph() -> DirectedMultigraph:
    """``driver_graph()`` plus seven nodes fed by it and feeding nothing back."""
    extra = [("e1_10", "1", "10"), ("e1_4", "1", "4"), ("e1_7", "1", "7"),
             ("e2_5", "2", "5"), ("e2_8", "2", "8"), ("e3_6", "3", "6"), ("e3_9", "3", "9")]
    return graph([str(i) for i in range(1, 11)], driver_graph().edge_triples() + extra)


def driver_inclusion() -> GraphMorphism:
    small, big = driver_graph(), driven_graph()
    return GraphMorphism(small, big, {a: a for a in small.nodes}, {e: e for e in small.edges})


# A balanced 3-block partition of ``driven_graph()``; its quotient is
# isomorphic to ``driver_graph()``.
DRIVEN_THREE_BLOCKS = (("1", "3", "5", "8"), ("10", "2", "4", "7"), ("6", "9"))


def uniform_network(g: DirectedMultigraph, dim: int = 1) -> NetworkOfManifolds:
    return NetworkOfManifolds(g, {a: dim for a in g.nodes})


def pulled_back_network(phi: GraphMorphism, cod: NetworkOfManifolds) -> NetworkOfManifolds:
    return NetworkOfManifolds(phi.domain, {a: cod.dims[phi.node_map[a]] for a in phi.domain.nodes})


def family_from_text(net: NetworkOfManifolds, bodies: dict[str, list[str]],
                     params: dict[str, dict[str, float]] | None = None) -> ControlFamily:
    """Canonically bound family from expression text per node."""
    params = params or {}
    systems = {}
    for a in net.graph.nodes:
        dims = [net.dims[net.graph.src[e]] for e in net.graph.in_edges(a)]
        systems[a] = OpenSystem.from_text(bodies[a], dims, params.get(a, {}))
    return ControlFamily.canonical(net, systems)


# -- random generation ----------------------------------------------------------

def random_graph(rng: np.random.Generator, n_nodes: int, n_edges: int, prefix: str = "n") -> DirectedMultigraph:
    nodes = [f"{prefix}{i}" for i in range(n_nodes)]
    if not nodes:
        return graph([])
    edges = [(f"e{k}", nodes[rng.integers(n_nodes)], nodes[rng.integers(n_nodes)]) for k in range(n_edges)]
    return graph(nodes, edges)


def random_dims(rng: np.random.Generator, g: DirectedMultigraph, max_dim: int = 3) -> dict[str, int]:
    return {a: int(rng.integers(1, max_dim + 1)) for a in sorted(g.nodes)}


def _in_closure(g: DirectedMultigraph, seeds) -> set[str]:
    closed = set(seeds)
    frontier = list(closed)
    while frontier:
        a = frontier.pop()
        for e in g.in_edges(a):
            s = g.src[e]
            if s not in closed:
                closed.add(s)
                frontier.append(s)
    return closed


def random_fibration(rng: np.random.Generator, codomain: DirectedMultigraph, max_nodes: int = 6,
                     surjective: bool = False, prefix: str = "") -> GraphMorphism:
    """A random fibration into ``codomain``.

    The image is an in-closed node set (required for lifts to exist); every
    image node gets a fiber of 1-3 nodes and each domain node one lift per
    incoming codomain edge, with the lift's source drawn from the right fiber.
    """
    nodes = sorted(codomain.nodes)
    if surjective:
        image = set(nodes)
    else:
        seeds = [a for a in nodes if rng.random() < 0.5] or nodes[:1]
        image = _in_closure(codomain, seeds)
    image = sorted(image)
    budget = max(max_nodes, len(image))
    sizes = {c: 1 for c in image}
    for _ in range(budget - len(image)):
        c = image[rng.integers(len(image))]
        if sizes[c] < 3 and rng.random() < 0.6:
            sizes[c] += 1
    fibers = {c: [f"{prefix}{c}.{i}" for i in range(sizes[c])] for c in image}
    node_map = {a: c for c in image for a in fibers[c]}
    edges, edge_map = [], {}
    for a, c in sorted(node_map.items()):
        for e2 in codomain.in_edges(c):
            choices = fibers[codomain.src[e2]]
            s = choices[rng.integers(len(choices))]
            e = f"{e2}@{a}"
            edges.append((e, s, a))
            edge_map[e] = e2
    return GraphMorphism(graph(node_map, edges), codomain, node_map, edge_map)


def random_morphism(rng: np.random.Generator, codomain: DirectedMultigraph, n_nodes: int,
                    n_edges: int, prefix: str = "m") -> GraphMorphism:
    """A random (not necessarily fibration) graph morphism into ``codomain``."""
    cnodes = sorted(codomain.nodes)
    nodes = [f"{prefix}{i}" for i in range(n_nodes)]
    # cover the codomain nodes first so that most codomain edges can be used
    order = [cnodes[i] for i in rng.permutation(len(cnodes))]
    node_map = {a: order[i] if i < len(order) else cnodes[rng.integers(len(cnodes))]
                for i, a in enumerate(nodes)}
    fibers: dict[str, list[str]] = {}
    for a in nodes:
        fibers.setdefault(node_map[a], []).append(a)
    usable = [e for e in sorted(codomain.edges)
              if codomain.src[e] in fibers and codomain.tgt[e] in fibers]
    edges, edge_map = [], {}
    for k in range(n_edges if usable else 0):
        e2 = usable[rng.integers(len(usable))]
        s = fibers[codomain.src[e2]][rng.integers(len(fibers[codomain.src[e2]]))]
        t = fibers[codomain.tgt[e2]][rng.integers(len(fibers[codomain.tgt[e2]]))]
        edges.append((f"{prefix}e{k}", s, t))
        edge_map[f"{prefix}e{k}"] = e2
    return GraphMorphism(graph(nodes, edges), codomain, node_map, edge_map)


_SMOOTH = ("sin", "cos", "tanh")


def random_expr(rng: np.random.Generator, sig: SystemSignature, depth: int = 3) -> Expr:
    """A random smooth expression over the variables of ``sig``.

    Uses ``+ - *``, ``sin cos tanh`` and division by ``2 + sin(.)`` only, so
    values stay finite for finite arguments.
    """
    leaves = [SelfVar(i) for i in range(sig.self_dim)]
    leaves += [InputVar(s, i) for s, d in enumerate(sig.input_dims) for i in range(d)]
    leaves += [Param(k) for k in (sig.params or {})]

    def go(d):
        r = rng.random()
        if d == 0 or r < 0.25:
            if rng.random() < 0.2:
                return Num(float(np.round(rng.uniform(0, 3), 3)))
            return leaves[rng.integers(len(leaves))]
        if r < 0.4:
            return Call(_SMOOTH[rng.integers(len(_SMOOTH))], go(d - 1))
        if r < 0.45:
            return Neg(go(d - 1))
        if r < 0.5:
            return BinOp("/", go(d - 1), BinOp("+", Num(2.0), Call("sin", go(d - 1))))
        op = "+-*"[rng.integers(3)]
        return BinOp(op, go(d - 1), go(d - 1))

    return go(depth)


def random_system(rng: np.random.Generator, sig: SystemSignature, depth: int = 3,
                  damped: bool = False) -> OpenSystem:
    """Random body per coordinate; ``damped`` gives ``tanh(.) - x[i]``, which cannot blow up."""
    body = []
    for i in range(sig.self_dim):
        e = random_expr(rng, sig, depth)
        body.append(BinOp("-", Call("tanh", e), SelfVar(i)) if damped else e)
    return OpenSystem(sig, tuple(body))


def random_family(rng: np.random.Generator, net: NetworkOfManifolds, depth: int = 3,
                  with_params: bool = True, damped: bool = False) -> ControlFamily:
    systems = {}
    for a in sorted(net.graph.nodes):
        dims = tuple(net.dims[net.graph.src[e]] for e in net.graph.in_edges(a))
        params = {"k": float(np.round(rng.uniform(-1, 1), 3))} if with_params else {}
        systems[a] = random_system(rng, SystemSignature(net.dims[a], dims, params), depth, damped)
    return ControlFamily.canonical(net, systems)
