"""Networks of Euclidean phase spaces and the point-level pullback.

A state of a network is a *total point*: a dict from node id to a 1-D float
array whose length is the node's dimension. There is no preferred node
order; :func:`flatten` and :func:`unflatten` fix one (node id, then
coordinate) for the places that need a flat vector.

A graph morphism ``phi: G -> G'`` with matching dimensions induces
``pullback_point(phi, .)`` from states of ``G'`` to states of ``G`` by
copying ``x'[phi(a)]`` into slot ``a``. The order of composition is
reversed: ``pullback(psi ∘ phi) = pullback(phi) ∘ pullback(psi)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Mapping, NamedTuple

import numpy as np

from .graphs import DirectedMultigraph, GraphError, GraphMorphism, validate_morphism

TotalPoint = Dict[str, np.ndarray]
TangentPoint = Dict[str, np.ndarray]

DEFAULT_TOL = 1e-9
EUCLIDEAN = "euclidean"


class ShapeError(ValueError):
    pass


class NotSurjectiveError(GraphError):
    pass


class NotInjectiveError(GraphError):
    pass


@dataclass(frozen=True)
class NetworkOfManifolds:
    """A graph with ``R^dims[a]`` attached to each node ``a``."""

    graph: DirectedMultigraph
    dims: Mapping[str, int]
    kinds: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        kinds = {a: self.kinds.get(a, EUCLIDEAN) for a in self.dims}
        kinds.update(self.kinds)
        object.__setattr__(self, "kinds", kinds)
        problems = self.violations()
        if problems:
            raise ShapeError("; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        if set(self.dims) != set(self.graph.nodes):
            extra = sorted(set(self.dims) - set(self.graph.nodes))
            missing = sorted(set(self.graph.nodes) - set(self.dims))
            if missing:
                out.append(f"no dimension for nodes {missing}")
            if extra:
                out.append(f"dimension given for unknown nodes {extra}")
        for a, d in sorted(self.dims.items()):
            if not isinstance(d, (int, np.integer)) or isinstance(d, bool) or d < 1:
                out.append(f"node {a!r}: dimension must be a positive integer, got {d!r}")
        for a, kind in sorted(self.kinds.items()):
            if kind != EUCLIDEAN:
                out.append(f"node {a!r}: unsupported space kind {kind!r}")
        return out

    def kind(self, a: str) -> str:
        return self.kinds.get(a, EUCLIDEAN)

    @property
    def total_dim(self) -> int:
        return sum(self.dims.values())

    def zeros(self) -> TotalPoint:
        return {a: np.zeros(d) for a, d in self.dims.items()}

    def random_point(self, rng: np.random.Generator) -> TotalPoint:
        """Standard normal coordinates, drawn in flattened order."""
        return {a: rng.standard_normal(self.dims[a]) for a in sorted(self.dims)}


def check_point(net: NetworkOfManifolds, x: Mapping[str, np.ndarray]) -> None:
    """Raise :class:`ShapeError` unless ``x`` is a state of ``net``."""
    if set(x) != set(net.graph.nodes):
        raise ShapeError(f"point keys {sorted(x)} do not match nodes {sorted(net.graph.nodes)}")
    for a, v in x.items():
        if np.shape(v) != (net.dims[a],):
            raise ShapeError(f"node {a!r}: expected shape ({net.dims[a]},), got {np.shape(v)}")


def flatten(net: NetworkOfManifolds, x: Mapping[str, np.ndarray]) -> np.ndarray:
    check_point(net, x)
    if not x:
        return np.zeros(0)
    return np.concatenate([np.asarray(x[a], dtype=float) for a in sorted(x)])


def unflatten(net: NetworkOfManifolds, vec) -> TotalPoint:
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (net.total_dim,):
        raise ShapeError(f"expected a flat vector of length {net.total_dim}, got shape {vec.shape}")
    out, i = {}, 0
    for a in sorted(net.dims):
        out[a] = vec[i:i + net.dims[a]].copy()
        i += net.dims[a]
    return out


def coordinate_labels(net: NetworkOfManifolds) -> list[str]:
    return [f"{a}.{i}" for a in sorted(net.dims) for i in range(net.dims[a])]


def check_network_morphism(phi: GraphMorphism, dom: NetworkOfManifolds,
                           cod: NetworkOfManifolds) -> list[str]:
    """Violations of ``dims' ∘ phi = dims`` (and of equal space kinds)."""
    out = []
    if phi.domain != dom.graph:
        out.append("morphism domain is not the graph of the domain network")
    if phi.codomain != cod.graph:
        out.append("morphism codomain is not the graph of the codomain network")
    if out:
        return out
    out.extend(validate_morphism(phi))
    for a in sorted(dom.graph.nodes):
        b = phi.node_map[a]
        if b not in cod.dims:
            continue
        if dom.dims[a] != cod.dims[b]:
            out.append(f"node {a!r}: dimension {dom.dims[a]} differs from {cod.dims[b]} at image {b!r}")
        if dom.kind(a) != cod.kind(b):
            out.append(f"node {a!r}: space kind differs from image {b!r}")
    return out


def _pullback(phi: GraphMorphism, x: Mapping[str, np.ndarray],
              codomain: NetworkOfManifolds | None) -> TotalPoint:
    if codomain is not None:
        check_point(codomain, x)
    elif set(x) != set(phi.codomain.nodes):
        raise ShapeError(f"point keys {sorted(x)} do not match codomain nodes")
    return {a: np.array(x[b], dtype=float) for a, b in phi.node_map.items()}


def pullback_point(phi: GraphMorphism, x: Mapping[str, np.ndarray],
                   codomain: NetworkOfManifolds | None = None) -> TotalPoint:
    """``(P phi)(x)_a = x[phi(a)]``."""
    return _pullback(phi, x, codomain)


def pullback_tangent(phi: GraphMorphism, v: Mapping[str, np.ndarray],
                     codomain: NetworkOfManifolds | None = None) -> TangentPoint:
    """Differential of :func:`pullback_point`; the same block copy, applied to tangent vectors."""
    return _pullback(phi, v, codomain)


def pullback_matrix(phi: GraphMorphism, dom: NetworkOfManifolds,
                    cod: NetworkOfManifolds) -> np.ndarray:
    """Jacobian of ``P phi`` in flattened coordinates (a 0/1 selection matrix)."""
    col = {}
    j = 0
    for b in sorted(cod.dims):
        col[b] = j
        j += cod.dims[b]
    rows = []
    for a in sorted(dom.dims):
        for i in range(dom.dims[a]):
            r = np.zeros(cod.total_dim)
            r[col[phi.node_map[a]] + i] = 1.0
            rows.append(r)
    return np.array(rows).reshape(dom.total_dim, cod.total_dim)


class PolydiagonalCheck(NamedTuple):
    member: bool
    deviation: float


def _require_surjective(phi: GraphMorphism) -> None:
    if not phi.is_node_surjective():
        missed = sorted(phi.codomain.nodes - phi.image_nodes())
        raise NotSurjectiveError(f"node map misses {missed}")


def polydiagonal_deviation(phi: GraphMorphism, x: Mapping[str, np.ndarray]) -> float:
    """Largest ``|x_a - x_b|_inf`` over pairs with ``phi(a) == phi(b)``."""
    worst = 0.0
    fibers: dict[str, list[str]] = {}
    for a in sorted(phi.domain.nodes):
        fibers.setdefault(phi.node_map[a], []).append(a)
    for members in fibers.values():
        for i, a in enumerate(members):
            for b in members[i + 1:]:
                d = float(np.max(np.abs(np.asarray(x[a]) - np.asarray(x[b])), initial=0.0))
                if not d <= worst:
                    worst = d
    return worst


def polydiagonal_membership(phi: GraphMorphism, x: Mapping[str, np.ndarray],
                            tol: float = DEFAULT_TOL) -> PolydiagonalCheck:
    _require_surjective(phi)
    if set(x) != set(phi.domain.nodes):
        raise ShapeError(f"point keys {sorted(x)} do not match domain nodes")
    dev = polydiagonal_deviation(phi, x)
    return PolydiagonalCheck(dev <= tol, dev)


@dataclass
class StructuralReport:
    holds: bool
    rank: int
    expected_rank: int
    samples: int
    max_error: float
    seed: int
    notes: list[str] = field(default_factory=list)


def image_is_embedding_check(phi: GraphMorphism, dom: NetworkOfManifolds,
                             cod: NetworkOfManifolds, samples: int = 100,
                             seed: int = 0) -> StructuralReport:
    """Confirm that ``P phi`` is injective with image the polydiagonal.

    Both inclusions are sampled: images of random codomain points must lie on
    the polydiagonal and determine their preimage, and random polydiagonal
    points (fiber averages of random states) must be hit exactly.
    """
    _require_surjective(phi)
    problems = check_network_morphism(phi, dom, cod)
    if problems:
        raise ShapeError("; ".join(problems))
    rng = np.random.default_rng(seed)
    jac = pullback_matrix(phi, dom, cod)
    rank = int(np.linalg.matrix_rank(jac)) if jac.size else 0
    notes = []
    if rank != cod.total_dim:
        notes.append("differential is not injective")
    fibers = {b: phi.fiber(b) for b in cod.graph.nodes}
    worst = 0.0
    for _ in range(samples):
        xc = cod.random_point(rng)
        y = pullback_point(phi, xc, cod)
        worst = max(worst, polydiagonal_deviation(phi, y))
        recovered = {b: y[fibers[b][0]] for b in fibers}
        worst = max(worst, max((float(np.max(np.abs(recovered[b] - xc[b]))) for b in fibers), default=0.0))

        z = dom.random_point(rng)
        for members in fibers.values():
            mean = np.mean([z[a] for a in members], axis=0)
            for a in members:
                z[a] = mean.copy()
        pre = {b: z[fibers[b][0]] for b in fibers}
        back = pullback_point(phi, pre, cod)
        worst = max(worst, max((float(np.max(np.abs(back[a] - z[a]))) for a in z), default=0.0))
    if worst != 0.0:
        notes.append(f"sampled error {worst:g}")
    return StructuralReport(not notes, rank, cod.total_dim, samples, worst, seed, notes)


def projection_is_submersion_check(phi: GraphMorphism, dom: NetworkOfManifolds,
                                   cod: NetworkOfManifolds, samples: int = 100,
                                   seed: int = 0) -> StructuralReport:
    """Confirm that ``P phi`` is a coordinate projection, hence onto.

    For each sampled target state a preimage is built by copying the blocks
    of the image nodes and filling the remaining nodes with zeros.
    """
    if not phi.is_node_injective():
        raise NotInjectiveError("node map is not injective")
    problems = check_network_morphism(phi, dom, cod)
    if problems:
        raise ShapeError("; ".join(problems))
    rng = np.random.default_rng(seed)
    jac = pullback_matrix(phi, dom, cod)
    rank = int(np.linalg.matrix_rank(jac)) if jac.size else 0
    notes = []
    if rank != dom.total_dim:
        notes.append("differential is not onto")
    inverse = {b: a for a, b in phi.node_map.items()}
    worst = 0.0
    for _ in range(samples):
        target = dom.random_point(rng)
        pre = {b: (target[inverse[b]].copy() if b in inverse else np.zeros(cod.dims[b]))
               for b in cod.graph.nodes}
        back = pullback_point(phi, pre, cod)
        worst = max(worst, max((float(np.max(np.abs(back[a] - target[a]))) for a in target), default=0.0))
    if worst != 0.0:
        notes.append(f"sampled error {worst:g}")
    return StructuralReport(not notes, rank, dom.total_dim, samples, worst, seed, notes)
