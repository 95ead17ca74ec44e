"""Open systems on nodes, their interconnection, and pullback along fibrations.

An :class:`OpenSystem` is a vector of expressions reading the node's own
state ``x`` and input slots ``u[0], u[1], ...``. A :class:`ControlFamily`
assigns one open system to every node together with a *slot binding*: the
tuple of in-edges whose source states feed slots ``0, 1, ...``. Freshly built
families use the canonical binding (in-edges sorted by id); pullback keeps
the bodies and only permutes bindings.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import dsl
from .dsl import BinOp, Expr, Neg, Num, SystemSignature
from .graphs import (FibrationWitness, GraphMorphism, InvalidWitnessError, fibration_witness,
                     verify_witness)
from .network import (DEFAULT_TOL, NetworkOfManifolds, NotSurjectiveError, ShapeError,
                      TangentPoint, check_network_morphism, check_point)

DEFAULT_SAMPLES = 64


class SignatureMismatchError(ValueError):
    def __init__(self, node: str, message: str, slot: int | None = None):
        self.node = node
        self.slot = slot
        where = f"node {node!r}" + (f", slot {slot}" if slot is not None else "")
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class OpenSystem:
    signature: SystemSignature
    body: tuple[Expr, ...]
    # Original expression text, kept so files can be re-emitted verbatim.
    source: tuple[str, ...] | None = field(default=None, compare=False, repr=False)

    @classmethod
    def from_text(cls, exprs: Sequence[str], input_dims: Sequence[int] = (),
                  params: Mapping[str, float] | None = None) -> "OpenSystem":
        body = tuple(dsl.parse(s) for s in exprs)
        return cls(SystemSignature(len(body), tuple(input_dims), dict(params or {})), body, tuple(exprs))

    @property
    def params(self) -> Mapping[str, float]:
        return self.signature.params or {}

    def violations(self) -> list[str]:
        out = []
        if len(self.body) != self.signature.self_dim:
            out.append(f"{len(self.body)} body expressions for self dimension {self.signature.self_dim}")
        for k, e in enumerate(self.body):
            out.extend(f"coordinate {k}: {v}" for v in dsl.validate(e, self.signature))
        return out

    def __call__(self, x: Sequence[float], inputs: Sequence[Sequence[float]] = ()) -> np.ndarray:
        """Tree-walking evaluation; arguments in body slot order."""
        xs = [float(v) for v in x]
        us = [[float(v) for v in u] for u in inputs]
        return np.array([dsl.evaluate(e, xs, us, self.params) for e in self.body])

    def texts(self) -> list[str]:
        if self.source is not None:
            return list(self.source)
        return [dsl.to_text(e) for e in self.body]


def _times(c: float, e: Expr) -> Expr:
    lit = Neg(Num(-c)) if c < 0 or (c == 0 and np.signbit(c)) else Num(c)
    return BinOp("*", lit, e)


@dataclass(frozen=True)
class ControlFamily:
    systems: Mapping[str, OpenSystem]
    slots: Mapping[str, tuple[str, ...]]

    @classmethod
    def canonical(cls, net: NetworkOfManifolds, systems: Mapping[str, OpenSystem]) -> "ControlFamily":
        return cls(dict(systems), {a: net.graph.in_edges(a) for a in net.graph.nodes})

    def __getitem__(self, node: str) -> OpenSystem:
        return self.systems[node]

    def inputs_of(self, net: NetworkOfManifolds, node: str) -> list[str]:
        """Source node feeding each body slot of ``node``."""
        return [net.graph.src[e] for e in self.slots[node]]


def family_violations(net: NetworkOfManifolds, w: ControlFamily) -> list[SignatureMismatchError]:
    """Every way in which ``w`` fails to be an element of Ctrl(net)."""
    g = net.graph
    out = []
    for a in sorted(set(w.systems) - g.nodes):
        out.append(SignatureMismatchError(a, "system given for a node not in the graph"))
    for a in sorted(g.nodes):
        if a not in w.systems:
            out.append(SignatureMismatchError(a, "no open system"))
            continue
        sys_ = w.systems[a]
        sig = sys_.signature
        slots = tuple(w.slots.get(a, ()))
        if sorted(slots) != list(g.in_edges(a)):
            out.append(SignatureMismatchError(
                a, f"slot binding {list(slots)} is not a permutation of the in-edges {list(g.in_edges(a))}"))
            continue
        if sig.self_dim != net.dims[a]:
            out.append(SignatureMismatchError(a, f"self dimension {sig.self_dim} != {net.dims[a]}"))
        if len(sig.input_dims) != len(slots):
            out.append(SignatureMismatchError(a, f"{len(sig.input_dims)} input slots declared, "
                                                 f"{len(slots)} in-edges"))
        for s, e in enumerate(slots):
            if s < len(sig.input_dims) and sig.input_dims[s] != net.dims[g.src[e]]:
                out.append(SignatureMismatchError(
                    a, f"input dimension {sig.input_dims[s]} but edge {e!r} comes from "
                       f"{g.src[e]!r} of dimension {net.dims[g.src[e]]}", slot=s))
        for v in sys_.violations():
            out.append(SignatureMismatchError(a, v))
    return out


class InterconnectedField:
    """The closed vector field obtained by wiring a control family into a network.

    ``field(x)[a] = w_a(x[a], [x[src(e)] for e in slots[a]])``.
    """

    def __init__(self, net: NetworkOfManifolds, family: ControlFamily):
        problems = family_violations(net, family)
        if problems:
            raise problems[0]
        self.network = net
        self.family = family
        self._plan = []
        for a in sorted(net.graph.nodes):
            sys_ = family.systems[a]
            self._plan.append((
                a,
                [dsl.compile_expr(e) for e in sys_.body],
                family.inputs_of(net, a),
                dict(sys_.params),
            ))

    def __call__(self, x: Mapping[str, np.ndarray]) -> TangentPoint:
        check_point(self.network, x)
        return self.evaluate(x)

    def evaluate(self, x: Mapping[str, np.ndarray]) -> TangentPoint:
        """Like calling the field, without the shape check."""
        vals = {a: v.tolist() for a, v in x.items()}
        out = {}
        for a, fs, sources, params in self._plan:
            xa = vals[a]
            us = [vals[b] for b in sources]
            out[a] = np.array([f(xa, us, params) for f in fs], dtype=float)
        return out

    def component(self, a: str, x: Mapping[str, np.ndarray]) -> np.ndarray:
        return self(x)[a]


def interconnect(net: NetworkOfManifolds, w: ControlFamily) -> InterconnectedField:
    return InterconnectedField(net, w)


def resolve_witness(phi: GraphMorphism, witness: FibrationWitness | None) -> FibrationWitness:
    if witness is None:
        return fibration_witness(phi)
    problems = verify_witness(phi, witness)
    if problems:
        raise InvalidWitnessError(problems)
    return witness


def pullback_family(phi: GraphMorphism, witness: FibrationWitness | None, w: ControlFamily,
                    domain: NetworkOfManifolds | None = None,
                    codomain: NetworkOfManifolds | None = None) -> ControlFamily:
    """Pull ``w`` back along the fibration ``phi``.

    Node ``a`` gets the open system of ``phi(a)`` unchanged; its slot ``s``
    is bound to the lift into ``a`` of the edge feeding slot ``s`` of
    ``phi(a)``. Passing both networks also checks ``dims' ∘ phi = dims``.
    """
    witness = resolve_witness(phi, witness)
    if domain is not None and codomain is not None:
        problems = check_network_morphism(phi, domain, codomain)
        if problems:
            raise ShapeError("; ".join(problems))
    systems, slots = {}, {}
    for a in sorted(phi.domain.nodes):
        b = phi.node_map[a]
        if b not in w.systems:
            raise SignatureMismatchError(b, "no open system to pull back")
        bound = tuple(w.slots.get(b, ()))
        if sorted(bound) != list(phi.codomain.in_edges(b)):
            raise SignatureMismatchError(b, "slot binding does not match the in-edges")
        beta = witness[a]
        systems[a] = w.systems[b]
        slots[a] = tuple(beta[e] for e in bound)
    return ControlFamily(systems, slots)


def scale_family(c: float, w: ControlFamily) -> ControlFamily:
    """Multiply every body expression by the literal ``c``."""
    return ControlFamily(
        {a: OpenSystem(s.signature, tuple(_times(c, e) for e in s.body)) for a, s in w.systems.items()},
        dict(w.slots))


def combine_families(alpha: float, w: ControlFamily, beta: float, v: ControlFamily) -> ControlFamily:
    """``alpha*w + beta*v`` node by node; bindings and signatures must agree."""
    if set(w.systems) != set(v.systems):
        raise ValueError("families are defined on different nodes")
    systems = {}
    for a in w.systems:
        sw, sv = w.systems[a], v.systems[a]
        if tuple(w.slots[a]) != tuple(v.slots[a]):
            raise SignatureMismatchError(a, "slot bindings differ")
        if sw.signature.self_dim != sv.signature.self_dim or sw.signature.input_dims != sv.signature.input_dims:
            raise SignatureMismatchError(a, "signatures differ")
        params = dict(sw.params)
        for k, val in sv.params.items():
            if k in params and params[k] != val:
                raise SignatureMismatchError(a, f'parameter "{k}" has conflicting values')
            params[k] = val
        body = tuple(BinOp("+", _times(alpha, ew), _times(beta, ev)) for ew, ev in zip(sw.body, sv.body))
        systems[a] = OpenSystem(SystemSignature(sw.signature.self_dim, sw.signature.input_dims, params), body)
    return ControlFamily(systems, dict(w.slots))


@dataclass
class ConsistencyReport:
    consistent: bool
    max_deviation: float
    samples: int
    seed: int
    tol: float
    offending_pair: tuple[str, str] | None = None
    sample_point: dict | None = None
    notes: list[str] = field(default_factory=list)


def _aligned_inputs(q: GraphMorphism, w: ControlFamily, a: str, by_edge: Mapping[str, list[float]]):
    return [by_edge[q.edge_map[e]] for e in w.slots[a]]


def family_is_pullback_consistent(q: GraphMorphism, witness: FibrationWitness | None,
                                  w: ControlFamily, net: NetworkOfManifolds,
                                  samples: int = DEFAULT_SAMPLES, tol: float = DEFAULT_TOL,
                                  seed: int = 0) -> ConsistencyReport:
    """Decide numerically whether ``w`` is the pullback of some family along ``q``.

    Nodes in a common fiber must agree once their inputs are aligned through
    the edge map: each sample draws the fiber's own state and one value per
    in-edge of the image node (standard normal), and every member evaluates
    on it.
    """
    if not q.is_node_surjective():
        raise NotSurjectiveError("quotient map is not surjective on nodes")
    witness = resolve_witness(q, witness)
    problems = family_violations(net, w)
    if problems:
        raise problems[0]
    g = net.graph
    rng = np.random.default_rng(seed)
    worst = 0.0
    compiled = {a: [dsl.compile_expr(e) for e in w.systems[a].body] for a in g.nodes}
    for c in sorted(q.codomain.nodes):
        members = q.fiber(c)
        if len(members) < 2:
            continue
        if len({net.dims[a] for a in members}) != 1:
            raise ShapeError(f"dimensions are not constant on the fiber over {c!r}")
        ref = members[0]
        lift = witness[ref]
        in_dims = {e2: net.dims[g.src[lift[e2]]] for e2 in q.codomain.in_edges(c)}
        for _ in range(samples):
            xs = rng.standard_normal(net.dims[ref]).tolist()
            by_edge = {e2: rng.standard_normal(d).tolist() for e2, d in sorted(in_dims.items())}
            outs = {}
            for a in members:
                us = _aligned_inputs(q, w, a, by_edge)
                outs[a] = np.array([f(xs, us, w.systems[a].params) for f in compiled[a]])
            for i, a in enumerate(members):
                for b in members[i + 1:]:
                    dev = float(np.max(np.abs(outs[a] - outs[b])))
                    if not dev <= tol:
                        return ConsistencyReport(False, dev, samples, seed, tol, (a, b),
                                                 {"self": xs, "inputs": by_edge})
                    worst = max(worst, dev)
    return ConsistencyReport(True, worst, samples, seed, tol)
