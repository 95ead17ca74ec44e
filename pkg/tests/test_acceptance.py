"""End-to-end acceptance checks, one test per criterion.

A summary line per criterion is printed at the end of the pytest run.
"""
import math
import time
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings

from netfib.dsl import evaluate, parse, to_text
from netfib.dynamics import (IntegratorConfig, check_polydiagonal_invariance,
                             check_trajectory_semiconjugacy, check_vectorfield_conjugacy,
                             rk4_integrate)
from netfib.graphs import NotAFibrationError, compose, fibration_witness
from netfib.network import NetworkOfManifolds, pullback_point
from netfib.open_systems import interconnect, pullback_family
from netfib.quotients import (NodePartition, coarsest_balanced_partition, minimal_base,
                              quotient_network)
from netfib.testing import (DRIVEN_THREE_BLOCKS, collapse_map, driven_graph, driver_inclusion,
                            fan, fan_map, fan_surjection, family_from_text, graph, parallel_pair,
                            parallel_pair_then_c, pulled_back_network, random_dims, random_family,
                            random_fibration, random_graph, random_morphism, uniform_network)
from strategies import exprs

criterion = pytest.mark.criterion


def same(p, q):
    return p.keys() == q.keys() and all(np.array_equal(p[a], q[a]) for a in p)


@criterion(1, "fibration gate")
def test_fibration_gate():
    start = time.perf_counter()
    witness = fibration_witness(fan_map())
    assert witness["b"] == {"gamma'": "gamma", "delta'": "delta"}
    with pytest.raises(NotAFibrationError) as info:
        fibration_witness(collapse_map())
    assert (info.value.node, info.value.edge, sorted(info.value.lifts)) == ("b", "e", ["alpha", "beta"])
    assert time.perf_counter() - start < 1.0


@criterion(2, "interconnection matches naive composition")
def test_interconnection_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(20)

    def w_a(x):
        return math.sin(x) - 0.5 * x

    def w_b(y, u0, u1):
        return u0 - 2.0 * u1 + y * math.tanh(u0)

    def w_c(z, u0):
        return [z[1] * u0, -z[0] + math.exp(-u0 * u0)]

    bodies = {"a": ["sin(x[0]) - 0.5*x[0]"], "b": ["u[0][0] - 2*u[1][0] + x[0]*tanh(u[0][0])"],
              "c": ["x[1]*u[0][0]", "-x[0] + exp(-u[0][0]*u[0][0])"]}
    net4 = uniform_network(parallel_pair())
    f4 = interconnect(net4, family_from_text(net4, {k: bodies[k] for k in "ab"}))
    net4p = NetworkOfManifolds(parallel_pair_then_c(), {"a": 1, "b": 1, "c": 2})
    f4p = interconnect(net4p, family_from_text(net4p, bodies))
    for _ in range(100):
        x, y, z0, z1 = rng.standard_normal(4).tolist()
        out = f4({"a": np.array([x]), "b": np.array([y])})
        assert out["a"].tolist() == [w_a(x)] and out["b"].tolist() == [w_b(y, x, x)]
        out = f4p({"a": np.array([x]), "b": np.array([y]), "c": np.array([z0, z1])})
        assert out["a"].tolist() == [w_a(x)]
        assert out["b"].tolist() == [w_b(y, x, x)]
        assert out["c"].tolist() == w_c([z0, z1], y)
    assert time.perf_counter() - start < 1.0


@criterion(3, "pullback copies and re-binds open systems")
def test_pullback_oracle():
    phi = fan_map()
    cod = uniform_network(phi.codomain)
    dom = pulled_back_network(phi, cod)
    w = family_from_text(cod, {"a": ["1 - x[0]^2"], "b": ["u[0][0] - 2*u[1][0]^2 + sin(x[0])"],
                               "c": ["u[0][0]*x[0]"]})
    pulled = pullback_family(phi, None, w, dom, cod)
    assert [pulled.systems[a] for a in ("a1", "a2", "b")] == [w.systems["a"], w.systems["a"], w.systems["b"]]
    witness = fibration_witness(phi)
    f = interconnect(dom, pulled)
    rng = np.random.default_rng(30)
    for _ in range(50):
        x = dom.random_point(rng)
        out = f(x)
        for a in ("a1", "a2"):
            assert out[a][0] == w.systems["a"](x[a], [])[0]
        # slot s of b reads the source of the lift of the codomain edge feeding slot s
        args = [x[dom.graph.src[witness["b"][e]]] for e in w.slots["b"]]
        assert out["b"][0] == w.systems["b"](x["b"], args)[0]


@criterion(4, "vector-field conjugacy residual <= 1e-12")
def test_vectorfield_conjugacy():
    start = time.perf_counter()
    phi = fan_map()
    cod = uniform_network(phi.codomain)
    w = family_from_text(cod, {"a": ["1 - x[0]^2"], "b": ["u[0][0]*u[1][0] - x[0]"],
                               "c": ["tanh(u[0][0]) - x[0]"]})
    worst = check_vectorfield_conjugacy(phi, None, pulled_back_network(phi, cod), cod, w, 100, 0).max_residual
    rng = np.random.default_rng(40)
    for k in range(100):
        h = random_graph(rng, int(rng.integers(1, 5)), int(rng.integers(0, 8)))
        fib = random_fibration(rng, h, max_nodes=6)
        assert len(fib.domain.nodes) <= 6
        net_h = NetworkOfManifolds(h, random_dims(rng, h, 3))
        fam = random_family(rng, net_h)
        rep = check_vectorfield_conjugacy(fib, None, pulled_back_network(fib, net_h), net_h, fam, 100, k)
        worst = max(worst, rep.max_residual)
    assert worst <= 1e-12
    assert time.perf_counter() - start < 30.0


DRIVEN_BODIES = {
    "1": ["-x[0] + 0.8*tanh(u[0][0])"],
    "2": ["-0.5*x[0] + tanh(u[0][0]) + 0.3"],
    "3": ["-x[0] + 2*u[0][0]"],
    "4": ["-x[0] + tanh(u[0][0])"],
    "5": ["-2*x[0] + u[0][0]"],
    "6": ["-x[0] + tanh(2*u[0][0])"],
    "7": ["-x[0]"],
    "8": ["tanh(u[0][0]) - 0.5*x[0]"],
    "9": ["-0.1*x[0] + u[0][0]"],
    "10": ["-x[0] + 0.5*u[0][0]"],
}


@criterion(5, "trajectory semiconjugacy onto the driving subnetwork")
def test_trajectory_semiconjugacy():
    phi = driver_inclusion()
    big = uniform_network(phi.codomain)
    small = pulled_back_network(phi, big)
    w = family_from_text(big, DRIVEN_BODIES)
    x0 = {str(i): np.array([0.15 * i - 0.7]) for i in range(1, 11)}
    rep = check_trajectory_semiconjugacy(phi, None, small, big, w, x0, IntegratorConfig(1e-3, 10.0))
    assert rep.times[-1] == pytest.approx(10.0)
    assert rep.max_deviation <= 1e-10


@criterion(6, "polydiagonal invariance")
def test_polydiagonal_invariance():
    cfg = IntegratorConfig(1e-3, 10.0)
    q = fan_surjection()
    base = uniform_network(q.codomain)
    top = pulled_back_network(q, base)
    w = pullback_family(q, None, family_from_text(base, {"a": ["sin(x[0]) - 0.2*x[0]"],
                                                          "b": ["u[0][0] - tanh(u[1][0]) - x[0]"]}))
    on = check_polydiagonal_invariance(q, top, w, {"a1": np.array([0.7]), "a2": np.array([0.7]),
                                                   "b": np.array([-0.3])}, cfg)
    assert on.max_deviation <= 1e-10

    net = uniform_network(driven_graph())
    qr = quotient_network(net, NodePartition.from_blocks(DRIVEN_THREE_BLOCKS, net.graph.nodes))
    base_w = family_from_text(qr.base, {"1": ["-x[0] + 0.8*tanh(u[0][0])"],
                                        "10": ["-0.5*x[0] + tanh(u[0][0]) + 0.3"],
                                        "6": ["-x[0] + 2*u[0][0]"]})
    w10 = pullback_family(qr.projection, qr.witness, base_w)
    y0 = {"1": np.array([0.4]), "10": np.array([-1.2]), "6": np.array([2.0])}
    x0 = pullback_point(qr.projection, y0)
    on10 = check_polydiagonal_invariance(qr.projection, net, w10, x0, cfg)
    assert on10.max_deviation <= 1e-10

    x0["5"] = x0["5"] + 0.25
    off = check_polydiagonal_invariance(qr.projection, net, w10, x0, cfg)
    assert off.initial_deviation == 0.25 and off.max_deviation > 1e-10 and off.notes


def _balanced(g, dims, blocks):
    where = {a: i for i, b in enumerate(blocks) for a in b}
    for b in blocks:
        if len({dims[a] for a in b}) != 1:
            return False
        counts = [Counter(where[g.src[e]] for e in g.edges if g.tgt[e] == a) for a in b]
        if any(c != counts[0] for c in counts):
            return False
    return True


def _set_partitions(items):
    if not items:
        yield []
        return
    for p in _set_partitions(items[1:]):
        yield [[items[0]]] + p
        for i in range(len(p)):
            yield p[:i] + [[items[0]] + p[i]] + p[i + 1:]


@criterion(7, "minimal base is the coarsest balanced partition")
def test_minimal_base():
    qr = minimal_base(uniform_network(fan()))
    assert qr.partition.blocks == (("a1", "a2"), ("b",))
    assert qr.base.graph.edge_triples() == [("delta", "a1", "b"), ("gamma", "a1", "b")]

    rng = np.random.default_rng(70)
    for _ in range(200):
        g = random_graph(rng, int(rng.integers(1, 6)), int(rng.integers(0, 9)))
        dims = {a: 1 if rng.random() < 0.7 else 2 for a in sorted(g.nodes)}
        got = coarsest_balanced_partition(NetworkOfManifolds(g, dims))
        assert _balanced(g, dims, [list(b) for b in got.blocks])
        for p in _set_partitions(sorted(g.nodes)):
            if _balanced(g, dims, p):
                assert NodePartition.from_blocks(p, g.nodes).refines(got)


@criterion(8, "RK4 accuracy and fourth-order convergence")
def test_integrator_sanity():
    net = uniform_network(graph("a"))
    f = interconnect(net, family_from_text(net, {"a": ["-x[0]"]}))

    def err(h):
        traj = rk4_integrate(f, {"a": np.array([1.0])}, IntegratorConfig(h, 1.0))
        return abs(traj.final["a"][0] - math.exp(-traj.times[-1]))

    errors = [err(h) for h in (1e-2, 5e-3, 2.5e-3)]
    assert errors[0] <= 1e-9
    for coarse, fine in zip(errors, errors[1:]):
        assert 14.0 <= coarse / fine <= 18.0


# (text, self, inputs, params, value); values worked out by hand from the grammar
PRECEDENCE = [
    ("1 + 2 * 3", [], [], {}, 7.0),
    ("(1 + 2) * 3", [], [], {}, 9.0),
    ("2 ^ 3 ^ 2", [], [], {}, 512.0),
    ("(2 ^ 3) ^ 2", [], [], {}, 64.0),
    ("-2 ^ 2", [], [], {}, 4.0),
    ("-(2 ^ 2)", [], [], {}, -4.0),
    ("2 ^ -1", [], [], {}, 0.5),
    ("10 - 4 - 3", [], [], {}, 3.0),
    ("64 / 4 / 2", [], [], {}, 8.0),
    ("2 * 3 ^ 2", [], [], {}, 18.0),
    ("-3 * 2", [], [], {}, -6.0),
    ("1 - -1", [], [], {}, 2.0),
    ("2 ^ 2 * 3", [], [], {}, 12.0),
    ("8 / 2 ^ 2", [], [], {}, 2.0),
    ("sin(0) + cos(0) * 2", [], [], {}, 2.0),
    ("sqrt(16) ^ 0.5", [], [], {}, 2.0),
    ("-x[0] ^ 2", [3.0], [], {}, 9.0),
    ("u[0][0] + 2*u[1][0] - x[0]", [4.0], [[1.0], [5.0]], {}, 7.0),
    ('p["k"] * x[0] ^ 2', [3.0], [], {"k": 0.5}, 4.5),
    ("abs(-5) - 2 ^ 3 / 4", [], [], {}, 3.0),
]


@criterion(9, "parser round-trip and precedence")
def test_parser():
    assert len(PRECEDENCE) == 20
    for text, x, u, p, value in PRECEDENCE:
        assert evaluate(parse(text), x, u, p) == value, text

    seen = []

    @settings(max_examples=1000, deadline=None, database=None)
    @given(exprs)
    def roundtrip(e):
        seen.append(e)
        assert parse(to_text(e)) == e

    roundtrip()
    assert len(seen) >= 1000


@criterion(10, "pullback is contravariant on points and families")
def test_functoriality():
    rng = np.random.default_rng(100)
    for _ in range(100):
        k = random_graph(rng, int(rng.integers(1, 5)), int(rng.integers(0, 7)))
        psi = random_morphism(rng, k, int(rng.integers(1, 6)), int(rng.integers(0, 7)), prefix="h")
        phi = random_morphism(rng, psi.domain, int(rng.integers(1, 7)), int(rng.integers(0, 8)), prefix="g")
        net_k = NetworkOfManifolds(k, random_dims(rng, k))
        net_h = pulled_back_network(psi, net_k)
        x = net_k.random_point(rng)
        assert same(pullback_point(compose(psi, phi), x, net_k),
                    pullback_point(phi, pullback_point(psi, x, net_k), net_h))

    k = random_graph(rng, 3, 5)
    psi = random_fibration(rng, k, max_nodes=4, prefix="h")
    phi = random_fibration(rng, psi.domain, max_nodes=6, prefix="g")
    net_k = NetworkOfManifolds(k, random_dims(rng, k))
    net_g = pulled_back_network(phi, pulled_back_network(psi, net_k))
    w = random_family(rng, net_k)
    direct = interconnect(net_g, pullback_family(compose(psi, phi), None, w))
    staged = interconnect(net_g, pullback_family(phi, None, pullback_family(psi, None, w)))
    for _ in range(50):
        x = net_g.random_point(rng)
        assert same(direct(x), staged(x))
