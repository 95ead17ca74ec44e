"""Fixed-step RK4 on node-keyed states, and numerical checks of fibration maps.

The integrator works block by block on the keyed representation, so a
block-copy map between two networks commutes with every stage of a step
bit for bit. The checks below rely on that: for a fibration the expected
residuals are exactly zero, and the tolerances only guard against
accidental reassociation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .graphs import FibrationWitness, GraphMorphism
from .network import (NetworkOfManifolds, NotSurjectiveError, ShapeError, TotalPoint, check_network_morphism,
                      check_point, polydiagonal_deviation, pullback_point, pullback_tangent)
from .open_systems import ControlFamily, InterconnectedField, resolve_witness, interconnect, pullback_family

DEFAULT_SEED = 0


class IntegrationError(ArithmeticError):
    def __init__(self, step: int, node: str):
        self.step = step
        self.node = node
        super().__init__(f"non-finite state at step {step} (node {node!r})")


@dataclass(frozen=True)
class IntegratorConfig:
    h: float
    t_end: float
    method: str = "rk4"

    def __post_init__(self):
        if self.method != "rk4":
            raise ValueError(f"unsupported method {self.method!r}")
        if not (self.h > 0 and self.t_end > 0 and math.isfinite(self.h) and math.isfinite(self.t_end)):
            raise ValueError("step and end time must be positive and finite")
        if self.h > self.t_end:
            raise ValueError("step is larger than the integration interval")

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.h))


@dataclass
class Trajectory:
    times: np.ndarray
    states: list[TotalPoint]

    @property
    def final(self) -> TotalPoint:
        return self.states[-1]

    def __len__(self):
        return len(self.states)


def _axpy(x: Mapping[str, np.ndarray], c: float, k: Mapping[str, np.ndarray]) -> TotalPoint:
    return {a: x[a] + c * k[a] for a in x}


def rk4_step(f: InterconnectedField, x: Mapping[str, np.ndarray], h: float) -> TotalPoint:
    half = 0.5 * h
    k1 = f.evaluate(x)
    k2 = f.evaluate(_axpy(x, half, k1))
    k3 = f.evaluate(_axpy(x, half, k2))
    k4 = f.evaluate(_axpy(x, h, k3))
    sixth = h / 6.0
    return {a: x[a] + sixth * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]) for a in x}


def rk4_integrate(f: InterconnectedField, x0: Mapping[str, np.ndarray],
                  cfg: IntegratorConfig) -> Trajectory:
    """Classical RK4 with ``cfg.steps`` uniform steps; ``times[i] = i*h``.

    Raises :class:`IntegrationError` at the first step producing NaN or inf.
    """
    check_point(f.network, x0)
    x = {a: np.array(v, dtype=float) for a, v in x0.items()}
    states = [x]
    for n in range(1, cfg.steps + 1):
        x = rk4_step(f, x, cfg.h)
        for a in sorted(x):
            if not np.all(np.isfinite(x[a])):
                raise IntegrationError(n, a)
        states.append(x)
    return Trajectory(np.arange(cfg.steps + 1) * cfg.h, states)


@dataclass
class ConjugacyReport:
    samples: int
    max_residual: float
    residual_per_node: dict[str, float]
    seed: int

    def holds(self, tol: float = 1e-12) -> bool:
        return self.max_residual <= tol


@dataclass
class DeviationReport:
    max_deviation: float
    initial_deviation: float
    times: np.ndarray = field(repr=False)
    deviations: np.ndarray = field(repr=False)
    notes: list[str] = field(default_factory=list)

    def holds(self, tol: float = 1e-10) -> bool:
        return self.max_deviation <= tol


def _max_abs(u: np.ndarray, v: np.ndarray) -> float:
    d = np.abs(u - v)
    return float(np.max(d)) if d.size else 0.0


def _prepare(phi, witness, net, net_cod, w_cod):
    witness = resolve_witness(phi, witness)
    problems = check_network_morphism(phi, net, net_cod)
    if problems:
        raise ShapeError("; ".join(problems))
    pulled = pullback_family(phi, witness, w_cod)
    return interconnect(net, pulled), interconnect(net_cod, w_cod)


def check_vectorfield_conjugacy(phi: GraphMorphism, witness: FibrationWitness | None,
                                net: NetworkOfManifolds, net_cod: NetworkOfManifolds,
                                w_cod: ControlFamily, samples: int = 100,
                                seed: int = DEFAULT_SEED) -> ConjugacyReport:
    """Residual of ``field(phi* w') ∘ P phi == D P phi ∘ field'(w')`` at random points.

    Codomain points are standard normal per coordinate.
    """
    f_dom, f_cod = _prepare(phi, witness, net, net_cod, w_cod)
    rng = np.random.default_rng(seed)
    per_node = {a: 0.0 for a in net.graph.nodes}
    for _ in range(samples):
        xc = net_cod.random_point(rng)
        lhs = f_dom(pullback_point(phi, xc, net_cod))
        rhs = pullback_tangent(phi, f_cod(xc), net_cod)
        for a in per_node:
            r = _max_abs(lhs[a], rhs[a])
            if not r <= per_node[a]:
                per_node[a] = r
    worst = max(per_node.values(), default=0.0)
    return ConjugacyReport(samples, worst, per_node, seed)


def check_trajectory_semiconjugacy(phi: GraphMorphism, witness: FibrationWitness | None,
                                   net: NetworkOfManifolds, net_cod: NetworkOfManifolds,
                                   w_cod: ControlFamily, x0_cod: Mapping[str, np.ndarray],
                                   cfg: IntegratorConfig) -> DeviationReport:
    """Integrate both systems and compare ``P phi (x'(t))`` with ``y(t)``.

    ``y`` starts at ``P phi (x'(0))`` and follows the pulled-back field.
    """
    f_dom, f_cod = _prepare(phi, witness, net, net_cod, w_cod)
    upstairs = rk4_integrate(f_cod, x0_cod, cfg)
    downstairs = rk4_integrate(f_dom, pullback_point(phi, x0_cod, net_cod), cfg)
    devs = np.empty(len(upstairs))
    for i, (xc, y) in enumerate(zip(upstairs.states, downstairs.states)):
        image = pullback_point(phi, xc)
        devs[i] = max((_max_abs(image[a], y[a]) for a in y), default=0.0)
    return DeviationReport(float(np.max(devs)), float(devs[0]), upstairs.times, devs)


def check_polydiagonal_invariance(q: GraphMorphism, net: NetworkOfManifolds, w: ControlFamily,
                                  x0: Mapping[str, np.ndarray],
                                  cfg: IntegratorConfig) -> DeviationReport:
    """Track how far a trajectory of ``field(w)`` strays from the polydiagonal of ``q``.

    Invariance is only expected when ``x0`` lies on the polydiagonal and ``w``
    is pulled back along ``q``; otherwise the report just records the
    deviation (see ``notes``).
    """
    if not q.is_node_surjective():
        raise NotSurjectiveError("node map is not surjective")
    traj = rk4_integrate(interconnect(net, w), x0, cfg)
    devs = np.array([polydiagonal_deviation(q, x) for x in traj.states])
    notes = []
    if devs[0] != 0.0:
        notes.append("initial state is off the polydiagonal; no invariance is claimed")
    return DeviationReport(float(np.max(devs)), float(devs[0]), traj.times, devs, notes)
