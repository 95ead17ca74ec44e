"""Dynamical systems on networks of Euclidean spaces, and the maps between
them induced by graph fibrations."""

from .dsl import parse, to_text
from .dynamics import (IntegratorConfig, check_polydiagonal_invariance, check_trajectory_semiconjugacy,
                       check_vectorfield_conjugacy, rk4_integrate)
from .graphs import (DirectedMultigraph, FibrationWitness, GraphMorphism, compose, fibration_witness,
                     identity, input_tree, is_fibration)
from .network import NetworkOfManifolds, pullback_point, pullback_tangent
from .open_systems import ControlFamily, OpenSystem, interconnect, pullback_family
from .quotients import NodePartition, coarsest_balanced_partition, minimal_base, quotient_network

__version__ = "0.1.0"
