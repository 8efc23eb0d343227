"""Connector complexes for tight multipartite quantum Bell inequalities.

Build tight complexes, contract them along rooted trees, construct the
maximizing network states and compare classical, no-signalling and quantum
values of the resulting Bell functionals.
"""

from .bell import CorrelatorTensor, MeasurementSystem, ProbabilityFunctional
from .bounds import bound_report, classical_max, gamma, gamma_product_bound, ns_max_lp, ns_max_xor
from .connector import Connector, ConnectorComplex, congruent_contract, verify_tight
from .library import GraphSpec, build_basta, build_family, build_tilted, build_tsirelson, build_wbc
from .network import NodeSpec, TreeNetwork, contract_network, expand_xor, network_state
from .numerics import StateVector, apply_local
from .selftest import fst_verdict

__all__ = [
    "CorrelatorTensor",
    "MeasurementSystem",
    "ProbabilityFunctional",
    "bound_report",
    "classical_max",
    "gamma",
    "gamma_product_bound",
    "ns_max_lp",
    "ns_max_xor",
    "Connector",
    "ConnectorComplex",
    "congruent_contract",
    "verify_tight",
    "GraphSpec",
    "build_basta",
    "build_family",
    "build_tilted",
    "build_tsirelson",
    "build_wbc",
    "NodeSpec",
    "TreeNetwork",
    "contract_network",
    "expand_xor",
    "network_state",
    "StateVector",
    "apply_local",
    "fst_verdict",
]

__version__ = "0.1.0"
