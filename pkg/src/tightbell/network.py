"""Rooted tree networks of connector complexes and their states.

Physical parties are the uncontracted input legs, numbered depth first
from the root with legs visited in increasing order. This is the same order
in which contraction splices reference measurements, so the leg order of
every flattened functional matches ``TreeNetwork.parties``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .connector import (
    ConnectorComplex,
    _expand_site,
    align_consumer,
    congruent_contract,
    contract_connectors,
)
from .errors import CongruenceError, DimensionError, NotXorError
from .library import GraphSpec, build_family
from .numerics import StateVector, jacobi_eigh

FLAT_CAP_PARTIES = 13


def parse_angle(value):
    """Radians by default; a string ``deg:<x>`` is read in degrees."""
    if isinstance(value, str):
        v = value.strip()
        if v.startswith("deg:"):
            return math.radians(float(v[4:]))
        return float(v)
    return float(value)


@dataclass
class NodeSpec:
    """A network node: a library family with parameters, or a prebuilt complex."""

    id: str
    family: str = None
    params: dict = field(default_factory=dict)
    variant: str = "base"
    complex: ConnectorComplex = None
    check: bool = True

    def build(self):
        if self.complex is not None:
            return self.complex
        params = dict(self.params)
        for key in ("theta", "phi", "omega"):
            if key in params:
                params[key] = parse_angle(params[key])
        cx = build_family(self.family, params, check=self.check)
        return ConnectorComplex(
            cx.connector, cx.refs, cx.V, name=str(self.id), mu=cx.mu, meta=cx.meta
        )


@dataclass(frozen=True)
class Edge:
    producer: str
    consumer: str
    leg: int


class TreeNetwork:
    """Complexes contracted along a rooted tree; edges point towards the root."""

    def __init__(self, nodes, edges, root):
        if isinstance(nodes, dict):
            nodes = list(nodes.values())
        self.nodes = {}
        for n in nodes:
            if n.id in self.nodes:
                raise ValueError(f"duplicate node id {n.id!r}")
            if n.variant not in ("base", "aligned"):
                raise ValueError(f"node {n.id!r}: unknown variant {n.variant!r}")
            self.nodes[n.id] = n
        self.edges = [e if isinstance(e, Edge) else Edge(*e) for e in edges]
        self.root = root
        self._validate_shape()

    def _validate_shape(self):
        if self.root not in self.nodes:
            raise ValueError(f"root {self.root!r} is not a node")
        out_count = {nid: 0 for nid in self.nodes}
        self.incoming = {nid: {} for nid in self.nodes}
        for e in self.edges:
            for nid in (e.producer, e.consumer):
                if nid not in self.nodes:
                    raise ValueError(f"edge refers to unknown node {nid!r}")
            if e.producer == e.consumer:
                raise ValueError(f"self-loop on node {e.producer!r}")
            out_count[e.producer] += 1
            if e.leg in self.incoming[e.consumer]:
                raise ValueError(f"node {e.consumer!r} leg {e.leg} has two producers")
            self.incoming[e.consumer][e.leg] = e.producer
        if out_count[self.root] != 0:
            raise ValueError("the root must not feed another node")
        for nid, c in out_count.items():
            if nid != self.root and c != 1:
                raise ValueError(f"node {nid!r} must have exactly one outgoing edge, has {c}")
        seen = set()
        stack = [self.root]
        while stack:
            nid = stack.pop()
            if nid in seen:
                raise ValueError("network contains a cycle")
            seen.add(nid)
            stack.extend(self.incoming[nid].values())
        if seen != set(self.nodes):
            missing = sorted(set(self.nodes) - seen)
            raise ValueError(f"nodes not connected to the root: {missing}")

    @classmethod
    def from_dict(cls, data):
        nodes = [
            NodeSpec(
                id=str(n["id"]),
                family=n["family"],
                params=dict(n.get("params", {})),
                variant=n.get("variant", "base"),
            )
            for n in data["nodes"]
        ]
        edges = [Edge(str(e["from"]), str(e["to"]), int(e["leg"])) for e in data["edges"]]
        return cls(nodes, edges, str(data["root"]))

    def to_dict(self):
        nodes = []
        for n in self.nodes.values():
            if n.family is None:
                raise ValueError(f"node {n.id!r} holds a prebuilt complex and cannot be serialized")
            params = dict(n.params)
            if "graph" in params and isinstance(params["graph"], GraphSpec):
                params["graph"] = params["graph"].to_dict()
            nodes.append({"id": n.id, "family": n.family, "params": params, "variant": n.variant})
        edges = [{"from": e.producer, "to": e.consumer, "leg": e.leg} for e in self.edges]
        return {"nodes": nodes, "edges": edges, "root": self.root}

    @cached_property
    def complexes(self):
        """Node complexes; aligned nodes are conjugated to match their producers."""
        out = {}

        def resolve(nid):
            if nid in out:
                return out[nid]
            node = self.nodes[nid]
            cx = node.build()
            if cx.q <= max(self.incoming[nid], default=-1):
                raise DimensionError(f"node {nid!r} has no leg {max(self.incoming[nid])}")
            if node.variant == "aligned":
                for leg, pid in sorted(self.incoming[nid].items()):
                    cx = align_consumer(resolve(pid), cx, leg)
            out[nid] = cx
            return cx

        for nid in self.nodes:
            resolve(nid)
        return out

    @cached_property
    def parties(self):
        """Physical parties as (node id, leg) in depth-first order."""
        out = []

        def visit(nid):
            for leg in range(self.complexes[nid].q):
                pid = self.incoming[nid].get(leg)
                if pid is None:
                    out.append((nid, leg))
                else:
                    visit(pid)

        visit(self.root)
        return out

    @property
    def n_parties(self):
        return len(self.parties)

    @property
    def n_nodes(self):
        return len(self.nodes)

    def min_node_count(self):
        """Lower bound ceil((N-1)/(qmax-1)) on the number of nodes."""
        qmax = max(cx.q for cx in self.complexes.values())
        if qmax <= 1:
            return 1
        return math.ceil((self.n_parties - 1) / (qmax - 1))

    def is_chain(self):
        """Every node is 2->1 and feeds input 0 of the next one."""
        if any(cx.q != 2 for cx in self.complexes.values()):
            return False
        return all(set(inc) <= {0} for inc in self.incoming.values())

    def chain_order(self):
        """Nodes from the leaf end of a chain to the root."""
        if not self.is_chain():
            raise ValueError("network is not a chain of 2->1 nodes")
        order = [self.root]
        while 0 in self.incoming[order[-1]]:
            order.append(self.incoming[order[-1]][0])
        return order[::-1]


def contract_network(net, leg_order="descending"):
    """Contract all nodes into one N->1 complex, leaves first.

    Producers of one node are spliced from the highest leg down so that
    lower leg numbers stay valid; ``leg_order="ascending"`` splices from the
    lowest leg up with the shifts applied, which gives the same complex.
    """

    def resolve(nid):
        cx = net.complexes[nid]
        legs = sorted(net.incoming[nid])
        if leg_order == "descending":
            for leg in reversed(legs):
                cx = _contract_edge(net, resolve(net.incoming[nid][leg]), cx, leg, nid)
        else:
            shift = 0
            for leg in legs:
                prod = resolve(net.incoming[nid][leg])
                cx = _contract_edge(net, prod, cx, leg + shift, nid, label_leg=leg)
                shift += prod.q - 1
        return cx

    out = resolve(net.root)
    meta = dict(out.meta)
    meta["parties"] = list(net.parties)
    return ConnectorComplex(out.connector, out.refs, out.V, name=str(net.root), mu=out.mu, meta=meta)


def _contract_edge(net, producer, consumer, leg, nid, label_leg=None):
    try:
        return congruent_contract(producer, consumer, leg)
    except CongruenceError as exc:
        pid = net.incoming[nid][leg if label_leg is None else label_leg]
        raise CongruenceError(
            f"edge {pid} -> {nid} (leg {leg if label_leg is None else label_leg}): {exc}",
            deviation=exc.deviation,
        ) from exc


def root_vector(cx, b=1, y=1, eigenvalue=1):
    """Eigenvector of M_{b|y} for ``eigenvalue`` with its first nonzero entry real positive."""
    w, vecs = jacobi_eigh(cx.mbar[(b, y)])
    hits = [i for i in range(len(w)) if abs(w[i] - eigenvalue) <= 1e-6]
    if not hits:
        raise ValueError(
            f"M_{{{b:+d}|{y}}} has no eigenvalue {eigenvalue}; the bound on this side "
            "is not saturated"
        )
    v = vecs[:, hits[0]]
    k = int(np.argmax(np.abs(v) > 1e-12))
    v = v * (abs(v[k]) / v[k])
    return v / np.linalg.norm(v)


def network_state(net, b=1, y=1, eigenvalue=1):
    """|psi> = V^dagger |phi>, applying node co-isometries from the root outwards."""
    root = net.complexes[net.root]
    phi = root_vector(root, b, y, eigenvalue)
    tensor = phi.astype(complex)
    slots = [("node", net.root)]
    while True:
        pos = next((i for i, s in enumerate(slots) if s[0] == "node"), None)
        if pos is None:
            break
        nid = slots[pos][1]
        cx = net.complexes[nid]
        tensor = _expand_site(cx.vdag_tensor, pos, tensor)
        new = []
        for leg in range(cx.q):
            pid = net.incoming[nid].get(leg)
            new.append(("node", pid) if pid is not None else ("party", nid, leg))
        slots[pos : pos + 1] = new
    return StateVector.from_tensor(tensor).normalized()


@dataclass(frozen=True, eq=False)
class MpsFactor:
    """Matrices T_i of one site; ``matrices[i]`` has shape (left bond, right bond)."""

    site: int
    matrices: np.ndarray

    @property
    def bond_dims(self):
        return self.matrices.shape[1:]


def mps_factors(net, b=1, y=1, eigenvalue=1):
    """Matrix-product factors of the state of a chain network.

    The first factor holds row vectors <i|, the middle ones
    (<alpha| x <i|) V^dagger |beta>, and the last one (1 x <i|) V^dagger |phi>.
    """
    if not net.is_chain():
        raise ValueError("MPS factors need a chain geometry; use network_state instead")
    order = net.chain_order()
    cxs = [net.complexes[nid] for nid in order]
    d0 = cxs[0].dims[0]
    factors = [MpsFactor(0, np.eye(d0, dtype=complex)[:, None, :])]
    for k, cx in enumerate(cxs[:-1]):
        t = cx.vdag_tensor  # (alpha, i, beta)
        factors.append(MpsFactor(k + 1, np.transpose(t, (1, 0, 2)).copy()))
    last = cxs[-1]
    phi = root_vector(last, b, y, eigenvalue)
    t = np.tensordot(last.vdag_tensor, phi, axes=([2], [0]))  # (alpha, i)
    factors.append(MpsFactor(len(cxs), np.transpose(t)[:, :, None].copy()))
    return factors


def mps_contract(factors):
    """Full amplitude vector of a list of MPS factors."""
    acc = factors[0].matrices  # (i0, 1, bond)
    acc = acc.reshape(-1, acc.shape[-1])
    for f in factors[1:]:
        m = f.matrices  # (i, left, right)
        acc = np.einsum("al,ilr->air", acc, m).reshape(-1, m.shape[2])
    return acc.reshape(-1)


def expand_connector(net, star_values=None, check_xor=True):
    """Contract the bare connectors of the network in the correlator basis.

    ``star_values`` maps node ids to a constant replacing that node's C_*.
    """
    star_values = star_values or {}
    if net.n_parties > FLAT_CAP_PARTIES:
        raise ValueError(f"flat expansion is limited to {FLAT_CAP_PARTIES} parties")

    def resolve(nid):
        conn = net.complexes[nid].connector
        if check_xor and not conn.is_xor():
            raise NotXorError(f"node {nid!r} is not an XOR connector")
        if nid in star_values:
            conn = conn.with_star(star_values[nid])
        for leg in sorted(net.incoming[nid], reverse=True):
            conn = contract_connectors(resolve(net.incoming[nid][leg]), conn, leg)
        return conn

    return resolve(net.root)


def expand_xor(net, y=1, star_values=None):
    """Flat correlator tensor of the root functional C_y of an XOR network."""
    return expand_connector(net, star_values).functional(y)


# Standard geometries


def tsirelson_chain(n_parties):
    """Chain of N-1 Tsirelson complexes, each feeding input 0 of the next."""
    if n_parties < 2:
        raise ValueError("a chain needs at least two parties")
    nodes, edges = [], []
    for k in range(n_parties - 1):
        nodes.append(NodeSpec(f"t{k}", "tsirelson", {}, "aligned" if k else "base"))
        if k:
            edges.append(Edge(f"t{k - 1}", f"t{k}", 0))
    return TreeNetwork(nodes, edges, f"t{n_parties - 2}")


def tsirelson_binary_tree():
    """Three Tsirelson complexes: two leaves feeding both inputs of the root."""
    nodes = [
        NodeSpec("a", "tsirelson"),
        NodeSpec("b", "tsirelson"),
        NodeSpec("r", "tsirelson", variant="aligned"),
    ]
    return TreeNetwork(nodes, [Edge("a", "r", 0), Edge("b", "r", 1)], "r")


def chain_of(complexes, align=True):
    """Chain network from prebuilt complexes (first one is the leaf end)."""
    nodes, edges = [], []
    for k, cx in enumerate(complexes):
        variant = "aligned" if (align and k) else "base"
        nodes.append(NodeSpec(f"n{k}", complex=cx, variant=variant))
        if k:
            edges.append(Edge(f"n{k - 1}", f"n{k}", 0))
    return TreeNetwork(nodes, edges, f"n{len(complexes) - 1}")


def wbc_theta_range(omega):
    """Open interval of theta for which both WBC nodes of ``wbc_pair_tree`` are valid."""
    lo = math.acos(min(1.0, abs(math.sin(omega))))
    return lo, math.pi - lo


def wbc_pair_tree(theta, omega, with_tsirelson=False):
    """Two WBC complexes (theta, -omega, omega) -> (pi - theta, -omega, omega) on leg 0.

    The angle choice makes the producer's output frame match the consumer's
    leg-0 references up to a rotation. With ``with_tsirelson`` a Tsirelson
    complex also feeds leg 1 of the consumer, which then needs omega = pi/4
    for its two leg-1 references to be orthogonal.
    """
    nodes = [
        NodeSpec("w0", "wbc", {"theta": theta, "phi": -omega, "omega": omega}),
        NodeSpec("w1", "wbc", {"theta": math.pi - theta, "phi": -omega, "omega": omega}, "aligned"),
    ]
    edges = [Edge("w0", "w1", 0)]
    if with_tsirelson:
        nodes.append(NodeSpec("t", "tsirelson"))
        edges.append(Edge("t", "w1", 1))
    return TreeNetwork(nodes, edges, "w1")
