"""Builders for the four analytic connector-complex families and graph states.

Every builder returns a 2-> 1 or q->1 complex whose output space is a qubit
spanned by two states (phi_plus, phi_minus). The default mu of every complex
selects the functional B_1 alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .bell import CorrelatorTensor, MeasurementSystem
from .connector import Connector, ConnectorComplex
from .errors import CapExceededError, ParameterError
from .numerics import I2, SX, SY, SZ, StateVector

SQ2 = np.sqrt(2.0)
GRAPH_STATE_CAP = 14


def _complex(b0, b1, observables, basis, name, params, states):
    """Assemble a complex from B_0, B_1, reference observables and the V rows."""
    connector = Connector.from_functionals([b0, b1])
    refs = MeasurementSystem.from_observables(observables)
    v = np.array([s.amplitudes.conj() for s in basis])
    meta = {
        "family": name,
        "params": dict(params),
        "phi_plus": states[0],
        "phi_minus": states[1],
    }
    return ConnectorComplex(connector, refs, v, name=name, meta=meta)


def _qubits(amps):
    return StateVector((2,) * int(np.log2(len(amps))), np.asarray(amps, dtype=complex))


# Tsirelson


def tsirelson_functionals():
    """Normalized CHSH pair (B_0, B_1) with quantum bounds -1 <= B <= 1."""
    s = 1.0 / (2.0 * SQ2)
    b0 = CorrelatorTensor.from_terms(
        (2, 2), {(0, 0): -s, (1, 0): s, (0, 1): s, (1, 1): s}
    )
    b1 = CorrelatorTensor.from_terms(
        (2, 2), {(0, 0): s, (1, 0): s, (0, 1): s, (1, 1): -s}
    )
    return b0, b1


def build_tsirelson():
    b0, b1 = tsirelson_functionals()
    observables = [[SZ, SX], [(SZ + SX) / SQ2, (SZ - SX) / SQ2]]
    phi_p = _qubits([1 / SQ2, 0, 0, 1 / SQ2])
    # global phase chosen so that B_0 maps phi_plus to +phi_minus
    phi_m = _qubits([0, -1 / SQ2, 1 / SQ2, 0])
    return _complex(b0, b1, observables, [phi_p, phi_m], "tsirelson", {}, (phi_p, phi_m))


# Tilted CHSH


@dataclass(frozen=True)
class TiltedParams:
    theta: float

    @cached_property
    def alpha(self):
        if abs(self.theta - np.pi / 4) <= 4 * np.finfo(float).eps:
            return 0.0
        return 2.0 / np.sqrt(1.0 + 2.0 * np.tan(2.0 * self.theta) ** 2)

    @cached_property
    def beta(self):
        return np.sqrt(8.0 + 2.0 * self.alpha**2)

    @cached_property
    def mu(self):
        return np.arctan(np.sin(2.0 * self.theta))


def tilted_degenerate(theta, tol=1e-12):
    """True at theta = m pi/2, where the two reference states become product states."""
    r = theta / (np.pi / 2)
    return abs(r - round(r)) <= tol


def tilted_functionals(theta):
    p = TiltedParams(theta)
    a, b = p.alpha, p.beta
    b0 = CorrelatorTensor.from_terms(
        (2, 2),
        {(1, "*"): a / b, (0, 0): -1 / b, (1, 0): 1 / b, (0, 1): 1 / b, (1, 1): 1 / b},
    )
    b1 = CorrelatorTensor.from_terms(
        (2, 2),
        {(0, "*"): a / b, (0, 0): 1 / b, (1, 0): 1 / b, (0, 1): 1 / b, (1, 1): -1 / b},
    )
    return b0, b1


def build_tilted(theta, check=True):
    """Tilted CHSH complex; ``check=False`` allows angles outside (0, pi/4]."""
    theta = float(theta)
    if check and not (0.0 < theta <= np.pi / 4 + 1e-15):
        raise ParameterError(f"tilted angle must lie in (0, pi/4], got {theta}")
    p = TiltedParams(theta)
    b0, b1 = tilted_functionals(theta)
    c, s = np.cos(p.mu), np.sin(p.mu)
    observables = [[SZ, SX], [c * SZ + s * SX, c * SZ - s * SX]]
    ct, st = np.cos(theta), np.sin(theta)
    phi_p = _qubits([ct, 0, 0, st])
    # global phase chosen so that B_0 maps phi_plus to +phi_minus
    phi_m = _qubits([0, -st, ct, 0])
    params = {"theta": theta, "alpha": p.alpha, "beta": p.beta, "mu": p.mu}
    return _complex(b0, b1, observables, [phi_p, phi_m], "tilted", params, (phi_p, phi_m))


# WBC


def wbc_beta(theta, phi, omega):
    return np.sin(theta) * np.sin(omega - phi) * np.sin(theta + phi + omega)


def wbc_validity(theta, phi, omega):
    """The product cos(theta+phi) cos(phi) cos(theta+omega) cos(omega); valid when < 0."""
    return np.cos(theta + phi) * np.cos(phi) * np.cos(theta + omega) * np.cos(omega)


def wbc_degenerate(theta, phi, omega, tol=1e-12):
    """True at theta = m pi or omega = phi + m pi."""
    return abs(np.sin(theta)) <= tol or abs(np.sin(omega - phi)) <= tol


def wbc_functionals(theta, phi, omega):
    """(B_0, B_1); B_0 is B_1 with the inputs of both parties exchanged."""
    ctp, cto = np.cos(theta + phi), np.cos(theta + omega)
    cp, co = np.cos(phi), np.cos(omega)
    beta = wbc_beta(theta, phi, omega)
    scale = 1.0 / beta if abs(beta) > 1e-14 else 1.0
    c = np.zeros((3, 3))
    c[1, 1] = ctp * cto * co
    c[1, 2] = -ctp * cto * cp
    c[2, 2] = cp * co * ctp
    c[2, 1] = -cp * co * cto
    b1 = CorrelatorTensor(scale * c)
    swapped = np.zeros((3, 3))
    swapped[1:, 1:] = c[1:, 1:][::-1, ::-1]
    b0 = CorrelatorTensor(scale * swapped)
    return b0, b1


def wbc_gamma(theta, phi, omega):
    """Closed-form ratio of quantum to classical maximum of the WBC connector."""
    ctp, cto = np.cos(theta + phi), np.cos(theta + omega)
    cp, co = np.cos(phi), np.cos(omega)
    best = max(
        abs(cto * co * (ctp + s * cp)) + abs(ctp * cp * (cto + s * co)) for s in (1, -1)
    )
    return abs(wbc_beta(theta, phi, omega)) / best


def build_wbc(theta, phi, omega, check=True):
    theta, phi, omega = float(theta), float(phi), float(omega)
    if check:
        val = wbc_validity(theta, phi, omega)
        if not val < 0:
            raise ParameterError(
                "WBC angles need cos(theta+phi)cos(phi)cos(theta+omega)cos(omega) < 0, "
                f"got {val:.6g}"
            )
        if wbc_degenerate(theta, phi, omega):
            raise ParameterError("WBC angles are degenerate (theta = m pi or omega = phi + m pi)")
    b0, b1 = wbc_functionals(theta, phi, omega)
    observables = [
        [SX, np.cos(theta) * SX + np.sin(theta) * SY],
        [np.cos(phi) * SX + np.sin(phi) * SY, np.cos(omega) * SX + np.sin(omega) * SY],
    ]
    phi_p = _qubits([1 / SQ2, 0, 0, 1j / SQ2])
    phi_m = _qubits([1 / SQ2, 0, 0, -1j / SQ2])
    params = {
        "theta": theta,
        "phi": phi,
        "omega": omega,
        "beta": wbc_beta(theta, phi, omega),
        "sigma": theta + phi + omega,
    }
    return _complex(b0, b1, observables, [phi_m, phi_p], "wbc", params, (phi_p, phi_m))


# Graphs and BASTA


@dataclass(frozen=True)
class GraphSpec:
    """Simple connected graph on vertices 0..q-1 with a distinguished root."""

    q: int
    edges: tuple
    root: int = 0

    def __post_init__(self):
        q = int(self.q)
        norm = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if not (0 <= i < q and 0 <= j < q):
                raise ValueError(f"edge ({i}, {j}) has a vertex outside 0..{q - 1}")
            pair = (min(i, j), max(i, j))
            if pair in norm:
                raise ValueError(f"duplicate edge {pair}")
            norm.add(pair)
        if not 0 <= int(self.root) < q:
            raise ValueError(f"root {self.root} outside 0..{q - 1}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "edges", tuple(sorted(norm)))
        object.__setattr__(self, "root", int(self.root))

    @classmethod
    def star(cls, q, root=0):
        return cls(q, tuple((root, j) for j in range(q) if j != root), root)

    @classmethod
    def triangle(cls):
        return cls(3, ((0, 1), (1, 2), (0, 2)), 0)

    @classmethod
    def from_dict(cls, data):
        return cls(int(data["q"]), tuple(tuple(e) for e in data["edges"]), int(data.get("root", 0)))

    def to_dict(self):
        return {"q": self.q, "edges": [list(e) for e in self.edges], "root": self.root}

    def neighbors(self, i):
        return frozenset(b if a == i else a for a, b in self.edges if i in (a, b))

    @property
    def n1(self):
        return len(self.neighbors(self.root))

    def is_connected(self):
        seen, stack = {0}, [0]
        while stack:
            v = stack.pop()
            for w in self.neighbors(v):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.q

    def even_neighbours(self, i):
        """Vertices other than the root and i adjacent to both or to neither."""
        nr, ni = self.neighbors(self.root), self.neighbors(i)
        return frozenset(
            j for j in range(self.q) if j not in (self.root, i) and ((j in nr) == (j in ni))
        )


def random_connected_graph(rng, q, p=0.5, root=0):
    """Random spanning tree plus independent extra edges with probability p."""
    order = list(rng.permutation(q))
    edges = set()
    for k in range(1, q):
        a, b = order[k], order[int(rng.integers(0, k))]
        edges.add((min(a, b), max(a, b)))
    for i in range(q):
        for j in range(i + 1, q):
            if (i, j) not in edges and rng.random() < p:
                edges.add((i, j))
    return GraphSpec(q, tuple(sorted((int(a), int(b)) for a, b in edges)), root)


def graph_state(g, sign=1):
    """Graph state (sign=+1) or antigraph state (sign=-1) with vertex 0 most significant."""
    if g.q > GRAPH_STATE_CAP:
        raise CapExceededError(f"graph states are limited to {GRAPH_STATE_CAP} vertices")
    bits = (np.arange(2**g.q)[:, None] >> np.arange(g.q - 1, -1, -1)[None, :]) & 1
    parity = np.zeros(2**g.q, dtype=int)
    for i, j in g.edges:
        parity += bits[:, i] * bits[:, j]
    if sign < 0:
        parity += bits.sum(axis=1)
    amps = (1 - 2 * (parity % 2)) / np.sqrt(2.0**g.q)
    return StateVector((2,) * g.q, amps.astype(complex))


def stabilizer(g, i):
    """Local factors of G_i = X_i prod_{j in n(i)} Z_j (identity elsewhere)."""
    ops = [I2] * g.q
    ops[i] = SX
    for j in g.neighbors(i):
        ops[j] = SZ
    return ops


def _term(q, assign):
    """Correlator index tuple with '*' on unassigned legs."""
    return tuple(assign.get(k, "*") for k in range(q))


def basta_terms(g):
    """Unnormalized addends of the two BASTA functionals.

    Returns two lists of (coefficient, {party: input}) monomials whose sums
    are beta_1 B_1 and beta_0 B_0. Monomials with several inputs on the
    same party are expanded, so the lists are grouped per addend: each item
    is a list of monomials forming one addend.
    """
    r, n1 = g.root, g.n1
    nr = g.neighbors(r)
    b1_addends = []
    # n1 (K0 + K1)_r prod_{j in n(r)} K1_j
    base = {j: 1 for j in nr}
    b1_addends.append([(n1, {**base, r: 0}), (n1, {**base, r: 1})])
    for i in sorted(nr):
        rest = {j: 1 for j in g.neighbors(i) if j != r}
        b1_addends.append([(1.0, {**rest, r: 0, i: 0}), (-1.0, {**rest, r: 1, i: 0})])
    for j in range(g.q):
        if j == r or j in nr:
            continue
        b1_addends.append([(1.0, {**{k: 1 for k in g.neighbors(j)}, j: 0})])
    b0_addends = []
    allk1 = {j: 1 for j in range(g.q) if j != r}
    b0_addends.append([(n1, {**allk1, r: 0}), (-n1, {**allk1, r: 1})])
    for i in sorted(nr):
        en = {j: 1 for j in g.even_neighbours(i)}
        b0_addends.append([(-1.0, {**en, r: 0, i: 0}), (-1.0, {**en, r: 1, i: 0})])
    return b1_addends, b0_addends


def basta_betas(g):
    return (2 * SQ2 - 1) * g.n1 + g.q - 1, 2 * SQ2 * g.n1


def _addends_tensor(q, addends, scale):
    terms = {}
    for addend in addends:
        for c, assign in addend:
            key = _term(q, assign)
            terms[key] = terms.get(key, 0.0) + c * scale
    return CorrelatorTensor.from_terms((2,) * q, terms)


def basta_functionals(g):
    beta1, beta0 = basta_betas(g)
    a1, a0 = basta_terms(g)
    b1 = _addends_tensor(g.q, a1, 1.0 / beta1)
    b0 = _addends_tensor(g.q, a0, 1.0 / beta0)
    return b0, b1


def basta_observables(g):
    obs = [[SX, SZ] for _ in range(g.q)]
    obs[g.root] = [(SX + SZ) / SQ2, (SX - SZ) / SQ2]
    return obs


def build_basta(g):
    if g.q < 2:
        raise ParameterError("a BASTA complex needs at least two vertices")
    if not g.is_connected():
        raise ParameterError("graph must be connected")
    if g.n1 < 1:
        raise ParameterError("the root vertex needs at least one neighbour")
    b0, b1 = basta_functionals(g)
    phi_p, phi_m = graph_state(g, 1), graph_state(g, -1)
    params = {"graph": g.to_dict()}
    return _complex(b0, b1, basta_observables(g), [phi_p, phi_m], "basta", params, (phi_p, phi_m))


# Dispatch used by network files and the command line


FAMILIES = ("tsirelson", "tilted", "wbc", "basta")


def build_family(family, params=None, check=True):
    params = dict(params or {})
    if family == "tsirelson":
        return build_tsirelson()
    if family == "tilted":
        return build_tilted(float(params["theta"]), check=check)
    if family == "wbc":
        return build_wbc(
            float(params["theta"]), float(params["phi"]), float(params["omega"]), check=check
        )
    if family == "basta":
        graph = params.get("graph", params)
        if not isinstance(graph, GraphSpec):
            graph = GraphSpec.from_dict(graph)
        return build_basta(graph)
    raise ParameterError(f"unknown family {family!r}; expected one of {FAMILIES}")
