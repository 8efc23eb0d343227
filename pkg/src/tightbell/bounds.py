"""Classical, no-signalling and quantum values of Bell functionals.

Classical maxima come from exhaustive enumeration of deterministic
strategies. For full-correlation functionals the no-signalling maximum has
a closed form (each full correlator can be set to +-1 independently); a
small linear program over the no-signalling polytope validates it.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bell import (
    BellOperator,
    CorrelatorTensor,
    DeterministicStrategy,
    behavior_weights,
    corr_to_prob,
    evaluate_on_strategy,
    pair_index,
)
from .connector import Connector
from .errors import CapExceededError, NotXorError
from .lp import linprog_max
from .network import contract_network, expand_connector, network_state

ENUM_CAP = 2**28
CHUNK = 2**20
TIE_TOL = 1e-12
LP_MAX_PARTIES = 4


def _strategy_rows(m):
    """Rows [1, a_0, ..., a_{m-1}] for every deterministic local assignment, +1 first."""
    rows = []
    for bits in itertools.product((1, -1), repeat=m):
        rows.append((1.0,) + tuple(float(a) for a in bits))
    return np.array(rows)


@dataclass
class ClassicalResult:
    value: float
    strategy: DeterministicStrategy
    signed_value: float


def _tasks(coeffs, rows, prefix=0):
    """Split enumeration into blocks of at most CHUNK strategies.

    Yields (offset, partial coefficients, remaining strategy rows); offsets
    follow the lexicographic strategy order.
    """
    remaining = int(np.prod([r.shape[0] for r in rows]))
    if remaining <= CHUNK or len(rows) == 1:
        yield prefix * remaining, coeffs, rows
        return
    first, rest = rows[0], rows[1:]
    sub_size = int(np.prod([r.shape[0] for r in rest]))
    for i in range(first.shape[0]):
        sub = np.tensordot(first[i], coeffs, axes=([0], [0]))
        for off, c, r in _tasks(sub, rest, 0):
            yield (prefix * first.shape[0] + i) * sub_size + off, c, r


def _values(coeffs, rows):
    v = coeffs
    for k, r in enumerate(rows):
        v = np.moveaxis(np.tensordot(r, v, axes=([1], [k])), 0, k)
    return v.reshape(-1)


def _block_max(task):
    off, c, r = task
    return off, float(np.max(np.abs(_values(c, r))))


def classical_max(t, cap=ENUM_CAP, threads=1):
    """Largest |value| over deterministic strategies, lexicographically first on ties.

    Blocks of strategies may be evaluated on several threads; the reduction
    runs in block order, so the result does not depend on ``threads``.
    """
    arities = t.arities
    total = 2 ** sum(arities)
    if total > cap:
        raise CapExceededError(
            f"{total} deterministic strategies exceed the enumeration cap {cap}; "
            "use gamma_product_bound for larger networks"
        )
    rows = [_strategy_rows(m) for m in arities]
    tasks = list(_tasks(t.coeffs, rows))
    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            maxima = list(pool.map(_block_max, tasks))
    else:
        maxima = [_block_max(task) for task in tasks]
    best = max(m for _, m in maxima)
    thresh = best - TIE_TOL * max(1.0, best)
    for (off, c, r), (_, m) in zip(tasks, maxima):
        if m < thresh:
            continue
        vals = _values(c, r)
        first = int(np.nonzero(np.abs(vals) >= thresh)[0][0])
        strat = DeterministicStrategy.from_index(arities, off + first)
        signed = float(vals[first])
        return ClassicalResult(abs(signed), strat, signed)
    raise RuntimeError("enumeration produced no maximum")


def gamma(c):
    """Quantum-to-classical ratio 1 / max_y classical_max(C_y) of an XOR connector."""
    if not c.is_xor():
        raise NotXorError("gamma is defined for XOR connectors")
    worst = max(classical_max(c.functional(y)).value for y in range(c.out_arity))
    return 1.0 / worst


def gamma_product_bound(net):
    """1/Gamma with Gamma the product of the node gammas."""
    g = 1.0
    for nid, cx in net.complexes.items():
        if not cx.connector.is_xor():
            raise NotXorError(f"node {nid!r} is not an XOR connector")
        g *= gamma(cx.connector)
    return 1.0 / g


def ns_max_xor(t):
    """No-signalling maximum of a full-correlation functional."""
    if not t.is_xor(1e-14):
        raise NotXorError("closed form needs an XOR functional; use ns_max_lp instead")
    mask = t.star_mask()
    return t.constant_term + float(np.sum(np.abs(t.coeffs[~mask])))


def _ns_constraints(arities):
    """Equality constraints of the no-signalling polytope in the probability layout."""
    shape = tuple(2 * m for m in arities)
    n = int(np.prod(shape))
    idx = np.arange(n).reshape(shape)
    rows = []

    def pick(k, a, x):
        return pair_index(a, x, arities[k])

    # normalization for every setting
    for xs in itertools.product(*[range(m) for m in arities]):
        row = np.zeros(n)
        for outs in itertools.product((1, -1), repeat=len(arities)):
            row[idx[tuple(pick(k, a, x) for k, (a, x) in enumerate(zip(outs, xs)))]] = 1.0
        rows.append(row)
    # marginals of the other parties do not depend on x_k
    for k, mk in enumerate(arities):
        others = [j for j in range(len(arities)) if j != k]
        for xs in itertools.product(*[range(arities[j]) for j in others]):
            for outs in itertools.product((1, -1), repeat=len(others)):
                fixed = {j: pick(j, a, x) for j, a, x in zip(others, outs, xs)}

                def marginal(xk):
                    row = np.zeros(n)
                    for ak in (1, -1):
                        pos = [fixed.get(j) for j in range(len(arities))]
                        pos[k] = pick(k, ak, xk)
                        row[idx[tuple(pos)]] = 1.0
                    return row

                base = marginal(0)
                for xk in range(1, mk):
                    rows.append(base - marginal(xk))
    a = np.array(rows)
    b = np.zeros(len(rows))
    b[: int(np.prod(arities))] = 1.0
    return a, b


def ns_max_lp(p):
    """Maximum over no-signalling behaviors by linear programming (N <= 4)."""
    if isinstance(p, CorrelatorTensor):
        p = corr_to_prob(p)
    n_vars = int(np.prod(p.coeffs.shape))
    if len(p.arities) > LP_MAX_PARTIES or n_vars > 256:
        raise CapExceededError(
            f"linear program limited to {LP_MAX_PARTIES} parties and 256 variables, got {n_vars}"
        )
    a, b = _ns_constraints(p.arities)
    w = behavior_weights(p).reshape(-1)
    res = linprog_max(w, a, b)
    if res.status != "optimal":
        raise RuntimeError(f"no-signalling linear program ended with status {res.status}")
    return res.value


def network_functional(net, y=1):
    """C_y of the contracted network as a flat correlator tensor."""
    try:
        return expand_connector(net).functional(y)
    except NotXorError:
        return contract_network(net).connector.functional(y)


def quantum_witness(net, y=1, b=1, eigenvalue=1):
    """<psi|C_y[A]|psi> on the network state built from the (b, y, eigenvalue) selector."""
    cx = contract_network(net)
    psi = network_state(net, b, y, eigenvalue)
    op = BellOperator(cx.connector.functional(y), cx.refs)
    return float(np.real(op.expectation(psi)))


def effect_witness(net, b=1, y=1, eigenvalue=1):
    """<psi|C_{b|y}[A]|psi>; equals ``eigenvalue`` when the bound is saturated."""
    cx = contract_network(net)
    psi = network_state(net, b, y, eigenvalue)
    op = BellOperator(cx.connector.effect(b, y), cx.refs)
    return float(np.real(op.expectation(psi)))


def classical_connector(c):
    """Cl(C): C_* unchanged, every C_y multiplied by gamma(C)."""
    g = gamma(c)
    t = np.array(c.tensor)
    t[1:] *= g
    return Connector(t)


def classically_tight_witness(c, tol=1e-9, max_inputs=2):
    """Deterministic inputs making every output of C deterministic, or None."""
    if not c.is_xor():
        raise NotXorError("classical tightness is checked for XOR connectors")
    if any(m > max_inputs for m in c.in_arities):
        raise CapExceededError(f"legs with more than {max_inputs} inputs are not searched")
    functionals = [c.functional(y) for y in range(c.out_arity)]
    for idx in range(2 ** sum(c.in_arities)):
        s = DeterministicStrategy.from_index(c.in_arities, idx)
        if all(abs(abs(evaluate_on_strategy(f, s)) - 1.0) <= tol for f in functionals):
            return s
    return None


def is_classically_tight(c, tol=1e-9):
    return classically_tight_witness(c, tol) is not None


@dataclass
class BoundReport:
    n_parties: int
    y: int
    classical_max: float
    classical_strategy: tuple
    ns_max: float
    ns_method: str
    quantum_witness: float
    gamma_bound: float = None
    ns_lp: float = None
    extra: dict = field(default_factory=dict)

    CSV_HEADER = ("N", "classical", "ns", "quantum_witness", "gamma_bound")

    def csv_row(self):
        vals = [self.classical_max, self.ns_max, self.quantum_witness, self.gamma_bound]
        return [str(self.n_parties)] + [fmt17(v) for v in vals]

    def to_dict(self):
        return {
            "N": self.n_parties,
            "y": self.y,
            "classical_max": self.classical_max,
            "classical_strategy": [list(p) for p in self.classical_strategy],
            "ns_max": self.ns_max,
            "ns_method": self.ns_method,
            "ns_lp": self.ns_lp,
            "quantum_witness": self.quantum_witness,
            "gamma_bound": self.gamma_bound,
            **self.extra,
        }

    def consistent(self, tol=1e-9):
        ok = self.classical_max <= self.ns_max + tol
        ok = ok and self.classical_max <= self.quantum_witness + tol
        if self.gamma_bound is not None:
            ok = ok and self.classical_max <= self.gamma_bound + tol
        return ok


def fmt17(v):
    if v is None:
        return ""
    return f"{v:.17g}"


def bound_report(net, y=1, lp="auto", threads=1):
    """All bounds of the root functional C_y of a network."""
    t = network_functional(net, y)
    cl = classical_max(t, threads=threads)
    xor = t.is_xor(1e-14)
    small = t.n_parties <= LP_MAX_PARTIES and int(np.prod([2 * m for m in t.arities])) <= 256
    run_lp = small if lp == "auto" else bool(lp)
    ns_lp = ns_max_lp(t) if run_lp else None
    if xor:
        ns, method = ns_max_xor(t), "closed-form"
    elif ns_lp is not None:
        ns, method = ns_lp, "lp"
    else:
        raise CapExceededError("non-XOR functional too large for the no-signalling LP")
    try:
        gb = gamma_product_bound(net)
    except NotXorError:
        gb = None
    qw = quantum_witness(net, y)
    return BoundReport(
        n_parties=t.n_parties,
        y=y,
        classical_max=cl.value,
        classical_strategy=cl.strategy.outputs,
        ns_max=ns,
        ns_method=method,
        quantum_witness=qw,
        gamma_bound=gb,
        ns_lp=ns_lp,
    )
