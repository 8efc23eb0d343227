"""Numerical checks of the hypotheses behind full self-testing.

Three checks are combined:

* condition 1: every operator D_x^{(j)}[A] in the decomposition
  B = sum_x K_x^{(j)} x D_x^{(j)} is invertible (x ranging over real inputs);
* condition 2: the vectors A_{a|x}^{(k)} x (degree-one monomials of the
  other parties) |psi> span the whole input space;
* cyclicity: monomials in the output projectors M generate all of H from
  V|psi>.

Passing certifies that the hypotheses hold; it does not search adversarial
realizations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bell import BellOperator, CorrelatorTensor, MeasurementSystem
from .errors import NormalizationError
from .numerics import (
    DEFAULT_EIG_CAP,
    StateVector,
    hermitian_extremes,
    rank_of_span,
    singular_values,
)

INVERTIBILITY_TOL = 1e-7
RANK_TOL = 1e-6


def correlator_decompose(t, party):
    """Split ``t`` by the symbol on leg ``party``.

    Returns a dict keyed by '*' and the inputs 0..m-1; each value is the
    coefficient tensor over the remaining legs (a float when no legs remain).
    """
    moved = np.moveaxis(t.coeffs, party, 0)
    out = {}
    for s in range(moved.shape[0]):
        key = "*" if s == 0 else s - 1
        block = moved[s]
        out[key] = float(block) if block.ndim == 0 else CorrelatorTensor(block)
    return out


def recompose(parts, party):
    """Inverse of ``correlator_decompose``."""
    keys = ["*"] + sorted(k for k in parts if k != "*")
    blocks = [
        np.asarray(parts[k] if isinstance(parts[k], float) else parts[k].coeffs) for k in keys
    ]
    return CorrelatorTensor(np.moveaxis(np.stack(blocks), 0, party))


def _drop_party(refs, party):
    return MeasurementSystem(refs.effects[:party] + refs.effects[party + 1 :])


def mu_functional(connector, mu):
    """sum_{b,y} mu_{b|y} C_{b|y} as a correlator tensor."""
    total = np.zeros(connector.tensor.shape[1:])
    for (b, y), w in mu.items():
        if w:
            total = total + w * connector.effect(b, y).coeffs
    return CorrelatorTensor(total)


def check_condition1(t, refs, tol=INVERTIBILITY_TOL):
    """Smallest singular value of every D_x^{(j)}[A], keyed by (j, x)."""
    out = {}
    for j in range(t.n_parties):
        parts = correlator_decompose(t, j)
        rest = _drop_party(refs, j) if t.n_parties > 1 else None
        for x in range(t.arities[j]):
            d = parts[x]
            if isinstance(d, float):
                out[(j, x)] = abs(d)
                continue
            mat = BellOperator(d, rest).to_dense()
            out[(j, x)] = float(singular_values(mat)[-1])
    return out


def _monomial_stack(refs, party):
    """Identity and every effect A_{a|x} of one party, stacked."""
    d = refs.dims[party]
    ops = [np.eye(d, dtype=complex)]
    for x in range(refs.arities[party]):
        for a in (1, -1):
            ops.append(refs.effect(party, a, x))
    return np.array(ops)


def condition2_vectors(refs, psi, k, x):
    """The vectors A_{a|x}^{(k)} x (identity or one effect per other party) |psi>."""
    t = psi.tensor()[..., None]
    n = refs.n_parties
    for l in range(n):
        if l == k:
            stack = np.array([refs.effect(k, a, x) for a in (1, -1)])
        else:
            stack = _monomial_stack(refs, l)
        # (ops, d_out, d_in) against axis l; new batch axis goes last
        t = np.tensordot(stack, t, axes=([2], [l]))
        t = np.moveaxis(t, 1, l + 1)
        t = np.moveaxis(t, 0, -1)
        t = t.reshape(t.shape[:n] + (-1,))
    return t.reshape(-1, t.shape[-1]).T


def check_condition2(refs, psi, tol=RANK_TOL):
    """Span rank for every (k, x), to be compared with the full dimension."""
    out = {}
    for k in range(refs.n_parties):
        for x in range(refs.arities[k]):
            out[(k, x)] = rank_of_span(list(condition2_vectors(refs, psi, k, x)), tol)
    return out


def projection_residual(cx, psi):
    """||(1 - V^dagger V)|psi>||."""
    v = psi.amplitudes
    return float(np.linalg.norm(v - cx.V.conj().T @ (cx.V @ v)))


def check_cyclicity(cx, psi, max_degree=None, tol=1e-9):
    """Rank of {monomials in M_{b|y} up to max_degree} applied to V|psi>."""
    if projection_residual(cx, psi) > tol:
        raise ValueError("state is not in the invariant subspace of the complex")
    if max_degree is None:
        max_degree = cx.dim_h
    mats = [cx.mbar[key] for key in sorted(cx.mbar)]
    level = [cx.V @ psi.amplitudes]
    vectors = list(level)
    for _ in range(max_degree):
        level = [m @ v for m in mats for v in level]
        # keep the frontier small: only a basis of it matters
        basis = _basis(level)
        vectors.extend(basis)
        level = basis
        if rank_of_span(vectors, RANK_TOL) == cx.dim_h:
            break
    return rank_of_span(vectors, RANK_TOL)


def _basis(vectors):
    out = []
    for v in vectors:
        if np.linalg.norm(v) <= 1e-12:
            continue
        if rank_of_span(out + [v], RANK_TOL) > len(out):
            out.append(v)
    return out


def default_state(cx):
    """V^dagger applied to the eigenvalue-one eigenvector of M_{+1|1}."""
    from .network import root_vector

    y = 1 if cx.out_arity > 1 else 0
    phi = root_vector(cx, 1, y, 1)
    return StateVector(cx.dims, cx.V.conj().T @ phi)


@dataclass
class FstReport:
    """Outcome of the full self-testing checks.

    ``route`` is "direct" when conditions 1 and 2 were checked on the
    complex itself, or "composition" when the complex is a congruent
    contraction and the checks were run on its two components.
    """

    condition1: dict
    condition2: dict
    full_dim: int
    cyclicity_rank: int
    dim_h: int
    attained_max: float
    normalization_checked: bool
    mu: dict
    tol: float
    route: str = "direct"
    components: list = field(default_factory=list)
    congruence_deviation: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def normalized(self):
        return abs(self.attained_max - 1.0) <= 1e-8

    @property
    def condition1_passed(self):
        return all(v > self.tol for v in self.condition1.values())

    @property
    def condition2_passed(self):
        return all(r == self.full_dim for r in self.condition2.values())

    @property
    def cyclicity_passed(self):
        return self.cyclicity_rank == self.dim_h

    @property
    def passed(self):
        ok = self.normalized and self.cyclicity_passed
        if self.route == "composition":
            return ok and self.congruence_deviation <= 1e-9 and all(
                c.passed for c in self.components
            )
        return ok and self.condition1_passed and self.condition2_passed

    def to_dict(self):
        return {
            "passed": self.passed,
            "route": self.route,
            "normalized": self.normalized,
            "attained_max": self.attained_max,
            "normalization_checked": self.normalization_checked,
            "condition1": [
                {"party": j, "input": x, "sigma_min": v}
                for (j, x), v in sorted(self.condition1.items())
            ],
            "condition2": [
                {"party": k, "input": x, "rank": r} for (k, x), r in sorted(self.condition2.items())
            ],
            "full_dim": self.full_dim,
            "cyclicity_rank": self.cyclicity_rank,
            "dim_h": self.dim_h,
            "mu": [{"b": b, "y": y, "mu": w} for (b, y), w in sorted(self.mu.items())],
            "invertibility_tol": self.tol,
            "congruence_deviation": self.congruence_deviation,
            "components": [c.to_dict() for c in self.components],
            "notes": list(self.notes),
        }


def _normalization(cx, f, psi, norm_tol):
    op = BellOperator(f, cx.refs)
    if op.dim <= DEFAULT_EIG_CAP:
        _, hi = hermitian_extremes(op.to_dense())
        return hi, True
    if psi is None:
        return 0.0, False
    return float(np.real(op.expectation(psi))), False


def fst_verdict(cx, mu=None, psi=None, tol=INVERTIBILITY_TOL, norm_tol=1e-8):
    """Aggregate the normalization, condition 1, condition 2 and cyclicity checks.

    A congruent contraction is certified through its components: both must
    pass, and the contraction must be congruent; mu is inherited from the
    consumer. Normalization and cyclicity are always checked on ``cx``.

    Raises ``NormalizationError`` if the mu-functional exceeds 1 at the
    references. A maximum below 1 is reported as a failed normalization.
    """
    mu = dict(cx.mu if mu is None else mu)
    f = mu_functional(cx.connector, mu)
    notes = []
    if psi is None:
        try:
            psi = default_state(cx)
        except ValueError:
            notes.append("M_{+1|1} has no eigenvalue one; no saturating state")
    hi, checked = _normalization(cx, f, psi, norm_tol)
    if not checked:
        notes.append("operator above eigensolver cap; maximum taken on the saturating state")
    if hi > 1.0 + norm_tol:
        raise NormalizationError(
            f"mu-functional reaches {hi:.12g} > 1 at the references", attained=hi
        )
    full = int(np.prod(cx.dims))
    cyc = check_cyclicity(cx, psi) if psi is not None else 0
    parts = cx.meta.get("components")
    if parts is not None:
        producer, consumer, leg = parts["producer"], parts["consumer"], parts["leg"]
        from .connector import congruence_deviation

        reports = [fst_verdict(producer), fst_verdict(consumer, mu=mu)]
        dev = congruence_deviation(producer, consumer, leg)
        return FstReport(
            {}, {}, full, cyc, cx.dim_h, hi, checked, mu, tol,
            route="composition", components=reports, congruence_deviation=dev, notes=notes,
        )
    c1 = check_condition1(f, cx.refs, tol)
    if psi is None:
        c2 = {(k, x): 0 for k in range(cx.q) for x in range(cx.refs.arities[k])}
    else:
        c2 = check_condition2(cx.refs, psi)
    return FstReport(c1, c2, full, cyc, cx.dim_h, hi, checked, mu, tol, notes=notes)
