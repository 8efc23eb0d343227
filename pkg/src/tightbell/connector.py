"""Connectors, connector complexes, tightness checks and congruent contraction.

A q->1 connector is a real tensor of shape (m_out+1, m_1+1, ..., m_q+1). The
first axis selects the output symbol: index 0 is C_* (the identity on the
effective party), index y+1 is the functional C_y. Each slice is a q-leg
correlator tensor. The effect for outcome b on output input y is
C_{b|y} = (C_* + b C_y)/2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .bell import BellOperator, CorrelatorTensor, MeasurementSystem
from .errors import CongruenceError, DimensionError, NotXorError
from .numerics import (
    I2,
    STRUCT_TOL,
    SX,
    SY,
    SZ,
    as_matrix,
    hermitian_extremes,
    is_unitary,
)

SAMPLER_SEED = 0x5EED
SAMPLER_COUNT = 32


@dataclass(frozen=True, eq=False)
class Connector:
    tensor: np.ndarray

    def __post_init__(self):
        t = np.array(self.tensor, dtype=float)
        if t.ndim < 2 or any(s < 2 for s in t.shape):
            raise DimensionError(f"connector tensor needs >= 1 input leg, got shape {t.shape}")
        if not np.all(np.isfinite(t)):
            raise ValueError("connector coefficients must be finite")
        t.setflags(write=False)
        object.__setattr__(self, "tensor", t)

    @classmethod
    def from_functionals(cls, functionals, star=None):
        """Stack C_* (default: the constant 1) and the functionals C_0, C_1, ..."""
        arities = functionals[0].arities
        if star is None:
            star = CorrelatorTensor.constant(arities, 1.0)
        blocks = [star.coeffs] + [f.coeffs for f in functionals]
        return cls(np.stack(blocks))

    @classmethod
    def identity(cls, m=2):
        """The 1->1 pass-through connector."""
        return cls(np.eye(m + 1))

    @property
    def q(self):
        return self.tensor.ndim - 1

    @property
    def in_arities(self):
        return tuple(s - 1 for s in self.tensor.shape[1:])

    @property
    def out_arity(self):
        return self.tensor.shape[0] - 1

    @property
    def star(self):
        return CorrelatorTensor(self.tensor[0])

    def functional(self, y):
        return CorrelatorTensor(self.tensor[y + 1])

    def effect(self, b, y):
        return CorrelatorTensor(0.5 * (self.tensor[0] + b * self.tensor[y + 1]))

    def is_xor(self, tol=1e-14):
        star = self.star
        expected = CorrelatorTensor.constant(self.in_arities, 1.0)
        if not star.allclose(expected, atol=tol):
            return False
        return all(self.functional(y).is_xor(tol) for y in range(self.out_arity))

    def require_xor(self, what="connector"):
        if not self.is_xor():
            raise NotXorError(f"{what} is not an XOR connector")

    def with_star(self, value):
        """Copy with C_* replaced by ``value`` times the identity term."""
        t = np.array(self.tensor)
        t[0] = 0.0
        t[(0,) * t.ndim] = value
        return Connector(t)

    def allclose(self, other, atol=1e-12):
        return self.tensor.shape == other.tensor.shape and bool(
            np.allclose(self.tensor, other.tensor, rtol=0.0, atol=atol)
        )


def contract_connectors(producer, consumer, leg):
    """Plug ``producer``'s output into input ``leg`` of ``consumer``.

    Inputs of the result are the consumer's legs before ``leg``, then the
    producer's inputs, then the consumer's remaining legs.
    """
    if producer.out_arity != consumer.in_arities[leg]:
        raise DimensionError(
            f"producer output arity {producer.out_arity} != consumer leg {leg} "
            f"arity {consumer.in_arities[leg]}"
        )
    out = np.tensordot(consumer.tensor, producer.tensor, axes=([leg + 1], [0]))
    n_prod = producer.q
    src = list(range(out.ndim - n_prod, out.ndim))
    dst = list(range(leg + 1, leg + 1 + n_prod))
    return Connector(np.moveaxis(out, src, dst))


def random_projective_qubit_system(rng, arities):
    """Random traceless dichotomic qubit observables for each party."""
    parties = []
    for m in arities:
        ks = []
        for _ in range(m):
            v = rng.normal(size=3)
            v /= np.linalg.norm(v)
            ks.append(v[0] * SX + v[1] * SY + v[2] * SZ)
        parties.append(ks)
    return MeasurementSystem.from_observables(parties)


@dataclass
class ConsistencyReport:
    """Result of the randomized normalization and validity sampler.

    A pass is a necessary condition only, never a proof of validity.
    """

    samples: int
    normalization_residual: float
    min_eigenvalue: float
    max_eigenvalue: float
    spectrum_checked: bool
    passed: bool


def consistency_check(connector, samples=SAMPLER_COUNT, seed=SAMPLER_SEED, tol=STRUCT_TOL):
    """Sample projective qubit systems and test C_* = 1 and 0 <= C_{b|y} <= 1."""
    rng = np.random.default_rng(seed)
    norm_res = 0.0
    lo, hi = np.inf, -np.inf
    check_spectrum = 2**connector.q <= 64
    for _ in range(samples):
        ms = random_projective_qubit_system(rng, connector.in_arities)
        star = BellOperator(connector.star, ms).to_dense()
        norm_res = max(norm_res, float(np.max(np.abs(star - np.eye(star.shape[0])))))
        if check_spectrum:
            for y in range(connector.out_arity):
                for b in (1, -1):
                    op = BellOperator(connector.effect(b, y), ms).to_dense()
                    e0, e1 = hermitian_extremes(op)
                    lo, hi = min(lo, e0), max(hi, e1)
    passed = norm_res <= tol and (not check_spectrum or (lo >= -tol and hi <= 1 + tol))
    return ConsistencyReport(samples, norm_res, float(lo), float(hi), check_spectrum, passed)


def default_mu(out_arity):
    """Select the functional C_1 alone: mu_{b|y} = b if y == 1 else 0."""
    y = 1 if out_arity > 1 else 0
    return {(b, yy): (float(b) if yy == y else 0.0) for yy in range(out_arity) for b in (1, -1)}


@dataclass(frozen=True, eq=False)
class ConnectorComplex:
    """A connector with reference measurements and a co-isometry V.

    ``V`` has shape (dim H, prod of input dims); rows index the effective
    space and columns the input legs with the first leg most significant.
    """

    connector: Connector
    refs: MeasurementSystem
    V: np.ndarray
    name: str = "complex"
    mu: dict = field(default=None)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = as_matrix(self.V, "V").copy()
        if self.connector.in_arities != self.refs.arities:
            raise DimensionError(
                f"connector arities {self.connector.in_arities} do not match "
                f"reference arities {self.refs.arities}"
            )
        if v.shape[1] != int(np.prod(self.refs.dims)):
            raise DimensionError(
                f"V has {v.shape[1]} columns but inputs span {int(np.prod(self.refs.dims))}"
            )
        if v.shape[0] > v.shape[1]:
            raise DimensionError("V has more rows than columns")
        v.setflags(write=False)
        object.__setattr__(self, "V", v)
        if self.mu is None:
            object.__setattr__(self, "mu", default_mu(self.connector.out_arity))

    @property
    def q(self):
        return self.connector.q

    @property
    def dims(self):
        return self.refs.dims

    @property
    def dim_h(self):
        return self.V.shape[0]

    @property
    def out_arity(self):
        return self.connector.out_arity

    @cached_property
    def vdag_tensor(self):
        """V^dagger as an amplitude tensor of shape dims + (dim H,)."""
        return self.V.conj().T.reshape(self.dims + (self.dim_h,))

    def effect_operator(self, b, y):
        return BellOperator(self.connector.effect(b, y), self.refs)

    def effect_on_range(self, b, y):
        """C_{b|y}[A] V^dagger as a (prod dims, dim H) matrix."""
        op = self.effect_operator(b, y)
        out = op.apply_tensor(self.vdag_tensor)
        return out.reshape(-1, self.dim_h)

    @cached_property
    def mbar(self):
        """M_{b|y} = V C_{b|y}[A] V^dagger keyed by (b, y)."""
        out = {}
        for y in range(self.out_arity):
            for b in (1, -1):
                m = self.V @ self.effect_on_range(b, y)
                m.setflags(write=False)
                out[(b, y)] = m
        return out

    def mbar_observable(self, y):
        return self.mbar[(1, y)] - self.mbar[(-1, y)]

    def mbar_system(self):
        """The projective measurement M on H viewed as a one-party system."""
        return MeasurementSystem(
            ((tuple((self.mbar[(1, y)], self.mbar[(-1, y)]) for y in range(self.out_arity))),)
        )

    @cached_property
    def invariant_projector(self):
        return self.V.conj().T @ self.V


def invariant_subspace_residual(cx):
    """max_{b,y} ||(1 - P_I) C_{b|y}[A] P_I||_max with P_I = V^dagger V."""
    worst = 0.0
    vdag = cx.V.conj().T
    for y in range(cx.out_arity):
        for b in (1, -1):
            x = cx.effect_on_range(b, y)
            leak = x - vdag @ (cx.V @ x)
            worst = max(worst, float(np.max(np.abs(leak @ cx.V), initial=0.0)))
    return worst


@dataclass
class TightnessReport:
    coisometry_residual: float
    projectivity: dict
    completeness: dict
    invariant_residual: float
    tol: float
    reference_residual: float = 0.0

    @property
    def max_residual(self):
        vals = [self.coisometry_residual, self.invariant_residual, self.reference_residual]
        vals += list(self.projectivity.values()) + list(self.completeness.values())
        return max(vals)

    @property
    def passed(self):
        return self.max_residual <= self.tol

    def to_dict(self):
        return {
            "passed": self.passed,
            "tol": self.tol,
            "max_residual": self.max_residual,
            "coisometry_residual": self.coisometry_residual,
            "invariant_residual": self.invariant_residual,
            "reference_residual": self.reference_residual,
            "projectivity": {f"{b:+d}|{y}": v for (b, y), v in self.projectivity.items()},
            "completeness": {str(y): v for y, v in self.completeness.items()},
        }


def verify_tight(cx, tol=STRUCT_TOL):
    """Residuals showing that every M_{b|y} is a projector and each pair sums to 1.

    The reference measurements must be projective too; ``reference_residual``
    is the largest deviation of K_x^2 from the identity over all input legs.
    """
    h = cx.dim_h
    eye = np.eye(h)
    cois = float(np.max(np.abs(cx.V @ cx.V.conj().T - eye)))
    proj, comp = {}, {}
    for y in range(cx.out_arity):
        total = np.zeros((h, h), dtype=complex)
        for b in (1, -1):
            m = cx.mbar[(b, y)]
            total = total + m
            proj[(b, y)] = float(
                max(np.max(np.abs(m @ m - m)), np.max(np.abs(m - m.conj().T)))
            )
        comp[y] = float(np.max(np.abs(total - eye)))
    ref = max(
        (
            float(np.max(np.abs(kx @ kx - np.eye(kx.shape[0]))))
            for k in range(cx.refs.n_parties)
            for x in range(cx.refs.arities[k])
            for kx in (cx.refs.observable(k, x),)
        ),
        default=0.0,
    )
    return TightnessReport(cois, proj, comp, invariant_subspace_residual(cx), tol, ref)


def _expand_site(block, site, tensor):
    """Apply a map from axis ``site`` into several axes given by ``block``.

    ``block`` has shape out_dims + (in_dim,).
    """
    n_out = block.ndim - 1
    out = np.tensordot(block, tensor, axes=([n_out], [site]))
    src = list(range(n_out))
    dst = list(range(site, site + n_out))
    return np.moveaxis(out, src, dst)


def conjugate(cx, locals_, out=None, tol=STRUCT_TOL):
    """Unitarily equivalent complex (C, U A U^dagger, W V prod U^dagger)."""
    if len(locals_) != cx.q:
        raise DimensionError(f"need {cx.q} local unitaries, got {len(locals_)}")
    us = []
    for k, u in enumerate(locals_):
        u = np.asarray(u, dtype=complex)
        if u.shape != (cx.dims[k], cx.dims[k]):
            raise DimensionError(f"unitary {k} has shape {u.shape}, expected dim {cx.dims[k]}")
        if not is_unitary(u, tol):
            raise ValueError(f"local operator {k} is not unitary")
        us.append(u)
    w = np.eye(cx.dim_h, dtype=complex) if out is None else np.asarray(out, dtype=complex)
    if w.shape != (cx.dim_h, cx.dim_h) or not is_unitary(w, tol):
        raise ValueError("output operator must be a unitary on H")
    t = cx.vdag_tensor
    for k, u in enumerate(us):
        t = np.moveaxis(np.tensordot(u, t, axes=([1], [k])), 0, k)
    vdag = t.reshape(-1, cx.dim_h) @ w.conj().T
    # the rotated complex is no longer the literal contraction of its parts
    meta = {k: v for k, v in cx.meta.items() if k != "components"}
    return ConnectorComplex(
        cx.connector,
        cx.refs.conjugated(us),
        vdag.conj().T,
        name=cx.name,
        mu=dict(cx.mu),
        meta=meta,
    )


def congruence_deviation(producer, consumer, leg):
    """max |M_{b|y}(producer) - A^{(leg)}_{b|y}(consumer)| over b, y."""
    if producer.out_arity != consumer.refs.arities[leg]:
        raise DimensionError(
            f"producer output arity {producer.out_arity} != consumer leg {leg} "
            f"arity {consumer.refs.arities[leg]}"
        )
    if producer.dim_h != consumer.dims[leg]:
        raise DimensionError(
            f"producer space dimension {producer.dim_h} != consumer leg {leg} "
            f"dimension {consumer.dims[leg]}"
        )
    dev = 0.0
    for y in range(producer.out_arity):
        for b in (1, -1):
            a = consumer.refs.effect(leg, b, y)
            dev = max(dev, float(np.max(np.abs(producer.mbar[(b, y)] - a))))
    return dev


def check_congruent(producer, consumer, leg, tol=STRUCT_TOL):
    return congruence_deviation(producer, consumer, leg) <= tol


def congruent_contract(producer, consumer, leg, tol=STRUCT_TOL):
    """Contract ``producer`` into input ``leg`` of ``consumer``.

    The co-isometry is V = V_consumer (1 x V_producer x 1) and the references
    of the producer replace leg ``leg`` of the consumer.
    """
    dev = congruence_deviation(producer, consumer, leg)
    if dev > tol:
        raise CongruenceError(
            f"producer M does not match consumer references on leg {leg} "
            f"(max deviation {dev:.3e})",
            deviation=dev,
        )
    connector = contract_connectors(producer.connector, consumer.connector, leg)
    effects = (
        consumer.refs.effects[:leg] + producer.refs.effects + consumer.refs.effects[leg + 1 :]
    )
    refs = MeasurementSystem(effects)
    block = producer.vdag_tensor
    t = _expand_site(block, leg, consumer.vdag_tensor)
    vdag = t.reshape(-1, consumer.dim_h)
    name = f"{consumer.name}[{leg}<-{producer.name}]"
    meta = {"components": {"producer": producer, "consumer": consumer, "leg": leg}}
    return ConnectorComplex(connector, refs, vdag.conj().T, name=name, mu=dict(consumer.mu), meta=meta)


def identity_complex(m=2):
    """The 1->1 pass-through complex on a qubit with Pauli references."""
    obs = [SZ, SX, SY][:m]
    refs = MeasurementSystem.from_observables([obs])
    return ConnectorComplex(Connector.identity(m), refs, np.eye(2, dtype=complex), name="identity")


# Alignment of qubit reference pairs by a Bloch-sphere rotation.


def bloch_vector(k, tol=STRUCT_TOL):
    """Bloch vector of a traceless dichotomic qubit observable."""
    k = np.asarray(k, dtype=complex)
    if k.shape != (2, 2):
        raise DimensionError("alignment works on qubit observables only")
    v = np.real([np.trace(k @ p) / 2 for p in (SX, SY, SZ)])
    if abs(np.trace(k)) > tol or abs(np.linalg.norm(v) - 1) > 1e-7:
        raise ValueError("observable is not a traceless dichotomic qubit operator")
    return v


def _frame(s0, s1):
    e1 = s0 / np.linalg.norm(s0)
    perp = s1 - np.dot(s1, e1) * e1
    n = np.linalg.norm(perp)
    if n < 1e-9:
        raise ValueError("reference observables are parallel; alignment is ambiguous")
    e2 = perp / n
    return np.column_stack([e1, e2, np.cross(e1, e2)])


def rotation_to_su2(r):
    """A unitary U with U (v.sigma) U^dagger = (R v).sigma."""
    tr = np.trace(r)
    candidates = [
        (1 + tr, lambda s: (s / 4, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s)),
        (1 + 2 * r[0, 0] - tr, lambda s: ((r[2, 1] - r[1, 2]) / s, s / 4, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s)),
        (1 + 2 * r[1, 1] - tr, lambda s: ((r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, s / 4, (r[1, 2] + r[2, 1]) / s)),
        (1 + 2 * r[2, 2] - tr, lambda s: ((r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, s / 4)),
    ]
    val, build = max(candidates, key=lambda c: c[0])
    w, x, y, z = build(2.0 * np.sqrt(val))
    return w * I2 - 1j * (x * SX + y * SY + z * SZ)


def alignment_unitary(source, target, tol=1e-9):
    """Qubit unitary mapping the pair ``source`` = (K0, K1) onto ``target``."""
    s = [bloch_vector(k) for k in source]
    t = [bloch_vector(k) for k in target]
    if abs(np.dot(*s) - np.dot(*t)) > tol:
        raise ValueError(
            f"pairs have different relative angles (cos {np.dot(*s):.6f} vs {np.dot(*t):.6f})"
        )
    r = _frame(*t) @ _frame(*s).T
    return rotation_to_su2(r)


def align_consumer(producer, consumer, leg, tol=1e-9):
    """Conjugate ``consumer`` on ``leg`` so that its references equal producer's M."""
    if producer.out_arity != 2 or consumer.refs.arities[leg] != 2:
        raise ValueError("alignment is implemented for two-input qubit legs")
    source = [consumer.refs.observable(leg, x) for x in range(2)]
    target = [producer.mbar_observable(y) for y in range(2)]
    u = alignment_unitary(source, target, tol)
    locals_ = [np.eye(d) for d in consumer.dims]
    locals_[leg] = u
    out = conjugate(consumer, locals_)
    meta = dict(out.meta)
    meta["alignment"] = {"leg": leg, "unitary": u}
    return ConnectorComplex(out.connector, out.refs, out.V, out.name, dict(out.mu), meta)
