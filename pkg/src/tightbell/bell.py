"""Bell scenarios, functionals, measurement systems and their evaluation.

Outputs are dichotomic with labels +1 and -1. A functional over N parties is
stored in the correlator basis as a real tensor of shape (m_1+1, ..., m_N+1):
index 0 on a leg is the identity symbol ``*`` and index x+1 is the
dichotomic observable K_x = A_{+1|x} - A_{-1|x}.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import CapExceededError, DimensionError
from .numerics import STRUCT_TOL, apply_site, hermitian_extremes, is_hermitian

STAR = "*"
DENSE_CAP = 2**10


@dataclass(frozen=True)
class Scenario:
    """Number of inputs per party; every input has outputs {+1, -1}."""

    inputs: tuple

    def __post_init__(self):
        inputs = tuple(int(m) for m in self.inputs)
        if any(m < 1 for m in inputs):
            raise ValueError(f"every party needs at least one input, got {inputs}")
        object.__setattr__(self, "inputs", inputs)

    @property
    def parties(self):
        return len(self.inputs)

    @property
    def n_strategies(self):
        return 2 ** sum(self.inputs)


def symbol_index(symbol):
    """Map a leg symbol ('*' or an input number) to its tensor index."""
    if symbol == STAR or symbol is None:
        return 0
    return int(symbol) + 1


def index_symbol(index):
    return STAR if index == 0 else str(index - 1)


@dataclass(frozen=True, eq=False)
class CorrelatorTensor:
    """Real coefficients of a functional in the correlator basis."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim < 1 or any(s < 2 for s in c.shape):
            raise DimensionError(f"each leg needs at least one input, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, arities):
        return cls(np.zeros([m + 1 for m in arities]))

    @classmethod
    def constant(cls, arities, value):
        c = np.zeros([m + 1 for m in arities])
        c[(0,) * len(arities)] = value
        return cls(c)

    @classmethod
    def from_terms(cls, arities, terms):
        """Build from a mapping of symbol tuples, e.g. ``{(0, 1): 0.5, ('*', 0): 1}``."""
        c = np.zeros([m + 1 for m in arities])
        for idx, value in terms.items():
            if len(idx) != len(arities):
                raise DimensionError(f"term {idx} has wrong number of legs")
            c[tuple(symbol_index(s) for s in idx)] += value
        return cls(c)

    @property
    def arities(self):
        return tuple(s - 1 for s in self.coeffs.shape)

    @property
    def scenario(self):
        return Scenario(self.arities)

    @property
    def n_parties(self):
        return self.coeffs.ndim

    @property
    def constant_term(self):
        return float(self.coeffs[(0,) * self.n_parties])

    def star_mask(self):
        """Boolean mask of multi-indices that contain at least one ``*``."""
        mask = np.zeros(self.coeffs.shape, dtype=bool)
        for leg in range(self.n_parties):
            sl = [slice(None)] * self.n_parties
            sl[leg] = 0
            mask[tuple(sl)] = True
        return mask

    def is_xor(self, tol=0.0):
        """True if only full correlators (plus the constant) are present."""
        mask = self.star_mask()
        mask[(0,) * self.n_parties] = False
        return bool(np.all(np.abs(self.coeffs[mask]) <= tol))

    def terms(self, tol=0.0):
        """Nonzero entries as (symbol tuple, coefficient) pairs in index order."""
        out = []
        for idx in zip(*np.nonzero(np.abs(self.coeffs) > tol)):
            out.append((tuple(index_symbol(i) for i in idx), float(self.coeffs[idx])))
        return out

    def __add__(self, other):
        return CorrelatorTensor(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return CorrelatorTensor(self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return CorrelatorTensor(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return CorrelatorTensor(-self.coeffs)

    def allclose(self, other, atol=1e-12):
        return self.coeffs.shape == other.coeffs.shape and bool(
            np.allclose(self.coeffs, other.coeffs, rtol=0.0, atol=atol)
        )

    def to_dict(self):
        entries = [
            {"idx": list(idx), "c": float(repr_float(c))} for idx, c in self.terms()
        ]
        return {"arities": list(self.arities), "entries": entries}

    @classmethod
    def from_dict(cls, data):
        arities = [int(m) for m in data["arities"]]
        terms = {}
        for e in data.get("entries", []):
            idx = tuple(e["idx"])
            terms[idx] = terms.get(idx, 0.0) + float(e["c"])
        return cls.from_terms(arities, terms)


def repr_float(x):
    """Round-trip a float through 17 significant digits."""
    return float(f"{x:.17g}")


@dataclass(frozen=True, eq=False)
class ProbabilityFunctional:
    """Coefficients over per-leg pairs (a|x).

    Each leg has an axis of length 2*m laid out as (+1|0), ..., (+1|m-1),
    (-1|0), ..., (-1|m-1).
    """

    coeffs: np.ndarray
    arities: tuple

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        ar = tuple(int(m) for m in self.arities)
        if c.shape != tuple(2 * m for m in ar):
            raise DimensionError(f"shape {c.shape} does not fit arities {ar}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "arities", ar)

    @property
    def scenario(self):
        return Scenario(self.arities)

    def coefficient(self, outputs, inputs):
        idx = tuple(pair_index(a, x, m) for a, x, m in zip(outputs, inputs, self.arities))
        return float(self.coeffs[idx])


def pair_index(a, x, m):
    """Position of (a|x) on a leg with m inputs."""
    if a not in (1, -1):
        raise ValueError(f"outputs are +1 or -1, got {a}")
    return (0 if a == 1 else m) + x


def _corr_to_prob_leg(m):
    t = np.zeros((2 * m, m + 1))
    for x in range(m):
        for b in (1, -1):
            row = pair_index(b, x, m)
            t[row, 0] = 0.5
            t[row, x + 1] = 0.5 * b
    return t


def _apply_leg(matrix, leg, tensor):
    out = np.tensordot(matrix, tensor, axes=([1], [leg]))
    return np.moveaxis(out, 0, leg)


def corr_to_prob(t):
    """Leg-wise C_{b|y} = (C_* + b C_y)/2."""
    c = t.coeffs
    for leg, m in enumerate(t.arities):
        c = _apply_leg(_corr_to_prob_leg(m), leg, c)
    return ProbabilityFunctional(c, t.arities)


def prob_to_corr(p, tol=1e-12):
    """Leg-wise C_* = sum_b C_{b|y}, C_y = sum_b b C_{b|y}.

    Raises if the *-marginal of some leg depends on y.
    """
    c = p.coeffs
    for leg, m in enumerate(p.arities):
        moved = np.moveaxis(c, leg, 0)
        plus, minus = moved[:m], moved[m:]
        marg = plus + minus
        scale = max(1.0, float(np.max(np.abs(marg), initial=0.0)))
        if np.max(np.abs(marg - marg[0]), initial=0.0) > tol * scale:
            raise ValueError(
                f"the marginal sum over outputs on leg {leg} depends on the input; "
                "no single * coefficient represents it"
            )
        new = np.concatenate([marg[:1], plus - minus], axis=0)
        c = np.moveaxis(new, 0, leg)
    return CorrelatorTensor(c)


def _weight_leg(m):
    """Per-leg map from stored (a|x) coefficients to weights on P(a|x)."""
    return 2.0 * np.eye(2 * m) + (1.0 - m) / m**2 * np.ones((2 * m, 2 * m))


def behavior_weights(p):
    """Weights W with sum W * P equal to the correlator evaluation on P.

    On each leg the weight of (a|x) is a*c_x + c_*/m for correlator
    coefficients (c_*, c_x).
    """
    w = p.coeffs
    for leg, m in enumerate(p.arities):
        w = _apply_leg(_weight_leg(m), leg, w)
    return w


def evaluate_on_behavior(p, behavior):
    """Value of a probability-basis functional on P(a|x) laid out like ``p``."""
    beh = np.asarray(behavior, dtype=float)
    if beh.shape != p.coeffs.shape:
        raise DimensionError(f"behavior shape {beh.shape} != {p.coeffs.shape}")
    return float(np.sum(behavior_weights(p) * beh))


def correlators_of_behavior(behavior, arities):
    """Correlator table E(s) of a behavior; a '*' leg averages its marginal over x."""
    e = np.asarray(behavior, dtype=float)
    for leg, m in enumerate(arities):
        t = np.zeros((m + 1, 2 * m))
        t[0, :] = 1.0 / m
        for x in range(m):
            t[x + 1, pair_index(1, x, m)] = 1.0
            t[x + 1, pair_index(-1, x, m)] = -1.0
        e = _apply_leg(t, leg, e)
    return e


def evaluate_correlators_on_behavior(t, behavior):
    return float(np.sum(t.coeffs * correlators_of_behavior(behavior, t.arities)))


@dataclass(frozen=True, eq=False)
class MeasurementSystem:
    """Per-party dichotomic measurements on explicit finite spaces.

    ``effects[k][x]`` is the pair (A_{+1|x}, A_{-1|x}) of party k.
    """

    effects: tuple

    def __post_init__(self):
        parties = []
        for k, party in enumerate(self.effects):
            if len(party) < 1:
                raise ValueError(f"party {k} has no inputs")
            pairs = []
            d = None
            for x, pair in enumerate(party):
                ap, am = (np.array(e, dtype=complex) for e in pair)
                if ap.ndim != 2 or ap.shape[0] != ap.shape[1] or ap.shape != am.shape:
                    raise DimensionError(f"party {k} input {x}: effects must be square")
                if d is None:
                    d = ap.shape[0]
                elif ap.shape[0] != d:
                    raise DimensionError(f"party {k} input {x}: dimension changes")
                for a in (ap, am):
                    a.setflags(write=False)
                pairs.append((ap, am))
            parties.append(tuple(pairs))
        object.__setattr__(self, "effects", tuple(parties))

    @classmethod
    def from_observables(cls, observables):
        """Build from dichotomic operators; ``observables[k][x]`` is K_x of party k."""
        parties = []
        for party in observables:
            pairs = []
            for k in party:
                k = np.asarray(k, dtype=complex)
                eye = np.eye(k.shape[0])
                pairs.append(((eye + k) / 2, (eye - k) / 2))
            parties.append(pairs)
        return cls(tuple(parties))

    @property
    def arities(self):
        return tuple(len(p) for p in self.effects)

    @property
    def dims(self):
        return tuple(p[0][0].shape[0] for p in self.effects)

    @property
    def n_parties(self):
        return len(self.effects)

    def observable(self, party, x):
        ap, am = self.effects[party][x]
        return ap - am

    def effect(self, party, a, x):
        return self.effects[party][x][0 if a == 1 else 1]

    def leg_operators(self, party):
        """Operators indexed like a correlator leg: identity, then K_0, K_1, ..."""
        d = self.dims[party]
        return [np.eye(d, dtype=complex)] + [
            self.observable(party, x) for x in range(self.arities[party])
        ]

    @cached_property
    def projective(self):
        return self.is_projective()

    def is_projective(self, tol=STRUCT_TOL):
        for k in range(self.n_parties):
            for x in range(self.arities[k]):
                kx = self.observable(k, x)
                if np.max(np.abs(kx @ kx - np.eye(kx.shape[0]))) > tol:
                    return False
        return True

    def validate(self, tol=1e-10):
        """Check Hermiticity, completeness and 0 <= A <= 1 of every effect."""
        for k in range(self.n_parties):
            for x in range(self.arities[k]):
                ap, am = self.effects[k][x]
                if np.max(np.abs(ap + am - np.eye(ap.shape[0]))) > tol:
                    raise ValueError(f"party {k} input {x}: effects do not sum to identity")
                for a in (ap, am):
                    if not is_hermitian(a, tol):
                        raise ValueError(f"party {k} input {x}: effect not Hermitian")
                    lo, hi = hermitian_extremes(a, cap=None)
                    if lo < -tol or hi > 1 + tol:
                        raise ValueError(
                            f"party {k} input {x}: effect spectrum [{lo}, {hi}] "
                            "outside [0, 1]"
                        )
        return self

    def conjugated(self, unitaries):
        """Return the system with party k's operators replaced by U_k A U_k^dagger."""
        parties = []
        for k, party in enumerate(self.effects):
            u = np.asarray(unitaries[k], dtype=complex)
            parties.append(
                tuple((u @ ap @ u.conj().T, u @ am @ u.conj().T) for ap, am in party)
            )
        return MeasurementSystem(tuple(parties))

    def allclose(self, other, atol=1e-12):
        if self.arities != other.arities or self.dims != other.dims:
            return False
        return all(
            np.allclose(a, b, rtol=0.0, atol=atol)
            for pa, pb in zip(self.effects, other.effects)
            for ea, eb in zip(pa, pb)
            for a, b in zip(ea, eb)
        )


def _check_arities(t, ms):
    if t.arities != ms.arities:
        raise DimensionError(
            f"functional arities {t.arities} do not match measurement arities {ms.arities}"
        )


class BellOperator:
    """A functional evaluated on a measurement system, applied without Kronecker products."""

    def __init__(self, t, ms):
        _check_arities(t, ms)
        self.tensor = t
        self.system = ms
        self.dims = ms.dims
        self._ops = [ms.leg_operators(k) for k in range(ms.n_parties)]

    @property
    def dim(self):
        return int(np.prod(self.dims))

    def apply_tensor(self, psi):
        """Apply to an amplitude tensor of shape dims (+ optional batch axes)."""
        return self._apply(self.tensor.coeffs, psi, 0)

    def _apply(self, coeffs, psi, leg):
        if leg == len(self.dims):
            return coeffs * psi
        out = None
        for s in range(coeffs.shape[0]):
            sub = coeffs[s]
            if not np.any(sub):
                continue
            part = self._apply(sub, psi, leg + 1)
            if s != 0:
                part = apply_site(self._ops[leg][s], leg, part)
            out = part if out is None else out + part
        if out is None:
            return np.zeros_like(psi, dtype=complex)
        return out

    def matvec(self, vec):
        v = np.asarray(vec, dtype=complex)
        batch = v.shape[1:]
        res = self.apply_tensor(v.reshape(self.dims + batch))
        return res.reshape((self.dim,) + batch)

    def to_dense(self, cap=None):
        if cap is not None and self.dim > cap:
            raise CapExceededError(f"dense operator of dimension {self.dim} exceeds cap {cap}")
        return self.matvec(np.eye(self.dim, dtype=complex))

    def expectation(self, state):
        amps = state.amplitudes if hasattr(state, "amplitudes") else np.asarray(state)
        return complex(np.vdot(amps, self.matvec(amps)))


def bell_operator(t, ms):
    return BellOperator(t, ms)


def evaluate_on_system(t, ms, cap=DENSE_CAP):
    """Bell operator t[ms]: a dense matrix up to ``cap``, else a ``BellOperator``."""
    op = BellOperator(t, ms)
    if op.dim <= cap:
        return op.to_dense()
    return op


@dataclass(frozen=True)
class DeterministicStrategy:
    """``outputs[k][x]`` is the +1/-1 answer of party k to input x."""

    outputs: tuple

    def __post_init__(self):
        outs = tuple(tuple(int(a) for a in party) for party in self.outputs)
        for party in outs:
            if any(a not in (1, -1) for a in party):
                raise ValueError("deterministic outputs must be +1 or -1")
        object.__setattr__(self, "outputs", outs)

    @property
    def arities(self):
        return tuple(len(p) for p in self.outputs)

    @property
    def index(self):
        """Position in lexicographic order (party-major, input-minor, +1 before -1)."""
        idx = 0
        for party in self.outputs:
            for a in party:
                idx = 2 * idx + (0 if a == 1 else 1)
        return idx

    @classmethod
    def from_index(cls, arities, index):
        total = sum(arities)
        if not 0 <= index < 2**total:
            raise ValueError(f"strategy index {index} out of range")
        bits = [(index >> (total - 1 - i)) & 1 for i in range(total)]
        outs, pos = [], 0
        for m in arities:
            outs.append(tuple(1 - 2 * b for b in bits[pos : pos + m]))
            pos += m
        return cls(tuple(outs))

    def leg_vector(self, party):
        return np.array([1.0] + [float(a) for a in self.outputs[party]])

    def flipped(self, party):
        outs = list(self.outputs)
        outs[party] = tuple(-a for a in outs[party])
        return DeterministicStrategy(tuple(outs))

    def behavior(self):
        """The deterministic behavior in the probability-basis layout."""
        p = np.ones(())
        for party in self.outputs:
            m = len(party)
            leg = np.zeros(2 * m)
            for x, a in enumerate(party):
                leg[pair_index(a, x, m)] = 1.0
            p = np.multiply.outer(p, leg)
        return p


def all_strategies(arities):
    total = sum(arities)
    for i in range(2**total):
        yield DeterministicStrategy.from_index(arities, i)


def evaluate_on_strategy(t, s):
    if t.arities != s.arities:
        raise DimensionError(f"strategy arities {s.arities} != {t.arities}")
    v = t.coeffs
    for k in range(t.n_parties):
        v = np.tensordot(s.leg_vector(k), v, axes=([0], [0]))
    return float(v)


def quantum_behavior(ms, state):
    """P(a|x) of a measurement system on a state vector, in the probability layout."""
    amps = state.amplitudes if hasattr(state, "amplitudes") else np.asarray(state)
    dims = ms.dims
    rho_vec = amps.reshape(dims)
    shape = tuple(2 * m for m in ms.arities)
    out = np.zeros(shape)
    for idx in itertools.product(*[range(s) for s in shape]):
        psi = rho_vec
        for k, i in enumerate(idx):
            m = ms.arities[k]
            a = 1 if i < m else -1
            x = i % m
            psi = apply_site(ms.effect(k, a, x), k, psi)
        out[idx] = float(np.real(np.vdot(rho_vec, psi)))
    return out
