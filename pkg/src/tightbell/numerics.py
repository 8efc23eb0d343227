"""Dense complex linear algebra for small multi-qubit problems.

Operators are plain ``numpy`` complex arrays. States carry their per-leg
dimensions so that local operators can be applied leg by leg without ever
forming a global Kronecker product.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapExceededError, DimensionError

STRUCT_TOL = 1e-9
EXACT_TOL = 1e-12
DEFAULT_EIG_CAP = 64

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def as_matrix(m, name="matrix"):
    """Return ``m`` as a finite 2-d complex array."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-dimensional, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _square(m, name="matrix"):
    a = as_matrix(m, name)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    return a


@dataclass(frozen=True, eq=False)
class StateVector:
    """Amplitudes over a tensor product of local spaces.

    The first leg is the most significant index of ``amplitudes``.
    """

    local_dims: tuple
    amplitudes: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.local_dims)
        if any(d < 1 for d in dims):
            raise DimensionError(f"local dimensions must be positive, got {dims}")
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != int(np.prod(dims, dtype=np.int64)):
            raise DimensionError(
                f"{amps.size} amplitudes do not match local dims {dims}"
            )
        if not np.all(np.isfinite(amps)):
            raise ValueError("state has non-finite amplitudes")
        amps.setflags(write=False)
        object.__setattr__(self, "local_dims", dims)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_tensor(cls, tensor):
        t = np.asarray(tensor, dtype=complex)
        return cls(t.shape, t.reshape(-1))

    @classmethod
    def basis(cls, local_dims, digits):
        """Computational basis state with the given per-leg digits."""
        dims = tuple(local_dims)
        amps = np.zeros(int(np.prod(dims)), dtype=complex)
        amps[np.ravel_multi_index(tuple(digits), dims)] = 1.0
        return cls(dims, amps)

    @property
    def n_sites(self):
        return len(self.local_dims)

    @property
    def dim(self):
        return self.amplitudes.size

    def tensor(self):
        return self.amplitudes.reshape(self.local_dims)

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol=EXACT_TOL):
        return abs(self.norm() - 1.0) <= tol

    def normalized(self):
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.local_dims, self.amplitudes / n)

    def inner(self, other):
        """Return <self|other>."""
        if self.local_dims != other.local_dims:
            raise DimensionError(
                f"local dims differ: {self.local_dims} vs {other.local_dims}"
            )
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def apply_site(op, site, tensor):
    """Apply ``op`` to axis ``site`` of an amplitude tensor.

    ``tensor`` may carry extra trailing axes (e.g. a batch of states); only
    axis ``site`` is touched.
    """
    out = np.tensordot(op, tensor, axes=([1], [site]))
    return np.moveaxis(out, 0, site)


def apply_local(op, site, state):
    """Return (I x ... x op x ... x I)|state> with ``op`` acting on ``site``."""
    a = _square(op, "op")
    if not 0 <= site < state.n_sites:
        raise DimensionError(f"site {site} out of range for {state.n_sites} legs")
    expected = state.local_dims[site]
    if a.shape[0] != expected:
        raise DimensionError(
            f"operator of dimension {a.shape[0]} applied at site {site}, "
            f"expected dimension {expected}"
        )
    return StateVector.from_tensor(apply_site(a, site, state.tensor()))


def kron_all(ops):
    """Kronecker product of a sequence of matrices (first factor most significant)."""
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def is_projector(m, tol=STRUCT_TOL):
    a = _square(m)
    herm = np.max(np.abs(a - a.conj().T), initial=0.0)
    idem = np.max(np.abs(a @ a - a), initial=0.0)
    return bool(herm <= tol and idem <= tol)


def is_coisometry(v, tol=STRUCT_TOL):
    a = as_matrix(v, "V")
    rows, cols = a.shape
    if rows > cols:
        raise DimensionError(
            f"a {rows}x{cols} matrix cannot be a co-isometry (rows exceed columns)"
        )
    dev = np.max(np.abs(a @ a.conj().T - np.eye(rows)), initial=0.0)
    return bool(dev <= tol)


def is_hermitian(m, tol=1e-10):
    a = _square(m)
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol)


def is_unitary(u, tol=STRUCT_TOL):
    a = _square(u)
    return bool(np.max(np.abs(a @ a.conj().T - np.eye(a.shape[0])), initial=0.0) <= tol)


def _round_robin(n):
    """Pairings of a round-robin tournament covering every index pair once."""
    idx = list(range(n + (n % 2)))
    size = len(idx)
    rounds = []
    for _ in range(size - 1):
        pairs = [(idx[i], idx[size - 1 - i]) for i in range(size // 2)]
        rounds.append([(min(p, q), max(p, q)) for p, q in pairs if q < n and p < n])
        idx = [idx[0], idx[-1]] + idx[1:-1]
    return rounds


def jacobi_eigh(m, cap=None, max_sweeps=60):
    """Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Each sweep visits all index pairs in round-robin order; the pairs of one
    round are disjoint, so their rotations are applied together.

    Returns ascending eigenvalues and the matching orthonormal eigenvectors
    as columns.
    """
    a = _square(m).copy()
    n = a.shape[0]
    if cap is not None and n > cap:
        raise CapExceededError(
            f"dimension {n} exceeds eigensolver cap {cap}; "
            "verify through state-based checks instead"
        )
    a = 0.5 * (a + a.conj().T)
    vecs = np.eye(n, dtype=complex)
    if n == 1:
        return np.array([a[0, 0].real]), vecs
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), vecs
    rounds = [
        (np.array([p for p, _ in r]), np.array([q for _, q in r]))
        for r in _round_robin(n)
    ]
    off_mask = ~np.eye(n, dtype=bool)
    last_off = np.inf
    for _ in range(max_sweeps):
        off = np.linalg.norm(a[off_mask])
        if off <= 1e-15 * scale or off >= last_off:
            break
        last_off = off
        for P, Q in rounds:
            apq = a[P, Q]
            mag = np.abs(apq)
            active = mag > 1e-18 * scale
            safe = np.where(active, mag, 1.0)
            phase = np.where(active, apq / safe, 1.0)
            tau = (a[Q, Q].real - a[P, P].real) / (2.0 * safe)
            sgn = np.where(tau >= 0.0, 1.0, -1.0)
            t = np.where(active, sgn / (np.abs(tau) + np.hypot(1.0, tau)), 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            # G = diag(1, conj(phase)) @ [[c, s], [-s, c]]
            g00 = c.astype(complex)
            g01 = s.astype(complex)
            g10 = -s * np.conj(phase)
            g11 = c * np.conj(phase)
            cp, cq = a[:, P].copy(), a[:, Q].copy()
            a[:, P] = cp * g00 + cq * g10
            a[:, Q] = cp * g01 + cq * g11
            rp, rq = a[P, :].copy(), a[Q, :].copy()
            a[P, :] = np.conj(g00)[:, None] * rp + np.conj(g10)[:, None] * rq
            a[Q, :] = np.conj(g01)[:, None] * rp + np.conj(g11)[:, None] * rq
            vp, vq = vecs[:, P].copy(), vecs[:, Q].copy()
            vecs[:, P] = vp * g00 + vq * g10
            vecs[:, Q] = vp * g01 + vq * g11
    w = np.real(np.diag(a))
    order = np.argsort(w, kind="stable")
    return w[order], vecs[:, order]


def hermitian_extremes(m, cap=DEFAULT_EIG_CAP, herm_tol=1e-10):
    """Smallest and largest eigenvalue of a Hermitian matrix."""
    a = _square(m)
    if not is_hermitian(a, herm_tol):
        raise ValueError("matrix is not Hermitian within tolerance")
    w, _ = jacobi_eigh(a, cap=cap)
    return float(w[0]), float(w[-1])


def singular_values(m):
    """Singular values in descending order, from the eigenvalues of M^dagger M.

    Hermitian input skips the squaring and uses absolute eigenvalues, which
    keeps tiny singular values accurate.
    """
    a = as_matrix(m)
    if a.size == 0:
        raise DimensionError("empty matrix")
    if a.shape[0] == a.shape[1] and is_hermitian(a, 1e-13):
        w, _ = jacobi_eigh(a)
        return np.sort(np.abs(w))[::-1]
    gram = a.conj().T @ a if a.shape[1] <= a.shape[0] else a @ a.conj().T
    w, _ = jacobi_eigh(gram)
    s = np.sqrt(np.clip(w, 0.0, None))
    k = min(a.shape)
    return np.sort(s)[::-1][:k]


def smallest_singular_value(m):
    a = as_matrix(m)
    if a.size == 0:
        raise DimensionError("empty matrix")
    return float(singular_values(a)[-1])


def _vector_rows(vectors):
    rows = []
    dims = None
    for v in vectors:
        if isinstance(v, StateVector):
            if dims is None:
                dims = v.local_dims
            elif v.local_dims != dims:
                raise DimensionError("vectors do not share local dimensions")
            rows.append(v.amplitudes)
        else:
            rows.append(np.asarray(v, dtype=complex).reshape(-1))
    if rows and len({r.size for r in rows}) != 1:
        raise DimensionError("vectors have different lengths")
    return rows


def rank_of_span(vectors: Sequence, tol=1e-6):
    """Numerical rank of a family of vectors.

    A singular value counts when it exceeds ``tol`` times the largest one.
    """
    rows = _vector_rows(vectors)
    if not rows:
        return 0
    a = np.vstack(rows)
    if not np.any(a):
        return 0
    s = singular_values(a)
    return int(np.sum(s > tol * s[0]))
