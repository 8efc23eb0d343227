import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_hermitian, random_unitary
from tightbell.errors import CapExceededError, DimensionError
from tightbell.numerics import (
    I2,
    SX,
    SZ,
    StateVector,
    apply_local,
    hermitian_extremes,
    is_coisometry,
    is_projector,
    jacobi_eigh,
    kron_all,
    rank_of_span,
    singular_values,
    smallest_singular_value,
)

SQ2 = np.sqrt(2.0)
BELL = StateVector((2, 2), np.array([1, 0, 0, 1]) / SQ2)


def basis(*digits):
    return StateVector.basis((2,) * len(digits), digits)


def test_apply_flip_on_first_site():
    out = apply_local(SX, 0, basis(0, 0))
    assert np.allclose(out.amplitudes, basis(1, 0).amplitudes, atol=1e-15)


@pytest.mark.parametrize("site", [0, 1, 2])
def test_apply_identity_is_noop(site, rng):
    v = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi = StateVector((2, 2, 2), v)
    assert np.array_equal(apply_local(I2, site, psi).amplitudes, psi.amplitudes)


def test_apply_phase_on_second_site():
    out = apply_local(SZ, 1, BELL)
    assert np.allclose(out.amplitudes, np.array([1, 0, 0, -1]) / SQ2, atol=1e-15)


def test_apply_matches_kronecker(rng):
    psi = StateVector((2, 3, 2), rng.normal(size=12) + 0j)
    op = random_unitary(rng, 3)
    dense = kron_all([I2, op, I2]) @ psi.amplitudes
    assert np.allclose(apply_local(op, 1, psi).amplitudes, dense, atol=1e-13)


def test_apply_dimension_error_names_site():
    with pytest.raises(DimensionError, match="site 1.*2"):
        apply_local(np.eye(3), 1, BELL)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 2), st.integers(0, 2))
def test_apply_commutes_on_distinct_sites(seed, i, j):
    if i == j:
        return
    rng = np.random.default_rng(seed)
    psi = StateVector((2, 2, 2), rng.normal(size=8) + 1j * rng.normal(size=8))
    a, b = random_unitary(rng, 2), random_hermitian(rng, 2)
    ab = apply_local(b, j, apply_local(a, i, psi)).amplitudes
    ba = apply_local(a, i, apply_local(b, j, psi)).amplitudes
    assert np.max(np.abs(ab - ba)) <= 1e-12


def test_is_projector_examples():
    assert is_projector((I2 + SX) / 2)
    assert not is_projector(SX)
    assert not is_projector(0.5 * I2)
    with pytest.raises(DimensionError):
        is_projector(np.ones((2, 3)))


def test_is_coisometry_examples(tsirelson):
    phi_p = np.array([1, 0, 0, 1]) / SQ2
    phi_m = np.array([0, 1, -1, 0]) / SQ2
    assert is_coisometry(np.array([phi_p.conj(), phi_m.conj()]))
    assert is_coisometry(np.eye(2))
    assert not is_coisometry(np.ones((2, 4)))
    assert is_coisometry(tsirelson.V)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4))
def test_coisometry_gives_projector(seed, rows):
    rng = np.random.default_rng(seed)
    v = random_unitary(rng, 6)[:rows]
    assert is_coisometry(v)
    assert is_projector(v.conj().T @ v)


def test_rank_examples():
    vecs = [basis(a, b) for a in (0, 1) for b in (0, 1)]
    assert rank_of_span(vecs) == 4
    assert rank_of_span([basis(0, 0), basis(0, 0)]) == 1
    assert rank_of_span([]) == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 6))
def test_rank_invariant_under_shuffle(seed, n):
    rng = np.random.default_rng(seed)
    base = rng.normal(size=(3, 5))
    vecs = [rng.normal(size=3) @ base for _ in range(n)]
    perm = rng.permutation(n)
    assert rank_of_span(vecs) == rank_of_span([vecs[k] for k in perm])


def test_smallest_singular_value_examples():
    assert smallest_singular_value(SZ / 2) == pytest.approx(0.5, abs=1e-14)
    assert smallest_singular_value((I2 + SZ) / 2) == pytest.approx(0.0, abs=1e-14)
    assert smallest_singular_value(I2) == pytest.approx(1.0, abs=1e-14)


def test_singular_values_against_numpy(rng):
    a = rng.normal(size=(5, 3)) + 1j * rng.normal(size=(5, 3))
    ours = np.sort(singular_values(a))
    ref = np.sort(np.linalg.svd(a, compute_uv=False))
    assert np.allclose(ours, ref, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 7, 16, 33])
def test_jacobi_against_numpy(n, rng):
    m = random_hermitian(rng, n)
    w, v = jacobi_eigh(m)
    assert np.allclose(w, np.linalg.eigvalsh(m), atol=1e-11)
    assert np.allclose(m @ v, v * w, atol=1e-10)
    assert np.allclose(v.conj().T @ v, np.eye(n), atol=1e-11)


def test_jacobi_degenerate_spectrum():
    w, _ = jacobi_eigh(kron_all([SZ, SZ, I2]))
    assert np.allclose(w, [-1] * 4 + [1] * 4, atol=1e-14)


def test_extremes_examples(tsirelson):
    from tightbell.bell import evaluate_on_system

    b1 = evaluate_on_system(tsirelson.connector.functional(1), tsirelson.refs)
    lo, hi = hermitian_extremes(b1)
    assert lo == pytest.approx(-1, abs=1e-12) and hi == pytest.approx(1, abs=1e-12)
    assert hermitian_extremes(np.eye(3)) == pytest.approx((1, 1), abs=1e-14)


def test_extremes_errors():
    with pytest.raises(ValueError):
        hermitian_extremes(np.array([[0, 1], [0, 0]]))
    with pytest.raises(CapExceededError):
        hermitian_extremes(np.eye(65))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 5))
def test_extremes_of_projector(seed, rank):
    rng = np.random.default_rng(seed)
    v = random_unitary(rng, 5)[:rank]
    p = v.conj().T @ v
    lo, hi = hermitian_extremes(p)
    expect = {0: (0, 0), 5: (1, 1)}.get(rank, (0, 1))
    assert abs(lo - expect[0]) <= 1e-10 and abs(hi - expect[1]) <= 1e-10


def test_state_vector_validation():
    with pytest.raises(DimensionError):
        StateVector((2, 2), np.ones(3))
    psi = StateVector((2, 2), np.array([1, 1, 0, 0], dtype=complex))
    assert not psi.is_normalized()
    assert psi.normalized().is_normalized()
