import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tightbell.bell import CorrelatorTensor, evaluate_on_system
from tightbell.connector import random_projective_qubit_system, verify_tight
from tightbell.errors import ParameterError
from tightbell.library import (
    GraphSpec,
    TiltedParams,
    _addends_tensor,
    basta_betas,
    basta_terms,
    build_basta,
    build_family,
    build_tilted,
    build_tsirelson,
    build_wbc,
    graph_state,
    random_connected_graph,
    stabilizer,
    tsirelson_functionals,
    wbc_degenerate,
    wbc_validity,
)
from tightbell.numerics import I2, SZ, kron_all

SQ2 = np.sqrt(2.0)


def states(cx):
    return cx.meta["phi_plus"].amplitudes, cx.meta["phi_minus"].amplitudes


def ops(cx):
    return [evaluate_on_system(cx.connector.functional(y), cx.refs) for y in range(2)]


def valid_wbc(rng):
    while True:
        a = rng.uniform(-np.pi, np.pi, 3)
        if wbc_validity(*a) < -1e-3 and not wbc_degenerate(*a, tol=1e-3):
            return tuple(a)


def stabilizer_product_residual(op, g):
    """Distance of op from the nearest multiple of a product of stabilizers."""
    gs = [kron_all(stabilizer(g, i)) for i in range(g.q)]
    best = np.inf
    for mask in itertools.product((0, 1), repeat=g.q):
        p = np.eye(2**g.q, dtype=complex)
        for i, on in enumerate(mask):
            if on:
                p = p @ gs[i]
        c = np.trace(p.conj().T @ op) / 2**g.q
        best = min(best, float(np.max(np.abs(op - c * p))))
    return best


def test_tsirelson_examples(tsirelson):
    assert np.allclose(tsirelson.mbar[(1, 1)], (I2 + SZ) / 2, atol=1e-12)
    assert np.allclose(tsirelson.mbar[(-1, 1)], (I2 - SZ) / 2, atol=1e-12)
    phi_p, _ = states(tsirelson)
    assert np.vdot(phi_p, ops(tsirelson)[1] @ phi_p) == pytest.approx(1.0, abs=1e-12)
    rng = np.random.default_rng(5)
    for _ in range(5):
        ms = random_projective_qubit_system(rng, (2, 2))
        assert np.allclose(evaluate_on_system(tsirelson.connector.star, ms), np.eye(4), atol=1e-12)


def test_tilted_at_quarter_pi_is_chsh():
    p = TiltedParams(np.pi / 4)
    assert p.alpha == 0.0 and p.beta == pytest.approx(2 * SQ2, abs=1e-15)
    cx = build_tilted(np.pi / 4)
    for y, ref in enumerate(tsirelson_functionals()):
        assert cx.connector.functional(y).allclose(ref, atol=1e-15)


def test_tilted_values_at_sixth_pi():
    p = TiltedParams(np.pi / 6)
    assert p.alpha == pytest.approx(2 / math.sqrt(7), abs=1e-14)
    assert p.beta == pytest.approx(8 / math.sqrt(7), abs=1e-14)


@pytest.mark.parametrize("theta", np.linspace(0.05, np.pi / 4, 9))
def test_tilted_saturates(theta):
    cx = build_tilted(theta)
    phi_p, phi_m = states(cx)
    b0, b1 = ops(cx)
    assert np.allclose(b1 @ phi_p, phi_p, atol=1e-12)
    assert np.allclose(b1 @ phi_m, -phi_m, atol=1e-12)
    assert np.allclose(b0 @ phi_p, phi_m, atol=1e-12)


def test_tilted_continuity_near_quarter_pi():
    near = build_tilted(np.pi / 4 - 1e-6).connector
    assert near.allclose(build_tilted(np.pi / 4).connector, atol=1e-4)


def test_tilted_domain():
    with pytest.raises(ParameterError):
        build_tilted(0.0)
    with pytest.raises(ParameterError):
        build_tilted(1.0)


@pytest.mark.parametrize("seed", range(6))
def test_wbc_actions(seed):
    a = valid_wbc(np.random.default_rng(seed))
    cx = build_wbc(*a)
    phi_p, phi_m = states(cx)
    b0, b1 = ops(cx)
    sigma = sum(a)
    assert np.vdot(phi_m, b0 @ phi_p) == pytest.approx(1j * np.sin(sigma), abs=1e-12)
    assert np.allclose(b1 @ phi_p, phi_p, atol=1e-12)
    assert np.allclose(b1 @ phi_m, -phi_m, atol=1e-12)
    # M-bar observables are separated by the Bloch angle sigma + pi
    m0, m1 = cx.mbar_observable(0), cx.mbar_observable(1)
    cos = np.real(np.trace(m0 @ m1)) / 2
    assert cos == pytest.approx(np.cos(sigma + np.pi), abs=1e-12)


def test_wbc_rejects_invalid_angles():
    with pytest.raises(ParameterError):
        build_wbc(0.3, 0.2, 0.1)
    with pytest.raises(ParameterError):
        build_wbc(0.0, -np.pi / 4, np.pi / 4)


def test_graph_state_star():
    amps = graph_state(GraphSpec.star(3)).amplitudes * math.sqrt(8)
    assert np.allclose(amps, [1, 1, 1, 1, 1, -1, -1, 1], atol=1e-15)


@pytest.mark.parametrize("sign", [1, -1])
def test_graph_state_triangle(sign):
    amps = graph_state(GraphSpec.triangle(), sign).amplitudes * math.sqrt(8)
    # |000>, |001>, |010>, |011>, |100>, |101>, |110>, |111>
    expect = [1, sign, sign, -1, sign, -1, -1, -sign]
    assert np.allclose(amps, expect, atol=1e-15)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 7))
def test_graph_and_antigraph_orthogonal(seed, q):
    g = random_connected_graph(np.random.default_rng(seed), q)
    assert abs(np.vdot(graph_state(g, 1).amplitudes, graph_state(g, -1).amplitudes)) < 1e-14
    for i in range(q):
        gi = kron_all(stabilizer(g, i))
        for sign in (1, -1):
            v = graph_state(g, sign).amplitudes
            assert np.allclose(gi @ v, sign * v, atol=1e-13)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_basta_star_unnormalized_b0(n):
    g = GraphSpec.star(n)
    cx = build_basta(g)
    _, beta0 = basta_betas(g)
    phi_p, phi_m = states(cx)
    b0 = ops(cx)[0] * beta0
    assert np.allclose(b0 @ phi_p, 2 * SQ2 * (n - 1) * phi_m, atol=1e-11)
    assert np.allclose(b0 @ phi_m, 2 * SQ2 * (n - 1) * phi_p, atol=1e-11)


def test_basta_triangle_b1():
    g = GraphSpec.triangle()
    assert basta_betas(g)[0] == pytest.approx(4 * SQ2, abs=1e-14)
    cx = build_basta(g)
    phi_p, phi_m = states(cx)
    b1 = ops(cx)[1]
    assert np.allclose(b1 @ phi_p, phi_p, atol=1e-12)
    assert np.allclose(b1 @ phi_m, -phi_m, atol=1e-12)


def test_basta_random_six():
    g = random_connected_graph(np.random.default_rng(11), 6)
    cx = build_basta(g)
    phi_p, phi_m = states(cx)
    assert np.linalg.norm(ops(cx)[0] @ phi_p - phi_m) < 1e-10


@pytest.mark.parametrize("seed", range(4))
def test_basta_addends_are_stabilizer_products(seed):
    g = random_connected_graph(np.random.default_rng(seed), 4 + seed % 2)
    cx = build_basta(g)
    beta1, _ = basta_betas(g)
    b1_addends, b0_addends = basta_terms(g)
    gs = [kron_all(stabilizer(g, i)) for i in range(g.q)]
    for addend in b1_addends:
        op = evaluate_on_system(_addends_tensor(g.q, [addend], 1.0 / beta1), cx.refs)
        assert stabilizer_product_residual(op, g) < 1e-12
    for addend in b0_addends:
        op = evaluate_on_system(_addends_tensor(g.q, [addend], 1.0), cx.refs)
        for gi in gs:
            assert np.max(np.abs(op @ gi + gi @ op)) < 1e-12


def test_graph_spec_validation():
    with pytest.raises(ValueError):
        GraphSpec(3, ((0, 0),))
    with pytest.raises(ValueError):
        GraphSpec(3, ((0, 5),))
    with pytest.raises(ParameterError):
        build_basta(GraphSpec(3, ((1, 2),)))
    g = GraphSpec.from_dict({"q": 3, "edges": [[2, 1], [0, 1]], "root": 0})
    assert g.edges == ((0, 1), (1, 2)) and GraphSpec.from_dict(g.to_dict()) == g


def test_even_neighbours_exclude_endpoints():
    g = GraphSpec.star(4)
    assert g.even_neighbours(1) == frozenset()
    tri = GraphSpec.triangle()
    assert tri.even_neighbours(1) == frozenset({2})


def _builders():
    out = [build_tsirelson()]
    out += [build_tilted(t) for t in (np.pi / 12, np.pi / 6, np.pi / 4)]
    rng = np.random.default_rng(2)
    out += [build_wbc(*valid_wbc(rng)) for _ in range(3)]
    out += [build_basta(GraphSpec.star(3)), build_basta(GraphSpec.triangle())]
    out += [build_basta(random_connected_graph(rng, 5))]
    return out


@pytest.mark.parametrize("cx", _builders(), ids=lambda cx: cx.name)
def test_builders_tight_and_diagonal(cx):
    assert verify_tight(cx, 1e-9).passed
    phi_p, phi_m = states(cx)
    assert abs(np.vdot(phi_p, ops(cx)[1] @ phi_m)) < 1e-12


def test_build_family_dispatch():
    assert build_family("tsirelson").name == "tsirelson"
    assert build_family("basta", {"graph": {"q": 3, "edges": [[0, 1], [0, 2]]}}).q == 3
    assert build_family("basta", {"graph": GraphSpec.triangle()}).q == 3
    with pytest.raises(ParameterError):
        build_family("mermin")


def test_correlator_pattern_is_chsh():
    _, b1 = tsirelson_functionals()
    assert b1.allclose(
        CorrelatorTensor.from_terms((2, 2), {(0, 0): 1, (0, 1): 1, (1, 0): 1, (1, 1): -1})
        * (1 / (2 * SQ2))
    )
