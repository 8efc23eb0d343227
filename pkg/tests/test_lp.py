import numpy as np
import pytest
from scipy.optimize import linprog

from tightbell.lp import linprog_max


def test_small_known_optimum():
    # max x + y  s.t. x + 2y + s = 4, 3x + y + t = 6
    a = np.array([[1, 2, 1, 0], [3, 1, 0, 1]], dtype=float)
    res = linprog_max([1, 1, 0, 0], a, [4, 6])
    assert res.status == "optimal"
    assert res.value == pytest.approx(2.8, abs=1e-12)


def test_infeasible_and_unbounded():
    assert linprog_max([1, 0], [[1, 1]], [-1]).status == "infeasible"
    assert linprog_max([1, 0], [[1, -1]], [0]).status == "unbounded"


def test_redundant_rows():
    a = np.array([[1, 1, 0], [2, 2, 0], [0, 1, 1]], dtype=float)
    res = linprog_max([1, 2, 3], a, [1, 2, 1])
    assert res.status == "optimal"
    assert res.value == pytest.approx(4.0, abs=1e-12)  # x = z = 1


@pytest.mark.parametrize("seed", range(40))
def test_against_scipy(seed):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(2, 8), rng.integers(8, 20)
    a = rng.normal(size=(m, n))
    x0 = rng.random(n)
    b = a @ x0
    c = rng.normal(size=n)
    ref = linprog(-c, A_eq=a, b_eq=b, bounds=(0, None), method="highs")
    ours = linprog_max(c, a, b)
    if ref.status == 3:
        assert ours.status == "unbounded"
    else:
        assert ours.status == "optimal"
        assert ours.value == pytest.approx(-ref.fun, rel=1e-8, abs=1e-8)
