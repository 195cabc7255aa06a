import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from majorminor.errors import NumericalFailure
from majorminor.lp import simplex


def random_lp(rng, m, n):
    """Feasible and bounded: the first row caps total mass, a known point is feasible."""
    A = rng.integers(-3, 4, size=(m, n)).astype(float)
    A[0] = 1.0
    x0 = rng.random(n) * (rng.random(n) < 0.6)
    b = A @ x0
    b[0] = x0.sum() if x0.sum() > 0 else 1.0
    if x0.sum() == 0:
        x0[0] = 1.0
        b = A @ x0
    c = rng.integers(-5, 6, size=n).astype(float)
    return c, A, b


@given(seed=st.integers(0, 2 ** 31), m=st.integers(1, 6), n=st.integers(2, 10))
def test_matches_highs(seed, m, n):
    rng = np.random.default_rng(seed)
    c, A, b = random_lp(rng, m, n)
    res = simplex(c, A, b)
    ref = linprog(-c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    assert ref.status == 0
    assert abs(res.value - (-ref.fun)) <= 1e-8 * (1 + abs(ref.fun))
    assert np.abs(A @ res.x - b).max() <= 1e-9 * (1 + np.abs(b).max())
    assert res.x.min() >= 0


def test_redundant_rows():
    A = np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [2.0, 2.0, 2.0]])
    b = np.array([1.0, 1.0, 2.0])
    res = simplex([1.0, 3.0, 2.0], A, b)
    assert res.value == pytest.approx(3.0)
    np.testing.assert_allclose(res.x, [0, 1, 0], atol=1e-12)


def test_negative_rhs_rows_are_flipped():
    res = simplex([1.0, 0.0], [[-1.0, -1.0]], [-2.0])
    assert res.value == pytest.approx(2.0)


def test_degenerate_cycling_example():
    # Beale's example in equality form with slacks; Dantzig pricing cycles without anti-cycling
    c = np.array([0.75, -150.0, 0.02, -6.0, 0, 0, 0])
    A = np.array([[0.25, -60.0, -0.04, 9.0, 1, 0, 0],
                  [0.5, -90.0, -0.02, 3.0, 0, 1, 0],
                  [0.0, 0.0, 1.0, 0.0, 0, 0, 1]])
    b = np.array([0.0, 0.0, 1.0])
    res = simplex(c, A, b)
    assert res.value == pytest.approx(0.05)


def test_infeasible():
    with pytest.raises(NumericalFailure):
        simplex([1.0, 1.0], [[1.0, 1.0], [1.0, 1.0]], [1.0, 2.0])


def test_dimension_check():
    with pytest.raises(ValueError):
        simplex([1.0], [[1.0, 1.0]], [1.0])
