import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randbound.rademacher import RademacherObjective
from randbound.search import (
    SearchConfig,
    dyadic_grid,
    grid_vector_count,
    grid_vectors,
    lmo_column_l1_ball,
    lmo_square_function_ball,
    norm_grad,
    restart_rng,
)
from randbound.spaces import INF, lp_norm, make_family, square_function


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(restarts=0)
    assert SearchConfig().to_dict()["restarts"] == 64


def test_grids_nested():
    for level in range(1, 5):
        coarse, fine = set(dyadic_grid(level)), set(dyadic_grid(level + 1))
        assert coarse <= fine


@pytest.mark.parametrize("d,level", [(1, 1), (2, 2), (3, 1)])
def test_grid_vectors(d, level):
    V = grid_vectors(d, level)
    assert len(V) == grid_vector_count(d, level)
    # one representative per +/- pair
    keys = {tuple(v) for v in V}
    assert all(tuple(-v) not in keys for v in V)


def test_restart_streams_stable():
    a = restart_rng(7, 3).uniform(size=4)
    b = restart_rng(7, 3).uniform(size=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, restart_rng(7, 4).uniform(size=4))


@given(st.integers(1, 3), st.integers(1, 3), st.sampled_from([1.0, 2.0, 3.0, INF]), st.integers(0, 2**32 - 1))
def test_square_function_lmo_is_optimal(k, d, p, seed):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((1, k, d))
    X = lmo_square_function_ball(G, p)
    assert lp_norm(square_function(X), p)[0] <= 1 + 1e-12
    best = float((G * X).sum())
    for _ in range(200):
        Y = rng.standard_normal((1, k, d))
        Y /= lp_norm(square_function(Y), p)[0]
        assert float((G * Y).sum()) <= best + 1e-9


def test_column_l1_lmo():
    G = np.array([[[1.0, -3.0], [2.0, 0.5]]])
    X = lmo_column_l1_ball(G)
    assert np.array_equal(X[0], [[0.0, -1.0], [1.0, 0.0]])


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_norm_grad_matches_finite_difference(p):
    y = np.array([0.3, -1.2, 2.0])
    g = norm_grad(y, p)
    h = 1e-6
    fd = [(lp_norm(y + h * e, p) - lp_norm(y - h * e, p)) / (2 * h) for e in np.eye(3)]
    assert np.allclose(g, fd, atol=1e-6)


def test_distinct_assignment_is_optimal():
    rng = np.random.default_rng(0)
    F = make_family(rng.standard_normal((4, 1, 3)), INF, 1.0)
    obj = RademacherObjective(F)
    X = rng.standard_normal((6, 3, 3))
    A = obj.best_ops(X, distinct=True)
    C = obj.contrib(X)
    for b in range(6):
        brute = max(sum(C[b, i, p[i]] for i in range(3)) for p in itertools.permutations(range(4), 3))
        assert C[b, np.arange(3), A[b]].sum() == pytest.approx(brute)
        assert len(set(A[b])) == 3
