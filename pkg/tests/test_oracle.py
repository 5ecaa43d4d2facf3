import math

import numpy as np
import pytest

from lqgball import crosscheck, oracle


def test_green_hand_case():
    G = oracle.dense_green(3, dim=1)
    assert np.abs(G - np.array([[3, 2, 1], [2, 4, 2], [1, 2, 3]]) / 4.0).max() <= 1e-14


def test_green_symmetric_positive_definite():
    G = oracle.dense_green(8)
    assert np.array_equal(G, G.T) or np.abs(G - G.T).max() < 1e-14
    np.linalg.cholesky(G)  # raises unless positive definite


def test_green_diagonal_maximal_at_centre():
    n = 9
    diag = np.diag(oracle.dense_green(n)).reshape(n, n)
    assert np.unravel_index(np.argmax(diag), diag.shape) == (4, 4)
    assert diag[0, 0] == pytest.approx(diag.min(), abs=1e-14)


def test_laplacian_rows():
    L = oracle.dirichlet_laplacian(4)
    assert np.all(np.diag(L) == 4.0)
    assert L.sum(axis=1)[5] == 0.0  # interior cell: no boundary neighbour
    with pytest.raises(ValueError):
        oracle.dirichlet_laplacian(4, dim=3)


def test_size_caps():
    with pytest.raises(ValueError):
        oracle.dense_green(oracle.MAX_GREEN_SIDE + 1)
    with pytest.raises(ValueError):
        oracle.floyd_warshall(np.ones((9, 9)))
    with pytest.raises(ValueError):
        oracle.floyd_warshall(np.ones((3, 4)))
    with pytest.raises(ValueError):
        oracle.exhaustive_box_count(np.zeros((oracle.MAX_BOX_POINTS + 1, 2)), 0.5, (-1, -1, 1, 1))


def test_floyd_warshall_uniform_2x2():
    h = 0.25
    D = oracle.floyd_warshall(np.ones((2, 2)), h)
    assert D[0, 1] == h and D[0, 2] == h
    assert D[0, 3] == pytest.approx(h * math.sqrt(2), rel=1e-15)
    D4 = oracle.floyd_warshall(np.ones((2, 2)), h, topology="four")
    assert D4[0, 3] == 2 * h


def test_floyd_warshall_geo_rule():
    c = np.array([[1.0, 4.0], [1.0, 1.0]])
    assert oracle.floyd_warshall(c, edge_rule="geo")[0, 1] == 2.0
    assert oracle.floyd_warshall(c)[0, 1] == 2.5


@pytest.mark.parametrize("check", crosscheck.ALL, ids=lambda c: c.__name__)
def test_crosscheck_suite(check):
    res = check()
    assert res.passed, res.detail
