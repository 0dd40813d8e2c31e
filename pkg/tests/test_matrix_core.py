import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affine_dim.matrix_core import (
    E1,
    E2,
    Mat2,
    ProjPoint,
    SingularMatrixError,
    all_word_log_dets,
    all_word_products,
    angle,
    area,
    batch_log_singular_values,
    batch_singular_values,
    image_angle,
    index_to_word,
    restricted_norm,
    singular_values,
    stack,
    word_det,
    word_product,
    word_to_index,
)

from conftest import random_matrix


def svd_oracle(A: Mat2):
    return tuple(np.linalg.svd(A.as_array(), compute_uv=False))


def test_diagonal_and_permuted():
    assert singular_values(Mat2.diag(0.5, 0.25)) == pytest.approx((0.5, 0.25), abs=1e-15)
    assert singular_values(Mat2(0, 0.5, 0.25, 0)) == pytest.approx((0.5, 0.25), abs=1e-15)


def test_positive_example_against_quadratic():
    A = Mat2(0.5, 0.4, 0.1, 0.1)
    # eigenvalues of A A^T by the quadratic formula
    M = A.as_array() @ A.as_array().T
    tr, det = np.trace(M), np.linalg.det(M)
    lam1 = (tr + math.sqrt(tr * tr - 4 * det)) / 2
    a1, a2 = singular_values(A)
    assert a1 == pytest.approx(math.sqrt(lam1), rel=1e-12)
    assert a1 == pytest.approx(0.655566, abs=1e-6)
    assert a1 * a2 == pytest.approx(0.01, rel=1e-12)
    assert a2 == pytest.approx(0.015254, abs=1e-6)


def test_singular_input_rejected():
    with pytest.raises(SingularMatrixError, match="singular matrix"):
        singular_values(Mat2(1, 2, 2, 4))


def test_thousand_random_matrices(rng):
    dirs = np.linspace(0, 2 * math.pi, 360, endpoint=False)
    U = np.stack([np.cos(dirs), np.sin(dirs)])
    for _ in range(1000):
        A = random_matrix(rng)
        a1, a2 = singular_values(A)
        assert a1 >= a2 > 0
        assert a1 * a2 == pytest.approx(abs(A.det), rel=1e-10)
        assert np.max(np.linalg.norm(A.as_array() @ U, axis=0)) == pytest.approx(a1, abs=1e-4)
        o1, o2 = svd_oracle(A)
        assert a1 == pytest.approx(o1, rel=1e-12)
        assert a2 == pytest.approx(o2, rel=1e-9)
        assert A.norm == pytest.approx(o1, rel=1e-12)
        assert 1 / A.inverse().norm == pytest.approx(a2, rel=1e-9)


def test_batch_agrees_with_scalar(rng):
    mats = [random_matrix(rng) for _ in range(50)]
    arr = stack(mats)
    b1, b2 = batch_singular_values(arr)
    l1, l2 = batch_log_singular_values(arr)
    for A, x1, x2, y1, y2 in zip(mats, b1, b2, l1, l2):
        a1, a2 = singular_values(A)
        assert x1 == pytest.approx(a1, rel=1e-12) and x2 == pytest.approx(a2, rel=1e-10)
        assert math.exp(y1) == pytest.approx(a1, rel=1e-12) and math.exp(y2) == pytest.approx(a2, rel=1e-10)


def test_log_singular_values_survive_cancellation():
    # a long positive product: ad - bc loses every digit, the log-det route does not
    system = [Mat2(0.5, 0.4, 0.1, 0.1), Mat2(0.1, 0.1, 0.4, 0.5)]
    n = 30
    word = (0, 1) * (n // 2)
    P = word_product(word, system)
    exact_log_det = sum(math.log(abs(system[i].det)) for i in word)
    l1, l2 = batch_log_singular_values(P.as_array()[None], np.array([exact_log_det]))
    assert l1[0] + l2[0] == pytest.approx(exact_log_det, rel=1e-14)
    assert l2[0] < l1[0]


def test_restricted_norm_examples():
    A = Mat2.diag(0.5, 0.25)
    assert restricted_norm(A, E1) == pytest.approx(0.5)
    assert restricted_norm(A, E2) == pytest.approx(0.25)
    assert restricted_norm(A, ProjPoint.from_vector((1, 1))) == pytest.approx(math.hypot(0.5, 0.25) / math.sqrt(2), abs=1e-12)
    assert restricted_norm(A, ProjPoint.from_vector((1, 1))) == pytest.approx(0.395285, abs=1e-6)


def test_restricted_norm_between_singular_values(rng):
    for _ in range(200):
        A = random_matrix(rng)
        a1, a2 = singular_values(A)
        r = restricted_norm(A, ProjPoint(rng.uniform(0, math.pi)))
        assert a2 * (1 - 1e-12) <= r <= a1 * (1 + 1e-12)


def test_angle_examples_and_sandwich():
    diag = ProjPoint.from_vector((1, 1))
    cases = [(E1, E2, math.pi / 2), (E1, E1, 0.0), (E1, diag, math.pi / 4)]
    for x, y, expected in cases:
        assert angle(x, y) == pytest.approx(expected, abs=1e-15)
        a = area(x.vector, y.vector)
        assert a <= angle(x, y) + 1e-15 <= 2 * a + 1e-15
    assert area(E1.vector, diag.vector) == pytest.approx(0.707107, abs=1e-6)


def test_projpoint_sign_invariance():
    assert ProjPoint.from_vector((1, -2)) == ProjPoint.from_vector((-1, 2))
    assert ProjPoint.from_vector((-1, 0)) == E1
    assert ProjPoint(math.pi).theta == 0.0
    assert ProjPoint(-math.pi / 4).theta == pytest.approx(3 * math.pi / 4)
    with pytest.raises(ValueError):
        ProjPoint.from_vector((0, 0))


thetas = st.floats(min_value=-10, max_value=10, allow_nan=False)


@given(thetas, thetas, thetas)
@settings(max_examples=300, deadline=None)
def test_angle_is_a_metric(a, b, c):
    x, y, z = ProjPoint(a), ProjPoint(b), ProjPoint(c)
    assert 0 <= angle(x, y) <= math.pi / 2
    assert angle(x, y) == pytest.approx(angle(y, x), abs=1e-15)
    assert angle(x, x) == 0.0
    assert angle(x, z) <= angle(x, y) + angle(y, z) + 1e-12


@given(st.floats(0, math.pi, exclude_max=True), st.floats(0, math.pi, exclude_max=True))
@settings(max_examples=200, deadline=None)
def test_angle_zero_iff_equal(a, b):
    if angle(ProjPoint(a), ProjPoint(b)) == 0.0:
        assert math.sin(a - b) == pytest.approx(0.0, abs=1e-15)
    else:
        assert a != b


def test_image_angle_matches_direct(rng):
    for _ in range(100):
        B = random_matrix(rng)
        v, w = rng.normal(size=2), rng.normal(size=2)
        direct = angle(ProjPoint.from_vector(B.apply(v)), ProjPoint.from_vector(B.apply(w)))
        assert image_angle(B, v, w) == pytest.approx(direct, abs=1e-12)


def test_word_product_examples():
    A1, A2 = Mat2(0, 0.5, 0.25, 0), Mat2.diag(1 / 3, 1 / 5)
    assert word_product((0,), [A1]) == A1
    assert word_product((0, 1), [Mat2.diag(0.5, 0.25), A2]).as_array() == pytest.approx(np.diag([1 / 6, 1 / 20]))
    fwd = word_product((0, 1), [A1, A2], "forward")
    rev = word_product((0, 1), [A1, A2], "reversed")
    assert fwd.as_array() == pytest.approx(np.array([[0, 0.1], [1 / 12, 0]]), abs=1e-15)
    assert not np.allclose(fwd.as_array(), rev.as_array())
    assert word_product((), [A1]) == Mat2(1, 0, 0, 1)
    with pytest.raises(ValueError):
        word_product((0,), [A1], "sideways")
    with pytest.raises(IndexError):
        word_product((2,), [A1, A2])


def test_word_product_associativity(rng):
    system = [random_matrix(rng) for _ in range(3)]
    for order in ("forward", "reversed"):
        for _ in range(50):
            u = tuple(rng.integers(0, 3, size=rng.integers(0, 6)))
            v = tuple(rng.integers(0, 3, size=rng.integers(0, 6)))
            Pu, Pv, Puv = (word_product(w, system, order) for w in (u, v, u + v))
            expected = Pu @ Pv if order == "forward" else Pv @ Pu
            assert Puv.as_array() == pytest.approx(expected.as_array(), abs=1e-12)


def test_word_det_is_product_of_dets(rng):
    system = [random_matrix(rng) for _ in range(2)]
    w = (0, 1, 1, 0, 1)
    assert word_det(w, system) == pytest.approx(word_product(w, system).det, rel=1e-10)


def test_all_word_products_enumeration(rng):
    system = [random_matrix(rng) for _ in range(3)]
    n = 4
    for order in ("forward", "reversed"):
        prods = all_word_products(system, n, order)
        assert prods.shape == (81, 2, 2)
        for k in rng.integers(0, 81, size=10):
            w = index_to_word(int(k), n, 3)
            assert word_to_index(w, 3) == k
            assert prods[k] == pytest.approx(word_product(w, system, order).as_array(), abs=1e-14)
    ld = all_word_log_dets(system, n)
    for k in (0, 17, 80):
        assert ld[k] == pytest.approx(math.log(abs(word_det(index_to_word(k, n, 3), system))), abs=1e-12)


def test_mat2_norms():
    A = Mat2(0.5, 0.4, 0.1, 0.1)
    assert A.inf_norm == pytest.approx(0.9)
    assert A.min_row_norm == pytest.approx(0.2)
    assert A.is_positive() and A.is_sign_definite()
    assert A.scale(-1).is_negative() and A.scale(-1).is_sign_definite()
    assert not Mat2(0.5, -0.1, 0.1, 0.2).is_sign_definite()
    assert (A @ A.inverse()).as_array() == pytest.approx(np.eye(2), abs=1e-12)
    assert Mat2.rotation(math.pi / 2, 0.5).as_array() == pytest.approx(np.array([[0, -0.5], [0.5, 0]]), abs=1e-15)
