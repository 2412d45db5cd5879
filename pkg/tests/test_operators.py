import numpy as np
import pytest

from ldrkit.errors import DimensionError, NotDiagonalizableError, PotencyError, SingularOperatorError
from ldrkit.operators import (
    TOL_EIG,
    TOL_POTENCY,
    OperatorPair,
    check_potency,
    dense,
    diagonal,
    eigendecompose,
    from_descriptor,
    make_pair,
    column_pair,
    unit_f_circulant,
)


def shift_oracle(n, f, transpose=False):
    Z = np.zeros((n, n))
    for i in range(1, n):
        Z[i, i - 1] = 1.0
    Z[0, n - 1] = f
    return Z.T if transpose else Z


@pytest.mark.parametrize("n", [1, 2, 5])
@pytest.mark.parametrize("f", [0.0, 1.0, -2.5])
@pytest.mark.parametrize("transpose", [False, True])
def test_unit_f_circulant_matches_definition(n, f, transpose):
    Z = unit_f_circulant(n, f, transpose)
    expected = shift_oracle(n, f, transpose) if n > 1 else np.array([[f]])
    np.testing.assert_array_equal(Z.dense, expected)
    X = np.random.default_rng(0).standard_normal((n, 3))
    np.testing.assert_allclose(Z.apply(X), expected @ X, atol=1e-14)
    np.testing.assert_allclose(Z.apply(X, transpose=True), expected.T @ X, atol=1e-14)


def test_operator_apply_right_and_matmul():
    rng = np.random.default_rng(1)
    for op in (unit_f_circulant(4, 2.0), diagonal(rng.standard_normal(4)), dense(rng.standard_normal((4, 4)))):
        X = rng.standard_normal((3, 4))
        np.testing.assert_allclose(op.apply_right(X), X @ op.dense, atol=1e-14)
        v = rng.standard_normal(4)
        np.testing.assert_allclose(op @ v, op.dense @ v, atol=1e-14)


def test_potency_z1():
    assert check_potency(unit_f_circulant(4, 1.0)) == (4, 1.0)


def test_potency_z0_is_none():
    assert check_potency(unit_f_circulant(4, 0.0)) is None
    assert check_potency(unit_f_circulant(1, 0.0)) is None


def test_potency_f2_against_dense_power():
    Z = unit_f_circulant(3, 2.0)
    assert check_potency(Z) == (3, 2.0)
    np.testing.assert_allclose(np.linalg.matrix_power(Z.dense, 3), 2.0 * np.eye(3))


def test_potency_dense_and_diagonal():
    # a rotation by 90 degrees squares to -I
    R = dense([[0.0, -1.0], [1.0, 0.0]])
    q, a = check_potency(R)
    assert (q, a) == (2, -1.0)
    assert check_potency(diagonal([3.0, 3.0, 3.0])) == (1, 3.0)
    assert check_potency(diagonal([1.0, 2.0])) is None
    assert check_potency(dense(np.zeros((3, 3)))) is None
    with pytest.raises(ValueError):
        check_potency(diagonal([1.0, 1.0]), q_max=3)


def test_potency_consistency_random_permutation():
    rng = np.random.default_rng(2)
    for _ in range(10):
        n = 6
        P = np.eye(n)[rng.permutation(n)] * 1.5
        op = dense(P)
        res = check_potency(op)
        assert res is not None
        q, a = res
        Pq = np.linalg.matrix_power(P, q)
        scale = np.abs(P).sum(axis=1).max()
        assert np.abs(Pq - a * np.eye(n)).max() / scale**q <= TOL_POTENCY


def test_eig_diagonal():
    d = np.array([3.0, -1.0, 2.0])
    ed = eigendecompose(diagonal(d))
    np.testing.assert_array_equal(ed.Q, np.eye(3))
    np.testing.assert_array_equal(ed.lam, d)


def test_eig_z1_fourth_roots():
    lam = eigendecompose(unit_f_circulant(4, 1.0)).lam
    expected = np.array([1, 1j, -1, -1j])
    for z in expected:
        assert np.abs(lam - z).min() < 1e-12
    np.testing.assert_allclose(np.sort_complex(lam**4), np.ones(4), atol=1e-12)


@pytest.mark.parametrize("f", [1.0, 2.0, -3.0, 0.5])
@pytest.mark.parametrize("transpose", [False, True])
@pytest.mark.parametrize("n", [1, 3, 8])
def test_eig_f_circulant_closed_form(f, transpose, n):
    Z = unit_f_circulant(n, f, transpose)
    ed = eigendecompose(Z)
    assert ed.residual(Z.dense) <= TOL_EIG * max(Z.norm_inf, 1.0) * 10
    np.testing.assert_allclose(ed.Q @ ed.Q_inv, np.eye(n), atol=1e-12)
    c = complex(f) ** (1.0 / n)
    np.testing.assert_allclose(np.abs(ed.lam), np.full(n, abs(c)), rtol=1e-12)


def test_eig_dense_symmetric():
    rng = np.random.default_rng(3)
    S = rng.standard_normal((4, 4))
    S = S + S.T
    op = dense(S)
    ed = eigendecompose(op)
    assert ed.residual(S) <= TOL_EIG * op.norm_inf


def test_eig_rejects_nilpotent():
    with pytest.raises(NotDiagonalizableError):
        eigendecompose(unit_f_circulant(4, 0.0))
    with pytest.raises(NotDiagonalizableError):
        eigendecompose(dense([[0.0, 1.0], [0.0, 0.0]]))


def test_pair_requires_potency():
    with pytest.raises(PotencyError):
        OperatorPair(unit_f_circulant(4, 0.0), unit_f_circulant(4, 1.0))


def test_pair_rejects_singular_T():
    # 1 - a * d^q vanishes for d = 1
    with pytest.raises(SingularOperatorError):
        OperatorPair(unit_f_circulant(4, 1.0), diagonal([1.0, 2.0, 3.0, 4.0]))


def test_pair_dimension_mismatch():
    with pytest.raises(DimensionError):
        OperatorPair(unit_f_circulant(4), diagonal([0.1, 0.2, 0.3]))


@pytest.mark.parametrize("name", ["column", "toeplitz", "lowrank"])
def test_pair_T_matches_inverse(name):
    pair = make_pair(name, 6)
    Bq = np.linalg.matrix_power(pair.B.dense, pair.q)
    np.testing.assert_allclose(pair.T, np.linalg.inv(np.eye(6) - pair.a * Bq), atol=1e-12)
    X = np.random.default_rng(4).standard_normal((6, 2))
    np.testing.assert_allclose(pair.apply_T(X), pair.T @ X, atol=1e-12)
    np.testing.assert_allclose(pair.apply_T(X, transpose=True), pair.T.T @ X, atol=1e-12)


def test_toeplitz_pair_T_is_identity():
    pair = make_pair("toeplitz", 5)
    assert pair.t_kind == "identity"
    np.testing.assert_array_equal(pair.T, np.eye(5))


def test_dense_B_pair():
    rng = np.random.default_rng(5)
    B = rng.standard_normal((4, 4)) * 0.2
    pair = OperatorPair(unit_f_circulant(4, 2.0), dense(B))
    expected = np.linalg.inv(np.eye(4) - 2.0 * np.linalg.matrix_power(B, 4))
    np.testing.assert_allclose(pair.T, expected, atol=1e-12)


def test_embeddable_flags():
    assert column_pair(6).embeddable
    # duplicate moduli in B
    pair = OperatorPair(unit_f_circulant(4), diagonal([0.1, -0.1, 0.2, -0.2]))
    assert not pair.embeddable
    assert any("moduli" in s for s in pair.embedding_issues())
    # Z_0^T as B is not diagonalizable
    assert not make_pair("toeplitz", 4).embeddable


def test_descriptor_round_trip():
    for op in (unit_f_circulant(3, -2.0, True), diagonal([0.25, 0.5]), dense(np.arange(4.0).reshape(2, 2))):
        back = from_descriptor(op.descriptor())
        np.testing.assert_array_equal(back.dense, op.dense)
        assert back.descriptor() == op.descriptor()


def test_descriptor_errors():
    with pytest.raises(ValueError):
        from_descriptor({"kind": "banded"})
    with pytest.raises(DimensionError):
        from_descriptor({"kind": "diagonal", "n": 3, "d": [1.0, 2.0]})
    with pytest.raises(ValueError):
        make_pair("nope", 4)
    with pytest.raises(DimensionError):
        make_pair(column_pair(3).descriptor(), 4)


def test_parameter_count():
    assert unit_f_circulant(8).parameter_count() == 1
    assert diagonal(np.ones(8)).parameter_count() == 8
    assert dense(np.eye(8)).parameter_count() == 64
