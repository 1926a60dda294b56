import numpy as np
import pytest

from h2vec import kernels


def test_identity_columns_triangularize_to_identity():
    a = np.eye(3)[:, :2]
    stack, r = kernels.triangularize(a)
    assert np.allclose(r, np.eye(2), atol=1e-15)
    x = np.array([0.3, -0.7, 2.0])
    assert np.allclose(stack.apply_adjoint(x), x, atol=1e-15)


def test_column_norm_single_column():
    stack, r = kernels.triangularize(np.array([[3.0], [4.0]]))
    assert abs(r[0, 0] - 5.0) < 1e-14


def test_reconstruction_oracle(rng):
    a = rng.standard_normal((6, 3))
    stack, r = kernels.triangularize(a)
    rebuilt = stack.thin_q() @ r
    assert np.max(np.abs(rebuilt - a)) <= 1e-13
    assert np.min(np.diagonal(r)) >= 0.0


@pytest.mark.parametrize("seed", range(20))
def test_reconstruction_many_shapes(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 30))
    n = int(rng.integers(1, m + 1))
    a = rng.standard_normal((m, n)) * 10.0 ** rng.integers(-3, 4)
    stack, r = kernels.triangularize(a)
    scale = max(1.0, np.max(np.abs(a)))
    assert np.max(np.abs(stack.thin_q() @ r - a)) <= 1e-12 * scale
    assert np.min(np.diagonal(r)) >= 0.0


def test_isometric_input_reproduces_itself(rng):
    q = np.linalg.qr(rng.standard_normal((9, 4)))[0]
    stack, r = kernels.triangularize(q)
    assert np.max(np.abs(r - np.eye(4))) <= 1e-12
    assert np.max(np.abs(stack.thin_q() - q)) <= 1e-12


def test_apply_adjoint_range_membership(rng):
    q = np.linalg.qr(rng.standard_normal((10, 3)))[0]
    stack, _ = kernels.triangularize(q)
    y = rng.standard_normal(3)
    out = stack.apply_adjoint(q @ y)
    assert np.max(np.abs(out[3:])) <= 1e-13


def test_apply_adjoint_preserves_norm(rng):
    a = rng.standard_normal((12, 5))
    stack, _ = kernels.triangularize(a)
    x = rng.standard_normal(12)
    assert abs(np.linalg.norm(stack.apply_adjoint(x)) - np.linalg.norm(x)) <= (
        1e-13 * np.linalg.norm(x)
    )


def test_apply_inverts_apply_adjoint(rng):
    a = rng.standard_normal((8, 4))
    stack, _ = kernels.triangularize(a)
    x = rng.standard_normal(8)
    assert np.max(np.abs(stack.apply(stack.apply_adjoint(x)) - x)) <= 1e-13


def test_triangularize_rejects_bad_input():
    with pytest.raises(ValueError):
        kernels.triangularize(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        kernels.triangularize(np.array([[np.nan], [1.0]]))


def test_complement_identity_small():
    comp = kernels.extend_to_orthonormal(np.eye(2)[:, :1])
    p = comp.materialize()
    assert np.allclose(np.abs(p[:, 0]), [0.0, 1.0], atol=1e-15)


def test_complement_2d():
    s = 1.0 / np.sqrt(2.0)
    comp = kernels.extend_to_orthonormal(np.array([[s], [s]]))
    p = comp.materialize().ravel()
    assert np.allclose(np.abs(p), [s, s], atol=1e-14)
    assert abs(p[0] + p[1]) <= 1e-14  # orthogonal to the input column


def test_complement_dense_identities(rng):
    q = np.linalg.qr(rng.standard_normal((8, 3)))[0]
    comp = kernels.extend_to_orthonormal(q)
    p = comp.materialize()
    assert np.max(np.abs(p.T @ p - np.eye(5))) <= 1e-12
    assert np.max(np.abs(p.T @ q)) <= 1e-12
    assert np.max(np.abs(q @ q.T + p @ p.T - np.eye(8))) <= 1e-12


def test_complement_requires_isometry(rng):
    with pytest.raises(ValueError):
        kernels.extend_to_orthonormal(rng.standard_normal((6, 2)))


def test_matvec_identity():
    x = np.array([1.0, -2.0])
    assert np.allclose(kernels.matvec(np.eye(2), x), x)


def test_counter_exact_for_matvec_and_matmul(rng):
    a = rng.standard_normal((4, 7))
    x = rng.standard_normal(7)
    b = rng.standard_normal((7, 5))
    with kernels.count_flops() as counter:
        kernels.matvec(a, x)
    assert counter.total == 4 * 7
    with kernels.count_flops() as counter:
        kernels.matmul(a, b)
    assert counter.total == 4 * 7 * 5
    with kernels.count_flops() as counter:
        kernels.axpy(2.0, x, x)
    assert counter.total == 7


def test_counter_phases_and_reset():
    with kernels.count_flops() as counter:
        with kernels.phase("one"):
            kernels.vdot(np.ones(3), np.ones(3))
        with kernels.phase("two"):
            kernels.vdot(np.ones(5), np.ones(5))
    assert counter.phases == {"one": 3, "two": 5}
    counter.reset()
    assert counter.total == 0 and counter.phases == {}


def test_shape_mismatch_errors():
    with pytest.raises(ValueError):
        kernels.matvec(np.zeros((2, 3)), np.zeros(2))
    with pytest.raises(ValueError):
        kernels.matmul(np.zeros((2, 3)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        kernels.axpy(1.0, np.zeros(2), np.zeros(3))


def test_triple_product_associativity(rng):
    a = rng.standard_normal((4, 5))
    b = rng.standard_normal((5, 6))
    c = rng.standard_normal((6, 3))
    left = kernels.matmul(kernels.matmul(a, b), c)
    right = kernels.matmul(a, kernels.matmul(b, c))
    assert np.max(np.abs(left - right)) <= 1e-12 * max(1.0, np.max(np.abs(left)))


def test_triangular_factor_shapes(rng):
    wide = rng.standard_normal((2, 5))
    r = kernels.triangular_factor(wide)
    assert r.shape == (2, 5)
    assert np.max(np.abs(r.T @ r - wide.T @ wide)) <= 1e-12
    empty = kernels.triangular_factor(np.zeros((0, 4)))
    assert empty.shape == (0, 4)
