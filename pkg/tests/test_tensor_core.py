import numpy as np
import pytest
import scipy.linalg

from lib.error_handling import ShapeError, UsageError
from lib.tensor_core import (Tensor, contract, eig_hermitian, expm, expm_skew_batch, is_hermitian,
                             pseudoinverse, tensor_from_json, tensor_to_json)


def random_hermitian(rng, d):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (a + a.conj().T) / 2


def test_tensor_is_read_only():
    t = Tensor(np.eye(2))
    assert t.data.dtype == np.complex128
    with pytest.raises(ValueError):
        t.data[0, 0] = 5


def test_tensor_rejects_non_finite():
    with pytest.raises(ValueError):
        Tensor(np.array([1.0, np.nan]))


def test_contract_identity_composition():
    out = contract(np.eye(3), np.eye(3), [(1, 0)])
    np.testing.assert_array_equal(out.data, np.eye(3))


def test_contract_full_trace():
    out = contract(np.eye(3), np.eye(3), [(1, 0), (0, 1)])
    assert out.shape == ()
    assert out.data == 3


def test_contract_matches_naive_loops(rng):
    a = rng.standard_normal((2, 2, 2)) + 1j * rng.standard_normal((2, 2, 2))
    b = rng.standard_normal((2, 2, 2)) + 1j * rng.standard_normal((2, 2, 2))
    out = contract(a, b, [(2, 0), (0, 1)]).data
    expected = np.zeros((2, 2), dtype=np.complex128)
    for i in range(2):
        for j in range(2):
            for p in range(2):
                for q in range(2):
                    expected[i, j] += a[q, i, p] * b[p, q, j]
    np.testing.assert_allclose(out, expected, atol=1e-14)


def test_contract_is_bilinear(rng):
    a, b, c = (rng.standard_normal((3, 4)) for _ in range(3))
    alpha = 0.7 - 1.3j
    lhs = contract(alpha * a + b, c, [(1, 1)]).data
    rhs = alpha * contract(a, c, [(1, 1)]).data + contract(b, c, [(1, 1)]).data
    np.testing.assert_allclose(lhs, rhs, atol=1e-13)


def test_contract_shape_mismatch_names_axes():
    with pytest.raises(ShapeError, match="axis 1 of a has extent 3 but axis 0 of b has extent 4"):
        contract(np.ones((2, 3)), np.ones((4, 2)), [(1, 0)])


def test_contract_rejects_repeated_axis():
    with pytest.raises(ShapeError):
        contract(np.ones((2, 2)), np.ones((2, 2)), [(0, 0), (0, 1)])


def test_eig_hermitian_sorted():
    eig = eig_hermitian(np.diag([2.0, 1.0]))
    np.testing.assert_allclose(eig.eigenvalues, [1.0, 2.0])


def test_eig_hermitian_zero():
    np.testing.assert_array_equal(eig_hermitian(np.zeros((4, 4))).eigenvalues, np.zeros(4))


def test_eig_hermitian_reconstructs(rng):
    m = random_hermitian(rng, 8)
    eig = eig_hermitian(m)
    assert np.linalg.norm(eig.reconstruct() - m) <= 1e-12 * np.linalg.norm(m)
    np.testing.assert_allclose(eig.eigenvectors.conj().T @ eig.eigenvectors, np.eye(8), atol=1e-12)


def test_eig_hermitian_matches_characteristic_roots():
    m = np.array([[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]])
    expected = np.sort([2 - np.sqrt(2), 2.0, 2 + np.sqrt(2)])
    np.testing.assert_allclose(eig_hermitian(m).eigenvalues, expected, atol=1e-10)


def test_eig_hermitian_non_square():
    with pytest.raises(ShapeError):
        eig_hermitian(np.ones((2, 3)))


@pytest.mark.parametrize("m, expected", [
    (np.diag([7.0, 0.0]), np.diag([1 / 7, 0.0])),
    (np.diag([2.0]), np.diag([0.5])),
])
def test_pseudoinverse_diagonal(m, expected):
    np.testing.assert_allclose(pseudoinverse(m).data, expected, atol=1e-15)


def test_pseudoinverse_rank_one():
    v = np.array([1.0, 1.0, 1.0, 1.0])
    assert np.isclose(np.linalg.norm(v), 2)
    p = np.outer(v, v)
    np.testing.assert_allclose(pseudoinverse(p).data, p / 16, atol=1e-14)


def test_pseudoinverse_moore_penrose_identities(rng):
    u = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
    m = u @ u.conj().T
    p = pseudoinverse(m).data
    scale = np.linalg.norm(m)
    assert np.linalg.norm(m @ p @ m - m) <= 1e-9 * scale
    assert np.linalg.norm(p @ m @ p - p) <= 1e-9 * np.linalg.norm(p)
    assert is_hermitian(m @ p, 1e-9)
    assert is_hermitian(p @ m, 1e-9)
    np.testing.assert_allclose(pseudoinverse(p).data, m, rtol=0, atol=1e-9 * scale)


@pytest.mark.parametrize("rel_cutoff", [0.0, 1.0, 2.0, -1e-8])
def test_pseudoinverse_rejects_cutoff_outside_unit_interval(rel_cutoff):
    with pytest.raises(UsageError):
        pseudoinverse(np.eye(2), rel_cutoff)


def test_expm_zero_is_exact_identity():
    np.testing.assert_array_equal(expm(np.zeros((3, 3))).data, np.eye(3))


def test_expm_diagonal():
    np.testing.assert_allclose(expm(np.diag([0.3, -1.2])).data, np.diag(np.exp([0.3, -1.2])), atol=1e-14)


def test_expm_rotation():
    theta = np.pi / 3
    out = expm(theta * np.array([[0.0, -1.0], [1.0, 0.0]])).data
    expected = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    np.testing.assert_allclose(out, expected, atol=1e-14)


def test_expm_group_property(rng):
    a = rng.standard_normal((4, 4))
    skew = a - a.T
    skew *= 10 / np.linalg.norm(skew, 2)
    np.testing.assert_allclose(expm(skew).data @ expm(-skew).data, np.eye(4), atol=1e-10)
    a /= np.linalg.norm(a, 2)
    np.testing.assert_allclose(expm(a).data @ expm(-a).data, np.eye(4), atol=1e-10)


def test_expm_skew_batch_matches_scipy(rng):
    a = rng.standard_normal((5, 3, 3)) + 1j * rng.standard_normal((5, 3, 3))
    skew = (a - np.swapaxes(a.conj(), -1, -2)) / 2
    batch = expm_skew_batch(skew)
    for k in range(5):
        np.testing.assert_allclose(batch[k], scipy.linalg.expm(skew[k]), atol=1e-12)


def test_tensor_json_drops_small_entries():
    t = np.zeros((2, 2), dtype=np.complex128)
    t[0, 1] = 0.25 - 1j
    t[1, 0] = 1e-16
    document = tensor_to_json(t)
    assert document == {"shape": [2, 2], "entries": [{"idx": [0, 1], "re": 0.25, "im": -1.0}]}
    np.testing.assert_array_equal(tensor_from_json(document).data[0, 1], 0.25 - 1j)


def test_tensor_json_bad_index():
    with pytest.raises(ShapeError):
        tensor_from_json({"shape": [2, 2], "entries": [{"idx": [0], "re": 1.0, "im": 0.0}]})
