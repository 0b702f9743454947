import numpy as np
import pytest

from objevents.linalg import (
    DEFAULT_TOL,
    DimensionLayout,
    LayoutError,
    PreconditionError,
    dagger,
    embed,
    embed_product,
    frobenius_distance,
    hermitian_eig,
    ket,
    partial_trace,
    product_expectation,
    projector,
    psd_sqrt,
    range_projector,
    tensor,
    trace,
    unitarity_residual,
)

SX = np.array([[0, 1], [1, 0]])


def test_tensor_identity_and_basis():
    assert np.allclose(tensor(np.eye(2), np.eye(2)), np.eye(4))
    assert np.allclose(tensor(ket(0, 2), ket(0, 2)).ravel(), [1, 0, 0, 0])


def test_tensor_diagonal_by_hand():
    assert np.allclose(tensor(np.diag([1, 2]), np.diag([3, 4])), np.diag([3, 4, 6, 8]))


def test_tensor_matches_numpy_kron(rng):
    a = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    b = rng.standard_normal((3, 2))
    assert np.allclose(tensor(a, b), np.kron(a, b))


def test_tensor_needs_operand():
    with pytest.raises(ValueError):
        tensor()


def test_partial_trace_product_state():
    rho = projector(tensor(ket(0, 2), ket(0, 2)))
    assert np.allclose(partial_trace(rho, [2, 2], [0]), projector(ket(0, 2)))


def test_partial_trace_factorized(rng):
    x = rng.standard_normal((2, 2))
    y = rng.standard_normal((3, 3))
    assert np.allclose(partial_trace(np.kron(x, y), [2, 3], [0]), x * np.trace(y))
    assert np.allclose(partial_trace(np.kron(x, y), [2, 3], [1]), y * np.trace(x))


def test_partial_trace_bell_state():
    phi = (tensor(ket(0, 2), ket(0, 2)) + tensor(ket(1, 2), ket(1, 2))) / np.sqrt(2)
    assert np.allclose(partial_trace(projector(phi), [2, 2], [1]), np.eye(2) / 2)


def test_partial_trace_keeps_ascending_order(rng):
    a, b, c = (rng.standard_normal((d, d)) for d in (2, 3, 2))
    full = tensor(a, b, c)
    assert np.allclose(partial_trace(full, [2, 3, 2], [2, 0]), np.kron(a, c) * np.trace(b))


def test_partial_trace_rejects_bad_layout():
    with pytest.raises(LayoutError):
        partial_trace(np.eye(4), [2, 3], [0])
    with pytest.raises(LayoutError):
        partial_trace(np.eye(4), [2, 2], [2])


def test_embed_places_operator_on_middle_factor(rng):
    layout = DimensionLayout((2, 3, 2))
    b = rng.standard_normal((3, 3))
    assert np.allclose(embed(b, layout, [1]), tensor(np.eye(2), b, np.eye(2)))


def test_embed_product_out_of_order(rng):
    layout = DimensionLayout((2, 3, 2))
    a, c = rng.standard_normal((2, 2)), rng.standard_normal((2, 2))
    got = embed_product(layout, [((2,), c), ((0,), a)])
    assert np.allclose(got, tensor(a, np.eye(3), c))


def test_embed_product_rejects_overlap():
    layout = DimensionLayout((2, 2))
    with pytest.raises(LayoutError):
        embed_product(layout, [((0,), np.eye(2)), ((0, 1), np.eye(4))])


def test_embed_product_does_not_alias_input():
    op = np.eye(4, dtype=complex)
    out = embed_product(DimensionLayout((2, 2)), [((0, 1), op)])
    out[0, 0] = 7
    assert op[0, 0] == 1


def test_product_expectation_matches_full_operator(rng):
    layout = DimensionLayout((2, 3, 2))
    g = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
    rho = g @ g.conj().T
    rho /= np.trace(rho)
    parts = [((2,), np.diag([0.3, 0.9])), ((1,), np.diag([1.0, 0.2, 0.5]))]
    full = np.real(np.trace(embed_product(layout, parts) @ rho))
    assert abs(product_expectation(layout, parts, rho) - full) < 1e-12
    assert abs(product_expectation(layout, [], rho) - 1) < 1e-12


def test_hermitian_eig_cases():
    assert np.allclose(hermitian_eig(np.eye(2))[0], [1, 1])
    assert np.allclose(hermitian_eig(np.diag([3, 1]))[0], [3, 1])
    vals, vecs = hermitian_eig(SX)
    assert np.allclose(vals, [1, -1])
    plus = np.array([1, 1]) / np.sqrt(2)
    minus = np.array([1, -1]) / np.sqrt(2)
    assert abs(abs(np.vdot(vecs[:, 0], plus)) - 1) < 1e-12
    assert abs(abs(np.vdot(vecs[:, 1], minus)) - 1) < 1e-12


def test_hermitian_eig_rejects_non_hermitian():
    with pytest.raises(PreconditionError):
        hermitian_eig(np.array([[0, 1], [0, 0]]))


def test_trace_dagger_distance(rng):
    m = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    assert trace(np.eye(3)) == 3
    assert np.array_equal(dagger(dagger(m)), m)
    assert frobenius_distance(m, m) == 0


def test_psd_sqrt_squares_back(rng):
    g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    a = g @ g.conj().T
    r = psd_sqrt(a)
    assert np.allclose(r @ r, a)


def test_range_projector_of_rank_one():
    p = range_projector(np.diag([0.7, 0.0]), DEFAULT_TOL.rank)
    assert np.allclose(p, np.diag([1, 0]))


def test_unitarity_residual_of_scaled_row():
    u = np.eye(4)
    u[0] *= 1.1
    assert abs(unitarity_residual(u) - 0.21) < 1e-12
