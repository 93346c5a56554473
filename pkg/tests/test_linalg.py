import math

import numpy as np
import pytest

from grpdconn.errors import DegenerateBasis
from grpdconn.linalg import (
    intersect_columns,
    min_principal_angle,
    nullspace,
    subspace_residual,
)


def test_member_has_zero_residual():
    basis = [np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 1.0])]
    v = 2.0 * basis[0] - 3.0 * basis[1]
    assert subspace_residual(v, basis) < 1e-12


def test_orthogonal_unit_vector_has_residual_one():
    basis = [np.array([1.0, 0.0, 0.0])]
    v = np.array([0.0, 1.0, 0.0])
    assert abs(subspace_residual(v, basis) - 1.0) < 1e-12


def test_hand_projection_oracle():
    # v = (2,0,2,2) against span{e1, e2, (0,0,1,4)}: distance 6/sqrt(17),
    # normalized by ||v|| = sqrt(12)
    v = np.array([2.0, 0.0, 2.0, 2.0])
    basis = [np.array([1.0, 0, 0, 0]), np.array([0.0, 1, 0, 0]), np.array([0.0, 0, 1, 4])]
    expected = (6.0 / math.sqrt(17.0)) / math.sqrt(12.0)
    assert abs(subspace_residual(v, basis) - expected) < 1e-12


def test_degenerate_basis_raises():
    with pytest.raises(DegenerateBasis):
        subspace_residual(np.array([1.0, 0.0]),
                          [np.array([1.0, 1.0]), np.array([2.0, 2.0])])


def test_random_subspace_membership_iff_zero():
    rng = np.random.default_rng(5)
    for _ in range(50):
        dim = int(rng.integers(2, 6))
        k = int(rng.integers(1, dim))
        B = rng.normal(size=(dim, k))
        basis = [B[:, j] for j in range(k)]
        inside = B @ rng.normal(size=k)
        assert subspace_residual(inside, basis) < 1e-10
        # a vector with a component orthogonal to the span
        q, _ = np.linalg.qr(np.hstack([B, rng.normal(size=(dim, dim - k))]))
        outside = inside + q[:, -1]
        assert subspace_residual(outside, basis) > 1e-6


def test_nullspace_and_intersection():
    A = np.array([[1.0, 0.0, -1.0]])
    N = nullspace(A)
    assert N.shape[1] == 2
    assert np.max(np.abs(A @ N)) < 1e-12
    X = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    Y = np.array([[1.0], [0.0], [0.0]])
    inter = intersect_columns(X, Y)
    assert inter.shape[1] == 1
    assert abs(abs(inter[0, 0]) - 1.0) < 1e-12


def test_min_principal_angle():
    X = np.array([[1.0], [0.0]])
    Y = np.array([[1.0], [1.0]])
    assert abs(min_principal_angle(X, Y) - math.pi / 4) < 1e-12
