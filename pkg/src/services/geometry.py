"""Affine subspace geometry: orthonormalization, projection and distances."""

from typing import Iterable, List, Sequence

import numpy as np
from scipy.linalg import subspace_angles

from ..models.descriptors import AffineSubspace
from ..utils.exceptions import AllDegenerate
from ..utils.logging_config import get_logger
from ..utils.validators import as_matrix, as_vector, validate_dimension

logger = get_logger(__name__)

DEGENERACY_TOL = 1e-9
MEMBERSHIP_TOL = 1e-6


def orthonormalize(vectors: Iterable, tol: float = DEGENERACY_TOL) -> List[np.ndarray]:
    """
    Orthonormalize vectors with modified Gram-Schmidt and a second
    re-orthogonalization pass.

    Args:
        vectors: Nonempty sequence of equal-length vectors
        tol: Residual norm below which a vector counts as dependent

    Returns:
        Orthonormal vectors spanning the same space, in input order; dependent
        inputs are dropped

    Raises:
        AllDegenerate: If every vector is dropped
    """
    mat = as_matrix(list(vectors) if not isinstance(vectors, np.ndarray) else vectors)
    basis: List[np.ndarray] = []
    for row in mat:
        residual = row.copy()
        for _ in range(2):
            for q in basis:
                residual -= np.dot(q, residual) * q
        norm = np.linalg.norm(residual)
        if norm < tol:
            continue
        basis.append(residual / norm)
    if not basis:
        raise AllDegenerate(f"All {len(mat)} vectors are linearly dependent or zero")
    return basis


def affine_subspace(translation, directions) -> AffineSubspace:
    """Subspace through ``translation`` spanned by orthonormalized ``directions``."""
    origin = as_vector(translation)
    mat = as_matrix(directions)
    validate_dimension(origin.size, mat.shape[1], "direction")
    return AffineSubspace(translation=origin, basis=np.vstack(orthonormalize(mat)))


def subspace_through(points: Sequence) -> AffineSubspace:
    """The smallest affine subspace containing ``points`` (first one is the translation)."""
    mat = as_matrix(points)
    if mat.shape[0] < 2:
        raise AllDegenerate("A subspace through points needs at least two points")
    return affine_subspace(mat[0], mat[1:] - mat[0])


def project(subspace: AffineSubspace, point) -> np.ndarray:
    """
    Orthogonal projection of a point onto an affine subspace.

    Returns:
        d0 + sum_i <point - d0, d_i> d_i

    Raises:
        DimensionMismatch: If the point has the wrong dimension
    """
    x = as_vector(point)
    validate_dimension(subspace.n, x.size, "point")
    offset = x - subspace.translation
    return subspace.translation + subspace.basis.T @ (subspace.basis @ offset)


def project_many(subspace: AffineSubspace, points: np.ndarray) -> np.ndarray:
    """Row-wise projection of a point matrix."""
    mat = as_matrix(points)
    validate_dimension(subspace.n, mat.shape[1], "point")
    offsets = mat - subspace.translation
    return subspace.translation + (offsets @ subspace.basis.T) @ subspace.basis


def point_to_subspace_dist(subspace: AffineSubspace, point) -> float:
    """Euclidean distance from a point to its projection on the subspace."""
    x = as_vector(point)
    return float(np.linalg.norm(x - project(subspace, x)))


def distances_to_subspace(subspace: AffineSubspace, points: np.ndarray) -> np.ndarray:
    """Vectorized point-to-subspace distances for the rows of ``points``."""
    mat = as_matrix(points)
    validate_dimension(subspace.n, mat.shape[1], "point")
    offsets = mat - subspace.translation
    residual = offsets - (offsets @ subspace.basis.T) @ subspace.basis
    return np.linalg.norm(residual, axis=1)


def subspace_to_subspace_dist(a: AffineSubspace, b: AffineSubspace) -> float:
    """
    Minimal distance between two affine subspaces.

    Solves min over x, y of ||(a.d0 + A x) - (b.d0 + B y)|| as one joint
    least-squares problem; rank-deficient joint bases (shared directions) are
    handled by the minimum-norm solution.

    Raises:
        DimensionMismatch: If the ambient dimensions differ
    """
    validate_dimension(a.n, b.n, "subspace")
    system = np.hstack([a.basis.T, -b.basis.T])
    rhs = b.translation - a.translation
    coeffs, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    return float(np.linalg.norm(system @ coeffs - rhs))


def contains(subspace: AffineSubspace, point, tol: float = MEMBERSHIP_TOL) -> bool:
    """Membership test with an absolute L2 tolerance."""
    return point_to_subspace_dist(subspace, point) < tol


def intersects(a: AffineSubspace, b: AffineSubspace, tol: float = MEMBERSHIP_TOL) -> bool:
    return subspace_to_subspace_dist(a, b) < tol


def principal_angles(a: AffineSubspace, b: AffineSubspace) -> np.ndarray:
    """Principal angles (radians) between the linear parts of two subspaces."""
    validate_dimension(a.n, b.n, "subspace")
    return subspace_angles(a.basis.T, b.basis.T)
