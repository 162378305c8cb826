"""Least-squares recovery of the subspace from noisy quadrics via fixed-rank SVD approximations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cumulants import PolynomialSystem
from .polyspace import (
    coefficient_matrix,
    dim_from_columns,
    divisible_columns,
    grams_to_matrix,
    quadratic_to_gram,
    triangular,
)
from .subspace import (
    RadicalError,
    SubspaceEstimate,
    fix_row_signs,
    orthonormal_complement,
)
from .exact import InsufficientQuadricsError


@dataclass(frozen=True)
class RankSpec:
    """Prescribed ranks of the two SVD truncations for ``n_quadrics`` quadrics."""

    left_null_rank: int
    row_span_rank: int

    @classmethod
    def for_problem(cls, n_quadrics: int, D: int, d: int) -> "RankSpec":
        return cls(
            n_quadrics - triangular(D) + triangular(d) + D - d,
            D - d,
        )


def rank_k_left_null(A, k: int) -> np.ndarray:
    """Orthonormal rows spanning the left singular directions of the ``k`` smallest singular values.

    Rows of ``A`` beyond its column count contribute zero singular values and
    count as the smallest ones.
    """
    A = np.asarray(A, dtype=float)
    if not 1 <= k <= A.shape[0]:
        raise ValueError(f"left null rank {k} out of range for {A.shape[0]} rows")
    if not np.all(np.isfinite(A)):
        raise np.linalg.LinAlgError("non-finite entries in SVD input")
    u, _, _ = np.linalg.svd(A, full_matrices=True)
    return fix_row_signs(u[:, A.shape[0] - k :].T)


def rank_k_row_span(A, k: int) -> np.ndarray:
    """Top-``k`` right singular vectors of ``A`` as orthonormal rows."""
    A = np.asarray(A, dtype=float)
    if not 1 <= k <= min(A.shape):
        raise ValueError(f"row span rank {k} out of range for shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise np.linalg.LinAlgError("non-finite entries in SVD input")
    _, _, vt = np.linalg.svd(A, full_matrices=False)
    return fix_row_signs(vt[:k])


def _per_variable_block(Q: np.ndarray, dim: int, i: int, ranks: RankSpec) -> np.ndarray:
    div = divisible_columns(dim, i)
    keep = np.ones(Q.shape[1], dtype=bool)
    keep[div] = False
    A = Q[:, keep]
    top = A.shape[0] - ranks.left_null_rank
    if 0 <= top <= min(A.shape):
        # L^T L = I - U_top U_top^T, so L @ Q and the projected Q share their
        # right singular vectors; this avoids forming the full left basis
        if not np.all(np.isfinite(A)):
            raise np.linalg.LinAlgError("non-finite entries in SVD input")
        u = np.linalg.svd(A, full_matrices=False)[0][:, :top]
        projected = Q - u @ (u.T @ Q)
    else:
        projected = rank_k_left_null(A, ranks.left_null_rank) @ Q
    span = rank_k_row_span(projected, ranks.row_span_rank)
    # columns T_i T_j -> coefficient j of the cofactor linear form
    return span[:, div]


def approx_generators(quadrics, d: int) -> SubspaceEstimate:
    """Estimate the ``D - d`` linear generators from (possibly noisy) quadrics.

    For every variable ``T_i``: take the approximate left null space of the
    columns not divisible by ``T_i``, push it through the full coefficient
    matrix to get quadrics approximately of the form ``T_i * l``, keep their
    rank ``D - d`` row span and read off the cofactors ``l``. The ``D``
    blocks are stacked and their rank ``D - d`` row span is the estimate.
    """
    Q = coefficient_matrix(quadrics)
    dim = dim_from_columns(Q.shape[1])
    if not 0 < d < dim:
        raise ValueError(f"subspace dimension must satisfy 0 < d < D, got d={d}, D={dim}")
    needed = triangular(dim) - triangular(d)
    if Q.shape[0] < needed:
        raise InsufficientQuadricsError(
            f"{Q.shape[0]} quadrics given, approximate recovery needs at least {needed}"
        )
    ranks = RankSpec.for_problem(Q.shape[0], dim, d)
    blocks = [_per_variable_block(Q, dim, i, ranks) for i in range(dim)]
    gens = rank_k_row_span(np.vstack(blocks), dim - d)
    return SubspaceEstimate.from_generators(gens, dim, normalize=False)


def estimate(system: PolynomialSystem, d: int, linear_tol: float = 1e-6, strict: bool = False) -> SubspaceEstimate:
    """Approximate recovery from a full system: linear forms first, then quadrics on the remainder.

    The linear block contributes its rank-``r`` row span, ``r`` being the
    number of singular values above ``linear_tol`` times the largest, capped
    at ``D - d`` (``strict=True`` raises instead of capping). Quadrics are
    restricted to the orthogonal complement of that span and passed to
    :func:`approx_generators`.
    """
    dim = system.dim
    if not 0 < d < dim:
        raise ValueError(f"subspace dimension must satisfy 0 < d < D, got d={d}, D={dim}")
    F = system.linear_matrix()
    r = 0
    if F.shape[0]:
        sv = np.linalg.svd(F, compute_uv=False)
        r = int(np.sum(sv > linear_tol * sv[0])) if sv[0] > 0 else 0
    if r > dim - d:
        if strict:
            raise RadicalError(
                f"linear forms have rank {r} > D - d = {dim - d}; "
                f"no {d}-dimensional subspace satisfies them"
            )
        r = dim - d
    if r == 0:
        return approx_generators(system.quadric_matrix(), d)
    lin = rank_k_row_span(F, r)
    if r == dim - d:
        return SubspaceEstimate.from_generators(lin, dim, normalize=False)
    N = orthonormal_complement(lin, dim)
    grams = np.stack([quadratic_to_gram(q) for q in system.quadrics])
    reduced = grams_to_matrix(N.T @ grams @ N)
    inner = approx_generators(reduced, d)
    lifted = inner.generator_matrix() @ N.T
    return SubspaceEstimate.from_generators(np.vstack([lin, lifted]), dim, normalize=False)
