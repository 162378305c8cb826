"""Exact recovery of the linear generators of a subspace from quadrics vanishing on it.

For each of ``D - d`` cyclic relabellings of the variables, the coefficient
matrix is brought to row echelon form under the relabelled lexicographic
order; its last nonzero row is ``T_last * l`` with ``l`` a linear form
vanishing on the subspace. The ``D - d`` forms obtained this way are
linearly independent and cut out the subspace.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cumulants import PolynomialSystem
from .polyspace import (
    LinearForm,
    MonomialOrdering,
    QuadraticForm,
    coefficient_matrix,
    column_positions,
    dim_from_columns,
    divide_by_var,
    grams_to_matrix,
    quadratic_to_gram,
    triangular,
)
from .subspace import RadicalError, SubspaceEstimate, normalize_generator


class InsufficientQuadricsError(RadicalError):
    pass


class RankMismatchError(RadicalError):
    pass


class DivisibilityError(RadicalError):
    pass


ROW_TOL = 1e-10
RANK_TOL = 1e-9
DIV_TOL = 1e-2


def row_echelon(A: np.ndarray, tol: float = ROW_TOL) -> tuple[np.ndarray, int]:
    """Row echelon form by Gaussian elimination with partial pivoting.

    Columns whose best pivot is below ``tol`` times the largest row norm of
    ``A`` are treated as zero and skipped. Returns the reduced matrix and the
    number of pivots.
    """
    R = np.array(A, dtype=float, copy=True)
    nrows, ncols = R.shape
    scale = np.linalg.norm(R, axis=1).max(initial=0.0)
    if scale == 0.0:
        return R, 0
    cutoff = tol * scale
    prow = 0
    for c in range(ncols):
        if prow == nrows:
            break
        p = prow + int(np.argmax(np.abs(R[prow:, c])))
        if abs(R[p, c]) <= cutoff:
            R[prow:, c] = 0.0
            continue
        if p != prow:
            R[[prow, p]] = R[[p, prow]]
        below = R[prow + 1 :, c] / R[prow, c]
        R[prow + 1 :, c:] -= np.outer(below, R[prow, c:])
        R[prow + 1 :, c] = 0.0
        prow += 1
    return R, prow


def check_rank(Q: np.ndarray, rank: int, tol: float = RANK_TOL) -> np.ndarray:
    """Raise unless ``Q`` has numerical rank ``rank``; returns the singular values."""
    sv = np.linalg.svd(Q, compute_uv=False)
    if sv.size < rank or sv[0] == 0.0 or sv[rank - 1] <= tol * sv[0]:
        raise RankMismatchError(
            f"coefficient matrix has rank below the expected {rank}; "
            "quadrics are not generic enough"
        )
    if sv.size > rank and sv[rank] > tol * sv[0]:
        raise RankMismatchError(
            f"coefficient matrix has rank above the expected {rank} "
            f"(sigma_{rank + 1}/sigma_1 = {sv[rank] / sv[0]:.2e}); "
            "the quadrics look noisy, use the approximate estimator"
        )
    return sv


def last_row_generator(Q: np.ndarray, ordering: MonomialOrdering, tol: float = ROW_TOL):
    """Echelonize ``Q`` under ``ordering`` and divide its last nonzero row by the smallest variable.

    Returns ``(linear form, division residual, last row in canonical order)``.
    """
    dim = ordering.dim
    pos = column_positions(ordering)
    R, _ = row_echelon(Q[:, pos], tol)
    norms = np.linalg.norm(R, axis=1)
    nonzero = np.flatnonzero(norms > tol * np.linalg.norm(Q, axis=1).max())
    if nonzero.size == 0:
        raise RankMismatchError("coefficient matrix is numerically zero")
    row = np.zeros(triangular(dim))
    row[pos] = R[nonzero[-1]]
    lin, residual = divide_by_var(QuadraticForm(dim, row), ordering.perm[-1])
    return lin, residual, row


def refine_subspace(Q: np.ndarray, basis: np.ndarray, max_iter: int = 5) -> np.ndarray:
    """Gauss-Newton polish of ``basis`` towards ``B^T G_i B = 0`` for every quadric Gram ``G_i``.

    The exact subspace is a zero-residual fixed point, so on exact input this
    only removes floating point error picked up during elimination.
    """
    dim = dim_from_columns(Q.shape[1])
    grams = np.stack([quadratic_to_gram(QuadraticForm(dim, row)) for row in Q])
    B, _ = np.linalg.qr(basis)
    d = B.shape[1]
    nk = dim - d
    iu = np.triu_indices(d)
    for _ in range(max_iter):
        N = np.linalg.svd(B.T)[2][d:].T
        A = np.einsum("ka,ikl,lb->iba", N, grams, B)  # (n, d, D-d)
        R = np.einsum("ka,ikl,lb->iab", B, grams, B)
        # d(B^T G B)[a, b] / dX[k, c] = [a == c] A[b, k] + [b == c] A[a, k]
        J = np.zeros((len(grams), d, d, nk, d))
        for c in range(d):
            J[:, c, :, :, c] += A
            J[:, :, c, :, c] += A
        J = J[:, iu[0], iu[1]].reshape(-1, nk * d)
        step = np.linalg.lstsq(J, -R[:, iu[0], iu[1]].reshape(-1), rcond=None)[0]
        B, _ = np.linalg.qr(B + N @ step.reshape(nk, d))
        if np.linalg.norm(step) < 1e-14:
            break
    return B


def exact_generators(
    quadrics,
    d: int,
    div_tol: float = DIV_TOL,
    rank_tol: float = RANK_TOL,
    refine: bool = True,
) -> SubspaceEstimate:
    """Linear generators of the ``d``-dimensional subspace on which exact quadrics vanish.

    ``quadrics`` is a sequence of :class:`QuadraticForm` or a coefficient
    matrix with one row per quadric; at least ``Δ(D) - Δ(d)`` are required.
    With ``refine`` the eliminated generators are polished by
    :func:`refine_subspace` and then projected onto the polished span, so each
    output generator still corresponds to one relabelling.
    """
    Q = coefficient_matrix(quadrics)
    dim = dim_from_columns(Q.shape[1])
    if not 0 < d < dim:
        raise ValueError(f"subspace dimension must satisfy 0 < d < D, got d={d}, D={dim}")
    needed = triangular(dim) - triangular(d)
    if Q.shape[0] < needed:
        raise InsufficientQuadricsError(
            f"{Q.shape[0]} quadrics given, exact recovery needs at least {needed}"
        )
    check_rank(Q, needed, rank_tol)
    gens = []
    for k in range(1, dim - d + 1):
        ordering = MonomialOrdering.cyclic(dim, k)
        lin, residual, _ = last_row_generator(Q, ordering)
        if residual > div_tol:
            raise DivisibilityError(
                f"last echelon row under relabelling {k} is not divisible by "
                f"T_{ordering.perm[-1]} (residual {residual:.2e}); "
                "input is not exact or not generic, use the approximate estimator"
            )
        gens.append(normalize_generator(lin.coeffs))
    gens = np.vstack(gens)
    if refine:
        basis = refine_subspace(Q, SubspaceEstimate.from_generators(gens, dim, normalize=False).basis)
        gens = gens - (gens @ basis) @ basis.T
        gens = np.vstack([normalize_generator(g) for g in gens])
    return SubspaceEstimate.from_generators(gens, dim, normalize=False)


@dataclass(frozen=True, eq=False)
class EliminationRecord:
    """Result of solving the linear constraints for some of the variables.

    Points of the constraint space are ``x = substitution @ y`` with ``y``
    the kept variables; ``constraints`` holds the reduced-row-echelon linear
    forms that were eliminated.
    """

    kept_vars: tuple[int, ...]
    eliminated_vars: tuple[int, ...]
    substitution: np.ndarray
    constraints: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.eliminated_vars)

    def lift(self, lin: LinearForm) -> LinearForm:
        """Reduced-space linear form as a form on ``R^D`` (zero on eliminated variables)."""
        full = np.zeros(self.substitution.shape[0])
        full[list(self.kept_vars)] = lin.coeffs
        return LinearForm(full)


def eliminate_linears(system: PolynomialSystem, tol: float = 1e-10):
    """Substitute away the variables fixed by the system's linear forms.

    Returns ``(reduced quadrics, record)``; the reduced quadrics live in the
    ``D - r`` kept variables, ``r`` being the numerical rank of the linear block.
    """
    dim = system.dim
    F = system.linear_matrix()
    if F.shape[0] == 0:
        record = EliminationRecord(tuple(range(dim)), (), np.eye(dim), np.zeros((0, dim)))
        return list(system.quadrics), record
    sv = np.linalg.svd(F, compute_uv=False)
    r = int(np.sum(sv > tol * sv[0])) if sv[0] > 0 else 0
    R = np.array(F, dtype=float, copy=True)
    pivots = []
    for step in range(r):
        sub = np.abs(R[step:, :])
        sub[:, pivots] = 0.0
        i, c = np.unravel_index(np.argmax(sub), sub.shape)
        i += step
        R[[step, i]] = R[[i, step]]
        R[step] /= R[step, c]
        others = np.arange(R.shape[0]) != step
        R[others] -= np.outer(R[others, c], R[step])
        pivots.append(int(c))
    R = R[:r]
    kept = [j for j in range(dim) if j not in pivots]
    E = np.zeros((dim, dim - r))
    E[kept, np.arange(dim - r)] = 1.0
    E[pivots, :] = -R[:, kept]
    grams = np.stack([quadratic_to_gram(q) for q in system.quadrics])
    reduced = grams_to_matrix(E.T @ grams @ E)
    reduced_forms = [QuadraticForm(dim - r, row) for row in reduced]
    record = EliminationRecord(tuple(kept), tuple(pivots), E, R)
    return reduced_forms, record


def solve_exact(system: PolynomialSystem, d: int, **kwargs) -> SubspaceEstimate:
    """Exact recovery from a full polynomial system: eliminate linear forms, then recover from quadrics."""
    dim = system.dim
    reduced, record = eliminate_linears(system)
    r = record.rank
    if r > dim - d:
        raise RadicalError(
            f"{r} independent linear forms leave less than a {d}-dimensional solution space"
        )
    gens = [g for g in record.constraints]
    if r < dim - d:
        est = exact_generators(reduced, d, **kwargs)
        gens += [record.lift(g).coeffs for g in est.generators]
    return SubspaceEstimate.from_generators(np.vstack(gens), dim)


def complexity_estimate(D: int, d: int) -> int:
    """Operation count ``(Δ(D) - Δ(d))^2 Δ(D)`` of the elimination."""
    if not 0 < d < D:
        raise ValueError(f"need 0 < d < D, got d={d}, D={D}")
    return (triangular(D) - triangular(d)) ** 2 * triangular(D)
