"""Recovered subspaces and small linear-algebra helpers shared by the estimators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polyspace import LinearForm


class RadicalError(ValueError):
    """The input quadrics do not support the requested recovery."""


def fix_row_signs(rows: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude entry is positive."""
    rows = np.array(rows, dtype=float, copy=True)
    if rows.size == 0:
        return rows
    idx = np.argmax(np.abs(rows), axis=1)
    signs = np.sign(rows[np.arange(rows.shape[0]), idx])
    signs[signs == 0] = 1.0
    return rows * signs[:, None]


def normalize_generator(coeffs: np.ndarray) -> np.ndarray:
    """Unit norm, first nonzero coefficient positive."""
    c = np.asarray(coeffs, dtype=float)
    c = c / np.linalg.norm(c)
    nz = np.flatnonzero(np.abs(c) > 1e-14)
    if nz.size and c[nz[0]] < 0:
        c = -c
    return c


def orthonormal_complement(rows: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal basis (as columns) of the null space of ``rows`` assumed to have full row rank."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    k = rows.shape[0] if rows.size else 0
    if k == 0:
        return np.eye(dim)
    _, _, vt = np.linalg.svd(rows, full_matrices=True)
    return vt[k:].T.copy()


def orthonormal_columns(B: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(np.asarray(B, dtype=float))
    return q


@dataclass(frozen=True, eq=False)
class SubspaceEstimate:
    """A ``d``-dimensional subspace of ``R^D`` with its vanishing linear forms."""

    basis: np.ndarray
    generators: tuple[LinearForm, ...]

    @property
    def dim_ambient(self) -> int:
        return self.basis.shape[0]

    @property
    def dim_subspace(self) -> int:
        return self.basis.shape[1]

    def generator_matrix(self) -> np.ndarray:
        if not self.generators:
            return np.zeros((0, self.dim_ambient))
        return np.vstack([g.coeffs for g in self.generators])

    @classmethod
    def from_generators(cls, gens: np.ndarray, dim: int, normalize: bool = True):
        """Basis = orthonormal null space of the generator rows."""
        gens = np.atleast_2d(np.asarray(gens, dtype=float))
        if normalize:
            gens = np.vstack([normalize_generator(g) for g in gens])
        basis = orthonormal_complement(gens, dim)
        return cls(basis, tuple(LinearForm(g) for g in gens))

    @classmethod
    def from_basis(cls, basis: np.ndarray):
        """Generators = orthonormal complement of ``basis`` columns."""
        basis = orthonormal_columns(basis)
        dim, sub = basis.shape
        comp = orthonormal_complement(basis.T, dim).T
        comp = fix_row_signs(comp) if comp.size else comp
        return cls(basis, tuple(LinearForm(g) for g in comp))

    def transformed(self, W: np.ndarray) -> "SubspaceEstimate":
        """Map an estimate made in whitened coordinates ``x~ = W (x - c)`` back to original directions.

        A direction ``u`` in whitened space corresponds to ``W u`` in the
        original space (``W`` symmetric); generators map by ``W^{-1}``.
        """
        gens = np.linalg.solve(W, self.generator_matrix().T).T
        # orthonormal rows spanning the same space as the mapped generators
        _, _, vt = np.linalg.svd(gens, full_matrices=False)
        gens = fix_row_signs(vt)
        return SubspaceEstimate.from_generators(gens, W.shape[0], normalize=False)
