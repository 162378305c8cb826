"""Coefficient-space representation of homogeneous linear and quadratic forms.

Quadratic forms in ``D`` variables are stored as coefficient vectors over the
monomials ``T_i T_j`` (``i <= j``) in canonical order::

    (0,0), (0,1), ..., (0,D-1), (1,1), ..., (D-1,D-1)

The coefficient of a mixed monomial ``T_i T_j`` is the *summed* Gram entry
``A[i,j] + A[j,i]``; the coefficient of a square ``T_i^2`` is ``A[i,i]``.
Variable indices are 0-based throughout.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

Monomial2 = tuple[int, int]


def triangular(n: int) -> int:
    """The n-th triangular number n(n+1)/2, i.e. the number of quadratic monomials in n variables."""
    if n < 0:
        raise ValueError(f"triangular number of negative n={n}")
    return n * (n + 1) // 2


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LinearForm:
    """Homogeneous linear form ``sum_k coeffs[k] T_k``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = _frozen(self.coeffs)
        if c.ndim != 1:
            raise ValueError("linear form coefficients must be a vector")
        object.__setattr__(self, "coeffs", c)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """Homogeneous quadratic form stored over the canonical monomial basis."""

    dim: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = _frozen(self.coeffs)
        if c.shape != (triangular(self.dim),):
            raise ValueError(
                f"quadratic form in {self.dim} variables needs {triangular(self.dim)} "
                f"coefficients, got shape {c.shape}"
            )
        object.__setattr__(self, "coeffs", c)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


@dataclass(frozen=True)
class MonomialOrdering:
    """Lexicographic ordering of quadratic monomials with variables relabelled by ``perm``.

    ``perm[k]`` is the variable placed at rank ``k``; rank 0 is the largest.
    """

    perm: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(p) for p in self.perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError(f"{perm} is not a permutation of 0..{len(perm) - 1}")
        object.__setattr__(self, "perm", perm)

    @property
    def dim(self) -> int:
        return len(self.perm)

    @classmethod
    def identity(cls, dim: int) -> "MonomialOrdering":
        return cls(tuple(range(dim)))

    @classmethod
    def cyclic(cls, dim: int, power: int) -> "MonomialOrdering":
        """Power ``power`` of the cyclic permutation ``k -> k + 1 (mod dim)``."""
        return cls(tuple((k + power) % dim for k in range(dim)))


@lru_cache(maxsize=None)
def _monomial_index_table(dim: int) -> np.ndarray:
    rows, cols = np.triu_indices(dim)
    table = np.full((dim, dim), -1, dtype=np.intp)
    table[rows, cols] = np.arange(rows.size)
    table[cols, rows] = np.arange(rows.size)
    table.setflags(write=False)
    return table


def monomials(dim: int) -> list[Monomial2]:
    """All quadratic monomials in canonical storage order."""
    rows, cols = np.triu_indices(dim)
    return list(zip(rows.tolist(), cols.tolist()))


def monomial_index(dim: int, i: int, j: int) -> int:
    """Storage position of ``T_i T_j`` (order of ``i``, ``j`` irrelevant)."""
    return int(_monomial_index_table(dim)[i, j])


def divisible_columns(dim: int, i: int) -> np.ndarray:
    """Storage positions of the ``dim`` monomials divisible by ``T_i``, indexed by the cofactor variable.

    Entry ``j`` is the position of ``T_i T_j``, so a quadric's coefficients at
    these positions are exactly the coefficients of ``l`` in ``T_i * l``.
    """
    return _monomial_index_table(dim)[i].copy()


def gram_to_quadratic(A) -> QuadraticForm:
    """Embed the quadratic form ``v^T A v`` into coefficient space.

    ``A`` need not be symmetric; only its symmetric part matters.

    >>> gram_to_quadratic([[1, 2], [3, 4]]).coeffs
    array([1., 5., 4.])
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"Gram matrix must be square, got shape {A.shape}")
    dim = A.shape[0]
    rows, cols = np.triu_indices(dim)
    summed = A + A.T
    coeffs = summed[rows, cols]
    diag = rows == cols
    coeffs[diag] = A[rows[diag], cols[diag]]
    return QuadraticForm(dim, coeffs)


def quadratic_to_gram(q: QuadraticForm) -> np.ndarray:
    """Symmetric Gram matrix of ``q``; mixed coefficients are split evenly."""
    dim = q.dim
    rows, cols = np.triu_indices(dim)
    half = np.where(rows == cols, q.coeffs, 0.5 * q.coeffs)
    G = np.zeros((dim, dim))
    G[rows, cols] = half
    G[cols, rows] = half
    return G


def grams_to_matrix(grams) -> np.ndarray:
    """Vectorized :func:`gram_to_quadratic` on a stack ``(n, D, D)``; returns ``(n, Δ(D))``."""
    grams = np.asarray(grams, dtype=float)
    dim = grams.shape[-1]
    rows, cols = np.triu_indices(dim)
    summed = grams + np.swapaxes(grams, -1, -2)
    out = summed[:, rows, cols]
    diag = rows == cols
    out[:, diag] = grams[:, rows[diag], cols[diag]]
    return out


def coefficient_matrix(quadrics) -> np.ndarray:
    """Stack quadrics into a matrix with one row per polynomial (canonical column order).

    A 2-D array is passed through, so callers may hand over precomputed matrices.
    """
    if isinstance(quadrics, np.ndarray):
        if quadrics.ndim != 2:
            raise ValueError("coefficient matrix must be 2-D")
        return np.asarray(quadrics, dtype=float)
    quadrics = list(quadrics)
    if not quadrics:
        raise ValueError("no quadrics given")
    dims = {q.dim for q in quadrics}
    if len(dims) != 1:
        raise ValueError(f"quadrics have mixed dimensions {sorted(dims)}")
    return np.vstack([q.coeffs for q in quadrics])


def dim_from_columns(ncols: int) -> int:
    """Invert ``triangular``; raises if ``ncols`` is not a triangular number."""
    dim = int((np.sqrt(8 * ncols + 1) - 1) // 2)
    if triangular(dim) != ncols:
        raise ValueError(f"{ncols} columns is not a triangular number")
    return dim


def evaluate(form: Union[QuadraticForm, LinearForm], v) -> float:
    """Value of a linear or quadratic form at the point ``v``."""
    v = np.asarray(v, dtype=float)
    if v.shape != (form.dim,):
        raise ValueError(f"point has shape {v.shape}, form has {form.dim} variables")
    if isinstance(form, LinearForm):
        return float(form.coeffs @ v)
    rows, cols = np.triu_indices(form.dim)
    return float(form.coeffs @ (v[rows] * v[cols]))


def column_order(ordering: MonomialOrdering) -> list[Monomial2]:
    """Monomials sorted descending under the relabelled lexicographic order.

    The block of ``perm[0]`` comes first (``perm[0]^2, perm[0]perm[1], ...``),
    ending with ``perm[-1]^2``. Each monomial is returned with ``i <= j``.
    """
    p = ordering.perm
    n = len(p)
    return [
        (min(p[a], p[b]), max(p[a], p[b]))
        for a in range(n)
        for b in range(a, n)
    ]


def column_positions(ordering: MonomialOrdering) -> np.ndarray:
    """Storage positions of :func:`column_order`, i.e. the column permutation to apply to ``Q``."""
    table = _monomial_index_table(ordering.dim)
    p = np.asarray(ordering.perm)
    rows, cols = np.triu_indices(ordering.dim)
    return table[p[rows], p[cols]]


def multiply_var(lin: LinearForm, i: int) -> QuadraticForm:
    """The quadric ``T_i * lin``."""
    dim = lin.dim
    if not 0 <= i < dim:
        raise ValueError(f"variable index {i} out of range for {dim} variables")
    coeffs = np.zeros(triangular(dim))
    coeffs[divisible_columns(dim, i)] = lin.coeffs
    return QuadraticForm(dim, coeffs)


def divide_by_var(q: QuadraticForm, i: int) -> tuple[LinearForm, float]:
    """Divide ``q`` by ``T_i``, discarding the non-divisible part.

    Returns the quotient and the relative residual: the norm of the
    coefficients on monomials not containing ``T_i``, over ``|q|``. The
    residual is zero exactly when ``T_i`` divides ``q``.
    """
    dim = q.dim
    if not 0 <= i < dim:
        raise ValueError(f"variable index {i} out of range for {dim} variables")
    scale = np.abs(q.coeffs).max(initial=0.0)
    if scale == 0.0:
        raise ValueError("cannot divide the zero polynomial")
    cols = divisible_columns(dim, i)
    mask = np.ones(q.coeffs.size, dtype=bool)
    mask[cols] = False
    # rescale first so tiny coefficients do not underflow when squared
    scaled = q.coeffs / scale
    residual = float(np.linalg.norm(scaled[mask]) / np.linalg.norm(scaled))
    return LinearForm(q.coeffs[cols]), residual


def linear_matrix(linears: Sequence[LinearForm], dim: int) -> np.ndarray:
    """Stack linear forms as rows; an empty sequence gives a ``(0, dim)`` array."""
    if not linears:
        return np.zeros((0, dim))
    return np.vstack([f.coeffs for f in linears])
