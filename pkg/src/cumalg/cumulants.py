"""Per-epoch mean/covariance estimation, whitening, and the polynomial system."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .polyspace import LinearForm, QuadraticForm, gram_to_quadratic, triangular


class WhiteningError(ValueError):
    """Reference covariance is (numerically) singular."""


@dataclass(frozen=True, eq=False)
class EpochCumulants:
    """First and second cumulant of one epoch."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        cov = np.array(self.cov, dtype=float)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError(f"inconsistent shapes: mean {mean.shape}, cov {cov.shape}")
        scale = max(np.abs(cov).max(initial=0.0), np.finfo(float).tiny)
        if np.abs(cov - cov.T).max(initial=0.0) > 1e-10 * scale:
            raise ValueError("covariance is not symmetric")
        if mean.size and np.linalg.eigvalsh(cov)[0] < -1e-10 * np.linalg.norm(cov, 2):
            raise ValueError("covariance is not positive semidefinite")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True, eq=False)
class PolynomialSystem:
    """Quadrics ``v^T (Σ_i - Σ_ref) v`` and linear forms ``v^T μ_i`` vanishing on the common subspace."""

    dim: int
    quadrics: tuple[QuadraticForm, ...]
    linears: tuple[LinearForm, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "quadrics", tuple(self.quadrics))
        object.__setattr__(self, "linears", tuple(self.linears))
        if not self.quadrics:
            raise ValueError("a polynomial system needs at least one quadric")
        if any(q.dim != self.dim for q in self.quadrics) or any(
            f.dim != self.dim for f in self.linears
        ):
            raise ValueError("all forms must share the system dimension")

    def quadric_matrix(self) -> np.ndarray:
        return np.vstack([q.coeffs for q in self.quadrics])

    def linear_matrix(self) -> np.ndarray:
        if not self.linears:
            return np.zeros((0, self.dim))
        return np.vstack([f.coeffs for f in self.linears])


def estimate_epoch(samples) -> EpochCumulants:
    """Sample mean and unbiased (N-1) sample covariance of an ``(N, D)`` array."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"samples must be an (N, D) matrix, got shape {x.shape}")
    if x.shape[0] < 2:
        raise ValueError(f"need at least 2 samples, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples contain non-finite entries")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (x.shape[0] - 1)
    return EpochCumulants(mean, 0.5 * (cov + cov.T))


def whitening_transform(cov) -> np.ndarray:
    """Symmetric inverse square root of a positive definite matrix."""
    evals, evecs = np.linalg.eigh(np.asarray(cov, dtype=float))
    if evals[0] <= 1e-12 * evals[-1] or evals[-1] <= 0:
        raise WhiteningError(
            f"reference covariance is singular (eigenvalues {evals[0]:.3g} .. {evals[-1]:.3g})"
        )
    W = (evecs / np.sqrt(evals)) @ evecs.T
    return 0.5 * (W + W.T)


def center_whiten(epochs: Sequence[EpochCumulants], reference: str = "average"):
    """Map all epochs through ``x -> W (x - c)`` so the reference becomes standard.

    ``reference="average"`` standardizes the average epoch (mean of means and
    of covariances); ``reference="last"`` standardizes the last epoch.

    Returns ``(whitened_epochs, W, c)``.
    """
    if not epochs:
        raise ValueError("no epochs given")
    if reference == "average":
        c = np.mean([e.mean for e in epochs], axis=0)
        ref_cov = np.mean([e.cov for e in epochs], axis=0)
    elif reference == "last":
        c = epochs[-1].mean.copy()
        ref_cov = epochs[-1].cov
    else:
        raise ValueError(f"unknown whitening reference {reference!r}")
    W = whitening_transform(ref_cov)
    covs = W @ np.stack([e.cov for e in epochs]) @ W
    covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
    means = (np.stack([e.mean for e in epochs]) - c) @ W
    out = [EpochCumulants(mu, S) for mu, S in zip(means, covs)]
    if reference == "last":
        # exact by construction up to rounding; pin it
        out[-1] = EpochCumulants(np.zeros(len(c)), np.eye(len(c)))
    return out, W, c


def build_system(
    epochs: Sequence[EpochCumulants], mode: str = "reference", zero_tol: float = 1e-12
) -> PolynomialSystem:
    """Polynomial system of whitened epochs.

    ``mode="reference"`` compares epochs ``0..m-2`` against the standard
    normal (the last epoch is the reference); ``mode="pairwise"`` uses every
    unordered pair. Linear forms with norm below ``zero_tol`` are dropped;
    zero quadrics are kept.
    """
    m = len(epochs)
    if m < 2:
        raise ValueError(f"need at least 2 epochs, got {m}")
    dim = epochs[0].dim
    if mode == "reference":
        eye = np.eye(dim)
        pairs = [(e.cov - eye, e.mean) for e in epochs[:-1]]
    elif mode == "pairwise":
        pairs = [
            (a.cov - b.cov, a.mean - b.mean) for a, b in combinations(epochs, 2)
        ]
    else:
        raise ValueError(f"unknown system mode {mode!r}")
    quadrics = [gram_to_quadratic(G) for G, _ in pairs]
    linears = [LinearForm(mu) for _, mu in pairs if np.linalg.norm(mu) >= zero_tol]
    return PolynomialSystem(dim, quadrics, linears)


def quadric_count_needed(dim: int, subdim: int) -> int:
    """Number of generic quadrics needed to span all quadrics vanishing on a ``subdim`` subspace."""
    return triangular(dim) - triangular(subdim)
