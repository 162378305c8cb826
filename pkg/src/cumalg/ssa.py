"""Optimization baseline: find the projection under which all epochs look standard normal.

The frame is parameterized as the first ``d`` rows of a rotation ``R`` and
updated by ``R <- expm(-t * skew(H)) R``, which keeps ``P P^T = I`` exactly
up to rounding. The gradient is analytic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .cumulants import EpochCumulants
from .synthgen import random_orthogonal

VARIANTS = ("full_kl", "logdet_mean")


@dataclass(frozen=True)
class SSAConfig:
    restarts: int = 5
    max_iters: int = 500
    grad_tol: float = 1e-6
    step_init: float = 1.0
    objective_variant: str = "full_kl"

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if not self.step_init > 0:
            raise ValueError("step_init must be positive")
        if self.objective_variant not in VARIANTS:
            raise ValueError(f"objective_variant must be one of {VARIANTS}")


@dataclass(frozen=True, eq=False)
class SSAResult:
    P: np.ndarray
    objective: float
    iterations: int
    converged: bool
    restart: int
    history: tuple[float, ...] = field(default=(), repr=False)


def _stack(epochs: Sequence[EpochCumulants]):
    covs = np.stack([e.cov for e in epochs])
    means = np.stack([e.mean for e in epochs])
    return covs, means


def _check_frame(P: np.ndarray, dim: int) -> np.ndarray:
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape[1] != dim:
        raise ValueError(f"projection has {P.shape[1]} columns, epochs live in R^{dim}")
    if np.abs(P @ P.T - np.eye(P.shape[0])).max() > 1e-8:
        raise ValueError("projection rows are not orthonormal")
    return P


def _objective_and_grad(P, covs, means, variant, want_grad=True):
    d = P.shape[0]
    PS = P @ covs  # (m, d, D)
    proj = PS @ P.T  # (m, d, d)
    try:
        L = np.linalg.cholesky(proj)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("projected covariance is not positive definite") from None
    logdet = 2.0 * np.log(np.diagonal(L, axis1=1, axis2=2)).sum(axis=1)
    pm = means @ P.T  # (m, d)
    sq = np.einsum("ia,ia->i", pm, pm)
    if variant == "full_kl":
        trace = np.trace(proj, axis1=1, axis2=2)
        f = 0.5 * float(np.sum(trace - logdet - d + sq))
    else:
        f = float(np.sum(-logdet + sq))
    if not want_grad:
        return f, None
    inv_PS = np.linalg.solve(proj, PS)
    mean_term = np.einsum("ia,ib->ab", pm, means)
    if variant == "full_kl":
        G = PS.sum(axis=0) - inv_PS.sum(axis=0) + mean_term
    else:
        G = -2.0 * inv_PS.sum(axis=0) + 2.0 * mean_term
    return f, G


def ssa_objective(P, epochs: Sequence[EpochCumulants], variant: str = "full_kl") -> float:
    """Summed divergence of the projected epochs from the standard normal.

    ``full_kl`` is the Gaussian KL divergence to ``N(0, I)``;
    ``logdet_mean`` drops the trace and constant terms and doubles the rest
    (``-log det + |P mu|^2`` per epoch), which is unbounded below.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown objective variant {variant!r}")
    covs, means = _stack(epochs)
    P = _check_frame(P, covs.shape[1])
    return _objective_and_grad(P, covs, means, variant, want_grad=False)[0]


def ssa_gradient(P, epochs: Sequence[EpochCumulants], variant: str = "full_kl") -> np.ndarray:
    """Euclidean gradient of :func:`ssa_objective` with respect to ``P``."""
    covs, means = _stack(epochs)
    P = _check_frame(P, covs.shape[1])
    return _objective_and_grad(P, covs, means, variant)[1]


def _skew_gradient(G: np.ndarray, R: np.ndarray) -> np.ndarray:
    d = G.shape[0]
    H = np.zeros_like(R)
    H[:d] = G @ R.T
    return 0.5 * (H - H.T)


def _descend(R, covs, means, d, config: SSAConfig):
    variant = config.objective_variant
    f, G = _objective_and_grad(R[:d], covs, means, variant)
    history = [f]
    step = config.step_init
    for it in range(1, config.max_iters + 1):
        S = _skew_gradient(G, R)
        gnorm2 = float(np.sum(S * S))
        if np.sqrt(gnorm2) < config.grad_tol:
            return R, f, it - 1, True, history
        t = step
        for _ in range(50):
            R_new = expm(-t * S) @ R
            try:
                f_new = _objective_and_grad(R_new[:d], covs, means, variant, want_grad=False)[0]
            except np.linalg.LinAlgError:
                f_new = np.inf
            if f_new <= f - 1e-4 * t * gnorm2:
                break
            t *= 0.5
        else:
            return R, f, it, False, history
        if f_new >= f:
            # gradient is at rounding level, no representable progress left
            return R, f, it, False, history
        R = R_new
        f, G = _objective_and_grad(R[:d], covs, means, variant)
        history.append(f)
        step = min(2.0 * t, config.step_init * 1e3)
    S = _skew_gradient(G, R)
    return R, f, config.max_iters, bool(np.linalg.norm(S) < config.grad_tol), history


def ssa_optimize(
    epochs: Sequence[EpochCumulants],
    d: int,
    config: SSAConfig | None = None,
    rng_seed=None,
) -> SSAResult:
    """Best of ``config.restarts`` descents from random rotations.

    The minimum objective wins; ties go to the lowest restart index.
    ``converged`` is false when the winner stopped on ``max_iters`` or a
    failed line search rather than a small gradient.
    """
    config = config or SSAConfig()
    covs, means = _stack(epochs)
    dim = covs.shape[1]
    if not 0 < d < dim:
        raise ValueError(f"need 0 < d < D, got d={d}, D={dim}")
    rng = np.random.default_rng(rng_seed)
    best = None
    for k in range(config.restarts):
        R0 = random_orthogonal(dim, rng)
        R, f, iters, conv, hist = _descend(R0, covs, means, d, config)
        if best is None or f < best.objective:
            P = np.linalg.qr(R[:d].T)[0].T
            # QR only removes rounding drift; keep the descended frame's orientation
            P = P * np.sign(np.sum(P * R[:d], axis=1))[:, None]
            best = SSAResult(P, f, iters, conv, k, tuple(hist))
    return best
