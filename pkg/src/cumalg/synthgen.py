"""Synthetic covariance families that agree on a hidden d-dimensional subspace."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .cumulants import EpochCumulants


def trial_seed(master_seed: int, trial_index: int) -> int:
    """64-bit per-trial seed derived from ``(master_seed, trial_index)`` by SeedSequence hashing."""
    ss = np.random.SeedSequence([int(master_seed), int(trial_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def random_orthogonal(D: int, rng: np.random.Generator) -> np.ndarray:
    """``expm(A)`` for ``A = (B - B^T)/2`` with ``B`` uniform on (-1, 1); a rotation (det +1)."""
    B = rng.uniform(-1.0, 1.0, size=(D, D))
    R = expm(0.5 * (B - B.T))
    # polish rounding from expm so R^T R = I holds to machine precision
    u, _, vt = np.linalg.svd(R)
    return u @ vt


def disturbance(D: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Random PSD matrix ``V diag(e) V^T`` whose mean log-eigenvalue is exactly ``sigma``."""
    g = rng.uniform(-1.0, 1.0, size=D)
    log_eig = g - g.mean() + sigma
    V = random_orthogonal(D, rng)
    E = (V * np.exp(log_eig)) @ V.T
    return 0.5 * (E + E.T)


def _lower_rows(rows: int, start: int, D: int, rng: np.random.Generator) -> np.ndarray:
    """Rows ``start..start+rows-1`` of a lower-triangular factor with safeguarded diagonal."""
    L = rng.uniform(-1.0, 1.0, size=(rows, D))
    for a in range(rows):
        L[a, start + a + 1 :] = 0.0
        L[a, start + a] = abs(L[a, start + a]) + 0.5
    return L


def source_covariances(D: int, d: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` matrices ``L_i L_i^T`` whose lower-triangular factors share their first ``d`` rows.

    The top-left ``d x d`` blocks are therefore bit-for-bit identical.
    """
    shared = _lower_rows(d, 0, D, rng)
    C = np.empty((m, D, D))
    for i in range(m):
        L = np.vstack([shared, _lower_rows(D - d, d, D, rng)])
        C[i] = L @ L.T
    return C


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    D: int
    d: int
    m: int
    sigma: float
    covariances: np.ndarray
    means: np.ndarray
    true_basis: np.ndarray
    seed: int | None = None
    metadata: dict = field(default_factory=dict)

    def epochs(self) -> list[EpochCumulants]:
        return [EpochCumulants(mu, S) for mu, S in zip(self.means, self.covariances)]


def generate(
    D: int,
    d: int,
    m: int,
    sigma: float,
    rng: np.random.Generator | int | None = None,
    disturb: bool = True,
    mean_shift: bool = False,
    max_attempts: int = 100,
) -> ProblemInstance:
    """Draw ``m`` covariances agreeing exactly (before disturbance) on a random ``d``-dim subspace.

    In source coordinates every covariance is ``L_i L_i^T`` where the first
    ``d`` rows of the Cholesky factor are shared, so the top-left ``d x d``
    block agrees. A disturbance with mean log-eigenvalue ``sigma`` is added
    when ``disturb`` is set (and ``sigma`` is finite). A random basis ``M``
    (columns uniform on (-1, 1)) then carries the first ``d`` source
    directions onto the hidden subspace ``span(M[:, :d])``: covariances are
    ``M^{-T} C M^{-1}``, so ``v^T Σ_i v`` depends only on ``C``'s shared block
    for ``v`` in that span.

    ``mean_shift`` gives every epoch a mean whose source coordinates are
    zero on the shared directions and uniform on the rest, plus
    ``exp(sigma)``-scaled uniform noise when disturbing.
    """
    if not 0 < d < D:
        raise ValueError(f"need 0 < d < D, got d={d}, D={D}")
    if m < 2:
        raise ValueError(f"need at least 2 epochs, got m={m}")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = np.random.default_rng(rng)
    disturb = bool(disturb) and np.isfinite(sigma)

    C = source_covariances(D, d, m, rng)
    # drawn even when not disturbing so the stream is shared across noise levels
    E = np.stack([disturbance(D, sigma if disturb else 0.0, rng) for _ in range(m)])
    if disturb:
        C = C + E

    mu_src = np.zeros((m, D))
    if mean_shift:
        mu_src[:, d:] = rng.uniform(-1.0, 1.0, size=(m, D - d))
        noise = rng.uniform(-1.0, 1.0, size=(m, D))
        if disturb:
            mu_src = mu_src + np.exp(sigma) * noise

    for _ in range(max_attempts):
        M = rng.uniform(-1.0, 1.0, size=(D, D))
        if np.linalg.cond(M) <= 1e8:
            break
    else:
        raise RuntimeError(f"no well-conditioned basis after {max_attempts} draws")
    Minv = np.linalg.inv(M)
    covs = Minv.T @ C @ Minv
    covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
    means = mu_src @ Minv
    q, _ = np.linalg.qr(M[:, :d])
    return ProblemInstance(
        D=D,
        d=d,
        m=m,
        sigma=float(sigma),
        covariances=covs,
        means=means,
        true_basis=q,
        seed=int(seed) if seed is not None else None,
        metadata={"disturb": disturb, "mean_shift": mean_shift},
    )


def sample_epochs(instance: ProblemInstance, n: int, rng) -> list[np.ndarray]:
    """Gaussian samples ``(n, D)`` per epoch with the instance's means and covariances."""
    rng = np.random.default_rng(rng)
    out = []
    for mu, S in zip(instance.means, instance.covariances):
        L = np.linalg.cholesky(S)
        out.append(mu + rng.standard_normal((n, instance.D)) @ L.T)
    return out
