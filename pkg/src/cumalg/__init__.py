"""Recover the linear subspace on which several distributions share their first two cumulants."""
from .approx import approx_generators, estimate
from .bench import identifiability, principal_angle, recover_subspace, run_grid
from .cumulants import (
    EpochCumulants,
    PolynomialSystem,
    build_system,
    center_whiten,
    estimate_epoch,
)
from .exact import exact_generators, solve_exact
from .polyspace import LinearForm, QuadraticForm
from .ssa import SSAConfig, ssa_optimize
from .subspace import RadicalError, SubspaceEstimate
from .synthgen import ProblemInstance, generate

__all__ = [
    "EpochCumulants",
    "LinearForm",
    "PolynomialSystem",
    "ProblemInstance",
    "QuadraticForm",
    "RadicalError",
    "SSAConfig",
    "SubspaceEstimate",
    "approx_generators",
    "build_system",
    "center_whiten",
    "estimate",
    "estimate_epoch",
    "exact_generators",
    "generate",
    "identifiability",
    "principal_angle",
    "recover_subspace",
    "run_grid",
    "solve_exact",
    "ssa_optimize",
]
