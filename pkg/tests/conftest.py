import numpy as np
import pytest
from hypothesis import HealthCheck, settings

MASTER_SEED = 20240601

settings.register_profile(
    "repro",
    max_examples=50,
    derandomize=True,
    deadline=None,
    print_blob=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repro")


@pytest.fixture
def rng():
    return np.random.default_rng(MASTER_SEED)


def random_subspace_quadrics(D, d, n, rng):
    """``n`` random quadrics vanishing on a random ``d``-dim subspace, plus its orthonormal basis."""
    basis, _ = np.linalg.qr(rng.standard_normal((D, d)))
    comp = np.linalg.svd(basis.T)[2][d:]  # (D-d, D) rows vanishing on the subspace
    grams = []
    for _ in range(n):
        P = rng.standard_normal((D - d, D))
        G = comp.T @ P
        grams.append(0.5 * (G + G.T))
    return np.stack(grams), basis


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_addoption(parser):
    parser.addoption(
        "--properties-only",
        action="store_true",
        help="run only the randomized property tests",
    )


def pytest_collection_modifyitems(config, items):
    if not config.getoption("--properties-only"):
        return
    keep, drop = [], []
    for item in items:
        fn = getattr(item, "obj", None)
        (keep if getattr(fn, "is_hypothesis_test", False) else drop).append(item)
    items[:] = keep
    config.hook.pytest_deselected(items=drop)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
