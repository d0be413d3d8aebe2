"""Shared helpers for the test suite: seeded random operators and metrics."""

import numpy as np
import pytest

from opflow.opspace import (
    gibbs_metric,
    hs_metric,
    kubo_metric,
    metric_from_rho,
)


def random_hermitian(rng, d):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (m + m.conj().T)


def random_density(rng, d, rank=None):
    """Random PSD matrix with unit trace (optionally rank-deficient)."""
    k = d if rank is None else rank
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_metric(rng, d, label=None):
    """One of the supported metric constructions, drawn at random."""
    if label is None:
        label = rng.choice(["hs", "gibbs", "kubo", "rho-pair"])
    if label == "hs":
        return hs_metric(d)
    h = random_hermitian(rng, d)
    beta = float(rng.uniform(0.2, 2.0))
    if label == "gibbs":
        return gibbs_metric(h, beta)
    if label == "kubo":
        return kubo_metric(h, beta)
    return metric_from_rho(random_density(rng, d), random_density(rng, d))


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)


# one "criterion-NN <name>: PASS|FAIL" line per acceptance criterion,
# echoed in the terminal summary so they survive output capture
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
