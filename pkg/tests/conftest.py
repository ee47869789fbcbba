import re

import numpy as np
import pytest

from dlab.targets import GaussianMixture, benchmark_mixture


def random_mixture(gen: np.random.Generator, K: int, d: int) -> GaussianMixture:
    w = gen.dirichlet(np.ones(K) * 2.0)
    w = w / w.sum()
    w[-1] = 1.0 - w[:-1].sum()
    means = gen.normal(0.0, 2.0, size=(K, d))
    variances = gen.uniform(0.2, 2.5, size=(K, d))
    return GaussianMixture(w, means, variances)


@pytest.fixture
def bench_gmm():
    return benchmark_mixture()


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one acceptance line; printed in the terminal summary."""

    def add(criterion, ok, detail):
        _ACCEPTANCE_LINES.append((criterion, "PASS" if ok else "FAIL", detail))
        print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")

    return add


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, verdict, detail in sorted(_ACCEPTANCE_LINES, key=lambda r: (int(re.match(r"\d+", str(r[0])).group()), str(r[0]))):
        terminalreporter.write_line(f"criterion {criterion}: {verdict}  {detail}")
