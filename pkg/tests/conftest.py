import os
from pathlib import Path

import numpy as np
import pytest

from phi4torus.ou import hermitian_normal
from phi4torus.torus import SpectralField

ARTIFACT_DIR = Path(os.environ.get("PHI4_TEST_ARTIFACTS", Path(__file__).resolve().parent.parent / "acceptance_artifacts"))

_CRITERIA: dict = {}


def random_field(rng, K, batch=(), real=True, decay=0.0):
    """Random field with coefficients of size (1+|k|^2)^(-decay/2)."""
    c = hermitian_normal(rng, K, batch)
    if not real:
        c = c + 1j * hermitian_normal(rng, K, batch)
    if decay:
        Kc = (K,) * 3 if np.isscalar(K) else tuple(K)
        k2 = sum(np.arange(-k, k + 1).reshape([-1 if i == a else 1 for i in range(3)]) ** 2
                 for a, k in enumerate(Kc))
        c = c * (1.0 + k2) ** (-decay / 2.0)
    return SpectralField(c, real=real)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion():
    """Record the outcome of one acceptance criterion for the end-of-run summary.

    Usage: ``with criterion(7, "invariance") as c: ...; c.detail = "..."; c.ok = cond``.
    An exception inside the block records a failure.
    """
    class Entry:
        def __init__(self, number, title):
            self.number, self.title, self.ok, self.detail = number, title, False, ""

        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc_type is not None:
                self.ok = False
                self.detail = (self.detail + "; " if self.detail else "") + f"{exc_type.__name__}: {exc}"
            _CRITERIA[self.number] = (self.title, self.ok, self.detail)
            print(f"CRITERION {self.number:2d} {'PASS' if self.ok else 'FAIL'}: {self.title} | {self.detail}")
            return False

    return Entry


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 13):
        if n in _CRITERIA:
            title, ok, detail = _CRITERIA[n]
            terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title} | {detail}")
        else:
            terminalreporter.write_line(f"criterion {n:2d}: NOT RUN")
