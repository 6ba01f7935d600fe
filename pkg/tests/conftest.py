import numpy as np
import pytest

from twinboot import kernels

BACKENDS = ["python"]
try:
    kernels.get_backend("cython")
    BACKENDS.append("cython")
except ImportError:
    pass

_NAMES = ["grouped_sqdist", "grouped_perturb", "grouped_normal_perturb", "standard_normal",
          "grouped_variance", "twin_normal_perturb", "adam_update", "two_well_loss_grad"]


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Route every kernel call through one backend for the duration of a test."""
    impl = kernels.get_backend(request.param)
    for name in _NAMES:
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    return request.param


def fd_grad(f, w, h=1e-6):
    g = np.empty_like(w)
    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = h
        g[i] = (f(w + e) - f(w - e)) / (2.0 * h)
    return g


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
