import numpy as np
import pytest

import stochlb._kernels as kernels
from stochlb._kernels import _pure
from stochlb.dist import DiscreteDist

try:
    from stochlb._kernels import _ext
except ImportError:  # extension not built
    _ext = None

KERNEL_NAMES = ("merge_sorted", "convolve", "log_mean_exp", "l_function", "log_mgf", "expected_norm")
BACKENDS = ["python"] + (["cython"] if _ext is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run a test once per available kernel backend."""
    impl = _pure if request.param == "python" else _ext
    for name in KERNEL_NAMES:
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rand_dist(rng, support_max=4, vmax=10.0):
    k = int(rng.integers(1, support_max + 1))
    return DiscreteDist.from_arrays(rng.uniform(0, vmax, size=k), rng.dirichlet(np.ones(k)))


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record():
    """Append a one-line acceptance verdict, printed in the terminal summary."""

    def _record(criterion: str, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} [{criterion}] {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
