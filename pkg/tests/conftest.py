import numpy as np
import pytest

from hsann.params import ProblemParams


@pytest.fixture
def params():
    """gamma = 1, mu = 1/2, R = 1 at the default resolution."""
    return ProblemParams(n=2, gamma=1.0, mu=0.5, R=1.0)


@pytest.fixture
def small_params():
    """Same constants at a resolution cheap enough for repeated solves."""
    return ProblemParams(n=2, gamma=1.0, mu=0.5, R=1.0, k_max=12, n_theta=128)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line per acceptance criterion; printed at the end of the run.

    A criterion split over several tests passes ``part``; its line combines the parts seen so far.
    """
    store = request.config.__dict__.setdefault("_criteria", {})

    def record(number: int, title: str, ok: bool, detail: str, part=None):
        parts = store.setdefault(number, {"title": title, "parts": {}})["parts"]
        parts[part] = (ok, detail)
        passed = all(o for o, _ in parts.values())
        details = "; ".join(d for _, d in parts.values())
        print(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}: {title} ({details})")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.__dict__.get("_criteria")
    if store:
        terminalreporter.section("acceptance criteria")
        for number in sorted(store):
            parts = store[number]["parts"]
            passed = all(o for o, _ in parts.values())
            details = "; ".join(d for _, d in parts.values())
            terminalreporter.write_line(
                f"criterion {number:2d} {'PASS' if passed else 'FAIL'}: {store[number]['title']} ({details})")
