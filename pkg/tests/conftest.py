import numpy as np
import pytest

from noncoercive import LinearTerm, ProblemSpec, SampledFunction


def double_well(x):
    return (x**2 - 1) ** 2


@pytest.fixture
def dw():
    """Double well on [-2, 2] with step 0.5 (the reference grid)."""
    return SampledFunction.from_callable(double_well, -2, 2, 0.5)


@pytest.fixture
def dw_fine():
    return SampledFunction.from_callable(double_well, -2, 2, 0.01)


@pytest.fixture
def square():
    return SampledFunction.from_callable(lambda x: x**2, -2, 2, 0.01)


@pytest.fixture
def zero_a():
    return LinearTerm.zero()


def make_spec(f, a=None, u0=0.0, u1=0.0, T=1.0):
    return ProblemSpec(T, u0, u1, a if a is not None else LinearTerm.zero(f.dim), f)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
