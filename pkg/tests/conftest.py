from fractions import Fraction

import pytest
from hypothesis import settings

from tropma.green import GreenData, canonical_green
from tropma.lattice import Lattice

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

F = Fraction


@pytest.fixture
def z1():
    return Lattice.standard(1)


@pytest.fixture
def rect():
    return Lattice(((1, 0), (0, 2)))


@pytest.fixture
def skew():
    return Lattice(((2, 1), (F(1, 2), F(3, 2))))


@pytest.fixture
def g_quad(z1):
    """x^2 / 2 on R / Z."""
    return canonical_green(GreenData(z1, ((1,),)))


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """``record(number, ok, message)``: log one criterion line for the terminal summary."""

    def record(number: int, ok: bool, message: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {message}"
        _ACCEPTANCE.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
