import random
from fractions import Fraction

import pytest

from betaedge.errors import NegativeCumulant
from betaedge.freeprob import Component, EnsembleSpec


def random_spec(rng: random.Random, allow_negative: bool = False, max_components: int = 3) -> EnsembleSpec:
    """Random valid rational spec; retries until the cumulants are nonnegative."""
    while True:
        n = rng.randint(0, max_components)
        delta = Fraction(rng.randint(0 if n else 1, 6), rng.randint(1, 4))
        mags = sorted({Fraction(rng.randint(1, 12), rng.randint(1, 4)) for _ in range(n)}, reverse=True)
        comps = []
        for i, a in enumerate(mags):
            sign = -1 if allow_negative and i > 0 and rng.random() < 0.4 else 1
            comps.append(Component(sign * a, gamma=Fraction(rng.randint(1, 9), rng.randint(1, 4))))
        try:
            return EnsembleSpec(delta, tuple(comps))
        except NegativeCumulant:
            continue


@pytest.fixture
def rng():
    return random.Random(20261019)


@pytest.fixture
def mp1():
    return EnsembleSpec.marchenko_pastur(1)


@pytest.fixture
def semicircle():
    return EnsembleSpec.semicircle()


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record and print one PASS/FAIL line, then assert."""

    def report(label: str, ok: bool, value, tolerance) -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {label}: value={value} tolerance={tolerance}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
