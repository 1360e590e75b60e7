from fractions import Fraction

import pytest

from ltwalk import walks


@pytest.fixture(scope="session")
def biased23():
    return walks.preset("biased1d", p=Fraction(2, 3))


@pytest.fixture(scope="session")
def simple1():
    return walks.preset("simple", d=1)


@pytest.fixture(scope="session")
def simple2():
    return walks.preset("simple", d=2)


@pytest.fixture(scope="session")
def simple3():
    return walks.preset("simple", d=3)


@pytest.fixture(scope="session")
def deterministic1d():
    return walks.preset("custom", d=1, atoms=[((1,), Fraction(1))])
