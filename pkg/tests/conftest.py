import numpy as np
import pytest

from objevents.measurement import CNOT, compose, copy_model
from objevents.quantum import DensityOperator, Effect, Weights
from objevents.superposition import SuperpositionFamily
from objevents.theorems import DiscriminationScenario

W = Weights(0.36, 0.64)


@pytest.fixture
def cnot():
    return copy_model()


@pytest.fixture
def cnot3():
    return compose(copy_model(), "ch2", CNOT, DensityOperator.basis(0, 2), "ch3")


@pytest.fixture
def fam():
    return SuperpositionFamily(DensityOperator.basis(0, 2), DensityOperator.basis(1, 2), W)


@pytest.fixture
def phi():
    return DensityOperator.pure([0.6, 0.8])


@pytest.fixture
def p0():
    return Effect.projector([1, 0])


@pytest.fixture
def p1():
    return Effect.projector([0, 1])


@pytest.fixture
def plus():
    return Effect.projector([1, 1])


@pytest.fixture
def disc(cnot, fam, p0):
    return DiscriminationScenario(cnot, fam, {"ch1": p0, "ch2": p0})


@pytest.fixture
def disc3(cnot3, fam, p0):
    return DiscriminationScenario(cnot3, fam, {"ch1": p0, "ch2": p0, "ch3": p0})


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
