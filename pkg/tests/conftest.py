"""
Shared fixtures and hypothesis strategies.
"""
from random import Random

import pytest
from hypothesis import strategies as st

from fragcalc import harness
from fragcalc.formula import Variable
from fragcalc.signature import FIELD_RING, RESIDUE_RING, extend_with_constants, graph, residue_ring, ring, val


@pytest.fixture
def rng():
    return harness.corpus_rng(7)


@pytest.fixture
def ring_language():
    return ring()


@pytest.fixture
def ring_t():
    return extend_with_constants(ring(), ["t"], FIELD_RING.sort)


@pytest.fixture
def val_language():
    return val()


@pytest.fixture
def val_t():
    return extend_with_constants(val(), ["t"], FIELD_RING.sort)


@pytest.fixture
def graph_language():
    return graph()


def field_vars(*names):
    return [Variable(n, FIELD_RING.sort) for n in names]


def residue_vars(*names):
    return [Variable(n, RESIDUE_RING.sort) for n in names]


def vertex_vars(*names):
    return [Variable(n, "vertex") for n in names]


seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def formulas(language_factory, size=8, **kwargs):
    """Random well-sorted formulas, shrinking by seed."""
    return seeds.map(lambda s: harness.random_formula(language_factory(), size, Random(s), **kwargs))


def quantifier_free(language_factory, size=6, variables=None):
    return seeds.map(lambda s: harness.random_quantifier_free(language_factory(), size, Random(s), variables))


ring_formulas = formulas(ring)
graph_formulas = formulas(graph)
val_formulas = formulas(val)
residue_formulas = formulas(residue_ring)
