from random import Random

import pytest
from hypothesis import given, settings as hypothesis_settings

from fragcalc import harness, vfred
from fragcalc.formula import (
    Atom, Exists, Forall, Not, free_variables, quantifier_count, size, well_sorted,
)
from fragcalc.fragments import EXISTENTIAL, F0, mem_fragment, parse_descriptor
from fragcalc.signature import graph, ring, val
from fragcalc.structures import modular_ring
from fragcalc.syntax import parse_formula
from tests.conftest import field_vars, seeds, vertex_vars

u, v = vertex_vars("u", "v")
EDGE = Atom("E", (u, v))


@pytest.fixture(scope="module")
def small_universe():
    return harness.enumerate_formulas(5, [EDGE], [u])


class TestGenerators:
    """Random corpora."""

    @pytest.mark.parametrize("factory", [ring, graph, val])
    @given(seed=seeds)
    @hypothesis_settings(max_examples=50, deadline=None)
    def test_random_formula_is_well_sorted(self, factory, seed):
        language = factory()
        phi = harness.random_formula(language, 10, Random(seed))
        assert well_sorted(language, phi) == []
        assert size(phi) <= 10

    @given(seed=seeds)
    @hypothesis_settings(max_examples=50, deadline=None)
    def test_quantifier_free(self, seed):
        phi = harness.random_quantifier_free(ring(), 8, Random(seed))
        assert quantifier_count(phi) == 0

    @given(seed=seeds)
    @hypothesis_settings(max_examples=50, deadline=None)
    def test_prefixed(self, seed):
        phi = harness.random_prefixed(ring(), "AAE", 5, Random(seed))
        assert isinstance(phi, Forall) and isinstance(phi.body, Forall)
        assert isinstance(phi.body.body, Exists)
        assert mem_fragment(parse_descriptor("A2[E]"), ring(), phi)

    def test_prefixed_needs_enough_variables(self, rng):
        with pytest.raises(ValueError):
            harness.random_prefixed(ring(), "AAAA", 3, rng, field_vars("x", "y"))

    @given(seed=seeds)
    @hypothesis_settings(max_examples=50, deadline=None)
    def test_existential(self, seed):
        phi = harness.random_existential(ring(), 6, Random(seed), closed=True)
        assert mem_fragment(EXISTENTIAL, ring(), phi)
        assert free_variables(phi) == frozenset()

    def test_seeded(self):
        first = [harness.random_formula(ring(), 8, harness.corpus_rng(3)) for _ in range(3)]
        second = [harness.random_formula(ring(), 8, harness.corpus_rng(3)) for _ in range(3)]
        assert first == second


class TestEnumeration:
    """Exhaustive enumeration and the bottom-up grammar."""

    def test_smallest_first(self, small_universe):
        sizes = [size(phi) for phi in small_universe]
        assert sizes == sorted(sizes)
        assert small_universe[0] == EDGE
        assert len(small_universe) == len(set(small_universe))

    def test_counts(self):
        # size 2: ¬E, ∀u E, ∃u E
        assert len(harness.enumerate_formulas(2, [EDGE], [u])) == 4

    def test_closed_under_subformulas(self, small_universe):
        members = set(small_universe)
        for phi in small_universe:
            if isinstance(phi, (Not, Forall, Exists)):
                assert phi.body in members

    @pytest.mark.parametrize("text", ["F0", "E", "A1[E]", "A1 E", "A2 E", "A^2 E", "A E", "Form"])
    def test_grammar_matches_membership(self, small_universe, text):
        d = parse_descriptor(text)
        accepted = {phi for phi in small_universe if mem_fragment(d, None, phi)}
        assert harness.grammar_members(d, small_universe) == accepted

    def test_size_cap(self, small_universe):
        members = harness.grammar_members(parse_descriptor("Form"), small_universe, max_size=2)
        assert all(size(phi) <= 2 for phi in members)


class TestSweeps:
    """Semantic batch checks."""

    def test_prenex_sweep(self, rng):
        formulas = [harness.random_formula(ring(), 6, rng) for _ in range(20)]
        assert harness.check_prenex_equivalence([modular_ring(2), modular_ring(3)], formulas) == []

    def test_prenex_sweep_relative(self, rng):
        formulas = [harness.random_formula(ring(), 6, rng) for _ in range(20)]
        assert harness.check_prenex_equivalence([modular_ring(2)], formulas, EXISTENTIAL) == []

    def test_universal_closure(self):
        structure = modular_ring(3)
        phi = parse_formula("(= (* x 0) 0)", ring())
        assert harness.universal_closure_agrees(structure, phi, parse_formula("true", ring()))
        assert not harness.universal_closure_agrees(structure, phi, parse_formula("false", ring()))


class TestReductionCases:
    """Postconditions of every constructed reduction."""

    def test_case_names(self):
        names = [case.name for case in harness.reduction_cases()]
        assert len(names) == len(set(names)) == 10

    @pytest.mark.parametrize("case", harness.reduction_cases(), ids=lambda case: case.name)
    def test_case(self, case, rng):
        for _ in range(10):
            phi = case.make_input(rng)
            output_language = vfred.with_uniformizer(case.language) if case.name == "tau-a1e" else None
            assert harness.check_reduction(case, phi, output_language) == []

    def test_batch(self, rng):
        assert harness.check_reductions(3, rng) == []

    def test_catches_wrong_target(self, rng):
        case = harness.reduction_cases()[0]._replace(target=F0)
        phi = case.make_input(rng)
        assert harness.check_reduction(case, phi)
