import json
from random import Random

import pytest
from hypothesis import given, settings as hypothesis_settings

from fragcalc import harness, structures
from fragcalc.errors import EvaluationError, ResourceLimitError, SignatureError, SortError
from fragcalc.formula import Atom, Exists, Forall, Or, RingTerms, conj, eq, forall_many
from fragcalc.models import StructureFile
from fragcalc.signature import FIELD_RING, RESIDUE_RING, graph, ring
from fragcalc.structures import (
    FiniteStructure, assignments, covering_embeddings, digraph_structure, disjoint_union, embeddings,
    evaluate, expansion_cost, finite_field, from_file, gamma2, gamma3, gamma4, modular_ring,
    resolve_structure, to_file, tournament_models, tournament_sentence,
)
from tests.conftest import field_vars, residue_vars, seeds, vertex_vars

x, y = field_vars("x", "y")
u, v = vertex_vars("u", "v")
R = RingTerms(FIELD_RING)
INVERSES = Forall(x, Or(eq(x, R.zero()), Exists(y, eq(R.mul(x, y), R.one()))))


class TestEvaluation:
    """Truth in finite structures."""

    @pytest.mark.parametrize("m,is_field", [(2, True), (3, True), (4, False), (6, False), (7, True)])
    def test_modular_fields(self, m, is_field):
        assert evaluate(modular_ring(m), INVERSES) is is_field

    @pytest.mark.parametrize("q", [4, 8, 9, 16, 25])
    def test_finite_fields(self, q):
        F = finite_field(q)
        assert F.size() == q
        assert evaluate(F, INVERSES)

    def test_characteristic_two(self):
        twice = Forall(x, eq(R.add(x, x), R.zero()))
        assert evaluate(finite_field(4), twice)
        assert not evaluate(modular_ring(4), twice)

    def test_assignment(self):
        phi = eq(R.mul(x, x), x)
        assert evaluate(modular_ring(6), phi, {"x": 3})
        assert not evaluate(modular_ring(6), phi, {x: 2})

    def test_unassigned(self):
        with pytest.raises(EvaluationError, match="not assigned"):
            evaluate(modular_ring(3), eq(x, y), {"x": 1})

    def test_value_outside_carrier(self):
        with pytest.raises(EvaluationError):
            evaluate(modular_ring(3), eq(x, x), {"x": 5})

    def test_ill_sorted(self):
        k, = residue_vars("k")
        with pytest.raises(SortError):
            evaluate(modular_ring(3), Exists(k, eq(k, k)))

    def test_residue_names(self):
        F = finite_field(4, RESIDUE_RING)
        K = RingTerms(RESIDUE_RING)
        a, b = residue_vars("a", "b")
        inverses = Forall(a, Or(eq(a, K.zero()), Exists(b, eq(K.mul(a, b), K.one()))))
        assert F.size("residue") == 4
        assert evaluate(F, inverses)

    def test_budget(self, monkeypatch):
        phi = forall_many(field_vars("a", "b", "c", "d", "e"), eq(x, x))
        assert expansion_cost(modular_ring(7), phi) > 7 ** 5
        monkeypatch.setattr(structures.settings, "eval_node_budget", 1000)
        with pytest.raises(ResourceLimitError):
            evaluate(modular_ring(7), Forall(x, phi))

    def test_assignments_order(self):
        rows = list(assignments(modular_ring(2), [y, x]))
        assert rows == [{"x": 0, "y": 0}, {"x": 0, "y": 1}, {"x": 1, "y": 0}, {"x": 1, "y": 1}]

    def test_bad_tables(self):
        with pytest.raises(EvaluationError):
            FiniteStructure(graph(), {"vertex": (1, 2)}, relations={"E": frozenset({(1, 3)})})
        with pytest.raises(EvaluationError):
            FiniteStructure(graph(), {"vertex": ()})

    def test_bad_field_order(self):
        with pytest.raises(EvaluationError):
            finite_field(6)


class TestEmbeddings:
    """Embedding enumeration between finite structures."""

    def test_tournament_counts(self):
        assert len(embeddings(gamma3(), gamma4())) == 3
        assert len(embeddings(gamma2(), gamma3())) == 3
        assert len(embeddings(gamma3(), gamma2())) == 0

    def test_embeddings_reflect_relations(self):
        path = digraph_structure([0, 1, 2], [(0, 1), (1, 2)], "P3")
        for h in embeddings(path, gamma4()):
            image = h["vertex"]
            assert (image[0], image[2]) not in gamma4().relations["E"]

    def test_partial(self):
        found = embeddings(gamma2(), gamma3(), {"vertex": {1: 2}})
        assert found == [{"vertex": {1: 2, 2: 3}}]

    def test_ring_embeddings(self):
        assert len(embeddings(modular_ring(2), finite_field(4))) == 1
        assert embeddings(modular_ring(3), finite_field(4)) == []

    def test_field_automorphisms(self):
        assert len(embeddings(finite_field(4), finite_field(4))) == 2

    def test_different_languages(self):
        with pytest.raises(EvaluationError):
            embeddings(gamma2(), modular_ring(2))

    def test_covering(self):
        assert covering_embeddings(gamma2(), gamma3(), 2)
        assert not covering_embeddings(gamma3(), gamma4(), 1)

    @pytest.mark.parametrize("small,large", [
        (gamma2, gamma3), (gamma3, gamma4), (gamma2, gamma4),
        (lambda: modular_ring(2), lambda: finite_field(4)),
        (lambda: modular_ring(3), lambda: finite_field(9)),
    ])
    @given(seed=seeds)
    @hypothesis_settings(max_examples=40, deadline=None)
    def test_existential_sentences_go_up(self, small, large, seed):
        a, b = small(), large()
        assert embeddings(a, b)
        if a.language == graph():
            language, pool = graph(), vertex_vars("u", "v", "w")
        else:
            language, pool = ring(), field_vars("x", "y", "z")
        phi = harness.random_existential(language, 6, Random(seed), pool, closed=True)
        if evaluate(a, phi):
            assert evaluate(b, phi)

    def test_existential_truth_need_not_go_down(self):
        (w,) = vertex_vars("w")
        triangle = conj([Atom("E", (u, v)), Atom("E", (v, w)), Atom("E", (w, u))])
        cycle = Exists(u, Exists(v, Exists(w, triangle)))
        assert evaluate(gamma3(), cycle)
        assert not evaluate(gamma2(), cycle)


class TestTournaments:
    """The graphs separating nested from closed universal blocks."""

    @pytest.mark.parametrize("copies", [1, 2, 3])
    def test_separation(self, copies):
        m, n = tournament_models(copies)
        sigma = tournament_sentence()
        assert evaluate(n, sigma)
        assert not evaluate(m, sigma)

    def test_sizes(self):
        m, n = tournament_models(2)
        assert n.size() == 2 * 2 + 2 * 4
        assert m.size() == n.size() + 3

    def test_copies_positive(self):
        with pytest.raises(EvaluationError):
            tournament_models(0)

    def test_union_needs_relations(self):
        with pytest.raises(SignatureError):
            disjoint_union([modular_ring(2)])


class TestLoading:
    """Structure files and builder names."""

    @pytest.mark.parametrize("spec,size", [("gamma3", 3), ("Z/6", 6), ("F9", 9), ("N1", 6), ("M1", 9)])
    def test_resolve(self, spec, size):
        assert resolve_structure(spec).size() == size

    def test_round_trip_file(self, tmp_path):
        data = to_file(modular_ring(3))
        path = tmp_path / "z3.json"
        path.write_text(data.model_dump_json())
        loaded = resolve_structure(str(path))
        assert loaded.functions == modular_ring(3).functions
        assert evaluate(loaded, INVERSES)

    def test_graph_file(self):
        data = StructureFile.model_validate_json(json.dumps({
            "language": "graph", "domains": {"vertex": [0, 1]}, "relations": {"E": [[0, 1]]},
        }))
        s = from_file(data)
        assert evaluate(s, Exists(u, Exists(v, Atom("E", (u, v)))))

    def test_unknown(self):
        with pytest.raises(EvaluationError):
            resolve_structure("nowhere.json")
