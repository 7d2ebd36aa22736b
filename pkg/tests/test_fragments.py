import pytest
from hypothesis import given, settings as hypothesis_settings

from fragcalc import harness
from fragcalc.errors import FormulaSyntaxError, FragmentError, SortError
from fragcalc.formula import (
    And, Apply, Atom, Exists, Forall, Not, Or, RingTerms, Variable, eq, forall_many,
    free_variables, quantifier_count,
)
from fragcalc.fragments import (
    EXISTENTIAL, F0, FORM, BlockMode, alternation_pattern, format_descriptor, is_alternating_from,
    is_exists_absorbing, leading_block, mem_fragment, mem_negation_closure, normalize, parse_descriptor,
    prenex_rank, prenex_split, prnx, relativize,
)
from fragcalc.signature import FIELD_RING, ring
from fragcalc.structures import modular_ring, tournament_sentence
from tests.conftest import field_vars, residue_vars, ring_formulas, vertex_vars

x, y, z = field_vars("x", "y", "z")
a, b = residue_vars("a", "b")
u, v = vertex_vars("u", "v")
R = RingTerms(FIELD_RING)
E_uv = Atom("E", (u, v))


def member(text, phi):
    return mem_fragment(parse_descriptor(text), None, phi)


@pytest.fixture(scope="module")
def universe():
    return harness.enumerate_formulas(7, [E_uv], [u])


class TestDescriptors:
    """Descriptor text, normalization and shape tests."""

    @pytest.mark.parametrize("text", ["F0", "Form", "E", "A E", "A1[E]", "A2 E", "A^2 E", "A1@k E", "A@k E", "E1[F0]"])
    def test_format_round_trip(self, text):
        assert format_descriptor(parse_descriptor(text)) == text

    def test_modes(self):
        assert parse_descriptor("A2 E").head.mode == BlockMode.CLOSED
        assert parse_descriptor("A^2 E").head.mode == BlockMode.NESTED
        assert parse_descriptor("A1[E]").head.mode == BlockMode.PREFIX
        assert parse_descriptor("A@k E").head.sort == "residue"
        assert parse_descriptor("E") == EXISTENTIAL

    @pytest.mark.parametrize("text,error", [
        ("A^2[E]", FragmentError),
        ("A0 E", FragmentError),
        ("X", FormulaSyntaxError),
        ("A1[", FormulaSyntaxError),
    ])
    def test_bad_descriptors(self, text, error):
        with pytest.raises(error):
            parse_descriptor(text)

    def test_normalize(self):
        assert normalize(parse_descriptor("E E")) == parse_descriptor("E")
        assert normalize(parse_descriptor("A^1 E")) == parse_descriptor("A1 E")

    def test_exists_absorbing(self):
        assert is_exists_absorbing(EXISTENTIAL)
        assert is_exists_absorbing(parse_descriptor("E A E"))
        assert is_exists_absorbing(FORM)
        assert not is_exists_absorbing(F0)
        assert not is_exists_absorbing(parse_descriptor("A E"))

    def test_alternation(self):
        assert is_alternating_from(parse_descriptor("A E"), "forall")
        assert not is_alternating_from(parse_descriptor("A1 E"), "forall")
        assert alternation_pattern(parse_descriptor("A2 E")) == "AE"


class TestMembership:
    """Membership in prefix, closed, nested and unbounded fragments."""

    def test_quantifier_free_base(self):
        assert member("F0", Or(Not(eq(x, y)), eq(y, z)))
        assert not member("F0", Exists(x, eq(x, y)))

    def test_existential(self):
        assert member("E", Exists(x, Exists(y, eq(x, y))))
        assert member("E", And(Exists(x, eq(x, y)), Or(eq(z, z), Exists(z, eq(z, x)))))
        assert not member("E", Not(Exists(x, eq(x, y))))
        assert not member("E", Forall(x, eq(x, x)))

    def test_prefix_has_no_closure(self):
        phi = And(Forall(x, Exists(y, eq(x, y))), Forall(z, eq(z, z)))
        assert not member("A1[E]", phi)
        assert member("A1 E", phi)
        assert member("A1[E]", Forall(x, Exists(y, eq(x, y))))

    def test_block_bound(self):
        phi = forall_many([x, y], Exists(z, eq(x, z)))
        assert member("A2 E", phi)
        assert not member("A1 E", phi)
        assert not member("A2 E", Forall(x, Forall(y, Forall(z, Exists(z, eq(x, z))))))

    def test_nested_against_closed(self):
        phi = Forall(u, Or(Forall(v, Not(E_uv)), Forall(v, Not(Atom("E", (v, u))))))
        assert member("A^2 E", phi)
        assert not member("A2 E", phi)

    def test_tournament_sentence(self):
        sigma = tournament_sentence()
        assert member("A^2 E", sigma)
        assert not member("A2 E", sigma)
        assert member("A E", sigma)

    def test_sorted_block(self):
        phi = Forall(a, Exists(x, eq(Apply("res", (x,), "residue"), a)))
        assert member("A1@k E", phi)
        assert not member("A1@k E", Forall(x, Exists(a, eq(Apply("res", (x,), "residue"), a))))

    def test_full(self):
        assert mem_fragment(FORM, None, Not(Forall(x, Exists(y, eq(x, y)))))

    def test_ill_sorted_raises(self):
        with pytest.raises(SortError):
            mem_fragment(EXISTENTIAL, ring(), Exists(a, eq(a, a)))

    def test_negation_closure(self):
        phi = Not(Exists(x, eq(x, y)))
        assert mem_negation_closure(EXISTENTIAL, phi)
        assert not mem_negation_closure(EXISTENTIAL, Exists(x, Not(Exists(y, eq(x, y)))))

    @pytest.mark.parametrize("text", ["E", "A1[E]", "A1 E", "A2 E", "A^2 E", "A E"])
    def test_grammar_agrees_with_membership(self, universe, text):
        d = parse_descriptor(text)
        accepted = {phi for phi in universe if mem_fragment(d, None, phi)}
        assert harness.grammar_members(d, universe) == accepted


class TestPrenex:
    """Prenex forms relative to a fragment."""

    def test_existential_subformulas_untouched(self):
        phi = And(Forall(x, eq(x, x)), Exists(y, eq(y, R.one())))
        assert prnx(EXISTENTIAL, None, phi) == Forall(x, And(eq(x, x), Exists(y, eq(y, R.one()))))

    def test_member_unchanged(self):
        phi = And(Exists(x, eq(x, y)), Exists(z, eq(z, y)))
        assert prnx(EXISTENTIAL, None, phi) == phi

    def test_capture_renames_binder(self):
        phi = And(Forall(x, eq(x, y)), eq(x, R.one()))
        out = prnx(F0, None, phi)
        assert isinstance(out, Forall)
        assert out.var.name == "x'0"
        assert out.body == And(eq(Variable("x'0", "field"), y), eq(x, R.one()))

    def test_negation_dualizes(self):
        out = prnx(F0, None, Not(Forall(x, eq(x, y))))
        assert out == Exists(x, Not(eq(x, y)))

    def test_split_gives_distinct_binders(self):
        phi = Exists(x, Exists(x, eq(x, y)))
        prefix, matrix = prenex_split(F0, None, phi)
        assert len({var.name for _, var in prefix}) == 2
        assert matrix == eq(x, y)

    def test_leading_block(self):
        prefix = [("forall", x), ("forall", y), ("exists", z)]
        run, rest = leading_block(prefix, "forall")
        assert run == [x, y]
        assert rest == [("exists", z)]

    @given(ring_formulas)
    def test_quantifier_free_matrix(self, phi):
        prefix, matrix = prenex_split(F0, ring(), phi)
        assert mem_fragment(F0, None, matrix)
        assert len(prefix) == quantifier_count(phi)
        assert prenex_rank(F0, None, phi) == len(prefix)

    @given(ring_formulas)
    def test_free_variables_preserved(self, phi):
        assert free_variables(prnx(F0, None, phi)) == free_variables(phi)

    @hypothesis_settings(max_examples=40, deadline=None)
    @given(ring_formulas)
    def test_equivalent_in_small_rings(self, phi):
        structures = [modular_ring(2), modular_ring(3)]
        assert harness.check_prenex_equivalence(structures, [phi]) == []


class TestRelativize:
    """Relativizing quantifiers to a definable set."""

    def test_relativize(self):
        w = Variable("w", "field")
        idempotent = eq(R.mul(w, w), w)
        phi = Forall(x, Exists(y, eq(x, y)))
        out = relativize(phi, idempotent)
        assert out == Forall(x, Or(Not(eq(R.mul(x, x), x)), Exists(y, And(eq(R.mul(y, y), y), eq(x, y)))))

    def test_needs_one_free_variable(self):
        with pytest.raises(FragmentError):
            relativize(Exists(x, eq(x, x)), eq(x, y))
