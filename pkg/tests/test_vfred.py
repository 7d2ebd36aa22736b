from random import Random

import pytest
from hypothesis import given, settings as hypothesis_settings, strategies as st

from fragcalc import harness
from fragcalc.errors import FragmentError, ReductionError
from fragcalc.formula import (
    TOP, Apply, And, Constant, Exists, Forall, Or, RingTerms, bound_variables, conjuncts,
    constants_of, eq, exists_many, forall_many, free_variables, include, quantifier_count, well_sorted,
)
from fragcalc.fragments import EXISTENTIAL, F0, mem_fragment, parse_descriptor
from fragcalc.signature import (
    FIELD_RING, RESIDUE_RING, LanguageInclusion, constant_inclusion, graph, residue_ring, ring, val,
)
from fragcalc.structures import evaluate, finite_field
from fragcalc.vfred import (
    drop_pi_closed_target, drop_pi_source, drop_pi_target, eta_q, finite_residue_source,
    finite_residue_target, tau_A1E_to_E, tau_drop_pi, tau_drop_pi_closed, tau_finite_residue,
    uniformizer_formula, with_uniformizer,
)
from tests.conftest import field_vars, residue_vars, seeds

x, y, z, u = field_vars("x", "y", "z", "u")
k1, k2 = residue_vars("k1", "k2")
R = RingTerms(FIELD_RING)
t = Constant("t", FIELD_RING.sort)


def res(term):
    return Apply("res", (term,), RESIDUE_RING.sort)


def strip_exists(phi):
    while isinstance(phi, Exists):
        phi = phi.body
    return phi


class TestUniformizer:
    """The formula defining uniformizers and dropping the constant t."""

    def test_uniformizer_formula(self):
        uniformizer = uniformizer_formula()
        assert free_variables(uniformizer.nu) == {uniformizer.x}
        assert quantifier_count(uniformizer.eta) == 0
        assert well_sorted(val(), uniformizer.nu) == []

    def test_with_uniformizer(self):
        language = with_uniformizer(val())
        assert language.symbol("t") is not None
        assert with_uniformizer(language) is language

    def test_existential(self):
        phi = Exists(z, eq(R.mul(z, t), R.add(u, R.one())))
        out = tau_drop_pi(0, EXISTENTIAL, phi, with_uniformizer(val()))
        assert mem_fragment(drop_pi_target(0, EXISTENTIAL), val(), out)
        assert "t" not in {c.name for c in constants_of(out)}
        assert free_variables(out) == {u}

    def test_vacuous_binder(self):
        phi = eq(t, u)
        out = tau_drop_pi(0, EXISTENTIAL, phi, with_uniformizer(val()))
        assert isinstance(out, Forall) and isinstance(out.body, Exists)
        assert mem_fragment(drop_pi_target(0, EXISTENTIAL), val(), out)

    def test_leading_universals(self):
        phi = Forall(y, Exists(z, eq(R.mul(z, y), t)))
        assert mem_fragment(drop_pi_source(1, EXISTENTIAL), None, phi)
        out = tau_drop_pi(1, EXISTENTIAL, phi, with_uniformizer(val()))
        assert mem_fragment(drop_pi_target(1, EXISTENTIAL), val(), out)
        assert [v.name for v in bound_variables(out)][:3] == ["x", "y", "z"]

    def test_rejects(self):
        language = with_uniformizer(val())
        with pytest.raises(ReductionError):
            tau_drop_pi(-1, EXISTENTIAL, eq(t, t), language)
        with pytest.raises(FragmentError):
            tau_drop_pi(1, EXISTENTIAL, Forall(y, Forall(z, Exists(u, eq(y, t)))), language)

    def test_closed(self):
        language = with_uniformizer(val())
        left = Exists(z, eq(z, t))
        right = Exists(y, eq(R.mul(y, t), R.one()))
        out = tau_drop_pi_closed(0, EXISTENTIAL, Or(left, And(right, TOP)), language)
        assert mem_fragment(drop_pi_closed_target(0, EXISTENTIAL), val(), out)
        assert "t" not in {c.name for c in constants_of(out)}

    def test_closed_rejects(self):
        with pytest.raises(FragmentError):
            tau_drop_pi_closed(0, EXISTENTIAL, Forall(x, Forall(y, eq(x, y))))

    @given(seed=seeds)
    @hypothesis_settings(max_examples=40, deadline=None)
    def test_random_inputs(self, seed):
        language = with_uniformizer(val())
        phi = harness.random_existential(language, 4, Random(seed), field_vars("x", "y", "z"))
        out = tau_drop_pi(0, EXISTENTIAL, phi, language)
        assert well_sorted(val(), out) == []
        assert mem_fragment(drop_pi_target(0, EXISTENTIAL), None, out)
        assert free_variables(out) == free_variables(phi)


class TestA1EToExistential:
    """A1 E sentences about (K, v) with finite residue field."""

    @pytest.mark.parametrize("q", [2, 3, 4])
    def test_output(self, q):
        phi = Forall(x, Exists(y, eq(R.mul(x, y), R.one())))
        out = tau_A1E_to_E(q, val(), phi)
        assert mem_fragment(EXISTENTIAL, with_uniformizer(val()), out)
        assert free_variables(out) == frozenset()

    def test_existential_sentence(self):
        phi = Exists(y, eq(y, R.one()))
        out = tau_A1E_to_E(2, val(), phi)
        assert mem_fragment(EXISTENTIAL, with_uniformizer(val()), out)

    def test_rejects(self):
        phi = Forall(x, Exists(y, eq(x, y)))
        with pytest.raises(ReductionError):
            tau_A1E_to_E(6, val(), phi)
        with pytest.raises(ReductionError):
            tau_A1E_to_E(2, graph(), phi)
        with pytest.raises(FragmentError):
            tau_A1E_to_E(2, val(), Exists(y, eq(x, y)))

    @given(seed=seeds, q=st.sampled_from([2, 3, 4]))
    @hypothesis_settings(max_examples=40, deadline=None)
    def test_commutes_with_language_inclusion(self, seed, q):
        inclusion = constant_inclusion(val(), ["c"], FIELD_RING.sort)
        phi = harness.random_prefixed(val(), "AE", 5, Random(seed), field_vars("x", "y"))
        widened = tau_A1E_to_E(q, inclusion.sup, include(phi, inclusion))
        outputs = LanguageInclusion.of(with_uniformizer(inclusion.sub), with_uniformizer(inclusion.sup))
        assert widened == include(tau_A1E_to_E(q, inclusion.sub, phi), outputs)

    @pytest.mark.parametrize("q", [2, 3, 4, 5])
    def test_eta_q_lists_the_field(self, q):
        zs = field_vars(*(f"z{j}" for j in range(1, q + 1)))
        phi = eta_q(q, zs)
        field = finite_field(q)
        assert evaluate(field, exists_many(zs, phi))


class TestFiniteResidue:
    """A^k F to E^k[F] over a residue field with q elements."""

    def test_copies(self):
        phi = forall_many([k1, k2], eq(k1, k2))
        out = tau_finite_residue(3, F0, residue_ring(), phi)
        assert mem_fragment(finite_residue_target(F0), residue_ring(), out)
        assert len(conjuncts(strip_exists(out))) == 3 + 9

    def test_keeps_free_field_variables(self):
        phi = Forall(k1, eq(res(u), k1))
        out = tau_finite_residue(2, F0, val(), phi)
        assert free_variables(out) == {u}
        assert mem_fragment(finite_residue_target(F0), val(), out)

    def test_source_fragment(self):
        source = finite_residue_source(EXISTENTIAL)
        assert mem_fragment(source, None, Forall(k1, Exists(k2, eq(k1, k2))))
        assert not mem_fragment(source, None, Forall(x, eq(x, x)))

    def test_rejects(self):
        phi = Forall(k1, eq(k1, k1))
        with pytest.raises(ReductionError):
            tau_finite_residue(6, F0, residue_ring(), phi)
        with pytest.raises(ReductionError):
            tau_finite_residue(2, F0, ring(), Forall(x, eq(x, x)))
        with pytest.raises(FragmentError):
            tau_finite_residue(2, F0, val(), Forall(x, eq(x, x)))

    @pytest.mark.parametrize("q", [2, 3, 4])
    @given(seed=seeds, r=st.integers(min_value=1, max_value=2))
    @hypothesis_settings(max_examples=30, deadline=None)
    def test_agrees_on_finite_fields(self, q, seed, r):
        language = residue_ring()
        pool = [k1, k2][:r]
        matrix = harness.random_quantifier_free(language, 5, Random(seed), pool)
        phi = forall_many(pool, matrix)
        structure = finite_field(q, RESIDUE_RING)
        reduced = tau_finite_residue(q, F0, language, phi)
        assert evaluate(structure, phi) == evaluate(structure, reduced)

    def test_sorted_descriptor_text(self):
        assert finite_residue_target(F0) == parse_descriptor("E@k[F0]")
