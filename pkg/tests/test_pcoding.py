from random import Random

import pytest
from hypothesis import given, settings as hypothesis_settings

from fragcalc import harness
from fragcalc.errors import FragmentError, ReductionError
from fragcalc.formula import (
    TOP, Exists, Forall, RingTerms, Variable, eq, free_variables, well_sorted,
)
from fragcalc.fragments import EXISTENTIAL, F0, mem_fragment, parse_descriptor
from fragcalc.pcoding import (
    check_gamma, chi, choose_nu, eta_nu, fresh_field, pi, pi_prime, target_fragment, tau_funcfield,
    tau_noparam, tau_param,
)
from fragcalc.signature import FIELD_RING, extend_with_constants, ring
from tests.conftest import field_vars, seeds

x, y, z, w = field_vars("x", "y", "z", "w")
R = RingTerms(FIELD_RING)
SQUARES = Exists(w, eq(x, R.mul(w, w)))


def ring_c(n):
    return extend_with_constants(ring(), [f"c{i}" for i in range(1, n + 1)], FIELD_RING.sort)


def names(phi):
    return {v.name for v in free_variables(phi)}


class TestCodingFormulas:
    """The coding formulas chi and pi."""

    def test_trivial_arities(self):
        assert chi(2, 1, 0) == TOP
        assert chi(2, 1, 1) == eq(x, Variable("y1", "field"))

    @pytest.mark.parametrize("p,n,r", [(2, 1, 2), (3, 1, 3), (2, 2, 4)])
    def test_chi_shape(self, p, n, r):
        phi = chi(p, n, r)
        expected = {"x"} | {f"y{i}" for i in range(1, r + 1)} | {f"z{j}" for j in range(1, n + 1)}
        assert names(phi) == expected
        assert mem_fragment(EXISTENTIAL, ring(), phi)

    def test_pi_shape(self):
        phi = pi(2, 2)
        assert names(phi) == {"z1", "z2"}
        assert mem_fragment(EXISTENTIAL, ring(), phi)

    @pytest.mark.parametrize("p,n", [(4, 1), (2, 0), (1, 1)])
    def test_bad_parameters(self, p, n):
        with pytest.raises(ReductionError):
            pi(p, n)

    def test_fresh_field(self):
        taken = {"w", "x"}
        assert fresh_field("w", taken).name == "w'0"
        assert fresh_field("z", taken).name == "z"
        assert {"w'0", "z"} <= taken


class TestParamReduction:
    """p-basis coding with the basis named by constants."""

    def test_output_fragment(self):
        phi = Forall(x, Forall(y, Exists(z, eq(R.mul(x, z), y))))
        out = tau_param(2, 1, ring_c(1), EXISTENTIAL, phi)
        assert mem_fragment(parse_descriptor("A1[E]"), ring_c(1), out)
        assert free_variables(out) == free_variables(phi)

    def test_keeps_free_variables(self):
        u = Variable("u", "field")
        phi = Forall(x, Exists(z, eq(R.add(x, z), u)))
        out = tau_param(3, 1, ring_c(1), EXISTENTIAL, phi)
        assert free_variables(out) == {u}

    def test_binder_avoids_input_names(self):
        phi = Forall(w, eq(w, w))
        out = tau_param(2, 1, ring_c(1), EXISTENTIAL, phi)
        assert out.var.name != "w"

    def test_missing_constant(self):
        with pytest.raises(ReductionError, match="c1"):
            tau_param(2, 1, ring(), EXISTENTIAL, Forall(x, eq(x, x)))

    def test_wrong_constant_count(self):
        with pytest.raises(ReductionError):
            tau_param(2, 2, ring_c(1), EXISTENTIAL, Forall(x, eq(x, x)), ["c1"])

    def test_input_not_universal(self):
        with pytest.raises(FragmentError):
            tau_param(2, 1, ring_c(1), EXISTENTIAL, Exists(x, Forall(y, eq(x, y))))

    def test_fragment_must_absorb_exists(self):
        with pytest.raises(FragmentError):
            tau_param(2, 1, ring_c(1), F0, Forall(x, eq(x, x)))

    @hypothesis_settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_random_inputs(self, seed):
        phi = harness.random_prefixed(ring_c(1), "AAE", 6, Random(seed))
        out = tau_param(2, 1, ring_c(1), EXISTENTIAL, phi)
        assert well_sorted(ring_c(1), out) == []
        assert mem_fragment(target_fragment("tau-param", EXISTENTIAL), None, out)


class TestNoParamReduction:
    """p-basis coding quantifying over candidate bases."""

    @pytest.mark.parametrize("n", [1, 2])
    def test_output_fragment(self, n):
        phi = Forall(x, Forall(y, Exists(z, eq(R.mul(x, z), y))))
        out = tau_noparam(2, n, ring(), EXISTENTIAL, phi)
        assert mem_fragment(target_fragment("tau-noparam", EXISTENTIAL, n=n), ring(), out)
        assert not mem_fragment(parse_descriptor(f"A{n}[E]"), None, out)
        assert free_variables(out) == set()

    def test_universal_alternation(self):
        phi = Forall(x, Exists(y, Forall(z, eq(x, R.add(y, z)))))
        out = tau_noparam(3, 1, ring(), parse_descriptor("E A E"), phi)
        assert mem_fragment(parse_descriptor("A2[E A E]"), None, out)


class TestFunctionFields:
    """Coding over function fields of varieties."""

    def test_check_gamma(self):
        assert check_gamma(SQUARES) == x
        with pytest.raises(ReductionError):
            check_gamma(eq(x, y))
        with pytest.raises(ReductionError):
            check_gamma(Forall(w, eq(x, w)))

    @pytest.mark.parametrize("p,r,nu", [(2, 1, 1), (2, 2, 1), (2, 3, 2), (3, 9, 2), (3, 10, 3)])
    def test_choose_nu(self, p, r, nu):
        assert choose_nu(p, r) == nu

    def test_eta_width(self):
        phi = eta_nu(2, 1, 1, SQUARES)
        assert names(phi) == {"x"}
        assert mem_fragment(EXISTENTIAL, None, phi)

    def test_pi_prime(self):
        phi = pi_prime(2, 2, SQUARES, 1)
        assert names(phi) == {"z1", "z2"}
        assert mem_fragment(EXISTENTIAL, None, phi)

    @pytest.mark.parametrize("d", [1, 2])
    def test_output_fragment(self, d):
        phi = Forall(x, Forall(y, Exists(z, eq(R.mul(x, z), y))))
        out = tau_funcfield(2, 1, d, SQUARES, EXISTENTIAL, phi, ring())
        assert mem_fragment(target_fragment("tau-ff", EXISTENTIAL, d=d), ring(), out)

    def test_fragment_must_alternate_from_exists(self):
        with pytest.raises(FragmentError):
            tau_funcfield(2, 1, 1, SQUARES, parse_descriptor("A E"), Forall(x, eq(x, x)))

    def test_dimension(self):
        with pytest.raises(ReductionError):
            tau_funcfield(2, 1, 0, SQUARES, EXISTENTIAL, Forall(x, eq(x, x)))
