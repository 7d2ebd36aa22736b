import pytest
from hypothesis import assume, given, strategies as st

from fragcalc.errors import FragmentError, ReductionError
from fragcalc.formula import And, Exists, Forall, RingTerms, Variable, eq
from fragcalc.fpalg import (
    Poly, RatFunc, RingEvaluator, chi_image, enumerate_height, exists_bounded, is_prime,
    is_pth_power, poly_gcd, prime_power, pth_root_decompose, recompose,
)
from fragcalc.models import SearchStatus
from fragcalc.pcoding import chi_formula, pi_formula
from fragcalc.signature import FIELD_RING, LiteralDomain
from fragcalc.syntax import make_literal

R = RingTerms(FIELD_RING)
primes = st.sampled_from([2, 3, 5])


@st.composite
def rational_functions(draw, p=None):
    p = p or draw(primes)
    num = draw(st.lists(st.integers(0, p - 1), max_size=5))
    den = draw(st.lists(st.integers(0, p - 1), min_size=1, max_size=4))
    assume(any(den))
    return RatFunc.from_coeffs(p, num, den)


def literal(f):
    return make_literal(LiteralDomain(kind="Fp(s)", p=f.p), f)


class TestArithmetic:
    """Exact arithmetic in F_p[s] and F_p(s)."""

    def test_primes(self):
        assert [n for n in range(12) if is_prime(n)] == [2, 3, 5, 7, 11]
        assert prime_power(8) == (2, 3)
        assert prime_power(9) == (3, 2)
        assert prime_power(12) is None

    def test_poly_division(self):
        a = Poly.of(3, [1, 0, 1])
        b = Poly.of(3, [1, 1])
        q, r = a.divmod(b)
        assert q * b + r == a
        assert r.degree < b.degree

    def test_gcd_is_monic(self):
        a = Poly.of(5, [0, 2]) * Poly.of(5, [1, 1])
        b = Poly.of(5, [0, 3])
        assert poly_gcd(a, b) == Poly.of(5, [0, 1])

    def test_canonical_form(self):
        f = RatFunc.from_coeffs(2, [0, 1, 1], [0, 1])
        assert f == RatFunc.from_coeffs(2, [1, 1])
        assert f.den.coeffs == (1,)

    def test_literal_text(self):
        f = RatFunc.from_coeffs(2, [0, 1], [1, 1])
        assert f.literal() == "{0 1 / 1 1 @ 2}"

    def test_zero_denominator(self):
        with pytest.raises(ZeroDivisionError):
            RatFunc.from_coeffs(3, [1], [0])
        with pytest.raises(ZeroDivisionError):
            RatFunc.constant(3, 0).inverse()

    @given(rational_functions(p=3), rational_functions(p=3), rational_functions(p=3))
    def test_field_laws(self, f, g, h):
        assert (f + g) * h == f * h + g * h
        assert f - f == RatFunc.constant(3, 0)
        if not g.is_zero():
            assert (f / g) * g == f

    def test_height(self):
        assert RatFunc.from_coeffs(2, [1, 0, 1], [1, 1]).height == 2
        assert RatFunc.constant(5, 3).height == 0

    def test_enumerate_height(self):
        elements = enumerate_height(2, 1)
        assert len(set(elements)) == len(elements)
        assert all(f.height <= 1 for f in elements)
        assert RatFunc.from_coeffs(2, [1], [1, 1]) in elements
        assert [f.height for f in elements] == sorted(f.height for f in elements)


class TestDecomposition:
    """The p-th power decomposition and the coding surjection."""

    @given(rational_functions())
    def test_reconstruction(self, f):
        assert recompose(f.p, pth_root_decompose(f.p, f)) == f

    @given(rational_functions())
    def test_uniqueness(self, f):
        parts = pth_root_decompose(f.p, f)
        assert pth_root_decompose(f.p, recompose(f.p, parts)) == parts

    @given(rational_functions())
    def test_pth_powers(self, f):
        assert is_pth_power(f.p, f ** f.p)
        assert not is_pth_power(f.p, f ** f.p * RatFunc.s(f.p)) or f.is_zero()

    def test_wrong_characteristic(self):
        with pytest.raises(ValueError):
            pth_root_decompose(3, RatFunc.s(2))
        with pytest.raises(ReductionError):
            pth_root_decompose(4, RatFunc.s(2))

    def test_chi_image_small_arities(self):
        f = RatFunc.from_coeffs(3, [1, 2, 0, 1])
        assert chi_image(3, 0, f) == ()
        assert chi_image(3, 1, f) == (f,)

    @given(rational_functions(p=2), rational_functions(p=2))
    def test_chi_surjective(self, y1, y2):
        assert chi_image(2, 2, recompose(2, [y1, y2])) == (y1, y2)

    @given(rational_functions(p=3), rational_functions(p=3), rational_functions(p=3))
    def test_chi_surjective_arity_three(self, y1, y2, y3):
        zero = RatFunc.constant(3, 0)
        w = recompose(3, [y2, zero, y3])
        x = recompose(3, [y1, zero, w])
        assert chi_image(3, 3, x) == (y1, y2, y3)


class TestWitnessSearch:
    """Bounded search for witnesses of existential formulas over F_p(s)."""

    def test_square_root_found(self):
        x = Variable("x", "field")
        target = literal(RatFunc.from_coeffs(3, [1, 2, 1]))
        phi = Exists(x, eq(R.mul(x, x), target))
        result = exists_bounded(phi, 1)
        assert result.sat
        assert result.witnesses["x"] ** 2 == RatFunc.from_coeffs(3, [1, 2, 1])

    def test_propagation_refutes(self):
        x = Variable("x", "field")
        one, two = literal(RatFunc.constant(3, 1)), literal(RatFunc.constant(3, 2))
        phi = Exists(x, And(eq(x, one), eq(x, two)))
        assert exists_bounded(phi, 1).status == SearchStatus.REFUTED

    def test_incomplete_search_is_unknown(self):
        x = Variable("x", "field")
        phi = Exists(x, eq(R.mul(x, x), literal(RatFunc.s(2))))
        result = exists_bounded(phi, 1)
        assert result.status == SearchStatus.UNKNOWN
        assert result.candidates_tried > 0

    def test_needs_characteristic(self):
        x = Variable("x", "field")
        with pytest.raises(ReductionError):
            exists_bounded(Exists(x, eq(x, x)))
        assert exists_bounded(Exists(x, eq(x, x)), 0, p=2).sat

    def test_rejects_universal(self):
        x = Variable("x", "field")
        with pytest.raises(FragmentError):
            exists_bounded(Forall(x, eq(x, x)), 0, p=2)

    @given(rational_functions(p=2))
    def test_chi_graph(self, x):
        ys = chi_image(2, 3, x)
        phi = chi_formula(2, 1, 3, literal(x), [literal(y) for y in ys], [literal(RatFunc.s(2))])
        assert exists_bounded(phi, 0).sat

    @given(rational_functions(p=2))
    def test_chi_functional(self, x):
        y1, y2 = chi_image(2, 2, x)
        wrong = y1 + RatFunc.constant(2, 1)
        phi = chi_formula(2, 1, 2, literal(x), [literal(wrong), literal(y2)], [literal(RatFunc.s(2))])
        assert exists_bounded(phi, 0).status == SearchStatus.REFUTED

    @pytest.mark.parametrize("f", [f for f in enumerate_height(2, 1) if not f.is_zero()])
    def test_pi_defines_pth_powers(self, f):
        result = exists_bounded(pi_formula(2, 1, [literal(f)]), 1)
        assert result.sat == is_pth_power(2, f)

    def test_evaluator(self):
        ev = RingEvaluator(5)
        x = Variable("x", "field")
        value = ev.term(R.mul(x, x), {"x": RatFunc.s(5)})
        assert value == RatFunc.s(5) ** 2
