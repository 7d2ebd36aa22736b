from fractions import Fraction
from random import Random

import pytest
from hypothesis import given, strategies as st

from fragcalc import harness
from fragcalc.errors import DecodeFailure, SignatureError
from fragcalc.formula import BOT, TOP, Exists, Not, RingTerms, eq
from fragcalc.fpalg import RatFunc
from fragcalc.godel import (
    decode_element, encode_element, godel_decode, godel_encode, pack, pair, unpack, unpair,
)
from fragcalc.signature import (
    FIELD_RING, LiteralDomain, extend_with_constants, graph, ring, val, with_literals, with_presentation,
)
from fragcalc.syntax import make_literal
from tests.conftest import field_vars, seeds

x, y = field_vars("x", "y")
R = RingTerms(FIELD_RING)


def presented(factory):
    return lambda: with_presentation(factory())


LANGUAGES = {
    "ring": presented(ring),
    "ring+t": presented(lambda: extend_with_constants(ring(), ["t"], "field")),
    "val": presented(val),
    "val+t": presented(lambda: extend_with_constants(val(), ["t"], "field")),
    "graph": presented(graph),
}


class TestCodes:
    """Pairing and self-delimiting token codes."""

    @given(st.integers(0, 10 ** 6), st.integers(0, 10 ** 6))
    def test_pairing(self, a, b):
        assert unpair(pair(a, b)) == (a, b)

    @given(st.lists(st.integers(0, 10 ** 4)))
    def test_pack(self, tokens):
        assert unpack(pack(tokens)) == tokens

    def test_pack_rejects_negative(self):
        with pytest.raises(ValueError):
            pack([1, -1])

    @given(st.fractions())
    def test_rationals(self, value):
        domain = LiteralDomain(kind="Q")
        assert decode_element(domain, encode_element(domain, value)) == value

    @given(st.lists(st.integers(0, 2), max_size=5), st.lists(st.integers(0, 2), min_size=1, max_size=4))
    def test_rational_functions(self, num, den):
        if not any(den):
            den = [1]
        f = RatFunc.from_coeffs(3, num, den)
        domain = LiteralDomain(kind="Fp(s)", p=3)
        assert decode_element(domain, encode_element(domain, f)) == f


class TestFormulaCodes:
    """Coding formulas over presented languages."""

    @pytest.mark.parametrize("name", sorted(LANGUAGES))
    @given(seed=seeds)
    def test_round_trip(self, name, seed):
        language = LANGUAGES[name]()
        phi = harness.random_formula(language, 8, Random(seed))
        assert godel_decode(language, godel_encode(language, phi)) == phi

    def test_literals(self):
        language = with_presentation(with_literals(ring(), LiteralDomain(kind="Q")))
        phi = Exists(x, eq(R.mul(x, x), make_literal(LiteralDomain(kind="Q"), Fraction(-7, 3))))
        assert godel_decode(language, godel_encode(language, phi)) == phi

    def test_injective(self):
        language = LANGUAGES["ring"]()
        rng = Random(11)
        corpus = {harness.random_formula(language, 6, rng) for _ in range(300)}
        codes = {godel_encode(language, phi) for phi in corpus}
        assert len(codes) == len(corpus)

    def test_presentation_matters(self):
        language = LANGUAGES["ring"]()
        phi = eq(R.add(x, y), R.one())
        swapped = dict(language.presentation_map())
        swapped["+"], swapped["*"] = swapped["*"], swapped["+"]
        assert godel_encode(language, phi) != godel_encode(language, phi, swapped)
        assert godel_decode(language, godel_encode(language, phi, swapped), swapped) == phi

    def test_needs_presentation(self):
        with pytest.raises(SignatureError):
            godel_encode(ring(), eq(x, x))

    @pytest.mark.parametrize("code", [0, 1, 2, 5, 1234567])
    def test_non_codes(self, code):
        result = godel_decode(LANGUAGES["ring"](), code)
        assert isinstance(result, DecodeFailure)
        assert not result

    def test_deep_nesting_round_trips(self):
        language = LANGUAGES["ring"]()
        phi = BOT
        for _ in range(200):
            phi = Not(phi)
        assert godel_decode(language, godel_encode(language, phi)) == phi

    @pytest.mark.parametrize("tokens", [[4] * 5000 + [0], [4] * 5000, [5] * 3000 + [0] * 3001])
    def test_very_deep_codes_fail_cleanly(self, tokens):
        result = godel_decode(LANGUAGES["ring"](), pack(tokens))
        assert isinstance(result, DecodeFailure)

    def test_encoding_is_not_depth_limited(self):
        phi = TOP
        for _ in range(5000):
            phi = Not(phi)
        assert unpack(godel_encode(LANGUAGES["ring"](), phi)) == [4] * 5000 + [0]
