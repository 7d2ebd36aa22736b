"""
Function field reductions: between Th_E(k(t), t) and Th_{A1 E}(k(t)), and
from theories of function fields of curves of genus at least two down to the
base field, in characteristic zero and in characteristic p.
"""
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple, Union
import logging

from fragcalc.errors import FragmentError, ReductionError
from fragcalc.formula import (
    And, Constant, Exists, Forall, Formula, Or, RingTerms, TOP, Term, Variable,
    conj, constants_of, disj, eq, exists_many, forall_many, free_variables,
    neq, replace_constants, substitute_terms, variable_names,
)
from fragcalc.fpalg import is_prime, prime_power
from fragcalc.fragments import (
    EXISTENTIAL, FragmentDescriptor, is_alternating_from, mem_fragment,
    prefix_only, prenex_split,
)
from fragcalc.models import CurveDatumFile
from fragcalc.pcoding import check_gamma, fresh_field, gamma_at
from fragcalc.signature import FIELD_RING, Language, LiteralDomain, has_ring, ring, with_literals
from fragcalc.syntax import make_literal

logger = logging.getLogger(__name__)

FORALL_ONE_EXISTS = prefix_only("forall", 1, EXISTENTIAL)
Coefficient = Union[Fraction, int]

_x = Variable("x", FIELD_RING.sort)


# Gamma builders

def gamma_pth_powers(p: int) -> Formula:
    """∃y(x = y^p): defines k in k(t) for perfect k of characteristic p."""
    if not is_prime(p):
        raise ReductionError(f"p must be prime, got {p}")
    y = Variable("y", FIELD_RING.sort)
    return Exists(y, eq(_x, RingTerms(FIELD_RING).power(y, p)))


def gamma_finite_constants(q: int) -> Formula:
    """x^q - x = 0: defines F_q in F_q(t)."""
    if prime_power(q) is None:
        raise ReductionError(f"q must be a prime power, got {q}")
    ring_terms = RingTerms(FIELD_RING)
    return eq(ring_terms.sub(ring_terms.power(_x, q), _x), ring_terms.zero())


# Rational function fields

def split_universal(language: Optional[Language], phi: Formula) -> Tuple[Optional[Variable], Formula]:
    """Split φ = ∀x ψ with ψ existential; existential φ has no x."""
    if not mem_fragment(FORALL_ONE_EXISTS, language, phi):
        raise FragmentError("formula is not in A1[E]")
    if mem_fragment(EXISTENTIAL, None, phi):
        return None, phi
    if isinstance(phi, Forall):
        return phi.var, phi.body
    prefix, matrix = prenex_split(EXISTENTIAL, language, phi)
    if len(prefix) != 1 or not mem_fragment(EXISTENTIAL, None, matrix):
        raise FragmentError("prenex form of the formula is not A x followed by an existential")
    return prefix[0][1], matrix


def enumerates_field(q: int, ys: Sequence[Variable]) -> Formula:
    """⋀ y_i^q - y_i = 0 ∧ ⋀_{i<j} y_i ≠ y_j: the y_i list F_q."""
    ring_terms = RingTerms(FIELD_RING)
    roots = [eq(ring_terms.sub(ring_terms.power(y, q), y), ring_terms.zero()) for y in ys]
    distinct = [neq(ys[i], ys[j]) for i in range(len(ys)) for j in range(i + 1, len(ys))]
    return conj(roots + distinct)


def verum_with(variables: Sequence[Variable]) -> Formula:
    """⊤ carrying the given free variables: ⊤ ∧ ⋀ u = u."""
    return conj([TOP] + [eq(u, u) for u in sorted(variables, key=lambda v: v.name)])


def tau_rat_const(q: Optional[int], phi: Formula, language: Optional[Language] = None,
                  constant: str = "t") -> Tuple[Formula, Formula]:
    """
    Split an A1[E] formula φ = ∀x ψ into (ψ1, ψ2) with ψ1 about (k(t), t) and
    ψ2 about k, such that φ(k(t)) ∩ k^n = ψ1(k(t), t) ∩ ψ2(k) when #k = q.
    q is None for infinite k.
    """
    if q is not None and prime_power(q) is None:
        raise ReductionError(f"q must be a prime power or infinite, got {q}")
    if language is not None and not has_ring(language, FIELD_RING):
        raise ReductionError(f"language {language.name} lacks the ring symbols")
    x, psi = split_universal(language, phi)
    t = Constant(constant, FIELD_RING.sort)

    def psi_at(term: Term) -> Formula:
        return psi if x is None else substitute_terms(psi, {x: term})

    logger.debug(f"tau_rat_const: q={q if q is not None else 'inf'}, universal={x is not None}")
    if q is None:
        return psi_at(t), phi
    taken = variable_names(phi)
    ys = [fresh_field(f"y{i}", taken) for i in range(1, q + 1)]
    phi_q = And(psi_at(t), exists_many(ys, And(enumerates_field(q, ys), conj(psi_at(y) for y in ys))))
    return phi_q, verum_with(free_variables(phi))


def tau_rat_noconst(gamma: Formula, phi: Formula, language: Optional[Language] = None,
                    constant: str = "t") -> Formula:
    """
    Reduce existential formulas about (k(t), t) to A1[E] formulas about k(t),
    given an existential γ(x) defining k: ∀x(ψ(ū, x) ∨ γ(x)).
    """
    if not mem_fragment(EXISTENTIAL, language, phi):
        raise FragmentError("formula is not existential")
    check_gamma(gamma)
    allowed = {FIELD_RING.zero, FIELD_RING.one, constant}
    if language is not None:
        allowed |= {s.name for s in language.constants()}
    stray = sorted(c.name for c in constants_of(phi) if not c.is_literal and c.name not in allowed)
    if stray:
        raise ReductionError(f"constants {stray} are not in the base language")
    x = fresh_field("x", variable_names(phi))
    psi = replace_constants(phi, {constant: x})
    logger.debug(f"tau_rat_noconst: universal variable {x.name}")
    return Forall(x, Or(psi, gamma_at(gamma, x)))


# Curves of genus at least two

@dataclass(frozen=True)
class CurveDatum:
    """
    f(X, Y) = Σ c·X^i·Y^j over Q (p = 0) or F_p. The flags are the caller's
    assertions about the curve and the base field; nothing checks them.
    """
    p: int
    monomials: Tuple[Tuple[int, int, Coefficient], ...]
    genus_at_least_two: bool = False
    separable_in_y: bool = False
    perfect: bool = False

    def __post_init__(self):
        if self.p != 0 and not is_prime(self.p):
            raise ReductionError(f"characteristic must be 0 or prime, got {self.p}")
        if any(i < 0 or j < 0 for i, j, _ in self.monomials):
            raise ReductionError("monomial exponents must be non-negative")

    @classmethod
    def from_file(cls, data: CurveDatumFile) -> "CurveDatum":
        domain = LiteralDomain.parse(data.field)
        if domain.kind == "Fp(s)":
            raise ReductionError(f"curve coefficients must lie in Q or F_p, not {domain.text}")
        monomials = []
        for row in data.monomials:
            if len(row) != 3:
                raise ReductionError(f"monomial must be [i, j, coefficient], got {row}")
            i, j, c = int(row[0]), int(row[1]), Fraction(str(row[2]))
            if domain.kind == "Fp":
                if c.denominator != 1:
                    raise ReductionError(f"coefficient {row[2]} is not an element of {domain.text}")
                c = int(c) % domain.p
            monomials.append((i, j, c))
        return cls(domain.p, tuple(monomials), data.genus_at_least_two, data.separable_in_y, data.perfect)

    @property
    def domain(self) -> LiteralDomain:
        if self.p == 0:
            return LiteralDomain(kind="Q")
        return LiteralDomain(kind="Fp", p=self.p)

    def language(self) -> Language:
        """L_ring(k0) for the prime field k0 carrying the coefficients."""
        return with_literals(ring(), self.domain)

    def is_zero(self) -> bool:
        return all(self.reduce(c) == 0 for _, _, c in self.monomials)

    def reduce(self, c: Coefficient) -> Coefficient:
        return Fraction(c) if self.p == 0 else int(c) % self.p


def curve_polynomial(curve: CurveDatum, a: Term, b: Term) -> Term:
    """f(a, b) as a ring term with literal coefficients."""
    if curve.is_zero():
        raise ReductionError("curve polynomial is zero")
    ring_terms = RingTerms(FIELD_RING)
    summands = []
    for i, j, c in curve.monomials:
        c = curve.reduce(c)
        if c == 0:
            continue
        factors = [] if c == 1 else [make_literal(curve.domain, c)]
        if i:
            factors.append(ring_terms.power(a, i))
        if j:
            factors.append(ring_terms.power(b, j))
        summands.append(ring_terms.product(factors))
    return ring_terms.sum(summands)


def rewrite_generators(phi: Formula, a: Variable, b: Variable, generators: Sequence[str] = ("X", "Y"),
                       allowed: Sequence[str] = ()) -> Formula:
    """
    φ0(ū, a, b): the constants of k0[X, Y] occurring in φ, given as terms in
    the generator constants, rewritten as terms in a and b.
    """
    permitted = set(generators) | {FIELD_RING.zero, FIELD_RING.one} | set(allowed)
    stray = sorted(c.name for c in constants_of(phi) if not c.is_literal and c.name not in permitted)
    if stray:
        raise ReductionError(f"constants {stray} are not terms in {', '.join(generators)}")
    gx, gy = generators
    return replace_constants(phi, {gx: a, gy: b})


def tau_curve_char0(curve: CurveDatum, gamma: Formula, fragment: FragmentDescriptor, phi: Formula,
                    generators: Sequence[str] = ("X", "Y")) -> Formula:
    """
    Reduce F-formulas about the function field k0(C) of a curve of genus at
    least two to A2[F] formulas about k0, for γ ∈ F defining k0:
    ∀a,b(f(a,b) ≠ 0 ∨ γ(a) ∨ φ0(ū, a, b)).
    """
    if curve.p != 0:
        raise ReductionError(f"curve has characteristic {curve.p}, expected 0")
    if not curve.genus_at_least_two:
        raise ReductionError("curve is not asserted to have genus at least two")
    if not is_alternating_from(fragment, "exists"):
        raise FragmentError(f"fragment {fragment} is not one of E, E A, E A E, ...")
    if not mem_fragment(fragment, None, gamma):
        raise FragmentError(f"gamma is not in {fragment}")
    _one_field_variable(gamma)
    if not mem_fragment(fragment, None, phi):
        raise FragmentError(f"formula is not in {fragment}")
    taken = variable_names(phi)
    a, b = fresh_field("a", taken), fresh_field("b", taken)
    phi0 = rewrite_generators(phi, a, b, generators)
    (g,) = free_variables(gamma)
    logger.debug(f"tau_curve_char0: fragment {fragment}, {len(curve.monomials)} monomials")
    return forall_many([a, b], disj([
        neq(curve_polynomial(curve, a, b), RingTerms(FIELD_RING).zero()),
        substitute_terms(gamma, {g: a}),
        phi0,
    ]))


def _one_field_variable(gamma: Formula) -> Variable:
    free = free_variables(gamma)
    if len(free) != 1 or next(iter(free)).sort != FIELD_RING.sort:
        raise ReductionError("gamma must have exactly one free variable of the field sort")
    return next(iter(free))


def tau_curve_charp(curve: CurveDatum, phi: Formula, generators: Sequence[str] = ("X", "Y")) -> Formula:
    """
    Reduce existential formulas about k0(C) to A1[E] formulas about k0 in
    characteristic p:
    ∀ζ ∃ξ,η,λ0..λ_{p-1}(f(ξ,η) = 0 ∧ ζ = Σ λ_j^p ξ^j ∧ φ0(ū, ξ, η)).
    """
    if curve.p == 0:
        raise ReductionError("curve has characteristic 0, expected a prime")
    missing = [flag for flag in ("genus_at_least_two", "separable_in_y", "perfect")
               if not getattr(curve, flag)]
    if missing:
        raise ReductionError(f"curve hypotheses not asserted: {', '.join(missing)}")
    if not mem_fragment(EXISTENTIAL, None, phi):
        raise FragmentError("formula is not existential")
    p = curve.p
    ring_terms = RingTerms(FIELD_RING)
    taken = variable_names(phi)
    zeta, xi, eta = fresh_field("zeta", taken), fresh_field("xi", taken), fresh_field("eta", taken)
    lams = [fresh_field(f"lam{j}", taken) for j in range(p)]
    phi0 = rewrite_generators(phi, xi, eta, generators)
    expansion = ring_terms.sum(
        ring_terms.product([ring_terms.power(lam, p)] + ([ring_terms.power(xi, j)] if j else []))
        for j, lam in enumerate(lams)
    )
    logger.debug(f"tau_curve_charp: p={p}")
    body = conj([
        eq(curve_polynomial(curve, xi, eta), ring_terms.zero()),
        eq(zeta, expansion),
        phi0,
    ])
    return Forall(zeta, exists_many([xi, eta] + lams, body))


def target_fragment(map_name: str, fragment: Optional[FragmentDescriptor] = None) -> FragmentDescriptor:
    """Declared output fragment of each function field reduction."""
    if map_name == "tau-curve-0":
        return prefix_only("forall", 2, fragment if fragment is not None else EXISTENTIAL)
    if map_name in ("tau-rat-noconst", "tau-curve-p"):
        return FORALL_ONE_EXISTS
    raise ReductionError(f"unknown function field map {map_name}")
