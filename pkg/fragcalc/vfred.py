"""
Valued field reductions over k((t)): the uniformizer formula, dropping the
distinguished uniformizer, and the finite residue field reductions.
"""
from itertools import product
from typing import List, NamedTuple, Optional, Tuple
import logging

from fragcalc.errors import FragmentError, ReductionError
from fragcalc.ffred import split_universal
from fragcalc.formula import (
    And, Apply, Atom, Bot, Constant, Exists, Forall, Formula, Not, Or, RingTerms, Top,
    Variable, conj, eq, exists_many, forall_many, is_sentence, neq,
    replace_constants, require_well_sorted, substitute_terms, variable_names,
)
from fragcalc.fpalg import prime_power
from fragcalc.fragments import (
    FragmentDescriptor, closed, mem_fragment, prefix_only, prenex_split,
    prnx, unbounded,
)
from fragcalc.pcoding import fresh_field
from fragcalc.signature import FIELD_RING, RESIDUE_RING, Language, extend_with_constants, has_ring

logger = logging.getLogger(__name__)

RESIDUE_SORT = RESIDUE_RING.sort


class Uniformizer(NamedTuple):
    """ν(x) = ∀z η(x, z) with η quantifier-free."""
    nu: Formula
    eta: Formula
    x: Variable
    z: Variable


def _v(term) -> Apply:
    return Apply("v", (term,), "group")


def uniformizer_formula() -> Uniformizer:
    """
    ν(x) = ∀z(0 < v(x) ∧ (v(x) ≤ v(z) ∨ v(z) ≤ 0)), defining the
    uniformizers of a discretely valued field.
    """
    x, z = Variable("x", FIELD_RING.sort), Variable("z", FIELD_RING.sort)
    zero = Constant("0_G", "group")
    eta = And(
        Atom("<_G", (zero, _v(x))),
        Or(Atom("<=_G", (_v(x), _v(z))), Atom("<=_G", (_v(z), zero))),
    )
    return Uniformizer(Forall(z, eta), eta, x, z)


# Dropping the uniformizer

def drop_pi_source(n: int, fragment: FragmentDescriptor) -> FragmentDescriptor:
    """A_n[E_1[F]]."""
    return prefix_only("forall", n, prefix_only("exists", 1, fragment)) if n else prefix_only("exists", 1, fragment)


def drop_pi_target(n: int, fragment: FragmentDescriptor) -> FragmentDescriptor:
    return prefix_only("forall", n + 1, prefix_only("exists", 1, fragment))


def _drop_pi_shape(n: int, fragment: FragmentDescriptor, phi: Formula) -> Tuple[List[Variable], Optional[Variable], Formula]:
    """(y1..yk, z, ψ) with φ = ∀ȳ ∃z ψ, k ≤ n and ψ ∈ F; z is None when absent."""
    inner = prefix_only("exists", 1, fragment)
    ys: List[Variable] = []
    while len(ys) < n and not mem_fragment(inner, None, phi) and isinstance(phi, Forall):
        ys.append(phi.var)
        phi = phi.body
    if isinstance(phi, Exists) and mem_fragment(fragment, None, phi.body):
        return ys, phi.var, phi.body
    return ys, None, phi


def tau_drop_pi(n: int, fragment: FragmentDescriptor, phi: Formula, language: Optional[Language] = None,
                constant: str = "t") -> Formula:
    """
    Reduce A_n[E_1[F]] formulas about (K, v, t) to A_{n+1}[E_1[F]] formulas
    about (K, v): ∀x ∀ȳ ∃z(¬η(x, z) ∨ ψ(ū, x, ȳ, z)).
    """
    if n < 0:
        raise ReductionError(f"n must be non-negative, got {n}")
    source = drop_pi_source(n, fragment)
    if not mem_fragment(source, language, phi):
        phi = prnx(fragment, language, phi)
        if not mem_fragment(source, None, phi):
            raise FragmentError(f"formula is not in {source}")
    ys, z, psi = _drop_pi_shape(n, fragment, phi)
    taken = variable_names(phi)
    x = fresh_field("x", taken)
    if z is None:
        z = fresh_field("z", taken)
    uniformizer = uniformizer_formula()
    eta = substitute_terms(uniformizer.eta, {uniformizer.x: x, uniformizer.z: z})
    body = replace_constants(psi, {constant: x})
    logger.debug(f"tau_drop_pi: n={n}, universals={len(ys)}, fragment {fragment}")
    return forall_many([x] + ys, Exists(z, Or(Not(eta), body)))


def tau_drop_pi_closed(n: int, fragment: FragmentDescriptor, phi: Formula, language: Optional[Language] = None,
                       constant: str = "t") -> Formula:
    """tau_drop_pi on every prefix-shaped component of a boolean combination."""
    source = drop_pi_source(n, fragment)
    if language is not None:
        require_well_sorted(language, phi)

    def walk(node: Formula) -> Formula:
        if isinstance(node, (Top, Bot)):
            return node
        if mem_fragment(source, None, node):
            return tau_drop_pi(n, fragment, node, None, constant)
        if isinstance(node, (And, Or)):
            return type(node)(walk(node.left), walk(node.right))
        raise FragmentError(f"component is not in {source} nor a conjunction or disjunction")

    return walk(phi)


def drop_pi_closed_target(n: int, fragment: FragmentDescriptor) -> FragmentDescriptor:
    return closed("forall", n + 1, prefix_only("exists", 1, fragment))


# Finite residue fields

def _require_prime_power(q: int) -> None:
    if prime_power(q) is None:
        raise ReductionError(f"q must be a prime power, got {q}")


def eta_q(q: int, zs: List[Variable]) -> Formula:
    """⋀ z_j^q = z_j ∧ ⋀_{i<j} z_i ≠ z_j."""
    ring_terms = RingTerms(FIELD_RING)
    roots = [eq(ring_terms.power(z, q), z) for z in zs]
    distinct = [neq(zs[i], zs[j]) for i in range(len(zs)) for j in range(i + 1, len(zs))]
    return conj(roots + distinct)


def tau_A1E_to_E(q: int, language: Language, phi: Formula, constant: str = "t") -> Formula:
    """
    Reduce A1 E sentences about (K, v) with residue field F_q to existential
    sentences about (K, v, t):
    ∃y, z1..zq(η_q(z̄) ∧ y·t = 1 ∧ ψ(y) ∧ ⋀ ψ(z_j + t) ∧ ⋀ ψ(z_j)).
    """
    _require_prime_power(q)
    if not has_ring(language, FIELD_RING):
        raise ReductionError(f"language {language.name} lacks the ring symbols on the field sort")
    if not is_sentence(phi):
        raise FragmentError("formula is not a sentence")
    x, psi = split_universal(language, phi)
    ring_terms = RingTerms(FIELD_RING)
    t = Constant(constant, FIELD_RING.sort)
    taken = variable_names(phi)
    y = fresh_field("y", taken)
    zs = [fresh_field(f"z{j}", taken) for j in range(1, q + 1)]

    def psi_at(term) -> Formula:
        return psi if x is None else substitute_terms(psi, {x: term})

    logger.debug(f"tau_A1E_to_E: q={q}, universal={x is not None}")
    parts = [eta_q(q, zs), eq(ring_terms.mul(y, t), ring_terms.one()), psi_at(y)]
    parts += [psi_at(ring_terms.add(z, t)) for z in zs]
    parts += [psi_at(z) for z in zs]
    return exists_many([y] + zs, conj(parts))


def with_uniformizer(language: Language, constant: str = "t") -> Language:
    """L(t), or L itself when it already names the constant."""
    if language.symbol(constant) is not None:
        return language
    return extend_with_constants(language, [constant], FIELD_RING.sort)


def finite_residue_source(fragment: FragmentDescriptor) -> FragmentDescriptor:
    """A^k F."""
    return unbounded("forall", fragment, sort=RESIDUE_SORT)


def finite_residue_target(fragment: FragmentDescriptor) -> FragmentDescriptor:
    """E^k[F]."""
    return prefix_only("exists", None, fragment, sort=RESIDUE_SORT)


def tau_finite_residue(q: int, fragment: FragmentDescriptor, language: Language, phi: Formula) -> Formula:
    """
    Reduce A^k F formulas to E^k[F] formulas for structures with q residue
    elements: ∃z1..zq(⋀_{i<j} z_i ≠ z_j ∧ ⋀ over j̄ ∈ [q]^r of ψ(z_j1, .., z_jr, ū)).
    """
    _require_prime_power(q)
    if not language.has_sort(RESIDUE_SORT):
        raise ReductionError(f"language {language.name} has no {RESIDUE_SORT} sort")
    if not mem_fragment(finite_residue_source(fragment), language, phi):
        raise FragmentError(f"formula is not in {finite_residue_source(fragment)}")
    prefix, psi = prenex_split(fragment, language, phi)
    wrong = [var.name for kind, var in prefix if kind != "forall" or var.sort != RESIDUE_SORT]
    if wrong:
        raise FragmentError(f"quantifiers over {wrong} are not residue universals")
    if not mem_fragment(fragment, None, psi):
        raise FragmentError(f"prenex matrix is not in {fragment}")
    xs = [var for _, var in prefix]
    taken = variable_names(phi)
    zs = [fresh_field(f"z{j}", taken, RESIDUE_RING) for j in range(1, q + 1)]
    distinct = [neq(zs[i], zs[j]) for i in range(q) for j in range(i + 1, q)]
    copies = [substitute_terms(psi, {x: zs[j] for x, j in zip(xs, index)})
              for index in product(range(q), repeat=len(xs))]
    logger.debug(f"tau_finite_residue: q={q}, r={len(xs)}, copies={len(copies)}")
    return exists_many(zs, conj(distinct + copies))

