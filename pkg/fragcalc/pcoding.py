"""
Characteristic p coding: the formulas chi_{p,n,r} and pi_{p,n}, and the
reductions of forall-F theories to forall_k[F] theories built from them.
"""
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple
import logging

from fragcalc.errors import FragmentError, ReductionError
from fragcalc.formula import (
    And, Constant, Exists, Forall, Formula, Or, RingTerms, TOP, Term, Variable,
    conj, disj, eq, exists_many, forall_many, free_variables, fresh_name,
    neq, substitute, substitute_terms, variable_names,
)
from fragcalc.fpalg import is_prime
from fragcalc.fragments import (
    EXISTENTIAL, FragmentDescriptor, is_alternating_from, is_exists_absorbing,
    mem_fragment, prefix_only, prenex_split, relativize, unbounded,
)
from fragcalc.signature import FIELD_RING, Language, RingNames, SymbolKind, has_ring

logger = logging.getLogger(__name__)


def _validate(p: int, n: int, r: int = 0, n_min: int = 1) -> None:
    if not is_prime(p):
        raise ReductionError(f"p must be prime, got {p}")
    if n < n_min:
        raise ReductionError(f"n must be at least {n_min}, got {n}")
    if r < 0:
        raise ReductionError(f"r must be non-negative, got {r}")


def _field(name: str, names: RingNames) -> Variable:
    return Variable(name, names.sort)


def _indices(base: int, d: int) -> List[Tuple[int, ...]]:
    """Multi-indices in row-major order."""
    return list(product(range(base), repeat=d))


def _monomial(ring: RingTerms, coefficient: Term, zs: Sequence[Term], index: Tuple[int, ...]) -> Term:
    factors = [coefficient] + [ring.power(z, i) for z, i in zip(zs, index) if i > 0]
    return ring.product(factors)


def _pth_expansion(p: int, ring: RingTerms, lams: Sequence[Variable], zs: Sequence[Term]) -> Term:
    """sum over the row-major multi-indices of lam^p * prod z_j^i_j."""
    index_list = _indices(p, len(zs))
    return ring.sum(_monomial(ring, ring.power(lam, p), zs, index)
                    for lam, index in zip(lams, index_list))


def _chi2(p: int, n: int, names: RingNames) -> Formula:
    ring = RingTerms(names)
    zs = [_field(f"z{j}", names) for j in range(1, n + 1)]
    lams = [_field(f"lam{i}", names) for i in range(p ** n)]
    body = conj([
        eq(_field("x", names), _pth_expansion(p, ring, lams, zs)),
        eq(_field("y1", names), lams[0]),
        eq(_field("y2", names), lams[-1]),
    ])
    return exists_many(lams, body)


def chi(p: int, n: int, r: int, names: RingNames = FIELD_RING) -> Formula:
    """
    Existential formula chi_{p,n,r}(x, y1..yr, z1..zn) defining, for a p-basis
    z of K, a surjection K -> K^r.
    """
    _validate(p, n, r)
    if r == 0:
        return TOP
    if r == 1:
        return eq(_field("x", names), _field("y1", names))
    formula = _chi2(p, n, names)
    zs = [_field(f"z{j}", names) for j in range(1, n + 1)]
    for k in range(2, r):
        # chi_{k+1} = exists w (chi_k[y_k -> w] and chi_2(w, y_k, y_{k+1}, z))
        w = _field(f"w{k - 1}", names)
        y_k, y_next = _field(f"y{k}", names), _field(f"y{k + 1}", names)
        previous = substitute(formula, {y_k: w})
        step = chi_formula(p, n, 2, w, [y_k, y_next], zs, names)
        formula = Exists(w, And(previous, step))
    return formula


def chi_formula(p: int, n: int, r: int, x: Term, ys: Sequence[Term], zs: Sequence[Term],
                names: RingNames = FIELD_RING) -> Formula:
    """chi_{p,n,r} instantiated at the given terms."""
    if len(ys) != r or len(zs) != n:
        raise ReductionError(f"chi_{{{p},{n},{r}}} takes {r} y-terms and {n} z-terms")
    mapping: Dict[Variable, Term] = {_field("x", names): x}
    mapping.update({_field(f"y{i}", names): t for i, t in enumerate(ys, start=1)})
    mapping.update({_field(f"z{j}", names): t for j, t in enumerate(zs, start=1)})
    return substitute_terms(chi(p, n, r, names), mapping)


def pi(p: int, n: int, names: RingNames = FIELD_RING) -> Formula:
    """Existential formula pi_{p,n}(z1..zn) defining the p-dependent n-tuples."""
    _validate(p, n)
    ring = RingTerms(names)
    zs = [_field(f"z{j}", names) for j in range(1, n + 1)]
    lams = [_field(f"lam{i}", names) for i in range(p ** n)]
    body = And(
        eq(_pth_expansion(p, ring, lams, zs), ring.zero()),
        disj(neq(lam, ring.zero()) for lam in lams),
    )
    return exists_many(lams, body)


def pi_formula(p: int, n: int, zs: Sequence[Term], names: RingNames = FIELD_RING) -> Formula:
    if len(zs) != n:
        raise ReductionError(f"pi_{{{p},{n}}} takes {n} terms")
    mapping = {_field(f"z{j}", names): t for j, t in enumerate(zs, start=1)}
    return substitute_terms(pi(p, n, names), mapping)


# Reductions

def _universal_matrix(p: int, language: Language, fragment: FragmentDescriptor,
                      phi: Formula) -> Tuple[List[Variable], Formula]:
    """Check φ ∈ ∀F and return (x1..xr, ψ) with prnx(F, φ) = ∀x̄ ψ, ψ ∈ F."""
    if not is_exists_absorbing(fragment):
        raise FragmentError(f"fragment {fragment} does not satisfy EF = F")
    if not has_ring(language, FIELD_RING):
        raise ReductionError(f"language {language.name} lacks the ring symbols")
    if not mem_fragment(unbounded("forall", fragment), language, phi):
        raise FragmentError(f"formula is not in A {fragment}")
    prefix, matrix = prenex_split(fragment, language, phi)
    if any(kind != "forall" for kind, _ in prefix) or not mem_fragment(fragment, None, matrix):
        raise FragmentError(f"prenex form of the formula is not A..A followed by {fragment}")
    return [var for _, var in prefix], matrix


def fresh_field(stem: str, taken: set, names: RingNames = FIELD_RING) -> Variable:
    name = stem if stem not in taken else fresh_name(stem, taken)
    taken.add(name)
    return Variable(name, names.sort)


def tau_param(p: int, n: int, language: Language, fragment: FragmentDescriptor, phi: Formula,
              constants: Optional[Sequence[str]] = None) -> Formula:
    """
    Reduce forall-F formulas to forall_1[F] using a p-basis c1..cn named by
    constants: ∀w ∃x̄ (χ(w, x̄, c̄) ∧ ψ(x̄, ū)).
    """
    _validate(p, n)
    constants = list(constants) if constants is not None else [f"c{i}" for i in range(1, n + 1)]
    if len(constants) != n:
        raise ReductionError(f"expected {n} p-basis constants, got {len(constants)}")
    cs = []
    for name in constants:
        symbol = language.symbol(name)
        if symbol is None or symbol.kind != SymbolKind.CONSTANT or symbol.result_sort != FIELD_RING.sort:
            raise ReductionError(f"language {language.name} has no field constant {name}")
        cs.append(Constant(name, FIELD_RING.sort))
    xs, psi = _universal_matrix(p, language, fragment, phi)
    taken = variable_names(phi)
    w = fresh_field("w", taken)
    logger.debug(f"tau_param: p={p}, n={n}, r={len(xs)}")
    return Forall(w, exists_many(xs, And(chi_formula(p, n, len(xs), w, xs, cs), psi)))


def tau_noparam(p: int, n: int, language: Language, fragment: FragmentDescriptor, phi: Formula) -> Formula:
    """∀w ∀z̄ (π(z̄) ∨ ∃x̄ (χ(w, x̄, z̄) ∧ ψ(x̄, ū))), in forall_{n+1}[F]."""
    _validate(p, n)
    xs, psi = _universal_matrix(p, language, fragment, phi)
    taken = variable_names(phi)
    w = fresh_field("w", taken)
    zs = [fresh_field(f"z{j}", taken) for j in range(1, n + 1)]
    logger.debug(f"tau_noparam: p={p}, n={n}, r={len(xs)}")
    body = Or(pi_formula(p, n, zs), exists_many(xs, And(chi_formula(p, n, len(xs), w, xs, zs), psi)))
    return forall_many([w] + zs, body)


# Function fields

def check_gamma(gamma: Formula) -> Variable:
    free = free_variables(gamma)
    if len(free) != 1:
        raise ReductionError(f"gamma must have exactly one free variable, has {len(free)}")
    if not mem_fragment(EXISTENTIAL, None, gamma):
        raise ReductionError("gamma must be existential")
    v = next(iter(free))
    if v.sort != FIELD_RING.sort:
        raise ReductionError(f"gamma's variable must have sort {FIELD_RING.sort}")
    return v


def gamma_at(gamma: Formula, t: Term) -> Formula:
    v = check_gamma(gamma)
    return substitute_terms(gamma, {v: t})


def eta_nu(p: int, n: int, nu: int, gamma: Formula) -> Formula:
    """
    η_ν(x) = ∃ȳ z̄ (⋀ γ(z_i) ∧ x = Σ y_i^{p^ν} z_i) over N = p^{nν} indices,
    defining K^{p^ν}k when γ defines k.
    """
    _validate(p, n, n_min=0)
    if nu < 1:
        raise ReductionError(f"nu must be positive, got {nu}")
    check_gamma(gamma)
    ring = RingTerms(FIELD_RING)
    count = p ** (n * nu)
    ys = [_field(f"y{i}", FIELD_RING) for i in range(1, count + 1)]
    zs = [_field(f"z{i}", FIELD_RING) for i in range(1, count + 1)]
    x = _field("x", FIELD_RING)
    body = And(
        conj(gamma_at(gamma, z) for z in zs),
        eq(x, ring.sum(ring.mul(ring.power(y, p ** nu), z) for y, z in zip(ys, zs))),
    )
    return exists_many(ys + zs, body)


def pi_prime(p: int, d: int, gamma: Formula, n: int) -> Formula:
    """
    π′(z1..zd): the d-tuples that are not p-bases of K over K^p k, with η_1
    computed for [k : k^p] = p^n.
    """
    _validate(p, d)
    eta = eta_nu(p, n, 1, gamma)
    x = _field("x", FIELD_RING)
    ring = RingTerms(FIELD_RING)
    zs = [_field(f"z{j}", FIELD_RING) for j in range(1, d + 1)]
    indices = _indices(p, d)
    mus = [_field(f"mu{i}", FIELD_RING) for i in range(len(indices))]
    body = conj([
        conj(substitute(eta, {x: mu}) for mu in mus),
        eq(ring.sum(_monomial(ring, mu, zs, index) for mu, index in zip(mus, indices)), ring.zero()),
        disj(neq(mu, ring.zero()) for mu in mus),
    ])
    return exists_many(mus, body)


def choose_nu(p: int, r: int) -> int:
    """Smallest ν ≥ 1 with r ≤ p^ν."""
    nu = 1
    while p ** nu < r:
        nu += 1
    return nu


def tau_funcfield(p: int, n: int, d: int, gamma: Formula, fragment: FragmentDescriptor,
                  phi: Formula, language: Optional[Language] = None) -> Formula:
    """
    Reduce forall-F formulas about the function field K = k(X) of a
    d-dimensional variety to forall_{d+1}[F] formulas, for γ defining k.
    """
    _validate(p, n, n_min=0)
    if d < 1:
        raise ReductionError(f"d must be at least 1, got {d}")
    if not is_alternating_from(fragment, "exists"):
        raise FragmentError(f"fragment {fragment} is not one of E, E A, E A E, ...")
    check_gamma(gamma)
    if language is not None and not has_ring(language, FIELD_RING):
        raise ReductionError(f"language {language.name} lacks the ring symbols")
    if not mem_fragment(unbounded("forall", fragment), language, phi):
        raise FragmentError(f"formula is not in A {fragment}")
    prefix, psi = prenex_split(fragment, language, phi)
    if any(kind != "forall" for kind, _ in prefix) or not mem_fragment(fragment, None, psi):
        raise FragmentError(f"prenex form of the formula is not A..A followed by {fragment}")
    xs = [var for _, var in prefix]
    r = len(xs)
    nu = choose_nu(p, r)
    side = p ** nu
    logger.debug(f"tau_funcfield: p={p}, n={n}, d={d}, r={r}, nu={nu}")

    ring = RingTerms(FIELD_RING)
    taken = variable_names(phi)
    w = fresh_field("w", taken)
    zs = [fresh_field(f"z{j}", taken) for j in range(1, d + 1)]
    indices = _indices(side, d)
    lams = [fresh_field(f"lam{i}", taken) for i in range(len(indices))]

    eta = eta_nu(p, n, nu, gamma)
    relativized = relativize(psi, eta)
    # x_i is λ at multi-index (i-1, 0, ..., 0)
    stride = side ** (d - 1)
    relativized = substitute_terms(relativized, {x: lams[i * stride] for i, x in enumerate(xs)})
    us = sorted(free_variables(phi), key=lambda v: v.name)
    x = _field("x", FIELD_RING)
    inner = conj([
        eq(w, ring.sum(_monomial(ring, lam, zs, index) for lam, index in zip(lams, indices))),
        conj(substitute_terms(eta, {x: lam}) for lam in lams),
        conj(gamma_at(gamma, u) for u in us),
        relativized,
    ])
    pi_z = substitute_terms(pi_prime(p, d, gamma, n),
                            {_field(f"z{j}", FIELD_RING): z for j, z in enumerate(zs, start=1)})
    return forall_many([w] + zs, exists_many(lams, Or(pi_z, inner)))


def target_fragment(map_name: str, fragment: FragmentDescriptor, n: int = 1, d: int = 1) -> FragmentDescriptor:
    """Declared output fragment of each coding reduction."""
    width = {"tau-param": 1, "tau-noparam": n + 1, "tau-ff": d + 1}[map_name]
    return prefix_only("forall", width, fragment)
