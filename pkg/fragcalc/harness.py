"""
Corpus generation and batch checks.

Random and exhaustive formula generators, a bottom-up generator for the
members of a fragment descriptor, and the prenex equivalence sweep over
finite structures. Formula size counts formula nodes only; terms are free.
"""
from random import Random
from typing import Callable, Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Tuple
import logging
import time

from fragcalc import ffred, pcoding, vfred
from fragcalc.config import get_settings
from fragcalc.formula import (
    EQUALITY, And, Apply, Atom, BOT, Binary, Constant, Exists, Forall, Formula, Not, Or,
    Quantifier, RingTerms, TOP, Term, Top, Bot, Variable, free_variables, quantify,
    size as formula_size, well_sorted,
)
from fragcalc.fragments import (
    EXISTENTIAL, BlockMode, F0, FragmentDescriptor, QuantifierBlock, mem_fragment, prnx,
)
from fragcalc.signature import (
    FIELD_RING, RESIDUE_RING, Language, SymbolKind, extend_with_constants, ring, val,
)
from fragcalc.structures import Element, FiniteStructure, assignments, evaluate
from fragcalc.syntax import format_formula

logger = logging.getLogger(__name__)
settings = get_settings()

_LETTERS = {"A": "forall", "E": "exists"}


def corpus_rng(seed: Optional[int] = None) -> Random:
    return Random(settings.corpus_seed if seed is None else seed)


def default_variables(language: Language) -> List[Variable]:
    """x, y, z on the default sort and two variables on every other sort."""
    default = language.default_sort()
    pool = [Variable(name, default) for name in ("x", "y", "z")]
    for sort in language.sort_names:
        if sort != default:
            pool += [Variable(f"{sort[0]}{i}", sort) for i in (1, 2)]
    return pool


# Random formulas

class _RandomFormulas:
    def __init__(self, language: Language, rng: Random, variables: Sequence[Variable],
                 quantifiers: bool, term_depth: int):
        self.language = language
        self.rng = rng
        self.variables = list(variables)
        self.quantifiers = quantifiers
        self.term_depth = term_depth
        self.relations = [s for s in language.symbols if s.kind == SymbolKind.RELATION]
        self.sorts = sorted({v.sort for v in self.variables}) or [language.default_sort()]

    def term(self, sort: str, depth: int) -> Term:
        choices: List[Term] = [v for v in self.variables if v.sort == sort]
        choices += [Constant(c.name, sort) for c in self.language.constants(sort)]
        functions = [s for s in self.language.symbols
                     if s.kind == SymbolKind.FUNCTION and s.result_sort == sort]
        if depth > 0 and functions and (not choices or self.rng.random() < 0.4):
            f = self.rng.choice(functions)
            return Apply(f.name, tuple(self.term(s, depth - 1) for s in f.arg_sorts), sort)
        if not choices:
            return Variable(f"{sort[0]}0", sort)
        return self.rng.choice(choices)

    def atom(self) -> Formula:
        roll = self.rng.random()
        if roll < 0.05:
            return TOP
        if roll < 0.1:
            return BOT
        if self.relations and self.rng.random() < 0.6:
            r = self.rng.choice(self.relations)
            return Atom(r.name, tuple(self.term(s, self.term_depth) for s in r.arg_sorts))
        sort = self.rng.choice(self.sorts)
        return Atom(EQUALITY, (self.term(sort, self.term_depth), self.term(sort, self.term_depth)))

    def formula(self, size: int) -> Formula:
        if size <= 1:
            return self.atom()
        options = ["not"]
        if self.quantifiers and self.variables:
            options += ["forall", "exists"]
        if size >= 3:
            options += ["and", "or", "and", "or"]
        op = self.rng.choice(options)
        if op == "not":
            return Not(self.formula(size - 1))
        if op in ("forall", "exists"):
            return quantify(op, self.rng.choice(self.variables), self.formula(size - 1))
        left = self.rng.randint(1, size - 2)
        cls = And if op == "and" else Or
        return cls(self.formula(left), self.formula(size - 1 - left))


def random_formula(language: Language, size: int, rng: Random, variables: Optional[Sequence[Variable]] = None,
                   quantifiers: bool = True, term_depth: int = 1) -> Formula:
    """A well-sorted formula with at most size nodes, drawn from rng."""
    size = rng.randint(1, size)
    pool = variables if variables is not None else default_variables(language)
    return _RandomFormulas(language, rng, pool, quantifiers, term_depth).formula(size)


def random_quantifier_free(language: Language, size: int, rng: Random,
                           variables: Optional[Sequence[Variable]] = None, term_depth: int = 1) -> Formula:
    return random_formula(language, size, rng, variables, quantifiers=False, term_depth=term_depth)


def random_prefixed(language: Language, pattern: str, size: int, rng: Random,
                    variables: Optional[Sequence[Variable]] = None, sort: Optional[str] = None,
                    matrix: Optional[Formula] = None) -> Formula:
    """
    Quantifier prefix spelled by pattern ("AAE" is ∀∀∃) over a random
    quantifier-free matrix. Binders are taken from the pool in order, on the
    given sort when one is named.
    """
    pool = list(variables if variables is not None else default_variables(language))
    if matrix is None:
        matrix = random_quantifier_free(language, size, rng, pool)
    binders = [v for v in pool if sort is None or v.sort == sort]
    if len(binders) < len(pattern):
        raise ValueError(f"pattern {pattern} needs {len(pattern)} variables, pool has {len(binders)}")
    phi = matrix
    for letter, var in reversed(list(zip(pattern, binders))):
        phi = quantify(_LETTERS[letter], var, phi)
    return phi


def random_existential(language: Language, size: int, rng: Random,
                       variables: Optional[Sequence[Variable]] = None, closed: bool = False) -> Formula:
    """∃ over a random subset of the matrix variables; over all of them when closed."""
    pool = list(variables if variables is not None else default_variables(language))
    matrix = random_quantifier_free(language, size, rng, pool)
    free = sorted(free_variables(matrix), key=lambda v: v.name)
    bound = free if closed else [v for v in free if rng.random() < 0.6]
    phi = matrix
    for var in reversed(bound):
        phi = Exists(var, phi)
    return phi


# Exhaustive enumeration

def enumerate_formulas(max_size: int, atoms: Sequence[Formula], variables: Sequence[Variable]) -> List[Formula]:
    """
    Every formula up to max_size nodes built from the given atoms with ¬, ∧,
    ∨ and both quantifiers over each variable, smallest first.
    """
    by_size: Dict[int, List[Formula]] = {1: list(atoms)}
    for n in range(2, max_size + 1):
        level: List[Formula] = []
        for body in by_size[n - 1]:
            level.append(Not(body))
            for var in variables:
                level.append(Forall(var, body))
                level.append(Exists(var, body))
        for left_size in range(1, n - 1):
            for left in by_size[left_size]:
                for right in by_size[n - 1 - left_size]:
                    level.append(And(left, right))
                    level.append(Or(left, right))
        by_size[n] = level
    formulas = [phi for n in range(1, max_size + 1) for phi in by_size[n]]
    logger.info(f"enumerated {len(formulas)} formulas up to size {max_size}")
    return formulas


def _is_quantifier_free(phi: Formula, members: FrozenSet[Formula]) -> bool:
    if isinstance(phi, Quantifier):
        return False
    if isinstance(phi, Not):
        return phi.body in members
    if isinstance(phi, Binary):
        return phi.left in members and phi.right in members
    return True


class _Grammar:
    """Least fixpoints of the inductive definition, restricted to a universe."""

    def __init__(self, universe: Sequence[Formula]):
        self.universe = universe
        self.cache: Dict[Tuple[QuantifierBlock, ...], FrozenSet[Formula]] = {}

    def members(self, blocks: Tuple[QuantifierBlock, ...]) -> FrozenSet[Formula]:
        if blocks not in self.cache:
            self.cache[blocks] = self._members(blocks)
        return self.cache[blocks]

    def _members(self, blocks: Tuple[QuantifierBlock, ...]) -> FrozenSet[Formula]:
        if not blocks:
            found: set = set()
            for phi in self.universe:
                if _is_quantifier_free(phi, found):
                    found.add(phi)
            return frozenset(found)
        head, inner = blocks[0], blocks[1:]
        if head.mode == BlockMode.PREFIX:
            return self.prefixed(head, head.n, self.members(inner))
        if head.mode == BlockMode.CLOSED or (head.mode == BlockMode.NESTED and head.n == 1):
            return self.closure(self.prefixed(head, head.n, self.members(inner)))
        if head.mode == BlockMode.NESTED:
            below = (QuantifierBlock(head.kind, BlockMode.NESTED, head.n - 1, head.sort),) + inner
            return self.closure(self.prefixed(head, 1, self.members(below)))
        found = set(self.members(inner))
        for phi in self.universe:
            if isinstance(phi, (Top, Bot)):
                found.add(phi)
            elif isinstance(phi, Binary) and phi.left in found and phi.right in found:
                found.add(phi)
            elif self.binds(head, phi) and phi.body in found:
                found.add(phi)
        return frozenset(found)

    @staticmethod
    def binds(head: QuantifierBlock, phi: Formula) -> bool:
        return isinstance(phi, Quantifier) and phi.kind == head.kind and head.admits(phi.var)

    def prefixed(self, head: QuantifierBlock, n: Optional[int], base: FrozenSet[Formula]) -> FrozenSet[Formula]:
        found, layer, depth = set(base), set(base), 0
        while layer and (n is None or depth < n):
            layer = {phi for phi in self.universe
                     if self.binds(head, phi) and phi.body in layer and phi not in found}
            found |= layer
            depth += 1
        return frozenset(found)

    def closure(self, base: FrozenSet[Formula]) -> FrozenSet[Formula]:
        found = set(base)
        for phi in self.universe:
            if isinstance(phi, (Top, Bot)):
                found.add(phi)
            elif isinstance(phi, Binary) and phi.left in found and phi.right in found:
                found.add(phi)
        return frozenset(found)


def grammar_members(descriptor: FragmentDescriptor, universe: Iterable[Formula],
                    max_size: Optional[int] = None) -> FrozenSet[Formula]:
    """
    Members of the descriptor among the universe, generated bottom-up from the
    inductive definition. The universe must be closed under subformulas and
    listed smallest first.
    """
    pool = [phi for phi in universe if max_size is None or formula_size(phi) <= max_size]
    if descriptor.full:
        return frozenset(pool)
    return _Grammar(pool).members(descriptor.blocks)


# Semantic sweeps

class Mismatch(NamedTuple):
    structure: str
    formula: str
    assignment: Dict[str, Element]


def check_prenex_equivalence(structures: Sequence[FiniteStructure], formulas: Iterable[Formula],
                             fragment: FragmentDescriptor = F0) -> List[Mismatch]:
    """Every assignment where prnx(F, φ) and φ disagree."""
    started = time.time()
    mismatches: List[Mismatch] = []
    checked = 0
    for phi in formulas:
        prenex = prnx(fragment, None, phi)
        free = free_variables(phi)
        for structure in structures:
            for env in assignments(structure, free):
                checked += 1
                if evaluate(structure, phi, env) != evaluate(structure, prenex, env):
                    logger.warning(f"prenex mismatch on {structure.name}: {format_formula(phi)} at {env}")
                    mismatches.append(Mismatch(structure.name, format_formula(phi), env))
    logger.info(f"prenex sweep: {checked} evaluations, {len(mismatches)} mismatches in {time.time() - started:.2f}s")
    return mismatches


def universal_closure_agrees(structure: FiniteStructure, phi: Formula, reduced: Formula) -> bool:
    """Truth of ∀-closure of φ against truth of the sentence reduced."""
    free = free_variables(phi)
    holds = all(evaluate(structure, phi, env) for env in assignments(structure, free))
    return holds == evaluate(structure, reduced)


# Reduction postconditions

class ReductionCase(NamedTuple):
    """One reduction map with an input generator and its declared target."""
    name: str
    language: Language
    make_input: Callable[[Random], Formula]
    apply: Callable[[Formula], List[Formula]]
    target: FragmentDescriptor


def _field_vars(*names: str) -> List[Variable]:
    return [Variable(n, FIELD_RING.sort) for n in names]


def reduction_cases() -> List[ReductionCase]:
    """The constructed reductions with small, fixed parameters."""
    ring_language = ring()
    with_basis = extend_with_constants(ring_language, ["c1"], FIELD_RING.sort)
    with_t = extend_with_constants(ring_language, ["t"], FIELD_RING.sort)
    valued = val()
    valued_t = vfred.with_uniformizer(valued)
    pool = _field_vars("x", "y", "z")
    residue_pool = [Variable("k1", RESIDUE_RING.sort), Variable("k2", RESIDUE_RING.sort)]

    curve0 = ffred.CurveDatum(0, ((0, 2, 1), (5, 0, -1), (1, 0, 1)), genus_at_least_two=True)
    curve2 = ffred.CurveDatum(2, ((0, 2, 1), (0, 1, 1), (5, 0, 1)), True, True, True)
    curve0_language = extend_with_constants(curve0.language(), ["X", "Y"], FIELD_RING.sort)
    curve2_language = extend_with_constants(curve2.language(), ["X", "Y"], FIELD_RING.sort)
    w = Variable("w", FIELD_RING.sort)
    square = Exists(w, Atom(EQUALITY, (Variable("x", FIELD_RING.sort), RingTerms(FIELD_RING).mul(w, w))))
    gamma2 = ffred.gamma_pth_powers(2)

    def prefixed(language: Language, pattern: str, variables=pool, sort=None):
        return lambda rng: random_prefixed(language, pattern, 4, rng, variables, sort)

    def existential(language: Language, closed: bool = False):
        return lambda rng: random_existential(language, 4, rng, pool, closed)

    return [
        ReductionCase("tau-param", with_basis, prefixed(with_basis, "AE"),
                      lambda phi: [pcoding.tau_param(2, 1, with_basis, EXISTENTIAL, phi, ["c1"])],
                      pcoding.target_fragment("tau-param", EXISTENTIAL)),
        ReductionCase("tau-noparam", ring_language, prefixed(ring_language, "AE"),
                      lambda phi: [pcoding.tau_noparam(2, 1, ring_language, EXISTENTIAL, phi)],
                      pcoding.target_fragment("tau-noparam", EXISTENTIAL, n=1)),
        ReductionCase("tau-ff", ring_language, prefixed(ring_language, "A"),
                      lambda phi: [pcoding.tau_funcfield(2, 1, 1, gamma2, EXISTENTIAL, phi, ring_language)],
                      pcoding.target_fragment("tau-ff", EXISTENTIAL, d=1)),
        ReductionCase("tau-rat-const", with_t, prefixed(with_t, "AE"),
                      lambda phi: list(ffred.tau_rat_const(2, phi, with_t)),
                      EXISTENTIAL),
        ReductionCase("tau-rat-noconst", with_t, existential(with_t),
                      lambda phi: [ffred.tau_rat_noconst(square, phi, with_t)],
                      ffred.target_fragment("tau-rat-noconst")),
        ReductionCase("tau-curve-0", curve0_language, existential(curve0_language),
                      lambda phi: [ffred.tau_curve_char0(curve0, square, EXISTENTIAL, phi)],
                      ffred.target_fragment("tau-curve-0", EXISTENTIAL)),
        ReductionCase("tau-curve-p", curve2_language, existential(curve2_language),
                      lambda phi: [ffred.tau_curve_charp(curve2, phi)],
                      ffred.target_fragment("tau-curve-p")),
        ReductionCase("tau-drop-pi", valued_t, existential(valued_t),
                      lambda phi: [vfred.tau_drop_pi(0, EXISTENTIAL, phi, valued_t)],
                      vfred.drop_pi_target(0, EXISTENTIAL)),
        ReductionCase("tau-a1e", valued, prefixed(valued, "AE", _field_vars("x", "y")),
                      lambda phi: [vfred.tau_A1E_to_E(2, valued, phi)],
                      EXISTENTIAL),
        ReductionCase("tau-finres", valued, prefixed(valued, "AA", residue_pool + pool, RESIDUE_RING.sort),
                      lambda phi: [vfred.tau_finite_residue(2, EXISTENTIAL, valued, phi)],
                      vfred.finite_residue_target(EXISTENTIAL)),
    ]


def check_reduction(case: ReductionCase, phi: Formula, output_language: Optional[Language] = None) -> List[str]:
    """Problems with τφ: ill-sorted, outside the target, or changed free variables."""
    language = output_language or case.language
    problems = []
    for out in case.apply(phi):
        text = format_formula(out)
        issues = well_sorted(language, out)
        if issues:
            problems.append(f"{case.name}: ill-sorted output {text}: {issues[0]}")
        elif not mem_fragment(case.target, None, out):
            problems.append(f"{case.name}: {text} is not in {case.target}")
        if free_variables(out) != free_variables(phi):
            problems.append(f"{case.name}: free variables of {text} differ from the input")
    return problems


def check_reductions(count: int, rng: Random) -> List[str]:
    """Run every constructed reduction on count random inputs."""
    failures: List[str] = []
    for case in reduction_cases():
        started = time.time()
        output_language = vfred.with_uniformizer(case.language) if case.name == "tau-a1e" else None
        for _ in range(count):
            failures += check_reduction(case, case.make_input(rng), output_language)
        logger.info(f"{case.name}: {count} inputs in {time.time() - started:.2f}s")
    return failures
