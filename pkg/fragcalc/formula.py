"""
Sorted terms and formulas: free variables, capture-avoiding substitution,
fresh names, well-sortedness diagnostics and formula builders.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, ClassVar, Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple, Union
import logging
import re

from fragcalc.config import get_settings
from fragcalc.errors import SortError
from fragcalc.models import Diagnostic
from fragcalc.signature import Language, LanguageInclusion, RingNames, SymbolKind

logger = logging.getLogger(__name__)
settings = get_settings()


# Terms

@dataclass(frozen=True)
class Variable:
    name: str
    sort: str


@dataclass(frozen=True)
class Constant:
    """A constant symbol, or a literal when value carries the element."""
    name: str
    sort: str
    value: Any = None

    @property
    def is_literal(self) -> bool:
        return self.value is not None


@dataclass(frozen=True)
class Apply:
    function: str
    args: Tuple["Term", ...]
    sort: str


Term = Union[Variable, Constant, Apply]


# Formulas

@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Bot:
    pass


@dataclass(frozen=True)
class Atom:
    """Relation applied to terms; the relation "=" is equality on any sort."""
    relation: str
    args: Tuple[Term, ...]


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Forall:
    var: Variable
    body: "Formula"
    kind: ClassVar[str] = "forall"


@dataclass(frozen=True)
class Exists:
    var: Variable
    body: "Formula"
    kind: ClassVar[str] = "exists"


Formula = Union[Top, Bot, Atom, Not, And, Or, Forall, Exists]
Quantifier = (Forall, Exists)
Binary = (And, Or)
TOP = Top()
BOT = Bot()
EQUALITY = "="


def quantify(kind: str, var: Variable, body: Formula) -> Formula:
    if kind == "forall":
        return Forall(var, body)
    if kind == "exists":
        return Exists(var, body)
    raise ValueError(f"unknown quantifier {kind}")


def dual(kind: str) -> str:
    return "exists" if kind == "forall" else "forall"


def children(phi: Formula) -> Tuple[Formula, ...]:
    if isinstance(phi, Not) or isinstance(phi, Quantifier):
        return (phi.body,)
    if isinstance(phi, Binary):
        return (phi.left, phi.right)
    return ()


# Variables and constants

def term_variables(t: Term) -> FrozenSet[Variable]:
    if isinstance(t, Variable):
        return frozenset([t])
    if isinstance(t, Apply):
        return frozenset().union(*(term_variables(a) for a in t.args))
    return frozenset()


@lru_cache(maxsize=65536)
def free_variables(phi: Formula) -> FrozenSet[Variable]:
    """Var(φ): the variables with a free occurrence."""
    if isinstance(phi, Atom):
        return frozenset().union(*(term_variables(a) for a in phi.args))
    if isinstance(phi, Quantifier):
        return free_variables(phi.body) - {phi.var}
    return frozenset().union(*(free_variables(c) for c in children(phi)))


def is_sentence(phi: Formula) -> bool:
    return not free_variables(phi)


def term_constants(t: Term) -> Set[Constant]:
    if isinstance(t, Constant):
        return {t}
    if isinstance(t, Apply):
        return set().union(*(term_constants(a) for a in t.args))
    return set()


def constants_of(phi: Union[Formula, Term]) -> Set[Constant]:
    if isinstance(phi, (Variable, Constant, Apply)):
        return term_constants(phi)
    if isinstance(phi, Atom):
        return set().union(*(term_constants(a) for a in phi.args))
    return set().union(*(constants_of(c) for c in children(phi)))


def function_symbols(phi: Union[Formula, Term]) -> Set[str]:
    if isinstance(phi, Apply):
        return {phi.function}.union(*(function_symbols(a) for a in phi.args))
    if isinstance(phi, (Variable, Constant)):
        return set()
    if isinstance(phi, Atom):
        return set().union(*(function_symbols(a) for a in phi.args))
    return set().union(*(function_symbols(c) for c in children(phi)))


def variable_names(phi: Union[Formula, Term]) -> Set[str]:
    """Every variable name occurring in φ, free, bound or as a binder."""
    if isinstance(phi, (Variable, Constant, Apply)):
        return {v.name for v in term_variables(phi)}
    if isinstance(phi, Atom):
        return {v.name for a in phi.args for v in term_variables(a)}
    names = set().union(*(variable_names(c) for c in children(phi)))
    if isinstance(phi, Quantifier):
        names.add(phi.var.name)
    return names


def bound_variables(phi: Formula) -> List[Variable]:
    """Binders in preorder."""
    found: List[Variable] = []
    stack = [phi]
    while stack:
        node = stack.pop()
        if isinstance(node, Quantifier):
            found.append(node.var)
        stack.extend(reversed(children(node)))
    return found


def size(phi: Formula) -> int:
    """Number of formula nodes; terms do not count."""
    return 1 + sum(size(c) for c in children(phi))


def quantifier_depth(phi: Formula) -> int:
    inner = max((quantifier_depth(c) for c in children(phi)), default=0)
    return inner + 1 if isinstance(phi, Quantifier) else inner


def quantifier_count(phi: Formula) -> int:
    own = 1 if isinstance(phi, Quantifier) else 0
    return own + sum(quantifier_count(c) for c in children(phi))


# Fresh names

def fresh_name(stem: str, avoid: Iterable[str]) -> str:
    """Smallest unused name stem'i in the reserved namespace."""
    marker = settings.fresh_marker
    base = re.sub(re.escape(marker) + r"\d+$", "", stem)
    taken = set(avoid)
    i = 0
    while f"{base}{marker}{i}" in taken:
        i += 1
    return f"{base}{marker}{i}"


def fresh_variable(var: Variable, avoid: Iterable[str]) -> Variable:
    return Variable(fresh_name(var.name, avoid), var.sort)


# Substitution

def substitute_in_term(t: Term, mapping: Mapping[Variable, Term]) -> Term:
    if isinstance(t, Variable):
        return mapping.get(t, t)
    if isinstance(t, Apply):
        return Apply(t.function, tuple(substitute_in_term(a, mapping) for a in t.args), t.sort)
    return t


def substitute_terms(phi: Formula, mapping: Mapping[Variable, Term]) -> Formula:
    """Simultaneous capture-avoiding substitution of terms for free variables."""
    for source, target in mapping.items():
        target_sort = target.sort
        if source.sort != target_sort:
            raise SortError(f"cannot substitute {target_sort} term for {source.name}: {source.sort}")
    return _substitute(phi, dict(mapping))


def _substitute(phi: Formula, mapping: Dict[Variable, Term]) -> Formula:
    if not mapping:
        return phi
    if isinstance(phi, (Top, Bot)):
        return phi
    if isinstance(phi, Atom):
        return Atom(phi.relation, tuple(substitute_in_term(a, mapping) for a in phi.args))
    if isinstance(phi, Not):
        return Not(_substitute(phi.body, mapping))
    if isinstance(phi, Binary):
        return type(phi)(_substitute(phi.left, mapping), _substitute(phi.right, mapping))
    var = phi.var
    body_free = free_variables(phi.body)
    inner = {k: v for k, v in mapping.items() if k != var and k in body_free}
    if not inner:
        return phi
    incoming = {v.name for t in inner.values() for v in term_variables(t)}
    if var.name in incoming:
        avoid = variable_names(phi.body) | incoming | {k.name for k in inner}
        renamed = fresh_variable(var, avoid)
        inner[var] = renamed
        var = renamed
    return type(phi)(var, _substitute(phi.body, inner))


def substitute(phi: Formula, mapping: Mapping[Variable, Variable]) -> Formula:
    """Rename free variables; targets need not be distinct."""
    return substitute_terms(phi, mapping)


def replace_constants(phi: Formula, mapping: Mapping[str, Term]) -> Formula:
    """Replace constant symbols by terms; variables in the terms may be captured only if unbound in φ."""
    def in_term(t: Term) -> Term:
        if isinstance(t, Constant) and t.name in mapping and not t.is_literal:
            target = mapping[t.name]
            if target.sort != t.sort:
                raise SortError(f"cannot replace {t.name}: {t.sort} by a {target.sort} term")
            return target
        if isinstance(t, Apply):
            return Apply(t.function, tuple(in_term(a) for a in t.args), t.sort)
        return t

    def walk(node: Formula) -> Formula:
        if isinstance(node, Atom):
            return Atom(node.relation, tuple(in_term(a) for a in node.args))
        if isinstance(node, Not):
            return Not(walk(node.body))
        if isinstance(node, Binary):
            return type(node)(walk(node.left), walk(node.right))
        if isinstance(node, Quantifier):
            return type(node)(node.var, walk(node.body))
        return node

    return walk(phi)


# Well-sortedness

def well_sorted(language: Language, phi: Formula) -> List[Diagnostic]:
    """Diagnostics with AST paths; empty iff φ is well-sorted over the language."""
    diagnostics: List[Diagnostic] = []
    free_sorts: Dict[str, str] = {}

    def report(message: str, path: Tuple[int, ...]) -> None:
        diagnostics.append(Diagnostic(message=message, path=list(path)))

    def check_variable(v: Variable, bound: Mapping[str, str], path: Tuple[int, ...]) -> None:
        if not language.has_sort(v.sort):
            report(f"variable {v.name} has undeclared sort {v.sort}", path)
        if v.name in bound:
            if bound[v.name] != v.sort:
                report(f"variable {v.name} bound at sort {bound[v.name]} used at sort {v.sort}", path)
        elif free_sorts.setdefault(v.name, v.sort) != v.sort:
            report(f"variable {v.name} used at sorts {free_sorts[v.name]} and {v.sort}", path)

    def check_term(t: Term, bound: Mapping[str, str], path: Tuple[int, ...]) -> None:
        if isinstance(t, Variable):
            check_variable(t, bound, path)
        elif isinstance(t, Constant):
            if t.is_literal:
                domain = language.literals
                if domain is None:
                    report(f"literal {t.name} but {language.name} has no literal constants", path)
                elif domain.sort != t.sort:
                    report(f"literal {t.name} of sort {t.sort}, expected {domain.sort}", path)
                return
            symbol = language.symbol(t.name)
            if symbol is None:
                report(f"unknown symbol {t.name}", path)
            elif symbol.kind != SymbolKind.CONSTANT:
                report(f"{t.name} is a {symbol.kind.value}, not a constant", path)
            elif symbol.result_sort != t.sort:
                report(f"constant {t.name} has sort {symbol.result_sort}, not {t.sort}", path)
        else:
            symbol = language.symbol(t.function)
            if symbol is None:
                report(f"unknown symbol {t.function}", path)
            elif symbol.kind != SymbolKind.FUNCTION:
                report(f"{t.function} is a {symbol.kind.value}, not a function", path)
            else:
                check_arguments(t.function, symbol.arg_sorts, t.args, path)
                if symbol.result_sort != t.sort:
                    report(f"{t.function} returns {symbol.result_sort}, not {t.sort}", path)
            for i, a in enumerate(t.args):
                check_term(a, bound, path + (i,))

    def check_arguments(name: str, expected: Tuple[str, ...], args: Tuple[Term, ...], path: Tuple[int, ...]) -> None:
        if len(expected) != len(args):
            report(f"{name} expects {len(expected)} arguments, got {len(args)}", path)
            return
        for i, (sort, arg) in enumerate(zip(expected, args)):
            if arg.sort != sort:
                report(f"argument {i} of {name} has sort {arg.sort}, expected {sort}", path + (i,))

    def walk(node: Formula, bound: Dict[str, str], path: Tuple[int, ...]) -> None:
        if isinstance(node, Atom):
            if node.relation == EQUALITY:
                if len(node.args) != 2:
                    report(f"equality takes 2 arguments, got {len(node.args)}", path)
                elif node.args[0].sort != node.args[1].sort:
                    report(f"equality between sorts {node.args[0].sort} and {node.args[1].sort}", path)
            else:
                symbol = language.symbol(node.relation)
                if symbol is None:
                    report(f"unknown symbol {node.relation}", path)
                elif symbol.kind != SymbolKind.RELATION:
                    report(f"{node.relation} is a {symbol.kind.value}, not a relation", path)
                else:
                    check_arguments(node.relation, symbol.arg_sorts, node.args, path)
            for i, a in enumerate(node.args):
                check_term(a, bound, path + (i,))
        elif isinstance(node, Quantifier):
            if not language.has_sort(node.var.sort):
                report(f"binder {node.var.name} has undeclared sort {node.var.sort}", path)
            walk(node.body, {**bound, node.var.name: node.var.sort}, path + (0,))
        else:
            for i, c in enumerate(children(node)):
                walk(c, bound, path + (i,))

    walk(phi, {}, ())
    return diagnostics


def require_well_sorted(language: Language, phi: Formula) -> None:
    """Raise SortError carrying the first diagnostic."""
    problems = well_sorted(language, phi)
    if problems:
        first = problems[0]
        raise SortError(first.message, tuple(first.path))


def include(phi: Formula, inclusion: LanguageInclusion) -> Formula:
    """Carry a formula of the smaller language into the larger one."""
    require_well_sorted(inclusion.sub, phi)
    return phi


# Builders

def conj(parts: Iterable[Formula]) -> Formula:
    """Left-associated conjunction; empty is ⊤."""
    result: Optional[Formula] = None
    for part in parts:
        result = part if result is None else And(result, part)
    return TOP if result is None else result


def disj(parts: Iterable[Formula]) -> Formula:
    """Left-associated disjunction; empty is ⊥."""
    result: Optional[Formula] = None
    for part in parts:
        result = part if result is None else Or(result, part)
    return BOT if result is None else result


def exists_many(variables: Iterable[Variable], body: Formula) -> Formula:
    for v in reversed(list(variables)):
        body = Exists(v, body)
    return body


def forall_many(variables: Iterable[Variable], body: Formula) -> Formula:
    for v in reversed(list(variables)):
        body = Forall(v, body)
    return body


def eq(left: Term, right: Term) -> Atom:
    return Atom(EQUALITY, (left, right))


def neq(left: Term, right: Term) -> Not:
    return Not(eq(left, right))


def conjuncts(phi: Formula) -> List[Formula]:
    """Flatten nested conjunctions, left to right."""
    if isinstance(phi, And):
        return conjuncts(phi.left) + conjuncts(phi.right)
    return [phi]


def disjuncts(phi: Formula) -> List[Formula]:
    if isinstance(phi, Or):
        return disjuncts(phi.left) + disjuncts(phi.right)
    return [phi]


class RingTerms:
    """Term builder for the ring symbols on one sort."""

    def __init__(self, names: RingNames):
        self.names = names

    def zero(self) -> Constant:
        return Constant(self.names.zero, self.names.sort)

    def one(self) -> Constant:
        return Constant(self.names.one, self.names.sort)

    def add(self, a: Term, b: Term) -> Apply:
        return Apply(self.names.plus, (a, b), self.names.sort)

    def sub(self, a: Term, b: Term) -> Apply:
        return Apply(self.names.minus, (a, b), self.names.sort)

    def mul(self, a: Term, b: Term) -> Apply:
        return Apply(self.names.times, (a, b), self.names.sort)

    def power(self, base: Term, exponent: int) -> Term:
        """Repeated multiplication; exponent 0 gives 1."""
        if exponent < 0:
            raise ValueError("negative exponent")
        if exponent == 0:
            return self.one()
        result = base
        for _ in range(exponent - 1):
            result = self.mul(result, base)
        return result

    def sum(self, terms: Iterable[Term]) -> Term:
        result: Optional[Term] = None
        for t in terms:
            result = t if result is None else self.add(result, t)
        return self.zero() if result is None else result

    def product(self, terms: Iterable[Term]) -> Term:
        result: Optional[Term] = None
        for t in terms:
            result = t if result is None else self.mul(result, t)
        return self.one() if result is None else result

    def numeral(self, n: int) -> Term:
        """n as 1 + ... + 1; 0 and 1 are the constants."""
        if n < 0:
            raise ValueError("negative numeral")
        if n == 0:
            return self.zero()
        return self.sum(self.one() for _ in range(n))
