"""
Formula text syntax: fully parenthesized prefix form with sort-annotated
binders, parsed with lark and printed canonically.

    (forall (x field) (or (not (= (* x y) 1)) (exists (z field) (= z x))))
"""
from fractions import Fraction
from typing import Dict, List, Optional, Union
import logging

from lark import Lark, Token, Transformer
from lark.exceptions import LarkError, UnexpectedInput

from fragcalc.errors import FormulaSyntaxError
from fragcalc.formula import (
    EQUALITY, And, Apply, Atom, BOT, Bot, Constant, Exists, Forall, Formula, Not, Or,
    RingTerms, TOP, Term, Top, Variable, conj, disj,
)
from fragcalc.fpalg import RatFunc
from fragcalc.signature import FIELD_RING, SORT_ALIASES, Language, LiteralDomain, RingNames, SymbolKind, has_ring

logger = logging.getLogger(__name__)

SEXPR_GRAMMAR = r"""
    ?start: sexpr
    ?sexpr: list | LITERAL | SYMBOL
    list: "(" sexpr* ")"
    LITERAL: /\{[^{}]*\}/
    SYMBOL: /[^\s(){};]+/
    COMMENT: /;[^\n]*/
    %import common.WS
    %ignore WS
    %ignore COMMENT
"""


class _Lists(Transformer):
    def list(self, items):
        return list(items)


_sexpr_parser = Lark(SEXPR_GRAMMAR, parser="lalr")

Node = Union[Token, list]
_CONNECTIVES = {"not", "and", "or", "implies", "iff", "forall", "exists", "true", "false"}


def _where(node: Node) -> Dict[str, Optional[int]]:
    while isinstance(node, list) and node:
        node = node[0]
    if isinstance(node, Token):
        return {"line": node.line, "column": node.column}
    return {"line": None, "column": None}


def make_literal(domain: LiteralDomain, value: Union[Fraction, int, RatFunc]) -> Constant:
    """Literal constant with its canonical text as name."""
    if domain.kind == "Q":
        value = Fraction(value)
        return Constant(f"{{{value}}}", domain.sort, value)
    if domain.kind == "Fp":
        value = int(value) % domain.p
        return Constant(f"{{{value} @ {domain.p}}}", domain.sort, value)
    if not isinstance(value, RatFunc):
        value = RatFunc.constant(domain.p, int(value))
    if value.p != domain.p:
        raise FormulaSyntaxError(f"element of F{value.p}(s) in {domain.text}")
    return Constant(value.literal(), domain.sort, value)


class _Reader:
    """Turns s-expressions into sorted ASTs over a language."""

    def __init__(self, language: Language):
        self.language = language
        self.free_sorts: Dict[str, str] = {}
        self.default = language.default_sort()

    def fail(self, message: str, node: Node) -> FormulaSyntaxError:
        return FormulaSyntaxError(message, **_where(node))

    def read(self, node: Node) -> Formula:
        # settle free-variable sorts from typed contexts before building
        for _ in range(5):
            before = dict(self.free_sorts)
            self.formula(node, {})
            if before == self.free_sorts:
                break
        return self.formula(node, {})

    def formula(self, node: Node, scope: Dict[str, str]) -> Formula:
        if isinstance(node, Token):
            if node == "true":
                return TOP
            if node == "false":
                return BOT
            raise self.fail(f"expected a formula, found {node}", node)
        if not node or not isinstance(node[0], Token) or node[0].type == "LITERAL":
            raise self.fail("expected a connective or relation symbol", node)
        head, args = str(node[0]), node[1:]
        if head == "not":
            if len(args) != 1:
                raise self.fail("not takes one formula", node)
            return Not(self.formula(args[0], scope))
        if head == "and":
            return conj(self.formula(a, scope) for a in args)
        if head == "or":
            return disj(self.formula(a, scope) for a in args)
        if head in ("implies", "iff"):
            if len(args) != 2:
                raise self.fail(f"{head} takes two formulas", node)
            a, b = self.formula(args[0], scope), self.formula(args[1], scope)
            if head == "implies":
                return Or(Not(a), b)
            return And(Or(Not(a), b), Or(Not(b), a))
        if head in ("forall", "exists"):
            return self.quantifier(head, args, scope, node)
        if head in ("true", "false"):
            raise self.fail(f"{head} takes no arguments", node)
        return self.atom(head, args, scope)

    def quantifier(self, head: str, args: List[Node], scope: Dict[str, str], node: Node) -> Formula:
        if len(args) != 2 or not isinstance(args[0], list) or not args[0]:
            raise self.fail(f"{head} needs binders and a body", node)
        binders = [args[0]] if isinstance(args[0][0], Token) else args[0]
        variables = []
        inner = dict(scope)
        for binder in binders:
            if not (isinstance(binder, list) and len(binder) == 2 and all(isinstance(b, Token) for b in binder)):
                raise self.fail("binder must be (name sort)", binder)
            name, sort = str(binder[0]), SORT_ALIASES.get(str(binder[1]), str(binder[1]))
            variables.append(Variable(name, sort))
            inner[name] = sort
        body = self.formula(args[1], inner)
        cls = Forall if head == "forall" else Exists
        for v in reversed(variables):
            body = cls(v, body)
        return body

    def atom(self, relation: str, args: List[Node], scope: Dict[str, str]) -> Atom:
        if relation == EQUALITY:
            if len(args) != 2:
                raise self.fail("= takes two terms", args[0] if args else Token("SYMBOL", "="))
            sort = self.guess(args[0], scope) or self.guess(args[1], scope)
            return Atom(EQUALITY, (self.term(args[0], scope, sort), self.term(args[1], scope, sort)))
        symbol = self.language.symbol(relation)
        expected = [None] * len(args)
        if symbol is not None and symbol.kind == SymbolKind.RELATION and symbol.arity == len(args):
            expected = list(symbol.arg_sorts)
        return Atom(relation, tuple(self.term(a, scope, s) for a, s in zip(args, expected)))

    def guess(self, node: Node, scope: Dict[str, str]) -> Optional[str]:
        """Sort of a term when it is determined without context."""
        if isinstance(node, Token):
            name = str(node)
            if node.type == "LITERAL":
                return self.literal_sort(node)
            if name in scope:
                return scope[name]
            symbol = self.language.symbol(name)
            if symbol is not None and symbol.kind == SymbolKind.CONSTANT:
                return symbol.result_sort
            if name.isdigit():
                return self.ring_names(node).sort
            return self.free_sorts.get(name)
        if node and isinstance(node[0], Token):
            symbol = self.language.symbol(str(node[0]))
            if symbol is not None and symbol.kind == SymbolKind.FUNCTION:
                return symbol.result_sort
        return None

    def term(self, node: Node, scope: Dict[str, str], expected: Optional[str]) -> Term:
        if isinstance(node, Token):
            name = str(node)
            if node.type == "LITERAL":
                return self.literal(node)
            if name in _CONNECTIVES:
                raise self.fail(f"{name} is reserved and cannot be a term", node)
            if name in scope:
                return Variable(name, scope[name])
            symbol = self.language.symbol(name)
            if symbol is not None and symbol.kind == SymbolKind.CONSTANT:
                return Constant(name, symbol.result_sort)
            if name.isdigit():
                return RingTerms(self.ring_names(node)).numeral(int(name))
            if expected is not None:
                self.free_sorts.setdefault(name, expected)
            return Variable(name, expected or self.free_sorts.get(name) or self.default)
        if not node or not isinstance(node[0], Token) or node[0].type == "LITERAL":
            raise self.fail("expected a function symbol", node)
        name, args = str(node[0]), node[1:]
        symbol = self.language.symbol(name)
        if symbol is not None and symbol.kind == SymbolKind.FUNCTION and symbol.arity == len(args):
            built = tuple(self.term(a, scope, s) for a, s in zip(args, symbol.arg_sorts))
            return Apply(name, built, symbol.result_sort)
        built = tuple(self.term(a, scope, self.guess(a, scope)) for a in args)
        return Apply(name, built, expected or self.default)

    def ring_names(self, node: Node) -> RingNames:
        if has_ring(self.language, FIELD_RING):
            return FIELD_RING
        raise self.fail(f"numeral {node} needs the ring symbols on the field sort", node)

    def literal_sort(self, node: Token) -> str:
        domain = self.language.literals
        if domain is None:
            raise self.fail(f"literal {node} needs a language with literal constants", node)
        return domain.sort

    def literal(self, node: Token) -> Constant:
        domain = self.language.literals
        sort = self.literal_sort(node)
        body = str(node)[1:-1].strip()
        try:
            if "@" not in body:
                if domain.kind != "Q":
                    raise ValueError(f"literal over {domain.text} needs @ p")
                return make_literal(domain, Fraction(body.replace(" ", "")))
            coeffs, p_text = body.rsplit("@", 1)
            p = int(p_text)
            if p != domain.p or domain.kind == "Q":
                raise ValueError(f"literal over characteristic {p} in {domain.text}")
            num_text, den_text = coeffs.split("/") if "/" in coeffs else (coeffs, "1")
            num = [int(c) for c in num_text.split()]
            den = [int(c) for c in den_text.split()]
            if domain.kind == "Fp":
                if len(num) != 1 or den != [1]:
                    raise ValueError(f"literal of F{p} is a single residue")
                return make_literal(domain, num[0])
            return make_literal(domain, RatFunc.from_coeffs(p, num, den))
        except (ValueError, ZeroDivisionError) as e:
            raise self.fail(f"bad literal {node}: {e}", node)


def _read_sexpr(text: str) -> Node:
    try:
        tree = _sexpr_parser.parse(text)
    except UnexpectedInput as e:
        raise FormulaSyntaxError(f"syntax error near {e.get_context(text, 20).strip()!r}",
                                 getattr(e, "line", None), getattr(e, "column", None))
    except LarkError as e:
        raise FormulaSyntaxError(f"syntax error: {e}")
    return _Lists().transform(tree) if not isinstance(tree, Token) else tree


def parse_formula(text: str, language: Language) -> Formula:
    """Parse one formula; free-variable sorts are inferred from context."""
    return _Reader(language).read(_read_sexpr(text))


def parse_term(text: str, language: Language, sort: Optional[str] = None) -> Term:
    return _Reader(language).term(_read_sexpr(text), {}, sort)


def parse_formulas(text: str, language: Language) -> List[Formula]:
    """Newline-delimited corpus; blank lines and ; comments are skipped."""
    formulas = []
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(";"):
            continue
        try:
            formulas.append(parse_formula(stripped, language))
        except FormulaSyntaxError as e:
            raise FormulaSyntaxError(e.message, number, e.column)
    return formulas


# Printing

def format_term(t: Term) -> str:
    if isinstance(t, (Variable, Constant)):
        return t.name
    return f"({t.function} {' '.join(format_term(a) for a in t.args)})"


def format_formula(phi: Formula) -> str:
    """Canonical text; parse(format(φ)) == φ."""
    if isinstance(phi, Top):
        return "true"
    if isinstance(phi, Bot):
        return "false"
    if isinstance(phi, Atom):
        if not phi.args:
            return f"({phi.relation})"
        return f"({phi.relation} {' '.join(format_term(a) for a in phi.args)})"
    if isinstance(phi, Not):
        return f"(not {format_formula(phi.body)})"
    if isinstance(phi, And):
        return f"(and {format_formula(phi.left)} {format_formula(phi.right)})"
    if isinstance(phi, Or):
        return f"(or {format_formula(phi.left)} {format_formula(phi.right)})"
    return f"({phi.kind} ({phi.var.name} {phi.var.sort}) {format_formula(phi.body)})"
