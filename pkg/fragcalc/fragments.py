"""
Fragment descriptors: decidable membership, prenex form relative to a
fragment, and relativization of quantifiers to a definable set.
"""
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import List, Optional, Set, Tuple
import logging

from lark import Lark, Transformer
from lark.exceptions import LarkError, UnexpectedInput, VisitError

from fragcalc.errors import FormulaSyntaxError, FragmentError
from fragcalc.formula import (
    And, Binary, Bot, Exists, Forall, Formula, Not, Or, Quantifier, Top, Variable,
    dual, free_variables, fresh_variable, quantify, require_well_sorted, substitute, variable_names,
)
from fragcalc.signature import SORT_ALIASES, Language

logger = logging.getLogger(__name__)

KINDS = ("forall", "exists")
_LETTER = {"forall": "A", "exists": "E"}
_KIND = {"A": "forall", "E": "exists"}
_SORT_NAMES = {v: k for k, v in SORT_ALIASES.items()}


class BlockMode(str, Enum):
    """Multiplicity modes of a quantifier block."""
    PREFIX = "prefix"          # Q_n[F]: at most n quantifiers, no boolean closure
    CLOSED = "closed"          # Q_n F
    NESTED = "nested"          # Q^n F
    UNBOUNDED = "unbounded"    # QF


@dataclass(frozen=True)
class QuantifierBlock:
    kind: str
    mode: BlockMode
    n: Optional[int] = None
    sort: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FragmentError(f"unknown quantifier kind {self.kind}")
        if self.mode in (BlockMode.CLOSED, BlockMode.NESTED) and (self.n is None or self.n < 1):
            raise FragmentError(f"{self.mode.value} block needs n >= 1")
        if self.mode == BlockMode.PREFIX and self.n is not None and self.n < 1:
            raise FragmentError("prefix block needs n >= 1")
        if self.mode == BlockMode.UNBOUNDED and self.n is not None:
            raise FragmentError("unbounded block takes no count")

    def admits(self, var: Variable) -> bool:
        return self.sort is None or var.sort == self.sort

    def text(self) -> str:
        letter = _LETTER[self.kind]
        count = ""
        if self.n is not None:
            count = f"^{self.n}" if self.mode == BlockMode.NESTED else str(self.n)
        sort = f"@{_SORT_NAMES.get(self.sort, self.sort)}" if self.sort else ""
        return f"{letter}{count}{sort}"


@dataclass(frozen=True)
class FragmentDescriptor:
    """Quantifier blocks over the quantifier-free base, innermost last."""
    blocks: Tuple[QuantifierBlock, ...] = ()
    full: bool = False

    def __post_init__(self):
        if self.full and self.blocks:
            raise FragmentError("the full fragment takes no blocks")

    @property
    def head(self) -> Optional[QuantifierBlock]:
        return self.blocks[0] if self.blocks else None

    @property
    def inner(self) -> "FragmentDescriptor":
        return FragmentDescriptor(self.blocks[1:])

    @property
    def is_base(self) -> bool:
        return not self.blocks and not self.full

    def prepend(self, block: QuantifierBlock) -> "FragmentDescriptor":
        if self.full:
            return self
        return FragmentDescriptor((block,) + self.blocks)

    def __str__(self) -> str:
        return format_descriptor(self)


F0 = FragmentDescriptor()
FORM = FragmentDescriptor(full=True)


def prefix_only(kind: str, n: Optional[int], inner: FragmentDescriptor = F0, sort: Optional[str] = None) -> FragmentDescriptor:
    return inner.prepend(QuantifierBlock(kind, BlockMode.PREFIX, n, sort))


def closed(kind: str, n: int, inner: FragmentDescriptor = F0, sort: Optional[str] = None) -> FragmentDescriptor:
    return inner.prepend(QuantifierBlock(kind, BlockMode.CLOSED, n, sort))


def nested(kind: str, n: int, inner: FragmentDescriptor = F0, sort: Optional[str] = None) -> FragmentDescriptor:
    return inner.prepend(QuantifierBlock(kind, BlockMode.NESTED, n, sort))


def unbounded(kind: str, inner: FragmentDescriptor = F0, sort: Optional[str] = None) -> FragmentDescriptor:
    return inner.prepend(QuantifierBlock(kind, BlockMode.UNBOUNDED, None, sort))


EXISTENTIAL = unbounded("exists")
UNIVERSAL = unbounded("forall")


# Descriptor text syntax

DESCRIPTOR_GRAMMAR = r"""
    ?start: desc
    desc: "F0"                  -> base
        | "Form"                -> form
        | BLOCK "[" desc "]"    -> prefix
        | BLOCK desc?           -> block
    BLOCK: /[AE](\^?[0-9]+)?(@[A-Za-z_][A-Za-z0-9_]*)?/
    %import common.WS
    %ignore WS
"""


def _read_block(token: str) -> Tuple[str, Optional[int], bool, Optional[str]]:
    kind = _KIND[token[0]]
    rest = token[1:]
    sort = None
    if "@" in rest:
        rest, sort = rest.split("@", 1)
        sort = SORT_ALIASES.get(sort, sort)
    nested_count = rest.startswith("^")
    count = int(rest.lstrip("^")) if rest else None
    return kind, count, nested_count, sort


class _DescriptorBuilder(Transformer):
    def base(self, _):
        return F0

    def form(self, _):
        return FORM

    def prefix(self, items):
        kind, count, nested_count, sort = _read_block(str(items[0]))
        if nested_count:
            raise FragmentError(f"bracketed block {items[0]} cannot be nested")
        return prefix_only(kind, count, items[1], sort)

    def block(self, items):
        kind, count, nested_count, sort = _read_block(str(items[0]))
        inner = items[1] if len(items) > 1 and items[1] is not None else F0
        if count is None:
            return unbounded(kind, inner, sort)
        if nested_count:
            return nested(kind, count, inner, sort)
        return closed(kind, count, inner, sort)


_descriptor_parser = Lark(DESCRIPTOR_GRAMMAR, parser="lalr", maybe_placeholders=False)


@lru_cache(maxsize=512)
def parse_descriptor(text: str) -> FragmentDescriptor:
    """Parse "E", "A1[E]", "A2 E", "A^2 E", "A@k E", "E@k[F0]", "F0" or "Form"."""
    try:
        return _DescriptorBuilder().transform(_descriptor_parser.parse(text))
    except UnexpectedInput as e:
        raise FormulaSyntaxError(f"bad fragment descriptor {text!r}",
                                 getattr(e, "line", None), getattr(e, "column", None))
    except VisitError as e:
        raise FragmentError(str(e.orig_exc))
    except LarkError as e:
        raise FormulaSyntaxError(f"bad fragment descriptor {text!r}: {e}")


def format_descriptor(d: FragmentDescriptor) -> str:
    if d.full:
        return "Form"
    if not d.blocks:
        return "F0"
    head, inner = d.blocks[0], d.inner
    if head.mode == BlockMode.PREFIX:
        return f"{head.text()}[{format_descriptor(inner)}]"
    if inner.is_base:
        return head.text()
    return f"{head.text()} {format_descriptor(inner)}"


def normalize(d: FragmentDescriptor) -> FragmentDescriptor:
    """Merge adjacent unbounded blocks of one kind and read Q^1 as Q_1."""
    blocks: List[QuantifierBlock] = []
    for block in d.blocks:
        if block.mode == BlockMode.NESTED and block.n == 1:
            block = QuantifierBlock(block.kind, BlockMode.CLOSED, 1, block.sort)
        if (blocks and block.mode == BlockMode.UNBOUNDED and blocks[-1].mode == BlockMode.UNBOUNDED
                and blocks[-1].kind == block.kind and blocks[-1].sort == block.sort):
            continue
        blocks.append(block)
    return FragmentDescriptor(tuple(blocks), d.full)


def is_exists_absorbing(d: FragmentDescriptor) -> bool:
    """True iff ∃F = F."""
    return normalize(unbounded("exists", d)) == normalize(d)


def is_alternating_from(d: FragmentDescriptor, kind: str) -> bool:
    """F is one of Q, QQ', QQ'Q, ... (unbounded, unrestricted, alternating, starting with kind)."""
    if d.full or not d.blocks:
        return False
    expected = kind
    for block in d.blocks:
        if block.mode != BlockMode.UNBOUNDED or block.sort is not None or block.kind != expected:
            return False
        expected = dual(expected)
    return True


def alternation_pattern(d: FragmentDescriptor) -> str:
    return "".join(_LETTER[b.kind] for b in d.blocks)


# Membership

def _quantifier_free(phi: Formula) -> bool:
    if isinstance(phi, Quantifier):
        return False
    if isinstance(phi, Not):
        return _quantifier_free(phi.body)
    if isinstance(phi, Binary):
        return _quantifier_free(phi.left) and _quantifier_free(phi.right)
    return True


@lru_cache(maxsize=1 << 17)
def _member(blocks: Tuple[QuantifierBlock, ...], phi: Formula) -> bool:
    if not blocks:
        return _quantifier_free(phi)
    head, inner = blocks[0], blocks[1:]
    if head.mode == BlockMode.PREFIX:
        return _prefix_member(head, head.n, inner, phi)
    if head.mode == BlockMode.CLOSED or (head.mode == BlockMode.NESTED and head.n == 1):
        return _closure(lambda f: _prefix_member(head, head.n, inner, f), phi)
    if head.mode == BlockMode.NESTED:
        below = (QuantifierBlock(head.kind, BlockMode.NESTED, head.n - 1, head.sort),) + inner
        return _closure(lambda f: _prefix_member(head, 1, below, f), phi)
    return _unbounded_member(head, inner, phi)


def _prefix_member(head: QuantifierBlock, n: Optional[int], inner: Tuple[QuantifierBlock, ...], phi: Formula) -> bool:
    taken = 0
    while True:
        if _member(inner, phi):
            return True
        if n is not None and taken == n:
            return False
        if not (isinstance(phi, Quantifier) and phi.kind == head.kind and head.admits(phi.var)):
            return False
        phi = phi.body
        taken += 1


def _closure(base, phi: Formula) -> bool:
    if base(phi) or isinstance(phi, (Top, Bot)):
        return True
    if isinstance(phi, Binary):
        return _closure(base, phi.left) and _closure(base, phi.right)
    return False


def _unbounded_member(head: QuantifierBlock, inner: Tuple[QuantifierBlock, ...], phi: Formula) -> bool:
    if _member(inner, phi) or isinstance(phi, (Top, Bot)):
        return True
    if isinstance(phi, Binary):
        return _unbounded_member(head, inner, phi.left) and _unbounded_member(head, inner, phi.right)
    if isinstance(phi, Quantifier) and phi.kind == head.kind and head.admits(phi.var):
        return _unbounded_member(head, inner, phi.body)
    return False


def mem_fragment(d: FragmentDescriptor, language: Optional[Language], phi: Formula) -> bool:
    """Membership of φ in the fragment d; ill-sorted φ raises SortError."""
    if language is not None:
        require_well_sorted(language, phi)
    if d.full:
        return True
    return _member(d.blocks, phi)


@lru_cache(maxsize=1 << 16)
def _member_negation_closure(d: FragmentDescriptor, phi: Formula) -> bool:
    if d.full or _member(d.blocks, phi):
        return True
    if isinstance(phi, Not):
        return _member_negation_closure(d, phi.body)
    if isinstance(phi, Binary):
        return _member_negation_closure(d, phi.left) and _member_negation_closure(d, phi.right)
    return False


def mem_negation_closure(d: FragmentDescriptor, phi: Formula) -> bool:
    """Membership in F′, the least set extending F closed under ∧, ∨ and ¬."""
    return _member_negation_closure(d, phi)


# Prenex form relative to a fragment

Prefix = List[Tuple[str, Variable]]


def _split(phi: Formula, k: int) -> Tuple[Prefix, Formula]:
    prefix: Prefix = []
    for _ in range(k):
        prefix.append((phi.kind, phi.var))
        phi = phi.body
    return prefix, phi


def _join(prefix: Prefix, matrix: Formula) -> Formula:
    for kind, var in reversed(prefix):
        matrix = quantify(kind, var, matrix)
    return matrix


def _strip(d: FragmentDescriptor, phi: Formula) -> Tuple[Prefix, Formula]:
    """Minimal prefix whose remainder lies in F′."""
    prefix: Prefix = []
    while not mem_negation_closure(d, phi) and isinstance(phi, Quantifier):
        prefix.append((phi.kind, phi.var))
        phi = phi.body
    return prefix, phi


def _rename_binder(prefix: Prefix, matrix: Formula, position: int, avoid: Set[str]) -> Tuple[Prefix, Formula]:
    kind, var = prefix[position]
    renamed = fresh_variable(var, avoid)
    avoid.add(renamed.name)
    rest = _join(prefix[position + 1:], matrix)
    rest = substitute(rest, {var: renamed})
    tail, matrix = _split(rest, len(prefix) - position - 1)
    return prefix[:position] + [(kind, renamed)] + tail, matrix


@dataclass
class _Prenexer:
    d: FragmentDescriptor
    avoid: Set[str] = field(default_factory=set)

    def run(self, phi: Formula) -> Formula:
        if mem_negation_closure(self.d, phi):
            return phi
        if isinstance(phi, Quantifier):
            return type(phi)(phi.var, self.run(phi.body))
        if isinstance(phi, Not):
            prefix, matrix = _strip(self.d, self.run(phi.body))
            return _join([(dual(kind), var) for kind, var in prefix], Not(matrix))
        first, second = self.run(phi.left), self.run(phi.right)
        prefix1, eta1 = _strip(self.d, first)
        prefix2, eta2 = _strip(self.d, second)
        second_free = {v.name for v in free_variables(second)}
        for j in range(len(prefix1)):
            if prefix1[j][1].name in second_free:
                prefix1, eta1 = _rename_binder(prefix1, eta1, j, self.avoid)
        for j in range(len(prefix2)):
            outer_names = {v.name for _, v in prefix1} | {v.name for v in free_variables(eta1)}
            if prefix2[j][1].name in outer_names:
                prefix2, eta2 = _rename_binder(prefix2, eta2, j, self.avoid)
        return _join(prefix1 + prefix2, type(phi)(eta1, eta2))


def prnx(d: FragmentDescriptor, language: Optional[Language], phi: Formula) -> Formula:
    """Prenex form relative to d: members of F′ are left untouched."""
    if language is not None:
        require_well_sorted(language, phi)
    return _Prenexer(d, set(variable_names(phi))).run(phi)


def prenex_split(d: FragmentDescriptor, language: Optional[Language], phi: Formula) -> Tuple[Prefix, Formula]:
    """prnx(d, φ) as (prefix, matrix) with the matrix in F′ and distinct binders."""
    result = prnx(d, language, phi)
    prefix, matrix = _strip(d, result)
    avoid = set(variable_names(result))
    distinct: Prefix = []
    later: Set[str] = set()
    for kind, var in reversed(prefix):
        # a shadowed binder binds nothing and may be renamed freely
        if var.name in later:
            var = fresh_variable(var, avoid)
            avoid.add(var.name)
        later.add(var.name)
        distinct.append((kind, var))
    return distinct[::-1], matrix


def prenex_rank(d: FragmentDescriptor, language: Optional[Language], phi: Formula) -> int:
    return len(prenex_split(d, language, phi)[0])


def leading_block(prefix: Prefix, kind: str) -> Tuple[List[Variable], Prefix]:
    """Split off the maximal leading run of quantifiers of one kind."""
    run: List[Variable] = []
    for i, (k, var) in enumerate(prefix):
        if k != kind:
            return run, prefix[i:]
        run.append(var)
    return run, []


# Relativization

def _single_free(eta: Formula, label: str) -> Variable:
    free = free_variables(eta)
    if len(free) != 1:
        raise FragmentError(f"{label} must have exactly one free variable, has {len(free)}")
    return next(iter(free))


def relativize(phi: Formula, eta: Formula, eta_dual: Optional[Formula] = None) -> Formula:
    """
    Relativize every quantifier of φ to the set defined by η:
    ∃x α becomes ∃x(η(x) ∧ α) and ∀x α becomes ∀x(η′(x) ∨ α),
    where η′ defaults to the quantifier-free-relative prenex form of ¬η.
    """
    v = _single_free(eta, "relativizing formula")
    if eta_dual is None:
        eta_dual = prnx(F0, None, Not(eta))
    elif not free_variables(eta_dual) <= {v}:
        raise FragmentError("dual relativizing formula must share the free variable")

    def at(formula: Formula, x: Variable) -> Formula:
        return substitute(formula, {v: x})

    def walk(node: Formula) -> Formula:
        if isinstance(node, Exists):
            return Exists(node.var, And(at(eta, node.var), walk(node.body)))
        if isinstance(node, Forall):
            return Forall(node.var, Or(at(eta_dual, node.var), walk(node.body)))
        if isinstance(node, Not):
            return Not(walk(node.body))
        if isinstance(node, Binary):
            return type(node)(walk(node.left), walk(node.right))
        return node

    return walk(phi)
