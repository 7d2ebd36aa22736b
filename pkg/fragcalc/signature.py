"""
Multi-sorted languages: sorts, symbols, inclusions, built-in signatures,
literal constant domains and computable presentations.
"""
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple
import logging
import re

from lark import Lark, Transformer
from lark.exceptions import LarkError, UnexpectedInput, VisitError
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from fragcalc.errors import FormulaSyntaxError, SignatureError

logger = logging.getLogger(__name__)

RESERVED_WORDS = frozenset({
    "and", "or", "not", "forall", "exists", "true", "false", "implies", "iff", "=",
})
_FORBIDDEN = re.compile(r"[\s(){}:,\[\]@]")


def _check_name(value: str) -> str:
    if not value or _FORBIDDEN.search(value):
        raise ValueError(f"invalid identifier {value!r}")
    if value in RESERVED_WORDS:
        raise ValueError(f"{value!r} is reserved")
    return value


class SymbolKind(str, Enum):
    """Kinds of non-logical symbols."""
    FUNCTION = "function"
    RELATION = "relation"
    CONSTANT = "constant"


class Sort(BaseModel):
    """A sort name such as field, group or residue."""
    model_config = ConfigDict(frozen=True)

    name: str

    @field_validator("name")
    @classmethod
    def _valid_name(cls, value: str) -> str:
        return _check_name(value)


class Symbol(BaseModel):
    """A function, relation or constant symbol with its sorted arity."""
    model_config = ConfigDict(frozen=True)

    name: str
    kind: SymbolKind
    arg_sorts: Tuple[str, ...] = ()
    result_sort: Optional[str] = None

    @field_validator("name")
    @classmethod
    def _valid_name(cls, value: str) -> str:
        return _check_name(value)

    @model_validator(mode="after")
    def _shape(self) -> "Symbol":
        if self.kind == SymbolKind.CONSTANT and self.arg_sorts:
            raise ValueError(f"constant {self.name} cannot take arguments")
        if self.kind == SymbolKind.RELATION and self.result_sort is not None:
            raise ValueError(f"relation {self.name} has no result sort")
        if self.kind != SymbolKind.RELATION and self.result_sort is None:
            raise ValueError(f"{self.kind.value} {self.name} needs a result sort")
        return self

    @property
    def arity(self) -> int:
        return len(self.arg_sorts)


class LiteralDomain(BaseModel):
    """
    An infinite presented set of constants: rationals (Q), integers mod p (F<p>)
    or rational functions over F_p (F<p>(s)).
    """
    model_config = ConfigDict(frozen=True)

    kind: str
    p: int = 0
    sort: str = "field"

    @model_validator(mode="after")
    def _shape(self) -> "LiteralDomain":
        if self.kind not in ("Q", "Fp", "Fp(s)"):
            raise ValueError(f"unknown literal domain {self.kind}")
        if self.kind == "Q" and self.p != 0:
            raise ValueError("rational literals have characteristic 0")
        if self.kind != "Q" and self.p < 2:
            raise ValueError(f"literal domain {self.kind} needs a prime p")
        return self

    @property
    def text(self) -> str:
        if self.kind == "Q":
            return "Q"
        return f"F{self.p}" if self.kind == "Fp" else f"F{self.p}(s)"

    @classmethod
    def parse(cls, text: str, sort: str = "field") -> "LiteralDomain":
        text = text.strip()
        if text == "Q":
            return cls(kind="Q", sort=sort)
        match = re.fullmatch(r"F(\d+)(\(s\))?", text)
        if not match:
            raise SignatureError(f"unknown literal domain {text!r}")
        kind = "Fp(s)" if match.group(2) else "Fp"
        return cls(kind=kind, p=int(match.group(1)), sort=sort)


class Language(BaseModel):
    """A multi-sorted signature with an optional presentation."""
    model_config = ConfigDict(frozen=True)

    name: str = "L"
    sorts: Tuple[Sort, ...]
    symbols: Tuple[Symbol, ...] = ()
    presentation: Optional[Tuple[Tuple[str, int], ...]] = None
    literals: Optional[LiteralDomain] = None

    @model_validator(mode="after")
    def _consistent(self) -> "Language":
        sort_names = [s.name for s in self.sorts]
        if len(set(sort_names)) != len(sort_names):
            raise ValueError(f"duplicate sort names in {sort_names}")
        names = [s.name for s in self.symbols]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise ValueError(f"duplicate symbol names: {duplicates}")
        for symbol in self.symbols:
            used = list(symbol.arg_sorts) + ([symbol.result_sort] if symbol.result_sort else [])
            for sort in used:
                if sort not in sort_names:
                    raise ValueError(f"symbol {symbol.name} uses undeclared sort {sort}")
        if self.presentation is not None:
            codes = [code for _, code in self.presentation]
            if len(set(codes)) != len(codes):
                raise ValueError("presentation is not injective")
            if any(code < 0 for code in codes):
                raise ValueError("presentation codes must be natural numbers")
            unknown = {n for n, _ in self.presentation} - set(names)
            if unknown:
                raise ValueError(f"presentation of unknown symbols {sorted(unknown)}")
            missing = set(names) - {n for n, _ in self.presentation}
            if missing:
                raise ValueError(f"presentation misses symbols {sorted(missing)}")
        if self.literals is not None and self.literals.sort not in sort_names:
            raise ValueError(f"literal domain on undeclared sort {self.literals.sort}")
        return self

    @property
    def sort_names(self) -> Tuple[str, ...]:
        return tuple(s.name for s in self.sorts)

    def symbol(self, name: str) -> Optional[Symbol]:
        return _symbol_table(self).get(name)

    def has_sort(self, name: str) -> bool:
        return name in self.sort_names

    def constants(self, sort: Optional[str] = None) -> List[Symbol]:
        return [s for s in self.symbols
                if s.kind == SymbolKind.CONSTANT and (sort is None or s.result_sort == sort)]

    def presentation_map(self) -> Dict[str, int]:
        if self.presentation is None:
            return {s.name: i for i, s in enumerate(self.symbols)}
        return dict(self.presentation)

    def default_sort(self) -> str:
        return "field" if self.has_sort("field") else self.sorts[0].name


@lru_cache(maxsize=256)
def _symbol_table(language: Language) -> Dict[str, Symbol]:
    return {s.name: s for s in language.symbols}


def make_language(
    sorts: Iterable[str],
    symbols: Iterable[Symbol],
    name: str = "L",
    presentation: Optional[Mapping[str, int]] = None,
    literals: Optional[LiteralDomain] = None,
) -> Language:
    """Validate and build a Language; errors surface as SignatureError."""
    try:
        return Language(
            name=name,
            sorts=tuple(Sort(name=s) for s in sorts),
            symbols=tuple(symbols),
            presentation=tuple(sorted(presentation.items())) if presentation is not None else None,
            literals=literals,
        )
    except ValidationError as e:
        raise SignatureError(_first_error(e))


def _first_error(e: ValidationError) -> str:
    errors = e.errors()
    return errors[0]["msg"].removeprefix("Value error, ") if errors else str(e)


def _symbol(**fields) -> Symbol:
    try:
        return Symbol(**fields)
    except ValidationError as e:
        raise SignatureError(_first_error(e))


def function(name: str, args: Sequence[str], result: str) -> Symbol:
    return _symbol(name=name, kind=SymbolKind.FUNCTION, arg_sorts=tuple(args), result_sort=result)


def relation(name: str, args: Sequence[str]) -> Symbol:
    return _symbol(name=name, kind=SymbolKind.RELATION, arg_sorts=tuple(args))


def constant(name: str, sort: str) -> Symbol:
    return _symbol(name=name, kind=SymbolKind.CONSTANT, result_sort=sort)


class RingNames(NamedTuple):
    """Names of the ring symbols on one sort."""
    plus: str
    minus: str
    times: str
    zero: str
    one: str
    sort: str

    def symbols(self) -> List[Symbol]:
        s = self.sort
        return [
            function(self.plus, (s, s), s),
            function(self.minus, (s, s), s),
            function(self.times, (s, s), s),
            constant(self.zero, s),
            constant(self.one, s),
        ]


FIELD_RING = RingNames("+", "-", "*", "0", "1", "field")
RESIDUE_RING = RingNames("+_k", "-_k", "*_k", "0_k", "1_k", "residue")
SORT_ALIASES = {"k": "residue"}


def has_ring(language: Language, names: RingNames = FIELD_RING) -> bool:
    """True when the full ring language on names.sort is present."""
    return all(language.symbol(s.name) == s for s in names.symbols())


# Built-in languages

def ring() -> Language:
    return make_language(["field"], FIELD_RING.symbols(), name="ring")


def graph() -> Language:
    return make_language(["vertex"], [relation("E", ("vertex", "vertex"))], name="graph")


def residue_ring() -> Language:
    """Ring language on the residue sort alone."""
    return make_language(["residue"], RESIDUE_RING.symbols(), name="residue")


def val() -> Language:
    """Three-sorted language of valued fields."""
    group_symbols = [
        function("+_G", ("group", "group"), "group"),
        function("-_G", ("group", "group"), "group"),
        constant("0_G", "group"),
        constant("inf_G", "group"),
        relation("<=_G", ("group", "group")),
        relation("<_G", ("group", "group")),
    ]
    maps = [
        function("v", ("field",), "group"),
        function("res", ("field",), "residue"),
    ]
    return make_language(
        ["field", "group", "residue"],
        FIELD_RING.symbols() + group_symbols + RESIDUE_RING.symbols() + maps,
        name="val",
    )


def empty_language(sorts: Sequence[str] = ("field",)) -> Language:
    return make_language(sorts, [], name="eq")


BUILTINS: Dict[str, Callable[[], Language]] = {
    "ring": ring,
    "graph": graph,
    "val": val,
    "residue": residue_ring,
    "eq": empty_language,
}


def builtin(name: str) -> Language:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise SignatureError(f"unknown built-in language {name!r}")


def extend_with_constants(language: Language, names: Sequence[str], sort: str) -> Language:
    """Expansion by new constants of one sort, e.g. ring -> ring(t)."""
    if not names:
        return language
    if not language.has_sort(sort):
        raise SignatureError(f"sort {sort} not declared in {language.name}")
    clash = [n for n in names if language.symbol(n) is not None]
    if clash or len(set(names)) != len(names):
        raise SignatureError(f"constant names clash: {clash or list(names)}")
    presentation = None
    if language.presentation is not None:
        presentation = language.presentation_map()
        top = max(presentation.values(), default=-1)
        for i, n in enumerate(names):
            presentation[n] = top + 1 + i
    extended = make_language(
        language.sort_names,
        list(language.symbols) + [constant(n, sort) for n in names],
        name=f"{language.name}({','.join(names)})",
        presentation=presentation,
        literals=language.literals,
    )
    logger.debug(f"Extended {language.name} by constants {list(names)} of sort {sort}")
    return extended


def constant_inclusion(language: Language, names: Sequence[str], sort: str) -> "LanguageInclusion":
    """The inclusion L -> L(c..) of extend_with_constants."""
    return LanguageInclusion.of(language, extend_with_constants(language, names, sort))


def with_literals(language: Language, domain: LiteralDomain) -> Language:
    """Attach a presented literal constant domain (the L_ring(k0) languages)."""
    if language.literals is not None:
        raise SignatureError(f"{language.name} already has literals {language.literals.text}")
    return make_language(
        language.sort_names,
        language.symbols,
        name=f"{language.name}[{domain.text}]",
        presentation=language.presentation_map() if language.presentation is not None else None,
        literals=domain,
    )


def with_presentation(language: Language, alpha: Optional[Mapping[str, int]] = None) -> Language:
    """Attach an injection symbols -> N (declaration order when alpha is omitted)."""
    alpha = dict(alpha) if alpha is not None else {s.name: i for i, s in enumerate(language.symbols)}
    return make_language(
        language.sort_names, language.symbols, name=language.name,
        presentation=alpha, literals=language.literals,
    )


def sublanguage(language: Language, symbol_names: Iterable[str], name: Optional[str] = None) -> Language:
    keep = set(symbol_names)
    unknown = keep - {s.name for s in language.symbols}
    if unknown:
        raise SignatureError(f"unknown symbols {sorted(unknown)}")
    symbols = [s for s in language.symbols if s.name in keep]
    presentation = None
    if language.presentation is not None:
        presentation = {k: v for k, v in language.presentation_map().items() if k in keep}
    return make_language(language.sort_names, symbols, name=name or f"{language.name}|sub",
                         presentation=presentation, literals=language.literals)


class LanguageInclusion(BaseModel):
    """An inclusion of languages, the identity on symbol names."""
    model_config = ConfigDict(frozen=True)

    sub: Language
    sup: Language

    @model_validator(mode="after")
    def _embeds(self) -> "LanguageInclusion":
        for sort in self.sub.sort_names:
            if not self.sup.has_sort(sort):
                raise ValueError(f"sort {sort} missing from {self.sup.name}")
        for symbol in self.sub.symbols:
            if self.sup.symbol(symbol.name) != symbol:
                raise ValueError(f"symbol {symbol.name} of {self.sub.name} not in {self.sup.name}")
        if self.sub.literals is not None and self.sub.literals != self.sup.literals:
            raise ValueError("literal domains differ")
        return self

    @classmethod
    def of(cls, sub: Language, sup: Language) -> "LanguageInclusion":
        try:
            return cls(sub=sub, sup=sup)
        except ValidationError as e:
            raise SignatureError(_first_error(e))

    @classmethod
    def identity(cls, language: Language) -> "LanguageInclusion":
        return cls(sub=language, sup=language)

    def compose(self, then: "LanguageInclusion") -> "LanguageInclusion":
        """self: A -> B followed by then: B -> C."""
        if self.sup != then.sub:
            raise SignatureError(f"cannot compose {self.sup.name} with {then.sub.name}")
        return LanguageInclusion(sub=self.sub, sup=then.sup)

    @property
    def symbol_map(self) -> Dict[str, str]:
        return {s.name: s.name for s in self.sub.symbols}


class PresentationFunctions(NamedTuple):
    """Indicator functions of symbol codes and the arity function on codes."""
    is_function: Callable[[int], bool]
    is_relation: Callable[[int], bool]
    is_constant: Callable[[int], bool]
    arity: Callable[[int], int]


def presentation_functions(language: Language) -> PresentationFunctions:
    alpha = language.presentation_map()
    by_code = {code: language.symbol(name) for name, code in alpha.items()}

    def kind_test(kind: SymbolKind) -> Callable[[int], bool]:
        return lambda code: code in by_code and by_code[code].kind == kind

    def arity(code: int) -> int:
        if code not in by_code:
            raise SignatureError(f"{code} is not a symbol code of {language.name}")
        return by_code[code].arity

    return PresentationFunctions(
        kind_test(SymbolKind.FUNCTION), kind_test(SymbolKind.RELATION),
        kind_test(SymbolKind.CONSTANT), arity,
    )


# Signature text format

SIGNATURE_GRAMMAR = r"""
    start: header? sorts_decl decl*
    header: "language" NAME
    sorts_decl: "sorts" ":" NAME+
    ?decl: "function" NAME ":" NAME* "->" NAME      -> function_decl
         | "relation" NAME ":" NAME*                -> relation_decl
         | "constant" NAME ":" NAME                 -> constant_decl
         | "literals" DOMAIN "on" NAME              -> literals_decl
    DOMAIN: /Q|F\d+(\(s\))?/
    NAME: /(?!->)[^\s:(){}\[\],@]+/
    COMMENT: /#[^\n]*/
    %import common.WS
    %ignore WS
    %ignore COMMENT
"""


class _SignatureBuilder(Transformer):
    def header(self, items):
        return ("name", str(items[0]))

    def sorts_decl(self, items):
        return ("sorts", [str(i) for i in items])

    def function_decl(self, items):
        names = [str(i) for i in items]
        return ("symbol", function(names[0], names[1:-1], names[-1]))

    def relation_decl(self, items):
        names = [str(i) for i in items]
        return ("symbol", relation(names[0], names[1:]))

    def constant_decl(self, items):
        return ("symbol", constant(str(items[0]), str(items[1])))

    def literals_decl(self, items):
        return ("literals", LiteralDomain.parse(str(items[0]), sort=str(items[1])))

    def start(self, items):
        name, sorts, symbols, literals = "L", [], [], None
        for tag, value in items:
            if tag == "name":
                name = value
            elif tag == "sorts":
                sorts = value
            elif tag == "symbol":
                symbols.append(value)
            else:
                literals = value
        return make_language(sorts, symbols, name=name, literals=literals)


_signature_parser = Lark(SIGNATURE_GRAMMAR, parser="lalr")


def parse_signature(text: str) -> Language:
    """Parse the signature text format (sorts header, one symbol per line)."""
    try:
        return _SignatureBuilder().transform(_signature_parser.parse(text))
    except UnexpectedInput as e:
        raise FormulaSyntaxError(f"signature syntax error: {e.__class__.__name__}",
                                 getattr(e, "line", None), getattr(e, "column", None))
    except VisitError as e:
        if isinstance(e.orig_exc, SignatureError):
            raise e.orig_exc
        raise SignatureError(str(e.orig_exc))
    except LarkError as e:
        raise FormulaSyntaxError(f"signature syntax error: {e}")


def format_signature(language: Language) -> str:
    lines = [f"language {language.name}", f"sorts: {' '.join(language.sort_names)}"]
    for s in language.symbols:
        if s.kind == SymbolKind.FUNCTION:
            lines.append(f"function {s.name} : {' '.join(s.arg_sorts)} -> {s.result_sort}")
        elif s.kind == SymbolKind.RELATION:
            lines.append(f"relation {s.name} : {' '.join(s.arg_sorts)}".rstrip())
        else:
            lines.append(f"constant {s.name} : {s.result_sort}")
    if language.literals is not None:
        lines.append(f"literals {language.literals.text} on {language.literals.sort}")
    return "\n".join(lines) + "\n"


_SPEC = re.compile(r"^(?P<base>[a-z]+)(\[(?P<lit>[^\]]+)\])?(\+(?P<consts>[^\s]+))?$")


def resolve_language(spec: str) -> Language:
    """
    Resolve a language spec: a built-in name with optional literal domain and
    constants (e.g. `ring`, `val+t`, `ring[F2(s)]`, `ring[Q]+X,Y`) or a path
    to a signature file.
    """
    path = Path(spec)
    if path.suffix in (".sig", ".txt") and path.exists():
        return parse_signature(path.read_text())
    match = _SPEC.match(spec.strip())
    if not match:
        raise SignatureError(f"cannot resolve language {spec!r}")
    language = builtin(match.group("base"))
    if match.group("lit"):
        language = with_literals(language, LiteralDomain.parse(match.group("lit"), language.default_sort()))
    if match.group("consts"):
        names = [n for n in match.group("consts").split(",") if n]
        language = extend_with_constants(language, names, language.default_sort())
    return language
