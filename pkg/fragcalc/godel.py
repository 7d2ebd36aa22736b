"""
Gödel coding of formulas over a presented language.

A formula becomes its tagged preorder token stream; every token is a natural
number written in Elias gamma code and the concatenated bits, behind a
leading 1, are read as one integer. Symbol tokens are presentation codes,
variable names are their UTF-8 bytes behind a 0x01 byte, sorts are indices
into the language's sort list, and literal constants use the element codes
below (Cantor pairing for rationals and coefficient lists).

    formula  Top 0 | Bot 1 | = 2 t t | R 3 α(R) t.. | not 4 f | and 5 f f
             or 6 f f | forall 7 name sort f | exists 8 name sort f
    term     var 0 name sort | const 1 α(c) | literal 2 code | f 3 α(f) t..
"""
from fractions import Fraction
from math import isqrt
from typing import Callable, Dict, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union
import logging

from fragcalc.errors import DecodeFailure, FragcalcError, SignatureError
from fragcalc.formula import (
    EQUALITY, And, Apply, Atom, Bot, Constant, Exists, Forall, Formula, Not, Or,
    Term, Top, Variable, BOT, TOP, well_sorted,
)
from fragcalc.fpalg import Poly, RatFunc
from fragcalc.signature import Language, LiteralDomain, SymbolKind
from fragcalc.syntax import make_literal

logger = logging.getLogger(__name__)


# Pairing and self-delimiting codes

def pair(a: int, b: int) -> int:
    """Cantor pairing N x N -> N."""
    return (a + b) * (a + b + 1) // 2 + b


def unpair(n: int) -> Tuple[int, int]:
    w = (isqrt(8 * n + 1) - 1) // 2
    b = n - w * (w + 1) // 2
    return w - b, b


def _zigzag(n: int) -> int:
    return 2 * n if n >= 0 else -2 * n - 1


def _unzigzag(n: int) -> int:
    return n // 2 if n % 2 == 0 else -(n + 1) // 2


def pack(tokens: Sequence[int]) -> int:
    """Elias gamma of n+1 per token, behind a leading 1 bit."""
    bits = ["1"]
    for token in tokens:
        if token < 0:
            raise ValueError(f"negative token {token}")
        binary = bin(token + 1)[2:]
        bits.append("0" * (len(binary) - 1) + binary)
    return int("".join(bits), 2)


def unpack(code: int) -> List[int]:
    if code < 1:
        raise ValueError("codes start with a 1 bit")
    bits = bin(code)[3:]
    tokens, i = [], 0
    while i < len(bits):
        zeros = 0
        while i < len(bits) and bits[i] == "0":
            zeros += 1
            i += 1
        if i + zeros + 1 > len(bits):
            raise ValueError("truncated gamma code")
        tokens.append(int(bits[i:i + zeros + 1], 2) - 1)
        i += zeros + 1
    return tokens


# Element codes

def encode_element(domain: LiteralDomain, value: Union[Fraction, int, RatFunc]) -> int:
    """Injection of Q, F_p or F_p(s) into N."""
    if domain.kind == "Q":
        value = Fraction(value)
        return pair(_zigzag(value.numerator), value.denominator - 1)
    if domain.kind == "Fp":
        return int(value) % domain.p
    return pair(pack(value.num.coeffs), pack(value.den.coeffs))


def decode_element(domain: LiteralDomain, code: int) -> Union[Fraction, int, RatFunc]:
    if domain.kind == "Q":
        numerator, denominator = unpair(code)
        return Fraction(_unzigzag(numerator), denominator + 1)
    if domain.kind == "Fp":
        if code >= domain.p:
            raise ValueError(f"{code} is not a residue mod {domain.p}")
        return code
    num, den = unpair(code)
    num_coeffs, den_coeffs = unpack(num), unpack(den)
    if any(c >= domain.p for c in num_coeffs + den_coeffs):
        raise ValueError(f"coefficient out of range for F{domain.p}")
    return RatFunc.of(Poly.of(domain.p, num_coeffs), Poly.of(domain.p, den_coeffs))


class ElementCodec(NamedTuple):
    """A caller-supplied injection of the literal domain into N and its inverse."""
    encode: Callable[[LiteralDomain, object], int]
    decode: Callable[[LiteralDomain, int], object]


DEFAULT_CODEC = ElementCodec(encode_element, decode_element)


def _name_code(name: str) -> int:
    return int.from_bytes(b"\x01" + name.encode("utf-8"), "big")


def _name_of(code: int) -> str:
    raw = code.to_bytes((code.bit_length() + 7) // 8, "big")
    if not raw or raw[0] != 1:
        raise ValueError(f"{code} is not a name code")
    return raw[1:].decode("utf-8")


# Encoding

def _alpha(language: Language, alpha: Optional[Mapping[str, int]]) -> Dict[str, int]:
    if alpha is not None:
        alpha = dict(alpha)
        if len(set(alpha.values())) != len(alpha):
            raise SignatureError("presentation is not injective")
        return alpha
    if language.presentation is None:
        raise SignatureError(f"language {language.name} has no presentation")
    return language.presentation_map()


class _Encoder:
    def __init__(self, language: Language, alpha: Dict[str, int], codec: ElementCodec):
        self.language = language
        self.alpha = alpha
        self.codec = codec
        self.sorts = {s: i for i, s in enumerate(language.sort_names)}
        self.tokens: List[int] = []

    def symbol(self, name: str) -> None:
        if name not in self.alpha:
            raise SignatureError(f"presentation is not defined on {name}")
        self.tokens.append(self.alpha[name])

    def sort(self, sort: str) -> None:
        if sort not in self.sorts:
            raise SignatureError(f"sort {sort} not in {self.language.name}")
        self.tokens.append(self.sorts[sort])

    def term(self, t: Term) -> Sequence[Term]:
        if isinstance(t, Variable):
            self.tokens += [0, _name_code(t.name)]
            self.sort(t.sort)
        elif isinstance(t, Constant) and t.is_literal:
            if self.language.literals is None:
                raise SignatureError(f"literal {t.name} but {self.language.name} has no literals")
            self.tokens += [2, self.codec.encode(self.language.literals, t.value)]
        elif isinstance(t, Constant):
            self.tokens.append(1)
            self.symbol(t.name)
        else:
            self.tokens.append(3)
            self.symbol(t.function)
            return t.args
        return ()

    def formula(self, phi: Formula) -> Sequence[Union[Formula, Term]]:
        if isinstance(phi, Top):
            self.tokens.append(0)
        elif isinstance(phi, Bot):
            self.tokens.append(1)
        elif isinstance(phi, Atom) and phi.relation == EQUALITY:
            self.tokens.append(2)
            return phi.args
        elif isinstance(phi, Atom):
            self.tokens.append(3)
            self.symbol(phi.relation)
            return phi.args
        elif isinstance(phi, Not):
            self.tokens.append(4)
            return (phi.body,)
        elif isinstance(phi, (And, Or)):
            self.tokens.append(5 if isinstance(phi, And) else 6)
            return (phi.left, phi.right)
        else:
            self.tokens += [7 if isinstance(phi, Forall) else 8, _name_code(phi.var.name)]
            self.sort(phi.var.sort)
            return (phi.body,)
        return ()

    def run(self, phi: Formula) -> List[int]:
        # preorder walk with an explicit stack; nesting depth is unbounded
        pending: List[Union[Formula, Term]] = [phi]
        while pending:
            node = pending.pop()
            if isinstance(node, (Variable, Constant, Apply)):
                children = self.term(node)
            else:
                children = self.formula(node)
            pending.extend(reversed(children))
        return self.tokens


def godel_encode(language: Language, phi: Formula, alpha: Optional[Mapping[str, int]] = None,
                 codec: ElementCodec = DEFAULT_CODEC) -> int:
    """Code of φ under the presentation α (the language's own by default)."""
    return pack(_Encoder(language, _alpha(language, alpha), codec).run(phi))


# Decoding

class _Frame(NamedTuple):
    """A node whose children are still being read."""
    build: Callable[[List], Union[Formula, Term]]
    kinds: str
    children: List


class _Decoder:
    def __init__(self, language: Language, alpha: Dict[str, int], codec: ElementCodec):
        self.language = language
        self.codec = codec
        self.by_code = {code: name for name, code in alpha.items()}
        self.sorts = language.sort_names
        self.tokens: Iterator[int] = iter(())

    def next(self) -> int:
        token = next(self.tokens, None)
        if token is None:
            raise ValueError("token stream ends early")
        return token

    def symbol(self, kind: SymbolKind):
        code = self.next()
        if code not in self.by_code:
            raise ValueError(f"{code} is not a symbol code")
        symbol = self.language.symbol(self.by_code[code])
        if symbol is None or symbol.kind != kind:
            raise ValueError(f"{code} does not code a {kind.value} symbol")
        return symbol

    def sort(self) -> str:
        return self.sorts[self.next()]

    def term(self) -> Union[Term, _Frame]:
        tag = self.next()
        if tag == 0:
            name = _name_of(self.next())
            return Variable(name, self.sort())
        if tag == 1:
            symbol = self.symbol(SymbolKind.CONSTANT)
            return Constant(symbol.name, symbol.result_sort)
        if tag == 2:
            domain = self.language.literals
            if domain is None:
                raise ValueError("literal in a language without literals")
            return make_literal(domain, self.codec.decode(domain, self.next()))
        if tag == 3:
            symbol = self.symbol(SymbolKind.FUNCTION)
            return _Frame(lambda args: Apply(symbol.name, tuple(args), symbol.result_sort),
                          "t" * symbol.arity, [])
        raise ValueError(f"unknown term tag {tag}")

    def formula(self) -> Union[Formula, _Frame]:
        tag = self.next()
        if tag == 0:
            return TOP
        if tag == 1:
            return BOT
        if tag == 2:
            return _Frame(lambda args: Atom(EQUALITY, tuple(args)), "tt", [])
        if tag == 3:
            symbol = self.symbol(SymbolKind.RELATION)
            return _Frame(lambda args: Atom(symbol.name, tuple(args)), "t" * symbol.arity, [])
        if tag == 4:
            return _Frame(lambda args: Not(args[0]), "f", [])
        if tag in (5, 6):
            connective = And if tag == 5 else Or
            return _Frame(lambda args: connective(args[0], args[1]), "ff", [])
        if tag in (7, 8):
            var = Variable(_name_of(self.next()), self.sort())
            quantifier = Forall if tag == 7 else Exists
            return _Frame(lambda args: quantifier(var, args[0]), "f", [])
        raise ValueError(f"unknown formula tag {tag}")

    def run(self, code: int) -> Formula:
        self.tokens = iter(unpack(code))
        stack: List[_Frame] = []
        kind = "f"
        while True:
            node = self.formula() if kind == "f" else self.term()
            if isinstance(node, _Frame) and node.kinds:
                stack.append(node)
                kind = node.kinds[0]
                continue
            if isinstance(node, _Frame):
                node = node.build([])
            while stack:
                top = stack[-1]
                top.children.append(node)
                if len(top.children) < len(top.kinds):
                    kind = top.kinds[len(top.children)]
                    break
                stack.pop()
                node = top.build(top.children)
            else:
                break
        if next(self.tokens, None) is not None:
            raise ValueError("trailing tokens")
        return node


def godel_decode(language: Language, code: int, alpha: Optional[Mapping[str, int]] = None,
                 codec: ElementCodec = DEFAULT_CODEC) -> Union[Formula, DecodeFailure]:
    """Inverse of godel_encode; numbers outside the image give a DecodeFailure."""
    table = _alpha(language, alpha)
    try:
        phi = _Decoder(language, table, codec).run(code)
    except (ValueError, IndexError, UnicodeDecodeError, ZeroDivisionError, FragcalcError) as e:
        return DecodeFailure(code, str(e))
    try:
        problems = well_sorted(language, phi)
        canonical = godel_encode(language, phi, table, codec) == code
    except RecursionError:
        logger.warning(f"code {code.bit_length()} bits long decodes to a formula nested too deeply to check")
        return DecodeFailure(code, "formula nested too deeply")
    if problems:
        return DecodeFailure(code, f"ill-sorted: {problems[0]}")
    if not canonical:
        return DecodeFailure(code, "not a canonical code")
    return phi
