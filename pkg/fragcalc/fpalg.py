"""
Exact arithmetic in F_p[s] and F_p(s), the p-th power decomposition oracle,
and a bounded witness search for existential formulas over F_p(s).
"""
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple
import logging

from fragcalc.config import get_settings
from fragcalc.errors import EvaluationError, FragmentError, ReductionError
from fragcalc.formula import (
    And, Apply, Atom, Bot, Constant, Not, Or, Top, Variable,
    constants_of, free_variables, term_variables,
)
from fragcalc.fragments import F0, prenex_split
from fragcalc.models import SearchStatus
from fragcalc.signature import FIELD_RING, RingNames

logger = logging.getLogger(__name__)
settings = get_settings()


def is_prime(n: int) -> bool:
    """Trial division; the primes used here are small."""
    if n < 2:
        return False
    i = 2
    while i * i <= n:
        if n % i == 0:
            return False
        i += 1
    return True


def prime_power(q: int) -> Optional[Tuple[int, int]]:
    """Return (p, k) with q = p^k, or None if q is not a prime power."""
    if q < 2:
        return None
    p = 2
    while q % p:
        p += 1
    k, rest = 0, q
    while rest % p == 0:
        rest //= p
        k += 1
    return (p, k) if rest == 1 else None


def _require_prime(p: int) -> None:
    if not is_prime(p):
        raise ReductionError(f"characteristic must be prime, got {p}")


@dataclass(frozen=True)
class Poly:
    """Polynomial over F_p in the variable s; coefficients ascending, trimmed."""
    p: int
    coeffs: Tuple[int, ...] = ()

    @classmethod
    def of(cls, p: int, coeffs: Sequence[int]) -> "Poly":
        reduced = [c % p for c in coeffs]
        while reduced and reduced[-1] == 0:
            reduced.pop()
        return cls(p, tuple(reduced))

    @classmethod
    def constant(cls, p: int, c: int) -> "Poly":
        return cls.of(p, [c])

    @classmethod
    def monomial(cls, p: int, degree: int, c: int = 1) -> "Poly":
        return cls.of(p, [0] * degree + [c])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def lead(self) -> int:
        return self.coeffs[-1] if self.coeffs else 0

    def is_zero(self) -> bool:
        return not self.coeffs

    def _check(self, other: "Poly") -> None:
        if self.p != other.p:
            raise ValueError(f"cannot mix characteristics {self.p} and {other.p}")

    def __add__(self, other: "Poly") -> "Poly":
        self._check(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (0,) * (n - len(self.coeffs))
        b = other.coeffs + (0,) * (n - len(other.coeffs))
        return Poly.of(self.p, [x + y for x, y in zip(a, b)])

    def __neg__(self) -> "Poly":
        return Poly.of(self.p, [-c for c in self.coeffs])

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other: "Poly") -> "Poly":
        self._check(other)
        if self.is_zero() or other.is_zero():
            return Poly(self.p)
        out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
        return Poly.of(self.p, out)

    def scale(self, c: int) -> "Poly":
        return Poly.of(self.p, [c * x for x in self.coeffs])

    def __pow__(self, e: int) -> "Poly":
        result = Poly.constant(self.p, 1)
        base = self
        while e > 0:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def divmod(self, other: "Poly") -> Tuple["Poly", "Poly"]:
        self._check(other)
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        p = self.p
        rem = list(self.coeffs)
        quot = [0] * max(len(rem) - len(other.coeffs) + 1, 0)
        inv = pow(other.lead, -1, p)
        while len(rem) >= len(other.coeffs) and any(rem):
            shift = len(rem) - len(other.coeffs)
            factor = rem[-1] * inv % p
            quot[shift] = factor
            for i, c in enumerate(other.coeffs):
                rem[shift + i] = (rem[shift + i] - factor * c) % p
            while rem and rem[-1] == 0:
                rem.pop()
        return Poly.of(p, quot), Poly.of(p, rem)

    def monic(self) -> "Poly":
        if self.is_zero():
            return self
        return self.scale(pow(self.lead, -1, self.p))

    def __call__(self, value: int) -> int:
        acc = 0
        for c in reversed(self.coeffs):
            acc = (acc * value + c) % self.p
        return acc

    def __str__(self) -> str:
        if self.is_zero():
            return "0"
        terms = []
        for k in range(self.degree, -1, -1):
            c = self.coeffs[k]
            if not c:
                continue
            if k == 0:
                terms.append(str(c))
            else:
                power = "s" if k == 1 else f"s^{k}"
                terms.append(power if c == 1 else f"{c}{power}")
        return " + ".join(terms)


def poly_gcd(a: Poly, b: Poly) -> Poly:
    """Monic gcd (zero only when both are zero)."""
    while not b.is_zero():
        a, b = b, a.divmod(b)[1]
    return a.monic()


@dataclass(frozen=True)
class RatFunc:
    """
    Element of F_p(s) in canonical form: reduced fraction, monic denominator.

    Build with RatFunc.of(); the raw constructor does not normalize.
    """
    p: int
    num: Poly
    den: Poly

    @classmethod
    def of(cls, num: Poly, den: Optional[Poly] = None) -> "RatFunc":
        p = num.p
        if den is None:
            den = Poly.constant(p, 1)
        if den.is_zero():
            raise ZeroDivisionError("rational function with zero denominator")
        if num.is_zero():
            return cls(p, Poly(p), Poly.constant(p, 1))
        g = poly_gcd(num, den)
        num, den = num.divmod(g)[0], den.divmod(g)[0]
        inv = pow(den.lead, -1, p)
        return cls(p, num.scale(inv), den.scale(inv))

    @classmethod
    def from_coeffs(cls, p: int, num: Sequence[int], den: Sequence[int] = (1,)) -> "RatFunc":
        return cls.of(Poly.of(p, num), Poly.of(p, den))

    @classmethod
    def constant(cls, p: int, c: int) -> "RatFunc":
        return cls.of(Poly.constant(p, c))

    @classmethod
    def s(cls, p: int) -> "RatFunc":
        return cls.of(Poly.monomial(p, 1))

    def is_zero(self) -> bool:
        return self.num.is_zero()

    @property
    def height(self) -> int:
        return max(self.num.degree, self.den.degree, 0)

    def __add__(self, other: "RatFunc") -> "RatFunc":
        return RatFunc.of(self.num * other.den + other.num * self.den, self.den * other.den)

    def __neg__(self) -> "RatFunc":
        return RatFunc(self.p, -self.num, self.den)

    def __sub__(self, other: "RatFunc") -> "RatFunc":
        return self + (-other)

    def __mul__(self, other: "RatFunc") -> "RatFunc":
        return RatFunc.of(self.num * other.num, self.den * other.den)

    def inverse(self) -> "RatFunc":
        if self.is_zero():
            raise ZeroDivisionError("division by zero in F_p(s)")
        return RatFunc.of(self.den, self.num)

    def __truediv__(self, other: "RatFunc") -> "RatFunc":
        return self * other.inverse()

    def __pow__(self, e: int) -> "RatFunc":
        if e < 0:
            return self.inverse() ** (-e)
        return RatFunc.of(self.num ** e, self.den ** e)

    def literal(self) -> str:
        """Literal text `{c0 c1 ... / d0 d1 ... @ p}`, denominator omitted when 1."""
        num = " ".join(map(str, self.num.coeffs)) or "0"
        if self.den.coeffs == (1,):
            return f"{{{num} @ {self.p}}}"
        den = " ".join(map(str, self.den.coeffs))
        return f"{{{num} / {den} @ {self.p}}}"

    def __str__(self) -> str:
        if self.den.coeffs == (1,):
            return str(self.num)
        return f"({self.num})/({self.den})"


def height(f: RatFunc) -> int:
    return f.height


def pth_root_decompose(p: int, f: RatFunc) -> Tuple[RatFunc, ...]:
    """
    Unique (l_0, ..., l_{p-1}) with f = sum_j l_j^p s^j.

    Clears the denominator by a p-th power (f = N D^{p-1} / D^p) and splits the
    numerator's exponents by residue mod p; coefficient p-th roots are the
    identity on F_p.
    """
    _require_prime(p)
    if f.p != p:
        raise ValueError(f"element of F_{f.p}(s) decomposed with p={p}")
    m = f.num * f.den ** (p - 1)
    return tuple(RatFunc.of(Poly.of(p, m.coeffs[j::p]), f.den) for j in range(p))


def is_pth_power(p: int, f: RatFunc) -> bool:
    return all(part.is_zero() for part in pth_root_decompose(p, f)[1:])


def recompose(p: int, parts: Sequence[RatFunc]) -> RatFunc:
    s = RatFunc.s(p)
    total = RatFunc.constant(p, 0)
    for j, part in enumerate(parts):
        total = total + part ** p * s ** j
    return total


def chi_image(p: int, r: int, x: RatFunc) -> Tuple[RatFunc, ...]:
    """
    Value at x of the surjection F_p(s) -> F_p(s)^r defined by the one-variable
    coding formula with p-basis s.
    """
    if r < 0:
        raise ReductionError(f"arity must be non-negative, got {r}")
    if r == 0:
        return ()
    if r == 1:
        return (x,)
    parts = pth_root_decompose(p, x)
    image = (parts[0], parts[p - 1])
    for _ in range(r - 2):
        head, last = image[:-1], image[-1]
        tail = pth_root_decompose(p, last)
        image = head + (tail[0], tail[p - 1])
    return image


def _monic_polys(p: int, max_degree: int) -> Iterator[Poly]:
    for d in range(max_degree + 1):
        for lower in product(range(p), repeat=d):
            yield Poly.of(p, list(lower) + [1])


@lru_cache(maxsize=64)
def enumerate_height(p: int, bound: int) -> Tuple[RatFunc, ...]:
    """All elements of height <= bound, ordered by height then coefficients."""
    _require_prime(p)
    seen = set()
    ordered: List[Tuple[int, Tuple[int, ...], Tuple[int, ...], RatFunc]] = []
    for den in _monic_polys(p, bound):
        for num_coeffs in product(range(p), repeat=bound + 1):
            num = Poly.of(p, num_coeffs)
            if num.is_zero() and den.degree > 0:
                continue
            if not num.is_zero() and poly_gcd(num, den).degree > 0:
                continue
            f = RatFunc(p, num, den)
            if f in seen:
                continue
            seen.add(f)
            ordered.append((f.height, num.coeffs, den.coeffs, f))
    ordered.sort(key=lambda item: item[:3])
    return tuple(item[3] for item in ordered)


# Witness search

@dataclass
class SearchResult:
    """Outcome of a bounded witness search."""
    status: SearchStatus
    witnesses: Dict[str, RatFunc] = field(default_factory=dict)
    candidates_tried: int = 0

    @property
    def sat(self) -> bool:
        return self.status == SearchStatus.SAT


class RingEvaluator:
    """Evaluates ring terms and quantifier-free formulas over F_p(s)."""

    def __init__(self, p: int, names: RingNames = FIELD_RING):
        self.p = p
        self.names = names

    def term(self, t, env: Mapping[str, RatFunc]) -> RatFunc:
        if isinstance(t, Variable):
            try:
                return env[t.name]
            except KeyError:
                raise EvaluationError(f"unassigned variable {t.name}")
        if isinstance(t, Constant):
            if isinstance(t.value, RatFunc):
                if t.value.p != self.p:
                    raise EvaluationError(f"literal {t.name} is not over F_{self.p}(s)")
                return t.value
            if t.name == self.names.zero:
                return RatFunc.constant(self.p, 0)
            if t.name == self.names.one:
                return RatFunc.constant(self.p, 1)
            raise EvaluationError(f"constant {t.name} has no value in F_{self.p}(s)")
        if isinstance(t, Apply):
            args = [self.term(a, env) for a in t.args]
            if t.function == self.names.plus:
                return args[0] + args[1]
            if t.function == self.names.minus:
                return args[0] - args[1]
            if t.function == self.names.times:
                return args[0] * args[1]
        raise EvaluationError(f"cannot evaluate term {t!r} over F_{self.p}(s)")

    def holds(self, phi, env: Mapping[str, RatFunc]) -> bool:
        if isinstance(phi, Top):
            return True
        if isinstance(phi, Bot):
            return False
        if isinstance(phi, Atom):
            if phi.relation != "=":
                raise EvaluationError(f"relation {phi.relation} has no meaning in F_{self.p}(s)")
            return self.term(phi.args[0], env) == self.term(phi.args[1], env)
        if isinstance(phi, Not):
            return not self.holds(phi.body, env)
        if isinstance(phi, And):
            return self.holds(phi.left, env) and self.holds(phi.right, env)
        if isinstance(phi, Or):
            return self.holds(phi.left, env) or self.holds(phi.right, env)
        raise FragmentError("matrix is not quantifier-free")


def _literal_characteristic(phi) -> Optional[int]:
    ps = {c.value.p for c in constants_of(phi) if isinstance(c.value, RatFunc)}
    if len(ps) > 1:
        raise EvaluationError(f"literals over several characteristics: {sorted(ps)}")
    return ps.pop() if ps else None


def exists_bounded(
    phi,
    bound: Optional[int] = None,
    p: Optional[int] = None,
    assignment: Optional[Mapping[str, RatFunc]] = None,
) -> SearchResult:
    """
    Sound, incomplete search for witnesses of an existential formula over F_p(s).

    Equation conjuncts `v = t` with t already evaluable fix v without
    branching; the remaining variables range over elements of height <= bound.
    Returns SAT with verified witnesses, REFUTED only when every variable was
    fixed by an equation (complete search), UNKNOWN otherwise.
    """
    bound = settings.witness_height if bound is None else bound
    found_p = _literal_characteristic(phi)
    if p is None:
        p = found_p
    if p is None:
        raise ReductionError("characteristic not given and no F_p(s) literal present")
    if found_p is not None and found_p != p:
        raise EvaluationError(f"literals over F_{found_p}(s) searched with p={p}")
    _require_prime(p)

    prefix, matrix = prenex_split(F0, None, phi)
    if any(kind != "exists" for kind, _ in prefix):
        raise FragmentError("exists_bounded needs an existential formula")
    free_names = {v.name for v in free_variables(phi)}
    env: Dict[str, RatFunc] = {k: v for k, v in (assignment or {}).items() if k in free_names}
    missing = free_names - set(env)
    if missing:
        raise EvaluationError(f"free variables without values: {sorted(missing)}")

    # a repeated binder is vacuous outside its innermost occurrence
    unknowns: List[str] = []
    for _, var in prefix:
        if var.name not in unknowns:
            unknowns.append(var.name)
    conjuncts = []
    stack = [matrix]
    while stack:
        node = stack.pop()
        if isinstance(node, And):
            stack.append(node.right)
            stack.append(node.left)
        else:
            conjuncts.append(node)

    evaluator = RingEvaluator(p)
    candidates = enumerate_height(p, bound)
    state = {"tried": 0, "branched": False, "exhausted": False}

    def evaluable(t, assigned) -> bool:
        return all(v.name in assigned for v in term_variables(t))

    def propagate(assigned: Dict[str, RatFunc]) -> Optional[Dict[str, RatFunc]]:
        assigned = dict(assigned)
        changed = True
        while changed:
            changed = False
            for c in conjuncts:
                if not (isinstance(c, Atom) and c.relation == "="):
                    continue
                for lhs, rhs in (c.args, c.args[::-1]):
                    if (isinstance(lhs, Variable) and lhs.name in unknowns
                            and lhs.name not in assigned and evaluable(rhs, assigned)):
                        assigned[lhs.name] = evaluator.term(rhs, assigned)
                        changed = True
                        break
        for c in conjuncts:
            if all(v.name in assigned for v in free_variables(c)) and not evaluator.holds(c, assigned):
                return None
        return assigned

    def search(assigned: Dict[str, RatFunc]) -> Optional[Dict[str, RatFunc]]:
        assigned = propagate(assigned)
        if assigned is None:
            return None
        pending = [u for u in unknowns if u not in assigned]
        if not pending:
            return assigned if evaluator.holds(matrix, assigned) else None
        state["branched"] = True
        name = pending[0]
        for value in candidates:
            state["tried"] += 1
            if state["tried"] > settings.max_witness_candidates:
                state["exhausted"] = True
                return None
            trial = dict(assigned)
            trial[name] = value
            result = search(trial)
            if result is not None:
                return result
            if state["exhausted"]:
                return None
        return None

    solution = search(env)
    if solution is not None:
        witnesses = {u: solution[u] for u in unknowns}
        if not evaluator.holds(matrix, solution):
            raise EvaluationError("witness verification failed")
        logger.info(f"Witness search succeeded after {state['tried']} candidates")
        return SearchResult(SearchStatus.SAT, witnesses, state["tried"])
    if state["exhausted"]:
        logger.warning(f"Witness search stopped at the candidate budget {settings.max_witness_candidates}")
    if not state["branched"] and not state["exhausted"]:
        return SearchResult(SearchStatus.REFUTED, {}, state["tried"])
    return SearchResult(SearchStatus.UNKNOWN, {}, state["tried"])
