"""
Finite structures and brute-force semantics: evaluation, embeddings, finite
rings and fields, and the tournament graphs separating A^2 E from A_2 E.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations, product
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union
import logging
import re

import networkx as nx
from networkx.algorithms import isomorphism

from fragcalc.config import get_settings
from fragcalc.errors import EvaluationError, ResourceLimitError, SignatureError
from fragcalc.formula import (
    And, Atom, Bot, Constant, EQUALITY, Exists, Forall, Formula, Not, Or,
    Term, Top, Variable, conj, disj, exists_many, free_variables, neq,
    require_well_sorted,
)
from fragcalc.fpalg import Poly, prime_power
from fragcalc.models import StructureFile
from fragcalc.signature import (
    FIELD_RING, Language, RingNames, SymbolKind, graph, parse_signature,
    resolve_language, ring, residue_ring,
)

logger = logging.getLogger(__name__)
settings = get_settings()

Element = Union[int, str]
Embedding = Dict[str, Dict[Element, Element]]


@dataclass(frozen=True)
class FiniteStructure:
    """
    An explicit interpretation of a language: a finite carrier per sort, a
    total table per function symbol, a tuple set per relation symbol and an
    element per constant symbol.
    """
    language: Language
    domains: Mapping[str, Tuple[Element, ...]]
    functions: Mapping[str, Mapping[Tuple[Element, ...], Element]] = field(default_factory=dict)
    relations: Mapping[str, FrozenSet[Tuple[Element, ...]]] = field(default_factory=dict)
    constants: Mapping[str, Element] = field(default_factory=dict)
    name: str = "S"

    def __post_init__(self):
        for sort in self.language.sort_names:
            if not self.domains.get(sort):
                raise EvaluationError(f"{self.name}: empty or missing carrier for sort {sort}")
        carriers = {s: set(d) for s, d in self.domains.items()}
        for symbol in self.language.symbols:
            if symbol.kind == SymbolKind.CONSTANT:
                if self.constants.get(symbol.name) not in carriers[symbol.result_sort]:
                    raise EvaluationError(f"{self.name}: constant {symbol.name} not interpreted in its carrier")
            elif symbol.kind == SymbolKind.FUNCTION:
                table = self.functions.get(symbol.name, {})
                for args in product(*(self.domains[s] for s in symbol.arg_sorts)):
                    if table.get(args) not in carriers[symbol.result_sort]:
                        raise EvaluationError(f"{self.name}: {symbol.name}{args} undefined or outside its carrier")
            else:
                for row in self.relations.get(symbol.name, frozenset()):
                    if len(row) != symbol.arity or any(e not in carriers[s] for e, s in zip(row, symbol.arg_sorts)):
                        raise EvaluationError(f"{self.name}: bad tuple {row} for {symbol.name}")

    def size(self, sort: Optional[str] = None) -> int:
        if sort is not None:
            return len(self.domains[sort])
        return sum(len(d) for d in self.domains.values())

    def elements(self) -> List[Tuple[str, Element]]:
        return [(s, e) for s in self.language.sort_names for e in self.domains[s]]

    def holds(self, relation: str, args: Tuple[Element, ...]) -> bool:
        return args in self.relations.get(relation, frozenset())

    def __repr__(self) -> str:
        sizes = ", ".join(f"{s}:{len(d)}" for s, d in self.domains.items())
        return f"FiniteStructure({self.name}, {self.language.name}, {sizes})"


# Evaluation

def expansion_cost(structure: FiniteStructure, phi: Formula) -> int:
    """Nodes visited by naive quantifier expansion, without short-circuiting."""
    if isinstance(phi, (Forall, Exists)):
        return 1 + len(structure.domains.get(phi.var.sort, ())) * expansion_cost(structure, phi.body)
    if isinstance(phi, Not):
        return 1 + expansion_cost(structure, phi.body)
    if isinstance(phi, (And, Or)):
        return 1 + expansion_cost(structure, phi.left) + expansion_cost(structure, phi.right)
    return 1


class _Evaluator:
    def __init__(self, structure: FiniteStructure):
        self.s = structure

    def term(self, t: Term, env: Mapping[str, Element]) -> Element:
        if isinstance(t, Variable):
            return env[t.name]
        if isinstance(t, Constant):
            if t.is_literal:
                return self.literal(t)
            return self.s.constants[t.name]
        args = tuple(self.term(a, env) for a in t.args)
        return self.s.functions[t.function][args]

    def literal(self, t: Constant) -> Element:
        value = t.value
        if isinstance(value, Fraction) and value.denominator == 1:
            value = int(value)
        if isinstance(value, int) and value in self.s.domains[t.sort]:
            return value
        raise EvaluationError(f"literal {t.name} has no element in {self.s.name}")

    def holds(self, phi: Formula, env: Dict[str, Element]) -> bool:
        if isinstance(phi, Top):
            return True
        if isinstance(phi, Bot):
            return False
        if isinstance(phi, Atom):
            args = tuple(self.term(a, env) for a in phi.args)
            if phi.relation == EQUALITY:
                return args[0] == args[1]
            return self.s.holds(phi.relation, args)
        if isinstance(phi, Not):
            return not self.holds(phi.body, env)
        if isinstance(phi, And):
            return self.holds(phi.left, env) and self.holds(phi.right, env)
        if isinstance(phi, Or):
            return self.holds(phi.left, env) or self.holds(phi.right, env)
        test = any if isinstance(phi, Exists) else all
        name = phi.var.name
        had, saved = name in env, env.get(name)
        try:
            return self._quantify(phi, env, test)
        finally:
            if had:
                env[name] = saved
            else:
                env.pop(name, None)

    def _quantify(self, phi, env: Dict[str, Element], test) -> bool:
        name = phi.var.name

        def values() -> Iterator[bool]:
            for e in self.s.domains[phi.var.sort]:
                env[name] = e
                yield self.holds(phi.body, env)

        return test(values())


def evaluate(structure: FiniteStructure, phi: Formula,
             assignment: Optional[Mapping[Union[Variable, str], Element]] = None) -> bool:
    """Tarskian truth of φ in a finite structure by exhaustive expansion."""
    require_well_sorted(structure.language, phi)
    env: Dict[str, Element] = {}
    for key, value in (assignment or {}).items():
        env[key.name if isinstance(key, Variable) else key] = value
    missing = sorted(v.name for v in free_variables(phi) if v.name not in env)
    if missing:
        raise EvaluationError(f"free variables {missing} are not assigned")
    for v in free_variables(phi):
        if env[v.name] not in structure.domains[v.sort]:
            raise EvaluationError(f"{v.name} is assigned {env[v.name]!r}, not an element of sort {v.sort}")
    cost = expansion_cost(structure, phi)
    if cost > settings.eval_node_budget:
        raise ResourceLimitError(f"naive expansion needs {cost} nodes, budget is {settings.eval_node_budget}")
    return _Evaluator(structure).holds(phi, env)


def assignments(structure: FiniteStructure, variables: Iterable[Variable]) -> Iterator[Dict[str, Element]]:
    """All assignments of the variables, in carrier order."""
    ordered = sorted(set(variables), key=lambda v: v.name)
    for values in product(*(structure.domains[v.sort] for v in ordered)):
        yield {v.name: e for v, e in zip(ordered, values)}


# Embeddings

def _is_digraph(language: Language) -> bool:
    return (len(language.sorts) == 1 and len(language.symbols) == 1
            and language.symbols[0].kind == SymbolKind.RELATION and language.symbols[0].arity == 2)


def to_digraph(structure: FiniteStructure) -> nx.DiGraph:
    relation = structure.language.symbols[0].name
    g = nx.DiGraph()
    g.add_nodes_from(structure.domains[structure.language.sort_names[0]])
    g.add_edges_from(structure.relations.get(relation, ()))
    return g


def _graph_embeddings(a: FiniteStructure, b: FiniteStructure) -> Iterator[Embedding]:
    sort = a.language.sort_names[0]
    matcher = isomorphism.DiGraphMatcher(to_digraph(b), to_digraph(a))
    # induced subgraph isomorphisms preserve and reflect E
    for mapping in matcher.subgraph_isomorphisms_iter():
        yield {sort: {x: y for y, x in mapping.items()}}


def _preserves(a: FiniteStructure, b: FiniteStructure, h: Embedding) -> bool:
    for symbol in a.language.symbols:
        if symbol.kind == SymbolKind.CONSTANT:
            if h[symbol.result_sort][a.constants[symbol.name]] != b.constants[symbol.name]:
                return False
            continue
        for args in product(*(a.domains[s] for s in symbol.arg_sorts)):
            image = tuple(h[s][x] for s, x in zip(symbol.arg_sorts, args))
            if symbol.kind == SymbolKind.FUNCTION:
                if h[symbol.result_sort][a.functions[symbol.name][args]] != b.functions[symbol.name][image]:
                    return False
            elif a.holds(symbol.name, args) != b.holds(symbol.name, image):
                return False
    return True


def _backtrack_embeddings(a: FiniteStructure, b: FiniteStructure) -> Iterator[Embedding]:
    sorts = a.language.sort_names
    per_sort = [list(permutations(b.domains[s], len(a.domains[s]))) for s in sorts]
    candidates = 1
    for options in per_sort:
        candidates *= len(options)
    if candidates > settings.eval_node_budget:
        raise ResourceLimitError(f"{candidates} candidate maps exceed the budget {settings.eval_node_budget}")
    for images in product(*per_sort):
        h = {s: dict(zip(a.domains[s], image)) for s, image in zip(sorts, images)}
        if _preserves(a, b, h):
            yield h


def embeddings(a: FiniteStructure, b: FiniteStructure, partial: Optional[Embedding] = None) -> List[Embedding]:
    """
    All embeddings A -> B: sort-respecting injections commuting with functions
    and constants, preserving and reflecting relations. With partial, only
    those extending it.
    """
    if a.language.sort_names != b.language.sort_names or \
            {s.name: s for s in a.language.symbols} != {s.name: s for s in b.language.symbols}:
        raise EvaluationError(f"structures over different languages: {a.language.name}, {b.language.name}")
    found = _graph_embeddings(a, b) if _is_digraph(a.language) else _backtrack_embeddings(a, b)
    partial = partial or {}
    result = [h for h in found
              if all(h[s].get(x) == y for s, pairs in partial.items() for x, y in pairs.items())]
    result.sort(key=lambda h: repr([sorted(h[s].items(), key=repr) for s in a.language.sort_names]))
    logger.info(f"Found {len(result)} embeddings {a.name} -> {b.name}")
    return result


def covering_embeddings(a: FiniteStructure, b: FiniteStructure, n: int) -> bool:
    """For every n elements of B some embedding A -> B has them all in its image."""
    images = [{(s, y) for s, pairs in h.items() for y in pairs.values()} for h in embeddings(a, b)]
    universe = b.elements()
    width = min(n, len(universe))
    return all(any(set(chosen) <= image for image in images) for chosen in combinations(universe, width))


# Building structures

def disjoint_union(parts: Sequence[FiniteStructure], name: Optional[str] = None) -> FiniteStructure:
    """Disjoint union of relational structures, elements renumbered from 0."""
    if not parts:
        raise EvaluationError("disjoint union of no structures")
    language = parts[0].language
    if any(s.kind != SymbolKind.RELATION for s in language.symbols):
        raise SignatureError(f"disjoint union needs a relational language, {language.name} has functions or constants")
    domains: Dict[str, List[Element]] = {s: [] for s in language.sort_names}
    relations: Dict[str, set] = {s.name: set() for s in language.symbols}
    for part in parts:
        renumber = {}
        for sort in language.sort_names:
            for e in part.domains[sort]:
                renumber[(sort, e)] = len(domains[sort])
                domains[sort].append(len(domains[sort]))
        for symbol in language.symbols:
            for row in part.relations.get(symbol.name, ()):
                relations[symbol.name].add(tuple(renumber[(s, e)] for s, e in zip(symbol.arg_sorts, row)))
    return FiniteStructure(
        language,
        {s: tuple(d) for s, d in domains.items()},
        relations={k: frozenset(v) for k, v in relations.items()},
        name=name or "+".join(p.name for p in parts),
    )


def digraph_structure(vertices: Sequence[Element], edges: Iterable[Tuple[Element, Element]], name: str) -> FiniteStructure:
    return FiniteStructure(graph(), {"vertex": tuple(vertices)}, relations={"E": frozenset(edges)}, name=name)


def gamma2() -> FiniteStructure:
    return digraph_structure([1, 2], [(1, 2)], "G2")


def gamma3() -> FiniteStructure:
    return digraph_structure([1, 2, 3], [(1, 2), (2, 3), (3, 1)], "G3")


def gamma4() -> FiniteStructure:
    """The 3-cycle 1 -> 2 -> 3 -> 1 dominated by the vertex 4."""
    return digraph_structure([1, 2, 3, 4], [(1, 2), (2, 3), (3, 1), (4, 1), (4, 2), (4, 3)], "G4")


TOURNAMENTS = {"gamma2": gamma2, "gamma3": gamma3, "gamma4": gamma4}


def tournament_models(copies: int) -> Tuple[FiniteStructure, FiniteStructure]:
    """(M_c, N_c) with N_c = c.G2 + c.G4 and M_c = N_c + G3."""
    if copies < 1:
        raise EvaluationError(f"copies must be at least 1, got {copies}")
    n_parts = [gamma2()] * copies + [gamma4()] * copies
    n = disjoint_union(n_parts, name=f"N{copies}")
    m = disjoint_union(n_parts + [gamma3()], name=f"M{copies}")
    return m, n


def tournament_sentence() -> Formula:
    """
    ∀x((∀y ¬xEy) ∨ (∀y ¬yEx) ∨ ∃z1,z2,z3(⋀_{i<j} z_i ≠ z_j ∧ ⋀_i (xEz_i ∨ z_iEx))):
    every vertex is a source, a sink, or has three neighbours.
    """
    x, y = Variable("x", "vertex"), Variable("y", "vertex")
    zs = [Variable(f"z{i}", "vertex") for i in (1, 2, 3)]

    def edge(a: Variable, b: Variable) -> Atom:
        return Atom("E", (a, b))

    neighbours = conj(
        [neq(zs[i], zs[j]) for i in range(3) for j in range(i + 1, 3)]
        + [Or(edge(x, z), edge(z, x)) for z in zs]
    )
    return Forall(x, disj([
        Forall(y, Not(edge(x, y))),
        Forall(y, Not(edge(y, x))),
        exists_many(zs, neighbours),
    ]))


# Finite rings and fields

# Conway polynomials, coefficients in ascending degree.
CONWAY = {
    (2, 2): (1, 1, 1),
    (2, 3): (1, 1, 0, 1),
    (2, 4): (1, 1, 0, 0, 1),
    (2, 5): (1, 0, 1, 0, 0, 1),
    (2, 6): (1, 1, 0, 1, 1, 0, 1),
    (3, 2): (2, 2, 1),
    (3, 3): (1, 2, 0, 1),
    (5, 2): (2, 4, 1),
    (7, 2): (3, 6, 1),
}


def _ring_language(names: RingNames) -> Language:
    if names == FIELD_RING:
        return ring()
    if names.sort == "residue":
        return residue_ring()
    raise SignatureError(f"no built-in ring language for sort {names.sort}")


def _ring_structure(elements: Sequence[int], add, mul, names: RingNames, name: str) -> FiniteStructure:
    pairs = list(product(elements, repeat=2))
    plus = {(a, b): add(a, b) for a, b in pairs}
    negate = {a: next(c for c in elements if add(a, c) == 0) for a in elements}
    minus = {(a, b): plus[(a, negate[b])] for a, b in pairs}
    return FiniteStructure(
        _ring_language(names),
        {names.sort: tuple(elements)},
        functions={names.plus: plus, names.minus: minus, names.times: {(a, b): mul(a, b) for a, b in pairs}},
        constants={names.zero: 0, names.one: 1},
        name=name,
    )


def modular_ring(m: int, names: RingNames = FIELD_RING) -> FiniteStructure:
    """Z/mZ on 0..m-1."""
    if m < 2:
        raise EvaluationError(f"modulus must be at least 2, got {m}")
    return _ring_structure(range(m), lambda a, b: (a + b) % m, lambda a, b: a * b % m, names, f"Z/{m}")


def finite_field(q: int, names: RingNames = FIELD_RING) -> FiniteStructure:
    """
    F_q for q ≤ 64. Element e = Σ c_i p^i stands for Σ c_i α^i, α a root of
    the Conway polynomial of degree k; prime fields are Z/p.
    """
    pk = prime_power(q)
    if pk is None or q > 64:
        raise EvaluationError(f"q must be a prime power at most 64, got {q}")
    p, k = pk
    if k == 1:
        return _ring_structure(range(p), lambda a, b: (a + b) % p, lambda a, b: a * b % p, names, f"F{q}")
    modulus = Poly.of(p, CONWAY[(p, k)])

    def to_poly(e: int) -> Poly:
        return Poly.of(p, [(e // p ** i) % p for i in range(k)])

    def to_int(f: Poly) -> int:
        return sum(c * p ** i for i, c in enumerate(f.coeffs))

    def mul(a: int, b: int) -> int:
        return to_int((to_poly(a) * to_poly(b)).divmod(modulus)[1])

    def add(a: int, b: int) -> int:
        return to_int(to_poly(a) + to_poly(b))

    structure = _ring_structure(range(q), add, mul, names, f"F{q}")
    table = structure.functions[names.times]
    if any(all(table[(a, b)] != 1 for b in range(1, q)) for a in range(1, q)):
        raise EvaluationError(f"modulus table entry for F{q} is not irreducible")
    return structure


# Loading

def from_file(data: StructureFile, name: str = "S") -> FiniteStructure:
    text = data.language
    language = parse_signature(text) if "\n" in text else resolve_language(text)
    functions = {}
    for symbol, rows in data.functions.items():
        functions[symbol] = {tuple(row[:-1]): row[-1] for row in rows}
    return FiniteStructure(
        language,
        {s: tuple(d) for s, d in data.domains.items()},
        functions=functions,
        relations={r: frozenset(tuple(row) for row in rows) for r, rows in data.relations.items()},
        constants=dict(data.constants),
        name=name,
    )


def to_file(structure: FiniteStructure) -> StructureFile:
    return StructureFile(
        language=structure.language.name,
        domains={s: list(d) for s, d in structure.domains.items()},
        functions={f: [list(args) + [v] for args, v in table.items()] for f, table in structure.functions.items()},
        relations={r: sorted(list(row) for row in rows) for r, rows in structure.relations.items()},
        constants=dict(structure.constants),
    )


_NAMED = re.compile(r"^(?P<kind>Z/|F|N|M)(?P<n>\d+)$")


def resolve_structure(spec: str) -> FiniteStructure:
    """A builder name (gamma2, Z/6, F4, N2, M2) or a JSON structure file."""
    if spec in TOURNAMENTS:
        return TOURNAMENTS[spec]()
    match = _NAMED.match(spec)
    if match:
        kind, n = match.group("kind"), int(match.group("n"))
        if kind == "Z/":
            return modular_ring(n)
        if kind == "F":
            return finite_field(n)
        m, big_n = tournament_models(n)
        return big_n if kind == "N" else m
    path = Path(spec)
    if not path.exists():
        raise EvaluationError(f"unknown structure {spec!r}")
    return from_file(StructureFile.model_validate_json(path.read_text()), name=path.stem)
