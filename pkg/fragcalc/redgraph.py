"""
The many-one reduction graph between theory fragments of the residue field k,
the Laurent series field (k((t)), v) and its expansion by the uniformizer t.

Nodes are theories; an edge A -> B means A many-one reduces to B. Edges carry
the hypotheses under which the reduction holds. Queries run on the subgraph of
edges whose hypotheses are all assumed.
"""
from collections import deque
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple
import logging

import networkx as nx

from fragcalc.errors import GraphQueryError
from fragcalc.fragments import FragmentDescriptor, parse_descriptor
from fragcalc.models import (
    ClassesResponse, EdgeKind, EdgeRecord, GraphDump, Hypothesis, NodeRecord,
    PathResponse, StructureKind,
)

logger = logging.getLogger(__name__)

R4 = Hypothesis.R4
CHAR_ZERO = Hypothesis.CHAR_ZERO
K_FINITE = Hypothesis.K_FINITE
K_PERFECT = Hypothesis.K_PERFECT

LANGUAGE_TAGS = {
    StructureKind.RESIDUE: "ring",
    StructureKind.LAURENT: "val",
    StructureKind.LAURENT_UNIFORMIZER: "val+t",
}


class TheoryNode(NamedTuple):
    id: str
    structure: StructureKind
    fragment: str
    colour: str

    @property
    def descriptor(self) -> FragmentDescriptor:
        return parse_descriptor(self.fragment)

    @property
    def label(self) -> str:
        return f"Th[{self.fragment}]({self.structure.value})"


class ReductionEdge(NamedTuple):
    src: str
    dst: str
    kind: EdgeKind
    conditions: FrozenSet[Hypothesis] = frozenset()
    provenance: str = "inclusion"
    operation: Optional[str] = None
    style: str = "solid"

    def enabled(self, assumptions: FrozenSet[Hypothesis]) -> bool:
        return self.conditions <= assumptions

    def record(self) -> EdgeRecord:
        return EdgeRecord(
            src=self.src, dst=self.dst, kind=self.kind,
            conditions=sorted(self.conditions, key=lambda h: h.value),
            provenance=self.provenance, operation=self.operation, style=self.style,
        )


_K, _V, _VT = StructureKind.RESIDUE, StructureKind.LAURENT, StructureKind.LAURENT_UNIFORMIZER

# E1 stands for the family of existential theories in n variables.
NODES: Tuple[TheoryNode, ...] = (
    TheoryNode("F1", _K, "E1", "grey"),
    TheoryNode("F2", _K, "E", "grey"),
    TheoryNode("F3", _K, "A1 E", "grey"),
    TheoryNode("F5", _K, "A2 E", "grey"),
    TheoryNode("F6", _K, "A E", "grey"),
    TheoryNode("F8", _K, "Form", "grey"),
    TheoryNode("VF1", _V, "E1", "grey"),
    TheoryNode("VF2", _V, "E", "grey"),
    TheoryNode("VF3", _V, "A1@k E", "grey"),
    TheoryNode("VFa6", _V, "A@k E", "grey"),
    TheoryNode("VFb4", _V, "A1 E", "orange"),
    TheoryNode("VFb5", _V, "A2 E", "blue"),
    TheoryNode("VF7", _V, "A E", "blue"),
    TheoryNode("VF8", _V, "Form", "pink"),
    TheoryNode("VFPI2", _VT, "E", "orange"),
    TheoryNode("VFPI3", _VT, "A1@k E", "orange"),
    TheoryNode("VFPIa6", _VT, "A@k E", "orange"),
    TheoryNode("VFPIb4", _VT, "A1 E", "blue"),
    TheoryNode("VFPI7", _VT, "A E", "blue"),
    TheoryNode("VFPI8", _VT, "Form", "pink"),
)

_INCLUSIONS = (
    ("F1", "F2"), ("F2", "F3"), ("F3", "F5"), ("F5", "F6"), ("F6", "F8"),
    ("VF1", "VF2"), ("VF2", "VF3"), ("VF2", "VFb4"), ("VF3", "VFa6"), ("VF3", "VFb4"),
    ("VFb4", "VFb5"), ("VFb5", "VF7"), ("VFa6", "VF7"), ("VF7", "VF8"),
    ("VFPI2", "VFPI3"), ("VFPI2", "VFPIb4"), ("VFPI3", "VFPIa6"), ("VFPI3", "VFPIb4"),
    ("VFPIa6", "VFPI7"), ("VFPIb4", "VFPI7"), ("VFPI7", "VFPI8"),
    ("F1", "VF1"), ("F2", "VF2"), ("F3", "VF3"), ("F5", "VFb5"), ("F6", "VFa6"),
    ("F6", "VF7"), ("F8", "VF8"),
    ("VF2", "VFPI2"), ("VF3", "VFPI3"), ("VFa6", "VFPIa6"), ("VFb4", "VFPIb4"),
    ("VF7", "VFPI7"), ("VF8", "VFPI8"),
)


def _cited(src: str, dst: str, provenance: str, style: str, *conditions: Hypothesis) -> ReductionEdge:
    return ReductionEdge(src, dst, EdgeKind.CITED, frozenset(conditions), provenance, None, style)


def _constructed(src: str, dst: str, provenance: str, operation: str, *conditions: Hypothesis) -> ReductionEdge:
    style = "dashed" if conditions else "solid"
    return ReductionEdge(src, dst, EdgeKind.CONSTRUCTED, frozenset(conditions), provenance, operation, style)


EDGES: Tuple[ReductionEdge, ...] = tuple(
    ReductionEdge(src, dst, EdgeKind.TRIVIAL_INCLUSION) for src, dst in _INCLUSIONS
) + (
    _cited("VF1", "F1", "existential-transfer", "solid"),
    _cited("VF2", "F2", "existential-transfer", "solid"),
    _cited("VFPI2", "F2", "resolution-transfer", "dotted", R4),
    _cited("VFPIa6", "F6", "resolution-transfer", "dotted", R4),
    _cited("VFb4", "F3", "resolution-a1e-transfer", "dotted", R4),
    _cited("VF7", "F6", "char-zero-ae-transfer", "dashed", CHAR_ZERO),
    _cited("VF8", "F8", "char-zero-transfer", "dashed", CHAR_ZERO),
    _constructed("VFa6", "VF3", "finite-residue", "tau_finite_residue", K_FINITE),
    _constructed("VF3", "VF2", "finite-residue", "tau_finite_residue", K_FINITE),
    _constructed("VFPI3", "VFPI2", "finite-residue", "tau_finite_residue", K_FINITE),
    _constructed("VFPIa6", "VFPI3", "finite-residue", "tau_finite_residue", K_FINITE),
    _constructed("VFPI7", "VFPIb4", "p-basis-coding", "tau_param", K_PERFECT),
    _constructed("VFPIb4", "VFb5", "drop-uniformizer", "tau_drop_pi_closed"),
    _constructed("VFPI7", "VF7", "drop-uniformizer", "tau_drop_pi"),
    _constructed("VFPI8", "VF8", "drop-uniformizer", "tau_drop_pi"),
    _constructed("VFb4", "VFPI2", "a1e-to-existential", "tau_A1E_to_E", K_FINITE),
    _constructed("VFPI2", "VFb4", "drop-uniformizer", "tau_drop_pi"),
)


# Hypotheses

def close_assumptions(assumptions: Iterable[Hypothesis]) -> FrozenSet[Hypothesis]:
    """Add what finiteness of k implies and reject contradictory sets."""
    closed = {Hypothesis(a) for a in assumptions}
    if Hypothesis.K_FINITE in closed:
        closed |= {Hypothesis.K_PERFECT, Hypothesis.CHAR_P}
    if Hypothesis.CHAR_ZERO in closed and Hypothesis.CHAR_P in closed:
        raise GraphQueryError("charZero contradicts charP (kFinite implies charP)")
    return frozenset(closed)


def parse_assumptions(text: Optional[str]) -> FrozenSet[Hypothesis]:
    """Comma-separated hypothesis names; "none" or empty means no assumptions."""
    if not text or text.strip() in ("none", "{}"):
        return frozenset()
    names = [part.strip() for part in text.strip("{} ").split(",") if part.strip()]
    try:
        return frozenset(Hypothesis(name) for name in names)
    except ValueError as e:
        choices = ", ".join(h.value for h in Hypothesis)
        raise GraphQueryError(f"{e}; expected some of {choices}")


# Graph

@lru_cache()
def build_graph() -> nx.MultiDiGraph:
    """The full reduction graph; built once and shared, do not mutate."""
    graph = nx.MultiDiGraph()
    for n in NODES:
        graph.add_node(n.id, node=n)
    for edge in EDGES:
        graph.add_edge(edge.src, edge.dst, key=edge.provenance, edge=edge)
    logger.debug(f"reduction graph: {graph.number_of_nodes()} nodes, {graph.number_of_edges()} edges")
    return graph


def laurent_nodes() -> List[TheoryNode]:
    """The boxes over the two Laurent series structures."""
    return [n for n in NODES if n.structure != StructureKind.RESIDUE]


def node(node_id: str) -> TheoryNode:
    graph = build_graph()
    if node_id not in graph:
        raise GraphQueryError(f"unknown node {node_id}; known: {', '.join(n.id for n in NODES)}")
    return graph.nodes[node_id]["node"]


def edge_between(src: str, dst: str) -> List[ReductionEdge]:
    graph = build_graph()
    node(src)
    node(dst)
    return [data["edge"] for data in graph.get_edge_data(src, dst, default={}).values()]


def enabled_graph(assumptions: Iterable[Hypothesis]) -> nx.DiGraph:
    """Simple digraph of the edges enabled under the closed assumptions."""
    closed = close_assumptions(assumptions)
    graph = nx.DiGraph()
    graph.add_nodes_from(n.id for n in NODES)
    graph.add_edges_from((e.src, e.dst) for e in EDGES if e.enabled(closed))
    return graph


def _out_edges(source: str, closed: FrozenSet[Hypothesis]) -> List[ReductionEdge]:
    graph = build_graph()
    edges = [data["edge"] for _, _, data in graph.out_edges(source, data=True)]
    return sorted((e for e in edges if e.enabled(closed)), key=lambda e: (e.provenance, e.dst))


def reduction_path(src: str, dst: str, assumptions: Iterable[Hypothesis] = ()) -> Optional[List[ReductionEdge]]:
    """
    Shortest chain of enabled reductions from src to dst, or None.

    Breadth-first search visiting out-edges in provenance order, so equal
    length paths are resolved the same way on every run.
    """
    node(src)
    node(dst)
    closed = close_assumptions(assumptions)
    if src == dst:
        return []
    reached: Dict[str, Optional[ReductionEdge]] = {src: None}
    queue = deque([src])
    while queue:
        current = queue.popleft()
        for edge in _out_edges(current, closed):
            if edge.dst in reached:
                continue
            reached[edge.dst] = edge
            if edge.dst == dst:
                path = []
                at = dst
                while reached[at] is not None:
                    path.append(reached[at])
                    at = reached[at].src
                logger.info(f"path {src} -> {dst}: {len(path)} edges, visited {len(reached)} nodes")
                return list(reversed(path))
            queue.append(edge.dst)
    logger.info(f"no path {src} -> {dst} under {sorted(h.value for h in closed)}")
    return None


def reachable(src: str, dst: str, assumptions: Iterable[Hypothesis] = ()) -> bool:
    node(src)
    node(dst)
    return nx.has_path(enabled_graph(assumptions), src, dst)


def equivalence_classes(assumptions: Iterable[Hypothesis] = ()) -> List[List[str]]:
    """Mutual reachability classes, each sorted by node order, largest first."""
    order = {n.id: i for i, n in enumerate(NODES)}
    classes = [sorted(c, key=order.get) for c in nx.strongly_connected_components(enabled_graph(assumptions))]
    return sorted(classes, key=lambda c: (-len(c), order[c[0]]))


def class_of(node_id: str, assumptions: Iterable[Hypothesis] = ()) -> Set[str]:
    node(node_id)
    for members in equivalence_classes(assumptions):
        if node_id in members:
            return set(members)
    return {node_id}


def colour_groups(colours: Sequence[str] = ("orange", "blue", "pink")) -> Dict[str, List[str]]:
    """Nodes sharing a highlight colour; grey marks no claim."""
    return {c: [n.id for n in NODES if n.colour == c] for c in colours}


# Output records

def node_record(n: TheoryNode) -> NodeRecord:
    return NodeRecord(id=n.id, label=n.label, structure=n.structure, fragment=n.fragment,
                      language=LANGUAGE_TAGS[n.structure], colour=n.colour)


def graph_dump() -> GraphDump:
    return GraphDump(nodes=[node_record(n) for n in NODES], edges=[e.record() for e in EDGES])


def path_response(src: str, dst: str, assumptions: Iterable[Hypothesis] = ()) -> PathResponse:
    assumptions = frozenset(assumptions)
    path = reduction_path(src, dst, assumptions)
    edges = path or []
    return PathResponse(
        src=src, dst=dst, assumptions=sorted(assumptions, key=lambda h: h.value),
        found=path is not None,
        edges=[e.record() for e in edges],
        cited_only=[f"{e.src}->{e.dst}" for e in edges if e.kind == EdgeKind.CITED],
    )


def classes_response(assumptions: Iterable[Hypothesis] = ()) -> ClassesResponse:
    assumptions = frozenset(assumptions)
    return ClassesResponse(assumptions=sorted(assumptions, key=lambda h: h.value),
                           classes=equivalence_classes(assumptions))


def format_edge(edge: ReductionEdge) -> str:
    conditions = ",".join(sorted(h.value for h in edge.conditions)) or "-"
    tail = f" [{edge.operation}]" if edge.operation else ""
    if edge.kind == EdgeKind.CITED:
        tail = " [cited, no in-repo reduction]"
    return f"{edge.src} -> {edge.dst}  {edge.kind.value}  {edge.provenance}  {conditions}{tail}"
