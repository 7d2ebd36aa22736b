"""
Enumerations and Pydantic schemas for file formats and command output.
"""
from enum import Enum
from typing import Dict, List, Optional, Union
from pydantic import BaseModel, Field


class Hypothesis(str, Enum):
    """Assumptions that enable conditional reductions."""
    R4 = "R4"
    CHAR_ZERO = "charZero"
    CHAR_P = "charP"
    K_FINITE = "kFinite"
    K_PERFECT = "kPerfect"


class EdgeKind(str, Enum):
    """How a reduction edge is justified."""
    TRIVIAL_INCLUSION = "trivialInclusion"
    CONSTRUCTED = "constructed"
    CITED = "cited"


class StructureKind(str, Enum):
    """The three structures of the reduction graph."""
    RESIDUE = "k"
    LAURENT = "k((t))+v"
    LAURENT_UNIFORMIZER = "k((t))+v+t"


class SearchStatus(str, Enum):
    """Outcome of a bounded witness search."""
    SAT = "sat"
    UNKNOWN = "unknown"
    REFUTED = "refuted"


class Diagnostic(BaseModel):
    """A well-sortedness or parse problem located by an AST path."""
    message: str
    path: List[int] = Field(default_factory=list)
    severity: str = "error"

    def __str__(self) -> str:
        where = ".".join(map(str, self.path)) or "root"
        return f"{self.severity} at {where}: {self.message}"


# File formats

Element = Union[int, str]


class StructureFile(BaseModel):
    """Finite structure: carriers and interpretation tables."""
    language: str = "ring"
    domains: Dict[str, List[Element]]
    functions: Dict[str, List[List[Element]]] = Field(default_factory=dict)
    relations: Dict[str, List[List[Element]]] = Field(default_factory=dict)
    constants: Dict[str, Element] = Field(default_factory=dict)


class CurveDatumFile(BaseModel):
    """Plane curve f(x, y) = 0 over Q or F_p, with asserted hypotheses."""
    field: str = "Q"
    monomials: List[List[Union[int, str]]]
    genus_at_least_two: bool = False
    separable_in_y: bool = False
    perfect: bool = False


# Command output

class ParseResponse(BaseModel):
    formula: str
    free_variables: List[str]


class ClassifyResponse(BaseModel):
    formula: str
    fragment: str
    member: bool


class PrenexResponse(BaseModel):
    formula: str
    fragment: str
    prenex: str
    prefix_length: int


class ReduceResponse(BaseModel):
    map: str
    input: Optional[str] = None
    output: List[str]
    target_fragment: Optional[str] = None
    parameters: Dict[str, Union[int, str, None]] = Field(default_factory=dict)


class EvalResponse(BaseModel):
    formula: str
    structure: str
    value: bool


class OracleResponse(BaseModel):
    operation: str
    input: str
    result: Union[bool, List[str], str]
    status: Optional[SearchStatus] = None
    witnesses: Dict[str, str] = Field(default_factory=dict)


class EdgeRecord(BaseModel):
    src: str
    dst: str
    kind: EdgeKind
    conditions: List[Hypothesis] = Field(default_factory=list)
    provenance: Optional[str] = None
    operation: Optional[str] = None
    style: str = "solid"


class NodeRecord(BaseModel):
    id: str
    label: str
    structure: StructureKind
    fragment: str
    language: str
    colour: Optional[str] = None


class PathResponse(BaseModel):
    src: str
    dst: str
    assumptions: List[Hypothesis]
    found: bool
    edges: List[EdgeRecord] = Field(default_factory=list)
    cited_only: List[str] = Field(default_factory=list)


class ClassesResponse(BaseModel):
    assumptions: List[Hypothesis]
    classes: List[List[str]]


class GraphDump(BaseModel):
    nodes: List[NodeRecord]
    edges: List[EdgeRecord]


class TournamentResponse(BaseModel):
    copies: int
    sentence: str
    in_forall_nested: bool
    in_forall_block: bool
    holds_in_n: bool
    holds_in_m: bool


class ErrorResponse(BaseModel):
    error: str
    kind: str
